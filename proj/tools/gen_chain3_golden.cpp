// Regenerates tests/data/chain3_golden.txt from the value-iteration oracle.
#include <cstdio>
#include "morl/envs.hpp"

int main() {
    morl::TabularMdp mdp = morl::make_chain3();
    auto vi = morl::value_iteration(mdp);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            std::printf("task %d %d %.17g\n", s, a, vi.q_task[s][a]);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            std::printf("energy %d %d %.17g\n", s, a, vi.q_energy[s][a]);
    return 0;
}
