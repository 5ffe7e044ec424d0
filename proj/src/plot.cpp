#include "morl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "morl/rng.hpp"

namespace morl {

BootstrapBand bootstrap_ci(const std::vector<double>& values, std::uint64_t seed,
                           int resamples, double coverage) {
    if (values.empty()) throw std::invalid_argument("bootstrap over empty sample");
    Rng rng(seed);
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) s += values[rng.index(values.size())];
        m = s / static_cast<double>(values.size());
    }
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - coverage) / 2.0;
    auto pick = [&](double q) {
        const double pos = q * (static_cast<double>(means.size()) - 1.0);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        if (i + 1 >= means.size()) return means.back();
        return means[i] * (1.0 - frac) + means[i + 1] * frac;
    };
    return {pick(tail), pick(1.0 - tail)};
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

struct Canvas {
    static constexpr double width = 720, height = 480;
    static constexpr double left = 80, right = 40, top = 40, bottom = 60;
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

    double px(double x) const {
        return left + (x - x_min) / (x_max - x_min) * (width - left - right);
    }
    double py(double y) const {
        return height - bottom - (y - y_min) / (y_max - y_min) * (height - top - bottom);
    }
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void expand_range(double& lo, double& hi) {
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    } else {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
}

void svg_header(std::ofstream& f) {
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Canvas::width
      << "\" height=\"" << Canvas::height << "\" viewBox=\"0 0 " << Canvas::width << ' '
      << Canvas::height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void svg_axes(std::ofstream& f, const Canvas& c, const std::string& x_label,
              const std::string& y_label) {
    f << "<line x1=\"" << c.px(c.x_min) << "\" y1=\"" << c.py(c.y_min) << "\" x2=\""
      << c.px(c.x_max) << "\" y2=\"" << c.py(c.y_min) << "\" stroke=\"black\"/>\n";
    f << "<line x1=\"" << c.px(c.x_min) << "\" y1=\"" << c.py(c.y_min) << "\" x2=\""
      << c.px(c.x_min) << "\" y2=\"" << c.py(c.y_max) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double x = c.x_min + (c.x_max - c.x_min) * i / 4.0;
        const double y = c.y_min + (c.y_max - c.y_min) * i / 4.0;
        f << "<text x=\"" << c.px(x) << "\" y=\"" << Canvas::height - Canvas::bottom + 20
          << "\" font-size=\"11\" text-anchor=\"middle\">" << num(x) << "</text>\n";
        f << "<text x=\"" << Canvas::left - 8 << "\" y=\"" << c.py(y) + 4
          << "\" font-size=\"11\" text-anchor=\"end\">" << num(y) << "</text>\n";
    }
    f << "<text x=\"" << (Canvas::left + Canvas::width - Canvas::right) / 2 << "\" y=\""
      << Canvas::height - 16 << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label
      << "</text>\n";
    f << "<text x=\"18\" y=\"" << (Canvas::top + Canvas::height - Canvas::bottom) / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (Canvas::top + Canvas::height - Canvas::bottom) / 2 << ")\">" << y_label
      << "</text>\n";
}

void svg_legend(std::ofstream& f, const std::vector<std::string>& labels) {
    double y = Canvas::top + 6;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const char* color = kPalette[i % 8];
        f << "<rect x=\"" << Canvas::width - Canvas::right - 150 << "\" y=\"" << y - 9
          << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
        f << "<text x=\"" << Canvas::width - Canvas::right - 133 << "\" y=\"" << y + 2
          << "\" font-size=\"12\">" << labels[i] << "</text>\n";
        y += 18;
    }
}

}  // namespace

void write_curve_svg(const std::vector<CurveGroup>& groups, const std::string& y_label,
                     const std::string& path, std::uint64_t bootstrap_seed) {
    if (groups.empty()) throw std::invalid_argument("no curve groups to plot");
    Canvas c;
    c.x_min = 1e300; c.x_max = -1e300; c.y_min = 1e300; c.y_max = -1e300;
    for (const auto& g : groups) {
        for (double s : g.steps) {
            c.x_min = std::min(c.x_min, s);
            c.x_max = std::max(c.x_max, s);
        }
        for (const auto& curve : g.per_seed)
            for (double v : curve) {
                c.y_min = std::min(c.y_min, v);
                c.y_max = std::max(c.y_max, v);
            }
    }
    expand_range(c.x_min, c.x_max);
    expand_range(c.y_min, c.y_max);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    svg_header(f);
    std::vector<std::string> labels;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        labels.push_back(g.label);
        const char* color = kPalette[gi % 8];
        const std::size_t n = g.steps.size();
        std::vector<double> mean(n, 0.0);
        std::vector<BootstrapBand> bands(n);
        const bool with_band = g.per_seed.size() >= 2;
        if (!with_band)
            std::cerr << "plot: group '" << g.label
                      << "' has fewer than 2 seeds; drawing raw curves without a band\n";
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> at;
            for (const auto& curve : g.per_seed)
                if (i < curve.size()) at.push_back(curve[i]);
            double s = 0.0;
            for (double v : at) s += v;
            mean[i] = at.empty() ? 0.0 : s / static_cast<double>(at.size());
            if (with_band)
                bands[i] = bootstrap_ci(at, Rng::derive(bootstrap_seed, gi * 100000 + i));
        }
        if (with_band) {
            f << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < n; ++i)
                f << c.px(g.steps[i]) << ',' << c.py(bands[i].hi) << ' ';
            for (std::size_t i = n; i-- > 0;)
                f << c.px(g.steps[i]) << ',' << c.py(bands[i].lo) << ' ';
            f << "\"/>\n";
        } else {
            for (const auto& curve : g.per_seed) {
                f << "<polyline fill=\"none\" stroke=\"" << color
                  << "\" stroke-opacity=\"0.45\" stroke-width=\"1\" points=\"";
                for (std::size_t i = 0; i < std::min(n, curve.size()); ++i)
                    f << c.px(g.steps[i]) << ',' << c.py(curve[i]) << ' ';
                f << "\"/>\n";
            }
        }
        f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < n; ++i) f << c.px(g.steps[i]) << ',' << c.py(mean[i]) << ' ';
        f << "\"/>\n";
    }
    svg_axes(f, c, "environment steps", y_label);
    svg_legend(f, labels);
    f << "</svg>\n";
}

void write_pareto_svg(const std::vector<ParetoPoint>& points, const std::string& path) {
    if (points.empty()) throw std::invalid_argument("no pareto points to plot");
    Canvas c;
    c.x_min = 1e300; c.x_max = -1e300; c.y_min = 1e300; c.y_max = -1e300;
    for (const auto& p : points) {
        c.x_min = std::min(c.x_min, p.mean_final_energy);
        c.x_max = std::max(c.x_max, p.mean_final_energy);
        c.y_min = std::min(c.y_min, p.mean_final_return);
        c.y_max = std::max(c.y_max, p.mean_final_return);
        for (const auto& [e, r] : p.per_seed) {
            c.x_min = std::min(c.x_min, e);
            c.x_max = std::max(c.x_max, e);
            c.y_min = std::min(c.y_min, r);
            c.y_max = std::max(c.y_max, r);
        }
    }
    expand_range(c.x_min, c.x_max);
    expand_range(c.y_min, c.y_max);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    svg_header(f);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        labels.push_back(p.combiner_label);
        const char* color = kPalette[i % 8];
        // Per-seed values as lightly shaded markers, mean as a solid marker.
        for (const auto& [e, r] : p.per_seed)
            f << "<circle cx=\"" << c.px(e) << "\" cy=\"" << c.py(r)
              << "\" r=\"4\" fill=\"" << color << "\" fill-opacity=\"0.3\"/>\n";
        f << "<circle cx=\"" << c.px(p.mean_final_energy) << "\" cy=\""
          << c.py(p.mean_final_return) << "\" r=\"6\" fill=\"" << color << "\"/>\n";
    }
    svg_axes(f, c, "mean episode energy", "mean episode return");
    svg_legend(f, labels);
    f << "</svg>\n";
}

}  // namespace morl
