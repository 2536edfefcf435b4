#include "dscc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

namespace dscc {
namespace {

constexpr double kWidth = 900.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

template <class... Args>
void append(std::string& out, fmt::format_string<Args...> f, Args&&... args) {
    fmt::format_to(std::back_inserter(out), f, std::forward<Args>(args)...);
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&':
                out += "&amp;";
                break;
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

// Indices kept by min-max decimation, in time order.
std::vector<std::size_t> decimate(const PlotSeries& s, double t0, double t1, std::size_t max_points) {
    std::vector<std::size_t> keep;
    const std::size_t n = s.t.size();
    if (n <= max_points || t1 <= t0) {
        for (std::size_t i = 0; i < n; ++i) {
            keep.push_back(i);
        }
        return keep;
    }
    const std::size_t bins = std::max<std::size_t>(1, max_points / 2);
    std::size_t i = 0;
    for (std::size_t b = 0; b < bins && i < n; ++b) {
        const double edge = t0 + (t1 - t0) * static_cast<double>(b + 1) / static_cast<double>(bins);
        std::size_t lo = i;
        std::size_t hi = i;
        const std::size_t first = i;
        while (i < n && (s.t[i] <= edge || b + 1 == bins)) {
            if (std::isnan(s.y[i])) {
                keep.push_back(i);  // keep gaps visible
            } else {
                if (!(s.y[i] >= s.y[lo]) || std::isnan(s.y[lo])) {
                    lo = i;
                }
                if (!(s.y[i] <= s.y[hi]) || std::isnan(s.y[hi])) {
                    hi = i;
                }
            }
            ++i;
        }
        if (i == first) {
            continue;
        }
        keep.push_back(std::min(lo, hi));
        if (lo != hi) {
            keep.push_back(std::max(lo, hi));
        }
    }
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    return keep;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << content) || !out.flush()) {
        throw std::runtime_error(path + ": cannot write file");
    }
}

struct SignalSpec {
    std::string name;
    std::string unit;
    std::vector<LimitLine> limits;
};

std::vector<SignalSpec> signal_specs(std::size_t num_sources, const ControllerConfig* cfg) {
    std::vector<SignalSpec> specs;
    for (const auto& n : SystemState::names(num_sources)) {
        specs.push_back({n, n[0] == 'v' ? "V" : "A", {}});
    }
    if (cfg != nullptr) {
        for (std::size_t j = 0; j < num_sources; ++j) {
            const Interval& lim = cfg->limits(j);
            specs[SystemState::v_index(j)].limits = {{"v_min", lim.min}, {"v_max", lim.max}};
        }
        specs[2 * num_sources + 1].limits = {{"i_f_min", cfg->i_f_limits.min}, {"i_f_max", cfg->i_f_limits.max}};
    }
    for (std::size_t j = 0; j < num_sources; ++j) {
        specs.push_back({fmt::format("i_s_{}", j + 1), "A", {}});
    }
    specs.push_back({"d_l", "1", {{"0", 0.0}, {"1", 1.0}}});
    return specs;
}

PlotSeries extract(const std::vector<TraceRecord>& trace, std::size_t column, std::size_t state_dim,
                   const std::string& label) {
    PlotSeries s;
    s.label = label;
    for (const auto& r : trace) {
        s.t.push_back(r.t);
        s.y.push_back(column < state_dim ? r.x[static_cast<Eigen::Index>(column)] : r.u_applied[column - state_dim]);
    }
    return s;
}

std::vector<std::string> render_set(const std::vector<std::pair<const std::vector<TraceRecord>*, std::string>>& sets,
                                    std::size_t num_sources, const ControllerConfig* cfg, const std::string& dir,
                                    const std::string& suffix) {
    for (const auto& [trace, label] : sets) {
        if (trace->empty()) {
            throw std::runtime_error("render_plots: empty trace");
        }
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error(dir + ": cannot create directory: " + ec.message());
    }
    const std::size_t n = 2 * num_sources + 3;
    const auto specs = signal_specs(num_sources, cfg);
    std::vector<std::string> paths;
    for (std::size_t c = 0; c < specs.size(); ++c) {
        std::vector<PlotSeries> series;
        for (const auto& [trace, label] : sets) {
            series.push_back(extract(*trace, c, n, label));
        }
        std::vector<LimitLine> limits;
        for (const auto& l : specs[c].limits) {
            if (std::isfinite(l.value)) {
                limits.push_back(l);
            }
        }
        const std::string path = (std::filesystem::path(dir) / (specs[c].name + suffix + ".svg")).string();
        write_file(path, render_svg(specs[c].name, specs[c].name + " [" + specs[c].unit + "]", series, limits));
        paths.push_back(path);
    }
    return paths;
}

}  // namespace

std::string render_svg(const std::string& title, const std::string& y_label, const std::vector<PlotSeries>& series,
                       const std::vector<LimitLine>& limits, std::size_t max_points) {
    double t0 = INFINITY, t1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.t.size(); ++i) {
            t0 = std::min(t0, s.t[i]);
            t1 = std::max(t1, s.t[i]);
            if (std::isfinite(s.y[i])) {
                y0 = std::min(y0, s.y[i]);
                y1 = std::max(y1, s.y[i]);
            }
        }
    }
    for (const auto& l : limits) {
        y0 = std::min(y0, l.value);
        y1 = std::max(y1, l.value);
    }
    if (!std::isfinite(t0)) {
        t0 = 0.0;
        t1 = 1.0;
    }
    if (!std::isfinite(y0)) {
        y0 = 0.0;
        y1 = 1.0;
    }
    if (t1 <= t0) {
        t1 = t0 + 1.0;
        t0 -= 1.0;
    }
    if (y1 <= y0) {
        const double pad = std::max(1.0, std::abs(y0) * 0.1);
        y0 -= pad;
        y1 += pad;
    } else {
        const double pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
    }
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto X = [&](double t) { return kLeft + (t - t0) / (t1 - t0) * pw; };
    auto Y = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

    std::string out;
    append(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    append(out, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n", kWidth,
        kHeight);
    append(out, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, kHeight);
    append(out, "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        kWidth / 2, escape(title));
    append(out, "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", kLeft, kTop, pw, ph);
    for (int i = 0; i <= 5; ++i) {
        const double ty = y0 + (y1 - y0) * i / 5.0;
        const double tt = t0 + (t1 - t0) * i / 5.0;
        append(out, "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>\n", kLeft, Y(ty),
            kLeft + pw);
        append(out, "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
            "text-anchor=\"end\">{:.4g}</text>\n",
            kLeft - 6, Y(ty) + 4, ty);
        append(out, "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
            "text-anchor=\"middle\">{:.4g}</text>\n",
            X(tt), kTop + ph + 16, tt);
    }
    append(out, "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
        "text-anchor=\"middle\">t [s]</text>\n",
        kLeft + pw / 2, kHeight - 10);
    append(out, "<text x=\"16\" y=\"{0:.2f}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
        "transform=\"rotate(-90 16 {0:.2f})\">{1}</text>\n",
        kTop + ph / 2, escape(y_label));
    for (const auto& l : limits) {
        append(out, "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#ff7f0e\" "
            "stroke-dasharray=\"6,4\"/>\n",
            kLeft, Y(l.value), kLeft + pw);
        append(out, "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#ff7f0e\" "
            "text-anchor=\"end\">{} = {:g}</text>\n",
            kLeft + pw - 4, Y(l.value) - 4, escape(l.label), l.value);
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kColors[si % 4];
        const auto keep = decimate(s, t0, t1, max_points);
        std::string points;
        auto flush = [&]() {
            if (!points.empty()) {
                append(out, "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n", color, points);
                points.clear();
            }
        };
        std::size_t finite = 0;
        for (std::size_t i : keep) {
            if (!std::isfinite(s.y[i])) {
                flush();
                continue;
            }
            fmt::format_to(std::back_inserter(points), "{}{:.2f},{:.2f}", points.empty() ? "" : " ", X(s.t[i]),
                           Y(std::clamp(s.y[i], y0, y1)));
            ++finite;
        }
        flush();
        if (finite == 1) {
            for (std::size_t i : keep) {
                if (std::isfinite(s.y[i])) {
                    append(out, "<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", X(s.t[i]), Y(s.y[i]), color);
                }
            }
        }
        if (!s.label.empty()) {
            append(out, "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>\n",
                kLeft + 8, kTop + 16 + 16 * static_cast<double>(si), color, escape(s.label));
        }
    }
    append(out, "</svg>\n");
    return out;
}

std::vector<std::string> render_plots(const std::vector<TraceRecord>& trace, std::size_t num_sources,
                                      const ControllerConfig* cfg, const std::string& dir) {
    return render_set({{&trace, ""}}, num_sources, cfg, dir, "");
}

std::vector<std::string> render_comparison(const std::vector<TraceRecord>& a, const std::string& label_a,
                                           const std::vector<TraceRecord>& b, const std::string& label_b,
                                           std::size_t num_sources, const ControllerConfig* cfg,
                                           const std::string& dir) {
    return render_set({{&a, label_a}, {&b, label_b}}, num_sources, cfg, dir, "_compare");
}

}  // namespace dscc
