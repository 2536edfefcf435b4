#pragma once

// Static SVG time-series plots with safety-limit lines.

#include "dscc/sim.hpp"

#include <string>
#include <vector>

namespace dscc {

struct PlotSeries {
    std::string label;
    std::vector<double> t;
    std::vector<double> y;
};

struct LimitLine {
    std::string label;
    double value = 0.0;
};

/// One chart. Series longer than `max_points` are min-max decimated per pixel
/// column, so spikes survive.
std::string render_svg(const std::string& title, const std::string& y_label, const std::vector<PlotSeries>& series,
                       const std::vector<LimitLine>& limits = {}, std::size_t max_points = 2000);

/// Writes one SVG per state and applied input into dir; returns the file paths.
std::vector<std::string> render_plots(const std::vector<TraceRecord>& trace, std::size_t num_sources,
                                      const ControllerConfig* cfg, const std::string& dir);

/// Overlays two traces signal by signal (same layout required).
std::vector<std::string> render_comparison(const std::vector<TraceRecord>& a, const std::string& label_a,
                                           const std::vector<TraceRecord>& b, const std::string& label_b,
                                           std::size_t num_sources, const ControllerConfig* cfg,
                                           const std::string& dir);

}  // namespace dscc
