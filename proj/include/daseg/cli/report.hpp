#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "daseg/eval/records.hpp"

namespace daseg {

struct BoxStats {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_low = 0.0;   // most extreme value within 1.5 IQR of the box
    double whisker_high = 0.0;
    std::vector<double> outliers;
    std::size_t n = 0;
};

BoxStats box_stats(std::vector<double> values);

struct PlotSeries {
    std::string label;
    std::vector<double> values;
};

/// Standalone SVG box plot, one box per series.
std::string render_box_plot_svg(const std::string& title, const std::string& y_label, std::span<const PlotSeries> series);

struct ReportResult {
    std::vector<std::filesystem::path> plots;
    std::vector<std::string> notices;  // omitted plots and why
    std::filesystem::path summary;
};

/// Writes <metric>_<region>.svg for Dice and HD95 over ET, TC, WT (finite, non-sentinel HD95 values
/// only when the table excludes sentinels) and summary.md with the aggregate table.
ReportResult write_report(const std::filesystem::path& out_dir, std::span<const MetricsRecord> records,
                          const EvalOptions& options = {});

}  // namespace daseg
