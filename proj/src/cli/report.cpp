#include "daseg/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "daseg/error.hpp"
#include "daseg/eval/metrics.hpp"

namespace daseg {

BoxStats box_stats(std::vector<double> values) {
    if (values.empty()) throw StatisticsError("box plot of an empty group");
    std::sort(values.begin(), values.end());
    BoxStats b;
    b.n = values.size();
    b.q1 = percentile(values, 0.25);
    b.median = percentile(values, 0.5);
    b.q3 = percentile(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo = b.q1 - 1.5 * iqr;
    const double hi = b.q3 + 1.5 * iqr;
    b.whisker_low = b.q1;
    b.whisker_high = b.q3;
    for (const auto v : values) {
        if (v < lo || v > hi) {
            b.outliers.push_back(v);
        } else {
            b.whisker_low = std::min(b.whisker_low, v);
            b.whisker_high = std::max(b.whisker_high, v);
        }
    }
    return b;
}

std::string render_box_plot_svg(const std::string& title, const std::string& y_label, std::span<const PlotSeries> series) {
    constexpr double width_per_box = 90.0;
    constexpr double left = 70.0, right = 20.0, top = 40.0, bottom = 60.0, plot_h = 300.0;
    const double plot_w = width_per_box * static_cast<double>(std::max<std::size_t>(series.size(), 1));
    const double w = left + plot_w + right;
    const double h = top + plot_h + bottom;

    double lo = INFINITY, hi = -INFINITY;
    for (const auto& s : series) {
        for (const auto v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto y = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        w, h);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", w / 2, title);
    svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", left, top,
                       top + plot_h);
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", left, y(v),
                           left + plot_w, y(v));
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", left - 6, y(v) + 4, v);
    }
    svg += fmt::format("<text x=\"16\" y=\"{:.1f}\" transform=\"rotate(-90 16 {:.1f})\" text-anchor=\"middle\">{}</text>\n",
                       top + plot_h / 2, top + plot_h / 2, y_label);

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const double cx = left + width_per_box * (static_cast<double>(i) + 0.5);
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", cx, top + plot_h + 20,
                           s.label);
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" fill=\"#666\">n={}</text>\n", cx,
                           top + plot_h + 36, s.values.size());
        if (s.values.empty()) continue;
        const auto b = box_stats(s.values);
        const double bw = width_per_box * 0.5;
        svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", cx,
                           y(b.whisker_high), y(b.q3));
        svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", cx,
                           y(b.q1), y(b.whisker_low));
        svg += fmt::format(
            "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"#9ecae1\" stroke=\"black\"/>\n",
            cx - bw / 2, y(b.q3), bw, std::max(0.5, y(b.q1) - y(b.q3)));
        svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\" "
                           "stroke-width=\"2\"/>\n",
                           cx - bw / 2, y(b.median), cx + bw / 2, y(b.median));
        for (const auto o : b.outliers) {
            svg += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>\n", cx, y(o));
        }
    }
    svg += "</svg>\n";
    return svg;
}

ReportResult write_report(const std::filesystem::path& out_dir, std::span<const MetricsRecord> records,
                          const EvalOptions& options) {
    if (records.empty()) throw DataError("no metrics records to report");
    std::filesystem::create_directories(out_dir);
    ReportResult res;

    std::vector<std::string> models;
    for (const auto& r : records) {
        if (std::find(models.begin(), models.end(), r.model_tag) == models.end()) models.push_back(r.model_tag);
    }
    std::sort(models.begin(), models.end());

    for (const std::string metric : {"dice", "hd95"}) {
        for (const auto region : kRegions) {
            std::vector<PlotSeries> series;
            std::size_t total = 0;
            for (const auto& m : models) {
                PlotSeries s{m, {}};
                for (const auto& r : records) {
                    if (r.model_tag != m || r.region != region) continue;
                    const double v = metric == "dice" ? r.dice : r.hd95;
                    if (!std::isfinite(v)) continue;
                    if (metric == "hd95" && !options.include_sentinel && v == options.hd95_sentinel) continue;
                    s.values.push_back(v);
                }
                total += s.values.size();
                series.push_back(std::move(s));
            }
            const auto name = fmt::format("{}_{}.svg", metric, to_string(region));
            if (total == 0) {
                res.notices.push_back(fmt::format("{} omitted: no {} values for region {}", name, metric, to_string(region)));
                continue;
            }
            const auto title = fmt::format("{} {}", metric == "dice" ? "DSC" : "HD95", to_string(region));
            std::ofstream(out_dir / name) << render_box_plot_svg(title, metric == "dice" ? "DSC" : "HD95 (mm)", series);
            res.plots.push_back(out_dir / name);
        }
    }

    const auto table = aggregate_metrics(records, options);
    std::string md = "# Evaluation summary\n\n";
    md += fmt::format("Models: {}. HD95 sentinel {:.2f} mm, {} in statistics.\n\n", fmt::join(models, ", "),
                      options.hd95_sentinel, options.include_sentinel ? "included" : "excluded");
    md += "| model | region | n | mean DSC | median DSC | mean HD95 | median HD95 |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const auto& row : table.rows) {
        md += fmt::format("| {} | {} | {} | {:.4f} | {:.4f} | {:.2f} | {:.2f} |\n", row.model_tag, to_string(row.region),
                          row.n, row.mean_dice, row.median_dice, row.mean_hd95, row.median_hd95);
    }
    md += "\n## Plots\n\n";
    for (const auto& p : res.plots) md += fmt::format("- [{0}]({0})\n", p.filename().string());
    for (const auto& n : res.notices) md += fmt::format("- {}\n", n);
    res.summary = out_dir / "summary.md";
    std::ofstream(res.summary) << md;
    return res;
}

}  // namespace daseg
