#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "daseg/data/case.hpp"
#include "daseg/eval/metrics.hpp"
#include "daseg/eval/regions.hpp"
#include "daseg/eval/stats.hpp"

namespace daseg {

struct MetricsRecord {
    std::string model_tag;
    int fold = -1;
    std::string case_id;
    Region region = Region::wt;
    double dice = 0.0;
    double hd95 = 0.0;

    bool operator==(const MetricsRecord&) const = default;
};

/// Ground truth for one evaluated case.
struct Reference {
    std::string case_id;
    LabelMap labels;
    Spacing3 spacing{1.0, 1.0, 1.0};
};

struct EvalOptions {
    double hd95_sentinel = kDefaultHd95Sentinel;
    /// Whether sentinel HD95 values enter aggregate means/medians.
    bool include_sentinel = true;
};

/// One record per (case, region) in reference order, regions ET, TC, WT.
/// Every reference id must have a prediction.
std::vector<MetricsRecord> evaluate_cases(const std::map<std::string, RegionMasks>& predictions,
                                          std::span<const Reference> references, const EvalOptions& options = {},
                                          const std::string& model_tag = "", int fold = -1);
std::vector<MetricsRecord> evaluate_cases(const std::map<std::string, LabelMap>& predictions,
                                          std::span<const Reference> references, const EvalOptions& options = {},
                                          const std::string& model_tag = "", int fold = -1);

/// References whose ground-truth ET voxel count is at least `min_et_voxels`.
std::vector<Reference> filter_small_et(std::span<const Reference> references, std::int64_t min_et_voxels = 60);
/// Records of cases that pass the same criterion.
std::vector<MetricsRecord> filter_small_et(std::span<const MetricsRecord> records,
                                           std::span<const Reference> references, std::int64_t min_et_voxels = 60);

struct AggregateRow {
    std::string model_tag;
    Region region = Region::wt;
    std::int64_t n = 0;
    std::int64_t n_hd95 = 0;  // values entering the HD95 statistics
    double mean_dice = 0.0;
    double median_dice = 0.0;
    double mean_hd95 = 0.0;
    double median_hd95 = 0.0;
};

struct AggregateTable {
    std::vector<AggregateRow> rows;  // sorted by model tag, then region (ET, TC, WT)
    double hd95_sentinel = kDefaultHd95Sentinel;
    bool include_sentinel = true;

    const AggregateRow& at(const std::string& model_tag, Region region) const;
    std::vector<std::string> models() const;
};

/// Even-count median is the midpoint of the two central order statistics.
double median(std::vector<double> values);
double mean(std::span<const double> values);

/// Per (model, region) mean and median of Dice and HD95. Throws if there are no records or
/// if models were evaluated on different case sets.
AggregateTable aggregate_metrics(std::span<const MetricsRecord> records, const EvalOptions& options = {});

struct SignificanceRow {
    std::string model_a;
    std::string model_b;
    Region region = Region::wt;
    std::string metric;  // "dice" or "hd95"
    std::int64_t n = 0;
    std::optional<TTestResult> result;  // empty when degenerate
    std::string note;
};

/// Paired t-tests for every model pair, region and metric, pairing records by case id.
std::vector<SignificanceRow> pairwise_significance(std::span<const MetricsRecord> records);

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);
void write_aggregate_csv(const std::filesystem::path& path, const AggregateTable& table);
/// Plain-text table: one row per model, mean/median DSC and HD95 for ET, TC, WT.
std::string format_aggregate_table(const AggregateTable& table);
void write_significance_csv(const std::filesystem::path& path, std::span<const SignificanceRow> rows);
std::string format_significance(std::span<const SignificanceRow> rows);

}  // namespace daseg
