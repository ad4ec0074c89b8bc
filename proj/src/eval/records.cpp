#include "daseg/eval/records.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace daseg {

namespace {

bool is_sentinel(double hd, const EvalOptions& o) { return hd == o.hd95_sentinel; }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::vector<MetricsRecord> evaluate_cases(const std::map<std::string, RegionMasks>& predictions,
                                          std::span<const Reference> references, const EvalOptions& options,
                                          const std::string& model_tag, int fold) {
    std::vector<MetricsRecord> out;
    out.reserve(references.size() * kRegions.size());
    for (const auto& ref : references) {
        const auto it = predictions.find(ref.case_id);
        if (it == predictions.end()) throw DataError("no prediction for reference case '" + ref.case_id + "'");
        const auto gt = compose_regions(ref.labels);
        const auto& pred = it->second;
        if (pred.shape() != gt.shape()) {
            throw ShapeError("prediction for '" + ref.case_id + "' has shape " + to_string(pred.shape()) +
                             ", reference " + to_string(gt.shape()));
        }
        for (const auto region : kRegions) {
            MetricsRecord r;
            r.model_tag = model_tag;
            r.fold = fold;
            r.case_id = ref.case_id;
            r.region = region;
            r.dice = dice_score(pred.get(region), gt.get(region));
            r.hd95 = hd95(pred.get(region), gt.get(region), ref.spacing, options.hd95_sentinel);
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::vector<MetricsRecord> evaluate_cases(const std::map<std::string, LabelMap>& predictions,
                                          std::span<const Reference> references, const EvalOptions& options,
                                          const std::string& model_tag, int fold) {
    std::map<std::string, RegionMasks> regions;
    for (const auto& [id, labels] : predictions) regions.emplace(id, compose_regions(labels));
    return evaluate_cases(regions, references, options, model_tag, fold);
}

std::vector<Reference> filter_small_et(std::span<const Reference> references, std::int64_t min_et_voxels) {
    std::vector<Reference> out;
    for (const auto& r : references) {
        if (r.labels.count(Tissue::et) >= min_et_voxels) out.push_back(r);
    }
    return out;
}

std::vector<MetricsRecord> filter_small_et(std::span<const MetricsRecord> records,
                                           std::span<const Reference> references, std::int64_t min_et_voxels) {
    std::set<std::string> keep;
    for (const auto& r : filter_small_et(references, min_et_voxels)) keep.insert(r.case_id);
    std::vector<MetricsRecord> out;
    for (const auto& r : records) {
        if (keep.count(r.case_id)) out.push_back(r);
    }
    return out;
}

double mean(std::span<const double> values) {
    if (values.empty()) throw StatisticsError("mean of an empty sample");
    double s = 0.0;
    for (const double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double median(std::vector<double> values) {
    if (values.empty()) throw StatisticsError("median of an empty sample");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

const AggregateRow& AggregateTable::at(const std::string& model_tag, Region region) const {
    for (const auto& r : rows) {
        if (r.model_tag == model_tag && r.region == region) return r;
    }
    throw DataError("no aggregate row for model '" + model_tag + "', region " + std::string(to_string(region)));
}

std::vector<std::string> AggregateTable::models() const {
    std::vector<std::string> out;
    for (const auto& r : rows) {
        if (out.empty() || out.back() != r.model_tag) out.push_back(r.model_tag);
    }
    return out;
}

AggregateTable aggregate_metrics(std::span<const MetricsRecord> records, const EvalOptions& options) {
    if (records.empty()) throw DataError("cannot aggregate an empty record set");
    std::map<std::pair<std::string, int>, std::vector<const MetricsRecord*>> groups;
    for (const auto& r : records) groups[{r.model_tag, static_cast<int>(r.region)}].push_back(&r);

    // Models compared side by side must share the case set per region.
    std::map<int, std::set<std::string>> reference_cases;
    for (const auto& [key, group] : groups) {
        std::set<std::string> ids;
        for (const auto* r : group) ids.insert(r->case_id);
        if (ids.size() != group.size()) {
            throw DataError("model '" + key.first + "' has duplicate records for one case and region");
        }
        auto [it, inserted] = reference_cases.emplace(key.second, ids);
        if (!inserted && it->second != ids) {
            throw DataError("models were evaluated on different case sets for region " +
                            std::string(to_string(static_cast<Region>(key.second))));
        }
    }

    AggregateTable table;
    table.hd95_sentinel = options.hd95_sentinel;
    table.include_sentinel = options.include_sentinel;
    for (const auto& [key, group] : groups) {
        std::vector<double> dice, hd;
        for (const auto* r : group) {
            dice.push_back(r->dice);
            if (options.include_sentinel || !is_sentinel(r->hd95, options)) hd.push_back(r->hd95);
        }
        AggregateRow row;
        row.model_tag = key.first;
        row.region = static_cast<Region>(key.second);
        row.n = static_cast<std::int64_t>(group.size());
        row.n_hd95 = static_cast<std::int64_t>(hd.size());
        row.mean_dice = mean(dice);
        row.median_dice = median(dice);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.mean_hd95 = hd.empty() ? nan : mean(hd);
        row.median_hd95 = hd.empty() ? nan : median(hd);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::vector<SignificanceRow> pairwise_significance(std::span<const MetricsRecord> records) {
    std::map<std::string, std::map<std::pair<int, std::string>, const MetricsRecord*>> by_model;
    for (const auto& r : records) by_model[r.model_tag][{static_cast<int>(r.region), r.case_id}] = &r;

    std::vector<std::string> models;
    for (const auto& [m, _] : by_model) models.push_back(m);

    std::vector<SignificanceRow> out;
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = i + 1; j < models.size(); ++j) {
            for (const auto region : kRegions) {
                for (const std::string metric : {"dice", "hd95"}) {
                    std::vector<double> a, b;
                    for (const auto& [key, ra] : by_model[models[i]]) {
                        if (key.first != static_cast<int>(region)) continue;
                        const auto it = by_model[models[j]].find(key);
                        if (it == by_model[models[j]].end()) continue;
                        a.push_back(metric == "dice" ? ra->dice : ra->hd95);
                        b.push_back(metric == "dice" ? it->second->dice : it->second->hd95);
                    }
                    SignificanceRow row{models[i], models[j], region, metric, static_cast<std::int64_t>(a.size()), {}, {}};
                    try {
                        row.result = paired_t_test(a, b);
                    } catch (const StatisticsError& e) {
                        row.note = e.what();
                    }
                    out.push_back(std::move(row));
                }
            }
        }
    }
    return out;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "model_tag,fold,case_id,region,dice,hd95\n";
    for (const auto& r : records) {
        out << fmt::format("{},{},{},{},{:.17g},{:.17g}\n", r.model_tag, r.fold, r.case_id, to_string(r.region), r.dice,
                           r.hd95);
    }
    if (!out) throw DataError("write failed for " + path.string());
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "model_tag,fold,case_id,region,dice,hd95") throw DataError("unexpected metrics header in " + path.string());
    std::vector<MetricsRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 6) throw DataError("malformed metrics row in " + path.string() + ": " + line);
        MetricsRecord r;
        r.model_tag = cells[0];
        r.fold = std::stoi(cells[1]);
        r.case_id = cells[2];
        r.region = region_from_string(cells[3]);
        r.dice = std::stod(cells[4]);
        r.hd95 = std::stod(cells[5]);
        out.push_back(std::move(r));
    }
    return out;
}

void write_aggregate_csv(const std::filesystem::path& path, const AggregateTable& table) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "model_tag,region,n,mean_dice,median_dice,mean_hd95,median_hd95,n_hd95\n";
    for (const auto& r : table.rows) {
        out << fmt::format("{},{},{},{:.6f},{:.6f},{:.4f},{:.4f},{}\n", r.model_tag, to_string(r.region), r.n,
                           r.mean_dice, r.median_dice, r.mean_hd95, r.median_hd95, r.n_hd95);
    }
}

std::string format_aggregate_table(const AggregateTable& table) {
    std::string s;
    s += fmt::format("{:<14}| {:^23} | {:^26} | {:^23} | {:^26}\n", "", "mean DSC", "mean HD95", "median DSC",
                     "median HD95");
    s += fmt::format("{:<14}|", "model");
    for (int block = 0; block < 4; ++block) {
        const bool hd = block % 2 == 1;
        for (const auto r : kRegions) s += hd ? fmt::format(" {:>8}", to_string(r)) : fmt::format(" {:>7}", to_string(r));
        s += " |";
    }
    s.pop_back();
    s += "\n" + std::string(124, '-') + "\n";
    for (const auto& model : table.models()) {
        s += fmt::format("{:<14}|", model);
        for (int block = 0; block < 4; ++block) {
            for (const auto region : kRegions) {
                const auto& row = table.at(model, region);
                switch (block) {
                    case 0: s += fmt::format(" {:7.3f}", row.mean_dice); break;
                    case 1: s += fmt::format(" {:8.2f}", row.mean_hd95); break;
                    case 2: s += fmt::format(" {:7.3f}", row.median_dice); break;
                    default: s += fmt::format(" {:8.2f}", row.median_hd95); break;
                }
            }
            s += " |";
        }
        s.pop_back();
        s += "\n";
    }
    s += fmt::format("HD95 sentinel {:.2f} mm ({} in aggregates)\n", table.hd95_sentinel,
                     table.include_sentinel ? "included" : "excluded");
    return s;
}

void write_significance_csv(const std::filesystem::path& path, std::span<const SignificanceRow> rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "model_a,model_b,region,metric,n,t,p,mean_difference,note\n";
    for (const auto& r : rows) {
        if (r.result) {
            out << fmt::format("{},{},{},{},{},{:.6f},{:.6g},{:.6f},\n", r.model_a, r.model_b, to_string(r.region),
                               r.metric, r.n, r.result->t, r.result->p, r.result->mean_difference);
        } else {
            out << fmt::format("{},{},{},{},{},,,,{}\n", r.model_a, r.model_b, to_string(r.region), r.metric, r.n, r.note);
        }
    }
}

std::string format_significance(std::span<const SignificanceRow> rows) {
    std::string s = fmt::format("{:<14} {:<14} {:<4} {:<5} {:>4} {:>9} {:>10}\n", "model A", "model B", "reg", "metric",
                                "n", "t", "p");
    for (const auto& r : rows) {
        if (r.result) {
            s += fmt::format("{:<14} {:<14} {:<4} {:<5} {:>4} {:9.3f} {:10.4g}{}\n", r.model_a, r.model_b,
                             to_string(r.region), r.metric, r.n, r.result->t, r.result->p, r.result->p < 0.05 ? " *" : "");
        } else {
            s += fmt::format("{:<14} {:<14} {:<4} {:<5} {:>4}  ({})\n", r.model_a, r.model_b, to_string(r.region),
                             r.metric, r.n, r.note);
        }
    }
    return s;
}

}  // namespace daseg
