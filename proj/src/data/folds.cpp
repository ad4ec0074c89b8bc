#include "daseg/data/folds.hpp"

#include <algorithm>
#include <random>

namespace daseg {

std::vector<std::string> FoldSplit::members(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : assignments) {
        if (f == fold) out.push_back(id);
    }
    return out;
}

std::vector<std::string> FoldSplit::complement(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : assignments) {
        if (f != fold) out.push_back(id);
    }
    return out;
}

std::vector<std::int64_t> FoldSplit::sizes() const {
    std::vector<std::int64_t> s(static_cast<std::size_t>(std::max(k, 0)), 0);
    for (const auto& [id, f] : assignments) ++s.at(static_cast<std::size_t>(f));
    return s;
}

void FoldSplit::validate() const {
    if (k < 2) throw ConfigError("fold count must be at least 2");
    for (const auto& [id, f] : assignments) {
        if (f < 0 || f >= k) throw DataError("case '" + id + "' assigned to invalid fold " + std::to_string(f));
    }
    const auto s = sizes();
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    if (*hi - *lo > 1) throw DataError("fold sizes differ by more than one");
}

FoldSplit make_folds(std::span<const std::string> case_ids, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be at least 2, got " + std::to_string(k));
    if (static_cast<std::size_t>(k) > case_ids.size()) {
        throw ConfigError("fold count " + std::to_string(k) + " exceeds case count " + std::to_string(case_ids.size()));
    }
    std::vector<std::string> ids(case_ids.begin(), case_ids.end());
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw DataError("duplicate case ids in fold split");
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    FoldSplit split;
    split.k = k;
    for (std::size_t i = 0; i < ids.size(); ++i) split.assignments[ids[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    return split;
}

FoldSplit make_folds(std::span<const Case> cases, int k, std::uint64_t seed) {
    std::vector<std::string> ids;
    ids.reserve(cases.size());
    for (const auto& c : cases) ids.push_back(c.id());
    return make_folds(ids, k, seed);
}

nlohmann::json to_json(const FoldSplit& split) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, f] : split.assignments) j[id] = f;
    return j;
}

FoldSplit fold_split_from_json(const nlohmann::json& j) {
    FoldSplit split;
    int max_fold = -1;
    for (const auto& [id, f] : j.items()) {
        split.assignments[id] = f.get<int>();
        max_fold = std::max(max_fold, f.get<int>());
    }
    split.k = max_fold + 1;
    split.validate();
    return split;
}

}  // namespace daseg
