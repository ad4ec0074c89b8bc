#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "daseg/data/case.hpp"

namespace daseg {

/// Assignment of case ids to k cross-validation folds.
struct FoldSplit {
    int k = 0;
    std::map<std::string, int> assignments;

    std::vector<std::string> members(int fold) const;
    std::vector<std::string> complement(int fold) const;
    std::vector<std::int64_t> sizes() const;
    void validate() const;

    bool operator==(const FoldSplit&) const = default;
};

/// Shuffles ids (sorted first, so input order is irrelevant) and deals them round-robin.
FoldSplit make_folds(std::span<const std::string> case_ids, int k, std::uint64_t seed);
FoldSplit make_folds(std::span<const Case> cases, int k, std::uint64_t seed);

/// Serialized form: {"<case_id>": fold, ...}.
nlohmann::json to_json(const FoldSplit& split);
FoldSplit fold_split_from_json(const nlohmann::json& j);

}  // namespace daseg
