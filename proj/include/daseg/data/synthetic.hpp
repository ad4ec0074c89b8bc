#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "daseg/data/case.hpp"

namespace daseg {

/// How the target domain departs from the source domain.
struct SyntheticShift {
    /// Per-channel factor on the target's lesion contrast (lesion mean minus tissue mean).
    std::vector<double> intensity_scale{1.0, 0.3, 1.0, 1.0};
    /// Per-channel offset added to the target's lesion means.
    std::vector<double> intensity_offset{0.0, 0.0, 0.0, 0.0};
    double enhancing_ring_probability_source = 0.95;
    double enhancing_ring_probability_target = 0.6;
    double edema_probability_source = 1.0;
    double edema_probability_target = 0.55;
    double size_scale_target = 0.8;
    double noise_sigma_source = 0.1;
    double noise_sigma_target = 0.1;
    /// Gaussian smoothing width (voxels) of target noise; 0 keeps it white. Acts as a
    /// scanner texture visible in every patch, lesion or not.
    double noise_correlation_target = 1.0;
};

struct SyntheticConfig {
    std::int64_t n_source = 200;
    std::int64_t n_target = 60;
    Shape3 grid_size{48, 48, 48};
    std::int64_t channels = 4;
    Spacing3 spacing{1.0, 1.0, 1.0};
    SyntheticShift shift;
    std::uint64_t seed = 0;
    bool zscore = true;

    void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticConfig& c);
void from_json(const nlohmann::json& j, SyntheticConfig& c);

struct SyntheticDataset {
    std::vector<Case> source;
    std::vector<Case> target;
};

/// Phantom brains: a spherical brain mask holding an ellipsoidal NC core, optionally wrapped
/// by an ET ring and an ED halo. Every case draws from its own stream derived from
/// (seed, domain, index), so the dataset is a pure function of the config.
SyntheticDataset generate_synthetic(const SyntheticConfig& cfg);

/// One case; exposed for tests.
Case generate_synthetic_case(const SyntheticConfig& cfg, Domain domain, std::int64_t index);

}  // namespace daseg
