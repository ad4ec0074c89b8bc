#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "daseg/data/synthetic.hpp"
#include "daseg/training/config.hpp"

namespace daseg::testing {

/// Small phantom set that trains in seconds.
inline SyntheticDataset tiny_data(std::int64_t n_source = 6, std::int64_t n_target = 4, std::uint64_t seed = 3) {
    SyntheticConfig s;
    s.n_source = n_source;
    s.n_target = n_target;
    s.grid_size = {16, 16, 16};
    s.seed = seed;
    return generate_synthetic(s);
}

/// Three-stage network on 8^3 patches, one classifier block, two steps per epoch.
inline TrainConfig tiny_config(int epochs = 3) {
    TrainConfig c;
    c.backbone.n_stages = 3;
    c.backbone.base_channels = 4;
    c.classifier.n_blocks = 1;
    c.classifier.conv_channels = 8;
    c.classifier.fc_width = 8;
    c.alpha.e_min = 0;
    c.alpha.e_max = 2;
    c.alpha.alpha_max = 1.0;
    c.optim.max_epochs = epochs;
    c.loop.batch_size = 4;
    c.loop.patch_size = {8, 8, 8};
    c.loop.steps_per_epoch = 2;
    c.loop.checkpoint_every = 1;
    return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("daseg_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace daseg::testing
