#include "daseg/training/strategy.hpp"

#include <regex>

#include "daseg/error.hpp"
#include "daseg/training/checkpoint.hpp"

namespace daseg {

std::vector<std::string> strategy_names() {
    return {"1", "2", "3", "4", "5", "6", "7", "8", "1s", "2s", "3s", "uda"};
}

Strategy make_strategy(std::string_view name, const TrainConfig& cfg) {
    Strategy s;
    s.name = std::string(name);
    if (name == "uda") {
        s.kind = StrategyKind::uda;
        s.deep_supervision = false;
        s.datasets = {true, false, true};
        return s;
    }
    std::string base(name);
    bool starred = false;
    if (!base.empty() && base.back() == 's') {
        starred = true;
        base.pop_back();
    }
    int n = 0;
    try {
        std::size_t used = 0;
        n = std::stoi(base, &used);
        if (used != base.size()) n = 0;
    } catch (const std::exception&) {
        n = 0;
    }
    if (n < 1 || n > 8 || (starred && n > 3)) {
        throw ConfigError("unknown strategy '" + std::string(name) + "'; expected 1-8, 1s-3s or uda");
    }
    s.kind = static_cast<StrategyKind>(n);
    s.deep_supervision = !starred;
    switch (s.kind) {
        case StrategyKind::scratch_adult: s.datasets = {true, false, false}; break;
        case StrategyKind::scratch_ped: s.datasets = {false, true, false}; break;
        case StrategyKind::scratch_both: s.datasets = {true, true, false}; break;
        default: s.datasets = {false, true, false}; break;
    }
    if (n >= 4) s.requires_checkpoint = true;
    if (n >= 5) {
        const auto it = cfg.transfer.trainable_groups.find(std::to_string(n));
        if (it == cfg.transfer.trainable_groups.end() || it->second.empty()) {
            throw ConfigError("transfer.trainable_groups has no entry for strategy " + std::to_string(n));
        }
        s.trainable_groups = it->second;
    }
    if (n >= 6) {
        s.lr_override = cfg.optim.lr0 / cfg.transfer.lr_divisor;
        s.epochs_override = std::max(1, static_cast<int>(cfg.optim.max_epochs / cfg.transfer.epoch_divisor));
    }
    return s;
}

std::string parameter_group(const std::string& param_name, int n_stages) {
    static const std::regex indexed(R"(^(encoder|up|decoder|aux)\.(\d+)\..*)");
    std::smatch m;
    if (param_name.rfind("head.", 0) == 0) return "projection";
    if (std::regex_match(param_name, m, indexed)) {
        const auto kind = m[1].str();
        const int idx = std::stoi(m[2].str());
        if (kind == "encoder") return idx == n_stages - 1 ? "bottleneck" : "encoder";
        if (kind == "aux") return "decoder." + std::to_string(idx + 1);
        return "decoder." + std::to_string(idx);
    }
    throw ConfigError("parameter '" + param_name + "' belongs to no known group");
}

bool group_selected(const std::string& group, const std::vector<std::string>& selectors) {
    for (const auto& s : selectors) {
        if (s == group) return true;
        if (s == "decoder.*" && group.rfind("decoder.", 0) == 0) return true;
    }
    return false;
}

TrainerInputs apply_strategy(const Strategy& strategy, Backbone& backbone, const TrainConfig& cfg,
                             const std::optional<std::filesystem::path>& pretrained_checkpoint) {
    TrainerInputs in;
    in.datasets = strategy.datasets;
    in.deep_supervision = strategy.deep_supervision;
    in.lr0 = strategy.lr_override.value_or(cfg.optim.lr0);
    in.max_epochs = strategy.epochs_override.value_or(cfg.optim.max_epochs);

    if (strategy.requires_checkpoint) {
        if (!pretrained_checkpoint) {
            throw ConfigError("strategy " + strategy.name + " needs a pretrained checkpoint");
        }
        load_backbone_weights(*pretrained_checkpoint, backbone);
        in.loaded_checkpoint = true;
    }

    const int n_stages = backbone->config().n_stages;
    for (auto& item : backbone->named_parameters()) {
        const bool trains = strategy.trainable_groups.empty() ||
                            group_selected(parameter_group(item.key(), n_stages), strategy.trainable_groups);
        item.value().set_requires_grad(trains);
        in.trainable[item.key()] = trains;
    }
    return in;
}

}  // namespace daseg
