#include "daseg/training/config.hpp"

#include "daseg/error.hpp"

namespace daseg {

using nlohmann::json;

void LossWeights::validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("loss.lambda must be non-negative");
}

void AlphaSchedule::validate() const {
    if (e_min < 0 || e_min >= e_max) throw ConfigError("alpha_schedule requires 0 <= e_min < e_max");
    if (!(alpha_max > 0.0)) throw ConfigError("alpha_schedule.alpha_max must be positive");
}

void OptimConfig::validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("optim.lr0 must be positive");
    if (max_epochs < 1) throw ConfigError("optim.max_epochs must be at least 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optim.momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be non-negative");
    if (lr_decay_alpha < 0.0 || lr_decay_beta < 0.0) throw ConfigError("optim lr decay constants must be non-negative");
}

void TrainingLoopConfig::validate() const {
    if (batch_size < 1) throw ConfigError("training.batch_size must be positive");
    for (const auto p : patch_size) {
        if (p < 1) throw ConfigError("training.patch_size entries must be positive");
    }
    if (!(foreground_bias >= 0.0 && foreground_bias <= 1.0)) {
        throw ConfigError("training.foreground_bias must lie in [0, 1]");
    }
    if (steps_per_epoch < 0) throw ConfigError("training.steps_per_epoch must be >= 0");
    if (checkpoint_every < 0) throw ConfigError("training.checkpoint_every must be >= 0");
    if (!(dice_smooth > 0.0)) throw ConfigError("training.dice_smooth must be positive");
}

void TransferConfig::validate() const {
    if (!(lr_divisor >= 1.0)) throw ConfigError("transfer.lr_divisor must be >= 1");
    if (!(epoch_divisor >= 1.0)) throw ConfigError("transfer.epoch_divisor must be >= 1");
}

void TrainConfig::validate() const {
    backbone.validate();
    classifier.validate();
    loss.validate();
    alpha.validate();
    optim.validate();
    loop.validate();
    transfer.validate();
}

void to_json(json& j, const TrainConfig& c) {
    j = json::object();
    j["backbone"] = c.backbone;
    j["classifier"] = c.classifier;
    j["loss"] = {{"lambda", c.loss.lambda}};
    j["alpha_schedule"] = {{"e_min", c.alpha.e_min}, {"e_max", c.alpha.e_max}, {"alpha_max", c.alpha.alpha_max}};
    j["optim"] = {{"lr0", c.optim.lr0},
                  {"lr_decay_alpha", c.optim.lr_decay_alpha},
                  {"lr_decay_beta", c.optim.lr_decay_beta},
                  {"max_epochs", c.optim.max_epochs},
                  {"momentum", c.optim.momentum},
                  {"weight_decay", c.optim.weight_decay},
                  {"nesterov", c.optim.nesterov},
                  {"grad_clip_norm", c.optim.grad_clip_norm}};
    j["training"] = {{"batch_size", c.loop.batch_size},
                     {"patch_size", c.loop.patch_size},
                     {"foreground_bias", c.loop.foreground_bias},
                     {"steps_per_epoch", c.loop.steps_per_epoch},
                     {"checkpoint_every", c.loop.checkpoint_every},
                     {"dice_smooth", c.loop.dice_smooth}};
    j["transfer"] = {{"lr_divisor", c.transfer.lr_divisor},
                     {"epoch_divisor", c.transfer.epoch_divisor},
                     {"trainable_groups", c.transfer.trainable_groups}};
}

void from_json(const json& j, TrainConfig& c) {
    c = TrainConfig{};
    if (j.contains("backbone")) c.backbone = j.at("backbone").get<BackboneConfig>();
    if (j.contains("classifier")) c.classifier = j.at("classifier").get<ClassifierConfig>();
    if (j.contains("loss")) c.loss.lambda = j.at("loss").value("lambda", c.loss.lambda);
    if (j.contains("alpha_schedule")) {
        const auto& a = j.at("alpha_schedule");
        c.alpha.e_min = a.value("e_min", c.alpha.e_min);
        c.alpha.e_max = a.value("e_max", c.alpha.e_max);
        c.alpha.alpha_max = a.value("alpha_max", c.alpha.alpha_max);
    }
    if (j.contains("optim")) {
        const auto& o = j.at("optim");
        c.optim.lr0 = o.value("lr0", c.optim.lr0);
        c.optim.lr_decay_alpha = o.value("lr_decay_alpha", c.optim.lr_decay_alpha);
        c.optim.lr_decay_beta = o.value("lr_decay_beta", c.optim.lr_decay_beta);
        c.optim.max_epochs = o.value("max_epochs", c.optim.max_epochs);
        c.optim.momentum = o.value("momentum", c.optim.momentum);
        c.optim.weight_decay = o.value("weight_decay", c.optim.weight_decay);
        c.optim.nesterov = o.value("nesterov", c.optim.nesterov);
        c.optim.grad_clip_norm = o.value("grad_clip_norm", c.optim.grad_clip_norm);
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        c.loop.batch_size = t.value("batch_size", c.loop.batch_size);
        c.loop.patch_size = t.value("patch_size", c.loop.patch_size);
        c.loop.foreground_bias = t.value("foreground_bias", c.loop.foreground_bias);
        c.loop.steps_per_epoch = t.value("steps_per_epoch", c.loop.steps_per_epoch);
        c.loop.checkpoint_every = t.value("checkpoint_every", c.loop.checkpoint_every);
        c.loop.dice_smooth = t.value("dice_smooth", c.loop.dice_smooth);
    }
    if (j.contains("transfer")) {
        const auto& t = j.at("transfer");
        c.transfer.lr_divisor = t.value("lr_divisor", c.transfer.lr_divisor);
        c.transfer.epoch_divisor = t.value("epoch_divisor", c.transfer.epoch_divisor);
        if (t.contains("trainable_groups")) {
            for (const auto& [k, v] : t.at("trainable_groups").items()) {
                c.transfer.trainable_groups[k] = v.get<std::vector<std::string>>();
            }
        }
    }
}

}  // namespace daseg
