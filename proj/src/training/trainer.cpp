#include "daseg/training/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "daseg/error.hpp"
#include "daseg/model/joint.hpp"
#include "daseg/training/checkpoint.hpp"
#include "daseg/training/schedules.hpp"

namespace daseg {
namespace {

constexpr const char* kHistoryHeader = "epoch,l_seg,l_d,l_total,domain_accuracy,alpha,lr";
const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double domain_accuracy(const torch::Tensor& logits, const torch::Tensor& labels) {
    auto hit = logits.argmax(1).eq(labels.argmax(1)).to(torch::kFloat64);
    return hit.mean().item<double>();
}

}  // namespace

std::uint64_t epoch_stream_seed(std::uint64_t seed, int epoch) {
    return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(epoch));
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write history " + path.string());
    out << kHistoryHeader << '\n';
    for (const auto& r : history) {
        out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.epoch, r.l_seg, r.l_d, r.l_total,
                           r.domain_accuracy, r.alpha, r.lr);
    }
}

std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read history " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kHistoryHeader) throw Error("unexpected history header in " + path.string());
    std::vector<EpochRecord> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 7) throw Error("malformed history row: " + line);
        EpochRecord r;
        r.epoch = std::stoi(cells[0]);
        r.l_seg = std::stod(cells[1]);
        r.l_d = std::stod(cells[2]);
        r.l_total = std::stod(cells[3]);
        r.domain_accuracy = std::stod(cells[4]);
        r.alpha = std::stod(cells[5]);
        r.lr = std::stod(cells[6]);
        rows.push_back(r);
    }
    return rows;
}

nlohmann::json history_to_json(std::span<const EpochRecord> history) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    auto arr = nlohmann::json::array();
    for (const auto& r : history) {
        arr.push_back({{"epoch", r.epoch},
                       {"l_seg", num(r.l_seg)},
                       {"l_d", num(r.l_d)},
                       {"l_total", num(r.l_total)},
                       {"domain_accuracy", num(r.domain_accuracy)},
                       {"alpha", r.alpha},
                       {"lr", r.lr},
                       {"steps", r.steps}});
    }
    return arr;
}

std::vector<EpochRecord> history_from_json(const nlohmann::json& j) {
    auto num = [](const nlohmann::json& v) { return v.is_null() ? kNaN : v.get<double>(); };
    std::vector<EpochRecord> out;
    for (const auto& e : j) {
        EpochRecord r;
        r.epoch = e.at("epoch").get<int>();
        r.l_seg = num(e.at("l_seg"));
        r.l_d = num(e.at("l_d"));
        r.l_total = num(e.at("l_total"));
        r.domain_accuracy = num(e.at("domain_accuracy"));
        r.alpha = e.at("alpha").get<double>();
        r.lr = e.at("lr").get<double>();
        r.steps = e.at("steps").get<std::int64_t>();
        out.push_back(r);
    }
    return out;
}

Trainer::Trainer(TrainConfig cfg, Strategy strategy, std::span<const Case> source, std::span<const Case> target,
                 TrainerOptions options)
    : cfg_(std::move(cfg)), strategy_(std::move(strategy)), source_(source), target_(target), options_(std::move(options)) {
    cfg_.backbone.deep_supervision = strategy_.deep_supervision;
    cfg_.validate();
    check_datasets();

    torch::manual_seed(options_.seed);
    backbone_ = build_backbone(cfg_.backbone);
    if (strategy_.adversarial()) {
        classifier_ = build_classifier(cfg_.classifier, backbone_->bottleneck_channels(), cfg_.backbone.spatial_dims);
    }
    inputs_ = apply_strategy(strategy_, backbone_, cfg_, options_.pretrained_checkpoint);

    for (auto& p : backbone_->parameters()) {
        if (p.requires_grad()) trainable_.push_back(p);
    }
    if (strategy_.adversarial()) {
        for (auto& p : classifier_->parameters()) trainable_.push_back(p);
    }
    if (trainable_.empty()) throw ConfigError("strategy " + strategy_.name + " leaves no trainable parameters");
    torch::optim::SGDOptions sgd(inputs_.lr0);
    sgd.momentum(cfg_.optim.momentum).weight_decay(cfg_.optim.weight_decay).nesterov(cfg_.optim.nesterov);
    optimizer_ = std::make_unique<torch::optim::SGD>(trainable_, sgd);

    if (!strategy_.datasets.target_images || strategy_.datasets.target_labels) {
        if (strategy_.datasets.source_labels) {
            for (const auto& c : source_) uniform_pool_.push_back(&c);
        }
        if (strategy_.datasets.target_labels) {
            for (const auto& c : target_) uniform_pool_.push_back(&c);
        }
    }

    if (options_.resume && options_.out_dir) {
        const auto latest = *options_.out_dir / "checkpoint_latest.pt";
        if (std::filesystem::exists(latest)) {
            const auto meta = read_checkpoint_meta(latest);
            if (meta.strategy != strategy_.name || meta.seed != options_.seed) {
                throw ConfigError("checkpoint " + latest.string() + " belongs to a different run");
            }
            load_checkpoint(latest, backbone_, classifier(), optimizer_.get());
            epochs_completed_ = meta.epochs_completed;
            if (meta.config.contains("history")) history_ = history_from_json(meta.config.at("history"));
            history_.resize(std::min<std::size_t>(history_.size(), static_cast<std::size_t>(epochs_completed_)));
            spdlog::info("resuming {} from epoch {}", strategy_.name, epochs_completed_);
        }
    }
}

void Trainer::check_datasets() const {
    const auto& d = strategy_.datasets;
    if (d.source_labels && source_.empty()) throw ConfigError("strategy " + strategy_.name + " needs source cases");
    if ((d.target_labels || d.target_images) && target_.empty()) {
        throw ConfigError("strategy " + strategy_.name + " needs target cases");
    }
    if (d.source_labels) {
        for (const auto& c : source_) {
            if (!c.has_labels()) throw DataError("source case '" + c.id() + "' has no labels");
        }
    }
    if (d.target_labels) {
        for (const auto& c : target_) {
            if (!c.has_labels()) throw DataError("target case '" + c.id() + "' has no labels");
        }
    }
}

double Trainer::lr_for_epoch(int epoch) const {
    OptimConfig o = cfg_.optim;
    o.lr0 = inputs_.lr0;
    return lr_at(static_cast<double>(epoch) / inputs_.max_epochs, o);
}

double Trainer::alpha_for_epoch(int epoch) const {
    return strategy_.adversarial() ? alpha_at(epoch, cfg_.alpha) : 0.0;
}

std::int64_t Trainer::steps_per_epoch() {
    if (cfg_.loop.steps_per_epoch > 0) return cfg_.loop.steps_per_epoch;
    const auto larger = static_cast<std::int64_t>(std::max(source_.size(), target_.size()));
    if (strategy_.adversarial() || (strategy_.datasets.source_labels && strategy_.datasets.target_labels)) {
        return (larger * 2 + cfg_.loop.batch_size - 1) / cfg_.loop.batch_size;
    }
    const auto n = static_cast<std::int64_t>(uniform_pool_.size());
    return (n + cfg_.loop.batch_size - 1) / cfg_.loop.batch_size;
}

std::vector<Batch> Trainer::epoch_batches(int epoch) {
    StreamOptions so;
    so.batch_size = cfg_.loop.batch_size;
    so.patch_size = cfg_.loop.patch_size;
    so.foreground_bias = cfg_.loop.foreground_bias;
    const auto seed = epoch_stream_seed(options_.seed, epoch);
    const auto n = steps_per_epoch();
    std::vector<Batch> batches;
    batches.reserve(static_cast<std::size_t>(n));
    const bool balanced = strategy_.adversarial() || (strategy_.datasets.source_labels && strategy_.datasets.target_labels);
    if (balanced) {
        so.target_labeled = strategy_.datasets.target_labels;
        BalancedBatchStream stream(source_, target_, so, seed);
        for (std::int64_t i = 0; i < n; ++i) batches.push_back(stream.next());
    } else {
        UniformBatchStream stream(uniform_pool_, so, seed);
        for (std::int64_t i = 0; i < n; ++i) batches.push_back(stream.next());
    }
    return batches;
}

StepRecord Trainer::step(const Batch& batch, int epoch) {
    const double alpha = alpha_for_epoch(epoch);
    const double lr = lr_for_epoch(epoch);
    for (auto& group : optimizer_->param_groups()) {
        static_cast<torch::optim::SGDOptions&>(group.options()).lr(lr);
    }
    backbone_->train();

    torch::Tensor seg_logits;
    std::vector<torch::Tensor> aux;
    torch::Tensor domain_logits;
    if (strategy_.adversarial()) {
        classifier_->train();
        auto out = forward_joint(backbone_, classifier_, batch, GrlCoefficient(alpha));
        seg_logits = std::move(out.seg_logits);
        aux = std::move(out.aux_seg_logits);
        domain_logits = std::move(out.domain_logits);
    } else {
        auto out = backbone_->forward(batch.patches);
        seg_logits = std::move(out.seg_logits);
        aux = std::move(out.aux_logits);
    }

    const double smooth = cfg_.loop.dice_smooth;
    auto l_seg = inputs_.deep_supervision && !aux.empty()
                     ? deep_supervision_seg_loss(seg_logits, aux, batch.seg_targets, batch.labeled_mask, smooth)
                     : seg_loss(seg_logits, batch.seg_targets, batch.labeled_mask, smooth);
    torch::Tensor l_total = l_seg;
    double l_d_value = 0.0;
    double acc = kNaN;
    if (strategy_.adversarial()) {
        auto l_d = domain_loss(domain_logits, batch.domain_labels);
        l_total = l_seg + cfg_.loss.lambda * l_d;
        l_d_value = l_d.item<double>();
        acc = domain_accuracy(domain_logits.detach(), batch.domain_labels);
    }
    const auto breakdown = total_loss(l_seg.item<double>(), l_d_value, cfg_.loss);
    if (!std::isfinite(l_total.item<double>()) || !std::isfinite(breakdown.l_total)) {
        dump_divergence(batch, epoch, breakdown.l_seg, breakdown.l_d, breakdown.l_total);
        throw DivergenceError(fmt::format("non-finite loss at epoch {}, batch {} (l_seg={}, l_d={})", epoch,
                                          batch.batch_id, breakdown.l_seg, breakdown.l_d));
    }

    optimizer_->zero_grad();
    l_total.backward();
    if (cfg_.optim.grad_clip_norm > 0) torch::nn::utils::clip_grad_norm_(trainable_, cfg_.optim.grad_clip_norm);
    optimizer_->step();

    StepRecord r;
    r.epoch = epoch;
    r.step = global_step_++;
    r.batch_id = batch.batch_id;
    r.l_seg = breakdown.l_seg;
    r.l_d = breakdown.l_d;
    r.l_total = breakdown.l_total;
    r.domain_accuracy = acc;
    r.alpha = alpha;
    r.lr = lr;
    if (options_.keep_step_history) steps_.push_back(r);
    return r;
}

void Trainer::dump_divergence(const Batch& batch, int epoch, double l_seg, double l_d, double l_total) const {
    if (!options_.out_dir) return;
    std::filesystem::create_directories(*options_.out_dir);
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(std::to_string(v)); };
    nlohmann::json j{{"epoch", epoch},      {"batch_id", batch.batch_id}, {"case_ids", batch.case_ids},
                     {"l_seg", num(l_seg)}, {"l_d", num(l_d)},           {"l_total", num(l_total)},
                     {"alpha", alpha_for_epoch(epoch)}, {"lr", lr_for_epoch(epoch)}};
    std::ofstream(*options_.out_dir / fmt::format("divergence_epoch{}_batch{}.json", epoch, batch.batch_id))
        << j.dump(2) << '\n';
}

void Trainer::save(const std::filesystem::path& path) {
    CheckpointMeta meta;
    nlohmann::json cfg_json = cfg_;
    cfg_json["history"] = history_to_json(history_);
    meta.config = std::move(cfg_json);
    meta.strategy = strategy_.name;
    meta.epochs_completed = epochs_completed_;
    meta.seed = options_.seed;
    save_checkpoint(path, meta, backbone_, classifier(), optimizer_.get());
}

const std::vector<EpochRecord>& Trainer::fit() {
    std::optional<TargetLabelLock> lock;
    if (!strategy_.datasets.target_labels) lock.emplace();

    if (options_.out_dir) {
        std::filesystem::create_directories(*options_.out_dir);
        nlohmann::json resolved = cfg_;
        resolved["strategy"] = strategy_.name;
        resolved["seed"] = options_.seed;
        resolved["effective"] = {{"lr0", inputs_.lr0}, {"max_epochs", inputs_.max_epochs},
                                 {"deep_supervision", inputs_.deep_supervision}};
        std::ofstream(*options_.out_dir / "config.resolved.json") << resolved.dump(2) << '\n';
    }

    for (int epoch = epochs_completed_; epoch < inputs_.max_epochs; ++epoch) {
        const auto batches = epoch_batches(epoch);
        EpochRecord e;
        e.epoch = epoch;
        e.alpha = alpha_for_epoch(epoch);
        e.lr = lr_for_epoch(epoch);
        double acc_sum = 0.0;
        for (const auto& b : batches) {
            const auto r = step(b, epoch);
            e.l_seg += r.l_seg;
            e.l_d += r.l_d;
            e.l_total += r.l_total;
            acc_sum += r.domain_accuracy;
            ++e.steps;
        }
        const auto n = static_cast<double>(std::max<std::int64_t>(1, e.steps));
        e.l_seg /= n;
        e.l_d /= n;
        e.l_total /= n;
        e.domain_accuracy = acc_sum / n;
        history_.push_back(e);
        epochs_completed_ = epoch + 1;
        if (options_.on_epoch) options_.on_epoch(e);

        if (options_.out_dir) {
            write_history_csv(*options_.out_dir / "history.csv", history_);
            const bool periodic = cfg_.loop.checkpoint_every > 0 && epochs_completed_ % cfg_.loop.checkpoint_every == 0;
            if (periodic || epochs_completed_ == inputs_.max_epochs) save(*options_.out_dir / "checkpoint_latest.pt");
        }
    }
    if (options_.out_dir) {
        save(*options_.out_dir / "checkpoint_final.pt");
        write_history_csv(*options_.out_dir / "history.csv", history_);
    }
    return history_;
}

}  // namespace daseg
