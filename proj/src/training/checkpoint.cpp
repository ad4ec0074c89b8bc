#include "daseg/training/checkpoint.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "daseg/error.hpp"

namespace daseg {
namespace {

constexpr const char* kFormat = "daseg-checkpoint-v1";

nlohmann::json meta_json(const CheckpointMeta& m) {
    return {{"format", kFormat},
            {"config", m.config},
            {"strategy", m.strategy},
            {"epochs_completed", m.epochs_completed},
            {"seed", m.seed},
            {"has_classifier", m.has_classifier},
            {"has_optimizer", m.has_optimizer}};
}

CheckpointMeta meta_from(torch::serialize::InputArchive& archive, const std::filesystem::path& path) {
    c10::IValue value;
    if (!archive.try_read("meta", value) || !value.isString()) {
        throw Error("checkpoint " + path.string() + " has no metadata record");
    }
    const auto j = nlohmann::json::parse(value.toStringRef());
    if (j.value("format", "") != kFormat) {
        throw Error("checkpoint " + path.string() + " has unknown format");
    }
    CheckpointMeta m;
    m.config = j.at("config");
    m.strategy = j.at("strategy").get<std::string>();
    m.epochs_completed = j.at("epochs_completed").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.has_classifier = j.at("has_classifier").get<bool>();
    m.has_optimizer = j.at("has_optimizer").get<bool>();
    return m;
}

torch::serialize::InputArchive open_archive(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("checkpoint not found: " + path.string());
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path.string());
    } catch (const c10::Error& e) {
        throw Error("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
    return archive;
}

// Module::load swaps tensors in without comparing shapes, so walk the tree ourselves.
void load_tree(torch::serialize::InputArchive& archive, torch::nn::Module& module, const std::string& prefix,
               const std::filesystem::path& path) {
    torch::NoGradGuard ng;
    auto copy_in = [&](const std::string& name, torch::Tensor& dst, bool is_buffer) {
        torch::Tensor src;
        if (!archive.try_read(name, src, is_buffer)) {
            throw ShapeError("checkpoint " + path.string() + " lacks " + prefix + name);
        }
        if (src.sizes() != dst.sizes()) {
            throw ShapeError(fmt::format("checkpoint {} does not fit the network: {}{} has shape {}, expected {}",
                                         path.string(), prefix, name, src.sizes(), dst.sizes()));
        }
        dst.copy_(src);
    };
    for (auto& p : module.named_parameters(false)) copy_in(p.key(), p.value(), false);
    for (auto& b : module.named_buffers(false)) copy_in(b.key(), b.value(), true);
    for (const auto& child : module.named_children()) {
        torch::serialize::InputArchive sub;
        if (!archive.try_read(child.key(), sub)) {
            throw ShapeError("checkpoint " + path.string() + " lacks module " + prefix + child.key());
        }
        load_tree(sub, *child.value(), prefix + child.key() + ".", path);
    }
}

void load_module(torch::serialize::InputArchive& archive, const std::string& key, torch::nn::Module& module,
                 const std::filesystem::path& path) {
    torch::serialize::InputArchive sub;
    if (!archive.try_read(key, sub)) throw Error("checkpoint " + path.string() + " has no '" + key + "' record");
    load_tree(sub, module, key + ".", path);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, Backbone& backbone,
                     DomainClassifier* classifier, torch::optim::Optimizer* optimizer) {
    CheckpointMeta m = meta;
    m.has_classifier = classifier != nullptr;
    m.has_optimizer = optimizer != nullptr;

    torch::serialize::OutputArchive archive;
    archive.write("meta", c10::IValue(meta_json(m).dump()));
    torch::serialize::OutputArchive bb;
    backbone->save(bb);
    archive.write("backbone", bb);
    if (classifier) {
        torch::serialize::OutputArchive cl;
        (*classifier)->save(cl);
        archive.write("classifier", cl);
    }
    if (optimizer) {
        torch::serialize::OutputArchive opt;
        optimizer->save(opt);
        archive.write("optimizer", opt);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    archive.save_to(tmp.string());
    std::filesystem::rename(tmp, path);
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
    auto archive = open_archive(path);
    return meta_from(archive, path);
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path, Backbone& backbone, DomainClassifier* classifier,
                               torch::optim::Optimizer* optimizer) {
    auto archive = open_archive(path);
    auto meta = meta_from(archive, path);
    load_module(archive, "backbone", *backbone, path);
    if (classifier) {
        if (!meta.has_classifier) throw Error("checkpoint " + path.string() + " holds no domain classifier");
        load_module(archive, "classifier", **classifier, path);
    }
    if (optimizer) {
        if (!meta.has_optimizer) throw Error("checkpoint " + path.string() + " holds no optimizer state");
        torch::serialize::InputArchive sub;
        archive.read("optimizer", sub);
        optimizer->load(sub);
    }
    return meta;
}

void load_backbone_weights(const std::filesystem::path& path, Backbone& backbone) {
    auto archive = open_archive(path);
    meta_from(archive, path);
    load_module(archive, "backbone", *backbone, path);
}

}  // namespace daseg
