#include "daseg/data/sampling.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "daseg/eval/regions.hpp"

namespace daseg {

namespace {

void check_patch_request(const Shape3& patch_size, double foreground_bias) {
    for (const auto p : patch_size) {
        if (p < 1) throw ConfigError("patch size must be positive, got " + to_string(patch_size));
    }
    if (!(foreground_bias >= 0.0 && foreground_bias <= 1.0)) {
        throw ConfigError("foreground_bias must lie in [0, 1]");
    }
}

}  // namespace

Patch crop_patch(const Case& c, const Shape3& origin, const Shape3& patch_size, LabelUse use) {
    const auto& vol = c.volume();
    const auto& dims = vol.dims;
    Patch out;
    out.image = Volume(vol.channels, patch_size);
    for (int a = 0; a < 3; ++a) out.center[a] = origin[a] + patch_size[a] / 2;

    const std::int64_t x0 = std::max<std::int64_t>(0, origin[2]);
    const std::int64_t x1 = std::min<std::int64_t>(dims[2], origin[2] + patch_size[2]);
    const bool with_labels = use == LabelUse::if_present && c.has_labels();
    const LabelMap* src_labels = with_labels ? &c.labels() : nullptr;
    Grid3<std::uint8_t> lab(with_labels ? patch_size : Shape3{0, 0, 0}, 0);

    if (x1 > x0) {
        for (std::int64_t pz = 0; pz < patch_size[0]; ++pz) {
            const auto z = origin[0] + pz;
            if (z < 0 || z >= dims[0]) continue;
            for (std::int64_t py = 0; py < patch_size[1]; ++py) {
                const auto y = origin[1] + py;
                if (y < 0 || y >= dims[1]) continue;
                const auto px = x0 - origin[2];
                for (std::int64_t ch = 0; ch < vol.channels; ++ch) {
                    const float* src = vol.channel(ch).data() + (z * dims[1] + y) * dims[2] + x0;
                    std::copy(src, src + (x1 - x0), &out.image.at(ch, pz, py, px));
                }
                if (src_labels) {
                    const auto* src = &src_labels->grid()(z, y, x0);
                    std::copy(src, src + (x1 - x0), &lab(pz, py, px));
                }
            }
        }
    }
    if (with_labels) out.labels = LabelMap(std::move(lab));
    return out;
}

Patch sample_patch(const Case& c, const Shape3& patch_size, Rng& rng, double foreground_bias, LabelUse use) {
    check_patch_request(patch_size, foreground_bias);
    const auto& dims = c.dims();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double draw = unit(rng);

    Shape3 center{};
    bool fg = false;
    if (use == LabelUse::if_present && c.has_labels() && draw < foreground_bias) {
        const auto& g = c.labels().grid();
        const auto values = g.values();
        const auto n_fg = std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; });
        if (n_fg > 0) {
            std::uniform_int_distribution<std::int64_t> pick(0, n_fg - 1);
            auto k = pick(rng);
            std::int64_t flat = 0;
            for (; flat < g.size(); ++flat) {
                if (values[static_cast<std::size_t>(flat)] != 0 && k-- == 0) break;
            }
            center = {flat / (dims[1] * dims[2]), (flat / dims[2]) % dims[1], flat % dims[2]};
            fg = true;
        }
    }
    if (!fg) {
        for (int a = 0; a < 3; ++a) {
            if (patch_size[a] <= dims[a]) {
                std::uniform_int_distribution<std::int64_t> start(0, dims[a] - patch_size[a]);
                center[a] = start(rng) + patch_size[a] / 2;
            } else {
                center[a] = dims[a] / 2;
            }
        }
    }
    Shape3 origin{};
    for (int a = 0; a < 3; ++a) origin[a] = center[a] - patch_size[a] / 2;
    auto p = crop_patch(c, origin, patch_size, use);
    p.foreground_centered = fg;
    return p;
}

std::int64_t Batch::labeled_count() const {
    return std::count(labeled_mask.begin(), labeled_mask.end(), true);
}

std::int64_t Batch::source_count() const { return std::count(source_mask.begin(), source_mask.end(), true); }

torch::Tensor Batch::labeled_index() const {
    std::vector<std::int64_t> idx;
    for (std::size_t i = 0; i < labeled_mask.size(); ++i) {
        if (labeled_mask[i]) idx.push_back(static_cast<std::int64_t>(i));
    }
    return torch::tensor(idx, torch::kInt64);
}

torch::Tensor region_target_tensor(const LabelMap& labels) {
    const auto r = compose_regions(labels);
    const auto& s = labels.shape();
    auto t = torch::empty({kNumRegions, s[0], s[1], s[2]}, torch::kFloat32);
    float* dst = t.data_ptr<float>();
    const auto n = voxel_count(s);
    for (const auto region : kRegions) {
        const auto& m = r.get(region);
        float* out = dst + region_channel(region) * n;
        for (std::int64_t i = 0; i < n; ++i) out[i] = m[i] ? 1.0f : 0.0f;
    }
    return t;
}

Batch collate(std::span<const Patch> patches, std::span<const Domain> domains, const std::vector<bool>& with_labels,
              std::span<const std::string> ids) {
    if (patches.empty()) throw ShapeError("cannot collate an empty batch");
    const auto b = static_cast<std::int64_t>(patches.size());
    const auto& first = patches.front().image;
    const auto& d = first.dims;

    Batch batch;
    batch.patches = torch::empty({b, first.channels, d[0], d[1], d[2]}, torch::kFloat32);
    batch.domain_labels = torch::zeros({b, kNumDomains}, torch::kFloat32);
    std::vector<torch::Tensor> targets;
    float* dst = batch.patches.data_ptr<float>();
    const auto per_item = first.channels * voxel_count(d);
    for (std::int64_t i = 0; i < b; ++i) {
        const auto& p = patches[static_cast<std::size_t>(i)];
        if (p.image.channels != first.channels || p.image.dims != d) throw ShapeError("patches differ in shape");
        std::memcpy(dst + i * per_item, p.image.data.data(), static_cast<std::size_t>(per_item) * sizeof(float));
        const auto dom = domains[static_cast<std::size_t>(i)];
        batch.domain_labels[i][static_cast<int>(dom)] = 1.0f;
        batch.source_mask.push_back(dom == Domain::source);
        const bool labeled = with_labels[static_cast<std::size_t>(i)];
        if (labeled) {
            if (!p.labels) throw DataError("item " + ids[static_cast<std::size_t>(i)] + " requested with labels but has none");
            targets.push_back(region_target_tensor(*p.labels));
        }
        batch.labeled_mask.push_back(labeled);
        batch.case_ids.push_back(ids[static_cast<std::size_t>(i)]);
    }
    batch.seg_targets = targets.empty() ? torch::empty({0, kNumRegions, d[0], d[1], d[2]}, torch::kFloat32)
                                        : torch::stack(targets);
    return batch;
}

Batch select_items(const Batch& batch, std::span<const std::int64_t> items) {
    std::vector<std::int64_t> label_row(batch.labeled_mask.size(), -1);
    std::int64_t row = 0;
    for (std::size_t i = 0; i < batch.labeled_mask.size(); ++i) {
        if (batch.labeled_mask[i]) label_row[i] = row++;
    }
    Batch out;
    std::vector<std::int64_t> rows;
    for (const auto i : items) {
        if (i < 0 || i >= batch.size()) throw ShapeError("batch item index out of range");
        const auto u = static_cast<std::size_t>(i);
        out.source_mask.push_back(batch.source_mask[u]);
        out.labeled_mask.push_back(batch.labeled_mask[u]);
        out.case_ids.push_back(batch.case_ids[u]);
        if (label_row[u] >= 0) rows.push_back(label_row[u]);
    }
    const auto idx = torch::tensor(std::vector<std::int64_t>(items.begin(), items.end()), torch::kInt64);
    out.patches = batch.patches.index_select(0, idx);
    out.domain_labels = batch.domain_labels.index_select(0, idx);
    out.seg_targets = batch.seg_targets.index_select(0, torch::tensor(rows, torch::kInt64));
    out.batch_id = batch.batch_id;
    return out;
}

CaseCycler::CaseCycler(std::size_t n, bool with_replacement) : n_(n), with_replacement_(with_replacement) {
    if (n == 0) throw ConfigError("cannot sample from an empty case list");
}

std::size_t CaseCycler::next(Rng& rng) {
    if (with_replacement_) {
        std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
        return pick(rng);
    }
    if (pos_ == order_.size()) {
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::shuffle(order_.begin(), order_.end(), rng);
        pos_ = 0;
    }
    return order_[pos_++];
}

BalancedBatchStream::BalancedBatchStream(std::span<const Case> source, std::span<const Case> target,
                                         StreamOptions options, std::uint64_t seed)
    : source_(source),
      target_(target),
      options_(options),
      rng_(seed),
      source_cycle_(source.empty() ? 1 : source.size(), source.size() < target.size()),
      target_cycle_(target.empty() ? 1 : target.size(), target.size() < source.size()) {
    if (options_.batch_size < 2 || options_.batch_size % 2 != 0) {
        throw ConfigError("balanced batches need an even batch_size >= 2, got " + std::to_string(options_.batch_size));
    }
    if (source.empty() || target.empty()) throw ConfigError("balanced batches need both source and target cases");
    check_patch_request(options_.patch_size, options_.foreground_bias);
}

std::int64_t BalancedBatchStream::batches_per_epoch() const {
    const auto larger = static_cast<std::int64_t>(std::max(source_.size(), target_.size()));
    return (larger * 2 + options_.batch_size - 1) / options_.batch_size;
}

Batch BalancedBatchStream::next() {
    const auto half = static_cast<std::size_t>(options_.batch_size / 2);
    std::vector<Patch> patches;
    std::vector<Domain> domains;
    std::vector<bool> labeled;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < half; ++i) {
        const auto& c = source_[source_cycle_.next(rng_)];
        patches.push_back(sample_patch(c, options_.patch_size, rng_, options_.foreground_bias, LabelUse::if_present));
        domains.push_back(Domain::source);
        labeled.push_back(c.has_labels());
        ids.push_back(c.id());
    }
    const auto target_use = options_.target_labeled ? LabelUse::if_present : LabelUse::never;
    const double target_bias = options_.target_labeled ? options_.foreground_bias : 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        const auto& c = target_[target_cycle_.next(rng_)];
        patches.push_back(sample_patch(c, options_.patch_size, rng_, target_bias, target_use));
        domains.push_back(Domain::target);
        labeled.push_back(options_.target_labeled && c.has_labels());
        ids.push_back(c.id());
    }
    auto batch = collate(patches, domains, labeled, ids);
    batch.batch_id = produced_++;
    return batch;
}

UniformBatchStream::UniformBatchStream(std::span<const Case* const> cases, StreamOptions options, std::uint64_t seed)
    : cases_(cases.begin(), cases.end()),
      options_(options),
      rng_(seed),
      cycle_(cases.empty() ? 1 : cases.size(), false) {
    if (cases_.empty()) throw ConfigError("training pool is empty");
    if (options_.batch_size < 1) throw ConfigError("batch_size must be positive");
    check_patch_request(options_.patch_size, options_.foreground_bias);
}

std::int64_t UniformBatchStream::batches_per_epoch() const {
    const auto n = static_cast<std::int64_t>(cases_.size());
    return (n + options_.batch_size - 1) / options_.batch_size;
}

Batch UniformBatchStream::next() {
    std::vector<Patch> patches;
    std::vector<Domain> domains;
    std::vector<bool> labeled;
    std::vector<std::string> ids;
    for (std::int64_t i = 0; i < options_.batch_size; ++i) {
        const Case& c = *cases_[cycle_.next(rng_)];
        if (!c.has_labels()) throw DataError("supervised pool contains unlabeled case '" + c.id() + "'");
        patches.push_back(sample_patch(c, options_.patch_size, rng_, options_.foreground_bias, LabelUse::if_present));
        domains.push_back(c.domain());
        labeled.push_back(true);
        ids.push_back(c.id());
    }
    auto batch = collate(patches, domains, labeled, ids);
    batch.batch_id = produced_++;
    return batch;
}

}  // namespace daseg
