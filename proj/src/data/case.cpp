#include "daseg/data/case.hpp"

#include <algorithm>
#include <atomic>

namespace daseg {

namespace {
std::atomic<int> g_lock_depth{0};
std::atomic<std::uint64_t> g_violations{0};
}  // namespace

std::string_view to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

Domain domain_from_string(std::string_view s) {
    if (s == "source") return Domain::source;
    if (s == "target") return Domain::target;
    throw DataError("unknown domain '" + std::string(s) + "'");
}

std::array<float, kNumDomains> one_hot(Domain d) {
    return d == Domain::source ? std::array<float, 2>{1.0f, 0.0f} : std::array<float, 2>{0.0f, 1.0f};
}

std::string_view tissue_name(std::uint8_t code) {
    switch (code) {
        case 0: return "background";
        case 1: return "NC";
        case 2: return "ED";
        case 3: return "ET";
        default: return "unknown";
    }
}

LabelMap::LabelMap(Grid3<std::uint8_t> grid) : grid_(std::move(grid)) {
    for (const auto v : grid_.values()) {
        if (v > kMaxTissueCode) {
            throw DataError("label value " + std::to_string(v) + " is not in the canonical legend");
        }
    }
}

std::int64_t LabelMap::count(Tissue t) const {
    const auto code = static_cast<std::uint8_t>(t);
    const auto v = grid_.values();
    return static_cast<std::int64_t>(std::count(v.begin(), v.end(), code));
}

Case::Case(std::string id, Volume volume, std::optional<LabelMap> labels, Domain domain, Spacing3 spacing)
    : id_(std::move(id)), volume_(std::move(volume)), labels_(std::move(labels)), domain_(domain), spacing_(spacing) {
    validate_case(*this);
}

const LabelMap& Case::labels() const {
    if (domain_ == Domain::target && TargetLabelLock::active()) {
        g_violations.fetch_add(1);
        throw TargetLabelAccessError("target label access for case '" + id_ + "' while labels are locked");
    }
    if (!labels_) throw DataError("case '" + id_ + "' has no labels");
    return *labels_;
}

void Case::set_labels(std::optional<LabelMap> labels) {
    labels_ = std::move(labels);
    validate_case(*this);
}

TargetLabelLock::TargetLabelLock() { g_lock_depth.fetch_add(1); }
TargetLabelLock::~TargetLabelLock() { g_lock_depth.fetch_sub(1); }
bool TargetLabelLock::active() { return g_lock_depth.load() > 0; }
std::uint64_t TargetLabelLock::violations() { return g_violations.load(); }
void TargetLabelLock::reset_violations() { g_violations.store(0); }

void validate_case(const Case& c) {
    for (const double s : c.spacing()) {
        if (!(s > 0.0)) throw DataError("case '" + c.id() + "': spacing must be strictly positive");
    }
    const auto& v = c.volume();
    if (v.channels < 1) throw DataError("case '" + c.id() + "': volume has no channels");
    if (static_cast<std::int64_t>(v.data.size()) != v.channels * v.voxels()) {
        throw ShapeError("case '" + c.id() + "': volume buffer does not match its dims");
    }
    if (const auto ls = c.label_shape(); ls && *ls != v.dims) {
        throw ShapeError("case '" + c.id() + "': label dims " + to_string(*ls) + " differ from volume dims " +
                         to_string(v.dims));
    }
}

void validate_dataset(std::span<const Case> cases) {
    if (cases.empty()) return;
    const auto channels = cases.front().volume().channels;
    for (const auto& c : cases) {
        validate_case(c);
        if (c.volume().channels != channels) {
            throw DataError("case '" + c.id() + "' has " + std::to_string(c.volume().channels) +
                            " channels, dataset expects " + std::to_string(channels));
        }
    }
}

}  // namespace daseg
