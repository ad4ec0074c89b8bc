#include "daseg/data/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "daseg/data/nifti.hpp"

namespace daseg {

namespace fs = std::filesystem;
using json = nlohmann::json;

DatasetLayout layout_from_string(std::string_view s) {
    if (s == "brats_nifti") return DatasetLayout::brats_nifti;
    if (s == "synthetic_container") return DatasetLayout::synthetic_container;
    throw ConfigError("unknown dataset layout '" + std::string(s) + "'");
}

std::string_view to_string(DatasetLayout layout) {
    return layout == DatasetLayout::brats_nifti ? "brats_nifti" : "synthetic_container";
}

namespace {

std::string expand(std::string pattern, const std::string& id) {
    const std::string token = "{id}";
    for (auto pos = pattern.find(token); pos != std::string::npos; pos = pattern.find(token, pos + id.size())) {
        pattern.replace(pos, token.size(), id);
    }
    return pattern;
}

/// Centre crop along each axis to `target`; throws when the source is smaller.
std::vector<float> crop_to(const std::vector<float>& src, const Shape3& dims, const Shape3& target,
                           const std::string& what) {
    Shape3 off{};
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < target[a]) {
            throw ShapeError(what + ": shape " + to_string(dims) + " is smaller than declared " + to_string(target));
        }
        off[a] = (dims[a] - target[a]) / 2;
    }
    if (dims == target) return src;
    std::vector<float> out(static_cast<std::size_t>(voxel_count(target)));
    for (std::int64_t z = 0; z < target[0]; ++z) {
        for (std::int64_t y = 0; y < target[1]; ++y) {
            const auto s = ((z + off[0]) * dims[1] + (y + off[1])) * dims[2] + off[2];
            const auto d = (z * target[1] + y) * target[2];
            std::copy_n(src.begin() + s, target[2], out.begin() + d);
        }
    }
    return out;
}

template <typename T>
void write_raw(const fs::path& path, std::span<const T> values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
        out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    } else {
        for (T v : values) {
            auto bits = std::bit_cast<std::array<char, sizeof(T)>>(v);
            std::reverse(bits.begin(), bits.end());
            out.write(bits.data(), sizeof(T));
        }
    }
    if (!out) throw DataError("write failed for " + path.string());
}

template <typename T>
std::vector<T> read_raw(const fs::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("missing container file " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != count * sizeof(T)) {
        throw DataError(path.string() + ": expected " + std::to_string(count * sizeof(T)) + " bytes, found " +
                        std::to_string(bytes));
    }
    in.seekg(0);
    std::vector<T> out(count);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        for (auto& v : out) {
            auto bits = std::bit_cast<std::array<char, sizeof(T)>>(v);
            std::reverse(bits.begin(), bits.end());
            v = std::bit_cast<T>(bits);
        }
    }
    return out;
}

}  // namespace

Case load_brats_case(const fs::path& case_dir, const std::string& case_id, const LoadOptions& options) {
    const auto& opt = options.brats;
    if (opt.modality_files.empty()) throw ConfigError("brats layout needs at least one modality file");

    std::vector<fs::path> missing;
    for (const auto& m : opt.modality_files) {
        const auto p = case_dir / expand(m, case_id);
        if (!fs::exists(p)) missing.push_back(p);
    }
    if (!missing.empty()) {
        std::string msg = "case '" + case_id + "' is missing modality files:";
        for (const auto& p : missing) msg += " " + p.string();
        throw DataError(msg);
    }

    Volume volume;
    Shape3 native{};
    Spacing3 spacing{};
    for (std::size_t c = 0; c < opt.modality_files.size(); ++c) {
        const auto path = case_dir / expand(opt.modality_files[c], case_id);
        auto img = nifti::read(path);
        if (c == 0) {
            native = img.dims;
            spacing = img.spacing;
            const Shape3 dims = opt.expected_shape.value_or(native);
            volume = Volume(static_cast<std::int64_t>(opt.modality_files.size()), dims);
        } else if (img.dims != native) {
            throw ShapeError("case '" + case_id + "': modality " + path.filename().string() + " has shape " +
                             to_string(img.dims) + ", expected " + to_string(native));
        }
        auto cropped = crop_to(img.data, native, volume.dims, path.string());
        std::copy(cropped.begin(), cropped.end(), volume.channel(static_cast<std::int64_t>(c)).begin());
    }

    std::optional<LabelMap> labels;
    const auto seg_path = case_dir / expand(opt.label_file, case_id);
    if (!opt.label_file.empty() && fs::exists(seg_path)) {
        auto img = nifti::read(seg_path);
        if (img.dims != native) {
            throw ShapeError("case '" + case_id + "': label shape " + to_string(img.dims) +
                             " differs from modality shape " + to_string(native));
        }
        auto cropped = crop_to(img.data, native, volume.dims, seg_path.string());
        Grid3<std::uint8_t> grid(volume.dims);
        std::set<int> seen;
        for (std::size_t i = 0; i < cropped.size(); ++i) {
            const int code = static_cast<int>(std::lround(cropped[i]));
            const auto it = opt.label_remap.find(code);
            if (it == opt.label_remap.end() || static_cast<float>(code) != cropped[i]) {
                throw DataError("case '" + case_id + "': unknown label value " + std::to_string(cropped[i]));
            }
            seen.insert(code);
            grid[static_cast<std::int64_t>(i)] = it->second;
        }
        if (opt.label_remap.count(3) && opt.label_remap.count(4) && seen.count(3) && seen.count(4) &&
            opt.label_remap.at(3) == opt.label_remap.at(4)) {
            throw DataError("case '" + case_id + "': label codes 3 and 4 both present; ET code is ambiguous");
        }
        labels = LabelMap(std::move(grid));
    }
    return Case(case_id, std::move(volume), std::move(labels), options.domain, spacing);
}

void write_case_container(const fs::path& case_dir, const Case& c) {
    fs::create_directories(case_dir);
    const auto& v = c.volume();
    write_raw<float>(case_dir / "volume.raw", v.data);
    if (c.has_labels()) write_raw<std::uint8_t>(case_dir / "labels.raw", c.labels().grid().values());

    json meta;
    meta["format"] = "daseg-container";
    meta["version"] = 1;
    meta["id"] = c.id();
    meta["channels"] = v.channels;
    meta["dims"] = v.dims;
    meta["spacing"] = c.spacing();
    meta["domain"] = std::string(to_string(c.domain()));
    meta["has_labels"] = c.has_labels();
    meta["dtype"] = "float32-le";
    meta["label_legend"] = {{"0", "background"}, {"1", "NC"}, {"2", "ED"}, {"3", "ET"}};
    std::ofstream out(case_dir / "meta.json");
    out << meta.dump(2) << "\n";
    if (!out) throw DataError("cannot write " + (case_dir / "meta.json").string());
}

Case read_case_container(const fs::path& case_dir) {
    std::ifstream in(case_dir / "meta.json");
    if (!in) throw DataError("missing meta.json in " + case_dir.string());
    json meta;
    try {
        in >> meta;
    } catch (const json::exception& e) {
        throw DataError("malformed meta.json in " + case_dir.string() + ": " + e.what());
    }
    if (meta.value("format", "") != "daseg-container") throw DataError("not a container: " + case_dir.string());

    Volume volume(meta.at("channels").get<std::int64_t>(), meta.at("dims").get<Shape3>());
    volume.data = read_raw<float>(case_dir / "volume.raw", volume.data.size());

    std::optional<LabelMap> labels;
    if (meta.value("has_labels", false)) {
        auto raw = read_raw<std::uint8_t>(case_dir / "labels.raw", static_cast<std::size_t>(voxel_count(volume.dims)));
        labels = LabelMap(Grid3<std::uint8_t>(volume.dims, std::move(raw)));
    }
    return Case(meta.at("id").get<std::string>(), std::move(volume), std::move(labels),
                domain_from_string(meta.at("domain").get<std::string>()), meta.at("spacing").get<Spacing3>());
}

void write_container_dataset(const fs::path& root, std::span<const Case> cases) {
    fs::create_directories(root);
    for (const auto& c : cases) write_case_container(root / c.id(), c);
}

std::vector<Case> load_dataset(const fs::path& root, DatasetLayout layout, const LoadOptions& options) {
    if (!fs::is_directory(root)) throw DataError("dataset root does not exist: " + root.string());
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());

    std::vector<Case> cases;
    cases.reserve(ids.size());
    for (const auto& id : ids) {
        if (layout == DatasetLayout::brats_nifti) {
            cases.push_back(load_brats_case(root / id, id, options));
        } else {
            cases.push_back(read_case_container(root / id));
        }
    }
    validate_dataset(cases);
    return cases;
}

}  // namespace daseg
