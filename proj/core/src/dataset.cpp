#include "pantcr/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace pantcr {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<ManifestEntry>& Manifest::split(const std::string& name) const {
    auto it = splits.find(name);
    if (it == splits.end()) throw ValidationError("manifest has no split: " + name);
    return it->second;
}

namespace {

json entry_to_json(const ManifestEntry& e) {
    json j;
    j["id"] = e.id;
    j["files"] = e.files;
    j["cloud"] = {{"seed", e.cloud.seed},
                  {"morphology", e.cloud.morphology},
                  {"thickness", e.cloud.thickness}};
    j["bbox"] = {{"scene", e.bbox.scene}, {"x", e.bbox.x}, {"y", e.bbox.y},
                 {"w", e.bbox.w},         {"h", e.bbox.h}};
    return j;
}

ManifestEntry entry_from_json(const json& j) {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    for (auto& [k, v] : j.at("files").items()) e.files[k] = v.get<std::string>();
    const auto& c = j.at("cloud");
    e.cloud.seed = c.at("seed").get<uint64_t>();
    e.cloud.morphology = c.at("morphology").get<std::string>();
    e.cloud.thickness = c.at("thickness").get<double>();
    if (j.contains("bbox")) {
        const auto& b = j.at("bbox");
        e.bbox = {b.at("scene").get<std::string>(), b.at("x").get<int>(), b.at("y").get<int>(),
                  b.at("w").get<int>(), b.at("h").get<int>()};
    }
    return e;
}

json manifest_to_json(const Manifest& m) {
    json j;
    j["version"] = m.version;
    j["r"] = m.r;
    json splits = json::object();
    for (const auto& [name, entries] : m.splits) {
        json arr = json::array();
        for (const auto& e : entries) arr.push_back(entry_to_json(e));
        splits[name] = std::move(arr);
    }
    j["splits"] = std::move(splits);
    return j;
}

}  // namespace

std::string Manifest::to_json_string() const { return manifest_to_json(*this).dump(2) + "\n"; }

void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write: " + path);
    f << m.to_json_string();
}

Manifest load_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad manifest json: ") + e.what());
    }
    Manifest m;
    m.version = j.at("version").get<int>();
    m.r = j.at("r").get<int>();
    for (auto& [name, arr] : j.at("splits").items()) {
        std::vector<ManifestEntry> entries;
        for (const auto& ej : arr) entries.push_back(entry_from_json(ej));
        m.splits[name] = std::move(entries);
    }
    return m;
}

SamplePair load_sample(const ManifestEntry& entry, const std::string& root, int r) {
    auto path_of = [&](const std::string& role) {
        auto it = entry.files.find(role);
        if (it == entry.files.end())
            throw ValidationError("manifest entry " + entry.id + " missing file role " + role);
        return (fs::path(root) / it->second).string();
    };
    SamplePair s;
    s.id = entry.id;
    s.r = r;
    s.cloudy_lrmsi = load_raster(path_of("cloudy_lrmsi"));
    s.cloudy_pan = load_raster(path_of("cloudy_pan"));
    s.clean_hrmsi = load_raster(path_of("clean_hrmsi"));
    if (entry.files.count("clean_lrmsi")) s.clean_lrmsi = load_raster(path_of("clean_lrmsi"));
    if (entry.files.count("clean_pan")) s.clean_pan = load_raster(path_of("clean_pan"));
    s.validate();
    return s;
}

namespace {

struct PatchJob {
    std::string split;
    std::string scene_id;
    int scene_index = 0;
    int x = 0, y = 0, size = 0;
    int global_index = 0;
};

ManifestEntry make_patch(const SynthConfig& cfg, uint64_t seed, const PatchJob& job,
                         const MultiBandRaster& scene_msi, const MultiBandRaster& scene_pan,
                         const std::string& out_dir) {
    Rng patch_rng(derive_seed(seed, "patch-" + std::to_string(job.global_index)));
    const uint64_t cloud_seed = patch_rng.raw();
    const auto morph = CloudMorphology(job.global_index % 4);
    const double thickness = patch_rng.range(cfg.thickness_lo, cfg.thickness_hi);

    MultiBandRaster msi = scene_msi.crop(job.y, job.x, job.size, job.size);
    MultiBandRaster pan = scene_pan.crop(job.y, job.x, job.size, job.size);
    const std::string id = job.split + "_" + std::to_string(job.global_index);
    SamplePair s = make_sample(msi, pan, cloud_seed, morph, thickness, cfg.r, id);

    ManifestEntry e;
    e.id = id;
    e.cloud = {cloud_seed, morphology_to_string(morph), thickness};
    e.bbox = {job.scene_id, job.x, job.y, job.size, job.size};

    const fs::path dir = fs::path(out_dir) / "patches" / job.split;
    fs::create_directories(dir);
    auto emit = [&](const std::string& role, const MultiBandRaster& img) {
        const std::string rel = "patches/" + job.split + "/" + id + "_" + role + ".mbr";
        save_raster(img, (fs::path(out_dir) / rel).string());
        e.files[role] = rel;
    };
    emit("cloudy_lrmsi", s.cloudy_lrmsi);
    emit("cloudy_pan", s.cloudy_pan);
    emit("clean_hrmsi", s.clean_hrmsi);
    emit("clean_lrmsi", *s.clean_lrmsi);
    emit("clean_pan", *s.clean_pan);
    return e;
}

}  // namespace

Manifest synth_dataset(const SynthConfig& cfg, const SynthCounts& counts, uint64_t seed,
                       const std::string& out_dir) {
    if (cfg.scenes < 0 || cfg.scene_size < cfg.patch || cfg.patch % cfg.r != 0)
        throw ArgumentError("bad synth config");
    if (counts.train < 0 || counts.val < 0 || counts.test_reduced < 0 || counts.test_full < 0)
        throw ArgumentError("negative patch counts");

    Manifest manifest;
    manifest.r = cfg.r;
    manifest.splits["train"] = {};
    manifest.splits["val"] = {};
    manifest.splits["test_reduced"] = {};
    manifest.splits["test_full"] = {};

    const int total =
        counts.train + counts.val + counts.test_reduced + counts.test_full;
    if (total == 0) {
        fs::create_directories(out_dir);
        save_manifest(manifest, (fs::path(out_dir) / "dataset.json").string());
        return manifest;
    }

    // full-resolution scenes take whole sources; the rest tile patch grids
    const int per_scene = (cfg.scene_size / cfg.patch) * (cfg.scene_size / cfg.patch);
    struct Need {
        std::string split;
        int remaining;
        int patch_size;
    };
    std::vector<Need> needs = {{"test_full", counts.test_full, cfg.full_size},
                               {"train", counts.train, cfg.patch},
                               {"val", counts.val, cfg.patch},
                               {"test_reduced", counts.test_reduced, cfg.patch}};

    int scenes_needed = counts.test_full;
    for (const auto& n : needs)
        if (n.split != "test_full" && n.remaining > 0)
            scenes_needed += (n.remaining + per_scene - 1) / per_scene;
    if (scenes_needed > cfg.scenes)
        throw CapacityError("need " + std::to_string(scenes_needed) + " scenes, config allows " +
                            std::to_string(cfg.scenes));
    if (counts.test_full > 0 && cfg.full_size > cfg.scene_size)
        throw CapacityError("full-res scene larger than source scene");

    std::vector<PatchJob> jobs;
    int scene_cursor = 0;
    int global_index = 0;
    for (auto& need : needs) {
        while (need.remaining > 0) {
            if (scene_cursor >= cfg.scenes) throw CapacityError("ran out of source scenes");
            const std::string scene_id = "scene_" + std::to_string(scene_cursor);
            if (need.split == "test_full") {
                jobs.push_back({need.split, scene_id, scene_cursor, 0, 0, need.patch_size,
                                global_index++});
                --need.remaining;
            } else {
                const int grid = cfg.scene_size / cfg.patch;
                for (int gy = 0; gy < grid && need.remaining > 0; ++gy)
                    for (int gx = 0; gx < grid && need.remaining > 0; ++gx) {
                        jobs.push_back({need.split, scene_id, scene_cursor, gx * cfg.patch,
                                        gy * cfg.patch, cfg.patch, global_index++});
                        --need.remaining;
                    }
            }
            ++scene_cursor;
        }
    }

    // group jobs by scene so each source is generated once
    std::vector<ManifestEntry> results(jobs.size());
    std::vector<std::vector<int>> by_scene;
    by_scene.resize(size_t(scene_cursor));
    for (size_t i = 0; i < jobs.size(); ++i) by_scene[jobs[i].scene_index].push_back(int(i));

    parallel_for(scene_cursor, [&](int si) {
        if (by_scene[si].empty()) return;
        const uint64_t scene_seed = derive_seed(seed, "scene-" + std::to_string(si));
        MultiBandRaster msi =
            generate_scene(scene_seed, cfg.scene_size, cfg.scene_size, cfg.wavelengths_nm);
        MultiBandRaster pan = pan_from_msi(msi);
        for (int ji : by_scene[si])
            results[ji] = make_patch(cfg, seed, jobs[ji], msi, pan, out_dir);
    });

    for (size_t i = 0; i < jobs.size(); ++i)
        manifest.splits[jobs[i].split].push_back(std::move(results[i]));

    fs::create_directories(out_dir);
    save_manifest(manifest, (fs::path(out_dir) / "dataset.json").string());
    return manifest;
}

}  // namespace pantcr
