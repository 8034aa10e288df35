#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pantcr/cloud.hpp"
#include "pantcr/dataset.hpp"
#include "pantcr/freq.hpp"
#include "pantcr/metrics.hpp"
#include "pantcr/net.hpp"
#include "pantcr/png_io.hpp"
#include "pantcr/train.hpp"

namespace pantcr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad config json: ") + e.what());
    }
    // a run.json from an earlier run is accepted as-is
    if (j.is_object() && j.contains("subcommand") && j.contains("config")) return j["config"];
    return j;
}

json parse_override_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);
    }
}

void apply_override(json& doc, const std::string& kv) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got: " + kv);
    const std::string path = kv.substr(0, eq);
    const json value = parse_override_value(kv.substr(eq + 1));
    json* cur = &doc;
    size_t start = 0;
    while (true) {
        const size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ArgumentError("--set has an empty path segment: " + path);
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        if (!cur->contains(key)) (*cur)[key] = json::object();
        cur = &(*cur)[key];
        start = dot + 1;
    }
}

struct Common {
    std::string config_path;
    std::string out_dir = ".";
    uint64_t seed = 0;
    bool seed_given = false;
    std::vector<std::string> overrides;

    json resolve(const json& defaults) const {
        json doc = defaults;
        if (!config_path.empty()) {
            const json file = load_json_file(config_path);
            if (!file.is_object()) throw ValidationError("config root must be a json object");
            for (auto& [k, v] : file.items()) doc[k] = v;
        }
        for (const auto& kv : overrides) apply_override(doc, kv);
        return doc;
    }
};

void write_run_json(const Common& c, const std::string& sub, const json& resolved) {
    fs::create_directories(c.out_dir);
    json j;
    j["subcommand"] = sub;
    j["seed"] = c.seed;
    j["out"] = c.out_dir;
    j["config"] = resolved;
    std::ofstream f(fs::path(c.out_dir) / "run.json", std::ios::trunc);
    f << j.dump(2) << "\n";
}

void reject_unknown(const json& doc, std::initializer_list<const char*> allowed,
                    const char* what) {
    for (auto& [k, v] : doc.items()) {
        (void)v;
        bool ok = false;
        for (const char* a : allowed)
            if (k == a) ok = true;
        if (!ok) throw ValidationError(std::string("unknown key in ") + what + " config: " + k);
    }
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Common& c, const json& doc) {
    reject_unknown(doc,
                   {"scenes", "scene_size", "r", "patch", "full_size", "thickness_lo",
                    "thickness_hi", "wavelengths_nm", "counts"},
                   "synth");
    SynthConfig cfg;
    cfg.scenes = doc.value("scenes", cfg.scenes);
    cfg.scene_size = doc.value("scene_size", cfg.scene_size);
    cfg.r = doc.value("r", cfg.r);
    cfg.patch = doc.value("patch", cfg.patch);
    cfg.full_size = doc.value("full_size", cfg.full_size);
    cfg.thickness_lo = doc.value("thickness_lo", cfg.thickness_lo);
    cfg.thickness_hi = doc.value("thickness_hi", cfg.thickness_hi);
    if (doc.contains("wavelengths_nm"))
        cfg.wavelengths_nm = doc["wavelengths_nm"].get<std::vector<double>>();
    SynthCounts counts;
    if (doc.contains("counts")) {
        const json& cj = doc["counts"];
        reject_unknown(cj, {"train", "val", "test_reduced", "test_full"}, "synth counts");
        counts.train = cj.value("train", 0);
        counts.val = cj.value("val", 0);
        counts.test_reduced = cj.value("test_reduced", 0);
        counts.test_full = cj.value("test_full", 0);
    }
    write_run_json(c, "synth", doc);
    Manifest m = synth_dataset(cfg, counts, c.seed, c.out_dir);
    size_t total = 0;
    for (const auto& [name, entries] : m.splits) total += entries.size();
    std::printf("synth: wrote %zu patches across %zu splits under %s\n", total, m.splits.size(),
                c.out_dir.c_str());
    return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const Common& c, const json& doc) {
    reject_unknown(doc, {"data", "net", "train"}, "train");
    if (!doc.contains("data")) throw ValidationError("train config needs a data manifest path");
    const std::string manifest_path = doc["data"].get<std::string>();
    NetworkConfig net = NetworkConfig::from_json_text(doc.value("net", json::object()).dump());
    TrainConfig tc = TrainConfig::from_json_text(doc.value("train", json::object()).dump());
    if (c.seed_given) tc.seed = c.seed;

    json resolved = doc;
    resolved["net"] = json::parse(net.to_json_text());
    resolved["train"] = json::parse(tc.to_json_text());
    write_run_json(c, "train", resolved);

    Manifest m = load_manifest(manifest_path);
    const std::string root = fs::path(manifest_path).parent_path().string();
    TrainResult res = train(m, root, net, tc, c.out_dir);

    json summary;
    summary["best_checkpoint"] = res.best_checkpoint;
    summary["last_checkpoint"] = res.last_checkpoint;
    summary["best_val_psnr"] = res.best_val_psnr;
    summary["best_epoch"] = res.best_epoch;
    summary["epochs"] = int(res.log.size());
    std::ofstream f(fs::path(c.out_dir) / "train_summary.json", std::ios::trunc);
    f << summary.dump(2) << "\n";
    std::printf("train: %d epochs, best val PSNR %.4f dB (epoch %d)\n", int(res.log.size()),
                res.best_val_psnr, res.best_epoch);
    return 0;
}

// ---------------------------------------------------------------- eval

MultiBandRaster residual_mse_map(const MultiBandRaster& fused, const MultiBandRaster& gt) {
    MultiBandRaster err(fused.h, fused.w, 1);
    err.wavelengths_nm = {550.0};
    for (int y = 0; y < fused.h; ++y)
        for (int x = 0; x < fused.w; ++x) {
            double acc = 0.0;
            for (int b = 0; b < fused.c; ++b) {
                const double d = double(fused.at(y, x, b)) - double(gt.at(y, x, b));
                acc += d * d;
            }
            err.at(y, x, 0) = float(std::min(1.0, 20.0 * acc / fused.c));
        }
    return err;
}

int cmd_eval(const Common& c, const json& doc) {
    reject_unknown(doc, {"data", "checkpoint", "splits", "save_visuals"}, "eval");
    if (!doc.contains("data")) throw ValidationError("eval config needs a data manifest path");
    const std::string manifest_path = doc["data"].get<std::string>();
    const std::string ckpt = doc.value("checkpoint", std::string("bicubic"));
    std::vector<std::string> splits =
        doc.value("splits", std::vector<std::string>{"test_reduced", "test_full"});
    const bool visuals = doc.value("save_visuals", false);
    write_run_json(c, "eval", doc);

    Manifest m = load_manifest(manifest_path);
    const std::string root = fs::path(manifest_path).parent_path().string();
    std::unique_ptr<Model> model;
    if (ckpt != "bicubic") model = std::make_unique<Model>(Model::load_checkpoint(ckpt));

    fs::create_directories(fs::path(c.out_dir) / "reports");
    std::ofstream csv(fs::path(c.out_dir) / "summary.csv", std::ios::trunc);
    csv << "id,split,psnr,ssim,sam,ergas,d_lambda,d_s,hqnr\n";
    auto cell = [](const std::optional<double>& v) {
        if (!v) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", *v);
        return std::string(buf);
    };

    for (const std::string& split : splits) {
        if (!m.splits.count(split) || m.splits.at(split).empty()) continue;
        MetricReport mean;
        int n = 0;
        auto add_mean = [&](std::optional<double> MetricReport::*field, const MetricReport& r) {
            if (r.*field) {
                if (!(mean.*field)) mean.*field = 0.0;
                *(mean.*field) += *(r.*field);
            }
        };
        for (const auto& entry : m.split(split)) {
            SamplePair s = load_sample(entry, root, m.r);
            MultiBandRaster fused =
                model ? model->infer(s) : bicubic_resample(s.cloudy_lrmsi, double(m.r));
            MetricReport rep;
            if (split == "test_full") {
                QnrResult q = qnr_family(fused, s.cloudy_lrmsi, s.cloudy_pan, m.r);
                rep.d_lambda = q.d_lambda;
                rep.d_s = q.d_s;
                rep.hqnr = q.hqnr;
            } else {
                rep.psnr_db = psnr(fused, s.clean_hrmsi);
                rep.ssim = ssim(fused, s.clean_hrmsi);
                rep.sam_deg = sam_degrees(fused, s.clean_hrmsi);
                rep.ergas = ergas(fused, s.clean_hrmsi, m.r);
            }
            std::ofstream rf(fs::path(c.out_dir) / "reports" / (entry.id + ".json"),
                             std::ios::trunc);
            rf << rep.to_json_string() << "\n";
            csv << entry.id << ',' << split << ',' << cell(rep.psnr_db) << ',' << cell(rep.ssim)
                << ',' << cell(rep.sam_deg) << ',' << cell(rep.ergas) << ',' << cell(rep.d_lambda)
                << ',' << cell(rep.d_s) << ',' << cell(rep.hqnr) << "\n";
            for (auto field : {&MetricReport::psnr_db, &MetricReport::ssim, &MetricReport::sam_deg,
                               &MetricReport::ergas, &MetricReport::d_lambda, &MetricReport::d_s,
                               &MetricReport::hqnr})
                add_mean(field, rep);
            ++n;
            if (visuals) {
                const std::vector<int> rgb =
                    fused.c >= 3 ? std::vector<int>{2, 1, 0} : std::vector<int>{0};
                export_png(fused, (fs::path(c.out_dir) / (entry.id + "_fused.png")).string(), rgb);
                export_png(residual_mse_map(fused, s.clean_hrmsi),
                           (fs::path(c.out_dir) / (entry.id + "_err.png")).string(), {0});
            }
        }
        for (auto field : {&MetricReport::psnr_db, &MetricReport::ssim, &MetricReport::sam_deg,
                           &MetricReport::ergas, &MetricReport::d_lambda, &MetricReport::d_s,
                           &MetricReport::hqnr})
            if (mean.*field) *(mean.*field) /= n;
        csv << "mean," << split << ',' << cell(mean.psnr_db) << ',' << cell(mean.ssim) << ','
            << cell(mean.sam_deg) << ',' << cell(mean.ergas) << ',' << cell(mean.d_lambda) << ','
            << cell(mean.d_s) << ',' << cell(mean.hqnr) << "\n";
        if (mean.psnr_db)
            std::printf("eval %s: mean PSNR %.4f dB, SSIM %.4f, SAM %.4f, ERGAS %.4f (%d items)\n",
                        split.c_str(), *mean.psnr_db, *mean.ssim, *mean.sam_deg, *mean.ergas, n);
        if (mean.hqnr)
            std::printf("eval %s: mean D_lambda %.4f, D_s %.4f, HQNR %.4f (%d items)\n",
                        split.c_str(), *mean.d_lambda, *mean.d_s, *mean.hqnr, n);
    }
    return 0;
}

// ---------------------------------------------------------------- ablate

int cmd_ablate(const Common& c, const json& doc) {
    reject_unknown(doc, {"data", "rows", "net", "train"}, "ablate");
    if (!doc.contains("data")) throw ValidationError("ablate config needs a data manifest path");
    const std::string manifest_path = doc["data"].get<std::string>();
    NetworkConfig base = NetworkConfig::from_json_text(doc.value("net", json::object()).dump());
    TrainConfig tc = TrainConfig::from_json_text(doc.value("train", json::object()).dump());
    if (c.seed_given) tc.seed = c.seed;

    std::vector<std::string> rows;
    if (doc.contains("rows"))
        rows = doc["rows"].get<std::vector<std::string>>();
    else {
        for (const auto& r : ablation_rows())
            if (r != "unified-to-two-stage") rows.push_back(r);
    }

    json resolved = doc;
    resolved["net"] = json::parse(base.to_json_text());
    resolved["train"] = json::parse(tc.to_json_text());
    resolved["rows"] = rows;
    write_run_json(c, "ablate", resolved);

    Manifest m = load_manifest(manifest_path);
    const std::string root = fs::path(manifest_path).parent_path().string();

    std::ofstream csv(fs::path(c.out_dir) / "ablate_summary.csv", std::ios::trunc);
    csv << "row,params,val_psnr,test_psnr,test_sam\n";
    for (const std::string& raw : rows) {
        const std::string slug = normalize_row_name(raw);
        NetworkConfig cfg = ablation_row_config(base, slug);  // throws for out-of-scope rows
        const std::string row_dir = (fs::path(c.out_dir) / "rows" / slug).string();
        TrainResult res = train(m, root, cfg, tc, row_dir);
        Model best = Model::load_checkpoint(res.best_checkpoint);
        EvalStats test;
        if (m.splits.count("test_reduced") && !m.split("test_reduced").empty())
            test = evaluate_split(best, m, root, "test_reduced");
        csv << slug << ',' << best.param_count() << ',' << res.best_val_psnr << ','
            << test.mean_psnr << ',' << test.mean_sam << "\n";
        csv.flush();
        std::printf("ablate %-22s params %zu, val PSNR %.4f, test PSNR %.4f\n", slug.c_str(),
                    best.param_count(), res.best_val_psnr, test.mean_psnr);
    }
    return 0;
}

// ---------------------------------------------------------------- freq-demo

int cmd_freq_demo(const Common& c, const json& doc) {
    reject_unknown(doc, {"size", "thickness", "morphology"}, "freq-demo");
    const int size = doc.value("size", 256);
    const double thickness = doc.value("thickness", 1.0);
    const std::string morph = doc.value("morphology", std::string("cumuliform"));
    write_run_json(c, "freq-demo", doc);

    MultiBandRaster clean = generate_scene(c.seed, size, size, default_wavelengths_nm());
    CloudField cloud = generate_cloud_field(derive_seed(c.seed, "cloud"),
                                            morphology_from_string(morph), thickness, size, size);
    MultiBandRaster cloudy = apply_scattering(clean, cloud);
    MultiBandRaster amp_swapped = swap_amplitude(cloudy, clean);   // cloudy amplitude
    MultiBandRaster phase_swapped = swap_amplitude(clean, cloudy); // cloudy phase

    fs::create_directories(c.out_dir);
    const std::vector<int> rgb = {2, 1, 0};
    export_png(clean, (fs::path(c.out_dir) / "clean.png").string(), rgb);
    export_png(cloudy, (fs::path(c.out_dir) / "cloudy.png").string(), rgb);
    export_png(amp_swapped, (fs::path(c.out_dir) / "swap_amplitude.png").string(), rgb);
    export_png(phase_swapped, (fs::path(c.out_dir) / "swap_phase.png").string(), rgb);
    export_png_strip({clean, cloudy, amp_swapped},
                     (fs::path(c.out_dir) / "triptych_amplitude.png").string(), rgb);
    export_png_strip({clean, cloudy, phase_swapped},
                     (fs::path(c.out_dir) / "triptych_phase.png").string(), rgb);
    std::printf("freq-demo: wrote 6 png files under %s\n", c.out_dir.c_str());
    return 0;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const Common& c, const json& doc) {
    reject_unknown(doc, {"block"}, "gradcheck");
    const std::string block = doc.value("block", std::string("all"));
    write_run_json(c, "gradcheck", doc);

    std::vector<std::string> blocks =
        block == "all" ? gradcheck_blocks() : std::vector<std::string>{block};
    bool ok = true;
    json out = json::array();
    for (const auto& b : blocks) {
        GradCheckReport rep = gradcheck(b, c.seed);
        ok = ok && rep.pass();
        std::printf("gradcheck %-18s max rel err %.3e  [%s]\n", b.c_str(), rep.worst,
                    rep.pass() ? "ok" : "FAIL");
        json jr;
        jr["block"] = b;
        jr["worst"] = rep.worst;
        json tensors = json::object();
        for (const auto& e : rep.entries) tensors[e.tensor] = e.max_rel_err;
        jr["tensors"] = tensors;
        out.push_back(jr);
    }
    std::ofstream f(fs::path(c.out_dir) / "gradcheck.json", std::ios::trunc);
    f << out.dump(2) << "\n";
    if (!ok) throw NumericError("gradient verification failed");
    return 0;
}

// ---------------------------------------------------------------- budget

int cmd_budget(const Common& c, const json& doc) {
    reject_unknown(doc, {"net"}, "budget");
    NetworkConfig net = NetworkConfig::from_json_text(doc.value("net", json::object()).dump());
    write_run_json(c, "budget", doc);
    BudgetReport rep = count_params_flops(net);
    std::printf("Param (M): %.3f\n", double(rep.params) / 1e6);
    std::printf("FLOPs (G): %.3f\n", rep.flops / 1e9);
    json j;
    j["params"] = rep.params;
    j["param_m"] = double(rep.params) / 1e6;
    j["flops"] = rep.flops;
    j["flops_g"] = rep.flops / 1e9;
    std::ofstream f(fs::path(c.out_dir) / "budget.json", std::ios::trunc);
    f << j.dump(2) << "\n";
    return 0;
}

void write_error_json(const std::string& out_dir, const std::string& type,
                      const std::string& message) {
    json j;
    j["error"] = {{"type", type}, {"message", message}};
    std::cerr << j.dump() << "\n";
    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (!ec) {
            std::ofstream f(fs::path(out_dir) / "error.json", std::ios::trunc);
            f << j.dump(2) << "\n";
        }
    }
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"unified pansharpening + thin-cloud removal toolkit"};
    app.require_subcommand(1);

    Common common;
    json flag_doc = json::object();

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "json config file (or a prior run.json)");
        sub->add_option("--out", common.out_dir, "output directory");
        sub->add_option("--seed", common.seed, "master seed")->each([&](const std::string&) {
            common.seed_given = true;
        });
        sub->add_option("--set", common.overrides, "dot-path config override key=value");
    };

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth);
    int n_scenes = -1, n_train = -1, n_val = -1, n_tr = -1, n_tf = -1, patch = -1, scene_size = -1,
        ratio = -1;
    std::string thickness;
    synth->add_option("--scenes", n_scenes);
    synth->add_option("--train", n_train);
    synth->add_option("--val", n_val);
    synth->add_option("--test-reduced", n_tr);
    synth->add_option("--test-full", n_tf);
    synth->add_option("--patch", patch);
    synth->add_option("--scene-size", scene_size);
    synth->add_option("--r", ratio);
    synth->add_option("--thickness", thickness, "lo:hi range");

    // train
    auto* tr = app.add_subcommand("train", "train a model from a dataset manifest");
    add_common(tr);
    std::string data_path;
    tr->add_option("--data", data_path, "dataset.json path");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint (or the bicubic baseline)");
    add_common(ev);
    std::string eval_data, checkpoint, splits_csv;
    bool save_visuals = false;
    ev->add_option("--data", eval_data);
    ev->add_option("--checkpoint", checkpoint, "checkpoint dir or 'bicubic'");
    ev->add_option("--splits", splits_csv, "comma-separated split names");
    ev->add_flag("--save-visuals", save_visuals);

    // ablate
    auto* ab = app.add_subcommand("ablate", "train + evaluate ablation rows");
    add_common(ab);
    std::string ablate_data, rows_csv;
    ab->add_option("--data", ablate_data);
    ab->add_option("--rows", rows_csv, "comma-separated row names");

    // freq-demo
    auto* fd = app.add_subcommand("freq-demo", "amplitude/phase swap demonstration panels");
    add_common(fd);
    int demo_size = -1;
    double demo_thickness = -1;
    std::string demo_morph;
    fd->add_option("--size", demo_size);
    fd->add_option("--thickness", demo_thickness);
    fd->add_option("--morphology", demo_morph);

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    add_common(gc);
    std::string block;
    gc->add_option("--block", block, "block name or 'all'");

    // budget
    auto* bu = app.add_subcommand("budget", "parameter and FLOP budget for a config");
    add_common(bu);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        write_error_json("", "cli", e.what());
        return 1;
    }

    auto split_csv = [](const std::string& s) {
        std::vector<std::string> out;
        size_t start = 0;
        while (start <= s.size() && !s.empty()) {
            size_t comma = s.find(',', start);
            out.push_back(s.substr(start, comma == std::string::npos ? comma : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    };

    std::string sub;
    try {
        if (synth->parsed()) {
            sub = "synth";
            if (n_scenes >= 0) flag_doc["scenes"] = n_scenes;
            if (scene_size >= 0) flag_doc["scene_size"] = scene_size;
            if (patch >= 0) flag_doc["patch"] = patch;
            if (ratio >= 0) flag_doc["r"] = ratio;
            if (!thickness.empty()) {
                const size_t colon = thickness.find(':');
                if (colon == std::string::npos)
                    throw ArgumentError("--thickness expects lo:hi");
                flag_doc["thickness_lo"] = std::stod(thickness.substr(0, colon));
                flag_doc["thickness_hi"] = std::stod(thickness.substr(colon + 1));
            }
            json counts = json::object();
            if (n_train >= 0) counts["train"] = n_train;
            if (n_val >= 0) counts["val"] = n_val;
            if (n_tr >= 0) counts["test_reduced"] = n_tr;
            if (n_tf >= 0) counts["test_full"] = n_tf;
            if (!counts.empty()) flag_doc["counts"] = counts;
            json doc = common.resolve(flag_doc);
            return cmd_synth(common, doc);
        }
        if (tr->parsed()) {
            sub = "train";
            if (!data_path.empty()) flag_doc["data"] = data_path;
            return cmd_train(common, common.resolve(flag_doc));
        }
        if (ev->parsed()) {
            sub = "eval";
            if (!eval_data.empty()) flag_doc["data"] = eval_data;
            if (!checkpoint.empty()) flag_doc["checkpoint"] = checkpoint;
            if (!splits_csv.empty()) flag_doc["splits"] = split_csv(splits_csv);
            if (save_visuals) flag_doc["save_visuals"] = true;
            return cmd_eval(common, common.resolve(flag_doc));
        }
        if (ab->parsed()) {
            sub = "ablate";
            if (!ablate_data.empty()) flag_doc["data"] = ablate_data;
            if (!rows_csv.empty()) flag_doc["rows"] = split_csv(rows_csv);
            return cmd_ablate(common, common.resolve(flag_doc));
        }
        if (fd->parsed()) {
            sub = "freq-demo";
            if (demo_size >= 0) flag_doc["size"] = demo_size;
            if (demo_thickness >= 0) flag_doc["thickness"] = demo_thickness;
            if (!demo_morph.empty()) flag_doc["morphology"] = demo_morph;
            return cmd_freq_demo(common, common.resolve(flag_doc));
        }
        if (gc->parsed()) {
            sub = "gradcheck";
            if (!block.empty()) flag_doc["block"] = block;
            return cmd_gradcheck(common, common.resolve(flag_doc));
        }
        if (bu->parsed()) {
            sub = "budget";
            return cmd_budget(common, common.resolve(flag_doc));
        }
        write_error_json("", "cli", "no subcommand given");
        return 1;
    } catch (const ValidationError& e) {
        write_error_json(common.out_dir, "validation", e.what());
        return 1;
    } catch (const ArgumentError& e) {
        write_error_json(common.out_dir, "argument", e.what());
        return 1;
    } catch (const FormatError& e) {
        write_error_json(common.out_dir, "format", e.what());
        return 1;
    } catch (const CapacityError& e) {
        write_error_json(common.out_dir, "capacity", e.what());
        return 1;
    } catch (const std::exception& e) {
        write_error_json(common.out_dir, "runtime", e.what());
        return 2;
    }
}

}  // namespace pantcr::cli
