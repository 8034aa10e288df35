#include "pantcr/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace pantcr {

namespace fs = std::filesystem;
using nlohmann::json;
using graph::Tape;
using graph::Var;

void NetworkConfig::validate() const {
    for (int w : stage_widths) {
        if (w < 2) throw ValidationError("stage widths must be >= 2");
        if (w % 2 != 0) throw ValidationError("stage widths must be even");
    }
    if (dam_depth < 2) throw ValidationError("dam_depth must be >= 2");
    if (pool_radius < 1) throw ValidationError("pool_radius must be >= 1");
    if (se_heads < 1) throw ValidationError("se_heads must be >= 1");
    if (r < 1) throw ValidationError("scale ratio must be >= 1");
    if (bands < 1) throw ValidationError("bands must be >= 1");
    if (ablation.se_mode == SeMode::swt) {
        for (int w : stage_widths)
            if ((w / 2) % se_heads != 0)
                throw ValidationError("se_heads must divide width/2 at every stage");
    }
}

namespace {

template <typename T>
T enum_from_string(const std::string& s, std::initializer_list<std::pair<const char*, T>> table,
                   const char* what) {
    for (const auto& [name, v] : table)
        if (s == name) return v;
    throw ValidationError(std::string("unknown ") + what + ": " + s);
}

const std::initializer_list<std::pair<const char*, SeMode>> kSeModes = {
    {"swt", SeMode::swt}, {"channel_attention", SeMode::channel_attention}, {"off", SeMode::off}};
const std::initializer_list<std::pair<const char*, FdrMode>> kFdrModes = {
    {"fdr", FdrMode::fdr},
    {"spatial_attention", FdrMode::spatial_attention},
    {"off", FdrMode::off}};
const std::initializer_list<std::pair<const char*, IfcMode>> kIfcModes = {
    {"ifc", IfcMode::ifc}, {"channel_attention", IfcMode::channel_attention}, {"off", IfcMode::off}};
const std::initializer_list<std::pair<const char*, BranchTopology>> kTopologies = {
    {"parallel", BranchTopology::parallel}, {"series", BranchTopology::series}};

template <typename T>
std::string enum_to_string(T v, std::initializer_list<std::pair<const char*, T>> table) {
    for (const auto& [name, e] : table)
        if (e == v) return name;
    throw ValidationError("bad enum value");
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const char* what) {
    for (auto& [k, v] : j.items()) {
        (void)v;
        bool ok = false;
        for (const char* a : allowed)
            if (k == a) ok = true;
        if (!ok) throw ValidationError(std::string("unknown key in ") + what + ": " + k);
    }
}

}  // namespace

std::string NetworkConfig::to_json_text() const {
    json a;
    a["use_dam"] = ablation.use_dam;
    a["use_pan_prompt"] = ablation.use_pan_prompt;
    a["use_nir_prompt"] = ablation.use_nir_prompt;
    a["use_highpass"] = ablation.use_highpass;
    a["use_phase_branch"] = ablation.use_phase_branch;
    a["use_amp_branch"] = ablation.use_amp_branch;
    a["use_mafg"] = ablation.use_mafg;
    a["branch_topology"] = enum_to_string(ablation.topology, kTopologies);
    a["se_mode"] = enum_to_string(ablation.se_mode, kSeModes);
    a["fdr_mode"] = enum_to_string(ablation.fdr_mode, kFdrModes);
    a["ifc_mode"] = enum_to_string(ablation.ifc_mode, kIfcModes);

    json j;
    j["stage_widths"] = stage_widths;
    j["dam_depth"] = dam_depth;
    j["pool_radius"] = pool_radius;
    j["se_heads"] = se_heads;
    j["r"] = r;
    j["bands"] = bands;
    j["ablation"] = a;
    return j.dump(2);
}

NetworkConfig NetworkConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad network config json: ") + e.what());
    }
    reject_unknown_keys(
        j, {"stage_widths", "dam_depth", "pool_radius", "se_heads", "r", "bands", "ablation"},
        "network config");
    NetworkConfig cfg;
    if (j.contains("stage_widths")) {
        auto v = j["stage_widths"].get<std::vector<int>>();
        if (v.size() != 3) throw ValidationError("stage_widths must hold 3 entries");
        std::copy(v.begin(), v.end(), cfg.stage_widths.begin());
    }
    cfg.dam_depth = j.value("dam_depth", cfg.dam_depth);
    cfg.pool_radius = j.value("pool_radius", cfg.pool_radius);
    cfg.se_heads = j.value("se_heads", cfg.se_heads);
    cfg.r = j.value("r", cfg.r);
    cfg.bands = j.value("bands", cfg.bands);
    if (j.contains("ablation")) {
        const json& a = j["ablation"];
        reject_unknown_keys(a,
                            {"use_dam", "use_pan_prompt", "use_nir_prompt", "use_highpass",
                             "use_phase_branch", "use_amp_branch", "use_mafg", "branch_topology",
                             "se_mode", "fdr_mode", "ifc_mode"},
                            "ablation flags");
        AblationFlags& f = cfg.ablation;
        f.use_dam = a.value("use_dam", f.use_dam);
        f.use_pan_prompt = a.value("use_pan_prompt", f.use_pan_prompt);
        f.use_nir_prompt = a.value("use_nir_prompt", f.use_nir_prompt);
        f.use_highpass = a.value("use_highpass", f.use_highpass);
        f.use_phase_branch = a.value("use_phase_branch", f.use_phase_branch);
        f.use_amp_branch = a.value("use_amp_branch", f.use_amp_branch);
        f.use_mafg = a.value("use_mafg", f.use_mafg);
        if (a.contains("branch_topology"))
            f.topology = enum_from_string(a["branch_topology"].get<std::string>(), kTopologies,
                                          "branch_topology");
        if (a.contains("se_mode"))
            f.se_mode = enum_from_string(a["se_mode"].get<std::string>(), kSeModes, "se_mode");
        if (a.contains("fdr_mode"))
            f.fdr_mode = enum_from_string(a["fdr_mode"].get<std::string>(), kFdrModes, "fdr_mode");
        if (a.contains("ifc_mode"))
            f.ifc_mode = enum_from_string(a["ifc_mode"].get<std::string>(), kIfcModes, "ifc_mode");
    }
    cfg.validate();
    return cfg;
}

std::vector<std::string> ablation_rows() {
    return {"full",
            "wo-deg-aware",
            "wo-pan",
            "wo-nir",
            "wo-pan-nir",
            "wo-highpass",
            "wo-phase-branch",
            "wo-amp-branch",
            "fdr-to-spa-atten",
            "wo-fdr",
            "wo-mafg",
            "wo-ifc",
            "ifc-to-cha-atten",
            "parallel-to-series",
            "wo-se",
            "se-to-cha-atten",
            "unified-to-two-stage"};
}

std::string normalize_row_name(const std::string& raw) {
    std::string s;
    for (size_t i = 0; i < raw.size();) {
        if (raw.compare(i, 3, "w/o") == 0) {
            s += "wo";
            i += 3;
        } else if (raw.compare(i, 2, "->") == 0) {
            s += "-to-";
            i += 2;
        } else if (raw.compare(i, 3, "\xe2\x86\x92") == 0) {  // arrow
            s += "-to-";
            i += 3;
        } else {
            char ch = raw[i];
            s += std::isalnum(static_cast<unsigned char>(ch)) ? char(std::tolower(ch)) : '-';
            ++i;
        }
    }
    // collapse and trim dashes
    std::string out;
    for (char ch : s) {
        if (ch == '-' && (out.empty() || out.back() == '-')) continue;
        out += ch;
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out;
}

NetworkConfig ablation_row_config(const NetworkConfig& base, const std::string& row) {
    const std::string slug = normalize_row_name(row);
    NetworkConfig cfg = base;
    AblationFlags& f = cfg.ablation;
    if (slug == "full") return cfg;
    if (slug == "wo-deg-aware") { f.use_dam = false; return cfg; }
    if (slug == "wo-pan") { f.use_pan_prompt = false; return cfg; }
    if (slug == "wo-nir") { f.use_nir_prompt = false; return cfg; }
    if (slug == "wo-pan-nir") { f.use_pan_prompt = false; f.use_nir_prompt = false; return cfg; }
    if (slug == "wo-highpass" || slug == "wo-h") { f.use_highpass = false; return cfg; }
    if (slug == "wo-pha-branch" || slug == "wo-phase-branch") { f.use_phase_branch = false; return cfg; }
    if (slug == "wo-amp-branch") { f.use_amp_branch = false; return cfg; }
    if (slug == "fdr-to-spa-atten") { f.fdr_mode = FdrMode::spatial_attention; return cfg; }
    if (slug == "wo-fdr") { f.fdr_mode = FdrMode::off; return cfg; }
    if (slug == "wo-mafg") { f.use_mafg = false; return cfg; }
    if (slug == "wo-ifc") { f.ifc_mode = IfcMode::off; return cfg; }
    if (slug == "ifc-to-cha-atten") { f.ifc_mode = IfcMode::channel_attention; return cfg; }
    if (slug == "parallel-to-series") { f.topology = BranchTopology::series; return cfg; }
    if (slug == "wo-se") { f.se_mode = SeMode::off; return cfg; }
    if (slug == "se-to-cha-atten") { f.se_mode = SeMode::channel_attention; return cfg; }
    if (slug == "unified-to-two-stage")
        throw ArgumentError("out of scope: requires external decloud model");
    throw ArgumentError("unknown ablation row: " + row + " (slug " + slug + ")");
}

Var BuildCtx::leaf(ParamTensor* p) {
    auto it = index.find(p);
    if (it != index.end()) return bound[it->second].second;
    Tensor t(p->c, p->h, p->w);
    for (size_t i = 0; i < p->val.size(); ++i) t.v[i] = double(p->val[i]);
    Var v = tape.leaf(std::move(t), true);
    index[p] = int(bound.size());
    bound.emplace_back(p, v);
    return v;
}

Var Conv::apply(BuildCtx& ctx, Var x) const {
    return graph::conv2d(ctx.tape, x, ctx.leaf(w), ctx.leaf(b), k);
}

Var Linear::apply(BuildCtx& ctx, Var x) const {
    return graph::linear(ctx.tape, x, ctx.leaf(w), ctx.leaf(b));
}

Var Dam::apply(BuildCtx& ctx, Var in2c) const {
    if (fused_only) return fuse.apply(ctx, in2c);
    Var h = in2c;
    for (size_t i = 0; i < convs.size(); ++i) {
        h = convs[i].apply(ctx, h);
        if (i + 1 < convs.size()) h = graph::relu(ctx.tape, h);
    }
    return h;
}

double Dam::flops(int h, int w) const {
    if (fused_only) return fuse.flops(h, w);
    double acc = 0.0;
    for (const auto& cv : convs) acc += cv.flops(h, w);
    return acc;
}

Var Mafg::gate(BuildCtx& ctx, Var in2c) const {
    Var z = compress.apply(ctx, in2c);
    Var g = graph::gap(ctx.tape, z);
    g = graph::relu(ctx.tape, l1.apply(ctx, g));
    return graph::sigmoid(ctx.tape, l2.apply(ctx, g));
}

double Mafg::flops(int h, int w) const { return compress.flops(h, w) + l1.flops() + l2.flops(); }

std::pair<Var, Var> Ifc::apply(BuildCtx& ctx, Var ph, Var ah) const {
    Tape& t = ctx.tape;
    if (mode == IfcMode::off) return {ph, ah};
    Var wp = graph::sigmoid(t, p2.apply(ctx, graph::relu(t, p1.apply(ctx, graph::gap(t, ph)))));
    Var wa = graph::sigmoid(t, a2.apply(ctx, graph::relu(t, a1.apply(ctx, graph::gap(t, ah)))));
    Var s = ctx.leaf(scale.s);
    if (mode == IfcMode::ifc) {
        Var p_res = graph::mul_scalar_param(t, graph::mul_cvec(t, ph, wa), s);
        Var a_res = graph::mul_scalar_param(t, graph::mul_cvec(t, ah, wp), s);
        return {graph::add(t, ph, p_res), graph::add(t, ah, a_res)};
    }
    // channel_attention: each branch gates itself, no cross talk
    Var p_res = graph::mul_scalar_param(t, graph::mul_cvec(t, ph, wp), s);
    Var a_res = graph::mul_scalar_param(t, graph::mul_cvec(t, ah, wa), s);
    return {graph::add(t, ph, p_res), graph::add(t, ah, a_res)};
}

double Ifc::flops() const {
    if (mode == IfcMode::off) return 0.0;
    return p1.flops() + p2.flops() + a1.flops() + a2.flops();
}

Var Highpass::apply(BuildCtx& ctx, Var x) const {
    Tape& t = ctx.tape;
    Var pooled = graph::avgpool_win(t, x, pool_radius);
    Var d = graph::absval(t, graph::sub(t, x, pooled));
    Var gate = graph::sigmoid(t, graph::affine_scalar(t, d, ctx.leaf(scale.s), ctx.leaf(bias.s)));
    return graph::mul(t, x, gate);
}

Var Fdr::phase_branch(BuildCtx& ctx, Var p_f, Var pan_prompt) const {
    Tape& t = ctx.tape;
    if (!flags.use_phase_branch) return p_f;
    Var in;
    if (flags.use_pan_prompt) {
        Var xp = pan_prompt;
        if (flags.use_highpass) xp = hp.apply(ctx, xp);
        auto [ax, px] = graph::fft_ap(t, xp);
        (void)ax;
        in = graph::concat_c(t, lift_p.apply(ctx, px), p_f);
    } else {
        in = graph::concat_c(t, p_f, p_f);
    }
    return graph::add(t, p_f, dam_p.apply(ctx, in));
}

Var Fdr::amp_branch(BuildCtx& ctx, Var a_f, Var nir_prompt) const {
    Tape& t = ctx.tape;
    if (!flags.use_amp_branch) return a_f;
    Var in;
    if (flags.use_nir_prompt) {
        auto [ai, pi] = graph::fft_ap(t, nir_prompt);
        (void)pi;
        in = graph::concat_c(t, lift_a.apply(ctx, ai), a_f);
    } else {
        in = graph::concat_c(t, a_f, a_f);
    }
    Var a_deg = dam_a.apply(ctx, in);
    if (flags.use_mafg) a_deg = graph::mul_cvec(t, a_deg, mafg.gate(ctx, in));
    return graph::add(t, a_f, a_deg);
}

Var Fdr::apply(BuildCtx& ctx, Var f, Var pan_prompt, Var nir_prompt) const {
    Tape& t = ctx.tape;
    if (flags.fdr_mode == FdrMode::off) return f;
    if (flags.fdr_mode == FdrMode::spatial_attention) {
        Var r1 = graph::add(t, f, sa_e2.apply(ctx, graph::relu(t, sa_e1.apply(ctx, f))));
        Var r2 = graph::add(t, r1, sa_e4.apply(ctx, graph::relu(t, sa_e3.apply(ctx, r1))));
        Var stat = graph::concat_c(t, graph::channel_mean(t, r2), graph::channel_max(t, r2));
        Var g = graph::sigmoid(t, sa_gate.apply(ctx, stat));
        return graph::add(t, f, sa_out.apply(ctx, graph::mul_map(t, r2, g)));
    }

    auto [a_f, p_f] = graph::fft_ap(t, f);
    Var p_hat, a_hat;
    if (flags.topology == BranchTopology::parallel) {
        p_hat = phase_branch(ctx, p_f, pan_prompt);
        a_hat = amp_branch(ctx, a_f, nir_prompt);
    } else {
        // series: the amplitude branch consumes the phase-updated spectrum
        Var p1 = phase_branch(ctx, p_f, pan_prompt);
        Var f_mid = graph::ifft_ap(t, a_f, p1);
        auto [a_m, p_m] = graph::fft_ap(t, f_mid);
        p_hat = p_m;
        a_hat = amp_branch(ctx, a_m, nir_prompt);
    }
    auto [p_c, a_c] = ifc.apply(ctx, p_hat, a_hat);
    Var rec = graph::ifft_ap(t, a_c, p_c);
    return graph::add(t, f, out_conv.apply(ctx, rec));
}

namespace {

double fft_cost(int h, int w) {
    const double n = double(h) * w;
    return 5.0 * n * std::log2(n);
}

}  // namespace

double Fdr::flops(int h, int w) const {
    if (flags.fdr_mode == FdrMode::off) return 0.0;
    if (flags.fdr_mode == FdrMode::spatial_attention) {
        return sa_e1.flops(h, w) + sa_e2.flops(h, w) + sa_e3.flops(h, w) + sa_e4.flops(h, w) +
               sa_gate.flops(h, w) + sa_out.flops(h, w);
    }
    double acc = fft_cost(h, w) * width;  // decompose F
    if (flags.use_phase_branch) {
        if (flags.use_pan_prompt) {
            if (flags.use_highpass) {
                const int side = 2 * hp.pool_radius + 1;
                acc += double(h) * w * side * side;
            }
            acc += fft_cost(h, w);  // prompt spectrum
            acc += lift_p.flops(h, w);
        }
        acc += dam_p.flops(h, w);
    }
    if (flags.use_amp_branch) {
        if (flags.use_nir_prompt) {
            acc += fft_cost(h, w);
            acc += lift_a.flops(h, w);
        }
        acc += dam_a.flops(h, w);
        if (flags.use_mafg) acc += mafg.flops(h, w);
    }
    if (flags.topology == BranchTopology::series) acc += 2.0 * fft_cost(h, w) * width;
    acc += ifc.flops();
    acc += fft_cost(h, w) * width;  // recompose
    acc += out_conv.flops(h, w);
    return acc;
}

Var Se::apply(BuildCtx& ctx, Var f) const {
    Tape& t = ctx.tape;
    if (mode == SeMode::off) return f;
    if (mode == SeMode::channel_attention) {
        Var g = graph::sigmoid(t, ca2.apply(ctx, graph::relu(t, ca1.apply(ctx, graph::gap(t, f)))));
        return graph::mul_cvec(t, f, g);
    }
    const int fh = t.val(f).h, fw = t.val(f).w;  // copy dims; val refs go stale as nodes grow
    const int hw = fh * fw;
    const int dh = dk / heads;
    Var qv = q.apply(ctx, f), kv = k.apply(ctx, f), vv = v.apply(ctx, f);
    Var heads_out;
    for (int hd = 0; hd < heads; ++hd) {
        Var qh = graph::reshape(t, graph::slice_c(t, qv, hd * dh, dh), 1, dh, hw);
        Var kh = graph::reshape(t, graph::slice_c(t, kv, hd * dh, dh), 1, dh, hw);
        Var vh = graph::reshape(t, graph::slice_c(t, vv, hd * dh, dh), 1, dh, hw);
        Var logits = graph::scale(t, graph::matmul(t, qh, graph::transpose_mat(t, kh)),
                                  1.0 / std::sqrt(double(hw)));
        Var attn = graph::softmax_rows(t, logits);
        Var oh = graph::reshape(t, graph::matmul(t, attn, vh), dh, fh, fw);
        heads_out = hd == 0 ? oh : graph::concat_c(t, heads_out, oh);
    }
    Var f1v = graph::add(t, f, o.apply(ctx, heads_out));
    Var ffn = f2.apply(ctx, graph::relu(t, f1.apply(ctx, f1v)));
    return graph::add(t, f1v, ffn);
}

double Se::flops(int h, int w) const {
    if (mode == SeMode::off) return 0.0;
    if (mode == SeMode::channel_attention) return ca1.flops() + ca2.flops();
    const double hw = double(h) * w;
    const int dh = dk / heads;
    double acc = q.flops(h, w) + k.flops(h, w) + v.flops(h, w) + o.flops(h, w);
    acc += 2.0 * heads * double(dh) * dh * hw;  // QK^T and AV
    acc += f1.flops(h, w) + f2.flops(h, w);
    return acc;
}

ParamTensor* Model::add_param(const std::string& name, int c, int h, int w, double init_std,
                              bool zero_init, bool is_scalar, double scalar_default) {
    auto p = std::make_unique<ParamTensor>();
    p->name = name;
    p->c = c;
    p->h = h;
    p->w = w;
    p->val.assign(size_t(c) * h * w, 0.0f);
    p->grad.assign(p->val.size(), 0.0);
    p->m.assign(p->val.size(), 0.0);
    p->v.assign(p->val.size(), 0.0);
    p->zero_init = zero_init;
    p->init_std = init_std;
    p->is_scalar = is_scalar;
    p->scalar_default = scalar_default;
    ParamTensor* raw = p.get();
    if (by_name_.count(name)) throw Error("duplicate parameter name: " + name);
    by_name_[name] = raw;
    params_.push_back(std::move(p));
    return raw;
}

Conv Model::make_conv(const std::string& name, int cin, int cout, int k, bool zero) {
    Conv cv;
    cv.cin = cin;
    cv.cout = cout;
    cv.k = k;
    const double std = std::sqrt(2.0 / (double(cin) * k * k));
    cv.w = add_param(name + ".w", 1, cout, cin * k * k, std, zero);
    cv.b = add_param(name + ".b", cout, 1, 1, 0.0, false);
    return cv;
}

Linear Model::make_linear(const std::string& name, int cin, int cout, bool zero) {
    Linear ln;
    ln.cin = cin;
    ln.cout = cout;
    const double std = std::sqrt(2.0 / double(cin));
    ln.w = add_param(name + ".w", 1, cout, cin, std, zero);
    ln.b = add_param(name + ".b", cout, 1, 1, 0.0, false);
    return ln;
}

ScalarParam Model::make_scalar(const std::string& name, double def) {
    ScalarParam sp;
    sp.s = add_param(name, 1, 1, 1, 0.0, false, true, def);
    return sp;
}

Model::Model(NetworkConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build();
}

void Model::build() {
    const AblationFlags& f = cfg_.ablation;
    const int w0 = cfg_.stage_widths[0];

    stem_.in = make_conv("stem.in", cfg_.bands + 1, w0, 3, false);
    stem_.a = make_conv("stem.a", w0, w0, 3, false);
    stem_.b = make_conv("stem.b", w0, w0, 3, false);

    for (int s = 0; s < 3; ++s) {
        const int c = cfg_.stage_widths[s];
        const std::string pre = "stage" + std::to_string(s) + ".";
        Stage& st = stages_[s];
        st.width = c;

        Fdr& fd = st.fdr;
        fd.flags = f;
        fd.width = c;
        if (f.fdr_mode == FdrMode::spatial_attention) {
            fd.sa_e1 = make_conv(pre + "sa.e1", c, 2 * c, 3, false);
            fd.sa_e2 = make_conv(pre + "sa.e2", 2 * c, c, 3, false);
            fd.sa_e3 = make_conv(pre + "sa.e3", c, 2 * c, 3, false);
            fd.sa_e4 = make_conv(pre + "sa.e4", 2 * c, c, 3, false);
            fd.sa_gate = make_conv(pre + "sa.gate", 2, 1, 7, false);
            fd.sa_out = make_conv(pre + "sa.out", c, c, 3, true);
        } else if (f.fdr_mode == FdrMode::fdr) {
            auto make_dam = [&](const std::string& side) {
                Dam d;
                if (!f.use_dam) {
                    d.fused_only = true;
                    d.fuse = make_conv(pre + side + ".fuse", 2 * c, c, 1, true);
                    return d;
                }
                d.convs.push_back(make_conv(pre + side + ".c0", 2 * c, c, 3, false));
                for (int i = 1; i < cfg_.dam_depth; ++i)
                    d.convs.push_back(make_conv(pre + side + ".c" + std::to_string(i), c, c, 3,
                                                i == cfg_.dam_depth - 1));
                return d;
            };
            if (f.use_phase_branch) {
                if (f.use_pan_prompt) {
                    if (f.use_highpass) {
                        fd.hp.pool_radius = cfg_.pool_radius;
                        fd.hp.scale = make_scalar(pre + "hp.scale", 1.0);
                        fd.hp.bias = make_scalar(pre + "hp.bias", 0.0);
                    }
                    fd.lift_p = make_conv(pre + "lift_p", 1, c, 1, false);
                }
                fd.dam_p = make_dam("dam_p");
            }
            if (f.use_amp_branch) {
                if (f.use_nir_prompt) fd.lift_a = make_conv(pre + "lift_a", 1, c, 1, false);
                fd.dam_a = make_dam("dam_a");
                if (f.use_mafg) {
                    fd.mafg.compress = make_conv(pre + "mafg.compress", 2 * c, c, 1, false);
                    fd.mafg.l1 = make_linear(pre + "mafg.l1", c, c / 2, false);
                    fd.mafg.l2 = make_linear(pre + "mafg.l2", c / 2, c, true);
                }
            }
            fd.ifc.mode = f.ifc_mode;
            if (f.ifc_mode != IfcMode::off) {
                fd.ifc.p1 = make_linear(pre + "ifc.p1", c, c / 2, false);
                fd.ifc.p2 = make_linear(pre + "ifc.p2", c / 2, c, true);
                fd.ifc.a1 = make_linear(pre + "ifc.a1", c, c / 2, false);
                fd.ifc.a2 = make_linear(pre + "ifc.a2", c / 2, c, true);
                fd.ifc.scale = make_scalar(pre + "ifc.scale", 0.0);
            }
            fd.out_conv = make_conv(pre + "out", c, c, 3, true);
        }

        Se& se = st.se;
        se.mode = f.se_mode;
        se.width = c;
        se.dk = c / 2;
        se.heads = cfg_.se_heads;
        if (f.se_mode == SeMode::swt) {
            se.q = make_conv(pre + "se.q", c, se.dk, 1, false);
            se.k = make_conv(pre + "se.k", c, se.dk, 1, false);
            se.v = make_conv(pre + "se.v", c, se.dk, 1, false);
            se.o = make_conv(pre + "se.o", se.dk, c, 1, true);
            se.f1 = make_conv(pre + "se.f1", c, c, 1, false);
            se.f2 = make_conv(pre + "se.f2", c, c, 1, true);
        } else if (f.se_mode == SeMode::channel_attention) {
            se.ca1 = make_linear(pre + "se.ca1", c, c / 2, false);
            se.ca2 = make_linear(pre + "se.ca2", c / 2, c, false);
        }

        if (s < 2)
            down_[s] = make_conv("down" + std::to_string(s), cfg_.stage_widths[s],
                                 cfg_.stage_widths[s + 1], 1, false);
    }

    up_conv_[1] = make_conv("up1.conv", cfg_.stage_widths[2], cfg_.stage_widths[1], 3, false);
    fuse_[1] = make_conv("up1.fuse", 2 * cfg_.stage_widths[1], cfg_.stage_widths[1], 1, false);
    up_conv_[0] = make_conv("up0.conv", cfg_.stage_widths[1], cfg_.stage_widths[0], 3, false);
    fuse_[0] = make_conv("up0.fuse", 2 * cfg_.stage_widths[0], cfg_.stage_widths[0], 1, false);
    head_ = make_conv("head", w0, cfg_.bands, 3, true);
}

ParamTensor* Model::param(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ArgumentError("no parameter named " + name);
    return it->second;
}

size_t Model::param_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += p->count();
    return n;
}

void Model::init_weights(uint64_t seed, bool randomize_residual) {
    for (auto& p : params_) {
        Rng rng(derive_seed(seed, p->name));
        if (p->is_scalar) {
            p->val[0] = float(randomize_residual ? rng.range(0.3, 0.9) : p->scalar_default);
        } else if (p->init_std > 0.0 && (!p->zero_init || randomize_residual)) {
            for (auto& x : p->val) x = float(rng.normal() * p->init_std);
        } else if (randomize_residual) {
            for (auto& x : p->val) x = float(rng.range(-0.1, 0.1));
        } else {
            std::fill(p->val.begin(), p->val.end(), 0.0f);
        }
        std::fill(p->grad.begin(), p->grad.end(), 0.0);
        std::fill(p->m.begin(), p->m.end(), 0.0);
        std::fill(p->v.begin(), p->v.end(), 0.0);
    }
}

void Model::zero_grads() {
    for (auto& p : params_) p->zero_grad();
}

Var Model::stem_apply(BuildCtx& ctx, Var x_cat) const {
    Tape& t = ctx.tape;
    Var s0 = stem_.in.apply(ctx, x_cat);
    Var body = stem_.b.apply(ctx, graph::relu(t, stem_.a.apply(ctx, s0)));
    return graph::add(t, s0, body);
}

Var Model::forward_graph(BuildCtx& ctx, const MultiBandRaster& lrmsi, const MultiBandRaster& pan,
                         Tensor* up_out) const {
    Tape& t = ctx.tape;
    if (lrmsi.c != cfg_.bands) throw ValidationError("lrmsi band count != config bands");
    if (pan.c != 1) throw ValidationError("pan must be single band");
    if (pan.h != cfg_.r * lrmsi.h || pan.w != cfg_.r * lrmsi.w)
        throw ValidationError("pan dims must equal r x lrmsi dims");
    if (pan.h % 4 != 0 || pan.w % 4 != 0)
        throw ValidationError("pan dims must be divisible by 4 (two downsampling stages)");

    MultiBandRaster up_raster = bicubic_resample(lrmsi, double(cfg_.r));
    Tensor up_t = raster_to_tensor(up_raster);
    if (up_out) *up_out = up_t;

    Var up = t.leaf(up_t, false);
    Var pan_v = t.leaf(raster_to_tensor(pan), false);

    Var nir;
    if (cfg_.ablation.use_nir_prompt && cfg_.ablation.fdr_mode == FdrMode::fdr &&
        cfg_.ablation.use_amp_branch) {
        nir = graph::slice_c(t, up, nir_band_index(lrmsi), 1);
    }

    // per-stage degradation prompts at matching resolutions
    std::array<Var, 3> xp, ip;
    xp[0] = pan_v;
    ip[0] = nir;
    for (int s = 1; s < 3; ++s) {
        xp[s] = graph::avgpool2(t, xp[s - 1]);
        ip[s] = nir.valid() ? graph::avgpool2(t, ip[s - 1]) : nir;
    }

    auto stage_guard = [&](int s, auto&& fn) -> Var {
        try {
            return fn();
        } catch (const Error& e) {
            throw ValidationError("stage " + std::to_string(s) + ": " + e.what());
        }
    };

    // scale-change projections stay linear; the blocks carry the nonlinearity
    // and every nonlinear path is residual, so no unit can die globally
    Var x = graph::concat_c(t, up, pan_v);
    Var f = stem_apply(ctx, x);
    Var e0 = stage_guard(0, [&] { return stages_[0].se.apply(ctx, stages_[0].fdr.apply(ctx, f, xp[0], ip[0])); });
    Var d1 = down_[0].apply(ctx, graph::avgpool2(t, e0));
    Var e1 = stage_guard(1, [&] { return stages_[1].se.apply(ctx, stages_[1].fdr.apply(ctx, d1, xp[1], ip[1])); });
    Var d2 = down_[1].apply(ctx, graph::avgpool2(t, e1));
    Var bott = stage_guard(2, [&] { return stages_[2].se.apply(ctx, stages_[2].fdr.apply(ctx, d2, xp[2], ip[2])); });

    Var u1 = up_conv_[1].apply(ctx, graph::bilinear_up2(t, bott));
    Var f1 = fuse_[1].apply(ctx, graph::concat_c(t, u1, e1));
    Var u0 = up_conv_[0].apply(ctx, graph::bilinear_up2(t, f1));
    Var f0 = fuse_[0].apply(ctx, graph::concat_c(t, u0, e0));
    Var res = head_.apply(ctx, f0);
    return graph::add(t, up, res);
}

MultiBandRaster Model::infer(const MultiBandRaster& lrmsi, const MultiBandRaster& pan) const {
    Tape tape(false);
    BuildCtx ctx(tape);
    Var out = forward_graph(ctx, lrmsi, pan);
    return tensor_to_raster(tape.val(out), lrmsi.wavelengths_nm, lrmsi.gsd_m / cfg_.r, true);
}

void Model::accumulate_grads(BuildCtx& ctx, double scale) {
    for (auto& [p, var] : ctx.bound) {
        if (!ctx.tape.has_grad(var)) continue;
        const Tensor& g = ctx.tape.grad(var);
        for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += scale * g.v[i];
    }
}

void Model::save_checkpoint(const std::string& dir) const {
    fs::create_directories(dir);
    {
        std::ofstream f(fs::path(dir) / "config.json", std::ios::trunc);
        if (!f) throw IoError("cannot write checkpoint config");
        f << cfg_.to_json_text() << "\n";
    }
    json index;
    index["tensors"] = json::object();
    size_t offset = 0;
    std::ofstream bin(fs::path(dir) / "weights.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw IoError("cannot write weights.bin");
    for (const auto& p : params_) {
        index["tensors"][p->name] = {{"offset", offset},
                                     {"shape", {p->c, p->h, p->w}},
                                     {"dtype", "f32le"}};
        bin.write(reinterpret_cast<const char*>(p->val.data()),
                  std::streamsize(p->val.size() * 4));
        offset += p->val.size() * 4;
    }
    index["total_bytes"] = offset;
    std::ofstream f(fs::path(dir) / "weights.json", std::ios::trunc);
    f << index.dump(2) << "\n";
    if (!f || !bin) throw IoError("short checkpoint write");
}

Model Model::load_checkpoint(const std::string& dir) {
    std::ifstream cf(fs::path(dir) / "config.json");
    if (!cf) throw IoError("missing checkpoint config.json in " + dir);
    std::string text((std::istreambuf_iterator<char>(cf)), std::istreambuf_iterator<char>());
    Model model(NetworkConfig::from_json_text(text));

    std::ifstream jf(fs::path(dir) / "weights.json");
    if (!jf) throw IoError("missing weights.json in " + dir);
    json index;
    jf >> index;
    std::ifstream bin(fs::path(dir) / "weights.bin", std::ios::binary);
    if (!bin) throw IoError("missing weights.bin in " + dir);
    std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    const json& tensors = index.at("tensors");
    size_t seen = 0;
    for (auto& p : model.params_) {
        if (!tensors.contains(p->name))
            throw ValidationError("checkpoint missing tensor: " + p->name);
        const json& e = tensors.at(p->name);
        auto shape = e.at("shape").get<std::vector<int>>();
        if (shape != std::vector<int>{p->c, p->h, p->w})
            throw ValidationError("checkpoint shape mismatch for " + p->name);
        if (e.at("dtype").get<std::string>() != "f32le")
            throw ValidationError("unsupported tensor dtype for " + p->name);
        const size_t offset = e.at("offset").get<size_t>();
        if (offset + p->val.size() * 4 > blob.size())
            throw ValidationError("weights.bin too short for " + p->name);
        std::memcpy(p->val.data(), blob.data() + offset, p->val.size() * 4);
        ++seen;
    }
    if (seen != tensors.size())
        throw ValidationError("checkpoint holds tensors unknown to this config");
    return model;
}

double Model::flops(int pan_h, int pan_w) const {
    double acc = 0.0;
    const int h0 = pan_h, w0 = pan_w;
    const int h1 = h0 / 2, w1 = w0 / 2;
    const int h2 = h0 / 4, w2 = w0 / 4;
    acc += stem_.in.flops(h0, w0) + stem_.a.flops(h0, w0) + stem_.b.flops(h0, w0);
    const int hs[3] = {h0, h1, h2}, ws[3] = {w0, w1, w2};
    for (int s = 0; s < 3; ++s) {
        acc += stages_[s].fdr.flops(hs[s], ws[s]);
        acc += stages_[s].se.flops(hs[s], ws[s]);
    }
    acc += down_[0].flops(h1, w1) + down_[1].flops(h2, w2);
    acc += up_conv_[1].flops(h1, w1) + fuse_[1].flops(h1, w1);
    acc += up_conv_[0].flops(h0, w0) + fuse_[0].flops(h0, w0);
    acc += head_.flops(h0, w0);
    return acc;
}

BudgetReport count_params_flops(const NetworkConfig& cfg) {
    Model model(cfg);
    BudgetReport rep;
    rep.params = model.param_count();
    rep.flops = model.flops(128, 128);
    return rep;
}

}  // namespace pantcr
