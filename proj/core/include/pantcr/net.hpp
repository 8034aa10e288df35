#pragma once

#include <array>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "pantcr/graph.hpp"
#include "pantcr/raster.hpp"

namespace pantcr {

enum class SeMode { swt, channel_attention, off };
enum class FdrMode { fdr, spatial_attention, off };
enum class IfcMode { ifc, channel_attention, off };
enum class BranchTopology { parallel, series };

struct AblationFlags {
    bool use_dam = true;
    bool use_pan_prompt = true;
    bool use_nir_prompt = true;
    bool use_highpass = true;
    bool use_phase_branch = true;
    bool use_amp_branch = true;
    bool use_mafg = true;
    BranchTopology topology = BranchTopology::parallel;
    SeMode se_mode = SeMode::swt;
    FdrMode fdr_mode = FdrMode::fdr;
    IfcMode ifc_mode = IfcMode::ifc;
};

struct NetworkConfig {
    std::array<int, 3> stage_widths{16, 24, 48};
    int dam_depth = 3;
    int pool_radius = 3;
    int se_heads = 2;
    int r = 4;
    int bands = 4;
    AblationFlags ablation;

    int base_width() const { return stage_widths[0]; }
    void validate() const;

    std::string to_json_text() const;
    static NetworkConfig from_json_text(const std::string& text);
};

// Canonical ablation row slugs ("full", "wo-ifc", "parallel-to-series", ...).
std::vector<std::string> ablation_rows();
std::string normalize_row_name(const std::string& raw);
NetworkConfig ablation_row_config(const NetworkConfig& base, const std::string& row);

struct ParamTensor {
    std::string name;
    int c = 0, h = 0, w = 0;
    std::vector<float> val;
    std::vector<double> grad;
    std::vector<double> m, v;  // Adam moments
    bool zero_init = false;
    double init_std = 0.0;
    double scalar_default = 0.0;
    bool is_scalar = false;

    size_t count() const { return val.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

// Binds parameters into one tape as leaves and pulls their grads back out.
struct BuildCtx {
    graph::Tape& tape;
    std::vector<std::pair<ParamTensor*, graph::Var>> bound;
    std::unordered_map<const ParamTensor*, int> index;

    explicit BuildCtx(graph::Tape& t) : tape(t) {}
    graph::Var leaf(ParamTensor* p);
};

struct Conv {
    ParamTensor* w = nullptr;
    ParamTensor* b = nullptr;
    int cin = 0, cout = 0, k = 0;
    bool present() const { return w != nullptr; }
    graph::Var apply(BuildCtx& ctx, graph::Var x) const;
    double flops(int h, int wd) const { return double(h) * wd * k * k * cin * cout; }
};

struct Linear {
    ParamTensor* w = nullptr;
    ParamTensor* b = nullptr;
    int cin = 0, cout = 0;
    bool present() const { return w != nullptr; }
    graph::Var apply(BuildCtx& ctx, graph::Var x) const;
    double flops() const { return double(cin) * cout; }
};

struct ScalarParam {
    ParamTensor* s = nullptr;
    bool present() const { return s != nullptr; }
};

struct Dam {
    bool fused_only = false;  // "w/o Deg. Aware": single 1x1 projection
    std::vector<Conv> convs;
    Conv fuse;
    graph::Var apply(BuildCtx& ctx, graph::Var in2c) const;
    double flops(int h, int w) const;
};

struct Mafg {
    Conv compress;
    Linear l1, l2;
    graph::Var gate(BuildCtx& ctx, graph::Var in2c) const;
    double flops(int h, int w) const;
};

struct Ifc {
    IfcMode mode = IfcMode::ifc;
    Linear p1, p2, a1, a2;
    ScalarParam scale;
    std::pair<graph::Var, graph::Var> apply(BuildCtx& ctx, graph::Var ph, graph::Var ah) const;
    double flops() const;
};

struct Highpass {
    ScalarParam scale, bias;
    int pool_radius = 3;
    graph::Var apply(BuildCtx& ctx, graph::Var x) const;
};

struct Fdr {
    AblationFlags flags;
    int width = 0;
    Highpass hp;
    Conv lift_p, lift_a;
    Dam dam_p, dam_a;
    Mafg mafg;
    Ifc ifc;
    Conv out_conv;
    // spatial-attention replacement
    Conv sa_e1, sa_e2, sa_e3, sa_e4, sa_gate, sa_out;

    graph::Var phase_branch(BuildCtx& ctx, graph::Var p_f, graph::Var pan_prompt) const;
    graph::Var amp_branch(BuildCtx& ctx, graph::Var a_f, graph::Var nir_prompt) const;
    graph::Var apply(BuildCtx& ctx, graph::Var f, graph::Var pan_prompt,
                     graph::Var nir_prompt) const;
    double flops(int h, int w) const;
};

struct Se {
    SeMode mode = SeMode::swt;
    int width = 0, dk = 0, heads = 1;
    Conv q, k, v, o, f1, f2;
    Linear ca1, ca2;
    graph::Var apply(BuildCtx& ctx, graph::Var f) const;
    double flops(int h, int w) const;
};

struct Stage {
    Fdr fdr;
    Se se;
    int width = 0;
};

struct BudgetReport {
    size_t params = 0;
    double flops = 0.0;  // multiply-accumulates for a (bands, 128r/ r...) canonical input
};

class Model {
public:
    explicit Model(NetworkConfig cfg);

    const NetworkConfig& config() const { return cfg_; }
    const std::vector<std::unique_ptr<ParamTensor>>& params() const { return params_; }
    ParamTensor* param(const std::string& name);
    size_t param_count() const;

    // Deterministic per-tensor-name init. randomize_residual gives the
    // normally-zero layers random values (gradient verification).
    void init_weights(uint64_t seed, bool randomize_residual = false);
    void zero_grads();

    // blocks (public so the verification harness can drive them standalone)
    Stage& stage(int i) { return stages_[i]; }
    graph::Var stem_apply(BuildCtx& ctx, graph::Var x_cat) const;
    graph::Var forward_graph(BuildCtx& ctx, const MultiBandRaster& lrmsi,
                             const MultiBandRaster& pan, Tensor* up_out = nullptr) const;

    // Inference: clipped [0,1] raster, weights immutable.
    MultiBandRaster infer(const MultiBandRaster& lrmsi, const MultiBandRaster& pan) const;
    MultiBandRaster infer(const SamplePair& s) const { return infer(s.cloudy_lrmsi, s.cloudy_pan); }

    void accumulate_grads(BuildCtx& ctx, double scale);

    void save_checkpoint(const std::string& dir) const;
    static Model load_checkpoint(const std::string& dir);

    double flops(int pan_h, int pan_w) const;

private:
    friend struct ModelBuilder;
    NetworkConfig cfg_;
    std::vector<std::unique_ptr<ParamTensor>> params_;
    std::unordered_map<std::string, ParamTensor*> by_name_;

    struct StemBlock {
        Conv in, a, b;
    } stem_;
    std::array<Stage, 3> stages_;
    std::array<Conv, 2> down_;
    std::array<Conv, 2> up_conv_;   // [1]: W2->W1, [0]: W1->W0
    std::array<Conv, 2> fuse_;
    Conv head_;

    ParamTensor* add_param(const std::string& name, int c, int h, int w, double init_std,
                           bool zero_init, bool is_scalar = false, double scalar_default = 0.0);
    Conv make_conv(const std::string& name, int cin, int cout, int k, bool zero);
    Linear make_linear(const std::string& name, int cin, int cout, bool zero);
    ScalarParam make_scalar(const std::string& name, double def);
    void build();
};

// Parameter count plus analytic MAC count on the canonical 128x128 input.
BudgetReport count_params_flops(const NetworkConfig& cfg);

}  // namespace pantcr
