#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "pantcr/tensor.hpp"

namespace pantcr::graph {

struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
};

// Reverse-mode tape. Nodes are created in forward order; backward() walks the
// tape in reverse. With record=false ops skip backward closures (inference).
class Tape {
public:
    using BackFn = std::function<void(Tape&, Var self)>;

    explicit Tape(bool record = true) : record_(record) {}

    Var leaf(Tensor t, bool needs_grad);
    const Tensor& val(Var v) const { return nodes_[v.i].val; }
    Tensor& grad(Var v);
    bool has_grad(Var v) const { return nodes_[v.i].grad_live; }
    bool needs_grad(Var v) const { return nodes_[v.i].needs_grad; }
    bool recording() const { return record_; }

    Var make(Tensor value, bool needs_grad, BackFn back);
    void backward(Var loss);
    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool needs_grad = false;
        bool grad_live = false;
        BackFn back;
    };
    std::vector<Node> nodes_;
    bool record_;
};

// elementwise
Var add(Tape&, Var a, Var b);
Var sub(Tape&, Var a, Var b);
Var mul(Tape&, Var a, Var b);
Var scale(Tape&, Var a, double k);
Var relu(Tape&, Var x);
Var sigmoid(Tape&, Var x);
Var absval(Tape&, Var x);

// structure
Var concat_c(Tape&, Var a, Var b);
Var slice_c(Tape&, Var x, int from, int count);
Var reshape(Tape&, Var x, int c, int h, int w);
Var transpose_mat(Tape&, Var m);  // {1,h,w} -> {1,w,h}

// broadcasting
Var mul_cvec(Tape&, Var x, Var g);   // x{c,h,w} * g{c,1,1}
Var mul_map(Tape&, Var x, Var m);    // x{c,h,w} * m{1,h,w}
Var mul_scalar_param(Tape&, Var x, Var s);      // s{1,1,1}
Var affine_scalar(Tape&, Var x, Var s, Var b);  // s*x + b

// conv / linear
Var conv2d(Tape&, Var x, Var w, Var b, int ksize);  // zero pad (k-1)/2, stride 1
Var linear(Tape&, Var x, Var w, Var b);             // x{cin,1,1} -> {cout,1,1}

// pooling / resampling
Var avgpool_win(Tape&, Var x, int radius);  // stride-1, reflect padding
Var avgpool2(Tape&, Var x);                 // 2x2 stride 2
Var bilinear_up2(Tape&, Var x);

// reductions / projections
Var gap(Tape&, Var x);                      // {c,h,w} -> {c,1,1}
Var channel_mean(Tape&, Var x);             // -> {1,h,w}
Var channel_max(Tape&, Var x);              // -> {1,h,w}
Var mean_all(Tape&, Var x);                 // -> {1,1,1}
Var dot_const(Tape&, Var x, Tensor r);      // <x, r>, scalar
Var l1_to(Tape&, Var pred, Tensor target);  // mean |pred - target|, scalar

// matrices (shape {1,m,n})
Var matmul(Tape&, Var a, Var b);
Var softmax_rows(Tape&, Var m);

// frequency domain (per channel, orthonormal)
std::pair<Var, Var> fft_ap(Tape&, Var x);   // -> (amplitude, phase)
Var ifft_ap(Tape&, Var a, Var p);           // real part of inverse transform

}  // namespace pantcr::graph
