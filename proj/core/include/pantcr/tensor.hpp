#pragma once

#include <cstddef>
#include <vector>

#include "pantcr/common.hpp"

namespace pantcr {

// Dense double grid, channel-major (plane c is contiguous h*w).
// Vectors use {c,1,1}; matrices use {1,rows,cols}; scalars {1,1,1}.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, 0.0) {}

    static Tensor zeros(int c, int h, int w) { return Tensor(c, h, w); }
    static Tensor scalar(double x) {
        Tensor t(1, 1, 1);
        t.v[0] = x;
        return t;
    }

    size_t size() const { return v.size(); }
    int plane() const { return h * w; }

    double& at(int ci, int y, int x) { return v[(size_t(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const { return v[(size_t(ci) * h + y) * w + x]; }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

}  // namespace pantcr
