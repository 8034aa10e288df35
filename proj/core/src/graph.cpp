#include "pantcr/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>

#include "pantcr/fft.hpp"

namespace pantcr::graph {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatrixRM>;
using MapCM = Eigen::Map<const MatrixRM>;

Var Tape::leaf(Tensor t, bool needs_grad) {
    nodes_.push_back(Node{std::move(t), {}, needs_grad && record_, false, nullptr});
    return Var{int(nodes_.size()) - 1};
}

Tensor& Tape::grad(Var v) {
    Node& n = nodes_[v.i];
    if (!n.grad_live) {
        n.grad = Tensor(n.val.c, n.val.h, n.val.w);
        n.grad_live = true;
    }
    return n.grad;
}

Var Tape::make(Tensor value, bool needs_grad, BackFn back) {
    if (!record_) needs_grad = false;
    nodes_.push_back(
        Node{std::move(value), {}, needs_grad, false, needs_grad ? std::move(back) : nullptr});
    return Var{int(nodes_.size()) - 1};
}

void Tape::backward(Var loss) {
    if (!record_) throw Error("backward on a non-recording tape");
    Tensor& g = grad(loss);
    std::fill(g.v.begin(), g.v.end(), 1.0);
    for (int i = loss.i; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.grad_live && n.back) n.back(*this, Var{i});
    }
}

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) throw ValidationError(std::string(op) + ": shape mismatch");
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
    const Tensor &xa = t.val(a), &xb = t.val(b);
    check_same(xa, xb, "add");
    Tensor out = xa;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += xb.v[i];
    return t.make(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tp, Var self) {
        const Tensor& gy = tp.grad(self);
        if (tp.needs_grad(a)) {
            Tensor& ga = tp.grad(a);
            for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += gy.v[i];
        }
        if (tp.needs_grad(b)) {
            Tensor& gb = tp.grad(b);
            for (size_t i = 0; i < gy.v.size(); ++i) gb.v[i] += gy.v[i];
        }
    });
}

Var sub(Tape& t, Var a, Var b) {
    const Tensor &xa = t.val(a), &xb = t.val(b);
    check_same(xa, xb, "sub");
    Tensor out = xa;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= xb.v[i];
    return t.make(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tp, Var self) {
        const Tensor& gy = tp.grad(self);
        if (tp.needs_grad(a)) {
            Tensor& ga = tp.grad(a);
            for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += gy.v[i];
        }
        if (tp.needs_grad(b)) {
            Tensor& gb = tp.grad(b);
            for (size_t i = 0; i < gy.v.size(); ++i) gb.v[i] -= gy.v[i];
        }
    });
}

Var mul(Tape& t, Var a, Var b) {
    const Tensor &xa = t.val(a), &xb = t.val(b);
    check_same(xa, xb, "mul");
    Tensor out = xa;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= xb.v[i];
    return t.make(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tp, Var self) {
        const Tensor& gy = tp.grad(self);
        const Tensor &xa2 = tp.val(a), &xb2 = tp.val(b);
        if (tp.needs_grad(a)) {
            Tensor& ga = tp.grad(a);
            for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += gy.v[i] * xb2.v[i];
        }
        if (tp.needs_grad(b)) {
            Tensor& gb = tp.grad(b);
            for (size_t i = 0; i < gy.v.size(); ++i) gb.v[i] += gy.v[i] * xa2.v[i];
        }
    });
}

Var scale(Tape& t, Var a, double k) {
    Tensor out = t.val(a);
    for (auto& v : out.v) v *= k;
    return t.make(std::move(out), t.needs_grad(a), [a, k](Tape& tp, Var self) {
        if (!tp.needs_grad(a)) return;
        const Tensor& gy = tp.grad(self);
        Tensor& ga = tp.grad(a);
        for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += k * gy.v[i];
    });
}

Var relu(Tape& t, Var x) {
    Tensor out = t.val(x);
    for (auto& v : out.v) v = v > 0.0 ? v : 0.0;
    return t.make(std::move(out), t.needs_grad(x), [x](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        const Tensor& xv = tp.val(x);
        Tensor& gx = tp.grad(x);
        for (size_t i = 0; i < gy.v.size(); ++i)
            if (xv.v[i] > 0.0) gx.v[i] += gy.v[i];
    });
}

Var sigmoid(Tape& t, Var x) {
    Tensor out = t.val(x);
    for (auto& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    return t.make(std::move(out), t.needs_grad(x), [x](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        const Tensor& yv = tp.val(self);
        Tensor& gx = tp.grad(x);
        for (size_t i = 0; i < gy.v.size(); ++i)
            gx.v[i] += gy.v[i] * yv.v[i] * (1.0 - yv.v[i]);
    });
}

Var absval(Tape& t, Var x) {
    Tensor out = t.val(x);
    for (auto& v : out.v) v = std::fabs(v);
    return t.make(std::move(out), t.needs_grad(x), [x](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        const Tensor& xv = tp.val(x);
        Tensor& gx = tp.grad(x);
        for (size_t i = 0; i < gy.v.size(); ++i) {
            if (xv.v[i] > 0.0)
                gx.v[i] += gy.v[i];
            else if (xv.v[i] < 0.0)
                gx.v[i] -= gy.v[i];
        }
    });
}

Var concat_c(Tape& t, Var a, Var b) {
    const Tensor &xa = t.val(a), &xb = t.val(b);
    if (xa.h != xb.h || xa.w != xb.w) throw ValidationError("concat_c: spatial dims differ");
    Tensor out(xa.c + xb.c, xa.h, xa.w);
    std::copy(xa.v.begin(), xa.v.end(), out.v.begin());
    std::copy(xb.v.begin(), xb.v.end(), out.v.begin() + xa.v.size());
    const size_t na = xa.v.size();
    return t.make(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                  [a, b, na](Tape& tp, Var self) {
                      const Tensor& gy = tp.grad(self);
                      if (tp.needs_grad(a)) {
                          Tensor& ga = tp.grad(a);
                          for (size_t i = 0; i < na; ++i) ga.v[i] += gy.v[i];
                      }
                      if (tp.needs_grad(b)) {
                          Tensor& gb = tp.grad(b);
                          for (size_t i = na; i < gy.v.size(); ++i) gb.v[i - na] += gy.v[i];
                      }
                  });
}

Var slice_c(Tape& t, Var x, int from, int count) {
    const Tensor& xv = t.val(x);
    if (from < 0 || count < 1 || from + count > xv.c)
        throw ArgumentError("slice_c: channel range out of bounds");
    Tensor out(count, xv.h, xv.w);
    const size_t plane = size_t(xv.h) * xv.w;
    std::copy(xv.v.begin() + from * plane, xv.v.begin() + (from + count) * plane, out.v.begin());
    return t.make(std::move(out), t.needs_grad(x), [x, from, plane](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (size_t i = 0; i < gy.v.size(); ++i) gx.v[from * plane + i] += gy.v[i];
    });
}

Var reshape(Tape& t, Var x, int c, int h, int w) {
    const Tensor& xv = t.val(x);
    if (size_t(c) * h * w != xv.v.size()) throw ArgumentError("reshape: element count mismatch");
    Tensor out(c, h, w);
    out.v = xv.v;
    return t.make(std::move(out), t.needs_grad(x), [x](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (size_t i = 0; i < gy.v.size(); ++i) gx.v[i] += gy.v[i];
    });
}

Var transpose_mat(Tape& t, Var m) {
    const Tensor& xv = t.val(m);
    if (xv.c != 1) throw ArgumentError("transpose_mat: expected {1,h,w}");
    Tensor out(1, xv.w, xv.h);
    for (int y = 0; y < xv.h; ++y)
        for (int x = 0; x < xv.w; ++x) out.at(0, x, y) = xv.at(0, y, x);
    return t.make(std::move(out), t.needs_grad(m), [m](Tape& tp, Var self) {
        if (!tp.needs_grad(m)) return;
        const Tensor& gy = tp.grad(self);
        Tensor& gm = tp.grad(m);
        for (int y = 0; y < gy.h; ++y)
            for (int x = 0; x < gy.w; ++x) gm.at(0, x, y) += gy.at(0, y, x);
    });
}

Var mul_cvec(Tape& t, Var x, Var g) {
    const Tensor &xv = t.val(x), &gv = t.val(g);
    if (gv.c != xv.c || gv.h != 1 || gv.w != 1) throw ValidationError("mul_cvec: gate must be {c,1,1}");
    Tensor out = xv;
    const size_t plane = size_t(xv.h) * xv.w;
    for (int c = 0; c < xv.c; ++c)
        for (size_t i = 0; i < plane; ++i) out.v[c * plane + i] *= gv.v[c];
    return t.make(std::move(out), t.needs_grad(x) || t.needs_grad(g),
                  [x, g, plane](Tape& tp, Var self) {
                      const Tensor& gy = tp.grad(self);
                      const Tensor &xv2 = tp.val(x), &gv2 = tp.val(g);
                      if (tp.needs_grad(x)) {
                          Tensor& gx = tp.grad(x);
                          for (int c = 0; c < xv2.c; ++c)
                              for (size_t i = 0; i < plane; ++i)
                                  gx.v[c * plane + i] += gy.v[c * plane + i] * gv2.v[c];
                      }
                      if (tp.needs_grad(g)) {
                          Tensor& gg = tp.grad(g);
                          for (int c = 0; c < xv2.c; ++c) {
                              double acc = 0.0;
                              for (size_t i = 0; i < plane; ++i)
                                  acc += gy.v[c * plane + i] * xv2.v[c * plane + i];
                              gg.v[c] += acc;
                          }
                      }
                  });
}

Var mul_map(Tape& t, Var x, Var m) {
    const Tensor &xv = t.val(x), &mv = t.val(m);
    if (mv.c != 1 || mv.h != xv.h || mv.w != xv.w)
        throw ValidationError("mul_map: map must be {1,h,w}");
    Tensor out = xv;
    const size_t plane = size_t(xv.h) * xv.w;
    for (int c = 0; c < xv.c; ++c)
        for (size_t i = 0; i < plane; ++i) out.v[c * plane + i] *= mv.v[i];
    return t.make(std::move(out), t.needs_grad(x) || t.needs_grad(m),
                  [x, m, plane](Tape& tp, Var self) {
                      const Tensor& gy = tp.grad(self);
                      const Tensor &xv2 = tp.val(x), &mv2 = tp.val(m);
                      if (tp.needs_grad(x)) {
                          Tensor& gx = tp.grad(x);
                          for (int c = 0; c < xv2.c; ++c)
                              for (size_t i = 0; i < plane; ++i)
                                  gx.v[c * plane + i] += gy.v[c * plane + i] * mv2.v[i];
                      }
                      if (tp.needs_grad(m)) {
                          Tensor& gm = tp.grad(m);
                          for (int c = 0; c < xv2.c; ++c)
                              for (size_t i = 0; i < plane; ++i)
                                  gm.v[i] += gy.v[c * plane + i] * xv2.v[c * plane + i];
                      }
                  });
}

Var mul_scalar_param(Tape& t, Var x, Var s) {
    const Tensor &xv = t.val(x), &sv = t.val(s);
    if (sv.v.size() != 1) throw ValidationError("mul_scalar_param: scalar expected");
    Tensor out = xv;
    for (auto& v : out.v) v *= sv.v[0];
    return t.make(std::move(out), t.needs_grad(x) || t.needs_grad(s), [x, s](Tape& tp, Var self) {
        const Tensor& gy = tp.grad(self);
        const Tensor &xv2 = tp.val(x), &sv2 = tp.val(s);
        if (tp.needs_grad(x)) {
            Tensor& gx = tp.grad(x);
            for (size_t i = 0; i < gy.v.size(); ++i) gx.v[i] += gy.v[i] * sv2.v[0];
        }
        if (tp.needs_grad(s)) {
            double acc = 0.0;
            for (size_t i = 0; i < gy.v.size(); ++i) acc += gy.v[i] * xv2.v[i];
            tp.grad(s).v[0] += acc;
        }
    });
}

Var affine_scalar(Tape& t, Var x, Var s, Var b) {
    const Tensor &xv = t.val(x), &sv = t.val(s), &bv = t.val(b);
    if (sv.v.size() != 1 || bv.v.size() != 1) throw ValidationError("affine_scalar: scalars expected");
    Tensor out = xv;
    for (auto& v : out.v) v = sv.v[0] * v + bv.v[0];
    return t.make(std::move(out), t.needs_grad(x) || t.needs_grad(s) || t.needs_grad(b),
                  [x, s, b](Tape& tp, Var self) {
                      const Tensor& gy = tp.grad(self);
                      const Tensor &xv2 = tp.val(x), &sv2 = tp.val(s);
                      if (tp.needs_grad(x)) {
                          Tensor& gx = tp.grad(x);
                          for (size_t i = 0; i < gy.v.size(); ++i) gx.v[i] += gy.v[i] * sv2.v[0];
                      }
                      if (tp.needs_grad(s)) {
                          double acc = 0.0;
                          for (size_t i = 0; i < gy.v.size(); ++i) acc += gy.v[i] * xv2.v[i];
                          tp.grad(s).v[0] += acc;
                      }
                      if (tp.needs_grad(b)) {
                          double acc = 0.0;
                          for (double gv : gy.v) acc += gv;
                          tp.grad(b).v[0] += acc;
                      }
                  });
}

namespace {

// im2col with zero padding, stride 1
std::shared_ptr<std::vector<double>> build_cols(const Tensor& x, int k, int pad) {
    const int hw = x.h * x.w;
    const int rows = x.c * k * k;
    auto cols = std::make_shared<std::vector<double>>(size_t(rows) * hw, 0.0);
    for (int ci = 0; ci < x.c; ++ci)
        for (int u = 0; u < k; ++u)
            for (int v = 0; v < k; ++v) {
                const int row = (ci * k + u) * k + v;
                double* dst = cols->data() + size_t(row) * hw;
                for (int y = 0; y < x.h; ++y) {
                    const int sy = y + u - pad;
                    if (sy < 0 || sy >= x.h) continue;
                    for (int xx = 0; xx < x.w; ++xx) {
                        const int sx = xx + v - pad;
                        if (sx < 0 || sx >= x.w) continue;
                        dst[y * x.w + xx] = x.at(ci, sy, sx);
                    }
                }
            }
    return cols;
}

}  // namespace

Var conv2d(Tape& t, Var x, Var w, Var b, int ksize) {
    const Tensor &xv = t.val(x), &wv = t.val(w), &bv = t.val(b);
    if (ksize % 2 != 1) throw ArgumentError("conv2d: kernel must be odd");
    const int pad = (ksize - 1) / 2;
    const int cin = xv.c, cout = wv.h;
    if (wv.c != 1 || wv.w != cin * ksize * ksize)
        throw ValidationError("conv2d: weight shape mismatch");
    if (bv.c != cout || bv.h != 1 || bv.w != 1) throw ValidationError("conv2d: bias shape mismatch");

    const int hw = xv.h * xv.w;
    auto cols = build_cols(xv, ksize, pad);
    Tensor out(cout, xv.h, xv.w);
    {
        MapCM Wm(wv.v.data(), cout, cin * ksize * ksize);
        MapCM Cm(cols->data(), cin * ksize * ksize, hw);
        MapM Om(out.v.data(), cout, hw);
        Om.noalias() = Wm * Cm;
    }
    for (int o = 0; o < cout; ++o) {
        double* dst = out.v.data() + size_t(o) * hw;
        for (int i = 0; i < hw; ++i) dst[i] += bv.v[o];
    }

    const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
    if (!ng || !t.recording()) return t.make(std::move(out), false, nullptr);

    const int h = xv.h, wd = xv.w;
    return t.make(std::move(out), true, [x, w, b, ksize, pad, cin, cout, h, wd,
                                         cols](Tape& tp, Var self) {
        const Tensor& gy = tp.grad(self);
        const int hw2 = h * wd;
        const int krows = cin * ksize * ksize;
        MapCM Gy(gy.v.data(), cout, hw2);
        if (tp.needs_grad(w)) {
            MapCM Cm(cols->data(), krows, hw2);
            MapM Gw(tp.grad(w).v.data(), cout, krows);
            Gw.noalias() += Gy * Cm.transpose();
        }
        if (tp.needs_grad(b)) {
            Tensor& gb = tp.grad(b);
            for (int o = 0; o < cout; ++o) {
                double acc = 0.0;
                const double* src = gy.v.data() + size_t(o) * hw2;
                for (int i = 0; i < hw2; ++i) acc += src[i];
                gb.v[o] += acc;
            }
        }
        if (tp.needs_grad(x)) {
            const Tensor& wv2 = tp.val(w);
            MapCM Wm(wv2.v.data(), cout, krows);
            MatrixRM Gc = Wm.transpose() * Gy;  // krows x hw
            Tensor& gx = tp.grad(x);
            for (int ci = 0; ci < cin; ++ci)
                for (int u = 0; u < ksize; ++u)
                    for (int v = 0; v < ksize; ++v) {
                        const int row = (ci * ksize + u) * ksize + v;
                        const double* src = Gc.data() + size_t(row) * hw2;
                        for (int y = 0; y < h; ++y) {
                            const int sy = y + u - pad;
                            if (sy < 0 || sy >= h) continue;
                            for (int xx = 0; xx < wd; ++xx) {
                                const int sx = xx + v - pad;
                                if (sx < 0 || sx >= wd) continue;
                                gx.at(ci, sy, sx) += src[y * wd + xx];
                            }
                        }
                    }
        }
    });
}

Var linear(Tape& t, Var x, Var w, Var b) {
    const Tensor &xv = t.val(x), &wv = t.val(w), &bv = t.val(b);
    const int cin = xv.c, cout = wv.h;
    if (xv.h != 1 || xv.w != 1) throw ValidationError("linear: input must be {c,1,1}");
    if (wv.c != 1 || wv.w != cin) throw ValidationError("linear: weight shape mismatch");
    if (bv.c != cout) throw ValidationError("linear: bias shape mismatch");
    Tensor out(cout, 1, 1);
    for (int o = 0; o < cout; ++o) {
        double acc = bv.v[o];
        for (int i = 0; i < cin; ++i) acc += wv.at(0, o, i) * xv.v[i];
        out.v[o] = acc;
    }
    return t.make(std::move(out), t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b),
                  [x, w, b, cin, cout](Tape& tp, Var self) {
                      const Tensor& gy = tp.grad(self);
                      const Tensor &xv2 = tp.val(x), &wv2 = tp.val(w);
                      if (tp.needs_grad(w)) {
                          Tensor& gw = tp.grad(w);
                          for (int o = 0; o < cout; ++o)
                              for (int i = 0; i < cin; ++i)
                                  gw.at(0, o, i) += gy.v[o] * xv2.v[i];
                      }
                      if (tp.needs_grad(b)) {
                          Tensor& gb = tp.grad(b);
                          for (int o = 0; o < cout; ++o) gb.v[o] += gy.v[o];
                      }
                      if (tp.needs_grad(x)) {
                          Tensor& gx = tp.grad(x);
                          for (int i = 0; i < cin; ++i) {
                              double acc = 0.0;
                              for (int o = 0; o < cout; ++o) acc += wv2.at(0, o, i) * gy.v[o];
                              gx.v[i] += acc;
                          }
                      }
                  });
}

namespace {

int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

}  // namespace

Var avgpool_win(Tape& t, Var x, int radius) {
    if (radius < 1) throw ArgumentError("avgpool_win: radius must be >= 1");
    const Tensor& xv = t.val(x);
    const int side = 2 * radius + 1;
    const double inv = 1.0 / (double(side) * side);
    Tensor out(xv.c, xv.h, xv.w);
    for (int c = 0; c < xv.c; ++c)
        for (int y = 0; y < xv.h; ++y)
            for (int xx = 0; xx < xv.w; ++xx) {
                double acc = 0.0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx)
                        acc += xv.at(c, reflect101(y + dy, xv.h), reflect101(xx + dx, xv.w));
                out.at(c, y, xx) = acc * inv;
            }
    return t.make(std::move(out), t.needs_grad(x), [x, radius, inv](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (int c = 0; c < gy.c; ++c)
            for (int y = 0; y < gy.h; ++y)
                for (int xx = 0; xx < gy.w; ++xx) {
                    const double g = gy.at(c, y, xx) * inv;
                    for (int dy = -radius; dy <= radius; ++dy)
                        for (int dx = -radius; dx <= radius; ++dx)
                            gx.at(c, reflect101(y + dy, gy.h), reflect101(xx + dx, gy.w)) += g;
                }
    });
}

Var avgpool2(Tape& t, Var x) {
    const Tensor& xv = t.val(x);
    if (xv.h % 2 != 0 || xv.w % 2 != 0) throw ValidationError("avgpool2: dims must be even");
    Tensor out(xv.c, xv.h / 2, xv.w / 2);
    for (int c = 0; c < xv.c; ++c)
        for (int y = 0; y < out.h; ++y)
            for (int xx = 0; xx < out.w; ++xx)
                out.at(c, y, xx) = 0.25 * (xv.at(c, 2 * y, 2 * xx) + xv.at(c, 2 * y, 2 * xx + 1) +
                                           xv.at(c, 2 * y + 1, 2 * xx) +
                                           xv.at(c, 2 * y + 1, 2 * xx + 1));
    return t.make(std::move(out), t.needs_grad(x), [x](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (int c = 0; c < gy.c; ++c)
            for (int y = 0; y < gy.h; ++y)
                for (int xx = 0; xx < gy.w; ++xx) {
                    const double g = 0.25 * gy.at(c, y, xx);
                    gx.at(c, 2 * y, 2 * xx) += g;
                    gx.at(c, 2 * y, 2 * xx + 1) += g;
                    gx.at(c, 2 * y + 1, 2 * xx) += g;
                    gx.at(c, 2 * y + 1, 2 * xx + 1) += g;
                }
    });
}

Var bilinear_up2(Tape& t, Var x) {
    const Tensor& xv = t.val(x);
    const int oh = xv.h * 2, ow = xv.w * 2;
    Tensor out(xv.c, oh, ow);
    // precompute 1-D taps (half-pixel centers, clamped borders)
    std::vector<int> y0(oh), y1(oh);
    std::vector<double> fy(oh);
    for (int y = 0; y < oh; ++y) {
        const double sy = (y + 0.5) * 0.5 - 0.5;
        const double fl = std::floor(sy);
        int a = int(fl), b = a + 1;
        fy[y] = sy - fl;
        y0[y] = std::clamp(a, 0, xv.h - 1);
        y1[y] = std::clamp(b, 0, xv.h - 1);
    }
    std::vector<int> x0(ow), x1(ow);
    std::vector<double> fx(ow);
    for (int xx = 0; xx < ow; ++xx) {
        const double sx = (xx + 0.5) * 0.5 - 0.5;
        const double fl = std::floor(sx);
        int a = int(fl), b = a + 1;
        fx[xx] = sx - fl;
        x0[xx] = std::clamp(a, 0, xv.w - 1);
        x1[xx] = std::clamp(b, 0, xv.w - 1);
    }
    for (int c = 0; c < xv.c; ++c)
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx) {
                const double a = xv.at(c, y0[y], x0[xx]) * (1 - fx[xx]) +
                                 xv.at(c, y0[y], x1[xx]) * fx[xx];
                const double b = xv.at(c, y1[y], x0[xx]) * (1 - fx[xx]) +
                                 xv.at(c, y1[y], x1[xx]) * fx[xx];
                out.at(c, y, xx) = a * (1 - fy[y]) + b * fy[y];
            }
    return t.make(std::move(out), t.needs_grad(x),
                  [x, y0, y1, fy, x0, x1, fx](Tape& tp, Var self) {
                      if (!tp.needs_grad(x)) return;
                      const Tensor& gy = tp.grad(self);
                      Tensor& gx = tp.grad(x);
                      for (int c = 0; c < gy.c; ++c)
                          for (int y = 0; y < gy.h; ++y)
                              for (int xx = 0; xx < gy.w; ++xx) {
                                  const double g = gy.at(c, y, xx);
                                  gx.at(c, y0[y], x0[xx]) += g * (1 - fy[y]) * (1 - fx[xx]);
                                  gx.at(c, y0[y], x1[xx]) += g * (1 - fy[y]) * fx[xx];
                                  gx.at(c, y1[y], x0[xx]) += g * fy[y] * (1 - fx[xx]);
                                  gx.at(c, y1[y], x1[xx]) += g * fy[y] * fx[xx];
                              }
                  });
}

Var gap(Tape& t, Var x) {
    const Tensor& xv = t.val(x);
    const double inv = 1.0 / double(xv.h * xv.w);
    Tensor out(xv.c, 1, 1);
    const size_t plane = size_t(xv.h) * xv.w;
    for (int c = 0; c < xv.c; ++c) {
        double acc = 0.0;
        for (size_t i = 0; i < plane; ++i) acc += xv.v[c * plane + i];
        out.v[c] = acc * inv;
    }
    return t.make(std::move(out), t.needs_grad(x), [x, inv, plane](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (int c = 0; c < gx.c; ++c) {
            const double g = gy.v[c] * inv;
            for (size_t i = 0; i < plane; ++i) gx.v[c * plane + i] += g;
        }
    });
}

Var channel_mean(Tape& t, Var x) {
    const Tensor& xv = t.val(x);
    const double inv = 1.0 / double(xv.c);
    Tensor out(1, xv.h, xv.w);
    const size_t plane = size_t(xv.h) * xv.w;
    for (int c = 0; c < xv.c; ++c)
        for (size_t i = 0; i < plane; ++i) out.v[i] += xv.v[c * plane + i] * inv;
    return t.make(std::move(out), t.needs_grad(x), [x, inv, plane](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (int c = 0; c < gx.c; ++c)
            for (size_t i = 0; i < plane; ++i) gx.v[c * plane + i] += gy.v[i] * inv;
    });
}

Var channel_max(Tape& t, Var x) {
    const Tensor& xv = t.val(x);
    Tensor out(1, xv.h, xv.w);
    auto argmax = std::make_shared<std::vector<int>>(size_t(xv.h) * xv.w, 0);
    const size_t plane = size_t(xv.h) * xv.w;
    for (size_t i = 0; i < plane; ++i) {
        double best = xv.v[i];
        int bc = 0;
        for (int c = 1; c < xv.c; ++c)
            if (xv.v[c * plane + i] > best) {
                best = xv.v[c * plane + i];
                bc = c;
            }
        out.v[i] = best;
        (*argmax)[i] = bc;
    }
    return t.make(std::move(out), t.needs_grad(x), [x, argmax, plane](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (size_t i = 0; i < plane; ++i) gx.v[size_t((*argmax)[i]) * plane + i] += gy.v[i];
    });
}

Var mean_all(Tape& t, Var x) {
    const Tensor& xv = t.val(x);
    double acc = 0.0;
    for (double v : xv.v) acc += v;
    const double inv = 1.0 / double(xv.v.size());
    return t.make(Tensor::scalar(acc * inv), t.needs_grad(x), [x, inv](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const double g = tp.grad(self).v[0] * inv;
        Tensor& gx = tp.grad(x);
        for (auto& v : gx.v) v += g;
    });
}

Var dot_const(Tape& t, Var x, Tensor r) {
    const Tensor& xv = t.val(x);
    check_same(xv, r, "dot_const");
    double acc = 0.0;
    for (size_t i = 0; i < xv.v.size(); ++i) acc += xv.v[i] * r.v[i];
    auto rp = std::make_shared<Tensor>(std::move(r));
    return t.make(Tensor::scalar(acc), t.needs_grad(x), [x, rp](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const double g = tp.grad(self).v[0];
        Tensor& gx = tp.grad(x);
        for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += g * rp->v[i];
    });
}

Var l1_to(Tape& t, Var pred, Tensor target) {
    const Tensor& pv = t.val(pred);
    check_same(pv, target, "l1_to");
    double acc = 0.0;
    for (size_t i = 0; i < pv.v.size(); ++i) acc += std::fabs(pv.v[i] - target.v[i]);
    const double inv = 1.0 / double(pv.v.size());
    auto tg = std::make_shared<Tensor>(std::move(target));
    return t.make(Tensor::scalar(acc * inv), t.needs_grad(pred),
                  [pred, tg, inv](Tape& tp, Var self) {
                      if (!tp.needs_grad(pred)) return;
                      const double g = tp.grad(self).v[0] * inv;
                      const Tensor& pv2 = tp.val(pred);
                      Tensor& gp = tp.grad(pred);
                      for (size_t i = 0; i < gp.v.size(); ++i) {
                          const double d = pv2.v[i] - tg->v[i];
                          if (d > 0.0)
                              gp.v[i] += g;
                          else if (d < 0.0)
                              gp.v[i] -= g;
                      }
                  });
}

Var matmul(Tape& t, Var a, Var b) {
    const Tensor &av = t.val(a), &bv = t.val(b);
    if (av.c != 1 || bv.c != 1 || av.w != bv.h) throw ValidationError("matmul: shape mismatch");
    Tensor out(1, av.h, bv.w);
    {
        MapCM A(av.v.data(), av.h, av.w);
        MapCM B(bv.v.data(), bv.h, bv.w);
        MapM O(out.v.data(), av.h, bv.w);
        O.noalias() = A * B;
    }
    return t.make(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tp, Var self) {
        const Tensor& gy = tp.grad(self);
        const Tensor &av2 = tp.val(a), &bv2 = tp.val(b);
        MapCM Gy(gy.v.data(), gy.h, gy.w);
        if (tp.needs_grad(a)) {
            MapCM B(bv2.v.data(), bv2.h, bv2.w);
            MapM Ga(tp.grad(a).v.data(), av2.h, av2.w);
            Ga.noalias() += Gy * B.transpose();
        }
        if (tp.needs_grad(b)) {
            MapCM A(av2.v.data(), av2.h, av2.w);
            MapM Gb(tp.grad(b).v.data(), bv2.h, bv2.w);
            Gb.noalias() += A.transpose() * Gy;
        }
    });
}

Var softmax_rows(Tape& t, Var m) {
    const Tensor& mv = t.val(m);
    if (mv.c != 1) throw ArgumentError("softmax_rows: expected {1,h,w}");
    Tensor out = mv;
    for (int y = 0; y < mv.h; ++y) {
        double mx = -1e300;
        for (int x = 0; x < mv.w; ++x) mx = std::max(mx, mv.at(0, y, x));
        double sum = 0.0;
        for (int x = 0; x < mv.w; ++x) {
            const double e = std::exp(mv.at(0, y, x) - mx);
            out.at(0, y, x) = e;
            sum += e;
        }
        for (int x = 0; x < mv.w; ++x) out.at(0, y, x) /= sum;
    }
    return t.make(std::move(out), t.needs_grad(m), [m](Tape& tp, Var self) {
        if (!tp.needs_grad(m)) return;
        const Tensor& gy = tp.grad(self);
        const Tensor& yv = tp.val(self);
        Tensor& gm = tp.grad(m);
        for (int y = 0; y < yv.h; ++y) {
            double dot = 0.0;
            for (int x = 0; x < yv.w; ++x) dot += gy.at(0, y, x) * yv.at(0, y, x);
            for (int x = 0; x < yv.w; ++x)
                gm.at(0, y, x) += yv.at(0, y, x) * (gy.at(0, y, x) - dot);
        }
    });
}

std::pair<Var, Var> fft_ap(Tape& t, Var x) {
    const Tensor& xv = t.val(x);
    const int c = xv.c, h = xv.h, w = xv.w;
    const size_t plane = size_t(h) * w;
    Tensor spec(2 * c, h, w);  // [amplitudes; phases]
    std::vector<double> re(plane), im(plane);
    for (int ci = 0; ci < c; ++ci) {
        fft2_ortho(h, w, xv.v.data() + ci * plane, nullptr, re.data(), im.data(), false);
        for (size_t i = 0; i < plane; ++i) {
            spec.v[ci * plane + i] = std::hypot(re[i], im[i]);
            spec.v[(c + ci) * plane + i] = std::atan2(im[i], re[i]);
        }
    }
    Var s = t.make(std::move(spec), t.needs_grad(x), [x, c, h, w, plane](Tape& tp, Var self) {
        if (!tp.needs_grad(x)) return;
        const Tensor& gy = tp.grad(self);
        const Tensor& sv = tp.val(self);
        Tensor& gx = tp.grad(x);
        std::vector<double> gre(plane), gim(plane), ore(plane), oim(plane);
        for (int ci = 0; ci < c; ++ci) {
            for (size_t i = 0; i < plane; ++i) {
                const double a = sv.v[ci * plane + i];
                const double p = sv.v[(c + ci) * plane + i];
                const double da = gy.v[ci * plane + i];
                const double dp = gy.v[(c + ci) * plane + i];
                const double cp = std::cos(p), sp = std::sin(p);
                double r = da * cp, m = da * sp;
                if (a > 1e-300) {
                    r -= dp * sp / a;
                    m += dp * cp / a;
                }
                gre[i] = r;
                gim[i] = m;
            }
            fft2_ortho(h, w, gre.data(), gim.data(), ore.data(), oim.data(), true);
            for (size_t i = 0; i < plane; ++i) gx.v[ci * plane + i] += ore[i];
        }
    });
    Var a = slice_c(t, s, 0, c);
    Var p = slice_c(t, s, c, c);
    return {a, p};
}

Var ifft_ap(Tape& t, Var a, Var p) {
    const Tensor &av = t.val(a), &pv = t.val(p);
    check_same(av, pv, "ifft_ap");
    const int c = av.c, h = av.h, w = av.w;
    const size_t plane = size_t(h) * w;
    Tensor out(c, h, w);
    std::vector<double> re(plane), im(plane);
    for (int ci = 0; ci < c; ++ci) {
        for (size_t i = 0; i < plane; ++i) {
            const double amp = av.v[ci * plane + i];
            const double ph = pv.v[ci * plane + i];
            re[i] = amp * std::cos(ph);
            im[i] = amp * std::sin(ph);
        }
        fft2_ortho(h, w, re.data(), im.data(), re.data(), im.data(), true);
        for (size_t i = 0; i < plane; ++i) out.v[ci * plane + i] = re[i];
    }
    return t.make(std::move(out), t.needs_grad(a) || t.needs_grad(p),
                  [a, p, c, h, w, plane](Tape& tp, Var self) {
                      const Tensor& gy = tp.grad(self);
                      const Tensor &av2 = tp.val(a), &pv2 = tp.val(p);
                      const bool na = tp.needs_grad(a), np = tp.needs_grad(p);
                      std::vector<double> gre(plane), gim(plane);
                      Tensor* ga = na ? &tp.grad(a) : nullptr;
                      Tensor* gp = np ? &tp.grad(p) : nullptr;
                      for (int ci = 0; ci < c; ++ci) {
                          // adjoint of Re(IFFT(.)) is the forward transform
                          fft2_ortho(h, w, gy.v.data() + ci * plane, nullptr, gre.data(),
                                     gim.data(), false);
                          for (size_t i = 0; i < plane; ++i) {
                              const double amp = av2.v[ci * plane + i];
                              const double ph = pv2.v[ci * plane + i];
                              const double cp = std::cos(ph), sp = std::sin(ph);
                              if (na) ga->v[ci * plane + i] += gre[i] * cp + gim[i] * sp;
                              if (np)
                                  gp->v[ci * plane + i] +=
                                      amp * (-gre[i] * sp + gim[i] * cp);
                          }
                      }
                  });
}

}  // namespace pantcr::graph
