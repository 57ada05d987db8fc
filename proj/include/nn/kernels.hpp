#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nn/tensor.hpp"

namespace nn {

enum class Padding { valid, same };

inline const char* to_string(Padding p) { return p == Padding::valid ? "valid" : "same"; }

// 'same' pads with zeros, split floor on the leading edge and ceil on the
// trailing edge, so a 3x3 kernel pads 1/1 and a 5x5 pads 2/2.
inline int pad_before(int k) { return (k - 1) / 2; }

inline int conv_out_dim(int in, int k, Padding p) {
    if (p == Padding::same) return in;
    int out = in - k + 1;
    if (out <= 0)
        throw ShapeError("conv2d: kernel size " + std::to_string(k) +
                         " exceeds input extent " + std::to_string(in) + " with valid padding");
    return out;
}

// Cross-correlation (no kernel flip), stride 1.
// x: (N,H,W,Cin), k: (kh,kw,Cin,Cout), b: (Cout) -> (N,H',W',Cout)
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& b, Padding pad) {
    Shape4 s = as_shape4(x, "conv2d input");
    if (k.ndim() != 4)
        throw ShapeError("conv2d: expected (kh,kw,Cin,Cout) kernel, got " + shape_str(k.shape()));
    const int kh = k.dim(0), kw = k.dim(1), cin = k.dim(2), cout = k.dim(3);
    if (cin != s.c)
        throw ShapeError("conv2d: kernel expects " + std::to_string(cin) +
                         " input channels, input has " + std::to_string(s.c));
    if (b.ndim() != 1 || b.dim(0) != cout)
        throw ShapeError("conv2d: bias shape " + shape_str(b.shape()) + " does not match " +
                         std::to_string(cout) + " filters");
    const int oh = conv_out_dim(s.h, kh, pad);
    const int ow = conv_out_dim(s.w, kw, pad);
    const int pt = pad == Padding::same ? pad_before(kh) : 0;
    const int pl = pad == Padding::same ? pad_before(kw) : 0;

    Tensor<T> y = Tensor<T>::uninitialized({s.n, oh, ow, cout});
    const T* xp = x.data();
    const T* kp = k.data();
    const T* bp = b.data();
    T* yp = y.data();
    std::vector<T> acc(static_cast<size_t>(cout));

    for (int n = 0; n < s.n; ++n) {
        const T* xn = xp + static_cast<int64_t>(n) * s.h * s.w * s.c;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                for (int co = 0; co < cout; ++co) acc[static_cast<size_t>(co)] = bp[co];
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy + ky - pt;
                    if (iy < 0 || iy >= s.h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox + kx - pl;
                        if (ix < 0 || ix >= s.w) continue;
                        const T* xr = xn + (static_cast<int64_t>(iy) * s.w + ix) * s.c;
                        const T* kr = kp + (static_cast<int64_t>(ky) * kw + kx) * cin * cout;
                        for (int ci = 0; ci < cin; ++ci) {
                            const T a = xr[ci];
                            const T* kc = kr + static_cast<int64_t>(ci) * cout;
                            for (int co = 0; co < cout; ++co)
                                acc[static_cast<size_t>(co)] += a * kc[co];
                        }
                    }
                }
                T* yr = yp + ((static_cast<int64_t>(n) * oh + oy) * ow + ox) * cout;
                for (int co = 0; co < cout; ++co) yr[co] = acc[static_cast<size_t>(co)];
            }
        }
    }
    return y;
}

template <class T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& k, Padding pad, const Tensor<T>& dy,
                     Tensor<T>* dx, Tensor<T>* dk, Tensor<T>* db) {
    Shape4 s = as_shape4(x, "conv2d input");
    const int kh = k.dim(0), kw = k.dim(1), cin = k.dim(2), cout = k.dim(3);
    const int oh = dy.dim(1), ow = dy.dim(2);
    const int pt = pad == Padding::same ? pad_before(kh) : 0;
    const int pl = pad == Padding::same ? pad_before(kw) : 0;

    if (dx) *dx = Tensor<T>(x.shape());
    if (dk) *dk = Tensor<T>(k.shape());
    if (db) {
        *db = Tensor<T>({cout});
        T* dbp = db->data();
        const T* gp = dy.data();
        const int64_t rows = dy.size() / cout;
        for (int64_t r = 0; r < rows; ++r) {
            const T* g = gp + r * cout;
            for (int co = 0; co < cout; ++co) dbp[co] += g[co];
        }
    }
    if (!dx && !dk) return;

    const T* xp = x.data();
    const T* kp = k.data();
    const T* gp = dy.data();
    for (int n = 0; n < s.n; ++n) {
        const T* xn = xp + static_cast<int64_t>(n) * s.h * s.w * s.c;
        T* dxn = dx ? dx->data() + static_cast<int64_t>(n) * s.h * s.w * s.c : nullptr;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const T* g = gp + ((static_cast<int64_t>(n) * oh + oy) * ow + ox) * cout;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy + ky - pt;
                    if (iy < 0 || iy >= s.h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox + kx - pl;
                        if (ix < 0 || ix >= s.w) continue;
                        const int64_t xoff = (static_cast<int64_t>(iy) * s.w + ix) * s.c;
                        const int64_t koff = (static_cast<int64_t>(ky) * kw + kx) * cin * cout;
                        if (dk) {
                            const T* xr = xn + xoff;
                            T* dkr = dk->data() + koff;
                            for (int ci = 0; ci < cin; ++ci) {
                                const T a = xr[ci];
                                T* dkc = dkr + static_cast<int64_t>(ci) * cout;
                                for (int co = 0; co < cout; ++co) dkc[co] += a * g[co];
                            }
                        }
                        if (dx) {
                            T* dxr = dxn + xoff;
                            const T* kr = kp + koff;
                            for (int ci = 0; ci < cin; ++ci) {
                                const T* kc = kr + static_cast<int64_t>(ci) * cout;
                                T sum = T(0);
                                for (int co = 0; co < cout; ++co) sum += kc[co] * g[co];
                                dxr[ci] += sum;
                            }
                        }
                    }
                }
            }
        }
    }
}

// 2x2 max pooling with stride 2. Odd trailing rows/columns are dropped
// (out = floor((in-2)/2)+1). Ties take the first element in row-major order;
// argmax holds the flat input index feeding each output element.
template <class T>
struct MaxPoolOut {
    Tensor<T> y;
    std::vector<int64_t> argmax;
};

template <class T>
MaxPoolOut<T> maxpool2d(const Tensor<T>& x) {
    Shape4 s = as_shape4(x, "maxpool2d input");
    if (s.h < 2 || s.w < 2)
        throw ShapeError("maxpool2d: spatial extent " + std::to_string(s.h) + "x" +
                         std::to_string(s.w) + " is smaller than the 2x2 window");
    const int oh = (s.h - 2) / 2 + 1;
    const int ow = (s.w - 2) / 2 + 1;
    MaxPoolOut<T> out;
    out.y = Tensor<T>::uninitialized({s.n, oh, ow, s.c});
    out.argmax.resize(static_cast<size_t>(out.y.size()));
    const T* xp = x.data();
    T* yp = out.y.data();
    int64_t* ap = out.argmax.data();

    for (int n = 0; n < s.n; ++n) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                for (int c = 0; c < s.c; ++c) {
                    T best = T(0);
                    int64_t besti = -1;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dxp = 0; dxp < 2; ++dxp) {
                            const int64_t idx =
                                ((static_cast<int64_t>(n) * s.h + (2 * oy + dy)) * s.w +
                                 (2 * ox + dxp)) * s.c + c;
                            if (besti < 0 || xp[idx] > best) {
                                best = xp[idx];
                                besti = idx;
                            }
                        }
                    }
                    const int64_t o = ((static_cast<int64_t>(n) * oh + oy) * ow + ox) * s.c + c;
                    yp[o] = best;
                    ap[o] = besti;
                }
            }
        }
    }
    return out;
}

template <class T>
Tensor<T> maxpool2d_backward(const std::vector<int>& in_shape, const std::vector<int64_t>& argmax,
                             const Tensor<T>& dy) {
    Tensor<T> dx(in_shape);
    const T* gp = dy.data();
    for (int64_t i = 0; i < dy.size(); ++i) dx[argmax[static_cast<size_t>(i)]] += gp[i];
    return dx;
}

// x: (N,D), w: (D,U), b: (U) -> (N,U)
template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.ndim() != 2 || w.ndim() != 2)
        throw ShapeError("dense: expected 2-d input and weights, got " + shape_str(x.shape()) +
                         " and " + shape_str(w.shape()));
    const int n = x.dim(0), d = x.dim(1), u = w.dim(1);
    if (w.dim(0) != d)
        throw ShapeError("dense: input features " + std::to_string(d) +
                         " do not match weight rows " + std::to_string(w.dim(0)));
    if (b.ndim() != 1 || b.dim(0) != u)
        throw ShapeError("dense: bias shape " + shape_str(b.shape()) + " does not match " +
                         std::to_string(u) + " units");
    Tensor<T> y = Tensor<T>::uninitialized({n, u});
    const T* xp = x.data();
    const T* wp = w.data();
    const T* bp = b.data();
    T* yp = y.data();
    for (int i = 0; i < n; ++i) {
        T* yr = yp + static_cast<int64_t>(i) * u;
        for (int j = 0; j < u; ++j) yr[j] = bp[j];
        const T* xr = xp + static_cast<int64_t>(i) * d;
        for (int kd = 0; kd < d; ++kd) {
            const T a = xr[kd];
            const T* wr = wp + static_cast<int64_t>(kd) * u;
            for (int j = 0; j < u; ++j) yr[j] += a * wr[j];
        }
    }
    return y;
}

template <class T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx,
                    Tensor<T>* dw, Tensor<T>* db) {
    const int n = x.dim(0), d = x.dim(1), u = w.dim(1);
    const T* xp = x.data();
    const T* wp = w.data();
    const T* gp = dy.data();
    if (db) {
        *db = Tensor<T>({u});
        T* dbp = db->data();
        for (int i = 0; i < n; ++i) {
            const T* g = gp + static_cast<int64_t>(i) * u;
            for (int j = 0; j < u; ++j) dbp[j] += g[j];
        }
    }
    if (dw) {
        *dw = Tensor<T>(w.shape());
        T* dwp = dw->data();
        for (int i = 0; i < n; ++i) {
            const T* xr = xp + static_cast<int64_t>(i) * d;
            const T* g = gp + static_cast<int64_t>(i) * u;
            for (int kd = 0; kd < d; ++kd) {
                const T a = xr[kd];
                T* dwr = dwp + static_cast<int64_t>(kd) * u;
                for (int j = 0; j < u; ++j) dwr[j] += a * g[j];
            }
        }
    }
    if (dx) {
        *dx = Tensor<T>::uninitialized(x.shape());
        T* dxp = dx->data();
        for (int i = 0; i < n; ++i) {
            const T* g = gp + static_cast<int64_t>(i) * u;
            T* dxr = dxp + static_cast<int64_t>(i) * d;
            for (int kd = 0; kd < d; ++kd) {
                const T* wr = wp + static_cast<int64_t>(kd) * u;
                T sum = T(0);
                for (int j = 0; j < u; ++j) sum += wr[j] * g[j];
                dxr[kd] = sum;
            }
        }
    }
}

// Row-wise softmax with max subtraction.
template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
    if (x.ndim() != 2 || x.dim(1) < 2)
        throw ShapeError("softmax: expected (N,K) with K >= 2, got " + shape_str(x.shape()));
    const int n = x.dim(0), k = x.dim(1);
    Tensor<T> y = Tensor<T>::uninitialized(x.shape());
    for (int i = 0; i < n; ++i) {
        const T* xr = x.data() + static_cast<int64_t>(i) * k;
        T* yr = y.data() + static_cast<int64_t>(i) * k;
        T mx = xr[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, xr[j]);
        T sum = T(0);
        for (int j = 0; j < k; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        for (int j = 0; j < k; ++j) yr[j] /= sum;
    }
    return y;
}

// dL/dz from dL/dy using the forward output y: dz = y * (dy - sum(dy*y)).
template <class T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& dy) {
    const int n = y.dim(0), k = y.dim(1);
    Tensor<T> dz = Tensor<T>::uninitialized(y.shape());
    for (int i = 0; i < n; ++i) {
        const T* yr = y.data() + static_cast<int64_t>(i) * k;
        const T* gr = dy.data() + static_cast<int64_t>(i) * k;
        T* dr = dz.data() + static_cast<int64_t>(i) * k;
        T dot = T(0);
        for (int j = 0; j < k; ++j) dot += gr[j] * yr[j];
        for (int j = 0; j < k; ++j) dr[j] = yr[j] * (gr[j] - dot);
    }
    return dz;
}

// Batch norm works per channel: for (N,H,W,C) input the statistics reduce
// over N*H*W, for (N,D) over N. Channel count is the trailing dimension.
template <class T>
struct BnStats {
    Tensor<T> mean, var;  // per channel, biased variance
    int64_t rows = 0;
};

template <class T>
inline int bn_channels(const Tensor<T>& x) {
    if (x.ndim() != 2 && x.ndim() != 4)
        throw ShapeError("batchnorm: expected a 2-d or 4-d input, got " + shape_str(x.shape()));
    return x.dim(x.ndim() - 1);
}

template <class T>
BnStats<T> bn_batch_stats(const Tensor<T>& x) {
    const int c = bn_channels(x);
    const int64_t rows = x.size() / c;
    if (rows == 0) throw ShapeError("batchnorm: zero-size batch");
    BnStats<T> st;
    st.mean = Tensor<T>({c});
    st.var = Tensor<T>({c});
    st.rows = rows;
    const T* xp = x.data();
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = xp + r * c;
        for (int j = 0; j < c; ++j) st.mean[j] += xr[j];
    }
    for (int j = 0; j < c; ++j) st.mean[j] /= static_cast<T>(rows);
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = xp + r * c;
        for (int j = 0; j < c; ++j) {
            const T d = xr[j] - st.mean[j];
            st.var[j] += d * d;
        }
    }
    for (int j = 0; j < c; ++j) st.var[j] /= static_cast<T>(rows);
    return st;
}

template <class T>
Tensor<T> bn_normalize(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       const Tensor<T>& mean, const Tensor<T>& var, T eps) {
    const int c = bn_channels(x);
    if (gamma.size() != c || beta.size() != c || mean.size() != c || var.size() != c)
        throw ShapeError("batchnorm: parameter length does not match " + std::to_string(c) +
                         " channels");
    const int64_t rows = x.size() / c;
    Tensor<T> y = Tensor<T>::uninitialized(x.shape());
    std::vector<T> scale(static_cast<size_t>(c)), shift(static_cast<size_t>(c));
    for (int j = 0; j < c; ++j) {
        const T inv = T(1) / std::sqrt(var[j] + eps);
        scale[static_cast<size_t>(j)] = gamma[j] * inv;
        shift[static_cast<size_t>(j)] = beta[j] - mean[j] * scale[static_cast<size_t>(j)];
    }
    const T* xp = x.data();
    T* yp = y.data();
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = xp + r * c;
        T* yr = yp + r * c;
        for (int j = 0; j < c; ++j)
            yr[j] = xr[j] * scale[static_cast<size_t>(j)] + shift[static_cast<size_t>(j)];
    }
    return y;
}

template <class T>
struct BnTrainOut {
    Tensor<T> y;
    BnStats<T> stats;
};

template <class T>
BnTrainOut<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                              T eps) {
    BnTrainOut<T> out;
    out.stats = bn_batch_stats(x);
    out.y = bn_normalize(x, gamma, beta, out.stats.mean, out.stats.var, eps);
    return out;
}

template <class T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& rmean, const Tensor<T>& rvar, T eps) {
    return bn_normalize(x, gamma, beta, rmean, rvar, eps);
}

// Full train-mode backward, differentiating through the batch statistics.
template <class T>
void batchnorm_train_backward(const Tensor<T>& x, const Tensor<T>& gamma, const BnStats<T>& st,
                              T eps, const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dgamma,
                              Tensor<T>* dbeta) {
    const int c = bn_channels(x);
    const int64_t m = st.rows;
    const T* xp = x.data();
    const T* gp = dy.data();

    std::vector<T> inv_std(static_cast<size_t>(c));
    for (int j = 0; j < c; ++j) inv_std[static_cast<size_t>(j)] = T(1) / std::sqrt(st.var[j] + eps);

    // per-channel reductions
    std::vector<T> sum_dy(static_cast<size_t>(c), T(0));
    std::vector<T> sum_dy_xc(static_cast<size_t>(c), T(0));  // sum dy*(x-mean)
    std::vector<T> sum_xc(static_cast<size_t>(c), T(0));     // sum (x-mean)
    for (int64_t r = 0; r < m; ++r) {
        const T* xr = xp + r * c;
        const T* gr = gp + r * c;
        for (int j = 0; j < c; ++j) {
            const T xc = xr[j] - st.mean[j];
            sum_dy[static_cast<size_t>(j)] += gr[j];
            sum_dy_xc[static_cast<size_t>(j)] += gr[j] * xc;
            sum_xc[static_cast<size_t>(j)] += xc;
        }
    }

    if (dgamma) {
        *dgamma = Tensor<T>({c});
        for (int j = 0; j < c; ++j)
            (*dgamma)[j] = sum_dy_xc[static_cast<size_t>(j)] * inv_std[static_cast<size_t>(j)];
    }
    if (dbeta) {
        *dbeta = Tensor<T>({c});
        for (int j = 0; j < c; ++j) (*dbeta)[j] = sum_dy[static_cast<size_t>(j)];
    }
    if (!dx) return;

    std::vector<T> dvar(static_cast<size_t>(c)), dmean(static_cast<size_t>(c));
    for (int j = 0; j < c; ++j) {
        const size_t js = static_cast<size_t>(j);
        const T iv = inv_std[js];
        dvar[js] = gamma[j] * sum_dy_xc[js] * T(-0.5) * iv * iv * iv;
        dmean[js] = -gamma[j] * sum_dy[js] * iv + dvar[js] * T(-2) * sum_xc[js] / static_cast<T>(m);
    }
    *dx = Tensor<T>::uninitialized(x.shape());
    T* dxp = dx->data();
    for (int64_t r = 0; r < m; ++r) {
        const T* xr = xp + r * c;
        const T* gr = gp + r * c;
        T* dr = dxp + r * c;
        for (int j = 0; j < c; ++j) {
            const size_t js = static_cast<size_t>(j);
            const T xc = xr[j] - st.mean[j];
            dr[j] = gamma[j] * gr[j] * inv_std[js] + dvar[js] * T(2) * xc / static_cast<T>(m) +
                    dmean[js] / static_cast<T>(m);
        }
    }
}

template <class T>
void batchnorm_infer_backward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& rmean,
                              const Tensor<T>& rvar, T eps, const Tensor<T>& dy, Tensor<T>* dx,
                              Tensor<T>* dgamma, Tensor<T>* dbeta) {
    const int c = bn_channels(x);
    const int64_t rows = x.size() / c;
    std::vector<T> inv_std(static_cast<size_t>(c));
    for (int j = 0; j < c; ++j) inv_std[static_cast<size_t>(j)] = T(1) / std::sqrt(rvar[j] + eps);
    if (dgamma) *dgamma = Tensor<T>({c});
    if (dbeta) *dbeta = Tensor<T>({c});
    if (dx) *dx = Tensor<T>::uninitialized(x.shape());
    const T* xp = x.data();
    const T* gp = dy.data();
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = xp + r * c;
        const T* gr = gp + r * c;
        for (int j = 0; j < c; ++j) {
            const size_t js = static_cast<size_t>(j);
            if (dgamma) (*dgamma)[j] += gr[j] * (xr[j] - rmean[j]) * inv_std[js];
            if (dbeta) (*dbeta)[j] += gr[j];
            if (dx) (*dx)[r * c + j] = gr[j] * gamma[j] * inv_std[js];
        }
    }
}

// Running-statistic update: running = momentum*running + (1-momentum)*batch.
template <class T>
void bn_update_running(Tensor<T>& rmean, Tensor<T>& rvar, const BnStats<T>& st, T momentum) {
    for (int64_t j = 0; j < rmean.size(); ++j) {
        rmean[j] = momentum * rmean[j] + (T(1) - momentum) * st.mean[j];
        rvar[j] = momentum * rvar[j] + (T(1) - momentum) * st.var[j];
    }
}

// Inverted dropout: each element is zeroed with probability `rate`, survivors
// are scaled by 1/(1-rate) so the expectation matches inference. The mask
// stores the applied factor. rate 0 is an exact identity and draws nothing.
template <class T>
struct DropoutOut {
    Tensor<T> y;
    Tensor<T> mask;
};

template <class T>
DropoutOut<T> dropout_train(const Tensor<T>& x, double rate, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
    DropoutOut<T> out;
    if (rate == 0.0) {
        out.mask = Tensor<T>::full(x.shape(), T(1));
        out.y = x;
        return out;
    }
    out.y = Tensor<T>::uninitialized(x.shape());
    out.mask = Tensor<T>::uninitialized(x.shape());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int64_t i = 0; i < x.size(); ++i) {
        const T m = uni(rng) >= rate ? keep_scale : T(0);
        out.mask[i] = m;
        out.y[i] = x[i] * m;
    }
    return out;
}

template <class T>
Tensor<T> dropout_backward(const Tensor<T>& mask, const Tensor<T>& dy) {
    Tensor<T> dx = Tensor<T>::uninitialized(dy.shape());
    for (int64_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask[i];
    return dx;
}

// (N,H,W,C) -> (N,C), mean over the spatial positions.
template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    Shape4 s = as_shape4(x, "global_avg_pool input");
    Tensor<T> y({s.n, s.c});
    const T* xp = x.data();
    const T inv = T(1) / static_cast<T>(s.h * s.w);
    for (int n = 0; n < s.n; ++n) {
        T* yr = y.data() + static_cast<int64_t>(n) * s.c;
        const T* xn = xp + static_cast<int64_t>(n) * s.h * s.w * s.c;
        for (int64_t p = 0; p < static_cast<int64_t>(s.h) * s.w; ++p) {
            const T* xr = xn + p * s.c;
            for (int c = 0; c < s.c; ++c) yr[c] += xr[c];
        }
        for (int c = 0; c < s.c; ++c) yr[c] *= inv;
    }
    return y;
}

template <class T>
Tensor<T> global_avg_pool_backward(const std::vector<int>& in_shape, const Tensor<T>& dy) {
    Tensor<T> dx = Tensor<T>::uninitialized(in_shape);
    const int n = in_shape[0], h = in_shape[1], w = in_shape[2], c = in_shape[3];
    const T inv = T(1) / static_cast<T>(h * w);
    for (int i = 0; i < n; ++i) {
        const T* gr = dy.data() + static_cast<int64_t>(i) * c;
        T* dxn = dx.data() + static_cast<int64_t>(i) * h * w * c;
        for (int64_t p = 0; p < static_cast<int64_t>(h) * w; ++p) {
            T* dr = dxn + p * c;
            for (int j = 0; j < c; ++j) dr[j] = gr[j] * inv;
        }
    }
    return dx;
}

// Row-major reshape to (N, D); the inverse is reshaping back.
template <class T>
Tensor<T> flatten(const Tensor<T>& x) {
    if (x.ndim() < 2) throw ShapeError("flatten: expected a batched tensor");
    const int n = x.dim(0);
    return x.reshaped({n, static_cast<int>(x.size() / n)});
}

}  // namespace nn
