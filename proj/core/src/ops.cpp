#include "pf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pf/errors.hpp"

namespace pf {

namespace {

bool grad_needed(std::initializer_list<const Tensor*> ins) {
    if (!Tape::active()) return false;
    for (const Tensor* t : ins) {
        if (t->requires_grad()) return true;
    }
    return false;
}

void record(std::vector<Tensor> inputs, Tensor& out, std::function<void()> fn) {
    out.set_requires_grad(true);
    Tape::active()->record(TapeNode{std::move(inputs), out, std::move(fn)});
}

void axpy(std::span<double> dst, std::span<const double> src, double a = 1.0) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
}

int trailing_extent(const Tensor& t) { return t.shape().back(); }

int leading_rows(const Tensor& t) {
    int rows = 1;
    const auto& s = t.shape();
    for (std::size_t i = 0; i + 1 < s.size(); ++i) rows *= s[i];
    return rows;
}

enum class Broadcast { same, row_vector };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return Broadcast::same;
    if (b.ndim() == 1 && b.dim(0) == trailing_extent(a)) return Broadcast::row_vector;
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n});
    {
        auto av = a.data();
        auto bv = b.data();
        auto ov = out.mutable_data();
        for (int i = 0; i < m; ++i) {
            for (int p = 0; p < k; ++p) {
                const double aip = av[i * k + p];
                if (aip == 0.0) continue;
                for (int j = 0; j < n; ++j) ov[i * n + j] += aip * bv[p * n + j];
            }
        }
    }
    if (grad_needed({&a, &b})) {
        Tensor ac = a, bc = b, oc = out;
        record({a, b}, out, [ac, bc, oc, m, k, n]() {
            auto og = oc.grad();
            if (ac.requires_grad()) {
                auto ag = ac.mutable_grad();
                auto bv = bc.data();
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) s += og[i * n + j] * bv[p * n + j];
                        ag[i * k + p] += s;
                    }
            }
            if (bc.requires_grad()) {
                auto bg = bc.mutable_grad();
                auto av = ac.data();
                for (int p = 0; p < k; ++p)
                    for (int i = 0; i < m; ++i) {
                        const double aip = av[i * k + p];
                        if (aip == 0.0) continue;
                        for (int j = 0; j < n; ++j) bg[p * n + j] += aip * og[i * n + j];
                    }
            }
        });
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1)) {
        throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
    Tensor out = Tensor::zeros({m, n});
    {
        auto av = a.data();
        auto bv = b.data();
        auto ov = out.mutable_data();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int p = 0; p < k; ++p) s += av[i * k + p] * bv[j * k + p];
                ov[i * n + j] = s;
            }
    }
    if (grad_needed({&a, &b})) {
        Tensor ac = a, bc = b, oc = out;
        record({a, b}, out, [ac, bc, oc, m, k, n]() {
            auto og = oc.grad();
            if (ac.requires_grad()) {
                auto ag = ac.mutable_grad();
                auto bv = bc.data();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double g = og[i * n + j];
                        if (g == 0.0) continue;
                        for (int p = 0; p < k; ++p) ag[i * k + p] += g * bv[j * k + p];
                    }
            }
            if (bc.requires_grad()) {
                auto bg = bc.mutable_grad();
                auto av = ac.data();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double g = og[i * n + j];
                        if (g == 0.0) continue;
                        for (int p = 0; p < k; ++p) bg[j * k + p] += g * av[i * k + p];
                    }
            }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    const Broadcast kind = broadcast_kind(a, b, "add");
    Tensor out = Tensor::zeros(a.shape());
    {
        auto av = a.data();
        auto bv = b.data();
        auto ov = out.mutable_data();
        if (kind == Broadcast::same) {
            for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
        } else {
            const int d = trailing_extent(a);
            const int rows = leading_rows(a);
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < d; ++j) ov[r * d + j] = av[r * d + j] + bv[j];
        }
    }
    if (grad_needed({&a, &b})) {
        Tensor ac = a, bc = b, oc = out;
        record({a, b}, out, [ac, bc, oc, kind]() {
            auto og = oc.grad();
            if (ac.requires_grad()) axpy(ac.mutable_grad(), og);
            if (bc.requires_grad()) {
                auto bg = bc.mutable_grad();
                if (kind == Broadcast::same) {
                    axpy(bg, og);
                } else {
                    const int d = trailing_extent(ac);
                    const int rows = leading_rows(ac);
                    for (int r = 0; r < rows; ++r)
                        for (int j = 0; j < d; ++j) bg[j] += og[r * d + j];
                }
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const Broadcast kind = broadcast_kind(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape());
    {
        auto av = a.data();
        auto bv = b.data();
        auto ov = out.mutable_data();
        if (kind == Broadcast::same) {
            for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
        } else {
            const int d = trailing_extent(a);
            const int rows = leading_rows(a);
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < d; ++j) ov[r * d + j] = av[r * d + j] * bv[j];
        }
    }
    if (grad_needed({&a, &b})) {
        Tensor ac = a, bc = b, oc = out;
        record({a, b}, out, [ac, bc, oc, kind]() {
            auto og = oc.grad();
            auto av = ac.data();
            auto bv = bc.data();
            if (kind == Broadcast::same) {
                if (ac.requires_grad()) {
                    auto ag = ac.mutable_grad();
                    for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i] * bv[i];
                }
                if (bc.requires_grad()) {
                    auto bg = bc.mutable_grad();
                    for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i] * av[i];
                }
            } else {
                const int d = trailing_extent(ac);
                const int rows = leading_rows(ac);
                if (ac.requires_grad()) {
                    auto ag = ac.mutable_grad();
                    for (int r = 0; r < rows; ++r)
                        for (int j = 0; j < d; ++j) ag[r * d + j] += og[r * d + j] * bv[j];
                }
                if (bc.requires_grad()) {
                    auto bg = bc.mutable_grad();
                    for (int r = 0; r < rows; ++r)
                        for (int j = 0; j < d; ++j) bg[j] += og[r * d + j] * av[r * d + j];
                }
            }
        });
    }
    return out;
}

Tensor gelu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    {
        auto xv = x.data();
        auto ov = out.mutable_data();
        for (std::size_t i = 0; i < ov.size(); ++i) {
            ov[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * M_SQRT1_2));
        }
    }
    if (grad_needed({&x})) {
        Tensor xc = x, oc = out;
        record({x}, out, [xc, oc]() {
            if (!xc.requires_grad()) return;
            auto og = oc.grad();
            auto xv = xc.data();
            auto xg = xc.mutable_grad();
            const double inv_sqrt_2pi = 0.3989422804014326779399461;
            for (std::size_t i = 0; i < og.size(); ++i) {
                const double cdf = 0.5 * (1.0 + std::erf(xv[i] * M_SQRT1_2));
                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xv[i] * xv[i]);
                xg[i] += og[i] * (cdf + xv[i] * pdf);
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& x, double factor) {
    Tensor out = Tensor::zeros(x.shape());
    {
        auto xv = x.data();
        auto ov = out.mutable_data();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = factor * xv[i];
    }
    if (grad_needed({&x})) {
        Tensor xc = x, oc = out;
        record({x}, out, [xc, oc, factor]() {
            if (xc.requires_grad()) axpy(xc.mutable_grad(), oc.grad(), factor);
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    Tensor out = Tensor::scalar(total);
    if (grad_needed({&x})) {
        Tensor xc = x, oc = out;
        record({x}, out, [xc, oc]() {
            if (!xc.requires_grad()) return;
            const double g = oc.grad()[0];
            auto xg = xc.mutable_grad();
            for (auto& v : xg) v += g;
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const int d = trailing_extent(x);
    if (gamma.ndim() != 1 || gamma.dim(0) != d || beta.ndim() != 1 || beta.dim(0) != d) {
        throw ShapeError("layer_norm: affine shapes " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " do not match trailing extent of " +
                         shape_str(x.shape()));
    }
    const int rows = leading_rows(x);
    Tensor out = Tensor::zeros(x.shape());
    std::vector<double> inv_std(static_cast<std::size_t>(rows));
    std::vector<double> xhat(x.data().size());
    {
        auto xv = x.data();
        auto gv = gamma.data();
        auto bv = beta.data();
        auto ov = out.mutable_data();
        for (int r = 0; r < rows; ++r) {
            double mean = 0.0;
            for (int j = 0; j < d; ++j) mean += xv[r * d + j];
            mean /= d;
            double var = 0.0;
            for (int j = 0; j < d; ++j) {
                const double c = xv[r * d + j] - mean;
                var += c * c;
            }
            var /= d;
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std[static_cast<std::size_t>(r)] = is;
            for (int j = 0; j < d; ++j) {
                const double h = (xv[r * d + j] - mean) * is;
                xhat[static_cast<std::size_t>(r * d + j)] = h;
                ov[r * d + j] = gv[j] * h + bv[j];
            }
        }
    }
    if (grad_needed({&x, &gamma, &beta})) {
        Tensor xc = x, gc = gamma, bc = beta, oc = out;
        record({x, gamma, beta}, out,
               [xc, gc, bc, oc, rows, d, inv_std = std::move(inv_std), xhat = std::move(xhat)]() {
                   auto og = oc.grad();
                   auto gv = gc.data();
                   if (gc.requires_grad()) {
                       auto gg = gc.mutable_grad();
                       for (int r = 0; r < rows; ++r)
                           for (int j = 0; j < d; ++j)
                               gg[j] += og[r * d + j] * xhat[static_cast<std::size_t>(r * d + j)];
                   }
                   if (bc.requires_grad()) {
                       auto bg = bc.mutable_grad();
                       for (int r = 0; r < rows; ++r)
                           for (int j = 0; j < d; ++j) bg[j] += og[r * d + j];
                   }
                   if (xc.requires_grad()) {
                       auto xg = xc.mutable_grad();
                       for (int r = 0; r < rows; ++r) {
                           double mean_dh = 0.0, mean_dh_h = 0.0;
                           for (int j = 0; j < d; ++j) {
                               const double dh = og[r * d + j] * gv[j];
                               mean_dh += dh;
                               mean_dh_h += dh * xhat[static_cast<std::size_t>(r * d + j)];
                           }
                           mean_dh /= d;
                           mean_dh_h /= d;
                           const double is = inv_std[static_cast<std::size_t>(r)];
                           for (int j = 0; j < d; ++j) {
                               const double dh = og[r * d + j] * gv[j];
                               const double h = xhat[static_cast<std::size_t>(r * d + j)];
                               xg[r * d + j] += is * (dh - mean_dh - h * mean_dh_h);
                           }
                       }
                   }
               });
    }
    return out;
}

Tensor embedding(const Tensor& weight, const std::vector<int>& ids) {
    if (weight.ndim() != 2) {
        throw ShapeError("embedding: weight must be 2-D, got " + shape_str(weight.shape()));
    }
    const int vocab = weight.dim(0), d = weight.dim(1);
    const int n = static_cast<int>(ids.size());
    for (int i = 0; i < n; ++i) {
        if (ids[static_cast<std::size_t>(i)] < 0 || ids[static_cast<std::size_t>(i)] >= vocab) {
            throw DataError("embedding: id " + std::to_string(ids[static_cast<std::size_t>(i)]) +
                            " at position " + std::to_string(i) + " outside table of " +
                            std::to_string(vocab) + " rows");
        }
    }
    Tensor out = Tensor::zeros({n, d});
    {
        auto wv = weight.data();
        auto ov = out.mutable_data();
        for (int i = 0; i < n; ++i) {
            const int id = ids[static_cast<std::size_t>(i)];
            std::copy_n(wv.begin() + id * d, d, ov.begin() + i * d);
        }
    }
    if (grad_needed({&weight})) {
        Tensor wc = weight, oc = out;
        record({weight}, out, [wc, oc, ids, d]() {
            if (!wc.requires_grad()) return;
            auto og = oc.grad();
            auto wg = wc.mutable_grad();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const int id = ids[i];
                for (int j = 0; j < d; ++j)
                    wg[id * d + j] += og[static_cast<int>(i) * d + j];
            }
        });
    }
    return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1)) {
        throw ShapeError("concat_rows: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const int ma = a.dim(0), mb = b.dim(0), d = a.dim(1);
    Tensor out = Tensor::zeros({ma + mb, d});
    {
        auto ov = out.mutable_data();
        std::copy(a.data().begin(), a.data().end(), ov.begin());
        std::copy(b.data().begin(), b.data().end(), ov.begin() + ma * d);
    }
    if (grad_needed({&a, &b})) {
        Tensor ac = a, bc = b, oc = out;
        record({a, b}, out, [ac, bc, oc, ma, mb, d]() {
            auto og = oc.grad();
            if (ac.requires_grad()) {
                auto ag = ac.mutable_grad();
                for (int i = 0; i < ma * d; ++i) ag[i] += og[i];
            }
            if (bc.requires_grad()) {
                auto bg = bc.mutable_grad();
                for (int i = 0; i < mb * d; ++i) bg[i] += og[ma * d + i];
            }
        });
    }
    return out;
}

Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads) {
    if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2) {
        throw ShapeError("causal_attention: q/k/v must be 2-D");
    }
    const int t_q = q.dim(0), d = q.dim(1);
    const int t_k = k.dim(0);
    if (k.dim(1) != d || v.dim(1) != d || v.dim(0) != t_k) {
        throw ShapeError("causal_attention: incompatible shapes " + shape_str(q.shape()) + ", " +
                         shape_str(k.shape()) + ", " + shape_str(v.shape()));
    }
    if (t_k < t_q) {
        throw ShapeError("causal_attention: keys shorter than queries (" + shape_str(k.shape()) +
                         " vs " + shape_str(q.shape()) + ")");
    }
    if (n_heads <= 0 || d % n_heads != 0) {
        throw ShapeError("causal_attention: head count " + std::to_string(n_heads) +
                         " does not divide width " + std::to_string(d));
    }
    const int prefix = t_k - t_q;
    const int dh = d / n_heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor out = Tensor::zeros({t_q, d});
    // Softmax weights are saved per head for the backward sweep.
    std::vector<double> weights(
        static_cast<std::size_t>(n_heads) * static_cast<std::size_t>(t_q) *
        static_cast<std::size_t>(t_k));
    {
        auto qv = q.data();
        auto kv = k.data();
        auto vv = v.data();
        auto ov = out.mutable_data();
        std::vector<double> scores(static_cast<std::size_t>(t_k));
        for (int h = 0; h < n_heads; ++h) {
            const int c0 = h * dh;
            for (int t = 0; t < t_q; ++t) {
                const int visible = prefix + t + 1;
                double max_s = -1e300;
                for (int j = 0; j < visible; ++j) {
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c)
                        s += qv[t * d + c0 + c] * kv[j * d + c0 + c];
                    s *= inv_scale;
                    scores[static_cast<std::size_t>(j)] = s;
                    max_s = std::max(max_s, s);
                }
                double denom = 0.0;
                for (int j = 0; j < visible; ++j) {
                    const double e = std::exp(scores[static_cast<std::size_t>(j)] - max_s);
                    scores[static_cast<std::size_t>(j)] = e;
                    denom += e;
                }
                double* wrow = weights.data() +
                               (static_cast<std::size_t>(h) * t_q + t) * static_cast<std::size_t>(t_k);
                for (int j = 0; j < visible; ++j) {
                    const double w = scores[static_cast<std::size_t>(j)] / denom;
                    wrow[j] = w;
                    for (int c = 0; c < dh; ++c) ov[t * d + c0 + c] += w * vv[j * d + c0 + c];
                }
                for (int j = visible; j < t_k; ++j) wrow[j] = 0.0;
            }
        }
    }
    if (grad_needed({&q, &k, &v})) {
        Tensor qc = q, kc = k, vc = v, oc = out;
        record({q, k, v}, out,
               [qc, kc, vc, oc, t_q, t_k, d, n_heads, dh, prefix, inv_scale,
                weights = std::move(weights)]() {
                   auto og = oc.grad();
                   auto qv = qc.data();
                   auto kv = kc.data();
                   auto vv = vc.data();
                   const bool need_q = qc.requires_grad();
                   const bool need_k = kc.requires_grad();
                   const bool need_v = vc.requires_grad();
                   std::span<double> qg, kg, vg;
                   if (need_q) qg = qc.mutable_grad();
                   if (need_k) kg = kc.mutable_grad();
                   if (need_v) vg = vc.mutable_grad();
                   std::vector<double> dW(static_cast<std::size_t>(t_k));
                   for (int h = 0; h < n_heads; ++h) {
                       const int c0 = h * dh;
                       for (int t = 0; t < t_q; ++t) {
                           const int visible = prefix + t + 1;
                           const double* wrow =
                               weights.data() +
                               (static_cast<std::size_t>(h) * t_q + t) *
                                   static_cast<std::size_t>(t_k);
                           double dot_w_dw = 0.0;
                           for (int j = 0; j < visible; ++j) {
                               double s = 0.0;
                               for (int c = 0; c < dh; ++c)
                                   s += og[t * d + c0 + c] * vv[j * d + c0 + c];
                               dW[static_cast<std::size_t>(j)] = s;
                               dot_w_dw += wrow[j] * s;
                           }
                           for (int j = 0; j < visible; ++j) {
                               const double w = wrow[j];
                               if (need_v && w != 0.0) {
                                   for (int c = 0; c < dh; ++c)
                                       vg[j * d + c0 + c] += w * og[t * d + c0 + c];
                               }
                               const double ds =
                                   w * (dW[static_cast<std::size_t>(j)] - dot_w_dw) * inv_scale;
                               if (ds == 0.0) continue;
                               if (need_q) {
                                   for (int c = 0; c < dh; ++c)
                                       qg[t * d + c0 + c] += ds * kv[j * d + c0 + c];
                               }
                               if (need_k) {
                                   for (int c = 0; c < dh; ++c)
                                       kg[j * d + c0 + c] += ds * qv[t * d + c0 + c];
                               }
                           }
                       }
                   }
               });
    }
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                             int ignore_index) {
    if (logits.ndim() != 2) {
        throw ShapeError("softmax_cross_entropy: logits must be 2-D, got " +
                         shape_str(logits.shape()));
    }
    const int t_len = logits.dim(0), vocab = logits.dim(1);
    if (static_cast<int>(targets.size()) != t_len) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(t_len) + " positions");
    }
    int supervised = 0;
    for (int t = 0; t < t_len; ++t) {
        const int y = targets[static_cast<std::size_t>(t)];
        if (y == ignore_index) continue;
        if (y < 0 || y >= vocab) {
            throw DataError("softmax_cross_entropy: target " + std::to_string(y) +
                            " at position " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(vocab));
        }
        ++supervised;
    }
    if (supervised == 0) throw DataError("softmax_cross_entropy: no supervised positions");

    std::vector<double> probs(logits.data().size());
    double loss = 0.0;
    {
        auto lv = logits.data();
        for (int t = 0; t < t_len; ++t) {
            const int y = targets[static_cast<std::size_t>(t)];
            if (y == ignore_index) continue;
            double max_l = -1e300;
            for (int j = 0; j < vocab; ++j) max_l = std::max(max_l, lv[t * vocab + j]);
            double denom = 0.0;
            for (int j = 0; j < vocab; ++j) {
                const double e = std::exp(lv[t * vocab + j] - max_l);
                probs[static_cast<std::size_t>(t * vocab + j)] = e;
                denom += e;
            }
            for (int j = 0; j < vocab; ++j) probs[static_cast<std::size_t>(t * vocab + j)] /= denom;
            loss -= std::log(probs[static_cast<std::size_t>(t * vocab + y)]);
        }
    }
    Tensor out = Tensor::scalar(loss / supervised);
    if (grad_needed({&logits})) {
        Tensor lc = logits, oc = out;
        record({logits}, out,
               [lc, oc, targets, ignore_index, t_len, vocab, supervised,
                probs = std::move(probs)]() {
                   if (!lc.requires_grad()) return;
                   const double g = oc.grad()[0] / supervised;
                   auto lg = lc.mutable_grad();
                   for (int t = 0; t < t_len; ++t) {
                       const int y = targets[static_cast<std::size_t>(t)];
                       if (y == ignore_index) continue;
                       for (int j = 0; j < vocab; ++j) {
                           const double p = probs[static_cast<std::size_t>(t * vocab + j)];
                           lg[t * vocab + j] += g * (p - (j == y ? 1.0 : 0.0));
                       }
                   }
               });
    }
    return out;
}

}  // namespace pf
