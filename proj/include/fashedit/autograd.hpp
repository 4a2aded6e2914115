#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <functional>

#include "fashedit/tensor.hpp"

namespace fashedit {

// Reverse-mode autodiff over a per-forward graph arena. Nodes are created in
// topological order, so backward is a single reverse sweep over the arena.
// Every non-trivial primitive asserts finiteness of its output.

template <typename S>
struct Node {
    Tensor<S> value;
    Tensor<S> grad;            // allocated lazily
    bool requiresGrad = false; // leaf flag; interior nodes inherit
    bool gradTouched = false;
    std::function<void()> backward;  // empty for leaves
};

template <typename S>
class Graph {
public:
    using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Map = Eigen::Map<EMat>;
    using CMap = Eigen::Map<const EMat>;

    static CMap mat(const Tensor<S>& t) { return CMap(t.data.data(), t.rows(), t.cols()); }
    static Map mat(Tensor<S>& t) { return Map(t.data.data(), t.rows(), t.cols()); }

    Node<S>* leaf(Tensor<S> value, bool requiresGrad) {
        Node<S>* n = alloc();
        n->value = std::move(value);
        n->requiresGrad = requiresGrad;
        return n;
    }

    // --- primitives ---

    Node<S>* matmul(Node<S>* a, Node<S>* b) {
        if (a->value.cols() != b->value.rows()) fail(ErrorKind::Shape, "matmul: inner dims differ");
        Node<S>* n = alloc();
        n->value = Tensor<S>({a->value.rows(), b->value.cols()});
        mat(n->value).noalias() = mat(a->value) * mat(b->value);
        check_finite(n->value, "matmul");
        finish(n, {a, b}, [this, n, a, b]() {
            if (a->requiresGrad) mat(grad_of(a)).noalias() += mat(n->grad) * mat(b->value).transpose();
            if (b->requiresGrad) mat(grad_of(b)).noalias() += mat(a->value).transpose() * mat(n->grad);
        });
        return n;
    }

    Node<S>* add(Node<S>* a, Node<S>* b) {
        if (!a->value.same_shape(b->value)) fail(ErrorKind::Shape, "add: shape mismatch");
        Node<S>* n = alloc();
        n->value = a->value;
        for (int64_t i = 0; i < n->value.numel(); i++) n->value[i] += b->value[i];
        finish(n, {a, b}, [this, n, a, b]() {
            if (a->requiresGrad) accumulate(a, n->grad);
            if (b->requiresGrad) accumulate(b, n->grad);
        });
        return n;
    }

    Node<S>* sub(Node<S>* a, Node<S>* b) {
        if (!a->value.same_shape(b->value)) fail(ErrorKind::Shape, "sub: shape mismatch");
        Node<S>* n = alloc();
        n->value = a->value;
        for (int64_t i = 0; i < n->value.numel(); i++) n->value[i] -= b->value[i];
        finish(n, {a, b}, [this, n, a, b]() {
            if (a->requiresGrad) accumulate(a, n->grad);
            if (b->requiresGrad) {
                Tensor<S>& g = grad_of(b);
                for (int64_t i = 0; i < g.numel(); i++) g[i] -= n->grad[i];
            }
        });
        return n;
    }

    Node<S>* scale(Node<S>* a, double c) {
        Node<S>* n = alloc();
        n->value = a->value;
        for (auto& v : n->value.data) v = (S)(v * c);
        finish(n, {a}, [this, n, a, c]() {
            if (!a->requiresGrad) return;
            Tensor<S>& g = grad_of(a);
            for (int64_t i = 0; i < g.numel(); i++) g[i] += (S)(n->grad[i] * c);
        });
        return n;
    }

    Node<S>* hadamard(Node<S>* a, Node<S>* b) {
        if (!a->value.same_shape(b->value)) fail(ErrorKind::Shape, "hadamard: shape mismatch");
        Node<S>* n = alloc();
        n->value = a->value;
        for (int64_t i = 0; i < n->value.numel(); i++) n->value[i] *= b->value[i];
        finish(n, {a, b}, [this, n, a, b]() {
            if (a->requiresGrad) {
                Tensor<S>& g = grad_of(a);
                for (int64_t i = 0; i < g.numel(); i++) g[i] += n->grad[i] * b->value[i];
            }
            if (b->requiresGrad) {
                Tensor<S>& g = grad_of(b);
                for (int64_t i = 0; i < g.numel(); i++) g[i] += n->grad[i] * a->value[i];
            }
        });
        return n;
    }

    // a [m,n] + r [1,n] broadcast over rows
    Node<S>* add_rowvec(Node<S>* a, Node<S>* r) {
        if (r->value.rows() != 1 || r->value.cols() != a->value.cols())
            fail(ErrorKind::Shape, "add_rowvec: row vector mismatch");
        Node<S>* n = alloc();
        n->value = a->value;
        int64_t m = a->value.rows(), c = a->value.cols();
        for (int64_t i = 0; i < m; i++)
            for (int64_t j = 0; j < c; j++) n->value[i * c + j] += r->value[j];
        finish(n, {a, r}, [this, n, a, r, m, c]() {
            if (a->requiresGrad) accumulate(a, n->grad);
            if (r->requiresGrad) {
                Tensor<S>& g = grad_of(r);
                for (int64_t i = 0; i < m; i++)
                    for (int64_t j = 0; j < c; j++) g[j] += n->grad[i * c + j];
            }
        });
        return n;
    }

    // a [m,n] * r [1,n] broadcast over rows
    Node<S>* mul_rowvec(Node<S>* a, Node<S>* r) {
        if (r->value.rows() != 1 || r->value.cols() != a->value.cols())
            fail(ErrorKind::Shape, "mul_rowvec: row vector mismatch");
        Node<S>* n = alloc();
        n->value = a->value;
        int64_t m = a->value.rows(), c = a->value.cols();
        for (int64_t i = 0; i < m; i++)
            for (int64_t j = 0; j < c; j++) n->value[i * c + j] *= r->value[j];
        finish(n, {a, r}, [this, n, a, r, m, c]() {
            if (a->requiresGrad) {
                Tensor<S>& g = grad_of(a);
                for (int64_t i = 0; i < m; i++)
                    for (int64_t j = 0; j < c; j++) g[i * c + j] += n->grad[i * c + j] * r->value[j];
            }
            if (r->requiresGrad) {
                Tensor<S>& g = grad_of(r);
                for (int64_t i = 0; i < m; i++)
                    for (int64_t j = 0; j < c; j++) g[j] += n->grad[i * c + j] * a->value[i * c + j];
            }
        });
        return n;
    }

    // x * (1 + scale) + shift, scale/shift [1,n] (adaLN modulation)
    Node<S>* modulate(Node<S>* x, Node<S>* shift, Node<S>* sc) {
        if (shift->value.cols() != x->value.cols() || sc->value.cols() != x->value.cols())
            fail(ErrorKind::Shape, "modulate: vector mismatch");
        Node<S>* n = alloc();
        n->value = x->value;
        int64_t m = x->value.rows(), c = x->value.cols();
        for (int64_t i = 0; i < m; i++)
            for (int64_t j = 0; j < c; j++)
                n->value[i * c + j] = x->value[i * c + j] * (S(1) + sc->value[j]) + shift->value[j];
        finish(n, {x, shift, sc}, [this, n, x, shift, sc, m, c]() {
            if (x->requiresGrad) {
                Tensor<S>& g = grad_of(x);
                for (int64_t i = 0; i < m; i++)
                    for (int64_t j = 0; j < c; j++) g[i * c + j] += n->grad[i * c + j] * (S(1) + sc->value[j]);
            }
            if (shift->requiresGrad) {
                Tensor<S>& g = grad_of(shift);
                for (int64_t i = 0; i < m; i++)
                    for (int64_t j = 0; j < c; j++) g[j] += n->grad[i * c + j];
            }
            if (sc->requiresGrad) {
                Tensor<S>& g = grad_of(sc);
                for (int64_t i = 0; i < m; i++)
                    for (int64_t j = 0; j < c; j++) g[j] += n->grad[i * c + j] * x->value[i * c + j];
            }
        });
        return n;
    }

    Node<S>* gelu(Node<S>* a) {
        Node<S>* n = alloc();
        n->value = a->value;
        for (auto& v : n->value.data) {
            double x = (double)v;
            v = (S)(x * 0.5 * (1.0 + std::erf(x * 0.7071067811865475244)));
        }
        check_finite(n->value, "gelu");
        finish(n, {a}, [this, n, a]() {
            if (!a->requiresGrad) return;
            Tensor<S>& g = grad_of(a);
            for (int64_t i = 0; i < g.numel(); i++) {
                double x = (double)a->value[i];
                double phi = std::exp(-0.5 * x * x) * 0.3989422804014326779;
                double Phi = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
                g[i] += (S)((double)n->grad[i] * (Phi + x * phi));
            }
        });
        return n;
    }

    Node<S>* softmax_rows(Node<S>* a) {
        Node<S>* n = alloc();
        n->value = a->value;
        int64_t m = a->value.rows(), c = a->value.cols();
        for (int64_t i = 0; i < m; i++) {
            S* row = n->value.data.data() + i * c;
            S mx = row[0];
            for (int64_t j = 1; j < c; j++) mx = std::max(mx, row[j]);
            double sum = 0;
            for (int64_t j = 0; j < c; j++) {
                row[j] = (S)std::exp((double)(row[j] - mx));
                sum += row[j];
            }
            for (int64_t j = 0; j < c; j++) row[j] = (S)(row[j] / sum);
        }
        check_finite(n->value, "softmax");
        finish(n, {a}, [this, n, a, m, c]() {
            if (!a->requiresGrad) return;
            Tensor<S>& g = grad_of(a);
            for (int64_t i = 0; i < m; i++) {
                const S* y = n->value.data.data() + i * c;
                const S* dy = n->grad.data.data() + i * c;
                double dot = 0;
                for (int64_t j = 0; j < c; j++) dot += (double)dy[j] * y[j];
                for (int64_t j = 0; j < c; j++) g[i * c + j] += (S)(((double)dy[j] - dot) * y[j]);
            }
        });
        return n;
    }

    // per-row zero mean, unit variance (biased), no affine
    Node<S>* layer_norm_rows(Node<S>* a, double eps = 1e-5) {
        Node<S>* n = alloc();
        int64_t m = a->value.rows(), c = a->value.cols();
        n->value = Tensor<S>({m, c});
        Tensor<S> istdCache({m, 1});
        for (int64_t i = 0; i < m; i++) {
            const S* x = a->value.data.data() + i * c;
            double mu = 0;
            for (int64_t j = 0; j < c; j++) mu += x[j];
            mu /= c;
            double var = 0;
            for (int64_t j = 0; j < c; j++) var += ((double)x[j] - mu) * ((double)x[j] - mu);
            var /= c;
            double istd = 1.0 / std::sqrt(var + eps);
            istdCache[i] = (S)istd;
            for (int64_t j = 0; j < c; j++) n->value[i * c + j] = (S)(((double)x[j] - mu) * istd);
        }
        check_finite(n->value, "layer_norm");
        finish(n, {a}, [this, n, a, istdCache = std::move(istdCache), m, c]() {
            if (!a->requiresGrad) return;
            Tensor<S>& g = grad_of(a);
            for (int64_t i = 0; i < m; i++) {
                const S* y = n->value.data.data() + i * c;
                const S* dy = n->grad.data.data() + i * c;
                double meanDy = 0, meanDyY = 0;
                for (int64_t j = 0; j < c; j++) {
                    meanDy += dy[j];
                    meanDyY += (double)dy[j] * y[j];
                }
                meanDy /= c;
                meanDyY /= c;
                double istd = istdCache[i];
                for (int64_t j = 0; j < c; j++)
                    g[i * c + j] += (S)(istd * ((double)dy[j] - meanDy - (double)y[j] * meanDyY));
            }
        });
        return n;
    }

    Node<S>* transpose(Node<S>* a) {
        Node<S>* n = alloc();
        n->value = Tensor<S>({a->value.cols(), a->value.rows()});
        mat(n->value) = mat(a->value).transpose();
        finish(n, {a}, [this, n, a]() {
            if (a->requiresGrad) mat(grad_of(a)) += mat(n->grad).transpose();
        });
        return n;
    }

    Node<S>* slice_cols(Node<S>* a, int64_t c0, int64_t w) {
        if (c0 < 0 || c0 + w > a->value.cols()) fail(ErrorKind::Shape, "slice_cols: range out of bounds");
        Node<S>* n = alloc();
        int64_t m = a->value.rows(), c = a->value.cols();
        n->value = Tensor<S>({m, w});
        for (int64_t i = 0; i < m; i++)
            for (int64_t j = 0; j < w; j++) n->value[i * w + j] = a->value[i * c + c0 + j];
        finish(n, {a}, [this, n, a, c0, w, m, c]() {
            if (!a->requiresGrad) return;
            Tensor<S>& g = grad_of(a);
            for (int64_t i = 0; i < m; i++)
                for (int64_t j = 0; j < w; j++) g[i * c + c0 + j] += n->grad[i * w + j];
        });
        return n;
    }

    Node<S>* concat_cols(const std::vector<Node<S>*>& parts) {
        if (parts.empty()) fail(ErrorKind::Shape, "concat_cols: empty");
        int64_t m = parts[0]->value.rows(), total = 0;
        for (auto* p : parts) {
            if (p->value.rows() != m) fail(ErrorKind::Shape, "concat_cols: row mismatch");
            total += p->value.cols();
        }
        Node<S>* n = alloc();
        n->value = Tensor<S>({m, total});
        int64_t off = 0;
        for (auto* p : parts) {
            int64_t w = p->value.cols();
            for (int64_t i = 0; i < m; i++)
                for (int64_t j = 0; j < w; j++) n->value[i * total + off + j] = p->value[i * w + j];
            off += w;
        }
        finish(n, parts, [this, n, parts, m, total]() {
            int64_t off2 = 0;
            for (auto* p : parts) {
                int64_t w = p->value.cols();
                if (p->requiresGrad) {
                    Tensor<S>& g = grad_of(p);
                    for (int64_t i = 0; i < m; i++)
                        for (int64_t j = 0; j < w; j++) g[i * w + j] += n->grad[i * total + off2 + j];
                }
                off2 += w;
            }
        });
        return n;
    }

    Node<S>* concat_rows(const std::vector<Node<S>*>& parts) {
        if (parts.empty()) fail(ErrorKind::Shape, "concat_rows: empty");
        int64_t c = parts[0]->value.cols(), total = 0;
        for (auto* p : parts) {
            if (p->value.cols() != c) fail(ErrorKind::Shape, "concat_rows: col mismatch");
            total += p->value.rows();
        }
        Node<S>* n = alloc();
        n->value = Tensor<S>({total, c});
        int64_t off = 0;
        for (auto* p : parts) {
            int64_t sz = p->value.numel();
            std::copy(p->value.data.begin(), p->value.data.end(), n->value.data.begin() + off);
            off += sz;
        }
        finish(n, parts, [this, n, parts]() {
            int64_t off2 = 0;
            for (auto* p : parts) {
                int64_t sz = p->value.numel();
                if (p->requiresGrad) {
                    Tensor<S>& g = grad_of(p);
                    for (int64_t i = 0; i < sz; i++) g[i] += n->grad[off2 + i];
                }
                off2 += sz;
            }
        });
        return n;
    }

    Node<S>* row_mean(Node<S>* a) {
        Node<S>* n = alloc();
        int64_t m = a->value.rows(), c = a->value.cols();
        n->value = Tensor<S>({1, c});
        for (int64_t i = 0; i < m; i++)
            for (int64_t j = 0; j < c; j++) n->value[j] += a->value[i * c + j];
        for (int64_t j = 0; j < c; j++) n->value[j] = (S)(n->value[j] / (double)m);
        finish(n, {a}, [this, n, a, m, c]() {
            if (!a->requiresGrad) return;
            Tensor<S>& g = grad_of(a);
            for (int64_t i = 0; i < m; i++)
                for (int64_t j = 0; j < c; j++) g[i * c + j] += (S)(n->grad[j] / (double)m);
        });
        return n;
    }

    Node<S>* embedding_row(Node<S>* table, int64_t idx) {
        if (idx < 0 || idx >= table->value.rows()) fail(ErrorKind::Vocab, "embedding_row: index out of vocab");
        Node<S>* n = alloc();
        int64_t c = table->value.cols();
        n->value = Tensor<S>({1, c});
        for (int64_t j = 0; j < c; j++) n->value[j] = table->value[idx * c + j];
        finish(n, {table}, [this, n, table, idx, c]() {
            if (!table->requiresGrad) return;
            Tensor<S>& g = grad_of(table);
            for (int64_t j = 0; j < c; j++) g[idx * c + j] += n->grad[j];
        });
        return n;
    }

    // mean((a-b)^2) over all elements -> [1,1]
    Node<S>* mse(Node<S>* a, Node<S>* b) {
        if (!a->value.same_shape(b->value)) fail(ErrorKind::Shape, "mse: shape mismatch");
        Node<S>* n = alloc();
        n->value = Tensor<S>({1, 1});
        int64_t N = a->value.numel();
        double acc = 0;
        for (int64_t i = 0; i < N; i++) {
            double d = (double)a->value[i] - (double)b->value[i];
            acc += d * d;
        }
        n->value[0] = (S)(acc / N);
        check_finite(n->value, "mse");
        finish(n, {a, b}, [this, n, a, b, N]() {
            double g0 = (double)n->grad[0] * 2.0 / N;
            if (a->requiresGrad) {
                Tensor<S>& g = grad_of(a);
                for (int64_t i = 0; i < N; i++) g[i] += (S)(g0 * ((double)a->value[i] - (double)b->value[i]));
            }
            if (b->requiresGrad) {
                Tensor<S>& g = grad_of(b);
                for (int64_t i = 0; i < N; i++) g[i] -= (S)(g0 * ((double)a->value[i] - (double)b->value[i]));
            }
        });
        return n;
    }

    Node<S>* mean_all(Node<S>* a) {
        Node<S>* n = alloc();
        n->value = Tensor<S>({1, 1});
        int64_t N = a->value.numel();
        double acc = 0;
        for (int64_t i = 0; i < N; i++) acc += a->value[i];
        n->value[0] = (S)(acc / N);
        finish(n, {a}, [this, n, a, N]() {
            if (!a->requiresGrad) return;
            Tensor<S>& g = grad_of(a);
            S d = (S)((double)n->grad[0] / N);
            for (int64_t i = 0; i < N; i++) g[i] += d;
        });
        return n;
    }

    // Runs the reverse sweep from `loss` (must be the last-created scalar).
    void backward(Node<S>* loss) {
        if (loss->value.numel() != 1) fail(ErrorKind::Shape, "backward: loss must be scalar");
        grad_of(loss)[0] = S(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node<S>& n = *it;
            if (n.gradTouched && n.backward) n.backward();
        }
    }

    Tensor<S>& grad_of(Node<S>* n) {
        if (n->grad.data.empty()) n->grad = Tensor<S>(n->value.shape);
        n->gradTouched = true;
        return n->grad;
    }

    size_t size() const { return nodes_.size(); }

private:
    std::deque<Node<S>> nodes_;

    Node<S>* alloc() {
        nodes_.emplace_back();
        return &nodes_.back();
    }

    void accumulate(Node<S>* p, const Tensor<S>& g) {
        Tensor<S>& dst = grad_of(p);
        for (int64_t i = 0; i < dst.numel(); i++) dst[i] += g[i];
    }

    void finish(Node<S>* n, const std::vector<Node<S>*>& parents, std::function<void()> bw) {
        for (auto* p : parents)
            if (p->requiresGrad) {
                n->requiresGrad = true;
                break;
            }
        if (n->requiresGrad) n->backward = std::move(bw);
    }

    static void check_finite(const Tensor<S>& t, const char* op) {
        for (S v : t.data)
            if (!std::isfinite((double)v))
                fail(ErrorKind::Numeric, std::string(op) + ": non-finite value produced");
    }
};

// Inference-only multi-head attention on plain tensors; the graph path in the
// model composes the same arithmetic from primitives.
template <typename S>
Tensor<S> multi_head_attention(const Tensor<S>& Q, const Tensor<S>& K, const Tensor<S>& V, int heads) {
    if (Q.shape.size() != 2 || K.shape.size() != 2 || V.shape.size() != 2)
        fail(ErrorKind::Shape, "multi_head_attention: rank-2 inputs required");
    int64_t dim = Q.cols();
    if (dim % heads != 0) fail(ErrorKind::Shape, "multi_head_attention: dim not divisible by heads");
    if (K.rows() != V.rows() || K.cols() != dim || V.cols() != dim)
        fail(ErrorKind::Shape, "multi_head_attention: K/V mismatch");
    Graph<S> g;
    auto* q = g.leaf(Q, false);
    auto* k = g.leaf(K, false);
    auto* v = g.leaf(V, false);
    int64_t dh = dim / heads;
    double sc = 1.0 / std::sqrt((double)dh);
    std::vector<Node<S>*> outs;
    for (int h = 0; h < heads; h++) {
        auto* qh = g.slice_cols(q, h * dh, dh);
        auto* kh = g.slice_cols(k, h * dh, dh);
        auto* vh = g.slice_cols(v, h * dh, dh);
        auto* att = g.softmax_rows(g.scale(g.matmul(qh, g.transpose(kh)), sc));
        outs.push_back(g.matmul(att, vh));
    }
    return g.concat_cols(outs)->value;
}

// Inference-only layer norm with affine (eps = 1e-5 unless overridden).
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias, double eps = 1e-5) {
    if (gain.numel() != x.cols() || bias.numel() != x.cols())
        fail(ErrorKind::Shape, "layer_norm: gain/bias must match last dim");
    Graph<S> g;
    auto* n = g.layer_norm_rows(g.leaf(x, false), eps);
    Tensor<S> out = n->value;
    int64_t m = x.rows(), c = x.cols();
    for (int64_t i = 0; i < m; i++)
        for (int64_t j = 0; j < c; j++) out[i * c + j] = out[i * c + j] * gain[j] + bias[j];
    return out;
}

}  // namespace fashedit
