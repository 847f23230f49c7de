#include "trajdiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace trajdiff {

namespace {

// C[m,n] += A[m,p] * B[p,n]
void mm(const double* A, const double* B, double* C, int m, int p, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * p;
        double* c = C + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < p; ++k) {
            double av = a[k];
            const double* b = B + static_cast<std::size_t>(k) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m,n] += A[m,p] * B[n,p]^T
void mm_nt(const double* A, const double* B, double* C, int m, int p, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * p;
        for (int j = 0; j < n; ++j) {
            const double* b = B + static_cast<std::size_t>(j) * p;
            double s = 0.0;
            for (int k = 0; k < p; ++k) s += a[k] * b[k];
            C[static_cast<std::size_t>(i) * n + j] += s;
        }
    }
}

// C[p,n] += A[m,p]^T * B[m,n]
void mm_tn(const double* A, const double* B, double* C, int m, int p, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * p;
        const double* b = B + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < p; ++k) {
            double av = a[k];
            double* c = C + static_cast<std::size_t>(k) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

bool is_row_vector(const Tensor& t) {
    return t.ndim() == 1 || (t.ndim() == 2 && t.dim(0) == 1);
}

constexpr double kLayerNormEps = 1e-5;

double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

}  // namespace

// ---------------------------------------------------------------------------
// ParamStore

Tensor& ParamStore::create(const std::string& name, std::vector<int> shape) {
    if (entries_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
    ParamEntry e;
    e.value = Tensor(shape);
    e.grad = Tensor(shape);
    auto [it, ok] = entries_.emplace(name, std::move(e));
    (void)ok;
    return it->second.value;
}

ParamEntry& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("ParamStore: unknown name " + name);
    return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("ParamStore: unknown name " + name);
    return it->second;
}

bool ParamStore::contains(const std::string& name) const { return entries_.count(name) > 0; }

void ParamStore::zero_grads() {
    for (auto& [name, e] : entries_) e.grad.fill(0.0);
}

long ParamStore::scalar_count() const {
    long n = 0;
    for (const auto& [name, e] : entries_) n += e.value.size();
    return n;
}

// ---------------------------------------------------------------------------
// Graph

Graph::Graph(bool record_grads) : record_(record_grads) { nodes_.reserve(192); }

int Graph::push(Tensor value, BackFn backfn) {
    Node n;
    n.value = std::move(value);
    if (record_) n.backfn = std::move(backfn);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::grad_buf(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() && n.value.size() > 0) n.grad = Tensor(n.value.shape());
    return n.grad;
}

int Graph::constant(Tensor value) { return push(std::move(value), nullptr); }

int Graph::param(const ParamStore& store, const std::string& name) {
    const ParamEntry& e = store.at(name);
    int id = push(e.value, nullptr);
    if (record_) param_leaves_.emplace_back(id, name);
    return id;
}

int Graph::add(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.same_shape(tb)) {
        Tensor out = ta;
        for (int i = 0; i < out.size(); ++i) out[i] += tb[i];
        return push(std::move(out), [a, b](Graph& g, int self) {
            const Tensor& go = g.grad(self);
            Tensor& ga = g.grad_buf(a);
            Tensor& gb = g.grad_buf(b);
            for (int i = 0; i < go.size(); ++i) {
                ga[i] += go[i];
                gb[i] += go[i];
            }
        });
    }
    if (is_row_vector(tb) && ta.ndim() == 2 && ta.cols() == tb.cols()) {
        Tensor out = ta;
        int n = ta.rows(), d = ta.cols();
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < d; ++c) out.at(r, c) += tb[c];
        return push(std::move(out), [a, b, n, d](Graph& g, int self) {
            const Tensor& go = g.grad(self);
            Tensor& ga = g.grad_buf(a);
            Tensor& gb = g.grad_buf(b);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < d; ++c) {
                    double v = go.at(r, c);
                    ga.at(r, c) += v;
                    gb[c] += v;
                }
        });
    }
    throw std::invalid_argument("Graph::add: incompatible shapes " + ta.shape_str() + " vs " +
                                tb.shape_str());
}

int Graph::sub(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_same_shape(ta, tb, "Graph::sub");
    Tensor out = ta;
    for (int i = 0; i < out.size(); ++i) out[i] -= tb[i];
    return push(std::move(out), [a, b](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        Tensor& ga = g.grad_buf(a);
        Tensor& gb = g.grad_buf(b);
        for (int i = 0; i < go.size(); ++i) {
            ga[i] += go[i];
            gb[i] -= go[i];
        }
    });
}

int Graph::mul(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.same_shape(tb)) {
        Tensor out = ta;
        for (int i = 0; i < out.size(); ++i) out[i] *= tb[i];
        return push(std::move(out), [a, b](Graph& g, int self) {
            const Tensor& go = g.grad(self);
            const Tensor& va = g.value(a);
            const Tensor& vb = g.value(b);
            Tensor& ga = g.grad_buf(a);
            Tensor& gb = g.grad_buf(b);
            for (int i = 0; i < go.size(); ++i) {
                ga[i] += go[i] * vb[i];
                gb[i] += go[i] * va[i];
            }
        });
    }
    if (is_row_vector(tb) && ta.ndim() == 2 && ta.cols() == tb.cols()) {
        int n = ta.rows(), d = ta.cols();
        Tensor out = ta;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < d; ++c) out.at(r, c) *= tb[c];
        return push(std::move(out), [a, b, n, d](Graph& g, int self) {
            const Tensor& go = g.grad(self);
            const Tensor& va = g.value(a);
            const Tensor& vb = g.value(b);
            Tensor& ga = g.grad_buf(a);
            Tensor& gb = g.grad_buf(b);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < d; ++c) {
                    double v = go.at(r, c);
                    ga.at(r, c) += v * vb[c];
                    gb[c] += v * va.at(r, c);
                }
        });
    }
    throw std::invalid_argument("Graph::mul: incompatible shapes " + ta.shape_str() + " vs " +
                                tb.shape_str());
}

int Graph::scale(int a, double factor) {
    Tensor out = value(a);
    for (int i = 0; i < out.size(); ++i) out[i] *= factor;
    return push(std::move(out), [a, factor](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        Tensor& ga = g.grad_buf(a);
        for (int i = 0; i < go.size(); ++i) ga[i] += factor * go[i];
    });
}

int Graph::matmul(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.ndim() != 2 || tb.ndim() != 2 || ta.cols() != tb.rows())
        throw std::invalid_argument("Graph::matmul: incompatible shapes " + ta.shape_str() +
                                    " vs " + tb.shape_str());
    int m = ta.rows(), p = ta.cols(), n = tb.cols();
    Tensor out({m, n});
    mm(ta.data(), tb.data(), out.data(), m, p, n);
    return push(std::move(out), [a, b, m, p, n](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& va = g.value(a);
        const Tensor& vb = g.value(b);
        mm_nt(go.data(), vb.data(), g.grad_buf(a).data(), m, n, p);  // dA = dC * B^T
        mm_tn(va.data(), go.data(), g.grad_buf(b).data(), m, p, n);  // dB = A^T * dC
    });
}

int Graph::linear(int x, int w, int b) {
    const Tensor& tx = value(x);
    const Tensor& tw = value(w);
    const Tensor& tb = value(b);
    if (tx.ndim() != 2 || tw.ndim() != 2 || tx.cols() != tw.rows())
        throw std::invalid_argument("Graph::linear: incompatible shapes " + tx.shape_str() +
                                    " vs " + tw.shape_str());
    int n = tx.rows(), in = tx.cols(), out_d = tw.cols();
    if (!is_row_vector(tb) || tb.cols() != out_d)
        throw std::invalid_argument("Graph::linear: bias shape " + tb.shape_str() +
                                    " does not match output width");
    Tensor out({n, out_d});
    mm(tx.data(), tw.data(), out.data(), n, in, out_d);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < out_d; ++c) out.at(r, c) += tb[c];
    return push(std::move(out), [x, w, b, n, in, out_d](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& vx = g.value(x);
        const Tensor& vw = g.value(w);
        mm_nt(go.data(), vw.data(), g.grad_buf(x).data(), n, out_d, in);
        mm_tn(vx.data(), go.data(), g.grad_buf(w).data(), n, in, out_d);
        Tensor& gb = g.grad_buf(b);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < out_d; ++c) gb[c] += go.at(r, c);
    });
}

int Graph::sigmoid(int a) {
    Tensor out = value(a);
    for (int i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    return push(std::move(out), [a](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& vo = g.value(self);
        Tensor& ga = g.grad_buf(a);
        for (int i = 0; i < go.size(); ++i) ga[i] += go[i] * vo[i] * (1.0 - vo[i]);
    });
}

int Graph::relu(int a) {
    Tensor out = value(a);
    for (int i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return push(std::move(out), [a](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& va = g.value(a);
        Tensor& ga = g.grad_buf(a);
        for (int i = 0; i < go.size(); ++i)
            if (va[i] > 0.0) ga[i] += go[i];
    });
}

int Graph::gelu(int a) {
    Tensor out = value(a);
    for (int i = 0; i < out.size(); ++i) out[i] = out[i] * std_normal_cdf(out[i]);
    return push(std::move(out), [a](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& va = g.value(a);
        Tensor& ga = g.grad_buf(a);
        for (int i = 0; i < go.size(); ++i) {
            double x = va[i];
            ga[i] += go[i] * (std_normal_cdf(x) + x * std_normal_pdf(x));
        }
    });
}

int Graph::layer_norm(int x, int gain, int bias) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gain);
    const Tensor& tb = value(bias);
    if (tx.ndim() != 2)
        throw std::invalid_argument("Graph::layer_norm: expected 2-D input, got " + tx.shape_str());
    int n = tx.rows(), d = tx.cols();
    if (!is_row_vector(tg) || tg.cols() != d || !is_row_vector(tb) || tb.cols() != d)
        throw std::invalid_argument("Graph::layer_norm: gain/bias width mismatch");

    Tensor normed({n, d});
    Tensor inv_std({n});
    Tensor out({n, d});
    for (int r = 0; r < n; ++r) {
        double mean = 0.0;
        for (int c = 0; c < d; ++c) mean += tx.at(r, c);
        mean /= d;
        double var = 0.0;
        for (int c = 0; c < d; ++c) {
            double dv = tx.at(r, c) - mean;
            var += dv * dv;
        }
        var /= d;
        double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[r] = inv;
        for (int c = 0; c < d; ++c) {
            double xh = (tx.at(r, c) - mean) * inv;
            normed.at(r, c) = xh;
            out.at(r, c) = xh * tg[c] + tb[c];
        }
    }
    return push(std::move(out), [x, gain, bias, n, d, normed = std::move(normed),
                                 inv_std = std::move(inv_std)](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& tg = g.value(gain);
        Tensor& gx = g.grad_buf(x);
        Tensor& gg = g.grad_buf(gain);
        Tensor& gb = g.grad_buf(bias);
        for (int r = 0; r < n; ++r) {
            double mean_dxh = 0.0, mean_dxh_xh = 0.0;
            for (int c = 0; c < d; ++c) {
                double dxh = go.at(r, c) * tg[c];
                mean_dxh += dxh;
                mean_dxh_xh += dxh * normed.at(r, c);
            }
            mean_dxh /= d;
            mean_dxh_xh /= d;
            for (int c = 0; c < d; ++c) {
                double dxh = go.at(r, c) * tg[c];
                gx.at(r, c) += inv_std[r] * (dxh - mean_dxh - normed.at(r, c) * mean_dxh_xh);
                gg[c] += go.at(r, c) * normed.at(r, c);
                gb[c] += go.at(r, c);
            }
        }
    });
}

int Graph::softmax_attention(int q, int k, int v, int heads) {
    const Tensor& tq = value(q);
    const Tensor& tk = value(k);
    const Tensor& tv = value(v);
    if (tq.ndim() != 2 || !tq.same_shape(tk) || !tq.same_shape(tv))
        throw std::invalid_argument("Graph::softmax_attention: Q/K/V must share a 2-D shape");
    int T = tq.rows(), d = tq.cols();
    if (heads < 1 || d % heads != 0)
        throw std::invalid_argument("Graph::softmax_attention: model dim " + std::to_string(d) +
                                    " not divisible by heads " + std::to_string(heads));
    int dh = d / heads;
    double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    // Per-head softmax matrices are kept for the backward pass,
    // concatenated as [heads*T, T].
    Tensor attn({heads * T, T});
    Tensor out({T, d});
    for (int h = 0; h < heads; ++h) {
        int off = h * dh;
        double* A = attn.data() + static_cast<std::size_t>(h) * T * T;
        for (int i = 0; i < T; ++i) {
            double* arow = A + static_cast<std::size_t>(i) * T;
            double mx = -1e300;
            for (int j = 0; j < T; ++j) {
                double s = 0.0;
                const double* qi = tq.data() + static_cast<std::size_t>(i) * d + off;
                const double* kj = tk.data() + static_cast<std::size_t>(j) * d + off;
                for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
                arow[j] = s * inv_scale;
                mx = std::max(mx, arow[j]);
            }
            double denom = 0.0;
            for (int j = 0; j < T; ++j) {
                arow[j] = std::exp(arow[j] - mx);
                denom += arow[j];
            }
            for (int j = 0; j < T; ++j) arow[j] /= denom;
            double* orow = out.data() + static_cast<std::size_t>(i) * d + off;
            for (int j = 0; j < T; ++j) {
                double a = arow[j];
                const double* vj = tv.data() + static_cast<std::size_t>(j) * d + off;
                for (int c = 0; c < dh; ++c) orow[c] += a * vj[c];
            }
        }
    }
    return push(std::move(out),
                [q, k, v, heads, T, d, dh, inv_scale, attn = std::move(attn)](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& vq = g.value(q);
        const Tensor& vk = g.value(k);
        const Tensor& vv = g.value(v);
        Tensor& gq = g.grad_buf(q);
        Tensor& gk = g.grad_buf(k);
        Tensor& gv = g.grad_buf(v);
        std::vector<double> dA(static_cast<std::size_t>(T) * T);
        for (int h = 0; h < heads; ++h) {
            int off = h * dh;
            const double* A = attn.data() + static_cast<std::size_t>(h) * T * T;
            // dV_h += A^T dO_h ; dA = dO_h V_h^T
            for (int i = 0; i < T; ++i) {
                const double* doi = go.data() + static_cast<std::size_t>(i) * d + off;
                const double* arow = A + static_cast<std::size_t>(i) * T;
                for (int j = 0; j < T; ++j) {
                    const double* vj = vv.data() + static_cast<std::size_t>(j) * d + off;
                    double* gvj = gv.data() + static_cast<std::size_t>(j) * d + off;
                    double a = arow[j];
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c) {
                        gvj[c] += a * doi[c];
                        s += doi[c] * vj[c];
                    }
                    dA[static_cast<std::size_t>(i) * T + j] = s;
                }
            }
            // dS = A o (dA - rowdot); dQ += dS K / sqrt(dh); dK += dS^T Q / sqrt(dh)
            for (int i = 0; i < T; ++i) {
                const double* arow = A + static_cast<std::size_t>(i) * T;
                double* darow = dA.data() + static_cast<std::size_t>(i) * T;
                double rowdot = 0.0;
                for (int j = 0; j < T; ++j) rowdot += darow[j] * arow[j];
                const double* qi = vq.data() + static_cast<std::size_t>(i) * d + off;
                double* gqi = gq.data() + static_cast<std::size_t>(i) * d + off;
                for (int j = 0; j < T; ++j) {
                    double ds = arow[j] * (darow[j] - rowdot) * inv_scale;
                    const double* kj = vk.data() + static_cast<std::size_t>(j) * d + off;
                    double* gkj = gk.data() + static_cast<std::size_t>(j) * d + off;
                    for (int c = 0; c < dh; ++c) {
                        gqi[c] += ds * kj[c];
                        gkj[c] += ds * qi[c];
                    }
                }
            }
        }
    });
}

int Graph::concat(const std::vector<int>& parts) {
    if (parts.empty()) throw std::invalid_argument("Graph::concat: no inputs");
    int n = value(parts[0]).rows();
    int total = 0;
    for (int p : parts) {
        const Tensor& t = value(p);
        if (t.rows() != n)
            throw std::invalid_argument("Graph::concat: row count mismatch");
        total += t.cols();
    }
    Tensor out({n, total});
    int at = 0;
    for (int p : parts) {
        const Tensor& t = value(p);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < t.cols(); ++c) out.at(r, at + c) = t.ndim() == 1 ? t[c] : t.at(r, c);
        at += t.cols();
    }
    return push(std::move(out), [parts, n](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        int at = 0;
        for (int p : parts) {
            Tensor& gp = g.grad_buf(p);
            int w = g.value(p).cols();
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < w; ++c) {
                    double v = go.at(r, at + c);
                    if (gp.ndim() == 1)
                        gp[c] += v;
                    else
                        gp.at(r, c) += v;
                }
            at += w;
        }
    });
}

int Graph::sum(int a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (int i = 0; i < ta.size(); ++i) s += ta[i];
    return push(Tensor::from({1}, {s}), [a](Graph& g, int self) {
        double go = g.grad(self)[0];
        Tensor& ga = g.grad_buf(a);
        for (int i = 0; i < ga.size(); ++i) ga[i] += go;
    });
}

int Graph::mean_sq_error(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_same_shape(ta, tb, "Graph::mean_sq_error");
    if (ta.size() == 0) throw std::invalid_argument("Graph::mean_sq_error: empty tensors");
    double s = 0.0;
    for (int i = 0; i < ta.size(); ++i) {
        double d = ta[i] - tb[i];
        s += d * d;
    }
    s /= ta.size();
    return push(Tensor::from({1}, {s}), [a, b](Graph& g, int self) {
        double go = g.grad(self)[0];
        const Tensor& va = g.value(a);
        const Tensor& vb = g.value(b);
        Tensor& ga = g.grad_buf(a);
        Tensor& gb = g.grad_buf(b);
        double c = 2.0 * go / va.size();
        for (int i = 0; i < va.size(); ++i) {
            double d = c * (va[i] - vb[i]);
            ga[i] += d;
            gb[i] -= d;
        }
    });
}

void Graph::backward(int loss_id) {
    if (!record_) throw std::logic_error("Graph::backward: graph built with record_grads=false");
    if (loss_id < 0 || loss_id >= node_count()) throw std::out_of_range("Graph::backward: bad id");
    Tensor& seed = grad_buf(loss_id);
    for (int i = 0; i < seed.size(); ++i) seed[i] += 1.0;
    for (int u = loss_id; u >= 0; --u) {
        Node& n = nodes_[static_cast<std::size_t>(u)];
        if (n.backfn && !n.grad.empty()) n.backfn(*this, u);
    }
}

void Graph::add_param_grads_to(ParamStore& store, double scale) const {
    for (const auto& [id, name] : param_leaves_) {
        const Tensor& g = nodes_[static_cast<std::size_t>(id)].grad;
        if (g.empty()) continue;
        Tensor& dst = store.at(name).grad;
        for (int i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
    }
}

void Graph::add_param_grads_to(GradBuffer& buffer, double scale) const {
    for (const auto& [id, name] : param_leaves_) {
        const Tensor& g = nodes_[static_cast<std::size_t>(id)].grad;
        if (g.empty()) continue;
        auto it = buffer.find(name);
        if (it == buffer.end()) it = buffer.emplace(name, Tensor(g.shape())).first;
        Tensor& dst = it->second;
        for (int i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
    }
}

// ---------------------------------------------------------------------------

double finite_diff_check(const std::function<double(ParamStore&, bool with_grad)>& loss,
                         ParamStore& params, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be positive");
    params.zero_grads();
    loss(params, true);
    GradBuffer analytic;
    for (const auto& [name, e] : params) analytic[name] = e.grad;

    double max_err = 0.0;
    for (auto& [name, e] : params) {
        const Tensor& an = analytic[name];
        for (int i = 0; i < e.value.size(); ++i) {
            double orig = e.value[i];
            e.value[i] = orig + h;
            double up = loss(params, false);
            e.value[i] = orig - h;
            double down = loss(params, false);
            e.value[i] = orig;
            double fd = (up - down) / (2.0 * h);
            // The 1e-2 denominator floor makes a 1e-4 threshold on the
            // returned error equivalent to a 1e-6 absolute tolerance for
            // near-zero gradients, where central differences bottom out in
            // cancellation noise.
            double denom = std::max({std::abs(an[i]), std::abs(fd), 1e-2});
            max_err = std::max(max_err, std::abs(an[i] - fd) / denom);
        }
    }
    return max_err;
}

}  // namespace trajdiff
