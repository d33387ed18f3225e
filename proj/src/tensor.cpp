#include "musgen/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "musgen/errors.hpp"
#include "musgen/kernels.hpp"

namespace musgen {

namespace {

using Node = Tensor::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(std::vector<int> shape, std::vector<double> data) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    return n;
}

// Attach parents/backprop only when gradients can flow.
void wire(const NodePtr& out, std::vector<NodePtr> parents, std::function<void(Node&)> fn) {
    bool need = false;
    for (const auto& p : parents)
        if (p->requires_grad) need = true;
    if (!need) return;
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backprop = std::move(fn);
}

}  // namespace

std::vector<double>& Node::grad_buf() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    for (int d : shape)
        if (d <= 0) throw DimensionError("tensor: non-positive dimension in " + shape_str(shape));
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw DimensionError("tensor: shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    auto n = make_node(std::move(shape), std::move(data));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
    std::vector<double> data(static_cast<size_t>(shape_numel(shape)), v);
    return from(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

const std::vector<int>& Tensor::shape() const {
    if (!node_) throw ContractError("tensor: undefined");
    return node_->shape;
}

int64_t Tensor::numel() const {
    if (!node_) throw ContractError("tensor: undefined");
    return node_->numel();
}

std::span<const double> Tensor::data() const {
    if (!node_) throw ContractError("tensor: undefined");
    return node_->data;
}

std::span<double> Tensor::mutable_data() {
    if (!node_) throw ContractError("tensor: undefined");
    return node_->data;
}

double Tensor::value() const {
    if (numel() != 1) throw ContractError("tensor: value() on non-scalar of shape " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(int64_t i) const { return data()[static_cast<size_t>(i)]; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw ContractError("tensor: no gradient present");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.clear();
}

// --- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
        throw DimensionError("matmul: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));
    const int m = sa[0], k = sa[1], n = sb[1];
    std::vector<double> out(static_cast<size_t>(m) * n);
    kernels::matmul_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
    auto node = make_node({m, n}, std::move(out));
    auto pa = a.node(), pb = b.node();
    wire(node, {pa, pb}, [pa, pb, m, k, n](Node& self) {
        // dA = dC * B^T ; dB = A^T * dC
        if (pa->requires_grad) {
            std::vector<double> da(static_cast<size_t>(m) * k);
            kernels::matmul_nt(self.grad_buf().data(), pb->data.data(), da.data(), m, n, k);
            auto& g = pa->grad_buf();
            for (size_t i = 0; i < g.size(); ++i) g[i] += da[i];
        }
        if (pb->requires_grad) {
            std::vector<double> db(static_cast<size_t>(k) * n);
            kernels::matmul_tn(pa->data.data(), self.grad_buf().data(), db.data(), k, m, n);
            auto& g = pb->grad_buf();
            for (size_t i = 0; i < g.size(); ++i) g[i] += db[i];
        }
    });
    return Tensor(node);
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    const auto& sx = x.shape();
    const auto& sw = w.shape();
    const auto& sb = b.shape();
    if (sx.size() != 2 || sw.size() != 2 || sx[1] != sw[0])
        throw DimensionError("affine: incompatible shapes " + shape_str(sx) + " x " + shape_str(sw));
    if (sb.size() != 1 || sb[0] != sw[1])
        throw DimensionError("affine: bias shape " + shape_str(sb) + " does not match output width " +
                             std::to_string(sw[1]));
    const int m = sx[0], k = sx[1], n = sw[1];
    std::vector<double> out(static_cast<size_t>(m) * n);
    kernels::matmul_nn(x.data().data(), w.data().data(), out.data(), m, k, n);
    const auto bias = b.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(i) * n + j] += bias[j];
    auto node = make_node({m, n}, std::move(out));
    auto px = x.node(), pw = w.node(), pb = b.node();
    wire(node, {px, pw, pb}, [px, pw, pb, m, k, n](Node& self) {
        const double* gout = self.grad_buf().data();
        if (px->requires_grad) {
            std::vector<double> dx(static_cast<size_t>(m) * k);
            kernels::matmul_nt(gout, pw->data.data(), dx.data(), m, n, k);
            auto& g = px->grad_buf();
            for (size_t i = 0; i < g.size(); ++i) g[i] += dx[i];
        }
        if (pw->requires_grad) {
            std::vector<double> dw(static_cast<size_t>(k) * n);
            kernels::matmul_tn(px->data.data(), gout, dw.data(), k, m, n);
            auto& g = pw->grad_buf();
            for (size_t i = 0; i < g.size(); ++i) g[i] += dw[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buf();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) g[j] += gout[static_cast<size_t>(i) * n + j];
        }
    });
    return Tensor(node);
}

namespace {

enum class BinOp { Add, Sub, Mul };

Tensor binary_ew(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
    const bool a_scalar = a.numel() == 1;
    const bool b_scalar = b.numel() == 1;
    if (!a_scalar && !b_scalar && a.shape() != b.shape())
        throw DimensionError(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    const auto& shape = a_scalar && !b_scalar ? b.shape() : a.shape();
    const int64_t n = shape_numel(shape);
    const auto da = a.data();
    const auto db = b.data();
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const double x = da[a_scalar ? 0 : i];
        const double y = db[b_scalar ? 0 : i];
        out[static_cast<size_t>(i)] = op == BinOp::Add ? x + y : op == BinOp::Sub ? x - y : x * y;
    }
    auto node = make_node(shape, std::move(out));
    auto pa = a.node(), pb = b.node();
    wire(node, {pa, pb}, [pa, pb, op, a_scalar, b_scalar, n](Node& self) {
        const double* g = self.grad_buf().data();
        if (pa->requires_grad) {
            auto& ga = pa->grad_buf();
            for (int64_t i = 0; i < n; ++i) {
                const double gi =
                    op == BinOp::Mul ? g[i] * pb->data[b_scalar ? 0 : static_cast<size_t>(i)] : g[i];
                ga[a_scalar ? 0 : static_cast<size_t>(i)] += gi;
            }
        }
        if (pb->requires_grad) {
            auto& gb = pb->grad_buf();
            for (int64_t i = 0; i < n; ++i) {
                double gi;
                switch (op) {
                    case BinOp::Add: gi = g[i]; break;
                    case BinOp::Sub: gi = -g[i]; break;
                    default: gi = g[i] * pa->data[a_scalar ? 0 : static_cast<size_t>(i)];
                }
                gb[b_scalar ? 0 : static_cast<size_t>(i)] += gi;
            }
        }
    });
    return Tensor(node);
}

Tensor unary_ew(const Tensor& x, double (*fwd)(double), double (*dfdx)(double), const char*) {
    const int64_t n = x.numel();
    const auto dx = x.data();
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fwd(dx[i]);
    auto node = make_node(x.shape(), std::move(out));
    auto px = x.node();
    wire(node, {px}, [px, dfdx, n](Node& self) {
        const double* g = self.grad_buf().data();
        auto& gx = px->grad_buf();
        for (int64_t i = 0; i < n; ++i) gx[static_cast<size_t>(i)] += g[i] * dfdx(px->data[static_cast<size_t>(i)]);
    });
    return Tensor(node);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_ew(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_ew(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_ew(a, b, BinOp::Mul, "mul"); }

Tensor silu(const Tensor& x) {
    return unary_ew(
        x, [](double v) { return v * sigmoid(v); },
        [](double v) {
            const double s = sigmoid(v);
            return s * (1.0 + v * (1.0 - s));
        },
        "silu");
}

Tensor tanh_op(const Tensor& x) {
    return unary_ew(
        x, [](double v) { return std::tanh(v); },
        [](double v) {
            const double t = std::tanh(v);
            return 1.0 - t * t;
        },
        "tanh");
}

Tensor square(const Tensor& x) {
    return unary_ew(
        x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; }, "square");
}

Tensor scale(const Tensor& x, double c) {
    const int64_t n = x.numel();
    const auto dx = x.data();
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = dx[i] * c;
    auto node = make_node(x.shape(), std::move(out));
    auto px = x.node();
    wire(node, {px}, [px, c, n](Node& self) {
        const double* g = self.grad_buf().data();
        auto& gx = px->grad_buf();
        for (int64_t i = 0; i < n; ++i) gx[static_cast<size_t>(i)] += g[i] * c;
    });
    return Tensor(node);
}

Tensor sum(const Tensor& x) {
    const auto dx = x.data();
    double acc = 0.0;
    for (double v : dx) acc += v;
    auto node = make_node({1}, {acc});
    auto px = x.node();
    wire(node, {px}, [px](Node& self) {
        const double g = self.grad_buf()[0];
        auto& gx = px->grad_buf();
        for (auto& v : gx) v += g;
    });
    return Tensor(node);
}

Tensor mean_all(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mse(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw DimensionError("mse: shape mismatch " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    const int64_t n = pred.numel();
    const auto p = pred.data();
    const auto t = target.data();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = p[i] - t[i];
        acc += d * d;
    }
    auto node = make_node({1}, {acc / static_cast<double>(n)});
    auto pp = pred.node(), pt = target.node();
    wire(node, {pp, pt}, [pp, pt, n](Node& self) {
        const double g = self.grad_buf()[0] * 2.0 / static_cast<double>(n);
        if (pp->requires_grad) {
            auto& gp = pp->grad_buf();
            for (int64_t i = 0; i < n; ++i)
                gp[static_cast<size_t>(i)] += g * (pp->data[static_cast<size_t>(i)] - pt->data[static_cast<size_t>(i)]);
        }
        if (pt->requires_grad) {
            auto& gt = pt->grad_buf();
            for (int64_t i = 0; i < n; ++i)
                gt[static_cast<size_t>(i)] -= g * (pp->data[static_cast<size_t>(i)] - pt->data[static_cast<size_t>(i)]);
        }
    });
    return Tensor(node);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const auto& sx = x.shape();
    if (sx.size() != 2) throw DimensionError("layer_norm: expected [B x D] input, got " + shape_str(sx));
    const int b = sx[0], d = sx[1];
    if (gain.shape() != std::vector<int>{d} || bias.shape() != std::vector<int>{d})
        throw DimensionError("layer_norm: gain/bias must have shape [" + std::to_string(d) + "]");
    const auto dx = x.data();
    const auto dg = gain.data();
    const auto db = bias.data();
    std::vector<double> out(static_cast<size_t>(b) * d);
    std::vector<double> xhat(static_cast<size_t>(b) * d);
    std::vector<double> inv_sigma(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i) {
        const double* row = dx.data() + static_cast<size_t>(i) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += row[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = row[j] - mu;
            var += c * c;
        }
        var /= d;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[static_cast<size_t>(i)] = is;
        for (int j = 0; j < d; ++j) {
            const double h = (row[j] - mu) * is;
            xhat[static_cast<size_t>(i) * d + j] = h;
            out[static_cast<size_t>(i) * d + j] = h * dg[j] + db[j];
        }
    }
    auto node = make_node({b, d}, std::move(out));
    auto px = x.node(), pg = gain.node(), pb = bias.node();
    wire(node, {px, pg, pb},
         [px, pg, pb, b, d, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Node& self) {
             const double* gout = self.grad_buf().data();
             for (int i = 0; i < b; ++i) {
                 const double* go = gout + static_cast<size_t>(i) * d;
                 const double* xh = xhat.data() + static_cast<size_t>(i) * d;
                 if (pg->requires_grad) {
                     auto& gg = pg->grad_buf();
                     for (int j = 0; j < d; ++j) gg[j] += go[j] * xh[j];
                 }
                 if (pb->requires_grad) {
                     auto& gb = pb->grad_buf();
                     for (int j = 0; j < d; ++j) gb[j] += go[j];
                 }
                 if (px->requires_grad) {
                     // dx = (1/sigma) * (gy*gamma - mean(gy*gamma) - xhat * mean(gy*gamma*xhat))
                     double m1 = 0.0, m2 = 0.0;
                     for (int j = 0; j < d; ++j) {
                         const double t = go[j] * pg->data[static_cast<size_t>(j)];
                         m1 += t;
                         m2 += t * xh[j];
                     }
                     m1 /= d;
                     m2 /= d;
                     auto& gx = px->grad_buf();
                     const double is = inv_sigma[static_cast<size_t>(i)];
                     for (int j = 0; j < d; ++j) {
                         const double t = go[j] * pg->data[static_cast<size_t>(j)];
                         gx[static_cast<size_t>(i) * d + j] += is * (t - m1 - xh[j] * m2);
                     }
                 }
             }
         });
    return Tensor(node);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const int b = parts[0].shape().size() == 2 ? parts[0].shape()[0] : -1;
    if (b < 0) throw DimensionError("concat_cols: expected [B x d] parts");
    int total = 0;
    for (const auto& p : parts) {
        if (p.shape().size() != 2 || p.shape()[0] != b)
            throw DimensionError("concat_cols: row mismatch, expected " + std::to_string(b) +
                                 " rows, got " + shape_str(p.shape()));
        total += p.shape()[1];
    }
    std::vector<double> out(static_cast<size_t>(b) * total);
    int off = 0;
    for (const auto& p : parts) {
        const int d = p.shape()[1];
        const auto src = p.data();
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < d; ++j)
                out[static_cast<size_t>(i) * total + off + j] = src[static_cast<size_t>(i) * d + j];
        off += d;
    }
    auto node = make_node({b, total}, std::move(out));
    std::vector<std::shared_ptr<Node>> pnodes;
    std::vector<int> widths;
    for (const auto& p : parts) {
        pnodes.push_back(p.node());
        widths.push_back(p.shape()[1]);
    }
    wire(node, pnodes, [pnodes, widths, b, total](Node& self) {
        const double* g = self.grad_buf().data();
        int off = 0;
        for (size_t k = 0; k < pnodes.size(); ++k) {
            const int d = widths[k];
            if (pnodes[k]->requires_grad) {
                auto& gp = pnodes[k]->grad_buf();
                for (int i = 0; i < b; ++i)
                    for (int j = 0; j < d; ++j)
                        gp[static_cast<size_t>(i) * d + j] += g[static_cast<size_t>(i) * total + off + j];
            }
            off += d;
        }
    });
    return Tensor(node);
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw ContractError("backward: undefined tensor");
    if (loss.numel() != 1)
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    // Topological order via iterative DFS over parents.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // Interior grads are scratch space for this pass; only leaves accumulate
    // across repeated backward calls.
    for (Node* n : order)
        if (n->backprop) n->grad.assign(n->data.size(), 0.0);
    loss.node()->grad_buf()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Tensor& t) { return t.defined() && all_finite(t.data()); }

void check_unique_names(const std::vector<Parameter>& params) {
    std::unordered_set<std::string> names;
    for (const auto& p : params)
        if (!names.insert(p.name).second)
            throw ContractError("duplicate parameter name: " + p.name);
}

void AdamW::step(std::vector<Parameter>& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].tensor.data().size(), 0.0);
            v_[i].assign(params[i].tensor.data().size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw ContractError("adamw: parameter count changed between steps");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].tensor.mutable_data();
        if (m_[i].size() != p.size())
            throw DimensionError("adamw: state size mismatch for parameter " + params[i].name);
        const bool has_g = params[i].tensor.has_grad();
        std::span<const double> g;
        if (has_g) g = params[i].tensor.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < p.size(); ++j) {
            const double gj = has_g ? g[j] : 0.0;
            p[j] -= cfg_.lr * cfg_.weight_decay * p[j];
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void AdamW::zero_grad(std::vector<Parameter>& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace musgen
