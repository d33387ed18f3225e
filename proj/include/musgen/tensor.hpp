#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace musgen {

// Dense f64 tensor with reverse-mode autodiff. Row-major storage.
// A Tensor is a shared handle onto a graph node; ops build new nodes whose
// backprop closures accumulate into their parents' grad buffers. Nodes that
// do not require grad carry no parents, so the tape stays linear in the
// number of differentiable ops.
class Tensor {
  public:
    struct Node {
        std::vector<int> shape;
        std::vector<double> data;
        bool requires_grad = false;
        std::vector<double> grad;  // empty until first touched
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backprop;

        int64_t numel() const { return static_cast<int64_t>(data.size()); }
        std::vector<double>& grad_buf();  // allocates zeros on demand
    };

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor from(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);
    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const;
    int64_t numel() const;
    std::span<const double> data() const;
    std::span<double> mutable_data();
    double value() const;  // scalar convenience
    double at(int64_t i) const;

    bool requires_grad() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    std::shared_ptr<Node> node() const { return node_; }

  private:
    std::shared_ptr<Node> node_;
};

std::string shape_str(const std::vector<int>& shape);
int64_t shape_numel(const std::vector<int>& shape);

// --- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// y[B x O] = x[B x I] * w[I x O] + b[O] broadcast over rows
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

// Elementwise; equal shapes or one scalar (numel == 1) operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor silu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor square(const Tensor& x);
Tensor scale(const Tensor& x, double c);

Tensor sum(const Tensor& x);       // scalar
Tensor mean_all(const Tensor& x);  // scalar
Tensor mse(const Tensor& pred, const Tensor& target);  // scalar

// Per-row normalization over the last dimension of a [B x D] tensor with
// learned gain/bias of shape [D].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Column-wise concatenation of [B x d_i] tensors.
Tensor concat_cols(const std::vector<Tensor>& parts);

void backward(const Tensor& loss);

bool all_finite(const Tensor& t);
bool all_finite(std::span<const double> v);

// --- parameters & optimizer -------------------------------------------------

struct Parameter {
    std::string name;
    Tensor tensor;  // requires_grad leaf
};

// Throws ContractError on duplicate names.
void check_unique_names(const std::vector<Parameter>& params);

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

class AdamW {
  public:
    AdamW() = default;
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

    // Decoupled decay first (p -= lr*wd*p), then the bias-corrected
    // adaptive update. Parameters with no grad buffer are treated as g = 0.
    void step(std::vector<Parameter>& params);
    static void zero_grad(std::vector<Parameter>& params);

    int64_t steps() const { return step_; }
    const AdamWConfig& config() const { return cfg_; }

  private:
    AdamWConfig cfg_;
    int64_t step_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace musgen
