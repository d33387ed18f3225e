#pragma once

#include <string>
#include <vector>

#include "musgen/rng.hpp"
#include "musgen/tensor.hpp"

namespace musgen {

// Plain MLP over [B x d] batches: affine layers with SiLU on hidden
// activations, optional layer norm on hidden activations, linear output.
// This is the whole layer vocabulary the models here need.
class Mlp {
  public:
    Mlp() = default;
    // widths = {in, h0, h1, ..., out}; at least one affine layer.
    Mlp(std::string name, std::vector<int> widths, bool hidden_layer_norm, Rng& rng);

    Tensor forward(const Tensor& x) const;

    std::vector<Parameter>& params() { return params_; }
    const std::vector<Parameter>& params() const { return params_; }
    const std::vector<int>& widths() const { return widths_; }
    bool hidden_layer_norm() const { return ln_; }
    const std::string& name() const { return name_; }

    int input_dim() const { return widths_.front(); }
    int output_dim() const { return widths_.back(); }

  private:
    std::string name_;
    std::vector<int> widths_;
    bool ln_ = false;
    std::vector<Parameter> params_;
};

// Collects pointers so several models can share one optimizer step.
std::vector<Parameter>& append_params(std::vector<Parameter>& into, const std::vector<Parameter>& from);

}  // namespace musgen
