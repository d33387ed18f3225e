#include "musgen/nn.hpp"

#include <cmath>

#include "musgen/errors.hpp"

namespace musgen {

Mlp::Mlp(std::string name, std::vector<int> widths, bool hidden_layer_norm, Rng& rng)
    : name_(std::move(name)), widths_(std::move(widths)), ln_(hidden_layer_norm) {
    if (widths_.size() < 2) throw ContractError("mlp " + name_ + ": needs at least input and output widths");
    for (size_t l = 0; l + 1 < widths_.size(); ++l) {
        const int fan_in = widths_[l];
        const int fan_out = widths_[l + 1];
        const double std_dev = std::sqrt(2.0 / fan_in);
        std::vector<double> w(static_cast<size_t>(fan_in) * fan_out);
        for (auto& v : w) v = std_dev * rng.normal();
        const std::string tag = name_ + ".l" + std::to_string(l);
        params_.push_back({tag + ".w", Tensor::from({fan_in, fan_out}, std::move(w), true)});
        params_.push_back({tag + ".b", Tensor::zeros({fan_out}, true)});
        const bool hidden = l + 2 < widths_.size();
        if (hidden && ln_) {
            params_.push_back({tag + ".ln_g", Tensor::full({fan_out}, 1.0, true)});
            params_.push_back({tag + ".ln_b", Tensor::zeros({fan_out}, true)});
        }
    }
    check_unique_names(params_);
}

Tensor Mlp::forward(const Tensor& x) const {
    if (x.shape().size() != 2 || x.shape()[1] != widths_.front())
        throw DimensionError("mlp " + name_ + ": input shape " + shape_str(x.shape()) +
                             " does not match width " + std::to_string(widths_.front()));
    Tensor h = x;
    size_t pi = 0;
    for (size_t l = 0; l + 1 < widths_.size(); ++l) {
        const Tensor& w = params_[pi].tensor;
        const Tensor& b = params_[pi + 1].tensor;
        pi += 2;
        h = affine(h, w, b);
        const bool hidden = l + 2 < widths_.size();
        if (hidden) {
            if (ln_) {
                h = layer_norm(h, params_[pi].tensor, params_[pi + 1].tensor);
                pi += 2;
            }
            h = silu(h);
        }
    }
    return h;
}

std::vector<Parameter>& append_params(std::vector<Parameter>& into, const std::vector<Parameter>& from) {
    for (const auto& p : from) into.push_back(p);
    return into;
}

}  // namespace musgen
