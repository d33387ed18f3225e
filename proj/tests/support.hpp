#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "musgen/rng.hpp"
#include "musgen/tensor.hpp"

namespace testsupport {

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline musgen::Tensor random_tensor(std::vector<int> shape, musgen::Rng& rng, bool requires_grad = true,
                                    double scale = 1.0) {
    std::vector<double> data(static_cast<size_t>(musgen::shape_numel(shape)));
    for (auto& v : data) v = scale * rng.normal();
    return musgen::Tensor::from(std::move(shape), std::move(data), requires_grad);
}

// Central-difference check of d(make_loss)/d(leaf) for every leaf entry.
// make_loss must rebuild the graph from the current leaf values.
inline double max_gradcheck_err(std::vector<musgen::Tensor>& leaves,
                                const std::function<musgen::Tensor()>& make_loss, double h = 1e-5) {
    for (auto& leaf : leaves) leaf.zero_grad();
    const musgen::Tensor loss = make_loss();
    musgen::backward(loss);

    double worst = 0.0;
    for (auto& leaf : leaves) {
        std::vector<double> analytic(leaf.numel(), 0.0);
        if (leaf.has_grad()) analytic.assign(leaf.grad().begin(), leaf.grad().end());
        auto data = leaf.mutable_data();
        for (size_t i = 0; i < data.size(); ++i) {
            const double orig = data[i];
            data[i] = orig + h;
            const double up = make_loss().value();
            data[i] = orig - h;
            const double dn = make_loss().value();
            data[i] = orig;
            const double fd = (up - dn) / (2.0 * h);
            worst = std::max(worst, rel_err(analytic[i], fd));
        }
    }
    return worst;
}

}  // namespace testsupport
