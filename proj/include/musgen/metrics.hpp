#pragma once

#include <string>
#include <vector>

#include "musgen/encoders.hpp"
#include "musgen/signal.hpp"

namespace musgen {

struct GaussianStats {
    std::vector<double> mean;  // D
    std::vector<double> cov;   // D x D row-major, symmetric
    int dim = 0;
    int n = 0;
};

// Sample mean and unbiased covariance; requires n >= 2.
GaussianStats fit_gaussian(const std::vector<std::vector<double>>& embeddings);

// |mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}). The cross term is taken
// through sqrtm(sqrt(Sa) Sb sqrt(Sa)) with negative eigenvalues clamped at 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

// KL(N_a || N_b) in closed form. Both spectra are floored at the 1e-6 ridge
// before the formula, which keeps well-conditioned inputs untouched while
// making near-singular fits finite.
double gaussian_kl(const GaussianStats& a, const GaussianStats& b);

// Mean cosine between encode_music(generated_i) and refs_i.
double condition_score(const std::vector<AudioClip>& generated,
                       const std::vector<std::vector<double>>& refs, const EncoderBackend& enc);

struct AblationRow {
    std::string arm;
    int epoch = 0;
    double frechet = 0.0;
    double kl = 0.0;
    double condition_score = 0.0;
};

std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace musgen
