#include "musgen/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "musgen/errors.hpp"

namespace musgen {

namespace {

Eigen::MatrixXd to_eigen(const std::vector<double>& cov, int d) {
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = cov[static_cast<size_t>(i) * d + j];
    return m;
}

void check_dims(const GaussianStats& a, const GaussianStats& b, const char* what) {
    if (a.dim != b.dim)
        throw DimensionError(std::string(what) + ": dimension mismatch " + std::to_string(a.dim) + " vs " +
                             std::to_string(b.dim));
}

}  // namespace

GaussianStats fit_gaussian(const std::vector<std::vector<double>>& embeddings) {
    if (embeddings.size() < 2) throw InputError("fit_gaussian: need at least 2 samples");
    const int d = static_cast<int>(embeddings[0].size());
    GaussianStats g;
    g.dim = d;
    g.n = static_cast<int>(embeddings.size());
    g.mean.assign(static_cast<size_t>(d), 0.0);
    for (const auto& e : embeddings) {
        if (static_cast<int>(e.size()) != d) throw DimensionError("fit_gaussian: ragged embedding widths");
        for (int i = 0; i < d; ++i) g.mean[static_cast<size_t>(i)] += e[static_cast<size_t>(i)];
    }
    for (auto& v : g.mean) v /= static_cast<double>(g.n);
    g.cov.assign(static_cast<size_t>(d) * d, 0.0);
    for (const auto& e : embeddings)
        for (int i = 0; i < d; ++i) {
            const double ci = e[static_cast<size_t>(i)] - g.mean[static_cast<size_t>(i)];
            for (int j = 0; j < d; ++j)
                g.cov[static_cast<size_t>(i) * d + j] +=
                    ci * (e[static_cast<size_t>(j)] - g.mean[static_cast<size_t>(j)]);
        }
    for (auto& v : g.cov) v /= static_cast<double>(g.n - 1);
    return g;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    check_dims(a, b, "frechet_distance");
    const int d = a.dim;
    double mean_term = 0.0;
    for (int i = 0; i < d; ++i) {
        const double c = a.mean[static_cast<size_t>(i)] - b.mean[static_cast<size_t>(i)];
        mean_term += c * c;
    }
    const Eigen::MatrixXd sa = to_eigen(a.cov, d);
    const Eigen::MatrixXd sb = to_eigen(b.cov, d);

    // sqrt(Sa) via eigendecomposition, negative eigenvalues clamped at 0
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_a(sa);
    Eigen::VectorXd ev = es_a.eigenvalues();
    for (int i = 0; i < d; ++i) ev(i) = ev(i) > 0 ? std::sqrt(ev(i)) : 0.0;
    const Eigen::MatrixXd root_a = es_a.eigenvectors() * ev.asDiagonal() * es_a.eigenvectors().transpose();

    // tr sqrtm(Sa Sb) == tr sqrtm(root_a Sb root_a), the latter symmetric PSD
    const Eigen::MatrixXd inner = root_a * sb * root_a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_i(inner);
    double tr_cross = 0.0;
    for (int i = 0; i < d; ++i) {
        const double lambda = es_i.eigenvalues()(i);
        if (lambda > 0) tr_cross += std::sqrt(lambda);
    }
    // mathematically >= 0; eigensolver noise can leave a tiny negative
    return std::max(0.0, mean_term + sa.trace() + sb.trace() - 2.0 * tr_cross);
}

double gaussian_kl(const GaussianStats& a, const GaussianStats& b) {
    check_dims(a, b, "gaussian_kl");
    const int d = a.dim;
    constexpr double kRidge = 1e-6;

    const auto floored = [&](const GaussianStats& g) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(g.cov, d));
        Eigen::VectorXd ev = es.eigenvalues();
        for (int i = 0; i < d; ++i) ev(i) = std::max(ev(i), kRidge);
        return std::make_pair(es.eigenvectors(), ev);
    };
    const auto [ua, la] = floored(a);
    const auto [ub, lb] = floored(b);

    const Eigen::MatrixXd sa = ua * la.asDiagonal() * ua.transpose();
    Eigen::MatrixXd sb_inv = ub * lb.cwiseInverse().asDiagonal() * ub.transpose();

    double trace_term = (sb_inv * sa).trace();
    Eigen::VectorXd diff(d);
    for (int i = 0; i < d; ++i) diff(i) = b.mean[static_cast<size_t>(i)] - a.mean[static_cast<size_t>(i)];
    const double quad = diff.dot(sb_inv * diff);
    double logdet = 0.0;
    for (int i = 0; i < d; ++i) logdet += std::log(lb(i)) - std::log(la(i));
    return std::max(0.0, 0.5 * (trace_term + quad - d + logdet));
}

double condition_score(const std::vector<AudioClip>& generated,
                       const std::vector<std::vector<double>>& refs, const EncoderBackend& enc) {
    if (generated.size() != refs.size())
        throw InputError("condition_score: got " + std::to_string(generated.size()) + " clips vs " +
                         std::to_string(refs.size()) + " references");
    if (generated.empty()) throw InputError("condition_score: empty input");
    std::vector<double> scores(generated.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(generated.size()); ++i) {
        const Embedding e = enc.encode_music(generated[static_cast<size_t>(i)]);
        scores[static_cast<size_t>(i)] = cosine(e.vector, refs[static_cast<size_t>(i)]);
    }
    double acc = 0.0;
    for (double s : scores) acc += s;
    return acc / static_cast<double>(scores.size());
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "arm,epoch,frechet,kl,condition_score\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.arm << "," << r.epoch << "," << r.frechet << "," << r.kl << "," << r.condition_score << "\n";
    return os.str();
}

}  // namespace musgen
