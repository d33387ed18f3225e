#include "musgen/flowmatch.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "musgen/errors.hpp"

namespace musgen {

const char* to_string(Solver s) { return s == Solver::euler ? "euler" : "midpoint"; }

Solver solver_from_string(const std::string& s) {
    if (s == "euler") return Solver::euler;
    if (s == "midpoint") return Solver::midpoint;
    throw ConfigError("unknown solver: " + s);
}

void FlowConfig::validate() const {
    if (steps < 1) throw ConfigError("flow: steps must be >= 1");
    if (!(sigma_min >= 0.0 && sigma_min <= 0.5)) throw ConfigError("flow: sigma_min must be in [0, 0.5]");
}

std::vector<double> ot_point(std::span<const double> x0, std::span<const double> x1, double t,
                             double sigma_min) {
    if (x0.size() != x1.size()) throw DimensionError("ot_point: x0/x1 length mismatch");
    if (!(t >= 0.0 && t <= 1.0)) throw InputError("ot_point: t must be in [0, 1], got " + std::to_string(t));
    std::vector<double> out(x0.size());
    const double keep = 1.0 - (1.0 - sigma_min) * t;
    for (size_t i = 0; i < out.size(); ++i) out[i] = t * x1[i] + keep * x0[i];
    return out;
}

std::vector<double> target_field(std::span<const double> x0, std::span<const double> x1,
                                 double sigma_min) {
    if (x0.size() != x1.size()) throw DimensionError("target_field: x0/x1 length mismatch");
    std::vector<double> out(x0.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x1[i] - (1.0 - sigma_min) * x0[i];
    return out;
}

std::vector<double> time_embedding(double t, int dim) {
    if (dim < 2 || dim % 2 != 0) throw ContractError("time_embedding: dim must be even and >= 2");
    std::vector<double> out(static_cast<size_t>(dim));
    const int pairs = dim / 2;
    for (int k = 0; k < pairs; ++k) {
        const double freq = std::pow(1000.0, static_cast<double>(k) / (pairs - 1));
        out[static_cast<size_t>(2 * k)] = std::sin(t * freq);
        out[static_cast<size_t>(2 * k + 1)] = std::cos(t * freq);
    }
    return out;
}

VectorFieldNet::VectorFieldNet(int latent_dim, int cond_dim, int width, int hidden_layers, int time_dim,
                               Rng& rng)
    : latent_dim_(latent_dim), cond_dim_(cond_dim), time_dim_(time_dim) {
    std::vector<int> widths;
    widths.push_back(latent_dim + time_dim + cond_dim);
    for (int i = 0; i < hidden_layers; ++i) widths.push_back(width);
    widths.push_back(latent_dim);
    net_ = Mlp("vfield", widths, false, rng);
}

std::vector<double> VectorFieldNet::velocity(std::span<const double> z, double t,
                                             std::span<const double> cond) const {
    if (static_cast<int>(z.size()) != latent_dim_ || static_cast<int>(cond.size()) != cond_dim_)
        throw DimensionError("vector field: input dims do not match net");
    std::vector<double> row;
    row.reserve(static_cast<size_t>(input_dim()));
    row.insert(row.end(), z.begin(), z.end());
    const auto temb = time_embedding(t, time_dim_);
    row.insert(row.end(), temb.begin(), temb.end());
    row.insert(row.end(), cond.begin(), cond.end());
    const Tensor out = net_.forward(Tensor::from({1, input_dim()}, std::move(row)));
    return {out.data().begin(), out.data().end()};
}

namespace {

struct CfmDraws {
    std::vector<double> t;        // per item
    std::vector<double> x_rows;   // [B x (dz + time_dim)] leaf part
    std::vector<double> targets;  // [B x dz]
};

// One shared draw routine so the graph/stub paths and the gen/joint trainers
// consume identical rng streams.
CfmDraws draw_cfm_batch(const std::vector<std::span<const double>>& z1, int latent_dim, int time_dim,
                        double sigma_min, Rng& rng) {
    const int b = static_cast<int>(z1.size());
    if (b == 0) throw InputError("cfm: empty batch");
    CfmDraws d;
    d.t.resize(static_cast<size_t>(b));
    d.x_rows.resize(static_cast<size_t>(b) * (latent_dim + time_dim));
    d.targets.resize(static_cast<size_t>(b) * latent_dim);
    std::vector<double> z0(static_cast<size_t>(latent_dim));
    for (int i = 0; i < b; ++i) {
        if (static_cast<int>(z1[static_cast<size_t>(i)].size()) != latent_dim)
            throw DimensionError("cfm: z1 length does not match latent dim");
        const double t = rng.uniform();
        d.t[static_cast<size_t>(i)] = t;
        for (int j = 0; j < latent_dim; ++j) z0[static_cast<size_t>(j)] = rng.normal();
        const auto xt = ot_point(z0, z1[static_cast<size_t>(i)], t, sigma_min);
        const auto u = target_field(z0, z1[static_cast<size_t>(i)], sigma_min);
        double* xrow = d.x_rows.data() + static_cast<size_t>(i) * (latent_dim + time_dim);
        std::copy(xt.begin(), xt.end(), xrow);
        const auto temb = time_embedding(t, time_dim);
        std::copy(temb.begin(), temb.end(), xrow + latent_dim);
        std::copy(u.begin(), u.end(), d.targets.begin() + static_cast<size_t>(i) * latent_dim);
    }
    return d;
}

}  // namespace

Tensor cfm_loss_graph(const std::vector<std::span<const double>>& z1, const Tensor& cond,
                      const VectorFieldNet& net, const FlowConfig& cfg, Rng& rng) {
    cfg.validate();
    const int b = static_cast<int>(z1.size());
    if (b == 0) throw InputError("cfm_loss: empty batch");
    if (cond.shape().size() != 2 || cond.shape()[0] != b || cond.shape()[1] != net.cond_dim())
        throw DimensionError("cfm_loss: cond shape " + shape_str(cond.shape()) + " does not match batch " +
                             std::to_string(b) + " x " + std::to_string(net.cond_dim()));
    const int dz = net.latent_dim();
    CfmDraws d = draw_cfm_batch(z1, dz, net.time_dim(), cfg.sigma_min, rng);

    const Tensor left = Tensor::from({b, dz + net.time_dim()}, std::move(d.x_rows));
    const Tensor rows = concat_cols({left, cond});
    const Tensor v = net.forward(rows);
    const Tensor u = Tensor::from({b, dz}, std::move(d.targets));
    // mse averages over B*dz; rescale to per-sample squared norms
    return scale(mse(v, u), static_cast<double>(dz));
}

double cfm_loss_with_field(const std::vector<std::span<const double>>& z1,
                           const std::vector<std::span<const double>>& cond, int latent_dim,
                           const FieldFn& field, const FlowConfig& cfg, Rng& rng) {
    cfg.validate();
    if (z1.empty()) throw InputError("cfm_loss: empty batch");
    if (cond.size() != z1.size()) throw DimensionError("cfm_loss: cond count mismatch");
    const int time_dim = 64;
    CfmDraws d = draw_cfm_batch(z1, latent_dim, time_dim, cfg.sigma_min, rng);
    double acc = 0.0;
    for (size_t i = 0; i < z1.size(); ++i) {
        std::vector<double> xt(static_cast<size_t>(latent_dim));
        const double* xrow = d.x_rows.data() + i * static_cast<size_t>(latent_dim + time_dim);
        std::copy(xrow, xrow + latent_dim, xt.begin());
        const auto v = field(xt, d.t[i], cond[i]);
        if (static_cast<int>(v.size()) != latent_dim) throw DimensionError("cfm_loss: field output dim mismatch");
        for (int j = 0; j < latent_dim; ++j) {
            const double diff = v[static_cast<size_t>(j)] - d.targets[i * static_cast<size_t>(latent_dim) + j];
            acc += diff * diff;
        }
    }
    return acc / static_cast<double>(z1.size());
}

std::vector<double> integrate(const std::function<std::vector<double>(const std::vector<double>&, double)>& field,
                              std::vector<double> z0, const FlowConfig& cfg) {
    cfg.validate();
    const double h = 1.0 / cfg.steps;
    std::vector<double> z = std::move(z0);
    for (int s = 0; s < cfg.steps; ++s) {
        const double t = h * s;
        const auto v = field(z, t);
        if (v.size() != z.size()) throw DimensionError("integrate: field output dim mismatch");
        if (cfg.solver == Solver::euler) {
            for (size_t i = 0; i < z.size(); ++i) z[i] += h * v[i];
        } else {
            std::vector<double> zmid(z.size());
            for (size_t i = 0; i < z.size(); ++i) zmid[i] = z[i] + 0.5 * h * v[i];
            const auto vmid = field(zmid, t + 0.5 * h);
            for (size_t i = 0; i < z.size(); ++i) z[i] += h * vmid[i];
        }
    }
    return z;
}

LatentCode sample(std::span<const double> cond, const VectorFieldNet& net, const FlowConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<double> z0(static_cast<size_t>(net.latent_dim()));
    for (auto& v : z0) v = rng.normal();
    std::vector<double> cvec(cond.begin(), cond.end());
    auto field = [&](const std::vector<double>& z, double t) { return net.velocity(z, t, cvec); };
    LatentCode code;
    code.vector = integrate(field, std::move(z0), cfg);
    return code;
}

std::vector<std::vector<double>> sample_batch(const std::vector<std::vector<double>>& conds,
                                              const VectorFieldNet& net, const FlowConfig& cfg,
                                              const Rng& rng) {
    cfg.validate();
    const int n = static_cast<int>(conds.size());
    const int dz = net.latent_dim();
    if (n == 0) return {};
    std::vector<double> state(static_cast<size_t>(n) * dz);
    for (int i = 0; i < n; ++i) {
        Rng item = rng.fork(static_cast<uint64_t>(i));
        for (int j = 0; j < dz; ++j) state[static_cast<size_t>(i) * dz + j] = item.normal();
    }
    const double h = 1.0 / cfg.steps;

    auto eval_rows = [&](const std::vector<double>& zs, double t) {
        std::vector<double> rows(static_cast<size_t>(n) * net.input_dim());
        const auto temb = time_embedding(t, net.time_dim());
        for (int i = 0; i < n; ++i) {
            double* r = rows.data() + static_cast<size_t>(i) * net.input_dim();
            std::copy(zs.begin() + static_cast<size_t>(i) * dz, zs.begin() + static_cast<size_t>(i + 1) * dz, r);
            std::copy(temb.begin(), temb.end(), r + dz);
            std::copy(conds[static_cast<size_t>(i)].begin(), conds[static_cast<size_t>(i)].end(),
                      r + dz + net.time_dim());
        }
        const Tensor v = net.forward(Tensor::from({n, net.input_dim()}, std::move(rows)));
        return std::vector<double>(v.data().begin(), v.data().end());
    };

    for (int s = 0; s < cfg.steps; ++s) {
        const double t = h * s;
        const auto v = eval_rows(state, t);
        if (cfg.solver == Solver::euler) {
            for (size_t i = 0; i < state.size(); ++i) state[i] += h * v[i];
        } else {
            std::vector<double> mid(state.size());
            for (size_t i = 0; i < state.size(); ++i) mid[i] = state[i] + 0.5 * h * v[i];
            const auto vmid = eval_rows(mid, t + 0.5 * h);
            for (size_t i = 0; i < state.size(); ++i) state[i] += h * vmid[i];
        }
    }

    std::vector<std::vector<double>> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<size_t>(i)].assign(state.begin() + static_cast<size_t>(i) * dz,
                                           state.begin() + static_cast<size_t>(i + 1) * dz);
    return out;
}

const char* to_string(ConditioningMode m) {
    switch (m) {
        case ConditioningMode::aligned: return "aligned";
        case ConditioningMode::raw_features: return "raw";
        case ConditioningMode::oracle_music_embedding: return "oracle";
    }
    return "?";
}

std::vector<double> train_generation(const GenDataset& dataset, VectorFieldNet& net,
                                     const FlowConfig& cfg, const GenTrainOptions& opt) {
    cfg.validate();
    if (dataset.empty()) throw InputError("train_generation: empty dataset");
    const int dz = net.latent_dim();
    const int cd = net.cond_dim();
    auto& params = net.params();
    AdamW optimizer(opt.base.optim);
    Rng rng(opt.base.seed);

    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> history;
    history.reserve(static_cast<size_t>(opt.base.epochs));
    for (int epoch = 0; epoch < opt.base.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opt.base.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(opt.base.batch_size));
            const int b = static_cast<int>(end - start);

            std::vector<MaskPattern> masks(static_cast<size_t>(b));
            for (auto& m : masks) m = sample_mask(rng);

            std::vector<std::span<const double>> z1(static_cast<size_t>(b));
            std::vector<double> cond_rows(static_cast<size_t>(b) * cd);
            for (int i = 0; i < b; ++i) {
                const auto& s = dataset[order[start + static_cast<size_t>(i)]];
                z1[static_cast<size_t>(i)] = s.z1;
                std::vector<const std::vector<double>*> present;
                if (masks[static_cast<size_t>(i)].keep_image) present.push_back(&s.cond_image);
                if (masks[static_cast<size_t>(i)].keep_story) present.push_back(&s.cond_story);
                if (masks[static_cast<size_t>(i)].keep_caption) present.push_back(&s.cond_caption);
                const auto ef = fuse_embeddings(present);
                std::copy(ef.begin(), ef.end(), cond_rows.begin() + static_cast<size_t>(i) * cd);
            }
            const Tensor cond = Tensor::from({b, cd}, std::move(cond_rows));
            const Tensor loss = cfm_loss_graph(z1, cond, net, cfg, rng);

            AdamW::zero_grad(params);
            backward(loss);
            optimizer.step(params);

            if (!std::isfinite(loss.value())) throw NumericError("train_generation: non-finite loss");
            epoch_loss += loss.value() * b;
            seen += static_cast<size_t>(b);
        }
        history.push_back(epoch_loss / static_cast<double>(seen));
        const int epoch1 = epoch + 1;
        if (opt.eval_hook &&
            ((opt.eval_every > 0 && epoch1 % opt.eval_every == 0) ||
             (opt.eval_on_final && epoch1 == opt.base.epochs)))
            opt.eval_hook(epoch1, net);
    }
    (void)dz;
    return history;
}

JointHistory train_joint(const JointDataset& dataset, VectorFieldNet& net, AdapterStack& adapters,
                         const FlowConfig& cfg, double lambda, const TrainOptions& opt) {
    cfg.validate();
    if (lambda < 0) throw InputError("train_joint: lambda must be >= 0");
    if (dataset.empty()) throw InputError("train_joint: empty dataset");
    const int d = adapters.dim();
    const int cd = net.cond_dim();
    if (cd != d) throw DimensionError("train_joint: net cond dim must equal adapter dim");

    std::vector<Parameter> params;
    append_params(params, net.params());
    auto ap = adapters.all_params();
    append_params(params, ap);
    AdamW optimizer(opt.optim);
    Rng rng(opt.seed);

    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    JointHistory history;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
        double e_total = 0.0, e_gen = 0.0, e_align = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opt.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(opt.batch_size));
            const int b = static_cast<int>(end - start);

            std::vector<MaskPattern> masks(static_cast<size_t>(b));
            for (auto& m : masks) m = sample_mask(rng);

            std::vector<std::span<const double>> z1(static_cast<size_t>(b));
            std::vector<double> xi(static_cast<size_t>(b) * d), xs(static_cast<size_t>(b) * d),
                xc(static_cast<size_t>(b) * d), xm(static_cast<size_t>(b) * d);
            for (int i = 0; i < b; ++i) {
                const auto& s = dataset[order[start + static_cast<size_t>(i)]];
                z1[static_cast<size_t>(i)] = s.z1;
                std::copy(s.image.vector.begin(), s.image.vector.end(), xi.begin() + static_cast<size_t>(i) * d);
                std::copy(s.story.vector.begin(), s.story.vector.end(), xs.begin() + static_cast<size_t>(i) * d);
                std::copy(s.caption.vector.begin(), s.caption.vector.end(),
                          xc.begin() + static_cast<size_t>(i) * d);
                std::copy(s.music.vector.begin(), s.music.vector.end(), xm.begin() + static_cast<size_t>(i) * d);
            }
            const Tensor ai = adapters.forward(Modality::image, Tensor::from({b, d}, std::move(xi)));
            const Tensor as = adapters.forward(Modality::story, Tensor::from({b, d}, std::move(xs)));
            const Tensor ac = adapters.forward(Modality::caption, Tensor::from({b, d}, std::move(xc)));
            const Tensor ef = fuse_rows(ai, as, ac, masks);
            const Tensor em = Tensor::from({b, d}, std::move(xm));
            const Tensor l_align = scale(mse(ef, em), static_cast<double>(d));
            const Tensor l_gen = cfm_loss_graph(z1, ef, net, cfg, rng);
            const Tensor loss = add(l_gen, scale(l_align, lambda));

            AdamW::zero_grad(params);
            backward(loss);
            optimizer.step(params);

            if (!std::isfinite(loss.value())) throw NumericError("train_joint: non-finite loss");
            e_total += loss.value() * b;
            e_gen += l_gen.value() * b;
            e_align += l_align.value() * b;
            seen += static_cast<size_t>(b);
        }
        history.total.push_back(e_total / static_cast<double>(seen));
        history.gen.push_back(e_gen / static_cast<double>(seen));
        history.align.push_back(e_align / static_cast<double>(seen));
    }
    return history;
}

std::vector<double> marginal_field_oracle(std::span<const double> x, double t, const TargetSpec& spec,
                                          double sigma_min) {
    if (!(t >= 0.0 && t <= 1.0)) throw InputError("marginal_field_oracle: t must be in [0, 1]");
    const double sigma_t = 1.0 - (1.0 - sigma_min) * t;
    if (sigma_t < 1e-12) throw InputError("marginal_field_oracle: sigma_t underflow at t=1 with sigma_min=0");

    if (!spec.points.empty() && !spec.gaussians.empty())
        throw InputError("marginal_field_oracle: target must be points or gaussians, not both");

    if (!spec.points.empty()) {
        const size_t dim = x.size();
        // softmax over log-weights for numerical stability
        std::vector<double> logw(spec.points.size());
        for (size_t j = 0; j < spec.points.size(); ++j) {
            const auto& p = spec.points[j];
            if (p.x.size() != dim) throw DimensionError("marginal_field_oracle: point dim mismatch");
            if (p.w <= 0) throw InputError("marginal_field_oracle: weights must be positive");
            double d2 = 0.0;
            for (size_t i = 0; i < dim; ++i) {
                const double c = x[i] - t * p.x[i];
                d2 += c * c;
            }
            logw[j] = std::log(p.w) - d2 / (2.0 * sigma_t * sigma_t);
        }
        const double mx = *std::max_element(logw.begin(), logw.end());
        double z = 0.0;
        for (auto& lw : logw) {
            lw = std::exp(lw - mx);
            z += lw;
        }
        std::vector<double> v(dim, 0.0);
        for (size_t j = 0; j < spec.points.size(); ++j) {
            const double w = logw[j] / z;
            for (size_t i = 0; i < dim; ++i)
                v[i] += w * (spec.points[j].x[i] - (1.0 - sigma_min) * x[i]) / sigma_t;
        }
        return v;
    }

    if (!spec.gaussians.empty()) {
        if (x.size() != 1) throw InputError("marginal_field_oracle: gaussian targets are 1-D");
        // composite Simpson quadrature over the mixture support
        double lo = 1e300, hi = -1e300;
        for (const auto& g : spec.gaussians) {
            if (g.std_dev <= 0 || g.w <= 0) throw InputError("marginal_field_oracle: bad gaussian component");
            lo = std::min(lo, g.mean - 8.0 * g.std_dev);
            hi = std::max(hi, g.mean + 8.0 * g.std_dev);
        }
        const int n = 4000;  // even
        const double h = (hi - lo) / n;
        auto q = [&](double x1) {
            double acc = 0.0;
            for (const auto& g : spec.gaussians) {
                const double c = (x1 - g.mean) / g.std_dev;
                acc += g.w * std::exp(-0.5 * c * c) / (g.std_dev * std::sqrt(2.0 * std::numbers::pi));
            }
            return acc;
        };
        const double xv = x[0];
        auto p_cond = [&](double x1) {
            const double c = (xv - t * x1) / sigma_t;
            return std::exp(-0.5 * c * c);
        };
        auto u_cond = [&](double x1) { return (x1 - (1.0 - sigma_min) * xv) / sigma_t; };
        double num = 0.0, den = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double x1 = lo + h * i;
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            const double f = w * q(x1) * p_cond(x1);
            num += f * u_cond(x1);
            den += f;
        }
        if (den <= 0) throw NumericError("marginal_field_oracle: vanishing density at query point");
        return {num / den};
    }

    throw InputError("marginal_field_oracle: empty target spec");
}

}  // namespace musgen
