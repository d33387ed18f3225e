#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "musgen/align.hpp"
#include "musgen/latent.hpp"
#include "musgen/nn.hpp"

namespace musgen {

enum class Solver { euler, midpoint };
const char* to_string(Solver s);
Solver solver_from_string(const std::string& s);

struct FlowConfig {
    double sigma_min = 1e-4;
    Solver solver = Solver::euler;
    int steps = 50;

    void validate() const;  // throws ConfigError
};

// x_t = t*x1 + (1 - (1 - sigma_min)*t) * x0
std::vector<double> ot_point(std::span<const double> x0, std::span<const double> x1, double t,
                             double sigma_min);

// u = x1 - (1 - sigma_min)*x0, constant in t along the path.
std::vector<double> target_field(std::span<const double> x0, std::span<const double> x1,
                                 double sigma_min);

// 64-dim sinusoidal features of t in [0, 1].
std::vector<double> time_embedding(double t, int dim);

// v_theta(z, t, e_f): MLP over concat(z, time_embedding(t), e_f).
class VectorFieldNet {
  public:
    VectorFieldNet() = default;
    VectorFieldNet(int latent_dim, int cond_dim, int width, int hidden_layers, int time_dim, Rng& rng);

    int latent_dim() const { return latent_dim_; }
    int cond_dim() const { return cond_dim_; }
    int time_dim() const { return time_dim_; }
    int input_dim() const { return latent_dim_ + time_dim_ + cond_dim_; }

    // rows: concat(z, temb, cond) already assembled, [B x input_dim]
    Tensor forward(const Tensor& rows) const { return net_.forward(rows); }

    std::vector<double> velocity(std::span<const double> z, double t, std::span<const double> cond) const;

    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }
    std::vector<Parameter>& params() { return net_.params(); }

  private:
    int latent_dim_ = 0, cond_dim_ = 0, time_dim_ = 64;
    Mlp net_;
};

// One training item: latent target z1 plus the three adapter-space condition
// vectors that per-sample masking averages over, and the music embedding.
struct GenSample {
    std::vector<double> z1;
    std::vector<double> cond_image, cond_story, cond_caption;  // maskable condition vectors
    std::vector<double> music;                                 // e_M (alignment target)
};
using GenDataset = std::vector<GenSample>;

// Batch CFM loss: per item draw t ~ U[0,1] and z0 ~ N(0, I), evaluate the
// field at ot_point and regress onto target_field. Loss is the batch mean of
// per-sample squared norms. `cond` is [B x cond_dim] and may carry gradients.
Tensor cfm_loss_graph(const std::vector<std::span<const double>>& z1, const Tensor& cond,
                      const VectorFieldNet& net, const FlowConfig& cfg, Rng& rng);

// Same draws and reduction, but evaluates an arbitrary field callback;
// used to check the objective against stub fields and oracles.
using FieldFn =
    std::function<std::vector<double>(const std::vector<double>& x, double t, std::span<const double> cond)>;
double cfm_loss_with_field(const std::vector<std::span<const double>>& z1,
                           const std::vector<std::span<const double>>& cond, int latent_dim,
                           const FieldFn& field, const FlowConfig& cfg, Rng& rng);

// ODE integration from t=0 to t=1 with fixed step h = 1/steps.
std::vector<double> integrate(const std::function<std::vector<double>(const std::vector<double>&, double)>& field,
                              std::vector<double> z0, const FlowConfig& cfg);

// Draws z0 ~ N(0, I) from rng, then integrates the trained field.
LatentCode sample(std::span<const double> cond, const VectorFieldNet& net, const FlowConfig& cfg, Rng& rng);

// Integrates many samples in lockstep (one batched net evaluation per step).
// Row i uses rng.fork(i) for its z0 draw.
std::vector<std::vector<double>> sample_batch(const std::vector<std::vector<double>>& conds,
                                              const VectorFieldNet& net, const FlowConfig& cfg,
                                              const Rng& rng);

enum class ConditioningMode { aligned, raw_features, oracle_music_embedding };
const char* to_string(ConditioningMode m);

struct GenTrainOptions {
    TrainOptions base;
    ConditioningMode mode = ConditioningMode::aligned;
    // invoked after epochs 1-based divisible by eval_every (and after the
    // final epoch when eval_on_final), without consuming trainer randomness
    int eval_every = 0;
    bool eval_on_final = false;
    std::function<void(int epoch, const VectorFieldNet&)> eval_hook;
};

// Stage 2: adapters frozen; per-sample condition masking stays active. The
// maskable condition vectors are taken from the dataset as-is (the caller
// fills them per the conditioning mode).
std::vector<double> train_generation(const GenDataset& dataset, VectorFieldNet& net,
                                     const FlowConfig& cfg, const GenTrainOptions& opt);

struct JointHistory {
    std::vector<double> total, gen, align;
};

// Stage 3: adapters and field trained together on L_G + lambda * L_A.
// Raw per-modality embeddings are mapped through the adapters each step.
struct JointSample {
    std::vector<double> z1;
    Embedding image, story, caption, music;
};
using JointDataset = std::vector<JointSample>;

JointHistory train_joint(const JointDataset& dataset, VectorFieldNet& net, AdapterStack& adapters,
                         const FlowConfig& cfg, double lambda, const TrainOptions& opt);

// Brute-force marginal-field evaluation for finite targets; test oracle.
struct TargetSpec {
    struct Point {
        std::vector<double> x;
        double w = 1.0;
    };
    struct Gauss1D {
        double mean = 0.0;
        double std_dev = 1.0;
        double w = 1.0;
    };
    std::vector<Point> points;      // exact enumeration
    std::vector<Gauss1D> gaussians; // 1-D quadrature
};

std::vector<double> marginal_field_oracle(std::span<const double> x, double t, const TargetSpec& spec,
                                          double sigma_min);

}  // namespace musgen
