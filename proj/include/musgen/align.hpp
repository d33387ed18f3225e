#pragma once

#include <array>
#include <optional>
#include <vector>

#include "musgen/encoders.hpp"
#include "musgen/nn.hpp"

namespace musgen {

// Embedded condition triple; at least one modality must be present.
struct ConditionSet {
    std::optional<Embedding> image;
    std::optional<Embedding> story;
    std::optional<Embedding> caption;

    int count() const { return (image ? 1 : 0) + (story ? 1 : 0) + (caption ? 1 : 0); }
    void validate() const;  // throws ContractError when empty
};

struct MaskPattern {
    bool keep_image = true;
    bool keep_story = true;
    bool keep_caption = true;

    int count() const { return (keep_image ? 1 : 0) + (keep_story ? 1 : 0) + (keep_caption ? 1 : 0); }
    bool valid() const { return count() >= 1; }
    int index() const;  // position in all()
    bool operator==(const MaskPattern&) const = default;

    // The 7 valid patterns in a fixed enumeration order.
    static const std::array<MaskPattern, 7>& all();
};

// Uniform over the 7 valid patterns; never the all-false pattern.
MaskPattern sample_mask(Rng& rng);

ConditionSet apply_mask(const ConditionSet& full, const MaskPattern& m);

// Per-modality MLP adapters mapping condition embeddings into the music
// embedding space. Hidden width = hidden_mult * dim, SiLU activations,
// layer norm on hidden activations.
class AdapterStack {
  public:
    AdapterStack() = default;
    AdapterStack(int dim, int affine_layers, int hidden_mult, Rng& rng);

    int dim() const { return dim_; }
    const Mlp& adapter(Modality m) const;
    Mlp& adapter(Modality m);

    Tensor forward(Modality m, const Tensor& batch) const;
    std::vector<double> apply(Modality m, const std::vector<double>& e) const;

    std::vector<Parameter> all_params() const;

  private:
    int dim_ = 0;
    Mlp image_, story_, caption_;
};

// Strict mean of the present embeddings in the fixed modality order
// (image, story, caption).
std::vector<double> fuse_embeddings(const std::vector<const std::vector<double>*>& present);

// e_f = (1/n) sum_i MLP_i(e_i) over present modalities.
Embedding fuse(const ConditionSet& conds, const AdapterStack& adapters);

// Differentiable row-wise fusion: out[i] = mean of adapter-output rows whose
// modality is kept by masks[i].
Tensor fuse_rows(const Tensor& img, const Tensor& story, const Tensor& cap,
                 const std::vector<MaskPattern>& masks);

// || e_M - e_f ||^2, differentiable w.r.t. the adapter parameters.
Tensor alignment_loss_graph(const ConditionSet& conds, const Embedding& target,
                            const AdapterStack& adapters);
double alignment_loss(const ConditionSet& conds, const Embedding& target, const AdapterStack& adapters);

struct AlignmentSample {
    Embedding image, story, caption;  // full condition set
    Embedding music;                  // e_M target
};
using AlignmentDataset = std::vector<AlignmentSample>;

struct TrainOptions {
    AdamWConfig optim;
    int epochs = 50;
    int batch_size = 24;
    uint64_t seed = 0;
};

// Stage 1: per-sample random masking, minimize the batch-mean alignment
// loss with AdamW. Returns the per-epoch mean loss history.
std::vector<double> train_alignment(const AlignmentDataset& dataset, AdapterStack& adapters,
                                    const TrainOptions& opt);

// Mean || e_M - mean(e_M) ||^2 over the dataset: the constant-predictor
// reference the trained loss is compared against.
double mean_predictor_baseline(const AlignmentDataset& dataset);

}  // namespace musgen
