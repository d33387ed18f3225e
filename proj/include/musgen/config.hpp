#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "musgen/flowmatch.hpp"
#include "musgen/signal.hpp"
#include "musgen/tensor.hpp"

namespace musgen {

// One experiment configuration. JSON file values override the defaults
// below; command-line flags override the file (flag > file > default), and
// the MUSGEN_SEED environment variable overrides the seed everywhere.
struct RunConfig {
    uint64_t seed = 1234;
    int embed_dim = 512;
    int latent_dim = 32;

    SignalConfig signal;
    FlowConfig flow;

    AdamWConfig optim;       // lr 1e-4 for the three model stages
    int batch_size = 24;
    double autoencoder_lr = 1e-3;  // compressor pretraining is its own stage

    int autoencoder_epochs = 40;
    int align_epochs = 50;
    int gen_epochs = 250;
    int joint_epochs = 100;
    double lambda = 0.1;

    int adapter_layers = 4;
    int adapter_hidden_mult = 2;
    int vf_width = 256;
    int vf_hidden_layers = 4;
    int time_embed_dim = 64;
    int ae_hidden1 = 256;
    int ae_hidden2 = 128;

    int train_samples = 2048;
    int val_samples = 256;
    double clip_seconds = 1.0;

    double review_threshold = 0.3;
    double filter_threshold = 0.3;

    int ablation_epochs = 50;
    int ablation_eval_every = 50;
    int ablation_train_subset = 1024;
    int ablation_val_subset = 64;
    int ablation_seeds = 3;

    std::string corpus_dir = "corpus";
    std::string checkpoint_dir = "checkpoints";
    std::string report_dir = "reports";

    void validate() const;           // throws ConfigError
    uint64_t model_hash() const;     // hash over the shape-relevant fields
    nlohmann::json to_json() const;
};

RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);

// Applies the seed override from the environment, if set.
void apply_env_overrides(RunConfig& cfg);

extern const char kSeedEnvVar[];

}  // namespace musgen
