#include "musgen/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "musgen/errors.hpp"
#include "musgen/rng.hpp"

namespace musgen {

const char kSeedEnvVar[] = "MUSGEN_SEED";

void RunConfig::validate() const {
    signal.validate();
    flow.validate();
    if (embed_dim < 8) throw ConfigError("config: embed_dim must be >= 8");
    if (latent_dim < 1) throw ConfigError("config: latent_dim must be >= 1");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (autoencoder_epochs < 1 || align_epochs < 1 || gen_epochs < 1 || joint_epochs < 1)
        throw ConfigError("config: stage epochs must be >= 1");
    if (lambda < 0) throw ConfigError("config: lambda must be >= 0");
    if (optim.lr <= 0 || autoencoder_lr <= 0) throw ConfigError("config: learning rates must be positive");
    if (train_samples < 1 || val_samples < 1) throw ConfigError("config: corpus sizes must be >= 1");
    if (clip_seconds <= 0) throw ConfigError("config: clip_seconds must be positive");
}

nlohmann::json RunConfig::to_json() const {
    return nlohmann::json{
        {"seed", seed},
        {"embed_dim", embed_dim},
        {"latent_dim", latent_dim},
        {"signal",
         {{"sample_rate", signal.sample_rate},
          {"n_fft", signal.n_fft},
          {"hop", signal.hop},
          {"win", signal.win},
          {"n_mels", signal.n_mels},
          {"fmin", signal.fmin},
          {"fmax", signal.fmax},
          {"log_floor", signal.log_floor}}},
        {"flow", {{"sigma_min", flow.sigma_min}, {"solver", to_string(flow.solver)}, {"steps", flow.steps}}},
        {"optim",
         {{"lr", optim.lr},
          {"beta1", optim.beta1},
          {"beta2", optim.beta2},
          {"eps", optim.eps},
          {"weight_decay", optim.weight_decay}}},
        {"batch_size", batch_size},
        {"autoencoder_lr", autoencoder_lr},
        {"stages",
         {{"autoencoder_epochs", autoencoder_epochs},
          {"align_epochs", align_epochs},
          {"gen_epochs", gen_epochs},
          {"joint_epochs", joint_epochs},
          {"lambda", lambda}}},
        {"net",
         {{"adapter_layers", adapter_layers},
          {"adapter_hidden_mult", adapter_hidden_mult},
          {"vf_width", vf_width},
          {"vf_hidden_layers", vf_hidden_layers},
          {"time_embed_dim", time_embed_dim},
          {"ae_hidden1", ae_hidden1},
          {"ae_hidden2", ae_hidden2}}},
        {"corpus",
         {{"train_samples", train_samples}, {"val_samples", val_samples}, {"clip_seconds", clip_seconds}}},
        {"agents", {{"review_threshold", review_threshold}, {"filter_threshold", filter_threshold}}},
        {"ablation",
         {{"epochs", ablation_epochs},
          {"eval_every", ablation_eval_every},
          {"train_subset", ablation_train_subset},
          {"val_subset", ablation_val_subset},
          {"seeds", ablation_seeds}}},
        {"paths",
         {{"corpus_dir", corpus_dir}, {"checkpoint_dir", checkpoint_dir}, {"report_dir", report_dir}}},
    };
}

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        maybe(j, "seed", c.seed);
        maybe(j, "embed_dim", c.embed_dim);
        maybe(j, "latent_dim", c.latent_dim);
        if (j.contains("signal")) {
            const auto& s = j.at("signal");
            maybe(s, "sample_rate", c.signal.sample_rate);
            maybe(s, "n_fft", c.signal.n_fft);
            maybe(s, "hop", c.signal.hop);
            maybe(s, "win", c.signal.win);
            maybe(s, "n_mels", c.signal.n_mels);
            maybe(s, "fmin", c.signal.fmin);
            maybe(s, "fmax", c.signal.fmax);
            maybe(s, "log_floor", c.signal.log_floor);
        }
        if (j.contains("flow")) {
            const auto& f = j.at("flow");
            maybe(f, "sigma_min", c.flow.sigma_min);
            maybe(f, "steps", c.flow.steps);
            if (f.contains("solver")) c.flow.solver = solver_from_string(f.at("solver").get<std::string>());
        }
        if (j.contains("optim")) {
            const auto& o = j.at("optim");
            maybe(o, "lr", c.optim.lr);
            maybe(o, "beta1", c.optim.beta1);
            maybe(o, "beta2", c.optim.beta2);
            maybe(o, "eps", c.optim.eps);
            maybe(o, "weight_decay", c.optim.weight_decay);
        }
        maybe(j, "batch_size", c.batch_size);
        maybe(j, "autoencoder_lr", c.autoencoder_lr);
        if (j.contains("stages")) {
            const auto& s = j.at("stages");
            maybe(s, "autoencoder_epochs", c.autoencoder_epochs);
            maybe(s, "align_epochs", c.align_epochs);
            maybe(s, "gen_epochs", c.gen_epochs);
            maybe(s, "joint_epochs", c.joint_epochs);
            maybe(s, "lambda", c.lambda);
        }
        if (j.contains("net")) {
            const auto& n = j.at("net");
            maybe(n, "adapter_layers", c.adapter_layers);
            maybe(n, "adapter_hidden_mult", c.adapter_hidden_mult);
            maybe(n, "vf_width", c.vf_width);
            maybe(n, "vf_hidden_layers", c.vf_hidden_layers);
            maybe(n, "time_embed_dim", c.time_embed_dim);
            maybe(n, "ae_hidden1", c.ae_hidden1);
            maybe(n, "ae_hidden2", c.ae_hidden2);
        }
        if (j.contains("corpus")) {
            const auto& s = j.at("corpus");
            maybe(s, "train_samples", c.train_samples);
            maybe(s, "val_samples", c.val_samples);
            maybe(s, "clip_seconds", c.clip_seconds);
        }
        if (j.contains("agents")) {
            const auto& a = j.at("agents");
            maybe(a, "review_threshold", c.review_threshold);
            maybe(a, "filter_threshold", c.filter_threshold);
        }
        if (j.contains("ablation")) {
            const auto& a = j.at("ablation");
            maybe(a, "epochs", c.ablation_epochs);
            maybe(a, "eval_every", c.ablation_eval_every);
            maybe(a, "train_subset", c.ablation_train_subset);
            maybe(a, "val_subset", c.ablation_val_subset);
            maybe(a, "seeds", c.ablation_seeds);
        }
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            maybe(p, "corpus_dir", c.corpus_dir);
            maybe(p, "checkpoint_dir", c.checkpoint_dir);
            maybe(p, "report_dir", c.report_dir);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    }
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("config: malformed JSON in " + path + ": " + ex.what());
    }
    return config_from_json(j);
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* s = std::getenv(kSeedEnvVar)) {
        try {
            cfg.seed = std::stoull(s);
        } catch (const std::exception&) {
            throw ConfigError(std::string("config: ") + kSeedEnvVar + " is not an integer: " + s);
        }
    }
}

uint64_t RunConfig::model_hash() const {
    // shape-relevant subset only: payload-compatible checkpoints keep the
    // same hash under pure path/epoch changes
    nlohmann::json j{{"embed_dim", embed_dim},
                     {"latent_dim", latent_dim},
                     {"n_mels", signal.n_mels},
                     {"n_fft", signal.n_fft},
                     {"hop", signal.hop},
                     {"win", signal.win},
                     {"sample_rate", signal.sample_rate},
                     {"adapter_layers", adapter_layers},
                     {"adapter_hidden_mult", adapter_hidden_mult},
                     {"vf_width", vf_width},
                     {"vf_hidden_layers", vf_hidden_layers},
                     {"time_embed_dim", time_embed_dim},
                     {"ae_hidden1", ae_hidden1},
                     {"ae_hidden2", ae_hidden2},
                     {"clip_seconds", clip_seconds}};
    return fnv1a64(j.dump());
}

}  // namespace musgen
