#pragma once

#include <vector>

#include "musgen/nn.hpp"
#include "musgen/signal.hpp"

namespace musgen {

struct LatentCode {
    std::vector<double> vector;
    int source_frames = 0;
    int source_bins = 0;

    int dim() const { return static_cast<int>(vector.size()); }
};

struct LatentTrainConfig {
    int latent_dim = 32;
    int hidden1 = 256;
    int hidden2 = 128;
    AdamWConfig optim{.lr = 1e-3};
    int epochs = 40;
    int batch_size = 24;
    uint64_t seed = 0;
};

// Deterministic dense autoencoder over flattened mel frames, with
// per-dimension input normalization and a post-training affine latent
// whitening step. Stands in for the pretrained spectrogram compressor.
class AutoencoderModel {
  public:
    AutoencoderModel() = default;
    AutoencoderModel(int frames, int bins, const LatentTrainConfig& cfg, const SignalConfig& signal,
                     Rng& rng);

    LatentCode encode(const MelSpectrogram& mel) const;
    MelSpectrogram decode(const LatentCode& code) const;

    // Batch helpers used by the trainer and the flow pipeline.
    Tensor encode_batch(const Tensor& normalized_rows) const { return encoder_.forward(normalized_rows); }
    Tensor decode_batch(const Tensor& latent_rows) const { return decoder_.forward(latent_rows); }

    std::vector<double> normalize_row(const MelSpectrogram& mel) const;

    int input_dim() const { return frames_ * bins_; }
    int frames() const { return frames_; }
    int bins() const { return bins_; }
    int latent_dim() const { return latent_dim_; }
    const SignalConfig& signal() const { return signal_; }

    Mlp& encoder() { return encoder_; }
    Mlp& decoder() { return decoder_; }
    const Mlp& encoder() const { return encoder_; }
    const Mlp& decoder() const { return decoder_; }

    std::vector<double>& norm_mean() { return norm_mean_; }
    std::vector<double>& norm_std() { return norm_std_; }
    std::vector<double>& latent_mean() { return latent_mean_; }
    std::vector<double>& latent_std() { return latent_std_; }
    const std::vector<double>& norm_mean() const { return norm_mean_; }
    const std::vector<double>& norm_std() const { return norm_std_; }
    const std::vector<double>& latent_mean() const { return latent_mean_; }
    const std::vector<double>& latent_std() const { return latent_std_; }

    void set_norm_stats(std::vector<double> mean, std::vector<double> std_dev);
    void set_whitening(std::vector<double> mean, std::vector<double> std_dev);

  private:
    int frames_ = 0, bins_ = 0, latent_dim_ = 0;
    SignalConfig signal_;
    Mlp encoder_, decoder_;
    std::vector<double> norm_mean_, norm_std_;      // input dims
    std::vector<double> latent_mean_, latent_std_;  // whitening
};

struct AutoencoderTrainResult {
    AutoencoderModel model;
    std::vector<double> loss_history;  // per-epoch mean reconstruction MSE
};

AutoencoderTrainResult train_autoencoder(const std::vector<MelSpectrogram>& corpus,
                                         const LatentTrainConfig& cfg);

// Mean over clips of ||m - m_hat||^2 / ||m - corpus_mean||^2.
double roundtrip_relative_mse(const AutoencoderModel& model, const std::vector<MelSpectrogram>& mels);

}  // namespace musgen
