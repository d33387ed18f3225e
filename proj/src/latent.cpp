#include "musgen/latent.hpp"

#include <algorithm>
#include <cmath>

#include "musgen/errors.hpp"

namespace musgen {

AutoencoderModel::AutoencoderModel(int frames, int bins, const LatentTrainConfig& cfg,
                                   const SignalConfig& signal, Rng& rng)
    : frames_(frames), bins_(bins), latent_dim_(cfg.latent_dim), signal_(signal) {
    const int in = frames * bins;
    encoder_ = Mlp("ae.encoder", {in, cfg.hidden1, cfg.hidden2, cfg.latent_dim}, false, rng);
    decoder_ = Mlp("ae.decoder", {cfg.latent_dim, cfg.hidden2, cfg.hidden1, in}, false, rng);
    norm_mean_.assign(static_cast<size_t>(in), 0.0);
    norm_std_.assign(static_cast<size_t>(in), 1.0);
    latent_mean_.assign(static_cast<size_t>(cfg.latent_dim), 0.0);
    latent_std_.assign(static_cast<size_t>(cfg.latent_dim), 1.0);
}

void AutoencoderModel::set_norm_stats(std::vector<double> mean, std::vector<double> std_dev) {
    if (static_cast<int>(mean.size()) != input_dim() || std_dev.size() != mean.size())
        throw DimensionError("autoencoder: norm stats size mismatch");
    for (double s : std_dev)
        if (!(s > 0)) throw ContractError("autoencoder: norm std must be positive");
    norm_mean_ = std::move(mean);
    norm_std_ = std::move(std_dev);
}

void AutoencoderModel::set_whitening(std::vector<double> mean, std::vector<double> std_dev) {
    if (static_cast<int>(mean.size()) != latent_dim_ || std_dev.size() != mean.size())
        throw DimensionError("autoencoder: whitening size mismatch");
    for (double s : std_dev)
        if (!(s > 0)) throw ContractError("autoencoder: whitening std must be positive");
    latent_mean_ = std::move(mean);
    latent_std_ = std::move(std_dev);
}

std::vector<double> AutoencoderModel::normalize_row(const MelSpectrogram& mel) const {
    if (mel.frames != frames_ || mel.bins != bins_)
        throw DimensionError("autoencoder: mel shape " + std::to_string(mel.frames) + "x" +
                             std::to_string(mel.bins) + " does not match model input " +
                             std::to_string(frames_) + "x" + std::to_string(bins_));
    std::vector<double> row(static_cast<size_t>(input_dim()));
    for (int i = 0; i < input_dim(); ++i)
        row[static_cast<size_t>(i)] = (mel.values[static_cast<size_t>(i)] - norm_mean_[static_cast<size_t>(i)]) /
                                      norm_std_[static_cast<size_t>(i)];
    return row;
}

LatentCode AutoencoderModel::encode(const MelSpectrogram& mel) const {
    const Tensor z = encoder_.forward(Tensor::from({1, input_dim()}, normalize_row(mel)));
    LatentCode code;
    code.source_frames = mel.frames;
    code.source_bins = mel.bins;
    code.vector.resize(static_cast<size_t>(latent_dim_));
    for (int i = 0; i < latent_dim_; ++i)
        code.vector[static_cast<size_t>(i)] =
            (z.at(i) - latent_mean_[static_cast<size_t>(i)]) / latent_std_[static_cast<size_t>(i)];
    return code;
}

MelSpectrogram AutoencoderModel::decode(const LatentCode& code) const {
    if (code.dim() != latent_dim_)
        throw DimensionError("autoencoder: code length " + std::to_string(code.dim()) +
                             " does not match latent dim " + std::to_string(latent_dim_));
    std::vector<double> raw(static_cast<size_t>(latent_dim_));
    for (int i = 0; i < latent_dim_; ++i)
        raw[static_cast<size_t>(i)] = code.vector[static_cast<size_t>(i)] * latent_std_[static_cast<size_t>(i)] +
                                      latent_mean_[static_cast<size_t>(i)];
    const Tensor out = decoder_.forward(Tensor::from({1, latent_dim_}, std::move(raw)));
    MelSpectrogram mel;
    mel.frames = frames_;
    mel.bins = bins_;
    mel.config = signal_;
    mel.values.resize(static_cast<size_t>(input_dim()));
    for (int i = 0; i < input_dim(); ++i)
        mel.values[static_cast<size_t>(i)] = out.at(i) * norm_std_[static_cast<size_t>(i)] +
                                             norm_mean_[static_cast<size_t>(i)];
    return mel;
}

AutoencoderTrainResult train_autoencoder(const std::vector<MelSpectrogram>& corpus,
                                         const LatentTrainConfig& cfg) {
    if (corpus.empty()) throw InputError("train_autoencoder: empty corpus");
    const int frames = corpus[0].frames;
    const int bins = corpus[0].bins;
    for (const auto& m : corpus)
        if (m.frames != frames || m.bins != bins)
            throw InputError("train_autoencoder: corpus mels must share one shape");
    const int in = frames * bins;

    Rng rng(cfg.seed);
    AutoencoderModel model(frames, bins, cfg, corpus[0].config, rng);

    // per-dimension input statistics
    std::vector<double> mean(static_cast<size_t>(in), 0.0), var(static_cast<size_t>(in), 0.0);
    for (const auto& m : corpus)
        for (int i = 0; i < in; ++i) mean[static_cast<size_t>(i)] += m.values[static_cast<size_t>(i)];
    for (auto& v : mean) v /= static_cast<double>(corpus.size());
    for (const auto& m : corpus)
        for (int i = 0; i < in; ++i) {
            const double c = m.values[static_cast<size_t>(i)] - mean[static_cast<size_t>(i)];
            var[static_cast<size_t>(i)] += c * c;
        }
    std::vector<double> std_dev(static_cast<size_t>(in));
    for (int i = 0; i < in; ++i)
        std_dev[static_cast<size_t>(i)] =
            std::max(1e-3, std::sqrt(var[static_cast<size_t>(i)] / static_cast<double>(corpus.size())));
    model.set_norm_stats(std::move(mean), std::move(std_dev));

    std::vector<std::vector<double>> rows(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) rows[i] = model.normalize_row(corpus[i]);

    std::vector<Parameter> params;
    append_params(params, model.encoder().params());
    append_params(params, model.decoder().params());
    AdamW optimizer(cfg.optim);

    std::vector<size_t> order(corpus.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> history;
    history.reserve(static_cast<size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            const int b = static_cast<int>(end - start);
            std::vector<double> x(static_cast<size_t>(b) * in);
            for (int i = 0; i < b; ++i)
                std::copy(rows[order[start + static_cast<size_t>(i)]].begin(),
                          rows[order[start + static_cast<size_t>(i)]].end(),
                          x.begin() + static_cast<size_t>(i) * in);
            const Tensor input = Tensor::from({b, in}, std::move(x));
            const Tensor recon = model.decode_batch(model.encode_batch(input));
            const Tensor loss = mse(recon, input);

            AdamW::zero_grad(params);
            backward(loss);
            optimizer.step(params);

            if (!std::isfinite(loss.value())) throw NumericError("train_autoencoder: non-finite loss");
            epoch_loss += loss.value() * b;
            seen += static_cast<size_t>(b);
        }
        history.push_back(epoch_loss / static_cast<double>(seen));
    }

    // latent whitening from the training set
    std::vector<double> lmean(static_cast<size_t>(cfg.latent_dim), 0.0),
        lvar(static_cast<size_t>(cfg.latent_dim), 0.0);
    std::vector<std::vector<double>> latents(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) {
        const Tensor z = model.encode_batch(Tensor::from({1, in}, rows[i]));
        latents[i].assign(z.data().begin(), z.data().end());
        for (int j = 0; j < cfg.latent_dim; ++j) lmean[static_cast<size_t>(j)] += latents[i][static_cast<size_t>(j)];
    }
    for (auto& v : lmean) v /= static_cast<double>(corpus.size());
    for (const auto& z : latents)
        for (int j = 0; j < cfg.latent_dim; ++j) {
            const double c = z[static_cast<size_t>(j)] - lmean[static_cast<size_t>(j)];
            lvar[static_cast<size_t>(j)] += c * c;
        }
    std::vector<double> lstd(static_cast<size_t>(cfg.latent_dim));
    for (int j = 0; j < cfg.latent_dim; ++j)
        lstd[static_cast<size_t>(j)] =
            std::max(1e-6, std::sqrt(lvar[static_cast<size_t>(j)] / static_cast<double>(corpus.size())));
    model.set_whitening(std::move(lmean), std::move(lstd));

    return {std::move(model), std::move(history)};
}

double roundtrip_relative_mse(const AutoencoderModel& model, const std::vector<MelSpectrogram>& mels) {
    if (mels.empty()) throw InputError("roundtrip_relative_mse: empty set");
    double acc = 0.0;
    for (const auto& m : mels) {
        const MelSpectrogram r = model.decode(model.encode(m));
        double err = 0.0, ref = 0.0;
        for (size_t i = 0; i < m.values.size(); ++i) {
            const double d = r.values[i] - m.values[i];
            err += d * d;
            const double c = m.values[i] - model.norm_mean()[i];
            ref += c * c;
        }
        acc += err / std::max(ref, 1e-12);
    }
    return acc / static_cast<double>(mels.size());
}

}  // namespace musgen
