#include "musgen/signal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "musgen/errors.hpp"
#include "musgen/kernels.hpp"

namespace musgen {

namespace {

std::vector<double> hann_window(int n) {
    // periodic Hann
    std::vector<double> w(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    return w;
}

}  // namespace

void SignalConfig::validate() const {
    if (sample_rate <= 0) throw ConfigError("signal: sample_rate must be positive");
    if (!kernels::is_pow2(n_fft)) throw ConfigError("signal: n_fft must be a power of two");
    if (!(hop > 0 && hop <= win && win <= n_fft))
        throw ConfigError("signal: require 0 < hop <= win <= n_fft");
    if (n_mels <= 1) throw ConfigError("signal: n_mels must be > 1");
    if (fmin < 0 || fmax <= fmin) throw ConfigError("signal: require 0 <= fmin < fmax");
    if (fmax > sample_rate / 2.0) throw ConfigError("signal: fmax must not exceed sample_rate/2");
    if (log_floor <= 0) throw ConfigError("signal: log_floor must be positive");
}

int SignalConfig::frame_count(size_t n_samples) const {
    if (n_samples < static_cast<size_t>(win)) return 0;
    return 1 + static_cast<int>((n_samples - static_cast<size_t>(win)) / static_cast<size_t>(hop));
}

double hz_to_mel(double f) {
    if (f < 0) throw InputError("hz_to_mel: negative frequency");
    return 2595.0 * std::log10(1.0 + f / 700.0);
}

double mel_to_hz(double m) {
    if (m < 0) throw InputError("mel_to_hz: negative mel value");
    return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

std::vector<double> mel_filterbank(const SignalConfig& cfg) {
    cfg.validate();
    const int bins = cfg.bins();
    const int n_mels = cfg.n_mels;
    std::vector<double> fb(static_cast<size_t>(n_mels) * bins, 0.0);

    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);
    std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i)
        edges[static_cast<size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

    for (int m = 0; m < n_mels; ++m) {
        const double lo = edges[static_cast<size_t>(m)];
        const double mid = edges[static_cast<size_t>(m) + 1];
        const double hi = edges[static_cast<size_t>(m) + 2];
        double row_sum = 0.0;
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
            double w = 0.0;
            if (f > lo && f < mid)
                w = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi)
                w = (hi - f) / (hi - mid);
            fb[static_cast<size_t>(m) * bins + k] = w;
            row_sum += w;
        }
        if (row_sum > 0)
            for (int k = 0; k < bins; ++k) fb[static_cast<size_t>(m) * bins + k] /= row_sum;
    }
    return fb;
}

Spectrogram stft(const AudioClip& clip, const SignalConfig& cfg) {
    cfg.validate();
    const int frames = cfg.frame_count(clip.samples.size());
    if (frames == 0)
        throw InputError("stft: clip of " + std::to_string(clip.samples.size()) +
                         " samples is shorter than the window (" + std::to_string(cfg.win) + ")");
    const int bins = cfg.bins();
    Spectrogram out;
    out.frames = frames;
    out.bins = bins;
    out.values.resize(static_cast<size_t>(frames) * bins);
    const auto window = hann_window(cfg.win);

#pragma omp parallel for schedule(static)
    for (int t = 0; t < frames; ++t) {
        std::vector<std::complex<double>> buf(static_cast<size_t>(cfg.n_fft), {0.0, 0.0});
        const double* src = clip.samples.data() + static_cast<size_t>(t) * cfg.hop;
        for (int i = 0; i < cfg.win; ++i) buf[static_cast<size_t>(i)] = src[i] * window[static_cast<size_t>(i)];
        kernels::fft_pow2(buf.data(), cfg.n_fft, false);
        for (int k = 0; k < bins; ++k) out.values[static_cast<size_t>(t) * bins + k] = buf[static_cast<size_t>(k)];
    }
    return out;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, const SignalConfig& cfg) {
    const Spectrogram spec = stft(clip, cfg);
    const auto fb = mel_filterbank(cfg);
    MelSpectrogram mel;
    mel.frames = spec.frames;
    mel.bins = cfg.n_mels;
    mel.config = cfg;
    mel.values.resize(static_cast<size_t>(spec.frames) * cfg.n_mels);

#pragma omp parallel for schedule(static)
    for (int t = 0; t < spec.frames; ++t) {
        std::vector<double> mag(static_cast<size_t>(spec.bins));
        for (int k = 0; k < spec.bins; ++k) mag[static_cast<size_t>(k)] = std::abs(spec.at(t, k));
        for (int m = 0; m < cfg.n_mels; ++m) {
            double acc = 0.0;
            const double* row = fb.data() + static_cast<size_t>(m) * spec.bins;
            for (int k = 0; k < spec.bins; ++k) acc += row[k] * mag[static_cast<size_t>(k)];
            mel.values[static_cast<size_t>(t) * cfg.n_mels + m] = std::log(acc + cfg.log_floor);
        }
    }
    return mel;
}

AudioClip istft(const Spectrogram& spec, const SignalConfig& cfg) {
    cfg.validate();
    const int frames = spec.frames;
    const size_t out_len = static_cast<size_t>(frames - 1) * cfg.hop + cfg.win;
    const auto window = hann_window(cfg.win);

    // Per-frame inverse FFTs in parallel, then a serial weighted overlap-add
    // (frames overlap, so the accumulation stays single-threaded).
    std::vector<double> frame_time(static_cast<size_t>(frames) * cfg.win);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < frames; ++t) {
        std::vector<std::complex<double>> buf(static_cast<size_t>(cfg.n_fft));
        for (int k = 0; k < spec.bins; ++k) {
            buf[static_cast<size_t>(k)] = spec.at(t, k);
            if (k > 0 && k < cfg.n_fft - k) buf[static_cast<size_t>(cfg.n_fft - k)] = std::conj(spec.at(t, k));
        }
        kernels::fft_pow2(buf.data(), cfg.n_fft, true);
        for (int i = 0; i < cfg.win; ++i)
            frame_time[static_cast<size_t>(t) * cfg.win + i] = buf[static_cast<size_t>(i)].real();
    }

    std::vector<double> num(out_len, 0.0), den(out_len, 0.0);
    for (int t = 0; t < frames; ++t) {
        const size_t off = static_cast<size_t>(t) * cfg.hop;
        for (int i = 0; i < cfg.win; ++i) {
            const double w = window[static_cast<size_t>(i)];
            num[off + i] += w * frame_time[static_cast<size_t>(t) * cfg.win + i];
            den[off + i] += w * w;
        }
    }
    AudioClip out;
    out.sample_rate = cfg.sample_rate;
    out.samples.resize(out_len);
    for (size_t i = 0; i < out_len; ++i) out.samples[i] = den[i] > 1e-12 ? num[i] / den[i] : 0.0;
    return out;
}

namespace {

// target linear magnitudes per frame from a log-mel frame via the
// filterbank pseudo-inverse W^T (W W^T)^{-1}, clamped at zero.
Eigen::MatrixXd mel_to_linear_mags(const MelSpectrogram& mel, const SignalConfig& cfg) {
    const int bins = cfg.bins();
    const auto fb = mel_filterbank(cfg);
    Eigen::MatrixXd w(cfg.n_mels, bins);
    for (int m = 0; m < cfg.n_mels; ++m)
        for (int k = 0; k < bins; ++k) w(m, k) = fb[static_cast<size_t>(m) * bins + k];
    Eigen::MatrixXd gram = w * w.transpose();
    gram.diagonal().array() += 1e-10;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);

    Eigen::MatrixXd mags(mel.frames, bins);
    for (int t = 0; t < mel.frames; ++t) {
        Eigen::VectorXd mel_lin(cfg.n_mels);
        for (int m = 0; m < cfg.n_mels; ++m)
            mel_lin(m) = std::max(0.0, std::exp(mel.at(t, m)) - cfg.log_floor);
        Eigen::VectorXd mag = w.transpose() * llt.solve(mel_lin);
        for (int k = 0; k < bins; ++k) mags(t, k) = std::max(0.0, mag(k));
    }
    return mags;
}

}  // namespace

AudioClip griffin_lim(const MelSpectrogram& mel, const SignalConfig& cfg, int iters,
                      std::vector<double>* convergence_out) {
    if (iters <= 0) throw InputError("griffin_lim: iters must be >= 1");
    cfg.validate();
    if (mel.bins != cfg.n_mels)
        throw DimensionError("griffin_lim: mel bins " + std::to_string(mel.bins) +
                             " do not match config n_mels " + std::to_string(cfg.n_mels));
    const int frames = mel.frames;
    const int bins = cfg.bins();
    const Eigen::MatrixXd target = mel_to_linear_mags(mel, cfg);

    // zero-phase initialization
    Spectrogram spec;
    spec.frames = frames;
    spec.bins = bins;
    spec.values.resize(static_cast<size_t>(frames) * bins);
    for (int t = 0; t < frames; ++t)
        for (int k = 0; k < bins; ++k) spec.at(t, k) = {target(t, k), 0.0};

    AudioClip x = istft(spec, cfg);
    const size_t out_len = x.samples.size();
    if (convergence_out) convergence_out->clear();

    for (int it = 0; it < iters; ++it) {
        const Spectrogram analyzed = stft(x, cfg);
        if (convergence_out) {
            double acc = 0.0;
            for (int t = 0; t < frames; ++t)
                for (int k = 0; k < bins; ++k) {
                    const double d = std::abs(analyzed.at(t, k)) - target(t, k);
                    acc += d * d;
                }
            convergence_out->push_back(std::sqrt(acc));
        }
        for (int t = 0; t < frames; ++t)
            for (int k = 0; k < bins; ++k) {
                const std::complex<double> v = analyzed.at(t, k);
                const double m = std::abs(v);
                spec.at(t, k) = m > 1e-300 ? v / m * target(t, k) : std::complex<double>(target(t, k), 0.0);
            }
        x = istft(spec, cfg);
    }
    x.samples.resize(out_len);
    for (auto& s : x.samples) s = std::clamp(s, -1.0, 1.0);
    return x;
}

// --- WAV I/O ----------------------------------------------------------------

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ostream& os, uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

AudioClip read_wav_stream(std::istream& is, const std::string& path);

}  // namespace

std::string wav_bytes(const AudioClip& clip) {
    for (double s : clip.samples)
        if (!std::isfinite(s)) throw NumericError("wav_bytes: non-finite sample");
    std::ostringstream os(std::ios::binary);
    const uint32_t n = static_cast<uint32_t>(clip.samples.size());
    const uint32_t data_bytes = n * 2;
    os.write("RIFF", 4);
    put_u32(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    put_u32(os, 16);
    put_u16(os, 1);  // PCM
    put_u16(os, 1);  // mono
    put_u32(os, static_cast<uint32_t>(clip.sample_rate));
    put_u32(os, static_cast<uint32_t>(clip.sample_rate) * 2);
    put_u16(os, 2);
    put_u16(os, 16);
    os.write("data", 4);
    put_u32(os, data_bytes);
    for (double s : clip.samples) {
        const double c = std::clamp(s, -1.0, 1.0);
        const auto q = static_cast<int16_t>(std::lrint(c * 32767.0));
        put_u16(os, static_cast<uint16_t>(q));
    }
    return os.str();
}

void write_wav(const std::string& path, const AudioClip& clip) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("write_wav: cannot open " + path);
    const std::string bytes = wav_bytes(clip);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write_wav: write failed for " + path);
}

AudioClip clip_from_wav_bytes(const std::string& bytes) {
    std::istringstream is(bytes, std::ios::binary);
    return read_wav_stream(is, "<memory>");
}

AudioClip read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_wav: cannot open " + path);
    return read_wav_stream(is, path);
}

namespace {

AudioClip read_wav_stream(std::istream& is, const std::string& path) {
    char tag[5] = {0};
    is.read(tag, 4);
    if (std::strncmp(tag, "RIFF", 4) != 0) throw IoError("read_wav: not a RIFF file: " + path);
    get_u32(is);
    is.read(tag, 4);
    if (std::strncmp(tag, "WAVE", 4) != 0) throw IoError("read_wav: not a WAVE file: " + path);

    AudioClip clip;
    uint16_t channels = 0, bits = 0;
    bool got_fmt = false;
    while (is.read(tag, 4)) {
        const uint32_t chunk = get_u32(is);
        if (std::strncmp(tag, "fmt ", 4) == 0) {
            const uint16_t fmt = get_u16(is);
            channels = get_u16(is);
            clip.sample_rate = static_cast<int>(get_u32(is));
            get_u32(is);
            get_u16(is);
            bits = get_u16(is);
            if (chunk > 16) is.seekg(chunk - 16, std::ios::cur);
            if (fmt != 1 || channels != 1 || bits != 16)
                throw IoError("read_wav: only 16-bit PCM mono supported: " + path);
            got_fmt = true;
        } else if (std::strncmp(tag, "data", 4) == 0) {
            if (!got_fmt) throw IoError("read_wav: data chunk before fmt in " + path);
            const uint32_t n = chunk / 2;
            clip.samples.resize(n);
            for (uint32_t i = 0; i < n; ++i) {
                const auto raw = static_cast<int16_t>(get_u16(is));
                clip.samples[i] = static_cast<double>(raw) / 32767.0;
            }
            return clip;
        } else {
            is.seekg(chunk + (chunk & 1), std::ios::cur);
        }
    }
    throw IoError("read_wav: no data chunk in " + path);
}

}  // namespace

}  // namespace musgen
