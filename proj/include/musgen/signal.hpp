#pragma once

#include <complex>
#include <string>
#include <vector>

namespace musgen {

struct AudioClip {
    std::vector<double> samples;  // [-1, 1]
    int sample_rate = 16000;

    double duration_s() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

struct SignalConfig {
    int sample_rate = 16000;
    int n_fft = 512;   // power of two
    int hop = 256;     // samples
    int win = 512;     // samples, Hann window
    int n_mels = 64;
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_floor = 1e-5;

    int bins() const { return n_fft / 2 + 1; }
    void validate() const;  // throws ConfigError
    int frame_count(size_t n_samples) const;  // 1 + floor((len - win)/hop)
};

struct Spectrogram {
    int frames = 0;
    int bins = 0;
    std::vector<std::complex<double>> values;  // frames x bins, row-major

    std::complex<double>& at(int t, int f) { return values[static_cast<size_t>(t) * bins + f]; }
    const std::complex<double>& at(int t, int f) const { return values[static_cast<size_t>(t) * bins + f]; }
};

struct MelSpectrogram {
    int frames = 0;
    int bins = 0;  // == config.n_mels
    std::vector<double> values;  // frames x bins, log magnitude
    SignalConfig config;

    double& at(int t, int f) { return values[static_cast<size_t>(t) * bins + f]; }
    double at(int t, int f) const { return values[static_cast<size_t>(t) * bins + f]; }
};

// HTK mel scale: mel = 2595 * log10(1 + f/700).
double hz_to_mel(double f);
double mel_to_hz(double m);

// Triangular filterbank, rows normalized to sum to 1. n_mels x bins row-major.
std::vector<double> mel_filterbank(const SignalConfig& cfg);

// Hann-windowed, hop-strided, one-sided spectrum. Frames start at t*hop;
// no centering or padding, so frames == cfg.frame_count(len).
Spectrogram stft(const AudioClip& clip, const SignalConfig& cfg);

MelSpectrogram mel_spectrogram(const AudioClip& clip, const SignalConfig& cfg);

// Least-squares weighted overlap-add inverse of stft (frames of length win).
AudioClip istft(const Spectrogram& spec, const SignalConfig& cfg);

// Phase reconstruction from a log-mel spectrogram. The mel frame is mapped
// back to a linear magnitude spectrum through the filterbank pseudo-inverse,
// then phases are iterated. convergence_out, when given, records the
// spectral distance || |STFT(x_k)| - target |_F per iteration.
AudioClip griffin_lim(const MelSpectrogram& mel, const SignalConfig& cfg, int iters = 60,
                      std::vector<double>* convergence_out = nullptr);

// 16-bit PCM mono little-endian WAV.
std::string wav_bytes(const AudioClip& clip);
AudioClip clip_from_wav_bytes(const std::string& bytes);
void write_wav(const std::string& path, const AudioClip& clip);
AudioClip read_wav(const std::string& path);

}  // namespace musgen
