#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "musgen/errors.hpp"
#include "musgen/factors.hpp"
#include "musgen/kernels.hpp"
#include "musgen/rng.hpp"
#include "musgen/signal.hpp"

using namespace musgen;

namespace {

AudioClip sine_clip(double freq, double seconds = 1.0, int sr = 16000, double amp = 0.5) {
    AudioClip clip;
    clip.sample_rate = sr;
    const auto n = static_cast<size_t>(seconds * sr);
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i)
        clip.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / sr);
    return clip;
}

// dominant frequency via the zero-padded full-clip FFT
double fft_peak_hz(const AudioClip& clip) {
    int nfft = 1;
    while (nfft < static_cast<int>(clip.samples.size())) nfft <<= 1;
    std::vector<std::complex<double>> buf(static_cast<size_t>(nfft), {0.0, 0.0});
    for (size_t i = 0; i < clip.samples.size(); ++i) buf[i] = clip.samples[i];
    kernels::fft_pow2(buf.data(), nfft, false);
    int peak = 1;
    for (int k = 1; k <= nfft / 2; ++k)
        if (std::abs(buf[static_cast<size_t>(k)]) > std::abs(buf[static_cast<size_t>(peak)])) peak = k;
    return static_cast<double>(peak) * clip.sample_rate / nfft;
}

}  // namespace

TEST_SUITE_BEGIN("signal");

TEST_CASE("stft concentrates a bin-centered sine in its bin") {
    const SignalConfig cfg;
    const int k = 16;  // bin-center frequency k * sr / n_fft = 500 Hz
    const double freq = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
    const Spectrogram spec = stft(sine_clip(freq), cfg);
    REQUIRE(spec.frames == cfg.frame_count(16000));
    // the Hann main lobe spans k-1..k+1; leakage beyond it is sidelobe-bounded
    for (int t = 0; t < spec.frames; ++t) {
        double total = 0.0, main_lobe = 0.0;
        for (int f = 0; f < spec.bins; ++f) {
            const double e = std::norm(spec.at(t, f));
            total += e;
            if (std::abs(f - k) <= 1) main_lobe += e;
        }
        CHECK(main_lobe / total >= 0.95);
    }
}

TEST_CASE("stft of silence is all zeros") {
    const SignalConfig cfg;
    AudioClip clip;
    clip.samples.assign(16000, 0.0);
    const Spectrogram spec = stft(clip, cfg);
    for (const auto& v : spec.values) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("stft satisfies Parseval per frame") {
    SignalConfig cfg;
    Rng rng(77);
    AudioClip clip;
    clip.samples.resize(4096);
    for (auto& s : clip.samples) s = 0.3 * rng.normal();
    const Spectrogram spec = stft(clip, cfg);

    // windowed frame energy == (1/n_fft) * sum over the full spectrum; the
    // one-sided storage doubles every bin except DC and Nyquist
    std::vector<double> window(static_cast<size_t>(cfg.win));
    for (int i = 0; i < cfg.win; ++i)
        window[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.win);
    for (int t = 0; t < spec.frames; ++t) {
        double time_energy = 0.0;
        for (int i = 0; i < cfg.win; ++i) {
            const double v = clip.samples[static_cast<size_t>(t) * cfg.hop + i] * window[static_cast<size_t>(i)];
            time_energy += v * v;
        }
        double spec_energy = 0.0;
        for (int f = 0; f < spec.bins; ++f) {
            const double e = std::norm(spec.at(t, f));
            const bool shared = f == 0 || f == spec.bins - 1;
            spec_energy += shared ? e : 2.0 * e;
        }
        spec_energy /= cfg.n_fft;
        CHECK(time_energy == doctest::Approx(spec_energy).epsilon(1e-6));
    }
}

TEST_CASE("stft rejects clips shorter than the window") {
    const SignalConfig cfg;
    AudioClip clip;
    clip.samples.assign(100, 0.0);
    CHECK_THROWS_AS(stft(clip, cfg), InputError);
}

TEST_CASE("mel scale formula and roundtrip") {
    CHECK(hz_to_mel(0.0) == 0.0);
    CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
    CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-9));
    CHECK_THROWS_AS(hz_to_mel(-1.0), InputError);
    CHECK_THROWS_AS(mel_to_hz(-1.0), InputError);
}

TEST_CASE("mel filterbank rows are normalized and sparse per column") {
    const SignalConfig cfg;
    const auto fb = mel_filterbank(cfg);
    const int bins = cfg.bins();
    for (int m = 0; m < cfg.n_mels; ++m) {
        double row_sum = 0.0;
        for (int k = 0; k < bins; ++k) {
            const double w = fb[static_cast<size_t>(m) * bins + k];
            CHECK(w >= 0.0);
            row_sum += w;
        }
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    // each linear column feeds at most 2 mel bins
    for (int k = 0; k < bins; ++k) {
        int touched = 0;
        for (int m = 0; m < cfg.n_mels; ++m)
            if (fb[static_cast<size_t>(m) * bins + k] > 0.0) ++touched;
        CHECK(touched <= 2);
    }
}

TEST_CASE("mel spectrogram of silence sits at the log floor") {
    const SignalConfig cfg;
    AudioClip clip;
    clip.samples.assign(16000, 0.0);
    const MelSpectrogram mel = mel_spectrogram(clip, cfg);
    const double expect = std::log(cfg.log_floor);
    for (double v : mel.values) CHECK(v == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("1 kHz sine lands in the mel bin containing 1 kHz") {
    const SignalConfig cfg;
    const MelSpectrogram mel = mel_spectrogram(sine_clip(1000.0), cfg);
    // locate the expected bin: triangle centers are equally spaced in mel
    const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax);
    int expect_bin = 0;
    double best = 1e300;
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double center = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1));
        if (std::abs(center - 1000.0) < best) {
            best = std::abs(center - 1000.0);
            expect_bin = m;
        }
    }
    for (int t = 0; t < mel.frames; ++t) {
        int argmax = 0;
        for (int m = 1; m < cfg.n_mels; ++m)
            if (mel.at(t, m) > mel.at(t, argmax)) argmax = m;
        CHECK(std::abs(argmax - expect_bin) <= 1);
    }
}

TEST_CASE("griffin-lim spectral convergence is non-increasing") {
    const SignalConfig cfg;
    Rng rng(4);
    const FactorSpec f{466.0, ChordType::major, Timbre::bright, TempoClass::fast};
    const AudioClip clip = render_clip(f, rng);
    const MelSpectrogram mel = mel_spectrogram(clip, cfg);
    std::vector<double> conv;
    griffin_lim(mel, cfg, 30, &conv);
    REQUIRE(conv.size() == 30);
    for (size_t i = 1; i < conv.size(); ++i) CHECK(conv[i] <= conv[i - 1] * (1.0 + 1e-9) + 1e-12);
}

TEST_CASE("griffin-lim sine roundtrip keeps the dominant frequency") {
    const SignalConfig cfg;
    const double freq = 523.0;
    const AudioClip clip = sine_clip(freq);
    const MelSpectrogram mel = mel_spectrogram(clip, cfg);
    const AudioClip recon = griffin_lim(mel, cfg, 60);
    // within one analysis bin (sr / n_fft); mel quantization cannot beat
    // the linear-frequency resolution of the filterbank
    CHECK(std::abs(fft_peak_hz(recon) - freq) <=
          static_cast<double>(cfg.sample_rate) / cfg.n_fft);
    // length within one hop of the analyzed span
    const auto implied = static_cast<size_t>((mel.frames - 1) * cfg.hop + cfg.win);
    CHECK(recon.samples.size() >= implied - static_cast<size_t>(cfg.hop));
    CHECK(recon.samples.size() <= implied + static_cast<size_t>(cfg.hop));
}

TEST_CASE("griffin-lim of a floor-level mel is near silent") {
    const SignalConfig cfg;
    MelSpectrogram mel;
    mel.frames = 20;
    mel.bins = cfg.n_mels;
    mel.config = cfg;
    mel.values.assign(static_cast<size_t>(mel.frames) * mel.bins, std::log(cfg.log_floor));
    const AudioClip out = griffin_lim(mel, cfg, 10);
    double peak = 0.0;
    for (double s : out.samples) peak = std::max(peak, std::abs(s));
    CHECK(peak < 1e-2);
}

TEST_CASE("griffin-lim rejects a zero iteration count") {
    const SignalConfig cfg;
    MelSpectrogram mel;
    mel.frames = 4;
    mel.bins = cfg.n_mels;
    mel.config = cfg;
    mel.values.assign(static_cast<size_t>(mel.frames) * mel.bins, std::log(cfg.log_floor));
    CHECK_THROWS_AS(griffin_lim(mel, cfg, 0), InputError);
}

TEST_CASE("wav bytes round-trip 16-bit samples exactly") {
    Rng rng(9);
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.resize(777);
    for (auto& s : clip.samples) s = std::clamp(0.4 * rng.normal(), -1.0, 1.0);
    const std::string bytes = wav_bytes(clip);
    const AudioClip back = clip_from_wav_bytes(bytes);
    REQUIRE(back.samples.size() == clip.samples.size());
    CHECK(back.sample_rate == clip.sample_rate);
    // quantization error bounded by one 16-bit step
    for (size_t i = 0; i < clip.samples.size(); ++i)
        CHECK(std::abs(back.samples[i] - clip.samples[i]) <= 1.0 / 32767.0);
    // re-serializing the quantized clip is bit-stable
    CHECK(wav_bytes(back) == wav_bytes(clip_from_wav_bytes(wav_bytes(back))));

    const auto path = std::filesystem::temp_directory_path() / "musgen_wav_test.wav";
    write_wav(path.string(), clip);
    const AudioClip from_file = read_wav(path.string());
    CHECK(wav_bytes(from_file) == bytes);
    std::filesystem::remove(path);
}

TEST_CASE("signal config validation") {
    SignalConfig cfg;
    cfg.n_fft = 500;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SignalConfig{};
    cfg.fmax = 9000.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SignalConfig{};
    cfg.hop = 600;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_SUITE_END();
