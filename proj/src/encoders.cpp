#include "musgen/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "httplib.h"
#include "json.hpp"
#include "musgen/errors.hpp"
#include "musgen/kernels.hpp"

namespace musgen {

const char* to_string(Modality m) {
    switch (m) {
        case Modality::image: return "image";
        case Modality::story: return "story";
        case Modality::caption: return "caption";
        case Modality::music: return "music";
    }
    return "?";
}

double l2_norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw DimensionError("cosine: length mismatch " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    double dot = 0.0;
    for (size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    const double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (na * nb);
}

namespace {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Total power within [lo, hi] Hz of a one-sided power spectrum.
double band_power(const std::vector<double>& power, double bin_hz, double lo, double hi) {
    const int k0 = std::max(0, static_cast<int>(std::floor(lo / bin_hz)));
    const int k1 = std::min(static_cast<int>(power.size()) - 1, static_cast<int>(std::ceil(hi / bin_hz)));
    double acc = 0.0;
    for (int k = k0; k <= k1; ++k) acc += power[static_cast<size_t>(k)];
    return acc;
}

}  // namespace

MusicSignature analyze_clip(const AudioClip& clip) {
    if (clip.samples.empty()) throw InputError("analyze_clip: empty clip");
    const int n = static_cast<int>(clip.samples.size());
    const int nfft = next_pow2(std::max(n, 2048));
    std::vector<std::complex<double>> buf(static_cast<size_t>(nfft), {0.0, 0.0});
    for (int i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = clip.samples[static_cast<size_t>(i)];
    kernels::fft_pow2(buf.data(), nfft, false);
    const int bins = nfft / 2 + 1;
    std::vector<double> power(static_cast<size_t>(bins));
    for (int k = 0; k < bins; ++k) power[static_cast<size_t>(k)] = std::norm(buf[static_cast<size_t>(k)]);
    const double bin_hz = static_cast<double>(clip.sample_rate) / nfft;

    MusicSignature sig;
    // fundamental: strongest bin in the audible band (skips the DC/AM region)
    const int k_lo = std::max(1, static_cast<int>(std::ceil(80.0 / bin_hz)));
    const int k_hi = std::min(bins - 1, static_cast<int>(std::floor(2000.0 / bin_hz)));
    int k_peak = k_lo;
    for (int k = k_lo; k <= k_hi; ++k)
        if (power[static_cast<size_t>(k)] > power[static_cast<size_t>(k_peak)]) k_peak = k;
    sig.f0 = k_peak * bin_hz;

    const double half = 0.015;  // 1.5% band half-width keeps 1.2 and 1.25 apart
    const double e0 = std::max(band_power(power, bin_hz, sig.f0 * (1 - half), sig.f0 * (1 + half)), 1e-30);
    auto ratio_at = [&](double r) {
        const double c = sig.f0 * r;
        const double e = band_power(power, bin_hz, c * (1 - half), c * (1 + half));
        return std::sqrt(e / e0);
    };
    sig.r_min3 = ratio_at(1.2);
    sig.r_maj3 = ratio_at(1.25);
    sig.r_fifth = ratio_at(1.5);
    sig.r_h2 = ratio_at(2.0);
    sig.r_h3 = ratio_at(3.0);

    // modulation rate from the squared-signal envelope
    const int box = std::max(1, clip.sample_rate / 320);  // ~3 ms
    std::vector<double> env(static_cast<size_t>(n));
    double run = 0.0;
    for (int i = 0; i < n; ++i) {
        run += clip.samples[static_cast<size_t>(i)] * clip.samples[static_cast<size_t>(i)];
        if (i >= box) run -= clip.samples[static_cast<size_t>(i - box)] * clip.samples[static_cast<size_t>(i - box)];
        env[static_cast<size_t>(i)] = run / box;
    }
    double env_mean = 0.0;
    for (double e : env) env_mean += e;
    env_mean /= n;
    std::vector<std::complex<double>> ebuf(static_cast<size_t>(nfft), {0.0, 0.0});
    for (int i = 0; i < n; ++i) ebuf[static_cast<size_t>(i)] = env[static_cast<size_t>(i)] - env_mean;
    kernels::fft_pow2(ebuf.data(), nfft, false);
    const int m_lo = std::max(1, static_cast<int>(std::ceil(1.0 / bin_hz)));
    const int m_hi = std::max(m_lo, static_cast<int>(std::floor(10.0 / bin_hz)));
    int m_peak = m_lo;
    for (int k = m_lo; k <= m_hi; ++k)
        if (std::norm(ebuf[static_cast<size_t>(k)]) > std::norm(ebuf[static_cast<size_t>(m_peak)])) m_peak = k;
    sig.mod_rate = m_peak * bin_hz;

    double acc = 0.0;
    for (double s : clip.samples) acc += s * s;
    sig.rms = std::sqrt(acc / n);
    return sig;
}

std::array<double, 8> MusicSignature::features() const {
    return {
        2.0 * std::log2(std::max(f0, 1.0) / 440.0),
        2.0 * r_min3,
        2.0 * r_maj3,
        2.0 * r_fifth,
        1.5 * r_h2,
        1.5 * r_h3,
        (mod_rate - 4.0) / 2.0,
        4.0 * (rms - 0.3),
    };
}

// --- SyntheticEncoder --------------------------------------------------------

namespace {

std::vector<double> frozen_projection(Rng rng, int rows, int cols) {
    std::vector<double> p(static_cast<size_t>(rows) * cols);
    const double s = 1.0 / std::sqrt(static_cast<double>(cols));
    for (auto& v : p) v = s * rng.normal();
    return p;
}

std::vector<double> frozen_bias(Rng rng, int rows) {
    std::vector<double> b(static_cast<size_t>(rows));
    for (auto& v : b) v = 0.3 * rng.normal();
    return b;
}

}  // namespace

SyntheticEncoder::SyntheticEncoder(int dim, uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 8) throw ConfigError("synthetic encoder: dim must be >= 8");
    Rng root(splitmix64(seed ^ 0xE4C0DE5ULL));
    proj_image_ = frozen_projection(root.fork(1), dim, 10);
    proj_story_ = frozen_projection(root.fork(2), dim, 10);
    proj_caption_ = frozen_projection(root.fork(3), dim, 10);
    proj_music_ = frozen_projection(root.fork(4), dim, 8);
    bias_image_ = frozen_bias(root.fork(5), dim);
    bias_story_ = frozen_bias(root.fork(6), dim);
    bias_caption_ = frozen_bias(root.fork(7), dim);
}

Embedding SyntheticEncoder::encode_music(const AudioClip& clip) const {
    const auto feat = analyze_clip(clip).features();
    Embedding e;
    e.modality = Modality::music;
    e.vector.assign(static_cast<size_t>(dim_), 0.0);
    for (int i = 0; i < dim_; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 8; ++j) acc += proj_music_[static_cast<size_t>(i) * 8 + j] * feat[static_cast<size_t>(j)];
        e.vector[static_cast<size_t>(i)] = acc;
    }
    const double norm = l2_norm(e.vector);
    if (norm < 1e-12) throw NumericError("encode_music: degenerate signature projection");
    for (auto& v : e.vector) v /= norm;
    return e;
}

Embedding SyntheticEncoder::project_conditions(const FactorSpec& f, Modality m, const std::string& item) const {
    const auto feat = factor_features(f);
    const std::vector<double>* proj = nullptr;
    const std::vector<double>* bias = nullptr;
    switch (m) {
        case Modality::image: proj = &proj_image_; bias = &bias_image_; break;
        case Modality::story: proj = &proj_story_; bias = &bias_story_; break;
        case Modality::caption: proj = &proj_caption_; bias = &bias_caption_; break;
        default: throw ContractError("project_conditions: music goes through encode_music");
    }
    Embedding e;
    e.modality = m;
    e.vector.assign(static_cast<size_t>(dim_), 0.0);
    for (int i = 0; i < dim_; ++i) {
        double acc = (*bias)[static_cast<size_t>(i)];
        for (int j = 0; j < 10; ++j) acc += (*proj)[static_cast<size_t>(i) * 10 + j] * feat[static_cast<size_t>(j)];
        e.vector[static_cast<size_t>(i)] = acc;
    }
    // seeded per-item noise keeps the three condition spaces distinct and the
    // alignment problem non-trivial
    Rng noise(splitmix64(seed_ ^ fnv1a64(item) ^ (static_cast<uint64_t>(m) << 56)));
    for (auto& v : e.vector) v += kConditionNoiseSigma * noise.normal();
    return e;
}

Embedding SyntheticEncoder::encode_image(const std::string& descriptor) const {
    return project_conditions(parse_image_descriptor(descriptor), Modality::image, descriptor);
}

Embedding SyntheticEncoder::encode_story(const std::string& story) const {
    return project_conditions(parse_story(story), Modality::story, story);
}

Embedding SyntheticEncoder::encode_caption(const std::string& caption) const {
    return project_conditions(parse_caption(caption), Modality::caption, caption);
}

namespace {

std::vector<double> noisy_factor_vec(const FactorSpec& f, uint64_t seed, const std::string& item,
                                     int salt) {
    const auto feat = factor_features(f);
    std::vector<double> v(feat.begin(), feat.end());
    Rng noise(splitmix64(seed ^ fnv1a64(item) ^ (static_cast<uint64_t>(salt) << 48)));
    for (auto& x : v) x += SyntheticEncoder::kConditionNoiseSigma * noise.normal();
    return v;
}

}  // namespace

double SyntheticEncoder::image_story_score(const std::string& descriptor, const std::string& story) const {
    const auto a = noisy_factor_vec(parse_image_descriptor(descriptor), seed_, descriptor, 11);
    const auto b = noisy_factor_vec(parse_story(story), seed_, story, 12);
    return cosine(a, b);
}

std::array<double, 8> SyntheticEncoder::canonical_signature(const FactorSpec& f) const {
    const std::string key = f.key();
    {
        std::lock_guard<std::mutex> lock(cache_mu_);
        auto it = canonical_cache_.find(key);
        if (it != canonical_cache_.end()) return it->second;
    }
    Rng phase(splitmix64(seed_ ^ fnv1a64(key) ^ 0xCA4041CALL));
    const AudioClip clip = render_clip(f, phase);
    const auto feat = analyze_clip(clip).features();
    std::lock_guard<std::mutex> lock(cache_mu_);
    canonical_cache_[key] = feat;
    return feat;
}

double SyntheticEncoder::caption_music_score(const std::string& caption, const AudioClip& clip) const {
    const auto expect = canonical_signature(parse_caption(caption));
    const auto got = analyze_clip(clip).features();
    return cosine(std::vector<double>(expect.begin(), expect.end()),
                  std::vector<double>(got.begin(), got.end()));
}

std::array<double, 8> SyntheticEncoder::canonical_caption_features(const std::string& caption) const {
    return canonical_signature(parse_caption(caption));
}

// --- RemoteEncoder -----------------------------------------------------------

RemoteEncoder::RemoteEncoder(int dim, std::string endpoint, double timeout_s)
    : dim_(dim), endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {}

Embedding RemoteEncoder::post_embed(Modality m, const std::string& payload) const {
    httplib::Client client(endpoint_);
    client.set_connection_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));

    nlohmann::json body;
    body["modality"] = to_string(m);
    body["payload_b64"] = base64_encode(payload);
    auto res = client.Post("/embed", body.dump(), "application/json");
    if (!res)
        throw TransportError("remote encoder: no response from " + endpoint_ + " (" +
                             httplib::to_string(res.error()) + ")");
    if (res->status != 200)
        throw TransportError("remote encoder: " + endpoint_ + " /embed returned status " +
                             std::to_string(res->status));
    Embedding e;
    e.modality = m;
    try {
        const auto j = nlohmann::json::parse(res->body);
        e.vector = j.at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& ex) {
        throw TransportError("remote encoder: malformed reply from " + endpoint_ + ": " + ex.what());
    }
    if (e.dim() != dim_)
        throw TransportError("remote encoder: " + endpoint_ + " returned dim " + std::to_string(e.dim()) +
                             ", expected " + std::to_string(dim_));
    return e;
}

Embedding RemoteEncoder::encode_music(const AudioClip& clip) const {
    return post_embed(Modality::music, wav_bytes(clip));
}

Embedding RemoteEncoder::encode_image(const std::string& descriptor) const {
    return post_embed(Modality::image, descriptor);
}

Embedding RemoteEncoder::encode_story(const std::string& story) const {
    return post_embed(Modality::story, story);
}

Embedding RemoteEncoder::encode_caption(const std::string& caption) const {
    return post_embed(Modality::caption, caption);
}

// --- base64 ------------------------------------------------------------------

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::string& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < bytes.size()) {
        const uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                           static_cast<unsigned char>(bytes[i + 2]);
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += kB64[v & 63];
        i += 3;
    }
    const size_t rem = bytes.size() - i;
    if (rem == 1) {
        const uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += "==";
    } else if (rem == 2) {
        const uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::string base64_decode(const std::string& text) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw InputError("base64_decode: invalid character");
    };
    std::string out;
    uint32_t acc = 0;
    int nbits = 0;
    for (char c : text) {
        const int v = val(c);
        if (v < 0) break;
        acc = (acc << 6) | static_cast<uint32_t>(v);
        nbits += 6;
        if (nbits >= 8) {
            nbits -= 8;
            out += static_cast<char>((acc >> nbits) & 0xFF);
        }
    }
    return out;
}

}  // namespace musgen
