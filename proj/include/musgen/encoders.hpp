#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "musgen/factors.hpp"
#include "musgen/signal.hpp"

namespace musgen {

enum class Modality { image, story, caption, music };
const char* to_string(Modality m);

struct Embedding {
    std::vector<double> vector;
    Modality modality = Modality::music;

    int dim() const { return static_cast<int>(vector.size()); }
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);
double l2_norm(const std::vector<double>& v);

// Deterministic acoustic signature of a clip: FFT-peak pitch, band-energy
// ratios at chord/harmonic positions, amplitude-modulation rate, RMS.
struct MusicSignature {
    double f0 = 0.0;        // Hz
    double r_min3 = 0.0;    // amplitude ratio at 1.2 f0
    double r_maj3 = 0.0;    // at 1.25 f0
    double r_fifth = 0.0;   // at 1.5 f0
    double r_h2 = 0.0;      // at 2 f0
    double r_h3 = 0.0;      // at 3 f0
    double mod_rate = 0.0;  // Hz
    double rms = 0.0;

    std::array<double, 8> features() const;  // standardized, O(1) per component
};

MusicSignature analyze_clip(const AudioClip& clip);

class EncoderBackend {
  public:
    virtual ~EncoderBackend() = default;
    virtual int dim() const = 0;
    virtual Embedding encode_music(const AudioClip& clip) const = 0;
    virtual Embedding encode_image(const std::string& descriptor) const = 0;
    virtual Embedding encode_story(const std::string& story) const = 0;
    virtual Embedding encode_caption(const std::string& caption) const = 0;
};

// Frozen factor-grounded encoder. Condition modalities get distinct random
// projections of the parsed factor features plus seeded per-item noise
// (sigma = 0.05); music embeddings are the L2-normalized projection of the
// clip's measured signature, with no noise.
class SyntheticEncoder : public EncoderBackend {
  public:
    SyntheticEncoder(int dim, uint64_t seed);

    int dim() const override { return dim_; }
    Embedding encode_music(const AudioClip& clip) const override;
    Embedding encode_image(const std::string& descriptor) const override;
    Embedding encode_story(const std::string& story) const override;
    Embedding encode_caption(const std::string& caption) const override;

    // Mock pair scorers used by the annotation agents. Both sides are parsed
    // back to factors / measured signatures and compared in a shared space,
    // mirroring how CLIP/CLAP judge cross-modal pairs.
    double image_story_score(const std::string& descriptor, const std::string& story) const;
    double caption_music_score(const std::string& caption, const AudioClip& clip) const;

    // Expected signature features of a clean render of the caption's factors
    // (cached per factor combination); the shared space of the mock
    // caption-vs-audio scorer.
    std::array<double, 8> canonical_caption_features(const std::string& caption) const;

    uint64_t seed() const { return seed_; }

    static constexpr double kConditionNoiseSigma = 0.05;

  private:
    Embedding project_conditions(const FactorSpec& f, Modality m, const std::string& item) const;
    std::array<double, 8> canonical_signature(const FactorSpec& f) const;

    int dim_;
    uint64_t seed_;
    // row-major dim x 10 per condition modality, dim x 8 for music
    std::vector<double> proj_image_, proj_story_, proj_caption_, proj_music_;
    std::vector<double> bias_image_, bias_story_, bias_caption_;

    mutable std::mutex cache_mu_;
    mutable std::unordered_map<std::string, std::array<double, 8>> canonical_cache_;
};

// JSON-over-HTTP client: POST /embed {"modality": ..., "payload_b64": ...}
// -> {"vector": [...]}. Non-200 or malformed replies raise TransportError.
class RemoteEncoder : public EncoderBackend {
  public:
    RemoteEncoder(int dim, std::string endpoint, double timeout_s = 30.0);

    int dim() const override { return dim_; }
    Embedding encode_music(const AudioClip& clip) const override;
    Embedding encode_image(const std::string& descriptor) const override;
    Embedding encode_story(const std::string& story) const override;
    Embedding encode_caption(const std::string& caption) const override;

    const std::string& endpoint() const { return endpoint_; }

  private:
    Embedding post_embed(Modality m, const std::string& payload) const;

    int dim_;
    std::string endpoint_;  // host:port or http://host:port
    double timeout_s_;
};

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

}  // namespace musgen
