#pragma once

#include <array>
#include <string>
#include <vector>

#include "musgen/rng.hpp"
#include "musgen/signal.hpp"

namespace musgen {

enum class ChordType { single, major, minor, fifth };
enum class Timbre { pure, bright, soft };
enum class TempoClass { slow, fast };

const char* to_string(ChordType c);
const char* to_string(Timbre t);
const char* to_string(TempoClass t);
ChordType chord_from_string(const std::string& s);
Timbre timbre_from_string(const std::string& s);
TempoClass tempo_from_string(const std::string& s);

// Ground-truth generative factors of one synthetic sample.
struct FactorSpec {
    double root_freq = 440.0;  // Hz, must stay in [110, 880]
    ChordType chord = ChordType::single;
    Timbre timbre = Timbre::pure;
    TempoClass tempo = TempoClass::slow;

    void validate() const;  // throws InputError
    bool operator==(const FactorSpec&) const = default;
    std::string key() const;  // canonical text form, usable as a map key
};

// Chord tone frequency ratios relative to the root.
std::vector<double> chord_ratios(ChordType c);
// Per-tone harmonic amplitude profile (index k => harmonic k+1).
std::vector<double> timbre_harmonics(Timbre t);
// Amplitude-modulation rate in Hz.
double tempo_mod_rate(TempoClass t);

// Renders one clip: chord tones with timbre harmonics, amplitude-modulated
// at the tempo rate. Per-render random phases come from `rng`, so two clips
// of the same FactorSpec differ in waveform but share their magnitudes.
AudioClip render_clip(const FactorSpec& f, Rng& rng, int sample_rate = 16000, double seconds = 1.0);

// Invertible text renderings of the factors for the three condition
// modalities. parse_* throw InputError on unparseable items.
std::string render_image_descriptor(const FactorSpec& f);
std::string render_story(const FactorSpec& f);
std::string render_caption(const FactorSpec& f);
FactorSpec parse_image_descriptor(const std::string& s);
FactorSpec parse_story(const std::string& s);
FactorSpec parse_caption(const std::string& s);

// Shared 10-dim factor feature vector (centered one-hots + scaled log-pitch);
// the synthetic condition encoders and the mock pair scorers build on it.
std::array<double, 10> factor_features(const FactorSpec& f);

}  // namespace musgen
