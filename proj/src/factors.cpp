#include "musgen/factors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "musgen/errors.hpp"

namespace musgen {

const char* to_string(ChordType c) {
    switch (c) {
        case ChordType::single: return "single";
        case ChordType::major: return "major";
        case ChordType::minor: return "minor";
        case ChordType::fifth: return "fifth";
    }
    return "?";
}

const char* to_string(Timbre t) {
    switch (t) {
        case Timbre::pure: return "pure";
        case Timbre::bright: return "bright";
        case Timbre::soft: return "soft";
    }
    return "?";
}

const char* to_string(TempoClass t) { return t == TempoClass::slow ? "slow" : "fast"; }

ChordType chord_from_string(const std::string& s) {
    if (s == "single") return ChordType::single;
    if (s == "major") return ChordType::major;
    if (s == "minor") return ChordType::minor;
    if (s == "fifth") return ChordType::fifth;
    throw InputError("unknown chord type: " + s);
}

Timbre timbre_from_string(const std::string& s) {
    if (s == "pure") return Timbre::pure;
    if (s == "bright") return Timbre::bright;
    if (s == "soft") return Timbre::soft;
    throw InputError("unknown timbre: " + s);
}

TempoClass tempo_from_string(const std::string& s) {
    if (s == "slow") return TempoClass::slow;
    if (s == "fast") return TempoClass::fast;
    throw InputError("unknown tempo class: " + s);
}

void FactorSpec::validate() const {
    if (!(root_freq >= 110.0 && root_freq <= 880.0))
        throw InputError("factor spec: root_freq " + std::to_string(root_freq) + " outside [110, 880]");
}

std::string FactorSpec::key() const {
    std::ostringstream os;
    os << std::llround(root_freq * 1000.0) << "|" << to_string(chord) << "|" << to_string(timbre) << "|"
       << to_string(tempo);
    return os.str();
}

std::vector<double> chord_ratios(ChordType c) {
    switch (c) {
        case ChordType::single: return {1.0};
        case ChordType::major: return {1.0, 1.25, 1.5};
        case ChordType::minor: return {1.0, 1.2, 1.5};
        case ChordType::fifth: return {1.0, 1.5};
    }
    return {1.0};
}

std::vector<double> timbre_harmonics(Timbre t) {
    switch (t) {
        case Timbre::pure: return {1.0};
        case Timbre::bright: return {1.0, 0.6, 0.35};
        case Timbre::soft: return {1.0, 0.3};
    }
    return {1.0};
}

double tempo_mod_rate(TempoClass t) { return t == TempoClass::slow ? 2.0 : 6.0; }

AudioClip render_clip(const FactorSpec& f, Rng& rng, int sample_rate, double seconds) {
    f.validate();
    const auto ratios = chord_ratios(f.chord);
    const auto harmonics = timbre_harmonics(f.timbre);
    const double mod_rate = tempo_mod_rate(f.tempo);
    const double mod_depth = 0.45;

    struct Tone {
        double freq, amp, phase;
    };
    std::vector<Tone> tones;
    double amp_sum = 0.0;
    for (size_t r = 0; r < ratios.size(); ++r) {
        const double tone_amp = r == 0 ? 1.0 : 0.5;
        for (size_t h = 0; h < harmonics.size(); ++h) {
            const double freq = f.root_freq * ratios[r] * static_cast<double>(h + 1);
            if (freq >= sample_rate / 2.0) continue;
            const double amp = tone_amp * harmonics[h];
            tones.push_back({freq, amp, rng.uniform(0.0, 2.0 * std::numbers::pi)});
            amp_sum += amp;
        }
    }
    const double norm = 0.9 / amp_sum;

    AudioClip clip;
    clip.sample_rate = sample_rate;
    const auto n = static_cast<size_t>(std::llround(seconds * sample_rate));
    clip.samples.resize(n);
    const double mod_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        double s = 0.0;
        for (const auto& tone : tones)
            s += tone.amp * std::sin(2.0 * std::numbers::pi * tone.freq * t + tone.phase);
        const double env =
            1.0 - mod_depth * 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * mod_rate * t + mod_phase));
        clip.samples[i] = norm * env * s;
    }
    return clip;
}

// --- invertible renderings ---------------------------------------------------

namespace {

const char* palette_word(ChordType c) {
    switch (c) {
        case ChordType::single: return "monochrome";
        case ChordType::major: return "vivid";
        case ChordType::minor: return "muted";
        case ChordType::fifth: return "amber";
    }
    return "?";
}

const char* motif_word(Timbre t) {
    switch (t) {
        case Timbre::pure: return "smooth";
        case Timbre::bright: return "angular";
        case Timbre::soft: return "rounded";
    }
    return "?";
}

const char* motion_word(TempoClass t) { return t == TempoClass::slow ? "drifting" : "darting"; }

const char* mood_word(ChordType c) {
    switch (c) {
        case ChordType::single: return "lonely";
        case ChordType::major: return "joyful";
        case ChordType::minor: return "pensive";
        case ChordType::fifth: return "steadfast";
    }
    return "?";
}

const char* sky_word(Timbre t) {
    switch (t) {
        case Timbre::pure: return "clear";
        case Timbre::bright: return "glittering";
        case Timbre::soft: return "misty";
    }
    return "?";
}

const char* pace_word(TempoClass t) { return t == TempoClass::slow ? "unhurried" : "hurried"; }

const char* caption_tempo_word(TempoClass t) { return t == TempoClass::slow ? "slow-paced" : "fast-paced"; }

const char* caption_timbre_word(Timbre t) {
    switch (t) {
        case Timbre::pure: return "pure-toned";
        case Timbre::bright: return "bright";
        case Timbre::soft: return "mellow";
    }
    return "?";
}

const char* caption_chord_word(ChordType c) {
    switch (c) {
        case ChordType::single: return "single-note";
        case ChordType::major: return "major-chord";
        case ChordType::minor: return "minor-chord";
        case ChordType::fifth: return "open-fifth";
    }
    return "?";
}

bool contains(const std::string& s, const std::string& token) { return s.find(token) != std::string::npos; }

double find_number_after(const std::string& s, const std::string& marker, const char* what) {
    const auto pos = s.find(marker);
    if (pos == std::string::npos) throw InputError(std::string(what) + ": missing '" + marker + "' in: " + s);
    size_t i = pos + marker.size();
    while (i < s.size() && s[i] == ' ') ++i;
    size_t end = i;
    while (end < s.size() && (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.')) ++end;
    if (end == i) throw InputError(std::string(what) + ": no number after '" + marker + "' in: " + s);
    return std::stod(s.substr(i, end - i));
}

template <typename Enum, size_t N>
Enum match_one(const std::string& s, const std::array<std::pair<const char*, Enum>, N>& table,
               const char* what) {
    for (const auto& [word, value] : table)
        if (contains(s, word)) return value;
    throw InputError(std::string(what) + ": no known keyword in: " + s);
}

}  // namespace

std::string render_image_descriptor(const FactorSpec& f) {
    std::ostringstream os;
    os << "scene: " << palette_word(f.chord) << " palette; " << motif_word(f.timbre) << " motif; "
       << motion_word(f.tempo) << " motion; luminance " << std::llround(f.root_freq);
    return os.str();
}

std::string render_story(const FactorSpec& f) {
    std::ostringstream os;
    os << "The " << mood_word(f.chord) << " valley rests beneath " << sky_word(f.timbre)
       << " skies, where " << pace_word(f.tempo) << " travelers pass " << std::llround(f.root_freq)
       << " stone markers.";
    return os.str();
}

std::string render_caption(const FactorSpec& f) {
    std::ostringstream os;
    os << "a " << caption_tempo_word(f.tempo) << " " << caption_timbre_word(f.timbre) << " "
       << caption_chord_word(f.chord) << " piece rooted near " << std::llround(f.root_freq) << " hertz";
    return os.str();
}

FactorSpec parse_image_descriptor(const std::string& s) {
    if (!contains(s, "scene:")) throw InputError("image descriptor: missing 'scene:' prefix in: " + s);
    FactorSpec f;
    f.chord = match_one<ChordType, 4>(
        s,
        {{{"monochrome", ChordType::single},
          {"vivid", ChordType::major},
          {"muted", ChordType::minor},
          {"amber", ChordType::fifth}}},
        "image descriptor");
    f.timbre = match_one<Timbre, 3>(
        s, {{{"smooth", Timbre::pure}, {"angular", Timbre::bright}, {"rounded", Timbre::soft}}},
        "image descriptor");
    f.tempo = match_one<TempoClass, 2>(
        s, {{{"drifting", TempoClass::slow}, {"darting", TempoClass::fast}}}, "image descriptor");
    f.root_freq = find_number_after(s, "luminance", "image descriptor");
    f.validate();
    return f;
}

FactorSpec parse_story(const std::string& s) {
    FactorSpec f;
    f.chord = match_one<ChordType, 4>(
        s,
        {{{"lonely", ChordType::single},
          {"joyful", ChordType::major},
          {"pensive", ChordType::minor},
          {"steadfast", ChordType::fifth}}},
        "story");
    f.timbre = match_one<Timbre, 3>(
        s, {{{"clear", Timbre::pure}, {"glittering", Timbre::bright}, {"misty", Timbre::soft}}}, "story");
    f.tempo = match_one<TempoClass, 2>(s, {{{"unhurried", TempoClass::slow}, {"hurried", TempoClass::fast}}},
                                       "story");
    f.root_freq = find_number_after(s, "pass", "story");
    f.validate();
    return f;
}

FactorSpec parse_caption(const std::string& s) {
    FactorSpec f;
    f.chord = match_one<ChordType, 4>(
        s,
        {{{"single-note", ChordType::single},
          {"major-chord", ChordType::major},
          {"minor-chord", ChordType::minor},
          {"open-fifth", ChordType::fifth}}},
        "caption");
    f.timbre = match_one<Timbre, 3>(
        s, {{{"pure-toned", Timbre::pure}, {"bright", Timbre::bright}, {"mellow", Timbre::soft}}},
        "caption");
    f.tempo = match_one<TempoClass, 2>(
        s, {{{"slow-paced", TempoClass::slow}, {"fast-paced", TempoClass::fast}}}, "caption");
    f.root_freq = find_number_after(s, "rooted near", "caption");
    f.validate();
    return f;
}

std::array<double, 10> factor_features(const FactorSpec& f) {
    std::array<double, 10> v{};
    // scaled log-pitch around 440 Hz, then centered one-hots per factor
    v[0] = 2.0 * std::log2(f.root_freq / 440.0);
    const int c = static_cast<int>(f.chord);
    for (int i = 0; i < 4; ++i) v[static_cast<size_t>(1 + i)] = (i == c ? 1.0 : 0.0) - 0.25;
    const int t = static_cast<int>(f.timbre);
    for (int i = 0; i < 3; ++i) v[static_cast<size_t>(5 + i)] = (i == t ? 1.0 : 0.0) - 1.0 / 3.0;
    const int p = static_cast<int>(f.tempo);
    for (int i = 0; i < 2; ++i) v[static_cast<size_t>(8 + i)] = (i == p ? 1.0 : 0.0) - 0.5;
    return v;
}

}  // namespace musgen
