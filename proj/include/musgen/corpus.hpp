#pragma once

#include <string>
#include <vector>

#include "musgen/encoders.hpp"
#include "musgen/factors.hpp"
#include "musgen/signal.hpp"

namespace musgen {

struct CorpusSample {
    std::string id;
    std::string split;   // "train" or "val"
    std::string source;  // stats grouping, "synthetic" by default
    FactorSpec factors;
    std::string image;    // descriptor text
    std::string story;
    std::string caption;
    std::string wav;      // path relative to the corpus dir
    double duration_s = 0.0;
};

std::string manifest_jsonl(const std::vector<CorpusSample>& samples);
std::vector<CorpusSample> parse_manifest_jsonl(const std::string& text);
void write_manifest(const std::string& path, const std::vector<CorpusSample>& samples);
std::vector<CorpusSample> read_manifest(const std::string& path);

struct SynthSpec {
    int train_samples = 2048;
    int val_samples = 256;
    uint64_t seed = 0;
    int sample_rate = 16000;
    double clip_seconds = 1.0;
};

// The factor grid the default corpus draws from: 3 chord classes x 3 timbres
// x 2 tempi x an 8-note frequency grid.
const std::vector<double>& corpus_freq_grid();
const std::vector<ChordType>& corpus_chords();

FactorSpec draw_corpus_factors(Rng& rng);

// Renders clips and writes wav/ plus manifest_train.jsonl / manifest_val.jsonl
// under out_dir. Deterministic in (spec.seed, out_dir contents).
std::vector<CorpusSample> synth_corpus(const SynthSpec& spec, const std::string& out_dir);

// In-memory prepared view: mel + all four embeddings per sample.
struct PreparedSample {
    CorpusSample meta;
    AudioClip clip;
    MelSpectrogram mel;
    Embedding e_image, e_story, e_caption, e_music;
};

std::vector<PreparedSample> prepare_samples(const std::vector<CorpusSample>& samples,
                                            const std::string& corpus_dir, const SignalConfig& signal,
                                            const EncoderBackend& enc);

}  // namespace musgen
