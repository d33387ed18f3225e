#include "musgen/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "musgen/errors.hpp"

namespace musgen {

namespace fs = std::filesystem;

std::string manifest_jsonl(const std::vector<CorpusSample>& samples) {
    std::ostringstream os;
    for (const auto& s : samples) {
        nlohmann::json j{
            {"id", s.id},
            {"split", s.split},
            {"source", s.source},
            {"factors",
             {{"root_freq", s.factors.root_freq},
              {"chord", to_string(s.factors.chord)},
              {"timbre", to_string(s.factors.timbre)},
              {"tempo", to_string(s.factors.tempo)}}},
            {"image", s.image},
            {"story", s.story},
            {"caption", s.caption},
            {"wav", s.wav},
            {"duration_s", s.duration_s},
        };
        os << j.dump() << "\n";
    }
    return os.str();
}

std::vector<CorpusSample> parse_manifest_jsonl(const std::string& text) {
    std::vector<CorpusSample> out;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            CorpusSample s;
            s.id = j.at("id").get<std::string>();
            s.split = j.value("split", "train");
            s.source = j.value("source", "unknown");
            const auto& f = j.at("factors");
            s.factors.root_freq = f.at("root_freq").get<double>();
            s.factors.chord = chord_from_string(f.at("chord").get<std::string>());
            s.factors.timbre = timbre_from_string(f.at("timbre").get<std::string>());
            s.factors.tempo = tempo_from_string(f.at("tempo").get<std::string>());
            s.image = j.value("image", "");
            s.story = j.value("story", "");
            s.caption = j.value("caption", "");
            s.wav = j.value("wav", "");
            s.duration_s = j.value("duration_s", 0.0);
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& ex) {
            throw IoError("manifest line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return out;
}

void write_manifest(const std::string& path, const std::vector<CorpusSample>& samples) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("write_manifest: cannot open " + path);
    const std::string text = manifest_jsonl(samples);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw IoError("write_manifest: write failed for " + path);
}

std::vector<CorpusSample> read_manifest(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_manifest: cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_manifest_jsonl(ss.str());
}

const std::vector<double>& corpus_freq_grid() {
    // integer-Hz note grid well above the mel filterbank's crowded low end,
    // so chord intervals stay resolvable after mel compression
    static const std::vector<double> grid = {330, 370, 415, 466, 523, 587, 659, 740};
    return grid;
}

const std::vector<ChordType>& corpus_chords() {
    // three classes with disjoint interval content: none / fifth only /
    // third plus fifth, which the FFT-peak oracle separates robustly
    static const std::vector<ChordType> chords = {ChordType::single, ChordType::fifth, ChordType::major};
    return chords;
}

FactorSpec draw_corpus_factors(Rng& rng) {
    FactorSpec f;
    f.root_freq = corpus_freq_grid()[rng.uniform_int(corpus_freq_grid().size())];
    f.chord = corpus_chords()[rng.uniform_int(corpus_chords().size())];
    f.timbre = static_cast<Timbre>(rng.uniform_int(3));
    f.tempo = static_cast<TempoClass>(rng.uniform_int(2));
    return f;
}

std::vector<CorpusSample> synth_corpus(const SynthSpec& spec, const std::string& out_dir) {
    if (spec.train_samples < 1 || spec.val_samples < 0)
        throw InputError("synth_corpus: need at least one training sample");
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "wav", ec);
    if (ec) throw IoError("synth_corpus: cannot create " + out_dir + ": " + ec.message());

    Rng rng(spec.seed);
    std::vector<CorpusSample> all;
    all.reserve(static_cast<size_t>(spec.train_samples + spec.val_samples));

    auto make_split = [&](const std::string& split, int count, Rng split_rng) {
        std::vector<CorpusSample> samples;
        samples.reserve(static_cast<size_t>(count));
        for (int i = 0; i < count; ++i) {
            CorpusSample s;
            std::ostringstream id;
            id << (split == "train" ? "trn" : "val") << "-" << std::setw(5) << std::setfill('0') << i;
            s.id = id.str();
            s.split = split;
            s.source = "synthetic";
            s.factors = draw_corpus_factors(split_rng);
            s.image = render_image_descriptor(s.factors);
            s.story = render_story(s.factors);
            s.caption = render_caption(s.factors);
            s.wav = "wav/" + s.id + ".wav";
            Rng phase = split_rng.fork(static_cast<uint64_t>(i) * 2 + (split == "train" ? 0 : 1));
            const AudioClip clip = render_clip(s.factors, phase, spec.sample_rate, spec.clip_seconds);
            s.duration_s = clip.duration_s();
            write_wav((fs::path(out_dir) / s.wav).string(), clip);
            samples.push_back(std::move(s));
        }
        return samples;
    };

    auto train = make_split("train", spec.train_samples, rng.fork(101));
    auto val = make_split("val", spec.val_samples, rng.fork(202));
    write_manifest((fs::path(out_dir) / "manifest_train.jsonl").string(), train);
    write_manifest((fs::path(out_dir) / "manifest_val.jsonl").string(), val);

    all.insert(all.end(), train.begin(), train.end());
    all.insert(all.end(), val.begin(), val.end());
    return all;
}

std::vector<PreparedSample> prepare_samples(const std::vector<CorpusSample>& samples,
                                            const std::string& corpus_dir, const SignalConfig& signal,
                                            const EncoderBackend& enc) {
    std::vector<PreparedSample> out(samples.size());
    std::vector<std::string> errors(samples.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
        try {
            PreparedSample p;
            p.meta = samples[static_cast<size_t>(i)];
            p.clip = read_wav((fs::path(corpus_dir) / p.meta.wav).string());
            p.mel = mel_spectrogram(p.clip, signal);
            p.e_image = enc.encode_image(p.meta.image);
            p.e_story = enc.encode_story(p.meta.story);
            p.e_caption = enc.encode_caption(p.meta.caption);
            p.e_music = enc.encode_music(p.clip);
            out[static_cast<size_t>(i)] = std::move(p);
        } catch (const std::exception& ex) {
            errors[static_cast<size_t>(i)] = ex.what();
        }
    }
    for (size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            throw IoError("prepare_samples: sample " + samples[i].id + ": " + errors[i]);
    return out;
}

}  // namespace musgen
