#include "musgen/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "musgen/errors.hpp"

namespace musgen::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& text) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw IoError("write failed for " + path);
}

std::string loss_csv(const std::vector<double>& history) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,loss\n";
    for (size_t i = 0; i < history.size(); ++i) os << (i + 1) << "," << history[i] << "\n";
    return os.str();
}

std::string joint_csv(const JointHistory& h) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,loss,loss_gen,loss_align\n";
    for (size_t i = 0; i < h.total.size(); ++i)
        os << (i + 1) << "," << h.total[i] << "," << h.gen[i] << "," << h.align[i] << "\n";
    return os.str();
}

}  // namespace

int exit_code_for(const std::exception& ex) {
    if (dynamic_cast<const ConfigError*>(&ex)) return 2;
    if (dynamic_cast<const InputError*>(&ex)) return 2;
    if (dynamic_cast<const IoError*>(&ex)) return 2;
    if (dynamic_cast<const DependencyError*>(&ex)) return 3;
    if (dynamic_cast<const TransportError*>(&ex)) return 4;
    if (dynamic_cast<const NumericError*>(&ex)) return 5;
    return 1;
}

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    // The frozen encoders are a pure function of the run seed, mirroring
    // pretrained-and-frozen feature extractors.
    encoder_ = std::make_unique<SyntheticEncoder>(cfg_.embed_dim, splitmix64(cfg_.seed ^ 0xE11C0DE));
}

std::string Pipeline::autoencoder_path() const {
    return (fs::path(cfg_.checkpoint_dir) / "autoencoder.ckpt").string();
}
std::string Pipeline::adapters_path() const {
    return (fs::path(cfg_.checkpoint_dir) / "adapters.ckpt").string();
}
std::string Pipeline::vfield_path() const {
    return (fs::path(cfg_.checkpoint_dir) / "vfield.ckpt").string();
}

void Pipeline::require_checkpoint(const std::string& path, const std::string& stage) const {
    if (!fs::exists(path))
        throw DependencyError("missing prerequisite checkpoint for stage '" + stage + "': " + path +
                              " (run `train --stage " + stage + "` first)");
}

std::vector<CorpusSample> Pipeline::synth_data() {
    SynthSpec spec;
    spec.train_samples = cfg_.train_samples;
    spec.val_samples = cfg_.val_samples;
    spec.seed = cfg_.seed;
    spec.sample_rate = cfg_.signal.sample_rate;
    spec.clip_seconds = cfg_.clip_seconds;
    return synth_corpus(spec, cfg_.corpus_dir);
}

std::vector<CorpusSample> Pipeline::load_split(const std::string& split) const {
    const std::string name = split == "train" ? "manifest_train.jsonl" : "manifest_val.jsonl";
    const std::string path = (fs::path(cfg_.corpus_dir) / name).string();
    if (!fs::exists(path))
        throw DependencyError("missing corpus manifest " + path + " (run `synth-data` first)");
    return read_manifest(path);
}

std::vector<PreparedSample> Pipeline::prepare_split(const std::string& split) const {
    return prepare_samples(load_split(split), cfg_.corpus_dir, cfg_.signal, *encoder_);
}

namespace {

AlignmentDataset to_alignment_dataset(const std::vector<PreparedSample>& prepared) {
    AlignmentDataset out;
    out.reserve(prepared.size());
    for (const auto& p : prepared) out.push_back({p.e_image, p.e_story, p.e_caption, p.e_music});
    return out;
}

GenDataset to_gen_dataset(const std::vector<PreparedSample>& prepared, const AutoencoderModel& ae,
                          const AdapterStack* adapters, ConditioningMode mode) {
    GenDataset out(prepared.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(prepared.size()); ++i) {
        const auto& p = prepared[static_cast<size_t>(i)];
        GenSample s;
        s.z1 = ae.encode(p.mel).vector;
        s.music = p.e_music.vector;
        switch (mode) {
            case ConditioningMode::aligned:
                s.cond_image = adapters->apply(Modality::image, p.e_image.vector);
                s.cond_story = adapters->apply(Modality::story, p.e_story.vector);
                s.cond_caption = adapters->apply(Modality::caption, p.e_caption.vector);
                break;
            case ConditioningMode::raw_features:
                s.cond_image = p.e_image.vector;
                s.cond_story = p.e_story.vector;
                s.cond_caption = p.e_caption.vector;
                break;
            case ConditioningMode::oracle_music_embedding:
                s.cond_image = p.e_music.vector;
                s.cond_story = p.e_music.vector;
                s.cond_caption = p.e_music.vector;
                break;
        }
        out[static_cast<size_t>(i)] = std::move(s);
    }
    return out;
}

JointDataset to_joint_dataset(const std::vector<PreparedSample>& prepared, const AutoencoderModel& ae) {
    JointDataset out(prepared.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(prepared.size()); ++i) {
        const auto& p = prepared[static_cast<size_t>(i)];
        JointSample s;
        s.z1 = ae.encode(p.mel).vector;
        s.image = p.e_image;
        s.story = p.e_story;
        s.caption = p.e_caption;
        s.music = p.e_music;
        out[static_cast<size_t>(i)] = std::move(s);
    }
    return out;
}

}  // namespace

std::vector<double> Pipeline::train_stage(const std::string& stage) {
    fs::create_directories(cfg_.checkpoint_dir);
    fs::create_directories(cfg_.report_dir);
    const uint64_t hash = cfg_.model_hash();

    if (stage == "autoencoder") {
        const auto prepared = prepare_split("train");
        std::vector<MelSpectrogram> mels;
        mels.reserve(prepared.size());
        for (const auto& p : prepared) mels.push_back(p.mel);
        LatentTrainConfig lc;
        lc.latent_dim = cfg_.latent_dim;
        lc.hidden1 = cfg_.ae_hidden1;
        lc.hidden2 = cfg_.ae_hidden2;
        lc.optim = cfg_.optim;
        lc.optim.lr = cfg_.autoencoder_lr;
        lc.epochs = cfg_.autoencoder_epochs;
        lc.batch_size = cfg_.batch_size;
        lc.seed = splitmix64(cfg_.seed ^ 0xAE0001);
        auto result = train_autoencoder(mels, lc);
        save_autoencoder(autoencoder_path(), result.model, hash);
        write_text((fs::path(cfg_.report_dir) / "loss_autoencoder.csv").string(),
                   loss_csv(result.loss_history));
        return result.loss_history;
    }

    if (stage == "align") {
        const auto prepared = prepare_split("train");
        const auto dataset = to_alignment_dataset(prepared);
        Rng init(splitmix64(cfg_.seed ^ 0xA11A9));
        AdapterStack adapters(cfg_.embed_dim, cfg_.adapter_layers, cfg_.adapter_hidden_mult, init);
        TrainOptions opt;
        opt.optim = cfg_.optim;
        opt.epochs = cfg_.align_epochs;
        opt.batch_size = cfg_.batch_size;
        opt.seed = splitmix64(cfg_.seed ^ 0xA11A90);
        const auto history = train_alignment(dataset, adapters, opt);
        save_adapters(adapters_path(), adapters, hash, "align");
        write_text((fs::path(cfg_.report_dir) / "loss_align.csv").string(), loss_csv(history));
        return history;
    }

    if (stage == "gen") {
        require_checkpoint(autoencoder_path(), "autoencoder");
        require_checkpoint(adapters_path(), "align");
        const auto ae = load_autoencoder(autoencoder_path());
        const auto adapters = load_adapters(adapters_path());
        const auto prepared = prepare_split("train");
        const auto dataset = to_gen_dataset(prepared, ae, &adapters, ConditioningMode::aligned);
        Rng init(splitmix64(cfg_.seed ^ 0x6E001));
        VectorFieldNet net(cfg_.latent_dim, cfg_.embed_dim, cfg_.vf_width, cfg_.vf_hidden_layers,
                           cfg_.time_embed_dim, init);
        GenTrainOptions opt;
        opt.base.optim = cfg_.optim;
        opt.base.epochs = cfg_.gen_epochs;
        opt.base.batch_size = cfg_.batch_size;
        opt.base.seed = splitmix64(cfg_.seed ^ 0x6E010);
        const auto history = train_generation(dataset, net, cfg_.flow, opt);
        save_vector_field(vfield_path(), net, hash, "gen");
        write_text((fs::path(cfg_.report_dir) / "loss_gen.csv").string(), loss_csv(history));
        return history;
    }

    if (stage == "joint") {
        require_checkpoint(autoencoder_path(), "autoencoder");
        require_checkpoint(adapters_path(), "align");
        require_checkpoint(vfield_path(), "gen");
        const auto ae = load_autoencoder(autoencoder_path());
        auto adapters = load_adapters(adapters_path());
        auto net = load_vector_field(vfield_path());
        const auto prepared = prepare_split("train");
        const auto dataset = to_joint_dataset(prepared, ae);
        TrainOptions opt;
        opt.optim = cfg_.optim;
        opt.epochs = cfg_.joint_epochs;
        opt.batch_size = cfg_.batch_size;
        opt.seed = splitmix64(cfg_.seed ^ 0x70017);
        const auto history = train_joint(dataset, net, adapters, cfg_.flow, cfg_.lambda, opt);
        save_adapters(adapters_path(), adapters, cfg_.model_hash(), "joint");
        save_vector_field(vfield_path(), net, cfg_.model_hash(), "joint");
        write_text((fs::path(cfg_.report_dir) / "loss_joint.csv").string(), joint_csv(history));
        return history.total;
    }

    throw ConfigError("unknown training stage: " + stage +
                      " (expected autoencoder | align | gen | joint)");
}

std::vector<std::string> Pipeline::generate(const GenerateRequest& req) {
    if (!req.image && !req.story && !req.caption)
        throw ContractError("generate: at least one of image/story/caption is required");
    if (req.n < 1) throw InputError("generate: n must be >= 1");
    require_checkpoint(autoencoder_path(), "autoencoder");
    require_checkpoint(adapters_path(), "align");
    require_checkpoint(vfield_path(), "gen");
    const auto ae = load_autoencoder(autoencoder_path());
    const auto adapters = load_adapters(adapters_path());
    const auto net = load_vector_field(vfield_path());

    ConditionSet conds;
    if (req.image) conds.image = encoder_->encode_image(*req.image);
    if (req.story) conds.story = encoder_->encode_story(*req.story);
    if (req.caption) conds.caption = encoder_->encode_caption(*req.caption);
    const Embedding ef = fuse(conds, adapters);

    fs::create_directories(req.out_dir);
    const std::vector<std::vector<double>> conds_rows(static_cast<size_t>(req.n), ef.vector);
    const Rng rng(splitmix64(req.seed ^ 0x9E4E8A7E));
    const auto latents = sample_batch(conds_rows, net, cfg_.flow, rng);

    std::vector<std::string> paths(static_cast<size_t>(req.n));
    std::vector<std::string> errors(static_cast<size_t>(req.n));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < req.n; ++i) {
        try {
            LatentCode code;
            code.vector = latents[static_cast<size_t>(i)];
            if (!all_finite(code.vector)) throw NumericError("generate: non-finite latent sample");
            const MelSpectrogram mel = ae.decode(code);
            const AudioClip clip = griffin_lim(mel, cfg_.signal);
            std::ostringstream name;
            name << "gen-" << std::setw(4) << std::setfill('0') << i << ".wav";
            const std::string path = (fs::path(req.out_dir) / name.str()).string();
            write_wav(path, clip);
            paths[static_cast<size_t>(i)] = path;
        } catch (const std::exception& ex) {
            errors[static_cast<size_t>(i)] = ex.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw NumericError("generate: " + e);

    std::ostringstream manifest;
    for (int i = 0; i < req.n; ++i) {
        nlohmann::json j{{"wav", paths[static_cast<size_t>(i)]},
                         {"seed", req.seed},
                         {"index", i},
                         {"image", req.image ? *req.image : ""},
                         {"story", req.story ? *req.story : ""},
                         {"caption", req.caption ? *req.caption : ""}};
        manifest << j.dump() << "\n";
    }
    write_text((fs::path(req.out_dir) / "manifest.jsonl").string(), manifest.str());
    return paths;
}

Pipeline::EvaluateResult Pipeline::evaluate(const std::string& split, bool self_check,
                                            const std::string& report_name) {
    const auto prepared = prepare_split(split);
    if (prepared.size() < 2) throw InputError("evaluate: split too small");

    std::vector<std::vector<double>> real_music;
    real_music.reserve(prepared.size());
    for (const auto& p : prepared) real_music.push_back(p.e_music.vector);

    std::vector<AudioClip> clips;
    std::vector<std::vector<double>> refs;
    std::vector<std::vector<double>> gen_music;

    if (self_check) {
        for (const auto& p : prepared) clips.push_back(p.clip);
        refs = real_music;
        gen_music = real_music;
    } else {
        require_checkpoint(autoencoder_path(), "autoencoder");
        require_checkpoint(adapters_path(), "align");
        require_checkpoint(vfield_path(), "gen");
        const auto ae = load_autoencoder(autoencoder_path());
        const auto adapters = load_adapters(adapters_path());
        const auto net = load_vector_field(vfield_path());

        std::vector<std::vector<double>> conds;
        conds.reserve(prepared.size());
        for (const auto& p : prepared) {
            ConditionSet cs;
            cs.image = p.e_image;
            cs.story = p.e_story;
            cs.caption = p.e_caption;
            const Embedding ef = fuse(cs, adapters);
            conds.push_back(ef.vector);
            refs.push_back(ef.vector);
        }
        const Rng rng(splitmix64(cfg_.seed ^ 0xEA71));
        const auto latents = sample_batch(conds, net, cfg_.flow, rng);
        clips.resize(prepared.size());
        std::vector<std::string> errors(prepared.size());
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < static_cast<int>(prepared.size()); ++i) {
            try {
                LatentCode code;
                code.vector = latents[static_cast<size_t>(i)];
                const MelSpectrogram mel = ae.decode(code);
                clips[static_cast<size_t>(i)] = griffin_lim(mel, cfg_.signal);
            } catch (const std::exception& ex) {
                errors[static_cast<size_t>(i)] = ex.what();
            }
        }
        for (const auto& e : errors)
            if (!e.empty()) throw NumericError("evaluate: " + e);
        gen_music.resize(clips.size());
        for (size_t i = 0; i < clips.size(); ++i) gen_music[i] = encoder_->encode_music(clips[i]).vector;
    }

    EvaluateResult res;
    res.frechet = frechet_distance(fit_gaussian(gen_music), fit_gaussian(real_music));
    res.kl = gaussian_kl(fit_gaussian(gen_music), fit_gaussian(real_music));
    res.condition_score = condition_score(clips, refs, *encoder_);

    std::vector<AblationRow> rows{{self_check ? "self" : "model", 0, res.frechet, res.kl, res.condition_score}};
    fs::create_directories(cfg_.report_dir);
    write_text((fs::path(cfg_.report_dir) / report_name).string(), ablation_csv(rows));
    return res;
}

WorkflowResult Pipeline::annotate() {
    const auto samples = load_split("train");
    std::vector<ImageItem> images;
    images.reserve(samples.size());
    for (const auto& s : samples) images.push_back({s.id, s.image, s.source});

    std::vector<MusicItem> pool(samples.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
        const auto& s = samples[static_cast<size_t>(i)];
        const AudioClip clip = read_wav((fs::path(cfg_.corpus_dir) / s.wav).string());
        pool[static_cast<size_t>(i)] = make_music_item(s.wav, clip);
    }

    AgentConfig agent_cfg;
    agent_cfg.review_threshold = cfg_.review_threshold;
    agent_cfg.filter_threshold = cfg_.filter_threshold;
    agent_cfg.backends = mock_backends(*encoder_);
    const WorkflowResult result = run_workflow(images, pool, agent_cfg);

    fs::create_directories(cfg_.report_dir);
    write_text((fs::path(cfg_.report_dir) / "quadruples.jsonl").string(),
               quadruples_jsonl(result.quadruples));
    write_text((fs::path(cfg_.report_dir) / "rejects.jsonl").string(), rejects_jsonl(result.rejects));
    write_text((fs::path(cfg_.report_dir) / "stats.txt").string(), result.stats.table());
    return result;
}

std::vector<AblationRow> Pipeline::ablate(uint64_t seed_offset) {
    require_checkpoint(autoencoder_path(), "autoencoder");
    require_checkpoint(adapters_path(), "align");
    const auto ae = load_autoencoder(autoencoder_path());
    const auto adapters = load_adapters(adapters_path());

    auto train_prepared = prepare_split("train");
    if (static_cast<int>(train_prepared.size()) > cfg_.ablation_train_subset)
        train_prepared.resize(static_cast<size_t>(cfg_.ablation_train_subset));
    auto val_prepared = prepare_split("val");
    if (static_cast<int>(val_prepared.size()) > cfg_.ablation_val_subset)
        val_prepared.resize(static_cast<size_t>(cfg_.ablation_val_subset));

    // shared evaluation context: references are the aligned condition
    // embeddings of the validation samples; real-music stats are fixed
    std::vector<std::vector<double>> val_refs;
    std::vector<std::vector<double>> val_real;
    for (const auto& p : val_prepared) {
        ConditionSet cs;
        cs.image = p.e_image;
        cs.story = p.e_story;
        cs.caption = p.e_caption;
        val_refs.push_back(fuse(cs, adapters).vector);
        val_real.push_back(p.e_music.vector);
    }
    const GaussianStats real_stats = fit_gaussian(val_real);

    std::vector<AblationRow> rows;
    const uint64_t run_seed = splitmix64(cfg_.seed ^ (0xAB1A7E + seed_offset));
    for (const ConditioningMode mode :
         {ConditioningMode::aligned, ConditioningMode::raw_features,
          ConditioningMode::oracle_music_embedding}) {
        const auto dataset = to_gen_dataset(train_prepared, ae, &adapters, mode);
        // per-arm condition vectors for sampling at evaluation time
        std::vector<std::vector<double>> val_conds;
        for (const auto& p : val_prepared) {
            switch (mode) {
                case ConditioningMode::aligned: {
                    ConditionSet cs;
                    cs.image = p.e_image;
                    cs.story = p.e_story;
                    cs.caption = p.e_caption;
                    val_conds.push_back(fuse(cs, adapters).vector);
                    break;
                }
                case ConditioningMode::raw_features: {
                    std::vector<const std::vector<double>*> present = {&p.e_image.vector, &p.e_story.vector,
                                                                       &p.e_caption.vector};
                    val_conds.push_back(fuse_embeddings(present));
                    break;
                }
                case ConditioningMode::oracle_music_embedding:
                    val_conds.push_back(p.e_music.vector);
                    break;
            }
        }

        Rng init(splitmix64(run_seed ^ (static_cast<uint64_t>(mode) + 1)));
        VectorFieldNet net(cfg_.latent_dim, cfg_.embed_dim, cfg_.vf_width, cfg_.vf_hidden_layers,
                           cfg_.time_embed_dim, init);
        GenTrainOptions opt;
        opt.mode = mode;
        opt.base.optim = cfg_.optim;
        opt.base.epochs = cfg_.ablation_epochs;
        opt.base.batch_size = cfg_.batch_size;
        // identical trainer randomness across arms
        opt.base.seed = splitmix64(run_seed ^ 0x77AA);
        opt.eval_every = cfg_.ablation_eval_every;
        opt.eval_on_final = true;
        opt.eval_hook = [&](int epoch, const VectorFieldNet& net_now) {
            const Rng rng(splitmix64(run_seed ^ (static_cast<uint64_t>(epoch) << 8) ^ 0x5A11));
            const auto latents = sample_batch(val_conds, net_now, cfg_.flow, rng);
            std::vector<AudioClip> clips(latents.size());
            std::vector<std::string> errors(latents.size());
#pragma omp parallel for schedule(dynamic)
            for (int i = 0; i < static_cast<int>(latents.size()); ++i) {
                try {
                    LatentCode code;
                    code.vector = latents[static_cast<size_t>(i)];
                    clips[static_cast<size_t>(i)] = griffin_lim(ae.decode(code), cfg_.signal);
                } catch (const std::exception& ex) {
                    errors[static_cast<size_t>(i)] = ex.what();
                }
            }
            for (const auto& e : errors)
                if (!e.empty()) throw NumericError("ablation eval: " + e);
            std::vector<std::vector<double>> gen_music(clips.size());
            for (size_t i = 0; i < clips.size(); ++i)
                gen_music[i] = encoder_->encode_music(clips[i]).vector;
            AblationRow row;
            row.arm = to_string(mode);
            row.epoch = epoch;
            row.frechet = frechet_distance(fit_gaussian(gen_music), real_stats);
            row.kl = gaussian_kl(fit_gaussian(gen_music), real_stats);
            row.condition_score = condition_score(clips, val_refs, *encoder_);
            rows.push_back(row);
        };
        train_generation(dataset, net, cfg_.flow, opt);
    }
    return rows;
}

void Pipeline::ablate_all() {
    fs::create_directories(cfg_.report_dir);
    for (int s = 0; s < cfg_.ablation_seeds; ++s) {
        const auto rows = ablate(static_cast<uint64_t>(s));
        std::ostringstream name;
        name << "ablation_seed" << s << ".csv";
        write_text((fs::path(cfg_.report_dir) / name.str()).string(), ablation_csv(rows));
    }
}

// --- command line ------------------------------------------------------------

namespace {

RunConfig config_from_cli(const std::string& config_path, const std::optional<uint64_t>& seed,
                          const std::optional<std::string>& corpus_dir,
                          const std::optional<std::string>& checkpoint_dir,
                          const std::optional<std::string>& report_dir) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config_file(config_path);
    if (seed) cfg.seed = *seed;
    if (corpus_dir) cfg.corpus_dir = *corpus_dir;
    if (checkpoint_dir) cfg.checkpoint_dir = *checkpoint_dir;
    if (report_dir) cfg.report_dir = *report_dir;
    apply_env_overrides(cfg);
    cfg.validate();
    return cfg;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"desk-scale multimodal music generation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> corpus_dir, checkpoint_dir, report_dir;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "seed override (flag > file > default)");
    app.add_option("--corpus-dir", corpus_dir, "corpus directory override");
    app.add_option("--checkpoint-dir", checkpoint_dir, "checkpoint directory override");
    app.add_option("--report-dir", report_dir, "report directory override");

    auto* synth = app.add_subcommand("synth-data", "render the synthetic corpus");
    std::optional<int> synth_n, synth_val_n;
    synth->add_option("--n", synth_n, "training sample count override");
    synth->add_option("--val-n", synth_val_n, "validation sample count override");

    auto* train = app.add_subcommand("train", "run one training stage");
    std::string stage;
    std::optional<int> epochs_override;
    train->add_option("--stage", stage, "autoencoder | align | gen | joint")->required();
    train->add_option("--epochs", epochs_override, "epoch count override for the stage");

    auto* generate = app.add_subcommand("generate", "sample music from conditions");
    std::optional<std::string> g_image, g_story, g_caption;
    int g_n = 1;
    uint64_t g_seed = 0;
    std::string g_out = "generated";
    generate->add_option("--image", g_image, "image descriptor condition");
    generate->add_option("--story", g_story, "story text condition");
    generate->add_option("--caption", g_caption, "music caption condition");
    generate->add_option("--n", g_n, "number of clips");
    generate->add_option("--gen-seed", g_seed, "sampling seed");
    generate->add_option("--out", g_out, "output directory");

    auto* evaluate = app.add_subcommand("evaluate", "objective metrics on a split");
    std::string e_split = "val";
    bool e_self = false;
    evaluate->add_option("--split", e_split, "train | val");
    evaluate->add_flag("--self", e_self, "score ground-truth clips against themselves");

    auto* annotate = app.add_subcommand("annotate", "run the four-agent annotation workflow");
    auto* ablate = app.add_subcommand("ablate", "conditioning ablation (aligned / raw / oracle)");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = config_from_cli(config_path, seed, corpus_dir, checkpoint_dir, report_dir);
        if (synth->parsed()) {
            if (synth_n) cfg.train_samples = *synth_n;
            if (synth_val_n) cfg.val_samples = *synth_val_n;
            cfg.validate();
            Pipeline p(cfg);
            const auto samples = p.synth_data();
            std::cout << "wrote " << samples.size() << " samples to " << cfg.corpus_dir << "\n";
        } else if (train->parsed()) {
            if (epochs_override) {
                if (stage == "autoencoder") cfg.autoencoder_epochs = *epochs_override;
                else if (stage == "align") cfg.align_epochs = *epochs_override;
                else if (stage == "gen") cfg.gen_epochs = *epochs_override;
                else if (stage == "joint") cfg.joint_epochs = *epochs_override;
                cfg.validate();
            }
            Pipeline p(cfg);
            const auto history = p.train_stage(stage);
            std::cout << "stage " << stage << ": " << history.size() << " epochs, final loss "
                      << (history.empty() ? 0.0 : history.back()) << "\n";
        } else if (generate->parsed()) {
            Pipeline p(cfg);
            Pipeline::GenerateRequest req;
            req.image = g_image;
            req.story = g_story;
            req.caption = g_caption;
            req.n = g_n;
            req.seed = g_seed;
            req.out_dir = g_out;
            const auto paths = p.generate(req);
            std::cout << "wrote " << paths.size() << " clips to " << g_out << "\n";
        } else if (evaluate->parsed()) {
            Pipeline p(cfg);
            const auto res = p.evaluate(e_split, e_self, "metrics_" + e_split + ".csv");
            std::cout << "frechet " << res.frechet << " kl " << res.kl << " condition_score "
                      << res.condition_score << "\n";
        } else if (annotate->parsed()) {
            Pipeline p(cfg);
            const auto result = p.annotate();
            std::cout << result.stats.table();
        } else if (ablate->parsed()) {
            Pipeline p(cfg);
            p.ablate_all();
            std::cout << "wrote ablation reports to " << cfg.report_dir << "\n";
        }
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return exit_code_for(ex);
    }
}

}  // namespace musgen::cli
