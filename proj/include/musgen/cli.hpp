#pragma once

#include <optional>
#include <string>
#include <vector>

#include "musgen/agents.hpp"
#include "musgen/checkpoint.hpp"
#include "musgen/config.hpp"
#include "musgen/corpus.hpp"
#include "musgen/metrics.hpp"

namespace musgen::cli {

// Exit codes: 0 ok, 1 internal error, 2 config/input error, 3 missing stage
// dependency, 4 transport error, 5 numeric failure.
int exit_code_for(const std::exception& ex);

// Full command-line entry point; returns the process exit code.
int run(const std::vector<std::string>& args);

// Orchestration used by the CLI, the tests, and the acceptance suite.
class Pipeline {
  public:
    explicit Pipeline(RunConfig cfg);

    const RunConfig& config() const { return cfg_; }
    const SyntheticEncoder& encoder() const { return *encoder_; }

    std::string autoencoder_path() const;
    std::string adapters_path() const;
    std::string vfield_path() const;

    // synth-data: renders the corpus and returns the manifest rows.
    std::vector<CorpusSample> synth_data();

    // train --stage ...: returns the per-epoch loss history (total loss for
    // joint). Writes the checkpoint and a per-epoch loss CSV.
    std::vector<double> train_stage(const std::string& stage);

    struct GenerateRequest {
        std::optional<std::string> image;
        std::optional<std::string> story;
        std::optional<std::string> caption;
        int n = 1;
        uint64_t seed = 0;
        std::string out_dir;
    };
    // returns the written wav paths
    std::vector<std::string> generate(const GenerateRequest& req);

    struct EvaluateResult {
        double frechet = 0.0;
        double kl = 0.0;
        double condition_score = 0.0;
    };
    EvaluateResult evaluate(const std::string& split, bool self_check, const std::string& report_name);

    WorkflowResult annotate();

    std::vector<AblationRow> ablate(uint64_t seed_offset);  // one full 3-arm run
    void ablate_all();                                      // cfg.ablation_seeds runs + CSV reports

    // shared helpers
    std::vector<CorpusSample> load_split(const std::string& split) const;
    std::vector<PreparedSample> prepare_split(const std::string& split) const;

  private:
    void require_checkpoint(const std::string& path, const std::string& stage) const;

    RunConfig cfg_;
    std::unique_ptr<SyntheticEncoder> encoder_;
};

}  // namespace musgen::cli
