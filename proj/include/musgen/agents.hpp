#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "musgen/encoders.hpp"

namespace musgen {

struct ImageItem {
    std::string ref;         // path or id
    std::string descriptor;  // image content stand-in
    std::string source;      // originating dataset name (stats grouping)
};

struct MusicItem {
    std::string ref;
    double duration_s = 0.0;
    std::array<double, 8> sig_features{};  // precomputed signature features
};

MusicItem make_music_item(std::string ref, const AudioClip& clip);

struct Quadruple {
    std::string image_ref;
    std::string story;
    std::string caption;
    std::string music_ref;
    double review_score = 0.0;
    double filter_score = 0.0;
};

struct RejectRecord {
    std::string image_ref;
    std::string stage;  // "script", "review", "compose", "filter", "error"
    double score = 0.0;
    std::string detail;
};

struct DatasetStats {
    struct Row {
        std::string source;
        int64_t count = 0;
        double hours = 0.0;
    };
    std::vector<Row> rows;  // sorted by source name
    int64_t total_count = 0;
    double total_hours = 0.0;

    // Plain-text table with Num (k) and Dur (h) columns plus a total line.
    std::string table() const;
};

// Pluggable stage backends. Mocks are factor-grounded; remote variants speak
// the JSON-over-HTTP protocol of the encoders module plus /caption.
struct AgentBackends {
    std::function<std::string(const ImageItem&)> captioner;  // story writer
    std::function<double(const ImageItem&, const std::string& story)> image_text_score;
    std::function<std::string(const ImageItem&, const std::string& story)> composer;
    std::function<double(const std::string& caption, const MusicItem&)> audio_text_score;
};

AgentBackends mock_backends(const SyntheticEncoder& enc);
AgentBackends remote_backends(const std::string& endpoint, double timeout_s = 30.0);

struct AgentConfig {
    double review_threshold = 0.3;
    double filter_threshold = 0.3;
    AgentBackends backends;

    void validate() const;  // thresholds within [-1, 1]
};

// Stage 1: descriptive story text for the image. Empty output is rejected.
std::string write_script(const ImageItem& image, const AgentBackends& backends);

struct ReviewResult {
    bool accepted = false;
    double score = 0.0;
};

// Stage 2: image/story similarity, accept iff score >= threshold.
ReviewResult review_script(const ImageItem& image, const std::string& story,
                           const AgentBackends& backends, double threshold);

// Stage 3: music caption for the reviewed pair. Empty output is rejected.
std::string compose_caption(const ImageItem& image, const std::string& story,
                            const AgentBackends& backends);

struct FilterResult {
    bool matched = false;
    int index = -1;
    double score = 0.0;
    std::string music_ref;
};

// Stage 4: argmax similarity over the pool; a match requires the best score
// to reach the threshold. Ties keep the lowest index.
FilterResult filter_music(const std::string& caption, const std::vector<MusicItem>& pool,
                          const AgentBackends& backends, double threshold);

struct WorkflowResult {
    std::vector<Quadruple> quadruples;
    std::vector<RejectRecord> rejects;
    DatasetStats stats;
};

// Full four-stage pipeline. Items are processed independently (in parallel)
// with per-item failure isolation; outputs follow the input order.
WorkflowResult run_workflow(const std::vector<ImageItem>& images, const std::vector<MusicItem>& pool,
                            const AgentConfig& cfg);

std::string quadruples_jsonl(const std::vector<Quadruple>& quads);
std::string rejects_jsonl(const std::vector<RejectRecord>& rejects);

}  // namespace musgen
