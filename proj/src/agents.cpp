#include "musgen/agents.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "musgen/errors.hpp"
#include "musgen/factors.hpp"

namespace musgen {

MusicItem make_music_item(std::string ref, const AudioClip& clip) {
    MusicItem item;
    item.ref = std::move(ref);
    item.duration_s = clip.duration_s();
    item.sig_features = analyze_clip(clip).features();
    return item;
}

std::string DatasetStats::table() const {
    std::ostringstream os;
    os << std::left << std::setw(24) << "Dataset" << std::right << std::setw(10) << "Num (k)"
       << std::setw(10) << "Dur (h)" << "\n";
    os << std::string(44, '-') << "\n";
    os << std::fixed << std::setprecision(2);
    for (const auto& r : rows)
        os << std::left << std::setw(24) << r.source << std::right << std::setw(10)
           << (static_cast<double>(r.count) / 1000.0) << std::setw(10) << r.hours << "\n";
    os << std::string(44, '-') << "\n";
    os << std::left << std::setw(24) << "Total" << std::right << std::setw(10)
       << (static_cast<double>(total_count) / 1000.0) << std::setw(10) << total_hours << "\n";
    return os.str();
}

void AgentConfig::validate() const {
    if (review_threshold < -1.0 || review_threshold > 1.0 || filter_threshold < -1.0 ||
        filter_threshold > 1.0)
        throw ConfigError("agents: thresholds must lie in [-1, 1]");
}

AgentBackends mock_backends(const SyntheticEncoder& enc) {
    AgentBackends b;
    b.captioner = [](const ImageItem& img) { return render_story(parse_image_descriptor(img.descriptor)); };
    b.image_text_score = [&enc](const ImageItem& img, const std::string& story) {
        return enc.image_story_score(img.descriptor, story);
    };
    b.composer = [](const ImageItem& img, const std::string&) {
        return render_caption(parse_image_descriptor(img.descriptor));
    };
    b.audio_text_score = [&enc](const std::string& caption, const MusicItem& item) {
        const auto expect = enc.canonical_caption_features(caption);
        return cosine(std::vector<double>(expect.begin(), expect.end()),
                      std::vector<double>(item.sig_features.begin(), item.sig_features.end()));
    };
    return b;
}

AgentBackends remote_backends(const std::string& endpoint, double timeout_s) {
    auto post_json = [endpoint, timeout_s](const std::string& path, const nlohmann::json& body) {
        httplib::Client client(endpoint);
        client.set_connection_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s * 1000)));
        client.set_read_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s * 1000)));
        auto res = client.Post(path, body.dump(), "application/json");
        if (!res)
            throw TransportError("agents: no response from " + endpoint + path + " (" +
                                 httplib::to_string(res.error()) + ")");
        if (res->status != 200)
            throw TransportError("agents: " + endpoint + path + " returned status " +
                                 std::to_string(res->status));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& ex) {
            throw TransportError("agents: malformed reply from " + endpoint + path + ": " + ex.what());
        }
    };
    auto embed = [post_json](const std::string& modality, const std::string& payload) {
        nlohmann::json body{{"modality", modality}, {"payload_b64", base64_encode(payload)}};
        const auto j = post_json("/embed", body);
        if (!j.contains("vector")) throw TransportError("agents: /embed reply missing vector");
        return j.at("vector").get<std::vector<double>>();
    };

    AgentBackends b;
    b.captioner = [post_json](const ImageItem& img) {
        nlohmann::json body{{"image_b64", base64_encode(img.descriptor)}, {"story", ""}};
        const auto j = post_json("/caption", body);
        if (!j.contains("caption")) throw TransportError("agents: /caption reply missing caption");
        return j.at("caption").get<std::string>();
    };
    b.composer = [post_json](const ImageItem& img, const std::string& story) {
        nlohmann::json body{{"image_b64", base64_encode(img.descriptor)}, {"story", story}};
        const auto j = post_json("/caption", body);
        if (!j.contains("caption")) throw TransportError("agents: /caption reply missing caption");
        return j.at("caption").get<std::string>();
    };
    b.image_text_score = [embed](const ImageItem& img, const std::string& story) {
        return cosine(embed("image", img.descriptor), embed("story", story));
    };
    b.audio_text_score = [embed](const std::string& caption, const MusicItem& item) {
        // remote CLAP-analog scoring compares caption embedding with the
        // pool item's stored reference embedding fetched per call
        const auto ce = embed("caption", caption);
        const auto me = embed("music", item.ref);
        return cosine(ce, me);
    };
    return b;
}

std::string write_script(const ImageItem& image, const AgentBackends& backends) {
    if (!backends.captioner) throw ContractError("write_script: no captioner backend");
    const std::string story = backends.captioner(image);
    if (story.empty()) throw InputError("write_script: backend produced empty story for " + image.ref);
    return story;
}

ReviewResult review_script(const ImageItem& image, const std::string& story,
                           const AgentBackends& backends, double threshold) {
    if (!backends.image_text_score) throw ContractError("review_script: no scorer backend");
    const double score = backends.image_text_score(image, story);
    return {score >= threshold, score};
}

std::string compose_caption(const ImageItem& image, const std::string& story,
                            const AgentBackends& backends) {
    if (!backends.composer) throw ContractError("compose_caption: no composer backend");
    const std::string caption = backends.composer(image, story);
    if (caption.empty()) throw InputError("compose_caption: backend produced empty caption for " + image.ref);
    return caption;
}

FilterResult filter_music(const std::string& caption, const std::vector<MusicItem>& pool,
                          const AgentBackends& backends, double threshold) {
    if (pool.empty()) throw InputError("filter_music: empty music pool");
    if (!backends.audio_text_score) throw ContractError("filter_music: no scorer backend");
    FilterResult best;
    for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
        const double s = backends.audio_text_score(caption, pool[static_cast<size_t>(i)]);
        if (best.index < 0 || s > best.score) {
            best.index = i;
            best.score = s;
            best.music_ref = pool[static_cast<size_t>(i)].ref;
        }
    }
    best.matched = best.score >= threshold;
    if (!best.matched) {
        best.index = -1;
        best.music_ref.clear();
    }
    return best;
}

WorkflowResult run_workflow(const std::vector<ImageItem>& images, const std::vector<MusicItem>& pool,
                            const AgentConfig& cfg) {
    cfg.validate();
    if (images.empty()) throw InputError("run_workflow: no images");
    if (pool.empty()) throw InputError("run_workflow: empty music pool");

    struct ItemOutcome {
        std::optional<Quadruple> quad;
        std::optional<RejectRecord> reject;
        double duration_s = 0.0;
        std::string source;
    };
    std::vector<ItemOutcome> outcomes(images.size());

#pragma omp parallel for schedule(dynamic)
    for (int idx = 0; idx < static_cast<int>(images.size()); ++idx) {
        const ImageItem& img = images[static_cast<size_t>(idx)];
        ItemOutcome& out = outcomes[static_cast<size_t>(idx)];
        out.source = img.source.empty() ? "unknown" : img.source;
        try {
            const std::string story = write_script(img, cfg.backends);
            const ReviewResult review = review_script(img, story, cfg.backends, cfg.review_threshold);
            if (!review.accepted) {
                out.reject = RejectRecord{img.ref, "review", review.score, ""};
                continue;
            }
            const std::string caption = compose_caption(img, story, cfg.backends);
            const FilterResult filt = filter_music(caption, pool, cfg.backends, cfg.filter_threshold);
            if (!filt.matched) {
                out.reject = RejectRecord{img.ref, "filter", filt.score, ""};
                continue;
            }
            out.quad = Quadruple{img.ref, story, caption, filt.music_ref, review.score, filt.score};
            out.duration_s = pool[static_cast<size_t>(filt.index)].duration_s;
        } catch (const std::exception& ex) {
            // one bad item must not abort the run
            out.reject = RejectRecord{img.ref, "error", 0.0, ex.what()};
        }
    }

    WorkflowResult result;
    std::map<std::string, DatasetStats::Row> by_source;
    for (const auto& out : outcomes) {
        if (out.quad) {
            result.quadruples.push_back(*out.quad);
            auto& row = by_source[out.source];
            row.source = out.source;
            row.count += 1;
            row.hours += out.duration_s / 3600.0;
        } else if (out.reject) {
            result.rejects.push_back(*out.reject);
        }
    }
    for (auto& [name, row] : by_source) {
        result.stats.rows.push_back(row);
        result.stats.total_count += row.count;
        result.stats.total_hours += row.hours;
    }
    return result;
}

std::string quadruples_jsonl(const std::vector<Quadruple>& quads) {
    std::ostringstream os;
    for (const auto& q : quads) {
        nlohmann::json j{{"image_ref", q.image_ref},   {"story", q.story},
                         {"caption", q.caption},       {"music_ref", q.music_ref},
                         {"review_score", q.review_score}, {"filter_score", q.filter_score}};
        os << j.dump() << "\n";
    }
    return os.str();
}

std::string rejects_jsonl(const std::vector<RejectRecord>& rejects) {
    std::ostringstream os;
    for (const auto& r : rejects) {
        nlohmann::json j{{"image_ref", r.image_ref}, {"stage", r.stage}, {"score", r.score}};
        if (!r.detail.empty()) j["detail"] = r.detail;
        os << j.dump() << "\n";
    }
    return os.str();
}

}  // namespace musgen
