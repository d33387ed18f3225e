#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "musgen/corpus.hpp"
#include "musgen/encoders.hpp"
#include "musgen/errors.hpp"
#include "musgen/factors.hpp"

using namespace musgen;

namespace {

constexpr int kDim = 64;

const SyntheticEncoder& test_encoder() {
    static SyntheticEncoder enc(kDim, 2024);
    return enc;
}

FactorSpec spec(double f, ChordType c, Timbre t, TempoClass p) { return FactorSpec{f, c, t, p}; }

}  // namespace

TEST_SUITE_BEGIN("encoders");

TEST_CASE("factor renderings invert exactly on the corpus grid") {
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        const FactorSpec f = draw_corpus_factors(rng);
        CHECK(parse_image_descriptor(render_image_descriptor(f)) == f);
        CHECK(parse_story(render_story(f)) == f);
        CHECK(parse_caption(render_caption(f)) == f);
    }
    // all four chord words survive the caption roundtrip
    for (const ChordType c : {ChordType::single, ChordType::major, ChordType::minor, ChordType::fifth}) {
        const FactorSpec f = spec(440, c, Timbre::soft, TempoClass::fast);
        CHECK(parse_caption(render_caption(f)).chord == c);
    }
}

TEST_CASE("unparseable items raise input errors") {
    CHECK_THROWS_AS(parse_caption("an ambient drone with no factors"), InputError);
    CHECK_THROWS_AS(parse_image_descriptor("not a scene"), InputError);
    CHECK_THROWS_AS(parse_story("The nondescript valley."), InputError);
    CHECK_THROWS_AS(test_encoder().encode_caption("gibberish"), InputError);
}

TEST_CASE("clip synthesis puts the FFT peak at the root frequency") {
    Rng rng(7);
    for (int i = 0; i < 12; ++i) {
        const FactorSpec f = draw_corpus_factors(rng);
        Rng phase = rng.fork(static_cast<uint64_t>(i));
        const AudioClip clip = render_clip(f, phase);
        const MusicSignature sig = analyze_clip(clip);
        CHECK(std::abs(sig.f0 - f.root_freq) <= 2.0);  // ~1 Hz grid of the padded FFT
    }
}

TEST_CASE("signature separates chord, timbre and tempo classes") {
    Rng rng(3);
    auto sig_of = [&](const FactorSpec& f) {
        Rng phase = rng.fork(fnv1a64(f.key()));
        return analyze_clip(render_clip(f, phase));
    };
    const auto s_single = sig_of(spec(466, ChordType::single, Timbre::pure, TempoClass::slow));
    const auto s_fifth = sig_of(spec(466, ChordType::fifth, Timbre::pure, TempoClass::slow));
    const auto s_major = sig_of(spec(466, ChordType::major, Timbre::pure, TempoClass::slow));
    CHECK(s_single.r_fifth < 0.1);
    CHECK(s_fifth.r_fifth > 0.3);
    CHECK(s_major.r_fifth > 0.3);
    CHECK(s_single.r_maj3 < 0.1);
    CHECK(s_fifth.r_maj3 < 0.1);
    CHECK(s_major.r_maj3 > 0.3);

    const auto s_bright = sig_of(spec(466, ChordType::single, Timbre::bright, TempoClass::slow));
    CHECK(s_bright.r_h2 > 0.3);
    CHECK(s_single.r_h2 < 0.1);

    const auto s_fast = sig_of(spec(466, ChordType::single, Timbre::pure, TempoClass::fast));
    CHECK(s_fast.mod_rate == doctest::Approx(6.0).epsilon(0.25));
    CHECK(s_single.mod_rate == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("music embeddings are unit norm and deterministic") {
    Rng rng(11);
    Rng phase = rng.fork(5);
    const AudioClip clip = render_clip(spec(523, ChordType::major, Timbre::soft, TempoClass::fast), phase);
    const Embedding a = test_encoder().encode_music(clip);
    const Embedding b = test_encoder().encode_music(clip);
    CHECK(a.dim() == kDim);
    CHECK(std::abs(l2_norm(a.vector) - 1.0) < 1e-9);
    for (int i = 0; i < kDim; ++i) CHECK(a.vector[static_cast<size_t>(i)] == b.vector[static_cast<size_t>(i)]);
    CHECK(a.modality == Modality::music);
}

TEST_CASE("same factors give near-identical music embeddings, octaves differ") {
    const FactorSpec f = spec(370, ChordType::fifth, Timbre::bright, TempoClass::slow);
    Rng p1(100), p2(200);
    const Embedding a = test_encoder().encode_music(render_clip(f, p1));
    const Embedding b = test_encoder().encode_music(render_clip(f, p2));
    CHECK(cosine(a.vector, b.vector) > 0.99);

    FactorSpec octave = f;
    octave.root_freq = 740;
    Rng p3(300);
    const Embedding c = test_encoder().encode_music(render_clip(octave, p3));
    CHECK(cosine(a.vector, c.vector) < 0.9);
}

TEST_CASE("condition encoders are deterministic, distinct per modality, width D") {
    const FactorSpec f = spec(440, ChordType::minor, Timbre::soft, TempoClass::slow);
    const std::string img = render_image_descriptor(f);
    const std::string cap = render_caption(f);

    const Embedding e1 = test_encoder().encode_image(img);
    const Embedding e2 = test_encoder().encode_image(img);
    REQUIRE(e1.dim() == kDim);
    for (int i = 0; i < kDim; ++i) CHECK(e1.vector[static_cast<size_t>(i)] == e2.vector[static_cast<size_t>(i)]);

    const Embedding ec = test_encoder().encode_caption(cap);
    CHECK(cosine(e1.vector, ec.vector) < 0.99);  // distinct spaces
    CHECK(ec.dim() == kDim);
}

TEST_CASE("frozen backend is stable across instances with the same seed") {
    SyntheticEncoder enc1(kDim, 555), enc2(kDim, 555);
    const std::string story = render_story(spec(659, ChordType::single, Timbre::pure, TempoClass::fast));
    const auto a = enc1.encode_story(story).vector;
    const auto b = enc2.encode_story(story).vector;
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("linear probe on music embeddings recovers the chord class") {
    // ridge-regression probe on one-hot targets, trained on 420 clips and
    // scored on 180 held-out clips
    Rng rng(42);
    const auto& chords = corpus_chords();
    std::vector<std::vector<double>> x_train, x_test;
    std::vector<int> y_train, y_test;
    for (int i = 0; i < 600; ++i) {
        const FactorSpec f = draw_corpus_factors(rng);
        Rng phase = rng.fork(static_cast<uint64_t>(i) + 1000);
        const Embedding e = test_encoder().encode_music(render_clip(f, phase));
        int label = 0;
        for (size_t c = 0; c < chords.size(); ++c)
            if (chords[c] == f.chord) label = static_cast<int>(c);
        if (i < 420) {
            x_train.push_back(e.vector);
            y_train.push_back(label);
        } else {
            x_test.push_back(e.vector);
            y_test.push_back(label);
        }
    }
    // closed-form ridge: W = (X^T X + l I)^{-1} X^T Y
    const int n = static_cast<int>(x_train.size());
    const int k = static_cast<int>(chords.size());
    std::vector<double> xtx(static_cast<size_t>(kDim) * kDim, 0.0), xty(static_cast<size_t>(kDim) * k, 0.0);
    for (int s = 0; s < n; ++s) {
        for (int i = 0; i < kDim; ++i) {
            for (int j = 0; j < kDim; ++j)
                xtx[static_cast<size_t>(i) * kDim + j] +=
                    x_train[static_cast<size_t>(s)][static_cast<size_t>(i)] *
                    x_train[static_cast<size_t>(s)][static_cast<size_t>(j)];
            xty[static_cast<size_t>(i) * k + y_train[static_cast<size_t>(s)]] +=
                x_train[static_cast<size_t>(s)][static_cast<size_t>(i)];
        }
    }
    for (int i = 0; i < kDim; ++i) xtx[static_cast<size_t>(i) * kDim + i] += 1e-3;
    // solve via Gaussian elimination (test-only)
    std::vector<double> a = xtx, w = xty;
    for (int col = 0; col < kDim; ++col) {
        int pivot = col;
        for (int r = col + 1; r < kDim; ++r)
            if (std::abs(a[static_cast<size_t>(r) * kDim + col]) >
                std::abs(a[static_cast<size_t>(pivot) * kDim + col]))
                pivot = r;
        for (int c = 0; c < kDim; ++c)
            std::swap(a[static_cast<size_t>(col) * kDim + c], a[static_cast<size_t>(pivot) * kDim + c]);
        for (int c = 0; c < k; ++c)
            std::swap(w[static_cast<size_t>(col) * k + c], w[static_cast<size_t>(pivot) * k + c]);
        const double d = a[static_cast<size_t>(col) * kDim + col];
        for (int r = 0; r < kDim; ++r) {
            if (r == col) continue;
            const double factor = a[static_cast<size_t>(r) * kDim + col] / d;
            for (int c = 0; c < kDim; ++c)
                a[static_cast<size_t>(r) * kDim + c] -= factor * a[static_cast<size_t>(col) * kDim + c];
            for (int c = 0; c < k; ++c)
                w[static_cast<size_t>(r) * k + c] -= factor * w[static_cast<size_t>(col) * k + c];
        }
    }
    for (int r = 0; r < kDim; ++r)
        for (int c = 0; c < k; ++c) w[static_cast<size_t>(r) * k + c] /= a[static_cast<size_t>(r) * kDim + r];

    int correct = 0;
    for (size_t s = 0; s < x_test.size(); ++s) {
        int best = 0;
        double best_v = -1e300;
        for (int c = 0; c < k; ++c) {
            double v = 0.0;
            for (int i = 0; i < kDim; ++i)
                v += x_test[s][static_cast<size_t>(i)] * w[static_cast<size_t>(i) * k + c];
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        if (best == y_test[s]) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(x_test.size());
    CHECK(accuracy >= 0.95);
}

TEST_CASE("mock pair scorers separate matched from mismatched factors") {
    const FactorSpec f = spec(523, ChordType::major, Timbre::pure, TempoClass::slow);
    const FactorSpec g = spec(330, ChordType::single, Timbre::bright, TempoClass::fast);
    const auto& enc = test_encoder();

    CHECK(enc.image_story_score(render_image_descriptor(f), render_story(f)) > 0.9);
    CHECK(enc.image_story_score(render_image_descriptor(f), render_story(g)) < 0.3);

    Rng p1(1);
    const AudioClip clip_f = render_clip(f, p1);
    CHECK(enc.caption_music_score(render_caption(f), clip_f) > 0.9);
    CHECK(enc.caption_music_score(render_caption(g), clip_f) < 0.3);
}

TEST_CASE("remote encoder speaks the JSON protocol") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        const auto j = nlohmann::json::parse(req.body);
        REQUIRE(j.contains("modality"));
        REQUIRE(j.contains("payload_b64"));
        const std::string payload = base64_decode(j.at("payload_b64").get<std::string>());
        std::vector<double> v(8, 0.0);
        v[0] = static_cast<double>(payload.size());
        v[1] = j.at("modality").get<std::string>() == "music" ? 1.0 : 2.0;
        res.set_content(nlohmann::json{{"vector", v}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteEncoder enc(8, "127.0.0.1:" + std::to_string(port), 5.0);
    const Embedding e = enc.encode_story("hello");
    CHECK(e.vector[0] == 5.0);
    CHECK(e.vector[1] == 2.0);

    AudioClip clip;
    clip.samples.assign(64, 0.0);
    const Embedding m = enc.encode_music(clip);
    CHECK(m.vector[1] == 1.0);
    CHECK(m.vector[0] == doctest::Approx(44.0 + 128.0));  // wav header + payload bytes
    CHECK(hits.load() == 2);

    server.stop();
    t.join();
}

TEST_CASE("remote encoder failures raise transport errors with endpoint context") {
    // nothing listens on this port
    RemoteEncoder enc(8, "127.0.0.1:1", 0.2);
    CHECK_THROWS_AS(enc.encode_story("x"), TransportError);
    try {
        enc.encode_story("x");
    } catch (const TransportError& e) {
        CHECK(std::string(e.what()).find("127.0.0.1:1") != std::string::npos);
    }

    httplib::Server server;
    server.Post("/embed", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    RemoteEncoder enc2(8, "127.0.0.1:" + std::to_string(port), 5.0);
    CHECK_THROWS_AS(enc2.encode_caption("y"), TransportError);
    server.stop();
    t.join();
}

TEST_CASE("base64 round trip") {
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_encode("foo") == "Zm9v");
    std::string bytes;
    for (int i = 0; i < 256; ++i) bytes += static_cast<char>(i);
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
}

TEST_SUITE_END();
