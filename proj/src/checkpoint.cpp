#include "musgen/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "musgen/errors.hpp"

namespace musgen {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'C', 'K'};

nlohmann::json header_json(const CheckpointHeader& h) {
    nlohmann::json arrays = nlohmann::json::array();
    for (const auto& a : h.arrays) arrays.push_back({{"name", a.name}, {"shape", a.shape}});
    return nlohmann::json{{"format_version", h.format_version},
                          {"module", h.module},
                          {"arrays", arrays},
                          {"config_hash", h.config_hash},
                          {"extra", h.extra}};
}

CheckpointHeader header_from_json(const nlohmann::json& j) {
    CheckpointHeader h;
    h.format_version = j.at("format_version").get<int>();
    h.module = j.at("module").get<std::string>();
    for (const auto& a : j.at("arrays"))
        h.arrays.push_back({a.at("name").get<std::string>(), a.at("shape").get<std::vector<int>>()});
    h.config_hash = j.at("config_hash").get<uint64_t>();
    h.extra = j.value("extra", nlohmann::json::object());
    return h;
}

int64_t spec_numel(const ArraySpec& a) {
    int64_t n = 1;
    for (int d : a.shape) n *= d;
    return n;
}

}  // namespace

double f32_round(double v) { return static_cast<double>(static_cast<float>(v)); }

void f32_round_params(std::vector<Parameter>& params) {
    for (auto& p : params)
        for (auto& v : p.tensor.mutable_data()) v = f32_round(v);
}

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<std::vector<double>>& arrays) {
    if (header.arrays.size() != arrays.size())
        throw ContractError("checkpoint: header declares " + std::to_string(header.arrays.size()) +
                            " arrays, got " + std::to_string(arrays.size()));
    for (size_t i = 0; i < arrays.size(); ++i) {
        if (spec_numel(header.arrays[i]) != static_cast<int64_t>(arrays[i].size()))
            throw DimensionError("checkpoint: array " + header.arrays[i].name + " size mismatch");
        for (double v : arrays[i])
            if (!std::isfinite(v)) throw NumericError("checkpoint: non-finite value in " + header.arrays[i].name);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");
    const std::string hdr = header_json(header).dump();
    const uint32_t len = static_cast<uint32_t>(hdr.size());
    os.write(kMagic, 4);
    const unsigned char lb[4] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8),
                                 static_cast<unsigned char>(len >> 16), static_cast<unsigned char>(len >> 24)};
    os.write(reinterpret_cast<const char*>(lb), 4);
    os.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    for (const auto& arr : arrays)
        for (double v : arr) {
            const float f = static_cast<float>(v);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                        static_cast<unsigned char>(bits >> 16),
                                        static_cast<unsigned char>(bits >> 24)};
            os.write(reinterpret_cast<const char*>(b), 4);
        }
    if (!os) throw IoError("checkpoint: write failed for " + path);
}

const std::vector<double>& LoadedCheckpoint::array(const std::string& name) const {
    for (size_t i = 0; i < header.arrays.size(); ++i)
        if (header.arrays[i].name == name) return arrays[i];
    throw ContractError("checkpoint: no array named " + name);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw IoError("checkpoint: bad magic in " + path);
    unsigned char lb[4];
    is.read(reinterpret_cast<char*>(lb), 4);
    const uint32_t len = static_cast<uint32_t>(lb[0]) | (static_cast<uint32_t>(lb[1]) << 8) |
                         (static_cast<uint32_t>(lb[2]) << 16) | (static_cast<uint32_t>(lb[3]) << 24);
    std::string hdr(len, '\0');
    is.read(hdr.data(), len);
    if (!is) throw IoError("checkpoint: truncated header in " + path);
    LoadedCheckpoint out;
    try {
        out.header = header_from_json(nlohmann::json::parse(hdr));
    } catch (const nlohmann::json::exception& ex) {
        throw IoError("checkpoint: malformed header in " + path + ": " + ex.what());
    }
    for (const auto& spec : out.header.arrays) {
        std::vector<double> arr(static_cast<size_t>(spec_numel(spec)));
        for (auto& v : arr) {
            unsigned char b[4];
            is.read(reinterpret_cast<char*>(b), 4);
            uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                            (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
            float f;
            std::memcpy(&f, &bits, 4);
            v = static_cast<double>(f);
        }
        if (!is) throw IoError("checkpoint: truncated payload in " + path);
        out.arrays.push_back(std::move(arr));
    }
    return out;
}

// --- model adapters ----------------------------------------------------------

namespace {

void append_mlp_arrays(CheckpointHeader& h, std::vector<std::vector<double>>& arrays, const Mlp& mlp) {
    for (const auto& p : mlp.params()) {
        h.arrays.push_back({p.name, p.tensor.shape()});
        arrays.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    }
}

void load_mlp_arrays(const LoadedCheckpoint& ck, Mlp& mlp) {
    for (auto& p : mlp.params()) {
        const auto& src = ck.array(p.name);
        auto dst = p.tensor.mutable_data();
        if (src.size() != dst.size())
            throw DimensionError("checkpoint: parameter " + p.name + " size mismatch");
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

nlohmann::json signal_json(const SignalConfig& s) {
    return {{"sample_rate", s.sample_rate}, {"n_fft", s.n_fft}, {"hop", s.hop},      {"win", s.win},
            {"n_mels", s.n_mels},           {"fmin", s.fmin},   {"fmax", s.fmax},    {"log_floor", s.log_floor}};
}

SignalConfig signal_from_json(const nlohmann::json& j) {
    SignalConfig s;
    s.sample_rate = j.at("sample_rate").get<int>();
    s.n_fft = j.at("n_fft").get<int>();
    s.hop = j.at("hop").get<int>();
    s.win = j.at("win").get<int>();
    s.n_mels = j.at("n_mels").get<int>();
    s.fmin = j.at("fmin").get<double>();
    s.fmax = j.at("fmax").get<double>();
    s.log_floor = j.at("log_floor").get<double>();
    return s;
}

}  // namespace

void save_autoencoder(const std::string& path, const AutoencoderModel& model, uint64_t config_hash) {
    CheckpointHeader h;
    h.module = "latent";
    h.config_hash = config_hash;
    h.extra = {{"frames", model.frames()},
               {"bins", model.bins()},
               {"latent_dim", model.latent_dim()},
               {"encoder_widths", model.encoder().widths()},
               {"decoder_widths", model.decoder().widths()},
               {"signal", signal_json(model.signal())}};
    std::vector<std::vector<double>> arrays;
    h.arrays.push_back({"norm_mean", {model.input_dim()}});
    arrays.emplace_back(model.norm_mean());
    h.arrays.push_back({"norm_std", {model.input_dim()}});
    arrays.emplace_back(model.norm_std());
    h.arrays.push_back({"latent_mean", {model.latent_dim()}});
    arrays.emplace_back(model.latent_mean());
    h.arrays.push_back({"latent_std", {model.latent_dim()}});
    arrays.emplace_back(model.latent_std());
    append_mlp_arrays(h, arrays, model.encoder());
    append_mlp_arrays(h, arrays, model.decoder());
    save_checkpoint(path, h, arrays);
}

AutoencoderModel load_autoencoder(const std::string& path) {
    const LoadedCheckpoint ck = load_checkpoint(path);
    if (ck.header.module != "latent") throw IoError("checkpoint: " + path + " is not an autoencoder");
    const auto& x = ck.header.extra;
    LatentTrainConfig cfg;
    cfg.latent_dim = x.at("latent_dim").get<int>();
    const auto enc_w = x.at("encoder_widths").get<std::vector<int>>();
    cfg.hidden1 = enc_w.at(1);
    cfg.hidden2 = enc_w.at(2);
    Rng rng(0);
    AutoencoderModel model(x.at("frames").get<int>(), x.at("bins").get<int>(), cfg,
                           signal_from_json(x.at("signal")), rng);
    std::vector<double> nm = ck.array("norm_mean"), ns = ck.array("norm_std");
    model.set_norm_stats(std::move(nm), std::move(ns));
    std::vector<double> lm = ck.array("latent_mean"), ls = ck.array("latent_std");
    model.set_whitening(std::move(lm), std::move(ls));
    load_mlp_arrays(ck, model.encoder());
    load_mlp_arrays(ck, model.decoder());
    return model;
}

void save_adapters(const std::string& path, const AdapterStack& adapters, uint64_t config_hash,
                   const std::string& stage) {
    CheckpointHeader h;
    h.module = "align";
    h.config_hash = config_hash;
    const auto& widths = adapters.adapter(Modality::image).widths();
    h.extra = {{"dim", adapters.dim()}, {"widths", widths}, {"stage", stage}};
    std::vector<std::vector<double>> arrays;
    append_mlp_arrays(h, arrays, adapters.adapter(Modality::image));
    append_mlp_arrays(h, arrays, adapters.adapter(Modality::story));
    append_mlp_arrays(h, arrays, adapters.adapter(Modality::caption));
    save_checkpoint(path, h, arrays);
}

AdapterStack load_adapters(const std::string& path) {
    const LoadedCheckpoint ck = load_checkpoint(path);
    if (ck.header.module != "align") throw IoError("checkpoint: " + path + " is not an adapter stack");
    const auto& x = ck.header.extra;
    const int dim = x.at("dim").get<int>();
    const auto widths = x.at("widths").get<std::vector<int>>();
    const int layers = static_cast<int>(widths.size()) - 1;
    const int hidden_mult = layers >= 2 ? widths.at(1) / dim : 2;
    Rng rng(0);
    AdapterStack adapters(dim, layers, hidden_mult, rng);
    load_mlp_arrays(ck, adapters.adapter(Modality::image));
    load_mlp_arrays(ck, adapters.adapter(Modality::story));
    load_mlp_arrays(ck, adapters.adapter(Modality::caption));
    return adapters;
}

void save_vector_field(const std::string& path, const VectorFieldNet& net, uint64_t config_hash,
                       const std::string& stage) {
    CheckpointHeader h;
    h.module = "flowmatch";
    h.config_hash = config_hash;
    h.extra = {{"latent_dim", net.latent_dim()},
               {"cond_dim", net.cond_dim()},
               {"time_dim", net.time_dim()},
               {"widths", net.net().widths()},
               {"stage", stage}};
    std::vector<std::vector<double>> arrays;
    append_mlp_arrays(h, arrays, net.net());
    save_checkpoint(path, h, arrays);
}

VectorFieldNet load_vector_field(const std::string& path) {
    const LoadedCheckpoint ck = load_checkpoint(path);
    if (ck.header.module != "flowmatch") throw IoError("checkpoint: " + path + " is not a vector field");
    const auto& x = ck.header.extra;
    const auto widths = x.at("widths").get<std::vector<int>>();
    const int hidden_layers = static_cast<int>(widths.size()) - 2;
    Rng rng(0);
    VectorFieldNet net(x.at("latent_dim").get<int>(), x.at("cond_dim").get<int>(),
                       hidden_layers > 0 ? widths.at(1) : 1, hidden_layers, x.at("time_dim").get<int>(), rng);
    load_mlp_arrays(ck, net.net());
    return net;
}

}  // namespace musgen
