#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "musgen/align.hpp"
#include "musgen/flowmatch.hpp"
#include "musgen/latent.hpp"

namespace musgen {

// Self-describing checkpoint: "MGCK" magic, u32 little-endian header length,
// UTF-8 JSON header, then f32 little-endian arrays concatenated in
// header-declared order. Values round-trip bit-exactly at 32-bit precision.
struct ArraySpec {
    std::string name;
    std::vector<int> shape;
};

struct CheckpointHeader {
    int format_version = 1;
    std::string module;
    std::vector<ArraySpec> arrays;
    uint64_t config_hash = 0;
    nlohmann::json extra;  // module-specific metadata
};

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<std::vector<double>>& arrays);

struct LoadedCheckpoint {
    CheckpointHeader header;
    std::vector<std::vector<double>> arrays;  // f32 payload widened to f64

    const std::vector<double>& array(const std::string& name) const;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Round f64 through f32, matching what a checkpoint save/load does.
double f32_round(double v);
void f32_round_params(std::vector<Parameter>& params);

// Model adapters.
void save_autoencoder(const std::string& path, const AutoencoderModel& model, uint64_t config_hash);
AutoencoderModel load_autoencoder(const std::string& path);

void save_adapters(const std::string& path, const AdapterStack& adapters, uint64_t config_hash,
                   const std::string& stage);
AdapterStack load_adapters(const std::string& path);

void save_vector_field(const std::string& path, const VectorFieldNet& net, uint64_t config_hash,
                       const std::string& stage);
VectorFieldNet load_vector_field(const std::string& path);

}  // namespace musgen
