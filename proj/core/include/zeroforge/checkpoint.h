#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zeroforge/archive.h"
#include "zeroforge/generator.h"

namespace zeroforge {

struct GeneratorSpec {
  FlowConfig flow;
  DecoderConfig decoder;
};

nlohmann::json ToJson(const GeneratorSpec& spec);
GeneratorSpec GeneratorSpecFromJson(const nlohmann::json& j);

// Archive holding every generator parameter (f64) and `metadata` extended
// with {"format": "zeroforge", "generator": spec}.
Archive SnapshotGenerator(Generator& generator, nlohmann::json metadata);
void SaveCheckpoint(const std::filesystem::path& path, Generator& generator, nlohmann::json metadata);

// Third-party CLIP-Forge parameter names and their equivalents here:
//
//   latent_flow_model.flows.<2k>.scale_net.<0|2|4>.<weight|bias>
//       -> flow.couplings.<k>.scale_net.<0|2|4>.<weight|bias>
//   latent_flow_model.flows.<2k>.translate_net.<0|2|4>.<weight|bias>
//       -> flow.couplings.<k>.translate_net.<0|2|4>.<weight|bias>
//   autoencoder.decoder.fc_z.<weight|bias>            -> decoder.proj.<weight|bias>
//   autoencoder.decoder.blocks.<j>.conv_<0|1>.<w|b>   -> decoder.blocks.<j>.conv<0|1>.<w|b>
//   autoencoder.decoder.conv_out.<weight|bias>        -> decoder.head.<weight|bias>
//
// Coupling layers sit at even indices of the exported flow list; odd indices
// (normalization layers) have no counterpart and are rejected as unmapped.
std::optional<std::string> TranslateClipForgeName(const std::string& name);
// Every (CLIP-Forge name, our name) pair for a base (non-ZeroConv) generator.
std::vector<std::pair<std::string, std::string>> ClipForgeNameTable(const GeneratorSpec& spec);
bool IsClipForgeArchive(const Archive& archive);

// Architecture recorded in the metadata, or inferred from array shapes.
GeneratorSpec InferGeneratorSpec(const Archive& archive);

// Copies every parameter from the archive. Missing, unmapped, unexpected or
// shape-mismatched entries raise one FormatError listing every offending key.
void LoadGeneratorParameters(Generator& generator, const Archive& archive);

// Builds a generator with the archive's architecture and loads it.
std::unique_ptr<Generator> LoadPretrained(const std::filesystem::path& path);
std::unique_ptr<Generator> LoadPretrained(const Archive& archive);

}  // namespace zeroforge
