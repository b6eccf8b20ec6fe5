#include "zeroforge/checkpoint.h"

#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "zeroforge/errors.h"

namespace zeroforge {

using nlohmann::json;

json ToJson(const GeneratorSpec& spec) {
  return json{{"flow",
               {{"num_coupling_blocks", spec.flow.num_coupling_blocks},
                {"hidden_width", spec.flow.hidden_width},
                {"latent_dim", spec.flow.latent_dim},
                {"condition_dim", spec.flow.condition_dim}}},
              {"decoder",
               {{"num_blocks", spec.decoder.num_blocks},
                {"resolution", spec.decoder.resolution},
                {"channels", spec.decoder.channels},
                {"latent_dim", spec.decoder.latent_dim},
                {"zeroconv_enabled", spec.decoder.zeroconv_enabled}}}};
}

GeneratorSpec GeneratorSpecFromJson(const json& j) {
  GeneratorSpec s;
  try {
    const auto& f = j.at("flow");
    s.flow.num_coupling_blocks = f.at("num_coupling_blocks").get<int>();
    s.flow.hidden_width = f.at("hidden_width").get<int>();
    s.flow.latent_dim = f.at("latent_dim").get<int>();
    s.flow.condition_dim = f.at("condition_dim").get<int>();
    const auto& d = j.at("decoder");
    s.decoder.num_blocks = d.at("num_blocks").get<int>();
    s.decoder.resolution = d.at("resolution").get<int>();
    s.decoder.channels = d.at("channels").get<int>();
    s.decoder.latent_dim = d.value("latent_dim", s.flow.latent_dim);
    s.decoder.zeroconv_enabled = d.value("zeroconv_enabled", false);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed generator spec in checkpoint metadata: ") + e.what());
  }
  return s;
}

Archive SnapshotGenerator(Generator& generator, json metadata) {
  Archive a;
  GeneratorSpec spec{generator.flow().config(), generator.decoder().config()};
  metadata["format"] = "zeroforge";
  metadata["generator"] = ToJson(spec);
  a.metadata = std::move(metadata);
  for (const Parameter* p : generator.parameters())
    a.arrays[p->name] = ArrayEntry{ArrayEntry::Dtype::kF64, p->shape, p->value};
  return a;
}

void SaveCheckpoint(const std::filesystem::path& path, Generator& generator, json metadata) {
  WriteArchive(path, SnapshotGenerator(generator, std::move(metadata)));
}

std::optional<std::string> TranslateClipForgeName(const std::string& name) {
  static const std::regex kFlow(R"(latent_flow_model\.flows\.(\d+)\.(scale_net|translate_net)\.([024])\.(weight|bias))");
  static const std::regex kProj(R"(autoencoder\.decoder\.fc_z\.(weight|bias))");
  static const std::regex kBlock(R"(autoencoder\.decoder\.blocks\.(\d+)\.conv_([01])\.(weight|bias))");
  static const std::regex kHead(R"(autoencoder\.decoder\.conv_out\.(weight|bias))");
  std::smatch m;
  if (std::regex_match(name, m, kFlow)) {
    const int idx = std::stoi(m[1]);
    if (idx % 2 != 0) return std::nullopt;
    return "flow.couplings." + std::to_string(idx / 2) + "." + m[2].str() + "." + m[3].str() + "." + m[4].str();
  }
  if (std::regex_match(name, m, kProj)) return "decoder.proj." + m[1].str();
  if (std::regex_match(name, m, kBlock)) return "decoder.blocks." + m[1].str() + ".conv" + m[2].str() + "." + m[3].str();
  if (std::regex_match(name, m, kHead)) return "decoder.head." + m[1].str();
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> ClipForgeNameTable(const GeneratorSpec& spec) {
  std::vector<std::pair<std::string, std::string>> table;
  const char* kinds[] = {"weight", "bias"};
  for (int k = 0; k < spec.flow.num_coupling_blocks; ++k)
    for (const char* net : {"scale_net", "translate_net"})
      for (int layer : {0, 2, 4})
        for (const char* kind : kinds) {
          std::string tail = std::string(net) + "." + std::to_string(layer) + "." + kind;
          table.emplace_back("latent_flow_model.flows." + std::to_string(2 * k) + "." + tail,
                             "flow.couplings." + std::to_string(k) + "." + tail);
        }
  for (const char* kind : kinds) table.emplace_back(std::string("autoencoder.decoder.fc_z.") + kind, std::string("decoder.proj.") + kind);
  for (int j = 0; j < spec.decoder.num_blocks; ++j)
    for (int c : {0, 1})
      for (const char* kind : kinds)
        table.emplace_back("autoencoder.decoder.blocks." + std::to_string(j) + ".conv_" + std::to_string(c) + "." + kind,
                           "decoder.blocks." + std::to_string(j) + ".conv" + std::to_string(c) + "." + kind);
  for (const char* kind : kinds) table.emplace_back(std::string("autoencoder.decoder.conv_out.") + kind, std::string("decoder.head.") + kind);
  return table;
}

bool IsClipForgeArchive(const Archive& archive) {
  if (archive.metadata.is_object() && archive.metadata.value("format", "") == "clip-forge") return true;
  for (const auto& [name, _] : archive.arrays)
    if (name.rfind("latent_flow_model.", 0) == 0 || name.rfind("autoencoder.", 0) == 0) return true;
  return false;
}

namespace {

// Archive entries keyed by our parameter names, plus names that had no mapping.
struct Translated {
  std::map<std::string, const ArrayEntry*> entries;
  std::vector<std::string> unmapped;
};

Translated Translate(const Archive& archive) {
  Translated t;
  const bool clip_forge = IsClipForgeArchive(archive);
  for (const auto& [name, entry] : archive.arrays) {
    if (!clip_forge) {
      t.entries[name] = &entry;
      continue;
    }
    auto ours = TranslateClipForgeName(name);
    if (ours) t.entries[*ours] = &entry;
    else t.unmapped.push_back(name);
  }
  return t;
}

const ArrayEntry& Require(const Translated& t, const std::string& name) {
  auto it = t.entries.find(name);
  if (it == t.entries.end()) throw FormatError("cannot infer generator architecture: archive has no " + name);
  return *it->second;
}

}  // namespace

GeneratorSpec InferGeneratorSpec(const Archive& archive) {
  if (archive.metadata.is_object() && archive.metadata.contains("generator"))
    return GeneratorSpecFromJson(archive.metadata.at("generator"));
  Translated t = Translate(archive);
  GeneratorSpec s;
  int couplings = 0;
  while (t.entries.count("flow.couplings." + std::to_string(couplings) + ".scale_net.0.weight")) ++couplings;
  int blocks = 0;
  while (t.entries.count("decoder.blocks." + std::to_string(blocks) + ".conv0.weight")) ++blocks;
  const ArrayEntry& first = Require(t, "flow.couplings.0.scale_net.0.weight");
  const ArrayEntry& last = Require(t, "flow.couplings.0.scale_net.4.weight");
  const ArrayEntry& head = Require(t, "decoder.head.weight");
  const ArrayEntry& proj = Require(t, "decoder.proj.weight");
  if (first.shape.size() != 2 || last.shape.size() != 2 || head.shape.size() != 5 || proj.shape.size() != 2)
    throw FormatError("cannot infer generator architecture: unexpected parameter ranks");
  s.flow.num_coupling_blocks = couplings;
  s.flow.hidden_width = static_cast<int>(first.shape[0]);
  s.flow.latent_dim = static_cast<int>(last.shape[0]);
  s.flow.condition_dim = static_cast<int>(first.shape[1]) - s.flow.latent_dim;
  s.decoder.num_blocks = blocks;
  s.decoder.channels = static_cast<int>(head.shape[1]);
  s.decoder.latent_dim = static_cast<int>(proj.shape[1]);
  const int64_t cells = proj.shape[0] / s.decoder.channels;
  int base = 1;
  while (static_cast<int64_t>(base) * base * base < cells) ++base;
  if (static_cast<int64_t>(base) * base * base != cells)
    throw FormatError("cannot infer generator architecture: projection size is not C * b^3");
  s.decoder.resolution = base << blocks;
  s.decoder.zeroconv_enabled = t.entries.count("decoder.blocks.0.zero_conv.weight") > 0;
  return s;
}

void LoadGeneratorParameters(Generator& generator, const Archive& archive) {
  Translated t = Translate(archive);
  std::vector<std::string> problems;
  for (const auto& name : t.unmapped) problems.push_back("unmapped archive key: " + name);
  std::set<std::string> consumed;
  ParameterList params = generator.parameters();
  for (const Parameter* p : params) {
    auto it = t.entries.find(p->name);
    if (it == t.entries.end()) {
      problems.push_back("missing parameter: " + p->name);
      continue;
    }
    consumed.insert(p->name);
    if (it->second->shape != p->shape)
      problems.push_back("shape mismatch for " + p->name + ": archive " + ShapeString(it->second->shape) +
                         ", model " + ShapeString(p->shape));
  }
  for (const auto& [name, _] : t.entries)
    if (!consumed.count(name)) problems.push_back("unexpected archive key: " + name);
  if (!problems.empty()) {
    std::ostringstream os;
    os << "checkpoint does not match the generator (" << problems.size() << " problem"
       << (problems.size() == 1 ? "" : "s") << "):";
    for (const auto& p : problems) os << "\n  " << p;
    throw FormatError(os.str());
  }
  for (Parameter* p : params) p->value = t.entries.at(p->name)->values;
}

std::unique_ptr<Generator> LoadPretrained(const Archive& archive) {
  GeneratorSpec spec = InferGeneratorSpec(archive);
  auto g = std::make_unique<Generator>(spec.flow, spec.decoder);
  LoadGeneratorParameters(*g, archive);
  return g;
}

std::unique_ptr<Generator> LoadPretrained(const std::filesystem::path& path) {
  Archive a = ReadArchive(path);
  try {
    return LoadPretrained(a);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace zeroforge
