#include "zeroforge/config.h"

#include <charconv>
#include <functional>
#include <sstream>

#include "zeroforge/archive.h"
#include "zeroforge/errors.h"

namespace zeroforge {

std::string ToString(InitMode m) { return m == InitMode::kRandom ? "random" : "pretrained-archive"; }
std::string ToString(BatchMode m) { return m == BatchMode::kIid ? "iid" : "all-prompts"; }

void TrainConfig::Validate() const {
  if (iterations < 0) throw ConfigError("train.iterations must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("train.adam_beta1 and train.adam_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be positive");
  if (batch_multiplier < 1) throw ConfigError("train.batch_multiplier must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be >= 1");
  if (init == InitMode::kPretrainedArchive && archive.empty())
    throw ConfigError("train.init = pretrained-archive requires train.archive");
}

void RunConfig::Validate() const {
  flow.Validate();
  decoder.Validate();
  render.Validate();
  loss.Validate();
  binarize.Validate();
  train.Validate();
  if (encoder.embedding_width < 1) throw ConfigError("encoder.embedding_width must be >= 1");
  if (encoder.image_resolution < 1) throw ConfigError("encoder.image_resolution must be >= 1");
}

namespace {

std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ParseDouble(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("expected a number, got \"" + s + "\"");
  return v;
}

template <typename Int>
Int ParseInt(const std::string& s) {
  Int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("expected an integer, got \"" + s + "\"");
  return v;
}

bool ParseBool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected true or false, got \"" + s + "\"");
}

std::string FormatBool(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define ZF_DOUBLE(key, field)                                                      \
  Key {                                                                            \
    key, [](const RunConfig& c) { return FormatDouble(c.field); },                 \
        [](RunConfig& c, const std::string& v) { c.field = ParseDouble(v); }       \
  }
#define ZF_INT(key, field, type)                                                   \
  Key {                                                                            \
    key, [](const RunConfig& c) { return std::to_string(c.field); },               \
        [](RunConfig& c, const std::string& v) { c.field = ParseInt<type>(v); }    \
  }
#define ZF_BOOL(key, field)                                                        \
  Key {                                                                            \
    key, [](const RunConfig& c) { return FormatBool(c.field); },                   \
        [](RunConfig& c, const std::string& v) { c.field = ParseBool(v); }         \
  }
#define ZF_STRING(key, field)                                                      \
  Key {                                                                            \
    key, [](const RunConfig& c) { return c.field; },                               \
        [](RunConfig& c, const std::string& v) { c.field = v; }                    \
  }

const std::vector<Key>& Keys() {
  static const std::vector<Key> keys = {
      Key{"encoder.kind", [](const RunConfig& c) { return ToString(c.encoder.kind); },
          [](RunConfig& c, const std::string& v) { c.encoder.kind = ParseEncoderKind(v); }},
      ZF_INT("encoder.seed", encoder.seed, uint64_t),
      ZF_INT("encoder.embedding_width", encoder.embedding_width, int),
      ZF_INT("encoder.image_resolution", encoder.image_resolution, int),
      ZF_STRING("encoder.checkpoint", encoder.checkpoint),
      ZF_STRING("encoder.endpoint", encoder.endpoint),
      ZF_INT("flow.num_coupling_blocks", flow.num_coupling_blocks, int),
      ZF_INT("flow.hidden_width", flow.hidden_width, int),
      ZF_INT("flow.latent_dim", flow.latent_dim, int),
      ZF_INT("decoder.num_blocks", decoder.num_blocks, int),
      ZF_INT("decoder.resolution", decoder.resolution, int),
      ZF_INT("decoder.channels", decoder.channels, int),
      ZF_INT("render.image_size", render.image_size, int),
      ZF_INT("render.steps_per_ray", render.steps_per_ray, int),
      ZF_DOUBLE("render.background", render.background),
      ZF_DOUBLE("render.density_scale", render.density_scale),
      Key{"render.projection", [](const RunConfig&) { return std::string("perspective"); },
          [](RunConfig& c, const std::string& v) {
            if (v != "perspective") throw ConfigError("render.projection must be perspective, got \"" + v + "\"");
            c.render.projection = Projection::kPerspective;
          }},
      ZF_STRING("render.plugin", render_plugin),
      ZF_STRING("render.plugin_checkpoint", render_plugin_checkpoint),
      ZF_DOUBLE("loss.lambda_c", loss.lambda_c),
      ZF_DOUBLE("loss.tau", loss.tau),
      ZF_INT("loss.views_per_query", loss.views_per_query, int),
      ZF_DOUBLE("binarize.beta", binarize.beta),
      ZF_DOUBLE("binarize.gamma", binarize.gamma),
      ZF_INT("train.iterations", train.iterations, long),
      ZF_DOUBLE("train.lr", train.lr),
      ZF_DOUBLE("train.adam_beta1", train.adam_beta1),
      ZF_DOUBLE("train.adam_beta2", train.adam_beta2),
      ZF_DOUBLE("train.adam_eps", train.adam_eps),
      ZF_INT("train.batch_multiplier", train.batch_multiplier, int),
      ZF_INT("train.seed", train.seed, uint64_t),
      ZF_INT("train.checkpoint_every", train.checkpoint_every, long),
      ZF_BOOL("train.zeroconv", train.zeroconv),
      ZF_BOOL("train.finetune_flow", train.finetune_flow),
      Key{"train.init", [](const RunConfig& c) { return ToString(c.train.init); },
          [](RunConfig& c, const std::string& v) {
            if (v == "random") c.train.init = InitMode::kRandom;
            else if (v == "pretrained-archive") c.train.init = InitMode::kPretrainedArchive;
            else throw ConfigError("train.init must be one of {pretrained-archive, random}, got \"" + v + "\"");
          }},
      ZF_STRING("train.archive", train.archive),
      Key{"train.noise_mode", [](const RunConfig& c) { return ToString(c.train.noise_mode); },
          [](RunConfig& c, const std::string& v) { c.train.noise_mode = ParseNoiseMode(v); }},
      Key{"train.batch_mode", [](const RunConfig& c) { return ToString(c.train.batch_mode); },
          [](RunConfig& c, const std::string& v) {
            if (v == "all-prompts") c.train.batch_mode = BatchMode::kAllPrompts;
            else if (v == "iid") c.train.batch_mode = BatchMode::kIid;
            else throw ConfigError("train.batch_mode must be one of {all-prompts, iid}, got \"" + v + "\"");
          }},
  };
  return keys;
}

#undef ZF_DOUBLE
#undef ZF_INT
#undef ZF_BOOL
#undef ZF_STRING

const Key* FindKey(const std::string& name) {
  for (const Key& k : Keys())
    if (k.name == name) return &k;
  return nullptr;
}

std::string Trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

void SetConfigValue(RunConfig& config, const std::string& key, const std::string& value) {
  const Key* k = FindKey(key);
  if (!k) throw ConfigError("unknown config key \"" + key + "\"");
  try {
    k->set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError("key \"" + key + "\": " + e.what());
  }
}

RunConfig ParseRunConfig(std::string_view text, const std::string& source_name, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = source_name + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected \"key = value\", got \"" + t + "\"");
    const std::string key = Trim(std::string_view(t).substr(0, eq));
    const std::string value = Trim(std::string_view(t).substr(eq + 1));
    try {
      SetConfigValue(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return base;
}

RunConfig LoadRunConfig(const std::filesystem::path& path, RunConfig base) {
  std::string text;
  try {
    text = ReadFileBytes(path);
  } catch (const FormatError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return ParseRunConfig(text, path.string(), std::move(base));
}

std::string SnapshotRunConfig(const RunConfig& config) {
  std::ostringstream os;
  for (const Key& k : Keys()) os << k.name << " = " << k.get(config) << "\n";
  return os.str();
}

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> out;
  for (const Key& k : Keys()) out.push_back(k.name);
  return out;
}

bool SameConfig(const RunConfig& a, const RunConfig& b) { return SnapshotRunConfig(a) == SnapshotRunConfig(b); }

void ApplyPreset(RunConfig& config, const std::string& preset) {
  if (preset == "beta100") config.binarize.beta = 100.0;
  else if (preset == "beta200") config.binarize.beta = 200.0;
  else if (preset == "beta300") config.binarize.beta = 300.0;
  else if (preset == "contrast-l0.01-t30") config.loss.lambda_c = 0.01, config.loss.tau = 30.0;
  else if (preset == "contrast-l0.1-t30") config.loss.lambda_c = 0.1, config.loss.tau = 30.0;
  else if (preset == "contrast-l0.01-t50") config.loss.lambda_c = 0.01, config.loss.tau = 50.0;
  else if (preset == "contrast-l0.1-t50") config.loss.lambda_c = 0.1, config.loss.tau = 50.0;
  else throw ConfigError("unknown preset \"" + preset + "\"");
}

std::vector<std::string> PresetNames() {
  return {"beta100", "beta200", "beta300", "contrast-l0.01-t30", "contrast-l0.1-t30", "contrast-l0.01-t50",
          "contrast-l0.1-t50"};
}

}  // namespace zeroforge
