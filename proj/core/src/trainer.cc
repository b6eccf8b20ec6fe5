#include "zeroforge/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "zeroforge/archive.h"
#include "zeroforge/binarization.h"
#include "zeroforge/camera.h"
#include "zeroforge/checkpoint.h"
#include "zeroforge/errors.h"
#include "zeroforge/rng.h"

namespace zeroforge {

using nlohmann::json;

void QuerySet::Validate() const {
  if (prompts.empty()) throw ConfigError("query set is empty");
  std::set<std::string> seen;
  for (const auto& p : prompts) {
    if (p.empty()) throw ConfigError("query set contains an empty prompt");
    if (!seen.insert(p).second) throw ConfigError("duplicate prompt in query set: \"" + p + "\"");
  }
  if (weights.empty()) return;
  if (weights.size() != prompts.size())
    throw ConfigError("query set has " + std::to_string(prompts.size()) + " prompts but " +
                      std::to_string(weights.size()) + " weights");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("query weights must be finite and nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("query weights must sum to 1");
}

bool QuerySet::uniform() const {
  if (weights.empty()) return true;
  for (double w : weights)
    if (std::abs(w - weights.front()) > 1e-12) return false;
  return true;
}

double QuerySet::weight(int i) const { return weights.empty() ? 1.0 / size() : weights[i]; }

QuerySet ParseQueries(const std::string& text, const std::string& source_name) {
  QuerySet q;
  std::istringstream in(text);
  std::string line;
  int lineno = 0, weighted = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto tab = line.find('\t', first);
    std::string prompt = line.substr(first, tab == std::string::npos ? std::string::npos : tab - first);
    while (!prompt.empty() && prompt.back() == ' ') prompt.pop_back();
    if (tab != std::string::npos) {
      const std::string w = line.substr(tab + 1);
      try {
        size_t used = 0;
        q.weights.push_back(std::stod(w, &used));
        if (w.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(w);
      } catch (const std::logic_error&) {
        throw ConfigError(source_name + ":" + std::to_string(lineno) + ": bad weight \"" + w + "\"");
      }
      ++weighted;
    }
    q.prompts.push_back(prompt);
  }
  if (weighted != 0 && weighted != static_cast<int>(q.prompts.size()))
    throw ConfigError(source_name + ": either every prompt or none must carry a weight");
  if (weighted) {
    const double sum = std::accumulate(q.weights.begin(), q.weights.end(), 0.0);
    if (!(sum > 0.0)) throw ConfigError(source_name + ": query weights must have a positive sum");
    for (double& w : q.weights) w /= sum;
  }
  try {
    q.Validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  return q;
}

QuerySet LoadQueries(const std::filesystem::path& path) {
  std::string text;
  try {
    text = ReadFileBytes(path);
  } catch (const FormatError&) {
    throw ConfigError("cannot read query file " + path.string());
  }
  return ParseQueries(text, path.string());
}

std::string FormatQueries(const QuerySet& queries) {
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < queries.size(); ++i) {
    os << queries.prompts[i];
    if (!queries.weights.empty()) os << '\t' << queries.weights[i];
    os << '\n';
  }
  return os.str();
}

json ToJson(const RunRecord& r) {
  json j = {{"iteration", r.iteration},
            {"sim", r.loss.sim},
            {"contrast", r.loss.contrast},
            {"total", r.loss.total},
            {"per_query_sim", r.loss.per_query_sim},
            {"wall_time", r.wall_time}};
  if (r.checkpoint_path) j["checkpoint"] = *r.checkpoint_path;
  return j;
}

RunRecord RunRecordFromJson(const json& j) {
  RunRecord r;
  r.iteration = j.at("iteration").get<long>();
  r.loss.sim = j.at("sim").get<double>();
  r.loss.contrast = j.at("contrast").get<double>();
  r.loss.total = j.at("total").get<double>();
  r.loss.per_query_sim = j.value("per_query_sim", std::vector<double>{});
  r.wall_time = j.value("wall_time", 0.0);
  if (j.contains("checkpoint")) r.checkpoint_path = j["checkpoint"].get<std::string>();
  return r;
}

std::vector<RunRecord> ReadRunLog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open run log " + path.string());
  std::vector<RunRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(RunRecordFromJson(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (out.size() > 1 && out.back().iteration <= out[out.size() - 2].iteration)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": iterations are not increasing");
  }
  return out;
}

std::unique_ptr<Generator> BuildGenerator(const RunConfig& config, int embedding_width) {
  std::unique_ptr<Generator> g;
  if (config.train.init == InitMode::kRandom) {
    FlowConfig flow = config.flow;
    flow.condition_dim = embedding_width;
    g = std::make_unique<Generator>(flow, config.decoder);
    g->InitRandom(config.train.seed, config.binarize.gamma);
  } else {
    g = LoadPretrained(std::filesystem::path(config.train.archive));
    if (g->flow().config().condition_dim != embedding_width)
      throw ConfigError("archive " + config.train.archive + " expects " +
                        std::to_string(g->flow().config().condition_dim) + "-dim text embeddings, encoder produces " +
                        std::to_string(embedding_width));
  }
  return g;
}

Trainer::Trainer(RunConfig config, QuerySet queries, const VisionLanguageEncoder& encoder,
                 const RendererPlugin& renderer, std::unique_ptr<Generator> generator)
    : config_(std::move(config)),
      queries_(std::move(queries)),
      encoder_(encoder),
      renderer_(renderer),
      generator_(std::move(generator)) {
  config_.loss.Validate();
  config_.binarize.Validate();
  queries_.Validate();
  if (!generator_) throw ConfigError("trainer needs a generator");
  const auto& tc = config_.train;
  if (tc.batch_mode == BatchMode::kAllPrompts && !queries_.uniform())
    throw ConfigError("non-uniform query weights need train.batch_mode = iid");
  if (generator_->flow().config().condition_dim != encoder_.spec().embedding_width)
    throw ConfigError("flow condition width " + std::to_string(generator_->flow().config().condition_dim) +
                      " does not match encoder embedding width " + std::to_string(encoder_.spec().embedding_width));
  if (tc.zeroconv && !generator_->decoder().wrapped()) generator_->WrapZeroConv();
  generator_->SetFlowTrainable(tc.finetune_flow);
  text_ = encoder_.EncodeText(queries_.prompts);
  adam_ = std::make_unique<Adam>(generator_->parameters(),
                                 AdamOptions{tc.lr, tc.adam_beta1, tc.adam_beta2, tc.adam_eps});
}

RunRecord Trainer::Step(long iteration) {
  const TrainConfig& tc = config_.train;
  const int q = queries_.size();
  const auto iter = static_cast<uint64_t>(iteration);

  std::vector<int> idx;
  int num_views = 1;
  if (tc.batch_mode == BatchMode::kAllPrompts) {
    idx.resize(q);
    std::iota(idx.begin(), idx.end(), 0);
    num_views = config_.loss.views_per_query;
  } else {
    auto rng = MakeStream(tc.seed, iter, Stream::kPrompts);
    for (int k = 0; k < tc.batch_multiplier * q; ++k) {
      const double u = UniformUnit(rng);
      double acc = 0.0;
      int pick = q - 1;
      for (int i = 0; i < q; ++i) {
        acc += queries_.weight(i);
        if (u < acc) {
          pick = i;
          break;
        }
      }
      idx.push_back(pick);
    }
  }
  const int batch = static_cast<int>(idx.size());
  const EmbeddingBatch cond = text_.Gather(idx);

  LatentFlow& flow = generator_->flow();
  OccupancyDecoder& decoder = generator_->decoder();
  Matrix u = Matrix::Zero(batch, flow.config().latent_dim);
  if (tc.noise_mode == NoiseMode::kGaussian) {
    auto rng = MakeStream(tc.seed, iter, Stream::kNoise);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = StandardNormal(rng);
  }
  const bool flow_trainable = tc.finetune_flow;
  LatentFlow::Tape flow_tape;
  const Matrix z = flow.Inverse(u, cond, flow_trainable ? &flow_tape : nullptr);

  auto abort_non_finite = [&](const std::string& what, int item) {
    std::ostringstream os;
    os << "non-finite " << what << " at iteration " << iteration << " (batch item " << item << ", prompt \""
       << queries_.prompts[idx[item]] << "\")";
    throw TrainingAborted(os.str(), iteration);
  };
  auto all_finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };

  std::vector<VoxelGrid> raw(batch), soft(batch);
  for (int b = 0; b < batch; ++b) {
    raw[b] = decoder.DecodeOne(z.row(b), nullptr);
    if (!all_finite(raw[b].values)) abort_non_finite("occupancy", b);
    soft[b] = BinarizeSoft(raw[b], config_.binarize);
  }

  auto cam = MakeStream(tc.seed, iter, Stream::kCamera);
  std::vector<std::vector<CameraPose>> poses(num_views, std::vector<CameraPose>(batch));
  for (auto& view : poses)
    for (auto& p : view) p = SampleCamera(cam);

  const int enc_res = encoder_.spec().image_resolution;
  const int render_res = renderer_.output_resolution();
  std::vector<std::vector<Image>> images(num_views);
  std::vector<EmbeddingBatch> views(num_views);
  for (int v = 0; v < num_views; ++v) {
    images[v].reserve(batch);
    for (int b = 0; b < batch; ++b) {
      Image img = renderer_.Render(soft[b], poses[v][b]);
      if (!all_finite(img.data)) abort_non_finite("render from " + renderer_.name(), b);
      images[v].push_back(render_res == enc_res ? std::move(img) : ResizeBilinear(img, enc_res));
    }
    views[v] = encoder_.EncodeImage(images[v]);
  }
  const std::vector<EmbeddingBatch> texts(num_views, cond);
  std::vector<EmbeddingBatch> grads;
  LossBreakdown loss = TotalLoss(views, texts, config_.loss, &grads);
  if (!std::isfinite(loss.total) || !std::isfinite(loss.sim) || !std::isfinite(loss.contrast)) {
    std::ostringstream os;
    os.precision(17);
    os << "non-finite loss at iteration " << iteration << ": sim=" << loss.sim << " contrast=" << loss.contrast
       << " total=" << loss.total;
    double max_abs = 0.0;
    for (const auto& g : raw)
      for (double x : g.values) max_abs = std::isfinite(x) ? std::max(max_abs, std::abs(x)) : INFINITY;
    os << " max|occupancy|=" << max_abs;
    throw TrainingAborted(os.str(), iteration);
  }

  generator_->ZeroGrad();
  const int n = decoder.config().resolution;
  std::vector<VoxelGrid> grad_soft(batch, VoxelGrid(n));
  for (int v = 0; v < num_views; ++v) {
    const std::vector<Image> gimg = encoder_.EncodeImageBackward(images[v], grads[v]);
    for (int b = 0; b < batch; ++b) {
      const Image gi = render_res == enc_res ? gimg[b] : ResizeBilinearBackward(gimg[b], render_res);
      const VoxelGrid g = renderer_.Backward(soft[b], poses[v][b], gi);
      for (size_t k = 0; k < g.values.size(); ++k) grad_soft[b].values[k] += g.values[k];
    }
  }
  Matrix grad_z(batch, flow.config().latent_dim);
  for (int b = 0; b < batch; ++b) {
    const VoxelGrid graw = BinarizeSoftBackward(raw[b], grad_soft[b], config_.binarize);
    // The decoder tape is rebuilt here rather than kept from the forward pass
    // so only one item's activations are alive at a time.
    OccupancyDecoder::Tape tape;
    decoder.DecodeOne(z.row(b), &tape);
    grad_z.row(b) = decoder.Backward(tape, graw);
  }
  if (flow_trainable) flow.InverseBackward(flow_tape, grad_z);
  adam_->Step();

  RunRecord rec;
  rec.iteration = iteration;
  rec.loss = std::move(loss);
  return rec;
}

json Trainer::CheckpointMetadata(long iteration) const {
  return {{"iteration", iteration}, {"config", SnapshotRunConfig(config_)}, {"queries", queries_.prompts}};
}

TrainResult Trainer::Run(const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  const TrainConfig& tc = config_.train;
  const bool persist = !run_dir.empty();
  fs::path log_path;
  std::ofstream log;
  if (persist) {
    fs::create_directories(run_dir / "checkpoints");
    log_path = run_dir / "log.jsonl";
    if (fs::exists(log_path)) throw ConfigError("run directory " + run_dir.string() + " already holds a run log");
    WriteFileAtomic(run_dir / "config.snapshot", SnapshotRunConfig(config_));
    WriteFileAtomic(run_dir / "queries.txt", FormatQueries(queries_));
    log.open(log_path, std::ios::app);
    if (!log) throw ConfigError("cannot create " + log_path.string());
  }

  ParameterList frozen;
  for (Parameter* p : generator_->parameters())
    if (!p->trainable) frozen.push_back(p);

  TrainResult result;
  result.encoder_checksum_before = encoder_.ParameterChecksum();
  result.frozen_checksum_before = Checksum(frozen);

  auto save = [&](long n) -> std::string {
    const fs::path path = run_dir / "checkpoints" / ("iter-" + std::to_string(n));
    try {
      SaveCheckpoint(path, *generator_, CheckpointMetadata(n));
    } catch (const Error& e) {
      throw TrainingAborted(std::string("checkpoint write failed: ") + e.what(), n);
    } catch (const fs::filesystem_error& e) {
      throw TrainingAborted(std::string("checkpoint write failed: ") + e.what(), n);
    }
    result.final_checkpoint = path;
    return path.string();
  };

  if (persist) save(0);
  const auto start = std::chrono::steady_clock::now();
  for (long i = 0; i < tc.iterations; ++i) {
    RunRecord rec = Step(i);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const long n = i + 1;
    if (persist && (n % tc.checkpoint_every == 0 || n == tc.iterations)) rec.checkpoint_path = save(n);
    if (persist) {
      log << ToJson(rec).dump() << '\n';
      log.flush();
      if (!log) throw TrainingAborted("cannot append to " + log_path.string(), i);
    }
    if (on_record) on_record(rec);
    result.records.push_back(std::move(rec));
  }

  result.encoder_checksum_after = encoder_.ParameterChecksum();
  result.frozen_checksum_after = Checksum(frozen);
  return result;
}

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path, const RunConfig& fallback) {
  const Archive archive = ReadArchive(path);
  LoadedCheckpoint out;
  try {
    out.generator = LoadPretrained(archive);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  out.config = fallback;
  const json& meta = archive.metadata;
  if (meta.contains("config") && meta["config"].is_string()) {
    out.config = ParseRunConfig(meta["config"].get<std::string>(), path.string() + " (stored config)");
    out.has_config = true;
  }
  out.iteration = meta.value("iteration", 0L);
  return out;
}

VoxelGrid GenerateOccupancy(const Generator& generator, const VisionLanguageEncoder& encoder,
                            const std::string& prompt, NoiseMode mode, uint64_t seed) {
  const std::vector<std::string> prompts{prompt};
  return generator.Generate(encoder.EncodeText(prompts), mode, seed).front();
}

VoxelGrid GenerateShape(const Generator& generator, const VisionLanguageEncoder& encoder, const std::string& prompt,
                        NoiseMode mode, uint64_t seed, double gamma) {
  return BinarizeHard(GenerateOccupancy(generator, encoder, prompt, mode, seed), gamma);
}

std::filesystem::path LatestCheckpoint(const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  const fs::path dir = run_dir / "checkpoints";
  static const std::regex kName(R"(iter-(\d+))");
  long best = -1;
  fs::path best_path;
  std::error_code ec;
  if (fs::is_directory(dir, ec)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::smatch m;
      const std::string name = entry.path().filename().string();
      if (!entry.is_regular_file() || !std::regex_match(name, m, kName)) continue;
      const long n = std::stol(m[1]);
      if (n > best) {
        best = n;
        best_path = entry.path();
      }
    }
  }
  if (best < 0) throw ConfigError("no checkpoints found in " + dir.string());
  return best_path;
}

}  // namespace zeroforge
