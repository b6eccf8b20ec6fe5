#include "zeroforge/evaluation.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "zeroforge/archive.h"
#include "zeroforge/binarization.h"
#include "zeroforge/camera.h"
#include "zeroforge/errors.h"
#include "zeroforge/rng.h"

namespace zeroforge {

using nlohmann::json;

double IoUMatrix::MeanOffDiagonal() const {
  const int n = size();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) sum += values[i][j];
  return sum / (static_cast<double>(n) * (n - 1));
}

std::string IoUMatrix::ToText() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "#";
  for (const auto& l : labels) os << '\t' << l;
  os << '\n';
  for (int i = 0; i < size(); ++i) {
    os << (i < static_cast<int>(labels.size()) ? labels[i] : std::to_string(i));
    for (double v : values[i]) os << '\t' << v;
    os << '\n';
  }
  return os.str();
}

double IoU(const VoxelGrid& a, const VoxelGrid& b, bool* both_empty) {
  if (a.resolution != b.resolution || a.values.size() != b.values.size())
    throw ShapeError("IoU between grids of resolution " + std::to_string(a.resolution) + " and " +
                     std::to_string(b.resolution));
  if (!a.binarized || !b.binarized) throw DomainError("IoU needs hard-binarized grids");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    const bool x = a.values[i] != 0.0, y = b.values[i] != 0.0;
    inter += x && y;
    uni += x || y;
  }
  if (both_empty) *both_empty = uni == 0;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

IoUMatrix PairwiseIoU(std::span<const VoxelGrid> grids, std::vector<std::string> labels) {
  const int n = static_cast<int>(grids.size());
  if (labels.size() != grids.size()) throw ShapeError("PairwiseIoU needs one label per grid");
  IoUMatrix m;
  m.labels = std::move(labels);
  m.values.assign(n, std::vector<double>(n, 1.0));
  for (int i = 0; i < n; ++i) {
    bool empty = false;
    m.values[i][i] = IoU(grids[i], grids[i], &empty);
    for (int j = i + 1; j < n; ++j) {
      m.values[i][j] = m.values[j][i] = IoU(grids[i], grids[j], &empty);
      if (empty) m.empty_pairs.emplace_back(i, j);
    }
  }
  return m;
}

EmbeddingBatch PooledViewEmbeddings(std::span<const EmbeddingBatch> views_per_query) {
  if (views_per_query.empty()) throw ShapeError("no render embeddings");
  const int width = views_per_query.front().width();
  EmbeddingBatch out(static_cast<int>(views_per_query.size()), width);
  for (size_t q = 0; q < views_per_query.size(); ++q) {
    const EmbeddingBatch& v = views_per_query[q];
    if (v.rows() < 1 || v.width() != width) throw ShapeError("every query needs at least one view of equal width");
    for (int r = 0; r < v.rows(); ++r)
      for (int j = 0; j < width; ++j) out.at(static_cast<int>(q), j) += v.at(r, j);
  }
  out.Normalize();
  return out;
}

namespace {

EmbeddingBatch Unit(const EmbeddingBatch& e) {
  EmbeddingBatch c = e;
  c.Normalize();
  return c;
}

void CheckPair(const EmbeddingBatch& renders, const EmbeddingBatch& texts) {
  if (renders.rows() != texts.rows() || renders.width() != texts.width())
    throw ShapeError("render embeddings are " + std::to_string(renders.rows()) + "x" +
                     std::to_string(renders.width()) + ", text embeddings " + std::to_string(texts.rows()) + "x" +
                     std::to_string(texts.width()));
}

std::vector<EmbeddingBatch> EncodeRenders(const std::vector<std::vector<Image>>& renders,
                                          const VisionLanguageEncoder& encoder) {
  std::vector<EmbeddingBatch> out;
  out.reserve(renders.size());
  for (const auto& views : renders) out.push_back(encoder.EncodeImage(views));
  return out;
}

}  // namespace

double RPrecision(const EmbeddingBatch& renders, const EmbeddingBatch& texts, std::vector<bool>* correct) {
  CheckPair(renders, texts);
  const EmbeddingBatch r = Unit(renders), t = Unit(texts);
  const int q = r.rows();
  if (correct) correct->assign(q, false);
  int hits = 0;
  for (int i = 0; i < q; ++i) {
    const double own = Dot(r.row(i), t.row(i));
    bool ok = true;
    for (int j = 0; j < q && ok; ++j)
      if (j != i && Dot(r.row(i), t.row(j)) >= own) ok = false;
    hits += ok;
    if (correct) (*correct)[i] = ok;
  }
  return q ? static_cast<double>(hits) / q : 0.0;
}

double RPrecision(const std::vector<std::vector<Image>>& renders, const QuerySet& queries,
                  const VisionLanguageEncoder& encoder, std::vector<bool>* correct) {
  const auto views = EncodeRenders(renders, encoder);
  return RPrecision(PooledViewEmbeddings(views), encoder.EncodeText(queries.prompts), correct);
}

ForcedChoiceResult ForcedChoice(const EmbeddingBatch& renders, const EmbeddingBatch& texts, std::mt19937_64& rng) {
  CheckPair(renders, texts);
  const int q = renders.rows();
  if (q < 2) throw ConfigError("forced choice needs at least two queries");
  const EmbeddingBatch r = Unit(renders), t = Unit(texts);
  ForcedChoiceResult res;
  res.correct.assign(q, 0);
  res.trials.assign(q, 0);
  long hits = 0, total = 0;
  for (int i = 0; i < q; ++i) {
    const double own = Dot(r.row(i), t.row(i));
    for (int d = 0; d < q; ++d) {
      if (d == i) continue;
      const double other = Dot(r.row(d), t.row(i));
      const bool ok = own > other || (own == other && UniformUnit(rng) < 0.5);
      res.correct[i] += ok;
      res.trials[i] += 1;
      hits += ok;
      ++total;
    }
  }
  res.accuracy = static_cast<double>(hits) / static_cast<double>(total);
  return res;
}

ForcedChoiceResult ForcedChoice(const std::vector<std::vector<Image>>& renders, const QuerySet& queries,
                                const VisionLanguageEncoder& encoder, std::mt19937_64& rng) {
  const auto views = EncodeRenders(renders, encoder);
  return ForcedChoice(PooledViewEmbeddings(views), encoder.EncodeText(queries.prompts), rng);
}

json EvalReport::ToJson() const {
  auto rate = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  json rows = json::array();
  for (const auto& r : per_query)
    rows.push_back({{"prompt", r.prompt},
                    {"matched_similarity", r.matched_similarity},
                    {"retrieved", r.retrieved},
                    {"forced_choice_correct", r.forced_choice_correct},
                    {"forced_choice_trials", r.forced_choice_trials},
                    {"mean_iou_to_others", r.mean_iou_to_others},
                    {"empty", r.empty}});
  json empties = json::array();
  for (const auto& [i, j] : empty_pairs) empties.push_back({i, j});
  return {{"r_precision", r_precision},
          {"forced_choice_accuracy", rate(forced_choice_accuracy)},
          {"mean_offdiag_iou", mean_offdiag_iou},
          {"checkpoint", checkpoint},
          {"checkpoint_iteration", checkpoint_iteration},
          {"empty_pairs", empties},
          {"per_query", rows}};
}

EvalReport Evaluate(const Generator& generator, const QuerySet& queries, const VisionLanguageEncoder& encoder,
                    const RendererPlugin& renderer, double gamma, const EvalOptions& options) {
  queries.Validate();
  if (options.views < 1) throw ConfigError("evaluation needs at least one view per query");
  const int q = queries.size();
  const EmbeddingBatch text = encoder.EncodeText(queries.prompts);
  std::vector<VoxelGrid> shapes;
  for (const VoxelGrid& g : generator.Generate(text, options.noise_mode, options.seed))
    shapes.push_back(BinarizeHard(g, gamma));

  EvalReport report;
  report.iou = PairwiseIoU(shapes, queries.prompts);
  report.empty_pairs = report.iou.empty_pairs;
  report.mean_offdiag_iou = report.iou.MeanOffDiagonal();

  const int enc_res = encoder.spec().image_resolution;
  std::vector<EmbeddingBatch> views(q);
  for (int i = 0; i < q; ++i) {
    auto rng = MakeStream(options.seed, static_cast<uint64_t>(i), Stream::kEval);
    std::vector<Image> imgs;
    for (int v = 0; v < options.views; ++v) {
      Image img = renderer.Render(shapes[i], SampleCamera(rng));
      imgs.push_back(img.size == enc_res ? std::move(img) : ResizeBilinear(img, enc_res));
    }
    views[i] = encoder.EncodeImage(imgs);
  }
  const EmbeddingBatch pooled = PooledViewEmbeddings(views);
  std::vector<bool> retrieved;
  report.r_precision = RPrecision(pooled, text, &retrieved);

  ForcedChoiceResult fc;
  if (q >= 2) {
    auto rng = MakeStream(options.seed, std::numeric_limits<uint64_t>::max(), Stream::kEval);
    fc = ForcedChoice(pooled, text, rng);
    report.forced_choice_accuracy = fc.accuracy;
  } else {
    report.forced_choice_accuracy = std::numeric_limits<double>::quiet_NaN();
  }

  for (int i = 0; i < q; ++i) {
    QueryReport r;
    r.prompt = queries.prompts[i];
    r.matched_similarity = Dot(pooled.row(i), text.row(i));
    r.retrieved = retrieved[i];
    if (q >= 2) {
      r.forced_choice_correct = fc.correct[i];
      r.forced_choice_trials = fc.trials[i];
      double s = 0.0;
      for (int j = 0; j < q; ++j)
        if (j != i) s += report.iou.values[i][j];
      r.mean_iou_to_others = s / (q - 1);
    }
    bool any = false;
    for (double v : shapes[i].values) any = any || v != 0.0;
    r.empty = !any;
    report.per_query.push_back(std::move(r));
  }
  return report;
}

EvalReport EvaluateRun(const std::filesystem::path& run_dir, const EvalOptions& options) {
  const auto ckpt_path = LatestCheckpoint(run_dir);
  RunConfig fallback;
  const auto snapshot = run_dir / "config.snapshot";
  if (std::filesystem::exists(snapshot)) fallback = LoadRunConfig(snapshot);
  LoadedCheckpoint ckpt = LoadCheckpoint(ckpt_path, fallback);
  const RunConfig& cfg = ckpt.config;
  const QuerySet queries = LoadQueries(run_dir / "queries.txt");
  auto encoder = MakeEncoder(cfg.encoder);
  auto renderer = MakeRendererPlugin(cfg.render_plugin, cfg.render_plugin_checkpoint, cfg.render);
  EvalOptions opts = options;
  if (opts.views == 0) opts.views = cfg.loss.views_per_query;
  EvalReport report = Evaluate(*ckpt.generator, queries, *encoder, *renderer, cfg.binarize.gamma, opts);
  report.checkpoint = ckpt_path.string();
  report.checkpoint_iteration = ckpt.iteration;
  return report;
}

void WriteEvalReport(const std::filesystem::path& path, const EvalReport& report) {
  WriteFileAtomic(path, report.ToJson().dump(2) + "\n");
  WriteFileAtomic(path.string() + ".iou.txt", report.iou.ToText());
}

}  // namespace zeroforge
