#include "zeroforge/toy_encoder.h"

#include <cctype>
#include <sstream>

#include "zeroforge/errors.h"
#include "zeroforge/parameter.h"
#include "zeroforge/rng.h"

namespace zeroforge {

namespace {

bool IsZero(const std::vector<double>& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace

ToyEncoder::ToyEncoder(uint64_t seed, int embedding_width, int image_resolution)
    : spec_{EncoderKind::kToy, embedding_width, image_resolution} {
  if (embedding_width < 1) throw ConfigError("toy encoder embedding width must be positive");
  if (image_resolution < kPool || image_resolution % kPool != 0)
    throw ConfigError("toy encoder image resolution must be a positive multiple of 8, got " +
                      std::to_string(image_resolution));
  auto rng = MakeStream(seed, 0, Stream::kEncoder);
  projection_.resize(static_cast<size_t>(embedding_width) * kBins);
  for (double& w : projection_) w = StandardNormal(rng);
}

uint32_t ToyEncoder::HashGram(std::string_view gram) {
  uint32_t h = 2166136261u;
  for (unsigned char c : gram) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

std::array<double, ToyEncoder::kBins> ToyEncoder::TrigramCounts(std::string_view prompt) {
  std::array<double, kBins> counts{};
  if (prompt.empty()) throw DomainError("empty prompt");
  if (prompt.size() < 3) {
    counts[HashGram(prompt) % kBins] += 1.0;
    return counts;
  }
  for (size_t i = 0; i + 3 <= prompt.size(); ++i) counts[HashGram(prompt.substr(i, 3)) % kBins] += 1.0;
  return counts;
}

int ToyEncoder::CountTokens(std::string_view prompt) {
  int words = 0;
  bool in_word = false;
  for (unsigned char c : prompt) {
    bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words + 2;
}

std::vector<double> ToyEncoder::Project(std::span<const double> features) const {
  const int h = spec_.embedding_width;
  std::vector<double> out(h, 0.0);
  for (int i = 0; i < h; ++i) {
    const double* w = projection_.data() + static_cast<size_t>(i) * kBins;
    double s = 0.0;
    for (int j = 0; j < kBins; ++j) s += w[j] * features[j];
    out[i] = s;
  }
  return out;
}

EmbeddingBatch ToyEncoder::EncodeText(std::span<const std::string> prompts) const {
  if (prompts.empty()) throw ShapeError("encode_text needs at least one prompt");
  EmbeddingBatch out(static_cast<int>(prompts.size()), spec_.embedding_width);
  for (size_t i = 0; i < prompts.size(); ++i) {
    int tokens = CountTokens(prompts[i]);
    if (tokens > kContextLimit) throw ContextOverflowError(prompts[i], tokens, kContextLimit);
    auto counts = TrigramCounts(prompts[i]);
    auto e = Project(counts);
    std::copy(e.begin(), e.end(), out.row(static_cast<int>(i)).begin());
  }
  out.Normalize();
  return out;
}

std::array<double, ToyEncoder::kBins> ToyEncoder::Pool(const Image& image) const {
  std::array<double, kBins> pooled{};
  const int block = image.size / kPool;
  const double scale = 1.0 / (3.0 * block * block);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int r = 0; r < image.size; ++r) {
      for (int col = 0; col < image.size; ++col) {
        pooled[(r / block) * kPool + col / block] += image.at(c, r, col) * scale;
      }
    }
  }
  return pooled;
}

EmbeddingBatch ToyEncoder::EncodeImage(std::span<const Image> images) const {
  CheckImageBatch(images, spec_.image_resolution);
  EmbeddingBatch out(static_cast<int>(images.size()), spec_.embedding_width);
  for (size_t i = 0; i < images.size(); ++i) {
    auto e = Project(Pool(images[i]));
    // A black image has no pooled signal; it embeds like a uniform gray one.
    if (IsZero(e)) {
      std::array<double, kBins> flat;
      flat.fill(1.0);
      e = Project(flat);
    }
    std::copy(e.begin(), e.end(), out.row(static_cast<int>(i)).begin());
  }
  out.Normalize();
  return out;
}

std::vector<Image> ToyEncoder::EncodeImageBackward(std::span<const Image> images,
                                                   const EmbeddingBatch& grad) const {
  CheckImageBatch(images, spec_.image_resolution);
  if (grad.rows() != static_cast<int>(images.size()) || grad.width() != spec_.embedding_width)
    throw ShapeError("embedding gradient shape does not match the image batch");
  const int h = spec_.embedding_width;
  const int s = spec_.image_resolution;
  const int block = s / kPool;
  const double scale = 1.0 / (3.0 * block * block);
  std::vector<Image> out;
  out.reserve(images.size());
  for (size_t i = 0; i < images.size(); ++i) {
    auto raw = Project(Pool(images[i]));
    Image g(s);
    // The embedding is discontinuous at a black image; report no gradient.
    if (IsZero(raw)) {
      out.push_back(std::move(g));
      continue;
    }
    auto g_raw = NormalizeBackward(raw, grad.row(static_cast<int>(i)));
    std::array<double, kBins> g_pool{};
    for (int k = 0; k < h; ++k) {
      const double* w = projection_.data() + static_cast<size_t>(k) * kBins;
      for (int j = 0; j < kBins; ++j) g_pool[j] += w[j] * g_raw[k];
    }
    for (int c = 0; c < Image::kChannels; ++c)
      for (int r = 0; r < s; ++r)
        for (int col = 0; col < s; ++col) g.at(c, r, col) = g_pool[(r / block) * kPool + col / block] * scale;
    out.push_back(std::move(g));
  }
  return out;
}

uint64_t ToyEncoder::ParameterChecksum() const { return Checksum(projection_); }

}  // namespace zeroforge
