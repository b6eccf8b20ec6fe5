#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "zeroforge/encoder.h"

namespace zeroforge {

// Deterministic stand-in for a CLIP-style encoder pair.
//
// Text: every character trigram of the prompt (the whole prompt when it is
// shorter than three bytes) is hashed with 32-bit FNV-1a into one of 64 bins;
// the count vector is multiplied by a seeded H x 64 Gaussian matrix and
// normalized.
//
// Image: the mean of the three channels is average-pooled to 8 x 8, flattened
// row-major and multiplied by the same matrix, then normalized. Using one
// matrix for both paths puts text and image in the same space: an image whose
// pooled pattern is proportional to a prompt's trigram histogram embeds onto
// that prompt exactly. An all-black image embeds like a uniform gray one and
// passes no gradient.
//
// Token count is the number of whitespace-separated words plus start and end
// tokens, limited to 77.
class ToyEncoder final : public VisionLanguageEncoder {
 public:
  static constexpr int kBins = 64;
  static constexpr int kPool = 8;
  static constexpr int kContextLimit = 77;

  explicit ToyEncoder(uint64_t seed = 0, int embedding_width = 64, int image_resolution = 224);

  const EncoderSpec& spec() const override { return spec_; }
  int context_limit() const override { return kContextLimit; }
  EmbeddingBatch EncodeText(std::span<const std::string> prompts) const override;
  EmbeddingBatch EncodeImage(std::span<const Image> images) const override;
  std::vector<Image> EncodeImageBackward(std::span<const Image> images,
                                         const EmbeddingBatch& grad) const override;
  uint64_t ParameterChecksum() const override;

  // H x 64 row-major projection matrix.
  const std::vector<double>& projection() const { return projection_; }

  static uint32_t HashGram(std::string_view gram);
  static std::array<double, kBins> TrigramCounts(std::string_view prompt);
  static int CountTokens(std::string_view prompt);
  // 8 x 8 pooled grayscale pattern of an image.
  std::array<double, kBins> Pool(const Image& image) const;

 private:
  std::vector<double> Project(std::span<const double> features) const;

  EncoderSpec spec_;
  std::vector<double> projection_;
};

}  // namespace zeroforge
