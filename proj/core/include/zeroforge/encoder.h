#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "zeroforge/embedding.h"
#include "zeroforge/image.h"

namespace zeroforge {

enum class EncoderKind { kRealVlm, kToy };

std::string ToString(EncoderKind kind);
EncoderKind ParseEncoderKind(const std::string& s);

struct EncoderSpec {
  EncoderKind kind = EncoderKind::kToy;
  int embedding_width = 64;
  int image_resolution = 224;
};

// Settings that select and construct an encoder (config keys `encoder.*`).
struct EncoderOptions {
  EncoderKind kind = EncoderKind::kToy;
  uint64_t seed = 0;
  int embedding_width = 64;
  int image_resolution = 224;
  std::string checkpoint;  // real-vlm only
  std::string endpoint = "http://127.0.0.1:8765";  // real-vlm only
};

// Frozen text encoder g and image encoder h sharing one embedding space.
// Implementations are immutable after construction and safe to call from
// several threads at once.
class VisionLanguageEncoder {
 public:
  virtual ~VisionLanguageEncoder() = default;

  virtual const EncoderSpec& spec() const = 0;
  // Maximum prompt length in tokens, including start/end tokens.
  virtual int context_limit() const = 0;

  // One unit-norm row per prompt. Throws ContextOverflowError for prompts
  // longer than context_limit().
  virtual EmbeddingBatch EncodeText(std::span<const std::string> prompts) const = 0;

  // One unit-norm row per image. Images must be spec().image_resolution wide.
  virtual EmbeddingBatch EncodeImage(std::span<const Image> images) const = 0;

  // Gradient of a scalar loss w.r.t. the input pixels, given its gradient
  // w.r.t. the normalized embeddings returned by EncodeImage.
  virtual std::vector<Image> EncodeImageBackward(std::span<const Image> images,
                                                 const EmbeddingBatch& grad) const = 0;

  // Fingerprint of the frozen weights.
  virtual uint64_t ParameterChecksum() const = 0;
};

std::unique_ptr<VisionLanguageEncoder> MakeEncoder(const EncoderOptions& options);

// Shared argument validation for implementations.
void CheckImageBatch(std::span<const Image> images, int resolution);

}  // namespace zeroforge
