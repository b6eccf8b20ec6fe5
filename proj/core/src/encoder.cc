#include "zeroforge/encoder.h"

#include "zeroforge/errors.h"
#include "zeroforge/remote_encoder.h"
#include "zeroforge/toy_encoder.h"

namespace zeroforge {

std::string ToString(EncoderKind kind) { return kind == EncoderKind::kToy ? "toy" : "real-vlm"; }

EncoderKind ParseEncoderKind(const std::string& s) {
  if (s == "toy") return EncoderKind::kToy;
  if (s == "real-vlm") return EncoderKind::kRealVlm;
  throw ConfigError("encoder.kind must be one of {real-vlm, toy}, got \"" + s + "\"");
}

std::unique_ptr<VisionLanguageEncoder> MakeEncoder(const EncoderOptions& options) {
  if (options.kind == EncoderKind::kToy)
    return std::make_unique<ToyEncoder>(options.seed, options.embedding_width, options.image_resolution);
  return std::make_unique<RemoteVlmEncoder>(options.endpoint, options.checkpoint);
}

void CheckImageBatch(std::span<const Image> images, int resolution) {
  if (images.empty()) throw ShapeError("image batch is empty");
  for (const Image& im : images) {
    if (im.size != resolution)
      throw ShapeError("image resolution " + std::to_string(im.size) + " does not match encoder resolution " +
                       std::to_string(resolution));
    if (im.data.size() != static_cast<size_t>(Image::kChannels) * im.plane())
      throw ShapeError("image buffer does not hold 3 x S x S values");
  }
}

}  // namespace zeroforge
