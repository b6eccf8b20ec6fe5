#pragma once

#include <memory>
#include <string>

#include "zeroforge/encoder.h"

namespace zeroforge {

// Real vision-language encoder served by a local process that owns a
// published CLIP checkpoint and its tokenizer (see tools/vlm_server.py).
//
// Wire protocol, JSON over HTTP POST:
//   /load              {"checkpoint": path}
//                      -> {"embedding_width", "image_resolution", "context_limit", "checksum"}
//   /encode_text       {"prompts": [str]} -> {"embeddings": [[f]]}
//                      context overflow -> HTTP 422
//                      {"error": "context_overflow", "prompt", "tokens", "limit"}
//   /encode_image      {"resolution": R, "images": [[3*R*R f, planar]]}
//                      -> {"embeddings": [[f]]}
//   /encode_image_vjp  {"resolution": R, "images": [...], "grad": [[f]]}
//                      -> {"grad_images": [[3*R*R f]]}
// Returned embeddings are unit norm; the VJP is taken w.r.t. the normalized
// embeddings.
class RemoteVlmEncoder final : public VisionLanguageEncoder {
 public:
  RemoteVlmEncoder(const std::string& endpoint, const std::string& checkpoint);
  ~RemoteVlmEncoder() override;

  const EncoderSpec& spec() const override { return spec_; }
  int context_limit() const override { return context_limit_; }
  EmbeddingBatch EncodeText(std::span<const std::string> prompts) const override;
  EmbeddingBatch EncodeImage(std::span<const Image> images) const override;
  std::vector<Image> EncodeImageBackward(std::span<const Image> images,
                                         const EmbeddingBatch& grad) const override;
  uint64_t ParameterChecksum() const override { return checksum_; }

 private:
  struct Client;
  std::unique_ptr<Client> client_;
  EncoderSpec spec_;
  int context_limit_ = 77;
  uint64_t checksum_ = 0;
};

}  // namespace zeroforge
