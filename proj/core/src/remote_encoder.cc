#include "zeroforge/remote_encoder.h"

#include <httplib.h>

#include <mutex>

#include <nlohmann/json.hpp>

#include "zeroforge/errors.h"

namespace zeroforge {

using nlohmann::json;

struct RemoteVlmEncoder::Client {
  explicit Client(const std::string& endpoint) : http(endpoint) {
    http.set_read_timeout(600, 0);
    http.set_write_timeout(600, 0);
  }

  json Post(const std::string& path, const json& body) {
    auto res = http.Post(path, body.dump(), "application/json");
    if (!res) throw ConfigError("vision-language server unreachable at " + path + ": " + httplib::to_string(res.error()));
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      throw FormatError("malformed reply from vision-language server on " + path + ": " + e.what());
    }
    if (res->status == 422 && reply.value("error", "") == "context_overflow") {
      throw ContextOverflowError(reply.at("prompt").get<std::string>(), reply.at("tokens").get<int>(),
                                 reply.at("limit").get<int>());
    }
    if (res->status != 200)
      throw Error("vision-language server error on " + path + " (HTTP " + std::to_string(res->status) +
                  "): " + reply.value("error", res->body));
    return reply;
  }

  mutable std::mutex mu;
  httplib::Client http;
};

namespace {

json ImagesToJson(std::span<const Image> images) {
  json arr = json::array();
  for (const Image& im : images) arr.push_back(im.data);
  return arr;
}

EmbeddingBatch EmbeddingsFromJson(const json& rows, int expected_rows, int width) {
  if (!rows.is_array() || static_cast<int>(rows.size()) != expected_rows)
    throw ShapeError("vision-language server returned the wrong number of embeddings");
  EmbeddingBatch out(expected_rows, width);
  for (int i = 0; i < expected_rows; ++i) {
    auto v = rows[i].get<std::vector<double>>();
    if (static_cast<int>(v.size()) != width) throw ShapeError("vision-language server returned the wrong embedding width");
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  out.Normalize();
  return out;
}

}  // namespace

RemoteVlmEncoder::RemoteVlmEncoder(const std::string& endpoint, const std::string& checkpoint)
    : client_(std::make_unique<Client>(endpoint)) {
  if (checkpoint.empty()) throw ConfigError("encoder.kind = real-vlm requires encoder.checkpoint");
  json reply = client_->Post("/load", json{{"checkpoint", checkpoint}});
  spec_.kind = EncoderKind::kRealVlm;
  spec_.embedding_width = reply.at("embedding_width").get<int>();
  spec_.image_resolution = reply.at("image_resolution").get<int>();
  context_limit_ = reply.value("context_limit", 77);
  checksum_ = std::stoull(reply.value("checksum", std::string("0")), nullptr, 16);
  if (spec_.image_resolution != 224)
    throw ConfigError("real vision-language encoder must take 224 x 224 images, server reports " +
                      std::to_string(spec_.image_resolution));
}

RemoteVlmEncoder::~RemoteVlmEncoder() = default;

EmbeddingBatch RemoteVlmEncoder::EncodeText(std::span<const std::string> prompts) const {
  if (prompts.empty()) throw ShapeError("encode_text needs at least one prompt");
  std::lock_guard lock(client_->mu);
  json reply = client_->Post("/encode_text", json{{"prompts", std::vector<std::string>(prompts.begin(), prompts.end())}});
  return EmbeddingsFromJson(reply.at("embeddings"), static_cast<int>(prompts.size()), spec_.embedding_width);
}

EmbeddingBatch RemoteVlmEncoder::EncodeImage(std::span<const Image> images) const {
  CheckImageBatch(images, spec_.image_resolution);
  std::lock_guard lock(client_->mu);
  json reply = client_->Post("/encode_image", json{{"resolution", spec_.image_resolution}, {"images", ImagesToJson(images)}});
  return EmbeddingsFromJson(reply.at("embeddings"), static_cast<int>(images.size()), spec_.embedding_width);
}

std::vector<Image> RemoteVlmEncoder::EncodeImageBackward(std::span<const Image> images,
                                                         const EmbeddingBatch& grad) const {
  CheckImageBatch(images, spec_.image_resolution);
  if (grad.rows() != static_cast<int>(images.size()) || grad.width() != spec_.embedding_width)
    throw ShapeError("embedding gradient shape does not match the image batch");
  json g = json::array();
  for (int i = 0; i < grad.rows(); ++i) g.push_back(std::vector<double>(grad.row(i).begin(), grad.row(i).end()));
  std::lock_guard lock(client_->mu);
  json reply = client_->Post("/encode_image_vjp", json{{"resolution", spec_.image_resolution},
                                                       {"images", ImagesToJson(images)},
                                                       {"grad", g}});
  const auto& rows = reply.at("grad_images");
  if (rows.size() != images.size()) throw ShapeError("vision-language server returned the wrong number of gradients");
  std::vector<Image> out;
  for (const auto& r : rows) {
    Image im(spec_.image_resolution);
    im.data = r.get<std::vector<double>>();
    if (im.data.size() != static_cast<size_t>(Image::kChannels) * im.plane())
      throw ShapeError("vision-language server returned a gradient image of the wrong size");
    out.push_back(std::move(im));
  }
  return out;
}

}  // namespace zeroforge
