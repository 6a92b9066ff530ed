#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "taskforge/image.hpp"

namespace taskforge {

using TokenId = std::uint32_t;

struct GridShape {
  int rows = 12;
  int cols = 12;
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

// Image <-> token codec. An image of exactly width() x height() pixels maps
// to tokens_per_image() ids in [0, vocab_size()), one per square patch in
// row-major grid order.
class Codebook {
 public:
  virtual ~Codebook() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::string descriptor() const = 0;

  int patch_side() const { return patch_side_; }
  GridShape grid() const { return grid_; }
  int width() const { return grid_.cols * patch_side_; }
  int height() const { return grid_.rows * patch_side_; }
  std::size_t tokens_per_image() const { return static_cast<std::size_t>(grid_.rows) * grid_.cols; }

  // CodecError on a size mismatch.
  std::vector<TokenId> encode(const Image& image) const;
  // CodecError on a wrong token count or an id outside the vocabulary.
  Image decode(std::span<const TokenId> tokens) const;

 protected:
  Codebook(int patch_side, GridShape grid);

  virtual TokenId encode_patch(const Image& image, int x0, int y0) const = 0;
  virtual void decode_patch(TokenId id, Image& out, int x0, int y0) const = 0;

 private:
  int patch_side_;
  GridShape grid_;
};

// Lossless reference codec: every distinct patch gets the next free id.
// The vocabulary is nominally 256^3; ids are only decodable by the instance
// that issued them.
class IdentityCodebook final : public Codebook {
 public:
  static constexpr std::size_t kVocabSize = 256u * 256u * 256u;

  IdentityCodebook(int patch_side, GridShape grid) : Codebook(patch_side, grid) {}

  std::size_t vocab_size() const override { return kVocabSize; }
  std::string descriptor() const override;
  std::size_t stored_patches() const;
  // The issued patches as a nearest-centroid codebook (vocabulary = stored
  // patches), so tokens can be decoded by another process.
  std::shared_ptr<class KMeansCodebook> snapshot() const;

 protected:
  TokenId encode_patch(const Image& image, int x0, int y0) const override;
  void decode_patch(TokenId id, Image& out, int x0, int y0) const override;

 private:
  mutable std::mutex mutex_;
  mutable std::vector<std::string> patches_;
  mutable std::unordered_map<std::string, TokenId> index_;
};

// ConfigError when the grid does not divide `side` into square patches.
std::unique_ptr<IdentityCodebook> make_identity_codebook(int side, GridShape grid);

// Nearest-centroid patch quantiser. Centroids are patch vectors of
// patch_side^2 * 3 values in row-major, interleaved-RGB order.
class KMeansCodebook final : public Codebook {
 public:
  KMeansCodebook(int patch_side, GridShape grid, std::vector<float> centroids);

  std::size_t vocab_size() const override { return centroid_count_; }
  std::string descriptor() const override;
  std::size_t patch_dim() const { return dim_; }
  std::span<const float> centroid(TokenId id) const { return {centroids_.data() + id * dim_, dim_}; }
  const std::vector<float>& centroids() const { return centroids_; }

 protected:
  TokenId encode_patch(const Image& image, int x0, int y0) const override;
  void decode_patch(TokenId id, Image& out, int x0, int y0) const override;

 private:
  std::size_t dim_;
  std::size_t centroid_count_;
  std::vector<float> centroids_;
};

// A stream of training images. Annotation samples (renderings) are resized
// with nearest-neighbour at the codec boundary, natural images bilinearly.
struct Sample {
  Image image;
  bool annotation = false;
  std::string bucket;
  std::string variant;
  std::string dataset_id;
  std::string record_id;
};

class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::optional<Sample> next() = 0;
};

class VectorSource final : public SampleSource {
 public:
  explicit VectorSource(std::vector<Sample> samples) : samples_(std::move(samples)) {}
  std::optional<Sample> next() override;

 private:
  std::vector<Sample> samples_;
  std::size_t pos_ = 0;
};

struct TrainConfig {
  std::size_t vocab_size = 512;
  int patch_side = 16;
  GridShape grid{12, 12};
  int iterations = 10;
  std::uint64_t seed = 0;
  std::size_t max_images = 256;
};

struct TrainResult {
  std::shared_ptr<KMeansCodebook> codebook;
  // k-means objective (sum of squared patch distances) after each
  // assignment step; non-increasing.
  std::vector<double> objective;
  std::size_t patch_count = 0;
};

// k-means over patch vectors: k-means++ seeding, a fixed number of Lloyd
// iterations, empty clusters reseeded from the farthest patch, centroids
// rounded to 8-bit values at the end. Deterministic per seed.
// TrainingError when fewer than vocab_size patches are available.
TrainResult train_codebook(SampleSource& stream, const TrainConfig& config);

// Codec-boundary helpers: resize to the codec grid (nearest for
// annotations, bilinear otherwise) before encoding, and back on decode.
std::vector<TokenId> encode_at_boundary(const Codebook& codebook, const Image& image, bool annotation);
Image decode_at_boundary(const Codebook& codebook, std::span<const TokenId> tokens, int width, int height,
                         bool annotation);
Image roundtrip(const Codebook& codebook, const Image& image, bool annotation);

// Codebook file: "TFCB", u32 version, u32 N, u32 q, u32 rows, u32 cols,
// u32 patch side, then N centroid vectors as little-endian float32.
void save_codebook(const KMeansCodebook& codebook, const std::filesystem::path& path);
std::shared_ptr<KMeansCodebook> load_codebook(const std::filesystem::path& path);

}  // namespace taskforge
