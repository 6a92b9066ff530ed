#include "taskforge/codebook.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <thread>

#include "taskforge/error.hpp"
#include "taskforge/rng.hpp"

namespace taskforge {

Codebook::Codebook(int patch_side, GridShape grid) : patch_side_(patch_side), grid_(grid) {
  if (patch_side < 1 || grid.rows < 1 || grid.cols < 1) {
    throw ConfigError("codebook: patch side and grid must be positive");
  }
}

std::vector<TokenId> Codebook::encode(const Image& image) const {
  if (image.width() != width() || image.height() != height()) {
    throw CodecError("encode: image is " + std::to_string(image.width()) + "x" +
                     std::to_string(image.height()) + ", codec expects " + std::to_string(width()) + "x" +
                     std::to_string(height()));
  }
  std::vector<TokenId> tokens;
  tokens.reserve(tokens_per_image());
  for (int r = 0; r < grid_.rows; ++r) {
    for (int c = 0; c < grid_.cols; ++c) {
      tokens.push_back(encode_patch(image, c * patch_side_, r * patch_side_));
    }
  }
  return tokens;
}

Image Codebook::decode(std::span<const TokenId> tokens) const {
  if (tokens.size() != tokens_per_image()) {
    throw CodecError("decode: expected " + std::to_string(tokens_per_image()) + " tokens, got " +
                     std::to_string(tokens.size()));
  }
  for (TokenId id : tokens) {
    if (id >= vocab_size()) throw CodecError("decode: token id " + std::to_string(id) + " outside vocabulary");
  }
  Image out(width(), height());
  std::size_t i = 0;
  for (int r = 0; r < grid_.rows; ++r) {
    for (int c = 0; c < grid_.cols; ++c) {
      decode_patch(tokens[i++], out, c * patch_side_, r * patch_side_);
    }
  }
  return out;
}

namespace {

void read_patch(const Image& image, int x0, int y0, int side, std::uint8_t* dst) {
  auto px = image.pixels();
  const std::size_t row_bytes = static_cast<std::size_t>(side) * 3;
  for (int y = 0; y < side; ++y) {
    const std::size_t off = (static_cast<std::size_t>(y0 + y) * image.width() + x0) * 3;
    std::memcpy(dst + y * row_bytes, px.data() + off, row_bytes);
  }
}

void write_patch(Image& image, int x0, int y0, int side, const std::uint8_t* src) {
  auto px = image.pixels();
  const std::size_t row_bytes = static_cast<std::size_t>(side) * 3;
  for (int y = 0; y < side; ++y) {
    const std::size_t off = (static_cast<std::size_t>(y0 + y) * image.width() + x0) * 3;
    std::memcpy(px.data() + off, src + y * row_bytes, row_bytes);
  }
}

std::uint8_t to_u8(float v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

// ---- identity ---------------------------------------------------------------

std::string IdentityCodebook::descriptor() const {
  return "identity(patch=" + std::to_string(patch_side()) + ", grid=" + std::to_string(grid().rows) + "x" +
         std::to_string(grid().cols) + ")";
}

std::size_t IdentityCodebook::stored_patches() const {
  std::lock_guard lock(mutex_);
  return patches_.size();
}

TokenId IdentityCodebook::encode_patch(const Image& image, int x0, int y0) const {
  std::string key(static_cast<std::size_t>(patch_side()) * patch_side() * 3, '\0');
  read_patch(image, x0, y0, patch_side(), reinterpret_cast<std::uint8_t*>(key.data()));
  std::lock_guard lock(mutex_);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  if (patches_.size() >= kVocabSize) throw CodecError("identity codebook: vocabulary exhausted");
  auto id = static_cast<TokenId>(patches_.size());
  patches_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

void IdentityCodebook::decode_patch(TokenId id, Image& out, int x0, int y0) const {
  std::lock_guard lock(mutex_);
  if (id >= patches_.size()) {
    throw CodecError("identity codebook: token " + std::to_string(id) + " was never issued");
  }
  write_patch(out, x0, y0, patch_side(), reinterpret_cast<const std::uint8_t*>(patches_[id].data()));
}

std::shared_ptr<KMeansCodebook> IdentityCodebook::snapshot() const {
  std::lock_guard lock(mutex_);
  if (patches_.empty()) throw CodecError("identity codebook: no patches issued yet");
  std::vector<float> centroids;
  centroids.reserve(patches_.size() * patches_.front().size());
  for (const auto& p : patches_) {
    for (char c : p) centroids.push_back(static_cast<float>(static_cast<unsigned char>(c)));
  }
  return std::make_shared<KMeansCodebook>(patch_side(), grid(), std::move(centroids));
}

std::unique_ptr<IdentityCodebook> make_identity_codebook(int side, GridShape grid) {
  if (side < 1 || grid.rows < 1 || grid.cols < 1 || side % grid.rows != 0 || side % grid.cols != 0 ||
      side / grid.rows != side / grid.cols) {
    throw ConfigError("identity codebook: grid " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                      " does not divide side " + std::to_string(side) + " into square patches");
  }
  return std::make_unique<IdentityCodebook>(side / grid.rows, grid);
}

// ---- k-means ----------------------------------------------------------------

KMeansCodebook::KMeansCodebook(int patch_side, GridShape grid, std::vector<float> centroids)
    : Codebook(patch_side, grid),
      dim_(static_cast<std::size_t>(patch_side) * patch_side * 3),
      centroids_(std::move(centroids)) {
  if (centroids_.empty() || centroids_.size() % dim_ != 0) {
    throw CodecError("k-means codebook: centroid data is not a whole number of patch vectors");
  }
  centroid_count_ = centroids_.size() / dim_;
  for (float v : centroids_) {
    if (!std::isfinite(v)) throw CodecError("k-means codebook: non-finite centroid value");
  }
}

std::string KMeansCodebook::descriptor() const {
  return "kmeans(N=" + std::to_string(vocab_size()) + ", patch=" + std::to_string(patch_side()) +
         ", grid=" + std::to_string(grid().rows) + "x" + std::to_string(grid().cols) + ")";
}

TokenId KMeansCodebook::encode_patch(const Image& image, int x0, int y0) const {
  std::vector<std::uint8_t> patch(dim_);
  read_patch(image, x0, y0, patch_side(), patch.data());
  TokenId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroid_count_; ++k) {
    const float* c = centroids_.data() + k * dim_;
    double d = 0;
    for (std::size_t i = 0; i < dim_ && d < best_d; ++i) {
      double diff = double(patch[i]) - double(c[i]);
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<TokenId>(k);
    }
  }
  return best;
}

void KMeansCodebook::decode_patch(TokenId id, Image& out, int x0, int y0) const {
  std::vector<std::uint8_t> patch(dim_);
  const float* c = centroids_.data() + id * dim_;
  for (std::size_t i = 0; i < dim_; ++i) patch[i] = to_u8(c[i]);
  write_patch(out, x0, y0, patch_side(), patch.data());
}

std::optional<Sample> VectorSource::next() {
  if (pos_ >= samples_.size()) return std::nullopt;
  return samples_[pos_++];
}

namespace {

float squared_distance(const float* a, const float* b, std::size_t dim) {
  float d = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    float diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

template <typename Fn>
void parallel_ranges(std::size_t n, Fn fn) {
  unsigned threads = std::max(1u, std::min(std::thread::hardware_concurrency(), 16u));
  if (n < 2048 || threads == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    std::size_t lo = t * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

TrainResult train_codebook(SampleSource& stream, const TrainConfig& config) {
  if (config.vocab_size < 1) throw ConfigError("train: vocab_size must be positive");
  if (config.iterations < 1) throw ConfigError("train: iterations must be positive");
  if (config.patch_side < 1 || config.grid.rows < 1 || config.grid.cols < 1) {
    throw ConfigError("train: patch side and grid must be positive");
  }
  const int side = config.patch_side;
  const int width = config.grid.cols * side;
  const int height = config.grid.rows * side;
  const std::size_t dim = static_cast<std::size_t>(side) * side * 3;

  std::vector<float> data;
  std::vector<std::uint8_t> buf(dim);
  std::size_t images = 0;
  while (images < config.max_images) {
    auto sample = stream.next();
    if (!sample) break;
    Image img = sample->annotation ? resize_nearest(sample->image, width, height)
                                   : resize_bilinear(sample->image, width, height);
    for (int r = 0; r < config.grid.rows; ++r) {
      for (int c = 0; c < config.grid.cols; ++c) {
        read_patch(img, c * side, r * side, side, buf.data());
        data.insert(data.end(), buf.begin(), buf.end());
      }
    }
    ++images;
  }
  const std::size_t n = data.size() / dim;
  const std::size_t k = config.vocab_size;
  if (n < k) {
    throw TrainingError("train: " + std::to_string(n) + " patches available, vocabulary needs at least " +
                        std::to_string(k));
  }
  auto point = [&](std::size_t i) { return data.data() + i * dim; };

  RngState rng(config.seed);
  std::vector<float> centroids(k * dim);
  std::vector<float> nearest(n, std::numeric_limits<float>::infinity());

  // k-means++ seeding.
  std::size_t first = rng.uniform_index(n);
  std::copy_n(point(first), dim, centroids.begin());
  for (std::size_t j = 1; j < k; ++j) {
    const float* prev = centroids.data() + (j - 1) * dim;
    parallel_ranges(n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) nearest[i] = std::min(nearest[i], squared_distance(point(i), prev, dim));
    });
    double total = 0;
    for (float d : nearest) total += d;
    std::size_t pick = 0;
    if (total <= 0) {
      pick = rng.uniform_index(n);
    } else {
      double target = rng.uniform01() * total;
      double acc = 0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += nearest[i];
        if (acc > target && nearest[i] > 0) {
          pick = i;
          break;
        }
      }
    }
    std::copy_n(point(pick), dim, centroids.begin() + j * dim);
  }

  TrainResult result;
  result.patch_count = n;
  std::vector<std::uint32_t> assign(n);
  std::vector<float> dist(n);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);

  for (int it = 0; it < config.iterations; ++it) {
    parallel_ranges(n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        float best = std::numeric_limits<float>::infinity();
        std::uint32_t arg = 0;
        for (std::size_t j = 0; j < k; ++j) {
          float d = squared_distance(point(i), centroids.data() + j * dim, dim);
          if (d < best) {
            best = d;
            arg = static_cast<std::uint32_t>(j);
          }
        }
        assign[i] = arg;
        dist[i] = best;
      }
    });
    double objective = 0;
    for (float d : dist) objective += d;
    if (!result.objective.empty()) {
      double prev = result.objective.back();
      if (objective > prev * (1 + 1e-6) + 1e-6) {
        throw TrainingError("train: objective increased at iteration " + std::to_string(it));
      }
    }
    result.objective.push_back(objective);

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      double* s = sums.data() + assign[i] * dim;
      const float* p = point(i);
      for (std::size_t d = 0; d < dim; ++d) s[d] += p[d];
      ++counts[assign[i]];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) {
        // Reseed from the patch currently worst served by its centroid.
        std::size_t far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy_n(point(far), dim, centroids.begin() + j * dim);
        dist[far] = -1.0f;
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d) {
        centroids[j * dim + d] = static_cast<float>(sums[j * dim + d] / double(counts[j]));
      }
    }
  }

  for (float& v : centroids) v = static_cast<float>(to_u8(v));
  result.codebook = std::make_shared<KMeansCodebook>(side, config.grid, std::move(centroids));
  return result;
}

std::vector<TokenId> encode_at_boundary(const Codebook& codebook, const Image& image, bool annotation) {
  Image sized = annotation ? resize_nearest(image, codebook.width(), codebook.height())
                           : resize_bilinear(image, codebook.width(), codebook.height());
  return codebook.encode(sized);
}

Image decode_at_boundary(const Codebook& codebook, std::span<const TokenId> tokens, int width, int height,
                         bool annotation) {
  Image out = codebook.decode(tokens);
  return annotation ? resize_nearest(out, width, height) : resize_bilinear(out, width, height);
}

Image roundtrip(const Codebook& codebook, const Image& image, bool annotation) {
  return decode_at_boundary(codebook, encode_at_boundary(codebook, image, annotation), image.width(),
                            image.height(), annotation);
}

// ---- file format --------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'F', 'C', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("codebook file truncated reading " + what);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace

void save_codebook(const KMeansCodebook& codebook, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write codebook " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(codebook.vocab_size()));
  put_u32(out, static_cast<std::uint32_t>(codebook.tokens_per_image()));
  put_u32(out, static_cast<std::uint32_t>(codebook.grid().rows));
  put_u32(out, static_cast<std::uint32_t>(codebook.grid().cols));
  put_u32(out, static_cast<std::uint32_t>(codebook.patch_side()));
  for (float v : codebook.centroids()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("failed writing codebook " + path.string());
}

std::shared_ptr<KMeansCodebook> load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open codebook " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(path.string() + " is not a codebook file");
  }
  if (auto v = get_u32(in, "version"); v != kVersion) {
    throw IoError("unsupported codebook version " + std::to_string(v));
  }
  std::uint32_t n = get_u32(in, "N");
  std::uint32_t q = get_u32(in, "q");
  GridShape grid{static_cast<int>(get_u32(in, "rows")), static_cast<int>(get_u32(in, "cols"))};
  auto side = static_cast<int>(get_u32(in, "patch side"));
  if (n == 0 || grid.rows <= 0 || grid.cols <= 0 || side <= 0 || side > 4096 ||
      std::uint64_t(grid.rows) * grid.cols != q) {
    throw IoError("codebook header is inconsistent");
  }
  const std::size_t count = std::size_t(n) * side * side * 3;
  std::vector<float> centroids(count);
  for (auto& v : centroids) v = std::bit_cast<float>(get_u32(in, "centroids"));
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("codebook file has trailing bytes");
  try {
    return std::make_shared<KMeansCodebook>(side, grid, std::move(centroids));
  } catch (const CodecError& e) {
    throw IoError(std::string("codebook file: ") + e.what());
  }
}

}  // namespace taskforge
