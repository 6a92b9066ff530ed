#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taskforge/codebook.hpp"
#include "taskforge/rng.hpp"
#include "taskforge/sampler.hpp"

namespace taskforge {

inline constexpr std::size_t kContextWindow = 4500;
inline constexpr std::size_t kDefaultSpecialRepeat = 1;

enum class ImageRole : std::uint8_t { Context = 0, Query = 1, Output = 2 };

struct ImageInfo {
  ImageRole role = ImageRole::Context;
  std::uint32_t element = 0;  // context element index (Context role only)
  bool annotation = false;    // rendered annotation (decoded with nearest resize)
  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

enum class PositionKind : std::uint8_t { Content, ImageEnd, ContextEnd };

struct PositionTag {
  PositionKind kind = PositionKind::Content;
  // Image index for Content / ImageEnd, context element for ContextEnd.
  std::uint32_t owner = 0;
  friend bool operator==(const PositionTag&, const PositionTag&) = default;
};

// Flat sequence c_0 ... c_{n-1}, Q, O. Every image's q content ids are
// followed by k <i-END> ids (= N); every context element is closed by k
// <c-END> ids (= N + 1).
struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<PositionTag> tags;
  std::vector<ImageInfo> images;
  std::size_t vocab_size = 0;  // N, content ids only
  std::size_t q = 0;
  std::size_t k = kDefaultSpecialRepeat;
  std::size_t context_elements = 0;
  std::vector<std::string> warnings;

  TokenId image_end() const { return static_cast<TokenId>(vocab_size); }
  TokenId context_end() const { return static_cast<TokenId>(vocab_size + 1); }
  std::size_t content_count() const { return images.size() * q; }
  // I * (q + k) + n * k.
  std::size_t expected_length() const { return images.size() * (q + k) + context_elements * k; }
  std::size_t image_offset(std::size_t image) const;
  std::span<const TokenId> image_tokens(std::size_t image) const;
  bool exceeds_context_window() const { return ids.size() > kContextWindow; }
};

// Builds the sequence from per-image token lists. Role order must be
// Context* (elements non-decreasing from 0), Query, Output*. ValidationError
// on a malformed role list, a wrong token count or an out-of-range id.
TokenSequence assemble_sequence(const std::vector<std::vector<TokenId>>& image_tokens,
                                const std::vector<ImageInfo>& images, std::size_t vocab_size, std::size_t q,
                                std::size_t k = kDefaultSpecialRepeat);

// Tokenizes a bundle through the codec boundary (annotation positions are
// resized nearest-neighbour). Adds a warning when the sequence is longer
// than the context window.
TokenSequence assemble_tokens(const CqoBundle& bundle, const Codebook& codebook,
                              std::size_t k = kDefaultSpecialRepeat);

// Decodes image `index` of the sequence and resizes it to width x height.
Image decode_image(const TokenSequence& seq, std::size_t index, const Codebook& codebook, int width, int height);

struct MaskingStrategy {
  enum class Kind { Token, ImageToken, SequenceToken, Mixed };
  Kind kind = Kind::Token;
  double p = 0.15;
  std::size_t n_images = 5;

  static MaskingStrategy token(double p) { return {Kind::Token, p, 0}; }
  static MaskingStrategy image_token(std::size_t n) { return {Kind::ImageToken, 0.0, n}; }
  static MaskingStrategy sequence_token() { return {Kind::SequenceToken, 0.0, 0}; }
  static MaskingStrategy mixed(double p, std::size_t n) { return {Kind::Mixed, p, n}; }

  std::string descriptor() const;
};

// Parses "token", "image_token", "sequence_token" or "mixed".
MaskingStrategy::Kind parse_masking_kind(const std::string& name);
std::string to_string(MaskingStrategy::Kind kind);

struct MaskedSequence {
  std::vector<TokenId> corrupted;
  std::vector<std::size_t> positions;  // ascending
  std::vector<TokenId> true_ids;       // aligned with positions
  MaskingStrategy strategy;
};

// Masks content positions only; each masked position gets a uniform id in
// [0, N). ParameterError for p outside (0, 1) or n_images outside [1, I].
MaskedSequence apply_masking(const TokenSequence& seq, const MaskingStrategy& strategy, RngState rng);

struct Target {
  std::uint32_t position = 0;
  TokenId id = 0;
  friend bool operator==(const Target&, const Target&) = default;
};

struct TrainingPair {
  std::vector<TokenId> input;
  std::vector<Target> targets;  // ascending positions
};

TrainingPair split_targets(const MaskedSequence& masked);
// Writes the true ids back into the input.
std::vector<TokenId> patch_targets(const TrainingPair& pair);

// Token file: "TFTS", u32 version, u32 N_total (= N + 2), u32 q, u32 k,
// u32 <i-END> id, u32 <c-END> id, then records until end of file. A record
// is: u32 name length + bytes, u32 image count, per image {u8 role,
// u32 element, u8 annotation}, u32 context elements, u32 length, length x u32
// ids, u8 has-targets, and if set u32 count + count x (u32 position, u32 id).
struct TokenRecord {
  std::string name;
  TokenSequence sequence;
  std::optional<std::vector<Target>> targets;
};

struct TokenFile {
  std::size_t vocab_size = 0;
  std::size_t q = 0;
  std::size_t k = kDefaultSpecialRepeat;
  std::vector<TokenRecord> records;
};

void write_token_file(const std::filesystem::path& path, const TokenFile& file);
// IoError on malformed bytes, ValidationError when a record breaks the
// length law or the header geometry.
TokenFile read_token_file(const std::filesystem::path& path);

}  // namespace taskforge
