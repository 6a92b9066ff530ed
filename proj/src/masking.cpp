#include "taskforge/masking.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "taskforge/error.hpp"

namespace taskforge {

std::size_t TokenSequence::image_offset(std::size_t image) const {
  if (image >= images.size()) throw ParameterError("image index out of range");
  std::size_t offset = image * (q + k);
  // Context-end runs precede image `image` for every closed element.
  for (std::size_t i = 0; i < image; ++i) {
    bool closes = images[i].role == ImageRole::Context &&
                  (i + 1 == images.size() || images[i + 1].role != ImageRole::Context ||
                   images[i + 1].element != images[i].element);
    if (closes) offset += k;
  }
  return offset;
}

std::span<const TokenId> TokenSequence::image_tokens(std::size_t image) const {
  return std::span(ids).subspan(image_offset(image), q);
}

TokenSequence assemble_sequence(const std::vector<std::vector<TokenId>>& image_tokens,
                                const std::vector<ImageInfo>& images, std::size_t vocab_size, std::size_t q,
                                std::size_t k) {
  if (k < 1) throw ParameterError("special-token repeat k must be at least 1");
  if (q < 1 || vocab_size < 1) throw ParameterError("q and N must be positive");
  if (image_tokens.size() != images.size()) throw ValidationError("token lists and role map differ in size");

  // Role order: Context (elements 0, 1, ... contiguous), Query, Output.
  std::size_t i = 0;
  std::uint32_t element = 0;
  while (i < images.size() && images[i].role == ImageRole::Context) {
    if (images[i].element != element) {
      if (i == 0 || images[i].element != element + 1) throw ValidationError("context elements out of order");
      element = images[i].element;
    }
    ++i;
  }
  std::size_t n = i == 0 ? 0 : element + 1;
  if (i >= images.size() || images[i].role != ImageRole::Query) throw ValidationError("missing query image");
  for (++i; i < images.size(); ++i) {
    if (images[i].role != ImageRole::Output) throw ValidationError("only output images may follow the query");
  }

  TokenSequence seq;
  seq.vocab_size = vocab_size;
  seq.q = q;
  seq.k = k;
  seq.context_elements = n;
  seq.images = images;
  seq.ids.reserve(seq.expected_length());
  for (std::size_t im = 0; im < images.size(); ++im) {
    const auto& toks = image_tokens[im];
    if (toks.size() != q) {
      throw ValidationError("image " + std::to_string(im) + " has " + std::to_string(toks.size()) +
                            " tokens, expected " + std::to_string(q));
    }
    for (TokenId t : toks) {
      if (t >= vocab_size) throw ValidationError("content id " + std::to_string(t) + " outside [0, N)");
      seq.ids.push_back(t);
      seq.tags.push_back({PositionKind::Content, static_cast<std::uint32_t>(im)});
    }
    for (std::size_t r = 0; r < k; ++r) {
      seq.ids.push_back(seq.image_end());
      seq.tags.push_back({PositionKind::ImageEnd, static_cast<std::uint32_t>(im)});
    }
    bool closes = images[im].role == ImageRole::Context &&
                  (im + 1 == images.size() || images[im + 1].role != ImageRole::Context ||
                   images[im + 1].element != images[im].element);
    if (closes) {
      for (std::size_t r = 0; r < k; ++r) {
        seq.ids.push_back(seq.context_end());
        seq.tags.push_back({PositionKind::ContextEnd, images[im].element});
      }
    }
  }
  if (seq.exceeds_context_window()) {
    seq.warnings.push_back("sequence length " + std::to_string(seq.ids.size()) + " exceeds the context window of " +
                           std::to_string(kContextWindow));
  }
  return seq;
}

TokenSequence assemble_tokens(const CqoBundle& bundle, const Codebook& codebook, std::size_t k) {
  std::vector<std::vector<TokenId>> tokens;
  std::vector<ImageInfo> infos;
  auto add_chain = [&](const ImageChain& chain, std::size_t chain_index, bool held_out) {
    auto layout = chain_layout(bundle.structure, chain.keep);
    if (layout.size() != chain.images.size()) {
      throw ValidationError("chain " + std::to_string(chain_index) + " does not match the bundle structure");
    }
    for (std::size_t p = 0; p < chain.images.size(); ++p) {
      ImageInfo info;
      info.role = held_out ? (p == 0 ? ImageRole::Query : ImageRole::Output) : ImageRole::Context;
      info.element = held_out ? 0 : static_cast<std::uint32_t>(chain_index);
      info.annotation = layout[p].role == ChainElement::Role::Discriminative;
      try {
        tokens.push_back(encode_at_boundary(codebook, chain.images[p], info.annotation));
      } catch (const CodecError& e) {
        throw CodecError("record " + chain.record_id() + " position " + std::to_string(p) + ": " + e.what());
      }
      infos.push_back(info);
    }
  };
  for (std::size_t c = 0; c < bundle.context.size(); ++c) add_chain(bundle.context[c], c, false);
  add_chain(bundle.held_out, bundle.context.size(), true);
  return assemble_sequence(tokens, infos, codebook.vocab_size(), codebook.tokens_per_image(), k);
}

Image decode_image(const TokenSequence& seq, std::size_t index, const Codebook& codebook, int width, int height) {
  if (seq.q != codebook.tokens_per_image()) throw CodecError("sequence q does not match the codebook");
  return decode_at_boundary(codebook, seq.image_tokens(index), width, height, seq.images.at(index).annotation);
}

// ---- masking ----------------------------------------------------------------

std::string to_string(MaskingStrategy::Kind kind) {
  switch (kind) {
    case MaskingStrategy::Kind::Token: return "token";
    case MaskingStrategy::Kind::ImageToken: return "image_token";
    case MaskingStrategy::Kind::SequenceToken: return "sequence_token";
    case MaskingStrategy::Kind::Mixed: return "mixed";
  }
  return "?";
}

MaskingStrategy::Kind parse_masking_kind(const std::string& name) {
  for (auto kind : {MaskingStrategy::Kind::Token, MaskingStrategy::Kind::ImageToken,
                    MaskingStrategy::Kind::SequenceToken, MaskingStrategy::Kind::Mixed}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown masking strategy '" + name + "'");
}

std::string MaskingStrategy::descriptor() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", p);
  switch (kind) {
    case Kind::Token: return "token(p=" + std::string(buf) + ")";
    case Kind::ImageToken: return "image_token(n_images=" + std::to_string(n_images) + ")";
    case Kind::SequenceToken: return "sequence_token";
    case Kind::Mixed: return "mixed(p=" + std::string(buf) + ", n_images=" + std::to_string(n_images) + ")";
  }
  return "?";
}

MaskedSequence apply_masking(const TokenSequence& seq, const MaskingStrategy& strategy, RngState rng) {
  using Kind = MaskingStrategy::Kind;
  const bool token = strategy.kind == Kind::Token || strategy.kind == Kind::Mixed;
  const bool image = strategy.kind == Kind::ImageToken || strategy.kind == Kind::Mixed;
  const bool output = strategy.kind == Kind::SequenceToken || strategy.kind == Kind::Mixed;
  if (token && !(strategy.p > 0.0 && strategy.p < 1.0)) {
    throw ParameterError("masking probability p must lie in (0, 1)");
  }
  if (image && (strategy.n_images < 1 || strategy.n_images > seq.images.size())) {
    throw ParameterError("n_images " + std::to_string(strategy.n_images) + " outside [1, " +
                         std::to_string(seq.images.size()) + "]");
  }

  std::vector<std::uint8_t> mask(seq.ids.size(), 0);
  if (token) {
    RngState r = rng.derive("token");
    for (std::size_t p = 0; p < seq.ids.size(); ++p) {
      if (seq.tags[p].kind == PositionKind::Content && r.bernoulli(strategy.p)) mask[p] = 1;
    }
  }
  std::vector<std::uint8_t> whole(seq.images.size(), 0);
  if (image) {
    RngState r = rng.derive("image");
    std::vector<std::size_t> order(seq.images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < strategy.n_images; ++i) {
      std::size_t j = i + r.uniform_index(order.size() - i);
      std::swap(order[i], order[j]);
      whole[order[i]] = 1;
    }
  }
  if (output) {
    for (std::size_t i = 0; i < seq.images.size(); ++i) {
      if (seq.images[i].role == ImageRole::Output) whole[i] = 1;
    }
  }
  for (std::size_t p = 0; p < seq.ids.size(); ++p) {
    if (seq.tags[p].kind == PositionKind::Content && whole[seq.tags[p].owner]) mask[p] = 1;
  }

  MaskedSequence out;
  out.strategy = strategy;
  out.corrupted = seq.ids;
  RngState r = rng.derive("replace");
  for (std::size_t p = 0; p < seq.ids.size(); ++p) {
    if (!mask[p]) continue;
    out.positions.push_back(p);
    out.true_ids.push_back(seq.ids[p]);
    out.corrupted[p] = static_cast<TokenId>(r.uniform_index(seq.vocab_size));
  }
  return out;
}

TrainingPair split_targets(const MaskedSequence& masked) {
  TrainingPair pair;
  pair.input = masked.corrupted;
  for (std::size_t i = 0; i < masked.positions.size(); ++i) {
    pair.targets.push_back({static_cast<std::uint32_t>(masked.positions[i]), masked.true_ids[i]});
  }
  return pair;
}

std::vector<TokenId> patch_targets(const TrainingPair& pair) {
  std::vector<TokenId> out = pair.input;
  for (const auto& t : pair.targets) out.at(t.position) = t.id;
  return out;
}

// ---- token files ----------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'F', 'T', 'S'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint64_t value) {
    if (value > 0xFFFFFFFFu) throw IoError("token file: value does not fit in 32 bits");
    auto v = static_cast<std::uint32_t>(value);
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out_.write(reinterpret_cast<const char*>(b), 4);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  std::uint8_t u8() {
    int c = in_.get();
    if (c == std::char_traits<char>::eof()) throw IoError("token file truncated");
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    unsigned char b[4];
    if (!in_.read(reinterpret_cast<char*>(b), 4)) throw IoError("token file truncated");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    if (n && !in_.read(s.data(), static_cast<std::streamsize>(n))) throw IoError("token file truncated");
    return s;
  }

 private:
  std::istream& in_;
};

}  // namespace

void write_token_file(const std::filesystem::path& path, const TokenFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write token file " + path.string());
  Writer w(out);
  out.write(kMagic, 4);
  w.u32(kVersion);
  w.u32(file.vocab_size + 2);
  w.u32(file.q);
  w.u32(file.k);
  w.u32(file.vocab_size);
  w.u32(file.vocab_size + 1);
  for (const auto& rec : file.records) {
    const auto& s = rec.sequence;
    if (s.vocab_size != file.vocab_size || s.q != file.q || s.k != file.k) {
      throw ValidationError("record '" + rec.name + "' geometry differs from the file header");
    }
    w.u32(rec.name.size());
    out.write(rec.name.data(), static_cast<std::streamsize>(rec.name.size()));
    w.u32(s.images.size());
    for (const auto& info : s.images) {
      w.u8(static_cast<std::uint8_t>(info.role));
      w.u32(info.element);
      w.u8(info.annotation ? 1 : 0);
    }
    w.u32(s.context_elements);
    w.u32(s.ids.size());
    for (TokenId id : s.ids) w.u32(id);
    w.u8(rec.targets ? 1 : 0);
    if (rec.targets) {
      w.u32(rec.targets->size());
      for (const auto& t : *rec.targets) {
        w.u32(t.position);
        w.u32(t.id);
      }
    }
  }
  if (!out) throw IoError("failed writing token file " + path.string());
}

TokenFile read_token_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open token file " + path.string());
  Reader r(in);
  if (r.bytes(4) != std::string(kMagic, 4)) throw IoError(path.string() + " is not a token file");
  if (r.u32() != kVersion) throw IoError("unsupported token file version");
  TokenFile file;
  std::uint32_t total = r.u32();
  if (total < 3) throw IoError("token file vocabulary too small");
  file.vocab_size = total - 2;
  file.q = r.u32();
  file.k = r.u32();
  if (r.u32() != file.vocab_size || r.u32() != file.vocab_size + 1) {
    throw IoError("token file special ids must be N and N + 1");
  }
  while (!r.at_end()) {
    TokenRecord rec;
    rec.name = r.bytes(r.u32());
    std::uint32_t count = r.u32();
    std::vector<ImageInfo> infos(count);
    for (auto& info : infos) {
      std::uint8_t role = r.u8();
      if (role > 2) throw IoError("token file: bad image role");
      info.role = static_cast<ImageRole>(role);
      info.element = r.u32();
      info.annotation = r.u8() != 0;
    }
    std::uint32_t n = r.u32();
    std::uint32_t len = r.u32();
    std::vector<TokenId> ids(len);
    for (auto& id : ids) id = r.u32();
    std::vector<std::vector<TokenId>> per_image;
    std::size_t expected = std::size_t(count) * (file.q + file.k) + std::size_t(n) * file.k;
    if (len != expected) {
      throw ValidationError("record '" + rec.name + "' has length " + std::to_string(len) + ", expected " +
                            std::to_string(expected));
    }
    // Rebuild through assembly so special-token placement is verified.
    std::size_t pos = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
      per_image.emplace_back(ids.begin() + pos, ids.begin() + pos + file.q);
      pos += file.q + file.k;
      bool closes = infos[i].role == ImageRole::Context &&
                    (i + 1 == count || infos[i + 1].role != ImageRole::Context ||
                     infos[i + 1].element != infos[i].element);
      if (closes) pos += file.k;
    }
    rec.sequence = assemble_sequence(per_image, infos, file.vocab_size, file.q, file.k);
    if (rec.sequence.ids != ids) throw ValidationError("record '" + rec.name + "' has misplaced special tokens");
    if (rec.sequence.context_elements != n) throw ValidationError("record '" + rec.name + "' context count mismatch");
    if (r.u8()) {
      std::vector<Target> targets(r.u32());
      for (auto& t : targets) {
        t.position = r.u32();
        t.id = r.u32();
        if (t.position >= len || t.id >= file.vocab_size) {
          throw ValidationError("record '" + rec.name + "' has an invalid target");
        }
      }
      rec.targets = std::move(targets);
    }
    file.records.push_back(std::move(rec));
  }
  return file;
}

}  // namespace taskforge
