#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dpparse {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Duration of one block (a pair of 20ms frames).
inline constexpr std::uint32_t kBlockMs = 40;

enum class Mode { continuous, discrete };

inline const char *to_string(Mode m) { return m == Mode::continuous ? "continuous" : "discrete"; }

inline Mode parse_mode(const std::string &s) {
  if (s == "continuous") return Mode::continuous;
  if (s == "discrete") return Mode::discrete;
  throw Error("unknown mode '" + s + "' (expected continuous or discrete)");
}

// Time conversions: starts round down, ends round up.
inline std::uint32_t ms_to_block_start(std::uint32_t ms) { return ms / kBlockMs; }
inline std::uint32_t ms_to_block_end(std::uint32_t ms) { return (ms + kBlockMs - 1) / kBlockMs; }
inline std::uint32_t block_to_ms(std::uint32_t block) { return block * kBlockMs; }

/// Dense per-utterance matrix of block embeddings, row-major.
class FrameMatrix {
public:
  FrameMatrix() = default;
  FrameMatrix(std::string utterance_id, std::uint32_t n_blocks, std::uint32_t dim,
              std::vector<float> data)
      : id_(std::move(utterance_id)), n_blocks_(n_blocks), dim_(dim), data_(std::move(data)) {
    if (data_.size() != std::size_t(n_blocks_) * dim_)
      throw Error("frame matrix '" + id_ + "': payload size does not match n_blocks x dim");
  }

  const std::string &id() const { return id_; }
  std::uint32_t n_blocks() const { return n_blocks_; }
  std::uint32_t dim() const { return dim_; }
  std::span<const float> data() const { return data_; }
  std::span<const float> row(std::uint32_t t) const {
    return std::span<const float>(data_).subspan(std::size_t(t) * dim_, dim_);
  }

private:
  std::string id_;
  std::uint32_t n_blocks_ = 0;
  std::uint32_t dim_ = 0;
  std::vector<float> data_;
};

/// Half-open block interval [start, end) inside utterance `utt` (index into its corpus).
struct Segment {
  std::uint32_t utt = 0;
  std::uint32_t start = 0;
  std::uint32_t end = 0;

  std::uint32_t length() const { return end - start; }

  /// Strict intersection: segments sharing only an endpoint do not overlap.
  bool overlaps(const Segment &o) const { return utt == o.utt && start < o.end && o.start < end; }

  friend bool operator==(const Segment &, const Segment &) = default;
};

/// One phonemized text utterance; each symbol is one unit.
struct TextUtterance {
  std::string id;
  std::vector<std::uint32_t> symbols;
};

/// Continuous corpus: one FrameMatrix per utterance.
struct Corpus {
  std::vector<FrameMatrix> utterances;

  std::size_t size() const { return utterances.size(); }
  const std::string &id(std::size_t i) const { return utterances[i].id(); }
  std::uint32_t n_units(std::size_t i) const { return utterances[i].n_blocks(); }
  std::uint32_t dim() const { return utterances.empty() ? 0 : utterances.front().dim(); }
};

/// Discrete corpus over an integer alphabet.
struct TextCorpus {
  std::vector<TextUtterance> utterances;
  std::vector<std::string> alphabet;

  std::size_t size() const { return utterances.size(); }
  const std::string &id(std::size_t i) const { return utterances[i].id; }
  std::uint32_t n_units(std::size_t i) const {
    return static_cast<std::uint32_t>(utterances[i].symbols.size());
  }
};

template <typename C>
concept SegmentableCorpus = requires(const C &c, std::size_t i) {
  { c.size() } -> std::convertible_to<std::size_t>;
  { c.id(i) } -> std::convertible_to<const std::string &>;
  { c.n_units(i) } -> std::convertible_to<std::uint32_t>;
};

/// Per-utterance ordered token lists; the state and output of the segmenter.
struct Segmentation {
  std::vector<std::string> ids;
  std::vector<std::uint32_t> lengths;
  std::vector<std::vector<Segment>> tokens;

  std::size_t size() const { return ids.size(); }

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto &t : tokens) n += t.size();
    return n;
  }

  template <SegmentableCorpus C>
  static Segmentation empty_for(const C &corpus) {
    Segmentation s;
    s.ids.reserve(corpus.size());
    s.lengths.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      s.ids.push_back(corpus.id(i));
      s.lengths.push_back(corpus.n_units(i));
    }
    s.tokens.resize(corpus.size());
    return s;
  }

  /// Builds utterance `utt`'s tokens from the ordered end positions of its segments.
  static std::vector<Segment> from_ends(std::uint32_t utt, std::span<const std::uint32_t> ends) {
    std::vector<Segment> out;
    out.reserve(ends.size());
    std::uint32_t prev = 0;
    for (auto e : ends) {
      out.push_back({utt, prev, e});
      prev = e;
    }
    return out;
  }

  /// Tokens of utterance i are contiguous and cover [0, lengths[i]).
  bool utterance_valid(std::size_t i) const {
    std::uint32_t prev = 0;
    for (const auto &s : tokens[i]) {
      if (s.utt != i || s.start != prev || s.end <= s.start) return false;
      prev = s.end;
    }
    return prev == lengths[i];
  }

  bool valid() const {
    if (ids.size() != lengths.size() || ids.size() != tokens.size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (!utterance_valid(i)) return false;
    return true;
  }
};

struct PhoneInterval {
  std::uint32_t start_ms = 0;
  std::uint32_t end_ms = 0;
  std::string label;
};

struct UtteranceAlignment {
  std::vector<std::uint32_t> word_boundaries_ms; // first = 0, last = duration
  std::vector<PhoneInterval> phones;

  std::uint32_t duration_ms() const {
    return word_boundaries_ms.empty() ? 0 : word_boundaries_ms.back();
  }
};

struct GoldAlignment {
  std::vector<std::string> ids;
  std::vector<UtteranceAlignment> utterances;

  const UtteranceAlignment *find(const std::string &id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return &utterances[i];
    return nullptr;
  }
};

struct Violation {
  std::string utterance_id;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

inline ValidationReport validate_corpus(const Corpus &corpus) {
  ValidationReport report;
  std::unordered_set<std::string> seen;
  const std::uint32_t dim = corpus.dim();
  for (const auto &u : corpus.utterances) {
    if (!seen.insert(u.id()).second) report.push_back({u.id(), "duplicate utterance id"});
    if (u.n_blocks() == 0) report.push_back({u.id(), "utterance has no blocks"});
    if (u.dim() == 0) report.push_back({u.id(), "embedding dimension is zero"});
    if (u.dim() != dim)
      report.push_back({u.id(), "dimension " + std::to_string(u.dim()) + " differs from corpus dimension " +
                                    std::to_string(dim)});
    for (float v : u.data()) {
      if (!std::isfinite(v)) {
        report.push_back({u.id(), "non-finite value in frames"});
        break;
      }
    }
  }
  return report;
}

inline ValidationReport validate_corpus(const TextCorpus &corpus) {
  ValidationReport report;
  std::unordered_set<std::string> seen;
  for (const auto &u : corpus.utterances) {
    if (!seen.insert(u.id).second) report.push_back({u.id, "duplicate utterance id"});
    if (u.symbols.empty()) report.push_back({u.id, "utterance has no symbols"});
    for (auto s : u.symbols) {
      if (!corpus.alphabet.empty() && s >= corpus.alphabet.size()) {
        report.push_back({u.id, "symbol id outside alphabet"});
        break;
      }
    }
  }
  return report;
}

/// Ties successive 20ms frames into 40ms blocks; a trailing odd frame is dropped.
inline FrameMatrix pair_frames(std::string utterance_id, std::uint32_t n_frames, std::uint32_t dim,
                               std::span<const float> frames) {
  if (n_frames < 2) throw Error("utterance too short: '" + utterance_id + "' has fewer than 2 frames");
  if (frames.size() != std::size_t(n_frames) * dim)
    throw Error("frame payload size does not match n_frames x dim");
  const std::uint32_t n_blocks = n_frames / 2;
  // Rows 2t and 2t+1 are adjacent in row-major storage, so block t is a contiguous copy.
  std::vector<float> out(frames.begin(), frames.begin() + std::size_t(n_blocks) * 2 * dim);
  return FrameMatrix(std::move(utterance_id), n_blocks, 2 * dim, std::move(out));
}

} // namespace dpparse
