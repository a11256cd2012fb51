#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "metrics.hpp"
#include "synthgen.hpp"
#include "trainer.hpp"

namespace dpparse {

namespace fs = std::filesystem;

inline constexpr std::uint32_t kFrameFormatVersion = 1;
inline constexpr std::uint32_t kTripletFormatVersion = 1;

namespace detail {

inline void put_u32(std::ostream &os, std::uint32_t v) {
  const std::array<char, 4> b{char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

inline std::uint32_t get_u32(std::istream &is, const std::string &what) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char *>(b.data()), 4)) throw Error(what + ": truncated header");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline void put_f32(std::ostream &os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

inline void read_f32_payload(std::istream &is, std::vector<float> &out, std::size_t n, const std::string &what) {
  out.resize(n);
  std::vector<unsigned char> raw(n * 4);
  if (n && !is.read(reinterpret_cast<char *>(raw.data()), std::streamsize(raw.size())))
    throw Error(what + ": truncated payload");
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char *b = raw.data() + 4 * i;
    const std::uint32_t bits =
        std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
    out[i] = std::bit_cast<float>(bits);
  }
}

inline void expect_magic(std::istream &is, const char (&magic)[5], const std::string &what) {
  char got[4] = {};
  if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0)
    throw Error(what + ": bad magic (expected \"" + std::string(magic, 4) + "\")");
}

inline std::ifstream open_in(const fs::path &p, bool binary = false) {
  std::ifstream in(p, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("cannot open '" + p.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const fs::path &p, bool binary = false) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw Error("cannot open '" + p.string() + "' for writing");
  return out;
}

inline std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::uint32_t parse_u32(const std::string &s, const std::string &where) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos);
  } catch (const std::exception &) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s.front() == '-' || v > 0xffffffffUL)
    throw Error(where + ": expected a non-negative integer, got '" + s + "'");
  return static_cast<std::uint32_t>(v);
}

inline void strip_cr(std::string &line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

} // namespace detail

// ---- frame matrices ---------------------------------------------------------

inline void write_frame_file(const fs::path &path, const FrameMatrix &m) {
  auto out = detail::open_out(path, true);
  out.write("DPPF", 4);
  detail::put_u32(out, kFrameFormatVersion);
  detail::put_u32(out, m.n_blocks());
  detail::put_u32(out, m.dim());
  for (float v : m.data()) detail::put_f32(out, v);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline FrameMatrix read_frame_file(const fs::path &path, std::string utterance_id) {
  const std::string what = "frame file '" + path.string() + "'";
  auto in = detail::open_in(path, true);
  detail::expect_magic(in, "DPPF", what);
  const auto version = detail::get_u32(in, what);
  if (version != kFrameFormatVersion) throw Error(what + ": unsupported version " + std::to_string(version));
  const auto n_blocks = detail::get_u32(in, what);
  const auto dim = detail::get_u32(in, what);
  std::vector<float> data;
  detail::read_f32_payload(in, data, std::size_t(n_blocks) * dim, what);
  if (in.peek() != std::char_traits<char>::eof()) throw Error(what + ": trailing bytes after payload");
  return FrameMatrix(std::move(utterance_id), n_blocks, dim, std::move(data));
}

struct ManifestEntry {
  std::string id;
  fs::path path; // as written in the manifest
};

inline std::vector<ManifestEntry> read_manifest(const fs::path &path) {
  auto in = detail::open_in(path);
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto f = detail::split(line, '\t');
    if (f.size() != 2 || f[0].empty() || f[1].empty())
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected '<utterance_id>\\t<path>'");
    out.push_back({f[0], f[1]});
  }
  return out;
}

/// Loads every frame file of a manifest; relative paths resolve against the manifest's directory.
inline Corpus load_corpus(const fs::path &manifest) {
  Corpus c;
  const fs::path dir = manifest.parent_path();
  for (const auto &e : read_manifest(manifest))
    c.utterances.push_back(read_frame_file(e.path.is_absolute() ? e.path : dir / e.path, e.id));
  return c;
}

/// Writes one frame file per utterance under `dir/frames/` plus `dir/manifest.tsv`.
inline fs::path write_corpus(const fs::path &dir, const Corpus &c) {
  fs::create_directories(dir / "frames");
  const fs::path manifest = dir / "manifest.tsv";
  auto out = detail::open_out(manifest);
  for (const auto &u : c.utterances) {
    const fs::path rel = fs::path("frames") / (u.id() + ".dppf");
    write_frame_file(dir / rel, u);
    out << u.id() << '\t' << rel.generic_string() << '\n';
  }
  return manifest;
}

// ---- text corpora -------------------------------------------------------------

/// One utterance per line, symbols separated by spaces, optionally prefixed by
/// `<utterance_id>\t`. Unprefixed lines are named by their line index. Symbol ids
/// follow first appearance unless an alphabet is supplied.
inline TextCorpus read_text_corpus(const fs::path &path, std::vector<std::string> alphabet = {}) {
  auto in = detail::open_in(path);
  TextCorpus c;
  std::unordered_map<std::string, std::uint32_t> ids;
  const bool fixed = !alphabet.empty();
  for (std::size_t i = 0; i < alphabet.size(); ++i) ids.emplace(alphabet[i], std::uint32_t(i));
  c.alphabet = std::move(alphabet);
  std::string line;
  std::size_t lineno = 0, index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    TextUtterance u;
    std::string body = line;
    if (const auto tab = line.find('\t'); tab != std::string::npos) {
      u.id = line.substr(0, tab);
      body = line.substr(tab + 1);
    } else {
      u.id = utterance_name(index);
    }
    std::istringstream ss(body);
    std::string sym;
    while (ss >> sym) {
      auto it = ids.find(sym);
      if (it == ids.end()) {
        if (fixed) throw Error(path.string() + ":" + std::to_string(lineno) + ": symbol '" + sym + "' not in alphabet");
        it = ids.emplace(sym, std::uint32_t(c.alphabet.size())).first;
        c.alphabet.push_back(sym);
      }
      u.symbols.push_back(it->second);
    }
    c.utterances.push_back(std::move(u));
    ++index;
  }
  return c;
}

inline void write_text_corpus(const fs::path &path, const TextCorpus &c) {
  auto out = detail::open_out(path);
  for (const auto &u : c.utterances) {
    out << u.id << '\t';
    for (std::size_t i = 0; i < u.symbols.size(); ++i) out << (i ? " " : "") << c.alphabet.at(u.symbols[i]);
    out << '\n';
  }
}

// ---- alignments ---------------------------------------------------------------

inline GoldAlignment read_alignment(const fs::path &path) {
  auto in = detail::open_in(path);
  struct Raw {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> words;
    std::vector<PhoneInterval> phones;
  };
  std::vector<std::string> order;
  std::map<std::string, Raw> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto f = detail::split(line, '\t');
    if (f.size() < 4) throw Error(where + ": too few fields");
    auto [it, fresh] = raw.try_emplace(f[0]);
    if (fresh) order.push_back(f[0]);
    const auto s = detail::parse_u32(f[2], where), e = detail::parse_u32(f[3], where);
    if (e <= s) throw Error(where + ": interval end must exceed start");
    if (f[1] == "WORD" && f.size() == 4) {
      it->second.words.emplace_back(s, e);
    } else if (f[1] == "PHONE" && (f.size() == 4 || f.size() == 5)) {
      it->second.phones.push_back({s, e, f.size() == 5 ? f[4] : std::string()});
    } else {
      throw Error(where + ": expected WORD with 4 fields or PHONE with 4-5 fields");
    }
  }

  GoldAlignment g;
  for (const auto &id : order) {
    auto &r = raw[id];
    std::sort(r.words.begin(), r.words.end());
    std::sort(r.phones.begin(), r.phones.end(),
              [](const PhoneInterval &a, const PhoneInterval &b) { return a.start_ms < b.start_ms; });
    UtteranceAlignment a;
    if (!r.words.empty()) {
      if (r.words.front().first != 0) throw Error("alignment for '" + id + "': first word must start at 0ms");
      a.word_boundaries_ms.push_back(0);
      for (std::size_t i = 0; i < r.words.size(); ++i) {
        if (i && r.words[i].first != r.words[i - 1].second)
          throw Error("alignment for '" + id + "': word intervals must be contiguous");
        a.word_boundaries_ms.push_back(r.words[i].second);
      }
    }
    for (std::size_t i = 1; i < r.phones.size(); ++i)
      if (r.phones[i].start_ms < r.phones[i - 1].end_ms)
        throw Error("alignment for '" + id + "': phone intervals overlap");
    a.phones = std::move(r.phones);
    g.ids.push_back(id);
    g.utterances.push_back(std::move(a));
  }
  return g;
}

inline void write_alignment(const fs::path &path, const GoldAlignment &g) {
  auto out = detail::open_out(path);
  for (std::size_t u = 0; u < g.ids.size(); ++u) {
    const auto &a = g.utterances[u];
    for (std::size_t i = 0; i + 1 < a.word_boundaries_ms.size(); ++i)
      out << g.ids[u] << "\tWORD\t" << a.word_boundaries_ms[i] << '\t' << a.word_boundaries_ms[i + 1] << '\n';
    for (const auto &p : a.phones) {
      out << g.ids[u] << "\tPHONE\t" << p.start_ms << '\t' << p.end_ms;
      if (!p.label.empty()) out << '\t' << p.label;
      out << '\n';
    }
  }
}

// ---- segmentations and logs ------------------------------------------------------

inline void write_segmentation(std::ostream &out, const Segmentation &seg) {
  for (std::size_t u = 0; u < seg.size(); ++u)
    for (const auto &s : seg.tokens[u])
      out << seg.ids[u] << '\t' << block_to_ms(s.start) << '\t' << block_to_ms(s.end) << '\n';
}

inline void write_segmentation(const fs::path &path, const Segmentation &seg) {
  auto out = detail::open_out(path);
  write_segmentation(out, seg);
}

/// Reads `<id>\t<start_ms>\t<end_ms>` lines into per-utterance boundary lists (both
/// utterance edges included). Tokens of one utterance must be contiguous.
inline TimedSegmentation read_segmentation(const fs::path &path) {
  auto in = detail::open_in(path);
  TimedSegmentation t;
  std::unordered_map<std::string, std::size_t> where;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const std::string loc = path.string() + ":" + std::to_string(lineno);
    const auto f = detail::split(line, '\t');
    if (f.size() != 3) throw Error(loc + ": expected '<utterance_id>\\t<start_ms>\\t<end_ms>'");
    const auto s = detail::parse_u32(f[1], loc), e = detail::parse_u32(f[2], loc);
    if (e <= s) throw Error(loc + ": token end must exceed start");
    auto [it, fresh] = where.try_emplace(f[0], t.ids.size());
    if (fresh) {
      t.ids.push_back(f[0]);
      t.boundaries_ms.push_back({s});
    }
    auto &b = t.boundaries_ms[it->second];
    if (b.back() != s) throw Error(loc + ": token does not start where the previous one ended");
    b.push_back(e);
  }
  return t;
}

inline void write_run_log(std::ostream &out, const IterationLog &r) {
  out << "iteration " << r.iteration << "\ttokens " << r.n_tokens << "\tmean_token_ms " << r.mean_token_ms
      << "\twall_s " << r.wall_seconds << '\n';
}

// ---- evaluation report ------------------------------------------------------------

inline void write_eval_report(std::ostream &out, const EvalReport &r) {
  const std::pair<const char *, double> rows[] = {
      {"token_precision", r.token_precision},       {"token_recall", r.token_recall},
      {"token_f1", r.token_f1},                     {"boundary_precision", r.boundary_precision},
      {"boundary_recall", r.boundary_recall},       {"boundary_f1", r.boundary_f1},
  };
  for (const auto &[k, v] : rows) out << k << '\t' << v << '\n';
  out << "gold_tokens\t" << r.gold_tokens << "\nhyp_tokens\t" << r.hyp_tokens << "\nmatched_tokens\t"
      << r.matched_tokens << '\n';
  out << "gold_boundaries\t" << r.gold_boundaries << "\nhyp_boundaries\t" << r.hyp_boundaries
      << "\nmatched_boundaries\t" << r.matched_boundaries << '\n';
  const nlohmann::json summary = {
      {"token_precision", r.token_precision},       {"token_recall", r.token_recall},
      {"token_f1", r.token_f1},                     {"boundary_precision", r.boundary_precision},
      {"boundary_recall", r.boundary_recall},       {"boundary_f1", r.boundary_f1},
  };
  out << summary.dump() << '\n';
}

// ---- ABX triplets -------------------------------------------------------------------

inline void write_triplets(const fs::path &path, const std::vector<Triplet> &ts) {
  auto out = detail::open_out(path, true);
  const std::uint32_t dim = ts.empty() ? 0 : std::uint32_t(ts.front().a.size());
  out.write("DPPT", 4);
  detail::put_u32(out, kTripletFormatVersion);
  detail::put_u32(out, std::uint32_t(ts.size()));
  detail::put_u32(out, dim);
  for (const auto &t : ts)
    for (const auto *v : {&t.a, &t.b, &t.x}) {
      if (v->size() != dim) throw Error("triplet file: mixed dimensions");
      for (double x : *v) detail::put_f32(out, static_cast<float>(x));
    }
}

inline std::vector<Triplet> read_triplets(const fs::path &path) {
  const std::string what = "triplet file '" + path.string() + "'";
  auto in = detail::open_in(path, true);
  detail::expect_magic(in, "DPPT", what);
  const auto version = detail::get_u32(in, what);
  if (version != kTripletFormatVersion) throw Error(what + ": unsupported version " + std::to_string(version));
  const auto n = detail::get_u32(in, what);
  const auto dim = detail::get_u32(in, what);
  std::vector<float> flat;
  detail::read_f32_payload(in, flat, std::size_t(n) * 3 * dim, what);
  std::vector<Triplet> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float *p = flat.data() + i * 3 * dim;
    out[i].a.assign(p, p + dim);
    out[i].b.assign(p + dim, p + 2 * dim);
    out[i].x.assign(p + 2 * dim, p + 3 * dim);
  }
  return out;
}

// ---- synthetic lexicon description ----------------------------------------------------

inline void write_lexicon(const fs::path &path, const std::vector<LexiconEntry> &lex) {
  auto out = detail::open_out(path);
  out << "word_id\tlength\tfrequency_rank\n";
  for (const auto &e : lex) out << e.word_id << '\t' << e.length << '\t' << e.frequency_rank << '\n';
}

} // namespace dpparse
