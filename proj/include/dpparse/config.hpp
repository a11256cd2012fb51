#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "dp_score.hpp"
#include "synthgen.hpp"
#include "trainer.hpp"

namespace dpparse {

/// Everything a command needs. Values start at the documented defaults; a config file
/// overrides them and `set()` calls made after loading (command-line flags) override both.
struct RunConfig {
  Mode mode = Mode::continuous;
  std::uint64_t seed = 0;
  std::size_t workers = 0; // 0: all available cores
  TrainerConfig trainer;
  bool normalize = false;
  GenConfig gen;
  std::size_t kmeans_clusters = 0;        // 0: number of distinct gold word types
  std::size_t kmeans_max_points = 20000;  // subsample cap for clustering L0
  std::size_t kmeans_max_iterations = 100;

  /// delta follows the mode (4 for speech, 2 for text) unless given explicitly.
  std::optional<double> delta_override;

  /// Applies one `section.key` assignment. Unknown keys and malformed values throw.
  void set(const std::string &key, const std::string &value) {
    const auto &t = table();
    auto it = t.find(key);
    if (it == t.end()) throw Error("unknown config key '" + key + "'");
    try {
      it->second(*this, value);
    } catch (const Error &e) {
      throw Error("config key '" + key + "': " + e.what());
    }
  }

  /// Reads `section.key = value` lines; `#` starts a comment.
  void load_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path.string() + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos)
        throw Error(path.string() + ":" + std::to_string(lineno) + ": expected 'section.key = value'");
      try {
        set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
      } catch (const Error &e) {
        throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  /// Resolved trainer configuration: mode-dependent delta, seed and workers filled in.
  TrainerConfig resolved_trainer() const {
    TrainerConfig t = trainer;
    t.dp.delta = delta_override ? *delta_override : (mode == Mode::discrete ? 2.0 : 4.0);
    t.backend.seed = seed;
    t.backend.workers = workers ? workers : default_workers();
    return t;
  }

  GenConfig resolved_gen() const {
    GenConfig g = gen;
    g.mode = mode;
    g.seed = seed;
    return g;
  }

  /// Every key with its current value, in `section.key = value` form.
  std::vector<std::string> dump() const {
    std::vector<std::string> out;
    const TrainerConfig t = resolved_trainer();
    auto add = [&](const std::string &k, const std::string &v) { out.push_back(k + " = " + v); };
    add("run.mode", to_string(mode));
    add("run.seed", std::to_string(seed));
    add("run.workers", std::to_string(workers));
    add("trainer.iterations", std::to_string(t.n_iterations));
    add("trainer.beam", std::to_string(t.beam));
    add("trainer.temperature", fmt(t.temperature));
    add("trainer.min_len", std::to_string(t.backend.min_len));
    add("trainer.max_len", std::to_string(t.backend.max_len));
    add("trainer.l0_subsample", std::to_string(t.backend.l0_subsample));
    add("density.k", std::to_string(t.backend.density.k));
    add("density.beta", fmt(t.backend.density.beta));
    add("density.epsilon_f", fmt(t.backend.density.epsilon_f));
    add("density.calibrate", t.backend.calibrate ? "true" : "false");
    add("density.calibration_sample", std::to_string(t.backend.calibration_sample));
    add("density.calibration_target", fmt(t.backend.calibration_target));
    add("dp.alpha0", fmt(t.dp.alpha0));
    add("dp.gamma", fmt(t.dp.gamma));
    add("dp.delta", fmt(t.dp.delta));
    add("dp.epsilon_log", fmt(t.dp.epsilon_log));
    add("dp.penalty_sign", t.dp.penalty_sign == PenaltySign::add ? "add" : "subtract");
    add("embedder.normalize", normalize ? "true" : "false");
    add("gen.vocab_size", std::to_string(gen.vocab_size));
    add("gen.zipf_exponent", fmt(gen.zipf_exponent));
    add("gen.word_len_min", std::to_string(gen.word_len_min));
    add("gen.word_len_max", std::to_string(gen.word_len_max));
    add("gen.dim", std::to_string(gen.dim));
    add("gen.noise_sigma", fmt(gen.noise_sigma));
    add("gen.n_utterances", std::to_string(gen.n_utterances));
    add("gen.words_per_utterance_min", std::to_string(gen.words_per_utterance_min));
    add("gen.words_per_utterance_max", std::to_string(gen.words_per_utterance_max));
    add("gen.alphabet_size", std::to_string(gen.alphabet_size));
    add("kmeans.clusters", std::to_string(kmeans_clusters));
    add("kmeans.max_points", std::to_string(kmeans_max_points));
    add("kmeans.max_iterations", std::to_string(kmeans_max_iterations));
    return out;
  }

private:
  using Setter = std::function<void(RunConfig &, const std::string &)>;

  static std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  }

  template <typename T>
  static T parse_number(const std::string &s) {
    T v{};
    const char *end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || s.empty()) throw Error("cannot parse '" + s + "' as a number");
    return v;
  }

  static bool parse_bool(const std::string &s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw Error("cannot parse '" + s + "' as a boolean");
  }

  static const std::map<std::string, Setter> &table() {
    static const std::map<std::string, Setter> t = [] {
      std::map<std::string, Setter> m;
      auto size = [](std::size_t RunConfig::*f) {
        return [f](RunConfig &c, const std::string &v) { c.*f = parse_number<std::size_t>(v); };
      };
      m["run.mode"] = [](RunConfig &c, const std::string &v) { c.mode = parse_mode(v); };
      m["run.seed"] = [](RunConfig &c, const std::string &v) { c.seed = parse_number<std::uint64_t>(v); };
      m["run.workers"] = size(&RunConfig::workers);

      m["trainer.iterations"] = [](RunConfig &c, const std::string &v) { c.trainer.n_iterations = parse_number<std::size_t>(v); };
      m["trainer.beam"] = [](RunConfig &c, const std::string &v) { c.trainer.beam = parse_number<std::size_t>(v); };
      m["trainer.temperature"] = [](RunConfig &c, const std::string &v) { c.trainer.temperature = parse_number<double>(v); };
      m["trainer.min_len"] = [](RunConfig &c, const std::string &v) { c.trainer.backend.min_len = parse_number<std::uint32_t>(v); };
      m["trainer.max_len"] = [](RunConfig &c, const std::string &v) { c.trainer.backend.max_len = parse_number<std::uint32_t>(v); };
      m["trainer.l0_subsample"] = [](RunConfig &c, const std::string &v) { c.trainer.backend.l0_subsample = parse_number<std::size_t>(v); };

      m["density.k"] = [](RunConfig &c, const std::string &v) { c.trainer.backend.density.k = parse_number<std::size_t>(v); };
      m["density.beta"] = [](RunConfig &c, const std::string &v) { c.trainer.backend.density.beta = parse_number<double>(v); };
      m["density.epsilon_f"] = [](RunConfig &c, const std::string &v) { c.trainer.backend.density.epsilon_f = parse_number<double>(v); };
      m["density.calibrate"] = [](RunConfig &c, const std::string &v) { c.trainer.backend.calibrate = parse_bool(v); };
      m["density.calibration_sample"] = [](RunConfig &c, const std::string &v) { c.trainer.backend.calibration_sample = parse_number<std::size_t>(v); };
      m["density.calibration_target"] = [](RunConfig &c, const std::string &v) { c.trainer.backend.calibration_target = parse_number<double>(v); };

      m["dp.alpha0"] = [](RunConfig &c, const std::string &v) { c.trainer.dp.alpha0 = parse_number<double>(v); };
      m["dp.gamma"] = [](RunConfig &c, const std::string &v) { c.trainer.dp.gamma = parse_number<double>(v); };
      m["dp.delta"] = [](RunConfig &c, const std::string &v) { c.delta_override = parse_number<double>(v); };
      m["dp.epsilon_log"] = [](RunConfig &c, const std::string &v) { c.trainer.dp.epsilon_log = parse_number<double>(v); };
      m["dp.penalty_sign"] = [](RunConfig &c, const std::string &v) {
        if (v == "add") c.trainer.dp.penalty_sign = PenaltySign::add;
        else if (v == "subtract") c.trainer.dp.penalty_sign = PenaltySign::subtract;
        else throw Error("expected 'add' or 'subtract', got '" + v + "'");
      };

      m["embedder.normalize"] = [](RunConfig &c, const std::string &v) { c.normalize = parse_bool(v); };

      m["gen.vocab_size"] = [](RunConfig &c, const std::string &v) { c.gen.vocab_size = parse_number<std::size_t>(v); };
      m["gen.zipf_exponent"] = [](RunConfig &c, const std::string &v) { c.gen.zipf_exponent = parse_number<double>(v); };
      m["gen.word_len_min"] = [](RunConfig &c, const std::string &v) { c.gen.word_len_min = parse_number<std::uint32_t>(v); };
      m["gen.word_len_max"] = [](RunConfig &c, const std::string &v) { c.gen.word_len_max = parse_number<std::uint32_t>(v); };
      m["gen.dim"] = [](RunConfig &c, const std::string &v) { c.gen.dim = parse_number<std::uint32_t>(v); };
      m["gen.noise_sigma"] = [](RunConfig &c, const std::string &v) { c.gen.noise_sigma = parse_number<double>(v); };
      m["gen.n_utterances"] = [](RunConfig &c, const std::string &v) { c.gen.n_utterances = parse_number<std::size_t>(v); };
      m["gen.words_per_utterance_min"] = [](RunConfig &c, const std::string &v) { c.gen.words_per_utterance_min = parse_number<std::uint32_t>(v); };
      m["gen.words_per_utterance_max"] = [](RunConfig &c, const std::string &v) { c.gen.words_per_utterance_max = parse_number<std::uint32_t>(v); };
      m["gen.alphabet_size"] = [](RunConfig &c, const std::string &v) { c.gen.alphabet_size = parse_number<std::size_t>(v); };

      m["kmeans.clusters"] = size(&RunConfig::kmeans_clusters);
      m["kmeans.max_points"] = size(&RunConfig::kmeans_max_points);
      m["kmeans.max_iterations"] = size(&RunConfig::kmeans_max_iterations);
      return m;
    }();
    return t;
  }
};

} // namespace dpparse
