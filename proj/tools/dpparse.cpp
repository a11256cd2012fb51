// dpparse: command-line front end.
//
//   dpparse gen            --out DIR                       synthetic corpus + gold alignment
//   dpparse segment        --input PATH --out SEG [--log]  run the segmenter
//   dpparse baseline       --input PATH --out SEG          boundary every --period-ms
//   dpparse eval           --seg SEG --alignment ALI       token / boundary scores
//   dpparse abx            --triplets FILE                 ABX score of a triplet file
//   dpparse ablate-kmeans  --input PATH --alignment ALI    k-NN vs k-means frequencies
//
// PATH is a manifest of frame files in continuous mode and a text corpus in discrete mode.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dpparse/dpparse.hpp"

namespace {

using namespace dpparse;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags; // key -> value, applied after the file
};

void add_common(CLI::App *cmd, Common &c) {
  cmd->add_option("--config", c.config_path, "config file of 'section.key = value' lines");
  cmd->add_option("--set", c.sets, "override one key, e.g. --set dp.gamma=0")->take_all();
  auto flag = [&](const char *name, const char *key, const char *help) {
    cmd->add_option_function<std::string>(name, [&c, key](const std::string &v) { c.flags[key] = v; }, help);
  };
  flag("--seed", "run.seed", "random seed");
  flag("--workers", "run.workers", "worker threads (default: all cores)");
  flag("--mode", "run.mode", "continuous | discrete");
}

RunConfig resolve(const Common &c) {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg.load_file(c.config_path);
  for (const auto &s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto &[k, v] : c.flags) cfg.set(k, v);
  return cfg;
}

void require_valid(const ValidationReport &r) {
  if (r.empty()) return;
  std::string msg = "invalid corpus:";
  for (const auto &v : r) msg += "\n  " + v.utterance_id + ": " + v.message;
  throw Error(msg);
}

std::ostream &log_sink(std::ofstream &file, const std::string &path) {
  if (path.empty()) return std::cerr;
  file.open(path);
  if (!file) throw Error("cannot open '" + path + "' for writing");
  return file;
}

template <typename Backend>
Segmentation train_with(const typename Backend::CorpusType &corpus, Backend backend, const RunConfig &cfg,
                        std::ostream &log) {
  Trainer<Backend> trainer(corpus, std::move(backend), cfg.resolved_trainer());
  return trainer.train([&](const IterationLog &r) { write_run_log(log, r); });
}

Segmentation segment_input(const std::string &input, const RunConfig &cfg, std::ostream &log) {
  if (cfg.mode == Mode::discrete) {
    const TextCorpus corpus = read_text_corpus(input);
    require_valid(validate_corpus(corpus));
    return train_with(corpus, CountBackend(corpus), cfg, log);
  }
  const Corpus corpus = load_corpus(input);
  require_valid(validate_corpus(corpus));
  return train_with(corpus, KnnBackend(corpus, Embedder(cfg.normalize)), cfg, log);
}

int cmd_gen(const RunConfig &cfg, const std::string &out, std::size_t n_triplets) {
  const SyntheticCorpus syn = generate(cfg.resolved_gen());
  const fs::path dir(out);
  fs::create_directories(dir);
  if (cfg.mode == Mode::continuous) {
    write_corpus(dir, syn.corpus);
  } else {
    write_text_corpus(dir / "corpus.txt", syn.text);
  }
  write_alignment(dir / "alignment.tsv", syn.gold);
  write_lexicon(dir / "lexicon.tsv", syn.lexicon);
  if (n_triplets > 0) {
    if (cfg.mode != Mode::continuous) throw Error("--abx-triplets needs continuous mode");
    write_triplets(dir / "triplets.dppt", word_triplets(syn, n_triplets, cfg.seed));
  }
  std::cout << "wrote " << syn.gold.ids.size() << " utterances to " << dir.string() << '\n';
  return 0;
}

int cmd_ablate(const std::string &input, const std::string &alignment, const RunConfig &cfg, std::ostream &log) {
  const Corpus corpus = load_corpus(input);
  require_valid(validate_corpus(corpus));
  const GoldAlignment gold = read_alignment(alignment);
  const Embedder embedder(cfg.normalize);

  log << "# k-NN frequencies\n";
  const auto knn = train_with(corpus, KnnBackend(corpus, embedder), cfg, log);
  log << "# k-means frequencies\n";
  const auto km = train_with(
      corpus,
      KMeansBackend(corpus,
                    cfg.kmeans_clusters ? KMeansBackend::ClusterOracle([n = cfg.kmeans_clusters](auto) { return n; })
                                        : KMeansBackend::ClusterOracle(label_type_oracle(corpus, gold)),
                    embedder, cfg.kmeans_max_points, cfg.kmeans_max_iterations),
      cfg, log);
  const auto rk = token_boundary_f1(knn, gold);
  const auto rm = token_boundary_f1(km, gold);
  std::cout << "backend\ttoken_f1\tboundary_f1\n";
  std::cout << "knn\t" << rk.token_f1 << '\t' << rk.boundary_f1 << '\n';
  std::cout << "kmeans\t" << rm.token_f1 << '\t' << rm.boundary_f1 << '\n';
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"DP-Parse word segmentation for embedding sequences and phonemized text"};
  app.require_subcommand(1);

  Common common;
  std::string input, out, seg_path, alignment, triplets, log_path;
  std::uint32_t period_ms = 120;
  std::size_t n_triplets = 0;
  bool print_config = false;

  auto *gen = app.add_subcommand("gen", "generate a synthetic corpus with gold alignment");
  add_common(gen, common);
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--abx-triplets", n_triplets, "also write this many same/different-word ABX triplets");

  auto *segment = app.add_subcommand("segment", "segment a corpus");
  add_common(segment, common);
  segment->add_option("--input", input, "manifest (continuous) or text corpus (discrete)")->required();
  segment->add_option("--out", out, "segmentation output file")->required();
  segment->add_option("--log", log_path, "per-iteration run log (default: stderr)");
  segment->add_flag("--print-config", print_config, "print the resolved configuration first");

  auto *baseline = app.add_subcommand("baseline", "content-blind fixed-rate segmentation");
  add_common(baseline, common);
  baseline->add_option("--input", input, "manifest (continuous) or text corpus (discrete)")->required();
  baseline->add_option("--out", out, "segmentation output file")->required();
  baseline->add_option("--period-ms", period_ms, "boundary period, a multiple of 40ms")->capture_default_str();

  auto *eval = app.add_subcommand("eval", "score a segmentation against a gold alignment");
  add_common(eval, common);
  eval->add_option("--seg", seg_path, "segmentation file")->required();
  eval->add_option("--alignment", alignment, "gold alignment file")->required();
  eval->add_option("--out", out, "report file (default: stdout)");

  auto *abx = app.add_subcommand("abx", "ABX discrimination score of a triplet file");
  add_common(abx, common);
  abx->add_option("--triplets", triplets, "triplet file")->required();

  auto *ablate = app.add_subcommand("ablate-kmeans", "compare k-NN and k-means frequency estimates");
  add_common(ablate, common);
  ablate->add_option("--input", input, "manifest of frame files")->required();
  ablate->add_option("--alignment", alignment, "gold alignment (cluster counts and scoring)")->required();
  ablate->add_option("--log", log_path, "per-iteration run log (default: stderr)");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = resolve(common);
    std::ofstream log_file;

    if (gen->parsed()) return cmd_gen(cfg, out, n_triplets);

    if (segment->parsed()) {
      if (print_config)
        for (const auto &line : cfg.dump()) std::cerr << line << '\n';
      auto &log = log_sink(log_file, log_path);
      const Segmentation seg = segment_input(input, cfg, log);
      write_segmentation(fs::path(out), seg);
      return 0;
    }

    if (baseline->parsed()) {
      if (period_ms == 0 || period_ms % kBlockMs != 0) throw Error("--period-ms must be a positive multiple of 40");
      const std::uint32_t period = period_ms / kBlockMs;
      const Segmentation seg = cfg.mode == Mode::discrete ? fixed_rate_segmenter(read_text_corpus(input), period)
                                                          : fixed_rate_segmenter(load_corpus(input), period);
      write_segmentation(fs::path(out), seg);
      return 0;
    }

    if (eval->parsed()) {
      const EvalReport r = token_boundary_f1(read_segmentation(seg_path), read_alignment(alignment));
      if (out.empty()) {
        write_eval_report(std::cout, r);
      } else {
        std::ofstream f(out);
        if (!f) throw Error("cannot open '" + out + "' for writing");
        write_eval_report(f, r);
      }
      return 0;
    }

    if (abx->parsed()) {
      const auto ts = read_triplets(triplets);
      std::cout << "abx\t" << abx_score(ts) << "\ntriplets\t" << ts.size() << '\n';
      return 0;
    }

    if (ablate->parsed()) {
      if (cfg.mode != Mode::continuous) throw Error("ablate-kmeans needs continuous mode");
      return cmd_ablate(input, alignment, cfg, log_sink(log_file, log_path));
    }
  } catch (const std::exception &e) {
    std::cerr << "dpparse: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
