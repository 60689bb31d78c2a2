#pragma once

// Command implementations behind the `ham` executable. Kept in a header so
// tests can drive the CLI in-process through run().

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ham/ham.hpp"

namespace ham::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumeric = 3, kIo = 4 };

/// Thrown for invalid flag combinations detected after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------- files

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::string file_checksum(const std::filesystem::path& path) {
  return hex64(fnv1a64(read_file(path)));
}

inline std::vector<Problem> load_problems(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  try {
    return read_problems(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

inline std::string problems_jsonl(const std::vector<Problem>& problems) {
  std::ostringstream out;
  write_problems(out, problems);
  return out.str();
}

// ------------------------------------------------------------- options

struct GenOptions {
  std::string task = "locate";
  std::size_t n = 200;
  std::size_t k = 4;
  std::size_t answers = 1;
  std::uint64_t seed = 1;
  std::string out;
  std::size_t vocab = SynthConfig{}.vocabulary_size;
  std::optional<std::size_t> distractors;  // default: k - answers
  std::size_t story_length = 0;
  std::size_t min_length = SynthConfig{}.min_sentence_length;
  std::size_t max_length = SynthConfig{}.max_sentence_length;
  std::string trees = "chain";
  double dropout = 0.0;
  std::vector<double> split{0.8, 0.1, 0.1};
};

struct ModelOptions {
  int hops = 2;
  std::string level = "sentence";
  std::size_t dim = 75;
  std::optional<std::size_t> emb_dim;  // default: dim
  bool per_hop_memory = false;
  bool untied = false;
  bool freeze_embeddings = false;
  double init_scale = 0.05;
  double lr = 0.002;
  int epochs = 100;
  std::uint64_t seed = 1;
  int patience = 25;
  std::size_t batch_size = 1;
  std::size_t threads = 1;
  double clip = 0.0;
  std::string vectors;

  TrainConfig train_config(bool use_memory) const {
    TrainConfig c;
    c.model.embedding_dim = emb_dim.value_or(dim);
    c.model.hidden_dim = dim;
    c.model.memory_dim = dim;
    c.model.hops = hops;
    c.model.level = parse_attention_level(level);
    c.model.use_memory = use_memory;
    c.model.tie_encoders = !untied;
    c.model.per_hop_memory = per_hop_memory;
    c.model.train_embeddings = !freeze_embeddings;
    c.model.init_scale = init_scale;
    c.learning_rate = lr;
    c.epochs = epochs;
    c.seed = seed;
    c.patience = patience;
    c.batch_size = batch_size;
    c.threads = threads;
    c.clip_norm = clip;
    return c;
  }
};

struct TrainOptions {
  ModelOptions model;
  std::string train = "data/train.jsonl";
  std::string dev = "data/dev.jsonl";
  std::string out = "run";
  int runs = 1;
  bool quiet = false;
};

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string predictions;
};

struct AttnOptions {
  std::string checkpoint;
  std::string data;
  std::string id;
  std::size_t k = 3;
};

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::size_t dim = 4;
  int hops = 2;
  std::string level = "phrase";
  std::string task = "locate";
  std::string trees = "random";
  std::size_t story_length = 0;  // 0: minimal
  std::size_t max_length = 3;
  double tolerance = 1e-5;
  double step = 1e-5;
  double init_scale = 0.5;
  bool verbose = false;
};

struct BaselineOptions {
  std::string name;
  std::string data;
  std::size_t window = 5;
  std::string vectors;
  std::size_t dim = 50;
  std::uint64_t seed = 1;
  std::string predictions;
  // Baseline f trains an attention-free model first.
  TrainOptions train;
};

// ------------------------------------------------------------ commands

class Context {
 public:
  Context(std::filesystem::path workdir, std::ostream& out, std::ostream& err)
      : workdir_(std::move(workdir)), out_(out), err_(err) {}

  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : workdir_ / path;
  }
  std::ostream& out() const { return out_; }
  std::ostream& err() const { return err_; }

 private:
  std::filesystem::path workdir_;
  std::ostream& out_;
  std::ostream& err_;
};

inline SynthConfig synth_config(const GenOptions& o) {
  SynthConfig c;
  c.seed = o.seed;
  c.problems = o.n;
  c.task = parse_task_kind(o.task);
  c.vocabulary_size = o.vocab;
  c.story_length = o.story_length;
  c.min_sentence_length = o.min_length;
  c.max_sentence_length = o.max_length;
  c.choices = o.k;
  c.answers = o.answers;
  if (o.answers >= o.k) throw UsageError("--answers must be smaller than --k");
  c.distractors = o.distractors.value_or(o.k - o.answers);
  c.trees = parse_tree_shape(o.trees);
  c.token_dropout = o.dropout;
  return c;
}

/// Writes train/dev/test JSONL plus a meta.json sidecar with the generator
/// configuration and per-problem ground truth.
inline int cmd_gen(const Context& ctx, const GenOptions& o) {
  if (o.split.size() != 3) throw UsageError("--split takes three ratios");
  const SynthConfig config = synth_config(o);
  auto data = generate(config);
  std::vector<std::size_t> order(data.problems.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto parts = split(order, o.split[0], o.split[1], o.split[2], o.seed);

  const auto dir = ctx.resolve(o.out);
  nlohmann::ordered_json side;
  side["generator"] = config.to_json();
  side["split"] = o.split;
  nlohmann::ordered_json files;
  auto meta = nlohmann::ordered_json::array();
  const std::pair<const char*, const std::vector<std::size_t>*> named[] = {
      {"train", &parts.train}, {"dev", &parts.dev}, {"test", &parts.test}};
  for (const auto& [name, idx] : named) {
    std::vector<Problem> subset;
    for (auto i : *idx) {
      subset.push_back(data.problems[i]);
      auto m = nlohmann::ordered_json::parse(meta_to_json(data.meta[i]));
      m["split"] = name;
      meta.push_back(std::move(m));
    }
    const auto text = problems_jsonl(subset);
    const auto file = std::string(name) + ".jsonl";
    write_file(dir / file, text);
    files[name] = {{"path", file}, {"problems", subset.size()}, {"fnv1a64", hex64(fnv1a64(text))}};
  }
  side["files"] = std::move(files);
  side["problems"] = std::move(meta);
  write_file(dir / "meta.json", side.dump(2) + "\n");
  ctx.out() << "wrote " << parts.train.size() << "/" << parts.dev.size() << "/"
            << parts.test.size() << " problems to " << dir.string() << "\n";
  return kOk;
}

struct TrainOutcome {
  TrainResult result;
  std::string metrics_checksum;
};

/// One training run into `dir`: manifest first, then checkpoint and metrics.
inline TrainOutcome train_into(const Context& ctx, const TrainOptions& o, const TrainConfig& config,
                               const std::filesystem::path& dir, bool use_memory) {
  config.validate();
  const auto train_path = ctx.resolve(o.train);
  const auto dev_path = ctx.resolve(o.dev);
  const auto train_set = load_problems(train_path);
  const auto dev_set = load_problems(dev_path);
  if (train_set.empty()) throw DomainError(train_path.string() + " holds no problems");
  if (dev_set.empty()) throw DomainError(dev_path.string() + " holds no problems");

  std::optional<PretrainedVectors> pretrained;
  if (!o.model.vectors.empty()) pretrained = load_pretrained_vectors(ctx.resolve(o.model.vectors).string());
  const auto vocab = Vocabulary::from_problems(train_set);

  nlohmann::ordered_json manifest;
  manifest["command"] = use_memory ? "train" : "baseline f";
  manifest["version"] = kVersion;
  manifest["checkpoint_version"] = kCheckpointVersion;
  manifest["seed"] = config.seed;
  manifest["config"] = config.to_json();
  manifest["data"] = {
      {"train", {{"path", train_path.string()}, {"problems", train_set.size()}, {"fnv1a64", file_checksum(train_path)}}},
      {"dev", {{"path", dev_path.string()}, {"problems", dev_set.size()}, {"fnv1a64", file_checksum(dev_path)}}}};
  if (pretrained) {
    manifest["data"]["vectors"] = {{"path", ctx.resolve(o.model.vectors).string()},
                                   {"fnv1a64", file_checksum(ctx.resolve(o.model.vectors))}};
  }
  manifest["vocabulary_size"] = vocab.size();
  manifest["outputs"] = {{"checkpoint", "checkpoint.json"}, {"metrics", "metrics.csv"}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  auto model = HamModel::create(config.model, vocab, config.seed, pretrained ? &*pretrained : nullptr);
  auto progress = [&](const EpochMetrics& m) {
    if (o.quiet) return;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "epoch %d loss %.6f dev %.4f\n", m.epoch, m.train_loss, m.dev_accuracy);
    ctx.err() << buf;
  };
  TrainOutcome outcome{train(std::move(model), config, train_set, dev_set, progress), {}};

  const auto csv = metrics_csv(outcome.result.metrics);
  write_file(dir / "metrics.csv", csv);
  outcome.metrics_checksum = hex64(fnv1a64(csv));
  write_file(dir / "checkpoint.json", checkpoint_json(outcome.result.model, config.seed).dump() + "\n");
  return outcome;
}

inline int cmd_train(const Context& ctx, const TrainOptions& o) {
  if (o.runs < 1) throw UsageError("--runs must be at least 1");
  const auto base = ctx.resolve(o.out);
  std::vector<double> best;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (int r = 0; r < o.runs; ++r) {
    TrainConfig config = o.model.train_config(true);
    config.seed = o.model.seed + static_cast<std::uint64_t>(r);
    const auto dir = o.runs == 1 ? base : base / ("run" + std::to_string(r + 1));
    const auto outcome = train_into(ctx, o, config, dir, true);
    best.push_back(outcome.result.best_dev_accuracy);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "seed %llu: best epoch %d, dev accuracy %.4f, metrics %s\n",
                  static_cast<unsigned long long>(config.seed), outcome.result.best_epoch,
                  outcome.result.best_dev_accuracy, outcome.metrics_checksum.c_str());
    ctx.out() << buf;
    runs.push_back({{"seed", config.seed},
                    {"dir", dir.string()},
                    {"best_epoch", outcome.result.best_epoch},
                    {"best_dev_accuracy", outcome.result.best_dev_accuracy}});
  }
  if (o.runs > 1) {
    const auto s = summarize(best);
    nlohmann::ordered_json summary;
    summary["runs"] = std::move(runs);
    summary["mean_dev_accuracy"] = s.mean;
    summary["stddev_dev_accuracy"] = s.stddev;
    write_file(base / "summary.json", summary.dump(2) + "\n");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "dev accuracy over %d runs: %.4f +/- %.4f\n", o.runs, s.mean, s.stddev);
    ctx.out() << buf;
  }
  return kOk;
}

inline void print_accuracy(const Context& ctx, const std::string& label, const EvalReport& r) {
  const auto hits = std::count_if(r.records.begin(), r.records.end(), [](auto& x) { return x.correct; });
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s accuracy %.4f (%zu/%zu)\n", label.c_str(), r.accuracy,
                static_cast<std::size_t>(hits), r.records.size());
  ctx.out() << buf;
}

inline void write_predictions(const Context& ctx, const std::string& path, const EvalReport& r,
                              const std::string& model) {
  if (path.empty()) return;
  std::string text;
  for (const auto& rec : r.records) text += record_to_json(rec, model) + "\n";
  write_file(ctx.resolve(path), text);
}

inline int cmd_eval(const Context& ctx, const EvalOptions& o) {
  const auto ckpt = load_checkpoint(ctx.resolve(o.checkpoint).string());
  const auto data = load_problems(ctx.resolve(o.data));
  const auto report = evaluate(ckpt.predictor(), data);
  print_accuracy(ctx, ckpt.kind, report);
  write_predictions(ctx, o.predictions, report, ckpt.kind);
  return kOk;
}

/// The sentence with the attended subtree underlined ('~') and its head
/// marked ('^').
inline std::string render_span(const DepTree& tree, const Provenance& where) {
  std::string words, marks;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    if (i) {
      words += ' ';
      marks += ' ';
    }
    const auto& w = tree.surface()[i];
    words += w;
    const bool inside = std::binary_search(where.positions.begin(), where.positions.end(), i);
    const char m = i == where.node ? '^' : (inside ? '~' : ' ');
    marks += std::string(w.size(), m);
  }
  while (!marks.empty() && marks.back() == ' ') marks.pop_back();
  return words + "\n" + marks;
}

inline std::string render_attention(const Problem& p, const AttentionTrace& trace, std::size_t k) {
  std::ostringstream out;
  const auto top = top_k_attention(trace, k);
  for (std::size_t h = 0; h < top.size(); ++h) {
    out << "hop " << h + 1 << "\n";
    for (const auto& hit : top[h]) {
      char head[64];
      std::snprintf(head, sizeof(head), "  %.4f  sentence %zu\n", hit.weight, hit.where.sentence);
      out << head;
      std::istringstream lines(render_span(p.story[hit.where.sentence], hit.where));
      for (std::string line; std::getline(lines, line);) out << "    " << line << "\n";
    }
  }
  return out.str();
}

inline int cmd_attn(const Context& ctx, const AttnOptions& o) {
  if (o.k < 1) throw UsageError("--k must be at least 1");
  const auto ckpt = load_checkpoint(ctx.resolve(o.checkpoint).string());
  if (ckpt.kind != "ham") throw UsageError("attn needs a model checkpoint, not " + ckpt.kind);
  const auto data = load_problems(ctx.resolve(o.data));
  auto it = std::find_if(data.begin(), data.end(), [&](const Problem& p) { return p.id == o.id; });
  if (it == data.end()) throw UsageError("no problem with id '" + o.id + "'");
  const auto trace = ckpt.model->attention(*it);
  auto j = attention_to_json(trace, o.k);
  nlohmann::ordered_json doc;
  doc["id"] = it->id;
  doc["level"] = j["level"];
  doc["hops"] = j["hops"];
  ctx.out() << doc.dump(2) << "\n" << render_attention(*it, trace, o.k);
  return kOk;
}

/// A small random model and problem; kept tiny so every parameter entry can
/// be perturbed.
inline std::pair<HamModel, Problem> gradcheck_setup(const GradcheckOptions& o) {
  SynthConfig sc;
  sc.seed = o.seed;
  sc.problems = 1;
  sc.task = parse_task_kind(o.task);
  sc.vocabulary_size = 12;
  sc.choices = 2;
  sc.distractors = 1;
  sc.min_sentence_length = 2;
  sc.max_sentence_length = o.max_length;
  sc.story_length = o.story_length;
  sc.trees = parse_tree_shape(o.trees);
  auto data = generate(sc);
  ModelConfig mc;
  mc.embedding_dim = mc.hidden_dim = mc.memory_dim = o.dim;
  mc.hops = o.hops;
  mc.level = parse_attention_level(o.level);
  mc.init_scale = o.init_scale;
  auto vocab = Vocabulary::from_problems(data.problems);
  return {HamModel::create(mc, vocab, o.seed), data.problems[0]};
}

inline int cmd_gradcheck(const Context& ctx, const GradcheckOptions& o) {
  if (o.tolerance < 0.0) throw UsageError("--tolerance must be non-negative");
  auto [model, problem] = gradcheck_setup(o);
  const auto report = grad_check(model, problem, o.tolerance, o.step);
  char buf[160];
  if (o.verbose) {
    for (const auto& p : report.params) {
      std::snprintf(buf, sizeof(buf), "  %-24s %6zu entries  max rel. err %.3e  flagged %zu\n",
                    p.name.c_str(), p.entries, p.max_relative_error, p.flagged);
      ctx.out() << buf;
    }
  }
  std::snprintf(buf, sizeof(buf), "%s max relative error %.3e (tolerance %.1e, %zu flagged)\n",
                report.passed() ? "PASS" : "FAIL", report.max_relative_error, o.tolerance,
                report.flagged);
  ctx.out() << buf;
  return report.passed() ? kOk : kNumeric;
}

/// Word-vector table for baselines (a) and (b): the pretrained file when
/// given (its words only, plus a random <unk> row), else seeded random
/// vectors over the dataset vocabulary.
inline EmbeddingTable baseline_table(const Context& ctx, const BaselineOptions& o,
                                     const std::vector<Problem>& data) {
  std::mt19937_64 rng(o.seed);
  if (!o.vectors.empty()) {
    const auto pv = load_pretrained_vectors(ctx.resolve(o.vectors).string());
    return make_embedding_table(Vocabulary::from_words(pv.words), pv.dim, rng, 0.05, &pv);
  }
  return make_embedding_table(Vocabulary::from_problems(data), o.dim, rng, 1.0);
}

inline std::string canonical_baseline(const std::string& name) {
  if (name == "a" || name == "question-choice") return "a";
  if (name == "b" || name == "sliding-window") return "b";
  if (name == "f" || name == "treelstm-sum") return "f";
  throw UsageError("unknown baseline '" + name + "' (expected a, b or f)");
}

inline int cmd_baseline(const Context& ctx, const BaselineOptions& o) {
  const auto name = canonical_baseline(o.name);
  if (o.window < 1) throw UsageError("--window must be at least 1");
  const auto data = load_problems(ctx.resolve(o.data));
  EvalReport report;
  if (name == "f") {
    const TrainConfig config = o.train.model.train_config(false);
    const auto outcome = train_into(ctx, o.train, config, ctx.resolve(o.train.out), false);
    report = evaluate(outcome.result.model.predictor(), data);
  } else {
    const auto table = baseline_table(ctx, o, data);
    Predictor predict = [&](const Problem& p) {
      Prediction pred;
      pred.selected = name == "a" ? baseline_question_choice(p, table)
                                  : baseline_sliding_window(p, table, o.window);
      return pred;
    };
    report = evaluate(predict, data);
  }
  const std::string label = "baseline-" + name;
  print_accuracy(ctx, label, report);
  write_predictions(ctx, o.predictions, report, label);
  return kOk;
}

// ---------------------------------------------------------------- wiring

inline void add_model_flags(CLI::App* cmd, TrainOptions& o) {
  auto& m = o.model;
  cmd->add_option("--train", o.train, "training set (JSONL)")->capture_default_str();
  cmd->add_option("--dev", o.dev, "dev set (JSONL)")->capture_default_str();
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--hops", m.hops, "attention hops")->check(CLI::Range(1, 3))->capture_default_str();
  cmd->add_option("--level", m.level, "attention level")
      ->check(CLI::IsMember({"phrase", "sentence"}))
      ->capture_default_str();
  cmd->add_option("--dim", m.dim, "hidden and memory dimension")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--emb-dim", m.emb_dim, "embedding dimension (default: --dim)")->check(CLI::PositiveNumber);
  cmd->add_flag("--per-hop-memory", m.per_hop_memory, "separate memory matrices per hop");
  cmd->add_flag("--untied", m.untied, "separate story/question/choice encoders");
  cmd->add_flag("--freeze-embeddings", m.freeze_embeddings, "do not update word vectors");
  cmd->add_option("--init-scale", m.init_scale, "uniform init half-width")->capture_default_str();
  cmd->add_option("--lr", m.lr, "AdaGrad learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--epochs", m.epochs, "maximum epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--seed", m.seed, "random seed")->capture_default_str();
  cmd->add_option("--patience", m.patience, "early-stopping patience")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--batch-size", m.batch_size, "examples per update (0: full batch)")->capture_default_str();
  cmd->add_option("--threads", m.threads, "gradient worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--clip", m.clip, "gradient norm clip (0: off)")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--vectors", m.vectors, "pretrained word vectors (GloVe text format)");
  cmd->add_flag("--quiet", o.quiet, "no per-epoch progress");
}

/// Parses `args` (without the program name) and runs the chosen command.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Hierarchical attention model over dependency trees", "ham"};
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "TOML/INI file with option defaults");
  std::string workdir = ".";
  app.add_option("--workdir", workdir, "base directory for relative paths")->capture_default_str();

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--task", gen.task, "locate or two-hop")
      ->check(CLI::IsMember({"locate", "two-hop"}))
      ->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "problems")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--k", gen.k, "choices per problem")->check(CLI::Range(2, 64))->capture_default_str();
  gen_cmd->add_option("--answers", gen.answers, "correct choices per problem")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--vocab", gen.vocab, "content symbols")->capture_default_str();
  gen_cmd->add_option("--distractors", gen.distractors, "other entities per story (default: k - answers)");
  gen_cmd->add_option("--story-length", gen.story_length, "sentences per story (0: minimal)")->capture_default_str();
  gen_cmd->add_option("--min-length", gen.min_length, "minimum sentence length")->capture_default_str();
  gen_cmd->add_option("--max-length", gen.max_length, "maximum sentence length")->capture_default_str();
  gen_cmd->add_option("--trees", gen.trees, "chain or random")
      ->check(CLI::IsMember({"chain", "random"}))
      ->capture_default_str();
  gen_cmd->add_option("--dropout", gen.dropout, "story token drop probability")->capture_default_str();
  gen_cmd->add_option("--split", gen.split, "train/dev/test ratios")->expected(3)->capture_default_str();

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_model_flags(train_cmd, train_opts);
  train_cmd->add_option("--runs", train_opts.runs, "repeat with seeds seed..seed+runs-1")->capture_default_str();

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval.data, "dataset (JSONL)")->required();
  eval_cmd->add_option("--predictions", eval.predictions, "write per-problem predictions (JSONL)");

  AttnOptions attn;
  auto* attn_cmd = app.add_subcommand("attn", "show the top attention weights per hop");
  attn_cmd->add_option("--checkpoint", attn.checkpoint, "checkpoint file")->required();
  attn_cmd->add_option("--data", attn.data, "dataset (JSONL)")->required();
  attn_cmd->add_option("--id", attn.id, "problem id")->required();
  attn_cmd->add_option("--k", attn.k, "weights per hop")->capture_default_str();

  GradcheckOptions gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "compare gradients with finite differences");
  gc_cmd->add_option("--seed", gc.seed, "random seed")->capture_default_str();
  gc_cmd->add_option("--dim", gc.dim, "model dimension")->check(CLI::Range(1, 16))->capture_default_str();
  gc_cmd->add_option("--hops", gc.hops, "attention hops")->check(CLI::Range(1, 3))->capture_default_str();
  gc_cmd->add_option("--level", gc.level, "attention level")
      ->check(CLI::IsMember({"phrase", "sentence"}))
      ->capture_default_str();
  gc_cmd->add_option("--task", gc.task, "problem shape")
      ->check(CLI::IsMember({"locate", "two-hop"}))
      ->capture_default_str();
  gc_cmd->add_option("--trees", gc.trees, "chain or random")
      ->check(CLI::IsMember({"chain", "random"}))
      ->capture_default_str();
  gc_cmd->add_option("--story-length", gc.story_length, "story sentences (0: minimal)")->capture_default_str();
  gc_cmd->add_option("--max-length", gc.max_length, "maximum sentence length")
      ->check(CLI::Range(2, 8))
      ->capture_default_str();
  gc_cmd->add_option("--tolerance", gc.tolerance, "maximum relative error")->capture_default_str();
  gc_cmd->add_option("--step", gc.step, "finite-difference step")->check(CLI::PositiveNumber)->capture_default_str();
  gc_cmd->add_option("--init-scale", gc.init_scale, "uniform init half-width")->capture_default_str();
  gc_cmd->add_flag("--verbose", gc.verbose, "per-parameter report");

  BaselineOptions base;
  auto* base_cmd = app.add_subcommand("baseline", "run a baseline (a, b or f)");
  base_cmd->add_option("name", base.name, "a: question-choice, b: sliding-window, f: treelstm-sum")->required();
  base_cmd->add_option("--data", base.data, "dataset to score (JSONL)")->required();
  base_cmd->add_option("--window", base.window, "window size in sentences (b)")->capture_default_str();
  base_cmd->add_option("--word-vectors", base.vectors, "pretrained word vectors (a, b)");
  base_cmd->add_option("--vector-dim", base.dim, "random word-vector dimension (a, b)")->capture_default_str();
  base_cmd->add_option("--vector-seed", base.seed, "random word-vector seed (a, b)")->capture_default_str();
  base_cmd->add_option("--predictions", base.predictions, "write per-problem predictions (JSONL)");
  add_model_flags(base_cmd, base.train);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const Context ctx(workdir, out, err);
  try {
    if (*gen_cmd) return cmd_gen(ctx, gen);
    if (*train_cmd) return cmd_train(ctx, train_opts);
    if (*eval_cmd) return cmd_eval(ctx, eval);
    if (*attn_cmd) return cmd_attn(ctx, attn);
    if (*gc_cmd) return cmd_gradcheck(ctx, gc);
    if (*base_cmd) return cmd_baseline(ctx, base);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    err << "malformed input: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace ham::cli
