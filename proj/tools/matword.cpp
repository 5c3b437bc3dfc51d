// matword: train, encode, probe, diagnose and benchmark matrix-space word
// embedding models.
//
// Exit codes: 0 ok, 2 usage or configuration error, 3 numeric failure,
// 4 corrupt model file.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "matword/matword.hpp"

namespace {

using namespace matword;

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCorrupt = 4;

/// Thrown for unreadable or malformed model files.
struct CorruptModel : Error {
  using Error::Error;
};

ModelFile open_model(const std::string& path) {
  try {
    return load_model(path);
  } catch (const FormatError& e) {
    throw CorruptModel(path + ": " + e.what());
  } catch (const IoError& e) {
    throw CorruptModel(e.what());
  }
}

Vocabulary vocabulary_of(const ModelFile& file) {
  return Vocabulary(file.tokens, std::vector<std::uint64_t>(file.tokens.size(), 1));
}

/// Output stream that is either a file or stdout.
class Sink {
 public:
  explicit Sink(const std::string& path, bool binary = false) {
    if (path.empty() || path == "-") return;
    file_.open(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!file_) throw IoError("cannot write '" + path + "'");
  }
  std::ostream& get() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config_file;
  std::map<std::string, std::string> flags;  // RunConfig key -> raw value
};

void add_train(CLI::App& app, TrainArgs& args) {
  auto* cmd = app.add_subcommand("train", "train a model on a text corpus");
  cmd->add_option("--config", args.config_file, "key=value configuration file; flags override it");
  static const std::map<std::string, std::string> help = {
      {"corpus", "training corpus, one sentence per line"},
      {"out", "model output path"},
      {"log", "JSON-lines log path (default <out>.log.jsonl)"},
      {"mode", "cbow | cmow | hybrid"},
      {"d1", "matrix side (CBOW side for hybrid)"},
      {"d2", "CMOW matrix side for hybrid"},
      {"vocab-size", "maximum vocabulary size"},
      {"window", "context words on each side"},
      {"negatives", "negative samples per target"},
      {"lr", "Adam learning rate"},
      {"target", "center | random"},
      {"init", "identity | glorot | normal"},
      {"sigma", "initialisation standard deviation"},
      {"seed", "random seed"},
      {"threads", "worker threads (0 = all cores)"},
      {"validate-every", "updates between validations"},
      {"patience", "non-improving validations before stopping"},
      {"sentences-per-batch", "sentences per mini-batch"},
      {"samples-per-sentence", "windows drawn per sentence"},
      {"max-updates", "hard cap on updates (0 = none)"},
      {"validation-fraction", "fraction of lines held out for validation"},
  };
  for (const auto& f : RunConfig::fields()) {
    const std::string key(f.key);
    const auto it = help.find(key);
    cmd->add_option_function<std::string>(
        "--" + key, [&args, key](const std::string& v) { args.flags[key] = v; },
        it == help.end() ? std::string() : it->second)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

int run_train(const TrainArgs& args) {
  RunConfig cfg;
  if (!args.config_file.empty()) cfg = RunConfig::load(args.config_file);
  for (const auto& [key, value] : args.flags) cfg.set(key, value);
  cfg.validate();
  if (!std::filesystem::exists(cfg.corpus)) throw IoError("corpus not found: '" + cfg.corpus + "'");

  const Vocabulary vocab = build_vocabulary(std::filesystem::path(cfg.corpus), cfg.vocab_size);
  log::info("vocabulary: ", vocab.size(), " tokens");
  std::ofstream log_file(cfg.log_path(), std::ios::trunc);
  if (!log_file) throw IoError("cannot write log '" + cfg.log_path() + "'");
  TrainObserver observer;
  observer.log_jsonl = &log_file;
  TrainResult result = train(std::filesystem::path(cfg.corpus), vocab, cfg.encoder_spec(), cfg.train_config(),
                             cfg.model_init(), observer);
  ModelFile file{std::move(result.model), {}};
  for (std::size_t i = 0; i < vocab.size(); ++i) file.tokens.push_back(vocab.token(static_cast<TokenId>(i)));
  save_model(cfg.out, file);
  log::info("trained for ", result.updates, " updates", result.early_stopped ? " (early stop)" : "");
  return 0;
}

// ---------------------------------------------------------------- encode

struct EncodeArgs {
  std::string model;
  std::string input;
  std::string output;
  bool binary = false;
};

void add_encode(CLI::App& app, EncodeArgs& args) {
  auto* cmd = app.add_subcommand("encode", "embed each input line");
  cmd->add_option("--model", args.model, "model file")->required();
  cmd->add_option("--input", args.input, "text input (default stdin)");
  cmd->add_option("--output", args.output, "embedding output (default stdout)");
  cmd->add_flag("--binary", args.binary, "write raw little-endian f32 instead of text");
}

int run_encode(const EncodeArgs& args) {
  const ModelFile file = open_model(args.model);
  const Vocabulary vocab = vocabulary_of(file);
  std::ifstream in_file;
  if (!args.input.empty() && args.input != "-") {
    in_file.open(args.input);
    if (!in_file) throw IoError("cannot read '" + args.input + "'");
  }
  std::istream& in = in_file.is_open() ? static_cast<std::istream&>(in_file) : std::cin;
  Sink sink(args.output, args.binary);
  std::ostream& out = sink.get();

  std::string line;
  char buf[32];
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto ids = encode_line(vocab, line);
    if (ids.empty()) log::warn("line ", no, ": no known tokens, emitting the neutral embedding");
    const auto emb = file.model.encode(ids);
    if (args.binary) {
      out.write(reinterpret_cast<const char*>(emb.data()), static_cast<std::streamsize>(emb.size() * sizeof(float)));
      continue;
    }
    for (std::size_t i = 0; i < emb.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(emb[i]));
      out << (i ? "\t" : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed");
  return 0;
}

// ---------------------------------------------------------------- probe

struct ProbeArgs {
  std::string model;
  std::string task;
  std::string corpus;
  std::uint64_t seed = 1;
  std::size_t sentences = 4000;
  std::size_t bins = 3;
  std::size_t target_words = 10;
  std::size_t sentence_length = 8;
  probing::ProbeOptions opts;
};

void add_probe(CLI::App& app, ProbeArgs& args) {
  auto* cmd = app.add_subcommand("probe", "train a linear probe on frozen sentence embeddings");
  cmd->add_option("--model", args.model, "model file")->required();
  cmd->add_option("--task", args.task, "wordcontent | bigramshift | length")->required();
  cmd->add_option("--corpus", args.corpus, "text corpus supplying probe sentences");
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("--sentences", args.sentences, "maximum probe sentences");
  cmd->add_option("--bins", args.bins, "length classes");
  cmd->add_option("--target-words", args.target_words, "word-content classes");
  cmd->add_option("--sentence-length", args.sentence_length, "word-content sentence length");
  cmd->add_option("--epochs", args.opts.epochs, "probe training epochs");
  cmd->add_option("--lr", args.opts.lr, "probe learning rate");
  cmd->add_option("--weight-decay", args.opts.weight_decay, "probe L2 penalty");
}

int run_probe(const ProbeArgs& args) {
  if (args.task != "wordcontent" && args.task != "bigramshift" && args.task != "length")
    throw InvalidArgument("unknown probe task '" + args.task + "'");
  const ModelFile file = open_model(args.model);
  const Vocabulary vocab = vocabulary_of(file);
  std::mt19937_64 rng(args.seed);

  const auto corpus_sentences = [&] {
    if (args.corpus.empty()) throw InvalidArgument("--corpus is required for task " + args.task);
    std::vector<std::vector<TokenId>> out;
    for (auto& s : read_sentences(args.corpus, vocab))
      if (s.size() >= 2 && out.size() < args.sentences) out.push_back(std::move(s));
    if (out.empty()) throw InvalidArgument("corpus has no usable sentences");
    return out;
  };
  probing::ProbeDataset ds;
  if (args.task == "wordcontent") {
    ds = probing::gen_wordcontent(vocab.size(), args.sentences, args.target_words, args.sentence_length, rng);
  } else if (args.task == "bigramshift") {
    const auto s = corpus_sentences();
    ds = probing::gen_bigramshift(std::span<const std::vector<TokenId>>(s), rng);
  } else {
    const auto s = corpus_sentences();
    ds = probing::gen_length(std::span<const std::vector<TokenId>>(s), args.bins, rng);
  }
  std::vector<std::vector<float>> embeddings;
  embeddings.reserve(ds.size());
  for (const auto& s : ds.sentences) embeddings.push_back(file.model.encode(s));
  auto result = probing::train_probe(embeddings, ds, args.opts);
  result.mode = to_string(file.model.spec.mode);
  std::cout << result.to_json().dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  std::vector<std::string> inits{"normal", "glorot", "identity"};
  double sigma = 0.1;
  probing::VanishingOptions opts;
  std::size_t threads = 0;
  std::string output;
};

void add_diagnose(CLI::App& app, DiagnoseArgs& args) {
  auto* cmd = app.add_subcommand("diagnose", "mean |value| of products of freshly initialised matrices");
  cmd->add_option("--init", args.inits, "strategies to tabulate")->delimiter(',');
  cmd->add_option("--sigma", args.sigma, "standard deviation for normal and identity");
  cmd->add_option("--d", args.opts.d, "matrix side");
  cmd->add_option("--n-max", args.opts.n_max, "longest product");
  cmd->add_option("--trials", args.opts.trials, "Monte-Carlo trials");
  cmd->add_option("--vocab-rows", args.opts.vocab_rows, "table rows used for the Glorot fan");
  cmd->add_option("--seed", args.opts.seed, "random seed");
  cmd->add_option("--threads", args.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out", args.output, "CSV output (default stdout)");
}

int run_diagnose(const DiagnoseArgs& args) {
  if (!(args.sigma >= 0.0)) throw InvalidArgument("--sigma must be >= 0");
  std::vector<InitOptions> inits;
  for (const auto& name : args.inits) inits.push_back({parse_init_strategy(name), args.sigma});
  const std::size_t threads = args.threads ? args.threads : default_thread_count();
  std::optional<ThreadPool> pool;
  if (threads > 1) pool.emplace(threads);
  const auto rows = probing::vanishing_values_diagnostic(inits, args.opts, pool ? &*pool : nullptr);
  Sink sink(args.output);
  probing::write_vanishing_csv(sink.get(), rows);
  return 0;
}

// ---------------------------------------------------------------- bench

inline constexpr std::size_t kMinBenchSentences = 1000;

struct BenchArgs {
  std::string model;
  std::string corpus;
  std::size_t threads = 0;
  std::string output;
};

void add_bench(CLI::App& app, BenchArgs& args) {
  auto* cmd = app.add_subcommand("bench", "encoding throughput of the encoder variants");
  cmd->add_option("--model", args.model, "model file")->required();
  cmd->add_option("--corpus", args.corpus, "sentences to encode")->required();
  cmd->add_option("--threads", args.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out", args.output, "JSON output (default stdout)");
}

int run_bench(const BenchArgs& args) {
  const ModelFile file = open_model(args.model);
  const auto sentences = read_sentences(args.corpus, vocabulary_of(file));
  if (sentences.size() < kMinBenchSentences)
    throw InvalidArgument("bench needs at least " + std::to_string(kMinBenchSentences) + " sentences");
  const std::size_t threads = args.threads ? args.threads : default_thread_count();
  const auto report =
      throughput_bench(file.model, std::span<const std::vector<TokenId>>(sentences), threads);
  Sink sink(args.output);
  sink.get() << report.to_json().dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- gen-corpus

struct GenArgs {
  probing::MarkovCorpusOptions opts;
  std::string output;
};

void add_gen(CLI::App& app, GenArgs& args) {
  auto* cmd = app.add_subcommand("gen-corpus", "write a synthetic Markov bigram corpus");
  cmd->add_option("--out", args.output, "corpus output (default stdout)");
  cmd->add_option("--vocab-size", args.opts.vocab_size, "distinct words");
  cmd->add_option("--sentences", args.opts.sentences, "number of lines");
  cmd->add_option("--min-length", args.opts.min_length, "shortest sentence");
  cmd->add_option("--max-length", args.opts.max_length, "longest sentence");
  cmd->add_option("--successors", args.opts.successors, "likely successors per word");
  cmd->add_option("--noise", args.opts.noise, "probability of a random next word");
  cmd->add_option("--seed", args.opts.seed, "random seed");
}

int run_gen(const GenArgs& args) {
  probing::MarkovCorpus gen(args.opts);
  Sink sink(args.output);
  gen.write(sink.get());
  return sink.get() ? 0 : kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matword: matrix-space word embedding models"};
  app.require_subcommand(1);
  TrainArgs train_args;
  EncodeArgs encode_args;
  ProbeArgs probe_args;
  DiagnoseArgs diagnose_args;
  BenchArgs bench_args;
  GenArgs gen_args;
  add_train(app, train_args);
  add_encode(app, encode_args);
  add_probe(app, probe_args);
  add_diagnose(app, diagnose_args);
  add_bench(app, bench_args);
  add_gen(app, gen_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "train") return run_train(train_args);
    if (cmd == "encode") return run_encode(encode_args);
    if (cmd == "probe") return run_probe(probe_args);
    if (cmd == "diagnose") return run_diagnose(diagnose_args);
    if (cmd == "bench") return run_bench(bench_args);
    return run_gen(gen_args);
  } catch (const CorruptModel& e) {
    log::error(e.what());
    return kExitCorrupt;
  } catch (const NumericError& e) {
    log::error(e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    log::error(e.what());
    return kExitUsage;
  }
}
