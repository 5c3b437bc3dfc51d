#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "matword/batches.hpp"
#include "matword/common.hpp"
#include "matword/encoder.hpp"
#include "matword/model.hpp"
#include "matword/table.hpp"
#include "matword/train.hpp"
#include "matword/vocabulary.hpp"

namespace matword {

/// Everything `matword train` needs. Serialises to `key=value` lines whose
/// keys are the long flag names.
struct RunConfig {
  std::string corpus;
  std::string out;
  std::string log;  // empty: <out>.log.jsonl
  Mode mode = Mode::Product;
  std::size_t d1 = 20;
  std::size_t d2 = 0;
  std::size_t vocab_size = kDefaultVocabularySize;
  std::size_t window = 5;
  std::size_t negatives = 20;
  double lr = 0.0003;
  TargetMode target = TargetMode::Random;
  std::optional<InitStrategy> init;  // unset: normal for CBOW tables, identity for CMOW tables
  double sigma = 0.1;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::size_t validate_every = 1000;
  std::size_t patience = 10;
  std::size_t sentences_per_batch = 1024;
  std::size_t samples_per_sentence = 30;
  std::size_t max_updates = 0;
  double validation_fraction = kDefaultValidationFraction;

  bool operator==(const RunConfig&) const = default;

  EncoderSpec encoder_spec() const { return {mode, d1, mode == Mode::Hybrid ? d2 : 0}; }

  TrainConfig train_config() const {
    TrainConfig c;
    c.negatives = negatives;
    c.adam.lr = lr;
    c.window = window;
    c.target_mode = target;
    c.validate_every = validate_every;
    c.patience = patience;
    c.seed = seed;
    c.sentences_per_batch = sentences_per_batch;
    c.samples_per_sentence = samples_per_sentence;
    c.threads = threads;
    c.max_updates = max_updates;
    c.validation_fraction = validation_fraction;
    return c;
  }

  /// `init`/`sigma` apply to the CBOW table for cbow and to the CMOW table
  /// for cmow and hybrid.
  ModelInit model_init() const {
    ModelInit mi;
    if (mode == Mode::Sum) {
      mi.sum = {init.value_or(InitStrategy::PlainNormal), sigma};
    } else {
      mi.product = {init.value_or(InitStrategy::IdentityOffset), sigma};
    }
    return mi;
  }

  std::string log_path() const { return log.empty() ? out + ".log.jsonl" : log; }

  /// Throws InvalidArgument on inconsistent settings.
  void validate() const {
    if (corpus.empty()) throw InvalidArgument("config: corpus is required");
    if (out.empty()) throw InvalidArgument("config: out is required");
    if (mode == Mode::Hybrid && d2 == 0) throw InvalidArgument("config: hybrid mode requires d2");
    if (mode != Mode::Hybrid && d2 != 0) throw InvalidArgument("config: d2 is only valid with --mode hybrid");
    if (d1 == 0) throw InvalidArgument("config: d1 must be positive");
    if (vocab_size == 0) throw InvalidArgument("config: vocab-size must be positive");
    if (!(sigma >= 0.0)) throw InvalidArgument("config: sigma must be >= 0");
    train_config().validate();
  }

  /// Sets one field from its textual form; throws FormatError on an unknown
  /// key or unparsable value.
  void set(std::string_view key, std::string_view value) {
    for (const auto& f : fields())
      if (f.key == key) {
        try {
          f.set(*this, std::string(value));
        } catch (const FormatError&) {
          throw;
        } catch (const std::exception& e) {
          throw FormatError("config: bad value for '" + std::string(key) + "': " + e.what());
        }
        return;
      }
    throw FormatError("config: unknown key '" + std::string(key) + "'");
  }

  void write(std::ostream& os) const {
    for (const auto& f : fields()) os << f.key << '=' << f.get(*this) << '\n';
  }

  std::string serialize() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  /// Applies `key=value` lines on top of the current values. Blank lines
  /// and lines starting with '#' are ignored.
  void read(std::istream& in) {
    std::string line;
    for (std::size_t no = 1; std::getline(in, line); ++no) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("config line " + std::to_string(no) + ": expected key=value");
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }

  static RunConfig parse(std::string_view text) {
    RunConfig c;
    std::istringstream in{std::string(text)};
    c.read(in);
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path.string() + "'");
    RunConfig c;
    c.read(in);
    return c;
  }

  struct Field {
    std::string_view key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
  };

  static const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
      std::vector<Field> f;
      const auto str = [&](std::string_view key, std::string RunConfig::*m) {
        f.push_back({key, [m](const RunConfig& c) { return c.*m; },
                     [m](RunConfig& c, const std::string& v) { c.*m = v; }});
      };
      const auto size = [&](std::string_view key, std::size_t RunConfig::*m) {
        f.push_back({key, [m](const RunConfig& c) { return std::to_string(c.*m); },
                     [m](RunConfig& c, const std::string& v) { c.*m = parse_unsigned<std::size_t>(v); }});
      };
      const auto real = [&](std::string_view key, double RunConfig::*m) {
        f.push_back({key, [m](const RunConfig& c) { return format_double(c.*m); },
                     [m](RunConfig& c, const std::string& v) { c.*m = parse_double(v); }});
      };
      str("corpus", &RunConfig::corpus);
      str("out", &RunConfig::out);
      str("log", &RunConfig::log);
      f.push_back({"mode", [](const RunConfig& c) { return std::string(to_string(c.mode)); },
                   [](RunConfig& c, const std::string& v) { c.mode = parse_mode(v); }});
      size("d1", &RunConfig::d1);
      size("d2", &RunConfig::d2);
      size("vocab-size", &RunConfig::vocab_size);
      size("window", &RunConfig::window);
      size("negatives", &RunConfig::negatives);
      real("lr", &RunConfig::lr);
      f.push_back({"target", [](const RunConfig& c) { return std::string(to_string(c.target)); },
                   [](RunConfig& c, const std::string& v) { c.target = parse_target_mode(v); }});
      f.push_back({"init", [](const RunConfig& c) { return c.init ? std::string(to_string(*c.init)) : std::string(); },
                   [](RunConfig& c, const std::string& v) {
                     c.init = v.empty() ? std::nullopt : std::optional(parse_init_strategy(v));
                   }});
      real("sigma", &RunConfig::sigma);
      f.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                   [](RunConfig& c, const std::string& v) { c.seed = parse_unsigned<std::uint64_t>(v); }});
      size("threads", &RunConfig::threads);
      size("validate-every", &RunConfig::validate_every);
      size("patience", &RunConfig::patience);
      size("sentences-per-batch", &RunConfig::sentences_per_batch);
      size("samples-per-sentence", &RunConfig::samples_per_sentence);
      size("max-updates", &RunConfig::max_updates);
      real("validation-fraction", &RunConfig::validation_fraction);
      return f;
    }();
    return table;
  }

  static TargetMode parse_target_mode(std::string_view v) {
    if (v == "center") return TargetMode::Center;
    if (v == "random") return TargetMode::Random;
    throw InvalidArgument("unknown target mode '" + std::string(v) + "'");
  }

 private:
  static std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  template <class U>
  static U parse_unsigned(const std::string& v) {
    U out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw FormatError("not an unsigned integer: '" + v + "'");
    return out;
  }

  static double parse_double(const std::string& v) {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw FormatError("not a number: '" + v + "'");
    return out;
  }

  static std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
  }
};

}  // namespace matword
