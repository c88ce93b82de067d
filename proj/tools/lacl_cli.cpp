// lacl: split corpora, train, evaluate and gradient-check from the shell.

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lacl/diagnostics/gradcheck_suite.hpp"
#include "lacl/lacl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Input problems (missing files, bad config) exit with 2; anything else with 1.
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 1;
constexpr int kExitScorerFailed = 3;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw InputError("file not found: " + p.string());
}

// Written on every exit path once the command knows its output directory.
class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv) : command_(std::move(command)) {
    for (int i = 0; i < argc; ++i) invocation_.push_back(argv[i]);
    start_ = std::chrono::steady_clock::now();
  }

  void set_out(fs::path dir) { out_ = std::move(dir); }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  json& config() { return config_; }
  void seed(std::uint64_t s) { seed_ = s; }

  void write(int exit_code, const std::string& error) const {
    if (out_.empty()) return;
    std::error_code ec;
    fs::create_directories(out_, ec);
    json doc;
    doc["version"] = 1;
    doc["command"] = command_;
    doc["invocation"] = invocation_;
    doc["config"] = config_;
    doc["seed"] = seed_ ? json(*seed_) : json(nullptr);
    doc["inputs"] = json::array();
    for (const auto& p : inputs_) doc["inputs"].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    doc["outputs"] = json::array();
    for (const auto& p : outputs_)
      if (fs::exists(p)) doc["outputs"].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    doc["status"] = exit_code == 0 ? "ok" : "error";
    doc["exit_code"] = exit_code;
    if (!error.empty()) doc["error"] = error;
    doc["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream f(out_ / "manifest.json");
    f << doc.dump(2) << "\n";
  }

 private:
  std::string command_;
  std::vector<std::string> invocation_;
  fs::path out_;
  std::vector<fs::path> inputs_, outputs_;
  json config_ = json::object();
  std::optional<std::uint64_t> seed_;
  std::chrono::steady_clock::time_point start_;
};

// Runs a command body, maps failures to exit codes and always writes the
// manifest.
int guarded(Manifest& manifest, const std::function<int()>& body) {
  int code = 0;
  std::string error;
  try {
    code = body();
  } catch (const InputError& e) {
    code = kExitInput;
    error = e.what();
  } catch (const lacl::Error& e) {
    const std::string& c = e.code();
    const bool input = c == "file-not-found" || c == "invalid-config" || c.rfind("malformed", 0) == 0 ||
                       c == "unknown-split" || c == "unknown-exclusion" || c == "invalid-ratio" ||
                       c == "degenerate-split" || c == "empty-split" || c == "label-mismatch" ||
                       c == "unsupported-checkpoint-version";
    code = input ? kExitInput : kExitRuntime;
    error = e.what();
  } catch (const std::exception& e) {
    code = kExitRuntime;
    error = e.what();
  }
  if (!error.empty()) std::cerr << "error: " << error << "\n";
  manifest.write(code, error);
  return code;
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  if (const char* s = std::getenv("LACL_SEED")) {
    std::uint64_t v = 0;
    const std::string str(s);
    auto [p, ec] = std::from_chars(str.data(), str.data() + str.size(), v);
    if (ec != std::errc() || p != str.data() + str.size())
      throw InputError("LACL_SEED is not an unsigned integer: " + str);
    return v;
  }
  return fallback;
}

// ---------------------------------------------------------------------------
// Flat key = value config.
// ---------------------------------------------------------------------------

struct TrainSetup {
  lacl::EncoderConfig encoder;
  lacl::TrainConfig train;
  std::optional<fs::path> sidecar;
  bool seed_given = false;
};

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw InputError("invalid config value for key '" + key + "': " + v);
  return out;
}

using Setter = std::function<void(TrainSetup&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& config_keys() {
  static const std::map<std::string, Setter> keys = {
      {"epochs", [](TrainSetup& s, auto& k, auto& v) { s.train.epochs = parse_number<std::size_t>(k, v); }},
      {"batch_size", [](TrainSetup& s, auto& k, auto& v) { s.train.batch_size = parse_number<std::size_t>(k, v); }},
      {"lr_peak", [](TrainSetup& s, auto& k, auto& v) { s.train.lr_peak = parse_number<double>(k, v); }},
      {"weight_decay", [](TrainSetup& s, auto& k, auto& v) { s.train.weight_decay = parse_number<double>(k, v); }},
      {"tau", [](TrainSetup& s, auto& k, auto& v) { s.train.tau = parse_number<double>(k, v); }},
      {"lambda1", [](TrainSetup& s, auto& k, auto& v) { s.train.lambda1 = parse_number<double>(k, v); }},
      {"margin", [](TrainSetup& s, auto& k, auto& v) { s.train.margin = parse_number<double>(k, v); }},
      {"seed",
       [](TrainSetup& s, auto& k, auto& v) {
         s.train.seed = parse_number<std::uint64_t>(k, v);
         s.seed_given = true;
       }},
      {"min_freq", [](TrainSetup& s, auto& k, auto& v) { s.train.min_freq = parse_number<std::size_t>(k, v); }},
      {"mode", [](TrainSetup& s, auto&, auto& v) { s.train.model.mode = lacl::parse_mode(v); }},
      {"variant", [](TrainSetup& s, auto&, auto& v) { s.train.model.variant = lacl::parse_variant(v); }},
      {"gcl_sharing", [](TrainSetup& s, auto&, auto& v) { s.train.model.sharing = lacl::parse_sharing(v); }},
      {"gcl_hidden",
       [](TrainSetup& s, auto& k, auto& v) { s.train.model.gcl_hidden = parse_number<std::size_t>(k, v); }},
      {"rsm_rate", [](TrainSetup& s, auto& k, auto& v) { s.train.augment.rsm_rate = parse_number<double>(k, v); }},
      {"rsm_span",
       [](TrainSetup& s, auto& k, auto& v) { s.train.augment.rsm_span = parse_number<std::size_t>(k, v); }},
      {"cutoff_rate",
       [](TrainSetup& s, auto& k, auto& v) { s.train.augment.cutoff_rate = parse_number<double>(k, v); }},
      {"view1", [](TrainSetup& s, auto&, auto& v) { s.train.augment.view1 = lacl::parse_recipe(v); }},
      {"view2", [](TrainSetup& s, auto&, auto& v) { s.train.augment.view2 = lacl::parse_recipe(v); }},
      {"bt_sidecar", [](TrainSetup& s, auto&, auto& v) { s.sidecar = fs::path(v); }},
      {"layers", [](TrainSetup& s, auto& k, auto& v) { s.encoder.layers = parse_number<std::size_t>(k, v); }},
      {"hidden", [](TrainSetup& s, auto& k, auto& v) { s.encoder.hidden = parse_number<std::size_t>(k, v); }},
      {"heads", [](TrainSetup& s, auto& k, auto& v) { s.encoder.heads = parse_number<std::size_t>(k, v); }},
      {"ff_mult", [](TrainSetup& s, auto& k, auto& v) { s.encoder.ff_mult = parse_number<std::size_t>(k, v); }},
      {"dropout", [](TrainSetup& s, auto& k, auto& v) { s.encoder.dropout = parse_number<double>(k, v); }},
      {"max_len", [](TrainSetup& s, auto& k, auto& v) { s.encoder.max_len = parse_number<std::size_t>(k, v); }},
  };
  return keys;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void apply_setting(TrainSetup& s, const std::string& key, std::string value) {
  if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
    value = value.substr(1, value.size() - 2);
  auto it = config_keys().find(key);
  if (it == config_keys().end()) throw InputError("unknown config key '" + key + "'");
  try {
    it->second(s, key, value);
  } catch (const lacl::Error& e) {
    throw InputError("invalid config value for key '" + key + "': " + e.what());
  }
}

void load_config(TrainSetup& s, const fs::path& path) {
  require_file(path);
  std::ifstream in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    apply_setting(s, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

// Structural checks that name the offending key.
void validate_setup(TrainSetup& s) {
  const auto& e = s.encoder;
  if (e.layers == 0) throw InputError("invalid config value for key 'layers': must be positive");
  if (e.hidden == 0 || e.hidden % e.layers != 0)
    throw InputError("invalid config value for key 'hidden': must be divisible by layers");
  if (e.heads == 0 || e.hidden % e.heads != 0)
    throw InputError("invalid config value for key 'heads': must divide hidden");
  if (!(e.dropout >= 0.0 && e.dropout < 1.0)) throw InputError("invalid config value for key 'dropout': must lie in [0, 1)");
  try {
    s.train.validate();
  } catch (const lacl::Error& err) {
    throw InputError(err.what());
  }
}

// Maps a corpus's label names onto the checkpoint's label ids.
std::vector<lacl::LabeledExample> relabel(const std::vector<lacl::LabeledExample>& exs, const lacl::Corpus& c,
                                          const lacl::Model& m) {
  std::vector<lacl::LabeledExample> out = exs;
  for (auto& e : out) {
    if (e.label < 0) continue;
    const std::string& name = c.label_names.at(static_cast<std::size_t>(e.label));
    auto it = std::lower_bound(m.label_names.begin(), m.label_names.end(), name);
    if (it == m.label_names.end() || *it != name)
      throw lacl::Error("label-mismatch", "label '" + name + "' is not in the checkpoint");
    e.label = static_cast<int>(it - m.label_names.begin());
  }
  return out;
}

void write_text(const fs::path& p, const std::string& s, Manifest& manifest) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw lacl::Error("write-failed", p.string());
  out << s;
  manifest.output(p);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-agnostic contrastive learning for intent OOD detection"};
  app.require_subcommand(1);

  // split
  auto* split = app.add_subcommand("split", "Build IND/OOD corpora (close or far setting)");
  std::string split_dataset, split_mode = "close", split_out, split_exclusions, split_ood;
  double split_ratio = 0.5;
  std::optional<std::uint64_t> split_seed;
  split->add_option("dataset", split_dataset, "Corpus JSON")->required();
  split->add_option("--mode", split_mode, "close | far")->check(CLI::IsMember({"close", "far"}));
  split->add_option("--ratio", split_ratio, "IND label fraction (close mode)");
  split->add_option("--seed", split_seed, "Split seed (falls back to LACL_SEED)");
  split->add_option("--exclusions", split_exclusions, "Classes/domains to drop from IND (far mode)");
  split->add_option("--ood", split_ood, "Outlier corpus (far mode)");
  split->add_option("--out", split_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a LaCL or cross-entropy baseline model");
  std::string train_corpus, train_config, train_out, train_mode, train_sidecar;
  std::optional<std::uint64_t> train_seed;
  std::vector<std::string> train_overrides;
  train->add_option("ind_corpus", train_corpus, "IND corpus JSON (train split is used)")->required();
  train->add_option("--config", train_config, "Flat key = value config file");
  train->add_option("--mode", train_mode, "lacl | ce")->check(CLI::IsMember({"lacl", "ce"}));
  train->add_option("--seed", train_seed, "Training seed (falls back to config, then LACL_SEED)");
  train->add_option("--sidecar", train_sidecar, "Paraphrase sidecar JSON for back-translation views");
  train->add_option("--set", train_overrides, "key=value override (repeatable)");
  train->add_option("--out", train_out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score IND/OOD test data and report metrics");
  std::string eval_ckpt, eval_train, eval_test, eval_ood, eval_out, eval_variant = "full",
                                                                     eval_threshold = "test",
                                                                     eval_features = "pooled",
                                                                     eval_layerwise = "cosine";
  std::vector<std::string> eval_scorers = lacl::all_scorers();
  std::size_t eval_bins = 20;
  eval->add_option("checkpoint", eval_ckpt, "Checkpoint JSON")->required();
  eval->add_option("ind_train", eval_train, "IND corpus whose train split forms the bank")->required();
  eval->add_option("ind_test", eval_test, "IND corpus whose test split is scored")->required();
  eval->add_option("ood_test", eval_ood, "Outlier corpus (oos_test, oos_*, or test split)")->required();
  eval->add_option("--scorers", eval_scorers, "cosine-single,cosine-ens,maha-single,maha-ens")
      ->delimiter(',')
      ->check(CLI::IsMember(lacl::all_scorers()));
  eval->add_option("--variant", eval_variant, "full | upper-half")->check(CLI::IsMember({"full", "upper-half"}));
  eval->add_option("--threshold-source", eval_threshold, "test | train")->check(CLI::IsMember({"test", "train"}));
  eval->add_option("--ensemble-feature", eval_features, "pooled | compressed")
      ->check(CLI::IsMember({"pooled", "compressed"}));
  eval->add_option("--layerwise-kind", eval_layerwise, "cosine | maha")->check(CLI::IsMember({"cosine", "maha"}));
  eval->add_option("--bins", eval_bins, "Histogram bins")->check(CLI::Range(2, 10000));
  eval->add_option("--out", eval_out, "Output directory")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare backward() with central differences");
  std::size_t gc_trials = 20, gc_objective_trials = 10;
  std::uint64_t gc_seed = 1;
  gradcheck->add_option("--trials", gc_trials, "Random inputs per op");
  gradcheck->add_option("--objective-trials", gc_objective_trials, "Random batches for the full objective");
  gradcheck->add_option("--seed", gc_seed, "Seed");

  // synth
  auto* synth = app.add_subcommand("synth", "Write the bundled synthetic corpora and paraphrase sidecar");
  std::string synth_out;
  std::uint64_t synth_seed = 11;
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  if (split->parsed()) {
    Manifest manifest("split", argc, argv);
    manifest.set_out(split_out);
    return guarded(manifest, [&] {
      require_file(split_dataset);
      manifest.input(split_dataset);
      fs::create_directories(split_out);
      const auto corpus = lacl::load_corpus(split_dataset);
      const fs::path ind_path = fs::path(split_out) / "ind.json", ood_path = fs::path(split_out) / "ood.json";
      manifest.config() = {{"mode", split_mode}, {"dataset", split_dataset}};
      if (split_mode == "close") {
        const std::uint64_t seed = split_seed ? *split_seed : seed_from_env(1);
        manifest.seed(seed);
        manifest.config()["ratio"] = split_ratio;
        const auto parts = lacl::close_split(corpus, split_ratio, seed);
        lacl::save_corpus(parts.ind, ind_path);
        lacl::save_corpus(parts.ood, ood_path);
        std::cout << "IND labels " << parts.ind.num_labels() << ", OOD labels " << parts.ood.num_labels() << "\n";
      } else {
        if (split_exclusions.empty() || split_ood.empty())
          throw InputError("far mode needs --exclusions and --ood");
        require_file(split_exclusions);
        require_file(split_ood);
        manifest.input(split_exclusions);
        manifest.input(split_ood);
        manifest.config()["exclusions"] = split_exclusions;
        manifest.config()["ood"] = split_ood;
        const auto pairing = lacl::far_pair(corpus, lacl::load_corpus(split_ood, false),
                                            lacl::load_exclusions(split_exclusions));
        lacl::save_corpus(pairing.ind, ind_path);
        lacl::Corpus ood;
        ood.oos["oos_test"] = pairing.ood_test;
        lacl::save_corpus(ood, ood_path);
        std::cout << "IND labels " << pairing.ind.num_labels() << " (of " << corpus.num_labels() << "), OOD examples "
                  << pairing.ood_test.size() << "\n";
      }
      manifest.output(ind_path);
      manifest.output(ood_path);
      return 0;
    });
  }

  if (train->parsed()) {
    Manifest manifest("train", argc, argv);
    manifest.set_out(train_out);
    return guarded(manifest, [&] {
      require_file(train_corpus);
      manifest.input(train_corpus);
      TrainSetup setup;
      if (!train_config.empty()) {
        load_config(setup, train_config);
        manifest.input(train_config);
      }
      for (const auto& kv : train_overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InputError("--set expects key=value, got " + kv);
        apply_setting(setup, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
      }
      if (!train_mode.empty()) setup.train.model.mode = lacl::parse_mode(train_mode);
      if (train_seed) setup.train.seed = *train_seed;
      else if (!setup.seed_given) setup.train.seed = seed_from_env(setup.train.seed);
      if (!train_sidecar.empty()) setup.sidecar = fs::path(train_sidecar);
      validate_setup(setup);
      manifest.seed(setup.train.seed);

      std::optional<lacl::ParaphraseSidecar> sidecar;
      if (setup.sidecar) {
        require_file(*setup.sidecar);
        manifest.input(*setup.sidecar);
        sidecar = lacl::ParaphraseSidecar::load(*setup.sidecar);
      }
      const auto corpus = lacl::load_corpus(train_corpus);
      manifest.config() = lacl::train_config_to_json(setup.train, setup.encoder);
      if (setup.sidecar) manifest.config()["bt_sidecar"] = setup.sidecar->string();
      fs::create_directories(train_out);

      auto result = lacl::train(corpus, setup.encoder, setup.train, sidecar ? &*sidecar : nullptr,
                                [](const lacl::EpochRecord& r) {
                                  std::cerr << "epoch " << r.epoch << " lr " << r.lr << " loss " << r.loss_total
                                            << " (scl " << r.loss_scl << ", cr " << r.loss_cr << ") adj_cor "
                                            << r.mean_adj_cor << "\n";
                                });
      const fs::path ckpt = fs::path(train_out) / "checkpoint.json";
      const fs::path report = fs::path(train_out) / "train_report.csv";
      lacl::save_checkpoint(result.model, ckpt, result.report.config);
      manifest.output(ckpt);
      result.report.checkpoint_path = ckpt.string();
      write_text(report, result.report.csv(), manifest);
      return 0;
    });
  }

  if (eval->parsed()) {
    Manifest manifest("eval", argc, argv);
    manifest.set_out(eval_out);
    return guarded(manifest, [&] {
      for (const auto& p : {eval_ckpt, eval_train, eval_test, eval_ood}) {
        require_file(p);
        manifest.input(p);
      }
      lacl::EvalOptions opt;
      opt.scorers = eval_scorers;
      opt.slice = eval_variant == "full" ? lacl::SliceMode::Full : lacl::SliceMode::UpperHalf;
      opt.threshold_source = eval_threshold == "test" ? lacl::ThresholdSource::Test : lacl::ThresholdSource::Train;
      opt.ensemble_feature = eval_features == "pooled" ? lacl::LayerFeature::Pooled : lacl::LayerFeature::Compressed;
      opt.layerwise_kind = eval_layerwise == "cosine" ? lacl::ScoreKind::Cosine : lacl::ScoreKind::Mahalanobis;
      opt.histogram_bins = eval_bins;
      manifest.config() = {{"scorers", eval_scorers},       {"variant", eval_variant},
                           {"threshold_source", eval_threshold}, {"ensemble_feature", eval_features},
                           {"layerwise_kind", eval_layerwise}, {"bins", eval_bins}};

      const auto model = lacl::load_checkpoint(eval_ckpt);
      const auto train_c = lacl::load_corpus(eval_train);
      const auto test_c = lacl::load_corpus(eval_test);
      const auto ood_c = lacl::load_corpus(eval_ood, false);
      const auto bank_examples = relabel(train_c.train, train_c, model);
      const auto ind_test = relabel(test_c.test, test_c, model);
      const auto ood_test = lacl::ood_examples(ood_c);
      const lacl::Provenance prov{sha256_file(eval_ckpt), sha256_file(eval_train)};

      fs::create_directories(eval_out);
      const auto res = lacl::evaluate(model, bank_examples, ind_test, ood_test, opt, prov);
      const fs::path dir(eval_out);
      write_text(dir / "metrics.json", res.report.to_json().dump(2) + "\n", manifest);
      {
        std::ostringstream s;
        lacl::write_score_csv(s, res.scores, model.label_names);
        write_text(dir / "scores.csv", s.str(), manifest);
      }
      {
        std::ostringstream s;
        lacl::write_score_csv(s, res.layerwise, model.label_names);
        write_text(dir / "layerwise.csv", s.str(), manifest);
      }
      {
        std::ostringstream s;
        lacl::write_histogram_header(s);
        for (const auto& [name, h] : res.histograms) lacl::write_histogram_rows(s, name, h);
        write_text(dir / "histogram.csv", s.str(), manifest);
      }
      lacl::save_bank(res.bank, dir / "bank.json");
      manifest.output(dir / "bank.json");
      bool failed = false;
      for (const auto& m : res.report.scorers) {
        if (m.ok)
          std::cout << std::left << std::setw(14) << m.name << " acc " << std::fixed << std::setprecision(4)
                    << m.accuracy << "  auroc " << m.auroc << "  fpr@95 " << m.fpr_at_95 << "\n";
        else {
          failed = true;
          std::cerr << m.name << " failed: " << m.error << "\n";
        }
      }
      return failed ? kExitScorerFailed : 0;
    });
  }

  if (gradcheck->parsed()) {
    Manifest manifest("gradcheck", argc, argv);
    return guarded(manifest, [&] {
      double worst = 0.0;
      for (const auto& r : lacl::diagnostics::check_all_ops(gc_trials, gc_seed)) {
        std::cout << std::left << std::setw(24) << r.name << " max rel error " << std::scientific
                  << std::setprecision(3) << r.max_rel_error << "\n";
        worst = std::max(worst, r.max_rel_error);
      }
      auto setup = lacl::diagnostics::small_objective();
      setup.max_coords = 128;
      const auto obj = lacl::diagnostics::check_objective_many(setup, gc_objective_trials, gc_seed);
      std::cout << std::left << std::setw(24) << obj.name << " max rel error " << std::scientific
                << std::setprecision(3) << obj.max_rel_error << " (" << obj.trials << " batches, " << obj.skipped
                << " skipped at the margin)\n";
      worst = std::max(worst, obj.max_rel_error);
      std::cout << "max relative error " << std::scientific << std::setprecision(3) << worst << "\n";
      return worst < 1e-4 ? 0 : kExitRuntime;
    });
  }

  if (synth->parsed()) {
    Manifest manifest("synth", argc, argv);
    manifest.set_out(synth_out);
    manifest.seed(synth_seed);
    return guarded(manifest, [&] {
      namespace syn = lacl::synthetic;
      const fs::path dir(synth_out);
      fs::create_directories(dir);
      syn::Counts a;
      a.oos_test = 60;
      auto main_corpus = syn::generate(syn::default_intents(), a, synth_seed);
      auto far_corpus = syn::generate(syn::far_intents(), syn::Counts{}, lacl::derive_seed({synth_seed, 2}));
      lacl::save_corpus(main_corpus.corpus, dir / "intents8.json");
      lacl::save_corpus(far_corpus.corpus, dir / "intents_far.json");
      std::ofstream(dir / "paraphrases.json") << json(main_corpus.sidecar).dump(1) << "\n";
      for (const char* f : {"intents8.json", "intents_far.json", "paraphrases.json"}) manifest.output(dir / f);
      return 0;
    });
  }
  return 0;
}
