#include "phosc/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "phosc/config.hpp"
#include "phosc/error.hpp"
#include "phosc/gradsuite.hpp"
#include "phosc/matcher.hpp"
#include "phosc/metrics.hpp"
#include "phosc/model.hpp"

namespace phosc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bad invocation: reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string workdir = ".";
  std::string config;
  std::vector<std::string> overrides;
};

fs::path in_workdir(const Common& c, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : fs::path(c.workdir) / path;
}

config::ExperimentConfig load_config(const Common& c) {
  json j = json::object();
  if (!c.config.empty()) {
    const fs::path path = in_workdir(c, c.config);
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path.string());
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
    }
  }
  // Precedence: file < PHOSC_SEED < --set flags.
  if (const char* env = std::getenv("PHOSC_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      j["seed"] = seed;
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfigError, std::string("PHOSC_SEED must be a non-negative integer, got '") + env + "'");
    }
  }
  for (const auto& o : c.overrides) config::apply_override(j, o);
  return config::parse_experiment(j, c.workdir);
}

std::vector<std::string> word_list(const config::ExperimentConfig& cfg) {
  return cfg.paths.word_list.empty() ? synth::default_word_list() : synth::load_word_list(cfg.paths.word_list);
}

synth::SplitManifest read_corpus(const config::ExperimentConfig& cfg) {
  const auto path = cfg.paths.corpus / "manifest.tsv";
  if (!fs::exists(path)) throw Error(ErrorCode::kIoError, "no manifest at " + path.string() + " (run synth first)");
  return synth::read_manifest(path);
}

// Distinct init streams per variant keep the models independent.
std::uint64_t init_seed(const config::ExperimentConfig& cfg, const std::string& variant) {
  return mix_seed(cfg.seed, variant == "phoscnet" ? 1 : variant == "ctc" ? 2 : 3);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Common& common, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(common);
  const auto manifest = synth::build_corpus(word_list(cfg), cfg.corpus, cfg.paths.corpus);
  err << "synth: " << manifest.rows.size() << " images\n";
  out << (cfg.paths.corpus / "manifest.tsv").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- encode

int cmd_encode(const Common& common, const std::string& words_path, const std::string& mode, std::ostream& out) {
  const auto cfg = load_config(common);
  std::vector<std::string> words;
  {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (words_path != "-") {
      file.open(in_workdir(common, words_path));
      if (!file) throw UsageError("cannot open word list " + words_path);
      in = &file;
    }
    std::string line;
    while (std::getline(*in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) words.push_back(line);
    }
  }
  std::vector<AttributeSignature> sigs;
  sigs.reserve(words.size());
  for (const auto& w : words) sigs.push_back(phosc_encode(w, cfg.phos, cfg.phoc));
  const SignatureMode m = mode == "phos" ? SignatureMode::kPhos : mode == "phoc" ? SignatureMode::kPhoc : SignatureMode::kPhosc;
  write_signature_tsv(out, sigs, m);
  return kExitOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const Common& common, const std::string& variant, const std::string& source, const std::string& out_path,
              std::ostream& out, std::ostream& err) {
  if (variant == "ctc_p" && source.empty()) throw UsageError("train ctc_p needs --source <phoscnet checkpoint>");
  if (variant != "ctc_p" && !source.empty()) throw UsageError("--source only applies to ctc_p");
  const auto cfg = load_config(common);
  const auto manifest = read_corpus(cfg);
  const auto train = model::load_samples(manifest, synth::Partition::kTrain, cfg.paths.corpus);
  const auto val = model::load_samples(manifest, synth::Partition::kVal, cfg.paths.corpus);
  const auto& tcfg = cfg.train_for(variant);

  const fs::path ckpt = out_path.empty() ? cfg.paths.models / (variant + ".ckpt") : in_workdir(common, out_path);
  fs::path log_path = ckpt;
  log_path.replace_extension(".log.jsonl");
  fs::create_directories(ckpt.parent_path().empty() ? fs::path(".") : ckpt.parent_path());
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw Error(ErrorCode::kIoError, "cannot write " + log_path.string());
  auto progress = [&](const model::EpochLog& e) {
    err << variant << " epoch " << e.epoch << " loss " << e.train_loss << " val " << e.val_metric << " lr " << e.lr
        << "\n";
  };

  model::TrainResult result;
  if (variant == "phoscnet") {
    model::PhoscNet<float> net(cfg.arch, cfg.phos, cfg.phoc);
    net.init(init_seed(cfg, variant));
    result = model::train_phoscnet(net, train, val, tcfg, &log, progress);
  } else {
    model::PhoscCtc<float> net(cfg.arch);
    net.init(init_seed(cfg, variant));
    if (variant == "ctc_p") {
      const fs::path src = in_workdir(common, source);
      if (!fs::exists(src)) throw UsageError("source checkpoint " + src.string() + " does not exist");
      model::transfer_conv_weights(net::load_checkpoint(src), net);
    }
    result = model::train_ctc(net, variant, train, val, tcfg, &log, progress);
  }
  result.best.meta["seed"] = cfg.seed;
  net::save_checkpoint(ckpt, result.best.meta, result.best.params);
  err << variant << ": best epoch " << result.best_epoch << " val " << result.best_val << "\n";
  out << ckpt.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

metrics::EvalReport evaluate(const net::Checkpoint& ck, const std::string& protocol,
                             const config::ExperimentConfig& cfg, const matcher::Lexicon& lexicon,
                             const std::vector<model::Sample>& seen, const std::vector<model::Sample>& unseen) {
  metrics::EvalReport r;
  r.model = ck.meta.value("model", "");
  r.protocol = protocol;
  r.n_seen = seen.size();
  r.n_unseen = unseen.size();
  auto truths = [](const std::vector<model::Sample>& s) {
    std::vector<std::string> t;
    for (const auto& x : s) t.push_back(x.label);
    return t;
  };
  const auto t_seen = truths(seen), t_unseen = truths(unseen);
  std::vector<std::string> p_seen(seen.size()), p_unseen(unseen.size());

  if (r.model == "phoscnet") {
    const auto net = model::load_phoscnet(ck);
    const bool gzsl = protocol == "gzsl";
    auto predict = [&](const model::Sample& s, bool is_seen) {
      const auto v = net.predict_signature(s.image);
      if (gzsl) return matcher::gzsl_predict(v, lexicon);
      return is_seen ? matcher::nearest(v, lexicon.seen()).word : matcher::zsl_predict(v, lexicon);
    };
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t i = 0; i < seen.size(); ++i) p_seen[i] = predict(seen[i], true);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t i = 0; i < unseen.size(); ++i) p_unseen[i] = predict(unseen[i], false);
  } else {
    // Open vocabulary: the decoded string must equal the label exactly, so
    // the protocol does not change the prediction.
    const auto net = model::load_phoscctc(ck);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t i = 0; i < seen.size(); ++i) p_seen[i] = net.predict_string(seen[i].image, cfg.decoder);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t i = 0; i < unseen.size(); ++i) p_unseen[i] = net.predict_string(unseen[i].image, cfg.decoder);
    r.cer_seen = metrics::cer_detail(p_seen, t_seen);
    r.cer_unseen = metrics::cer_detail(p_unseen, t_unseen);
    r.length_confusion = metrics::length_confusion(p_unseen, t_unseen);
  }
  r.a_s = metrics::top1_accuracy(p_seen, t_seen);
  r.a_u = metrics::top1_accuracy(p_unseen, t_unseen);
  r.h = metrics::harmonic_mean(r.a_u, r.a_s);
  return r;
}

int cmd_eval(const Common& common, const std::vector<std::string>& checkpoints, const std::string& protocol,
             const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(common);
  const auto manifest = read_corpus(cfg);
  for (auto p : {synth::Partition::kTrain, synth::Partition::kTestSeen, synth::Partition::kTestUnseen}) {
    if (manifest.partition(p).empty()) {
      throw Error(ErrorCode::kMissingPartition, "manifest has no " + synth::partition_name(p) + " rows");
    }
  }
  const matcher::Lexicon lexicon(manifest.labels(synth::Partition::kTrain),
                                 manifest.labels(synth::Partition::kTestUnseen), cfg.phos, cfg.phoc);
  const auto seen = model::load_samples(manifest, synth::Partition::kTestSeen, cfg.paths.corpus);
  const auto unseen = model::load_samples(manifest, synth::Partition::kTestUnseen, cfg.paths.corpus);

  std::vector<metrics::EvalReport> reports;
  for (const auto& c : checkpoints) {
    const fs::path path = in_workdir(common, c);
    if (!fs::exists(path)) throw UsageError("checkpoint " + path.string() + " does not exist");
    reports.push_back(evaluate(net::load_checkpoint(path), protocol, cfg, lexicon, seen, unseen));
    const auto& r = reports.back();
    err << r.model << ": A_u " << r.a_u << " A_s " << r.a_s << " h " << r.h << "\n";
  }
  json doc{{"protocol", protocol}, {"reports", json::array()}};
  for (const auto& r : reports) doc["reports"].push_back(metrics::to_json(r));
  const fs::path dir = out_dir.empty() ? cfg.paths.reports : in_workdir(common, out_dir);
  write_text(dir / "report.json", doc.dump(2) + "\n");
  std::ostringstream table;
  metrics::write_table_tsv(table, reports);
  write_text(dir / "table.tsv", table.str());
  out << (dir / "report.json").string() << "\n" << (dir / "table.tsv").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- decode

int cmd_decode(const Common& common, const std::string& checkpoint, const std::string& image, const std::string& probs,
               std::optional<std::size_t> beam, bool verbose, std::ostream& out) {
  if (image.empty() == probs.empty()) throw UsageError("decode needs exactly one of --image or --probs");
  ctc::ProbMatrix matrix;
  std::optional<ctc::CtcAlphabet> alphabet;
  if (!probs.empty()) {
    const fs::path path = in_workdir(common, probs);
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path.string());
    std::string symbols;
    matrix = ctc::read_prob_matrix(in, &symbols);
    alphabet.emplace(symbols);
  } else {
    if (checkpoint.empty()) throw UsageError("decoding an image needs --checkpoint");
    const fs::path ck = in_workdir(common, checkpoint), img = in_workdir(common, image);
    if (!fs::exists(ck)) throw UsageError("checkpoint " + ck.string() + " does not exist");
    if (!fs::exists(img)) throw UsageError("image " + img.string() + " does not exist");
    const auto net = model::load_phoscctc(net::load_checkpoint(ck));
    matrix = net.probabilities(model::image_tensor<float>(synth::read_pgm(img)));
    alphabet.emplace(net.alphabet());
  }
  if (!beam) {
    out << ctc::best_path_decode(matrix, *alphabet) << "\n";
    return kExitOk;
  }
  const auto result = ctc::beam_search_decode(matrix, *alphabet, *beam);
  out << result.best << "\n";
  if (verbose) {
    for (const auto& b : result.beams) out << "  " << std::setprecision(10) << b.log_prob << "\t" << b.prefix << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(std::uint64_t seed, std::size_t samples, std::ostream& out) {
  bool ok = true;
  for (const auto& c : gradsuite::standard_suite(seed, samples)) {
    ok = ok && c.report.passed;
    out << std::left << std::setw(16) << c.name << (c.report.passed ? " PASS" : " FAIL") << "  max_rel_error "
        << std::scientific << std::setprecision(3) << c.report.max_rel_error << std::defaultfloat << "  checked "
        << c.report.checked << "\n";
    if (!c.report.passed) out << c.report.summary() << "\n";
  }
  return ok ? kExitOk : kExitFailure;
}

bool is_usage_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kParseError:
    case ErrorCode::kUnknownCharacter:
    case ErrorCode::kInvalidSymbol:
    case ErrorCode::kEmptyWord:
    case ErrorCode::kWordTooLong:
    case ErrorCode::kMissingCharacter:
      return true;
    default:
      return false;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attribute-signature word recognition: corpus synthesis, training and evaluation", "phosc"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--workdir", common.workdir, "Directory all relative paths are resolved against");
  app.add_option("--config", common.config, "Experiment config (JSON)");
  app.add_option("--set", common.overrides, "Override a config key, e.g. train.ctc.batch_size=4")->take_all();

  auto* synth_cmd = app.add_subcommand("synth", "Render the word-image corpus and its manifest");

  auto* encode_cmd = app.add_subcommand("encode", "Write attribute signatures of a word list as TSV");
  std::string words_path, mode = "phosc";
  encode_cmd->add_option("--words", words_path, "Word list, one per line ('-' for stdin)")->required();
  encode_cmd->add_option("--mode", mode, "Signature part")->check(CLI::IsMember({"phos", "phoc", "phosc"}));

  auto* train_cmd = app.add_subcommand("train", "Train one model variant");
  std::string variant, source, train_out;
  train_cmd->add_option("variant", variant, "phoscnet, ctc or ctc_p")
      ->required()
      ->check(CLI::IsMember({"phoscnet", "ctc", "ctc_p"}));
  train_cmd->add_option("--source", source, "PhoscNet checkpoint whose conv weights seed ctc_p");
  train_cmd->add_option("--out", train_out, "Checkpoint path (default <models>/<variant>.ckpt)");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate checkpoints on the test partitions");
  std::vector<std::string> checkpoints;
  std::string protocol = "gzsl", report_dir;
  eval_cmd->add_option("--checkpoint", checkpoints, "Checkpoint to evaluate (repeatable)")->required();
  eval_cmd->add_option("--protocol", protocol, "zsl or gzsl")->check(CLI::IsMember({"zsl", "gzsl"}));
  eval_cmd->add_option("--out-dir", report_dir, "Report directory (default <reports>)");

  auto* decode_cmd = app.add_subcommand("decode", "Decode an image or a probability matrix");
  std::string decode_ck, image, probs;
  std::size_t beam_width = 0;
  bool best_path = false, verbose = false;
  decode_cmd->add_option("--checkpoint", decode_ck, "CTC checkpoint (for --image)");
  decode_cmd->add_option("--image", image, "PGM word image");
  decode_cmd->add_option("--probs", probs, "Probability matrix TSV");
  auto* beam_opt = decode_cmd->add_option("--beam", beam_width, "Prefix beam search with this width")
                       ->check(CLI::PositiveNumber);
  decode_cmd->add_flag("--bestpath", best_path, "Best-path decoding (default)")->excludes(beam_opt);
  decode_cmd->add_flag("--verbose", verbose, "Print every beam with its log probability");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference checks of every layer and both losses");
  std::uint64_t grad_seed = 1;
  std::size_t grad_samples = 200;
  grad_cmd->add_option("--seed", grad_seed, "Seed of the probe points");
  grad_cmd->add_option("--samples", grad_samples, "Coordinates per check")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(common, out, err);
    if (encode_cmd->parsed()) return cmd_encode(common, words_path, mode, out);
    if (train_cmd->parsed()) return cmd_train(common, variant, source, train_out, out, err);
    if (eval_cmd->parsed()) return cmd_eval(common, checkpoints, protocol, report_dir, out, err);
    if (decode_cmd->parsed()) {
      std::optional<std::size_t> beam;
      if (beam_opt->count() > 0) beam = beam_width;
      return cmd_decode(common, decode_ck, image, probs, beam, verbose, out);
    }
    if (grad_cmd->parsed()) return cmd_gradcheck(grad_seed, grad_samples, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_usage_code(e.code()) ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace phosc::cli
