// Acceptance report: one PASS/FAIL line per criterion.
//
//   acceptance [--group fast|e2e|all] [--known-failure N]...
//
// "fast" covers criteria 1-7, 9 and 10 (seconds); "e2e" runs the desk-scale
// experiment of criterion 8 (minutes). The exit status is non-zero when a
// criterion fails, unless it was declared with --known-failure; such lines
// still print FAIL.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "phosc/cli.hpp"
#include "phosc/ctc.hpp"
#include "phosc/gradsuite.hpp"
#include "phosc/metrics.hpp"
#include "phosc/model.hpp"
#include "phosc/net/checkpoint.hpp"
#include "phosc/net/gradcheck.hpp"
#include "phosc/rng.hpp"
#include "phosc/signature.hpp"

#ifndef PHOSC_SOURCE_DIR
#error "PHOSC_SOURCE_DIR must point at the source tree"
#endif

using namespace phosc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

ctc::ProbMatrix random_probs(Rng& rng, std::size_t T, std::size_t C) {
  std::vector<double> v(T * C);
  for (std::size_t t = 0; t < T; ++t) {
    double sum = 0;
    for (std::size_t k = 0; k < C; ++k) sum += (v[t * C + k] = rng.uniform(0.01, 1.0));
    for (std::size_t k = 0; k < C; ++k) v[t * C + k] /= sum;
  }
  return ctc::ProbMatrix(T, C, std::move(v));
}

// Every string over symbols of length 0..max_len.
std::vector<std::string> all_strings(const std::string& symbols, std::size_t max_len) {
  std::vector<std::string> out{""};
  for (std::size_t begin = 0, len = 0; len < max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i)
      for (char c : symbols) out.push_back(out[i] + c);
    begin = end;
  }
  return out;
}

const std::string kSymbols = "abc";

// ---------------------------------------------------------------- 1

Outcome ctc_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  std::size_t comparisons = 0;
  for (std::size_t sigma = 1; sigma <= 3; ++sigma) {
    const ctc::CtcAlphabet alphabet(kSymbols.substr(0, sigma));
    const auto labels = all_strings(alphabet.symbols(), 3);
    for (std::size_t T = 1; T <= 5; ++T) {
      for (int trial = 0; trial < 100; ++trial) {
        const auto p = random_probs(rng, T, alphabet.num_classes());
        const auto posterior = ctc::brute_force_label_posterior(p, alphabet, 3);
        for (const auto& label : labels) {
          const auto it = posterior.find(label);
          const double oracle = it == posterior.end() ? 0.0 : it->second;
          const auto lp = ctc::ctc_log_prob(p, label, alphabet);
          const double dp = lp.feasible ? std::exp(lp.value) : 0.0;
          worst = std::max(worst, std::abs(dp - oracle));
          ++comparisons;
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-9 && secs < 60.0, std::to_string(comparisons) + " label probabilities, max |diff| " +
                                            fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 2

Outcome ctc_gradient() {
  Rng rng(202);
  const double eps = 1e-5;
  double worst = 0.0;
  const int instances = 120;
  std::size_t coords = 0;
  for (int n = 0; n < instances; ++n) {
    const ctc::CtcAlphabet alphabet(kSymbols.substr(0, 1 + rng.below(3)));
    std::string label;
    const std::size_t len = 1 + rng.below(3);
    for (std::size_t i = 0; i < len; ++i) label += alphabet.symbols()[rng.below(alphabet.size())];
    const std::size_t T = ctc::required_frames(alphabet.encode(label)) + rng.below(4);
    const std::size_t C = alphabet.num_classes();
    std::vector<double> logits(T * C);
    for (auto& x : logits) x = rng.normal() * 2.0;
    const auto analytic = ctc::ctc_loss_and_grad(logits, T, label, alphabet).grad_wrt_logits;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      auto plus = logits, minus = logits;
      plus[i] += eps;
      minus[i] -= eps;
      const double numeric = (ctc::ctc_loss_and_grad(plus, T, label, alphabet).neg_log_prob -
                              ctc::ctc_loss_and_grad(minus, T, label, alphabet).neg_log_prob) /
                             (2 * eps);
      worst = std::max(worst, net::relative_error(analytic[i], numeric, net::GradCheckOptions{}.abs_floor));
      ++coords;
    }
  }
  return {worst <= 1e-4, std::to_string(instances) + " instances, " + std::to_string(coords) +
                             " coordinates, max relative error " + fmt(worst)};
}

// ---------------------------------------------------------------- 3

Outcome layer_gradients() {
  bool ok = true;
  std::string detail;
  for (const auto& c : gradsuite::standard_suite(303, 200)) {
    const bool pass = c.report.max_rel_error <= 1e-4 && c.report.checked >= 200;
    ok = ok && pass;
    detail += (detail.empty() ? "" : ", ") + c.name + " " + fmt(c.report.max_rel_error, 2) + "/" +
              std::to_string(c.report.checked) + (pass ? "" : " (FAIL)");
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 4

std::vector<std::string> segments(const std::string& w, int h) {
  std::vector<std::string> s(static_cast<std::size_t>(h));
  for (std::size_t i = 0; i < w.size(); ++i) s[static_cast<std::size_t>(segment_of(i, w.size(), h))] += w[i];
  return s;
}

Outcome encoder() {
  const PhosConfig cfg;
  const bool length = phos_encode("listen", cfg).size() == 165 && cfg.length() == 165;
  using V = std::vector<std::string>;
  const bool fig = segments("listen", 2) == V{"lis", "ten"} && segments("listen", 3) == V{"li", "st", "en"} &&
                   segments("silent", 2) == V{"sil", "ent"} && segments("silent", 3) == V{"si", "le", "nt"} &&
                   segments("listen", 1) == V{"listen"};
  Rng rng(404);
  int equal = 0;
  const int pairs = 1000;
  for (int n = 0; n < pairs; ++n) {
    std::string w;
    const std::size_t len = 1 + rng.below(12);
    for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + rng.below(26));
    std::string a = w;
    rng.shuffle(a.begin(), a.end());
    const auto x = phos_encode(w, cfg), y = phos_encode(a, cfg);
    equal += std::equal(x.begin(), x.begin() + kNumShapes, y.begin());
  }
  return {length && fig && equal == pairs, std::string("length ") + (length ? "165" : "wrong") +
                                               ", listen/silent segments " + (fig ? "match" : "differ") +
                                               ", anagram level-1 equal " + std::to_string(equal) + "/" +
                                               std::to_string(pairs)};
}

// ---------------------------------------------------------------- 5

Outcome collapse_conformance() {
  const ctc::CtcAlphabet ab("AB");
  const bool examples = ctc::collapse("AAAB", ab) == "AB" && ctc::collapse("AA-AB", ab) == "AAB";
  Rng rng(505);
  const std::string symbols = "AB-";
  int violations = 0;
  const int paths = 10000;
  std::string example;
  for (int n = 0; n < paths; ++n) {
    std::string path;
    const std::size_t len = 1 + rng.below(10);
    for (std::size_t i = 0; i < len; ++i) path += symbols[rng.below(3)];
    const auto once = ctc::collapse(path, ab);
    if (ctc::collapse(once, ab) != once) {
      if (example.empty()) example = path + " -> " + once + " -> " + ctc::collapse(once, ab);
      ++violations;
    }
  }
  std::string detail = std::string("examples ") + (examples ? "match" : "differ") + ", idempotence violated on " +
                       std::to_string(violations) + "/" + std::to_string(paths) + " paths";
  if (!example.empty()) {
    detail += " (e.g. " + example +
              "; the literal property contradicts the required AA-AB example, see README)";
  }
  return {examples && violations == 0, detail};
}

// ---------------------------------------------------------------- 6

std::size_t recursive_edit_distance(const std::string& a, const std::string& b, std::size_t i, std::size_t j,
                                    std::map<std::pair<std::size_t, std::size_t>, std::size_t>& memo) {
  if (i == 0) return j;
  if (j == 0) return i;
  const auto key = std::make_pair(i, j);
  if (const auto it = memo.find(key); it != memo.end()) return it->second;
  const std::size_t best =
      std::min({recursive_edit_distance(a, b, i - 1, j, memo) + 1, recursive_edit_distance(a, b, i, j - 1, memo) + 1,
                recursive_edit_distance(a, b, i - 1, j - 1, memo) + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return memo[key] = best;
}

Outcome metric_conformance() {
  const double h = metrics::harmonic_mean(0.75, 0.96);
  const bool h_ok = std::round(h * 100) == 84;
  const auto strings = all_strings(kSymbols, 6);
  std::size_t mismatches = 0, pairs = 0;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  for (const auto& a : strings) {
    for (const auto& b : strings) {
      memo.clear();
      mismatches += metrics::edit_distance(a, b) != recursive_edit_distance(a, b, a.size(), b.size(), memo);
      ++pairs;
    }
  }
  return {h_ok && mismatches == 0, "h(.75, .96) = " + fmt(h) + ", edit distance mismatches " +
                                       std::to_string(mismatches) + "/" + std::to_string(pairs) + " pairs"};
}

// ---------------------------------------------------------------- 7

Outcome beam_saturation() {
  Rng rng(707);
  int agree = 0;
  const int trials = 100;
  for (int n = 0; n < trials; ++n) {
    const ctc::CtcAlphabet alphabet(kSymbols.substr(0, 1 + rng.below(2)));
    const std::size_t T = 1 + rng.below(4), C = alphabet.num_classes();
    std::size_t width = 1;
    for (std::size_t t = 0; t < T; ++t) width *= C;
    const auto p = random_probs(rng, T, C);
    const auto posterior = ctc::brute_force_label_posterior(p, alphabet, T);
    const auto best = std::max_element(posterior.begin(), posterior.end(),
                                       [](const auto& x, const auto& y) { return x.second < y.second; });
    agree += ctc::beam_search_decode(p, alphabet, width).best == best->first;
  }
  return {agree == trials, std::to_string(agree) + "/" + std::to_string(trials) + " match the exhaustive argmax"};
}

// ---------------------------------------------------------------- CLI helpers

int cli(const fs::path& workdir, std::vector<std::string> args, std::string* out = nullptr) {
  std::vector<std::string> full = {"phosc", "--workdir", workdir.string(), "--config", "experiment.json"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << "phosc " << args.front() << " failed (" << code << "): " << e.str() << "\n";
  return code;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool run_pipeline(const fs::path& dir, const std::string& protocol) {
  return cli(dir, {"synth"}) == 0 && cli(dir, {"train", "phoscnet"}) == 0 &&
         cli(dir, {"train", "ctc_p", "--source", "models/phoscnet.ckpt"}) == 0 && cli(dir, {"train", "ctc"}) == 0 &&
         cli(dir, {"eval", "--checkpoint", "models/phoscnet.ckpt", "--checkpoint", "models/ctc_p.ckpt",
                   "--checkpoint", "models/ctc.ckpt", "--protocol", protocol}) == 0;
}

// ---------------------------------------------------------------- 8

Outcome desk_scale() {
  const auto dir = fresh_dir("phosc_acceptance_e2e");
  fs::copy_file(fs::path(PHOSC_SOURCE_DIR) / "config" / "mfu_mini.json", dir / "experiment.json");
  const auto start = std::chrono::steady_clock::now();
  if (!run_pipeline(dir, "zsl")) return {false, "pipeline failed"};
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  const auto report = json::parse(slurp(dir / "reports" / "report.json"));
  std::map<std::string, json> by_model;
  for (const auto& r : report["reports"]) by_model[r["model"]] = r;
  const double net_seen = by_model["phoscnet"]["A_s"], net_unseen = by_model["phoscnet"]["A_u"];
  const double p_seen = by_model["ctc_p"]["A_s"], p_unseen = by_model["ctc_p"]["A_u"];
  const double s_unseen = by_model["ctc"]["A_u"];
  const double cer = by_model["ctc_p"]["cer_seen"]["mean"];
  const bool a = net_seen >= 0.90 && net_unseen >= 0.20;
  const bool b = p_seen >= 0.85 && (p_unseen > s_unseen || std::abs(p_unseen - s_unseen) <= 0.02);
  const bool c = cer <= 0.10;
  const bool t = minutes < 30.0;
  return {a && b && c && t, "PhoscNet seen " + fmt(net_seen, 3) + " unseen ZSL " + fmt(net_unseen, 3) +
                                "; CTC_P seen " + fmt(p_seen, 3) + " unseen " + fmt(p_unseen, 3) + " vs scratch " +
                                fmt(s_unseen, 3) + "; CTC_P seen CER " + fmt(cer, 3) + "; " + fmt(minutes, 3) +
                                " min"};
}

// ---------------------------------------------------------------- 9

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

Outcome determinism() {
  // The full command sequence on a reduced experiment, twice from scratch.
  json cfg = json::parse(slurp(fs::path(PHOSC_SOURCE_DIR) / "config" / "mfu_mini.json"));
  cfg["corpus"] = {{"n_seen", 8},         {"n_unseen", 4},           {"train_per_word", 2},
                   {"val_per_word", 1},   {"test_seen_per_word", 1}, {"test_unseen_per_word", 2}};
  for (const char* v : {"phoscnet", "ctc", "ctc_p"}) cfg["train"][v]["max_epochs"] = 2;
  std::vector<std::map<std::string, std::string>> runs;
  for (int round = 0; round < 2; ++round) {
    const auto dir = fresh_dir("phosc_acceptance_det" + std::to_string(round));
    std::ofstream(dir / "experiment.json") << cfg.dump(2);
    if (!run_pipeline(dir, "gzsl")) return {false, "pipeline failed"};
    runs.push_back(snapshot(dir));
  }
  std::size_t differing = 0, checkpoints = 0;
  for (const auto& [name, bytes] : runs[0]) {
    const auto it = runs[1].find(name);
    differing += it == runs[1].end() || it->second != bytes;
    checkpoints += name.ends_with(".ckpt");
  }
  differing += runs[1].size() != runs[0].size();
  return {differing == 0 && checkpoints == 3 && runs[0].count("reports/report.json") &&
              runs[0].count("corpus/manifest.tsv"),
          std::to_string(runs[0].size()) + " files (manifest, images, 3 checkpoints, logs, reports), " +
              std::to_string(differing) + " differ"};
}

// ---------------------------------------------------------------- 10

Outcome checkpoint_audit() {
  const auto dir = fresh_dir("phosc_acceptance_ckpt");
  model::PhoscNet<float> net(model::default_arch());
  net.init(1010);
  net::save_checkpoint(dir / "net.ckpt", model::checkpoint_meta(net), net.params());
  const auto loaded = net::load_checkpoint(dir / "net.ckpt");
  const bool bytes_equal =
      net::serialize_checkpoint(loaded.meta, loaded.params) == slurp(dir / "net.ckpt");
  const auto restored = model::load_phoscnet(loaded);
  bool params_equal = restored.params().size() == net.params().size();
  for (std::size_t i = 0; params_equal && i < net.params().size(); ++i) {
    const std::span<const float> a = net.params()[i].span(), b = restored.params()[i].span();
    params_equal = a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
  }
  const auto image = model::image_tensor<float>(synth::render_word("audit", 0));
  const bool same_prediction = net.predict_signature(image) == restored.predict_signature(image);

  model::PhoscCtc<float> ctc(model::default_arch());
  ctc.init(1011);
  model::transfer_conv_weights(loaded, ctc);
  std::size_t transferred = 0, mismatched = 0;
  for (std::size_t i = 0; i < ctc.params().size(); ++i) {
    const auto& name = ctc.params().name(i);
    if (!name.starts_with("backbone.")) continue;
    ++transferred;
    const std::span<const float> a = ctc.params()[i].span(), b = net.params()[net.params().index(name)].span();
    mismatched += a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size_bytes()) != 0;
  }
  const bool ok = bytes_equal && params_equal && same_prediction && transferred > 0 && mismatched == 0;
  return {ok, std::string("re-serialized bytes ") + (bytes_equal ? "equal" : "differ") + ", parameters " +
                  (params_equal ? "bitwise equal" : "differ") + ", predictions " +
                  (same_prediction ? "identical" : "differ") + ", " + std::to_string(transferred) +
                  " backbone tensors transferred, " + std::to_string(mismatched) + " mismatched"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance report"};
  std::string group = "all";
  std::vector<int> known;
  app.add_option("--group", group)->check(CLI::IsMember({"fast", "e2e", "all"}));
  app.add_option("--known-failure", known, "Criterion expected to fail; reported but not fatal");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    bool fast;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "CTC oracle equivalence", true, ctc_oracle},
      {2, "CTC gradient check", true, ctc_gradient},
      {3, "Layer gradient checks", true, layer_gradients},
      {4, "Encoder conformance", true, encoder},
      {5, "Collapse conformance", true, collapse_conformance},
      {6, "Metric conformance", true, metric_conformance},
      {7, "Beam search exactness at saturation", true, beam_saturation},
      {8, "Desk-scale end-to-end", false, desk_scale},
      {9, "Determinism", true, determinism},
      {10, "Checkpoint round-trip and transfer audit", true, checkpoint_audit},
  };
  const std::set<int> expected(known.begin(), known.end());
  int unexpected = 0;
  for (const auto& c : criteria) {
    if (group != "all" && c.fast != (group == "fast")) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool tolerated = !o.pass && expected.count(c.id);
    unexpected += !o.pass && !tolerated;
    std::cout << "criterion " << std::setw(2) << c.id << " " << (o.pass ? "PASS" : "FAIL") << "  " << c.name
              << ": " << o.detail << (tolerated ? " [known failure]" : "") << std::endl;
  }
  return unexpected == 0 ? 0 : 1;
}
