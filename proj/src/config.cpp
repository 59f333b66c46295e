#include "phosc/config.hpp"

#include <cmath>
#include <sstream>

#include "phosc/error.hpp"

namespace phosc::embedded {
extern const char* const kConfigSchemaText;
}

namespace phosc::config {

namespace {

using nlohmann::json;

bool has_type(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
  if (type == "number") return v.is_number();
  if (type == "null") return v.is_null();
  return false;
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void check(const json& v, const json& s, const std::string& path) {
    if (s.contains("$ref")) {
      check(v, resolve(s.at("$ref").get<std::string>()), path);
      return;
    }
    if (s.contains("type") && !has_type(v, s.at("type").get<std::string>())) {
      fail(path, "expected " + s.at("type").get<std::string>() + ", got " + v.type_name());
      return;
    }
    if (s.contains("enum")) {
      bool found = false;
      for (const auto& e : s.at("enum")) found = found || e == v;
      if (!found) fail(path, "value " + v.dump() + " is not one of " + s.at("enum").dump());
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (s.contains("minimum") && x < s.at("minimum").get<double>()) fail(path, "must be >= " + s.at("minimum").dump());
      if (s.contains("maximum") && x > s.at("maximum").get<double>()) fail(path, "must be <= " + s.at("maximum").dump());
      if (s.contains("exclusiveMinimum") && x <= s.at("exclusiveMinimum").get<double>()) {
        fail(path, "must be > " + s.at("exclusiveMinimum").dump());
      }
      if (s.contains("exclusiveMaximum") && x >= s.at("exclusiveMaximum").get<double>()) {
        fail(path, "must be < " + s.at("exclusiveMaximum").dump());
      }
    }
    if (v.is_object()) {
      const json empty = json::object();
      const json& props = s.contains("properties") ? s.at("properties") : empty;
      if (s.contains("required"))
        for (const auto& key : s.at("required"))
          if (!v.contains(key.get<std::string>())) fail(path, "missing required key '" + key.get<std::string>() + "'");
      for (const auto& [key, child] : v.items()) {
        if (props.contains(key)) {
          check(child, props.at(key), path + "/" + key);
        } else if (s.value("additionalProperties", true) == false) {
          fail(path + "/" + key, "unknown key");
        }
      }
    }
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s.at("minItems").get<std::size_t>()) {
        fail(path, "needs at least " + s.at("minItems").dump() + " items");
      }
      if (s.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i) check(v[i], s.at("items"), path + "/" + std::to_string(i));
    }
  }

  std::vector<std::string> problems;

 private:
  const json& resolve(const std::string& ref) {
    if (ref.rfind("#/", 0) != 0) throw Error(ErrorCode::kConfigError, "unsupported schema reference " + ref);
    return root_.at(json::json_pointer(ref.substr(1)));
  }
  void fail(const std::string& path, const std::string& message) {
    problems.push_back((path.empty() ? "/" : path) + ": " + message);
  }

  const json& root_;
};

model::TrainConfig train_from_json(const json& j, model::TrainConfig c, std::uint64_t seed) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.lr_reduction_factor = j.value("lr_reduction_factor", c.lr_reduction_factor);
  c.lambda_c = j.value("lambda_c", c.lambda_c);
  c.lambda_s = j.value("lambda_s", c.lambda_s);
  c.seed = seed;
  c.validate();
  return c;
}

std::filesystem::path resolve_path(const std::filesystem::path& workdir, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : workdir / path;
}

}  // namespace

std::vector<std::string> validate(const nlohmann::json& doc, const nlohmann::json& schema) {
  Validator v(schema);
  v.check(doc, schema, "");
  return v.problems;
}

const nlohmann::json& experiment_schema() {
  static const nlohmann::json schema = nlohmann::json::parse(embedded::kConfigSchemaText);
  return schema;
}

const model::TrainConfig& ExperimentConfig::train_for(const std::string& variant) const {
  if (variant == "phoscnet") return train_phoscnet;
  if (variant == "ctc") return train_ctc;
  if (variant == "ctc_p") return train_ctc_p;
  throw Error(ErrorCode::kConfigError, "unknown model variant '" + variant + "'");
}

ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& workdir) {
  const auto problems = validate(j, experiment_schema());
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "config does not match the schema:";
    for (const auto& p : problems) msg << "\n  " << p;
    throw Error(ErrorCode::kConfigError, msg.str());
  }
  ExperimentConfig c;
  c.seed = j.value("seed", c.seed);

  const json paths = j.value("paths", json::object());
  c.paths.corpus = resolve_path(workdir, paths.value("corpus", "corpus"));
  c.paths.models = resolve_path(workdir, paths.value("models", "models"));
  c.paths.reports = resolve_path(workdir, paths.value("reports", "reports"));
  if (paths.contains("word_list")) c.paths.word_list = resolve_path(workdir, paths.at("word_list"));
  if (paths.contains("shape_table")) c.paths.shape_table = resolve_path(workdir, paths.at("shape_table"));

  const json corpus = j.value("corpus", json::object());
  auto& cc = c.corpus;
  cc.n_seen = corpus.value("n_seen", cc.n_seen);
  cc.n_unseen = corpus.value("n_unseen", cc.n_unseen);
  cc.styles = corpus.value("styles", cc.styles);
  cc.train_per_word = corpus.value("train_per_word", cc.train_per_word);
  cc.val_per_word = corpus.value("val_per_word", cc.val_per_word);
  cc.test_seen_per_word = corpus.value("test_seen_per_word", cc.test_seen_per_word);
  cc.test_unseen_per_word = corpus.value("test_unseen_per_word", cc.test_unseen_per_word);
  cc.max_shear_degrees = corpus.value("max_shear_degrees", cc.max_shear_degrees);
  cc.max_noise_sigma = corpus.value("max_noise_sigma", cc.max_noise_sigma);
  cc.seed = c.seed;

  const json sig = j.value("signature", json::object());
  if (sig.contains("phos_levels")) c.phos.levels = sig.at("phos_levels").get<std::vector<int>>();
  if (sig.contains("phoc_levels")) c.phoc.levels = sig.at("phoc_levels").get<std::vector<int>>();
  c.phoc.occupancy_threshold = sig.value("phoc_occupancy_threshold", c.phoc.occupancy_threshold);
  if (!c.paths.shape_table.empty()) c.phos.shape_table = load_shape_table(c.paths.shape_table);
  c.phos.validate();
  c.phoc.validate();

  c.arch = model::arch_from_json(j.value("arch", json::object()));

  const json train = j.value("train", json::object());
  c.train_phoscnet = train_from_json(train.value("phoscnet", json::object()), {}, c.seed);
  c.train_ctc = train_from_json(train.value("ctc", json::object()), {}, c.seed);
  c.train_ctc_p = train_from_json(train.value("ctc_p", json::object()), {}, c.seed);

  const json dec = j.value("decoder", json::object());
  c.decoder.kind = dec.value("kind", "best_path") == "beam" ? model::DecoderKind::kBeam : model::DecoderKind::kBestPath;
  c.decoder.beam_width = dec.value("beam_width", c.decoder.beam_width);
  return c;
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::kConfigError, "override '" + assignment + "' must look like key.path=value");
  }
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw Error(ErrorCode::kConfigError, "override key '" + key + "' has an empty segment");
    if (!node->is_object()) throw Error(ErrorCode::kConfigError, "override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

}  // namespace phosc::config
