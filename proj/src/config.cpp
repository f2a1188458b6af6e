#include "mensp/config.hpp"

#include <set>

#include "json.hpp"
#include "mensp/errors.hpp"
#include "mensp/util.hpp"

namespace mensp {

namespace {

using nlohmann::json;

/// Typed field access over one JSON object with unknown-key detection.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  ~Block() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!known_.count(key)) throw ConfigError("unknown key '" + child(key) + "'");
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    known_.insert(key);
    return j_.at(key);
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void get(const std::string& key, int& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() != static_cast<int>(v.get<long long>()))
      throw ConfigError(child(key) + " must be an integer");
    out = v.get<int>();
  }

  void get(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError(child(key) + " must be a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(child(key) + " must be a number");
    out = v.get<double>();
  }

  void get(const std::string& key, bool& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(child(key) + " must be true or false");
    out = v.get<bool>();
  }

  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(child(key) + " must be a string");
    out = v.get<std::string>();
  }

  std::optional<std::string> get_string(const std::string& key) {
    if (!has(key)) return std::nullopt;
    std::string s;
    get(key, s);
    return s;
  }

 private:
  std::string where() const { return path_.empty() ? "the configuration document" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
T choose(const std::string& path, const std::string& value, std::initializer_list<std::pair<const char*, T>> options) {
  std::string names;
  for (const auto& [name, v] : options) {
    if (value == name) return v;
    names += (names.empty() ? "" : ", ") + std::string(name);
  }
  throw ConfigError(path + " must be one of " + names + " (got '" + value + "')");
}

void parse_backend(const json& j, const std::filesystem::path& base, BackendConfig& out) {
  Block b(j, "backend");
  std::string kind = "mock";
  b.get("kind", kind);
  out.kind = choose<BackendKind>("backend.kind", kind,
                                 {{"mock", BackendKind::mock}, {"pretrained-checkpoint", BackendKind::pretrained_checkpoint}});
  if (auto p = b.get_string("path")) out.checkpoint = resolve(base, *p);
  b.get("max_sequence_length", out.max_sequence_length);
  b.get("embedding_dim", out.embedding_dim);
  std::string pooling = "pooled", device = "cpu";
  b.get("pooling", pooling);
  b.get("device", device);
  out.pooling = choose<Pooling>("backend.pooling", pooling, {{"pooled", Pooling::pooled}, {"mean", Pooling::mean}});
  out.device = choose<Device>("backend.device", device, {{"cpu", Device::cpu}, {"accelerator", Device::accelerator}});
  if (b.has("mock")) {
    Block m(b.raw("mock"), "backend.mock");
    MockSpec spec;
    m.get("nsp_rule", spec.nsp_rule);
    m.get("embed_rule", spec.embed_rule);
    spec.fail_on = m.get_string("fail_on");
    out.mock = spec;
  } else if (out.kind == BackendKind::mock) {
    out.mock = MockSpec{};
  }
}

void parse_finetune(const json& j, FineTuneConfig& out) {
  Block b(j, "finetune");
  b.get("epochs", out.epochs);
  b.get("learning_rate", out.learning_rate);
  b.get("batch_size", out.batch_size);
  b.get("seed", out.seed);
  std::string scope = "head-only";
  b.get("trainable_scope", scope);
  out.scope = choose<TrainableScope>("finetune.trainable_scope", scope,
                                     {{"head-only", TrainableScope::head_only}, {"full", TrainableScope::full}});
}

void parse_tree(Block& parent, const std::string& key, TreeParams& out) {
  if (!parent.has(key)) return;
  Block b(parent.raw(key), parent.child(key));
  b.get("max_depth", out.max_depth);
  b.get("min_samples_split", out.min_samples_split);
  b.get("min_samples_leaf", out.min_samples_leaf);
}

void parse_baselines(const json& j, BaselineParams& out) {
  Block b(j, "baselines");
  if (b.has("random_forest")) {
    Block f(b.raw("random_forest"), "baselines.random_forest");
    f.get("n_trees", out.random_forest.n_trees);
    parse_tree(f, "tree", out.random_forest.tree);
  }
  if (b.has("gbdt")) {
    Block g(b.raw("gbdt"), "baselines.gbdt");
    g.get("n_rounds", out.gbdt.n_rounds);
    g.get("learning_rate", out.gbdt.learning_rate);
    parse_tree(g, "tree", out.gbdt.tree);
  }
  parse_tree(b, "decision_tree", out.decision_tree);
  if (b.has("naive_bayes")) {
    Block n(b.raw("naive_bayes"), "baselines.naive_bayes");
    n.get("alpha", out.naive_bayes.alpha);
  }
  if (b.has("logistic_regression")) {
    Block l(b.raw("logistic_regression"), "baselines.logistic_regression");
    l.get("iterations", out.logistic_regression.iterations);
    l.get("learning_rate", out.logistic_regression.learning_rate);
    l.get("l2", out.logistic_regression.l2);
  }
  if (b.has("mlp")) {
    Block m(b.raw("mlp"), "baselines.mlp");
    m.get("hidden_units", out.mlp.hidden_units);
    m.get("epochs", out.mlp.epochs);
    m.get("learning_rate", out.mlp.learning_rate);
    m.get("l2", out.mlp.l2);
    m.get("batch_size", out.mlp.batch_size);
  }
  if (b.has("svm")) {
    Block s(b.raw("svm"), "baselines.svm");
    s.get("c", out.svm.c);
    s.get("max_iterations", out.svm.max_iterations);
    s.get("tolerance", out.svm.tolerance);
  }
}

template <typename T, typename F>
std::vector<T> parse_array(const json& j, const std::string& path, F&& each) {
  if (!j.is_array()) throw ConfigError(path + " must be an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(each(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void parse_experiment(const json& j, const std::filesystem::path& base, ExperimentConfig& out) {
  Block b(j, "experiment");
  if (b.has("items")) {
    out.items = parse_array<ItemFiles>(b.raw("items"), "experiment.items", [&](const json& v, const std::string& p) {
      Block item(v, p);
      ItemFiles f;
      const auto responses = item.get_string("responses");
      const auto exemplars = item.get_string("exemplars");
      if (!responses || !exemplars) throw ConfigError(p + " needs both 'responses' and 'exemplars'");
      f.responses = resolve(base, *responses);
      f.exemplars = resolve(base, *exemplars);
      if (item.has("manual_samples")) {
        const auto& ms = item.raw("manual_samples");
        if (!ms.is_object()) throw ConfigError(p + ".manual_samples must be an object keyed by shot count");
        for (const auto& [shot, path] : ms.items()) {
          int k = 0;
          try {
            std::size_t used = 0;
            k = std::stoi(shot, &used);
            if (used != shot.size() || k <= 0) throw std::invalid_argument(shot);
          } catch (const std::exception&) {
            throw ConfigError(p + ".manual_samples key '" + shot + "' is not a positive shot count");
          }
          if (!path.is_string()) throw ConfigError(p + ".manual_samples." + shot + " must be a path string");
          f.manual_samples[k] = resolve(base, path.get<std::string>());
        }
      }
      return f;
    });
  }
  if (b.has("models"))
    out.models = parse_array<ModelKind>(b.raw("models"), "experiment.models", [](const json& v, const std::string& p) {
      if (!v.is_string()) throw ConfigError(p + " must be a model name");
      return parse_model_name(v.get<std::string>());
    });
  if (b.has("shots"))
    out.shots = parse_array<int>(b.raw("shots"), "experiment.shots", [](const json& v, const std::string& p) {
      if (!v.is_number_integer() || v.get<int>() < 0) throw ConfigError(p + " must be a non-negative integer");
      return v.get<int>();
    });
  if (b.has("strategies"))
    out.strategies = parse_array<StrategyKind>(
        b.raw("strategies"), "experiment.strategies", [](const json& v, const std::string& p) {
          if (!v.is_string()) throw ConfigError(p + " must be a strategy name");
          return choose<StrategyKind>(p, v.get<std::string>(),
                                      {{"random", StrategyKind::random}, {"manual-file", StrategyKind::manual_file}});
        });
  if (b.has("seeds"))
    out.seeds = parse_array<std::uint64_t>(b.raw("seeds"), "experiment.seeds", [](const json& v, const std::string& p) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ConfigError(p + " must be a non-negative integer");
      return v.get<std::uint64_t>();
    });
  std::string f1 = "weighted";
  b.get("f1", f1);
  out.f1 = choose<F1Kind>("experiment.f1", f1, {{"weighted", F1Kind::weighted}, {"macro", F1Kind::macro}});
}

void parse_paths(const json& j, const std::filesystem::path& base, PathsBlock& out) {
  Block b(j, "paths");
  if (auto p = b.get_string("output_dir")) out.output_dir = resolve(base, *p);
  if (auto p = b.get_string("exemplars")) out.exemplars = resolve(base, *p);
  if (auto p = b.get_string("responses")) out.responses = resolve(base, *p);
  if (auto p = b.get_string("samples")) out.samples = resolve(base, *p);
}

GlobalConfig from_document(json doc, const std::filesystem::path& base, const ConfigOverrides& overrides) {
  if (!doc.is_object()) throw ConfigError("the configuration document must be a JSON object");
  if (overrides.seed) {
    doc["experiment"]["seeds"] = json::array({*overrides.seed});
    doc["finetune"]["seed"] = *overrides.seed;
  }
  if (overrides.include_zero_in_matching)
    doc["scoring"]["include_zero_in_matching"] = *overrides.include_zero_in_matching;

  GlobalConfig c;
  c.backend.mock = MockSpec{};
  {
    Block root(doc, "");
    if (root.has("backend")) {
      c.backend.mock.reset();
      parse_backend(root.raw("backend"), base, c.backend);
    }
    if (root.has("scoring")) {
      Block s(root.raw("scoring"), "scoring");
      s.get("include_zero_in_matching", c.scoring.include_zero_in_matching);
    }
    if (root.has("finetune")) parse_finetune(root.raw("finetune"), c.finetune);
    if (root.has("baselines")) parse_baselines(root.raw("baselines"), c.baselines);
    if (root.has("experiment")) parse_experiment(root.raw("experiment"), base, c.experiment);
    if (root.has("paths")) parse_paths(root.raw("paths"), base, c.paths);
  }
  c.backend.validate();
  c.finetune.validate();
  c.digest = hex64(fnv1a64(doc.dump()));
  return c;
}

}  // namespace

ExperimentConfig GlobalConfig::experiment_config() const {
  ExperimentConfig e = experiment;
  e.backend = backend;
  e.finetune = finetune;
  e.baselines = baselines;
  e.include_zero_in_matching = scoring.include_zero_in_matching;
  return e;
}

GlobalConfig parse_global_config(const std::string& text, const std::filesystem::path& base_dir,
                                 const ConfigOverrides& overrides, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": malformed JSON: " + e.what());
  }
  return from_document(std::move(doc), base_dir, overrides);
}

GlobalConfig load_global_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  try {
    return parse_global_config(text, path.parent_path().empty() ? "." : path.parent_path(), overrides,
                               path.string());
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(path.string(), 0) == 0) throw;
    throw ConfigError(path.string() + ": " + what);
  }
}

GlobalConfig default_global_config(const ConfigOverrides& overrides) {
  return from_document(json::object(), ".", overrides);
}

}  // namespace mensp
