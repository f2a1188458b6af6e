#include "mensp/eval/experiment.hpp"

#include <algorithm>
#include <set>

#include "mensp/baselines/tfidf.hpp"
#include "mensp/errors.hpp"
#include "mensp/eval/metrics.hpp"
#include "mensp/scorer.hpp"
#include "mensp/util.hpp"

namespace mensp {

std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::random: return "Random";
    case ModelKind::rfdt: return "RFDT";
    case ModelKind::gbdt: return "GBDT";
    case ModelKind::vote: return "Vote";
    case ModelKind::mensp: return "MeNSP";
  }
  return "?";
}

ModelKind parse_model_name(const std::string& name) {
  for (auto k : {ModelKind::random, ModelKind::rfdt, ModelKind::gbdt, ModelKind::vote, ModelKind::mensp})
    if (model_name(k) == name) return k;
  throw ConfigError("unknown model '" + name + "' (expected Random, RFDT, GBDT, Vote or MeNSP)");
}

void ExperimentConfig::validate() const {
  if (items.empty()) throw ConfigError("experiment.items is empty");
  if (seeds.empty()) throw ConfigError("experiment.seeds is empty; at least one seed is required");
  if (models.empty()) throw ConfigError("experiment.models is empty");
  if (shots.empty()) throw ConfigError("experiment.shots is empty");
  for (int s : shots)
    if (s < 0) throw ConfigError("experiment.shots must be non-negative");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("experiment.seeds contains duplicates");
  const bool few_shot = std::any_of(shots.begin(), shots.end(), [](int s) { return s > 0; });
  if (few_shot && strategies.empty()) throw ConfigError("experiment.strategies is empty");
  const bool manual = std::find(strategies.begin(), strategies.end(), StrategyKind::manual_file) != strategies.end();
  if (manual && few_shot) {
    for (std::size_t i = 0; i < items.size(); ++i)
      for (int s : shots)
        if (s > 0 && !items[i].manual_samples.count(s))
          throw ConfigError("experiment.items[" + std::to_string(i) + "].manual_samples has no file for shot " +
                            std::to_string(s) + " (required by the manual-file strategy)");
  }
  backend.validate();
  finetune.validate();
  if (experiment_cells(*this).empty())
    throw ConfigError("no valid (shot, model) combination: shot 0 runs only Random and MeNSP, and the trained "
                      "baselines need a shot count above 0");
}

std::vector<CellKey> experiment_cells(const ExperimentConfig& config) {
  std::set<int> shots(config.shots.begin(), config.shots.end());
  std::set<ModelKind> models(config.models.begin(), config.models.end());
  std::set<StrategyKind> strategies(config.strategies.begin(), config.strategies.end());
  std::vector<CellKey> cells;
  for (int shot : shots) {
    if (shot == 0) {
      for (auto m : models)
        if (m == ModelKind::random || m == ModelKind::mensp) cells.push_back({0, std::nullopt, m});
      continue;
    }
    for (auto st : strategies)
      for (auto m : models)
        if (m != ModelKind::random) cells.push_back({shot, st, m});
  }
  return cells;
}

std::size_t MetricReport::failed_cells() const {
  std::size_t n = 0;
  for (const auto& [item, cells] : results)
    for (const auto& c : cells) n += c.ok() ? 0 : 1;
  return n;
}

std::size_t MetricReport::total_cells() const {
  std::size_t n = 0;
  for (const auto& [item, cells] : results) n += cells.size();
  return n;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return fnv1a64(tag, seed ^ 0x9e3779b97f4a7c15ULL);
}

std::vector<GradeLevel> golds(const std::vector<LabeledResponse>& rs) {
  std::vector<GradeLevel> out;
  for (const auto& r : rs) out.push_back(r.gold);
  return out;
}

std::vector<std::string> texts(const std::vector<LabeledResponse>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.text);
  return out;
}

std::vector<GradeLevel> score_all(const MenspScorer& scorer, const std::vector<LabeledResponse>& rs) {
  const auto outcomes = batch_score(scorer, texts(rs));
  std::vector<GradeLevel> out;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].ok())
      throw BackendError("scoring response '" + rs[i].response_id + "' failed: " + outcomes[i].error);
    out.push_back(outcomes[i].result->grade);
  }
  return out;
}

/// Per-item state shared by the cells of one seed.
struct ItemRun {
  const ExperimentConfig& config;
  const ExemplarSet& exemplars;
  const std::vector<LabeledResponse>& pool;
  const ItemFiles& files;
  std::shared_ptr<const Encoder> backend;
  std::optional<MenspScorer>& zero_shot;
  std::map<std::string, GradeLevel>& zero_shot_cache;

  std::vector<LabeledResponse> samples(int shot, StrategyKind strategy, std::uint64_t seed) const {
    SampleStrategy st;
    st.kind = strategy;
    if (strategy == StrategyKind::manual_file) st.manual_path = files.manual_samples.at(shot);
    return select_samples(pool, shot, st, seed, exemplars.item());
  }

  std::vector<GradeLevel> predict(const CellKey& cell, const std::vector<LabeledResponse>& test,
                                  std::uint64_t seed) const {
    const int g = exemplars.num_levels();
    if (cell.model == ModelKind::random) return random_score(derive_seed(seed, "random"), test.size(), g);

    if (cell.model == ModelKind::mensp && cell.shot == 0) {
      if (!backend) throw BackendError("no backend available for MeNSP");
      if (!zero_shot) zero_shot.emplace(backend, exemplars, ScorerOptions{config.include_zero_in_matching});
      std::vector<LabeledResponse> missing;
      for (const auto& r : test)
        if (!zero_shot_cache.count(r.response_id)) missing.push_back(r);
      const auto grades = score_all(*zero_shot, missing);
      for (std::size_t i = 0; i < missing.size(); ++i) zero_shot_cache[missing[i].response_id] = grades[i];
      std::vector<GradeLevel> out;
      for (const auto& r : test) out.push_back(zero_shot_cache.at(r.response_id));
      return out;
    }

    const auto train = samples(cell.shot, *cell.strategy, seed);
    if (cell.model == ModelKind::mensp) {
      if (!backend) throw BackendError("no backend available for MeNSP");
      FineTuneConfig ft = config.finetune;
      ft.seed = derive_seed(seed, "finetune");
      auto tuned = finetune(backend, build_pairs(train, exemplars), ft);
      MenspScorer scorer(tuned.backend, exemplars, ScorerOptions{config.include_zero_in_matching});
      return score_all(scorer, test);
    }

    const auto tfidf = tfidf_fit(texts(train));
    const auto x_train = tfidf_matrix(tfidf, texts(train));
    const auto x_test = tfidf_matrix(tfidf, texts(test));
    const BaselineKind kind = cell.model == ModelKind::rfdt   ? BaselineKind::rfdt
                              : cell.model == ModelKind::gbdt ? BaselineKind::gbdt
                                                              : BaselineKind::vote;
    const auto model = train_baseline(kind, x_train, golds(train), derive_seed(seed, "baseline"), config.baselines);
    return predict_baseline(model, x_test);
  }
};

void finish(CellStats& c) {
  if (!c.ok()) return;
  const auto k = mean_std(c.kappas);
  const auto f = mean_std(c.f1s);
  c.kappa_mean = k.mean;
  c.kappa_std = k.std;
  c.f1_mean = f.mean;
  c.f1_std = f.std;
}

}  // namespace

MetricReport run_experiment(const ExperimentConfig& config, std::shared_ptr<const Encoder> backend) {
  config.validate();
  MetricReport report;
  report.rows = experiment_cells(config);
  report.seeds = config.seeds;
  report.f1 = config.f1;

  const bool needs_backend = std::any_of(report.rows.begin(), report.rows.end(),
                                         [](const CellKey& c) { return c.model == ModelKind::mensp; });
  std::optional<std::string> backend_error;
  if (!backend && needs_backend) {
    try {
      backend = make_encoder(config.backend);
    } catch (const Error& e) {
      backend_error = e.what();
    }
  }
  report.backend_identifier = backend ? backend->capabilities().identifier : "none";

  const int kmax = *std::max_element(config.shots.begin(), config.shots.end());
  for (std::size_t item_index = 0; item_index < config.items.size(); ++item_index) {
    const auto& files = config.items[item_index];
    std::vector<CellStats> cells(report.rows.size());
    std::string item_id = "item" + std::to_string(item_index + 1);
    auto fail_all = [&](const std::string& msg) {
      for (auto& c : cells)
        if (!c.error) c.error = msg;
    };

    std::optional<ExemplarSet> exemplars;
    std::vector<LabeledResponse> pool;
    try {
      exemplars = load_exemplars(files.exemplars);
      item_id = exemplars->item_id();
      pool = load_responses(files.responses, exemplars->item());
    } catch (const Error& e) {
      fail_all(e.what());
    }
    if (std::find(report.items.begin(), report.items.end(), item_id) != report.items.end())
      throw ConfigError("item '" + item_id + "' appears twice in experiment.items");

    if (exemplars) {
      std::optional<MenspScorer> zero_shot;
      std::map<std::string, GradeLevel> zero_cache;
      ItemRun run{config, *exemplars, pool, files, backend, zero_shot, zero_cache};
      for (auto seed : config.seeds) {
        DatasetSplit split;
        try {
          split = few_shot_split(pool, kmax, seed);
          if (split.test.empty()) throw DataError("no test responses remain after the split");
        } catch (const Error& e) {
          fail_all(e.what());
          break;
        }
        const auto human = golds(split.test);
        for (std::size_t r = 0; r < report.rows.size(); ++r) {
          auto& cell = cells[r];
          if (cell.error) continue;
          const auto& key = report.rows[r];
          if (key.model == ModelKind::mensp && backend_error) {
            cell.error = *backend_error;
            continue;
          }
          try {
            const auto machine = run.predict(key, split.test, seed);
            cell.kappas.push_back(cohens_kappa(human, machine));
            cell.f1s.push_back(config.f1 == F1Kind::weighted ? f1_weighted(human, machine)
                                                             : f1_macro(human, machine));
          } catch (const Error& e) {
            cell.error = e.what();
          } catch (const std::exception& e) {
            cell.error = std::string("internal error: ") + e.what();
          }
        }
      }
    }
    for (auto& c : cells) finish(c);
    report.items.push_back(item_id);
    report.results.emplace(item_id, std::move(cells));
  }
  return report;
}

}  // namespace mensp
