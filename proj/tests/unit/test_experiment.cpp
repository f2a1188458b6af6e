#include "doctest.h"
#include "helpers.hpp"
#include "mensp/encoder/mock.hpp"
#include "mensp/errors.hpp"
#include "mensp/eval/experiment.hpp"
#include "mensp/eval/report.hpp"

using namespace mensp;

namespace {

const char* kWords[] = {"gas", "box", "spread", "particles", "corner", "move", "air", "smell", "fill", "random"};

// Tagged responses "g<level> ..." so the oracle encoder can recover the grade.
ItemFiles tagged_item(const std::string& name, int per_level, const std::string& poison = "") {
  const auto dir = testing::scratch_dir("exp_" + name);
  std::vector<LabeledResponse> rs;
  Rng rng(per_level);
  for (int i = 0; i < per_level; ++i)
    for (int g = 0; g < 3; ++g) {
      std::string text = "g" + std::to_string(g);
      for (int w = 0; w < 6; ++w) text += std::string(" ") + kWords[rng.uniform_below(10)];
      if (!poison.empty() && i < 5 && g == 1) text += " " + poison;
      rs.push_back({name + "-" + std::to_string(g) + "-" + std::to_string(i), name, text, GradeLevel{g}});
    }
  testing::write(dir / "responses.jsonl", serialize_responses(rs));
  testing::write(dir / "exemplars.json",
                 serialize_exemplars(ExemplarSet::create(
                     name, {{0, "g0 gas sinks down"}, {1, "g1 gas spreads out"}, {2, "g2 particles move randomly"}})));
  return {dir / "responses.jsonl", dir / "exemplars.json", {}};
}

const CellStats& cell(const MetricReport& r, const std::string& item, int shot, ModelKind model) {
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    if (r.rows[i].shot == shot && r.rows[i].model == model) return r.results.at(item)[i];
  throw std::runtime_error("no such cell");
}

}  // namespace

TEST_CASE("cell layout follows the shot rules") {
  ExperimentConfig c;
  c.items = {ItemFiles{}};
  const auto cells = experiment_cells(c);
  CHECK(cells.size() == 2 + 4 + 4);
  CHECK(cells[0] == CellKey{0, std::nullopt, ModelKind::random});
  CHECK(cells[1] == CellKey{0, std::nullopt, ModelKind::mensp});
  CHECK(cells[2] == CellKey{1, StrategyKind::random, ModelKind::rfdt});
  CHECK(cells.back() == CellKey{3, StrategyKind::random, ModelKind::mensp});

  c.models = {ModelKind::rfdt};
  c.shots = {0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.shots = {1};
  c.seeds = {};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.seeds = {1};
  c.strategies = {StrategyKind::manual_file};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_model_name("GBDT") == ModelKind::gbdt);
  CHECK_THROWS_AS(parse_model_name("gbdt"), ConfigError);
}

TEST_CASE("random-only experiment centers on zero") {
  ExperimentConfig c;
  c.items = {tagged_item("rnd", 100)};
  c.models = {ModelKind::random};
  c.shots = {0};
  const auto r = run_experiment(c);
  REQUIRE(r.rows.size() == 1);
  const auto& s = r.results.at("rnd")[0];
  REQUIRE(s.ok());
  CHECK(s.kappas.size() == 5);
  CHECK(std::abs(s.kappa_mean) <= 0.05);
  CHECK(s.kappa_std > 0.0);
  CHECK(r.backend_identifier == "none");
}

TEST_CASE("single seed gives zero spread") {
  ExperimentConfig c;
  c.items = {tagged_item("one", 10)};
  c.models = {ModelKind::random};
  c.shots = {0};
  c.seeds = {3};
  const auto s = run_experiment(c).results.at("one")[0];
  CHECK(s.kappa_std == 0.0);
  CHECK(s.f1_std == 0.0);
}

TEST_CASE("oracle backend scores perfectly") {
  ExperimentConfig c;
  c.items = {tagged_item("orc", 30)};
  c.models = {ModelKind::mensp, ModelKind::random};
  c.shots = {0};
  const auto r = run_experiment(c, testing::oracle_encoder());
  const auto& s = cell(r, "orc", 0, ModelKind::mensp);
  REQUIRE(s.ok());
  CHECK(s.kappa_mean == 1.0);
  CHECK(s.f1_mean == 1.0);
  CHECK(s.kappa_std == 0.0);
  CHECK(r.backend_identifier == "function");
}

TEST_CASE("full grid with mock backend is deterministic") {
  ExperimentConfig c;
  c.items = {tagged_item("det", 8)};
  c.backend.mock = MockSpec{};
  c.seeds = {0, 1};
  const auto a = run_experiment(c), b = run_experiment(c);
  const auto csv = render_report(a, ReportFormat::csv);
  CHECK(csv == render_report(b, ReportFormat::csv));
  // Fine-tuning a mock is unsupported, so only the few-shot MeNSP cells fail.
  CHECK(a.failed_cells() == 2);
  CHECK(a.total_cells() == 10);
  CHECK_FALSE(cell(a, "det", 1, ModelKind::mensp).ok());
  CHECK(cell(a, "det", 1, ModelKind::mensp).error->find("cannot be fine-tuned") != std::string::npos);
  CHECK(cell(a, "det", 0, ModelKind::mensp).ok());
  CHECK(cell(a, "det", 3, ModelKind::gbdt).ok());
}

TEST_CASE("few-shot cells with a trainable backend") {
  ExperimentConfig c;
  const auto data = testing::source_dir() / "data" / "gas_spread";
  c.items = {ItemFiles{data / "responses.jsonl", data / "exemplars.json", {{1, data / "manual_1shot.jsonl"}}}};
  c.models = {ModelKind::mensp, ModelKind::vote};
  c.shots = {0, 1};
  c.strategies = {StrategyKind::random, StrategyKind::manual_file};
  c.seeds = {0, 1};
  c.backend.kind = BackendKind::pretrained_checkpoint;
  c.backend.checkpoint = testing::tiny_bert_dir();
  c.backend.max_sequence_length = 64;
  c.finetune.epochs = 2;
  c.finetune.learning_rate = 1e-3;
  const auto a = run_experiment(c);
  CHECK(a.failed_cells() == 0);
  CHECK(a.rows.size() == 5);
  CHECK(render_report(a, ReportFormat::csv) == render_report(run_experiment(c), ReportFormat::csv));
}

TEST_CASE("per-cell failures do not stop other cells") {
  ExperimentConfig c;
  c.items = {tagged_item("bad", 10, "boom"), tagged_item("good", 10)};
  c.backend.mock = MockSpec{"jaccard", "token-hash", std::string("boom")};
  c.models = {ModelKind::random, ModelKind::mensp, ModelKind::rfdt};
  c.shots = {0, 1};
  c.seeds = {0};
  const auto r = run_experiment(c);
  CHECK(cell(r, "bad", 0, ModelKind::random).ok());
  CHECK(cell(r, "bad", 1, ModelKind::rfdt).ok());
  CHECK(cell(r, "good", 0, ModelKind::mensp).ok());
  REQUIRE_FALSE(cell(r, "bad", 0, ModelKind::mensp).ok());
  CHECK(cell(r, "bad", 0, ModelKind::mensp).error->find("boom") != std::string::npos);
  // Few-shot MeNSP fails on both items because the mock cannot be fine-tuned.
  CHECK(r.failed_cells() == 3);

  c.items.push_back(ItemFiles{"/missing/r.jsonl", "/missing/e.json", {}});
  const auto r2 = run_experiment(c);
  CHECK(r2.items.size() == 3);
  for (const auto& s : r2.results.at("item3")) CHECK_FALSE(s.ok());
}

TEST_CASE("backend construction failure fails only MeNSP cells") {
  ExperimentConfig c;
  c.items = {tagged_item("nb", 6)};
  c.models = {ModelKind::random, ModelKind::mensp};
  c.shots = {0};
  c.seeds = {0};
  c.backend.kind = BackendKind::pretrained_checkpoint;
  c.backend.checkpoint = "/missing/checkpoint";
  const auto r = run_experiment(c);
  CHECK(cell(r, "nb", 0, ModelKind::random).ok());
  CHECK_FALSE(cell(r, "nb", 0, ModelKind::mensp).ok());
}
