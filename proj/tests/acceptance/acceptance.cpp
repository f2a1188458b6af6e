// One PASS/FAIL/SKIP line per acceptance criterion; exit status 1 on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

#include "../unit/helpers.hpp"
#include "mensp/baselines/baseline.hpp"
#include "mensp/cli.hpp"
#include "mensp/encoder/mock.hpp"
#include "mensp/eval/experiment.hpp"
#include "mensp/eval/metrics.hpp"
#include "mensp/eval/report.hpp"
#include "mensp/fewshot.hpp"
#include "mensp/scorer.hpp"

using namespace mensp;

namespace {

struct Outcome {
  enum Status { pass, fail, skip } status = pass;
  std::string detail;
};

Outcome fail(const std::string& why) { return {Outcome::fail, why}; }
Outcome skip(const std::string& why) { return {Outcome::skip, why}; }

std::vector<GradeLevel> random_labels(Rng& rng, std::size_t n, int G) {
  std::vector<GradeLevel> v(n);
  for (auto& x : v) x = GradeLevel{static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(G)))};
  return v;
}

// Brute-force reference: explicit marginals and per-class counts from the confusion matrix.
double oracle_kappa(const ConfusionCounts& cm) {
  const int G = cm.num_levels();
  double n = 0, diag = 0;
  std::vector<double> rows(static_cast<std::size_t>(G), 0), cols(static_cast<std::size_t>(G), 0);
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) {
      const double v = static_cast<double>(cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      n += v;
      rows[static_cast<std::size_t>(i)] += v;
      cols[static_cast<std::size_t>(j)] += v;
      if (i == j) diag += v;
    }
  double pe = 0;
  for (int c = 0; c < G; ++c) pe += rows[static_cast<std::size_t>(c)] / n * cols[static_cast<std::size_t>(c)] / n;
  if (pe == 1.0) return 1.0;
  return (diag / n - pe) / (1 - pe);
}

double oracle_f1_weighted(const ConfusionCounts& cm) {
  const int G = cm.num_levels();
  double total = 0, sum = 0;
  for (int c = 0; c < G; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    double row = 0, col = 0;
    for (int j = 0; j < G; ++j) {
      row += static_cast<double>(cm.counts[cc][static_cast<std::size_t>(j)]);
      col += static_cast<double>(cm.counts[static_cast<std::size_t>(j)][cc]);
    }
    const double tp = static_cast<double>(cm.counts[cc][cc]);
    // F1 = 2TP / (2TP + FP + FN), zero when the class never occurs on either side.
    const double f1 = row + col == 0 ? 0 : 2 * tp / (row + col);
    sum += f1 * row;
    total += row;
  }
  return sum / total;
}

Outcome metric_oracle() {
  Rng rng(1);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto h = random_labels(rng, 50, 3), m = random_labels(rng, 50, 3);
    const auto cm = ConfusionCounts::from(h, m, 3);
    worst = std::max(worst, std::abs(cohens_kappa(h, m) - oracle_kappa(cm)));
    worst = std::max(worst, std::abs(f1_weighted(h, m) - oracle_f1_weighted(cm)));
  }
  std::ostringstream s;
  s << "max |delta| = " << worst << " over 1000 pairs";
  if (worst >= 1e-9) return fail(s.str());
  return {Outcome::pass, s.str()};
}

std::vector<GradeLevel> grades(std::initializer_list<int> v) {
  std::vector<GradeLevel> out;
  for (int x : v) out.push_back(GradeLevel{x});
  return out;
}

Outcome anchors() {
  const auto h = grades({0, 0, 1, 1, 2, 2}), m = grades({0, 1, 1, 1, 2, 0});
  const double k = cohens_kappa(h, m);
  if (k != 0.5) return fail("kappa = " + std::to_string(k));
  if (std::abs(oracle_kappa(ConfusionCounts::from(h, m)) - 0.5) > 1e-12) return fail("oracle kappa disagrees");
  const auto fh = grades({0, 0, 1}), fm = grades({0, 1, 1});
  const double f = f1_weighted(fh, fm);
  if (std::abs(f - 2.0 / 3.0) > 1e-9) return fail("weighted F1 = " + std::to_string(f));
  if (std::abs(oracle_f1_weighted(ConfusionCounts::from(fh, fm)) - 2.0 / 3.0) > 1e-9)
    return fail("oracle F1 disagrees");
  return {Outcome::pass, "kappa 0.5, weighted F1 2/3"};
}

double hand_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / (std::sqrt(na) * std::sqrt(nb));
}

Outcome threshold_exactness() {
  MockEncoder mock(MockSpec{"jaccard", "letter-count", std::nullopt}, 26, 512);
  Rng rng(3);
  double worst = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::map<int, std::string> texts;
    for (int g = 0; g < 3; ++g) {
      std::string t;
      for (std::uint64_t n = 1 + rng.uniform_below(40); n > 0; --n) t += static_cast<char>('a' + rng.uniform_below(26));
      texts[g] = t;
    }
    const auto ex = ExemplarSet::create("it", texts);
    const auto z0 = mock.embed(texts[0]).values, z1 = mock.embed(texts[1]).values, z2 = mock.embed(texts[2]).values;
    const double hand = (hand_cosine(z0, z2) + hand_cosine(z1, z2)) / 2;
    worst = std::max(worst, std::abs(compute_threshold(mock, ex) - hand));
  }
  if (worst >= 1e-12) return fail("max |delta| = " + std::to_string(worst));

  // A response embedded exactly like a non-perfect exemplar sits at cos = theta when both
  // non-perfect exemplars coincide.
  const std::vector<double> v{0.6, 0.8, 0.1};
  auto enc = std::make_shared<testing::FunctionEncoder>(
      [](std::string_view, std::string_view) { return 0.5; },
      [v](std::string_view t) { return t == "e2" ? std::vector<double>{1.0, 0.0, 0.0} : v; }, 3);
  MenspScorer scorer(enc, ExemplarSet::create("it", {{0, "e0"}, {1, "e1"}, {2, "e2"}}));
  if (scorer.cosine_to_perfect("response") != scorer.theta()) return fail("boundary construction is not exact");
  if (scorer.is_zero("response")) return fail("cosine equal to theta was zero-identified");
  if (scorer.score("response").stage != Stage::matched) return fail("boundary response was not matched");
  std::ostringstream s;
  s << "max |delta| = " << worst << "; boundary strict";
  return {Outcome::pass, s.str()};
}

Outcome oracle_pipeline() {
  const auto enc = testing::oracle_encoder();
  const auto ex = ExemplarSet::create("oracle", {{0, "g0 the gas sinks"}, {1, "g1 the gas spreads"},
                                                 {2, "g2 particles move randomly and spread"}});
  const MenspScorer scorer(enc, ex);
  std::vector<std::string> texts;
  std::vector<GradeLevel> gold;
  Rng rng(4);
  for (int i = 0; i < 90; ++i) {
    const int g = i % 3;
    texts.push_back("g" + std::to_string(g) + " response " + std::to_string(rng.uniform_below(1000)));
    gold.push_back(GradeLevel{g});
  }
  const auto outcomes = batch_score(scorer, texts);
  std::vector<GradeLevel> machine;
  for (const auto& o : outcomes) {
    if (!o.ok()) return fail("scoring failed: " + o.error);
    machine.push_back(o.result->grade);
  }
  const double k = cohens_kappa(gold, machine), f = f1_weighted(gold, machine);
  if (k != 1.0 || f != 1.0) return fail("kappa " + std::to_string(k) + ", F1 " + std::to_string(f));
  return {Outcome::pass, "kappa 1.0, F1 1.0 on 90 responses"};
}

Outcome random_calibration() {
  std::vector<GradeLevel> gold;
  for (int i = 0; i < 300; ++i) gold.push_back(GradeLevel{i % 3});
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) sum += cohens_kappa(gold, random_score(seed, gold.size(), 3));
  const double mean = sum / 200;
  std::ostringstream s;
  s << "mean kappa " << mean << " over 200 seeds";
  if (!(mean >= -0.05 && mean <= 0.05)) return fail(s.str());
  return {Outcome::pass, s.str()};
}

Outcome fewshot_combinatorics() {
  for (int k : {1, 3})
    for (int G : {2, 3, 4}) {
      std::map<int, std::string> texts;
      for (int g = 0; g < G; ++g) texts[g] = "exemplar " + std::to_string(g);
      const auto ex = ExemplarSet::create("it", texts);
      std::vector<LabeledResponse> pool;
      for (int g = 0; g < G; ++g)
        for (int i = 0; i < 6; ++i)
          pool.push_back({std::to_string(g) + "-" + std::to_string(i), "it", "r" + std::to_string(i), GradeLevel{g}});
      const auto a = select_samples(pool, k, SampleStrategy::random(), 99, ex.item());
      if (a != select_samples(pool, k, SampleStrategy::random(), 99, ex.item())) return fail("selection not reproducible");
      for (int g = 0; g < G; ++g) {
        const auto counts = level_counts(a);
        const auto it = counts.find(GradeLevel{g});
        if (it == counts.end() || it->second != k) return fail("wrong count per level");
      }
      const auto pairs = build_pairs(a, ex);
      int positives = 0;
      for (const auto& p : pairs) positives += p.label;
      if (pairs.size() != static_cast<std::size_t>(k * G * G) || positives != k * G)
        return fail("k=" + std::to_string(k) + ", G=" + std::to_string(G) + ": " + std::to_string(pairs.size()) +
                    " pairs, " + std::to_string(positives) + " positive");
    }
  return {Outcome::pass, "k in {1,3}, G in {2,3,4}"};
}

int cli(const std::vector<std::string>& args) {
  std::vector<std::string> full{"mensp"};
  full.insert(full.end(), args.begin(), args.end());
  std::ostringstream out, err;
  return run_cli(full, out, err);
}

Outcome determinism() {
  const auto dir = testing::scratch_dir("acceptance_determinism");
  const auto data = testing::source_dir() / "data" / "gas_spread";
  const std::string item = R"({"responses": ")" + (data / "responses.jsonl").string() + R"(", "exemplars": ")" +
                           (data / "exemplars.json").string() + R"(", "manual_samples": {"1": ")" +
                           (data / "manual_1shot.jsonl").string() + R"("}})";
  testing::write(dir / "mock.json", R"({"experiment": {"items": [)" + item + R"(], "shots": [0, 1, 3]}})");
  testing::write(dir / "toy.json", R"({"backend": {"kind": "pretrained-checkpoint", "path": ")" +
                                       testing::tiny_bert_dir().string() + R"(", "max_sequence_length": 64},
      "finetune": {"epochs": 2, "learning_rate": 0.001},
      "experiment": {"items": [)" + item + R"(], "models": ["MeNSP", "Vote"], "shots": [0, 1],
                     "strategies": ["random", "manual-file"], "seeds": [0, 1]}})");
  for (const std::string name : {"mock", "toy"}) {
    const auto cfg = (dir / (name + ".json")).string();
    const int a = cli({"evaluate", "--config", cfg, "--output", (dir / (name + "_a")).string()});
    const int b = cli({"evaluate", "--config", cfg, "--output", (dir / (name + "_b")).string()});
    if (a != kExitOk || b != kExitOk) return fail(name + " evaluate exited " + std::to_string(a) + "/" + std::to_string(b));
    const auto csv = read_text_file(dir / (name + "_a") / "report.csv");
    if (csv != read_text_file(dir / (name + "_b") / "report.csv")) return fail(name + " report.csv differs");
    if (name == "toy") {
      for (const auto& c : parse_report_csv(csv))
        if (c.shot > 0 && c.model == "MeNSP" && !c.error.empty()) return fail("few-shot MeNSP cell failed: " + c.error);
    }
  }
  return {Outcome::pass, "byte-identical report.csv (mock grid; toy trainable backend with few-shot cells)"};
}

Outcome report_fidelity() {
  if (format_percent_cell(0.303, 0.003) != "30.3±0.3") return fail(format_percent_cell(0.303, 0.003));
  MetricReport r;
  r.items = {"G4"};
  r.rows = {{0, std::nullopt, ModelKind::mensp}};
  CellStats c;
  c.kappas = {0.303};
  c.f1s = {0.5};
  c.kappa_mean = 0.303;
  c.kappa_std = 0.003;
  c.f1_mean = 0.5;
  r.results["G4"] = {c};
  if (render_report(r, ReportFormat::markdown).find("| 0 | - | MeNSP | 30.3±0.3 |") == std::string::npos)
    return fail("markdown row missing");
  return {Outcome::pass, "30.3±0.3"};
}

Outcome real_backend() {
  const char* path = std::getenv("MENSP_CHECKPOINT");
  if (!path || !*path) return skip("MENSP_CHECKPOINT not set");
  const auto data = testing::source_dir() / "data" / "gas_spread";
  ExperimentConfig c;
  c.items = {ItemFiles{data / "responses.jsonl", data / "exemplars.json", {}}};
  c.models = {ModelKind::random, ModelKind::mensp};
  c.shots = {0};
  c.backend.kind = BackendKind::pretrained_checkpoint;
  c.backend.checkpoint = path;
  const auto report = run_experiment(c);
  const auto& cells = report.results.begin()->second;
  const auto& random = cells[0];
  const auto& mensp = cells[1];
  if (!random.ok() || !mensp.ok()) return fail(mensp.error.value_or(random.error.value_or("cell failed")));
  std::ostringstream s;
  s << "MeNSP kappa " << mensp.kappa_mean << " vs Random " << random.kappa_mean;
  if (!(mensp.kappa_mean > random.kappa_mean && mensp.kappa_mean >= 0.3)) return fail(s.str());
  return {Outcome::pass, s.str()};
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
    double time_limit = 0;  // seconds; 0 = none
  };
  const std::vector<Criterion> criteria{
      {"metric oracle equivalence", metric_oracle, 10},
      {"hand-computed anchors", anchors},
      {"threshold exactness and strict boundary", threshold_exactness},
      {"oracle pipeline", oracle_pipeline, 5},
      {"random baseline calibration", random_calibration, 30},
      {"few-shot combinatorics", fewshot_combinatorics},
      {"evaluate determinism", determinism},
      {"report fidelity", report_fidelity},
      {"real-backend smoke test", real_backend, 300},
  };
  bool any_failed = false;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.status == Outcome::pass && criteria[i].time_limit > 0 && secs >= criteria[i].time_limit)
      o = fail("took longer than " + std::to_string(criteria[i].time_limit) + "s");
    const char* tag = o.status == Outcome::pass ? "PASS" : o.status == Outcome::fail ? "FAIL" : "SKIP";
    any_failed |= o.status == Outcome::fail;
    std::printf("%s %zu %s (%.2fs): %s\n", tag, i + 1, criteria[i].name.c_str(), secs, o.detail.c_str());
  }
  return any_failed ? 1 : 0;
}
