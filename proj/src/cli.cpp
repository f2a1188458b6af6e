#include "mensp/cli.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mensp/config.hpp"
#include "mensp/encoder/bert_backend.hpp"
#include "mensp/eval/report.hpp"
#include "mensp/util.hpp"

namespace mensp {

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;
};

void add_common(CLI::App* cmd, CommonArgs& common) {
  cmd->add_option("--config", common.config, "JSON configuration file");
  cmd->add_option("--seed", common.seed, "Seed overriding the configured seeds");
  cmd->add_option("--output", common.output, "Output path");
}

GlobalConfig load_config(const CommonArgs& common, const ConfigOverrides& overrides) {
  return common.config.empty() ? default_global_config(overrides) : load_global_config(common.config, overrides);
}

fs::path pick_path(const std::string& flag_value, const std::optional<fs::path>& configured, const char* what) {
  if (!flag_value.empty()) return flag_value;
  if (configured) return *configured;
  throw ConfigError(std::string("no ") + what + " given (flag or paths block)");
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return kExitConfig;
    case ErrorKind::data: return kExitData;
    case ErrorKind::backend: return kExitBackend;
  }
  return kExitBackend;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

struct ScoreArgs {
  std::string exemplars, responses;
  std::optional<bool> include_zero;
  unsigned threads = 0;
};

int cmd_score(const CommonArgs& common, const ScoreArgs& args, std::ostream& out, std::ostream& err) {
  ConfigOverrides ov;
  ov.include_zero_in_matching = args.include_zero;
  const auto cfg = load_config(common, ov);
  const auto exemplars = load_exemplars(pick_path(args.exemplars, cfg.paths.exemplars, "exemplar file"));
  const auto responses = load_responses(pick_path(args.responses, cfg.paths.responses, "response file"),
                                        exemplars.item());
  const MenspScorer scorer(make_encoder(cfg.backend), exemplars, cfg.scoring);

  std::vector<std::string> texts;
  for (const auto& r : responses) texts.push_back(r.text);
  const auto outcomes = batch_score(scorer, texts, args.threads);

  std::string lines;
  std::size_t failed = 0;
  std::optional<ErrorKind> first_error;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].ok()) {
      lines += score_result_json(*outcomes[i].result, responses[i].response_id) + "\n";
    } else {
      ++failed;
      if (!first_error) first_error = outcomes[i].error_kind;
      err << "response " << responses[i].response_id << ": " << outcomes[i].error << "\n";
      lines += score_error_json(outcomes[i], responses[i].response_id) + "\n";
    }
  }
  if (common.output.empty() || common.output == "-")
    out << lines;
  else
    write_file_atomic(common.output, lines);
  err << "scored " << outcomes.size() - failed << " of " << outcomes.size() << " responses (theta "
      << scorer.theta() << ")\n";
  if (failed == 0) return kExitOk;
  return failed == outcomes.size() ? exit_code(first_error.value_or(ErrorKind::backend)) : kExitPartial;
}

struct FinetuneArgs {
  std::string exemplars, samples, random_from, strategy;
  int k = 3;
};

int cmd_finetune(const CommonArgs& common, const FinetuneArgs& args, std::ostream& out, std::ostream&) {
  ConfigOverrides ov;
  ov.seed = common.seed;
  const auto cfg = load_config(common, ov);
  if (common.output.empty()) throw ConfigError("finetune needs --output for the adapted checkpoint directory");
  if (args.k <= 0) throw ConfigError("--k must be positive");

  StrategyKind kind;
  if (!args.strategy.empty()) {
    if (args.strategy == "random")
      kind = StrategyKind::random;
    else if (args.strategy == "manual-file")
      kind = StrategyKind::manual_file;
    else
      throw ConfigError("--strategy must be random or manual-file");
  } else {
    kind = args.samples.empty() ? StrategyKind::random : StrategyKind::manual_file;
  }
  if (!args.samples.empty() && !args.random_from.empty())
    throw ConfigError("give either --samples or --random-from, not both");
  if (kind == StrategyKind::manual_file && args.samples.empty() && !cfg.paths.samples)
    throw ConfigError("the manual-file strategy needs --samples");
  if (kind == StrategyKind::random && !args.samples.empty())
    throw ConfigError("--samples only applies to the manual-file strategy");

  const auto backend = make_encoder(cfg.backend);
  if (!backend->capabilities().trainable)
    throw UnsupportedOperation("backend '" + backend->capabilities().identifier + "' does not support fine-tuning");

  const auto exemplars = load_exemplars(pick_path(args.exemplars, cfg.paths.exemplars, "exemplar file"));
  std::vector<LabeledResponse> pool;
  SampleStrategy strategy;
  strategy.kind = kind;
  if (kind == StrategyKind::random) {
    pool = load_responses(pick_path(args.random_from, cfg.paths.responses, "response pool (--random-from)"),
                          exemplars.item());
  } else {
    strategy.manual_path = pick_path(args.samples, cfg.paths.samples, "sample file");
  }
  const auto samples = select_samples(pool, args.k, strategy, cfg.finetune.seed, exemplars.item());
  const auto pairs = build_pairs(samples, exemplars);
  std::size_t positive = 0;
  for (const auto& p : pairs) positive += static_cast<std::size_t>(p.label);
  out << "pairs: " << pairs.size() << " (" << positive << " positive)\n";

  const auto result = finetune(backend, pairs, cfg.finetune);
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e)
    out << "epoch " << e + 1 << " loss " << result.epoch_losses[e] << "\n";
  out << "final training loss: " << result.epoch_losses.back() << "\n";
  dynamic_cast<const BertEncoder&>(*result.backend).save(common.output);
  out << "wrote " << common.output << "\n";
  return kExitOk;
}

int cmd_evaluate(const CommonArgs& common, std::ostream& out, std::ostream& err) {
  ConfigOverrides ov;
  ov.seed = common.seed;
  if (common.config.empty()) throw ConfigError("evaluate needs --config");
  const auto cfg = load_config(common, ov);
  const fs::path dir = pick_path(common.output, cfg.paths.output_dir, "output directory (--output)");

  const std::string started = utc_timestamp();
  auto report = run_experiment(cfg.experiment_config());
  report.config_digest = cfg.digest;
  report.timestamp = started;

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto md = render_report(report, ReportFormat::markdown);
  write_file_atomic(dir / "report.md", md);
  write_file_atomic(dir / "report.csv", render_report(report, ReportFormat::csv));
  nlohmann::ordered_json meta = {{"config_digest", report.config_digest},
                                 {"backend", report.backend_identifier},
                                 {"seeds", report.seeds},
                                 {"timestamp", report.timestamp},
                                 {"cells", report.total_cells()},
                                 {"failed_cells", report.failed_cells()}};
  write_file_atomic(dir / "run.json", meta.dump(2) + "\n");
  out << md;

  if (report.failed_cells() > 0)
    err << report.failed_cells() << " of " << report.total_cells() << " cells failed; see report.md\n";
  return report.failed_cells() == report.total_cells() ? kExitPartial : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exemplar-matching response scorer", "mensp"};
  app.require_subcommand(1);
  CommonArgs common;

  ScoreArgs score_args;
  auto* score = app.add_subcommand("score", "Score responses against the exemplars of one item");
  add_common(score, common);
  score->add_option("--exemplars", score_args.exemplars, "Exemplar document");
  score->add_option("--responses", score_args.responses, "Response file (JSON lines)");
  score->add_option("--include-zero-in-matching", score_args.include_zero,
                    "Whether level 0 competes in exemplar matching");
  score->add_option("--threads", score_args.threads, "Worker threads (0 = all cores)");

  FinetuneArgs ft_args;
  auto* ft = app.add_subcommand("finetune", "Adapt the backend on a few labeled responses per level");
  add_common(ft, common);
  ft->add_option("--exemplars", ft_args.exemplars, "Exemplar document");
  ft->add_option("--samples", ft_args.samples, "Manual sample file (JSON lines)");
  ft->add_option("--random-from", ft_args.random_from, "Response pool to draw random samples from");
  ft->add_option("--k", ft_args.k, "Samples per level");
  ft->add_option("--strategy", ft_args.strategy, "random or manual-file");

  auto* ev = app.add_subcommand("evaluate", "Run the configured experiment grid and write reports");
  add_common(ev, common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (score->parsed()) return cmd_score(common, score_args, out, err);
    if (ft->parsed()) return cmd_finetune(common, ft_args, out, err);
    return cmd_evaluate(common, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitBackend;
  }
}

}  // namespace mensp
