#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "mensp/cli.hpp"
#include "mensp/corpus.hpp"

using namespace mensp;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mensp");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path data(const std::string& name) { return testing::source_dir() / "data" / "gas_spread" / name; }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("score writes one record per response") {
  const auto r = cli({"score", "--exemplars", data("exemplars.json").string(), "--responses",
                      data("responses.jsonl").string()});
  CHECK(r.code == kExitOk);
  CHECK(count_lines(r.out) == count_lines(read_text_file(data("responses.jsonl"))));
  const auto first = nlohmann::json::parse(r.out.substr(0, r.out.find('\n')));
  CHECK(first.contains("grade"));
  CHECK(first.contains("stage"));

  const auto dir = testing::scratch_dir("cli_score");
  const auto file = (dir / "scores.jsonl").string();
  CHECK(cli({"score", "--exemplars", data("exemplars.json").string(), "--responses", data("responses.jsonl").string(),
             "--output", file})
            .code == kExitOk);
  CHECK(read_text_file(file) == r.out);
}

TEST_CASE("score flag excludes level zero from matching") {
  const auto r = cli({"score", "--exemplars", data("exemplars.json").string(), "--responses",
                      data("responses.jsonl").string(), "--include-zero-in-matching=false"});
  REQUIRE(r.code == kExitOk);
  std::istringstream lines(r.out);
  std::string line;
  int matched = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["stage"] == "matched") {
      ++matched;
      CHECK_FALSE(j["nsp_probabilities"].contains("0"));
      CHECK(j["grade"] != 0);
    }
  }
  CHECK(matched > 0);
}

TEST_CASE("score exit codes") {
  const auto missing = cli({"score", "--exemplars", "/nonexistent/ex.json", "--responses",
                            data("responses.jsonl").string()});
  CHECK(missing.code == kExitData);
  CHECK(missing.err.find("/nonexistent/ex.json") != std::string::npos);

  const auto dir = testing::scratch_dir("cli_codes");
  testing::write(dir / "bad.json", R"({"backend": {"bogus": 1}})");
  CHECK(cli({"score", "--config", (dir / "bad.json").string(), "--exemplars", data("exemplars.json").string(),
             "--responses", data("responses.jsonl").string()})
            .code == kExitConfig);
  CHECK(cli({"score", "--no-such-flag"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);

  // One response hits the injected backend failure: partial.
  testing::write(dir / "fail.json", R"({"backend": {"kind": "mock", "mock": {"fail_on": "zzfail"}}})");
  testing::write(dir / "r.jsonl", R"({"response_id": "a", "text": "gas spreads", "gold": 1})"
                                  "\n"
                                  R"({"response_id": "b", "text": "zzfail here", "gold": 0})"
                                  "\n");
  const auto partial = cli({"score", "--config", (dir / "fail.json").string(), "--exemplars",
                            data("exemplars.json").string(), "--responses", (dir / "r.jsonl").string()});
  CHECK(partial.code == kExitPartial);
  CHECK(count_lines(partial.out) == 2);
  CHECK(partial.out.find("\"error_kind\":\"backend\"") != std::string::npos);

  testing::write(dir / "r2.jsonl", R"({"response_id": "b", "text": "zzfail", "gold": 0})");
  CHECK(cli({"score", "--config", (dir / "fail.json").string(), "--exemplars", data("exemplars.json").string(),
             "--responses", (dir / "r2.jsonl").string()})
            .code == kExitBackend);
}

TEST_CASE("finetune on the mock backend is unsupported") {
  const auto dir = testing::scratch_dir("cli_ft_mock");
  const auto r = cli({"finetune", "--exemplars", data("exemplars.json").string(), "--random-from",
                      data("responses.jsonl").string(), "--output", (dir / "ckpt").string()});
  CHECK(r.code == kExitBackend);
}

TEST_CASE("finetune a checkpoint") {
  const auto dir = testing::scratch_dir("cli_ft");
  testing::write(dir / "c.json", R"({"backend": {"kind": "pretrained-checkpoint", "path": ")" +
                                     testing::tiny_bert_dir().string() +
                                     R"(", "max_sequence_length": 64}, "finetune": {"epochs": 2, "learning_rate": 0.01}})");
  const auto r = cli({"finetune", "--config", (dir / "c.json").string(), "--exemplars", data("exemplars.json").string(),
                      "--random-from", data("responses.jsonl").string(), "--k", "3", "--seed", "1", "--output",
                      (dir / "ckpt").string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("pairs: 27 (9 positive)") != std::string::npos);
  CHECK(r.out.find("final training loss:") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "ckpt" / "model.safetensors"));

  // The adapted checkpoint loads as a backend.
  testing::write(dir / "c2.json", R"({"backend": {"kind": "pretrained-checkpoint", "path": "ckpt"}})");
  CHECK(cli({"score", "--config", (dir / "c2.json").string(), "--exemplars", data("exemplars.json").string(),
             "--responses", data("manual_1shot.jsonl").string()})
            .code == kExitOk);

  const auto missing = cli({"finetune", "--config", (dir / "c.json").string(), "--exemplars",
                            data("exemplars.json").string(), "--samples", data("manual_1shot.jsonl").string(), "--k",
                            "3", "--output", (dir / "ckpt2").string()});
  CHECK(missing.code == kExitData);
  CHECK(missing.err.find("level") != std::string::npos);
}

TEST_CASE("evaluate writes deterministic reports") {
  const auto dir = testing::scratch_dir("cli_eval");
  const auto cfg = R"({"experiment": {"items": [{"responses": ")" + data("responses.jsonl").string() +
                   R"(", "exemplars": ")" + data("exemplars.json").string() +
                   R"("}], "models": ["Random", "RFDT", "MeNSP"], "shots": [0, 1], "seeds": [0, 1]}})";
  testing::write(dir / "c.json", cfg);
  const auto a = cli({"evaluate", "--config", (dir / "c.json").string(), "--output", (dir / "a").string()});
  const auto b = cli({"evaluate", "--config", (dir / "c.json").string(), "--output", (dir / "b").string()});
  CHECK(a.code == kExitOk);
  CHECK(a.out.find("| Shot | Sample | Model |") != std::string::npos);
  CHECK(read_text_file(dir / "a" / "report.csv") == read_text_file(dir / "b" / "report.csv"));
  CHECK(read_text_file(dir / "a" / "report.md") == read_text_file(dir / "b" / "report.md"));
  const auto meta = nlohmann::json::parse(read_text_file(dir / "a" / "run.json"));
  CHECK(meta["seeds"].size() == 2);
  CHECK(meta.contains("timestamp"));

  testing::write(dir / "zero.json", R"({"experiment": {"items": [{"responses": "r", "exemplars": "e"}], "seeds": []}})");
  CHECK(cli({"evaluate", "--config", (dir / "zero.json").string(), "--output", (dir / "z").string()}).code ==
        kExitConfig);
  CHECK(cli({"evaluate", "--output", (dir / "z").string()}).code == kExitConfig);

  // Every cell failing is a nonzero exit.
  testing::write(dir / "allbad.json", R"({"experiment": {"items": [{"responses": "nope.jsonl", "exemplars": "nope.json"}],
      "models": ["Random"], "shots": [0], "seeds": [0]}})");
  CHECK(cli({"evaluate", "--config", (dir / "allbad.json").string(), "--output", (dir / "x").string()}).code ==
        kExitPartial);
}
