#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "rbmcda/cli.hpp"
#include "rbmcda/config.hpp"
#include "rbmcda/io.hpp"

using namespace rbmcda;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("rbmcda_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write_config(const std::string& name, const json& j) const {
    std::ofstream(path(name)) << j.dump(2);
    return path(name);
  }

  int run(const std::string& cmd, const json& config, const std::string& out, std::vector<std::string> inputs = {}) {
    CliOptions opts;
    opts.config_path = write_config(cmd + "_" + fs::path(out).filename().string() + ".json", config);
    opts.out_dir = path(out);
    opts.inputs = std::move(inputs);
    std::ostringstream log;
    const int code = run_command(cmd, opts, log);
    last_log_ = log.str();
    return code;
  }

  fs::path dir_;
  std::string last_log_;
};

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> data_lines(const std::string& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    out.push_back(line);
  }
  return out;
}

std::map<std::string, double> summary_values(const std::string& p) {
  std::map<std::string, double> out;
  for (const auto& line : data_lines(p)) {
    const auto comma = line.find(',');
    out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
  }
  return out;
}

std::string fixture_csv(const oracle::ThreeMeasurement& fx) {
  std::ostringstream out;
  scenario_to_csv(fx.scenario, out);
  return out.str();
}

}  // namespace

TEST(Config, RoundTripIsIdentity) {
  RunConfig cfg;
  cfg.seed = 77;
  cfg.model = ModelParams{50.0, 0.25, 0.4};
  cfg.filter.assoc.clutter_prob = 0.1;
  cfg.filter.assoc.death_threshold = 0.3;
  cfg.sampler.algorithm = Algorithm::pmmh;
  cfg.sampler.initial_proposal_sd = ParamVec(1.0, 0.1, 0.05);
  cfg.chains = 3;
  const json a = config_to_json(cfg);
  const json b = config_to_json(config_from_json(a));
  EXPECT_EQ(a, b);
}

TEST(Config, DefaultsTextMatchesDefaults) {
  EXPECT_EQ(json::parse(default_config_text()), config_to_json(RunConfig{}));
}

TEST(Config, RejectsUnknownKeysAndWrongTypes) {
  EXPECT_THROW(config_from_json(json{{"modle", json::object()}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"model", {{"q", 1.0}, {"extra", 2}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"model", {{"q", "ten"}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"format_version", 99}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"sampler", {{"algorithm", "gibbs"}}}}), std::invalid_argument);
  EXPECT_NO_THROW(config_from_json(json{{"model", {{"q", 1.0}}}}));
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto cfg = config_from_json(json{{"sampler", {{"iterations", 7}}}});
  EXPECT_EQ(cfg.sampler.iterations, 7);
  EXPECT_EQ(cfg.n_particles, RunConfig{}.n_particles);
}

TEST_F(CliTest, SimulateDefaultsDeterministic) {
  ASSERT_EQ(run("simulate", json::object(), "a"), kExitOk) << last_log_;
  ASSERT_EQ(run("simulate", json::object(), "b"), kExitOk) << last_log_;
  EXPECT_EQ(data_lines(path("a/scenario.csv")).size(), 150u);
  EXPECT_EQ(slurp(path("a/scenario.csv")), slurp(path("b/scenario.csv")));
  EXPECT_EQ(slurp(path("a/truth_states.csv")), slurp(path("b/truth_states.csv")));
  const json prov = read_json_file(path("a/provenance.json"));
  EXPECT_EQ(prov.at("format_version"), 1);
  EXPECT_EQ(prov.at("seed"), 1);
  EXPECT_EQ(prov.at("version"), kVersion);
  EXPECT_EQ(prov.at("config_hash"), fnv1a_hex(prov.at("config").dump()));
  // The stored config reruns the command exactly.
  ASSERT_EQ(run("simulate", prov.at("config"), "c"), kExitOk);
  EXPECT_EQ(slurp(path("a/scenario.csv")), slurp(path("c/scenario.csv")));
}

TEST_F(CliTest, SimulateRejectsZeroObservations) {
  EXPECT_EQ(run("simulate", json{{"scenario", {{"n_obs", 0}}}}, "a"), kExitValidation);
}

TEST_F(CliTest, SeedOverrideChangesOutput) {
  ASSERT_EQ(run("simulate", json::object(), "a"), kExitOk);
  CliOptions opts;
  opts.seed = 2;
  opts.out_dir = path("b");
  std::ostringstream log;
  ASSERT_EQ(run_command("simulate", opts, log), kExitOk);
  EXPECT_NE(slurp(path("a/scenario.csv")), slurp(path("b/scenario.csv")));
}

TEST_F(CliTest, FilterMatchesEnumerationAndWritesOneRowPerParticle) {
  oracle::ThreeMeasurement fx;
  std::ofstream(path("three.csv")) << fixture_csv(fx);
  const json cfg{{"model", {{"q", 100.0}, {"lambda", 0.5}, {"sigma", 0.5}}}, {"filter", {{"n_particles", 20000}}}};
  ASSERT_EQ(run("filter", cfg, "f", {path("three.csv")}), kExitOk) << last_log_;
  const auto summary = summary_values(path("f/summary.csv"));
  EXPECT_NEAR(summary.at("log_marginal_lik"), fx.exact().log_marginal, 0.02);
  EXPECT_EQ(summary.at("n_particles"), 20000);
  std::ifstream in(path("f/particles.jsonl"));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    EXPECT_EQ(j.at("format_version"), 1);
    ++rows;
  }
  EXPECT_EQ(rows, 20000);
}

TEST_F(CliTest, ForcedHistoryReproducesExactLikelihood) {
  oracle::ThreeMeasurement fx;
  std::ofstream(path("three.csv")) << fixture_csv(fx);
  const json cfg{{"filter", {{"n_particles", 1}, {"forced_history", {1, 2, 1}}}}};
  ASSERT_EQ(run("filter", cfg, "f", {path("three.csv")}), kExitOk) << last_log_;
  const auto summary = summary_values(path("f/summary.csv"));
  const double exact = oracle::joint_loglik(fx.times, fx.ys, {1, 2, 1}, 100.0, 0.5, 0.5, fx.birth());
  EXPECT_NEAR(summary.at("forced_assoc_loglik"), exact, 1e-9);
  EXPECT_NEAR(summary.at("forced_cond_loglik"), summary.at("forced_assoc_loglik"), 1e-10);
}

TEST_F(CliTest, FilterDegenerateExitsNumeric) {
  std::ofstream(path("s.csv")) << "t,y1,y2\n0,50,50\n1,50,51\n1.1,40,40\n";
  const json cfg{{"filter", {{"n_particles", 1}, {"death_threshold", 0.5}, {"forced_history", {1, 2, 1}}}}};
  EXPECT_EQ(run("filter", cfg, "f", {path("s.csv")}), kExitNumeric);
  EXPECT_TRUE(fs::exists(path("f/degenerate.json")));
}

TEST_F(CliTest, MissingScenarioIsIoError) {
  EXPECT_EQ(run("filter", json::object(), "f", {path("nope.csv")}), kExitIo);
}

TEST_F(CliTest, MalformedScenarioIsValidationError) {
  std::ofstream(path("bad.csv")) << "t,y1,y2\n0.1,x,1\n";
  EXPECT_EQ(run("filter", json::object(), "f", {path("bad.csv")}), kExitValidation);
}

TEST_F(CliTest, SampleTwoChainsDeterministic) {
  const json sim{{"scenario", {{"n_targets", 3}, {"n_obs", 15}}}};
  ASSERT_EQ(run("simulate", sim, "sim"), kExitOk);
  const json cfg{{"sampler", {{"iterations", 100}}}, {"chains", {{"count", 2}}}};
  ASSERT_EQ(run("sample", cfg, "r1", {path("sim/scenario.csv")}), kExitOk) << last_log_;
  ASSERT_EQ(run("sample", cfg, "r2", {path("sim/scenario.csv")}), kExitOk) << last_log_;
  for (const char* c : {"0", "1"}) {
    const std::string trace = std::string("/chain_") + c + "_trace.csv";
    EXPECT_EQ(data_lines(path("r1") + trace).size(), 100u);
    EXPECT_EQ(slurp(path("r1") + trace), slurp(path("r2") + trace));
  }
  EXPECT_NE(slurp(path("r1/chain_0_trace.csv")), slurp(path("r1/chain_1_trace.csv")));
  const json manifest = read_json_file(path("r1/manifest.json"));
  EXPECT_EQ(manifest.at("complete"), true);
  EXPECT_EQ(manifest.at("chains").size(), 2u);
  const auto run = load_run(path("r1/manifest.json"));
  ASSERT_EQ(run.traces.size(), 2u);
  EXPECT_EQ(run.traces[0].histories.size(), 100u);
}

TEST_F(CliTest, TraceCsvRoundTrip) {
  oracle::ThreeMeasurement fx;
  const auto ctx = make_context(fx.scenario, FilterConfig{});
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::pmmh;
  cfg.iterations = 30;
  Rng rng(3);
  const auto trace = pmmh(ctx, fx.params, cfg, PriorSpec{}, rng);
  std::stringstream csv, hist;
  write_trace_csv(trace, csv);
  write_histories_jsonl(trace, hist);
  Trace back = read_trace_csv(csv);
  read_histories_jsonl(hist, back);
  ASSERT_EQ(back.size(), trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    EXPECT_EQ(back.rows[i].theta.lambda, trace.rows[i].theta.lambda);
    EXPECT_EQ(back.rows[i].u, trace.rows[i].u);
    EXPECT_EQ(back.rows[i].loglik, trace.rows[i].loglik);
    EXPECT_EQ(back.rows[i].accepted, trace.rows[i].accepted);
  }
  EXPECT_EQ(back.initial_u, trace.initial_u);
  ASSERT_EQ(back.particle_sets.size(), trace.particle_sets.size());
  EXPECT_EQ(back.particle_sets[3][0].history, trace.particle_sets[3][0].history);
}

TEST(TraceCsv, RejectsWrongVersion) {
  std::istringstream in("# format_version=7\nchain,algorithm,iteration\n");
  EXPECT_THROW(read_trace_csv(in), std::exception);
}

TEST_F(CliTest, DiagnoseOutputs) {
  const json sim{{"scenario", {{"n_targets", 3}, {"n_obs", 15}}}};
  ASSERT_EQ(run("simulate", sim, "sim"), kExitOk);
  const json cfg{{"sampler", {{"iterations", 60}}}, {"chains", {{"count", 2}}}};
  ASSERT_EQ(run("sample", cfg, "r", {path("sim/scenario.csv")}), kExitOk);
  json fixed = cfg;
  fixed["sampler"]["fix_parameters"] = true;
  ASSERT_EQ(run("sample", fixed, "base", {path("sim/scenario.csv")}), kExitOk);

  // Self reference, no truth states.
  const json d1{{"diagnose", {{"runs", path("r/manifest.json")}, {"reference", path("r/manifest.json")}}}};
  ASSERT_EQ(run("diagnose", d1, "d1"), kExitOk) << last_log_;
  const std::string metrics = slurp(path("d1/metrics.csv"));
  EXPECT_NE(metrics.find("accuracy,mean_ospa,,nan,omitted: no truth states supplied"), std::string::npos) << metrics;
  EXPECT_NE(metrics.find("convergence,kolmogorov_to_reference,,0,"), std::string::npos) << metrics;
  EXPECT_TRUE(fs::exists(path("d1/convergence.csv")));

  // Baseline comparison with truth states.
  const json d2{{"diagnose",
                 {{"runs", path("r/manifest.json")},
                  {"baseline", path("base/manifest.json")},
                  {"truth_states", path("sim/truth_states.csv")}}}};
  ASSERT_EQ(run("diagnose", d2, "d2"), kExitOk) << last_log_;
  const auto rows = data_lines(path("d2/table1.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].rfind("with,", 0), 0u);
  EXPECT_EQ(rows[1].rfind("without,", 0), 0u);
  EXPECT_NE(slurp(path("d2/metrics.csv")).find("accuracy,mean_ospa,,"), std::string::npos);
}

TEST_F(CliTest, DiagnoseRejectsMismatchedSchemas) {
  const json sim{{"scenario", {{"n_targets", 2}, {"n_obs", 8}}}};
  ASSERT_EQ(run("simulate", sim, "sim"), kExitOk);
  ASSERT_EQ(run("sample", json{{"sampler", {{"iterations", 20}}}}, "g", {path("sim/scenario.csv")}), kExitOk);
  const json pm{{"sampler", {{"iterations", 20}, {"algorithm", "pmmh"}}}};
  ASSERT_EQ(run("sample", pm, "p", {path("sim/scenario.csv")}), kExitOk);
  const json d{{"diagnose", {{"runs", path("g/manifest.json")}, {"baseline", path("p/manifest.json")}}}};
  EXPECT_EQ(run("diagnose", d, "d"), kExitValidation);

  // A trace file with a header from a different schema.
  std::ofstream(path("g/chain_0_trace.csv")) << "# format_version=1\nfoo,bar\n1,2\n";
  const json d2{{"diagnose", {{"runs", path("g/manifest.json")}}}};
  EXPECT_EQ(run("diagnose", d2, "d2"), kExitValidation);
}

#ifdef RBMCDA_CLI_PATH
TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = RBMCDA_CLI_PATH;
  const auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  EXPECT_EQ(status(bin + " --print-defaults"), 0);
  EXPECT_EQ(status(bin + " filter --print-defaults"), 0);
  EXPECT_EQ(status(bin + " frobnicate"), 2);
  EXPECT_EQ(status(bin + " sample --chains 0"), 2);
  EXPECT_EQ(status(bin + " simulate --seed 4 --out " + path("s")), 0);
  EXPECT_EQ(data_lines(path("s/scenario.csv")).size(), 150u);
  EXPECT_EQ(status(bin + " filter --out " + path("f") + " " + path("missing.csv")), 4);
}
#endif
