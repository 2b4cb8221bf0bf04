#include "rbmcda/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>

#include "rbmcda/csv.hpp"
#include "rbmcda/diagnostics.hpp"
#include "rbmcda/io.hpp"
#include "rbmcda/parallel.hpp"

namespace rbmcda {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  return in;
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

Scenario load_scenario(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("no scenario given (positional argument or input.scenario)");
  auto in = open_in(path);
  return scenario_from_csv(in);
}

void write_provenance(const fs::path& dir, const std::string& command, const RunConfig& cfg, const CliOptions& opts,
                      const json& extra = json::object()) {
  const json cj = config_to_json(cfg);
  json p{{"format_version", 1},
         {"command", command},
         {"version", kVersion},
         {"seed", cfg.seed},
         {"threads", cfg.threads},
         {"config", cj},
         {"config_hash", fnv1a_hex(cj.dump())},
         {"inputs", opts.inputs},
         {"argv", opts.argv}};
  for (const auto& [k, v] : extra.items()) p[k] = v;
  write_json_file((dir / "provenance.json").string(), p);
}

std::string scenario_input(const RunConfig& cfg, const CliOptions& opts) {
  if (!opts.inputs.empty()) return opts.inputs.front();
  return cfg.scenario_path;
}

int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const DegenerateFilterError&) {
    return kExitNumeric;
  } catch (const SingularMatrixError&) {
    return kExitNumeric;
  } catch (const GenerationFailedError&) {
    return kExitNumeric;
  } catch (const IoError&) {
    return kExitIo;
  } catch (const ParseError&) {
    return kExitValidation;
  } catch (const std::invalid_argument&) {
    return kExitValidation;
  } catch (...) {
    return kExitNumeric;
  }
}

std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

void write_metric(std::ostream& out, const std::string& section, const std::string& metric,
                  const std::string& parameter, double value, const std::string& note = "") {
  out << section << ',' << metric << ',' << parameter << ',' << csv::format_double(value) << ',' << note << '\n';
}

int warmup_from(const Trace& t, double fraction) {
  return static_cast<int>(std::floor(fraction * static_cast<double>(t.size()))) + 1;
}

WeightedIntDist pooled_targets(const std::vector<Trace>& traces, double fraction) {
  std::vector<WeightedIntDist> parts;
  std::vector<int> values;
  std::vector<double> weights;
  for (const auto& t : traces) {
    const auto d = num_targets_dist(t, warmup_from(t, fraction));
    for (std::size_t i = 0; i < d.support.size(); ++i) {
      values.push_back(d.support[i]);
      weights.push_back(d.weights[i]);
    }
  }
  return make_dist(values, weights);
}

}  // namespace

RunConfig resolve_config(const CliOptions& opts) {
  json j = opts.config_path ? read_json_file(*opts.config_path) : config_to_json(RunConfig{});
  if (opts.seed) j["seed"] = *opts.seed;
  if (opts.threads) j["threads"] = *opts.threads;
  if (opts.out_dir) j["output"]["dir"] = *opts.out_dir;
  if (opts.chains) j["chains"]["count"] = *opts.chains;
  return config_from_json(j);
}

std::string default_config_text() { return config_to_json(RunConfig{}).dump(2); }

int cmd_simulate(const RunConfig& cfg, const CliOptions& opts, std::ostream& log) {
  ScenarioConfig sc = cfg.scenario;
  sc.seed = cfg.seed;
  const Scenario s = simulate_scenario(sc);
  const fs::path dir(cfg.out_dir);
  make_dir(dir);
  {
    auto out = open_out(dir / "scenario.csv");
    scenario_to_csv(s, out);
  }
  {
    auto out = open_out(dir / "truth_states.csv");
    truth_states_to_csv(s, out);
  }
  write_provenance(dir, "simulate", cfg, opts, {{"outputs", {"scenario.csv", "truth_states.csv"}}});
  log << "wrote " << s.size() << " observations to " << (dir / "scenario.csv").string() << '\n';
  return kExitOk;
}

int cmd_filter(const RunConfig& cfg, const CliOptions& opts, std::ostream& log) {
  const std::string path = scenario_input(cfg, opts);
  const Scenario s = load_scenario(path);
  const FilterContext ctx = make_context(s, cfg.filter);
  const fs::path dir(cfg.out_dir);
  make_dir(dir);
  set_threads(cfg.threads);
  Rng rng(cfg.seed);
  const auto calls_before = kalman_calls();
  ParticleSet set;
  try {
    set = cfg.forced_history ? conditional_rbmcda(ctx, cfg.model, cfg.n_particles, *cfg.forced_history, rng)
                             : rbmcda_filter(ctx, cfg.model, cfg.n_particles, rng);
  } catch (const DegenerateFilterError& e) {
    write_json_file((dir / "degenerate.json").string(),
                    {{"format_version", 1}, {"error", "degenerate_filter"}, {"step", e.step()}, {"message", e.what()}});
    write_provenance(dir, "filter", cfg, opts, {{"status", "degenerate"}});
    throw;
  }
  const auto calls = kalman_calls() - calls_before;
  {
    auto out = open_out(dir / "particles.jsonl");
    write_particles_jsonl(set, out);
  }
  {
    auto out = open_out(dir / "summary.csv");
    out << "# format_version=1\nmetric,value\n";
    out << "log_marginal_lik," << csv::format_double(set.log_marginal_lik) << '\n';
    out << "n_particles," << set.size() << '\n';
    out << "n_observations," << s.size() << '\n';
    out << "kalman_predicts," << calls.predicts << '\n';
    out << "kalman_updates," << calls.updates << '\n';
    out << "kalman_calls," << calls.total() << '\n';
    int resampled = 0;
    for (const auto& st : set.steps) resampled += st.resampled ? 1 : 0;
    out << "resample_steps," << resampled << '\n';
    const auto w = set.weights();
    out << "final_ess," << csv::format_double(ess(w)) << '\n';
    if (cfg.forced_history) {
      out << "forced_cond_loglik," << csv::format_double(set.particles.front().cond_loglik) << '\n';
      out << "forced_assoc_loglik," << csv::format_double(assoc_loglik(ctx, cfg.model, *cfg.forced_history)) << '\n';
    }
  }
  write_provenance(dir, "filter", cfg, opts, {{"status", "ok"}});
  log << "log marginal likelihood " << csv::format_double(set.log_marginal_lik) << " with " << set.size()
      << " particles\n";
  return kExitOk;
}

int cmd_sample(const RunConfig& cfg, const CliOptions& opts, std::ostream& log) {
  const std::string path = scenario_input(cfg, opts);
  const Scenario s = load_scenario(path);
  FilterConfig fc = cfg.filter;
  const FilterContext ctx = make_context(s, fc);
  const fs::path dir(cfg.out_dir);
  make_dir(dir);
  set_threads(cfg.threads);

  struct ChainResult {
    std::string status = "pending";
    std::string error;
    int code = kExitOk;
    std::size_t rows = 0;
  };
  std::vector<ChainResult> results(static_cast<std::size_t>(cfg.chains));
  auto chain_file = [&](int c, const char* suffix) { return "chain_" + std::to_string(c) + suffix; };

  // Chains are independent; each writes only its own files.
  parallel_for(cfg.chains, cfg.threads > 1, [&](int c) {
    auto& r = results[static_cast<std::size_t>(c)];
    try {
      Rng rng(cfg.chain_seed(c));
      const Trace trace = run_sampler(ctx, cfg.model, cfg.sampler, cfg.prior, rng);
      {
        auto out = open_out(dir / chain_file(c, "_trace.csv"));
        write_trace_csv(trace, out, c);
      }
      {
        auto out = open_out(dir / chain_file(c, "_histories.jsonl"));
        write_histories_jsonl(trace, out);
      }
      r.rows = trace.size();
      r.status = "ok";
      if (!trace.warnings.empty()) r.error = trace.warnings.front();
    } catch (...) {
      r.status = "failed";
      r.error = describe(std::current_exception());
      r.code = exit_code_for(std::current_exception());
    }
  });

  json chains = json::array();
  int code = kExitOk;
  for (int c = 0; c < cfg.chains; ++c) {
    const auto& r = results[static_cast<std::size_t>(c)];
    json e{{"chain", c},
           {"seed", cfg.chain_seed(c)},
           {"status", r.status},
           {"trace", chain_file(c, "_trace.csv")},
           {"histories", chain_file(c, "_histories.jsonl")},
           {"rows", r.rows}};
    if (!r.error.empty()) e["message"] = r.error;
    chains.push_back(e);
    if (r.code != kExitOk && code == kExitOk) code = r.code;
  }
  const json cj = config_to_json(cfg);
  json manifest{{"format_version", 1},
                {"command", "sample"},
                {"algorithm", algorithm_name(cfg.sampler.algorithm)},
                {"scenario", fs::absolute(path).string()},
                {"config", cj},
                {"config_hash", fnv1a_hex(cj.dump())},
                {"complete", code == kExitOk},
                {"chains", chains}};
  write_json_file((dir / "manifest.json").string(), manifest);
  write_provenance(dir, "sample", cfg, opts, {{"status", code == kExitOk ? "ok" : "failed"}});
  for (const auto& r : results) {
    if (r.status != "ok") log << "chain failed: " << r.error << '\n';
  }
  log << "wrote " << cfg.chains << " chain(s) to " << dir.string() << '\n';
  return code;
}

LoadedRun load_run(const std::string& manifest_path) {
  const json m = read_json_file(manifest_path);
  if (!m.contains("format_version") || m["format_version"] != 1 || m.value("command", "") != "sample") {
    throw std::invalid_argument("'" + manifest_path + "' is not a sample manifest");
  }
  LoadedRun run;
  const fs::path base = fs::path(manifest_path).parent_path();
  try {
    run.config = config_from_json(m.at("config"));
    run.scenario_path = m.at("scenario").get<std::string>();
    for (const auto& c : m.at("chains")) {
      if (c.at("status") != "ok") {
        ++run.failed_chains;
        continue;
      }
      auto in = open_in(base / c.at("trace").get<std::string>());
      Trace t = read_trace_csv(in);
      const fs::path hp = base / c.at("histories").get<std::string>();
      if (fs::exists(hp)) {
        auto hin = open_in(hp);
        read_histories_jsonl(hin, t);
      }
      run.traces.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("'" + manifest_path + "': malformed manifest: " + e.what());
  }
  if (run.traces.empty()) throw std::invalid_argument("'" + manifest_path + "' lists no completed chains");
  for (const auto& t : run.traces) {
    if (t.algorithm != run.traces.front().algorithm || t.size() != run.traces.front().size()) {
      throw std::invalid_argument("'" + manifest_path + "': chains differ in algorithm or length");
    }
  }
  return run;
}

int cmd_diagnose(const RunConfig& cfg, const CliOptions& opts, std::ostream& log) {
  const auto& d = cfg.diagnose;
  std::string runs_path = d.runs;
  if (runs_path.empty() && !opts.inputs.empty()) runs_path = opts.inputs.front();
  if (runs_path.empty()) throw std::invalid_argument("diagnose: no run manifest given (diagnose.runs or positional)");
  const LoadedRun run = load_run(runs_path);
  std::optional<LoadedRun> baseline;
  if (!d.baseline.empty()) baseline = load_run(d.baseline);
  std::optional<LoadedRun> reference;
  if (!d.reference.empty()) reference = load_run(d.reference);
  if (baseline && baseline->traces.front().algorithm != run.traces.front().algorithm) {
    throw std::invalid_argument("diagnose: baseline traces use a different algorithm");
  }

  const std::string scenario_path = d.scenario.empty() ? run.scenario_path : d.scenario;
  Scenario s = load_scenario(scenario_path);
  bool have_truth_states = false;
  if (!d.truth_states.empty()) {
    auto in = open_in(d.truth_states);
    truth_states_from_csv(in, s);
    have_truth_states = true;
  }
  std::optional<int> true_count;
  if (s.truth_assoc) true_count = num_targets(*s.truth_assoc);

  const fs::path dir(cfg.out_dir);
  make_dir(dir);
  set_threads(cfg.threads);

  auto out = open_out(dir / "metrics.csv");
  out << "# format_version=1\nsection,metric,parameter,value,note\n";
  const char* names[kNumParams] = {"sqrt_q", "lambda", "sigma"};

  if (run.traces.size() >= 2 && run.traces.front().size() >= 8) {
    const auto r = psrf(std::span<const Trace>(run.traces), true);
    for (int i = 0; i < kNumParams; ++i) write_metric(out, "convergence", "psrf", names[i], r[static_cast<std::size_t>(i)]);
  } else {
    write_metric(out, "convergence", "psrf", "", NAN, "needs at least two chains of length 8");
  }
  if (run.failed_chains > 0) write_metric(out, "convergence", "failed_chains", "", run.failed_chains);

  double accepted = 0.0;
  double total = 0.0;
  for (const auto& t : run.traces) {
    for (const auto& r : t.rows) {
      accepted += r.accepted ? 1.0 : 0.0;
      total += 1.0;
    }
  }
  write_metric(out, "sampler", "acceptance_rate", "", total > 0 ? accepted / total : NAN);

  // Posterior means of the parameters after warmup.
  for (int i = 0; i < kNumParams; ++i) {
    double sum = 0.0;
    double n = 0.0;
    for (const auto& t : run.traces) {
      for (int k = warmup_from(t, d.warmup_fraction); k <= static_cast<int>(t.size()); ++k) {
        sum += to_coords(t.rows[static_cast<std::size_t>(k - 1)].theta)(i);
        n += 1.0;
      }
    }
    write_metric(out, "posterior", "mean", names[i], n > 0 ? sum / n : NAN);
  }

  const WeightedIntDist targets = pooled_targets(run.traces, d.warmup_fraction);
  double mean_t = 0.0;
  for (std::size_t i = 0; i < targets.support.size(); ++i) mean_t += targets.support[i] * targets.weights[i];
  write_metric(out, "num_targets", "mean", "", mean_t);
  if (true_count) {
    write_metric(out, "num_targets", "p_true_count", "", targets.prob(*true_count),
                 "true count " + std::to_string(*true_count));
  }

  const FilterContext ctx = make_context(s, run.config.filter);
  auto pooled_ospa = [&](const LoadedRun& r) {
    double acc = 0.0;
    for (const auto& t : r.traces) {
      acc += mean_ospa(ctx, t, final_truth_locations(s), d.ospa_cutoff, d.ospa_order, warmup_from(t, d.warmup_fraction),
                       d.ospa_thin);
    }
    return acc / static_cast<double>(r.traces.size());
  };
  std::optional<double> ospa_runs;
  if (have_truth_states) {
    ospa_runs = pooled_ospa(run);
    std::ostringstream note;
    note << "c=" << d.ospa_cutoff << " p=" << d.ospa_order;
    write_metric(out, "accuracy", "mean_ospa", "", *ospa_runs, note.str());
  } else {
    write_metric(out, "accuracy", "mean_ospa", "", NAN, "omitted: no truth states supplied");
  }

  {
    auto nt = open_out(dir / "num_targets.csv");
    nt << "# format_version=1\nset,num_targets,probability\n";
    auto dump = [&](const std::string& name, const WeightedIntDist& dist) {
      for (std::size_t i = 0; i < dist.support.size(); ++i) {
        nt << name << ',' << dist.support[i] << ',' << csv::format_double(dist.weights[i]) << '\n';
      }
    };
    dump("runs", targets);
    if (baseline) dump("baseline", pooled_targets(baseline->traces, d.warmup_fraction));
    if (reference) dump("reference", pooled_targets(reference->traces, d.warmup_fraction));
  }
  {
    auto pp = open_out(dir / "parameters.csv");
    pp << "# format_version=1\nchain,iteration,sqrt_q,lambda,sigma\n";
    for (std::size_t c = 0; c < run.traces.size(); ++c) {
      const auto& t = run.traces[c];
      for (int k = warmup_from(t, d.warmup_fraction); k <= static_cast<int>(t.size()); ++k) {
        const ParamVec v = to_coords(t.rows[static_cast<std::size_t>(k - 1)].theta);
        pp << c << ',' << k << ',' << csv::format_double(v(0)) << ',' << csv::format_double(v(1)) << ','
           << csv::format_double(v(2)) << '\n';
      }
    }
  }
  if (reference) {
    const WeightedIntDist ref = pooled_targets(reference->traces, d.warmup_fraction);
    std::uint64_t lo = 0;
    std::uint64_t hi = std::numeric_limits<std::uint64_t>::max();
    for (const auto& t : run.traces) {
      lo = std::max(lo, t.rows.front().kalman_calls);
      hi = std::min(hi, t.rows.back().kalman_calls);
    }
    std::vector<std::uint64_t> cuts;
    const int n = d.curve_points;
    for (int i = 0; i < n; ++i) {
      const double f = n == 1 ? 1.0 : static_cast<double>(i) / (n - 1);
      const double v = std::exp(std::log(static_cast<double>(std::max<std::uint64_t>(lo, 1))) * (1.0 - f) +
                                std::log(static_cast<double>(std::max<std::uint64_t>(hi, 1))) * f);
      cuts.push_back(static_cast<std::uint64_t>(std::llround(v)));
    }
    const auto curve = convergence_curve(std::span<const Trace>(run.traces), ref, cuts);
    auto cc = open_out(dir / "convergence.csv");
    cc << "# format_version=1\nkalman_calls,kolmogorov,samples,clipped\n";
    for (const auto& p : curve) {
      cc << p.kalman_calls << ',' << csv::format_double(p.kolmogorov) << ',' << p.samples << ','
         << (p.clipped ? 1 : 0) << '\n';
    }
    write_metric(out, "convergence", "kolmogorov_to_reference", "", kolmogorov(targets, ref));
  }
  if (baseline) {
    auto tb = open_out(dir / "table1.csv");
    tb << "# format_version=1\nmethod,p_true_count,mean_ospa,chains\n";
    auto row = [&](const char* name, const LoadedRun& r, std::optional<double> ospa_value) {
      const WeightedIntDist dist = pooled_targets(r.traces, d.warmup_fraction);
      tb << name << ',' << (true_count ? csv::format_double(dist.prob(*true_count)) : "nan") << ','
         << (ospa_value ? csv::format_double(*ospa_value) : "nan") << ',' << r.traces.size() << '\n';
    };
    row("with", run, ospa_runs);
    row("without", *baseline, have_truth_states ? std::optional<double>(pooled_ospa(*baseline)) : std::nullopt);
  }
  write_provenance(dir, "diagnose", cfg, opts);
  log << "wrote diagnostics to " << dir.string() << '\n';
  return kExitOk;
}

int run_command(const std::string& command, const CliOptions& opts, std::ostream& log) {
  try {
    const RunConfig cfg = resolve_config(opts);
    if (command == "simulate") return cmd_simulate(cfg, opts, log);
    if (command == "filter") return cmd_filter(cfg, opts, log);
    if (command == "sample") return cmd_sample(cfg, opts, log);
    if (command == "diagnose") return cmd_diagnose(cfg, opts, log);
    log << "error: unknown command '" << command << "'\n";
    return kExitValidation;
  } catch (...) {
    const auto e = std::current_exception();
    log << "error: " << describe(e) << '\n';
    return exit_code_for(e);
  }
}

}  // namespace rbmcda
