#include "rbmcda/config.hpp"

#include <set>
#include <stdexcept>

#include "rbmcda/io.hpp"
#include "rbmcda/random.hpp"

namespace rbmcda {

using nlohmann::json;

namespace {

// Reads typed members of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(where(key) + " has the wrong type");
    }
  }

  template <class T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw std::invalid_argument("unknown configuration key '" + where(k.c_str()) + "'");
    }
  }

  std::string where(const char* key = nullptr) const {
    std::string p = path_.empty() ? "<root>" : path_;
    if (key) p = path_.empty() ? std::string(key) : path_ + "." + key;
    return p;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json window_json(const Window& w) {
  return {{"x_min", w.x_min}, {"x_max", w.x_max}, {"y_min", w.y_min}, {"y_max", w.y_max}};
}

void read_window(Section s, Window& w) {
  s.get("x_min", w.x_min);
  s.get("x_max", w.x_max);
  s.get("y_min", w.y_min);
  s.get("y_max", w.y_max);
  s.finish();
}

json params_json(const ModelParams& p) { return {{"q", p.q}, {"lambda", p.lambda}, {"sigma", p.sigma}}; }

void read_params(Section s, ModelParams& p) {
  s.get("q", p.q);
  s.get("lambda", p.lambda);
  s.get("sigma", p.sigma);
  s.finish();
}

template <class E>
E parse_enum(const std::string& v, std::initializer_list<std::pair<const char*, E>> options, const std::string& key) {
  for (const auto& [name, e] : options) {
    if (v == name) return e;
  }
  throw std::invalid_argument(key + ": invalid value '" + v + "'");
}

}  // namespace

std::uint64_t RunConfig::chain_seed(int chain) const {
  if (!chain_seeds.empty()) return chain_seeds.at(static_cast<std::size_t>(chain));
  return derive_seed(seed, static_cast<std::uint64_t>(chain));
}

void RunConfig::validate() const {
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (!model.valid()) throw std::invalid_argument("model: q, lambda and sigma must be positive");
  if (!(prior.shape > 1.0)) throw std::invalid_argument("prior.shape must exceed 1");
  if ((prior.modes.array() <= 0.0).any()) throw std::invalid_argument("prior.modes must be positive");
  if (n_particles < 1) throw std::invalid_argument("filter.n_particles must be at least 1");
  filter.validate();
  sampler.validate();
  if (chains < 1) throw std::invalid_argument("chains.count must be at least 1");
  if (!chain_seeds.empty() && static_cast<int>(chain_seeds.size()) != chains) {
    throw std::invalid_argument("chains.seeds must be empty or list one seed per chain");
  }
  scenario.validate();
  if (!(diagnose.ospa_cutoff > 0.0)) throw std::invalid_argument("diagnose.ospa_cutoff must be positive");
  if (!(diagnose.ospa_order >= 1.0)) throw std::invalid_argument("diagnose.ospa_order must be at least 1");
  if (!(diagnose.warmup_fraction >= 0.0 && diagnose.warmup_fraction < 1.0)) {
    throw std::invalid_argument("diagnose.warmup_fraction must lie in [0, 1)");
  }
  if (diagnose.ospa_thin < 1) throw std::invalid_argument("diagnose.ospa_thin must be at least 1");
  if (diagnose.curve_points < 1) throw std::invalid_argument("diagnose.curve_points must be at least 1");
}

json config_to_json(const RunConfig& c) {
  json j;
  j["format_version"] = kConfigFormatVersion;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output"] = {{"dir", c.out_dir}};
  j["model"] = params_json(c.model);
  j["prior"] = {{"modes", {c.prior.modes(0), c.prior.modes(1), c.prior.modes(2)}}, {"shape", c.prior.shape}};

  const auto& a = c.filter.assoc;
  json f;
  f["n_particles"] = c.n_particles;
  f["ess_threshold"] = c.filter.ess_threshold;
  f["birth_block_diagonal"] = c.filter.birth_block_diagonal;
  f["share_computation"] = c.filter.share_computation;
  f["execution"] = c.filter.execution == ExecutionMode::parallel ? "parallel" : "serial";
  f["parallel_min_groups"] = c.filter.parallel_min_groups;
  f["clutter_prob"] = a.clutter_prob;
  f["clutter_density_kind"] = a.clutter_kind == ClutterDensityKind::constant ? "constant" : "uniform_window";
  f["clutter_density"] = a.clutter_density;
  f["window"] = window_json(a.window);
  f["death_threshold"] = a.death_threshold ? json(*a.death_threshold) : json(nullptr);
  f["new_target_prior"] = a.new_target_kind == NewTargetPriorKind::fixed ? "fixed" : "latent_count";
  f["fixed_new_prob"] = a.fixed_new_prob;
  f["latent_count_max"] = a.latent_count_max;
  f["forced_history"] = c.forced_history ? json(*c.forced_history) : json(nullptr);
  j["filter"] = f;

  const auto& s = c.sampler;
  json sm;
  sm["algorithm"] = algorithm_name(s.algorithm);
  sm["iterations"] = s.iterations;
  sm["adapt_start"] = s.adapt_start;
  sm["adapt_end"] = s.adapt_end;
  sm["jitter"] = s.jitter;
  sm["initial_proposal_sd"] = s.initial_proposal_sd
                                  ? json{(*s.initial_proposal_sd)(0), (*s.initial_proposal_sd)(1),
                                         (*s.initial_proposal_sd)(2)}
                                  : json(nullptr);
  sm["fix_parameters"] = s.fix_parameters;
  sm["sample_mask"] = {s.sample_mask[0], s.sample_mask[1], s.sample_mask[2]};
  sm["refresh_count"] = s.refresh_count;
  sm["store_histories"] = s.store_histories;
  j["sampler"] = sm;

  j["chains"] = {{"count", c.chains}, {"seeds", c.chain_seeds}};

  const auto& sc = c.scenario;
  j["scenario"] = {{"n_targets", sc.n_targets}, {"n_obs", sc.n_obs},         {"window", window_json(sc.window)},
                   {"t_min", sc.t_min},         {"t_max", sc.t_max},         {"truth", params_json(sc.truth)},
                   {"max_attempts", sc.max_attempts}};
  j["input"] = {{"scenario", c.scenario_path}};

  const auto& d = c.diagnose;
  j["diagnose"] = {{"runs", d.runs},
                   {"baseline", d.baseline},
                   {"reference", d.reference},
                   {"scenario", d.scenario},
                   {"truth_states", d.truth_states},
                   {"ospa_cutoff", d.ospa_cutoff},
                   {"ospa_order", d.ospa_order},
                   {"warmup_fraction", d.warmup_fraction},
                   {"ospa_thin", d.ospa_thin},
                   {"curve_points", d.curve_points}};
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  int version = kConfigFormatVersion;
  root.get("format_version", version);
  if (version != kConfigFormatVersion) {
    throw std::invalid_argument("unsupported config format_version " + std::to_string(version));
  }
  root.get("seed", c.seed);
  root.get("threads", c.threads);
  {
    Section o = root.sub("output");
    o.get("dir", c.out_dir);
    o.finish();
  }
  read_params(root.sub("model"), c.model);
  {
    Section p = root.sub("prior");
    std::vector<double> modes{c.prior.modes(0), c.prior.modes(1), c.prior.modes(2)};
    p.get("modes", modes);
    if (modes.size() != 3) throw std::invalid_argument("prior.modes must have three entries");
    c.prior.modes = ParamVec(modes[0], modes[1], modes[2]);
    p.get("shape", c.prior.shape);
    p.finish();
  }
  {
    Section f = root.sub("filter");
    auto& a = c.filter.assoc;
    f.get("n_particles", c.n_particles);
    f.get("ess_threshold", c.filter.ess_threshold);
    f.get("birth_block_diagonal", c.filter.birth_block_diagonal);
    f.get("share_computation", c.filter.share_computation);
    std::string exec = "serial";
    f.get("execution", exec);
    c.filter.execution = parse_enum<ExecutionMode>(exec, {{"serial", ExecutionMode::serial}, {"parallel", ExecutionMode::parallel}},
                                    "filter.execution");
    f.get("parallel_min_groups", c.filter.parallel_min_groups);
    f.get("clutter_prob", a.clutter_prob);
    std::string ck = "uniform_window";
    f.get("clutter_density_kind", ck);
    a.clutter_kind = parse_enum<ClutterDensityKind>(
        ck, {{"uniform_window", ClutterDensityKind::uniform_window}, {"constant", ClutterDensityKind::constant}},
        "filter.clutter_density_kind");
    f.get("clutter_density", a.clutter_density);
    read_window(f.sub("window"), a.window);
    f.get_optional("death_threshold", a.death_threshold);
    std::string nt = "latent_count";
    f.get("new_target_prior", nt);
    a.new_target_kind = parse_enum<NewTargetPriorKind>(
        nt, {{"latent_count", NewTargetPriorKind::latent_count}, {"fixed", NewTargetPriorKind::fixed}},
        "filter.new_target_prior");
    f.get("fixed_new_prob", a.fixed_new_prob);
    f.get("latent_count_max", a.latent_count_max);
    f.get_optional("forced_history", c.forced_history);
    f.finish();
  }
  {
    Section s = root.sub("sampler");
    auto& sm = c.sampler;
    std::string alg = algorithm_name(sm.algorithm);
    s.get("algorithm", alg);
    try {
      sm.algorithm = parse_algorithm(alg);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("sampler.algorithm: ") + e.what());
    }
    s.get("iterations", sm.iterations);
    s.get("adapt_start", sm.adapt_start);
    s.get("adapt_end", sm.adapt_end);
    s.get("jitter", sm.jitter);
    std::optional<std::vector<double>> sd;
    s.get_optional("initial_proposal_sd", sd);
    if (sd) {
      if (sd->size() != 3) throw std::invalid_argument("sampler.initial_proposal_sd must have three entries");
      sm.initial_proposal_sd = ParamVec((*sd)[0], (*sd)[1], (*sd)[2]);
    }
    s.get("fix_parameters", sm.fix_parameters);
    std::vector<bool> mask{sm.sample_mask[0], sm.sample_mask[1], sm.sample_mask[2]};
    s.get("sample_mask", mask);
    if (mask.size() != 3) throw std::invalid_argument("sampler.sample_mask must have three entries");
    sm.sample_mask = {mask[0], mask[1], mask[2]};
    s.get("refresh_count", sm.refresh_count);
    s.get("store_histories", sm.store_histories);
    s.finish();
  }
  {
    Section ch = root.sub("chains");
    ch.get("count", c.chains);
    ch.get("seeds", c.chain_seeds);
    ch.finish();
  }
  {
    Section s = root.sub("scenario");
    auto& sc = c.scenario;
    s.get("n_targets", sc.n_targets);
    s.get("n_obs", sc.n_obs);
    read_window(s.sub("window"), sc.window);
    s.get("t_min", sc.t_min);
    s.get("t_max", sc.t_max);
    read_params(s.sub("truth"), sc.truth);
    s.get("max_attempts", sc.max_attempts);
    s.finish();
  }
  {
    Section in = root.sub("input");
    in.get("scenario", c.scenario_path);
    in.finish();
  }
  {
    Section d = root.sub("diagnose");
    auto& dc = c.diagnose;
    d.get("runs", dc.runs);
    d.get("baseline", dc.baseline);
    d.get("reference", dc.reference);
    d.get("scenario", dc.scenario);
    d.get("truth_states", dc.truth_states);
    d.get("ospa_cutoff", dc.ospa_cutoff);
    d.get("ospa_order", dc.ospa_order);
    d.get("warmup_fraction", dc.warmup_fraction);
    d.get("ospa_thin", dc.ospa_thin);
    d.get("curve_points", dc.curve_points);
    d.finish();
  }
  root.finish();
  c.scenario.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

}  // namespace rbmcda
