#include "rbmcda/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rbmcda/csv.hpp"

namespace rbmcda {

using nlohmann::json;

namespace {

json history_json(const AssocHistory& h) { return json(h); }

AssocHistory history_from(const json& j) { return j.get<AssocHistory>(); }

void check_version(const json& j, int line) {
  if (!j.contains("format_version") || j["format_version"] != kTraceFormatVersion) {
    throw ParseError("histories jsonl: line " + std::to_string(line) + ": unsupported format_version", line);
  }
}

}  // namespace

std::string algorithm_name(Algorithm a) { return a == Algorithm::pmmh ? "pmmh" : "pgibbs"; }

Algorithm parse_algorithm(const std::string& s) {
  if (s == "pmmh") return Algorithm::pmmh;
  if (s == "pgibbs") return Algorithm::pgibbs;
  throw std::invalid_argument("unknown algorithm '" + s + "' (expected pmmh or pgibbs)");
}

void write_trace_csv(const Trace& trace, std::ostream& out, int chain) {
  using csv::format_double;
  out << "# format_version=" << kTraceFormatVersion << "\n";
  out << "chain,algorithm,iteration,sqrt_q,lambda,sigma,q,accepted,loglik,u,num_targets,kalman_calls\n";
  const std::string alg = algorithm_name(trace.algorithm);
  for (const auto& r : trace.rows) {
    out << chain << ',' << alg << ',' << r.iteration << ',' << format_double(std::sqrt(r.theta.q)) << ','
        << format_double(r.theta.lambda) << ',' << format_double(r.theta.sigma) << ',' << format_double(r.theta.q)
        << ',' << (r.accepted ? 1 : 0) << ',' << format_double(r.loglik) << ',' << format_double(r.u) << ','
        << r.num_targets << ',' << r.kalman_calls << '\n';
  }
}

Trace read_trace_csv(std::istream& in) {
  csv::Reader reader(in);
  const auto& h = reader.header();
  if (h.format_version != kTraceFormatVersion) {
    throw ParseError("trace csv: unsupported or missing format_version", h.line);
  }
  const int c_alg = h.index_of("algorithm");
  const int c_it = h.index_of("iteration");
  const int c_q = h.index_of("q");
  const int c_l = h.index_of("lambda");
  const int c_s = h.index_of("sigma");
  const int c_acc = h.index_of("accepted");
  const int c_ll = h.index_of("loglik");
  const int c_u = h.index_of("u");
  const int c_t = h.index_of("num_targets");
  const int c_k = h.index_of("kalman_calls");
  Trace trace;
  csv::Row row;
  bool first = true;
  while (reader.next(row)) {
    Algorithm alg;
    try {
      alg = parse_algorithm(row.get(c_alg));
    } catch (const std::invalid_argument& e) {
      throw ParseError("trace csv: line " + std::to_string(row.line) + ": " + e.what(), row.line);
    }
    if (first) {
      trace.algorithm = alg;
      first = false;
    } else if (alg != trace.algorithm) {
      throw ParseError("trace csv: line " + std::to_string(row.line) + ": mixed algorithms", row.line);
    }
    TraceRow r;
    r.iteration = static_cast<int>(row.get_int(c_it));
    if (r.iteration != static_cast<int>(trace.rows.size()) + 1) {
      throw ParseError("trace csv: line " + std::to_string(row.line) + ": iterations must be consecutive from 1",
                       row.line);
    }
    r.theta = ModelParams{row.get_double(c_q), row.get_double(c_l), row.get_double(c_s)};
    r.accepted = row.get_int(c_acc) != 0;
    r.loglik = row.get_double(c_ll);
    r.u = row.get_double(c_u);
    r.num_targets = static_cast<int>(row.get_int(c_t));
    r.kalman_calls = static_cast<std::uint64_t>(row.get_int(c_k));
    trace.rows.push_back(r);
  }
  return trace;
}

void write_histories_jsonl(const Trace& trace, std::ostream& out) {
  if (trace.algorithm == Algorithm::pgibbs) {
    for (std::size_t i = 0; i < trace.histories.size(); ++i) {
      json j{{"format_version", kTraceFormatVersion},
             {"iteration", static_cast<int>(i) + 1},
             {"history", history_json(trace.histories[i])}};
      out << j.dump() << '\n';
    }
    return;
  }
  for (std::size_t s = 0; s < trace.particle_sets.size(); ++s) {
    json particles = json::array();
    for (const auto& p : trace.particle_sets[s]) {
      particles.push_back({{"weight", p.weight}, {"num_targets", p.num_targets}, {"history", history_json(p.history)}});
    }
    const double u = s == 0 ? trace.initial_u : trace.rows.at(s - 1).u;
    json j{{"format_version", kTraceFormatVersion}, {"set", static_cast<int>(s)}, {"u", u}};
    if (s < trace.set_thetas.size()) {
      const auto& th = trace.set_thetas[s];
      j["theta"] = {th.q, th.lambda, th.sigma};
    }
    j["particles"] = std::move(particles);
    out << j.dump() << '\n';
  }
}

void read_histories_jsonl(std::istream& in, Trace& trace) {
  std::string line;
  int n = 0;
  trace.histories.clear();
  trace.particle_sets.clear();
  trace.set_thetas.clear();
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      check_version(j, n);
      if (trace.algorithm == Algorithm::pgibbs) {
        if (j.at("iteration").get<int>() != static_cast<int>(trace.histories.size()) + 1) {
          throw ParseError("histories jsonl: line " + std::to_string(n) + ": iterations must be consecutive", n);
        }
        trace.histories.push_back(history_from(j.at("history")));
      } else {
        if (j.at("set").get<int>() != static_cast<int>(trace.particle_sets.size())) {
          throw ParseError("histories jsonl: line " + std::to_string(n) + ": sets must be consecutive", n);
        }
        std::vector<WeightedHistory> set;
        for (const auto& p : j.at("particles")) {
          set.push_back({p.at("weight").get<double>(), p.at("num_targets").get<int>(), history_from(p.at("history"))});
        }
        if (trace.particle_sets.empty()) trace.initial_u = j.at("u").get<double>();
        trace.particle_sets.push_back(std::move(set));
        if (j.contains("theta")) {
          const auto th = j["theta"].get<std::vector<double>>();
          if (th.size() != 3) throw ParseError("histories jsonl: theta must have 3 entries", n);
          trace.set_thetas.push_back(ModelParams{th[0], th[1], th[2]});
        }
      }
    } catch (const json::exception& e) {
      throw ParseError("histories jsonl: line " + std::to_string(n) + ": " + e.what(), n);
    }
  }
}

void write_particles_jsonl(const ParticleSet& set, std::ostream& out) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& p = set.particles[i];
    json j{{"format_version", kTraceFormatVersion},
           {"index", static_cast<int>(i)},
           {"weight", std::exp(p.log_weight)},
           {"log_weight", p.log_weight},
           {"num_targets", p.summary.T_seen},
           {"num_visible", p.summary.num_visible()},
           {"cond_loglik", p.cond_loglik},
           {"history", history_json(p.history)}};
    out << j.dump() << '\n';
  }
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace rbmcda
