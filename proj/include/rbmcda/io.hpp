#pragma once

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "rbmcda/pmcmc.hpp"

namespace rbmcda {

inline constexpr int kTraceFormatVersion = 1;

/// One row per iteration: parameters in both coordinate systems, acceptance,
/// log-likelihood, occupancy weight, number of targets and Kalman-call stamp.
void write_trace_csv(const Trace& trace, std::ostream& out, int chain = 0);
Trace read_trace_csv(std::istream& in);

/// Retained histories (PGibbs, one line per iteration) or particle sets
/// (PMMH, one line per set including the initial one), as JSON lines.
void write_histories_jsonl(const Trace& trace, std::ostream& out);
/// Fills histories / particle sets of a trace already read from CSV.
void read_histories_jsonl(std::istream& in, Trace& trace);

/// One JSON line per particle of a filter run.
void write_particles_jsonl(const ParticleSet& set, std::ostream& out);

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

/// 64-bit FNV-1a of a string, as 16 hex digits.
std::string fnv1a_hex(const std::string& s);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rbmcda
