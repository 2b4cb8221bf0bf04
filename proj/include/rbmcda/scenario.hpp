#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbmcda/association.hpp"
#include "rbmcda/linalg.hpp"
#include "rbmcda/motion_models.hpp"

namespace rbmcda {

struct Observation {
  double t = 0.0;
  Vec2 y = Vec2::Zero();
};

/// Time-ordered measurements with optional ground truth.
struct Scenario {
  std::vector<Observation> observations;
  std::optional<AssocHistory> truth_assoc;
  // truth_states[target][k]: state [mu1, mu2, p1, p2] at observation time k
  std::optional<std::vector<std::vector<Eigen::Vector4d>>> truth_states;

  std::size_t size() const { return observations.size(); }
  std::vector<double> times() const;
  std::vector<Vec2> points() const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline constexpr int kScenarioFormatVersion = 1;

/// Columns t,y1,y2[,truth_assoc]. Doubles are written round-trip exact.
void scenario_to_csv(const Scenario& s, std::ostream& out);

/// Accepts an optional "# format_version=N" line, a header row, and data rows.
/// Rows are stably sorted by time after loading.
Scenario scenario_from_csv(std::istream& in);

/// Per-target states at every observation time: target,k,t,mu1,mu2,p1,p2.
void truth_states_to_csv(const Scenario& s, std::ostream& out);
void truth_states_from_csv(std::istream& in, Scenario& s);

/// Locations of all targets at the last observation time.
std::vector<Vec2> final_truth_locations(const Scenario& s);

}  // namespace rbmcda
