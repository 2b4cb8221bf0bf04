#include "rbmcda/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rbmcda/csv.hpp"

namespace rbmcda {

std::vector<double> Scenario::times() const {
  std::vector<double> out;
  out.reserve(observations.size());
  for (const auto& o : observations) out.push_back(o.t);
  return out;
}

std::vector<Vec2> Scenario::points() const {
  std::vector<Vec2> out;
  out.reserve(observations.size());
  for (const auto& o : observations) out.push_back(o.y);
  return out;
}

void scenario_to_csv(const Scenario& s, std::ostream& out) {
  const bool truth = s.truth_assoc.has_value();
  out << "# format_version=" << kScenarioFormatVersion << "\n";
  out << (truth ? "t,y1,y2,truth_assoc\n" : "t,y1,y2\n");
  for (std::size_t k = 0; k < s.observations.size(); ++k) {
    const auto& o = s.observations[k];
    out << csv::format_double(o.t) << ',' << csv::format_double(o.y(0)) << ',' << csv::format_double(o.y(1));
    if (truth) out << ',' << (*s.truth_assoc)[k];
    out << '\n';
  }
}

Scenario scenario_from_csv(std::istream& in) {
  csv::Reader reader(in);
  const auto header = reader.header();
  const int col_t = header.index_of("t");
  const int col_y1 = header.index_of("y1");
  const int col_y2 = header.index_of("y2");
  const int col_c = header.find("truth_assoc");
  if (col_t < 0 || col_y1 < 0 || col_y2 < 0) {
    throw ParseError("scenario csv: header must contain t, y1, y2", header.line);
  }

  struct Row {
    Observation obs;
    Assoc c = 0;
  };
  std::vector<Row> rows;
  csv::Row r;
  while (reader.next(r)) {
    Row row;
    row.obs.t = r.get_double(col_t);
    row.obs.y = Vec2(r.get_double(col_y1), r.get_double(col_y2));
    if (col_c >= 0) row.c = static_cast<Assoc>(r.get_int(col_c));
    if (row.c < 0) throw ParseError("scenario csv: negative truth_assoc", r.line);
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.obs.t < b.obs.t; });

  Scenario s;
  s.observations.reserve(rows.size());
  for (const auto& row : rows) s.observations.push_back(row.obs);
  if (col_c >= 0) {
    AssocHistory c;
    c.reserve(rows.size());
    for (const auto& row : rows) c.push_back(row.c);
    s.truth_assoc = canonicalize(c);
  }
  return s;
}

void truth_states_to_csv(const Scenario& s, std::ostream& out) {
  out << "# format_version=" << kScenarioFormatVersion << "\n";
  out << "target,k,t,mu1,mu2,p1,p2\n";
  if (!s.truth_states) return;
  const auto& ts = *s.truth_states;
  for (std::size_t j = 0; j < ts.size(); ++j) {
    for (std::size_t k = 0; k < ts[j].size(); ++k) {
      out << (j + 1) << ',' << k << ',' << csv::format_double(s.observations[k].t);
      for (int d = 0; d < 4; ++d) out << ',' << csv::format_double(ts[j][k](d));
      out << '\n';
    }
  }
}

void truth_states_from_csv(std::istream& in, Scenario& s) {
  csv::Reader reader(in);
  const auto header = reader.header();
  const int cj = header.index_of("target");
  const int ck = header.index_of("k");
  const int cols[4] = {header.index_of("mu1"), header.index_of("mu2"), header.index_of("p1"), header.index_of("p2")};
  std::vector<std::vector<Eigen::Vector4d>> ts;
  csv::Row r;
  const std::size_t m = s.observations.size();
  while (reader.next(r)) {
    const long j = r.get_int(cj);
    const long k = r.get_int(ck);
    if (j < 1 || k < 0 || static_cast<std::size_t>(k) >= m) {
      throw ParseError("truth csv: target/k out of range", r.line);
    }
    if (static_cast<std::size_t>(j) > ts.size()) ts.resize(j, std::vector<Eigen::Vector4d>(m, Eigen::Vector4d::Zero()));
    for (int d = 0; d < 4; ++d) ts[j - 1][k](d) = r.get_double(cols[d]);
  }
  s.truth_states = std::move(ts);
}

std::vector<Vec2> final_truth_locations(const Scenario& s) {
  std::vector<Vec2> out;
  if (!s.truth_states || s.observations.empty()) return out;
  for (const auto& traj : *s.truth_states) out.push_back(traj.back().tail<2>());
  return out;
}

}  // namespace rbmcda
