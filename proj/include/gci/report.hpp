#pragma once

#include <string>
#include <utility>
#include <vector>

namespace gci {

// One benchmark run. Serialized order matches the field order here.
struct RunRecord {
  std::string instance_id;
  int m = 0;
  int n = 0;
  std::string cost_kind;  // isr | log | ncf
  std::string method;     // sgm | direct | twolevel
  std::string status;     // Solved | TimeLimit | SolverExhausted
  double wall_time_s = 0.0;
  long iterations_stage1 = 0;
  long iterations_stage2 = 0;  // zero for single-stage methods
  double certified_regret = 0.0;
};

extern const char* kRunRecordHeader;

std::string record_to_csv_line(const RunRecord& r);
std::string records_to_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_csv(const std::string& text);

// Fraction of instances each method solves within a factor tau of the fastest
// solver, as a step curve over tau >= 1. Unsolved runs count as infinitely
// slow but stay in the denominator.
struct ProfileCurve {
  std::string method;
  std::vector<std::pair<double, double>> points;  // (tau, fraction)
};

std::vector<ProfileCurve> performance_profiles(const std::vector<RunRecord>& records);
std::string profiles_to_csv(const std::vector<ProfileCurve>& curves);
std::string profiles_to_svg(const std::vector<ProfileCurve>& curves);

// Aggregates per (cost kind x player-count band, method): share solved,
// geometric mean of solved wall times, mean first-stage iterations on solved
// runs. Bands: players 2-4 and 5-7.
struct StatsRow {
  std::string subset;  // e.g. log234, root567, nonconvex234
  std::string method;
  int runs = 0;
  int solved = 0;
  double solved_pct = 0.0;
  double geomean_time_s = 0.0;
  double mean_iterations = 0.0;
};

std::vector<StatsRow> stats_summary(const std::vector<RunRecord>& records);
std::string stats_to_text(const std::vector<StatsRow>& rows);

}  // namespace gci
