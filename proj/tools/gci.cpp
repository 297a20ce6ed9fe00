#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gci/game.hpp"
#include "gci/report.hpp"
#include "gci/sgm.hpp"

namespace {

using gci::CostKind;
using gci::GciInstance;
using gci::MixedProfile;
using gci::ProcedureResult;
using gci::RunRecord;
using gci::SgmStatus;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t cell_seed(std::uint64_t base, int m, int n, int kind_idx, int idx) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t v : {std::uint64_t(m), std::uint64_t(n), std::uint64_t(kind_idx),
                          std::uint64_t(idx)})
    s = splitmix64(s ^ (v + 0x9e3779b97f4a7c15ULL));
  return s;
}

nlohmann::json profile_to_json(const MixedProfile& profile) {
  nlohmann::json players = nlohmann::json::array();
  for (const gci::MixedStrategy& mix : profile) {
    nlohmann::json strategies = nlohmann::json::array();
    for (const gci::PureStrategy& st : mix.support) {
      strategies.push_back({{"Q", st.quantity},
                            {"b", std::vector<int>(st.entry.begin(), st.entry.end())},
                            {"s", st.security}});
    }
    players.push_back({{"probs", mix.probs}, {"strategies", std::move(strategies)}});
  }
  return {{"players", std::move(players)}};
}

MixedProfile profile_from_json(const nlohmann::json& j) {
  MixedProfile profile;
  for (const auto& pj : j.at("players")) {
    gci::MixedStrategy mix;
    mix.probs = pj.at("probs").get<std::vector<double>>();
    for (const auto& sj : pj.at("strategies")) {
      gci::PureStrategy st;
      st.quantity = sj.at("Q").get<std::vector<double>>();
      for (int b : sj.at("b").get<std::vector<int>>()) st.entry.push_back(std::uint8_t(b));
      st.security = sj.at("s").get<double>();
      mix.support.push_back(std::move(st));
    }
    profile.push_back(std::move(mix));
  }
  return profile;
}

struct SolveParams {
  std::string method = "twolevel";
  double delta_f = 1e-4;
  double mu = 0.5;
  double delta_0 = 0.05;
  double time_limit = 900.0;
};

struct SolveSummary {
  MixedProfile profile;
  std::string status;
  double wall_time_s = 0.0;
  long iterations_stage1 = 0;
  long iterations_stage2 = 0;
};

SolveSummary run_method(const GciInstance& inst, const SolveParams& p) {
  SolveSummary out;
  const auto t0 = std::chrono::steady_clock::now();
  if (p.method == "sgm") {
    gci::SgmConfig cfg;
    cfg.delta = p.delta_f;
    cfg.delta_gap = gci::default_delta_gap(p.delta_f, p.mu);
    cfg.delta_M = p.delta_f / 10.0;
    cfg.time_limit_s = p.time_limit;
    const gci::GameView exact{&inst, {}};
    gci::SgmOutcome res = gci::run_sgm(exact, cfg);
    out.profile = std::move(res.profile);
    out.status = gci::to_string(res.status);
    out.iterations_stage1 = res.iterations;
  } else if (p.method == "direct") {
    ProcedureResult res = gci::direct_procedure(inst, p.delta_f, p.mu, p.time_limit);
    out.profile = std::move(res.profile);
    out.status = gci::to_string(res.stage1.status);
    out.iterations_stage1 = res.stage1.iterations;
  } else if (p.method == "twolevel") {
    ProcedureResult res =
        gci::two_level_procedure(inst, p.delta_f, p.delta_0, p.mu, p.time_limit);
    out.profile = std::move(res.profile);
    out.status = gci::to_string(res.stage2 ? res.stage2->status : res.stage1.status);
    out.iterations_stage1 = res.stage1.iterations;
    out.iterations_stage2 = res.stage2 ? res.stage2->iterations : 0;
  } else {
    throw CLI::ValidationError("--method", "unknown method: " + p.method);
  }
  out.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

RunRecord make_record(const std::string& id, const GciInstance& inst,
                      const std::string& method, const SolveSummary& sum,
                      double certified_regret) {
  RunRecord r;
  r.instance_id = id;
  r.m = inst.num_players();
  r.n = inst.num_markets();
  r.cost_kind = gci::to_string(inst.cost_kind);
  r.method = method;
  r.status = sum.status;
  r.wall_time_s = sum.wall_time_s;
  r.iterations_stage1 = sum.iterations_stage1;
  r.iterations_stage2 = sum.iterations_stage2;
  r.certified_regret = certified_regret;
  return r;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

int run_bench(const std::vector<int>& ms, const std::vector<int>& ns,
              const std::vector<std::string>& kinds, const std::vector<std::string>& methods,
              int count, std::uint64_t seed, const SolveParams& base, const std::string& out_csv,
              int jobs) {
  struct Task {
    std::string id;
    int m, n, kind_idx;
    std::string kind;
    std::string method;
    std::uint64_t seed;
  };

  std::set<std::pair<std::string, std::string>> done;
  bool have_file = std::filesystem::exists(out_csv);
  if (have_file) {
    for (const RunRecord& r : gci::records_from_csv(read_file(out_csv)))
      done.insert({r.instance_id, r.method});
  }

  std::vector<Task> tasks;
  for (const std::string& kind : kinds) {
    const int kind_idx = int(gci::cost_kind_from_string(kind));
    for (int m : ms) {
      for (int n : ns) {
        for (int idx = 0; idx < count; ++idx) {
          std::ostringstream id;
          id << "m" << m << "n" << n << "-" << kind << "-" << idx;
          for (const std::string& method : methods) {
            if (done.count({id.str(), method})) continue;
            tasks.push_back({id.str(), m, n, kind_idx, kind, method,
                             cell_seed(seed, m, n, kind_idx, idx)});
          }
        }
      }
    }
  }

  std::ofstream out(out_csv, std::ios::app);
  if (!out) throw std::runtime_error("cannot open " + out_csv);
  if (!have_file) out << gci::kRunRecordHeader << "\n" << std::flush;

  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    while (true) {
      Task task;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= tasks.size()) return;
        task = tasks[next++];
        std::cerr << "[bench] " << task.id << " " << task.method << "\n";
      }
      const GciInstance inst = gci::generate_instance(
          task.m, task.n, gci::cost_kind_from_string(task.kind), task.seed);
      SolveParams p = base;
      p.method = task.method;
      const SolveSummary sum = run_method(inst, p);
      const double certified = gci::certify_equilibrium(
          inst, sum.profile, gci::default_delta_gap(p.delta_f, p.mu));
      const RunRecord rec = make_record(task.id, inst, task.method, sum, certified);
      {
        std::lock_guard<std::mutex> lock(mu);
        out << gci::record_to_csv_line(rec) << "\n" << std::flush;
      }
    }
  };

  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, jobs); ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate-equilibrium toolkit for the cybersecurity investment game"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a random instance as JSON");
  int gen_m = 2, gen_n = 2;
  std::string gen_kind = "log";
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--m", gen_m, "number of players")->check(CLI::Range(2, 100));
  gen->add_option("--n", gen_n, "number of markets")->check(CLI::Range(1, 100));
  gen->add_option("--kind", gen_kind, "cost kind: isr|log|ncf");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output path")->required();

  // solve
  auto* solve = app.add_subcommand("solve", "Compute a certified approximate equilibrium");
  std::string solve_instance;
  SolveParams params;
  std::string solve_out, solve_record;
  solve->add_option("instance", solve_instance, "instance JSON path")->required();
  solve->add_option("--method", params.method, "sgm|direct|twolevel");
  solve->add_option("--delta-f", params.delta_f, "target tolerance");
  solve->add_option("--mu", params.mu, "approximation split in (0,1)");
  solve->add_option("--delta-0", params.delta_0, "coarse stage tolerance");
  solve->add_option("--time-limit", params.time_limit, "seconds per run");
  solve->add_option("--out", solve_out, "write the profile JSON here");
  solve->add_option("--record", solve_record, "append the run record to this CSV");

  // certify
  auto* certify = app.add_subcommand("certify", "Re-check a stored profile");
  std::string cert_instance, cert_solution;
  double cert_delta_f = 1e-4, cert_mu = 0.5;
  certify->add_option("instance", cert_instance, "instance JSON path")->required();
  certify->add_option("solution", cert_solution, "profile JSON path")->required();
  certify->add_option("--delta-f", cert_delta_f, "claimed tolerance");
  certify->add_option("--mu", cert_mu, "approximation split used by the solver");

  // bench
  auto* bench = app.add_subcommand("bench", "Run a seeded benchmark grid (resumable)");
  std::vector<int> bench_m{2, 3}, bench_n{2, 3};
  std::vector<std::string> bench_kinds{"isr", "log", "ncf"};
  std::vector<std::string> bench_methods{"sgm", "direct", "twolevel"};
  int bench_count = 2, bench_jobs = 1;
  std::uint64_t bench_seed = 0;
  std::string bench_out;
  SolveParams bench_params;
  bench->add_option("--m", bench_m, "player counts")->delimiter(',');
  bench->add_option("--n", bench_n, "market counts")->delimiter(',');
  bench->add_option("--kind", bench_kinds, "cost kinds")->delimiter(',');
  bench->add_option("--methods", bench_methods, "methods to run")->delimiter(',');
  bench->add_option("--count", bench_count, "instances per cell")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "base seed");
  bench->add_option("--delta-f", bench_params.delta_f, "target tolerance");
  bench->add_option("--mu", bench_params.mu, "approximation split");
  bench->add_option("--delta-0", bench_params.delta_0, "coarse stage tolerance");
  bench->add_option("--time-limit", bench_params.time_limit, "seconds per run");
  bench->add_option("--jobs", bench_jobs, "worker threads")->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "records CSV (appended)")->required();

  // profile
  auto* profile = app.add_subcommand("profile", "Performance profiles from a records CSV");
  std::string prof_in, prof_svg, prof_csv;
  profile->add_option("--in", prof_in, "records CSV")->required();
  profile->add_option("--out-svg", prof_svg, "SVG output path");
  profile->add_option("--out-csv", prof_csv, "curve CSV output path");

  // stats
  auto* stats = app.add_subcommand("stats", "Summary table from a records CSV");
  std::string stats_in;
  stats->add_option("--in", stats_in, "records CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const GciInstance inst =
          gci::generate_instance(gen_m, gen_n, gci::cost_kind_from_string(gen_kind), gen_seed);
      gci::save_instance(inst, gen_out);
      std::cout << "wrote " << gen_out << "\n";
      return 0;
    }

    if (solve->parsed()) {
      const GciInstance inst = gci::load_instance(solve_instance);
      const SolveSummary sum = run_method(inst, params);
      const double certified = gci::certify_equilibrium(
          inst, sum.profile, gci::default_delta_gap(params.delta_f, params.mu));
      const std::string id = std::filesystem::path(solve_instance).stem().string();
      const RunRecord rec = make_record(id, inst, params.method, sum, certified);

      std::cout << gci::kRunRecordHeader << "\n" << gci::record_to_csv_line(rec) << "\n";
      if (!solve_out.empty()) write_file(solve_out, profile_to_json(sum.profile).dump(2) + "\n");
      if (!solve_record.empty()) {
        const bool fresh = !std::filesystem::exists(solve_record);
        std::ofstream rc(solve_record, std::ios::app);
        if (!rc) throw std::runtime_error("cannot open " + solve_record);
        if (fresh) rc << gci::kRunRecordHeader << "\n";
        rc << gci::record_to_csv_line(rec) << "\n";
      }
      return 0;
    }

    if (certify->parsed()) {
      const GciInstance inst = gci::load_instance(cert_instance);
      nlohmann::json j = nlohmann::json::parse(read_file(cert_solution));
      const MixedProfile prof = profile_from_json(j);
      const double gap = gci::default_delta_gap(cert_delta_f, cert_mu);
      const double regret = gci::certify_equilibrium(inst, prof, gap);
      const double threshold = cert_delta_f + gap + 1e-9;
      std::cout << "certified_regret " << regret << "\n";
      std::cout << "threshold " << threshold << "\n";
      std::cout << (regret <= threshold ? "PASS" : "FAIL") << "\n";
      return 0;
    }

    if (bench->parsed()) {
      return run_bench(bench_m, bench_n, bench_kinds, bench_methods, bench_count, bench_seed,
                       bench_params, bench_out, bench_jobs);
    }

    if (profile->parsed()) {
      const std::vector<RunRecord> records = gci::records_from_csv(read_file(prof_in));
      const std::vector<gci::ProfileCurve> curves = gci::performance_profiles(records);
      if (!prof_csv.empty()) write_file(prof_csv, gci::profiles_to_csv(curves));
      if (!prof_svg.empty()) write_file(prof_svg, gci::profiles_to_svg(curves));
      if (prof_csv.empty() && prof_svg.empty()) std::cout << gci::profiles_to_csv(curves);
      return 0;
    }

    if (stats->parsed()) {
      const std::vector<RunRecord> records = gci::records_from_csv(read_file(stats_in));
      std::cout << gci::stats_to_text(gci::stats_summary(records));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
