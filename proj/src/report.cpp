#include "gci/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gci {
namespace {

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string band_subset(const RunRecord& r) {
  std::string kind;
  if (r.cost_kind == "isr")
    kind = "root";
  else if (r.cost_kind == "log")
    kind = "log";
  else if (r.cost_kind == "ncf")
    kind = "nonconvex";
  else
    kind = r.cost_kind;
  return kind + (r.m <= 4 ? "234" : "567");
}

}  // namespace

const char* kRunRecordHeader =
    "instance_id,m,n,cost_kind,method,status,wall_time_s,iterations_stage1,"
    "iterations_stage2,certified_regret";

std::string record_to_csv_line(const RunRecord& r) {
  if (r.instance_id.find(',') != std::string::npos)
    throw std::invalid_argument("run record: instance_id must not contain commas");
  std::ostringstream out;
  out << r.instance_id << ',' << r.m << ',' << r.n << ',' << r.cost_kind << ',' << r.method
      << ',' << r.status << ',' << fmt_double(r.wall_time_s) << ',' << r.iterations_stage1
      << ',' << r.iterations_stage2 << ',' << fmt_double(r.certified_regret);
  return out.str();
}

std::string records_to_csv(const std::vector<RunRecord>& records) {
  std::string out = kRunRecordHeader;
  out.push_back('\n');
  for (const RunRecord& r : records) {
    out += record_to_csv_line(r);
    out.push_back('\n');
  }
  return out;
}

std::vector<RunRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<RunRecord> out;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kRunRecordHeader)
        throw std::invalid_argument("records_from_csv: unexpected header: " + line);
      saw_header = true;
      continue;
    }
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 10)
      throw std::invalid_argument("records_from_csv: expected 10 fields, got line: " + line);
    RunRecord r;
    r.instance_id = f[0];
    r.m = std::stoi(f[1]);
    r.n = std::stoi(f[2]);
    r.cost_kind = f[3];
    r.method = f[4];
    r.status = f[5];
    r.wall_time_s = std::stod(f[6]);
    r.iterations_stage1 = std::stol(f[7]);
    r.iterations_stage2 = std::stol(f[8]);
    r.certified_regret = std::stod(f[9]);
    out.push_back(std::move(r));
  }
  if (!saw_header) throw std::invalid_argument("records_from_csv: missing header");
  return out;
}

std::vector<ProfileCurve> performance_profiles(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::invalid_argument("performance_profiles: no records");

  std::set<std::string> methods;
  std::set<std::string> instances;
  std::map<std::pair<std::string, std::string>, const RunRecord*> cell;
  for (const RunRecord& r : records) {
    methods.insert(r.method);
    instances.insert(r.instance_id);
    const auto key = std::make_pair(r.instance_id, r.method);
    if (!cell.emplace(key, &r).second)
      throw std::invalid_argument("performance_profiles: duplicate run for instance " +
                                  r.instance_id + ", method " + r.method);
  }
  for (const std::string& inst : instances)
    for (const std::string& meth : methods)
      if (!cell.count({inst, meth}))
        throw std::invalid_argument("performance_profiles: method " + meth +
                                    " missing a run on instance " + inst);

  const double inf = std::numeric_limits<double>::infinity();
  std::map<std::string, std::vector<double>> ratios;
  for (const std::string& inst : instances) {
    double best = inf;
    for (const std::string& meth : methods) {
      const RunRecord* r = cell[{inst, meth}];
      if (r->status == "Solved") best = std::min(best, std::max(r->wall_time_s, 1e-12));
    }
    for (const std::string& meth : methods) {
      const RunRecord* r = cell[{inst, meth}];
      const bool solved = r->status == "Solved";
      ratios[meth].push_back(solved ? std::max(r->wall_time_s, 1e-12) / best : inf);
    }
  }

  const double denom = double(instances.size());
  std::vector<ProfileCurve> curves;
  for (const std::string& meth : methods) {
    std::vector<double>& rs = ratios[meth];
    std::sort(rs.begin(), rs.end());
    ProfileCurve curve;
    curve.method = meth;
    std::size_t covered = 0;
    while (covered < rs.size() && rs[covered] <= 1.0) ++covered;
    curve.points.emplace_back(1.0, double(covered) / denom);
    std::size_t k = covered;
    while (k < rs.size() && std::isfinite(rs[k])) {
      const double tau = rs[k];
      while (k < rs.size() && rs[k] == tau) ++k;
      curve.points.emplace_back(tau, double(k) / denom);
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

std::string profiles_to_csv(const std::vector<ProfileCurve>& curves) {
  std::string out = "method,tau,fraction\n";
  for (const ProfileCurve& c : curves) {
    for (const auto& [tau, frac] : c.points) {
      out += c.method;
      out.push_back(',');
      out += fmt_double(tau);
      out.push_back(',');
      out += fmt_double(frac);
      out.push_back('\n');
    }
  }
  return out;
}

std::string profiles_to_svg(const std::vector<ProfileCurve>& curves) {
  const double width = 720, height = 480;
  const double ml = 70, mr = 24, mt = 24, mb = 56;
  const double pw = width - ml - mr;
  const double ph = height - mt - mb;

  double tau_max = 10.0;
  for (const ProfileCurve& c : curves)
    for (const auto& [tau, frac] : c.points) tau_max = std::max(tau_max, tau);
  const double lmax = std::log10(tau_max) * 1.02;

  auto X = [&](double tau) { return ml + pw * (std::log10(std::max(tau, 1.0)) / lmax); };
  auto Y = [&](double frac) { return mt + ph * (1.0 - frac); };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  for (double frac = 0.0; frac <= 1.0001; frac += 0.25) {
    svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << Y(frac) << "\" x2=\"" << ml << "\" y2=\""
        << Y(frac) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << Y(frac) + 4
        << "\" text-anchor=\"end\" font-size=\"12\">" << frac << "</text>\n";
  }
  for (double dec = 1.0; dec <= tau_max * 1.0001; dec *= 10.0) {
    svg << "<line x1=\"" << X(dec) << "\" y1=\"" << mt + ph << "\" x2=\"" << X(dec)
        << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << X(dec) << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"12\">" << fmt_double(dec) << "</text>\n";
  }
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">performance ratio (log scale)</text>\n";
  svg << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << mt + ph / 2 << ")\">fraction of instances</text>\n";

  int ci = 0;
  for (const ProfileCurve& c : curves) {
    const char* color = kColors[ci % 6];
    std::ostringstream pts;
    double last_frac = 0.0;
    bool started = false;
    for (const auto& [tau, frac] : c.points) {
      if (!started) {
        pts << X(tau) << "," << Y(frac) << " ";
        started = true;
      } else {
        pts << X(tau) << "," << Y(last_frac) << " ";  // horizontal step
        pts << X(tau) << "," << Y(frac) << " ";
      }
      last_frac = frac;
    }
    pts << X(tau_max) << "," << Y(last_frac);
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
        << pts.str() << "\"/>\n";
    svg << "<text x=\"" << ml + 12 << "\" y=\"" << mt + 18 + 18 * ci
        << "\" font-size=\"13\" fill=\"" << color << "\">" << c.method << "</text>\n";
    ++ci;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<StatsRow> stats_summary(const std::vector<RunRecord>& records) {
  struct Acc {
    int runs = 0;
    int solved = 0;
    double log_time = 0.0;
    double iters = 0.0;
  };
  std::map<std::pair<std::string, std::string>, Acc> cells;
  for (const RunRecord& r : records) {
    Acc& a = cells[{band_subset(r), r.method}];
    ++a.runs;
    if (r.status == "Solved") {
      ++a.solved;
      a.log_time += std::log(std::max(r.wall_time_s, 1e-12));
      a.iters += double(r.iterations_stage1);
    }
  }

  std::vector<StatsRow> rows;
  for (const auto& [key, a] : cells) {
    StatsRow row;
    row.subset = key.first;
    row.method = key.second;
    row.runs = a.runs;
    row.solved = a.solved;
    row.solved_pct = 100.0 * double(a.solved) / double(a.runs);
    row.geomean_time_s = a.solved > 0 ? std::exp(a.log_time / double(a.solved)) : 0.0;
    row.mean_iterations = a.solved > 0 ? a.iters / double(a.solved) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string stats_to_text(const std::vector<StatsRow>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-14s %-10s %6s %9s %14s %12s\n", "subset", "method",
                "runs", "solved%", "geomean_time_s", "mean_iters");
  out << buf;
  for (const StatsRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-14s %-10s %6d %9.1f %14.6g %12.2f\n", r.subset.c_str(),
                  r.method.c_str(), r.runs, r.solved_pct, r.geomean_time_s, r.mean_iterations);
    out << buf;
  }
  return out.str();
}

}  // namespace gci
