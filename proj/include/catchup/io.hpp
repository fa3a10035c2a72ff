#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "catchup/core.hpp"
#include "catchup/diagnostics.hpp"
#include "catchup/scheme.hpp"

namespace catchup {

using json = nlohmann::json;

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "nan")
    return std::nan("");
  if (s == "inf")
    return kInf;
  if (s == "-inf")
    return -kInf;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("not a number: '" + std::string(s) + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

/// Columns k, t, x*, w*, p*, v*, mu, eps. The last row holds the final state only.
inline void write_trajectory_csv(std::ostream &os, const DiscreteRun &r) {
  const Index n = r.dim();
  os << "k,t";
  for (const char *prefix : {"x", "w", "p", "v"})
    for (Index i = 0; i < n; ++i)
      os << ',' << prefix << i;
  os << ",mu,eps\n";
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    os << k << ',' << format_double(r.times[k]);
    for (Index i = 0; i < n; ++i)
      os << ',' << format_double(r.x[k][i]);
    const bool has_step = k < r.mu.size();
    for (const auto *series : {&r.w, &r.p, &r.v})
      for (Index i = 0; i < n; ++i) {
        os << ',';
        if (has_step)
          os << format_double((*series)[k][i]);
      }
    os << ',';
    if (has_step)
      os << format_double(r.mu[k]);
    os << ',';
    if (has_step)
      os << format_double(r.eps[k]);
    os << '\n';
  }
}

inline void write_trajectory_csv(const std::string &path, const DiscreteRun &r) {
  std::ofstream os(path);
  if (!os)
    throw Error("cannot open " + path + " for writing");
  write_trajectory_csv(os, r);
}

namespace detail {
inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}
} // namespace detail

/// Reloads a trajectory CSV. Predictors are rebuilt as y_{k+1} = x_k + mu_k w_k.
inline DiscreteRun read_trajectory_csv(std::istream &is) {
  std::string line;
  if (!std::getline(is, line))
    throw ConfigError("trajectory csv: empty input");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 4 || (header.size() - 4) % 4 != 0 || header[0] != "k" || header[1] != "t")
    throw ConfigError("trajectory csv: unexpected header");
  const auto n = static_cast<Index>((header.size() - 4) / 4);
  DiscreteRun r;
  bool finished = false;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    if (finished)
      throw ConfigError("trajectory csv: rows after the final state");
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ConfigError("trajectory csv: row " + std::to_string(r.x.size()) + " has wrong column count");
    r.times.push_back(parse_double(cells[1]));
    Vector x(n);
    for (Index i = 0; i < n; ++i)
      x[i] = parse_double(cells[static_cast<std::size_t>(2 + i)]);
    r.x.push_back(std::move(x));
    if (cells.back().empty()) {
      finished = true;
      continue;
    }
    std::vector<Vector> parts;
    for (int block = 1; block <= 3; ++block) {
      Vector v(n);
      for (Index i = 0; i < n; ++i)
        v[i] = parse_double(cells[static_cast<std::size_t>(2 + block * n + i)]);
      parts.push_back(std::move(v));
    }
    const double mu = parse_double(cells[cells.size() - 2]);
    r.y.push_back(r.x.back() + mu * parts[0]);
    r.w.push_back(std::move(parts[0]));
    r.p.push_back(std::move(parts[1]));
    r.v.push_back(std::move(parts[2]));
    r.mu.push_back(mu);
    r.eps.push_back(parse_double(cells.back()));
  }
  if (!finished || r.x.size() != r.mu.size() + 1)
    throw ConfigError("trajectory csv: missing final state row");
  return r;
}

inline DiscreteRun read_trajectory_csv(const std::string &path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open " + path);
  return read_trajectory_csv(is);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const CertificateEntry &e) {
  return json{{"name", e.name},
              {"theorem_tag", e.tag},
              {"measured", number_or_null(e.measured)},
              {"bound", number_or_null(e.bound)},
              {"margin", number_or_null(e.margin)},
              {"pass", e.pass},
              {"hard", e.hard},
              {"note", e.note}};
}

inline json to_json(const DiagnosticsReport &r) {
  json entries = json::array();
  for (const auto &e : r.entries)
    entries.push_back(to_json(e));
  return json{{"entries", entries}, {"hard_pass", r.hard_pass()}};
}

inline json to_json(const Vector &v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i)
    a.push_back(number_or_null(v[i]));
  return a;
}

inline json to_json(const StepSchedule &s) {
  json warnings = json::array();
  for (const auto &w : s.warnings)
    warnings.push_back(w);
  return json{{"kind", step_kind_name(s.kind)},
              {"error_rule", error_rule_name(s.error_rule)},
              {"horizon", s.horizon},
              {"steps", s.steps()},
              {"final_time", s.final_time()},
              {"mesh", s.mu_max},
              {"q_T", s.q_T},
              {"warnings", warnings}};
}

/// Aligned table: name, tag, measured, bound, margin, status.
inline std::string to_text(const DiagnosticsReport &r) {
  auto fmt = [](double v) {
    std::ostringstream os;
    os << std::setprecision(6) << std::scientific << v;
    return os.str();
  };
  std::size_t wn = 4;
  std::size_t wt = 3;
  for (const auto &e : r.entries) {
    wn = std::max(wn, e.name.size());
    wt = std::max(wt, e.tag.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(wn)) << "name" << "  " << std::setw(static_cast<int>(wt)) << "tag"
     << "  " << std::right << std::setw(13) << "measured" << "  " << std::setw(13) << "bound" << "  "
     << std::setw(13) << "margin" << "  status\n";
  for (const auto &e : r.entries) {
    const char *status = e.pass ? "pass" : (e.hard ? "FAIL" : "info");
    os << std::left << std::setw(static_cast<int>(wn)) << e.name << "  " << std::setw(static_cast<int>(wt)) << e.tag
       << "  " << std::right << std::setw(13) << fmt(e.measured) << "  " << std::setw(13) << fmt(e.bound) << "  "
       << std::setw(13) << fmt(e.margin) << "  " << status << '\n';
  }
  return os.str();
}

inline void write_json(const std::string &path, const json &j) {
  std::ofstream os(path);
  if (!os)
    throw Error("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

} // namespace catchup
