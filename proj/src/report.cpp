#include "seriescomp/report.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "seriescomp/scenario_io.hpp"

namespace seriescomp {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::string partial;
  for (std::size_t i = 0; i <= dir.size(); ++i) {
    if (i == dir.size() || dir[i] == '/') {
      if (!partial.empty()) ::mkdir(partial.c_str(), 0755);
      if (i < dir.size()) partial += '/';
      continue;
    }
    partial += dir[i];
  }
}

}  // namespace

std::string fingerprint_bytes(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string trace_to_csv(const Trace& trace) {
  std::string out;
  out.reserve(64 + trace.rows.size() * trace.columns.size() * 12);
  for (std::size_t c = 0; c < trace.columns.size(); ++c) {
    if (c) out += ',';
    out += trace.columns[c];
  }
  out += '\n';
  for (const auto& row : trace.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += fmt(row[c]);
    }
    out += '\n';
  }
  return out;
}

std::string events_to_jsonl(const std::vector<EventRecord>& events) {
  std::string out;
  for (const auto& e : events) {
    json j{{"t_s", e.t_s},
           {"source", e.source},
           {"name", e.name},
           {"detail", e.detail}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string summary_to_json(const RunSummary& summary,
                            const std::string& fingerprint) {
  json lines = json::object();
  for (const auto& [id, ls] : summary.lines)
    lines[id] = json{{"max_i_ka", ls.max_i_ka},
                     {"final_window_mean_i_ka", ls.final_window_mean_i_ka},
                     {"thermal_limit_ka", ls.thermal_limit_ka},
                     {"overload", ls.overload}};
  json device_time = json::object();
  for (const auto& [key, by_mode] : summary.device_time_in_state) {
    json modes = json::object();
    for (const auto& [mode, secs] : by_mode) modes[mode] = secs;
    device_time[key] = modes;
  }
  json timeline = json::array();
  for (const auto& e : summary.relay_timeline)
    timeline.push_back(json{{"t_s", e.t_s},
                            {"source", e.source},
                            {"name", e.name},
                            {"detail", e.detail}});
  json doc{{"scenario", summary.scenario_name},
           {"spec_fingerprint", fingerprint},
           {"steps", summary.steps},
           {"dt_s", summary.dt_s},
           {"t_end_s", summary.t_end_s},
           {"complete", summary.complete},
           {"max_kcl_residual", summary.max_kcl_residual},
           {"overload_any", summary.overload_any},
           {"lines", lines},
           {"device_time_in_state_s", device_time},
           {"relay_timeline", timeline}};
  return doc.dump(2) + "\n";
}

std::string plot_svg(const Trace& trace, const std::string& line_id,
                     double thermal_limit_ka) {
  // Columns for this line's per-phase current magnitude.
  std::vector<std::size_t> mag_cols;
  for (std::size_t c = 0; c < trace.columns.size(); ++c)
    if (trace.columns[c].rfind(line_id + ".i_mag_ka.", 0) == 0)
      mag_cols.push_back(c);

  const int width = 900, height = 300, margin = 45;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";

  if (!trace.rows.empty() && !mag_cols.empty()) {
    double t0 = trace.rows.front()[0], t1 = trace.rows.back()[0];
    double y_max = thermal_limit_ka;
    for (const auto& row : trace.rows)
      for (auto c : mag_cols) y_max = std::max(y_max, row[c]);
    y_max *= 1.05;
    if (y_max <= 0.0) y_max = 1.0;
    double t_span = std::max(t1 - t0, 1e-9);

    auto x_of = [&](double t) {
      return margin + (t - t0) / t_span * (width - 2 * margin);
    };
    auto y_of = [&](double v) {
      return height - margin - v / y_max * (height - 2 * margin);
    };

    // Min/max envelope per pixel bucket keeps the path small.
    const char* colors[3] = {"#1f77b4", "#ff7f0e", "#2ca02c"};
    for (std::size_t pc = 0; pc < mag_cols.size() && pc < 3; ++pc) {
      std::ostringstream path;
      const std::size_t buckets = 800;
      const std::size_t per =
          std::max<std::size_t>(1, trace.rows.size() / buckets);
      bool first = true;
      for (std::size_t i = 0; i < trace.rows.size(); i += per) {
        double lo = 1e300, hi = -1e300, t = trace.rows[i][0];
        for (std::size_t k = i; k < std::min(i + per, trace.rows.size()); ++k) {
          lo = std::min(lo, trace.rows[k][mag_cols[pc]]);
          hi = std::max(hi, trace.rows[k][mag_cols[pc]]);
        }
        path << (first ? "M" : "L") << fmt(x_of(t)) << " " << fmt(y_of(hi))
             << " L" << fmt(x_of(t)) << " " << fmt(y_of(lo)) << " ";
        first = false;
      }
      svg << "<path d='" << path.str() << "' stroke='" << colors[pc]
          << "' fill='none' stroke-width='1'/>\n";
    }
    if (thermal_limit_ka > 0.0) {
      svg << "<line x1='" << margin << "' y1='" << fmt(y_of(thermal_limit_ka))
          << "' x2='" << width - margin << "' y2='"
          << fmt(y_of(thermal_limit_ka))
          << "' stroke='red' stroke-dasharray='6 3'/>\n";
      svg << "<text x='" << margin + 4 << "' y='"
          << fmt(y_of(thermal_limit_ka) - 4)
          << "' font-size='11' fill='red'>limit " << fmt(thermal_limit_ka)
          << " kA</text>\n";
    }
    svg << "<text x='" << margin << "' y='18' font-size='13'>" << line_id
        << " current magnitude (kA) vs t (s), " << fmt(t0) << ".." << fmt(t1)
        << "</text>\n";
  } else {
    svg << "<text x='20' y='30' font-size='13'>" << line_id
        << ": no samples</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

RunArtifacts write_outputs(const RunResult& result, const ScenarioSpec& spec,
                           const std::string& dir,
                           const std::string& fingerprint,
                           const OutputOptions& options) {
  ensure_dir(dir);
  RunArtifacts art;
  art.spec_fingerprint = fingerprint;
  art.trace_path = dir + "/trace.csv";
  art.events_path = dir + "/events.jsonl";
  art.summary_path = dir + "/summary.json";
  write_file(art.trace_path, trace_to_csv(result.trace));
  write_file(art.events_path, events_to_jsonl(result.events));
  write_file(art.summary_path, summary_to_json(result.summary, fingerprint));
  if (options.plots) {
    for (const auto& line_id : spec.monitored_lines) {
      const Line* line = spec.network.find_line(line_id);
      std::string path = dir + "/plot_" + line_id + ".svg";
      write_file(path, plot_svg(result.trace, line_id,
                                line ? line->thermal_limit_a / 1000.0 : 0.0));
      art.plot_paths.push_back(path);
    }
  }
  return art;
}

std::vector<std::string> compare_csv_traces(const std::string& csv_a,
                                            const std::string& csv_b,
                                            double tolerance) {
  std::vector<std::string> diffs;
  std::istringstream a(csv_a), b(csv_b);
  std::string la, lb;
  std::getline(a, la);
  std::getline(b, lb);
  if (la != lb) {
    diffs.push_back("header mismatch");
    return diffs;
  }
  std::vector<std::string> columns;
  {
    std::istringstream hs(la);
    std::string col;
    while (std::getline(hs, col, ',')) columns.push_back(col);
  }
  std::size_t row = 0;
  while (true) {
    bool got_a = static_cast<bool>(std::getline(a, la));
    bool got_b = static_cast<bool>(std::getline(b, lb));
    if (!got_a && !got_b) break;
    if (got_a != got_b) {
      diffs.push_back("row count mismatch at row " + std::to_string(row));
      break;
    }
    if (la != lb) {
      std::istringstream sa(la), sb(lb);
      std::string ca, cb;
      std::size_t col = 0;
      while (std::getline(sa, ca, ',') && std::getline(sb, cb, ',')) {
        double va = std::atof(ca.c_str());
        double vb = std::atof(cb.c_str());
        if (std::abs(va - vb) > tolerance) {
          diffs.push_back("row " + std::to_string(row) + " col " +
                          (col < columns.size() ? columns[col]
                                                : std::to_string(col)) +
                          ": " + ca + " vs " + cb);
          if (diffs.size() >= 20) {
            diffs.push_back("... further differences suppressed");
            return diffs;
          }
        }
        ++col;
      }
    }
    ++row;
  }
  return diffs;
}

}  // namespace seriescomp
