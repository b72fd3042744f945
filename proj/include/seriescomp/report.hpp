#pragma once

#include <string>
#include <vector>

#include "seriescomp/scenario.hpp"

namespace seriescomp {

struct OutputOptions {
  bool plots = false;
};

struct RunArtifacts {
  std::string trace_path;
  std::string events_path;
  std::string summary_path;
  std::vector<std::string> plot_paths;
  std::string spec_fingerprint;
};

/// FNV-1a 64-bit content fingerprint, 16 hex digits. Identifies the scenario
/// document a run came from; not cryptographic.
std::string fingerprint_bytes(const std::string& data);

std::string trace_to_csv(const Trace& trace);
std::string events_to_jsonl(const std::vector<EventRecord>& events);
std::string summary_to_json(const RunSummary& summary,
                            const std::string& fingerprint);

/// |I| vs t line chart for one monitored line, static SVG with min/max
/// envelope decimation.
std::string plot_svg(const Trace& trace, const std::string& line_id,
                     double thermal_limit_ka);

/// Writes trace.csv, events.jsonl, summary.json (and plots) under `dir`,
/// creating it if needed. Byte-identical for byte-identical runs.
RunArtifacts write_outputs(const RunResult& result, const ScenarioSpec& spec,
                           const std::string& dir,
                           const std::string& fingerprint,
                           const OutputOptions& options = {});

/// Field-wise trace comparison. Returns human-readable difference lines
/// (capped), empty when equal within the tolerance.
std::vector<std::string> compare_csv_traces(const std::string& csv_a,
                                            const std::string& csv_b,
                                            double tolerance);

}  // namespace seriescomp
