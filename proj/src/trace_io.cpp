#include "fedpd/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace fedpd {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows, std::size_t every) {
  if (every == 0) throw ConfigError("trace_every must be >= 1");
  out << kTraceHeader << '\n';
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const TraceRow& r = rows[k];
    if (r.round % every != 0 && k + 1 != rows.size()) continue;
    out << r.round << ',' << r.comm_rounds_cum << ',' << r.local_iters_cum << ',' << r.samples_cum << ','
        << format_double(r.gap) << ',' << format_double(r.consensus_err) << ',' << format_double(r.al_mean) << ','
        << (r.diverged ? 1 : 0) << ',' << r.wall_ms << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows, std::size_t every) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_trace_csv(out, rows, every);
  if (!out) throw Error("write failed for " + path.string());
}

nlohmann::json summarize(const Trace& trace, const nlohmann::json& resolved_config) {
  nlohmann::json s;
  s["rounds_completed"] = trace.rows.size();
  s["diverged"] = trace.diverged;
  if (trace.rows.empty()) {
    s["final_gap"] = nullptr;
    s["min_gap"] = nullptr;
    s["comm_rounds"] = 0;
    s["local_iters"] = 0;
    s["samples"] = 0;
  } else {
    const TraceRow& last = trace.rows.back();
    double best = trace.rows.front().gap;
    for (const TraceRow& r : trace.rows) best = std::min(best, r.gap);
    // Infinite gaps (diverged runs) are stored as strings; JSON has no infinity.
    auto num = [](double v) -> nlohmann::json {
      return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v));
    };
    s["final_gap"] = num(last.gap);
    s["min_gap"] = num(best);
    s["comm_rounds"] = last.comm_rounds_cum;
    s["local_iters"] = last.local_iters_cum;
    s["samples"] = last.samples_cum;
  }
  s["warnings"] = trace.warnings;
  s["config"] = resolved_config;
  return s;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace fedpd
