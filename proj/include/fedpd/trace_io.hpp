#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpd/algorithms.hpp"
#include "fedpd/metrics.hpp"

namespace fedpd {

inline constexpr const char* kTraceHeader =
    "round,comm_rounds_cum,local_iters_cum,samples_cum,gap,consensus_err,al_mean,diverged,wall_ms";

/// %.17g, so every double round-trips.
std::string format_double(double v);

/// Writes the header and every `every`-th row (the last row is always kept).
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows, std::size_t every = 1);
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows, std::size_t every = 1);

/// Final and minimum gap, RC / LC / AS totals, divergence flag, warnings and the resolved config.
nlohmann::json summarize(const Trace& trace, const nlohmann::json& resolved_config);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace fedpd
