#pragma once

#include "harqnc/sim.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace harqnc {

/// Provenance stamped into every output file.
struct OutputMeta {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::string version{kVersion};
  std::string kind;  // trace, summary, gains, dp
};

/// Hash of the canonical serialized scenario, so overrides change the digest.
std::string scenario_hash(const ScenarioConfig& cfg);
OutputMeta make_meta(const ScenarioConfig& cfg, std::string kind);

/// Shortest text that reads back to the same double ("nan" for NaN).
std::string format_double(double v);

void write_csv_header(std::ostream& os, const OutputMeta& meta);

/// One row per step; vector quantities are spread over indexed columns.
void write_trace_csv(std::ostream& os, const RunTrace& trace, const OutputMeta& meta);
nlohmann::json trace_to_json(const RunTrace& trace, const OutputMeta& meta);

nlohmann::json summary_to_json(const MonteCarloResult& result, const OutputMeta& meta);
void write_summary_csv(std::ostream& os, const MonteCarloResult& result, const OutputMeta& meta);
/// run_index plus one loss column per policy.
void write_per_run_csv(std::ostream& os, const MonteCarloResult& result, const OutputMeta& meta);

/// S_k and L_k entries per time step.
void write_gains_csv(std::ostream& os, const GainSchedule& gains, const OutputMeta& meta);

/// Values and decisions of every solved grid node.
void write_dp_csv(std::ostream& os, const DpOracle& dp, const OutputMeta& meta);
nlohmann::json dp_to_json(const DpOracle& dp, const OutputMeta& meta);

}  // namespace harqnc
