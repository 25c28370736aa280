#pragma once

#include "harqnc/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace harqnc {

/// Per-step matrix sequence. A time-invariant quantity is stored once and
/// served for every index; a time-varying one serves its last entry past the end.
class Schedule {
 public:
  Schedule() = default;
  explicit Schedule(Matrix constant) : items_{std::move(constant)} {}
  explicit Schedule(std::vector<Matrix> items) : items_(std::move(items)) {}

  const Matrix& at(int k) const {
    const auto idx = static_cast<std::size_t>(k < 0 ? 0 : k);
    return items_[idx < items_.size() ? idx : items_.size() - 1];
  }
  const Matrix& operator[](int k) const { return at(k); }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  bool time_varying() const { return items_.size() > 1; }
  const std::vector<Matrix>& items() const { return items_; }

 private:
  std::vector<Matrix> items_;
};

struct SystemModel {
  Schedule A, B, C, W, V;
  Vector m0;
  Matrix M0;

  int n() const { return static_cast<int>(A.at(0).rows()); }
  int m() const { return static_cast<int>(B.at(0).cols()); }
  int p() const { return static_cast<int>(C.at(0).rows()); }
  bool time_varying() const {
    return A.time_varying() || B.time_varying() || C.time_varying() || W.time_varying() ||
           V.time_varying();
  }
};

struct CostSpec {
  Schedule Q;  // k = 0..N+1
  Schedule R;  // k = 0..N
};

struct FadingState {
  /// Packet error rate after s retransmissions, s = 0..s_max.
  std::vector<double> lambda;
};

struct ChannelSpec {
  int omega_max = 1;
  std::vector<FadingState> fading;
  Matrix transition;
  int initial_state = 0;

  int state_count() const { return static_cast<int>(fading.size()); }
  int s_max(int state) const { return static_cast<int>(fading[state].lambda.size()) - 1; }
  /// Error rate of attempt number s in the given fading state; s past the table clamps.
  double lambda(int state, int s) const {
    const auto& table = fading[state].lambda;
    const auto idx = static_cast<std::size_t>(s < 0 ? 0 : s);
    return table[idx < table.size() ? idx : table.size() - 1];
  }
};

struct PolicySpec {
  enum class Kind { HarqOptimal, HarqOptimalExactDelta, AlwaysTx, Random, AgeThreshold };
  Kind kind = Kind::HarqOptimal;
  double p = 0.0;  // Random
  int d = 1;       // AgeThreshold

  /// Accepts "harq_optimal", "harq_optimal_exact_delta", "always_tx",
  /// "random(p)" / "random:p" and "age_threshold(d)" / "age_threshold:d".
  static PolicySpec parse(const std::string& text);
  std::string to_string() const;

  bool operator==(const PolicySpec&) const = default;
};

/// Grid resolution for the scalar dynamic-programming oracle.
struct DpGridSpec {
  int c1 = 201;  // mismatch axis
  int c2 = 201;  // retransmission-offset axis
  int c4 = 33;   // Gauss-Hermite nodes
  double span_sigmas = 8.0;

  bool operator==(const DpGridSpec&) const = default;
};

struct ScenarioConfig {
  SystemModel system;
  CostSpec cost;
  ChannelSpec channel;
  int horizon = 1;
  std::uint64_t seed = 0;
  int runs = 1;
  PolicySpec policy;
  /// Permits W = 0 and V = 0 for exact-arithmetic fixtures.
  bool test_mode = false;
  DpGridSpec dp;
};

struct Violation {
  std::string field;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate_scenario(const ScenarioConfig& cfg);

/// Builds a config from the JSON scenario document without validating it.
ScenarioConfig parse_scenario(const nlohmann::json& doc);
nlohmann::json serialize_scenario(const ScenarioConfig& cfg);

/// Reads, parses and validates a scenario file. Throws ParseError or ValidationError.
ScenarioConfig load_scenario(const std::filesystem::path& path);
/// Same as load_scenario for an in-memory document.
ScenarioConfig load_scenario_text(const std::string& text);

/// Stable 64-bit FNV-1a digest rendered as 16 hex digits.
std::string content_hash(const std::string& bytes);

std::string format_violations(const std::vector<Violation>& violations);

}  // namespace harqnc
