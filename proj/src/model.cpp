#include "harqnc/model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace harqnc {

namespace {

using nlohmann::json;

Matrix parse_matrix(const json& j, const std::string& where) {
  if (j.is_number()) {
    Matrix out(1, 1);
    out(0, 0) = j.get<double>();
    return out;
  }
  if (!j.is_array()) throw ParseError(where + ": expected a number or nested array");
  if (j.empty()) return Matrix(0, 0);
  // A flat array is a column vector.
  if (!j.front().is_array()) {
    Matrix out(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) throw ParseError(where + ": non-numeric entry");
      out(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    }
    return out;
  }
  const auto rows = j.size();
  const auto cols = j.front().size();
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ParseError(where + ": ragged matrix at row " + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ParseError(where + ": non-numeric entry");
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return out;
}

Vector parse_vector(const json& j, const std::string& where) {
  Matrix m = parse_matrix(j, where);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw ParseError(where + ": expected a vector");
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Schedule parse_schedule(const json& parent, const std::string& key, const std::string& prefix,
                        bool required) {
  const std::string sched_key = key + "_schedule";
  const bool has_const = parent.contains(key);
  const bool has_sched = parent.contains(sched_key);
  if (has_const && has_sched)
    throw ParseError(prefix + "." + key + ": both '" + key + "' and '" + sched_key + "' given");
  if (has_const) return Schedule(parse_matrix(parent.at(key), prefix + "." + key));
  if (has_sched) {
    const json& arr = parent.at(sched_key);
    if (!arr.is_array() || arr.empty())
      throw ParseError(prefix + "." + sched_key + ": expected a non-empty array of matrices");
    std::vector<Matrix> items;
    items.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
      items.push_back(parse_matrix(arr[i], prefix + "." + sched_key + "[" + std::to_string(i) + "]"));
    return Schedule(std::move(items));
  }
  if (required) throw ParseError(prefix + "." + key + ": missing");
  return {};
}

void put_schedule(json& parent, const std::string& key, const Schedule& s) {
  if (s.size() == 1) {
    parent[key] = matrix_to_json(s.at(0));
    return;
  }
  json arr = json::array();
  for (const auto& m : s.items()) arr.push_back(matrix_to_json(m));
  parent[key + "_schedule"] = std::move(arr);
}

// ---------------------------------------------------------------------------
// Validation helpers

double scale_of(const Matrix& m) { return std::max(1.0, m.cwiseAbs().maxCoeff()); }

bool symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale_of(m);
}

double min_eigenvalue(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

enum class Definiteness { Psd, Pd };

class Checker {
 public:
  explicit Checker(std::vector<Violation>& out) : out_(out) {}

  void add(std::string field, std::string rule) { out_.push_back({std::move(field), std::move(rule)}); }

  bool shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& field) {
    if (m.rows() == rows && m.cols() == cols) return true;
    std::ostringstream os;
    os << "dimension: expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
    add(field, os.str());
    return false;
  }

  void definite(const Matrix& m, Definiteness d, const std::string& field) {
    if (m.size() == 0) return;
    if (!m.allFinite()) {
      add(field, "finite entries");
      return;
    }
    if (!symmetric(m)) {
      add(field, "symmetric");
      return;
    }
    const double lo = min_eigenvalue(m);
    if (d == Definiteness::Pd) {
      if (!(lo > 1e-14 * scale_of(m))) add(field, "positive definite");
    } else if (lo < -1e-10 * scale_of(m)) {
      add(field, "PSD");
    }
  }

 private:
  std::vector<Violation>& out_;
};

std::string entry_name(const std::string& base, const Schedule& s, std::size_t i) {
  if (s.size() == 1) return base;
  return base + "_schedule[" + std::to_string(i) + "]";
}

void check_schedule_length(Checker& chk, const Schedule& s, const std::string& field,
                           std::vector<std::size_t> allowed) {
  if (s.empty()) {
    chk.add(field, "missing");
    return;
  }
  if (s.size() == 1) return;
  for (auto a : allowed)
    if (s.size() == a) return;
  std::ostringstream os;
  os << "schedule length " << s.size() << " does not match horizon (expected";
  for (std::size_t i = 0; i < allowed.size(); ++i) os << (i ? " or " : " ") << allowed[i];
  os << ")";
  chk.add(field + "_schedule", os.str());
}

}  // namespace

// ---------------------------------------------------------------------------

PolicySpec PolicySpec::parse(const std::string& text) {
  PolicySpec out;
  std::string name = text;
  std::string arg;
  if (auto open = text.find('('); open != std::string::npos) {
    if (text.back() != ')') throw ParseError("policy '" + text + "': missing ')'");
    name = text.substr(0, open);
    arg = text.substr(open + 1, text.size() - open - 2);
  } else if (auto colon = text.find(':'); colon != std::string::npos) {
    name = text.substr(0, colon);
    arg = text.substr(colon + 1);
  }
  auto need_arg = [&] {
    if (arg.empty()) throw ParseError("policy '" + name + "' needs a parameter");
  };
  try {
    if (name == "harq_optimal") {
      out.kind = Kind::HarqOptimal;
    } else if (name == "harq_optimal_exact_delta") {
      out.kind = Kind::HarqOptimalExactDelta;
    } else if (name == "always_tx") {
      out.kind = Kind::AlwaysTx;
    } else if (name == "random") {
      need_arg();
      out.kind = Kind::Random;
      std::size_t used = 0;
      out.p = std::stod(arg, &used);
      if (used != arg.size()) throw ParseError("policy random: bad probability '" + arg + "'");
      if (!(out.p >= 0.0 && out.p <= 1.0)) throw ValidationError("policy random: p must lie in [0,1]");
    } else if (name == "age_threshold") {
      need_arg();
      out.kind = Kind::AgeThreshold;
      std::size_t used = 0;
      out.d = std::stoi(arg, &used);
      if (used != arg.size()) throw ParseError("policy age_threshold: bad age '" + arg + "'");
      if (out.d < 1) throw ValidationError("policy age_threshold: d must be >= 1");
    } else {
      throw ParseError("unknown policy '" + text + "'");
    }
  } catch (const std::invalid_argument&) {
    throw ParseError("policy '" + text + "': bad parameter");
  } catch (const std::out_of_range&) {
    throw ParseError("policy '" + text + "': parameter out of range");
  }
  return out;
}

std::string PolicySpec::to_string() const {
  switch (kind) {
    case Kind::HarqOptimal:
      return "harq_optimal";
    case Kind::HarqOptimalExactDelta:
      return "harq_optimal_exact_delta";
    case Kind::AlwaysTx:
      return "always_tx";
    case Kind::Random: {
      std::ostringstream os;
      os << "random(" << std::setprecision(17) << p << ")";
      return os.str();
    }
    case Kind::AgeThreshold:
      return "age_threshold(" + std::to_string(d) + ")";
  }
  return "?";
}

ScenarioConfig parse_scenario(const json& doc) {
  if (!doc.is_object()) throw ParseError("scenario: top-level value must be an object");
  ScenarioConfig cfg;
  try {
    const json& sys = doc.at("system");
    cfg.system.A = parse_schedule(sys, "A", "system", true);
    cfg.system.B = parse_schedule(sys, "B", "system", true);
    cfg.system.C = parse_schedule(sys, "C", "system", true);
    cfg.system.W = parse_schedule(sys, "W", "system", true);
    cfg.system.V = parse_schedule(sys, "V", "system", true);
    cfg.system.m0 = parse_vector(sys.at("m0"), "system.m0");
    cfg.system.M0 = parse_matrix(sys.at("M0"), "system.M0");

    const json& cost = doc.at("cost");
    cfg.cost.Q = parse_schedule(cost, "Q", "cost", true);
    cfg.cost.R = parse_schedule(cost, "R", "cost", true);

    const json& ch = doc.at("channel");
    cfg.channel.omega_max = ch.at("omega_max").get<int>();
    if (ch.contains("fading")) {
      for (const auto& st : ch.at("fading")) cfg.channel.fading.push_back({st.at("lambda").get<std::vector<double>>()});
    } else if (ch.contains("lambda")) {
      cfg.channel.fading.push_back({ch.at("lambda").get<std::vector<double>>()});
    } else {
      throw ParseError("channel: needs 'fading' or 'lambda'");
    }
    if (ch.contains("transition")) {
      cfg.channel.transition = parse_matrix(ch.at("transition"), "channel.transition");
    } else if (cfg.channel.fading.size() == 1) {
      cfg.channel.transition = Matrix::Ones(1, 1);
    } else {
      throw ParseError("channel.transition: required with more than one fading state");
    }
    cfg.channel.initial_state = ch.value("initial_state", 0);

    cfg.horizon = doc.at("horizon").get<int>();
    cfg.seed = doc.value("seed", std::uint64_t{0});
    cfg.runs = doc.value("runs", 1);
    cfg.policy = PolicySpec::parse(doc.value("policy", std::string("harq_optimal")));
    cfg.test_mode = doc.value("test_mode", false);
    if (doc.contains("dp")) {
      const json& dp = doc.at("dp");
      cfg.dp.c1 = dp.value("c1", cfg.dp.c1);
      cfg.dp.c2 = dp.value("c2", cfg.dp.c2);
      cfg.dp.c4 = dp.value("c4", cfg.dp.c4);
      cfg.dp.span_sigmas = dp.value("span_sigmas", cfg.dp.span_sigmas);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  return cfg;
}

json serialize_scenario(const ScenarioConfig& cfg) {
  json doc;
  json sys;
  put_schedule(sys, "A", cfg.system.A);
  put_schedule(sys, "B", cfg.system.B);
  put_schedule(sys, "C", cfg.system.C);
  put_schedule(sys, "W", cfg.system.W);
  put_schedule(sys, "V", cfg.system.V);
  sys["m0"] = vector_to_json(cfg.system.m0);
  sys["M0"] = matrix_to_json(cfg.system.M0);
  doc["system"] = std::move(sys);

  json cost;
  put_schedule(cost, "Q", cfg.cost.Q);
  put_schedule(cost, "R", cfg.cost.R);
  doc["cost"] = std::move(cost);

  json ch;
  ch["omega_max"] = cfg.channel.omega_max;
  json fading = json::array();
  for (const auto& st : cfg.channel.fading) fading.push_back({{"lambda", st.lambda}});
  ch["fading"] = std::move(fading);
  ch["transition"] = matrix_to_json(cfg.channel.transition);
  ch["initial_state"] = cfg.channel.initial_state;
  doc["channel"] = std::move(ch);

  doc["horizon"] = cfg.horizon;
  doc["seed"] = cfg.seed;
  doc["runs"] = cfg.runs;
  doc["policy"] = cfg.policy.to_string();
  if (cfg.test_mode) doc["test_mode"] = true;
  doc["dp"] = {{"c1", cfg.dp.c1}, {"c2", cfg.dp.c2}, {"c4", cfg.dp.c4}, {"span_sigmas", cfg.dp.span_sigmas}};
  return doc;
}

std::vector<Violation> validate_scenario(const ScenarioConfig& cfg) {
  std::vector<Violation> out;
  Checker chk(out);

  if (cfg.horizon < 1) chk.add("horizon", "N >= 1");
  if (cfg.runs < 1) chk.add("runs", "runs >= 1");

  const auto& sys = cfg.system;
  if (sys.A.empty() || sys.B.empty() || sys.C.empty()) {
    chk.add("system", "A, B and C are required");
    return out;
  }
  const auto n = sys.A.at(0).rows();
  const auto m = sys.B.at(0).cols();
  const auto p = sys.C.at(0).rows();
  const auto N = static_cast<std::size_t>(std::max(cfg.horizon, 1));
  if (n == 0) chk.add("system.A", "dimension: n >= 1");
  if (m == 0) chk.add("system.B", "dimension: m >= 1");
  if (p == 0) chk.add("system.C", "dimension: p >= 1");

  check_schedule_length(chk, sys.A, "system.A", {N + 1, N + 2});
  check_schedule_length(chk, sys.B, "system.B", {N + 1, N + 2});
  check_schedule_length(chk, sys.C, "system.C", {N + 1, N + 2});
  check_schedule_length(chk, sys.W, "system.W", {N + 1, N + 2});
  check_schedule_length(chk, sys.V, "system.V", {N + 1, N + 2});
  check_schedule_length(chk, cfg.cost.Q, "cost.Q", {N + 2});
  check_schedule_length(chk, cfg.cost.R, "cost.R", {N + 1});

  const auto each = [](const Schedule& s, auto&& fn) {
    for (std::size_t i = 0; i < s.size(); ++i) fn(s.items()[i], i);
  };
  each(sys.A, [&](const Matrix& x, std::size_t i) {
    chk.shape(x, n, n, entry_name("system.A", sys.A, i));
  });
  each(sys.B, [&](const Matrix& x, std::size_t i) {
    chk.shape(x, n, m, entry_name("system.B", sys.B, i));
  });
  each(sys.C, [&](const Matrix& x, std::size_t i) {
    chk.shape(x, p, n, entry_name("system.C", sys.C, i));
  });
  const auto noise_rule = cfg.test_mode ? Definiteness::Psd : Definiteness::Pd;
  each(sys.W, [&](const Matrix& x, std::size_t i) {
    const auto name = entry_name("system.W", sys.W, i);
    if (chk.shape(x, n, n, name)) chk.definite(x, noise_rule, name);
  });
  each(sys.V, [&](const Matrix& x, std::size_t i) {
    const auto name = entry_name("system.V", sys.V, i);
    if (chk.shape(x, p, p, name)) chk.definite(x, noise_rule, name);
  });
  if (sys.m0.size() != n) chk.add("system.m0", "dimension: expected length " + std::to_string(n));
  if (chk.shape(sys.M0, n, n, "system.M0")) chk.definite(sys.M0, Definiteness::Psd, "system.M0");

  each(cfg.cost.Q, [&](const Matrix& x, std::size_t i) {
    const auto name = entry_name("cost.Q", cfg.cost.Q, i);
    if (chk.shape(x, n, n, name)) chk.definite(x, Definiteness::Psd, name);
  });
  each(cfg.cost.R, [&](const Matrix& x, std::size_t i) {
    const auto name = entry_name("cost.R", cfg.cost.R, i);
    if (chk.shape(x, m, m, name)) chk.definite(x, Definiteness::Pd, name);
  });

  const auto& ch = cfg.channel;
  if (ch.omega_max < 0) chk.add("channel.omega_max", "non-negative");
  if (ch.fading.empty()) {
    chk.add("channel.fading", "at least one fading state");
  } else {
    for (std::size_t s = 0; s < ch.fading.size(); ++s) {
      const auto base = "channel.fading[" + std::to_string(s) + "].lambda";
      const auto& table = ch.fading[s].lambda;
      if (table.empty()) {
        chk.add(base, "non-empty error-rate table");
        continue;
      }
      for (std::size_t i = 0; i < table.size(); ++i)
        if (!(table[i] >= 0.0 && table[i] <= 1.0))
          chk.add(base + "[" + std::to_string(i) + "]", "lambda range [0,1]");
      if (static_cast<int>(table.size()) - 1 < ch.omega_max) chk.add(base, "s_max >= omega_max");
    }
    const auto states = static_cast<Eigen::Index>(ch.fading.size());
    if (chk.shape(ch.transition, states, states, "channel.transition")) {
      for (Eigen::Index r = 0; r < states; ++r) {
        const auto row = ch.transition.row(r);
        if ((row.array() < 0.0).any() || !row.allFinite())
          chk.add("channel.transition[" + std::to_string(r) + "]", "non-negative entries");
        if (std::abs(row.sum() - 1.0) > 1e-12)
          chk.add("channel.transition[" + std::to_string(r) + "]", "row-stochastic (sum 1)");
      }
    }
    if (ch.initial_state < 0 || ch.initial_state >= states)
      chk.add("channel.initial_state", "valid fading-state index");
  }

  if (cfg.dp.c1 < 2 || cfg.dp.c2 < 2) chk.add("dp", "grid sizes >= 2");
  if (cfg.dp.c4 < 1) chk.add("dp.c4", "at least one quadrature node");
  return out;
}

ScenarioConfig load_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  ScenarioConfig cfg = parse_scenario(doc);
  const auto violations = validate_scenario(cfg);
  if (!violations.empty()) throw ValidationError(format_violations(violations));
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open scenario file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario_text(buf.str());
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string format_violations(const std::vector<Violation>& violations) {
  std::ostringstream os;
  os << violations.size() << (violations.size() == 1 ? " violation" : " violations");
  for (const auto& v : violations) os << "\n  " << v.field << ": " << v.rule;
  return os.str();
}

}  // namespace harqnc
