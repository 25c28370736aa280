#include "harqnc/io.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace harqnc {

using nlohmann::json;

std::string scenario_hash(const ScenarioConfig& cfg) {
  return content_hash(serialize_scenario(cfg).dump());
}

OutputMeta make_meta(const ScenarioConfig& cfg, std::string kind) {
  OutputMeta m;
  m.scenario_hash = scenario_hash(cfg);
  m.seed = cfg.seed;
  m.kind = std::move(kind);
  return m;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_csv_header(std::ostream& os, const OutputMeta& meta) {
  os << "# harqnc " << meta.version << " " << meta.kind << "\n";
  os << "# scenario_hash " << meta.scenario_hash << "\n";
  os << "# seed " << meta.seed << "\n";
}

namespace {

json meta_json(const OutputMeta& meta) {
  return json{{"version", meta.version},
              {"kind", meta.kind},
              {"scenario_hash", meta.scenario_hash},
              {"seed", meta.seed}};
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

void vector_columns(std::ostream& os, const char* name, Eigen::Index count) {
  for (Eigen::Index i = 0; i < count; ++i) os << "," << name << "_" << i;
}

void vector_cells(std::ostream& os, const Vector& v, Eigen::Index count) {
  for (Eigen::Index i = 0; i < count; ++i) {
    os << ",";
    if (i < v.size()) os << format_double(v(i));
  }
}

}  // namespace

void write_trace_csv(std::ostream& os, const RunTrace& trace, const OutputMeta& meta) {
  write_csv_header(os, meta);
  os << "# policy " << trace.policy << "\n";
  os << "# run_index " << trace.run_index << "\n";
  os << "# totals tx=" << trace.tx << " rtx=" << trace.rtx << " pl=" << trace.packet_losses
     << " loss=" << format_double(trace.loss) << "\n";
  if (trace.steps.empty()) return;
  const auto& first = trace.steps.front();
  const auto n = first.x.size();
  const auto p = first.y.size();
  const auto m = first.a.size();
  os << "k";
  vector_columns(os, "x", n);
  vector_columns(os, "y", p);
  vector_columns(os, "x_check", n);
  vector_columns(os, "x_hat", n);
  vector_columns(os, "a", m);
  os << ",u,reason,gamma,tau,omega,fading_state,lambda_used,z_status,delivered_origin,"
        "stage_cost,Omega,Delta,e_tilde_norm,e_hat_norm,epsilon_norm\n";
  const int last = trace.steps.back().k;
  for (const auto& s : trace.steps) {
    const bool terminal = s.k == last;
    os << s.k;
    vector_cells(os, s.x, n);
    vector_cells(os, s.y, p);
    vector_cells(os, s.x_check, n);
    vector_cells(os, s.x_hat, n);
    vector_cells(os, s.a, m);
    if (terminal) {
      os << ",,,";
    } else {
      os << "," << to_string(s.u) << "," << to_string(s.reason) << "," << s.gamma;
    }
    os << "," << s.tau << "," << s.omega << "," << s.fading_state << ","
       << format_double(s.lambda_used) << "," << (s.z_delivered ? "delivered" : "erased") << ","
       << s.delivered_origin << "," << format_double(s.stage_cost) << ","
       << format_double(s.omega_gap) << "," << format_double(s.delta) << ","
       << format_double(s.e_tilde_norm) << "," << format_double(s.e_hat_norm) << ","
       << format_double(s.epsilon_norm) << "\n";
  }
}

json trace_to_json(const RunTrace& trace, const OutputMeta& meta) {
  json steps = json::array();
  const int last = trace.steps.empty() ? -1 : trace.steps.back().k;
  for (const auto& s : trace.steps) {
    json row{{"k", s.k}, {"x", vector_json(s.x)}};
    if (s.k != last) {
      row["y"] = vector_json(s.y);
      row["x_check"] = vector_json(s.x_check);
      row["x_hat"] = vector_json(s.x_hat);
      row["a"] = vector_json(s.a);
      row["u"] = std::string(to_string(s.u));
      row["reason"] = std::string(to_string(s.reason));
      row["gamma"] = s.gamma;
      row["lambda_used"] = number(s.lambda_used);
      row["Omega"] = number(s.omega_gap);
      row["Delta"] = number(s.delta);
      row["e_tilde_norm"] = number(s.e_tilde_norm);
      row["e_hat_norm"] = number(s.e_hat_norm);
      row["epsilon_norm"] = number(s.epsilon_norm);
    }
    row["tau"] = s.tau;
    row["omega"] = s.omega;
    row["fading_state"] = s.fading_state;
    row["z_status"] = s.z_delivered ? "delivered" : "erased";
    row["delivered_origin"] = s.delivered_origin;
    row["stage_cost"] = number(s.stage_cost);
    steps.push_back(std::move(row));
  }
  return json{{"meta", meta_json(meta)},
              {"policy", trace.policy},
              {"run_index", trace.run_index},
              {"totals",
               {{"tx", trace.tx},
                {"rtx", trace.rtx},
                {"packet_losses", trace.packet_losses},
                {"forced_tau0", trace.forced_tau0},
                {"forced_omega_cap", trace.forced_omega_cap},
                {"loss", number(trace.loss)}}},
              {"steps", std::move(steps)}};
}

json summary_to_json(const MonteCarloResult& result, const OutputMeta& meta) {
  json pols = json::array();
  for (const auto& s : result.policies) {
    const auto& q = s.quantiles;
    pols.push_back({{"policy", s.policy},
                    {"runs", s.runs},
                    {"mean", number(s.mean)},
                    {"std_error", number(s.std_error)},
                    {"quantiles",
                     {{"min", number(q.min)},
                      {"p05", number(q.p05)},
                      {"p25", number(q.p25)},
                      {"p50", number(q.p50)},
                      {"p75", number(q.p75)},
                      {"p95", number(q.p95)},
                      {"max", number(q.max)}}},
                    {"counts",
                     {{"tx", s.tx},
                      {"rtx", s.rtx},
                      {"packet_losses", s.packet_losses},
                      {"forced_tau0", s.forced_tau0},
                      {"forced_omega_cap", s.forced_omega_cap}}},
                    {"erasure",
                     {{"fraction", number(s.erasure_fraction)},
                      {"expected", number(s.expected_erasure_fraction)},
                      {"std_error", number(s.erasure_std_error)}}}});
  }
  json cmp = json::array();
  for (const auto& c : result.comparisons)
    cmp.push_back({{"a", c.a},
                   {"b", c.b},
                   {"mean_diff", number(c.mean_diff)},
                   {"std_error", number(c.std_error)}});
  return json{{"meta", meta_json(meta)}, {"policies", std::move(pols)}, {"comparisons", std::move(cmp)}};
}

void write_summary_csv(std::ostream& os, const MonteCarloResult& result, const OutputMeta& meta) {
  write_csv_header(os, meta);
  os << "policy,runs,mean,std_error,min,p05,p25,p50,p75,p95,max,tx,rtx,packet_losses,"
        "forced_tau0,forced_omega_cap,erasure_fraction,expected_erasure_fraction,"
        "erasure_std_error\n";
  for (const auto& s : result.policies) {
    const auto& q = s.quantiles;
    os << s.policy << "," << s.runs << "," << format_double(s.mean) << ","
       << format_double(s.std_error) << "," << format_double(q.min) << ","
       << format_double(q.p05) << "," << format_double(q.p25) << "," << format_double(q.p50)
       << "," << format_double(q.p75) << "," << format_double(q.p95) << ","
       << format_double(q.max) << "," << s.tx << "," << s.rtx << "," << s.packet_losses << ","
       << s.forced_tau0 << "," << s.forced_omega_cap << ","
       << format_double(s.erasure_fraction) << "," << format_double(s.expected_erasure_fraction)
       << "," << format_double(s.erasure_std_error) << "\n";
  }
}

void write_per_run_csv(std::ostream& os, const MonteCarloResult& result, const OutputMeta& meta) {
  write_csv_header(os, meta);
  os << "run_index";
  for (const auto& s : result.policies) os << "," << s.policy;
  os << "\n";
  if (result.policies.empty()) return;
  const auto runs = result.policies.front().per_run.size();
  for (std::size_t r = 0; r < runs; ++r) {
    os << r;
    for (const auto& s : result.policies) os << "," << format_double(s.per_run[r]);
    os << "\n";
  }
}

void write_gains_csv(std::ostream& os, const GainSchedule& gains, const OutputMeta& meta) {
  write_csv_header(os, meta);
  const auto n = gains.S.front().rows();
  const auto m = gains.L.front().rows();
  os << "k";
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) os << ",S_" << i << "_" << j;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) os << ",L_" << i << "_" << j;
  os << "\n";
  for (std::size_t k = 0; k < gains.S.size(); ++k) {
    os << k;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) os << "," << format_double(gains.S[k](i, j));
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        os << ",";
        if (k < gains.L.size()) os << format_double(gains.L[k](i, j));
      }
    os << "\n";
  }
}

void write_dp_csv(std::ostream& os, const DpOracle& dp, const OutputMeta& meta) {
  write_csv_header(os, meta);
  os << "k,tau,fading_state,e_tilde,epsilon,value,q_tx,q_rtx,decision\n";
  for (int k = 0; k <= dp.horizon(); ++k) {
    const auto& g = dp.grid(k);
    for (int tau = 0; tau < g.tau_levels; ++tau) {
      const auto& ax = g.eps_axis[static_cast<std::size_t>(tau)];
      for (int f = 0; f < g.fading_states; ++f)
        for (int i = 0; i < g.e_axis.count; ++i)
          for (int j = 0; j < ax.count; ++j) {
            const auto idx = g.index(tau, f, i, j);
            os << k << "," << tau << "," << f << "," << format_double(g.e_axis.node(i)) << ","
               << format_double(ax.node(j)) << "," << format_double(g.values[idx]) << ","
               << format_double(g.q_tx[idx]) << "," << format_double(g.q_rtx[idx]) << ","
               << (g.rtx[idx] ? "RTX" : "TX") << "\n";
          }
    }
  }
}

json dp_to_json(const DpOracle& dp, const OutputMeta& meta) {
  json grids = json::array();
  for (int k = 0; k <= dp.horizon(); ++k) {
    const auto& g = dp.grid(k);
    json levels = json::array();
    for (int tau = 0; tau < g.tau_levels; ++tau) {
      const auto& ax = g.eps_axis[static_cast<std::size_t>(tau)];
      for (int f = 0; f < g.fading_states; ++f) {
        json values = json::array();
        json decisions = json::array();
        for (int i = 0; i < g.e_axis.count; ++i) {
          json vrow = json::array();
          json drow = json::array();
          for (int j = 0; j < ax.count; ++j) {
            const auto idx = g.index(tau, f, i, j);
            vrow.push_back(number(g.values[idx]));
            drow.push_back(g.rtx[idx] ? "RTX" : "TX");
          }
          values.push_back(std::move(vrow));
          decisions.push_back(std::move(drow));
        }
        levels.push_back({{"tau", tau},
                          {"fading_state", f},
                          {"epsilon_axis", {{"lo", ax.lo}, {"hi", ax.hi}, {"count", ax.count}}},
                          {"values", std::move(values)},
                          {"decisions", std::move(decisions)}});
      }
    }
    grids.push_back({{"k", k},
                     {"e_tilde_axis", {{"lo", g.e_axis.lo}, {"hi", g.e_axis.hi}, {"count", g.e_axis.count}}},
                     {"levels", std::move(levels)}});
  }
  return json{{"meta", meta_json(meta)}, {"horizon", dp.horizon()}, {"grids", std::move(grids)}};
}

}  // namespace harqnc
