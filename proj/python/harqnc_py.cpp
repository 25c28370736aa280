#include "harqnc/io.hpp"
#include "harqnc/sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace harqnc;

namespace {

/// Scenario handle for Python: config plus its prepared schedules.
class Scenario {
 public:
  explicit Scenario(const ScenarioConfig& cfg, bool with_dp) {
    PrepareOptions opts;
    opts.with_dp = with_dp;
    prep_ = prepare(cfg, opts);
  }

  const PreparedScenario& prepared() const { return *prep_; }
  int horizon() const { return prep_->horizon(); }
  std::uint64_t seed() const { return prep_->config().seed; }
  std::string policy() const { return prep_->config().policy.to_string(); }
  std::string hash() const { return scenario_hash(prep_->config()); }
  bool has_dp() const { return prep_->dp() != nullptr; }

 private:
  std::shared_ptr<const PreparedScenario> prep_;
};

Scenario load(const std::string& path, bool with_dp) { return Scenario(load_scenario(path), with_dp); }
Scenario from_json(const std::string& text, bool with_dp) {
  return Scenario(load_scenario_text(text), with_dp);
}

py::list violations(const std::string& text) {
  const auto cfg = parse_scenario(nlohmann::json::parse(text));
  py::list out;
  for (const auto& v : validate_scenario(cfg)) out.append(py::make_tuple(v.field, v.rule));
  return out;
}

py::dict gains(const Scenario& s) {
  const auto& g = s.prepared().gains();
  py::dict d;
  d["S"] = g.S;
  d["L"] = g.L;
  d["Gamma"] = g.Gamma;
  d["Lambda"] = g.Lambda;
  return d;
}

py::dict covariances(const Scenario& s) {
  const auto& c = s.prepared().covariances();
  py::dict d;
  d["P"] = c.P;
  d["M"] = c.M;
  d["K"] = c.K;
  d["N"] = c.N;
  return d;
}

Matrix stack(const std::vector<StepRecord>& steps, Vector StepRecord::*field, std::size_t rows) {
  const auto cols = steps.front().*field;
  Matrix out = Matrix::Constant(static_cast<Eigen::Index>(rows), cols.size(),
                                std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < rows && r < steps.size(); ++r) {
    const Vector& v = steps[r].*field;
    if (v.size() == cols.size()) out.row(static_cast<Eigen::Index>(r)) = v.transpose();
  }
  return out;
}

py::dict simulate(const Scenario& s, int run_index, const std::string& policy) {
  const auto spec = policy.empty() ? s.prepared().config().policy : PolicySpec::parse(policy);
  const auto impl = make_policy(spec);
  const RunTrace t = run_episode(s.prepared(), *impl, run_index);
  const auto rows = t.steps.size();
  const auto decisions = rows - 1;

  py::dict d;
  d["policy"] = t.policy;
  d["run_index"] = t.run_index;
  d["x"] = stack(t.steps, &StepRecord::x, rows);
  d["x_check"] = stack(t.steps, &StepRecord::x_check, decisions);
  d["x_hat"] = stack(t.steps, &StepRecord::x_hat, decisions);
  d["a"] = stack(t.steps, &StepRecord::a, decisions);
  std::vector<int> u, gamma, tau;
  std::vector<std::string> reason;
  std::vector<double> stage, omega;
  for (std::size_t k = 0; k < rows; ++k) {
    const auto& r = t.steps[k];
    stage.push_back(r.stage_cost);
    tau.push_back(r.tau);
    if (k < decisions) {
      u.push_back(r.u == Decision::Rtx ? 1 : 0);
      gamma.push_back(r.gamma);
      reason.emplace_back(to_string(r.reason));
      omega.push_back(r.omega_gap);
    }
  }
  d["rtx"] = u;
  d["gamma"] = gamma;
  d["tau"] = tau;
  d["reason"] = reason;
  d["Omega"] = omega;
  d["stage_cost"] = stage;
  d["tx_count"] = t.tx;
  d["rtx_count"] = t.rtx;
  d["packet_losses"] = t.packet_losses;
  d["loss"] = t.loss;
  return d;
}

py::list monte_carlo_py(const Scenario& s, int runs, const std::vector<std::string>& policies,
                        int workers) {
  std::vector<PolicySpec> specs;
  for (const auto& p : policies) specs.push_back(PolicySpec::parse(p));
  if (specs.empty()) specs.push_back(s.prepared().config().policy);
  MonteCarloOptions opts;
  opts.runs = runs;
  opts.workers = resolve_workers(workers);
  MonteCarloResult res;
  {
    py::gil_scoped_release release;
    res = monte_carlo(s.prepared(), specs, opts);
  }
  py::list out;
  for (const auto& p : res.policies) {
    py::dict d;
    d["policy"] = p.policy;
    d["runs"] = p.runs;
    d["mean"] = p.mean;
    d["std_error"] = p.std_error;
    d["tx"] = p.tx;
    d["rtx"] = p.rtx;
    d["packet_losses"] = p.packet_losses;
    d["erasure_fraction"] = p.erasure_fraction;
    d["expected_erasure_fraction"] = p.expected_erasure_fraction;
    d["per_run"] = p.per_run;
    out.append(d);
  }
  return out;
}

py::dict dp_grid(const Scenario& s, int k) {
  const DpOracle* dp = s.prepared().dp();
  if (!dp) throw UnsupportedError("scenario was loaded without the DP oracle (with_dp=False)");
  const auto& g = dp->grid(k);
  py::dict d;
  d["k"] = g.k;
  d["e_axis"] = std::vector<double>{g.e_axis.lo, g.e_axis.hi, static_cast<double>(g.e_axis.count)};
  py::list levels;
  for (int tau = 0; tau < g.tau_levels; ++tau) {
    const auto& ax = g.eps_axis[static_cast<std::size_t>(tau)];
    for (int f = 0; f < g.fading_states; ++f) {
      Matrix values(g.e_axis.count, ax.count);
      Eigen::MatrixXi rtx(g.e_axis.count, ax.count);
      for (int i = 0; i < g.e_axis.count; ++i)
        for (int j = 0; j < ax.count; ++j) {
          values(i, j) = g.values[g.index(tau, f, i, j)];
          rtx(i, j) = g.rtx[g.index(tau, f, i, j)];
        }
      py::dict lvl;
      lvl["tau"] = tau;
      lvl["fading_state"] = f;
      lvl["eps_axis"] = std::vector<double>{ax.lo, ax.hi, static_cast<double>(ax.count)};
      lvl["values"] = values;
      lvl["rtx"] = rtx;
      levels.append(lvl);
    }
  }
  d["levels"] = levels;
  return d;
}

}  // namespace

PYBIND11_MODULE(_harqnc, m) {
  m.doc() = "HARQ networked control simulator";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);

  py::class_<Scenario>(m, "Scenario")
      .def_property_readonly("horizon", &Scenario::horizon)
      .def_property_readonly("seed", &Scenario::seed)
      .def_property_readonly("policy", &Scenario::policy)
      .def_property_readonly("hash", &Scenario::hash)
      .def_property_readonly("has_dp", &Scenario::has_dp);

  m.def("load_scenario", &load, py::arg("path"), py::arg("with_dp") = false);
  m.def("scenario_from_json", &from_json, py::arg("text"), py::arg("with_dp") = false);
  m.def("validate", &violations, py::arg("text"),
        "List of (field, rule) violations of a scenario document.");
  m.def("gains", &gains, py::arg("scenario"));
  m.def("covariances", &covariances, py::arg("scenario"));
  m.def("simulate", &simulate, py::arg("scenario"), py::arg("run_index") = 0,
        py::arg("policy") = std::string());
  m.def("monte_carlo", &monte_carlo_py, py::arg("scenario"), py::arg("runs"),
        py::arg("policies") = std::vector<std::string>{}, py::arg("workers") = 1);
  m.def("analytic_perfect_channel_loss",
        [](const Scenario& s) { return analytic_perfect_channel_loss(s.prepared()); });
  m.def("dp_grid", &dp_grid, py::arg("scenario"), py::arg("k"));
}
