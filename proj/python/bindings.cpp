#include "qenv/experiment.hpp"
#include "qenv/generator.hpp"
#include "qenv/linalg.hpp"
#include "qenv/nisio.hpp"
#include "qenv/ode.hpp"
#include "qenv/pricing.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace qenv;

namespace {

FlowOptions flow_options(const std::string& mode, long long k) {
  if (mode == "exact") return {ExpMode::exact, k};
  if (mode == "euler") return {ExpMode::euler_product, k};
  throw InvalidInput("exp mode must be 'exact' or 'euler', got '" + mode + "'");
}

PricingMethod pricing_method(const std::string& name, long long steps, int n, long long k) {
  try {
    return build_method(name, steps, n, k);
  } catch (const ConfigError& e) {
    throw InvalidInput(e.what());
  }
}

std::vector<GeneratorFamily::Member> to_members(
    const std::vector<std::pair<Matrix, std::optional<Vector>>>& list) {
  std::vector<GeneratorFamily::Member> members;
  for (const auto& [rates, penalty] : list) {
    members.push_back({rates, penalty ? *penalty : Vector::Zero(rates.rows())});
  }
  return members;
}

py::tuple trajectory(const Trajectory& tr) {
  Matrix values(static_cast<Eigen::Index>(tr.values.size()),
                tr.values.empty() ? 0 : tr.values.front().size());
  for (std::size_t j = 0; j < tr.values.size(); ++j) {
    values.row(static_cast<Eigen::Index>(j)) = tr.values[j].transpose();
  }
  return py::make_tuple(tr.times, values);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semigroup envelopes of finite generator families";

  py::register_exception<InvalidGenerator>(m, "InvalidGenerator", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<IntegrationDiverged>(m, "IntegrationDiverged", PyExc_ArithmeticError);

  py::enum_<Direction>(m, "Direction")
      .value("upper", Direction::upper)
      .value("lower", Direction::lower);

  // linalg
  m.def("mat_exp", &mat_exp, py::arg("a"), py::arg("t") = 1.0);
  m.def("euler_product_exp", &euler_product_exp, py::arg("a"), py::arg("h"), py::arg("k"));
  m.def(
      "affine_flow",
      [](const Matrix& q, const Vector& f, double h) {
        auto flow = affine_flow(q, f, h);
        return py::make_tuple(flow.linear_part, flow.offset);
      },
      py::arg("q"), py::arg("f"), py::arg("h"),
      "Returns (M, c) with S_q(h) u = M u + c.");

  // generator
  py::class_<QViolation>(m, "QViolation")
      .def_property_readonly("kind",
                             [](const QViolation& v) {
                               switch (v.kind) {
                                 case QViolation::Kind::positive_diagonal: return "positive_diagonal";
                                 case QViolation::Kind::negative_off_diagonal:
                                   return "negative_off_diagonal";
                                 default: return "nonzero_row_sum";
                               }
                             })
      .def_readonly("row", &QViolation::row)
      .def_readonly("col", &QViolation::col)
      .def_readonly("value", &QViolation::value)
      .def("__repr__", &QViolation::describe);

  py::class_<QMatrixCheck>(m, "QMatrixCheck")
      .def_property_readonly("ok", &QMatrixCheck::ok)
      .def_readonly("violations", &QMatrixCheck::violations)
      .def("__bool__", &QMatrixCheck::ok);

  m.def("validate_q_matrix", &validate_q_matrix, py::arg("m"),
        py::arg("tol") = kDefaultTolerances.q_matrix);
  m.def("build_laplacian_a",
        [](Eigen::Index d, double delta) { return build_laplacian_a(d, delta).matrix(); },
        py::arg("d"), py::arg("delta"));
  m.def("build_drift_b",
        [](Eigen::Index d, double delta) { return build_drift_b(d, delta).matrix(); },
        py::arg("d"), py::arg("delta"));

  py::class_<GeneratorFamily>(m, "GeneratorFamily")
      .def(py::init([](const std::vector<std::pair<Matrix, std::optional<Vector>>>& members,
                       Direction direction) {
             return GeneratorFamily(to_members(members), direction);
           }),
           py::arg("members"), py::arg("direction") = Direction::upper,
           "members: list of (rates, penalty) pairs; penalty may be None for zero.")
      .def_property_readonly("dim", &GeneratorFamily::dim)
      .def_property_readonly("direction", &GeneratorFamily::direction)
      .def_property_readonly("is_sublinear", &GeneratorFamily::is_sublinear)
      .def_property_readonly("max_rate_norm", &GeneratorFamily::max_rate_norm)
      .def("__len__", &GeneratorFamily::size)
      .def("rates", [](const GeneratorFamily& f, std::size_t k) { return f.member(k).rates; })
      .def("penalty", [](const GeneratorFamily& f, std::size_t k) { return f.member(k).penalty; })
      .def("with_direction", &GeneratorFamily::with_direction);

  m.def("interval_generator", &interval_generator, py::arg("q0"), py::arg("q"),
        py::arg("lambda_low"), py::arg("lambda_high"), py::arg("direction") = Direction::upper);
  m.def(
      "apply_q_operator",
      [](const GeneratorFamily& fam, const Vector& u) {
        std::vector<std::size_t> arg;
        Vector out = apply_q_operator(fam, u, &arg);
        return py::make_tuple(out, arg);
      },
      py::arg("fam"), py::arg("u"), "Returns (Q u, attaining member per state).");
  m.def(
      "check_pmp",
      [](const GeneratorFamily& fam, std::size_t trials, std::uint64_t seed, double tol) {
        py::list out;
        for (const auto& e : check_pmp(fam, trials, seed, tol).entries) {
          py::dict row;
          row["name"] = e.name;
          row["checks"] = e.checks;
          row["failures"] = e.failures;
          row["counterexample"] = e.counterexample;
          out.append(row);
        }
        return out;
      },
      py::arg("fam"), py::arg("trials") = 1000, py::arg("seed") = 42,
      py::arg("tol") = kDefaultTolerances.q_matrix);

  // nisio
  m.def(
      "one_step",
      [](const GeneratorFamily& fam, double h, const Vector& u, const std::string& mode,
         long long k) { return one_step(fam, h, u, flow_options(mode, k)); },
      py::arg("fam"), py::arg("h"), py::arg("u"), py::arg("mode") = "exact", py::arg("k") = 10);
  m.def(
      "iterate_partition",
      [](const GeneratorFamily& fam, std::vector<double> times, const Vector& u,
         const std::string& mode, long long k) {
        return iterate_partition(fam, Partition(std::move(times)), u, flow_options(mode, k));
      },
      py::arg("fam"), py::arg("times"), py::arg("u"), py::arg("mode") = "exact",
      py::arg("k") = 10);
  m.def(
      "envelope",
      [](const GeneratorFamily& fam, double t, int n, const Vector& u, const std::string& mode,
         long long k) {
        const auto options = flow_options(mode, k);
        py::gil_scoped_release release;
        return envelope(fam, t, n, u, options);
      },
      py::arg("fam"), py::arg("t"), py::arg("n"), py::arg("u"), py::arg("mode") = "exact",
      py::arg("k") = 10);
  m.def(
      "envelope_refined",
      [](const GeneratorFamily& fam, double t, const Vector& u, double tol, int n_max) {
        auto [value, diag] = envelope_refined(fam, t, u, tol, n_max);
        py::list levels;
        for (const auto& l : diag.levels) {
          py::dict row;
          row["n"] = l.n;
          row["max_abs_increment"] = l.max_abs_increment;
          row["min_increment"] = l.min_increment;
          levels.append(row);
        }
        py::dict d;
        d["levels"] = levels;
        d["converged"] = diag.converged;
        d["final_level"] = diag.final_level;
        return py::make_tuple(value, d);
      },
      py::arg("fam"), py::arg("t"), py::arg("u"), py::arg("tol"), py::arg("n_max") = 20);
  m.def(
      "extract_worst_case_control",
      [](const GeneratorFamily& fam, double t, int n, const Vector& u) {
        std::vector<std::pair<std::vector<std::size_t>, double>> steps;
        for (auto& s : extract_worst_case_control(fam, t, n, u).steps) {
          steps.emplace_back(std::move(s.selection), s.duration);
        }
        return steps;
      },
      py::arg("fam"), py::arg("t"), py::arg("n"), py::arg("u"),
      "Control as a list of (selection, duration); the last step acts first.");
  m.def(
      "control_evaluate",
      [](const GeneratorFamily& fam,
         const std::vector<std::pair<std::vector<std::size_t>, double>>& steps, const Vector& u) {
        Control theta;
        for (const auto& [sel, dur] : steps) theta.steps.push_back({sel, dur});
        return control_evaluate(fam, theta, u);
      },
      py::arg("fam"), py::arg("control"), py::arg("u"));

  // ode
  m.def(
      "solve_euler",
      [](const GeneratorFamily& fam, const Vector& u0, double t, long long steps,
         std::size_t snapshots) {
        return trajectory(solve_euler(fam, u0, t, steps, {snapshots}));
      },
      py::arg("fam"), py::arg("u0"), py::arg("t"), py::arg("steps"), py::arg("snapshots") = 101,
      "Returns (times, values) with one row of values per snapshot.");
  m.def(
      "solve_rk4",
      [](const GeneratorFamily& fam, const Vector& u0, double t, long long steps,
         std::size_t snapshots) { return trajectory(solve_rk4(fam, u0, t, steps, {snapshots})); },
      py::arg("fam"), py::arg("u0"), py::arg("t"), py::arg("steps"), py::arg("snapshots") = 101);

  // pricing
  m.def(
      "payoff_butterfly",
      [](Eigen::Index d, double delta, double K, double L) {
        return payoff_butterfly(StateGrid{d, delta}, K, L).values;
      },
      py::arg("d"), py::arg("delta"), py::arg("K"), py::arg("L"));
  m.def(
      "payoff_bull",
      [](Eigen::Index d, double delta, double K, double L) {
        return payoff_bull(StateGrid{d, delta}, K, L).values;
      },
      py::arg("d"), py::arg("delta"), py::arg("K"), py::arg("L"));
  m.def(
      "price_bounds",
      [](const GeneratorFamily& fam, const Vector& payoff, double delta, double t,
         const std::string& method, long long steps, int n, long long k) {
        const Payoff p = payoff_custom(StateGrid{payoff.size(), delta}, payoff);
        const PricingMethod pm = pricing_method(method, steps, n, k);
        py::gil_scoped_release release;
        auto b = price_bounds(fam, p, t, pm);
        return std::make_pair(std::move(b.upper), std::move(b.lower));
      },
      py::arg("fam"), py::arg("payoff"), py::arg("delta") = 1.0, py::arg("t") = 1.0,
      py::arg("method") = "ode-euler", py::arg("steps") = 1000, py::arg("n") = 10,
      py::arg("k") = 10, "Returns (upper, lower).");
  m.def(
      "linear_reference",
      [](const Matrix& q, const Vector& payoff, double t) {
        return linear_reference(q, payoff_custom(StateGrid{payoff.size(), 1.0}, payoff), t);
      },
      py::arg("q"), py::arg("payoff"), py::arg("t"));

  // cli
  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "qenv");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line front end; returns (exit code, stdout, stderr).");
}
