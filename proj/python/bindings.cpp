#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qresp/density.hpp"
#include "qresp/error.hpp"
#include "qresp/harness.hpp"
#include "qresp/lasota_yorke.hpp"
#include "qresp/polynomial.hpp"
#include "qresp/response.hpp"
#include "qresp/suspension.hpp"

namespace py = pybind11;
using namespace qresp;
using nlohmann::json;

namespace {

json parse(const std::string& s) { return s.empty() ? json::object() : json::parse(s); }

py::array_t<cplx> coeff_array(const FourierFunction& f) {
  const auto c = f.coeffs();
  py::array_t<cplx> out(static_cast<py::ssize_t>(c.size()));
  std::copy(c.begin(), c.end(), out.mutable_data());
  return out;
}

// pybind11 holders cannot be shared_ptr<const T>
using MapHolder = std::shared_ptr<ParamCircleMap>;
MapHolder hold(MapPtr p) { return std::const_pointer_cast<ParamCircleMap>(std::move(p)); }

Discretization disc(int M, int Q) {
  Discretization d;
  d.M = M;
  d.Q = Q;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "qresp core";

  // translators are tried newest first, so the base class goes first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<AliasingError>(m, "AliasingError", PyExc_ValueError);
  py::register_exception<WindowError>(m, "WindowError", PyExc_IndexError);

  py::enum_<L1Rule>(m, "L1Rule").value("Rectangle", L1Rule::Rectangle).value("Exact", L1Rule::Exact);

  py::class_<FourierFunction>(m, "FourierFunction")
      .def(py::init<int>(), py::arg("modes"))
      .def(py::init([](int modes, const std::vector<cplx>& c) { return FourierFunction(modes, c); }),
           py::arg("modes"), py::arg("coeffs"))
      .def_static("constant", &FourierFunction::constant, py::arg("modes"), py::arg("value"))
      .def_static("cosine", &FourierFunction::cosine, py::arg("modes"), py::arg("k"), py::arg("amp") = 1.0)
      .def_static("sine", &FourierFunction::sine, py::arg("modes"), py::arg("k"), py::arg("amp") = 1.0)
      .def_static(
          "from_samples",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> s, int M) {
            return project(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), M);
          },
          py::arg("samples"), py::arg("modes"))
      .def_property_readonly("modes", &FourierFunction::modes)
      .def_property_readonly("mean", &FourierFunction::mean)
      .def_property_readonly("coeffs", &coeff_array)
      .def("coeff", &FourierFunction::coeff)
      .def("__call__", [](const FourierFunction& f, double x) { return f(x); })
      .def("value", &FourierFunction::value, py::arg("x"), py::arg("order") = 0)
      .def("sample", &FourierFunction::sample, py::arg("Q"), py::arg("order") = 0)
      .def("derivative", &FourierFunction::derivative, py::arg("order") = 1)
      .def("antiderivative", &FourierFunction::antiderivative)
      .def("resized", &FourierFunction::resized)
      .def("with_mean", &FourierFunction::with_mean)
      .def("inner", &FourierFunction::inner)
      .def("l2_norm", &FourierFunction::l2_norm)
      .def("max_abs_coeff", &FourierFunction::max_abs_coeff)
      .def(py::self + py::self)
      .def(py::self - py::self)
      .def(py::self * double())
      .def(double() * py::self)
      .def("__repr__", [](const FourierFunction& f) {
        return "<FourierFunction modes=" + std::to_string(f.modes()) + " mean=" + std::to_string(f.mean()) + ">";
      });

  m.def("default_quadrature", &default_quadrature);
  m.def("l1_norm", &l1_norm, py::arg("f"), py::arg("Q") = 0, py::arg("rule") = L1Rule::Exact);
  m.def("sobolev_norm", &sobolev_norm, py::arg("f"), py::arg("ell"), py::arg("Q") = 0,
        py::arg("rule") = L1Rule::Exact);

  py::class_<ParamCircleMap, MapHolder>(m, "CircleMap")
      .def_property_readonly("name", &ParamCircleMap::name)
      .def_property_readonly("degree", &ParamCircleMap::degree)
      .def_property_readonly("eps_max", &ParamCircleMap::eps_max)
      .def("lift", &ParamCircleMap::lift, py::arg("eps"), py::arg("x"))
      .def("dx", &ParamCircleMap::dx, py::arg("eps"), py::arg("x"), py::arg("order") = 1)
      .def("min_abs_dx", &ParamCircleMap::min_abs_dx, py::arg("eps"), py::arg("grid") = 1024);

  m.def(
      "builtin_family", [](const std::string& name, const std::string& params) { return hold(builtin_family(name, parse(params))); },
      py::arg("name"), py::arg("params_json") = "");
  m.def(
      "doubling_composed",
      [](int d, const FourierFunction& psi, double e) { return hold(doubling_composed(d, psi, e)); }, py::arg("degree"), py::arg("psi"), py::arg("eps_max"));
  m.def("list_families", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : list_families()) out.emplace_back(f.name, f.description);
    return out;
  });

  py::class_<MapRegistry, std::shared_ptr<MapRegistry>>(m, "MapRegistry")
      .def(py::init<>())
      .def("add", [](MapRegistry& r, const std::string& s, MapHolder m) { r.add(s, std::move(m)); })
      .def("index_of", &MapRegistry::index_of)
      .def_property_readonly("size", &MapRegistry::size);

  py::class_<DrivingOrbit>(m, "DrivingOrbit")
      .def_static(
          "constant", [](MapHolder m, int window) { return DrivingOrbit::constant(std::move(m), window); },
          py::arg("map"), py::arg("window"))
      .def_property_readonly("window", &DrivingOrbit::window)
      .def_property_readonly("symbols", &DrivingOrbit::symbols)
      .def("symbol", &DrivingOrbit::symbol)
      .def("fiber", [](const DrivingOrbit& o, int n) { return hold(o.fiber_ptr(n)); });
  m.def(
      "sample_orbit",
      [](const std::string& family, std::uint64_t seed, int window, const std::string& params,
         std::shared_ptr<MapRegistry> reg) { return sample_orbit(family, seed, window, parse(params), reg); },
      py::arg("family"), py::arg("seed"), py::arg("window"), py::arg("params_json"), py::arg("registry"));

  py::class_<TransferMatrix>(m, "TransferMatrix")
      .def_readonly("M", &TransferMatrix::M)
      .def_property_readonly("A", [](const TransferMatrix& t) { return Eigen::MatrixXcd(t.A); });
  m.def("assemble", &assemble, py::arg("map"), py::arg("eps"), py::arg("M"), py::arg("Q") = 0);
  m.def("apply", &apply, py::arg("A"), py::arg("f"));

  py::class_<DensityResult>(m, "DensityResult")
      .def_readonly("h", &DensityResult::h)
      .def_readonly("fiber", &DensityResult::fiber)
      .def_readonly("eps", &DensityResult::eps)
      .def_readonly("pullback_depth", &DensityResult::pullback_depth)
      .def_readonly("cauchy_defect", &DensityResult::cauchy_defect)
      .def_readonly("converged", &DensityResult::converged)
      .def_readonly("defect_history", &DensityResult::defect_history)
      .def_readonly("grid_min", &DensityResult::grid_min);
  m.def(
      "equivariant_density",
      [](const DrivingOrbit& orbit, double eps, int fiber, int M, int Q, double tol) {
        DensityOptions o;
        o.tol = tol;
        return equivariant_density(orbit, eps, fiber, disc(M, Q), o);
      },
      py::arg("orbit"), py::arg("eps"), py::arg("fiber"), py::arg("M") = 32, py::arg("Q") = 0, py::arg("tol") = 1e-9);

  py::class_<ResponseResult>(m, "ResponseResult")
      .def_readonly("h_hat", &ResponseResult::h_hat)
      .def_readonly("fiber", &ResponseResult::fiber)
      .def_readonly("series_depth", &ResponseResult::series_depth)
      .def_readonly("tail_estimate", &ResponseResult::tail_estimate)
      .def_readonly("observable_response", &ResponseResult::observable_response)
      .def_readonly("term_norms", &ResponseResult::term_norms);
  m.def(
      "response_series",
      [](const DrivingOrbit& orbit, int fiber, int M, int Q, int N, std::optional<FourierFunction> phi, double tol) {
        ResponseOptions o;
        o.N = N;
        o.observable = std::move(phi);
        o.density.tol = tol;
        return response_series(orbit, fiber, disc(M, Q), o);
      },
      py::arg("orbit"), py::arg("fiber"), py::arg("M") = 32, py::arg("Q") = 0, py::arg("N") = -1,
      py::arg("observable") = py::none(), py::arg("tol") = 1e-9);
  m.def("derivative_operator", &derivative_operator, py::arg("map"), py::arg("phi"), py::arg("Q") = 0,
        py::arg("eps") = 0.0);
  m.def(
      "koopman_observable_response",
      [](const DrivingOrbit& orbit, const ResponseResult& r, const FourierFunction& phi) {
        return koopman_observable_response(orbit, r, phi).value;
      },
      py::arg("orbit"), py::arg("series"), py::arg("phi"));

  py::class_<RateFit>(m, "RateFit")
      .def_readonly("eps_list", &RateFit::eps_list)
      .def_readonly("errors", &RateFit::errors)
      .def_readonly("fitted_exponent", &RateFit::fitted_exponent)
      .def_readonly("fitted_prefactor", &RateFit::fitted_prefactor)
      .def_readonly("r_squared", &RateFit::r_squared)
      .def_readonly("exact", &RateFit::exact)
      .def_readonly("refused", &RateFit::refused)
      .def_readonly("monotone", &RateFit::monotone);
  m.def("fit_rate", &fit_rate, py::arg("eps_list"), py::arg("errors"));
  m.def("dyadic_eps_grid", &dyadic_eps_grid, py::arg("eps0") = 1.0, py::arg("from_") = 3, py::arg("to") = 10);
  m.def(
      "stability_rate",
      [](const DrivingOrbit& orbit, int fiber, const std::vector<double>& eps, int ell, int M, int Q, double tol) {
        DensityOptions o;
        o.tol = tol;
        return stability_rate(orbit, fiber, eps, ell, disc(M, Q), o);
      },
      py::arg("orbit"), py::arg("fiber"), py::arg("eps_list"), py::arg("ell") = 1, py::arg("M") = 32,
      py::arg("Q") = 0, py::arg("tol") = 1e-9);

  py::enum_<GVariant>(m, "GVariant").value("Paper", GVariant::Paper).value("Corrected", GVariant::Corrected);
  m.def(
      "g_polynomials",
      [](int ell, GVariant v) {
        std::vector<std::string> out;
        for (const auto& p : g_polynomials(ell, v)) out.push_back(p.to_string());
        return out;
      },
      py::arg("ell"), py::arg("variant") = GVariant::Corrected);
  m.def("verify_crim_identity", &verify_crim_identity, py::arg("map"), py::arg("eps"), py::arg("ell"),
        py::arg("variant"), py::arg("f"), py::arg("Q") = 0);

  py::class_<PsiObservable>(m, "PsiObservable")
      .def_readonly("psi", &PsiObservable::psi)
      .def_readonly("mean", &PsiObservable::mean)
      .def_readonly("l2", &PsiObservable::l2)
      .def_readonly("mass_outside", &PsiObservable::mass_outside)
      .def_readonly("corr_doubling", &PsiObservable::corr_doubling);
  m.def("make_psi", [](double a, double b, int M) { return make_psi(a, b, M); }, py::arg("a"), py::arg("b"),
        py::arg("M"));
  m.def(
      "quenched_response_value",
      [](std::uint64_t omega0, std::uint64_t i, const std::string& route, const PsiObservable& psi, double delta,
         int M, std::uint64_t stream) {
        SuspensionState s{omega0, i, stream};
        if (route != "closed_form" && route != "operator") throw DomainError("route must be closed_form or operator");
        return quenched_response_value(s, route == "operator" ? ResponseRoute::Operator : ResponseRoute::ClosedForm,
                                       psi, delta, M)
            .value;
      },
      py::arg("omega0"), py::arg("i"), py::arg("route"), py::arg("psi"), py::arg("delta"), py::arg("M") = 64,
      py::arg("stream") = 0);
  m.def(
      "sample_covering_times",
      [](std::uint64_t seed, double delta, std::size_t count, int threads) {
        const auto st = sample_suspension(seed, delta, count, threads);
        py::array_t<std::uint64_t> out(static_cast<py::ssize_t>(st.size()));
        auto* p = out.mutable_data();
        for (std::size_t j = 0; j < st.size(); ++j) p[j] = st[j].covering_time();
        return out;
      },
      py::arg("seed"), py::arg("delta"), py::arg("count"), py::arg("threads") = 1);
  m.def("prob_covering_equals", &prob_covering_equals);
  m.def("exact_truncated_mean", &exact_truncated_mean);

  m.def(
      "validate_config",
      [](const std::string& text) {
        const auto v = validate_config(json::parse(text), text);
        std::vector<std::tuple<std::string, std::string, int>> diags;
        for (const auto& d : v.diagnostics) diags.emplace_back(d.field, d.message, d.line);
        return py::make_tuple(v.ok, diags, v.ok ? v.resolved.dump() : std::string());
      },
      py::arg("config_json"));
  m.def(
      "run_config",
      [](const std::string& text, std::optional<std::string> output, int threads) {
        RunOptions o;
        o.output = std::move(output);
        o.threads = threads;
        RunRecord rec;
        {
          py::gil_scoped_release release;
          rec = run_config(json::parse(text), o, text);
        }
        return rec.to_json().dump();
      },
      py::arg("config_json"), py::arg("output") = py::none(), py::arg("threads") = 0);
  m.attr("__version__") = tool_version();
}
