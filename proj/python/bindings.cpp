#include "gridtrade/commands.hpp"
#include "gridtrade/errors.hpp"
#include "gridtrade/network.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace gridtrade;

namespace {

MarketFile market_from(const std::string& text, const EngineOverrides& overrides = {}) {
  MarketFile f = parse_market_text(text);
  apply_overrides(f, overrides);
  return f;
}

}  // namespace

PYBIND11_MODULE(_gridtrade, m) {
  m.doc() = "Core of the gridtrade package; the public API lives in gridtrade/__init__.py";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<StructuralError>(m, "StructuralError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "run",
      [](const std::string& text, std::optional<double> epsilon, std::optional<std::uint64_t> seed,
         std::optional<std::size_t> max_steps, std::optional<std::string> proposer,
         std::optional<std::string> curtailment) {
        const MarketFile f = market_from(text, {epsilon, seed, max_steps, proposer, curtailment});
        RunOutput out;
        {
          py::gil_scoped_release release;
          out = run_market(f);
        }
        return py::make_tuple(out.report.dump(), out.trace);
      },
      py::arg("market"), py::arg("epsilon") = py::none(), py::arg("seed") = py::none(),
      py::arg("max_steps") = py::none(), py::arg("proposer") = py::none(), py::arg("curtailment") = py::none());

  m.def("dispatch", [](const std::string& text) { return dispatch_report(market_from(text)).dump(); },
        py::arg("market"));
  m.def("prices", [](const std::string& text) { return prices_report(market_from(text)).dump(); }, py::arg("market"));
  m.def(
      "check_equilibrium",
      [](const std::string& text, std::optional<Eigen::MatrixXd> y, std::optional<Eigen::MatrixXd> x,
         std::optional<Eigen::MatrixXd> lambda) {
        if (y.has_value() != x.has_value()) throw InputError("plans and injections must be given together");
        return equilibrium_report(market_from(text), y, x, lambda).dump();
      },
      py::arg("market"), py::arg("plans") = py::none(), py::arg("injections") = py::none(),
      py::arg("prices") = py::none());
  m.def("decompose", [](const std::string& text) { return decomposition_report(market_from(text)).dump(); },
        py::arg("market"));
  m.def(
      "robust_run",
      [](const std::string& text) {
        const RobustOutput out = robust_run(market_from(text));
        return py::make_tuple(out.summary.dump(), out.trace);
      },
      py::arg("market"));
  m.def(
      "loading_matrix",
      [](const std::string& text) { return build_loading_matrix(market_from(text).market.network).rows; },
      py::arg("market"));
}
