#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "beliefmarket/agent.hpp"
#include "beliefmarket/equilibrium.hpp"
#include "beliefmarket/errors.hpp"
#include "beliefmarket/event_space.hpp"
#include "beliefmarket/pooling.hpp"
#include "beliefmarket/scenario.hpp"
#include "beliefmarket/selfcheck.hpp"

namespace py = pybind11;
using namespace beliefmarket;

namespace {

py::dict trace_dict(const SolverTrace& t) {
    py::dict d;
    d["iterations"] = t.iterations;
    d["method"] = t.method;
    d["converged"] = t.converged;
    d["ridge"] = t.ridge;
    d["fallback"] = t.fallback;
    return d;
}

py::dict demand_dict(const DemandSolution& s) {
    py::dict d;
    d["bundle"] = s.bundle;
    d["utility"] = s.utility;
    d["certainty_equivalent"] = s.certainty_equivalent;
    d["gradient_norm"] = s.gradient_norm;
    d["trace"] = trace_dict(s.trace);
    return d;
}

py::dict verdict_dict(const ConsistencyVerdict& v) {
    py::dict d;
    d["consistent"] = v.consistent();
    if (v.consistent()) {
        d["measure"] = v.measure;
    } else {
        d["direction"] = v.direction;
    }
    return d;
}

}  // namespace

PYBIND11_MODULE(_beliefmarket, m) {
    m.doc() = "securities-market belief aggregation core";

    py::register_exception<ScenarioError>(m, "ScenarioError", PyExc_ValueError);
    static py::exception<ArbitrageError> arb_exc(m, "ArbitrageError");
    static py::exception<SolverFailure> solver_exc(m, "SolverFailure");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ArbitrageError& e) {
            arb_exc(e.what());
        } catch (const SolverFailure& e) {
            solver_exc(e.what());
        }
    });

    py::class_<SampleSpace, std::shared_ptr<SampleSpace>>(m, "SampleSpace")
        .def(py::init([](std::vector<std::string> labels) {
            // make() hands back shared_ptr<const SampleSpace>; pybind holds
            // non-const, so strip the const for the Python handle.
            return std::const_pointer_cast<SampleSpace>(SampleSpace::make(labels));
        }))
        .def("__len__", &SampleSpace::size)
        .def("label", &SampleSpace::label)
        .def_property_readonly("labels", &SampleSpace::labels)
        .def("index", [](const SampleSpace& s, const std::string& label) {
            return s.index(label);
        });

    py::class_<Event>(m, "Event")
        .def(py::init([](SampleSpacePtr space, std::vector<std::uint32_t> atoms) {
            return Event(std::move(space), std::move(atoms));
        }))
        .def_property_readonly("atoms", &Event::atoms)
        .def("__len__", &Event::size)
        .def("contains", &Event::contains)
        .def("complement", &Event::complement);

    py::class_<JointBelief>(m, "JointBelief")
        .def(py::init<SampleSpacePtr, std::vector<double>>())
        .def_static("clamped",
                    [](SampleSpacePtr space, std::vector<double> mass) {
                        return JointBelief::clamped(std::move(space), std::move(mass));
                    })
        .def_property_readonly("mass", &JointBelief::mass);

    py::class_<SecuritySet>(m, "SecuritySet")
        .def(py::init<std::vector<Event>, std::vector<double>>())
        .def("__len__", &SecuritySet::size)
        .def_property_readonly("prices", &SecuritySet::prices)
        .def("payoff", [](const SecuritySet& s, std::vector<double> bundle,
                          std::uint32_t atom) { return s.payoff(bundle, atom); });

    py::class_<CaraAgent>(m, "CaraAgent")
        .def(py::init<JointBelief, double>())
        .def_readonly("belief", &CaraAgent::belief)
        .def_readonly("risk_aversion", &CaraAgent::risk_aversion);

    m.def("event_probability", &event_probability);
    m.def("conditional_probability", &conditional_probability);
    m.def("are_independent", &are_independent, py::arg("belief"), py::arg("a"),
          py::arg("b"), py::arg("tol") = 1e-12);

    m.def("check_consistency",
          [](const SecuritySet& s) { return verdict_dict(check_consistency(s)); });
    m.def("check_unit_combinations", [](const SecuritySet& s) {
        return verdict_dict(check_unit_combinations(s));
    });

    m.def("expected_utility",
          [](const CaraAgent& a, const SecuritySet& s, std::vector<double> bundle) {
              return expected_utility(a, s, bundle);
          });
    m.def("utility_gradient",
          [](const CaraAgent& a, const SecuritySet& s, std::vector<double> bundle) {
              return utility_gradient(a, s, bundle);
          });
    m.def("demand_single", &demand_single, py::arg("pr_a"), py::arg("c"), py::arg("p"));
    m.def("demand_disjoint_pair", &demand_disjoint_pair);
    m.def("demand_general", [](const CaraAgent& a, const SecuritySet& s) {
        return demand_dict(demand_general(a, s));
    });
    m.def("demand_pair_fixed_point", [](const CaraAgent& a, const SecuritySet& s) {
        return demand_dict(demand_pair_fixed_point(a, s));
    });

    m.def("risk_weights",
          [](const std::vector<double>& cs) { return risk_weights(cs).values(); });
    m.def("logop_normalized",
          [](const std::vector<double>& probs, const std::vector<double>& weights) {
              return logop_normalized(probs, WeightVector(weights));
          });
    m.def("logop_unnormalized",
          [](const std::vector<double>& probs, const std::vector<double>& weights) {
              return logop_unnormalized(probs, WeightVector(weights));
          });
    m.def("disagreement",
          [](const std::vector<double>& probs, const std::vector<double>& weights) {
              return disagreement(probs, WeightVector(weights));
          });
    m.def("linear_pool",
          [](const std::vector<double>& probs, const std::vector<double>& weights) {
              return linear_pool(probs, WeightVector(weights));
          });

    m.def("equilibrium_single", &equilibrium_single);
    m.def("equilibrium_disjoint_pair", &equilibrium_disjoint_pair);
    m.def("solve_equilibrium",
          [](std::vector<CaraAgent> agents, std::vector<Event> events) {
              Economy economy(std::move(agents), std::move(events));
              auto r = solve_equilibrium_numeric(economy);
              py::dict d;
              d["prices"] = r.prices;
              d["demands"] = r.demands;
              d["excess_norm"] = r.excess_norm;
              d["method"] =
                  r.method == EquilibriumMethod::ClosedForm ? "closed_form" : "numeric";
              d["iterations"] = r.trace.iterations;
              d["multiplicity_detected"] = r.trace.multiplicity_detected;
              return d;
          });

    m.def("run_scenario", [](const std::string& text) {
        Report report = run(parse_scenario(text));
        py::dict d;
        d["machine"] = report.machine.dump();
        d["human"] = report.human;
        return d;
    });

    m.def("verify", [](unsigned seed) {
        py::list out;
        for (const auto& c : run_selfchecks(seed)) {
            py::dict d;
            d["name"] = c.name;
            d["passed"] = c.passed;
            d["detail"] = c.detail;
            out.append(d);
        }
        return out;
    }, py::arg("seed") = 42);
}
