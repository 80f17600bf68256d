#include "beliefmarket/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "beliefmarket/equilibrium.hpp"
#include "beliefmarket/errors.hpp"
#include "beliefmarket/pooling.hpp"
#include "beliefmarket/selfcheck.hpp"

namespace beliefmarket {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ScenarioError(where + ": " + what);
}

double number_field(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_number()) {
        fail(where + "." + key, "missing or non-numeric");
    }
    return obj[key].get<double>();
}

std::vector<double> parse_belief(const json& node, const SampleSpacePtr& space,
                                 const std::string& where) {
    std::vector<double> mass(space->size(), 0.0);
    if (node.is_array()) {
        if (node.size() != space->size()) {
            fail(where, "belief array length must equal the atom count");
        }
        for (std::size_t i = 0; i < node.size(); ++i) {
            if (!node[i].is_number()) fail(where, "belief entries must be numbers");
            mass[i] = node[i].get<double>();
        }
    } else if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it) {
            auto idx = space->index(it.key());
            if (!idx) fail(where, "unknown atom label '" + it.key() + "'");
            if (!it.value().is_number()) fail(where, "belief entries must be numbers");
            mass[*idx] = it.value().get<double>();
        }
    } else {
        fail(where, "belief must be an array or a label-keyed object");
    }
    return mass;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json trace_json(const SolverTrace& t) {
    return {{"iterations", t.iterations},
            {"method", t.method},
            {"converged", t.converged},
            {"ridge", t.ridge},
            {"fallback", t.fallback}};
}

json demand_json(const ScenarioAgent& agent, const DemandSolution& sol) {
    return {{"agent", agent.id},
            {"bundle", sol.bundle},
            {"utility", sol.utility},
            {"certainty_equivalent", sol.certainty_equivalent},
            {"gradient_norm", sol.gradient_norm},
            {"trace", trace_json(sol.trace)}};
}

json verdict_json(const ConsistencyVerdict& v) {
    json out;
    out["status"] = v.consistent() ? "consistent" : "inconsistent";
    if (v.consistent()) {
        if (!v.measure.empty()) out["measure"] = v.measure;
    } else {
        out["direction"] = v.direction;
    }
    return out;
}

SecuritySet scenario_securities(const Scenario& s) {
    if (!s.has_prices) {
        fail("securities", "this task needs fixed prices on every security");
    }
    return SecuritySet(s.events, s.prices);
}

void require_agents(const Scenario& s) {
    if (s.agents.empty()) fail("agents", "this task needs at least one agent");
}

std::vector<double> agent_cs(const Scenario& s) {
    std::vector<double> cs;
    cs.reserve(s.agents.size());
    for (const auto& a : s.agents) cs.push_back(a.risk_aversion);
    return cs;
}

// ------------------------------------------------------------------ tasks

json run_demand(const Scenario& s) {
    require_agents(s);
    auto securities = scenario_securities(s);
    json out = json::array();
    for (const auto& a : s.agents) {
        CaraAgent agent(a.belief, a.risk_aversion);
        out.push_back(demand_json(a, demand_general(agent, securities)));
    }
    return json{{"demands", out}};
}

json run_check(const Scenario& s) {
    auto securities = scenario_securities(s);
    auto measure_verdict = check_consistency(securities);
    json out;
    out["consistency"] = verdict_json(measure_verdict);
    if (securities.size() <= kMaxUnitComboSecurities) {
        auto unit_verdict = check_unit_combinations(securities);
        out["unit_combinations"] = verdict_json(unit_verdict);
        out["criteria_diverge"] =
            measure_verdict.consistent() != unit_verdict.consistent();
    } else {
        out["unit_combinations"] = nullptr;
    }
    return out;
}

json run_pool(const Scenario& s) {
    require_agents(s);
    auto weights = risk_weights(agent_cs(s));
    json events_out = json::array();
    for (std::size_t z = 0; z < s.events.size(); ++z) {
        std::vector<double> probs, comp;
        for (const auto& a : s.agents) {
            double p = event_probability(a.belief, s.events[z]);
            probs.push_back(p);
            comp.push_back(1.0 - p);
        }
        double un = logop_unnormalized(probs, weights);
        double un_comp = logop_unnormalized(comp, weights);
        events_out.push_back({{"event", z},
                              {"agent_probabilities", probs},
                              {"logop_normalized", logop_normalized(probs, weights)},
                              {"logop_unnormalized", un},
                              {"logop_unnormalized_complement", un_comp},
                              {"disagreement", disagreement(probs, weights)},
                              {"linear_pool", linear_pool(probs, weights)}});
    }
    return json{{"weights", weights.values()}, {"events", events_out}};
}

json run_equilibrium(const Scenario& s) {
    require_agents(s);
    std::vector<CaraAgent> agents;
    for (const auto& a : s.agents) agents.emplace_back(a.belief, a.risk_aversion);
    Economy economy(std::move(agents), s.events);
    auto result = solve_equilibrium_numeric(economy);

    json out;
    out["prices"] = result.prices;
    out["excess_norm"] = result.excess_norm;
    out["method"] =
        result.method == EquilibriumMethod::ClosedForm ? "closed_form" : "numeric";
    json demands = json::array();
    for (std::size_t i = 0; i < result.demands.size(); ++i) {
        demands.push_back({{"agent", s.agents[i].id}, {"bundle", result.demands[i]}});
    }
    out["demands"] = demands;
    out["trace"] = {{"iterations", result.trace.iterations},
                    {"excess_evaluations", result.trace.excess_evaluations},
                    {"multiplicity_detected", result.trace.multiplicity_detected},
                    {"alternative_prices", result.trace.alternative_prices}};

    auto cs = agent_cs(s);
    if (s.events.size() == 1) {
        std::vector<double> beliefs;
        for (const auto& a : s.agents) {
            beliefs.push_back(event_probability(a.belief, s.events[0]));
        }
        double closed = equilibrium_single(beliefs, cs);
        out["closed_form"] = {{"type", "single"},
                              {"prices", {closed}},
                              {"deviation", std::abs(closed - result.prices[0])}};
    } else if (s.events.size() == 2) {
        const auto& a0 = s.events[0].atoms();
        const auto& a1 = s.events[1].atoms();
        bool disjoint = true;
        for (auto atom : a0) {
            if (s.events[1].contains(atom)) disjoint = false;
        }
        bool exhaustive = a0.size() + a1.size() >= s.space->size();
        if (disjoint && !exhaustive) {
            std::vector<std::pair<double, double>> beliefs;
            bool usable = true;
            for (const auto& a : s.agents) {
                double pa = event_probability(a.belief, s.events[0]);
                double pb = event_probability(a.belief, s.events[1]);
                if (pa + pb >= 1.0) usable = false;
                beliefs.emplace_back(pa, pb);
            }
            if (usable) {
                auto [ca, cb] = equilibrium_disjoint_pair(beliefs, cs);
                double dev = std::max(std::abs(ca - result.prices[0]),
                                      std::abs(cb - result.prices[1]));
                out["closed_form"] = {{"type", "disjoint_pair"},
                                      {"prices", {ca, cb}},
                                      {"deviation", dev}};
            }
        }
    }
    return out;
}

json run_surface(const Scenario& s) {
    require_agents(s);
    if (s.events.size() != 2) fail("securities", "surface task needs exactly 2 securities");
    auto securities = scenario_securities(s);

    double xmin = -3.0, xmax = 3.0, ymin = -3.0, ymax = 3.0;
    int resolution = 121;
    std::size_t agent_index = 0;
    double ridge_tol = 1e-7;
    if (s.params.contains("bounds")) {
        const auto& b = s.params["bounds"];
        if (!b.is_array() || b.size() != 4) fail("params.bounds", "expected [xmin,xmax,ymin,ymax]");
        xmin = b[0].get<double>();
        xmax = b[1].get<double>();
        ymin = b[2].get<double>();
        ymax = b[3].get<double>();
    }
    if (s.params.contains("resolution")) resolution = s.params["resolution"].get<int>();
    if (s.params.contains("agent")) agent_index = s.params["agent"].get<std::size_t>();
    if (s.params.contains("ridge_tol")) ridge_tol = s.params["ridge_tol"].get<double>();
    if (resolution < 2 || resolution > 2001) fail("params.resolution", "out of range");
    if (agent_index >= s.agents.size()) fail("params.agent", "agent index out of range");
    if (!(xmax > xmin && ymax > ymin)) fail("params.bounds", "degenerate bounds");

    CaraAgent agent(s.agents[agent_index].belief, s.agents[agent_index].risk_aversion);

    json grid = json::array();
    double best_u = -1e300;
    double best_x = 0.0, best_y = 0.0;
    int best_i = 0, best_j = 0;
    std::vector<std::array<double, 3>> rows;
    rows.reserve(static_cast<std::size_t>(resolution) * resolution);
    for (int i = 0; i < resolution; ++i) {
        double x = xmin + (xmax - xmin) * i / (resolution - 1);
        for (int j = 0; j < resolution; ++j) {
            double y = ymin + (ymax - ymin) * j / (resolution - 1);
            double bundle[2] = {x, y};
            double u = expected_utility(agent, securities, bundle);
            rows.push_back({x, y, u});
            if (u > best_u) {
                best_u = u;
                best_x = x;
                best_y = y;
                best_i = i;
                best_j = j;
            }
        }
    }
    for (const auto& r : rows) grid.push_back({r[0], r[1], r[2]});

    json out;
    out["grid"] = std::move(grid);
    out["argmax"] = {{"xA", best_x}, {"xB", best_y}, {"utility", best_u}};

    // Ridge: near-maximal cells falling on a line.
    std::vector<std::pair<double, double>> top;
    for (const auto& r : rows) {
        if (r[2] >= best_u - ridge_tol) top.emplace_back(r[0], r[1]);
    }
    out["ridge"] = nullptr;
    double step = std::min((xmax - xmin), (ymax - ymin)) / (resolution - 1);
    if (top.size() >= 3) {
        double cx = 0.0, cy = 0.0;
        for (auto& [x, y] : top) {
            cx += x;
            cy += y;
        }
        cx /= static_cast<double>(top.size());
        cy /= static_cast<double>(top.size());
        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (auto& [x, y] : top) {
            sxx += (x - cx) * (x - cx);
            sxy += (x - cx) * (y - cy);
            syy += (y - cy) * (y - cy);
        }
        double tr = sxx + syy, det = sxx * syy - sxy * sxy;
        double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
        double l_major = tr / 2.0 + disc;
        double l_minor = tr / 2.0 - disc;
        // normal = eigenvector of the minor eigenvalue
        double nx, ny;
        if (std::abs(sxy) > 1e-300) {
            nx = l_minor - syy;
            ny = sxy;
        } else if (sxx >= syy) {
            nx = 0.0;
            ny = 1.0;
        } else {
            nx = 1.0;
            ny = 0.0;
        }
        double nn = std::hypot(nx, ny);
        nx /= nn;
        ny /= nn;
        if (nx < 0.0 || (nx == 0.0 && ny < 0.0)) {
            nx = -nx;
            ny = -ny;
        }
        double residual = 0.0;
        for (auto& [x, y] : top) {
            residual = std::max(residual, std::abs(nx * (x - cx) + ny * (y - cy)));
        }
        bool line_like = l_major > step * step / 4.0 && residual <= step / 4.0;
        if (line_like) {
            out["ridge"] = {{"normal", {nx, ny}},
                            {"offset", nx * cx + ny * cy},
                            {"fit_residual", residual},
                            {"points", top.size()},
                            {"extent", std::sqrt(l_major)}};
        }
    }

    // Unbounded: argmax pinned to the box edge with the gradient still
    // pushing outward.
    out["unbounded_direction"] = nullptr;
    bool on_edge = best_i == 0 || best_i == resolution - 1 || best_j == 0 ||
                   best_j == resolution - 1;
    if (on_edge) {
        double bundle[2] = {best_x, best_y};
        auto g = utility_gradient(agent, securities, bundle);
        double gmax = std::max(std::abs(g[0]), std::abs(g[1]));
        bool outward = (best_i == resolution - 1 && g[0] > 0) ||
                       (best_i == 0 && g[0] < 0) ||
                       (best_j == resolution - 1 && g[1] > 0) ||
                       (best_j == 0 && g[1] < 0);
        if (gmax > 1e-6 && outward) {
            json dir = json::array();
            for (double gz : g) {
                dir.push_back(std::abs(gz) >= 0.5 * gmax ? (gz > 0 ? 1.0 : -1.0) : 0.0);
            }
            out["unbounded_direction"] = dir;
            out["gradient_at_argmax"] = g;
        }
    }

    // Exact optimum from the two-security fixed-point iteration, when prices allow one.
    out["optimum"] = nullptr;
    auto verdict = check_consistency(securities);
    out["consistency"] = verdict_json(verdict);
    if (verdict.consistent()) {
        auto sol = demand_pair_fixed_point(agent, securities);
        out["optimum"] = demand_json(s.agents[agent_index], sol);
    }
    return out;
}

json run_verify(const Scenario& s) {
    unsigned seed = 42;
    if (s.params.contains("seed")) seed = s.params["seed"].get<unsigned>();
    auto checks = run_selfchecks(seed);
    json items = json::array();
    bool all = true;
    for (const auto& c : checks) {
        items.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        all = all && c.passed;
    }
    return json{{"seed", seed}, {"all_passed", all}, {"checks", items}};
}

// ------------------------------------------------------------------ human text

std::string render_human(const Scenario& s, const json& results) {
    std::ostringstream os;
    os << "task: " << s.task << "\n";
    for (const auto& w : s.warnings) os << "warning: " << w << "\n";
    if (results.contains("demands")) {
        os << "per-agent demand\n";
        for (const auto& d : results["demands"]) {
            os << "  " << d["agent"].get<std::string>() << ":";
            for (const auto& x : d["bundle"]) os << " " << format_real(x.get<double>());
            if (d.contains("certainty_equivalent")) {
                os << "  (ce " << format_real(d["certainty_equivalent"].get<double>())
                   << ")";
            }
            os << "\n";
        }
    }
    if (results.contains("prices")) {
        os << "clearing prices:";
        for (const auto& p : results["prices"]) os << " " << format_real(p.get<double>());
        os << "\nexcess norm: " << format_real(results["excess_norm"].get<double>())
           << "\n";
        if (results.contains("closed_form")) {
            os << "closed form (" << results["closed_form"]["type"].get<std::string>()
               << "):";
            for (const auto& p : results["closed_form"]["prices"]) {
                os << " " << format_real(p.get<double>());
            }
            os << "  deviation "
               << format_real(results["closed_form"]["deviation"].get<double>()) << "\n";
        }
        os << "prices vs beliefs\n";
        for (std::size_t i = 0; i < s.agents.size(); ++i) {
            os << "  " << s.agents[i].id << ":";
            for (const auto& e : s.events) {
                os << " " << format_real(event_probability(s.agents[i].belief, e));
            }
            os << "\n";
        }
    }
    if (results.contains("events")) {
        os << "opinion pools\n";
        for (const auto& e : results["events"]) {
            os << "  event " << e["event"].get<int>() << ": logop "
               << format_real(e["logop_normalized"].get<double>()) << ", unnormalized "
               << format_real(e["logop_unnormalized"].get<double>()) << ", disagreement "
               << format_real(e["disagreement"].get<double>()) << ", linear "
               << format_real(e["linear_pool"].get<double>()) << "\n";
        }
    }
    if (results.contains("consistency") && !results.contains("grid")) {
        os << "consistency: " << results["consistency"]["status"].get<std::string>()
           << "\n";
        if (results["consistency"].contains("direction")) {
            os << "arbitrage direction:";
            for (const auto& d : results["consistency"]["direction"]) {
                os << " " << format_real(d.get<double>());
            }
            os << "\n";
        }
        if (results.contains("unit_combinations") &&
            !results["unit_combinations"].is_null()) {
            os << "unit combinations: "
               << results["unit_combinations"]["status"].get<std::string>() << "\n";
        }
    }
    if (results.contains("grid")) {
        const auto& am = results["argmax"];
        os << "surface argmax: (" << format_real(am["xA"].get<double>()) << ", "
           << format_real(am["xB"].get<double>()) << ") utility "
           << format_real(am["utility"].get<double>()) << "\n";
        if (!results["ridge"].is_null()) {
            const auto& r = results["ridge"];
            os << "ridge: " << format_real(r["normal"][0].get<double>()) << "*xA + "
               << format_real(r["normal"][1].get<double>())
               << "*xB = " << format_real(r["offset"].get<double>()) << "\n";
        }
        if (!results["unbounded_direction"].is_null()) {
            os << "unbounded direction:";
            for (const auto& d : results["unbounded_direction"]) {
                os << " " << format_real(d.get<double>());
            }
            os << "\n";
        }
    }
    if (results.contains("checks")) {
        for (const auto& c : results["checks"]) {
            os << (c["passed"].get<bool>() ? "pass" : "FAIL") << "  "
               << c["name"].get<std::string>();
            if (!c["detail"].get<std::string>().empty()) {
                os << "  (" << c["detail"].get<std::string>() << ")";
            }
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ScenarioError(std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) fail("scenario", "top level must be an object");

    Scenario s;
    if (!doc.contains("task") || !doc["task"].is_string()) {
        fail("task", "missing or non-string");
    }
    s.task = doc["task"].get<std::string>();
    static const char* kTasks[] = {"demand", "equilibrium", "pool",
                                   "check",  "surface",     "verify"};
    if (std::find_if(std::begin(kTasks), std::end(kTasks), [&](const char* t) {
            return s.task == t;
        }) == std::end(kTasks)) {
        fail("task", "unknown task '" + s.task + "'");
    }
    s.params = doc.value("params", json::object());

    if (s.task == "verify") return s;  // self-contained

    if (!doc.contains("sample_space") || !doc["sample_space"].is_array()) {
        fail("sample_space", "missing or non-array");
    }
    std::vector<std::string> labels;
    for (const auto& l : doc["sample_space"]) {
        if (!l.is_string()) fail("sample_space", "labels must be strings");
        labels.push_back(l.get<std::string>());
    }
    try {
        s.space = SampleSpace::make(std::move(labels));
    } catch (const std::invalid_argument& e) {
        fail("sample_space", e.what());
    }

    if (doc.contains("agents")) {
        if (!doc["agents"].is_array()) fail("agents", "must be an array");
        std::size_t idx = 0;
        for (const auto& a : doc["agents"]) {
            std::string where = "agents[" + std::to_string(idx) + "]";
            if (!a.is_object()) fail(where, "must be an object");
            std::string id = a.value("id", "agent" + std::to_string(idx));
            double c = number_field(a, "risk_aversion", where);
            if (!(c > 0.0)) fail(where + ".risk_aversion", "must be positive");
            if (!a.contains("belief")) fail(where, "missing belief");
            auto mass = parse_belief(a["belief"], s.space, where + ".belief");

            double raw_sum = 0.0;
            bool has_low = false;
            for (double m : mass) {
                raw_sum += m;
                if (m < kEpsMass) has_low = true;
            }
            if (std::abs(raw_sum - 1.0) > kTolNorm) {
                fail(where + ".belief", "masses must sum to 1 (got " +
                                            format_real(raw_sum) + ")");
            }
            try {
                auto [belief, warned] = JointBelief::clamped(s.space, std::move(mass));
                if (warned || has_low) {
                    s.warnings.push_back(where + ".belief: masses below " +
                                         format_real(kEpsMass) +
                                         " clamped and renormalized");
                }
                s.agents.push_back({std::move(id), c, std::move(belief)});
            } catch (const std::invalid_argument& e) {
                fail(where + ".belief", e.what());
            }
            ++idx;
        }
    }

    if (!doc.contains("securities") || !doc["securities"].is_array() ||
        doc["securities"].empty()) {
        fail("securities", "missing, non-array, or empty");
    }
    std::size_t priced = 0;
    std::size_t idx = 0;
    for (const auto& sec : doc["securities"]) {
        std::string where = "securities[" + std::to_string(idx) + "]";
        if (!sec.is_object() || !sec.contains("event") || !sec["event"].is_array()) {
            fail(where, "needs an 'event' array of atom labels");
        }
        std::vector<std::uint32_t> atoms;
        for (const auto& l : sec["event"]) {
            if (!l.is_string()) fail(where + ".event", "atom labels must be strings");
            auto found = s.space->index(l.get<std::string>());
            if (!found) {
                fail(where + ".event", "unknown atom label '" + l.get<std::string>() + "'");
            }
            atoms.push_back(static_cast<std::uint32_t>(*found));
        }
        try {
            s.events.emplace_back(s.space, std::move(atoms));
        } catch (const std::invalid_argument& e) {
            fail(where + ".event", e.what());
        }
        if (sec.contains("price")) {
            double p = number_field(sec, "price", where);
            if (!(p > 0.0 && p < 1.0)) {
                fail(where + ".price", "must lie strictly in (0,1)");
            }
            s.prices.push_back(p);
            ++priced;
        } else {
            s.prices.push_back(0.0);
        }
        ++idx;
    }
    if (priced == s.events.size()) {
        s.has_prices = true;
    } else if (priced != 0) {
        fail("securities", "either every security or none may carry a price");
    } else {
        s.prices.clear();
    }
    return s;
}

Report run(const Scenario& s) {
    json results;
    if (s.task == "demand") {
        results = run_demand(s);
    } else if (s.task == "equilibrium") {
        results = run_equilibrium(s);
    } else if (s.task == "pool") {
        results = run_pool(s);
    } else if (s.task == "check") {
        results = run_check(s);
    } else if (s.task == "surface") {
        results = run_surface(s);
    } else if (s.task == "verify") {
        results = run_verify(s);
    } else {
        fail("task", "unknown task '" + s.task + "'");
    }

    Report report;
    report.machine = {{"task", s.task}, {"warnings", s.warnings}, {"results", results}};
    report.human = render_human(s, results);
    return report;
}

std::string surface_csv(const Report& report) {
    const auto& results = report.machine.at("results");
    if (!results.contains("grid")) {
        throw std::invalid_argument("report carries no surface grid");
    }
    std::string out = "xA,xB,utility\n";
    for (const auto& row : results["grid"]) {
        out += format_real(row[0].get<double>());
        out += ',';
        out += format_real(row[1].get<double>());
        out += ',';
        out += format_real(row[2].get<double>());
        out += '\n';
    }
    return out;
}

}  // namespace beliefmarket
