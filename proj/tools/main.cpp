#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "beliefmarket/errors.hpp"
#include "beliefmarket/scenario.hpp"
#include "beliefmarket/selfcheck.hpp"

namespace {

namespace fs = std::filesystem;
using namespace beliefmarket;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitArbitrage = 3;
constexpr int kExitSolver = 4;

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ScenarioError("cannot write " + path.string());
    out << content;
}

int run_one(const fs::path& scenario_path, const std::string& out_path,
            const std::string& csv_path, bool quiet) {
    try {
        Scenario scenario = parse_scenario(read_file(scenario_path));
        Report report = run(scenario);
        if (!quiet) std::cout << report.human;
        if (!out_path.empty()) {
            write_file(out_path, report.machine.dump(2) + "\n");
        }
        if (!csv_path.empty()) {
            write_file(csv_path, surface_csv(report));
        }
        if (scenario.task == "verify" &&
            !report.machine["results"]["all_passed"].get<bool>()) {
            return 1;
        }
        return kExitOk;
    } catch (const ArbitrageError& e) {
        std::cerr << "arbitrage: " << e.what() << "\n  direction:";
        for (double d : e.direction()) std::cerr << " " << d;
        std::cerr << "\n";
        return kExitArbitrage;
    } catch (const SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << " (iterations "
                  << e.iterations() << ", residual " << e.residual() << ")\n";
        return kExitSolver;
    } catch (const ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::range_error& e) {
        std::cerr << "range error: " << e.what() << "\n";
        return kExitValidation;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"belief-aggregation securities market"};
    app.require_subcommand(1);

    std::string scenario_file, out_path, csv_path, batch_dir;
    unsigned seed = 42;

    auto* cmd_run = app.add_subcommand("run", "run one scenario file");
    cmd_run->add_option("scenario", scenario_file, "scenario JSON file")->required();
    cmd_run->add_option("--out", out_path, "write the machine report here");
    cmd_run->add_option("--csv", csv_path, "write the surface grid CSV here");

    auto* cmd_verify = app.add_subcommand("verify", "run the invariant suites");
    cmd_verify->add_option("--seed", seed, "RNG seed for the property suites");

    auto* cmd_batch = app.add_subcommand("batch", "run every scenario in a directory");
    cmd_batch->add_option("dir", batch_dir, "directory of scenario JSON files")
        ->required();

    CLI11_PARSE(app, argc, argv);

    if (cmd_run->parsed()) {
        return run_one(scenario_file, out_path, csv_path, false);
    }

    if (cmd_verify->parsed()) {
        auto checks = run_selfchecks(seed);
        bool all = true;
        for (const auto& c : checks) {
            std::cout << (c.passed ? "pass" : "FAIL") << "  " << c.name;
            if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
            std::cout << "\n";
            all = all && c.passed;
        }
        std::cout << (all ? "all checks passed" : "CHECKS FAILED") << " (seed " << seed
                  << ")\n";
        return all ? kExitOk : 1;
    }

    // batch: each scenario's report lands next to it as <name>.report.json.
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(batch_dir)) {
        if (entry.path().extension() == ".json" &&
            entry.path().string().find(".report.") == std::string::npos) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    int worst = kExitOk;
    for (const auto& f : files) {
        fs::path report = f;
        report.replace_extension(".report.json");
        int code = run_one(f, report.string(), "", true);
        std::cout << f.filename().string() << ": "
                  << (code == kExitOk ? "ok" : "exit " + std::to_string(code)) << "\n";
        if (code != kExitOk && worst == kExitOk) worst = code;
    }
    return worst;
}
