#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "icl/errors.hpp"
#include "icl/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitViolation = 3;

void print_warnings(const icl::ExperimentConfig& cfg) {
    for (const std::string& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_run(const std::string& path, const std::string& out, bool plot, unsigned threads) {
    const icl::ExperimentConfig cfg = icl::load_config(path);
    print_warnings(cfg);
    icl::RunOptions options;
    options.output_dir = out;
    options.plot = plot;
    options.threads = threads;
    const icl::RunOutcome outcome = icl::run(cfg, options);
    std::cout << "wrote " << (outcome.output_dir / "results.csv").string() << "\n";
    if (outcome.result.property_violations > 0) {
        std::cerr << "property violation: " << outcome.result.property_violations
                  << " sign-property counterexample(s)\n";
        return kExitViolation;
    }
    return kExitOk;
}

int cmd_validate(const std::string& path) {
    const icl::ExperimentConfig cfg = icl::load_config(path);
    print_warnings(cfg);
    std::cout << path << ": ok (" << icl::to_string(cfg.kind) << ", " << cfg.warnings.size() << " warning"
              << (cfg.warnings.size() == 1 ? "" : "s") << ")\n";
    return kExitOk;
}

int cmd_theory_check(std::size_t trials, std::uint64_t seed, unsigned threads) {
    nlohmann::json doc = {{"experiment", "theory_check"}, {"trials", trials}, {"seed", seed}};
    const icl::ExperimentConfig cfg = icl::parse_config(doc);
    const icl::ExperimentResult result = icl::execute(cfg, threads, {});
    nlohmann::json report = {{"config", icl::resolved_json(cfg)}, {"results", nlohmann::json::object()}};
    const auto& labels = result.table.axes().front().labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto v = result.table.get({i});
        report["results"][labels[i]] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    }
    report["property_violations"] = result.property_violations;
    std::cout << report.dump(2) << "\n";
    return result.property_violations > 0 ? kExitViolation : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for Bayesian in-context learning under mixture priors"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    bool plot = false;
    unsigned threads = 1;
    auto* run = app.add_subcommand("run", "Run an experiment config and write its results");
    run->add_option("config", config, "Experiment config (JSON)")->required();
    run->add_option("--out", out, "Output directory (overrides the config)");
    run->add_flag("--plot", plot, "Also write plot.svg");
    run->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 1024u));

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a config without running it");
    validate->add_option("config", validate_path, "Experiment config (JSON)")->required();

    std::size_t trials = 10000;
    std::uint64_t seed = 0;
    unsigned theory_threads = 1;
    auto* theory = app.add_subcommand("theory-check", "Run the property checks and print a JSON report");
    theory->add_option("--trials", trials, "Filtered Theorem 1 trials")->check(CLI::PositiveNumber);
    theory->add_option("--seed", seed, "Master seed");
    theory->add_option("--threads", theory_threads, "Worker threads")->check(CLI::Range(1u, 1024u));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*run) return cmd_run(config, out, plot, threads);
        if (*validate) return cmd_validate(validate_path);
        if (*theory) return cmd_theory_check(trials, seed, theory_threads);
    } catch (const icl::ValidationError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
