#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "poisonlab/harness.hpp"
#include "poisonlab/json_io.hpp"

namespace fs = std::filesystem;
using namespace poisonlab;

namespace {

std::string resolve_output(const std::string& path, const std::string& out_dir) {
    fs::path p(path);
    if (p.is_absolute() || out_dir.empty()) return path;
    return (fs::path(out_dir) / p).string();
}

std::string output_dir_or_env(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    const char* env = std::getenv("POISONLAB_OUTPUT_DIR");
    return env != nullptr ? std::string(env) : std::string();
}

void print_final_rows(const std::vector<RunReport>& reports) {
    for (const RunReport& r : reports) {
        const CheckpointRow& f = r.final_row();
        if (std::isnan(f.asr)) {
            std::printf("seed %llu: asr=NA br=%.4f poisoned=%lld flags=%lld\n",
                        static_cast<unsigned long long>(r.seed), f.br,
                        static_cast<long long>(f.poisoned_steps), static_cast<long long>(f.detector_flags));
        } else {
            std::printf("seed %llu: asr=%.4f br=%.4f poisoned=%lld flags=%lld\n",
                        static_cast<unsigned long long>(r.seed), f.asr, f.br,
                        static_cast<long long>(f.poisoned_steps), static_cast<long long>(f.detector_flags));
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"poisonlab: reward-constrained backdoor poisoning testbed for tabular RL"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string out_dir_flag;
    app.add_option("--output-dir", out_dir_flag,
                   "Directory for outputs (overrides POISONLAB_OUTPUT_DIR)");

    auto* run = app.add_subcommand("run", "Run a training experiment from a JSON config");
    std::string run_config_path;
    run->add_option("--config", run_config_path, "Path to the run config JSON")->required();

    auto* verify = app.add_subcommand("verify", "Run the exact dynamic-programming verification suite");
    int instances = 100;
    uint64_t verify_seed = 1;
    verify->add_option("--instances", instances, "Number of randomized instances");
    verify->add_option("--seed", verify_seed, "Suite seed");

    auto* sweep = app.add_subcommand("sweep", "Run an experiment across several poisoning rates");
    std::string sweep_config_path;
    std::vector<double> sweep_betas;
    sweep->add_option("--config", sweep_config_path, "Path to the run config JSON")->required();
    sweep->add_option("--beta", sweep_betas, "Poisoning rates to sweep")->required()->delimiter(',');

    CLI11_PARSE(app, argc, argv);
    const std::string out_dir = output_dir_or_env(out_dir_flag);

    try {
        if (run->parsed()) {
            RunConfig cfg = run_config_from_json(read_text_file(run_config_path));
            cfg.output_path = resolve_output(cfg.output_path, out_dir);
            std::vector<RunReport> reports = run_experiment(cfg);
            print_final_rows(reports);
            std::printf("wrote %s\n", cfg.output_path.c_str());
            return 0;
        }
        if (verify->parsed()) {
            VerificationReport report = run_verification_suite(instances, verify_seed);
            std::fputs(report.summary_lines().c_str(), stdout);
            const std::string report_path = resolve_output("verification.json", out_dir);
            write_text_file(report_path, report.to_json());
            std::printf("wrote %s\n", report_path.c_str());
            if (!report.passed()) {
                for (const PropertyResult& p : report.properties) {
                    if (!p.passed && !p.failing_instance_json.empty()) {
                        const std::string inst_path =
                            resolve_output("failing_" + p.name + ".json", out_dir);
                        write_text_file(inst_path, p.failing_instance_json);
                        std::printf("wrote %s\n", inst_path.c_str());
                    }
                }
                return 1;
            }
            return 0;
        }
        if (sweep->parsed()) {
            RunConfig base = run_config_from_json(read_text_file(sweep_config_path));
            const std::string base_output = base.output_path;
            for (double beta : sweep_betas) {
                RunConfig cfg = base;
                cfg.attack.beta = beta;
                char suffix[32];
                std::snprintf(suffix, sizeof(suffix), "_beta%.6g.csv", beta);
                fs::path p(base_output);
                cfg.output_path = resolve_output((p.parent_path() / (p.stem().string() + suffix)).string(),
                                                 out_dir);
                std::vector<RunReport> reports = run_experiment(cfg);
                std::printf("beta=%.6g -> %s\n", beta, cfg.output_path.c_str());
                print_final_rows(reports);
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
