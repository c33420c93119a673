#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aflora/errors.hpp"
#include "aflora/harness.hpp"

namespace {

struct Overrides {
    std::string method;
    int rounds = 0;
    long long seed = 0;
    int threads = 0;
    std::string out;
    std::string dump_dir;
};

bool given(const CLI::App& cmd, const std::string& flag) {
    const CLI::Option* opt = cmd.get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
}

void apply(const CLI::App& cmd, const Overrides& ov,
           aflora::ExperimentConfig& cfg) {
    if (given(cmd, "--method")) {
        cfg.method = aflora::method_from_string(ov.method);
    }
    if (given(cmd, "--rounds")) {
        cfg.rounds = ov.rounds;
    }
    if (given(cmd, "--seed")) {
        cfg.seed = static_cast<std::uint64_t>(ov.seed);
    }
    if (given(cmd, "--threads")) {
        cfg.threads = ov.threads;
    }
    if (given(cmd, "--out")) {
        cfg.csv_path = ov.out;
    }
    if (given(cmd, "--dump-rounds")) {
        cfg.dump_dir = ov.dump_dir;
    }
}

void emit_csv(const std::string& path, const std::string& csv) {
    if (path.empty()) {
        std::fputs(csv.c_str(), stdout);
        return;
    }
    aflora::write_text_file(path, csv);
    std::fprintf(stderr, "wrote %s\n", path.c_str());
}

int run_one(const aflora::ExperimentConfig& cfg) {
    const aflora::RunResult result = aflora::run_experiment_full(cfg);
    const std::string csv =
        aflora::csv_header() +
        aflora::csv_rows(aflora::method_name(cfg.method), result.metrics);
    emit_csv(cfg.csv_path, csv);
    if (!cfg.dump_dir.empty()) {
        aflora::write_round_dumps(cfg.dump_dir, result.dumps);
        std::fprintf(stderr, "wrote %zu round dumps under %s\n",
                     result.dumps.size(), cfg.dump_dir.c_str());
    }
    return 0;
}

int run_sweep(const aflora::ExperimentConfig& base,
              const std::string& methods_csv, const std::string& out) {
    std::vector<aflora::Method> methods;
    std::size_t begin = 0;
    while (begin <= methods_csv.size()) {
        const std::size_t comma = methods_csv.find(',', begin);
        const std::string name =
            methods_csv.substr(begin, comma == std::string::npos
                                          ? std::string::npos
                                          : comma - begin);
        if (name.empty()) {
            throw aflora::ConfigError("compare: empty method name in list '" +
                                      methods_csv + "'");
        }
        methods.push_back(aflora::method_from_string(name));
        if (comma == std::string::npos) {
            break;
        }
        begin = comma + 1;
    }

    // reject the whole sweep before any work
    std::vector<aflora::ExperimentConfig> configs;
    for (const aflora::Method method : methods) {
        aflora::ExperimentConfig cfg = base;
        cfg.method = method;
        cfg.validate();
        configs.push_back(cfg);
    }

    std::string csv = aflora::csv_header();
    for (const aflora::ExperimentConfig& cfg : configs) {
        csv += aflora::csv_rows(aflora::method_name(cfg.method),
                                aflora::run_experiment(cfg));
    }
    emit_csv(out, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale federated LoRA fine-tuning simulator"};
    app.require_subcommand(1);

    std::string run_config;
    std::string cmp_config;
    std::string cmp_methods;
    std::string cmp_out;
    Overrides run_ov;
    Overrides cmp_ov;

    CLI::App* run = app.add_subcommand("run", "run one experiment");
    run->add_option("--config", run_config, "JSON experiment config")
        ->required();
    run->add_option("--method", run_ov.method,
                    "aflora|classic|ideal|flora|flexlora|hetlora");
    run->add_option("--rounds", run_ov.rounds, "federated rounds");
    run->add_option("--seed", run_ov.seed, "master seed");
    run->add_option("--threads", run_ov.threads, "client worker threads");
    run->add_option("--out", run_ov.out, "CSV output path (default: stdout)");
    run->add_option("--dump-rounds", run_ov.dump_dir,
                    "directory for per-round JSON dumps");

    CLI::App* cmp =
        app.add_subcommand("compare", "sweep methods on identical seeds");
    cmp->add_option("--config", cmp_config, "JSON experiment config")
        ->required();
    cmp->add_option("--methods", cmp_methods, "comma-separated method list")
        ->required();
    cmp->add_option("--out", cmp_out, "CSV output path")->required();
    cmp->add_option("--rounds", cmp_ov.rounds, "federated rounds");
    cmp->add_option("--seed", cmp_ov.seed, "master seed");
    cmp->add_option("--threads", cmp_ov.threads, "client worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad usage is a config-class failure
    }

    try {
        if (run->parsed()) {
            aflora::ExperimentConfig cfg = aflora::config_from_json(run_config);
            apply(*run, run_ov, cfg);
            return run_one(cfg);
        }
        aflora::ExperimentConfig cfg = aflora::config_from_json(cmp_config);
        apply(*cmp, cmp_ov, cfg);
        return run_sweep(cfg, cmp_methods, cmp_out);
    } catch (const aflora::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const aflora::RankMismatchError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const aflora::PartitionError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const aflora::DataError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const aflora::Error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 3;
    }
}
