#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rplcil/config.hpp"
#include "rplcil/harness.hpp"

namespace fs = std::filesystem;
using namespace rplcil;

namespace {

// Outputs never overwrite an existing model file: hot swap works by writing a
// fresh version-suffixed file and switching paths.
std::string versioned_path(const std::string& requested) {
    if (!fs::exists(requested)) return requested;
    const fs::path p(requested);
    const std::string stem = (p.parent_path() / p.stem()).string();
    const std::string ext = p.extension().string();
    for (int v = 2;; ++v) {
        const std::string candidate = stem + ".v" + std::to_string(v) + ext;
        if (!fs::exists(candidate)) return candidate;
    }
}

RunConfig load_config_or_default(const std::string& config_path,
                                 std::optional<std::uint64_t> flag_seed) {
    RunConfig cfg = config_path.empty() ? default_run_config() : load_run_config(config_path);
    apply_seed(cfg, resolve_seed(cfg, flag_seed));
    return cfg;
}

SimConfig sim_config_for(const RunConfig& cfg, AttackKind attack) {
    SimConfig sim = cfg.suite.base_sim;
    sim.attack = attack;
    sim.attacker_ids = attack == AttackKind::None ? std::set<NodeId>{} : cfg.suite.attacker_ids;
    return sim;
}

WindowedDataset load_merged_datasets(const std::vector<std::string>& paths) {
    WindowedDataset data = read_dataset_csv(paths.front());
    for (std::size_t i = 1; i < paths.size(); ++i)
        data = merge(data, read_dataset_csv(paths[i]));
    return data;
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& attack, const std::string& out) {
    const RunConfig cfg = load_config_or_default(config_path, seed);
    const SimConfig sim = sim_config_for(cfg, attack_kind_from_name(attack));
    const Trace trace = simulate(sim);
    save_trace(trace, out);
    std::cout << "wrote " << trace.records.size() << " records to " << out;
    if (sim.attack != AttackKind::None)
        std::cout << " (attack " << attack_kind_name(sim.attack) << ", window ["
                  << sim.attack_start_s << ", " << sim.attack_end_s << "))";
    std::cout << "\n";
    return 0;
}

int cmd_featurize(const std::string& trace_path, const std::string& out) {
    const Trace trace = load_trace(trace_path);
    const WindowedDataset data = extract_features(trace);
    write_dataset_csv(data, out);
    std::cout << "wrote " << data.rows.size() << " rows to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::vector<std::string>& data_paths, const std::string& kind_name,
              const std::string& out) {
    const RunConfig cfg = load_config_or_default(config_path, seed);
    const WindowedDataset data = load_merged_datasets(data_paths);
    const AnyModel model = train_model(model_kind_from_name(kind_name), data, cfg.suite.train);
    const std::string path = versioned_path(out);
    save_model(model, path);
    std::cout << "wrote model to " << path << "\n";
    return 0;
}

int cmd_update(const std::string& config_path, std::optional<std::uint64_t> seed,
               const std::string& model_path, const std::vector<std::string>& data_paths,
               const std::string& out, const std::string& buffer_in,
               const std::string& buffer_out) {
    const RunConfig cfg = load_config_or_default(config_path, seed);
    const AnyModel model = load_model(model_path);
    const WindowedDataset new_data = load_merged_datasets(data_paths);
    ExemplarBuffer buf =
        buffer_in.empty()
            ? ExemplarBuffer(cfg.suite.buffer_capacity, cfg.suite.seed)
            : ExemplarBuffer::load_csv(buffer_in, cfg.suite.buffer_capacity, cfg.suite.seed);
    const AnyModel updated = incremental_update(model, new_data, buf, cfg.suite.plan, cfg.suite.train);
    const std::string path = versioned_path(out);
    save_model(updated, path);
    if (!buffer_out.empty()) buf.save_csv(buffer_out);
    std::cout << "wrote updated model to " << path << " (previous model untouched)\n";
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::vector<std::string>& data_paths) {
    const AnyModel model = load_model(model_path);
    const WindowedDataset data = load_merged_datasets(data_paths);
    std::cout << metrics_json(evaluate_model(model, data)) << "\n";
    return 0;
}

int cmd_suite(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir) {
    const RunConfig cfg = load_config_or_default(config_path, seed);
    fs::create_directories(out_dir);
    const SuiteReport report = run_experiment_suite(cfg.suite);
    const std::string json_path = (fs::path(out_dir) / "suite_report.json").string();
    const std::string csv_path = (fs::path(out_dir) / "suite_table.csv").string();
    write_suite_report(report, json_path, csv_path);
    std::cout << suite_table_csv(report);
    std::cout << "report: " << json_path << "\ntable: " << csv_path << "\n";
    return 0;
}

int cmd_bench(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& kind_name, const std::string& attack, int repetitions) {
    const RunConfig cfg = load_config_or_default(config_path, seed);
    const SuiteDatasets data = prepare_suite_datasets(cfg.suite);
    const TimingReport report =
        bench_update_time(model_kind_from_name(kind_name), attack_kind_from_name(attack), data,
                          cfg.suite.train, cfg.suite.plan, repetitions, cfg.suite.buffer_capacity);
    std::cout << timing_json(report) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RPL intrusion-detection workbench: simulate, featurize, train, update, report"};
    app.require_subcommand(1);

    std::string config_path, out, model_path, attack = "none", kind = "gbdt";
    std::string trace_path, buffer_in, buffer_out, out_dir = ".";
    std::vector<std::string> data_paths;
    std::optional<std::uint64_t> seed;
    int repetitions = 5;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key = value sections)");
        cmd->add_option("--seed", seed, "global seed override");
    };

    auto* sim = app.add_subcommand("simulate", "generate a trace CSV (+ .meta.json sidecar)");
    add_common(sim);
    sim->add_option("--attack", attack, "hf|dr|vn|none")->required();
    sim->add_option("--out", out, "trace CSV path")->required();

    auto* feat = app.add_subcommand("featurize", "trace -> one-second windowed dataset CSV");
    feat->add_option("trace", trace_path, "trace CSV written by simulate")->required();
    feat->add_option("--out", out, "dataset CSV path")->required();

    auto* train = app.add_subcommand("train", "fit a detector on dataset CSVs");
    add_common(train);
    train->add_option("--data", data_paths, "dataset CSV (repeatable, merged)")->required();
    train->add_option("--model-kind", kind, "gbdt|mlp");
    train->add_option("--out", out, "model file path")->required();

    auto* update = app.add_subcommand("update", "incremental update; writes a new model version");
    add_common(update);
    update->add_option("--model", model_path, "existing model file")->required();
    update->add_option("--data", data_paths, "new attack dataset CSV (repeatable)")->required();
    update->add_option("--out", out, "updated model path")->required();
    update->add_option("--buffer", buffer_in, "exemplar buffer CSV to replay from");
    update->add_option("--buffer-out", buffer_out, "write the refreshed buffer here");

    auto* eval = app.add_subcommand("evaluate", "print metrics JSON for a model on datasets");
    eval->add_option("--model", model_path, "model file")->required();
    eval->add_option("--data", data_paths, "dataset CSV (repeatable)")->required();

    auto* suite = app.add_subcommand("suite", "run the full regime/forgetting/timing suite");
    add_common(suite);
    suite->add_option("--out-dir", out_dir, "directory for suite_report.json / suite_table.csv");

    auto* bench = app.add_subcommand("bench", "time full retrain vs incremental update");
    add_common(bench);
    bench->add_option("--model-kind", kind, "gbdt|mlp");
    bench->add_option("--attack", attack, "hf|dr|vn")->required();
    bench->add_option("--repetitions", repetitions, "timing repetitions (>= 3)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path, seed, attack, out);
        if (feat->parsed()) return cmd_featurize(trace_path, out);
        if (train->parsed()) return cmd_train(config_path, seed, data_paths, kind, out);
        if (update->parsed())
            return cmd_update(config_path, seed, model_path, data_paths, out, buffer_in, buffer_out);
        if (eval->parsed()) return cmd_evaluate(model_path, data_paths);
        if (suite->parsed()) return cmd_suite(config_path, seed, out_dir);
        if (bench->parsed()) return cmd_bench(config_path, seed, kind, attack, repetitions);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TopologyError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
