#include "rplcil/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace rplcil {

EvalMetrics compute_metrics(const std::vector<int>& labels, const std::vector<double>& probs,
                            double threshold) {
    if (labels.size() != probs.size()) throw DataError("compute_metrics: length mismatch");
    if (labels.empty()) throw DataError("compute_metrics: empty input");

    EvalMetrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = probs[i] >= threshold;
        const bool truth = labels[i] == 1;
        if (pred && truth) ++m.tp;
        else if (pred && !truth) ++m.fp;
        else if (!pred && truth) ++m.fn;
        else ++m.tn;
    }
    const double n = static_cast<double>(labels.size());
    m.accuracy = (m.tp + m.tn) / n;
    m.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
    m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;

    // tie-corrected Mann-Whitney rank AUC
    const long n_pos = m.tp + m.fn;
    const long n_neg = m.fp + m.tn;
    if (n_pos == 0 || n_neg == 0) {
        m.auc = 0.5;
        return m;
    }
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && probs[order[j + 1]] == probs[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
        i = j + 1;
    }
    m.auc = (pos_rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1)) /
            (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    return m;
}

double compute_delta(double f1_r2, double f1_r3) { return f1_r3 - f1_r2; }

double compute_gap(double f1_r1, double f1_r3) { return f1_r1 - f1_r3; }

std::optional<double> compute_recovery(double f1_r1, double f1_r2, double f1_r3) {
    const double denom = f1_r1 - f1_r2;
    if (std::abs(denom) < 1e-9) return std::nullopt;
    return (f1_r3 - f1_r2) / denom * 100.0;
}

CilReport make_cil_report(double f1_r1, double f1_r2, double f1_r3) {
    CilReport r;
    r.f1_r1 = f1_r1;
    r.f1_r2 = f1_r2;
    r.f1_r3 = f1_r3;
    r.delta = compute_delta(f1_r2, f1_r3);
    r.gap = compute_gap(f1_r1, f1_r3);
    r.recovery_pct = compute_recovery(f1_r1, f1_r2, f1_r3);
    return r;
}

const AttackData& SuiteDatasets::for_attack(AttackKind kind) const {
    switch (kind) {
        case AttackKind::HelloFlood: return hf;
        case AttackKind::DecreasedRank: return dr;
        case AttackKind::VersionNumber: return vn;
        case AttackKind::None: return benign;
    }
    return benign;
}

AnyModel train_model(ModelKind kind, const WindowedDataset& data, const TrainConfig& cfg) {
    if (kind == ModelKind::GBDT) return gbdt_train(data, cfg);
    return mlp_train(data, cfg);
}

EvalMetrics evaluate_model(const AnyModel& model, const WindowedDataset& test, double threshold) {
    std::vector<int> labels;
    std::vector<double> probs;
    labels.reserve(test.rows.size());
    probs.reserve(test.rows.size());
    for (const DatasetRow& row : test.rows) {
        labels.push_back(row.label);
        probs.push_back(predict_prob(model, row.features));
    }
    return compute_metrics(labels, probs, threshold);
}

namespace {

std::vector<AttackKind> other_attacks(AttackKind target) {
    std::vector<AttackKind> out;
    for (AttackKind a : {AttackKind::HelloFlood, AttackKind::DecreasedRank, AttackKind::VersionNumber})
        if (a != target) out.push_back(a);
    return out;
}

} // namespace

WindowedDataset regime_training_union(const RegimeSpec& spec, const SuiteDatasets& data) {
    if (spec.target_attack == AttackKind::None)
        throw ConfigError("regime target must be an attack kind");
    WindowedDataset train;
    if (spec.regime == Regime::R1) {
        train = merge(data.for_attack(spec.target_attack).train, data.benign.train);
    } else {
        const auto others = other_attacks(spec.target_attack);
        train = merge(merge(data.for_attack(others[0]).train, data.for_attack(others[1]).train),
                      data.benign.train);
    }
    return train;
}

WindowedDataset regime_test_set(AttackKind target, const SuiteDatasets& data) {
    return merge(data.for_attack(target).test, data.benign.test);
}

RegimeResult run_regime(const RegimeSpec& spec, const SuiteDatasets& data, const TrainConfig& cfg,
                        const UpdatePlan& plan, std::size_t buffer_capacity) {
    TrainConfig seeded = cfg;
    seeded.seed = spec.seed;
    const WindowedDataset train = regime_training_union(spec, data);
    const WindowedDataset test = regime_test_set(spec.target_attack, data);

    RegimeResult result;
    result.model = train_model(spec.model_kind, train, seeded);
    if (spec.regime == Regime::R3) {
        ExemplarBuffer buf(buffer_capacity, spec.seed);
        for (const DatasetRow& row : train.rows) buf.insert_labeled(row);
        result.model = incremental_update(result.model, data.for_attack(spec.target_attack).train,
                                          buf, plan, seeded);
    }
    result.metrics = evaluate_model(result.model, test);
    return result;
}

ForgettingReport assess_forgetting(const AnyModel& model_before, const AnyModel& model_after,
                                   const std::map<AttackKind, WindowedDataset>& old_attack_tests) {
    if (old_attack_tests.empty()) throw DataError("assess_forgetting needs old-attack test sets");
    ForgettingReport report;
    for (const auto& [attack, test] : old_attack_tests) {
        ForgettingEntry entry;
        entry.before = evaluate_model(model_before, test);
        entry.after = evaluate_model(model_after, test);
        report.per_attack[attack] = entry;
    }
    return report;
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

TimingReport bench_update_time(ModelKind kind, AttackKind target, const SuiteDatasets& data,
                               const TrainConfig& cfg, const UpdatePlan& plan, int repetitions,
                               std::size_t buffer_capacity) {
    if (repetitions < 3) throw ConfigError("bench_update_time needs >= 3 repetitions");

    RegimeSpec r2_spec{Regime::R2, target, kind, cfg.seed};
    const WindowedDataset old_union = regime_training_union(r2_spec, data);
    const WindowedDataset& new_data = data.for_attack(target).train;
    const WindowedDataset full_union = merge(old_union, new_data);

    // identical effective budgets for the new data on both paths
    UpdatePlan bench_plan = plan;
    bench_plan.update_epochs = cfg.epochs;
    bench_plan.update_rounds = cfg.n_rounds;

    const AnyModel pretrained = train_model(kind, old_union, cfg);
    ExemplarBuffer buffer_proto(buffer_capacity, cfg.seed);
    for (const DatasetRow& row : old_union.rows) buffer_proto.insert_labeled(row);

    using clock = std::chrono::steady_clock;
    std::vector<double> full_times, inc_times;
    for (int rep = 0; rep < repetitions; ++rep) {
        const auto t0 = clock::now();
        volatile double sink = 0.0;
        {
            const AnyModel retrained = train_model(kind, full_union, cfg);
            sink = predict_prob(retrained, full_union.rows.front().features);
        }
        const auto t1 = clock::now();
        {
            ExemplarBuffer buf = buffer_proto;
            const auto t2 = clock::now();
            const AnyModel updated = incremental_update(pretrained, new_data, buf, bench_plan, cfg);
            sink = predict_prob(updated, full_union.rows.front().features);
            const auto t3 = clock::now();
            inc_times.push_back(std::chrono::duration<double>(t3 - t2).count());
        }
        (void)sink;
        full_times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }

    TimingReport report;
    report.t_full_retrain_s = median(full_times);
    report.t_incremental_s = median(inc_times);
    report.speedup_pct = report.t_full_retrain_s > 0.0
                             ? (report.t_full_retrain_s - report.t_incremental_s) /
                                   report.t_full_retrain_s * 100.0
                             : 0.0;
    return report;
}

SuiteDatasets prepare_suite_datasets(const SuiteConfig& cfg) {
    SuiteDatasets out;
    for (AttackKind kind : {AttackKind::None, AttackKind::HelloFlood, AttackKind::DecreasedRank,
                            AttackKind::VersionNumber}) {
        SimConfig sim = cfg.base_sim;
        sim.seed = cfg.seed;
        sim.attack = kind;
        sim.attacker_ids = kind == AttackKind::None ? std::set<NodeId>{} : cfg.attacker_ids;
        const Trace trace = simulate(sim);
        const WindowedDataset ds = extract_features(trace);

        AttackData data;
        if (kind == AttackKind::None) {
            // the benign trace is single-class; split chronologically
            const auto n_train =
                static_cast<std::size_t>(std::floor(cfg.train_frac * ds.rows.size()));
            data.train.rows.assign(ds.rows.begin(), ds.rows.begin() + n_train);
            data.test.rows.assign(ds.rows.begin() + n_train, ds.rows.end());
            out.benign = std::move(data);
        } else {
            auto [train, test] = split(ds, cfg.train_frac, cfg.seed);
            data.train = std::move(train);
            data.test = std::move(test);
            if (kind == AttackKind::HelloFlood) out.hf = std::move(data);
            else if (kind == AttackKind::DecreasedRank) out.dr = std::move(data);
            else out.vn = std::move(data);
        }
    }
    return out;
}

SuiteReport run_experiment_suite(const SuiteConfig& cfg) {
    const SuiteDatasets data = prepare_suite_datasets(cfg);

    SuiteReport report;
    report.seed = cfg.seed;
    std::vector<double> recoveries;
    std::map<AttackKind, std::vector<double>> deltas_per_attack;
    std::map<ModelKind, std::vector<double>> deltas_per_model;

    for (AttackKind attack : {AttackKind::HelloFlood, AttackKind::DecreasedRank,
                              AttackKind::VersionNumber}) {
        for (ModelKind kind : {ModelKind::GBDT, ModelKind::MLP}) {
            TrainConfig train_cfg = cfg.train;
            train_cfg.seed = cfg.seed;

            SuiteCell cell;
            cell.attack = attack;
            cell.model_kind = kind;

            const WindowedDataset test = regime_test_set(attack, data);

            RegimeSpec spec{Regime::R1, attack, kind, cfg.seed};
            const WindowedDataset r1_train = regime_training_union(spec, data);
            const AnyModel r1_model = train_model(kind, r1_train, train_cfg);
            cell.r1 = evaluate_model(r1_model, test);

            spec.regime = Regime::R2;
            const WindowedDataset r2_train = regime_training_union(spec, data);
            const AnyModel r2_model = train_model(kind, r2_train, train_cfg);
            cell.r2 = evaluate_model(r2_model, test);

            std::map<AttackKind, WindowedDataset> old_tests;
            for (AttackKind old : other_attacks(attack))
                old_tests[old] = regime_test_set(old, data);

            ExemplarBuffer buf(cfg.buffer_capacity, cfg.seed);
            for (const DatasetRow& row : r2_train.rows) buf.insert_labeled(row);
            const AnyModel r3_model =
                incremental_update(r2_model, data.for_attack(attack).train, buf, cfg.plan, train_cfg);
            cell.r3 = evaluate_model(r3_model, test);

            cell.cil = make_cil_report(cell.r1.f1, cell.r2.f1, cell.r3.f1);
            cell.forgetting = assess_forgetting(r2_model, r3_model, old_tests);
            cell.timing = bench_update_time(kind, attack, data, train_cfg, cfg.plan,
                                            cfg.timing_repetitions, cfg.buffer_capacity);

            deltas_per_attack[attack].push_back(cell.cil.delta);
            deltas_per_model[kind].push_back(cell.cil.delta);
            if (cell.cil.recovery_pct) recoveries.push_back(*cell.cil.recovery_pct);
            report.cells.push_back(std::move(cell));
        }
    }

    double delta_sum = 0.0;
    for (const SuiteCell& cell : report.cells) delta_sum += cell.cil.delta;
    report.mean_delta = delta_sum / static_cast<double>(report.cells.size());
    for (auto& [attack, ds] : deltas_per_attack)
        report.mean_delta_per_attack[attack] =
            std::accumulate(ds.begin(), ds.end(), 0.0) / static_cast<double>(ds.size());
    for (auto& [kind, ds] : deltas_per_model)
        report.mean_delta_per_model[kind] =
            std::accumulate(ds.begin(), ds.end(), 0.0) / static_cast<double>(ds.size());
    if (!recoveries.empty()) report.median_recovery_pct = median(recoveries);
    return report;
}

namespace {

nlohmann::json metrics_to_json(const EvalMetrics& m) {
    return nlohmann::json{{"accuracy", m.accuracy}, {"precision", m.precision},
                          {"recall", m.recall},     {"f1", m.f1},
                          {"auc", m.auc},           {"tp", m.tp},
                          {"fp", m.fp},             {"fn", m.fn},
                          {"tn", m.tn}};
}

nlohmann::json timing_to_json(const TimingReport& t) {
    return nlohmann::json{{"t_full_retrain_s", t.t_full_retrain_s},
                          {"t_incremental_s", t.t_incremental_s},
                          {"speedup_pct", t.speedup_pct}};
}

nlohmann::json optional_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

} // namespace

std::string metrics_json(const EvalMetrics& m) { return metrics_to_json(m).dump(2); }
std::string timing_json(const TimingReport& t) { return timing_to_json(t).dump(2); }

std::string suite_report_json(const SuiteReport& report) {
    nlohmann::json j;
    j["seed"] = report.seed;
    auto& cells = j["cells"] = nlohmann::json::array();
    for (const SuiteCell& cell : report.cells) {
        nlohmann::json c;
        c["attack"] = attack_kind_name(cell.attack);
        c["model_kind"] = model_kind_name(cell.model_kind);
        c["r1"] = metrics_to_json(cell.r1);
        c["r2"] = metrics_to_json(cell.r2);
        c["r3"] = metrics_to_json(cell.r3);
        c["delta"] = cell.cil.delta;
        c["gap"] = cell.cil.gap;
        c["recovery_pct"] = optional_to_json(cell.cil.recovery_pct);
        nlohmann::json forgetting;
        for (const auto& [attack, entry] : cell.forgetting.per_attack) {
            forgetting[attack_kind_name(attack)] = {{"before", metrics_to_json(entry.before)},
                                                    {"after", metrics_to_json(entry.after)}};
        }
        c["forgetting"] = std::move(forgetting);
        c["timing"] = timing_to_json(cell.timing);
        cells.push_back(std::move(c));
    }
    nlohmann::json means;
    means["delta"] = report.mean_delta;
    for (const auto& [attack, d] : report.mean_delta_per_attack)
        means["delta_per_attack"][attack_kind_name(attack)] = d;
    for (const auto& [kind, d] : report.mean_delta_per_model)
        means["delta_per_model"][model_kind_name(kind)] = d;
    means["median_recovery_pct"] = optional_to_json(report.median_recovery_pct);
    j["means"] = std::move(means);
    return j.dump(2);
}

std::string suite_table_csv(const SuiteReport& report) {
    std::ostringstream out;
    out << "model,attack,f1_r2,f1_r3,delta,f1_r1,gap,recovery_pct\n";
    char buf[256];
    auto row = [&](const std::string& model, const std::string& attack, double r2, double r3,
                   double delta, double r1, double gap, const std::optional<double>& rec) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.4f,%.4f,%+.4f,%.4f,%+.4f,", model.c_str(),
                      attack.c_str(), r2, r3, delta, r1, gap);
        out << buf;
        if (rec) {
            std::snprintf(buf, sizeof(buf), "%.3f", *rec);
            out << buf;
        } else {
            out << "NA";
        }
        out << '\n';
    };
    for (const SuiteCell& cell : report.cells)
        row(model_kind_name(cell.model_kind), attack_kind_name(cell.attack), cell.cil.f1_r2,
            cell.cil.f1_r3, cell.cil.delta, cell.cil.f1_r1, cell.cil.gap, cell.cil.recovery_pct);

    for (const auto& [attack, d] : report.mean_delta_per_attack) {
        std::snprintf(buf, sizeof(buf), "MEAN,%s,,,%+.4f,,,\n", attack_kind_name(attack).c_str(), d);
        out << buf;
    }
    for (const auto& [kind, d] : report.mean_delta_per_model) {
        std::snprintf(buf, sizeof(buf), "%s,MEAN,,,%+.4f,,,\n", model_kind_name(kind).c_str(), d);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "MEAN,ALL,,,%+.4f,,,", report.mean_delta);
    out << buf;
    if (report.median_recovery_pct) {
        std::snprintf(buf, sizeof(buf), "%.3f", *report.median_recovery_pct);
        out << buf;
    } else {
        out << "NA";
    }
    out << '\n';
    return out.str();
}

void write_suite_report(const SuiteReport& report, const std::string& json_path,
                        const std::string& csv_path) {
    std::ofstream js(json_path);
    if (!js) throw IoError("cannot open for writing: " + json_path);
    js << suite_report_json(report) << '\n';
    if (!js) throw IoError("write failed: " + json_path);
    std::ofstream cs(csv_path);
    if (!cs) throw IoError("cannot open for writing: " + csv_path);
    cs << suite_table_csv(report);
    if (!cs) throw IoError("write failed: " + csv_path);
}

} // namespace rplcil
