#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rplcil/harness.hpp"
#include "rplcil/rng.hpp"

using namespace rplcil;

namespace {

SuiteConfig mini_suite_config() {
    SuiteConfig cfg;
    cfg.base_sim.duration_s = 200.0;
    cfg.base_sim.attack_start_s = 30.0;
    cfg.base_sim.attack_end_s = 160.0;
    cfg.train.epochs = 40;
    cfg.plan.update_epochs = 40;
    cfg.timing_repetitions = 3;
    return cfg;
}

} // namespace

TEST_CASE("compute_metrics: perfect predictions score 1.0 everywhere") {
    const std::vector<int> labels{1, 0, 1, 0, 1};
    const std::vector<double> probs{0.9, 0.1, 0.8, 0.2, 0.99};
    const EvalMetrics m = compute_metrics(labels, probs);
    CHECK(m.accuracy == doctest::Approx(1.0));
    CHECK(m.precision == doctest::Approx(1.0));
    CHECK(m.recall == doctest::Approx(1.0));
    CHECK(m.f1 == doctest::Approx(1.0));
    CHECK(m.auc == doctest::Approx(1.0));
}

TEST_CASE("compute_metrics: confusion arithmetic tp=8 fp=2 fn=2 tn=88") {
    std::vector<int> labels;
    std::vector<double> probs;
    for (int i = 0; i < 8; ++i) { labels.push_back(1); probs.push_back(0.9); }
    for (int i = 0; i < 2; ++i) { labels.push_back(0); probs.push_back(0.9); }
    for (int i = 0; i < 2; ++i) { labels.push_back(1); probs.push_back(0.1); }
    for (int i = 0; i < 88; ++i) { labels.push_back(0); probs.push_back(0.1); }
    const EvalMetrics m = compute_metrics(labels, probs);
    CHECK(m.tp == 8);
    CHECK(m.fp == 2);
    CHECK(m.fn == 2);
    CHECK(m.tn == 88);
    CHECK(m.precision == doctest::Approx(0.8));
    CHECK(m.recall == doctest::Approx(0.8));
    CHECK(m.f1 == doctest::Approx(0.8));
    CHECK(m.accuracy == doctest::Approx(0.96));
}

TEST_CASE("compute_metrics: rank AUC equals the pairwise oracle, ties included") {
    Rng rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int> labels;
        std::vector<double> probs;
        const int n = 20 + static_cast<int>(rng.uniform_int(180));
        for (int i = 0; i < n; ++i) {
            labels.push_back(rng.uniform() < 0.4 ? 1 : 0);
            // quantized probabilities force plenty of ties
            probs.push_back(std::round(rng.uniform() * 10.0) / 10.0);
        }
        if (std::count(labels.begin(), labels.end(), 1) == 0) labels[0] = 1;
        if (std::count(labels.begin(), labels.end(), 0) == 0) labels[1] = 0;
        const EvalMetrics m = compute_metrics(labels, probs);
        CHECK(m.auc == doctest::Approx(oracle::pairwise_auc(labels, probs)).epsilon(1e-12));
    }
}

TEST_CASE("compute_metrics: input validation") {
    CHECK_THROWS_AS(compute_metrics({1, 0}, {0.5}), DataError);
    CHECK_THROWS_AS(compute_metrics({}, {}), DataError);
}

TEST_CASE("compute_delta reproduces printed table deltas") {
    CHECK(compute_delta(0.9533, 0.9924) == doctest::Approx(0.0391).epsilon(1e-9));
    CHECK(compute_delta(0.6316, 0.9401) == doctest::Approx(0.3085).epsilon(1e-9));
    CHECK(compute_delta(0.5, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("compute_gap subtraction") {
    CHECK(compute_gap(0.9, 0.9) == doctest::Approx(0.0));
    CHECK(compute_gap(0.9934, 0.9924) == doctest::Approx(0.0010).epsilon(1e-9));
    CHECK(compute_gap(0.9086, 0.9347) == doctest::Approx(-0.0261).epsilon(1e-9));
}

TEST_CASE("compute_recovery: printed percentages and the degenerate case") {
    CHECK(*compute_recovery(0.9934, 0.9533, 0.9924) == doctest::Approx(97.506).epsilon(1e-4));
    CHECK(*compute_recovery(0.9730, 0.9291, 0.9908) == doctest::Approx(140.55).epsilon(1e-4));
    CHECK_FALSE(compute_recovery(0.8, 0.8, 0.9).has_value());
}

TEST_CASE("make_cil_report wires the definitions together") {
    const CilReport r = make_cil_report(0.95, 0.60, 0.90);
    CHECK(r.delta == doctest::Approx(0.30));
    CHECK(r.gap == doctest::Approx(0.05));
    CHECK(*r.recovery_pct == doctest::Approx(0.30 / 0.35 * 100.0));
}

TEST_CASE("regime unions: R2 never trains on the target attack") {
    const SuiteDatasets data = prepare_suite_datasets(mini_suite_config());
    for (AttackKind target : {AttackKind::HelloFlood, AttackKind::DecreasedRank,
                              AttackKind::VersionNumber}) {
        RegimeSpec spec{Regime::R2, target, ModelKind::GBDT, 3};
        const WindowedDataset train = regime_training_union(spec, data);
        for (const DatasetRow& row : train.rows) CHECK(row.attack_kind != target);
        // R1 must include it
        spec.regime = Regime::R1;
        const WindowedDataset r1 = regime_training_union(spec, data);
        bool has_target = false;
        for (const DatasetRow& row : r1.rows) has_target |= row.attack_kind == target;
        CHECK(has_target);
    }
}

TEST_CASE("splits partition each source dataset: train and test reassemble it exactly") {
    // identical feature rows legitimately recur across idle seconds, so
    // disjointness is checked as a multiset partition of the source rows
    const SuiteConfig cfg = mini_suite_config();
    const SuiteDatasets data = prepare_suite_datasets(cfg);
    auto key = [](const DatasetRow& r) {
        std::string s;
        for (double v : r.features.to_array()) s += std::to_string(v) + "|";
        s += std::to_string(r.label) + "|" + attack_kind_name(r.attack_kind);
        return s;
    };
    for (AttackKind attack : {AttackKind::None, AttackKind::HelloFlood, AttackKind::DecreasedRank,
                              AttackKind::VersionNumber}) {
        SimConfig sim = cfg.base_sim;
        sim.seed = cfg.seed;
        sim.attack = attack;
        sim.attacker_ids = attack == AttackKind::None ? std::set<NodeId>{} : cfg.attacker_ids;
        const WindowedDataset full = extract_features(simulate(sim));
        const AttackData& part = data.for_attack(attack);
        std::multiset<std::string> expected, got;
        for (const DatasetRow& row : full.rows) expected.insert(key(row));
        for (const DatasetRow& row : part.train.rows) got.insert(key(row));
        for (const DatasetRow& row : part.test.rows) got.insert(key(row));
        CHECK(expected == got);
        CHECK(part.train.rows.size() + part.test.rows.size() == full.rows.size());
    }
}

TEST_CASE("run_regime: R1 GBDT on hello flood is near ceiling") {
    const SuiteDatasets data = prepare_suite_datasets(mini_suite_config());
    const RegimeSpec spec{Regime::R1, AttackKind::HelloFlood, ModelKind::GBDT, 3};
    const RegimeResult r = run_regime(spec, data, mini_suite_config().train, UpdatePlan{});
    CHECK(r.metrics.f1 >= 0.95);
}

TEST_CASE("run_regime: R3 lifts the unseen VN score for both model families") {
    const SuiteConfig cfg = mini_suite_config();
    const SuiteDatasets data = prepare_suite_datasets(cfg);
    for (ModelKind kind : {ModelKind::GBDT, ModelKind::MLP}) {
        RegimeSpec spec{Regime::R2, AttackKind::VersionNumber, kind, 3};
        const RegimeResult r2 = run_regime(spec, data, cfg.train, cfg.plan);
        spec.regime = Regime::R3;
        const RegimeResult r3 = run_regime(spec, data, cfg.train, cfg.plan);
        CHECK(r3.metrics.f1 >= r2.metrics.f1);
    }
}

TEST_CASE("assess_forgetting: identical models report identical metrics") {
    const SuiteConfig cfg = mini_suite_config();
    const SuiteDatasets data = prepare_suite_datasets(cfg);
    const AnyModel model =
        train_model(ModelKind::GBDT, merge(data.hf.train, data.benign.train), cfg.train);
    std::map<AttackKind, WindowedDataset> old_tests;
    old_tests[AttackKind::HelloFlood] = regime_test_set(AttackKind::HelloFlood, data);
    const ForgettingReport report = assess_forgetting(model, model, old_tests);
    REQUIRE(report.per_attack.size() == 1);
    const auto& entry = report.per_attack.at(AttackKind::HelloFlood);
    CHECK(entry.before.f1 == entry.after.f1);
    CHECK(entry.before.auc == entry.after.auc);
}

TEST_CASE("assess_forgetting: covers exactly the supplied old attacks") {
    const SuiteConfig cfg = mini_suite_config();
    const SuiteDatasets data = prepare_suite_datasets(cfg);
    const AnyModel model =
        train_model(ModelKind::GBDT, merge(data.hf.train, data.benign.train), cfg.train);
    std::map<AttackKind, WindowedDataset> old_tests;
    old_tests[AttackKind::HelloFlood] = regime_test_set(AttackKind::HelloFlood, data);
    old_tests[AttackKind::DecreasedRank] = regime_test_set(AttackKind::DecreasedRank, data);
    const ForgettingReport report = assess_forgetting(model, model, old_tests);
    CHECK(report.per_attack.size() == 2);
    CHECK(report.per_attack.count(AttackKind::VersionNumber) == 0);
}

TEST_CASE("bench_update_time: validates repetitions and yields a positive GBDT speedup") {
    const SuiteConfig cfg = mini_suite_config();
    const SuiteDatasets data = prepare_suite_datasets(cfg);
    CHECK_THROWS_AS(bench_update_time(ModelKind::GBDT, AttackKind::VersionNumber, data, cfg.train,
                                      cfg.plan, 2),
                    ConfigError);
    const TimingReport report = bench_update_time(ModelKind::GBDT, AttackKind::VersionNumber, data,
                                                  cfg.train, cfg.plan, 3);
    CHECK(report.t_full_retrain_s > 0.0);
    CHECK(report.t_incremental_s > 0.0);
    CHECK(report.speedup_pct > 0.0);
    CHECK(report.speedup_pct ==
          doctest::Approx((report.t_full_retrain_s - report.t_incremental_s) /
                          report.t_full_retrain_s * 100.0));
}

TEST_CASE("run_experiment_suite: six cells, stable numbers across reruns") {
    SuiteConfig cfg = mini_suite_config();
    cfg.base_sim.duration_s = 150.0;
    cfg.base_sim.attack_end_s = 120.0;
    cfg.train.epochs = 25;
    cfg.plan.update_epochs = 25;
    const SuiteReport a = run_experiment_suite(cfg);
    REQUIRE(a.cells.size() == 6);

    const SuiteReport b = run_experiment_suite(cfg);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(a.cells[i].attack == b.cells[i].attack);
        CHECK(a.cells[i].model_kind == b.cells[i].model_kind);
        CHECK(a.cells[i].r1.f1 == b.cells[i].r1.f1);
        CHECK(a.cells[i].r2.f1 == b.cells[i].r2.f1);
        CHECK(a.cells[i].r3.f1 == b.cells[i].r3.f1);
        CHECK(a.cells[i].cil.delta == b.cells[i].cil.delta);
    }
    CHECK(a.mean_delta == b.mean_delta);

    // report serialization sanity
    const std::string json = suite_report_json(a);
    CHECK(json.find("\"cells\"") != std::string::npos);
    const std::string csv = suite_table_csv(a);
    CHECK(csv.rfind("model,attack,f1_r2,f1_r3,delta,f1_r1,gap,recovery_pct\n", 0) == 0);
    // 1 header + 6 cells + 3 attack means + 2 model means + 1 overall
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
}
