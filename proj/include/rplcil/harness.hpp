#ifndef RPLCIL_HARNESS_HPP
#define RPLCIL_HARNESS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rplcil/cil.hpp"
#include "rplcil/features.hpp"
#include "rplcil/model_io.hpp"
#include "rplcil/simnet.hpp"
#include "rplcil/train_config.hpp"

namespace rplcil {

struct EvalMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.5;
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

// Confusion metrics at the threshold plus tie-corrected rank AUC.
EvalMetrics compute_metrics(const std::vector<int>& labels, const std::vector<double>& probs,
                            double threshold = 0.5);

double compute_delta(double f1_r2, double f1_r3);
double compute_gap(double f1_r1, double f1_r3);
// (R3-R2)/(R1-R2)*100; empty when the denominator vanishes.
std::optional<double> compute_recovery(double f1_r1, double f1_r2, double f1_r3);

enum class Regime { R1, R2, R3 };

struct RegimeSpec {
    Regime regime = Regime::R1;
    AttackKind target_attack = AttackKind::HelloFlood;
    ModelKind model_kind = ModelKind::GBDT;
    std::uint64_t seed = 3;
};

struct AttackData {
    WindowedDataset train;
    WindowedDataset test;
};

// Train/test splits for the three attacks plus the benign-only trace.
struct SuiteDatasets {
    AttackData hf, dr, vn, benign;

    const AttackData& for_attack(AttackKind kind) const;
};

struct CilReport {
    double f1_r1 = 0.0, f1_r2 = 0.0, f1_r3 = 0.0;
    double delta = 0.0;
    double gap = 0.0;
    std::optional<double> recovery_pct;
};

CilReport make_cil_report(double f1_r1, double f1_r2, double f1_r3);

struct ForgettingEntry {
    EvalMetrics before;
    EvalMetrics after;
};

struct ForgettingReport {
    std::map<AttackKind, ForgettingEntry> per_attack;
};

struct TimingReport {
    double t_full_retrain_s = 0.0;
    double t_incremental_s = 0.0;
    double speedup_pct = 0.0;
};

AnyModel train_model(ModelKind kind, const WindowedDataset& data, const TrainConfig& cfg);
EvalMetrics evaluate_model(const AnyModel& model, const WindowedDataset& test,
                           double threshold = 0.5);

// Training union for a regime: R1 = target+benign, R2 = the other two+benign,
// R3 trains like R2 before its update. Exposed for the disjointness checks.
WindowedDataset regime_training_union(const RegimeSpec& spec, const SuiteDatasets& data);
// Every regime evaluates on the target attack's held-out windows plus benign.
WindowedDataset regime_test_set(AttackKind target, const SuiteDatasets& data);

struct RegimeResult {
    AnyModel model;
    EvalMetrics metrics;
};

RegimeResult run_regime(const RegimeSpec& spec, const SuiteDatasets& data, const TrainConfig& cfg,
                        const UpdatePlan& plan, std::size_t buffer_capacity = 240);

ForgettingReport assess_forgetting(const AnyModel& model_before, const AnyModel& model_after,
                                   const std::map<AttackKind, WindowedDataset>& old_attack_tests);

// Median wall-clock over repetitions of (a) full retrain on old ∪ new versus
// (b) incremental_update of the pretrained model, with identical per-pass
// budgets for the new data. Runs exclusively, no concurrent load.
TimingReport bench_update_time(ModelKind kind, AttackKind target, const SuiteDatasets& data,
                               const TrainConfig& cfg, const UpdatePlan& plan, int repetitions,
                               std::size_t buffer_capacity = 240);

struct SuiteConfig {
    SimConfig base_sim;        // attack field is overridden per trace
    std::set<NodeId> attacker_ids{6};
    double train_frac = 0.7;
    TrainConfig train;
    UpdatePlan plan;
    std::size_t buffer_capacity = 240;
    int timing_repetitions = 3;
    std::uint64_t seed = 3;
};

SuiteDatasets prepare_suite_datasets(const SuiteConfig& cfg);

struct SuiteCell {
    AttackKind attack = AttackKind::HelloFlood;
    ModelKind model_kind = ModelKind::GBDT;
    EvalMetrics r1, r2, r3;
    CilReport cil;
    ForgettingReport forgetting;
    TimingReport timing;
};

struct SuiteReport {
    std::uint64_t seed = 3;
    std::vector<SuiteCell> cells;
    double mean_delta = 0.0;
    std::map<AttackKind, double> mean_delta_per_attack;
    std::map<ModelKind, double> mean_delta_per_model;
    std::optional<double> median_recovery_pct; // over cells with defined recovery
};

SuiteReport run_experiment_suite(const SuiteConfig& cfg);

std::string suite_report_json(const SuiteReport& report);
std::string suite_table_csv(const SuiteReport& report);
void write_suite_report(const SuiteReport& report, const std::string& json_path,
                        const std::string& csv_path);

std::string metrics_json(const EvalMetrics& m);
std::string timing_json(const TimingReport& t);

} // namespace rplcil

#endif
