#ifndef RPLCIL_TRAIN_CONFIG_HPP
#define RPLCIL_TRAIN_CONFIG_HPP

#include <cstdint>

#include "rplcil/errors.hpp"

namespace rplcil {

struct NadamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    int n_rounds = 20;      // GBDT boosting rounds per fit / warm start
    int max_depth = 5;      // GBDT tree depth bound, valid range [2, 10]
    int epochs = 100;       // MLP
    int batch_size = 32;
    double learning_rate_gbdt = 0.1;
    double learning_rate_mlp = 0.002;
    NadamParams nadam;
    std::uint64_t seed = 3;

    void validate() const {
        if (n_rounds < 1 || n_rounds > 20)
            throw ConfigError("n_rounds must be in [1, 20]");
        if (max_depth < 2 || max_depth > 10)
            throw ConfigError("max_depth must be in [2, 10]");
        if (epochs < 1) throw ConfigError("epochs must be positive");
        if (batch_size < 1) throw ConfigError("batch_size must be positive");
        if (learning_rate_gbdt <= 0.0 || learning_rate_mlp <= 0.0)
            throw ConfigError("learning rates must be positive");
        if (nadam.beta1 <= 0.0 || nadam.beta1 >= 1.0 || nadam.beta2 <= 0.0 || nadam.beta2 >= 1.0)
            throw ConfigError("nadam betas must lie in (0, 1)");
        if (nadam.epsilon <= 0.0) throw ConfigError("nadam epsilon must be positive");
    }
};

enum class RegKind { L2SP, EWC };

// Knobs of the incremental update: distillation temperature/weight and the
// parameter-anchoring regularizer weight.
struct UpdatePlan {
    double temperature = 2.0;
    double lambda_kd = 1.0;
    double gamma_reg = 0.1;
    RegKind reg_kind = RegKind::L2SP;
    int update_epochs = 100;
    int update_rounds = 10;

    void validate() const {
        if (temperature <= 0.0) throw ConfigError("temperature must be positive");
        if (lambda_kd < 0.0 || gamma_reg < 0.0)
            throw ConfigError("loss weights must be nonnegative");
        if (update_epochs < 1 || update_rounds < 1)
            throw ConfigError("update budgets must be positive");
    }
};

} // namespace rplcil

#endif
