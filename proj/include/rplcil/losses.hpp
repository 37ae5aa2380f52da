#ifndef RPLCIL_LOSSES_HPP
#define RPLCIL_LOSSES_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "rplcil/errors.hpp"
#include "rplcil/train_config.hpp"

namespace rplcil {

// Two-logit head shared by both detector families: index 0 = benign,
// index 1 = malicious. GBDT margins are embedded as (0, z).
struct LogitPair {
    double z_benign = 0.0;
    double z_malicious = 0.0;
};

inline std::array<double, 2> softmax2(const LogitPair& z, double temperature = 1.0) {
    const double a = z.z_benign / temperature;
    const double b = z.z_malicious / temperature;
    const double m = a > b ? a : b;
    const double ea = std::exp(a - m);
    const double eb = std::exp(b - m);
    const double s = ea + eb;
    return {ea / s, eb / s};
}

// T^2 * KL(softmax(teacher/T) || softmax(student/T)), natural log.
inline double kd_loss(const LogitPair& teacher, const LogitPair& student, double temperature) {
    if (temperature <= 0.0) throw ConfigError("kd_loss: temperature must be positive");
    const auto p = softmax2(teacher, temperature);
    const auto q = softmax2(student, temperature);
    double kl = 0.0;
    for (int i = 0; i < 2; ++i) {
        if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
    }
    if (kl < 0.0) kl = 0.0; // guard rounding
    return temperature * temperature * kl;
}

inline double combined_loss(double ce, double kd, double reg, const UpdatePlan& plan) {
    return ce + plan.lambda_kd * kd + plan.gamma_reg * reg;
}

// 1/2 sum (theta_i - anchor_i)^2
inline double l2sp_penalty(const std::vector<double>& params, const std::vector<double>& anchor) {
    if (params.size() != anchor.size())
        throw ShapeError("l2sp_penalty: parameter/anchor size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double d = params[i] - anchor[i];
        acc += d * d;
    }
    return 0.5 * acc;
}

// 1/2 sum F_i (theta_i - anchor_i)^2 with diagonal Fisher weights.
inline double ewc_penalty(const std::vector<double>& params, const std::vector<double>& anchor,
                          const std::vector<double>& fisher) {
    if (params.size() != anchor.size() || params.size() != fisher.size())
        throw ShapeError("ewc_penalty: parameter/anchor/fisher size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double d = params[i] - anchor[i];
        acc += fisher[i] * d * d;
    }
    return 0.5 * acc;
}

} // namespace rplcil

#endif
