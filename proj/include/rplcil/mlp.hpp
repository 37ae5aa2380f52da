#ifndef RPLCIL_MLP_HPP
#define RPLCIL_MLP_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "rplcil/features.hpp"
#include "rplcil/losses.hpp"
#include "rplcil/train_config.hpp"

namespace rplcil {

// Fully connected rectifier network with a two-logit head. Parameters live in
// one flat vector laid out [W0 | b0 | W1 | b1 | ...], W row-major [out][in];
// penalties, Fisher weights and the optimizer all index that layout. Inputs
// pass through a per-feature standardization fit on the first training set
// and inherited unchanged by incrementally updated students.
struct MlpModel {
    std::vector<int> layer_dims; // e.g. {13, 32, 16, 2}
    std::vector<double> params;
    std::vector<double> input_shift;
    std::vector<double> input_scale;

    std::size_t param_count() const { return params.size(); }
    static std::size_t param_count_for(const std::vector<int>& dims);
};

struct MlpBatch {
    std::vector<std::array<double, kNumFeatures>> x;
    std::vector<int> y;
    std::vector<LogitPair> teacher_logits;  // empty, or aligned with x for KD
    std::vector<unsigned char> kd_mask;     // empty = distill every row

    std::size_t size() const { return x.size(); }
    bool kd_on(std::size_t i) const { return kd_mask.empty() || kd_mask[i] != 0; }
};

// Configures the active total loss: mean CE + lambda * mean KD + gamma * reg.
struct MlpLossConfig {
    double lambda_kd = 0.0;
    double temperature = 2.0;
    double gamma_reg = 0.0;
    RegKind reg_kind = RegKind::L2SP;
    const std::vector<double>* anchor = nullptr; // flattened params
    const std::vector<double>* fisher = nullptr; // EWC only
};

struct MlpPrediction {
    double prob_malicious = 0.5;
    LogitPair logits;
};

MlpModel mlp_init(const std::vector<int>& layer_dims, std::uint64_t seed);

MlpModel mlp_train(const WindowedDataset& data, const TrainConfig& cfg);

MlpPrediction mlp_predict(const MlpModel& model, const FeatureVector& x);
LogitPair mlp_logits(const MlpModel& model, const std::array<double, kNumFeatures>& x);

double mlp_loss(const MlpModel& model, const MlpBatch& batch, const MlpLossConfig& cfg);

// Exact backpropagation gradients of the active total loss, flat layout.
std::vector<double> mlp_gradients(const MlpModel& model, const MlpBatch& batch,
                                  const MlpLossConfig& cfg);

// Diagonal Fisher: per-parameter mean of squared log-likelihood gradients.
std::vector<double> estimate_fisher(const MlpModel& model, const WindowedDataset& data);

// Runs epochs of seeded-shuffle minibatch Nadam on the given batch contents.
// Used by both initial training and the incremental update.
void mlp_fit(MlpModel& model, const MlpBatch& data, const TrainConfig& cfg, int epochs,
             const MlpLossConfig& loss_cfg, std::uint64_t shuffle_seed);

MlpBatch to_batch(const WindowedDataset& data);

} // namespace rplcil

#endif
