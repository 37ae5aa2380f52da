#include "rplcil/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rplcil/rng.hpp"

namespace rplcil {

namespace {

struct LayerSpan {
    std::size_t w_off;
    std::size_t b_off;
    int in;
    int out;
};

std::vector<LayerSpan> layout(const std::vector<int>& dims) {
    std::vector<LayerSpan> spans;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        LayerSpan s{off, off + static_cast<std::size_t>(dims[l]) * dims[l + 1], dims[l], dims[l + 1]};
        off = s.b_off + static_cast<std::size_t>(dims[l + 1]);
        spans.push_back(s);
    }
    return spans;
}

void standardize(const MlpModel& model, const std::array<double, kNumFeatures>& x,
                 std::vector<double>& out) {
    out.resize(kNumFeatures);
    for (int i = 0; i < kNumFeatures; ++i)
        out[i] = (x[i] - model.input_shift[i]) * model.input_scale[i];
}

// Forward pass keeping every layer's activations for backprop.
void forward_all(const MlpModel& model, const std::vector<LayerSpan>& spans,
                 const std::array<double, kNumFeatures>& x,
                 std::vector<std::vector<double>>& acts) {
    acts.resize(spans.size() + 1);
    standardize(model, x, acts[0]);
    for (std::size_t l = 0; l < spans.size(); ++l) {
        const LayerSpan& s = spans[l];
        const bool hidden = l + 1 < spans.size();
        auto& out = acts[l + 1];
        out.assign(static_cast<std::size_t>(s.out), 0.0);
        const auto& in = acts[l];
        for (int j = 0; j < s.out; ++j) {
            double acc = model.params[s.b_off + j];
            const std::size_t row = s.w_off + static_cast<std::size_t>(j) * s.in;
            for (int i = 0; i < s.in; ++i) acc += model.params[row + i] * in[i];
            out[j] = hidden ? std::max(0.0, acc) : acc;
        }
    }
}

double log_sum_exp2(double a, double b) {
    const double m = a > b ? a : b;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

} // namespace

std::size_t MlpModel::param_count_for(const std::vector<int>& dims) {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        total += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
    return total;
}

MlpModel mlp_init(const std::vector<int>& layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) throw ConfigError("mlp needs at least input and output layers");
    if (layer_dims.front() != kNumFeatures)
        throw ConfigError("mlp input layer must match the feature schema");
    if (layer_dims.back() != 2) throw ConfigError("mlp output layer must hold two logits");

    MlpModel model;
    model.layer_dims = layer_dims;
    model.params.assign(MlpModel::param_count_for(layer_dims), 0.0);
    model.input_shift.assign(kNumFeatures, 0.0);
    model.input_scale.assign(kNumFeatures, 1.0);

    Rng rng(seed);
    for (const LayerSpan& s : layout(layer_dims)) {
        const double limit = std::sqrt(6.0 / s.in);
        for (std::size_t k = 0; k < static_cast<std::size_t>(s.in) * s.out; ++k)
            model.params[s.w_off + k] = rng.uniform(-limit, limit);
        // biases stay zero
    }
    return model;
}

LogitPair mlp_logits(const MlpModel& model, const std::array<double, kNumFeatures>& x) {
    const auto spans = layout(model.layer_dims);
    std::vector<std::vector<double>> acts;
    forward_all(model, spans, x, acts);
    return LogitPair{acts.back()[0], acts.back()[1]};
}

MlpPrediction mlp_predict(const MlpModel& model, const FeatureVector& x) {
    MlpPrediction pred;
    pred.logits = mlp_logits(model, x.to_array());
    pred.prob_malicious = softmax2(pred.logits)[1];
    return pred;
}

double mlp_loss(const MlpModel& model, const MlpBatch& batch, const MlpLossConfig& cfg) {
    if (batch.size() == 0) throw DataError("mlp_loss: empty batch");
    const bool kd = !batch.teacher_logits.empty();
    if (kd && batch.teacher_logits.size() != batch.size())
        throw ShapeError("mlp_loss: teacher logits misaligned with batch");

    double ce = 0.0, kd_acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const LogitPair z = mlp_logits(model, batch.x[i]);
        const double lse = log_sum_exp2(z.z_benign, z.z_malicious);
        ce += lse - (batch.y[i] == 1 ? z.z_malicious : z.z_benign);
        if (kd && batch.kd_on(i)) kd_acc += kd_loss(batch.teacher_logits[i], z, cfg.temperature);
    }
    ce /= static_cast<double>(batch.size());
    kd_acc /= static_cast<double>(batch.size());

    double reg = 0.0;
    if (cfg.gamma_reg > 0.0 && cfg.anchor != nullptr) {
        reg = cfg.reg_kind == RegKind::EWC
                  ? ewc_penalty(model.params, *cfg.anchor, *cfg.fisher)
                  : l2sp_penalty(model.params, *cfg.anchor);
    }
    return ce + cfg.lambda_kd * kd_acc + cfg.gamma_reg * reg;
}

std::vector<double> mlp_gradients(const MlpModel& model, const MlpBatch& batch,
                                  const MlpLossConfig& cfg) {
    if (batch.size() == 0) throw DataError("mlp_gradients: empty batch");
    const bool kd = !batch.teacher_logits.empty() && cfg.lambda_kd > 0.0;
    if (!batch.teacher_logits.empty() && batch.teacher_logits.size() != batch.size())
        throw ShapeError("mlp_gradients: teacher logits misaligned with batch");

    const auto spans = layout(model.layer_dims);
    std::vector<double> grad(model.params.size(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    std::vector<std::vector<double>> acts;
    std::vector<double> delta, next_delta;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        forward_all(model, spans, batch.x[i], acts);
        const LogitPair z{acts.back()[0], acts.back()[1]};
        const auto p = softmax2(z);

        // dL/dz for the sample, already weighted by 1/B
        delta.assign(2, 0.0);
        delta[0] = (p[0] - (batch.y[i] == 1 ? 0.0 : 1.0)) * inv_b;
        delta[1] = (p[1] - (batch.y[i] == 1 ? 1.0 : 0.0)) * inv_b;
        if (kd && batch.kd_on(i)) {
            const auto ps = softmax2(z, cfg.temperature);
            const auto pt = softmax2(batch.teacher_logits[i], cfg.temperature);
            const double scale = cfg.lambda_kd * cfg.temperature * inv_b;
            delta[0] += scale * (ps[0] - pt[0]);
            delta[1] += scale * (ps[1] - pt[1]);
        }

        for (std::size_t l = spans.size(); l-- > 0;) {
            const LayerSpan& s = spans[l];
            const auto& in = acts[l];
            for (int j = 0; j < s.out; ++j) {
                const double d = delta[j];
                grad[s.b_off + j] += d;
                const std::size_t row = s.w_off + static_cast<std::size_t>(j) * s.in;
                for (int k = 0; k < s.in; ++k) grad[row + k] += d * in[k];
            }
            if (l == 0) break;
            next_delta.assign(static_cast<std::size_t>(s.in), 0.0);
            for (int k = 0; k < s.in; ++k) {
                if (acts[l][k] <= 0.0) continue; // ReLU gate
                double acc = 0.0;
                for (int j = 0; j < s.out; ++j)
                    acc += delta[j] * model.params[s.w_off + static_cast<std::size_t>(j) * s.in + k];
                next_delta[k] = acc;
            }
            delta.swap(next_delta);
        }
    }

    if (cfg.gamma_reg > 0.0 && cfg.anchor != nullptr) {
        if (cfg.anchor->size() != model.params.size())
            throw ShapeError("mlp_gradients: anchor size mismatch");
        if (cfg.reg_kind == RegKind::EWC) {
            if (cfg.fisher == nullptr || cfg.fisher->size() != model.params.size())
                throw ShapeError("mlp_gradients: fisher size mismatch");
            for (std::size_t k = 0; k < grad.size(); ++k)
                grad[k] += cfg.gamma_reg * (*cfg.fisher)[k] * (model.params[k] - (*cfg.anchor)[k]);
        } else {
            for (std::size_t k = 0; k < grad.size(); ++k)
                grad[k] += cfg.gamma_reg * (model.params[k] - (*cfg.anchor)[k]);
        }
    }
    return grad;
}

std::vector<double> estimate_fisher(const MlpModel& model, const WindowedDataset& data) {
    if (data.rows.empty()) throw DataError("estimate_fisher needs nonempty data");
    std::vector<double> fisher(model.params.size(), 0.0);
    MlpBatch one;
    one.x.resize(1);
    one.y.resize(1);
    const MlpLossConfig plain;
    for (const DatasetRow& row : data.rows) {
        one.x[0] = row.features.to_array();
        one.y[0] = row.label;
        const auto g = mlp_gradients(model, one, plain); // -(d log p)/(d theta)
        for (std::size_t k = 0; k < fisher.size(); ++k) fisher[k] += g[k] * g[k];
    }
    const double inv_n = 1.0 / static_cast<double>(data.rows.size());
    for (double& f : fisher) f *= inv_n;
    return fisher;
}

namespace {

class Nadam {
public:
    Nadam(std::size_t n, double lr, const NadamParams& p)
        : m_(n, 0.0), v_(n, 0.0), lr_(lr), b1_(p.beta1), b2_(p.beta2), eps_(p.epsilon) {}

    void step(std::vector<double>& params, const std::vector<double>& grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, t_);
        const double c2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double g = grad[k];
            m_[k] = b1_ * m_[k] + (1.0 - b1_) * g;
            v_[k] = b2_ * v_[k] + (1.0 - b2_) * g * g;
            const double m_hat = m_[k] / c1;
            const double v_hat = v_[k] / c2;
            // Nesterov look-ahead on the first moment
            const double direction = b1_ * m_hat + (1.0 - b1_) * g / c1;
            params[k] -= lr_ * direction / (std::sqrt(v_hat) + eps_);
        }
    }

private:
    std::vector<double> m_, v_;
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
};

} // namespace

void mlp_fit(MlpModel& model, const MlpBatch& data, const TrainConfig& cfg, int epochs,
             const MlpLossConfig& loss_cfg, std::uint64_t shuffle_seed) {
    if (data.size() == 0) throw DataError("mlp_fit: empty training data");
    const bool kd = !data.teacher_logits.empty();

    Nadam opt(model.params.size(), cfg.learning_rate_mlp, cfg.nadam);
    Rng shuffle_rng(shuffle_seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    MlpBatch batch;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            batch.x.clear();
            batch.y.clear();
            batch.teacher_logits.clear();
            batch.kd_mask.clear();
            for (std::size_t k = start; k < stop; ++k) {
                batch.x.push_back(data.x[order[k]]);
                batch.y.push_back(data.y[order[k]]);
                if (kd) {
                    batch.teacher_logits.push_back(data.teacher_logits[order[k]]);
                    if (!data.kd_mask.empty()) batch.kd_mask.push_back(data.kd_mask[order[k]]);
                }
            }
            const auto grad = mlp_gradients(model, batch, loss_cfg);
            opt.step(model.params, grad);
        }
        for (double p : model.params)
            if (!std::isfinite(p)) throw DivergenceError("mlp_fit: parameters became non-finite");
    }
}

MlpBatch to_batch(const WindowedDataset& data) {
    MlpBatch batch;
    batch.x.reserve(data.rows.size());
    batch.y.reserve(data.rows.size());
    for (const DatasetRow& row : data.rows) {
        batch.x.push_back(row.features.to_array());
        batch.y.push_back(row.label);
    }
    return batch;
}

MlpModel mlp_train(const WindowedDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    std::size_t n_pos = 0;
    for (const DatasetRow& row : data.rows) n_pos += row.label == 1;
    if (data.rows.empty() || n_pos == 0 || n_pos == data.rows.size())
        throw DataError("mlp_train needs both classes present");

    MlpModel model = mlp_init({kNumFeatures, 32, 16, 2}, cfg.seed);

    // Standardization fit on the training set; constant features pass through.
    for (int f = 0; f < kNumFeatures; ++f) {
        double mean = 0.0;
        for (const DatasetRow& row : data.rows) mean += row.features.to_array()[f];
        mean /= static_cast<double>(data.rows.size());
        double var = 0.0;
        for (const DatasetRow& row : data.rows) {
            const double d = row.features.to_array()[f] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(data.rows.size()));
        model.input_shift[f] = mean;
        model.input_scale[f] = sd > 1e-9 ? 1.0 / sd : 1.0;
    }

    mlp_fit(model, to_batch(data), cfg, cfg.epochs, MlpLossConfig{}, cfg.seed ^ 0x5u);
    return model;
}

} // namespace rplcil
