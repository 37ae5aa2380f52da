#ifndef RPLCIL_MODEL_IO_HPP
#define RPLCIL_MODEL_IO_HPP

#include <string>
#include <variant>

#include "rplcil/gbdt.hpp"
#include "rplcil/mlp.hpp"

namespace rplcil {

enum class ModelKind { GBDT, MLP };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

using AnyModel = std::variant<GbdtModel, MlpModel>;

ModelKind model_kind(const AnyModel& model);
double predict_prob(const AnyModel& model, const FeatureVector& x);
LogitPair predict_logits(const AnyModel& model, const FeatureVector& x);

// Self-describing binary file: magic "RPLCIL1", format version, kind tag and
// the full parameter dump. load(save(m)) reproduces predictions bit-exactly.
void save_model(const AnyModel& model, const std::string& path);
AnyModel load_model(const std::string& path);

} // namespace rplcil

#endif
