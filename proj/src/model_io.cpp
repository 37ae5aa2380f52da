#include "rplcil/model_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace rplcil {

namespace {

constexpr char kMagic[8] = {'R', 'P', 'L', 'C', 'I', 'L', '1', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("model file: truncated");
    return v;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
    write_pod<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n > (1u << 28)) throw IoError("model file: implausible array size");
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw IoError("model file: truncated");
    return v;
}

} // namespace

std::string model_kind_name(ModelKind kind) { return kind == ModelKind::GBDT ? "GBDT" : "MLP"; }

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "GBDT" || name == "gbdt") return ModelKind::GBDT;
    if (name == "MLP" || name == "mlp") return ModelKind::MLP;
    throw ConfigError("unknown model kind: " + name);
}

ModelKind model_kind(const AnyModel& model) {
    return std::holds_alternative<GbdtModel>(model) ? ModelKind::GBDT : ModelKind::MLP;
}

double predict_prob(const AnyModel& model, const FeatureVector& x) {
    if (const auto* g = std::get_if<GbdtModel>(&model)) return gbdt_predict(*g, x).prob_malicious;
    return mlp_predict(std::get<MlpModel>(model), x).prob_malicious;
}

LogitPair predict_logits(const AnyModel& model, const FeatureVector& x) {
    if (const auto* g = std::get_if<GbdtModel>(&model)) return gbdt_predict(*g, x).logits;
    return mlp_predict(std::get<MlpModel>(model), x).logits;
}

void save_model(const AnyModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kFormatVersion);
    write_pod<std::uint32_t>(out, model_kind(model) == ModelKind::GBDT ? 1 : 2);

    if (const auto* g = std::get_if<GbdtModel>(&model)) {
        write_pod(out, g->base_score);
        write_pod(out, g->learning_rate);
        write_pod<std::int32_t>(out, g->max_depth);
        write_pod<std::uint64_t>(out, g->trees.size());
        for (const RegressionTree& tree : g->trees) {
            write_pod<std::uint64_t>(out, tree.nodes.size());
            for (const TreeNode& node : tree.nodes) {
                write_pod<std::int32_t>(out, node.feature);
                write_pod(out, node.threshold);
                write_pod<std::int32_t>(out, node.left);
                write_pod<std::int32_t>(out, node.right);
                write_pod(out, node.value);
            }
        }
    } else {
        const MlpModel& m = std::get<MlpModel>(model);
        write_pod<std::uint64_t>(out, m.layer_dims.size());
        for (int d : m.layer_dims) write_pod<std::int32_t>(out, d);
        write_doubles(out, m.params);
        write_doubles(out, m.input_shift);
        write_doubles(out, m.input_scale);
    }
    if (!out) throw IoError("write failed: " + path);
}

AnyModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("not a model file (bad magic): " + path);
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kFormatVersion)
        throw IoError("unsupported model format version " + std::to_string(version));
    const auto kind = read_pod<std::uint32_t>(in);

    if (kind == 1) {
        GbdtModel g;
        g.base_score = read_pod<double>(in);
        g.learning_rate = read_pod<double>(in);
        g.max_depth = read_pod<std::int32_t>(in);
        const auto n_trees = read_pod<std::uint64_t>(in);
        if (n_trees > (1u << 24)) throw IoError("model file: implausible tree count");
        g.trees.resize(n_trees);
        for (RegressionTree& tree : g.trees) {
            const auto n_nodes = read_pod<std::uint64_t>(in);
            if (n_nodes > (1u << 26)) throw IoError("model file: implausible node count");
            tree.nodes.resize(n_nodes);
            for (TreeNode& node : tree.nodes) {
                node.feature = read_pod<std::int32_t>(in);
                node.threshold = read_pod<double>(in);
                node.left = read_pod<std::int32_t>(in);
                node.right = read_pod<std::int32_t>(in);
                node.value = read_pod<double>(in);
            }
        }
        return g;
    }
    if (kind == 2) {
        MlpModel m;
        const auto n_dims = read_pod<std::uint64_t>(in);
        if (n_dims < 2 || n_dims > 64) throw IoError("model file: implausible layer count");
        m.layer_dims.resize(n_dims);
        for (auto& d : m.layer_dims) d = read_pod<std::int32_t>(in);
        m.params = read_doubles(in);
        m.input_shift = read_doubles(in);
        m.input_scale = read_doubles(in);
        if (m.params.size() != MlpModel::param_count_for(m.layer_dims))
            throw IoError("model file: parameter count does not match layer dims");
        return m;
    }
    throw IoError("model file: unknown kind tag " + std::to_string(kind));
}

} // namespace rplcil
