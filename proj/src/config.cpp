#include "rplcil/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rplcil {

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.suite.base_sim = SimConfig{};
    cfg.suite.train = TrainConfig{};
    cfg.suite.plan = UpdatePlan{};
    cfg.train_frac = cfg.suite.train_frac;
    return cfg;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
    }
}

long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": '" + v + "'");
    }
}

} // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);

    RunConfig cfg = default_run_config();
    std::string section;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#' || text[0] == ';') continue;
        if (text.front() == '[') {
            if (text.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
            section = trim(text.substr(1, text.size() - 2));
            if (section != "sim" && section != "features" && section != "train" &&
                section != "update" && section != "suite" && section != "run")
                throw ConfigError("config line " + std::to_string(line_no) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (section.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": key outside a section");

        SimConfig& sim = cfg.suite.base_sim;
        TrainConfig& train = cfg.suite.train;
        UpdatePlan& plan = cfg.suite.plan;
        if (section == "sim") {
            if (key == "num_nodes") sim.num_nodes = static_cast<int>(parse_int(value, key));
            else if (key == "area_side") sim.area_side = parse_double(value, key);
            else if (key == "radio_range") sim.radio_range = parse_double(value, key);
            else if (key == "duration_s") sim.duration_s = parse_double(value, key);
            else if (key == "dio_interval_s") sim.dio_interval_s = parse_double(value, key);
            else if (key == "data_rate_pps") sim.data_rate_pps = parse_double(value, key);
            else if (key == "loss_prob") sim.loss_prob = parse_double(value, key);
            else if (key == "attacker_id") {
                cfg.suite.attacker_ids = {static_cast<NodeId>(parse_int(value, key))};
            } else if (key == "attack_start_s") sim.attack_start_s = parse_double(value, key);
            else if (key == "attack_end_s") sim.attack_end_s = parse_double(value, key);
            else if (key == "attack_intensity") sim.attack_intensity = parse_double(value, key);
            else throw ConfigError("unknown key in [sim]: " + key);
        } else if (section == "features") {
            if (key == "train_frac") {
                cfg.train_frac = parse_double(value, key);
                cfg.suite.train_frac = cfg.train_frac;
            } else {
                throw ConfigError("unknown key in [features]: " + key);
            }
        } else if (section == "train") {
            if (key == "n_rounds") train.n_rounds = static_cast<int>(parse_int(value, key));
            else if (key == "max_depth") train.max_depth = static_cast<int>(parse_int(value, key));
            else if (key == "epochs") train.epochs = static_cast<int>(parse_int(value, key));
            else if (key == "batch_size") train.batch_size = static_cast<int>(parse_int(value, key));
            else if (key == "learning_rate_gbdt") train.learning_rate_gbdt = parse_double(value, key);
            else if (key == "learning_rate_mlp") train.learning_rate_mlp = parse_double(value, key);
            else if (key == "nadam_beta1") train.nadam.beta1 = parse_double(value, key);
            else if (key == "nadam_beta2") train.nadam.beta2 = parse_double(value, key);
            else if (key == "nadam_epsilon") train.nadam.epsilon = parse_double(value, key);
            else throw ConfigError("unknown key in [train]: " + key);
        } else if (section == "update") {
            if (key == "temperature") plan.temperature = parse_double(value, key);
            else if (key == "lambda_kd") plan.lambda_kd = parse_double(value, key);
            else if (key == "gamma_reg") plan.gamma_reg = parse_double(value, key);
            else if (key == "reg_kind") {
                if (value == "L2SP" || value == "l2sp") plan.reg_kind = RegKind::L2SP;
                else if (value == "EWC" || value == "ewc") plan.reg_kind = RegKind::EWC;
                else throw ConfigError("reg_kind must be L2SP or EWC, got '" + value + "'");
            } else if (key == "update_epochs") plan.update_epochs = static_cast<int>(parse_int(value, key));
            else if (key == "update_rounds") plan.update_rounds = static_cast<int>(parse_int(value, key));
            else throw ConfigError("unknown key in [update]: " + key);
        } else if (section == "suite") {
            if (key == "buffer_capacity")
                cfg.suite.buffer_capacity = static_cast<std::size_t>(parse_int(value, key));
            else if (key == "timing_repetitions")
                cfg.suite.timing_repetitions = static_cast<int>(parse_int(value, key));
            else throw ConfigError("unknown key in [suite]: " + key);
        } else if (section == "run") {
            if (key == "seed") {
                apply_seed(cfg, static_cast<std::uint64_t>(parse_int(value, key)));
                cfg.seed_from_config = true;
            } else {
                throw ConfigError("unknown key in [run]: " + key);
            }
        }
    }
    return cfg;
}

std::uint64_t resolve_seed(const RunConfig& config, std::optional<std::uint64_t> flag_seed) {
    if (flag_seed) return *flag_seed;
    if (config.seed_from_config) return config.suite.seed;
    if (const char* env = std::getenv("RPLCIL_SEED")) {
        try {
            return static_cast<std::uint64_t>(std::stoull(env));
        } catch (const std::exception&) {
            throw ConfigError(std::string("RPLCIL_SEED is not an integer: ") + env);
        }
    }
    return 3;
}

void apply_seed(RunConfig& config, std::uint64_t seed) {
    config.suite.seed = seed;
    config.suite.base_sim.seed = seed;
    config.suite.train.seed = seed;
}

} // namespace rplcil
