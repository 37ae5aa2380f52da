#include "rplcil/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <queue>
#include <sstream>

#include "rplcil/rng.hpp"

#include <json.hpp>

namespace rplcil {

namespace {

constexpr int kLenDio = 76;
constexpr int kLenDis = 64;
constexpr int kLenData = 120;

std::int64_t to_ms(double seconds) { return std::llround(seconds * 1000.0); }

} // namespace

std::string attack_kind_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::None: return "NONE";
        case AttackKind::HelloFlood: return "HF";
        case AttackKind::DecreasedRank: return "DR";
        case AttackKind::VersionNumber: return "VN";
    }
    return "NONE";
}

AttackKind attack_kind_from_name(const std::string& name) {
    if (name == "NONE" || name == "none") return AttackKind::None;
    if (name == "HF" || name == "hf") return AttackKind::HelloFlood;
    if (name == "DR" || name == "dr") return AttackKind::DecreasedRank;
    if (name == "VN" || name == "vn") return AttackKind::VersionNumber;
    throw ConfigError("unknown attack kind: " + name);
}

std::string msg_kind_name(MsgKind kind) {
    switch (kind) {
        case MsgKind::DIO: return "DIO";
        case MsgKind::DIS: return "DIS";
        case MsgKind::DAO: return "DAO";
        case MsgKind::DATA: return "DATA";
    }
    return "DIO";
}

MsgKind msg_kind_from_name(const std::string& name) {
    if (name == "DIO") return MsgKind::DIO;
    if (name == "DIS") return MsgKind::DIS;
    if (name == "DAO") return MsgKind::DAO;
    if (name == "DATA") return MsgKind::DATA;
    throw IoError("unknown message kind: " + name);
}

void SimConfig::validate() const {
    if (num_nodes < 2) throw ConfigError("num_nodes must be >= 2");
    if (area_side <= 0.0 || radio_range <= 0.0) throw ConfigError("geometry must be positive");
    if (duration_s <= 0.0) throw ConfigError("duration_s must be positive");
    if (dio_interval_s <= 0.0) throw ConfigError("dio_interval_s must be positive");
    if (data_rate_pps < 0.0) throw ConfigError("data_rate_pps must be nonnegative");
    if (loss_prob < 0.0 || loss_prob > 1.0) throw ConfigError("loss_prob must be in [0,1]");
    const bool has_attackers = !attacker_ids.empty();
    if ((attack != AttackKind::None) != has_attackers)
        throw ConfigError("attacker_ids must be nonempty iff attack != NONE");
    if (has_attackers) {
        if (attacker_ids.count(kRootId))
            throw ConfigError("the root cannot be an attacker");
        for (NodeId a : attacker_ids)
            if (a < 0 || a >= num_nodes) throw ConfigError("attacker id out of range");
        if (!(attack_start_s >= 0.0 && attack_start_s < attack_end_s && attack_end_s <= duration_s))
            throw ConfigError("attack window must satisfy 0 <= start < end <= duration");
        if (attack_intensity < 1.0) throw ConfigError("attack_intensity must be >= 1");
    }
}

Adjacency build_topology(const SimConfig& config) {
    if (config.num_nodes < 2) throw ConfigError("num_nodes must be >= 2");
    const int n = config.num_nodes;
    Rng rng = Rng(config.seed).fork(0xA110C);
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = rng.uniform() * config.area_side;
        ys[i] = rng.uniform() * config.area_side;
    }

    double range = config.radio_range;
    for (int attempt = 0; attempt <= 10; ++attempt) {
        Adjacency adj(n);
        const double r2 = range * range;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double dx = xs[i] - xs[j];
                const double dy = ys[i] - ys[j];
                if (dx * dx + dy * dy <= r2) {
                    adj[i].push_back(j);
                    adj[j].push_back(i);
                }
            }
        }
        // connectivity via BFS from the root
        std::vector<bool> seen(n, false);
        std::deque<int> q{kRootId};
        seen[kRootId] = true;
        int reached = 1;
        while (!q.empty()) {
            const int u = q.front();
            q.pop_front();
            for (int v : adj[u]) {
                if (!seen[v]) {
                    seen[v] = true;
                    ++reached;
                    q.push_back(v);
                }
            }
        }
        if (reached == n) return adj;
        range *= 2.0;
    }
    throw TopologyError("graph still disconnected after 10 range doublings");
}

std::vector<NodeState> form_dodag(const Adjacency& adjacency) {
    const int n = static_cast<int>(adjacency.size());
    std::vector<int> hop(n, -1);
    std::deque<int> q{kRootId};
    hop[kRootId] = 0;
    while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        for (int v : adjacency[u]) {
            if (hop[v] < 0) {
                hop[v] = hop[u] + 1;
                q.push_back(v);
            }
        }
    }
    std::vector<NodeState> states(n);
    for (int i = 0; i < n; ++i) {
        if (hop[i] < 0) throw TopologyError("form_dodag requires a connected adjacency");
        states[i].rank = kMinRank + hop[i] * kRankStep;
        states[i].parent = -1;
        if (i != kRootId) {
            int best = -1;
            int best_rank = 0;
            for (int v : adjacency[i]) {
                const int r = kMinRank + hop[v] * kRankStep;
                if (best < 0 || r < best_rank || (r == best_rank && v < best)) {
                    best = v;
                    best_rank = r;
                }
            }
            states[i].parent = best;
        }
    }
    return states;
}

namespace {

struct Event {
    std::int64_t t_ms;
    int prio; // 0 tick, 1 dis, 2 periodic dio, 3 one-shot dio, 4 data
    NodeId node;
    int flag;          // one-shot dio: 1 = solicited by a flood DIS
    std::uint64_t seq; // schedule order, final tiebreak
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t_ms != b.t_ms) return a.t_ms > b.t_ms;
        if (a.prio != b.prio) return a.prio > b.prio;
        if (a.node != b.node) return a.node > b.node;
        return a.seq > b.seq;
    }
};

class Simulation {
public:
    explicit Simulation(const SimConfig& config)
        : cfg_(config),
          adj_(build_topology(config)),
          states_(form_dodag(adj_)),
          n_(config.num_nodes),
          duration_ms_(to_ms(config.duration_s)),
          win_start_ms_(to_ms(config.attack_start_s)),
          win_end_ms_(to_ms(config.attack_end_s)),
          master_(config.seed) {
        for (int i = 0; i < n_; ++i) {
            jitter_rng_.push_back(master_.fork(0x1000 + static_cast<std::uint64_t>(i)));
            data_rng_.push_back(master_.fork(0x2000 + static_cast<std::uint64_t>(i)));
            loss_rng_.push_back(master_.fork(0x3000 + static_cast<std::uint64_t>(i)));
        }
        last_heard_.assign(n_, std::vector<int>(n_, -1));
        for (int i = 0; i < n_; ++i)
            for (int j : adj_[i]) last_heard_[i][j] = states_[j].rank;
        repair_mark_until_.assign(n_, -1);
    }

    Trace run() {
        Trace trace;
        trace.config = cfg_;
        timeline_.push_back(states_); // t = 0, freshly formed DODAG

        const std::int64_t dio_interval_ms = to_ms(cfg_.dio_interval_s);
        for (int i = 0; i < n_; ++i) {
            const auto phase = static_cast<std::int64_t>(jitter_rng_[i].uniform() * dio_interval_ms);
            push(phase, 2, i);
        }
        if (cfg_.data_rate_pps > 0.0) {
            data_period_ms_ = static_cast<std::int64_t>(std::llround(1000.0 / cfg_.data_rate_pps));
            for (int i = 1; i < n_; ++i) {
                const auto phase = static_cast<std::int64_t>(data_rng_[i].uniform() * data_period_ms_);
                push(phase, 4, i);
            }
        }
        if (cfg_.attack == AttackKind::HelloFlood) {
            dis_period_ms_ = std::max<std::int64_t>(
                1, static_cast<std::int64_t>(std::llround(1000.0 * cfg_.dio_interval_s / cfg_.attack_intensity)));
            for (NodeId a : cfg_.attacker_ids) push(win_start_ms_, 1, a);
        }
        const auto last_tick = static_cast<std::int64_t>(std::floor(cfg_.duration_s));
        for (std::int64_t k = 1; k <= last_tick; ++k) push(k * 1000, 0, kRootId);

        while (!queue_.empty()) {
            const Event ev = queue_.top();
            queue_.pop();
            if (ev.prio == 0) {
                handle_tick(ev.t_ms);
                continue;
            }
            if (ev.t_ms >= duration_ms_) continue;
            switch (ev.prio) {
                case 1: handle_dis(ev.t_ms, ev.node); break;
                case 2: handle_dio(ev.t_ms, ev.node, /*one_shot=*/false, /*solicited=*/false); break;
                case 3: handle_dio(ev.t_ms, ev.node, /*one_shot=*/true, ev.flag == 1); break;
                case 4: handle_data(ev.t_ms, ev.node); break;
                default: break;
            }
        }

        std::stable_sort(records_.begin(), records_.end(), [](const PacketRecord& a, const PacketRecord& b) {
            if (a.time_s != b.time_s) return a.time_s < b.time_s;
            if (a.src != b.src) return a.src < b.src;
            return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        });
        trace.records = std::move(records_);
        trace.node_timeline = std::move(timeline_);
        return trace;
    }

private:
    bool in_window(std::int64_t t) const {
        return cfg_.attack != AttackKind::None && t >= win_start_ms_ && t < win_end_ms_;
    }

    bool is_attacker(NodeId i) const { return cfg_.attacker_ids.count(i) != 0; }

    void push(std::int64_t t, int prio, NodeId node, int flag = 0) {
        queue_.push(Event{t, prio, node, flag, seq_++});
    }

    void handle_tick(std::int64_t t) {
        if (cfg_.attack == AttackKind::DecreasedRank) {
            if (in_window(t)) {
                for (NodeId a : cfg_.attacker_ids) states_[a].rank = kMinRank;
                reevaluate_toward_attackers();
            } else if (t >= win_end_ms_) {
                // window over: attackers fall back to honest ranks
                for (NodeId a : cfg_.attacker_ids) {
                    const NodeId p = states_[a].parent;
                    if (p >= 0 && last_heard_[a][p] >= 0)
                        states_[a].rank = last_heard_[a][p] + kRankStep;
                }
            }
        }
        if (cfg_.attack == AttackKind::VersionNumber && version_adopted_) {
            global_repair();
            version_adopted_ = false;
        }
        timeline_.push_back(states_);
    }

    // DR window: every second, neighbors that heard the lying advertisement
    // adopt the attacker as parent when it beats their current parent. Nodes
    // with the attacker in their own sub-DODAG never do (RFC 6550-style
    // sub-DODAG exclusion), which keeps the parent forest acyclic.
    void reevaluate_toward_attackers() {
        for (NodeId a : cfg_.attacker_ids) {
            std::vector<bool> ancestor(n_, false);
            for (NodeId u = states_[a].parent; u >= 0; u = states_[u].parent) ancestor[u] = true;
            for (NodeId v : adj_[a]) {
                if (v == kRootId || v == a || ancestor[v] || is_attacker(v)) continue;
                if (states_[v].parent == a) continue;
                const int heard = last_heard_[v][a];
                const NodeId p = states_[v].parent;
                const int parent_adv = (p >= 0) ? last_heard_[v][p] : -1;
                if (heard == kMinRank && parent_adv > kMinRank) {
                    states_[v].parent = a;
                    states_[v].rank = kMinRank + kRankStep;
                }
            }
        }
    }

    // Version adoption triggers a global repair: ranks and parents are rebuilt
    // by a fresh formation over the (unchanged) adjacency.
    void global_repair() {
        std::vector<NodeState> fresh = form_dodag(adj_);
        for (int i = 0; i < n_; ++i) {
            states_[i].rank = fresh[i].rank;
            states_[i].parent = fresh[i].parent;
        }
        for (int i = 0; i < n_; ++i)
            for (int j : adj_[i]) last_heard_[i][j] = states_[j].rank;
    }

    void handle_dio(std::int64_t t, NodeId i, bool one_shot, bool solicited) {
        if (!one_shot) {
            const double u = jitter_rng_[i].uniform();
            const double interval_s = cfg_.dio_interval_s * (0.9 + 0.2 * u);
            push(t + to_ms(interval_s), 2, i);
        }

        int advert_rank = states_[i].rank;
        int advert_ver = states_[i].version;
        bool origin = solicited;
        if (in_window(t) && is_attacker(i)) {
            if (cfg_.attack == AttackKind::DecreasedRank) {
                advert_rank = kMinRank;
                origin = true;
            } else if (cfg_.attack == AttackKind::VersionNumber) {
                advert_ver = states_[i].version + 1;
                origin = true;
            }
        }
        if (repair_mark_until_[i] > t) origin = true;

        records_.push_back(PacketRecord{t / 1000.0, i, kBroadcast, MsgKind::DIO, kLenDio,
                                        advert_rank, advert_ver, origin});

        for (NodeId j : adj_[i]) {
            if (loss_rng_[i].uniform() < cfg_.loss_prob) continue;
            last_heard_[j][i] = advert_rank;
            if (advert_ver > states_[j].version) {
                states_[j].version = advert_ver;
                version_adopted_ = true;
                // the repair event marks the network's subsequent DIOs for 1 s
                for (int m = 0; m < n_; ++m)
                    repair_mark_until_[m] = std::max(repair_mark_until_[m], t + 1000);
            }
        }
    }

    void handle_dis(std::int64_t t, NodeId a) {
        if (in_window(t)) {
            records_.push_back(PacketRecord{t / 1000.0, a, kBroadcast, MsgKind::DIS, kLenDis,
                                            std::nullopt, std::nullopt, true});
            for (NodeId j : adj_[a]) {
                if (loss_rng_[a].uniform() < cfg_.loss_prob) continue;
                push(t + 10, 3, j, 1); // solicited DIO response
            }
        }
        const std::int64_t next = t + dis_period_ms_;
        if (next < win_end_ms_) push(next, 1, a);
    }

    void handle_data(std::int64_t t, NodeId origin) {
        push(t + data_period_ms_, 4, origin);
        states_[origin].sent += 1;
        NodeId cur = origin;
        int hop = 0;
        while (cur != kRootId && hop < n_) {
            const NodeId nxt = states_[cur].parent;
            if (nxt < 0) break;
            const bool sinkholing = cur != origin && is_attacker(cur) &&
                                    cfg_.attack == AttackKind::DecreasedRank && in_window(t);
            if (sinkholing && loss_rng_[cur].uniform() < 0.5) return; // sinkhole drop
            const std::int64_t t_hop = t + hop;
            if (t_hop >= duration_ms_) return;
            // traffic the sinkhole attracted and forwards is attack ground truth
            records_.push_back(PacketRecord{t_hop / 1000.0, cur, nxt, MsgKind::DATA, kLenData,
                                            std::nullopt, std::nullopt, sinkholing});
            if (loss_rng_[cur].uniform() < cfg_.loss_prob) return; // link loss
            cur = nxt;
            ++hop;
        }
        if (cur == kRootId) states_[origin].delivered += 1;
    }

    SimConfig cfg_;
    Adjacency adj_;
    std::vector<NodeState> states_;
    int n_;
    std::int64_t duration_ms_;
    std::int64_t win_start_ms_;
    std::int64_t win_end_ms_;
    Rng master_;
    std::vector<Rng> jitter_rng_, data_rng_, loss_rng_;
    std::vector<std::vector<int>> last_heard_;
    std::vector<std::int64_t> repair_mark_until_;
    std::vector<PacketRecord> records_;
    std::vector<std::vector<NodeState>> timeline_;
    std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
    std::uint64_t seq_ = 0;
    std::int64_t data_period_ms_ = 0;
    std::int64_t dis_period_ms_ = 0;
    bool version_adopted_ = false;
};

} // namespace

Trace simulate(const SimConfig& config) {
    config.validate();
    Simulation sim(config);
    return sim.run();
}

std::vector<bool> label_seconds(const Trace& trace) {
    const auto seconds = static_cast<std::size_t>(std::floor(trace.config.duration_s));
    std::vector<bool> labels(seconds, false);
    for (const PacketRecord& r : trace.records) {
        if (!r.attack_origin) continue;
        const auto k = static_cast<std::size_t>(r.time_s);
        if (k < seconds) labels[k] = true;
    }
    return labels;
}

void write_trace_csv(const Trace& trace, std::ostream& out) {
    out << "time_s,src,dst,kind,length_bytes,rank_advertised,version,attack_origin\n";
    char buf[64];
    for (const PacketRecord& r : trace.records) {
        std::snprintf(buf, sizeof(buf), "%.3f", r.time_s);
        out << buf << ',' << r.src << ',' << r.dst << ',' << msg_kind_name(r.kind) << ','
            << r.length_bytes << ',';
        if (r.rank_advertised) out << *r.rank_advertised;
        out << ',';
        if (r.version) out << *r.version;
        out << ',' << (r.attack_origin ? 1 : 0) << '\n';
    }
}

void write_trace_csv(const Trace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_trace_csv(trace, out);
    if (!out) throw IoError("write failed: " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

std::vector<PacketRecord> read_trace_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("trace CSV: missing header");
    std::vector<PacketRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 8)
            throw IoError("trace CSV row " + std::to_string(row) + ": expected 8 fields");
        try {
            PacketRecord r;
            r.time_s = std::stod(f[0]);
            r.src = std::stoi(f[1]);
            r.dst = std::stoi(f[2]);
            r.kind = msg_kind_from_name(f[3]);
            r.length_bytes = std::stoi(f[4]);
            if (!f[5].empty()) r.rank_advertised = std::stoi(f[5]);
            if (!f[6].empty()) r.version = std::stoi(f[6]);
            r.attack_origin = std::stoi(f[7]) != 0;
            records.push_back(r);
        } catch (const IoError&) {
            throw IoError("trace CSV row " + std::to_string(row) + ": bad kind field");
        } catch (const std::exception&) {
            throw IoError("trace CSV row " + std::to_string(row) + ": malformed value");
        }
    }
    return records;
}

std::vector<PacketRecord> read_trace_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return read_trace_records_csv(in);
}

std::string trace_meta_path(const std::string& csv_path) { return csv_path + ".meta.json"; }

namespace {

nlohmann::json config_to_json(const SimConfig& c) {
    return nlohmann::json{{"num_nodes", c.num_nodes},
                          {"area_side", c.area_side},
                          {"radio_range", c.radio_range},
                          {"duration_s", c.duration_s},
                          {"dio_interval_s", c.dio_interval_s},
                          {"data_rate_pps", c.data_rate_pps},
                          {"loss_prob", c.loss_prob},
                          {"attack", attack_kind_name(c.attack)},
                          {"attacker_ids", std::vector<NodeId>(c.attacker_ids.begin(), c.attacker_ids.end())},
                          {"attack_start_s", c.attack_start_s},
                          {"attack_end_s", c.attack_end_s},
                          {"attack_intensity", c.attack_intensity},
                          {"seed", c.seed}};
}

SimConfig config_from_json(const nlohmann::json& j) {
    SimConfig c;
    c.num_nodes = j.at("num_nodes").get<int>();
    c.area_side = j.at("area_side").get<double>();
    c.radio_range = j.at("radio_range").get<double>();
    c.duration_s = j.at("duration_s").get<double>();
    c.dio_interval_s = j.at("dio_interval_s").get<double>();
    c.data_rate_pps = j.at("data_rate_pps").get<double>();
    c.loss_prob = j.at("loss_prob").get<double>();
    c.attack = attack_kind_from_name(j.at("attack").get<std::string>());
    for (NodeId id : j.at("attacker_ids").get<std::vector<NodeId>>()) c.attacker_ids.insert(id);
    c.attack_start_s = j.at("attack_start_s").get<double>();
    c.attack_end_s = j.at("attack_end_s").get<double>();
    c.attack_intensity = j.at("attack_intensity").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

} // namespace

void save_trace(const Trace& trace, const std::string& csv_path) {
    write_trace_csv(trace, csv_path);
    nlohmann::json meta;
    meta["config"] = config_to_json(trace.config);
    auto& tl = meta["node_timeline"] = nlohmann::json::array();
    for (const auto& snap : trace.node_timeline) {
        nlohmann::json row = nlohmann::json::array();
        for (const NodeState& s : snap)
            row.push_back({s.rank, s.parent, s.version, s.delivered, s.sent});
        tl.push_back(std::move(row));
    }
    std::ofstream out(trace_meta_path(csv_path));
    if (!out) throw IoError("cannot open for writing: " + trace_meta_path(csv_path));
    out << meta.dump();
    if (!out) throw IoError("write failed: " + trace_meta_path(csv_path));
}

Trace load_trace(const std::string& csv_path) {
    Trace trace;
    trace.records = read_trace_records_csv(csv_path);
    std::ifstream in(trace_meta_path(csv_path));
    if (!in)
        throw IoError("missing trace sidecar " + trace_meta_path(csv_path) +
                      " (produced by the simulate command)");
    nlohmann::json meta;
    try {
        in >> meta;
        trace.config = config_from_json(meta.at("config"));
        for (const auto& row : meta.at("node_timeline")) {
            std::vector<NodeState> snap;
            for (const auto& s : row) {
                NodeState st;
                st.rank = s.at(0).get<int>();
                st.parent = s.at(1).get<NodeId>();
                st.version = s.at(2).get<int>();
                st.delivered = s.at(3).get<std::int64_t>();
                st.sent = s.at(4).get<std::int64_t>();
                snap.push_back(st);
            }
            trace.node_timeline.push_back(std::move(snap));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed trace sidecar: " + std::string(e.what()));
    }
    return trace;
}

} // namespace rplcil
