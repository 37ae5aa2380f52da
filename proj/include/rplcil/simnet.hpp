#ifndef RPLCIL_SIMNET_HPP
#define RPLCIL_SIMNET_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rplcil/errors.hpp"

namespace rplcil {

using NodeId = int;

constexpr NodeId kRootId = 0;
constexpr NodeId kBroadcast = -1;
constexpr int kMinRank = 128;  // RPL MinHopRankIncrease analogue
constexpr int kRankStep = 128;

enum class AttackKind { None, HelloFlood, DecreasedRank, VersionNumber };

std::string attack_kind_name(AttackKind kind);
AttackKind attack_kind_from_name(const std::string& name);

struct SimConfig {
    int num_nodes = 20;
    double area_side = 100.0;     // metres
    double radio_range = 35.0;    // metres
    double duration_s = 300.0;
    double dio_interval_s = 10.0; // simplified trickle base period
    double data_rate_pps = 0.5;   // per non-root node, toward root
    double loss_prob = 0.05;      // per-hop / per-receiver
    AttackKind attack = AttackKind::None;
    std::set<NodeId> attacker_ids;
    double attack_start_s = 60.0;
    double attack_end_s = 240.0;
    double attack_intensity = 10.0; // HF message rate factor
    std::uint64_t seed = 3;

    void validate() const;
};

enum class MsgKind { DIO, DIS, DAO, DATA };

std::string msg_kind_name(MsgKind kind);
MsgKind msg_kind_from_name(const std::string& name);

struct PacketRecord {
    double time_s = 0.0;
    NodeId src = 0;
    NodeId dst = kBroadcast; // kBroadcast for link-local multicast
    MsgKind kind = MsgKind::DIO;
    int length_bytes = 0;
    std::optional<int> rank_advertised; // DIO only
    std::optional<int> version;         // DIO only
    bool attack_origin = false;

    bool operator==(const PacketRecord&) const = default;
};

struct NodeState {
    int rank = kMinRank;
    NodeId parent = -1; // -1 = none (root)
    int version = 0;
    std::int64_t delivered = 0; // cumulative DATA originated here that reached the root
    std::int64_t sent = 0;      // cumulative DATA originated here

    bool operator==(const NodeState&) const = default;
};

using Adjacency = std::vector<std::vector<NodeId>>; // sorted neighbor lists

struct Trace {
    SimConfig config;
    std::vector<PacketRecord> records; // sorted by (time_s, src, kind)
    // node_timeline[k][i] = state of node i at t = k seconds; index 0 is the
    // freshly formed DODAG, so there are floor(duration_s)+1 snapshots.
    std::vector<std::vector<NodeState>> node_timeline;
};

// Seeded uniform placement; edge iff distance <= radio_range. Doubles the
// range (up to 10 times) while the graph is disconnected.
Adjacency build_topology(const SimConfig& config);

// BFS expansion from the root: rank = 128 * (hop distance + 1), parent =
// neighbor with minimal rank, ties to the lowest id.
std::vector<NodeState> form_dodag(const Adjacency& adjacency);

Trace simulate(const SimConfig& config);

// Second k is malicious iff some record with attack_origin lands in [k, k+1).
std::vector<bool> label_seconds(const Trace& trace);

void write_trace_csv(const Trace& trace, std::ostream& out);
void write_trace_csv(const Trace& trace, const std::string& path);
// Reads records only; node_timeline is not part of the CSV schema.
std::vector<PacketRecord> read_trace_records_csv(std::istream& in);
std::vector<PacketRecord> read_trace_records_csv(const std::string& path);

// The record CSV alone cannot reconstruct per-second node state, so traces
// persist as a pair: <path> (records, schema above) and <path>.meta.json
// (config + node_timeline). save_trace/load_trace handle both files.
std::string trace_meta_path(const std::string& csv_path);
void save_trace(const Trace& trace, const std::string& csv_path);
Trace load_trace(const std::string& csv_path);

} // namespace rplcil

#endif
