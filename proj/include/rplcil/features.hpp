#ifndef RPLCIL_FEATURES_HPP
#define RPLCIL_FEATURES_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rplcil/errors.hpp"
#include "rplcil/simnet.hpp"

namespace rplcil {

constexpr int kNumFeatures = 13;

// One-second network-wide aggregation window.
struct FeatureVector {
    double pkt_count = 0;
    double dio_count = 0;
    double dis_count = 0;
    double dao_count = 0;
    double data_count = 0;
    double mean_len = 0;
    double max_len = 0;
    double dio_rate = 0;
    double dis_rate = 0;
    double rank_changes = 0;
    double parent_switches = 0;
    double delivery_ratio = 1.0;
    double version_changes = 0;

    std::array<double, kNumFeatures> to_array() const {
        return {pkt_count, dio_count,    dis_count,       dao_count,      data_count,
                mean_len,  max_len,      dio_rate,        dis_rate,       rank_changes,
                parent_switches, delivery_ratio, version_changes};
    }
    static FeatureVector from_array(const std::array<double, kNumFeatures>& a) {
        FeatureVector f;
        f.pkt_count = a[0];
        f.dio_count = a[1];
        f.dis_count = a[2];
        f.dao_count = a[3];
        f.data_count = a[4];
        f.mean_len = a[5];
        f.max_len = a[6];
        f.dio_rate = a[7];
        f.dis_rate = a[8];
        f.rank_changes = a[9];
        f.parent_switches = a[10];
        f.delivery_ratio = a[11];
        f.version_changes = a[12];
        return f;
    }
};

const std::vector<std::string>& feature_names();

struct DatasetRow {
    FeatureVector features;
    int label = 0; // 0 benign, 1 malicious
    AttackKind attack_kind = AttackKind::None;
};

struct WindowedDataset {
    std::vector<std::string> feature_order; // fixed 13-name schema
    std::vector<DatasetRow> rows;

    WindowedDataset() : feature_order(feature_names()) {}
};

// One row per whole second; counts from records in [k, k+1), state deltas from
// consecutive node_timeline snapshots.
WindowedDataset extract_features(const Trace& trace);

// Stratified by label, floor(train_frac * n) per class into train, seeded
// shuffle. Throws SplitError when a class cannot contribute a test row.
std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& dataset,
                                                  double train_frac, std::uint64_t seed);

WindowedDataset merge(const WindowedDataset& a, const WindowedDataset& b);

void write_dataset_csv(const WindowedDataset& dataset, std::ostream& out);
void write_dataset_csv(const WindowedDataset& dataset, const std::string& path);
WindowedDataset read_dataset_csv(std::istream& in);
WindowedDataset read_dataset_csv(const std::string& path);

} // namespace rplcil

#endif
