#include "rplcil/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rplcil/rng.hpp"

namespace rplcil {

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {
        "pkt_count",     "dio_count",       "dis_count",      "dao_count",
        "data_count",    "mean_len",        "max_len",        "dio_rate",
        "dis_rate",      "rank_changes",    "parent_switches", "delivery_ratio",
        "version_changes"};
    return names;
}

WindowedDataset extract_features(const Trace& trace) {
    const auto seconds = static_cast<std::size_t>(std::floor(trace.config.duration_s));
    if (trace.node_timeline.size() < seconds + 1)
        throw DataError("extract_features: trace lacks per-second node_timeline snapshots");

    const std::vector<bool> labels = label_seconds(trace);
    WindowedDataset ds;
    ds.rows.resize(seconds);

    std::vector<double> len_sum(seconds, 0.0);
    for (const PacketRecord& r : trace.records) {
        const auto k = static_cast<std::size_t>(r.time_s);
        if (k >= seconds) continue;
        FeatureVector& f = ds.rows[k].features;
        f.pkt_count += 1;
        switch (r.kind) {
            case MsgKind::DIO: f.dio_count += 1; break;
            case MsgKind::DIS: f.dis_count += 1; break;
            case MsgKind::DAO: f.dao_count += 1; break;
            case MsgKind::DATA: f.data_count += 1; break;
        }
        len_sum[k] += r.length_bytes;
        f.max_len = std::max(f.max_len, static_cast<double>(r.length_bytes));
    }

    for (std::size_t k = 0; k < seconds; ++k) {
        FeatureVector& f = ds.rows[k].features;
        f.mean_len = f.pkt_count > 0 ? len_sum[k] / f.pkt_count : 0.0;
        f.dio_rate = f.dio_count;
        f.dis_rate = f.dis_count;

        const auto& before = trace.node_timeline[k];
        const auto& after = trace.node_timeline[k + 1];
        std::int64_t sent = 0, delivered = 0;
        for (std::size_t i = 0; i < before.size(); ++i) {
            if (after[i].rank != before[i].rank) f.rank_changes += 1;
            if (after[i].parent != before[i].parent) f.parent_switches += 1;
            if (after[i].version != before[i].version) f.version_changes += 1;
            sent += after[i].sent - before[i].sent;
            delivered += after[i].delivered - before[i].delivered;
        }
        f.delivery_ratio = sent > 0
                               ? std::min(1.0, static_cast<double>(delivered) / static_cast<double>(sent))
                               : 1.0;

        ds.rows[k].label = labels[k] ? 1 : 0;
        ds.rows[k].attack_kind = labels[k] ? trace.config.attack : AttackKind::None;
    }
    return ds;
}

std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& dataset,
                                                  double train_frac, std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw SplitError("train_frac must lie in (0, 1)");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < dataset.rows.size(); ++i)
        (dataset.rows[i].label == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw SplitError("split needs at least one row of each class");

    WindowedDataset train, test;
    train.feature_order = dataset.feature_order;
    test.feature_order = dataset.feature_order;

    Rng rng(seed);
    auto split_class = [&](std::vector<std::size_t>& idx) {
        rng.shuffle(idx);
        const auto n_train = static_cast<std::size_t>(std::floor(train_frac * idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_train ? train : test).rows.push_back(dataset.rows[idx[i]]);
    };
    split_class(neg);
    split_class(pos);
    return {std::move(train), std::move(test)};
}

WindowedDataset merge(const WindowedDataset& a, const WindowedDataset& b) {
    if (a.feature_order != b.feature_order)
        throw SchemaError("merge: feature_order mismatch");
    WindowedDataset out;
    out.feature_order = a.feature_order;
    out.rows = a.rows;
    out.rows.insert(out.rows.end(), b.rows.begin(), b.rows.end());
    return out;
}

namespace {

void append_value(std::string& line, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    line += buf;
}

} // namespace

void write_dataset_csv(const WindowedDataset& dataset, std::ostream& out) {
    std::string header;
    for (const auto& name : dataset.feature_order) {
        header += name;
        header += ',';
    }
    header += "label,attack_kind\n";
    out << header;
    for (const DatasetRow& row : dataset.rows) {
        std::string line;
        for (double v : row.features.to_array()) {
            append_value(line, v);
            line += ',';
        }
        line += std::to_string(row.label);
        line += ',';
        line += attack_kind_name(row.attack_kind);
        line += '\n';
        out << line;
    }
}

void write_dataset_csv(const WindowedDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_dataset_csv(dataset, out);
    if (!out) throw IoError("write failed: " + path);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
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

WindowedDataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("dataset CSV: missing header");
    const auto header = split_line(line);
    const auto& names = feature_names();
    if (header.size() != names.size() + 2)
        throw SchemaError("dataset CSV: unexpected column count");
    for (std::size_t i = 0; i < names.size(); ++i)
        if (header[i] != names[i])
            throw SchemaError("dataset CSV: unexpected feature column '" + header[i] + "'");
    if (header[names.size()] != "label" || header[names.size() + 1] != "attack_kind")
        throw SchemaError("dataset CSV: label/attack_kind columns missing");

    WindowedDataset ds;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        const auto f = split_line(line);
        if (f.size() != names.size() + 2)
            throw IoError("dataset CSV row " + std::to_string(row_no) + ": bad field count");
        try {
            std::array<double, kNumFeatures> values{};
            for (int i = 0; i < kNumFeatures; ++i) values[i] = std::stod(f[i]);
            DatasetRow row;
            row.features = FeatureVector::from_array(values);
            row.label = std::stoi(f[kNumFeatures]);
            row.attack_kind = attack_kind_from_name(f[kNumFeatures + 1]);
            if ((row.attack_kind == AttackKind::None) != (row.label == 0))
                throw SchemaError("dataset CSV row " + std::to_string(row_no) +
                                  ": attack_kind must be NONE iff label is 0");
            ds.rows.push_back(row);
        } catch (const SchemaError&) {
            throw;
        } catch (const std::exception&) {
            throw IoError("dataset CSV row " + std::to_string(row_no) + ": malformed value");
        }
    }
    return ds;
}

WindowedDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return read_dataset_csv(in);
}

} // namespace rplcil
