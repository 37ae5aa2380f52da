#include "rplcil/cil.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace rplcil {

namespace {

constexpr double kUncertainLo = 0.35;
constexpr double kUncertainHi = 0.65;
constexpr double kZScoreThreshold = 3.0;
// A lone capped dimension still clears the RMS threshold (12/sqrt(13) > 3)
// without letting constant-in-training features dwarf the k-means geometry.
constexpr double kZClamp = 12.0;
constexpr std::size_t kClusterMinRows = 20;
constexpr double kCentroidDriftLimit = 0.10;
constexpr int kStableBatches = 3;
constexpr int kKMeansIters = 25;

} // namespace

std::string class_key_name(ClassKey key) {
    switch (key) {
        case ClassKey::Benign: return "BENIGN";
        case ClassKey::HF: return "HF";
        case ClassKey::DR: return "DR";
        case ClassKey::VN: return "VN";
    }
    return "BENIGN";
}

ClassKey class_key_from_name(const std::string& name) {
    if (name == "BENIGN") return ClassKey::Benign;
    if (name == "HF") return ClassKey::HF;
    if (name == "DR") return ClassKey::DR;
    if (name == "VN") return ClassKey::VN;
    throw IoError("unknown class key: " + name);
}

ClassKey class_key_for_row(const DatasetRow& row) {
    if (row.label == 0) return ClassKey::Benign;
    switch (row.attack_kind) {
        case AttackKind::HelloFlood: return ClassKey::HF;
        case AttackKind::DecreasedRank: return ClassKey::DR;
        case AttackKind::VersionNumber: return ClassKey::VN;
        case AttackKind::None: break;
    }
    throw DataError("malicious row without an attack kind");
}

ExemplarBuffer::ExemplarBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), seed_(seed), rng_(seed) {
    if (capacity_ == 0) throw ConfigError("exemplar buffer capacity must be positive");
}

std::size_t ExemplarBuffer::total() const {
    std::size_t acc = 0;
    for (const auto& s : slots_) acc += s.size();
    return acc;
}

std::map<ClassKey, std::size_t> ExemplarBuffer::counts() const {
    std::map<ClassKey, std::size_t> out;
    for (int k = 0; k < 4; ++k)
        if (!slots_[k].empty()) out[static_cast<ClassKey>(k)] = slots_[k].size();
    return out;
}

std::vector<DatasetRow> ExemplarBuffer::rows_of(ClassKey key) const {
    std::vector<DatasetRow> out;
    for (const Stored& s : slots_[static_cast<int>(key)]) out.push_back(s.row);
    return out;
}

WindowedDataset ExemplarBuffer::contents() const {
    WindowedDataset ds;
    for (const auto& slot : slots_)
        for (const Stored& s : slot) ds.rows.push_back(s.row);
    return ds;
}

// Even split of the capacity across observed classes, remainder to the lower
// class keys. Classes at or above quota take the reservoir path.
std::size_t ExemplarBuffer::quota(ClassKey key) const {
    std::size_t observed = 0;
    for (int k = 0; k < 4; ++k) observed += stream_count_[k] > 0 ? 1 : 0;
    if (observed == 0) return capacity_;
    const std::size_t base = capacity_ / observed;
    std::size_t rem = capacity_ % observed;
    for (int k = 0; k < 4; ++k) {
        if (stream_count_[k] == 0) continue;
        const std::size_t q = base + (rem > 0 ? 1 : 0);
        if (rem > 0) --rem;
        if (static_cast<ClassKey>(k) == key) return q;
    }
    return base;
}

void ExemplarBuffer::insert(const DatasetRow& row, ClassKey key) {
    auto& slot = slots_[static_cast<int>(key)];
    stream_count_[static_cast<int>(key)] += 1;
    const std::size_t q = quota(key);
    if (slot.size() < q) {
        slot.push_back(Stored{row, next_seq_++});
        enforce_bounds();
    } else if (q > 0) {
        // classic algorithm-R replacement keeps the stored rows a uniform
        // sample of the class stream
        const auto j = rng_.uniform_int(stream_count_[static_cast<int>(key)]);
        if (j < q) slot[static_cast<std::size_t>(j)] = Stored{row, next_seq_++};
    }
}

// Sheds rows when a newly observed class shrank the per-class quotas (or the
// capacity is exceeded): the largest class loses its oldest row, ties going
// to the class holding the globally oldest insertion. Classes whose streams
// are too short to fill their quota simply hold fewer rows.
void ExemplarBuffer::enforce_bounds() {
    for (;;) {
        std::size_t total_rows = 0, max_count = 0;
        bool over_quota = false;
        for (int k = 0; k < 4; ++k) {
            total_rows += slots_[k].size();
            max_count = std::max(max_count, slots_[k].size());
            if (slots_[k].size() > quota(static_cast<ClassKey>(k))) over_quota = true;
        }
        if (total_rows <= capacity_ && !over_quota) return;

        // victims come from over-quota classes when the quota shrank, else
        // from the largest class; ties go to the globally oldest insertion
        std::size_t victim_size = 0;
        if (over_quota) {
            for (int k = 0; k < 4; ++k)
                if (slots_[k].size() > quota(static_cast<ClassKey>(k)))
                    victim_size = std::max(victim_size, slots_[k].size());
        } else {
            victim_size = max_count;
        }
        int victim_class = -1;
        std::uint64_t victim_seq = 0;
        for (int k = 0; k < 4; ++k) {
            if (slots_[k].size() != victim_size || slots_[k].empty()) continue;
            if (over_quota && slots_[k].size() <= quota(static_cast<ClassKey>(k))) continue;
            std::uint64_t oldest = std::numeric_limits<std::uint64_t>::max();
            for (const Stored& s : slots_[k]) oldest = std::min(oldest, s.seq);
            if (victim_class < 0 || oldest < victim_seq) {
                victim_class = k;
                victim_seq = oldest;
            }
        }
        auto& slot = slots_[victim_class];
        const auto it = std::min_element(slot.begin(), slot.end(),
                                         [](const Stored& a, const Stored& b) { return a.seq < b.seq; });
        slot.erase(it);
    }
}

std::vector<DatasetRow> ExemplarBuffer::sample(std::size_t n) const {
    if (empty()) throw EmptyBufferError("exemplar buffer is empty");
    // seeded within-class order, stable across repeated calls
    std::array<std::vector<std::size_t>, 4> order;
    Rng rng(seed_ ^ 0x5A3E1Du);
    for (int k = 0; k < 4; ++k) {
        order[k].resize(slots_[k].size());
        std::iota(order[k].begin(), order[k].end(), 0);
        rng.shuffle(order[k]);
    }
    std::vector<DatasetRow> out;
    std::array<std::size_t, 4> cursor{0, 0, 0, 0};
    while (out.size() < n) {
        bool advanced = false;
        for (int k = 0; k < 4 && out.size() < n; ++k) {
            if (cursor[k] >= order[k].size()) continue;
            out.push_back(slots_[k][order[k][cursor[k]++]].row);
            advanced = true;
        }
        if (!advanced) break;
    }
    return out;
}

void ExemplarBuffer::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    std::ostringstream header;
    for (const auto& name : feature_names()) header << name << ',';
    header << "label,attack_kind,class_key\n";
    out << header.str();
    for (int k = 0; k < 4; ++k) {
        for (const Stored& s : slots_[k]) {
            char buf[40];
            for (double v : s.row.features.to_array()) {
                std::snprintf(buf, sizeof(buf), "%.9g", v);
                out << buf << ',';
            }
            out << s.row.label << ',' << attack_kind_name(s.row.attack_kind) << ','
                << class_key_name(static_cast<ClassKey>(k)) << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

ExemplarBuffer ExemplarBuffer::load_csv(const std::string& path, std::size_t capacity,
                                        std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("buffer CSV: missing header");

    ExemplarBuffer buf(capacity, seed);
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                f.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur.push_back(c);
            }
        }
        f.push_back(cur);
        if (f.size() != static_cast<std::size_t>(kNumFeatures) + 3)
            throw IoError("buffer CSV row " + std::to_string(row_no) + ": bad field count");
        try {
            std::array<double, kNumFeatures> values{};
            for (int i = 0; i < kNumFeatures; ++i) values[i] = std::stod(f[i]);
            DatasetRow row;
            row.features = FeatureVector::from_array(values);
            row.label = std::stoi(f[kNumFeatures]);
            row.attack_kind = attack_kind_from_name(f[kNumFeatures + 1]);
            const ClassKey key = class_key_from_name(f[kNumFeatures + 2]);
            // restore the stored set verbatim; the file is grouped by class,
            // so routing rows through insert()'s balancing would distort it
            auto& slot = buf.slots_[static_cast<int>(key)];
            slot.push_back(Stored{row, buf.next_seq_++});
            buf.stream_count_[static_cast<int>(key)] += 1;
        } catch (const IoError&) {
            throw;
        } catch (const std::exception&) {
            throw IoError("buffer CSV row " + std::to_string(row_no) + ": malformed value");
        }
    }
    if (buf.total() > capacity)
        throw IoError("buffer CSV holds more rows than the configured capacity");
    return buf;
}

namespace {

std::array<double, kNumFeatures> zscore(const std::array<double, kNumFeatures>& x,
                                        const std::array<double, kNumFeatures>& mean,
                                        const std::array<double, kNumFeatures>& sd) {
    std::array<double, kNumFeatures> z{};
    for (int i = 0; i < kNumFeatures; ++i) {
        const double s = sd[i] > 1e-9 ? sd[i] : 1e-9;
        z[i] = std::clamp((x[i] - mean[i]) / s, -kZClamp, kZClamp);
    }
    return z;
}

double rms_z(const std::array<double, kNumFeatures>& z) {
    double acc = 0.0;
    for (double v : z) acc += v * v;
    return std::sqrt(acc / kNumFeatures);
}

double dist2(const std::array<double, kNumFeatures>& a, const std::array<double, kNumFeatures>& b) {
    double acc = 0.0;
    for (int i = 0; i < kNumFeatures; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void mean_std(const std::vector<std::array<double, kNumFeatures>>& xs,
              std::array<double, kNumFeatures>& mean, std::array<double, kNumFeatures>& sd) {
    mean.fill(0.0);
    sd.fill(0.0);
    if (xs.empty()) return;
    for (const auto& x : xs)
        for (int i = 0; i < kNumFeatures; ++i) mean[i] += x[i];
    for (int i = 0; i < kNumFeatures; ++i) mean[i] /= static_cast<double>(xs.size());
    for (const auto& x : xs)
        for (int i = 0; i < kNumFeatures; ++i) {
            const double d = x[i] - mean[i];
            sd[i] += d * d;
        }
    for (int i = 0; i < kNumFeatures; ++i) sd[i] = std::sqrt(sd[i] / static_cast<double>(xs.size()));
}

} // namespace

NoveltyState make_novelty_state(const WindowedDataset& training_data, std::uint64_t seed) {
    if (training_data.rows.empty()) throw DataError("novelty state needs training data");
    std::vector<std::array<double, kNumFeatures>> xs;
    for (const DatasetRow& r : training_data.rows) xs.push_back(r.features.to_array());
    NoveltyState state;
    state.seed = seed;
    mean_std(xs, state.train_mean, state.train_std);
    return state;
}

NoveltyReport detect_novelty(const AnyModel& model, const WindowedDataset& batch,
                             NoveltyState& state) {
    NoveltyReport report;

    std::vector<std::size_t> flagged;
    std::vector<std::array<double, kNumFeatures>> flagged_z;
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
        const auto x = batch.rows[i].features.to_array();
        const double p = predict_prob(model, batch.rows[i].features);
        const auto z = zscore(x, state.train_mean, state.train_std);
        if ((p >= kUncertainLo && p <= kUncertainHi) || rms_z(z) > kZScoreThreshold) {
            flagged.push_back(i);
            flagged_z.push_back(z);
        }
    }

    if (flagged.size() < kClusterMinRows) {
        state.stability_count = 0;
        state.have_prev_centroid = false;
        return report;
    }

    // seeded 2-means over the z-scored flagged rows
    Rng rng(state.seed ^ 0xC1u);
    std::array<std::array<double, kNumFeatures>, 2> centers;
    const auto first = static_cast<std::size_t>(rng.uniform_int(flagged_z.size()));
    centers[0] = flagged_z[first];
    std::size_t far_idx = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < flagged_z.size(); ++i) {
        const double d = dist2(flagged_z[i], centers[0]);
        if (d > far_d) {
            far_d = d;
            far_idx = i;
        }
    }
    centers[1] = flagged_z[far_idx];

    std::vector<int> assign(flagged_z.size(), 0);
    for (int iter = 0; iter < kKMeansIters; ++iter) {
        for (std::size_t i = 0; i < flagged_z.size(); ++i)
            assign[i] = dist2(flagged_z[i], centers[0]) <= dist2(flagged_z[i], centers[1]) ? 0 : 1;
        for (int c = 0; c < 2; ++c) {
            std::array<double, kNumFeatures> acc{};
            std::size_t count = 0;
            for (std::size_t i = 0; i < flagged_z.size(); ++i) {
                if (assign[i] != c) continue;
                for (int f = 0; f < kNumFeatures; ++f) acc[f] += flagged_z[i][f];
                ++count;
            }
            if (count == 0) {
                // re-seed an emptied cluster with the farthest point from the other
                std::size_t far = 0;
                double best = -1.0;
                for (std::size_t i = 0; i < flagged_z.size(); ++i) {
                    const double d = dist2(flagged_z[i], centers[1 - c]);
                    if (d > best) {
                        best = d;
                        far = i;
                    }
                }
                centers[c] = flagged_z[far];
                continue;
            }
            for (int f = 0; f < kNumFeatures; ++f) centers[c][f] = acc[f] / static_cast<double>(count);
        }
    }

    std::size_t size0 = 0;
    for (int a : assign) size0 += a == 0 ? 1 : 0;
    const int big = size0 >= assign.size() - size0 ? 0 : 1;
    std::vector<std::size_t> cluster_rows;
    for (std::size_t i = 0; i < flagged.size(); ++i)
        if (assign[i] == big) cluster_rows.push_back(flagged[i]);

    if (cluster_rows.size() < kClusterMinRows) {
        state.stability_count = 0;
        state.have_prev_centroid = false;
        return report;
    }

    std::array<double, kNumFeatures> centroid{};
    for (std::size_t i : cluster_rows) {
        const auto x = batch.rows[i].features.to_array();
        for (int f = 0; f < kNumFeatures; ++f) centroid[f] += x[f];
    }
    for (int f = 0; f < kNumFeatures; ++f) centroid[f] /= static_cast<double>(cluster_rows.size());

    if (state.have_prev_centroid) {
        const double move = std::sqrt(dist2(centroid, state.prev_centroid));
        const double base = std::sqrt(dist2(state.prev_centroid, std::array<double, kNumFeatures>{})) + 1e-12;
        state.stability_count = (move / base < kCentroidDriftLimit) ? state.stability_count + 1 : 1;
    } else {
        state.stability_count = 1;
    }
    state.prev_centroid = centroid;
    state.have_prev_centroid = true;

    report.centroid = centroid;
    report.stability_count = state.stability_count;
    report.declared = state.stability_count >= kStableBatches;
    for (std::size_t i : cluster_rows) report.cluster_rows.rows.push_back(batch.rows[i]);
    return report;
}

WindowedDataset select_seed_set(const WindowedDataset& candidates, const AnyModel& model,
                                std::size_t k) {
    if (candidates.rows.empty()) throw DataError("select_seed_set needs candidates");
    if (k == 0) throw ConfigError("select_seed_set needs k >= 1");

    WindowedDataset out;
    out.feature_order = candidates.feature_order;
    if (k >= candidates.rows.size()) {
        out.rows = candidates.rows;
        return out;
    }

    std::vector<double> entropy(candidates.rows.size());
    for (std::size_t i = 0; i < candidates.rows.size(); ++i) {
        const double p = predict_prob(model, candidates.rows[i].features);
        double h = 0.0;
        if (p > 0.0 && p < 1.0) h = -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
        entropy[i] = h;
    }
    std::vector<std::size_t> pool(candidates.rows.size());
    std::iota(pool.begin(), pool.end(), 0);
    std::stable_sort(pool.begin(), pool.end(),
                     [&](std::size_t a, std::size_t b) { return entropy[a] > entropy[b]; });
    pool.resize(std::min(pool.size(), 2 * k));

    // z-scoring over the full candidate set for the diversity metric
    std::vector<std::array<double, kNumFeatures>> xs;
    for (const DatasetRow& r : candidates.rows) xs.push_back(r.features.to_array());
    std::array<double, kNumFeatures> mean{}, sd{};
    mean_std(xs, mean, sd);
    std::vector<std::array<double, kNumFeatures>> zs;
    for (const auto& x : xs) zs.push_back(zscore(x, mean, sd));

    // k-center greedy anchored at the most uncertain candidate
    std::vector<std::size_t> chosen{pool[0]};
    std::vector<double> min_d(pool.size(), std::numeric_limits<double>::infinity());
    while (chosen.size() < k) {
        std::size_t best_pos = 0;
        double best_d = -1.0;
        for (std::size_t pos = 0; pos < pool.size(); ++pos) {
            const std::size_t i = pool[pos];
            if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
            min_d[pos] = std::min(min_d[pos], dist2(zs[i], zs[chosen.back()]));
            if (min_d[pos] > best_d) {
                best_d = min_d[pos];
                best_pos = pos;
            }
        }
        chosen.push_back(pool[best_pos]);
    }
    for (std::size_t i : chosen) out.rows.push_back(candidates.rows[i]);
    return out;
}

AnyModel incremental_update(const AnyModel& model, const WindowedDataset& new_data,
                            ExemplarBuffer& buf, const UpdatePlan& plan, const TrainConfig& cfg) {
    plan.validate();
    if (new_data.rows.empty()) throw DataError("incremental_update needs nonempty new data");

    const std::vector<DatasetRow> replay = buf.empty() ? std::vector<DatasetRow>{}
                                                       : buf.sample(new_data.rows.size());
    WindowedDataset union_data;
    union_data.feature_order = new_data.feature_order;
    union_data.rows = new_data.rows;
    union_data.rows.insert(union_data.rows.end(), replay.begin(), replay.end());

    AnyModel updated;
    if (const auto* gbdt = std::get_if<GbdtModel>(&model)) {
        TrainConfig round_cfg = cfg;
        round_cfg.n_rounds = plan.update_rounds;
        updated = gbdt_warm_start(*gbdt, union_data, round_cfg);
    } else {
        const MlpModel& teacher = std::get<MlpModel>(model);
        MlpModel student = teacher; // student starts from the teacher's weights

        MlpBatch batch = to_batch(union_data);
        batch.teacher_logits.reserve(batch.size());
        for (const auto& x : batch.x) batch.teacher_logits.push_back(mlp_logits(teacher, x));
        // distill on the replayed exemplars, where the teacher is trustworthy;
        // the new class trains on plain cross-entropy
        batch.kd_mask.assign(batch.size(), 0);
        for (std::size_t i = new_data.rows.size(); i < batch.size(); ++i) batch.kd_mask[i] = 1;

        std::vector<double> fisher;
        MlpLossConfig loss_cfg;
        loss_cfg.lambda_kd = plan.lambda_kd;
        loss_cfg.temperature = plan.temperature;
        loss_cfg.gamma_reg = plan.gamma_reg;
        loss_cfg.reg_kind = plan.reg_kind;
        loss_cfg.anchor = &teacher.params;
        if (plan.reg_kind == RegKind::EWC) {
            // Fisher estimated on the exemplars, honoring the bounded memory
            const WindowedDataset exemplars = buf.contents();
            fisher = exemplars.rows.empty() ? std::vector<double>(teacher.params.size(), 0.0)
                                            : estimate_fisher(teacher, exemplars);
            loss_cfg.fisher = &fisher;
        }
        mlp_fit(student, batch, cfg, plan.update_epochs, loss_cfg, cfg.seed ^ 0x17u);
        updated = std::move(student);
    }

    for (const DatasetRow& row : new_data.rows) buf.insert_labeled(row);
    return updated;
}

} // namespace rplcil
