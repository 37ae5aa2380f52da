#ifndef RPLCIL_CIL_HPP
#define RPLCIL_CIL_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rplcil/features.hpp"
#include "rplcil/model_io.hpp"
#include "rplcil/rng.hpp"
#include "rplcil/train_config.hpp"

namespace rplcil {

enum class ClassKey { Benign, HF, DR, VN };

std::string class_key_name(ClassKey key);
ClassKey class_key_from_name(const std::string& name);
ClassKey class_key_for_row(const DatasetRow& row);

// Bounded class-balanced replay memory. Per-class reservoir sampling keeps
// long streams uniformly represented; stored counts never differ by more than
// one across nonempty classes and never exceed the capacity.
class ExemplarBuffer {
public:
    explicit ExemplarBuffer(std::size_t capacity, std::uint64_t seed = 3);

    void insert(const DatasetRow& row, ClassKey key);
    void insert_labeled(const DatasetRow& row) { insert(row, class_key_for_row(row)); }

    // Round-robin across classes, seeded within-class order. Returns
    // min(n, stored) rows; throws EmptyBufferError when nothing is stored.
    std::vector<DatasetRow> sample(std::size_t n) const;

    std::size_t capacity() const { return capacity_; }
    std::size_t total() const;
    bool empty() const { return total() == 0; }
    std::map<ClassKey, std::size_t> counts() const;
    std::vector<DatasetRow> rows_of(ClassKey key) const;
    WindowedDataset contents() const;

    void save_csv(const std::string& path) const;
    static ExemplarBuffer load_csv(const std::string& path, std::size_t capacity,
                                   std::uint64_t seed = 3);

private:
    struct Stored {
        DatasetRow row;
        std::uint64_t seq; // insertion order, for oldest-first eviction
    };

    std::size_t quota(ClassKey key) const;
    void enforce_bounds();

    std::size_t capacity_;
    std::uint64_t seed_;
    Rng rng_;
    std::uint64_t next_seq_ = 0;
    std::array<std::vector<Stored>, 4> slots_;
    std::array<std::uint64_t, 4> stream_count_{0, 0, 0, 0};
};

struct NoveltyState {
    std::array<double, kNumFeatures> train_mean{};
    std::array<double, kNumFeatures> train_std{};
    std::uint64_t seed = 3;
    // rolling cluster-stability tracking across batches
    bool have_prev_centroid = false;
    std::array<double, kNumFeatures> prev_centroid{};
    int stability_count = 0;
};

NoveltyState make_novelty_state(const WindowedDataset& training_data, std::uint64_t seed = 3);

struct NoveltyReport {
    bool declared = false;
    WindowedDataset cluster_rows;
    std::array<double, kNumFeatures> centroid{};
    int stability_count = 0;
};

// Flags uncertain (prob in [0.35, 0.65]) or far-out (RMS z-score > 3) rows,
// clusters them with seeded 2-means, and declares novelty once a cluster of
// at least 20 rows keeps its centroid within 10% over 3 consecutive batches.
NoveltyReport detect_novelty(const AnyModel& model, const WindowedDataset& batch,
                             NoveltyState& state);

// Uncertainty + diversity sampling: top 2k rows by predictive entropy, then
// k-center greedy (Euclidean over z-scored features) down to k.
WindowedDataset select_seed_set(const WindowedDataset& candidates, const AnyModel& model,
                                std::size_t k);

// The deployment-loop update step. MLP: student initialized from the frozen teacher,
// trained on new data plus a 1:1 replay sample under CE + KD + parameter
// regularization. GBDT: warm-started rounds on the same union. The new rows
// are inserted into the buffer afterwards. The input model is not mutated.
AnyModel incremental_update(const AnyModel& model, const WindowedDataset& new_data,
                            ExemplarBuffer& buf, const UpdatePlan& plan, const TrainConfig& cfg);

} // namespace rplcil

#endif
