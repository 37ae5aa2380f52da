#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rplcil/harness.hpp"
#include "rplcil/model_io.hpp"
#include "rplcil/rng.hpp"

using namespace rplcil;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

WindowedDataset training_data() {
    Rng rng(2);
    WindowedDataset ds;
    for (int i = 0; i < 80; ++i) {
        DatasetRow benign;
        benign.features.pkt_count = rng.uniform(0.0, 30.0);
        benign.features.delivery_ratio = rng.uniform(0.9, 1.0);
        ds.rows.push_back(benign);
        DatasetRow malicious;
        malicious.features.pkt_count = rng.uniform(25.0, 80.0);
        malicious.features.dis_rate = rng.uniform(0.0, 10.0);
        malicious.features.delivery_ratio = rng.uniform(0.4, 1.0);
        malicious.label = 1;
        malicious.attack_kind = AttackKind::HelloFlood;
        ds.rows.push_back(malicious);
    }
    return ds;
}

FeatureVector random_vector(Rng& rng) {
    std::array<double, kNumFeatures> x{};
    for (double& v : x) v = rng.uniform(-5.0, 60.0);
    return FeatureVector::from_array(x);
}

} // namespace

TEST_CASE("save/load reproduces predictions bit-exactly on 1000 random vectors") {
    const WindowedDataset ds = training_data();
    TrainConfig cfg;
    cfg.epochs = 30;

    for (ModelKind kind : {ModelKind::GBDT, ModelKind::MLP}) {
        const AnyModel model = train_model(kind, ds, cfg);
        const std::string path = tmp_path("rplcil_model_" + model_kind_name(kind) + ".bin");
        save_model(model, path);
        const AnyModel back = load_model(path);
        CHECK(model_kind(back) == kind);

        Rng rng(77);
        for (int i = 0; i < 1000; ++i) {
            const FeatureVector x = random_vector(rng);
            CHECK(predict_prob(model, x) == predict_prob(back, x));
            const LogitPair a = predict_logits(model, x);
            const LogitPair b = predict_logits(back, x);
            CHECK(a.z_benign == b.z_benign);
            CHECK(a.z_malicious == b.z_malicious);
        }
        std::filesystem::remove(path);
    }
}

TEST_CASE("load_model rejects foreign and damaged files") {
    const std::string path = tmp_path("rplcil_not_a_model.bin");
    {
        std::ofstream out(path, std::ios::binary);
        out << "definitely not a model";
    }
    CHECK_THROWS_AS(load_model(path), IoError);

    // valid magic, truncated body
    const WindowedDataset ds = training_data();
    TrainConfig cfg;
    cfg.n_rounds = 3;
    const AnyModel model = gbdt_train(ds, cfg);
    const std::string full = tmp_path("rplcil_model_full.bin");
    save_model(model, full);
    std::string bytes;
    {
        std::ifstream in(full, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    const std::string cut = tmp_path("rplcil_model_cut.bin");
    {
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_model(cut), IoError);
    CHECK_THROWS_AS(load_model(tmp_path("rplcil_missing_file.bin")), IoError);
    std::filesystem::remove(path);
    std::filesystem::remove(full);
    std::filesystem::remove(cut);
}

TEST_CASE("a warm-started model round-trips with its appended trees") {
    const WindowedDataset ds = training_data();
    TrainConfig cfg;
    cfg.n_rounds = 5;
    const GbdtModel base = gbdt_train(ds, cfg);
    const GbdtModel updated = gbdt_warm_start(base, ds, cfg);
    const std::string path = tmp_path("rplcil_model_warm.bin");
    save_model(updated, path);
    const AnyModel back = load_model(path);
    const auto& g = std::get<GbdtModel>(back);
    REQUIRE(g.trees.size() == 10);
    // serialized prefix equals the original ensemble
    for (std::size_t i = 0; i < base.trees.size(); ++i) CHECK(g.trees[i] == base.trees[i]);
    std::filesystem::remove(path);
}
