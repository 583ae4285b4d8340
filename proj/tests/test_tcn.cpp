#include <catch_amalgamated.hpp>

#include "reswvl/tcn/tcn.hpp"
#include "reswvl/train/stage2.hpp"
#include "test_util.hpp"

using namespace reswvl;

namespace {

TcnConfig small_config(int input_dim = 6, int phases = 3, int layers = 4, int hidden = 8) {
    TcnConfig cfg;
    cfg.layers = layers;
    cfg.hidden_dim = hidden;
    cfg.input_dim = input_dim;
    cfg.phase_count = phases;
    cfg.dropout = 0.5;
    cfg.learning_rate = 1e-4;
    cfg.seed = 7;
    return cfg;
}

Tensor<double> random_features(std::size_t frames, std::size_t d, std::uint64_t seed) {
    Tensor<double> t({frames, d});
    Rng rng(seed);
    for (auto& v : t.data) v = rng.normal();
    return t;
}

}  // namespace

TEST_CASE("receptive field formula") {
    TcnConfig cfg;
    cfg.kernel_size = 3;
    cfg.layers = 8;
    CHECK(cfg.receptive_field() == 511);
    cfg.layers = 1;
    CHECK(cfg.receptive_field() == 3);
    cfg.kernel_size = 1;
    CHECK(cfg.receptive_field() == 1);
}

TEST_CASE("a single-frame sequence is valid input") {
    Rng rng(3);
    Tcn<double> tcn(small_config(), rng);
    const auto logits = tcn.forward_eval(random_features(1, 6, 1));
    CHECK(logits.shape == std::vector<std::size_t>{1, 3});
}

TEST_CASE("causality: future perturbations never touch past outputs") {
    Rng rng(4);
    Tcn<double> tcn(small_config(), rng);
    Rng data_rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto frames = static_cast<std::size_t>(data_rng.uniform_int(5, 60));
        auto base = random_features(frames, 6, 100 + trial);
        const auto t = static_cast<std::size_t>(data_rng.uniform_int(0, static_cast<std::int64_t>(frames) - 1));
        const auto before = tcn.forward_eval(base);
        auto perturbed = base;
        for (std::size_t s = t + 1; s < frames; ++s)
            for (std::size_t c = 0; c < 6; ++c) perturbed(s, c) += data_rng.normal();
        const auto after = tcn.forward_eval(perturbed);
        for (std::size_t s = 0; s <= t; ++s)
            for (std::size_t p = 0; p < 3; ++p)
                CHECK(before(s, p) == after(s, p));  // bit-identical
    }
}

TEST_CASE("prefix consistency: predicting a prefix equals the prediction prefix") {
    Rng rng(5);
    Tcn<double> tcn(small_config(), rng);
    const auto full = random_features(40, 6, 9);
    const auto full_logits = tcn.forward_eval(full);
    Tensor<double> prefix({25, 6});
    std::copy(full.data.begin(), full.data.begin() + 25 * 6, prefix.data.begin());
    const auto prefix_logits = tcn.forward_eval(prefix);
    for (std::size_t i = 0; i < prefix_logits.numel(); ++i)
        CHECK(prefix_logits.data[i] == full_logits.data[i]);
}

TEST_CASE("empirical receptive field matches the formula") {
    // positive weights and zero bias so an impulse provably propagates to the
    // edge of the window and not one frame further
    auto probe = [](int layers, int kernel) {
        TcnConfig cfg = small_config(4, 3, layers, 8);
        cfg.kernel_size = kernel;
        Rng rng(21);
        Tcn<double> tcn(cfg, rng);
        for (auto* p : tcn.parameters()) {
            const bool is_bias = p->name.find("bias") != std::string::npos;
            for (auto& v : p->value.data) v = is_bias ? 0.0 : std::abs(v) * 0.2 + 0.01;
        }
        const long rf = cfg.receptive_field();
        const auto frames = static_cast<std::size_t>(rf + 40);
        Tensor<double> zeros({frames, 4});
        const auto base = tcn.forward_eval(zeros);
        Tensor<double> impulse = zeros;
        const std::size_t t0 = 17;
        for (std::size_t c = 0; c < 4; ++c) impulse(t0, c) = 1.0;
        const auto out = tcn.forward_eval(impulse);
        long first = -1, last = -1;
        for (std::size_t t = 0; t < frames; ++t) {
            bool changed = false;
            for (std::size_t p = 0; p < 3; ++p)
                if (out(t, p) != base(t, p)) changed = true;
            if (changed) {
                if (first < 0) first = static_cast<long>(t);
                last = static_cast<long>(t);
            }
        }
        CHECK(first == static_cast<long>(t0));
        CHECK(last == static_cast<long>(t0) + rf - 1);
    };
    probe(4, 3);   // rf = 31
    probe(5, 2);   // rf = 32
}

TEST_CASE("weight sharing: one parameter set serves any sequence length") {
    Rng rng(6);
    Tcn<double> tcn(small_config(), rng);
    const auto n_params = tcn.parameters().size();
    const auto short_out = tcn.forward_eval(random_features(100, 6, 1));
    const auto long_out = tcn.forward_eval(random_features(1000, 6, 2));
    CHECK(short_out.dim(0) == 100);
    CHECK(long_out.dim(0) == 1000);
    CHECK(tcn.parameters().size() == n_params);
}

TEST_CASE("uniform class weights reduce weighted CE to plain CE") {
    Rng rng(8);
    Tensor<double> logits({6, 4});
    for (auto& v : logits.data) v = rng.normal();
    const std::vector<int> targets{1, 2, 3, 4, 2, 3};
    const auto weighted = weighted_cross_entropy(logits, targets, ClassWeights::uniform(4));

    double plain = 0.0;
    for (std::size_t b = 0; b < 6; ++b) {
        double maxv = logits(b, 0);
        for (std::size_t p = 1; p < 4; ++p) maxv = std::max(maxv, logits(b, p));
        double z = 0.0;
        for (std::size_t p = 0; p < 4; ++p) z += std::exp(logits(b, p) - maxv);
        plain += -(logits(b, targets[b] - 1) - maxv - std::log(z));
    }
    plain /= 6.0;
    CHECK(weighted.loss == Catch::Approx(plain).epsilon(1e-15));
}

namespace {

/// Cache whose features nearly encode the labels: a one-hot bump plus noise.
void fill_cache(FeatureCache& cache, const std::vector<std::string>& ids, int phases,
                std::uint64_t seed, double noise = 0.25) {
    Rng rng(seed);
    for (const auto& id : ids) {
        const auto frames = static_cast<std::size_t>(rng.uniform_int(30, 60));
        FeatureCacheEntry<double> e;
        e.video_id = id;
        e.features = Tensor<double>({frames, static_cast<std::size_t>(phases + 2)});
        int label = 1;
        for (std::size_t t = 0; t < frames; ++t) {
            if (rng.bernoulli(0.08) && label < phases) ++label;
            e.labels.push_back(label);
            for (std::size_t c = 0; c < e.features.dim(1); ++c)
                e.features(t, c) = rng.normal(0.0, noise);
            e.features(t, static_cast<std::size_t>(label) - 1) += 1.0;
        }
        cache.write(e);
    }
}

}  // namespace

TEST_CASE("stage 2 trains on cached features and picks the best epoch") {
    TempDir dir("stage2");
    FeatureCache cache(dir.path);
    const std::vector<std::string> train{"a", "b", "c"}, val{"d"};
    fill_cache(cache, {"a", "b", "c", "d"}, 3, 99);

    DatasetSplit split;
    split.train = train;
    split.val = val;

    TcnConfig cfg = small_config(5, 3, 4, 12);
    cfg.epochs = 8;
    cfg.learning_rate = 3e-4;
    Rng rng(derive_seed(cfg.seed, "tcn-init"));
    Tcn<double> tcn(cfg, rng);
    const auto report = train_stage2(tcn, cache, split, nullptr);
    CHECK_FALSE(report.diverged);
    CHECK(report.best_val_accuracy > 0.8);
    REQUIRE(report.history.size() == 8);

    // deterministic rerun
    Rng rng2(derive_seed(cfg.seed, "tcn-init"));
    Tcn<double> tcn2(cfg, rng2);
    const auto report2 = train_stage2(tcn2, cache, split, nullptr);
    for (std::size_t e = 0; e < report.history.size(); ++e)
        CHECK(report.history[e].train_loss == report2.history[e].train_loss);

    // prediction: deterministic, labels in range
    const auto entry = cache.read<double>("d");
    const auto pred = predict_video(tcn, entry);
    CHECK(pred.labels.size() == entry.labels.size());
    for (int l : pred.labels) {
        CHECK(l >= 1);
        CHECK(l <= 3);
    }
    const auto pred2 = predict_video(tcn, entry);
    CHECK(pred.labels == pred2.labels);

    // checkpoint round trip preserves predictions exactly
    save_stage2_checkpoint(dir.path / "tcn.rswv", tcn, report, "digest");
    auto loaded = load_stage2_checkpoint<double>(dir.path / "tcn.rswv");
    const auto pred3 = predict_video(loaded, entry);
    CHECK(pred.labels == pred3.labels);
    for (std::size_t i = 0; i < pred.logits.numel(); ++i)
        CHECK(pred.logits.data[i] == pred3.logits.data[i]);
}

TEST_CASE("stage 2 failure modes: missing cache entries, corrupt headers") {
    TempDir dir("stage2bad");
    FeatureCache cache(dir.path);
    fill_cache(cache, {"a"}, 3, 1);
    DatasetSplit split;
    split.train = {"a", "missing-video"};

    TcnConfig cfg = small_config(5, 3, 2, 8);
    Rng rng(1);
    Tcn<double> tcn(cfg, rng);
    try {
        train_stage2(tcn, cache, split, nullptr);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("missing-video") != std::string::npos);
    }

    write_text(dir.path / "broken.feat", "not a cache entry");
    split.train = {"a", "broken"};
    CHECK_THROWS_AS(train_stage2(tcn, cache, split, nullptr), DataError);
}

TEST_CASE("multi-stage refinement: config supported, shapes and training hold up") {
    TempDir dir("stage2multi");
    FeatureCache cache(dir.path);
    fill_cache(cache, {"a", "b"}, 3, 42);
    DatasetSplit split;
    split.train = {"a"};
    split.val = {"b"};

    TcnConfig cfg = small_config(5, 3, 3, 8);
    cfg.stages = 2;
    cfg.epochs = 2;
    Rng rng(2);
    Tcn<double> tcn(cfg, rng);
    const auto logits = tcn.forward(cache.read<double>("a").features, false, nullptr);
    REQUIRE(logits.size() == 2);  // one output per stage
    CHECK(logits[0].dim(1) == 3);
    CHECK(logits[1].dim(1) == 3);
    const auto report = train_stage2(tcn, cache, split, nullptr);
    CHECK(report.history.size() == 2);
}

TEST_CASE("stage 2 dropout only acts in training mode") {
    Rng rng(12);
    TcnConfig cfg = small_config();
    cfg.dropout = 0.9;
    Tcn<double> tcn(cfg, rng);
    const auto feats = random_features(20, 6, 3);
    const auto a = tcn.forward_eval(feats);
    const auto b = tcn.forward_eval(feats);
    CHECK(a.data == b.data);  // dropout off, bitwise repeatable

    Rng d1(5), d2(6);
    const auto t1 = tcn.forward(feats, true, &d1);
    const auto t2 = tcn.forward(feats, true, &d2);
    CHECK(t1.back().data != t2.back().data);  // different masks actually drop
}
