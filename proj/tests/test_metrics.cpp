#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "reswvl/core/rng.hpp"
#include "reswvl/eval/metrics.hpp"

using namespace reswvl;

TEST_CASE("accuracy: hand-checked examples") {
    std::vector<EvalSequences> perfect{{"a", {1, 2, 3}, {1, 2, 3}}};
    CHECK(accuracy(perfect).mean == 1.0);

    std::vector<EvalSequences> one{{"a", {1, 1, 2, 2}, {1, 2, 2, 2}}};
    CHECK(accuracy(one).mean == Catch::Approx(0.75));

    std::vector<EvalSequences> two{{"a", {1, 1}, {1, 1}}, {"b", {1, 1}, {1, 2}}};
    CHECK(accuracy(two).mean == Catch::Approx(0.75));

    std::vector<EvalSequences> bad{{"a", {1, 2}, {1}}};
    CHECK_THROWS_AS(accuracy(bad), EvalError);
}

TEST_CASE("phase-wise video-wise metrics: hand-checked confusion") {
    std::vector<EvalSequences> v{{"a", {1, 1, 2, 2}, {1, 2, 2, 2}}};
    const auto report = evaluate(v, 2);
    REQUIRE(report.per_phase.size() == 2);
    CHECK(*report.per_phase[0].precision == Catch::Approx(1.0));
    CHECK(*report.per_phase[0].recall == Catch::Approx(0.5));
    CHECK(*report.per_phase[0].jaccard == Catch::Approx(0.5));
    CHECK(*report.per_phase[1].precision == Catch::Approx(2.0 / 3.0));
    CHECK(*report.per_phase[1].recall == Catch::Approx(1.0));
    CHECK(*report.per_phase[1].jaccard == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("metrics: identical prediction scores 1 everywhere") {
    std::vector<EvalSequences> v{{"a", {1, 2, 2, 3}, {1, 2, 2, 3}}};
    const auto report = evaluate(v, 3);
    CHECK(report.accuracy.mean == 1.0);
    CHECK(report.precision.mean == 1.0);
    CHECK(report.recall.mean == 1.0);
    CHECK(report.jaccard.mean == 1.0);
    CHECK(report.f1 == 1.0);
}

TEST_CASE("metrics: cell exclusion conventions") {
    // phase 2 never in GT but predicted once: precision cell 0, recall cell absent;
    // phase 3 absent from both: no cell at all.
    std::vector<EvalSequences> v{{"a", {1, 1, 1}, {1, 2, 1}}};
    const auto report = evaluate(v, 3);
    CHECK(*report.per_phase[1].precision == 0.0);
    CHECK_FALSE(report.per_phase[1].recall.has_value());
    CHECK_FALSE(report.per_phase[2].precision.has_value());
    CHECK_FALSE(report.per_phase[2].jaccard.has_value());
    for (const auto& cell : report.cells) CHECK(cell.phase != 3);

    std::vector<EvalSequences> out_of_range{{"a", {1, 4}, {1, 1}}};
    CHECK_THROWS_AS(evaluate(out_of_range, 3), EvalError);
}

TEST_CASE("f1_from_means: worked examples") {
    CHECK(f1_from_means(0.6, 0.6) == Catch::Approx(0.6));
    CHECK(f1_from_means(5.0 / 6.0, 3.0 / 4.0) == Catch::Approx(0.78947).epsilon(1e-4));
    // published derivation: mean precision 81.11%, mean recall 82.52% -> F1 81.81%
    CHECK(f1_from_means(0.8111, 0.8252) == Catch::Approx(0.8181).margin(1e-4));
    CHECK(f1_from_means(0.0, 0.0) == 0.0);
    CHECK_THROWS_AS(f1_from_means(-0.1, 0.5), EvalError);
    CHECK_THROWS_AS(f1_from_means(0.5, 1.2), EvalError);
}

TEST_CASE("count_transitions") {
    CHECK(count_transitions({1, 1, 1}) == 0);
    CHECK(count_transitions({1, 2, 1, 2}) == 3);
    std::vector<int> sequential;
    for (int p = 1; p <= 7; ++p) sequential.insert(sequential.end(), 5, p);
    CHECK(count_transitions(sequential) == 6);
    CHECK_THROWS_AS(count_transitions({}), EvalError);
}

namespace {

std::vector<EvalSequences> random_instance(Rng& rng) {
    const int phases = static_cast<int>(rng.uniform_int(2, 8));
    const int videos = static_cast<int>(rng.uniform_int(1, 6));
    std::vector<EvalSequences> out;
    for (int v = 0; v < videos; ++v) {
        const int frames = static_cast<int>(rng.uniform_int(1, 50));
        EvalSequences s;
        s.video_id = "v" + std::to_string(v);
        for (int t = 0; t < frames; ++t) {
            s.gt.push_back(static_cast<int>(rng.uniform_int(1, phases)));
            s.pred.push_back(static_cast<int>(rng.uniform_int(1, phases)));
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("metrics agree with the brute-force oracle on random instances") {
    Rng rng(20250811);
    for (int trial = 0; trial < 200; ++trial) {
        auto videos = random_instance(rng);
        const int phases = 8;
        const auto report = evaluate(videos, phases);
        const auto ref = oracle::metrics(videos, phases);
        CHECK(std::abs(report.accuracy.mean - ref.acc_mean) < 1e-12);
        CHECK(std::abs(report.accuracy.std - ref.acc_std) < 1e-12);
        CHECK(std::abs(report.precision.mean - ref.prec_mean) < 1e-12);
        CHECK(std::abs(report.precision.std - ref.prec_std) < 1e-12);
        CHECK(std::abs(report.recall.mean - ref.rec_mean) < 1e-12);
        CHECK(std::abs(report.recall.std - ref.rec_std) < 1e-12);
        CHECK(std::abs(report.jaccard.mean - ref.jac_mean) < 1e-12);
        CHECK(std::abs(report.jaccard.std - ref.jac_std) < 1e-12);
        CHECK(std::abs(report.f1 - ref.f1) < 1e-12);

        // per-cell invariant: Jaccard never exceeds precision or recall
        for (const auto& cell : report.cells) {
            const auto jac = cell.jaccard();
            if (cell.precision()) CHECK(*jac <= *cell.precision() + 1e-15);
            if (cell.recall()) CHECK(*jac <= *cell.recall() + 1e-15);
        }
        // F1 lies between the means it combines
        CHECK(report.f1 >= std::min(report.precision.mean, report.recall.mean) - 1e-12);
        CHECK(report.f1 <= std::max(report.precision.mean, report.recall.mean) + 1e-12);

        // permutation invariance over videos
        std::reverse(videos.begin(), videos.end());
        const auto reversed = evaluate(videos, phases);
        CHECK(std::abs(report.precision.mean - reversed.precision.mean) < 1e-12);
        CHECK(std::abs(report.accuracy.mean - reversed.accuracy.mean) < 1e-12);
        CHECK(std::abs(report.f1 - reversed.f1) < 1e-12);
    }
}

TEST_CASE("no relaxed boundaries: a one-frame shift changes counts exactly") {
    std::vector<EvalSequences> exact{{"a", {1, 1, 2, 2}, {1, 1, 2, 2}}};
    std::vector<EvalSequences> shifted{{"a", {1, 1, 2, 2}, {1, 2, 2, 2}}};
    const auto a = evaluate(exact, 2);
    const auto b = evaluate(shifted, 2);
    auto find_cell = [](const EvalReport& r, int phase) {
        for (const auto& c : r.cells)
            if (c.phase == phase) return c;
        throw std::runtime_error("missing cell");
    };
    CHECK(find_cell(a, 1).fn == 0);
    CHECK(find_cell(b, 1).fn == 1);
    CHECK(find_cell(a, 2).fp == 0);
    CHECK(find_cell(b, 2).fp == 1);
    CHECK(a.accuracy.mean - b.accuracy.mean == Catch::Approx(0.25));
}
