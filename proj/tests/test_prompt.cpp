#include <catch_amalgamated.hpp>

#include <cmath>

#include "reswvl/core/rng.hpp"
#include "reswvl/prompt/prompt_bank.hpp"

using namespace reswvl;

namespace {

PromptBankConfig ordinal_config(int phases, std::vector<int> refs, int m = 4, int dim = 6) {
    PromptBankConfig cfg;
    cfg.phase_count = phases;
    cfg.context_tokens = m;
    cfg.token_dim = dim;
    cfg.variant = PromptVariant::ordinal;
    cfg.reference_indices = std::move(refs);
    return cfg;
}

PromptBankConfig independent_config(int phases, int m = 4, int dim = 6) {
    PromptBankConfig cfg;
    cfg.phase_count = phases;
    cfg.context_tokens = m;
    cfg.token_dim = dim;
    cfg.variant = PromptVariant::independent;
    return cfg;
}

}  // namespace

TEST_CASE("default reference indices") {
    CHECK(default_reference_indices(7, 3) == std::vector<int>{1, 4, 7});
    CHECK(default_reference_indices(8, 3) == std::vector<int>{1, 4, 8});
    CHECK(default_reference_indices(7, 2) == std::vector<int>{1, 7});
    CHECK(default_reference_indices(7, 7) == std::vector<int>{1, 2, 3, 4, 5, 6, 7});
    CHECK(default_reference_indices(2, 2) == std::vector<int>{1, 2});
    CHECK_THROWS_AS(default_reference_indices(3, 4), ConfigError);
    CHECK_THROWS_AS(default_reference_indices(5, 1), ConfigError);
}

TEST_CASE("config validation") {
    auto bad = ordinal_config(7, {1, 4});  // must end at P
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    auto unsorted = ordinal_config(7, {1, 7, 4});
    CHECK_THROWS_AS(unsorted.validate(), ConfigError);
    auto dup = ordinal_config(7, {1, 4, 4, 7});
    CHECK_THROWS_AS(dup.validate(), ConfigError);
    CHECK_NOTHROW(ordinal_config(7, {1, 4, 7}).validate());
}

TEST_CASE("independent materialization is a direct lookup") {
    Rng rng(7);
    PromptBank<double> bank(independent_config(7), rng);
    const auto prompt = bank.materialize(3);
    REQUIRE(prompt.dim(0) == 5);  // 1 + m
    for (std::size_t c = 0; c < 6; ++c) {
        CHECK(prompt(0, c) == bank.first_param().value(2, c));
        for (std::size_t m = 0; m < 4; ++m) CHECK(prompt(m + 1, c) == bank.context_param().value(m, c));
    }
    CHECK_THROWS_AS(bank.materialize(0), ConfigError);
    CHECK_THROWS_AS(bank.materialize(8), ConfigError);
}

TEST_CASE("ordinal: reference recovery is exact and interpolation is hand-checkable") {
    Rng rng(11);
    PromptBank<double> bank(ordinal_config(7, {1, 4, 7}), rng);
    const auto& refs = bank.first_param().value;

    // at a reference, the first token is that reference row, bit for bit
    const auto at4 = bank.materialize(4);
    for (std::size_t c = 0; c < 6; ++c) CHECK(at4(0, c) == refs(1, c));

    // p = 2 between references 1 and 4: lambda = 1/3
    const auto at2 = bank.materialize(2);
    for (std::size_t c = 0; c < 6; ++c)
        CHECK(at2(0, c) == Catch::Approx((2.0 / 3.0) * refs(0, c) + (1.0 / 3.0) * refs(1, c)));

    // p = 6 between references 4 and 7: lambda = 2/3
    const auto at6 = bank.materialize(6);
    for (std::size_t c = 0; c < 6; ++c)
        CHECK(at6(0, c) == Catch::Approx((1.0 / 3.0) * refs(1, c) + (2.0 / 3.0) * refs(2, c)));
}

TEST_CASE("ordinal blends are convex over the two bracketing references") {
    Rng rng(13);
    for (int trial = 0; trial < 1000; ++trial) {
        const int phases = static_cast<int>(rng.uniform_int(2, 12));
        const int n = static_cast<int>(rng.uniform_int(2, phases));
        PromptBank<double> bank(
            ordinal_config(phases, default_reference_indices(phases, n), 2, 4), rng);
        const int p = static_cast<int>(rng.uniform_int(1, phases));
        const auto blend = bank.blend_for(p);
        if (blend.exact) continue;
        CHECK(blend.w_lo >= 0.0);
        CHECK(blend.w_hi >= 0.0);
        CHECK(blend.w_lo + blend.w_hi == Catch::Approx(1.0).margin(1e-15));
        CHECK(blend.row_hi == blend.row_lo + 1);
    }
}

TEST_CASE("betweenness: interpolated tokens stay on the segment, ordered by norm") {
    Rng rng(17);
    int checked = 0;
    while (checked < 1000) {
        const int phases = static_cast<int>(rng.uniform_int(4, 12));
        const int n = static_cast<int>(rng.uniform_int(2, phases - 1));
        const auto refs = default_reference_indices(phases, n);
        PromptBank<double> bank(ordinal_config(phases, refs, 2, 8), rng);

        // find a bracket [r_lo, r_hi] with at least two interior phases
        for (std::size_t i = 0; i + 1 < refs.size(); ++i) {
            if (refs[i + 1] - refs[i] < 3) continue;
            const int p = refs[i] + 1;
            const int q = refs[i] + 2;
            const auto tok_p = bank.first_token(p);
            const auto tok_q = bank.first_token(q);
            const auto& mat = bank.first_param().value;
            double dp = 0, dq = 0, off_segment = 0;
            const double lambda = static_cast<double>(p - refs[i]) / (refs[i + 1] - refs[i]);
            for (std::size_t c = 0; c < 8; ++c) {
                const double lo = mat(i, c), hi = mat(i + 1, c);
                dp += (tok_p[c] - lo) * (tok_p[c] - lo);
                dq += (tok_q[c] - lo) * (tok_q[c] - lo);
                const double expected = lo + lambda * (hi - lo);
                off_segment += std::abs(tok_p[c] - expected);
            }
            CHECK(off_segment < 1e-12);
            CHECK(std::sqrt(dp) < std::sqrt(dq));
            ++checked;
            if (checked >= 1000) break;
        }
    }
}

TEST_CASE("n = P makes the ordinal bank identical to the independent one") {
    Rng rng_a(23);
    PromptBank<double> independent(independent_config(5, 3, 6), rng_a);
    Rng rng_b(23);
    PromptBank<double> ordinal(ordinal_config(5, {1, 2, 3, 4, 5}, 3, 6), rng_b);
    // same seed, same shapes: identical parameters; outputs must be bit-identical
    REQUIRE(independent.first_param().value.data == ordinal.first_param().value.data);
    const auto a = independent.materialize_all();
    const auto b = ordinal.materialize_all();
    CHECK(a.data == b.data);
}

TEST_CASE("gradient routing: only the bracketing references receive gradient") {
    Rng rng(29);
    PromptBank<double> bank(ordinal_config(7, {1, 4, 7}, 2, 4), rng);
    Tensor<double> grad({3, 4});
    grad.fill(1.0);

    bank.accumulate_grad(2, grad);  // between refs 1 and 4, lambda = 1/3
    const auto& fg = bank.first_param().grad;
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(fg(0, c) == Catch::Approx(2.0 / 3.0));
        CHECK(fg(1, c) == Catch::Approx(1.0 / 3.0));
        CHECK(fg(2, c) == 0.0);  // non-bracketing reference: exactly zero
    }
    const auto& cg = bank.context_param().grad;
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t c = 0; c < 4; ++c) CHECK(cg(m, c) == 1.0);

    // independent variant: only E_p
    Rng rng2(31);
    PromptBank<double> ind(independent_config(7, 2, 4), rng2);
    ind.accumulate_grad(3, grad);
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(ind.first_param().grad(r, c) == (r == 2 ? 1.0 : 0.0));
}

TEST_CASE("token embedder seeds the first tokens") {
    Rng rng(37);
    auto embedder = [](const std::string& s) {
        std::vector<double> v(6, 0.0);
        v[0] = static_cast<double>(s.size());
        v[1] = static_cast<double>(s[0] - '0');
        return v;
    };
    PromptBank<double> bank(independent_config(7, 2, 6), rng, embedder);
    for (int p = 1; p <= 7; ++p) {
        CHECK(bank.first_param().value(p - 1, 1) == Catch::Approx(static_cast<double>(p)));
    }
}
