#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "reswvl/core/checksum.hpp"
#include "reswvl/encoder/logit_head.hpp"
#include "reswvl/encoder/registry.hpp"
#include "reswvl/train/loss.hpp"
#include "test_util.hpp"

using namespace reswvl;

TEST_CASE("compute_logits: cosine of identical and orthogonal vectors") {
    Tensor<double> img({1, 2});
    img.data = {3.0, 4.0};  // normalizes to (0.6, 0.8)
    Tensor<double> txt({2, 2});
    txt.data = {3.0, 4.0, -4.0, 3.0};  // same direction; orthogonal
    const auto logits = compute_logits(img, txt, /*normalize=*/true, 0.0);
    CHECK(logits(0, 0) == Catch::Approx(1.0));
    CHECK(logits(0, 1) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("compute_logits matches the brute-force oracle") {
    Rng rng(404);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t batch = static_cast<std::size_t>(rng.uniform_int(1, 4));
        const std::size_t phases = static_cast<std::size_t>(rng.uniform_int(1, 5));
        const std::size_t d = static_cast<std::size_t>(rng.uniform_int(1, 16));
        const bool normalize = rng.bernoulli(0.5);
        const double log_scale = rng.uniform(-1.0, 3.0);
        Tensor<double> img({batch, d}), txt({phases, d});
        for (auto& v : img.data) v = rng.normal();
        for (auto& v : txt.data) v = rng.normal();
        const auto got = compute_logits(img, txt, normalize, log_scale);
        const auto want = oracle::logits(img, txt, normalize, log_scale);
        REQUIRE(got.shape == want.shape);
        for (std::size_t i = 0; i < got.numel(); ++i)
            CHECK(std::abs(got.data[i] - want.data[i]) < 1e-12);
    }
}

TEST_CASE("compute_logits rejects mismatched feature dims") {
    Tensor<double> img({1, 3}), txt({2, 4});
    CHECK_THROWS_AS(compute_logits(img, txt), TrainError);
}

TEST_CASE("normalized logits: positive rescaling never changes the argmax") {
    Rng rng(405);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor<double> img({2, 8}), txt({5, 8});
        for (auto& v : img.data) v = rng.normal();
        for (auto& v : txt.data) v = rng.normal();
        const auto base = compute_logits(img, txt, true, 1.3);
        Tensor<double> scaled = img;
        const double c = rng.uniform(0.01, 100.0);
        for (std::size_t j = 0; j < 8; ++j) scaled(0, j) *= c;
        const auto after = compute_logits(scaled, txt, true, 1.3);
        const auto a = argmax_labels(base), b = argmax_labels(after);
        CHECK(a[0] == b[0]);
        CHECK(a[1] == b[1]);
    }
}

TEST_CASE("toy text encoder is frozen and deterministic") {
    ToyEncoderOptions opt;
    opt.feature_dim = 12;
    opt.token_dim = 6;
    opt.seed = 9;
    ToyTextEncoder<double> enc(opt);
    const auto checksum_before = enc.parameter_checksum();

    Tensor<double> prompts({3, 2, 6});
    Rng rng(1);
    for (auto& v : prompts.data) v = rng.normal();
    const auto a = enc.encode_tokens(prompts);
    const auto b = enc.encode_tokens(prompts);
    CHECK(a.data == b.data);
    CHECK(enc.parameter_checksum() == checksum_before);

    // mean-over-tokens: a prompt with identical tokens encodes like one token
    Tensor<double> repeated({1, 3, 6}), single({1, 1, 6});
    for (std::size_t c = 0; c < 6; ++c) {
        const double v = rng.normal();
        single(0, 0, c) = v;
        for (std::size_t l = 0; l < 3; ++l) repeated(0, l, c) = v;
    }
    const auto enc_rep = enc.encode_tokens(repeated);
    const auto enc_single = enc.encode_tokens(single);
    for (std::size_t i = 0; i < enc_rep.numel(); ++i)
        CHECK(enc_rep.data[i] == Catch::Approx(enc_single.data[i]).margin(1e-12));

    // token embeddings for the bank init: deterministic per string
    CHECK(enc.embed_token_string("3") == enc.embed_token_string("3"));
    CHECK(enc.embed_token_string("3") != enc.embed_token_string("4"));
}

TEST_CASE("toy image encoder: eval mode is deterministic") {
    ToyEncoderOptions opt;
    opt.feature_dim = 8;
    opt.seed = 5;
    ToyImageEncoder<double> enc(opt);
    Tensor<double> batch({2, 3, 16, 16});
    Rng rng(2);
    for (auto& v : batch.data) v = rng.uniform();
    const auto a = enc.encode(batch, false);
    const auto b = enc.encode(batch, false);
    CHECK(a.data == b.data);
    CHECK(a.shape == std::vector<std::size_t>{2, 8});
}

TEST_CASE("backbone registry resolves and rejects as documented") {
    CHECK(backbone_info("clip-resnet50").feature_dim == 1024);
    CHECK(backbone_info("toy").bundled);
    CHECK_FALSE(backbone_info("clip-resnet50").bundled);
    CHECK_THROWS_AS(backbone_info("resnet18"), ConfigError);

    // toy: works without weights
    const auto pair = attach_pretrained_backbone<double>("toy");
    CHECK(pair.image->feature_dim() == 64);
    CHECK(pair.image->trainable());

    // vit: reserved, interface-compatible
    CHECK_THROWS_WITH(attach_pretrained_backbone<double>("clip-vit-b16"),
                      Catch::Matchers::ContainsSubstring("not implemented"));

    // rn50: missing weights file
    CHECK_THROWS_AS(attach_pretrained_backbone<double>("clip-resnet50", "/nonexistent/w.rswv"),
                    DataError);

    TempDir dir("backbone");
    // corrupt archive
    write_text(dir.path / "bad.rswv", "not an archive");
    CHECK_THROWS_AS(attach_pretrained_backbone<double>("clip-resnet50", dir.path / "bad.rswv"),
                    DataError);
    // structurally valid archive without the right declaration
    Archive wrong;
    wrong.manifest["backbone"] = "something-else";
    wrong.save(dir.path / "wrong.rswv");
    CHECK_THROWS_AS(attach_pretrained_backbone<double>("clip-resnet50", dir.path / "wrong.rswv"),
                    DataError);
    // correctly declared archive: kernels are not part of this build
    Archive ok;
    ok.manifest["backbone"] = "clip-resnet50";
    ok.manifest["feature_dim"] = 1024;
    ok.save(dir.path / "ok.rswv");
    CHECK_THROWS_WITH(attach_pretrained_backbone<double>("clip-resnet50", dir.path / "ok.rswv"),
                      Catch::Matchers::ContainsSubstring("not bundled"));
}

TEST_CASE("toy backbone restores exported weights") {
    ToyEncoderOptions opt;
    opt.feature_dim = 8;
    opt.seed = 77;
    auto pair = attach_pretrained_backbone<double>("toy", {}, opt);
    Archive a;
    for (auto* p : pair.image->parameters()) a.put(p->name, p->value);
    TempDir dir("toyweights");
    a.save(dir.path / "toy.rswv");

    ToyEncoderOptions other = opt;
    other.seed = 78;  // different init, then overwritten by the archive
    auto restored = attach_pretrained_backbone<double>("toy", dir.path / "toy.rswv", other);
    const auto pa = pair.image->parameters();
    const auto pb = restored.image->parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value.data == pb[i]->value.data);
}
