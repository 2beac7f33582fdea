#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "model_reference.hpp"
#include "pf/errors.hpp"
#include "pf/model.hpp"

using namespace pf;

namespace {

// Element-count enumeration over the expected name layout; kept separate
// from count_parameters so the two can disagree.
std::int64_t enumerate_elements(const TransformerModel& model) {
    std::int64_t total = 0;
    for (const auto& name : model.parameter_names()) {
        total += model.param(name).numel();
    }
    return total;
}

}  // namespace

TEST_CASE("reference spec builds with 8640 parameters") {
    TransformerModel model = build_model(reference_spec(), 1);
    // token emb 1024 + pos emb 1024 + 2*(attn 1088 + LNs 64 + FFN 2128) + final LN 32
    CHECK(model.count_parameters(false) == 8640);
    CHECK(enumerate_elements(model) == 8640);
    CHECK(model.count_parameters(true) == 8640);  // everything trainable pre-attach
}

TEST_CASE("same seed twice gives bit-identical parameter trees") {
    TransformerModel a = build_model(reference_spec(), 42);
    TransformerModel b = build_model(reference_spec(), 42);
    REQUIRE(a.parameter_names() == b.parameter_names());
    for (const auto& name : a.parameter_names()) {
        auto av = a.param(name).data();
        auto bv = b.param(name).data();
        REQUIRE(av.size() == bv.size());
        for (std::size_t i = 0; i < av.size(); ++i) {
            if (av[i] != bv[i]) FAIL("mismatch in " << name);
        }
    }
}

TEST_CASE("invalid specs are rejected with the violated constraint") {
    ModelSpec spec = reference_spec();
    spec.n_heads = 3;
    CHECK_THROWS_WITH_AS(build_model(spec, 1), doctest::Contains("n_heads"), ConfigError);
    spec = reference_spec();
    spec.d_ff = 0;
    CHECK_THROWS_WITH_AS(build_model(spec, 1), doctest::Contains("d_ff"), ConfigError);
}

TEST_CASE("parameter name set is a pure function of the spec") {
    TransformerModel a = build_model(reference_spec(), 1);
    TransformerModel b = build_model(reference_spec(), 999);
    CHECK(a.parameter_names() == b.parameter_names());
    CHECK(a.spec().fingerprint() == b.spec().fingerprint());

    ModelSpec wider = reference_spec();
    wider.d_model = 32;
    CHECK(build_model(wider, 1).spec().fingerprint() != a.spec().fingerprint());
}

TEST_CASE("untied head adds a head.weight parameter") {
    ModelSpec spec = reference_spec();
    spec.tie_output_head = false;
    TransformerModel model = build_model(spec, 1);
    CHECK(model.has_param("head.weight"));
    CHECK(model.count_parameters(false) == 8640 + 64 * 16);
}

TEST_CASE("forward shape contract and error paths") {
    TransformerModel model = build_model(reference_spec(), 7);
    std::vector<int> tokens = {1, 5, 9, 20};
    Tensor logits = model.forward(tokens);
    CHECK(logits.shape() == std::vector<int>{4, 64});

    CHECK_THROWS_AS(model.forward({1, 2, 64}), DataError);
    std::vector<int> too_long(65, 1);
    CHECK_THROWS_AS(model.forward(too_long), LengthError);
}

TEST_CASE("empty hooks match a hook-free op-level forward bit-identically") {
    TransformerModel model = build_model(reference_spec(), 11);
    std::vector<int> tokens = {3, 1, 4, 1, 5};
    Tensor logits = model.forward(tokens);

    // Same op sequence, no hook plumbing.
    Tensor x = embedding(model.param("emb.weight"), tokens);
    std::vector<int> positions = {0, 1, 2, 3, 4};
    x = add(x, embedding(model.param("pos.weight"), positions));
    for (int i = 0; i < model.spec().n_layers; ++i) {
        const std::string base = "layers." + std::to_string(i) + ".";
        Tensor ln1 = layer_norm(x, model.param(base + "ln1.gamma"),
                                model.param(base + "ln1.beta"), model.spec().ln_eps);
        Tensor q = add(matmul(ln1, model.param(base + "attn.q.weight")),
                       model.param(base + "attn.q.bias"));
        Tensor k = add(matmul(ln1, model.param(base + "attn.k.weight")),
                       model.param(base + "attn.k.bias"));
        Tensor v = add(matmul(ln1, model.param(base + "attn.v.weight")),
                       model.param(base + "attn.v.bias"));
        Tensor attn = causal_attention(q, k, v, model.spec().n_heads);
        Tensor o = add(matmul(attn, model.param(base + "attn.o.weight")),
                       model.param(base + "attn.o.bias"));
        x = add(x, o);
        Tensor ln2 = layer_norm(x, model.param(base + "ln2.gamma"),
                                model.param(base + "ln2.beta"), model.spec().ln_eps);
        Tensor u = add(matmul(ln2, model.param(base + "ffn.up.weight")),
                       model.param(base + "ffn.up.bias"));
        Tensor a = gelu(u);
        Tensor dn = add(matmul(a, model.param(base + "ffn.down.weight")),
                        model.param(base + "ffn.down.bias"));
        x = add(x, dn);
    }
    x = layer_norm(x, model.param("ln_f.gamma"), model.param("ln_f.beta"), model.spec().ln_eps);
    Tensor expected = matmul_nt(x, model.param("emb.weight"));

    REQUIRE(logits.numel() == expected.numel());
    for (std::int64_t i = 0; i < logits.numel(); ++i) {
        if (logits.data()[static_cast<std::size_t>(i)] !=
            expected.data()[static_cast<std::size_t>(i)]) {
            FAIL("logits differ at flat index " << i);
        }
    }
}

TEST_CASE("forward agrees with the plain-loop reference") {
    TransformerModel model = build_model(reference_spec(), 13);
    std::vector<int> tokens = {2, 7, 1};
    Tensor logits = model.forward(tokens);
    auto ref = refmodel::forward(model, tokens);
    for (int t = 0; t < 3; ++t)
        for (int v = 0; v < 64; ++v) {
            CHECK(logits.data()[t * 64 + v] ==
                  doctest::Approx(ref[static_cast<std::size_t>(t)][static_cast<std::size_t>(v)])
                      .epsilon(1e-10));
        }
}

TEST_CASE("prepend supplier grows the output and uses leading positions") {
    TransformerModel model = build_model(reference_spec(), 17);
    std::vector<int> tokens = {5, 6, 7};

    Rng rng(3);
    Tensor virtual_rows = Tensor::randn({8, 16}, 0.05, rng);
    model.set_prepend_supplier([virtual_rows]() { return virtual_rows; });
    Tensor logits = model.forward(tokens);
    CHECK(logits.shape() == std::vector<int>{3 + 8, 64});

    // Virtual tokens occupy positions 0..7 and real tokens continue at 8:
    // the plain-loop reference implements exactly that layout.
    refmodel::Options opt;
    for (int r = 0; r < 8; ++r) {
        opt.prepend_rows.push_back(
            {virtual_rows.data().begin() + r * 16, virtual_rows.data().begin() + (r + 1) * 16});
    }
    auto ref = refmodel::forward(model, tokens, opt);
    for (int t = 0; t < 11; ++t)
        for (int v = 0; v < 64; ++v) {
            CHECK(logits.data()[t * 64 + v] ==
                  doctest::Approx(ref[static_cast<std::size_t>(t)][static_cast<std::size_t>(v)])
                      .epsilon(1e-10));
        }
}

TEST_CASE("kv prefix keeps length but feeds extra rows to every layer") {
    TransformerModel model = build_model(reference_spec(), 19);
    std::vector<int> tokens = {9, 2, 4, 8};
    const int p = 4, d = 16;

    Rng rng(5);
    std::vector<std::pair<Tensor, Tensor>> blocks;
    refmodel::Options opt;
    for (int layer = 0; layer < 2; ++layer) {
        Tensor k = Tensor::randn({p, d}, 0.3, rng);
        Tensor v = Tensor::randn({p, d}, 0.3, rng);
        blocks.emplace_back(k, v);
        refmodel::KvBlock block;
        for (int r = 0; r < p; ++r) {
            block.k.push_back({k.data().begin() + r * d, k.data().begin() + (r + 1) * d});
            block.v.push_back({v.data().begin() + r * d, v.data().begin() + (r + 1) * d});
        }
        opt.kv_blocks.push_back(std::move(block));
    }
    model.set_kv_prefix_supplier(
        [blocks](int layer) { return blocks[static_cast<std::size_t>(layer)]; });

    Tensor logits = model.forward(tokens);
    CHECK(logits.shape() == std::vector<int>{4, 64});  // length unchanged

    auto ref = refmodel::forward(model, tokens, opt);
    for (int t = 0; t < 4; ++t)
        for (int v = 0; v < 64; ++v) {
            CHECK(logits.data()[t * 64 + v] ==
                  doctest::Approx(ref[static_cast<std::size_t>(t)][static_cast<std::size_t>(v)])
                      .epsilon(1e-10));
        }
}

TEST_CASE("site transforms receive the site input") {
    TransformerModel model = build_model(reference_spec(), 23);
    int calls = 0;
    model.add_site_transform("layers.0.attn.q",
                             [&calls](const Tensor& in, const Tensor& out) {
                                 CHECK(in.shape().back() == 16);
                                 CHECK(out.shape().back() == 16);
                                 ++calls;
                                 return out;
                             });
    model.forward({1, 2, 3});
    CHECK(calls == 1);
}
