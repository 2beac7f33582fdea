#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "pf/errors.hpp"
#include "pf/metrics.hpp"
#include "pf/rng.hpp"

using namespace pf;

TEST_CASE("the four-example confusion fixture") {
    const std::vector<std::string> preds = {"pos", "pos", "neg", "???"};
    const std::vector<std::string> golds = {"pos", "neg", "neg", "pos"};
    MetricReport r = classification_scores(preds, golds, {"pos", "neg"});
    CHECK(*r.accuracy == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.invalid_rate == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.class_counts.at("pos").tp == 1);
    CHECK(r.class_counts.at("pos").fp == 1);
    CHECK(r.class_counts.at("pos").fn == 1);
    CHECK(r.class_counts.at("neg").tp == 1);
    CHECK(r.class_counts.at("neg").fp == 0);
    CHECK(r.class_counts.at("neg").fn == 1);
    // pos: P=0.5 R=0.5 F1=0.5 ; neg: P=1 R=0.5 F1=2/3 ; macro = 0.58333...
    CHECK(*r.macro_f1 == doctest::Approx(0.5833333333333333).epsilon(1e-9));
}

TEST_CASE("degenerate fixtures") {
    SUBCASE("perfect prediction") {
        const std::vector<std::string> labels = {"a", "b"};
        MetricReport r = classification_scores({"a", "b", "a"}, {"a", "b", "a"}, labels);
        CHECK(*r.accuracy == 1.0);
        CHECK(*r.macro_f1 == 1.0);
        CHECK(r.invalid_rate == 0.0);
    }
    SUBCASE("all predictions invalid") {
        MetricReport r = classification_scores({"x", "y"}, {"a", "b"}, {"a", "b"});
        CHECK(*r.accuracy == 0.0);
        CHECK(*r.macro_f1 == 0.0);
        CHECK(r.invalid_rate == 1.0);
    }
    SUBCASE("gold outside the label set") {
        CHECK_THROWS_AS(classification_scores({"a"}, {"zzz"}, {"a", "b"}), DataError);
    }
    SUBCASE("normalization trims and lowercases") {
        MetricReport r = classification_scores({"  Positive "}, {"positive"},
                                               {"POSITIVE", "negative"});
        CHECK(*r.accuracy == 1.0);
    }
    SUBCASE("classes absent from golds and preds leave the macro average") {
        MetricReport r =
            classification_scores({"a", "a"}, {"a", "a"}, {"a", "b", "c", "d"});
        CHECK(*r.macro_f1 == 1.0);
    }
}

TEST_CASE("classification_scores is permutation invariant") {
    Rng rng(5);
    const std::vector<std::string> labels = {"x", "y", "z"};
    std::vector<std::string> preds, golds;
    for (int i = 0; i < 40; ++i) {
        preds.push_back(labels[rng.below(3)]);
        golds.push_back(labels[rng.below(3)]);
    }
    MetricReport base = classification_scores(preds, golds, labels);
    std::vector<std::size_t> perm(preds.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<std::string> preds2, golds2;
    for (std::size_t i : perm) {
        preds2.push_back(preds[i]);
        golds2.push_back(golds[i]);
    }
    MetricReport shuffled = classification_scores(preds2, golds2, labels);
    CHECK(*base.macro_f1 == *shuffled.macro_f1);
    CHECK(*base.accuracy == *shuffled.accuracy);
}

TEST_CASE("macro-F1 matches the brute-force oracle on random instances") {
    Rng rng(99);
    const std::vector<std::string> alphabet = {"alpha", "beta", "gamma", "delta", "eps"};
    for (int trial = 0; trial < 300; ++trial) {
        const int n_classes = 2 + static_cast<int>(rng.below(4));
        std::vector<std::string> labels(alphabet.begin(), alphabet.begin() + n_classes);
        const int n = 1 + static_cast<int>(rng.below(50));
        std::vector<std::string> preds, golds;
        for (int i = 0; i < n; ++i) {
            golds.push_back(labels[rng.below(static_cast<std::uint64_t>(n_classes))]);
            if (rng.below(10) == 0) {
                preds.push_back("garbage");
            } else {
                preds.push_back(labels[rng.below(static_cast<std::uint64_t>(n_classes))]);
            }
        }
        MetricReport mine = classification_scores(preds, golds, labels);
        auto brute = oracle::classification(preds, golds, labels);
        CHECK(*mine.macro_f1 == doctest::Approx(brute.macro_f1).epsilon(1e-12));
        CHECK(*mine.accuracy == doctest::Approx(brute.accuracy).epsilon(1e-12));
        CHECK(mine.invalid_rate == doctest::Approx(brute.invalid_rate).epsilon(1e-12));
    }
}

TEST_CASE("token accuracy") {
    SUBCASE("all correct") {
        CHECK(token_accuracy({1, 2, 3}, {1, 2, 3}, {true, true, true}) == 1.0);
    }
    SUBCASE("half correct of 4 supervised") {
        CHECK(token_accuracy({1, 2, 3, 4}, {1, 2, 9, 9}, {true, true, true, true}) == 0.5);
    }
    SUBCASE("masked positions never count") {
        const double base = token_accuracy({1, 2, 3}, {1, 2, 3}, {true, false, true});
        const double flipped = token_accuracy({1, 9, 3}, {1, 2, 3}, {true, false, true});
        CHECK(base == flipped);
    }
    SUBCASE("zero supervised positions is an error") {
        CHECK_THROWS_AS(token_accuracy({1}, {1}, {false}), DataError);
    }
}

TEST_CASE("pscp worked examples") {
    PSCPConstants k;
    SUBCASE("zero exponents reduce to the performance") {
        k.b_p = k.b_f = k.b_m = 0.0;
        CHECK(pscp(0.73, 123456, 5.0, 1e12, k) == 0.73);
    }
    SUBCASE("x_p equal to C_p with unit exponent halves the score") {
        k.b_f = k.b_m = 0.0;
        CHECK(pscp(0.9, k.c_p, 0.0, 0.0, k) == doctest::Approx(0.45).epsilon(1e-12));
    }
    SUBCASE("doubling the exponent squares the factor") {
        k.b_f = k.b_m = 0.0;
        k.b_p = 2.0;
        CHECK(pscp(0.9, k.c_p, 0.0, 0.0, k) == doctest::Approx(0.225).epsilon(1e-12));
    }
    SUBCASE("negative exponent is a config error") {
        k.b_p = -1.0;
        CHECK_THROWS_AS(pscp(0.5, 1, 1, 1, k), ConfigError);
    }
    SUBCASE("performance outside [0,1]") {
        CHECK_THROWS_AS(pscp(1.5, 1, 1, 1, k), DataError);
    }
}

TEST_CASE("pscp monotonicity properties") {
    Rng rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        PSCPConstants k;
        k.c_p = rng.uniform(1e-3, 1e6);
        k.c_f = rng.uniform(1e-6, 1e2);
        k.c_m = rng.uniform(1.0, 1e12);
        k.b_p = rng.below(2) ? rng.uniform(0.1, 3.0) : 0.0;
        k.b_f = rng.below(2) ? rng.uniform(0.1, 3.0) : 0.0;
        k.b_m = rng.below(2) ? rng.uniform(0.1, 3.0) : 0.0;
        const double perf = rng.uniform(0.05, 1.0);
        const double xp = rng.uniform(0.0, 1e6);
        const double xf = rng.uniform(0.0, 1e2);
        const double xm = rng.uniform(0.0, 1e12);
        const double base = pscp(perf, xp, xf, xm, k);
        CHECK(base > 0.0);
        CHECK(base <= perf);
        const double bumped_p = pscp(perf, xp * 2 + 1, xf, xm, k);
        const double bumped_f = pscp(perf, xp, xf * 2 + 1, xm, k);
        const double bumped_m = pscp(perf, xp, xf, xm * 2 + 1, k);
        if (k.b_p > 0) CHECK(bumped_p < base);
        else CHECK(bumped_p == base);
        if (k.b_f > 0) CHECK(bumped_f < base);
        else CHECK(bumped_f == base);
        if (k.b_m > 0) CHECK(bumped_m < base);
        else CHECK(bumped_m == base);
    }
}

TEST_CASE("metric report serializes to flat json") {
    MetricReport r = classification_scores({"a"}, {"a"}, {"a", "b"});
    r.token_accuracy = 0.75;
    const std::string json = r.to_json();
    CHECK(json.find("\"macro_f1\":1.0") != std::string::npos);
    CHECK(json.find("\"tp.a\":1") != std::string::npos);
    CHECK(json.find('{') == 0);
}
