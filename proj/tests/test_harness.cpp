#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "moodpipe/harness.hpp"

using namespace moodpipe;

TEST_CASE("f1 arithmetic on rounded precision/recall pairs, tolerance 0.005") {
    // expected values recomputed by hand from 2pr/(p+r)
    const double pairs[][3] = {
        {0.71, 0.56, 0.63}, {0.57, 0.80, 0.67}, {0.71, 0.83, 0.77},
        {0.44, 0.78, 0.56}, {0.60, 0.67, 0.63}, {0.78, 0.58, 0.67},
        {0.37, 0.58, 0.45}, {0.55, 1.00, 0.71}, {0.82, 0.75, 0.78},
        {0.60, 0.75, 0.67}, {0.64, 0.75, 0.69}, {0.91, 0.83, 0.87},
    };
    for (const auto& p : pairs)
        CHECK(std::abs(f1_score(p[0], p[1]) - p[2]) <= 0.005);
}

TEST_CASE("f1 edge cases") {
    CHECK(f1_score(0.0, 0.0) == 0.0);
    CHECK(f1_score(1.0, 1.0) == 1.0);
    CHECK_THROWS_AS(f1_score(-0.1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(f1_score(0.5, 1.2), std::invalid_argument);
}

TEST_CASE("all-positive classifier on a 31-vs-76 dev split") {
    // 31 depressed + 76 not: p = 31/107, r = 1, f1 ~ 0.449
    std::vector<Label> truth, pred;
    for (int i = 0; i < 107; ++i) {
        truth.push_back(i < 31 ? Label::Depressed : Label::NotDepressed);
        pred.push_back(Label::Depressed);
    }
    EvalReport r = evaluate_predictions(truth, pred);
    CHECK(r.tp == 31);
    CHECK(r.fp == 76);
    CHECK(r.fn == 0);
    CHECK(r.tn == 0);
    CHECK(r.precision == doctest::Approx(31.0 / 107.0).epsilon(1e-12));
    CHECK(r.recall == 1.0);
    CHECK(std::abs(r.precision - 0.290) < 0.001);
    CHECK(std::abs(r.f1 - 0.449) < 0.001);
    CHECK_FALSE(r.degenerate);
}

TEST_CASE("degenerate flag on zero denominators") {
    EvalReport no_pos_pred = report_from_counts(0, 0, 5, 10);
    CHECK(no_pos_pred.degenerate);
    CHECK(no_pos_pred.precision == 0.0);
    CHECK(no_pos_pred.f1 == 0.0);

    EvalReport no_pos_truth = report_from_counts(0, 4, 0, 10);
    CHECK(no_pos_truth.degenerate);
    CHECK(no_pos_truth.recall == 0.0);
}

TEST_CASE("evaluate_predictions rejects bad input") {
    CHECK_THROWS_AS(evaluate_predictions({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(evaluate_predictions({Label::Depressed}, {}), std::invalid_argument);
}

TEST_CASE("config fingerprint is order-insensitive and value-sensitive") {
    std::map<std::string, std::string> a{{"lr", "0.001"}, {"epochs", "5"}};
    std::map<std::string, std::string> b{{"epochs", "5"}, {"lr", "0.001"}};
    std::map<std::string, std::string> c{{"epochs", "5"}, {"lr", "0.002"}};
    CHECK(config_fingerprint(a) == config_fingerprint(b));
    CHECK(config_fingerprint(a) != config_fingerprint(c));
    CHECK(config_fingerprint(a).size() == 16);
}

TEST_CASE("report json and table contain the metrics") {
    EvalReport r = report_from_counts(10, 2, 3, 20);
    r.modality = "audio";
    r.variant = "CNN-Augm";
    r.seed = 42;
    const std::string js = report_json(r);
    CHECK(js.find("\"tp\":10") != std::string::npos);
    CHECK(js.find("\"modality\":\"audio\"") != std::string::npos);
    CHECK(js.find("\"degenerate\":false") != std::string::npos);
    const std::string table = report_table({r});
    CHECK(table.find("CNN-Augm") != std::string::npos);
    CHECK(table.find("F1") != std::string::npos);
}
