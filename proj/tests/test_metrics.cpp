#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cxr/metrics.hpp"
#include "cxr/rng.hpp"

using namespace cxr;

TEST_CASE("macro aggregation of the reference per-label F1 values") {
    // per-symptom scores in canonical label order: infiltration, effusion,
    // atelectasis, nodule, mass, pneumothorax, consolidation
    const std::vector<double> f1 = {93.36, 89.02, 94.75, 87.05,
                                    85.08, 96.91, 84.49};
    const std::vector<double> precision = {88.14, 86.52, 90.29, 82.35,
                                           84.62, 94.95, 81.44};
    const std::vector<double> recall = {99.24, 91.67, 99.68, 92.31,
                                        85.56, 98.95, 87.78};
    CHECK(std::fabs(metrics::macro_average(f1) - 90.09) < 0.01);
    CHECK(std::fabs(metrics::macro_average(precision) - 86.90) < 0.01);
    CHECK(std::fabs(metrics::macro_average(recall) - 93.60) < 0.01);
}

TEST_CASE("confusion counts TP=176 FN=2 FP=0 reproduce the reference row") {
    const metrics::ClassMetrics m =
        metrics::from_counts("tb", 176, 0, 2, 1000);
    CHECK(metrics::format_percent(m.precision) == "100.00%");
    CHECK(metrics::format_percent(m.recall) == "98.88%");
    CHECK(metrics::format_percent(m.f1) == "99.44%");
}

TEST_CASE("from_counts handles zero denominators") {
    const metrics::ClassMetrics none = metrics::from_counts("x", 0, 0, 0, 10);
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
    const metrics::ClassMetrics fp_only =
        metrics::from_counts("x", 0, 3, 0, 10);
    CHECK(fp_only.precision == 0.0);
    CHECK(fp_only.f1 == 0.0);
}

TEST_CASE("disease metrics match a counting oracle on 200 random triples") {
    Rng rng(13);
    const int n = 200;
    std::vector<int> preds(n), truths(n);
    for (int i = 0; i < n; ++i) {
        preds[i] = static_cast<int>(rng.bounded(3));
        truths[i] = static_cast<int>(rng.bounded(3));
    }
    const metrics::MetricsReport r = metrics::disease_metrics(preds, truths);
    REQUIRE(r.per_class.size() == 3);

    int correct = 0;
    for (int i = 0; i < n; ++i) correct += preds[i] == truths[i];
    CHECK(r.accuracy == doctest::Approx(double(correct) / n));

    double mp = 0, mr = 0, mf = 0;
    for (int c = 0; c < 3; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (int i = 0; i < n; ++i) {
            const bool p = preds[i] == c, t = truths[i] == c;
            if (p && t) ++tp;
            else if (p) ++fp;
            else if (t) ++fn;
            else ++tn;
        }
        const auto& m = r.per_class[c];
        CHECK(m.tp == tp);
        CHECK(m.fp == fp);
        CHECK(m.fn == fn);
        CHECK(m.tn == tn);
        const double prec = tp + fp ? double(tp) / (tp + fp) : 0.0;
        const double rec = tp + fn ? double(tp) / (tp + fn) : 0.0;
        CHECK(m.precision == doctest::Approx(prec));
        CHECK(m.recall == doctest::Approx(rec));
        const double f1 =
            prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        CHECK(m.f1 == doctest::Approx(f1));
        mp += prec;
        mr += rec;
        mf += f1;
    }
    CHECK(r.macro_precision == doctest::Approx(mp / 3));
    CHECK(r.macro_recall == doctest::Approx(mr / 3));
    CHECK(r.macro_f1 == doctest::Approx(mf / 3));
}

TEST_CASE("symptom metrics binarize at the threshold and count per label") {
    // 3 images x 7 labels
    const std::vector<double> probs = {
        0.9, 0.1, 0.5, 0.2, 0.8, 0.3, 0.7,   // img 0
        0.6, 0.6, 0.4, 0.9, 0.1, 0.2, 0.49,  // img 1
        0.2, 0.8, 0.7, 0.1, 0.6, 0.9, 0.51,  // img 2
    };
    const std::vector<std::uint8_t> truths = {
        1, 0, 0, 0, 1, 0, 1,  //
        0, 1, 0, 1, 0, 0, 1,  //
        0, 1, 1, 0, 1, 1, 0,  //
    };
    const metrics::MetricsReport r =
        metrics::symptom_metrics(probs, truths, 3, 0.5);
    REQUIRE(r.per_class.size() == 7);
    // label 0 (infiltration): preds {1,1,0} truth {1,0,0} -> tp1 fp1 fn0
    CHECK(r.per_class[0].tp == 1);
    CHECK(r.per_class[0].fp == 1);
    CHECK(r.per_class[0].fn == 0);
    // binarization is inclusive: label 2 img 0 (0.5) counts positive
    CHECK(r.per_class[2].tp == 1);  // img 2 (0.7)
    CHECK(r.per_class[2].fp == 1);  // img 0 (0.5), truth negative
    CHECK(r.per_class[2].fn == 0);
    // label 6: preds {1,0,1} truth {1,1,0}
    CHECK(r.per_class[6].tp == 1);
    CHECK(r.per_class[6].fp == 1);
    CHECK(r.per_class[6].fn == 1);
    CHECK(r.per_class[6].f1 == doctest::Approx(0.5));

    CHECK_THROWS(metrics::symptom_metrics(probs, truths, 2, 0.5));
}

TEST_CASE("format_percent rounds half to even at 2 decimals") {
    CHECK(metrics::format_percent(0.98876) == "98.88%");
    CHECK(metrics::format_percent(1.0) == "100.00%");
    CHECK(metrics::format_percent(0.0) == "0.00%");
    // exact halves: 0.125% -> 0.12 (even), 0.135% -> 0.14 (even)
    CHECK(metrics::format_percent(0.00125) == "0.12%");
    CHECK(metrics::format_percent(0.00135) == "0.14%");
    CHECK(metrics::format_percent(0.005250000000000001) == "0.53%");
}

TEST_CASE("classes absent from truth and prediction are flagged undefined") {
    // class 2 never appears in truth or prediction
    const std::vector<int> preds = {0, 1, 0, 1};
    const std::vector<int> truths = {0, 1, 1, 1};
    const metrics::MetricsReport r = metrics::disease_metrics(preds, truths);
    CHECK(r.per_class[2].undefined);
    CHECK_FALSE(r.per_class[0].undefined);
    // macros average over all classes; undefined ones contribute zero
    const double p0 = 0.5, r0 = 1.0;          // class 0: tp1 fp1 fn0
    const double p1 = 1.0, r1 = 2.0 / 3.0;    // class 1: tp2 fp0 fn1
    CHECK(r.macro_precision == doctest::Approx((p0 + p1) / 3));
    CHECK(r.macro_recall == doctest::Approx((r0 + r1) / 3));
    const double f0 = 2 * p0 * r0 / (p0 + r0);
    const double f1 = 2 * p1 * r1 / (p1 + r1);
    CHECK(r.macro_f1 == doctest::Approx((f0 + f1) / 3));
}

TEST_CASE("rendered tables carry the class rows and macro line") {
    const std::vector<int> preds = {0, 1, 2, 0};
    const std::vector<int> truths = {0, 1, 2, 2};
    const metrics::MetricsReport r = metrics::disease_metrics(preds, truths);
    const std::string table = metrics::render_disease_table(r);
    CHECK(table.find("normal") != std::string::npos);
    CHECK(table.find("tb") != std::string::npos);
    CHECK(table.find("covid") != std::string::npos);
    CHECK(table.find("macro") != std::string::npos);
    CHECK(table.find("%") != std::string::npos);
}

TEST_CASE("report_to_json round-trips through a parseable document") {
    const std::vector<int> preds = {0, 1, 2};
    const std::vector<int> truths = {0, 1, 1};
    const metrics::MetricsReport d = metrics::disease_metrics(preds, truths);
    const std::vector<double> probs(7, 0.9);
    const std::vector<std::uint8_t> bits = {1, 0, 1, 0, 1, 0, 1};
    const metrics::MetricsReport s = metrics::symptom_metrics(probs, bits, 1);
    const std::string j = metrics::report_to_json(d, s);
    CHECK(j.find("\"disease\"") != std::string::npos);
    CHECK(j.find("\"symptom\"") != std::string::npos);
    CHECK(j.find("\"accuracy\"") != std::string::npos);
    CHECK(j.find("\"macro_f1\"") != std::string::npos);
}
