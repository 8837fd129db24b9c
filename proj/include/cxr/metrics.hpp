#pragma once

// Per-class / per-label precision, recall, F1, accuracy and macro
// averages for the 3-class disease task and the 7-label symptom task.

#include <array>
#include <string>
#include <vector>

#include "cxr/manifest.hpp"

namespace cxr::metrics {

struct ClassMetrics {
    std::string name;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    bool undefined = false;  // class absent from both truth and predictions
};

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;  // meaningful for the disease task
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double threshold = 0.5;  // multilabel binarization threshold
};

// derived P/R/F1 from raw counts (0 when the denominator is 0)
ClassMetrics from_counts(std::string name, std::size_t tp, std::size_t fp,
                         std::size_t fn, std::size_t tn);

// preds/truths hold class indices in [0, n_classes)
MetricsReport disease_metrics(const std::vector<int>& preds,
                              const std::vector<int>& truths,
                              int n_classes = 3);

// probabilities: batch x 7 row-major in [0,1]; truths: batch x 7 bits
MetricsReport symptom_metrics(const std::vector<double>& probabilities,
                              const std::vector<std::uint8_t>& truths,
                              std::size_t batch, double threshold = 0.5);

// macro aggregation of externally supplied per-label values
double macro_average(const std::vector<double>& values);

// percent formatting: 2 decimals, round half to even
std::string format_percent(double fraction);

// plain-text tables mirroring the disease/symptom report layout
std::string render_disease_table(const MetricsReport& r);
std::string render_symptom_table(const MetricsReport& r);

std::string report_to_json(const MetricsReport& disease,
                           const MetricsReport& symptom);

}  // namespace cxr::metrics
