#include "cxr/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cxr::metrics {

namespace {
const char* kDiseaseNames[3] = {"normal", "tb", "covid"};
}

ClassMetrics from_counts(std::string name, std::size_t tp, std::size_t fp,
                         std::size_t fn, std::size_t tn) {
    ClassMetrics m;
    m.name = std::move(name);
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tn = tn;
    m.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    m.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall > 0.0)
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.undefined = (tp + fp + fn) == 0;
    return m;
}

namespace {

void finish_macros(MetricsReport& r) {
    double p = 0, rec = 0, f = 0;
    for (const auto& c : r.per_class) {
        p += c.precision;
        rec += c.recall;
        f += c.f1;
    }
    const double n = static_cast<double>(r.per_class.size());
    r.macro_precision = p / n;
    r.macro_recall = rec / n;
    r.macro_f1 = f / n;
}

}  // namespace

MetricsReport disease_metrics(const std::vector<int>& preds,
                              const std::vector<int>& truths, int n_classes) {
    if (preds.size() != truths.size())
        throw std::invalid_argument("disease_metrics: length mismatch");
    if (preds.empty()) throw std::invalid_argument("disease_metrics: empty input");
    MetricsReport r;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] >= n_classes || truths[i] < 0 ||
            truths[i] >= n_classes)
            throw std::invalid_argument("disease_metrics: label out of range");
        if (preds[i] == truths[i]) ++correct;
    }
    for (int c = 0; c < n_classes; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const bool p = preds[i] == c, t = truths[i] == c;
            if (p && t) ++tp;
            else if (p && !t) ++fp;
            else if (!p && t) ++fn;
            else ++tn;
        }
        r.per_class.push_back(from_counts(
            c < 3 ? kDiseaseNames[c] : "class" + std::to_string(c), tp, fp, fn,
            tn));
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
    finish_macros(r);
    return r;
}

MetricsReport symptom_metrics(const std::vector<double>& probabilities,
                              const std::vector<std::uint8_t>& truths,
                              std::size_t batch, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("symptom_metrics: threshold outside [0,1]");
    const std::size_t n = batch * data::kNumSymptoms;
    if (probabilities.size() != n || truths.size() != n)
        throw std::invalid_argument("symptom_metrics: size mismatch");
    MetricsReport r;
    r.threshold = threshold;
    std::size_t exact = 0;
    for (std::size_t i = 0; i < batch; ++i) {
        bool all = true;
        for (int c = 0; c < data::kNumSymptoms; ++c) {
            const bool p =
                probabilities[i * data::kNumSymptoms + c] >= threshold;
            if (p != (truths[i * data::kNumSymptoms + c] != 0)) all = false;
        }
        if (all) ++exact;
    }
    for (int c = 0; c < data::kNumSymptoms; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < batch; ++i) {
            const bool p =
                probabilities[i * data::kNumSymptoms + c] >= threshold;
            const bool t = truths[i * data::kNumSymptoms + c] != 0;
            if (p && t) ++tp;
            else if (p && !t) ++fp;
            else if (!p && t) ++fn;
            else ++tn;
        }
        r.per_class.push_back(
            from_counts(data::kSymptomNames[c], tp, fp, fn, tn));
    }
    r.accuracy =
        batch ? static_cast<double>(exact) / static_cast<double>(batch) : 0.0;
    finish_macros(r);
    return r;
}

double macro_average(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("macro_average: empty");
    double s = 0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

std::string format_percent(double fraction) {
    // 2 decimals, round half to even
    const double scaled = fraction * 10000.0;  // hundredths of a percent
    // nearbyint rounds half to even in the default FP environment
    const double rounded = std::nearbyint(scaled);
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << rounded / 100.0 << "%";
    return os.str();
}

std::string render_disease_table(const MetricsReport& r) {
    std::ostringstream os;
    os << std::left << std::setw(14) << "Class" << std::right << std::setw(12)
       << "Precision" << std::setw(12) << "Recall" << std::setw(12) << "F1"
       << std::setw(12) << "Accuracy" << "\n";
    bool first = true;
    for (const auto& c : r.per_class) {
        os << std::left << std::setw(14) << c.name << std::right
           << std::setw(12) << format_percent(c.precision) << std::setw(12)
           << format_percent(c.recall) << std::setw(12)
           << format_percent(c.f1) << std::setw(12)
           << (first ? format_percent(r.accuracy) : std::string{}) << "\n";
        first = false;
    }
    os << std::left << std::setw(14) << "macro" << std::right << std::setw(12)
       << format_percent(r.macro_precision) << std::setw(12)
       << format_percent(r.macro_recall) << std::setw(12)
       << format_percent(r.macro_f1) << std::setw(12) << "" << "\n";
    return os.str();
}

std::string render_symptom_table(const MetricsReport& r) {
    std::ostringstream os;
    os << std::left << std::setw(16) << "Symptom" << std::right << std::setw(12)
       << "Precision" << std::setw(12) << "Recall" << std::setw(12) << "F1"
       << "\n";
    for (const auto& c : r.per_class) {
        os << std::left << std::setw(16) << c.name << std::right
           << std::setw(12) << format_percent(c.precision) << std::setw(12)
           << format_percent(c.recall) << std::setw(12)
           << format_percent(c.f1);
        if (c.undefined) os << "  (undefined)";
        os << "\n";
    }
    os << std::left << std::setw(16) << "macro" << std::right << std::setw(12)
       << format_percent(r.macro_precision) << std::setw(12)
       << format_percent(r.macro_recall) << std::setw(12)
       << format_percent(r.macro_f1) << "\n";
    return os.str();
}

namespace {

nlohmann::json report_json(const MetricsReport& r) {
    nlohmann::json j;
    for (const auto& c : r.per_class) {
        j["per_class"][c.name] = {{"precision", c.precision},
                                  {"recall", c.recall},
                                  {"f1", c.f1},
                                  {"tp", c.tp},
                                  {"fp", c.fp},
                                  {"fn", c.fn},
                                  {"tn", c.tn},
                                  {"undefined", c.undefined}};
    }
    j["accuracy"] = r.accuracy;
    j["macro_precision"] = r.macro_precision;
    j["macro_recall"] = r.macro_recall;
    j["macro_f1"] = r.macro_f1;
    j["threshold"] = r.threshold;
    return j;
}

}  // namespace

std::string report_to_json(const MetricsReport& disease,
                           const MetricsReport& symptom) {
    nlohmann::json j;
    j["disease"] = report_json(disease);
    j["symptom"] = report_json(symptom);
    return j.dump(2);
}

}  // namespace cxr::metrics
