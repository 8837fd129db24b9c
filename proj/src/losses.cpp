#include "cxr/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace cxr::loss {

namespace {

std::vector<double> softmax_vec(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

ad::Value add_values(const std::vector<ad::Value>& vs) {
    ad::Value acc = vs[0];
    for (std::size_t i = 1; i < vs.size(); ++i) acc = ad::add(acc, vs[i]);
    return acc;
}

}  // namespace

ad::Value dino_loss(const DinoBatch& batch, DinoState& state,
                    double teacher_temp) {
    if (teacher_temp <= 0.0 || state.student_temp <= 0.0)
        throw std::invalid_argument("dino_loss: temperature must be positive");
    if (batch.student.empty() || batch.teacher.empty() ||
        batch.student.size() != batch.teacher.size())
        throw std::invalid_argument("dino_loss: empty or mismatched batch");
    const std::size_t dim = state.center.size();

    std::vector<ad::Value> terms;
    std::size_t n_pairs = 0;
    for (std::size_t img = 0; img < batch.student.size(); ++img) {
        const auto& s_views = batch.student[img];
        const auto& t_views = batch.teacher[img];
        // student log-softmax at the student temperature, per view
        std::vector<ad::Value> s_ls;
        s_ls.reserve(s_views.size());
        for (const auto& s : s_views) {
            if (s->size() != dim)
                throw std::invalid_argument("dino_loss: student dim mismatch");
            s_ls.push_back(
                ad::log_softmax_rows(ad::scale(s, 1.0 / state.student_temp)));
        }
        for (std::size_t t = 0; t < t_views.size(); ++t) {
            if (t_views[t]->size() != dim)
                throw std::invalid_argument("dino_loss: teacher dim mismatch");
            // centered, sharpened teacher distribution (constant)
            std::vector<double> centered(dim);
            for (std::size_t i = 0; i < dim; ++i)
                centered[i] =
                    (t_views[t]->data[i] - state.center[i]) / teacher_temp;
            const std::vector<double> p = softmax_vec(centered);
            for (std::size_t s = 0; s < s_views.size(); ++s) {
                if (s == t && s < static_cast<std::size_t>(batch.n_globals))
                    continue;  // skip same global view
                std::vector<double> coeff(dim);
                for (std::size_t i = 0; i < dim; ++i) coeff[i] = -p[i];
                terms.push_back(ad::dot_const(s_ls[s], std::move(coeff)));
                ++n_pairs;
            }
        }
    }
    if (n_pairs == 0) throw std::invalid_argument("dino_loss: no view pairs");
    ad::Value total =
        ad::scale(add_values(terms), 1.0 / static_cast<double>(n_pairs));

    // EMA center update over the batch-mean teacher output
    std::vector<double> mean(dim, 0.0);
    std::size_t n_teacher = 0;
    for (const auto& views : batch.teacher)
        for (const auto& t : views) {
            for (std::size_t i = 0; i < dim; ++i) mean[i] += t->data[i];
            ++n_teacher;
        }
    for (std::size_t i = 0; i < dim; ++i) {
        mean[i] /= static_cast<double>(n_teacher);
        state.center[i] = state.center_momentum * state.center[i] +
                          (1.0 - state.center_momentum) * mean[i];
    }
    return total;
}

ad::Value kl_distill(const ad::Value& student_logits,
                     const std::vector<double>& teacher_logits, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("kl_distill: tau must be positive");
    if (teacher_logits.size() != student_logits->size())
        throw std::invalid_argument("kl_distill: shape mismatch");
    const std::size_t rows = student_logits->rows;
    const std::size_t cols = student_logits->cols;

    ad::Value s_ls = ad::log_softmax_rows(ad::scale(student_logits, 1.0 / tau));
    // loss = tau^2/B * sum_i sum_c p_t (log p_t - s_ls); the entropy term
    // is a constant offset
    std::vector<double> coeff(rows * cols);
    double entropy_term = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> row(teacher_logits.begin() + r * cols,
                                teacher_logits.begin() + (r + 1) * cols);
        for (double& v : row) v /= tau;
        const std::vector<double> p = softmax_vec(row);
        for (std::size_t c = 0; c < cols; ++c) {
            coeff[r * cols + c] = -p[c];
            if (p[c] > 0.0) entropy_term += p[c] * std::log(p[c]);
        }
    }
    const double scale_f = tau * tau / static_cast<double>(rows);
    ad::Value ce = ad::scale(ad::dot_const(s_ls, std::move(coeff)), scale_f);
    return ad::add(ce, ad::constant(1, 1, {entropy_term * scale_f}));
}

ad::Value focal_bce(const ad::Value& logits, const std::vector<double>& targets,
                    const std::vector<double>& mask,
                    const std::vector<double>& pos_weight, double gamma) {
    return ad::focal_bce_loss(logits, targets, mask, pos_weight, gamma);
}

std::vector<double> pos_weights(
    const std::array<std::size_t, data::kNumSymptoms>& n_pos,
    const std::array<std::size_t, data::kNumSymptoms>& n_neg,
    const PosWeightPolicy& policy, std::vector<std::string>* warnings) {
    const double clip = policy.mode == PosWeightMode::Phase1
                            ? policy.clip_phase1
                            : policy.clip_correction;
    std::vector<double> out(data::kNumSymptoms);
    for (int i = 0; i < data::kNumSymptoms; ++i) {
        double w;
        if (n_pos[i] == 0) {
            w = clip;
            if (warnings)
                warnings->push_back(std::string(data::kSymptomNames[i]) +
                                    ": no positive examples, weight set to clip");
        } else {
            w = std::min(clip, static_cast<double>(n_neg[i]) /
                                   static_cast<double>(n_pos[i]));
        }
        if (policy.mode == PosWeightMode::Phase1 && policy.rare[i])
            w = std::min(policy.boost_cap, w * policy.rare_boost);
        out[i] = w;
    }
    return out;
}

double combined_loss(Phase phase, int epoch, int ssl_epoch,
                     const LossParts& parts, const LossWeights& weights) {
    if (weights.lambda_mix < 0.0 || weights.lambda_mix > 1.0)
        throw std::invalid_argument("combined_loss: lambda out of [0,1]");
    auto need = [](const std::optional<double>& v, const char* name) {
        if (!v)
            throw std::invalid_argument(
                std::string("combined_loss: missing component ") + name);
        return *v;
    };
    if (phase == Phase::Supervised) {
        return weights.phase1_disease * need(parts.disease, "disease") +
               weights.phase1_symptom * need(parts.symptom, "symptom");
    }
    const double distill =
        0.5 * (need(parts.kl, "kl") + need(parts.symptom, "symptom"));
    if (epoch < ssl_epoch)
        return weights.lambda_mix * need(parts.dino, "dino") +
               (1.0 - weights.lambda_mix) * distill;
    return distill;
}

double ema_momentum(std::size_t step, std::size_t total, double lo) {
    if (total == 0) throw std::invalid_argument("ema_momentum: total == 0");
    const double k = static_cast<double>(step) / static_cast<double>(total);
    return 1.0 - (1.0 - lo) * (std::cos(M_PI * k) + 1.0) / 2.0;
}

double lr_schedule(std::size_t step, std::size_t total, double lr_start,
                   double lr_end) {
    if (total == 0) throw std::invalid_argument("lr_schedule: total == 0");
    const double k = static_cast<double>(step) / static_cast<double>(total);
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(M_PI * k));
}

double teacher_temp_schedule(std::size_t step, std::size_t total, double lo,
                             double hi, double warmup_frac) {
    if (total == 0) throw std::invalid_argument("teacher_temp_schedule: total == 0");
    const double warm = warmup_frac * static_cast<double>(total);
    if (warm <= 0.0 || static_cast<double>(step) >= warm) return hi;
    return lo + (hi - lo) * static_cast<double>(step) / warm;
}

}  // namespace cxr::loss
