#pragma once

// Training losses and scalar schedules: DINO loss with centering and
// sharpening, temperature-scaled KL distillation, focal BCE with
// prevalence-derived positive weights, phase-dependent loss mixing, EMA
// momentum and cosine LR annealing.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cxr/ad.hpp"
#include "cxr/manifest.hpp"

namespace cxr::loss {

struct DinoState {
    std::vector<double> center;  // dino_out entries, starts at zero
    double center_momentum = 0.9;
    double student_temp = 0.1;

    explicit DinoState(std::size_t out_dim, double momentum = 0.9,
                       double stu_temp = 0.1)
        : center(out_dim, 0.0),
          center_momentum(momentum),
          student_temp(stu_temp) {}
};

// Per-image view outputs of the DINO head. Student views are ordered
// globals-first; the teacher carries only the global views.
struct DinoBatch {
    std::vector<std::vector<ad::Value>> student;  // [image][view] 1 x D
    std::vector<std::vector<ad::Value>> teacher;  // [image][global] 1 x D
    int n_globals = 2;
};

// Mean cross-entropy over (teacher view t, student view s) pairs with
// s != t among the globals; teacher softmax is centered and sharpened at
// teacher_temp. Updates the center by EMA over the batch-mean teacher
// output. Teacher values are treated as constants.
ad::Value dino_loss(const DinoBatch& batch, DinoState& state,
                    double teacher_temp);

// tau^2-scaled KL(softmax(teacher/tau) || softmax(student/tau)),
// batch-averaged; teacher_logits are constants.
ad::Value kl_distill(const ad::Value& student_logits,
                     const std::vector<double>& teacher_logits, double tau);

// Focal BCE on sigmoid logits; targets may be soft, mask selects labeled
// elements, pos_weight has one entry per label.
ad::Value focal_bce(const ad::Value& logits, const std::vector<double>& targets,
                    const std::vector<double>& mask,
                    const std::vector<double>& pos_weight, double gamma);

enum class PosWeightMode { Phase1, Correction };

struct PosWeightPolicy {
    PosWeightMode mode = PosWeightMode::Phase1;
    double clip_phase1 = 50.0;
    double clip_correction = 20.0;
    double rare_boost = 1.5;
    double boost_cap = 75.0;
    // rare labels by canonical symptom index
    std::array<bool, data::kNumSymptoms> rare = {false, false, false, false,
                                                 false, true,  true};
};

// min(clip, n_neg/n_pos) per label, with the rare boost capped in Phase 1.
// n_pos == 0 falls back to the clip and reports a warning.
std::vector<double> pos_weights(
    const std::array<std::size_t, data::kNumSymptoms>& n_pos,
    const std::array<std::size_t, data::kNumSymptoms>& n_neg,
    const PosWeightPolicy& policy, std::vector<std::string>* warnings = nullptr);

enum class Phase { Supervised = 1, Distillation = 2 };

struct LossParts {
    std::optional<double> disease;  // CE (phase 1 / correction)
    std::optional<double> symptom;  // focal BCE
    std::optional<double> dino;
    std::optional<double> kl;
};

struct LossWeights {
    double phase1_disease = 0.25;
    double phase1_symptom = 0.75;
    double lambda_mix = 0.5;  // in [0,1]
};

// Phase 1: 0.25*disease + 0.75*symptom.
// Phase 2, epoch < ssl_epoch: lambda*dino + (1-lambda)*distill.
// Phase 2, epoch >= ssl_epoch: distill, where distill = (kl + symptom)/2.
double combined_loss(Phase phase, int epoch, int ssl_epoch,
                     const LossParts& parts, const LossWeights& weights);

// cosine schedules
double ema_momentum(std::size_t step, std::size_t total, double lo = 0.9995);
double lr_schedule(std::size_t step, std::size_t total, double lr_start = 5e-5,
                   double lr_end = 1e-6);
// linear warmup lo -> hi over the first warmup_frac of total steps
double teacher_temp_schedule(std::size_t step, std::size_t total, double lo,
                             double hi, double warmup_frac);

}  // namespace cxr::loss
