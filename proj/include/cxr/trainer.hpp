#pragma once

// DISTL training orchestration: Phase 1 supervised pretraining, Phase 2
// cumulative-fold semi-supervised distillation with an EMA teacher, and
// periodic Phase 3 correction. All randomness flows through one seeded
// stream that is checkpointed, so runs and resumes are bit-reproducible.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cxr/augment.hpp"
#include "cxr/config.hpp"
#include "cxr/image.hpp"
#include "cxr/losses.hpp"
#include "cxr/manifest.hpp"
#include "cxr/metrics.hpp"
#include "cxr/rng.hpp"
#include "cxr/split.hpp"
#include "cxr/vit.hpp"

namespace cxr::train {

// decoupled-weight-decay Adam; decay applies to weight matrices only
class AdamW {
public:
    AdamW(double beta1, double beta2, double eps, double weight_decay)
        : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

    void step(std::map<std::string, ad::Value>& params, double lr);

    long t() const { return t_; }
    std::map<std::string, std::vector<double>>& moments1() { return m_; }
    std::map<std::string, std::vector<double>>& moments2() { return v_; }
    void set_t(long t) { t_ = t; }

private:
    double beta1_, beta2_, eps_, weight_decay_;
    long t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

struct EvalResult {
    metrics::MetricsReport disease;
    metrics::MetricsReport symptom;
};

struct StepLog {
    long step = 0;
    int phase = 1;
    int fold = -1;
    double loss_total = 0.0;
    std::optional<double> loss_dino, loss_kl, loss_focal;
    double lr = 0.0;
    std::optional<double> ema_m;
    int student_views = 0;
    int teacher_views = 0;
};

class Trainer {
public:
    Trainer(cfg::RunConfig config, std::string prep_dir, std::string split_path,
            std::string out_dir);

    // trains on the labeled partition; writes checkpoints per epoch and
    // checkpoints/phase1.ckpt at the end
    void run_phase1(const std::string& resume_checkpoint = "");

    // three cumulative folds of distillation starting from the Phase-1
    // checkpoint; writes checkpoints/phase2.ckpt at the end
    void run_phase2(const std::string& init_checkpoint = "",
                    const std::string& resume_checkpoint = "");

    // clean-view evaluation of "student" or "teacher" on "test"/"labeled"
    EvalResult evaluate_split(const std::string& which,
                              const std::string& part = "test");

    nn::VitModel& student() { return *student_; }
    nn::VitModel& teacher() { return *teacher_; }
    const std::vector<StepLog>& step_logs() const { return step_logs_; }
    const cfg::RunConfig& config() const { return config_; }

    void save_checkpoint(const std::string& path, int phase, int fold,
                         int epoch, long step) const;

private:
    struct LoadedSample {
        const data::SampleRecord* record;
        img::ImageF image;
    };

    cfg::RunConfig config_;
    std::string prep_dir_, out_dir_;
    data::Manifest manifest_;
    data::SplitPlan split_;
    aug::AugmentPolicy policy_;
    std::vector<img::ImageF> images_;  // aligned with manifest_.records

    std::unique_ptr<nn::VitModel> student_;
    std::unique_ptr<nn::VitModel> teacher_;
    std::unique_ptr<AdamW> adam_;
    std::unique_ptr<loss::DinoState> dino_state_;
    Rng rng_;

    std::vector<std::size_t> labeled_idx_, test_idx_;
    std::vector<std::vector<std::size_t>> fold_idx_;  // 3 unlabeled folds

    std::vector<double> disease_class_weights_;
    std::vector<StepLog> step_logs_;
    std::unique_ptr<std::ofstream> log_file_;

    void open_log(const std::string& name, bool append);
    void write_log(const StepLog& l);
    void restore_checkpoint(const std::string& path, int* phase, int* fold,
                            int* epoch, long* step);
    // one supervised optimizer step on the given manifest indices
    double supervised_step(const std::vector<std::size_t>& batch, double lr,
                           const std::vector<double>& pos_weight,
                           double* ce_out, double* focal_out);
    void run_correction(long trigger_step, int fold, double lr,
                        const std::vector<double>& pos_weight,
                        const data::WeightedSampler& sampler);
    std::vector<double> phase1_pos_weights(loss::PosWeightMode mode) const;
};

// reconstructs the resolved config stored in a checkpoint's metadata
cfg::RunConfig config_from_checkpoint(const std::string& path);
// builds "student" or "teacher" with the checkpointed weights
std::unique_ptr<nn::VitModel> model_from_checkpoint(const std::string& path,
                                                    const std::string& which);

// clean-global-view evaluation of arbitrary records
EvalResult evaluate_records(const nn::VitModel& model,
                            const std::vector<const data::SampleRecord*>& recs,
                            const std::string& image_root,
                            const cfg::RunConfig& cfg);

}  // namespace cxr::train
