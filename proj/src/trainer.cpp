#include "cxr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cxr/archive.hpp"

namespace cxr::train {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- AdamW

void AdamW::step(std::map<std::string, ad::Value>& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, p] : params) {
        if (p->grad.size() != p->data.size()) continue;
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.size() != p->data.size()) m.assign(p->data.size(), 0.0);
        if (v.size() != p->data.size()) v.assign(p->data.size(), 0.0);
        // decoupled decay on weight matrices only
        const bool decay = name.ends_with(".w") || name.ends_with("wn.v");
        for (std::size_t i = 0; i < p->data.size(); ++i) {
            const double g = p->grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            double upd = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            if (decay) upd += weight_decay_ * p->data[i];
            p->data[i] -= lr * upd;
        }
    }
}

// -------------------------------------------------------------- helpers

namespace {

void zero_grads(nn::VitModel& model) {
    for (auto& [name, p] : model.params()) p->grad.assign(p->data.size(), 0.0);
}

std::vector<double> sigmoid_vec(const std::vector<double>& logits) {
    std::vector<double> p(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
        p[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    return p;
}

json log_to_json(const StepLog& l) {
    json j;
    j["step"] = l.step;
    j["phase"] = l.phase;
    j["fold"] = l.fold;
    j["loss_total"] = l.loss_total;
    j["loss_dino"] = l.loss_dino ? json(*l.loss_dino) : json(nullptr);
    j["loss_kl"] = l.loss_kl ? json(*l.loss_kl) : json(nullptr);
    j["loss_focal"] = l.loss_focal ? json(*l.loss_focal) : json(nullptr);
    j["lr"] = l.lr;
    j["ema_m"] = l.ema_m ? json(*l.ema_m) : json(nullptr);
    j["student_views"] = l.student_views;
    j["teacher_views"] = l.teacher_views;
    return j;
}

}  // namespace

// -------------------------------------------------------------- Trainer

Trainer::Trainer(cfg::RunConfig config, std::string prep_dir,
                 std::string split_path, std::string out_dir)
    : config_(std::move(config)),
      prep_dir_(std::move(prep_dir)),
      out_dir_(std::move(out_dir)),
      policy_(aug::AugmentPolicy::from_config(config_)),
      rng_(static_cast<std::uint64_t>(config_.get_int("seed"))) {
    manifest_ = data::load_manifest(
        (fs::path(prep_dir_) / "manifest.jsonl").string());
    split_ = data::read_split(split_path);
    fs::create_directories(fs::path(out_dir_) / "checkpoints");
    fs::create_directories(fs::path(out_dir_) / "metrics");

    images_.reserve(manifest_.records.size());
    fold_idx_.resize(split_.unlabeled_fold_ids.size());
    for (std::size_t i = 0; i < manifest_.records.size(); ++i) {
        const auto& rec = manifest_.records[i];
        images_.push_back(img::to_float(img::read_png_gray(
            (fs::path(prep_dir_) / rec.image_path).string())));
        if (split_.test_ids.count(rec.patient_id)) {
            test_idx_.push_back(i);
        } else if (split_.labeled_ids.count(rec.patient_id)) {
            labeled_idx_.push_back(i);
        } else {
            for (std::size_t f = 0; f < fold_idx_.size(); ++f)
                if (split_.unlabeled_fold_ids[f].count(rec.patient_id))
                    fold_idx_[f].push_back(i);
        }
    }
    if (labeled_idx_.empty())
        throw std::runtime_error("trainer: labeled partition is empty");

    // inverse-frequency disease class weights over the labeled partition
    std::array<std::size_t, 3> n_class{};
    for (std::size_t i : labeled_idx_) {
        const auto d = manifest_.records[i].disease;
        if (d != data::Disease::Unlabeled) ++n_class[static_cast<int>(d)];
    }
    const double total = static_cast<double>(labeled_idx_.size());
    disease_class_weights_.resize(3);
    for (int c = 0; c < 3; ++c)
        disease_class_weights_[c] =
            n_class[c] ? total / (3.0 * static_cast<double>(n_class[c])) : 0.0;

    student_ = std::make_unique<nn::VitModel>(
        nn::VitConfig::from_config(config_, /*student=*/true));
    teacher_ = std::make_unique<nn::VitModel>(
        nn::VitConfig::from_config(config_, /*student=*/false));
    student_->init_random(static_cast<std::uint64_t>(config_.get_int("seed")));
    adam_ = std::make_unique<AdamW>(
        config_.get_double("train.beta1"), config_.get_double("train.beta2"),
        config_.get_double("train.adam_eps"),
        config_.get_double("train.weight_decay"));
    dino_state_ = std::make_unique<loss::DinoState>(
        static_cast<std::size_t>(config_.get_int("model.dino_out")),
        config_.get_double("loss.center_momentum"),
        config_.get_double("loss.student_temp"));
}

void Trainer::open_log(const std::string& name, bool append) {
    const fs::path path = fs::path(out_dir_) / "metrics" / name;
    log_file_ = std::make_unique<std::ofstream>(
        path, append ? std::ios::app : std::ios::trunc);
    if (!*log_file_)
        throw std::runtime_error("trainer: cannot open log " + path.string());
    if (!append) {
        json header = json::parse(config_.to_json());
        header["type"] = "header";
        *log_file_ << header.dump() << "\n";
    }
}

void Trainer::write_log(const StepLog& l) {
    step_logs_.push_back(l);
    *log_file_ << log_to_json(l).dump() << "\n";
    log_file_->flush();
}

std::vector<double> Trainer::phase1_pos_weights(
    loss::PosWeightMode mode) const {
    std::array<std::size_t, data::kNumSymptoms> n_pos{}, n_neg{};
    for (std::size_t i : labeled_idx_) {
        const auto& rec = manifest_.records[i];
        for (int s = 0; s < data::kNumSymptoms; ++s) {
            const bool pos = rec.symptoms && rec.symptoms->bits[s];
            (pos ? n_pos[s] : n_neg[s]) += 1;
        }
    }
    loss::PosWeightPolicy policy;
    policy.mode = mode;
    policy.clip_phase1 = config_.get_double("loss.posw_clip_phase1");
    policy.clip_correction = config_.get_double("loss.posw_clip_correction");
    policy.rare_boost = config_.get_double("loss.posw_rare_boost");
    policy.boost_cap = config_.get_double("loss.posw_boost_cap");
    return loss::pos_weights(n_pos, n_neg, policy);
}

double Trainer::supervised_step(const std::vector<std::size_t>& batch,
                                double lr,
                                const std::vector<double>& pos_weight,
                                double* ce_out, double* focal_out) {
    std::vector<ad::Value> dz_rows, sy_rows;
    std::vector<int> targets;
    std::vector<double> sy_targets, sy_mask;
    for (std::size_t idx : batch) {
        const auto& rec = manifest_.records[idx];
        if (rec.disease == data::Disease::Unlabeled)
            throw std::runtime_error(
                "trainer: unlabeled record in a supervised batch");
        const aug::MultiCropBatch views =
            aug::make_views(images_[idx], policy_, rng_);
        for (const auto& view : views.globals) {
            const nn::ForwardOutput out =
                student_->forward(view, /*training=*/true, &rng_);
            dz_rows.push_back(out.disease_logits);
            sy_rows.push_back(out.symptom_logits);
            targets.push_back(static_cast<int>(rec.disease));
            for (int s = 0; s < data::kNumSymptoms; ++s) {
                sy_targets.push_back(
                    rec.symptoms && rec.symptoms->bits[s] ? 1.0 : 0.0);
                sy_mask.push_back(rec.symptoms ? 1.0 : 0.0);
            }
        }
    }
    const ad::Value ce = ad::cross_entropy_rows(ad::concat_rows(dz_rows),
                                                targets, disease_class_weights_);
    const ad::Value focal =
        loss::focal_bce(ad::concat_rows(sy_rows), sy_targets, sy_mask,
                        pos_weight, config_.get_double("loss.focal_gamma"));
    const ad::Value total =
        ad::add(ad::scale(ce, config_.get_double("loss.phase1_disease")),
                ad::scale(focal, config_.get_double("loss.phase1_symptom")));
    if (ce_out) *ce_out = ce->data[0];
    if (focal_out) *focal_out = focal->data[0];
    if (!std::isfinite(total->data[0]))
        throw std::runtime_error("trainer: non-finite supervised loss");

    zero_grads(*student_);
    ad::backward(total);
    adam_->step(student_->params(), lr);
    return total->data[0];
}

void Trainer::run_phase1(const std::string& resume_checkpoint) {
    const int epochs = config_.get_int("train.epochs_phase1");
    const int batch_size = config_.get_int("train.batch_size");
    const std::size_t steps_per_epoch =
        (labeled_idx_.size() + batch_size - 1) / batch_size;
    const std::size_t total_steps = steps_per_epoch * epochs;
    const double lr_start = config_.get_double("train.lr_start");
    const double lr_end = config_.get_double("train.lr_end");
    const std::vector<double> pos_w =
        phase1_pos_weights(loss::PosWeightMode::Phase1);

    int start_epoch = 0;
    long step = 0;
    if (!resume_checkpoint.empty()) {
        int phase = 0, fold = 0;
        restore_checkpoint(resume_checkpoint, &phase, &fold, &start_epoch,
                           &step);
        if (phase != 1)
            throw std::runtime_error("run_phase1: checkpoint is not phase 1");
    }
    open_log("train_phase1.jsonl", /*append=*/!resume_checkpoint.empty());

    for (int epoch = start_epoch; epoch < epochs; ++epoch) {
        std::vector<std::size_t> order = labeled_idx_;
        rng_.shuffle(order);
        for (std::size_t b = 0; b < order.size(); b += batch_size) {
            const std::vector<std::size_t> batch(
                order.begin() + b,
                order.begin() + std::min(order.size(),
                                         b + static_cast<std::size_t>(
                                                 batch_size)));
            const double lr =
                loss::lr_schedule(static_cast<std::size_t>(step), total_steps,
                                  lr_start, lr_end);
            double focal = 0.0;
            StepLog l;
            l.step = step;
            l.phase = 1;
            l.loss_total = supervised_step(batch, lr, pos_w, nullptr, &focal);
            l.loss_focal = focal;
            l.lr = lr;
            l.student_views = 2;
            write_log(l);
            ++step;
        }
        save_checkpoint((fs::path(out_dir_) / "checkpoints" /
                         ("phase1_epoch" + std::to_string(epoch) + ".ckpt"))
                            .string(),
                        1, -1, epoch + 1, step);
    }
    save_checkpoint(
        (fs::path(out_dir_) / "checkpoints" / "phase1.ckpt").string(), 1, -1,
        epochs, step);
}

void Trainer::run_correction(long trigger_step, int fold, double lr,
                             const std::vector<double>& pos_weight,
                             const data::WeightedSampler& sampler) {
    const int batch_size = config_.get_int("train.batch_size");
    const int n_steps = config_.get_int("train.correction_steps");
    for (int s = 0; s < n_steps; ++s) {
        std::vector<std::size_t> batch(batch_size);
        for (auto& idx : batch) idx = labeled_idx_[sampler.draw(rng_)];
        double focal = 0.0;
        StepLog l;
        l.step = trigger_step;
        l.phase = 3;
        l.fold = fold;
        l.loss_total = supervised_step(batch, lr, pos_weight, nullptr, &focal);
        l.loss_focal = focal;
        l.lr = lr;
        l.student_views = 2;
        write_log(l);
    }
}

void Trainer::run_phase2(const std::string& init_checkpoint,
                         const std::string& resume_checkpoint) {
    const int epochs = config_.get_int("train.epochs_per_fold");
    const int batch_size = config_.get_int("train.batch_size");
    const int correction_interval = config_.get_int("train.correction_interval");
    const double tau = config_.get_double("loss.kl_temp");
    const double gamma = config_.get_double("loss.focal_gamma");
    const double lambda = config_.get_double("loss.lambda");
    const double ema_lo = config_.get_double("train.ema_lo");
    const double lr_start = config_.get_double("train.lr_start");
    const double lr_end = config_.get_double("train.lr_end");
    int ssl_epoch = config_.get_int("train.ssl_epoch");
    if (ssl_epoch == 0) ssl_epoch = epochs / 2;  // default: half the fold
    if (ssl_epoch > epochs)
        throw std::runtime_error("run_phase2: ssl_epoch exceeds epochs_per_fold");

    int start_fold = 0, start_epoch = 0;
    long step = 0;
    if (!resume_checkpoint.empty()) {
        int phase = 0;
        restore_checkpoint(resume_checkpoint, &phase, &start_fold, &start_epoch,
                           &step);
        if (phase != 2)
            throw std::runtime_error("run_phase2: checkpoint is not phase 2");
        if (start_epoch >= epochs) {
            ++start_fold;
            start_epoch = 0;
        }
    } else {
        const std::string init =
            init_checkpoint.empty()
                ? (fs::path(out_dir_) / "checkpoints" / "phase1.ckpt").string()
                : init_checkpoint;
        int phase = 0, fold = 0, epoch = 0;
        long p1_step = 0;
        restore_checkpoint(init, &phase, &fold, &epoch, &p1_step);
        if (phase != 1)
            throw std::runtime_error("run_phase2: init checkpoint is not phase 1");
        // teacher warm-starts as an exact copy of the student
        for (auto& [name, p] : teacher_->params())
            p->data = student_->params().at(name)->data;
        adam_ = std::make_unique<AdamW>(config_.get_double("train.beta1"),
                                        config_.get_double("train.beta2"),
                                        config_.get_double("train.adam_eps"),
                                        config_.get_double("train.weight_decay"));
        std::fill(dino_state_->center.begin(), dino_state_->center.end(), 0.0);
    }
    open_log("train_phase2.jsonl", /*append=*/!resume_checkpoint.empty());

    const std::vector<double> pos_w_corr =
        phase1_pos_weights(loss::PosWeightMode::Correction);
    const data::WeightedSampler sampler([this] {
        std::vector<const data::SampleRecord*> recs;
        for (std::size_t i : labeled_idx_) recs.push_back(&manifest_.records[i]);
        return data::sampler_weights(recs);
    }());
    const std::vector<double> pos_w_ones(data::kNumSymptoms, 1.0);
    const double tt_lo = config_.get_double("loss.teacher_temp_lo");
    const double tt_hi = config_.get_double("loss.teacher_temp_hi");
    const double tt_warm = config_.get_double("loss.teacher_temp_warmup");

    for (int fold = start_fold; fold < static_cast<int>(fold_idx_.size());
         ++fold) {
        // cumulative union of folds 0..fold
        std::vector<std::size_t> pool;
        for (int f = 0; f <= fold; ++f)
            pool.insert(pool.end(), fold_idx_[f].begin(), fold_idx_[f].end());
        if (pool.empty())
            throw std::runtime_error("run_phase2: fold " +
                                     std::to_string(fold) + " has no data");
        const std::size_t steps_per_epoch =
            (pool.size() + batch_size - 1) / batch_size;
        const std::size_t fold_total = steps_per_epoch * epochs;  // schedule K
        std::size_t fold_step = steps_per_epoch * start_epoch;

        for (int epoch = start_epoch; epoch < epochs; ++epoch) {
            std::vector<std::size_t> order = pool;
            rng_.shuffle(order);
            for (std::size_t b = 0; b < order.size(); b += batch_size) {
                const std::vector<std::size_t> batch(
                    order.begin() + b,
                    order.begin() +
                        std::min(order.size(),
                                 b + static_cast<std::size_t>(batch_size)));
                const double lr = loss::lr_schedule(fold_step, fold_total,
                                                    lr_start, lr_end);
                const double ema_m =
                    loss::ema_momentum(fold_step, fold_total, ema_lo);
                const double t_temp = loss::teacher_temp_schedule(
                    fold_step, fold_total, tt_lo, tt_hi, tt_warm);

                loss::DinoBatch dino_batch;
                std::vector<ad::Value> dz_rows, sy_rows;
                std::vector<double> kl_targets, sy_targets, sy_mask;
                int n_views = 0;
                for (std::size_t idx : batch) {
                    const aug::MultiCropBatch views =
                        aug::make_views(images_[idx], policy_, rng_);
                    std::vector<ad::Value> s_dino, t_dino;
                    // teacher pseudo-targets: mean over the two globals
                    std::vector<double> t_dz(3, 0.0), t_sy(data::kNumSymptoms,
                                                           0.0);
                    for (const auto& g : views.globals) {
                        const nn::ForwardOutput t =
                            teacher_->forward(g, /*training=*/false);
                        t_dino.push_back(t.dino_logits);
                        for (int c = 0; c < 3; ++c)
                            t_dz[c] += 0.5 * t.disease_logits->data[c];
                        for (int s = 0; s < data::kNumSymptoms; ++s)
                            t_sy[s] += 0.5 * t.symptom_logits->data[s];
                    }
                    const std::vector<double> t_sy_prob = sigmoid_vec(t_sy);
                    auto student_view = [&](const aug::View& view) {
                        const nn::ForwardOutput s =
                            student_->forward(view, /*training=*/true, &rng_);
                        s_dino.push_back(s.dino_logits);
                        dz_rows.push_back(s.disease_logits);
                        sy_rows.push_back(s.symptom_logits);
                        kl_targets.insert(kl_targets.end(), t_dz.begin(),
                                          t_dz.end());
                        sy_targets.insert(sy_targets.end(), t_sy_prob.begin(),
                                          t_sy_prob.end());
                        ++n_views;
                    };
                    for (const auto& g : views.globals) student_view(g);
                    for (const auto& l : views.locals) student_view(l);
                    dino_batch.student.push_back(std::move(s_dino));
                    dino_batch.teacher.push_back(std::move(t_dino));
                }
                sy_mask.assign(sy_targets.size(), 1.0);

                const ad::Value dino =
                    loss::dino_loss(dino_batch, *dino_state_, t_temp);
                const ad::Value kl = loss::kl_distill(ad::concat_rows(dz_rows),
                                                      kl_targets, tau);
                const ad::Value focal =
                    loss::focal_bce(ad::concat_rows(sy_rows), sy_targets,
                                    sy_mask, pos_w_ones, gamma);
                const ad::Value distill =
                    ad::scale(ad::add(kl, focal), 0.5);
                const ad::Value total =
                    epoch < ssl_epoch
                        ? ad::add(ad::scale(dino, lambda),
                                  ad::scale(distill, 1.0 - lambda))
                        : distill;
                if (!std::isfinite(total->data[0]))
                    throw std::runtime_error(
                        "run_phase2: non-finite loss at step " +
                        std::to_string(step));

                zero_grads(*student_);
                ad::backward(total);
                adam_->step(student_->params(), lr);
                nn::ema_update(*teacher_, *student_, ema_m);

                StepLog l;
                l.step = step;
                l.phase = 2;
                l.fold = fold;
                l.loss_total = total->data[0];
                l.loss_dino = dino->data[0];
                l.loss_kl = kl->data[0];
                l.loss_focal = focal->data[0];
                l.lr = lr;
                l.ema_m = ema_m;
                l.student_views = n_views / static_cast<int>(batch.size());
                l.teacher_views = 2;
                write_log(l);
                ++step;
                ++fold_step;

                if (step % correction_interval == 0)
                    run_correction(step, fold, lr, pos_w_corr, sampler);
            }
            save_checkpoint(
                (fs::path(out_dir_) / "checkpoints" /
                 ("phase2_fold" + std::to_string(fold) + "_epoch" +
                  std::to_string(epoch) + ".ckpt"))
                    .string(),
                2, fold, epoch + 1, step);
        }
        start_epoch = 0;
    }
    save_checkpoint(
        (fs::path(out_dir_) / "checkpoints" / "phase2.ckpt").string(), 2,
        static_cast<int>(fold_idx_.size()) - 1, epochs, step);
}

// ---------------------------------------------------------- checkpoints

void Trainer::save_checkpoint(const std::string& path, int phase, int fold,
                              int epoch, long step) const {
    io::TensorArchive ar;
    auto put_model = [&](const char* prefix, const nn::VitModel& m) {
        for (const auto& [name, p] : m.params()) {
            io::NamedTensor t;
            t.rows = p->rows;
            t.cols = p->cols;
            t.data = p->data;
            ar.tensors[std::string(prefix) + name] = std::move(t);
        }
    };
    put_model("student.", *student_);
    put_model("teacher.", *teacher_);
    for (const auto& [name, m] : const_cast<AdamW&>(*adam_).moments1()) {
        io::NamedTensor t;
        t.rows = 1;
        t.cols = m.size();
        t.data = m;
        ar.tensors["adam.m." + name] = std::move(t);
    }
    for (const auto& [name, v] : const_cast<AdamW&>(*adam_).moments2()) {
        io::NamedTensor t;
        t.rows = 1;
        t.cols = v.size();
        t.data = v;
        ar.tensors["adam.v." + name] = std::move(t);
    }
    {
        io::NamedTensor t;
        t.rows = 1;
        t.cols = dino_state_->center.size();
        t.data = dino_state_->center;
        ar.tensors["dino.center"] = std::move(t);
    }
    json meta = json::parse(config_.to_json());
    meta["phase"] = phase;
    meta["fold"] = fold;
    meta["epoch"] = epoch;  // completed epochs in the current phase/fold
    meta["step"] = step;
    meta["adam_t"] = adam_->t();
    meta["rng"] = rng_.save_state();
    ar.metadata_json = meta.dump();
    io::write_archive(path, ar);
}

void Trainer::restore_checkpoint(const std::string& path, int* phase,
                                 int* fold, int* epoch, long* step) {
    const io::TensorArchive ar = io::read_archive(path);
    const json meta = json::parse(ar.metadata_json);
    *phase = meta.at("phase").get<int>();
    *fold = meta.at("fold").get<int>();
    *epoch = meta.at("epoch").get<int>();
    *step = meta.at("step").get<long>();

    auto take_model = [&](const char* prefix, nn::VitModel& m) {
        for (auto& [name, p] : m.params()) {
            auto it = ar.tensors.find(std::string(prefix) + name);
            if (it == ar.tensors.end())
                throw std::runtime_error("checkpoint missing tensor " +
                                         std::string(prefix) + name);
            if (it->second.data.size() != p->data.size())
                throw std::runtime_error("checkpoint shape mismatch at " +
                                         name);
            p->data = it->second.data;
        }
    };
    take_model("student.", *student_);
    take_model("teacher.", *teacher_);
    adam_ = std::make_unique<AdamW>(config_.get_double("train.beta1"),
                                    config_.get_double("train.beta2"),
                                    config_.get_double("train.adam_eps"),
                                    config_.get_double("train.weight_decay"));
    adam_->set_t(meta.at("adam_t").get<long>());
    for (const auto& [name, t] : ar.tensors) {
        if (name.rfind("adam.m.", 0) == 0)
            adam_->moments1()[name.substr(7)] = t.data;
        else if (name.rfind("adam.v.", 0) == 0)
            adam_->moments2()[name.substr(7)] = t.data;
    }
    dino_state_->center = ar.tensors.at("dino.center").data;
    rng_.restore_state(meta.at("rng").get<std::string>());
}

// ---------------------------------------------------------------- eval

namespace {

EvalResult evaluate_images(const nn::VitModel& model,
                           const std::vector<const data::SampleRecord*>& recs,
                           const std::vector<const img::ImageF*>& images,
                           const cfg::RunConfig& cfg) {
    if (recs.empty()) throw std::runtime_error("evaluate: no records");
    const aug::AugmentPolicy policy = aug::AugmentPolicy::from_config(cfg);
    const double threshold = cfg.get_double("eval.threshold");

    std::vector<int> preds, truths;
    std::vector<double> probs;
    std::vector<std::uint8_t> bits;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        Rng view_rng(0);  // clean view: no stochastic draws take effect
        const aug::View view = aug::make_view(*images[i], policy.global_clean,
                                              policy, view_rng, "eval");
        const nn::ForwardOutput out = model.forward(view, /*training=*/false);
        int arg = 0;
        for (int c = 1; c < 3; ++c)
            if (out.disease_logits->data[c] > out.disease_logits->data[arg])
                arg = c;
        preds.push_back(arg);
        truths.push_back(static_cast<int>(recs[i]->disease));
        const std::vector<double> p = sigmoid_vec(out.symptom_logits->data);
        probs.insert(probs.end(), p.begin(), p.end());
        for (int s = 0; s < data::kNumSymptoms; ++s)
            bits.push_back(recs[i]->symptoms && recs[i]->symptoms->bits[s] ? 1
                                                                           : 0);
    }
    EvalResult r;
    r.disease = metrics::disease_metrics(preds, truths);
    r.symptom = metrics::symptom_metrics(probs, bits, recs.size(), threshold);
    return r;
}

}  // namespace

EvalResult Trainer::evaluate_split(const std::string& which,
                                   const std::string& part) {
    const nn::VitModel& model =
        which == "teacher" ? *teacher_
        : which == "student"
            ? *student_
            : throw std::runtime_error("evaluate_split: which must be "
                                       "student|teacher");
    const std::vector<std::size_t>& idx =
        part == "test" ? test_idx_
        : part == "labeled"
            ? labeled_idx_
            : throw std::runtime_error("evaluate_split: unknown part " + part);
    std::vector<const data::SampleRecord*> recs;
    std::vector<const img::ImageF*> imgs;
    for (std::size_t i : idx) {
        recs.push_back(&manifest_.records[i]);
        imgs.push_back(&images_[i]);
    }
    return evaluate_images(model, recs, imgs, config_);
}

EvalResult evaluate_records(const nn::VitModel& model,
                            const std::vector<const data::SampleRecord*>& recs,
                            const std::string& image_root,
                            const cfg::RunConfig& cfg) {
    std::vector<img::ImageF> storage;
    storage.reserve(recs.size());
    for (const auto* r : recs)
        storage.push_back(img::to_float(img::read_png_gray(
            (fs::path(image_root) / r->image_path).string())));
    std::vector<const img::ImageF*> imgs;
    for (const auto& im : storage) imgs.push_back(&im);
    return evaluate_images(model, recs, imgs, cfg);
}

cfg::RunConfig config_from_checkpoint(const std::string& path) {
    const io::TensorArchive ar = io::read_archive(path);
    const json meta = json::parse(ar.metadata_json);
    const cfg::Profile profile =
        cfg::profile_from_string(meta.at("profile").get<std::string>());
    cfg::RunConfig c = cfg::RunConfig::defaults(profile);
    for (const auto& [k, v] : meta.at("config").items())
        c.set(k, v.get<std::string>());
    return c;
}

std::unique_ptr<nn::VitModel> model_from_checkpoint(const std::string& path,
                                                    const std::string& which) {
    if (which != "student" && which != "teacher")
        throw std::runtime_error("model_from_checkpoint: which must be "
                                 "student|teacher");
    const cfg::RunConfig c = config_from_checkpoint(path);
    auto model = std::make_unique<nn::VitModel>(
        nn::VitConfig::from_config(c, which == "student"));
    const io::TensorArchive ar = io::read_archive(path);
    for (auto& [name, p] : model->params()) {
        auto it = ar.tensors.find(which + "." + name);
        if (it == ar.tensors.end())
            throw std::runtime_error("checkpoint missing tensor " + which +
                                     "." + name);
        p->data = it->second.data;
    }
    return model;
}

}  // namespace cxr::train
