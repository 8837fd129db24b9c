// cxr: prep -> split -> train -> eval -> explain -> report pipeline driver.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cxr/config.hpp"
#include "cxr/gradcam.hpp"
#include "cxr/image.hpp"
#include "cxr/manifest.hpp"
#include "cxr/metrics.hpp"
#include "cxr/prep.hpp"
#include "cxr/qc.hpp"
#include "cxr/split.hpp"
#include "cxr/synth.hpp"
#include "cxr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string profile = "toy";
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--profile", opts.profile, "config profile: toy|paper");
    cmd->add_option("--config", opts.config_path, "key = value config file");
    cmd->add_option("--set", opts.overrides, "override, key=value (repeatable)");
}

cxr::cfg::RunConfig resolve_config(const CommonOpts& opts) {
    cxr::cfg::RunConfig c = cxr::cfg::RunConfig::load(
        cxr::cfg::profile_from_string(opts.profile), opts.config_path,
        opts.overrides);
    if (const char* seed = std::getenv("DISTL_SEED")) c.set("seed", seed);
    return c;
}

void make_out_layout(const std::string& out_dir) {
    for (const char* sub : {"checkpoints", "metrics", "overlays", "reports"})
        fs::create_directories(fs::path(out_dir) / sub);
}

cxr::metrics::MetricsReport report_from_json(
    const json& j, const std::vector<std::string>& order) {
    cxr::metrics::MetricsReport r;
    auto add = [&](const std::string& name, const json& c) {
        r.per_class.push_back(cxr::metrics::from_counts(
            name, c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(),
            c.at("fn").get<std::size_t>(), c.at("tn").get<std::size_t>()));
    };
    // JSON objects sort keys; restore the canonical class order
    for (const auto& name : order)
        if (j.at("per_class").contains(name)) add(name, j.at("per_class")[name]);
    for (const auto& [name, c] : j.at("per_class").items())
        if (std::find(order.begin(), order.end(), name) == order.end())
            add(name, c);
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_precision = j.at("macro_precision").get<double>();
    r.macro_recall = j.at("macro_recall").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.threshold = j.at("threshold").get<double>();
    return r;
}

void write_eval_outputs(const std::string& out_dir,
                        const cxr::train::EvalResult& result) {
    make_out_layout(out_dir);
    const std::string js =
        cxr::metrics::report_to_json(result.disease, result.symptom);
    std::ofstream out(fs::path(out_dir) / "reports" / "eval.json");
    out << js << "\n";
    std::cout << cxr::metrics::render_disease_table(result.disease) << "\n"
              << cxr::metrics::render_symptom_table(result.symptom);
}

int run(int argc, char** argv) {
    CLI::App app{"semi-supervised chest-radiograph training pipeline"};
    app.require_subcommand(1);

    // ---- synth
    auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
    CommonOpts synth_opts;
    std::string synth_out;
    add_common(synth, synth_opts);
    synth->add_option("--out-dir", synth_out, "corpus directory")->required();

    // ---- prep
    auto* prep = app.add_subcommand("prep", "QC + lung crop preprocessing");
    CommonOpts prep_opts;
    std::string prep_manifest, prep_root, prep_out;
    add_common(prep, prep_opts);
    prep->add_option("--manifest", prep_manifest, "input manifest JSONL")
        ->required();
    prep->add_option("--image-root", prep_root, "directory of source images")
        ->required();
    prep->add_option("--out-dir", prep_out, "prep output directory")->required();

    // ---- split
    auto* split = app.add_subcommand("split", "patient-wise split");
    CommonOpts split_opts;
    std::string split_manifest, split_out;
    add_common(split, split_opts);
    split->add_option("--manifest", split_manifest, "prepped manifest JSONL")
        ->required();
    split->add_option("--out", split_out, "split JSON output path")->required();

    // ---- train
    auto* train = app.add_subcommand("train", "phase 1 or 2 training");
    CommonOpts train_opts;
    int train_phase = 1;
    std::string train_prep, train_split, train_out, train_resume, train_init;
    add_common(train, train_opts);
    train->add_option("--phase", train_phase, "1 (supervised) or 2 (distill)")
        ->required();
    train->add_option("--prep-dir", train_prep, "prep output directory")
        ->required();
    train->add_option("--split", train_split, "split JSON path")->required();
    train->add_option("--out-dir", train_out, "run output directory")
        ->required();
    train->add_option("--resume", train_resume, "checkpoint to resume from");
    train->add_option("--init", train_init,
                      "phase-1 checkpoint to start phase 2 from");

    // ---- eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_ckpt, eval_prep, eval_split, eval_out;
    std::string eval_which = "teacher", eval_part = "test";
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
    eval->add_option("--prep-dir", eval_prep, "prep output directory")
        ->required();
    eval->add_option("--split", eval_split, "split JSON path")->required();
    eval->add_option("--out-dir", eval_out, "run output directory")->required();
    eval->add_option("--which", eval_which, "student|teacher");
    eval->add_option("--part", eval_part, "test|labeled");

    // ---- explain
    auto* explain = app.add_subcommand("explain", "Grad-CAM overlay");
    std::string ex_ckpt, ex_image, ex_symptom, ex_box, ex_out;
    std::string ex_which = "teacher";
    explain->add_option("--checkpoint", ex_ckpt, "checkpoint path")->required();
    explain->add_option("--image", ex_image, "input PNG")->required();
    explain->add_option("--symptom", ex_symptom, "symptom name")->required();
    explain->add_option("--box", ex_box, "annotation box x,y,w,h");
    explain->add_option("--out-dir", ex_out, "run output directory")->required();
    explain->add_option("--which", ex_which, "student|teacher");

    // ---- report
    auto* report = app.add_subcommand("report", "render metric tables");
    std::string report_metrics;
    report->add_option("--metrics", report_metrics, "eval JSON path")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;  // usage problems exit 1
    }

    if (synth->parsed()) {
        const cxr::cfg::RunConfig c = resolve_config(synth_opts);
        cxr::synth::SynthOptions opt;
        opt.n_images = c.get_int("synth.n_images");
        opt.image_size = c.get_int("synth.image_size");
        opt.seed = static_cast<std::uint64_t>(c.get_int("seed"));
        const cxr::data::Manifest m = cxr::synth::generate_corpus(synth_out, opt);
        std::cout << "synth: wrote " << m.records.size() << " images under "
                  << synth_out << "\n";
    } else if (prep->parsed()) {
        const cxr::cfg::RunConfig c = resolve_config(prep_opts);
        const cxr::data::Manifest m = cxr::data::load_manifest(prep_manifest);
        cxr::qc::ThresholdMaskProvider provider(
            c.get_int("prep.mask_threshold"), c.get_int("prep.working_size"));
        const cxr::prep::PrepResult r =
            cxr::prep::run_prep(m, prep_root, prep_out, c, provider);
        std::cout << "prep: accepted " << r.accepted << ", rejected "
                  << r.rejected << "\n";
    } else if (split->parsed()) {
        const cxr::cfg::RunConfig c = resolve_config(split_opts);
        const cxr::data::Manifest m = cxr::data::load_manifest(split_manifest);
        const cxr::data::SplitPlan plan = cxr::data::make_split(
            m, static_cast<std::uint64_t>(c.get_int("seed")),
            c.get_double("split.test_fraction"),
            c.get_double("split.labeled_fraction"),
            c.get_bool("split.stratify"));
        cxr::data::write_split(split_out, plan);
        std::cout << "split: " << plan.test_ids.size() << " test, "
                  << plan.labeled_ids.size() << " labeled patients\n";
    } else if (train->parsed()) {
        const cxr::cfg::RunConfig c = resolve_config(train_opts);
        make_out_layout(train_out);
        cxr::train::Trainer trainer(c, train_prep, train_split, train_out);
        if (train_phase == 1) {
            trainer.run_phase1(train_resume);
        } else if (train_phase == 2) {
            trainer.run_phase2(train_init, train_resume);
        } else {
            std::cerr << "train: --phase must be 1 or 2\n";
            return 1;
        }
        std::cout << "train: phase " << train_phase << " complete, "
                  << trainer.step_logs().size() << " steps logged\n";
    } else if (eval->parsed()) {
        const cxr::cfg::RunConfig c =
            cxr::train::config_from_checkpoint(eval_ckpt);
        auto model = cxr::train::model_from_checkpoint(eval_ckpt, eval_which);
        const cxr::data::Manifest m = cxr::data::load_manifest(
            (fs::path(eval_prep) / "manifest.jsonl").string());
        const cxr::data::SplitPlan plan = cxr::data::read_split(eval_split);
        const auto& ids =
            eval_part == "labeled" ? plan.labeled_ids : plan.test_ids;
        const auto recs = cxr::data::records_for(m, ids);
        const cxr::train::EvalResult result =
            cxr::train::evaluate_records(*model, recs, eval_prep, c);
        write_eval_outputs(eval_out, result);
    } else if (explain->parsed()) {
        const cxr::cfg::RunConfig c =
            cxr::train::config_from_checkpoint(ex_ckpt);
        auto model = cxr::train::model_from_checkpoint(ex_ckpt, ex_which);
        const int symptom = cxr::data::symptom_index(ex_symptom);
        if (symptom < 0) {
            std::cerr << "explain: unknown symptom \"" << ex_symptom << "\"\n";
            return 1;
        }
        const cxr::img::Image image = cxr::img::read_png_gray(ex_image);
        const cxr::aug::AugmentPolicy policy =
            cxr::aug::AugmentPolicy::from_config(c);
        cxr::Rng rng(0);
        const cxr::aug::View view =
            cxr::aug::make_view(cxr::img::to_float(image), policy.global_clean,
                                policy, rng, "explain");
        const cxr::explain::SaliencyMap map = cxr::explain::grad_cam(
            *model, view, symptom, image.width, image.height);

        std::optional<cxr::explain::Box> box;
        if (!ex_box.empty()) {
            cxr::explain::Box b;
            if (std::sscanf(ex_box.c_str(), "%d,%d,%d,%d", &b.x, &b.y, &b.w,
                            &b.h) != 4) {
                std::cerr << "explain: --box must be x,y,w,h\n";
                return 1;
            }
            box = b;
        }
        make_out_layout(ex_out);
        const std::string stem = fs::path(ex_image).stem().string();
        const fs::path png = fs::path(ex_out) / "overlays" /
                             (stem + "_" + ex_symptom + ".png");
        cxr::explain::write_overlay_png(png.string(), image, map, box,
                                        c.get_double("explain.alpha"));

        json j;
        j["image"] = ex_image;
        j["symptom"] = ex_symptom;
        j["overlay"] = png.string();
        const double mx =
            *std::max_element(map.map.begin(), map.map.end());
        j["map"] = {{"width", map.width},
                    {"height", map.height},
                    {"grid", map.grid_w},
                    {"max", mx}};
        if (box) {
            const cxr::explain::OverlapScore s =
                cxr::explain::overlap(map, *box, c.get_double("explain.binarize_q"));
            j["overlap"] = {{"iou", s.iou},
                            {"iou_defined", s.iou_defined},
                            {"pointing_hit", s.pointing_hit}};
        }
        std::ofstream out(fs::path(ex_out) / "reports" /
                          (stem + "_" + ex_symptom + ".json"));
        out << j.dump(2) << "\n";
        std::cout << j.dump(2) << "\n";
    } else if (report->parsed()) {
        std::ifstream in(report_metrics);
        if (!in) {
            std::cerr << "report: cannot open " << report_metrics << "\n";
            return 2;
        }
        const json j = json::parse(in);
        std::vector<std::string> symptom_order(cxr::data::kSymptomNames.begin(),
                                               cxr::data::kSymptomNames.end());
        std::cout << cxr::metrics::render_disease_table(report_from_json(
                         j.at("disease"), {"normal", "tb", "covid"}))
                  << "\n"
                  << cxr::metrics::render_symptom_table(
                         report_from_json(j.at("symptom"), symptom_order));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
