#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cxr/config.hpp"

using namespace cxr;

TEST_CASE("paper profile defaults carry the reference hyperparameters") {
    const cfg::RunConfig c = cfg::RunConfig::defaults(cfg::Profile::Paper);
    CHECK(c.get_double("loss.kl_temp") == 2.0);
    CHECK(c.get_double("loss.focal_gamma") == 2.0);
    CHECK(c.get_double("loss.lambda") == 0.5);
    CHECK(c.get_double("loss.phase1_disease") == 0.25);
    CHECK(c.get_double("loss.phase1_symptom") == 0.75);
    CHECK(c.get_double("loss.posw_clip_phase1") == 50.0);
    CHECK(c.get_double("loss.posw_clip_correction") == 20.0);
    CHECK(c.get_double("loss.posw_boost_cap") == 75.0);
    CHECK(c.get_int("train.correction_interval") == 500);
    CHECK(c.get_double("train.lr_start") == 5e-5);
    CHECK(c.get_double("train.lr_end") == 1e-6);
    CHECK(c.get_double("train.ema_lo") == 0.9995);
    CHECK(c.get_double("train.ema_hi") == 1.0);
    CHECK(c.get_int("aug.global_size") == 256);
    CHECK(c.get_int("aug.local_size") == 128);
    CHECK(c.get_int("aug.local.n_crops") == 8);
    CHECK(c.get_int("model.patch_size") == 8);
    CHECK(c.get_int("model.embed_dim") == 384);
    CHECK(c.get_int("model.depth") == 12);
    CHECK(c.get_int("model.heads") == 6);
    CHECK(c.get_int("model.dino_out") == 65536);
    CHECK(c.get_double("train.weight_decay") == 0.01);
}

TEST_CASE("unknown keys are rejected") {
    cfg::RunConfig c = cfg::RunConfig::defaults(cfg::Profile::Toy);
    CHECK_THROWS_WITH_AS(c.set("loss.not_a_key", "1"),
                         doctest::Contains("unknown config key"),
                         std::runtime_error);
}

TEST_CASE("out-of-range values name the bound") {
    cfg::RunConfig c = cfg::RunConfig::defaults(cfg::Profile::Toy);
    CHECK_THROWS_WITH_AS(c.set("loss.lambda", "1.5"),
                         doctest::Contains("out of [0,1]"), std::runtime_error);
    CHECK_THROWS(c.set("model.depth", "0"));
    CHECK_THROWS(c.set("loss.lambda", "banana"));
    CHECK_THROWS(c.set("split.stratify", "yes"));
}

TEST_CASE("file values load and overrides win") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "cxr_cfg_test.cfg").string();
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "loss.lambda = 0.25\n";
        out << "train.batch_size = 4  # trailing comment\n";
    }
    const cfg::RunConfig c =
        cfg::RunConfig::load(cfg::Profile::Toy, path, {"loss.lambda=0.7"});
    CHECK(c.get_double("loss.lambda") == 0.7);  // override beats file
    CHECK(c.get_int("train.batch_size") == 4);
    std::remove(path.c_str());
}

TEST_CASE("malformed config lines are rejected") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "cxr_cfg_bad.cfg").string();
    {
        std::ofstream out(path);
        out << "loss.lambda 0.25\n";
    }
    CHECK_THROWS(cfg::RunConfig::load(cfg::Profile::Toy, path, {}));
    std::remove(path.c_str());
    CHECK_THROWS(cfg::RunConfig::load(cfg::Profile::Toy, "/no/such/file", {}));
    CHECK_THROWS(cfg::RunConfig::load(cfg::Profile::Toy, "", {"oops"}));
}

TEST_CASE("to_json serializes every key") {
    const cfg::RunConfig c = cfg::RunConfig::defaults(cfg::Profile::Toy);
    const std::string j = c.to_json();
    CHECK(j.find("\"profile\":\"toy\"") != std::string::npos);
    CHECK(j.find("loss.kl_temp") != std::string::npos);
    CHECK(j.find("train.correction_interval") != std::string::npos);
}

TEST_CASE("profile parsing") {
    CHECK(cfg::profile_from_string("toy") == cfg::Profile::Toy);
    CHECK(cfg::profile_from_string("paper") == cfg::Profile::Paper);
    CHECK_THROWS(cfg::profile_from_string("demo"));
}
