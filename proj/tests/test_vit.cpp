#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include "cxr/archive.hpp"
#include "cxr/vit.hpp"

using namespace cxr;

namespace {

nn::VitConfig tiny_config() {
    nn::VitConfig c;
    c.patch_size = 8;
    c.embed_dim = 32;
    c.depth = 2;
    c.heads = 4;
    c.drop_path = 0.1;
    c.dino_hidden = 48;
    c.dino_bottleneck = 16;
    c.dino_out = 64;
    c.head_hidden = 24;
    c.pos_grid = 8;  // base grid for 64px globals
    return c;
}

aug::View view_of(int size, double fill, const char* id = "g0") {
    aug::View v;
    v.kind = aug::CropKind::GlobalClean;
    v.size = size;
    v.trace_id = id;
    v.chw.assign(3u * size * size, fill);
    return v;
}

aug::View random_view(int size, Rng& rng) {
    aug::View v = view_of(size, 0.0);
    for (auto& x : v.chw) x = rng.normal();
    return v;
}

}  // namespace

TEST_CASE("token counts: paper sizes 256 -> 1025 and 128 -> 257") {
    nn::VitConfig c;  // paper defaults: patch 8
    CHECK(c.token_count(256) == 1025);
    CHECK(c.token_count(128) == 257);
    CHECK(c.token_count(64) == 65);
    CHECK_THROWS(c.token_count(60));  // not divisible by patch size
}

TEST_CASE("forward produces the advertised output shapes") {
    nn::VitConfig c = tiny_config();
    nn::VitModel m(c);
    m.init_random(3);
    Rng rng(4);
    const aug::View g = random_view(64, rng);
    const nn::ForwardOutput out = m.forward(g);
    CHECK(out.cls_embedding->rows == 1);
    CHECK(out.cls_embedding->cols == c.embed_dim);
    CHECK(out.dino_logits->cols == c.dino_out);
    CHECK(out.disease_logits->cols == 3);
    CHECK(out.symptom_logits->cols == 7);
    CHECK(out.block_tokens->rows == 65);  // CLS + 8x8 patches
    CHECK(out.grid_side == 8);

    // a local-size view routes through the same model with fewer tokens
    const aug::View l = random_view(32, rng);
    const nn::ForwardOutput lo = m.forward(l);
    CHECK(lo.block_tokens->rows == 17);  // CLS + 4x4 patches
    CHECK(lo.grid_side == 4);
    CHECK(lo.disease_logits->cols == 3);
}

TEST_CASE("forward is deterministic in inference mode and input-sensitive") {
    nn::VitModel m(tiny_config());
    m.init_random(11);
    Rng rng(12);
    const aug::View a = random_view(64, rng);
    const nn::ForwardOutput o1 = m.forward(a);
    const nn::ForwardOutput o2 = m.forward(a);
    CHECK(o1.disease_logits->data == o2.disease_logits->data);

    const aug::View b = random_view(64, rng);
    const nn::ForwardOutput o3 = m.forward(b);
    CHECK(o1.disease_logits->data != o3.disease_logits->data);
}

TEST_CASE("bicubic interpolation matrix rows sum to one") {
    for (const auto [src, dst] : {std::pair{8, 4}, {8, 16}, {4, 7}}) {
        const std::vector<double> w = nn::bicubic_interp_matrix(src, dst);
        REQUIRE(w.size() ==
                static_cast<std::size_t>(dst) * dst * src * src);
        for (int r = 0; r < dst * dst; ++r) {
            double s = 0.0;
            for (int c = 0; c < src * src; ++c)
                s += w[static_cast<std::size_t>(r) * src * src + c];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    // identity when the grids match
    const std::vector<double> id = nn::bicubic_interp_matrix(6, 6);
    for (int r = 0; r < 36; ++r)
        for (int c = 0; c < 36; ++c)
            CHECK(id[static_cast<std::size_t>(r) * 36 + c] ==
                  doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("bicubic interpolation reproduces bilinear-exact values on a "
          "linear field") {
    // Catmull-Rom interpolation is exact for linear functions
    const int src = 8, dst = 16;
    const std::vector<double> w = nn::bicubic_interp_matrix(src, dst);
    auto f = [](double x, double y) { return 3.0 * x - 2.0 * y + 5.0; };
    const double scale = double(src) / dst;
    for (int r = 0; r < dst * dst; ++r) {
        // target grid point in source coordinates (half-pixel mapping)
        const double ty = (r / dst + 0.5) * scale - 0.5;
        const double tx = (r % dst + 0.5) * scale - 0.5;
        // skip border points where the 4x4 support leaves the grid
        if (ty < 1.0 || ty > src - 3.0 || tx < 1.0 || tx > src - 3.0) continue;
        double got = 0.0;
        for (int sy = 0; sy < src; ++sy)
            for (int sx = 0; sx < src; ++sx)
                got += w[static_cast<std::size_t>(r) * src * src + sy * src + sx] *
                       f(sx, sy);
        CHECK(got == doctest::Approx(f(tx, ty)).epsilon(1e-6));
    }
}

TEST_CASE("stochastic depth drops at the configured rate within 3 sigma") {
    nn::VitConfig c = tiny_config();
    c.depth = 2;        // ramp: block0 rate 0, block1 rate = drop_path
    c.drop_path = 0.5;
    nn::VitModel m(c);
    m.init_random(21);
    Rng data_rng(22);
    const aug::View v = random_view(64, data_rng);

    // block1's two residual branches are dropped independently at rate 0.5,
    // so training outputs fall into 4 equally likely clusters
    Rng rng(23);
    const int n = 400;
    std::map<std::vector<double>, int> clusters;
    for (int i = 0; i < n; ++i) {
        const nn::ForwardOutput o = m.forward(v, true, &rng);
        ++clusters[o.disease_logits->data];
    }
    CHECK(clusters.size() == 4);
    const double p = 0.25;
    const double sigma = std::sqrt(p * (1 - p) * n);
    for (const auto& [key, count] : clusters)
        CHECK(std::fabs(count - p * n) < 3.5 * sigma);

    // inference mode never drops and is rate-independent
    const nn::ForwardOutput r1 = m.forward(v, false);
    const nn::ForwardOutput r2 = m.forward(v, false);
    CHECK(r1.disease_logits->data == r2.disease_logits->data);

    // training mode without an rng is an error
    CHECK_THROWS(m.forward(v, true, nullptr));
}

TEST_CASE("ema_update blends tensor-wise: t' = m*t + (1-m)*s") {
    nn::VitConfig c = tiny_config();
    nn::VitModel student(c), teacher(c);
    student.init_random(31);
    teacher.init_random(32);
    std::map<std::string, std::vector<double>> before;
    for (const auto& [name, v] : teacher.params()) before[name] = v->data;

    const double m = 0.9;
    nn::ema_update(teacher, student, m);
    for (const auto& [name, v] : teacher.params()) {
        const auto& s = student.params().at(name)->data;
        const auto& b = before.at(name);
        for (std::size_t i = 0; i < v->data.size(); ++i)
            CHECK(v->data[i] ==
                  doctest::Approx(m * b[i] + (1 - m) * s[i]).epsilon(1e-12));
    }

    // momentum 1 freezes the teacher
    before.clear();
    for (const auto& [name, v] : teacher.params()) before[name] = v->data;
    nn::ema_update(teacher, student, 1.0);
    for (const auto& [name, v] : teacher.params())
        CHECK(v->data == before.at(name));
}

TEST_CASE("load_pretrained replaces backbone tensors and keeps heads") {
    nn::VitConfig c = tiny_config();
    nn::VitModel src(c), dst(c);
    src.init_random(41);
    dst.init_random(42);

    io::TensorArchive ar;
    for (const auto& [name, v] : src.params()) {
        if (name.rfind("backbone.", 0) != 0) continue;
        io::NamedTensor t;
        t.rows = v->rows;
        t.cols = v->cols;
        t.data = v->data;
        ar.tensors[name] = t;
    }
    const std::string path =
        (std::filesystem::temp_directory_path() / "cxr_vit_pretrained.bin")
            .string();
    io::write_archive(path, ar);

    const std::vector<double> head_before =
        dst.params().at("head.dino.fc1.w")->data;
    dst.load_pretrained(path);
    for (const auto& [name, v] : dst.params()) {
        if (name.rfind("backbone.", 0) == 0)
            CHECK(v->data == src.params().at(name)->data);
    }
    CHECK(dst.params().at("head.dino.fc1.w")->data == head_before);
    std::remove(path.c_str());
}

TEST_CASE("load_pretrained aggregates every shape mismatch into one error") {
    nn::VitConfig c = tiny_config();
    nn::VitModel m(c);
    m.init_random(51);

    io::TensorArchive ar;
    int corrupted = 0;
    for (const auto& [name, v] : m.params()) {
        if (name.rfind("backbone.", 0) != 0) continue;
        io::NamedTensor t;
        t.rows = v->rows;
        t.cols = v->cols;
        t.data = v->data;
        if (corrupted < 2 && v->cols > 1) {  // break two tensors
            t.cols -= 1;
            t.data.resize(t.rows * t.cols);
            ++corrupted;
        }
        ar.tensors[name] = t;
    }
    REQUIRE(corrupted == 2);
    const std::string path =
        (std::filesystem::temp_directory_path() / "cxr_vit_mismatch.bin")
            .string();
    io::write_archive(path, ar);
    try {
        m.load_pretrained(path);
        FAIL_CHECK("expected a shape-mismatch error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        // both offending tensors are listed in a single message
        std::size_t hits = 0, pos = 0;
        while ((pos = msg.find("backbone.", pos)) != std::string::npos) {
            ++hits;
            pos += 9;
        }
        CHECK(hits >= 2);
    }
    std::remove(path.c_str());
}

TEST_CASE("head losses backpropagate to a random deep parameter (FD check)") {
    nn::VitConfig c = tiny_config();
    c.depth = 1;  // keep the FD probe cheap
    nn::VitModel m(c);
    m.init_random(61);
    Rng rng(62);
    const aug::View v = random_view(32, rng);

    ad::Value& probe = m.params().at("backbone.block0.mlp.fc1.w");
    auto loss_value = [&]() {
        const nn::ForwardOutput o = m.forward(v);
        double s = 0.0;
        for (double x : o.disease_logits->data) s += x * x;
        for (double x : o.symptom_logits->data) s += x * x;
        return s;
    };

    // analytic gradient of sum-of-squares of the head logits
    const nn::ForwardOutput o = m.forward(v);
    ad::Value joined = ad::concat_cols({o.disease_logits, o.symptom_logits});
    ad::Value loss = ad::dot_const(joined, joined->data);
    ad::backward(loss);
    const std::vector<double> grad = probe->grad;

    Rng pick(63);
    for (int k = 0; k < 5; ++k) {
        const std::size_t i = pick.bounded(probe->data.size());
        const double h = 1e-5;
        const double keep = probe->data[i];
        probe->data[i] = keep + h;
        const double up = loss_value();
        probe->data[i] = keep - h;
        const double dn = loss_value();
        probe->data[i] = keep;
        const double fd = (up - dn) / (2 * h);
        // loss = sum x^2 built via dot(x, const snapshot) -> gradient is x,
        // i.e. half of d(sum x^2); compare against 2*grad
        const double an = 2.0 * grad[i];
        const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-4});
        CHECK(std::fabs(fd - an) / denom < 1e-3);
    }
}
