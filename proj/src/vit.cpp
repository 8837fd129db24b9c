#include "cxr/vit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "cxr/archive.hpp"

namespace cxr::nn {

using ad::Value;

VitConfig VitConfig::from_config(const cfg::RunConfig& c, bool student) {
    VitConfig v;
    v.patch_size = c.get_int("model.patch_size");
    v.embed_dim = c.get_int("model.embed_dim");
    v.depth = c.get_int("model.depth");
    v.heads = c.get_int("model.heads");
    v.ln_eps = c.get_double("model.ln_eps");
    v.drop_path = student ? c.get_double("model.drop_path") : 0.0;
    v.dino_hidden = c.get_int("model.dino_hidden");
    v.dino_bottleneck = c.get_int("model.dino_bottleneck");
    v.dino_out = c.get_int("model.dino_out");
    v.head_hidden = c.get_int("model.head_hidden");
    v.pos_grid = c.get_int("aug.global_size") / v.patch_size;
    v.validate();
    return v;
}

void VitConfig::validate() const {
    if (embed_dim % heads != 0)
        throw std::invalid_argument("vit: embed_dim must be divisible by heads");
    if (drop_path < 0.0 || drop_path >= 1.0)
        throw std::invalid_argument("vit: drop_path must be in [0,1)");
    if (pos_grid <= 0) throw std::invalid_argument("vit: pos_grid <= 0");
}

int VitConfig::token_count(int view_size) const {
    if (view_size % patch_size != 0)
        throw std::invalid_argument("vit: view size " + std::to_string(view_size) +
                                    " not divisible by patch size " +
                                    std::to_string(patch_size));
    const int side = view_size / patch_size;
    return side * side + 1;  // + class token
}

namespace {

Value make_param(std::size_t rows, std::size_t cols) {
    return ad::param(rows, cols, std::vector<double>(rows * cols, 0.0));
}

void fill_normal(Value& v, Rng& rng, double std_dev) {
    for (double& x : v->data) x = rng.normal() * std_dev;
}

// Catmull-Rom cubic kernel (a = -0.5)
double cubic_kernel(double x) {
    x = std::fabs(x);
    constexpr double a = -0.5;
    if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

}  // namespace

std::vector<double> bicubic_interp_matrix(int src_side, int dst_side) {
    const int n_dst = dst_side * dst_side;
    const int n_src = src_side * src_side;
    std::vector<double> m(static_cast<std::size_t>(n_dst) * n_src, 0.0);
    const double scale = static_cast<double>(src_side) / dst_side;
    for (int dy = 0; dy < dst_side; ++dy) {
        const double sy = (dy + 0.5) * scale - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        for (int dx = 0; dx < dst_side; ++dx) {
            const double sx = (dx + 0.5) * scale - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            double wsum = 0.0;
            double w[4][4];
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    const double wy = cubic_kernel(sy - (y0 - 1 + i));
                    const double wx = cubic_kernel(sx - (x0 - 1 + j));
                    w[i][j] = wy * wx;
                    wsum += w[i][j];
                }
            double* row = m.data() +
                          static_cast<std::size_t>(dy * dst_side + dx) * n_src;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    const int yy = std::clamp(y0 - 1 + i, 0, src_side - 1);
                    const int xx = std::clamp(x0 - 1 + j, 0, src_side - 1);
                    row[yy * src_side + xx] += w[i][j] / wsum;
                }
        }
    }
    return m;
}

VitModel::VitModel(VitConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int E = cfg_.embed_dim;
    const int patch_dim = cfg_.in_channels * cfg_.patch_size * cfg_.patch_size;

    params_["backbone.patch.w"] = make_param(patch_dim, E);
    params_["backbone.patch.b"] = make_param(1, E);
    params_["backbone.cls"] = make_param(1, E);
    params_["backbone.pos_cls"] = make_param(1, E);
    params_["backbone.pos_grid"] =
        make_param(static_cast<std::size_t>(cfg_.pos_grid) * cfg_.pos_grid, E);
    for (int b = 0; b < cfg_.depth; ++b) {
        const std::string pre = "backbone.block" + std::to_string(b) + ".";
        params_[pre + "ln1.g"] = make_param(1, E);
        params_[pre + "ln1.b"] = make_param(1, E);
        params_[pre + "attn.qkv.w"] = make_param(E, 3 * E);
        params_[pre + "attn.qkv.b"] = make_param(1, 3 * E);
        params_[pre + "attn.proj.w"] = make_param(E, E);
        params_[pre + "attn.proj.b"] = make_param(1, E);
        params_[pre + "ln2.g"] = make_param(1, E);
        params_[pre + "ln2.b"] = make_param(1, E);
        params_[pre + "mlp.fc1.w"] = make_param(E, 4 * E);
        params_[pre + "mlp.fc1.b"] = make_param(1, 4 * E);
        params_[pre + "mlp.fc2.w"] = make_param(4 * E, E);
        params_[pre + "mlp.fc2.b"] = make_param(1, E);
    }
    params_["backbone.ln_f.g"] = make_param(1, E);
    params_["backbone.ln_f.b"] = make_param(1, E);

    params_["head.dino.fc1.w"] = make_param(E, cfg_.dino_hidden);
    params_["head.dino.fc1.b"] = make_param(1, cfg_.dino_hidden);
    params_["head.dino.fc2.w"] = make_param(cfg_.dino_hidden, cfg_.dino_hidden);
    params_["head.dino.fc2.b"] = make_param(1, cfg_.dino_hidden);
    params_["head.dino.fc3.w"] = make_param(cfg_.dino_hidden, cfg_.dino_bottleneck);
    params_["head.dino.fc3.b"] = make_param(1, cfg_.dino_bottleneck);
    // weight-normalized output layer; magnitude frozen at 1
    params_["head.dino.wn.v"] = make_param(cfg_.dino_out, cfg_.dino_bottleneck);

    for (const char* head : {"disease", "symptom"}) {
        const std::string pre = std::string("head.") + head + ".";
        const int out = std::string(head) == "disease" ? 3 : 7;
        params_[pre + "fc1.w"] = make_param(E, cfg_.head_hidden);
        params_[pre + "fc1.b"] = make_param(1, cfg_.head_hidden);
        params_[pre + "fc2.w"] = make_param(cfg_.head_hidden, cfg_.head_hidden);
        params_[pre + "fc2.b"] = make_param(1, cfg_.head_hidden);
        params_[pre + "fc3.w"] = make_param(cfg_.head_hidden, out);
        params_[pre + "fc3.b"] = make_param(1, out);
    }
}

void VitModel::init_random(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& [name, v] : params_) {
        if (name.ends_with("ln1.g") || name.ends_with("ln2.g") ||
            name.ends_with("ln_f.g")) {
            std::fill(v->data.begin(), v->data.end(), 1.0);
        } else if (name.ends_with(".b") &&
                   name.find("pos") == std::string::npos) {
            std::fill(v->data.begin(), v->data.end(), 0.0);
        } else if (v->rows > 1 && v->cols > 1 &&
                   name.find("pos") == std::string::npos) {
            // Xavier scaling keeps activations input-sensitive through the
            // residual stack at small embedding widths
            fill_normal(v, rng,
                        std::sqrt(2.0 / static_cast<double>(v->rows + v->cols)));
        } else {
            fill_normal(v, rng, 0.02);  // CLS / positional embeddings
        }
    }
}

const Value& VitModel::p(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end())
        throw std::logic_error("vit: unknown parameter " + name);
    return it->second;
}

ad::Value VitModel::pos_embedding_for(int grid_side) const {
    const Value& base = p("backbone.pos_grid");
    if (grid_side == cfg_.pos_grid) return base;
    auto it = pos_interp_cache_.find(grid_side);
    if (it == pos_interp_cache_.end()) {
        it = pos_interp_cache_
                 .emplace(grid_side,
                          bicubic_interp_matrix(cfg_.pos_grid, grid_side))
                 .first;
    }
    const std::size_t n_dst = static_cast<std::size_t>(grid_side) * grid_side;
    Value m = ad::constant(n_dst, base->rows, it->second);
    return ad::matmul(m, base);
}

ForwardOutput VitModel::forward(const aug::View& view, bool training,
                                Rng* rng) const {
    const int S = view.size;
    const int P = cfg_.patch_size;
    if (S % P != 0)
        throw std::invalid_argument("vit: view size not divisible by patch size");
    const int side = S / P;
    const int n_patches = side * side;
    const int patch_dim = cfg_.in_channels * P * P;
    const std::size_t plane = static_cast<std::size_t>(S) * S;

    // unfold non-overlapping patches into rows (row-major patch order)
    std::vector<double> patch_rows(
        static_cast<std::size_t>(n_patches) * patch_dim);
    for (int py = 0; py < side; ++py)
        for (int px = 0; px < side; ++px) {
            double* row =
                patch_rows.data() +
                static_cast<std::size_t>(py * side + px) * patch_dim;
            std::size_t k = 0;
            for (int c = 0; c < cfg_.in_channels; ++c)
                for (int dy = 0; dy < P; ++dy)
                    for (int dx = 0; dx < P; ++dx)
                        row[k++] = view.chw[c * plane +
                                            static_cast<std::size_t>(py * P + dy) * S +
                                            (px * P + dx)];
        }
    Value patches = ad::constant(n_patches, patch_dim, std::move(patch_rows));

    Value x = ad::add_rowvec(ad::matmul(patches, p("backbone.patch.w")),
                             p("backbone.patch.b"));
    x = ad::concat_rows({p("backbone.cls"), x});
    Value pos = ad::concat_rows({p("backbone.pos_cls"), pos_embedding_for(side)});
    x = ad::add(x, pos);

    const int E = cfg_.embed_dim;
    const int H = cfg_.heads;
    const int dh = E / H;
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Value last_block_input = x;
    for (int b = 0; b < cfg_.depth; ++b) {
        if (b == cfg_.depth - 1) last_block_input = x;
        const std::string pre = "backbone.block" + std::to_string(b) + ".";
        // stochastic depth rate ramps linearly to drop_path at the last block
        const double rate =
            cfg_.depth > 1
                ? cfg_.drop_path * static_cast<double>(b) / (cfg_.depth - 1)
                : 0.0;
        auto apply_branch = [&](const Value& input, const Value& branch) {
            if (!training || rate == 0.0) return ad::add(input, branch);
            if (!rng)
                throw std::invalid_argument("vit: training forward needs an rng");
            if (rng->bernoulli(rate)) return input;  // branch dropped
            return ad::add(input, ad::scale(branch, 1.0 / (1.0 - rate)));
        };

        // attention
        Value h = ad::layernorm_rows(x, p(pre + "ln1.g"), p(pre + "ln1.b"),
                                     cfg_.ln_eps);
        Value qkv = ad::add_rowvec(ad::matmul(h, p(pre + "attn.qkv.w")),
                                   p(pre + "attn.qkv.b"));
        std::vector<Value> head_outs;
        head_outs.reserve(H);
        for (int hd = 0; hd < H; ++hd) {
            Value q = ad::slice_cols(qkv, hd * dh, (hd + 1) * dh);
            Value k = ad::slice_cols(qkv, E + hd * dh, E + (hd + 1) * dh);
            Value v = ad::slice_cols(qkv, 2 * E + hd * dh, 2 * E + (hd + 1) * dh);
            Value scores = ad::scale(ad::matmul_nt(q, k), attn_scale);
            Value attn = ad::softmax_rows(scores);
            head_outs.push_back(ad::matmul(attn, v));
        }
        Value attn_out = ad::add_rowvec(
            ad::matmul(ad::concat_cols(head_outs), p(pre + "attn.proj.w")),
            p(pre + "attn.proj.b"));
        x = apply_branch(x, attn_out);

        // MLP
        Value m = ad::layernorm_rows(x, p(pre + "ln2.g"), p(pre + "ln2.b"),
                                     cfg_.ln_eps);
        m = ad::gelu(ad::add_rowvec(ad::matmul(m, p(pre + "mlp.fc1.w")),
                                    p(pre + "mlp.fc1.b")));
        m = ad::add_rowvec(ad::matmul(m, p(pre + "mlp.fc2.w")),
                           p(pre + "mlp.fc2.b"));
        x = apply_branch(x, m);
    }

    ForwardOutput out;
    out.block_tokens = last_block_input;
    out.grid_side = side;

    Value normed = ad::layernorm_rows(x, p("backbone.ln_f.g"),
                                      p("backbone.ln_f.b"), cfg_.ln_eps);
    Value cls = ad::slice_rows(normed, 0, 1);
    out.cls_embedding = cls;

    // DINO projection head
    Value d = ad::gelu(ad::add_rowvec(ad::matmul(cls, p("head.dino.fc1.w")),
                                      p("head.dino.fc1.b")));
    d = ad::gelu(ad::add_rowvec(ad::matmul(d, p("head.dino.fc2.w")),
                                p("head.dino.fc2.b")));
    d = ad::add_rowvec(ad::matmul(d, p("head.dino.fc3.w")),
                       p("head.dino.fc3.b"));
    d = ad::l2_normalize_rows(d);
    out.dino_logits = ad::matmul_nt(d, ad::l2_normalize_rows(p("head.dino.wn.v")));

    auto mlp_head = [&](const std::string& pre) {
        Value y = ad::relu(ad::add_rowvec(ad::matmul(cls, p(pre + "fc1.w")),
                                          p(pre + "fc1.b")));
        y = ad::relu(ad::add_rowvec(ad::matmul(y, p(pre + "fc2.w")),
                                    p(pre + "fc2.b")));
        return ad::add_rowvec(ad::matmul(y, p(pre + "fc3.w")), p(pre + "fc3.b"));
    };
    out.disease_logits = mlp_head("head.disease.");
    out.symptom_logits = mlp_head("head.symptom.");
    return out;
}

void VitModel::load_pretrained(const std::string& path) {
    const io::TensorArchive ar = io::read_archive(path);
    std::vector<std::string> problems;
    for (auto& [name, v] : params_) {
        if (name.rfind("backbone.", 0) != 0) continue;  // heads stay fresh
        auto it = ar.tensors.find(name);
        if (it == ar.tensors.end()) {
            problems.push_back(name + ": missing from checkpoint");
            continue;
        }
        if (it->second.rows != v->rows || it->second.cols != v->cols) {
            std::ostringstream os;
            os << name << ": shape (" << it->second.rows << ","
               << it->second.cols << ") != expected (" << v->rows << ","
               << v->cols << ")";
            problems.push_back(os.str());
        }
    }
    if (!problems.empty()) {
        std::ostringstream os;
        os << "pretrained checkpoint mismatch:";
        for (const auto& s : problems) os << "\n  " << s;
        throw std::runtime_error(os.str());
    }
    for (auto& [name, v] : params_) {
        if (name.rfind("backbone.", 0) != 0) continue;
        v->data = ar.tensors.at(name).data;
    }
}

std::map<std::string, std::pair<std::size_t, std::size_t>> VitModel::shapes()
    const {
    std::map<std::string, std::pair<std::size_t, std::size_t>> out;
    for (const auto& [name, v] : params_) out[name] = {v->rows, v->cols};
    return out;
}

void ema_update(VitModel& teacher, const VitModel& student, double momentum) {
    if (momentum < 0.0 || momentum > 1.0)
        throw std::invalid_argument("ema_update: momentum out of [0,1]");
    auto& tp = teacher.params();
    const auto& sp = student.params();
    if (tp.size() != sp.size())
        throw std::invalid_argument("ema_update: parameter sets differ");
    auto it = tp.begin();
    auto is = sp.begin();
    for (; it != tp.end(); ++it, ++is) {
        if (it->first != is->first ||
            it->second->data.size() != is->second->data.size())
            throw std::invalid_argument("ema_update: shape mismatch at " +
                                        it->first);
        double* t = it->second->data.data();
        const double* s = is->second->data.data();
        for (std::size_t i = 0; i < it->second->data.size(); ++i)
            t[i] = momentum * t[i] + (1.0 - momentum) * s[i];
    }
}

}  // namespace cxr::nn
