#include "cxr/ad.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "cxr/kernels.hpp"

namespace cxr::ad {

namespace {

const kernels::KernelTable& K() { return kernels::active(); }

Value make_node(std::size_t rows, std::size_t cols,
                std::vector<Value> parents) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->data.assign(rows * cols, 0.0);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    return n;
}

void check_same_shape(const Value& a, const Value& b, const char* op) {
    if (a->rows != b->rows || a->cols != b->cols)
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

void Node::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

Value constant(std::size_t rows, std::size_t cols, std::vector<double> data) {
    if (data.size() != rows * cols)
        throw std::invalid_argument("constant: data size mismatch");
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->data = std::move(data);
    return n;
}

Value zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->data.assign(rows * cols, 0.0);
    n->requires_grad = requires_grad;
    return n;
}

Value param(std::size_t rows, std::size_t cols, std::vector<double> data) {
    auto n = constant(rows, cols, std::move(data));
    n->requires_grad = true;
    return n;
}

void backward(const Value& root) {
    if (root->size() != 1)
        throw std::invalid_argument("backward: root must be scalar");
    // reverse topological order
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order) {
        n->grad.assign(n->data.size(), 0.0);
    }
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
    }
}

Value matmul(const Value& a, const Value& b) {
    if (a->cols != b->rows) throw std::invalid_argument("matmul: inner dims");
    auto out = make_node(a->rows, b->cols, {a, b});
    K().gemm(false, false, a->rows, b->cols, a->cols, 1.0, a->data.data(),
             a->cols, b->data.data(), b->cols, 0.0, out->data.data(),
             out->cols);
    Value av = a, bv = b;
    out->backward_fn = [av, bv](Node& self) {
        if (av->requires_grad) {
            av->ensure_grad();
            // dA += dC @ B^T
            K().gemm(false, true, av->rows, av->cols, bv->cols, 1.0,
                     self.grad.data(), self.cols, bv->data.data(), bv->cols,
                     1.0, av->grad.data(), av->cols);
        }
        if (bv->requires_grad) {
            bv->ensure_grad();
            // dB += A^T @ dC
            K().gemm(true, false, bv->rows, bv->cols, av->rows, 1.0,
                     av->data.data(), av->cols, self.grad.data(), self.cols,
                     1.0, bv->grad.data(), bv->cols);
        }
    };
    return out;
}

Value matmul_nt(const Value& a, const Value& b) {
    if (a->cols != b->cols) throw std::invalid_argument("matmul_nt: inner dims");
    auto out = make_node(a->rows, b->rows, {a, b});
    K().gemm(false, true, a->rows, b->rows, a->cols, 1.0, a->data.data(),
             a->cols, b->data.data(), b->cols, 0.0, out->data.data(),
             out->cols);
    Value av = a, bv = b;
    out->backward_fn = [av, bv](Node& self) {
        if (av->requires_grad) {
            av->ensure_grad();
            // dA += dC @ B
            K().gemm(false, false, av->rows, av->cols, bv->rows, 1.0,
                     self.grad.data(), self.cols, bv->data.data(), bv->cols,
                     1.0, av->grad.data(), av->cols);
        }
        if (bv->requires_grad) {
            bv->ensure_grad();
            // dB += dC^T @ A
            K().gemm(true, false, bv->rows, bv->cols, av->rows, 1.0,
                     self.grad.data(), self.cols, av->data.data(), av->cols,
                     1.0, bv->grad.data(), bv->cols);
        }
    };
    return out;
}

Value add(const Value& a, const Value& b) {
    check_same_shape(a, b, "add");
    auto out = make_node(a->rows, a->cols, {a, b});
    K().vadd(a->data.data(), b->data.data(), out->data.data(), out->size());
    Value av = a, bv = b;
    out->backward_fn = [av, bv](Node& self) {
        for (const Value& p : {av, bv}) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            K().axpy(1.0, self.grad.data(), p->grad.data(), self.grad.size());
        }
    };
    return out;
}

Value sub(const Value& a, const Value& b) {
    check_same_shape(a, b, "sub");
    auto out = make_node(a->rows, a->cols, {a, b});
    for (std::size_t i = 0; i < out->size(); ++i)
        out->data[i] = a->data[i] - b->data[i];
    Value av = a, bv = b;
    out->backward_fn = [av, bv](Node& self) {
        if (av->requires_grad) {
            av->ensure_grad();
            K().axpy(1.0, self.grad.data(), av->grad.data(), self.grad.size());
        }
        if (bv->requires_grad) {
            bv->ensure_grad();
            K().axpy(-1.0, self.grad.data(), bv->grad.data(), self.grad.size());
        }
    };
    return out;
}

Value add_rowvec(const Value& a, const Value& v) {
    if (v->rows != 1 || v->cols != a->cols)
        throw std::invalid_argument("add_rowvec: bias shape");
    auto out = make_node(a->rows, a->cols, {a, v});
    for (std::size_t r = 0; r < a->rows; ++r)
        K().vadd(a->data.data() + r * a->cols, v->data.data(),
                 out->data.data() + r * a->cols, a->cols);
    Value av = a, vv = v;
    out->backward_fn = [av, vv](Node& self) {
        if (av->requires_grad) {
            av->ensure_grad();
            K().axpy(1.0, self.grad.data(), av->grad.data(), self.grad.size());
        }
        if (vv->requires_grad) {
            vv->ensure_grad();
            for (std::size_t r = 0; r < self.rows; ++r)
                K().axpy(1.0, self.grad.data() + r * self.cols,
                         vv->grad.data(), self.cols);
        }
    };
    return out;
}

Value mul(const Value& a, const Value& b) {
    check_same_shape(a, b, "mul");
    auto out = make_node(a->rows, a->cols, {a, b});
    K().vmul(a->data.data(), b->data.data(), out->data.data(), out->size());
    Value av = a, bv = b;
    out->backward_fn = [av, bv](Node& self) {
        if (av->requires_grad) {
            av->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i)
                av->grad[i] += self.grad[i] * bv->data[i];
        }
        if (bv->requires_grad) {
            bv->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i)
                bv->grad[i] += self.grad[i] * av->data[i];
        }
    };
    return out;
}

Value scale(const Value& a, double s) {
    auto out = make_node(a->rows, a->cols, {a});
    K().vscale(a->data.data(), s, out->data.data(), out->size());
    Value av = a;
    out->backward_fn = [av, s](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        K().axpy(s, self.grad.data(), av->grad.data(), self.grad.size());
    };
    return out;
}

Value relu(const Value& a) {
    auto out = make_node(a->rows, a->cols, {a});
    for (std::size_t i = 0; i < a->size(); ++i)
        out->data[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
    Value av = a;
    out->backward_fn = [av](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            if (av->data[i] > 0.0) av->grad[i] += self.grad[i];
    };
    return out;
}

Value gelu(const Value& a) {
    auto out = make_node(a->rows, a->cols, {a});
    for (std::size_t i = 0; i < a->size(); ++i) {
        const double x = a->data[i];
        out->data[i] = 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
    }
    Value av = a;
    out->backward_fn = [av](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (std::size_t i = 0; i < self.size(); ++i) {
            const double x = av->data[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
            av->grad[i] += self.grad[i] * (cdf + x * pdf);
        }
    };
    return out;
}

Value sigmoid(const Value& a) {
    auto out = make_node(a->rows, a->cols, {a});
    for (std::size_t i = 0; i < a->size(); ++i)
        out->data[i] = 1.0 / (1.0 + std::exp(-a->data[i]));
    Value av = a;
    out->backward_fn = [av](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) {
            const double y = self.data[i];
            av->grad[i] += self.grad[i] * y * (1.0 - y);
        }
    };
    return out;
}

Value transpose(const Value& a) {
    auto out = make_node(a->cols, a->rows, {a});
    for (std::size_t r = 0; r < a->rows; ++r)
        for (std::size_t c = 0; c < a->cols; ++c)
            out->data[c * a->rows + r] = a->data[r * a->cols + c];
    Value av = a;
    out->backward_fn = [av](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        for (std::size_t r = 0; r < self.rows; ++r)
            for (std::size_t c = 0; c < self.cols; ++c)
                av->grad[c * self.rows + r] += self.grad[r * self.cols + c];
    };
    return out;
}

Value slice_rows(const Value& a, std::size_t r0, std::size_t r1) {
    if (r0 >= r1 || r1 > a->rows)
        throw std::invalid_argument("slice_rows: bad range");
    auto out = make_node(r1 - r0, a->cols, {a});
    std::copy(a->data.begin() + r0 * a->cols, a->data.begin() + r1 * a->cols,
              out->data.begin());
    Value av = a;
    out->backward_fn = [av, r0](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        K().axpy(1.0, self.grad.data(), av->grad.data() + r0 * av->cols,
                 self.grad.size());
    };
    return out;
}

Value slice_cols(const Value& a, std::size_t c0, std::size_t c1) {
    if (c0 >= c1 || c1 > a->cols)
        throw std::invalid_argument("slice_cols: bad range");
    const std::size_t w = c1 - c0;
    auto out = make_node(a->rows, w, {a});
    for (std::size_t r = 0; r < a->rows; ++r)
        std::copy(a->data.begin() + r * a->cols + c0,
                  a->data.begin() + r * a->cols + c1,
                  out->data.begin() + r * w);
    Value av = a;
    out->backward_fn = [av, c0, w](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        for (std::size_t r = 0; r < self.rows; ++r)
            K().axpy(1.0, self.grad.data() + r * w,
                     av->grad.data() + r * av->cols + c0, w);
    };
    return out;
}

Value concat_rows(const std::vector<Value>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    std::size_t rows = 0;
    const std::size_t cols = parts[0]->cols;
    for (const auto& p : parts) {
        if (p->cols != cols)
            throw std::invalid_argument("concat_rows: column mismatch");
        rows += p->rows;
    }
    auto out = make_node(rows, cols, parts);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->data.begin(), p->data.end(), out->data.begin() + off);
        off += p->size();
    }
    auto parts_copy = parts;
    out->backward_fn = [parts_copy](Node& self) {
        std::size_t off = 0;
        for (const auto& p : parts_copy) {
            if (p->requires_grad) {
                p->ensure_grad();
                K().axpy(1.0, self.grad.data() + off, p->grad.data(),
                         p->size());
            }
            off += p->size();
        }
    };
    return out;
}

Value concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const std::size_t rows = parts[0]->rows;
    std::size_t cols = 0;
    for (const auto& p : parts) {
        if (p->rows != rows)
            throw std::invalid_argument("concat_cols: row mismatch");
        cols += p->cols;
    }
    auto out = make_node(rows, cols, parts);
    std::size_t coff = 0;
    for (const auto& p : parts) {
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(p->data.begin() + r * p->cols,
                      p->data.begin() + (r + 1) * p->cols,
                      out->data.begin() + r * cols + coff);
        coff += p->cols;
    }
    auto parts_copy = parts;
    out->backward_fn = [parts_copy](Node& self) {
        std::size_t coff = 0;
        for (const auto& p : parts_copy) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t r = 0; r < self.rows; ++r)
                    K().axpy(1.0, self.grad.data() + r * self.cols + coff,
                             p->grad.data() + r * p->cols, p->cols);
            }
            coff += p->cols;
        }
    };
    return out;
}

Value softmax_rows(const Value& a) {
    auto out = make_node(a->rows, a->cols, {a});
    for (std::size_t r = 0; r < a->rows; ++r) {
        const double* in = a->data.data() + r * a->cols;
        double* o = out->data.data() + r * a->cols;
        const double mx = K().vmax(in, a->cols);
        double z = 0.0;
        for (std::size_t c = 0; c < a->cols; ++c) {
            o[c] = std::exp(in[c] - mx);
            z += o[c];
        }
        K().vscale(o, 1.0 / z, o, a->cols);
    }
    Value av = a;
    out->backward_fn = [av](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        for (std::size_t r = 0; r < self.rows; ++r) {
            const double* p = self.data.data() + r * self.cols;
            const double* g = self.grad.data() + r * self.cols;
            double* da = av->grad.data() + r * self.cols;
            const double dotpg = K().dot(p, g, self.cols);
            for (std::size_t c = 0; c < self.cols; ++c)
                da[c] += p[c] * (g[c] - dotpg);
        }
    };
    return out;
}

Value log_softmax_rows(const Value& a) {
    auto out = make_node(a->rows, a->cols, {a});
    for (std::size_t r = 0; r < a->rows; ++r) {
        const double* in = a->data.data() + r * a->cols;
        double* o = out->data.data() + r * a->cols;
        const double mx = K().vmax(in, a->cols);
        double z = 0.0;
        for (std::size_t c = 0; c < a->cols; ++c) z += std::exp(in[c] - mx);
        const double lz = mx + std::log(z);
        for (std::size_t c = 0; c < a->cols; ++c) o[c] = in[c] - lz;
    }
    Value av = a;
    out->backward_fn = [av](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        for (std::size_t r = 0; r < self.rows; ++r) {
            const double* ls = self.data.data() + r * self.cols;
            const double* g = self.grad.data() + r * self.cols;
            double* da = av->grad.data() + r * self.cols;
            const double gsum = K().vsum(g, self.cols);
            for (std::size_t c = 0; c < self.cols; ++c)
                da[c] += g[c] - std::exp(ls[c]) * gsum;
        }
    };
    return out;
}

Value layernorm_rows(const Value& x, const Value& gamma, const Value& beta,
                     double eps) {
    if (gamma->rows != 1 || gamma->cols != x->cols || beta->rows != 1 ||
        beta->cols != x->cols)
        throw std::invalid_argument("layernorm_rows: affine shape");
    auto out = make_node(x->rows, x->cols, {x, gamma, beta});
    const std::size_t n = x->cols;
    // cache normalized values and inverse stds for backward
    auto xhat = std::make_shared<std::vector<double>>(x->size());
    auto istd = std::make_shared<std::vector<double>>(x->rows);
    for (std::size_t r = 0; r < x->rows; ++r) {
        const double* in = x->data.data() + r * n;
        const double mean = K().vsum(in, n) / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            const double d = in[c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        (*istd)[r] = is;
        double* xh = xhat->data() + r * n;
        double* o = out->data.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) {
            xh[c] = (in[c] - mean) * is;
            o[c] = gamma->data[c] * xh[c] + beta->data[c];
        }
    }
    Value xv = x, gv = gamma, bv = beta;
    out->backward_fn = [xv, gv, bv, xhat, istd, n](Node& self) {
        for (std::size_t r = 0; r < self.rows; ++r) {
            const double* g = self.grad.data() + r * n;
            const double* xh = xhat->data() + r * n;
            if (gv->requires_grad) {
                gv->ensure_grad();
                for (std::size_t c = 0; c < n; ++c)
                    gv->grad[c] += g[c] * xh[c];
            }
            if (bv->requires_grad) {
                bv->ensure_grad();
                K().axpy(1.0, g, bv->grad.data(), n);
            }
            if (xv->requires_grad) {
                xv->ensure_grad();
                double* dx = xv->grad.data() + r * n;
                double mean_gg = 0.0, mean_ggxh = 0.0;
                for (std::size_t c = 0; c < n; ++c) {
                    const double gg = g[c] * gv->data[c];
                    mean_gg += gg;
                    mean_ggxh += gg * xh[c];
                }
                mean_gg /= static_cast<double>(n);
                mean_ggxh /= static_cast<double>(n);
                const double is = (*istd)[r];
                for (std::size_t c = 0; c < n; ++c) {
                    const double gg = g[c] * gv->data[c];
                    dx[c] += is * (gg - mean_gg - xh[c] * mean_ggxh);
                }
            }
        }
    };
    return out;
}

Value l2_normalize_rows(const Value& a, double eps) {
    auto out = make_node(a->rows, a->cols, {a});
    auto inv_norm = std::make_shared<std::vector<double>>(a->rows);
    for (std::size_t r = 0; r < a->rows; ++r) {
        const double* in = a->data.data() + r * a->cols;
        const double nrm =
            std::sqrt(K().dot(in, in, a->cols) + eps);
        (*inv_norm)[r] = 1.0 / nrm;
        K().vscale(in, (*inv_norm)[r], out->data.data() + r * a->cols,
                   a->cols);
    }
    Value av = a;
    out->backward_fn = [av, inv_norm](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        for (std::size_t r = 0; r < self.rows; ++r) {
            const double* y = self.data.data() + r * self.cols;
            const double* g = self.grad.data() + r * self.cols;
            double* da = av->grad.data() + r * self.cols;
            const double gy = K().dot(g, y, self.cols);
            const double in = (*inv_norm)[r];
            for (std::size_t c = 0; c < self.cols; ++c)
                da[c] += in * (g[c] - y[c] * gy);
        }
    };
    return out;
}

Value sum_all(const Value& a) {
    auto out = make_node(1, 1, {a});
    out->data[0] = K().vsum(a->data.data(), a->size());
    Value av = a;
    out->backward_fn = [av](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        const double g = self.grad[0];
        for (std::size_t i = 0; i < av->size(); ++i) av->grad[i] += g;
    };
    return out;
}

Value mean_all(const Value& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a->size()));
}

Value pick(const Value& a, std::size_t r, std::size_t c) {
    if (r >= a->rows || c >= a->cols)
        throw std::invalid_argument("pick: out of range");
    auto out = make_node(1, 1, {a});
    out->data[0] = a->at(r, c);
    Value av = a;
    const std::size_t idx = r * a->cols + c;
    out->backward_fn = [av, idx](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        av->grad[idx] += self.grad[0];
    };
    return out;
}

Value dot_const(const Value& a, std::vector<double> coeff) {
    if (coeff.size() != a->size())
        throw std::invalid_argument("dot_const: size mismatch");
    auto out = make_node(1, 1, {a});
    out->data[0] = K().dot(a->data.data(), coeff.data(), a->size());
    Value av = a;
    auto cshared = std::make_shared<std::vector<double>>(std::move(coeff));
    out->backward_fn = [av, cshared](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        K().axpy(self.grad[0], cshared->data(), av->grad.data(), av->size());
    };
    return out;
}

Value mul_const(const Value& a, std::vector<double> coeff) {
    if (coeff.size() != a->size())
        throw std::invalid_argument("mul_const: size mismatch");
    auto out = make_node(a->rows, a->cols, {a});
    K().vmul(a->data.data(), coeff.data(), out->data.data(), a->size());
    Value av = a;
    auto cshared = std::make_shared<std::vector<double>>(std::move(coeff));
    out->backward_fn = [av, cshared](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            av->grad[i] += self.grad[i] * (*cshared)[i];
    };
    return out;
}

Value mean_rows(const Value& a) {
    auto out = make_node(1, a->cols, {a});
    for (std::size_t r = 0; r < a->rows; ++r)
        K().axpy(1.0, a->data.data() + r * a->cols, out->data.data(), a->cols);
    K().vscale(out->data.data(), 1.0 / static_cast<double>(a->rows),
               out->data.data(), a->cols);
    Value av = a;
    out->backward_fn = [av](Node& self) {
        if (!av->requires_grad) return;
        av->ensure_grad();
        const double inv = 1.0 / static_cast<double>(av->rows);
        for (std::size_t r = 0; r < av->rows; ++r)
            K().axpy(inv, self.grad.data(), av->grad.data() + r * av->cols,
                     av->cols);
    };
    return out;
}

Value detach(const Value& a) {
    auto n = std::make_shared<Node>();
    n->rows = a->rows;
    n->cols = a->cols;
    n->data = a->data;
    return n;
}

Value cross_entropy_rows(const Value& logits, const std::vector<int>& targets,
                         const std::vector<double>& class_weights) {
    if (targets.size() != logits->rows)
        throw std::invalid_argument("cross_entropy_rows: target count");
    if (class_weights.size() != logits->cols)
        throw std::invalid_argument("cross_entropy_rows: weight count");
    Value ls = log_softmax_rows(logits);
    std::vector<double> coeff(ls->size(), 0.0);
    double wsum = 0.0;
    for (std::size_t r = 0; r < ls->rows; ++r) {
        const int t = targets[r];
        if (t < 0 || static_cast<std::size_t>(t) >= ls->cols)
            throw std::invalid_argument("cross_entropy_rows: target range");
        const double w = class_weights[t];
        coeff[r * ls->cols + t] = -w;
        wsum += w;
    }
    if (wsum <= 0.0)
        throw std::invalid_argument("cross_entropy_rows: zero weight mass");
    return scale(dot_const(ls, std::move(coeff)), 1.0 / wsum);
}

Value focal_bce_loss(const Value& logits, const std::vector<double>& targets,
                     const std::vector<double>& mask,
                     const std::vector<double>& pos_weight, double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("focal_bce: gamma < 0");
    if (targets.size() != logits->size() || mask.size() != logits->size())
        throw std::invalid_argument("focal_bce: size mismatch");
    if (pos_weight.size() != logits->cols)
        throw std::invalid_argument("focal_bce: pos_weight count");
    for (double w : pos_weight)
        if (w < 0.0) throw std::invalid_argument("focal_bce: negative weight");
    double count = 0.0;
    for (double m : mask) count += m;
    if (count <= 0.0)
        throw std::invalid_argument("focal_bce: empty mask");

    auto out = make_node(1, 1, {logits});
    auto softplus = [](double z) {
        return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    };
    double total = 0.0;
    const std::size_t cols = logits->cols;
    for (std::size_t i = 0; i < logits->size(); ++i) {
        if (mask[i] == 0.0) continue;
        const double z = logits->data[i];
        const double t = targets[i];
        const double p = 1.0 / (1.0 + std::exp(-z));
        const double w = pos_weight[i % cols];
        // -log p = softplus(-z), -log(1-p) = softplus(z)
        total += w * t * std::pow(1.0 - p, gamma) * softplus(-z) +
                 (1.0 - t) * std::pow(p, gamma) * softplus(z);
    }
    out->data[0] = total / count;

    Value lv = logits;
    auto tg = std::make_shared<std::vector<double>>(targets);
    auto mk = std::make_shared<std::vector<double>>(mask);
    auto pw = std::make_shared<std::vector<double>>(pos_weight);
    out->backward_fn = [lv, tg, mk, pw, gamma, count, cols,
                        softplus](Node& self) {
        if (!lv->requires_grad) return;
        lv->ensure_grad();
        const double gscale = self.grad[0] / count;
        for (std::size_t i = 0; i < lv->size(); ++i) {
            if ((*mk)[i] == 0.0) continue;
            const double z = lv->data[i];
            const double t = (*tg)[i];
            const double p = 1.0 / (1.0 + std::exp(-z));
            const double q = 1.0 - p;
            const double w = (*pw)[i % cols];
            const double dpos =
                -gamma * p * std::pow(q, gamma) * softplus(-z) -
                std::pow(q, gamma + 1.0);
            const double dneg =
                gamma * std::pow(p, gamma) * q * softplus(z) +
                std::pow(p, gamma + 1.0);
            lv->grad[i] += gscale * (w * t * dpos + (1.0 - t) * dneg);
        }
    };
    return out;
}

}  // namespace cxr::ad
