#pragma once

// Minimal reverse-mode autodiff on row-major 2-D double tensors.
//
// Graphs are built eagerly; backward() walks the tape in reverse
// topological order. All heavy inner loops go through cxr::kernels.

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cxr::ad {

struct Node;
using Value = std::shared_ptr<Node>;

struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    std::vector<double> grad;  // same size as data once backward touches it
    bool requires_grad = false;
    std::vector<Value> parents;
    std::function<void(Node&)> backward_fn;  // pushes grad into parents

    std::size_t size() const { return rows * cols; }
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    void ensure_grad();
};

Value constant(std::size_t rows, std::size_t cols, std::vector<double> data);
Value zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
Value param(std::size_t rows, std::size_t cols, std::vector<double> data);

// Scalar root only (1x1). Zeroes every reachable grad, then seeds 1.
void backward(const Value& root);

Value matmul(const Value& a, const Value& b);     // a[m,k] @ b[k,n]
Value matmul_nt(const Value& a, const Value& b);  // a[m,k] @ b[n,k]^T
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value add_rowvec(const Value& a, const Value& v);  // v is 1 x cols
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double s);
Value relu(const Value& a);
Value gelu(const Value& a);
Value sigmoid(const Value& a);
Value transpose(const Value& a);
Value slice_rows(const Value& a, std::size_t r0, std::size_t r1);
Value slice_cols(const Value& a, std::size_t c0, std::size_t c1);
Value concat_rows(const std::vector<Value>& parts);
Value concat_cols(const std::vector<Value>& parts);
Value softmax_rows(const Value& a);
Value log_softmax_rows(const Value& a);
Value layernorm_rows(const Value& x, const Value& gamma, const Value& beta,
                     double eps);
Value l2_normalize_rows(const Value& a, double eps = 1e-12);
Value sum_all(const Value& a);
Value mean_all(const Value& a);
Value pick(const Value& a, std::size_t r, std::size_t c);  // 1x1 view
// sum(a * c) with a constant coefficient matrix
Value dot_const(const Value& a, std::vector<double> coeff);
// elementwise product with a constant matrix (same size)
Value mul_const(const Value& a, std::vector<double> coeff);
// mean over rows: 1 x cols
Value mean_rows(const Value& a);
// stops gradient flow; shares no storage with the input
Value detach(const Value& a);

// Weighted multiclass cross entropy over logit rows. targets[i] in
// [0, cols); loss = sum_i w[t_i] * nll_i / sum_i w[t_i].
Value cross_entropy_rows(const Value& logits, const std::vector<int>& targets,
                         const std::vector<double>& class_weights);

// Focal BCE on logits. targets/mask/pos_weight are constants; targets may
// be soft in [0,1]; mask entries are 0/1 and the mean runs over unmasked
// elements only. pos_weight has one entry per column.
Value focal_bce_loss(const Value& logits, const std::vector<double>& targets,
                     const std::vector<double>& mask,
                     const std::vector<double>& pos_weight, double gamma);

}  // namespace cxr::ad
