#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "trajdiff/tensor.hpp"

namespace trajdiff {

struct ParamEntry {
    Tensor value;
    Tensor grad;
};

// Named parameters with paired gradient buffers. Iteration follows name
// order, so optimizer sweeps and serialization are deterministic.
class ParamStore {
public:
    Tensor& create(const std::string& name, std::vector<int> shape);
    ParamEntry& at(const std::string& name);
    const ParamEntry& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    void zero_grads();
    std::size_t size() const { return entries_.size(); }
    long scalar_count() const;

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::map<std::string, ParamEntry> entries_;
};

// Per-parameter gradient accumulator used when several computation graphs
// (e.g. the windows of a batch) contribute to one update. Buffers merge in a
// caller-fixed order, keeping floating-point sums reproducible.
using GradBuffer = std::map<std::string, Tensor>;

// Define-by-run reverse-mode tape over Tensor values. A graph is built for
// one forward pass, backpropagated once, and discarded; construction order is
// the topological order, so backward() is a single reverse sweep. Graphs
// built with record_grads = false skip all backward bookkeeping (used for
// sampling, where only values matter).
class Graph {
public:
    explicit Graph(bool record_grads = true);

    int constant(Tensor value);
    // Leaf bound to a named parameter; backward() accumulates into its slot.
    int param(const ParamStore& store, const std::string& name);

    // Elementwise with row broadcast: b may be [1,d] (or [d]) against [n,d].
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double factor);

    int matmul(int a, int b);
    int linear(int x, int w, int b);  // x [n,in] * w [in,out] + b row

    int sigmoid(int a);
    int relu(int a);
    int gelu(int a);

    // Row-wise normalization followed by the affine (gain, bias), both [d].
    int layer_norm(int x, int gain, int bias);

    // Scaled dot-product multi-head self attention over [T, d] inputs.
    int softmax_attention(int q, int k, int v, int heads);

    // Concatenate along columns; inputs must share the row count.
    int concat(const std::vector<int>& parts);

    int sum(int a);                    // scalar [1]
    int mean_sq_error(int a, int b);   // scalar [1]

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape once. Repeated calls
    // accumulate, matching the convention of the parameter store.
    void backward(int loss_id);

    // Adds every parameter leaf's gradient (times scale) into the target.
    void add_param_grads_to(ParamStore& store, double scale = 1.0) const;
    void add_param_grads_to(GradBuffer& buffer, double scale = 1.0) const;

    bool recording() const { return record_; }
    int node_count() const { return static_cast<int>(nodes_.size()); }

private:
    using BackFn = std::function<void(Graph&, int self)>;

    struct Node {
        Tensor value;
        Tensor grad;  // allocated lazily during backward
        BackFn backfn;
    };

    int push(Tensor value, BackFn backfn);
    Tensor& grad_buf(int id);  // allocates to the value's shape on first use

    bool record_ = true;
    std::vector<Node> nodes_;
    std::vector<std::pair<int, std::string>> param_leaves_;
};

// Central-difference gradient verification. `loss` evaluates the scalar
// objective on the current parameter values; when `with_grad` is set it must
// also accumulate analytic gradients into the store (typically by running a
// graph and calling backward). Returns the maximum per-scalar error
// |analytic - fd| / max(|analytic|, |fd|, 1e-2): relative error for ordinary
// gradients, while for near-zero gradients a 1e-4 threshold on the result
// degrades to a 1e-6 absolute tolerance (the floor below which central
// differences are cancellation noise).
double finite_diff_check(const std::function<double(ParamStore&, bool with_grad)>& loss,
                         ParamStore& params, double h);

}  // namespace trajdiff
