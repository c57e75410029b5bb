#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "taser/rng.hpp"

namespace taser {

using Shape = std::vector<int>;

enum class RunMode { Train, Eval };

std::string shape_str(const Shape& s);

/// Suspends graph recording on this thread while alive (nests). Forward
/// passes that will never be differentiated (corpus embedding, retrieval)
/// run under a guard so no tape is built.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward_fn;  // reads this->grad, accumulates into parents

    std::size_t size() const { return data.size(); }
    bool is_leaf() const { return !backward_fn; }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

/// Dense f64 array of rank 1 or 2 participating in reverse-mode autodiff.
///
/// A Tensor is a cheap value handle onto a shared node. Nodes built by ops
/// record their parents and a backward closure; calling backward() on a
/// scalar sweeps the recorded graph and accumulates d(loss)/d(leaf) into
/// every reachable leaf that has requires_grad set. Gradients accumulate
/// across backward calls until zero_grad().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor from_vector(std::vector<double> values, Shape shape);
    static Tensor scalar(double value);
    /// Truncated-normal leaf, the initialization used for weight matrices.
    static Tensor trunc_normal(Shape shape, Rng& rng, double sigma, double clip = 2.0);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return impl_->data.size(); }

    std::span<const double> data() const { return impl_->data; }
    /// Mutable view of a leaf's payload (optimizer updates). Non-leaf
    /// tensors are frozen after forward construction.
    std::span<double> mutable_data();

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const { return impl_->grad; }
    void zero_grad() { if (impl_) impl_->grad.assign(impl_->data.size(), 0.0); }

    double item() const;
    double at(int i) const;
    double at(int i, int j) const;

    Tensor& set_requires_grad(bool v);
    bool requires_grad() const { return impl_->requires_grad; }

    /// Same data, no tape participation.
    Tensor detach() const;

    /// Reverse-mode sweep from a scalar. Leaf grads accumulate across calls.
    void backward() const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

// ---- elementwise and arithmetic -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
/// x + v where v is a plain constant vector (no gradient into v).
Tensor add_const(const Tensor& x, const std::vector<double>& v);
/// Rows of a [n x d] matrix each offset by a [d] vector.
Tensor add_rowvec(const Tensor& x, const Tensor& v);
/// Matrix or vector scaled by a scalar *tensor* (gradient flows into both).
Tensor scale_by(const Tensor& x, const Tensor& s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matvec(const Tensor& a, const Tensor& v);
Tensor transpose(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

// ---- nonlinearities and normalization ---------------------------------------

Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);
/// Zero-mean unit-variance along the last axis, then affine gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// ---- reductions and indexing -----------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor logsumexp(const Tensor& x);
Tensor row(const Tensor& x, int i);
Tensor pick(const Tensor& v, int i);
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor stack_rows(const std::vector<Tensor>& rows);
Tensor stack_scalars(const std::vector<Tensor>& scalars);
Tensor reshape(const Tensor& x, Shape shape);

/// Gather rows of an embedding table; backward scatter-adds.
Tensor embedding(const Tensor& table, std::span<const int> ids);

// ---- discrete routing primitive ---------------------------------------------

/// Straight-through Gumbel-Softmax. Train mode perturbs the logits with
/// Gumbel(0,1) noise, divides by temperature and discretizes the softmax to
/// the argmax one-hot; the backward pass flows through the soft
/// distribution. Eval mode is a deterministic argmax one-hot with no noise
/// and no gradient.
Tensor gumbel_softmax_hard(const Tensor& logits, double temperature, Rng& rng, RunMode mode);
/// Deterministic-noise variant used by tests and by the rng overload.
Tensor gumbel_softmax_hard_with_noise(const Tensor& logits, std::span<const double> noise,
                                      double temperature);

// ---- verification ------------------------------------------------------------

/// Max over coordinates of |analytic - central difference| relative error
/// for a scalar-valued function of one tensor.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps);

}  // namespace taser
