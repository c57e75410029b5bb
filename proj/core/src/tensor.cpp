#include "taser/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace taser {

namespace {

thread_local int g_no_grad_depth = 0;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) fail("tensor dimensions must be positive, got " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

// out(m x n) += a(m x k) * b(k x n)
void mm_nn_acc(const double* a, const double* b, double* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* orow = out + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double c = arow[p];
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += c * brow[j];
        }
    }
}

// out(m x k) += g(m x n) * b(k x n)^T
void mm_nt_acc(const double* g, const double* b, double* out, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* grow = g + static_cast<std::size_t>(i) * n;
        double* orow = out + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* brow = b + static_cast<std::size_t>(p) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            orow[p] += acc;
        }
    }
}

// out(k x n) += a(m x k)^T * g(m x n)
void mm_tn_acc(const double* a, const double* g, double* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        const double* grow = g + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double c = arow[p];
            double* orow = out + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += c * grow[j];
        }
    }
}

using Impl = std::shared_ptr<TensorImpl>;

Tensor make_node(Shape shape, std::vector<double> data, std::vector<Impl> parents,
                 std::function<void(TensorImpl&)> bw) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    if (grad_enabled()) {
        bool rg = false;
        for (const auto& p : parents) rg = rg || p->requires_grad;
        if (rg) {
            impl->requires_grad = true;
            impl->parents = std::move(parents);
            impl->backward_fn = std::move(bw);
        }
    }
    return Tensor(std::move(impl));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        fail(std::string(op) + ": shape mismatch: " + shape_str(a.shape()) + " vs " +
             shape_str(b.shape()));
}

struct AxisView {
    std::size_t groups, len, stride, group_step;  // base of group g = g * group_step when stride==1
    // For axis 0 of a 2-d tensor the groups are columns: base g, stride = cols.
};

AxisView axis_view(const Tensor& x, int axis) {
    if (x.rank() == 1) {
        if (axis != 0) fail("softmax: axis " + std::to_string(axis) + " invalid for rank-1 tensor");
        return {1, x.size(), 1, 0};
    }
    if (x.rank() == 2) {
        std::size_t r = static_cast<std::size_t>(x.dim(0));
        std::size_t c = static_cast<std::size_t>(x.dim(1));
        if (axis == 1) return {r, c, 1, c};
        if (axis == 0) return {c, r, c, 1};
        fail("softmax: axis " + std::to_string(axis) + " invalid for rank-2 tensor");
    }
    fail("softmax: only rank 1 or 2 supported");
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << " x ";
        os << s[i];
    }
    os << "]";
    return os.str();
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

// ---- construction -----------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = numel(shape);
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data.assign(n, 0.0);
    return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.impl()->data.begin(), t.impl()->data.end(), value);
    return t;
}

Tensor Tensor::from_vector(std::vector<double> values, Shape shape) {
    if (values.size() != numel(shape))
        fail("from_vector: " + std::to_string(values.size()) + " values for shape " +
             shape_str(shape));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from_vector({value}, {1}); }

Tensor Tensor::trunc_normal(Shape shape, Rng& rng, double sigma, double clip) {
    Tensor t = zeros(std::move(shape));
    for (double& v : t.impl()->data) v = rng.trunc_normal(sigma, clip);
    return t;
}

std::span<double> Tensor::mutable_data() {
    if (!impl_->is_leaf())
        throw std::logic_error("mutable_data: only leaf tensors may be mutated");
    return impl_->data;
}

double Tensor::item() const {
    if (size() != 1) fail("item: tensor has " + std::to_string(size()) + " elements");
    return impl_->data[0];
}

double Tensor::at(int i) const { return impl_->data.at(static_cast<std::size_t>(i)); }

double Tensor::at(int i, int j) const {
    if (rank() != 2) fail("at(i,j): tensor is not rank 2");
    return impl_->data.at(static_cast<std::size_t>(i) * dim(1) + static_cast<std::size_t>(j));
}

Tensor& Tensor::set_requires_grad(bool v) {
    if (!impl_->is_leaf()) throw std::logic_error("set_requires_grad: not a leaf tensor");
    impl_->requires_grad = v;
    return *this;
}

Tensor Tensor::detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(std::move(impl));
}

void Tensor::backward() const {
    if (!impl_) fail("backward: undefined tensor");
    if (size() != 1) fail("backward: loss must be scalar, got " + shape_str(shape()));

    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> visited;
    struct Frame {
        TensorImpl* node;
        std::size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({impl_.get(), 0});
    visited.insert(impl_.get());
    while (!stack.empty()) {
        Frame& fr = stack.back();
        if (fr.next < fr.node->parents.size()) {
            TensorImpl* p = fr.node->parents[fr.next++].get();
            if (visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(fr.node);
            stack.pop_back();
        }
    }
    // Fresh pass through interior nodes; leaves keep accumulating.
    for (TensorImpl* n : order)
        if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
    impl_->ensure_grad();
    impl_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto pa = a.impl(), pb = b.impl();
    return make_node(a.shape(), std::move(out), {pa, pb}, [pa, pb](TensorImpl& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto pa = a.impl(), pb = b.impl();
    return make_node(a.shape(), std::move(out), {pa, pb}, [pa, pb](TensorImpl& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto pa = a.impl(), pb = b.impl();
    return make_node(a.shape(), std::move(out), {pa, pb}, [pa, pb](TensorImpl& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * pb->data[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pb->grad[i] += self.grad[i] * pa->data[i];
        }
    });
}

Tensor neg(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -a.data()[i];
    auto pa = a.impl();
    return make_node(a.shape(), std::move(out), {pa}, [pa](TensorImpl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] -= self.grad[i];
    });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.data()[i];
    auto pa = a.impl();
    return make_node(a.shape(), std::move(out), {pa}, [pa, c](TensorImpl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += c * self.grad[i];
    });
}

Tensor add_const(const Tensor& x, const std::vector<double>& v) {
    if (v.size() != x.size())
        fail("add_const: " + std::to_string(v.size()) + " constants for " + shape_str(x.shape()));
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + v[i];
    auto px = x.impl();
    return make_node(x.shape(), std::move(out), {px}, [px](TensorImpl& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    if (x.rank() != 2 || v.rank() != 1 || x.dim(1) != v.dim(0))
        fail("add_rowvec: " + shape_str(x.shape()) + " vs " + shape_str(v.shape()));
    std::size_t r = static_cast<std::size_t>(x.dim(0)), c = static_cast<std::size_t>(x.dim(1));
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.data()[i * c + j] + v.data()[j];
    auto px = x.impl(), pv = v.impl();
    return make_node(x.shape(), std::move(out), {px, pv}, [px, pv, r, c](TensorImpl& self) {
        if (px->requires_grad) {
            px->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
        }
        if (pv->requires_grad) {
            pv->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) pv->grad[j] += self.grad[i * c + j];
        }
    });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
    if (s.size() != 1) fail("scale_by: scale must be a scalar tensor, got " + shape_str(s.shape()));
    double sv = s.data()[0];
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * x.data()[i];
    auto px = x.impl(), ps = s.impl();
    return make_node(x.shape(), std::move(out), {px, ps}, [px, ps](TensorImpl& self) {
        double sv2 = ps->data[0];
        if (px->requires_grad) {
            px->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                px->grad[i] += sv2 * self.grad[i];
        }
        if (ps->requires_grad) {
            ps->ensure_grad();
            double acc = 0.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * px->data[i];
            ps->grad[0] += acc;
        }
    });
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        fail("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
             shape_str(b.shape()));
    int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    mm_nn_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
    auto pa = a.impl(), pb = b.impl();
    return make_node({m, n}, std::move(out), {pa, pb}, [pa, pb, m, k, n](TensorImpl& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            mm_nt_acc(self.grad.data(), pb->data.data(), pa->grad.data(), m, n, k);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            mm_tn_acc(pa->data.data(), self.grad.data(), pb->grad.data(), m, k, n);
        }
    });
}

Tensor matvec(const Tensor& a, const Tensor& v) {
    if (a.rank() != 2 || v.rank() != 1 || a.dim(1) != v.dim(0))
        fail("matvec: " + shape_str(a.shape()) + " vs " + shape_str(v.shape()));
    int m = a.dim(0), k = a.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        const double* arow = a.data().data() + static_cast<std::size_t>(i) * k;
        double acc = 0.0;
        for (int j = 0; j < k; ++j) acc += arow[j] * v.data()[j];
        out[static_cast<std::size_t>(i)] = acc;
    }
    auto pa = a.impl(), pv = v.impl();
    return make_node({m}, std::move(out), {pa, pv}, [pa, pv, m, k](TensorImpl& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (int i = 0; i < m; ++i) {
                double g = self.grad[static_cast<std::size_t>(i)];
                double* grow = pa->grad.data() + static_cast<std::size_t>(i) * k;
                for (int j = 0; j < k; ++j) grow[j] += g * pv->data[static_cast<std::size_t>(j)];
            }
        }
        if (pv->requires_grad) {
            pv->ensure_grad();
            for (int i = 0; i < m; ++i) {
                double g = self.grad[static_cast<std::size_t>(i)];
                const double* arow = pa->data.data() + static_cast<std::size_t>(i) * k;
                for (int j = 0; j < k; ++j) pv->grad[static_cast<std::size_t>(j)] += g * arow[j];
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) fail("transpose: rank-2 tensor required, got " + shape_str(a.shape()));
    int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(a.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j) * m + i] = a.data()[static_cast<std::size_t>(i) * n + j];
    auto pa = a.impl();
    return make_node({n, m}, std::move(out), {pa}, [pa, m, n](TensorImpl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                pa->grad[static_cast<std::size_t>(i) * n + j] +=
                    self.grad[static_cast<std::size_t>(j) * m + i];
    });
}

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1 || a.dim(0) != b.dim(0))
        fail("dot: dimension mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i] * b.data()[i];
    auto pa = a.impl(), pb = b.impl();
    return make_node({1}, {acc}, {pa, pb}, [pa, pb](TensorImpl& self) {
        double g = self.grad[0];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < pa->data.size(); ++i) pa->grad[i] += g * pb->data[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < pb->data.size(); ++i) pb->grad[i] += g * pa->data[i];
        }
    });
}

// ---- nonlinearities -----------------------------------------------------------

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    auto px = x.impl();
    return make_node(x.shape(), std::move(out), {px}, [px](TensorImpl& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (px->data[i] > 0.0) px->grad[i] += self.grad[i];
    });
}

Tensor exp(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.data()[i]);
    auto px = x.impl();
    return make_node(x.shape(), std::move(out), {px}, [px](TensorImpl& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            px->grad[i] += self.grad[i] * self.data[i];
    });
}

Tensor softmax(const Tensor& x, int axis) {
    AxisView v = axis_view(x, axis);
    std::vector<double> out(x.size());
    for (std::size_t g = 0; g < v.groups; ++g) {
        std::size_t base = (v.stride == 1) ? g * v.group_step : g;
        double mx = -HUGE_VAL;
        for (std::size_t i = 0; i < v.len; ++i) mx = std::max(mx, x.data()[base + i * v.stride]);
        double denom = 0.0;
        for (std::size_t i = 0; i < v.len; ++i) {
            double e = std::exp(x.data()[base + i * v.stride] - mx);
            out[base + i * v.stride] = e;
            denom += e;
        }
        for (std::size_t i = 0; i < v.len; ++i) out[base + i * v.stride] /= denom;
    }
    auto px = x.impl();
    return make_node(x.shape(), std::move(out), {px}, [px, v](TensorImpl& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t g = 0; g < v.groups; ++g) {
            std::size_t base = (v.stride == 1) ? g * v.group_step : g;
            double inner = 0.0;
            for (std::size_t i = 0; i < v.len; ++i) {
                std::size_t k = base + i * v.stride;
                inner += self.grad[k] * self.data[k];
            }
            for (std::size_t i = 0; i < v.len; ++i) {
                std::size_t k = base + i * v.stride;
                px->grad[k] += self.data[k] * (self.grad[k] - inner);
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    int d = x.rank() == 1 ? x.dim(0) : x.dim(1);
    if (gain.rank() != 1 || bias.rank() != 1 || gain.dim(0) != d || bias.dim(0) != d)
        fail("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
             " do not match feature size " + std::to_string(d));
    std::size_t rows = x.size() / static_cast<std::size_t>(d);
    std::size_t dd = static_cast<std::size_t>(d);
    std::vector<double> out(x.size());
    std::vector<double> xhat(x.size());
    std::vector<double> rstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * dd;
        double mu = 0.0;
        for (std::size_t j = 0; j < dd; ++j) mu += xr[j];
        mu /= static_cast<double>(dd);
        double var = 0.0;
        for (std::size_t j = 0; j < dd; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(dd);
        double rs = 1.0 / std::sqrt(var + eps);
        rstd[r] = rs;
        for (std::size_t j = 0; j < dd; ++j) {
            double h = (xr[j] - mu) * rs;
            xhat[r * dd + j] = h;
            out[r * dd + j] = gain.data()[j] * h + bias.data()[j];
        }
    }
    auto px = x.impl(), pg = gain.impl(), pb = bias.impl();
    return make_node(x.shape(), std::move(out), {px, pg, pb},
                     [px, pg, pb, rows, dd, xhat = std::move(xhat),
                      rstd = std::move(rstd)](TensorImpl& self) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gy = self.grad.data() + r * dd;
            const double* xh = xhat.data() + r * dd;
            if (pg->requires_grad) {
                pg->ensure_grad();
                for (std::size_t j = 0; j < dd; ++j) pg->grad[j] += gy[j] * xh[j];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t j = 0; j < dd; ++j) pb->grad[j] += gy[j];
            }
            if (px->requires_grad) {
                px->ensure_grad();
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < dd; ++j) {
                    double gh = gy[j] * pg->data[j];
                    m1 += gh;
                    m2 += gh * xh[j];
                }
                m1 /= static_cast<double>(dd);
                m2 /= static_cast<double>(dd);
                double* gx = px->grad.data() + r * dd;
                for (std::size_t j = 0; j < dd; ++j) {
                    double gh = gy[j] * pg->data[j];
                    gx[j] += rstd[r] * (gh - m1 - xh[j] * m2);
                }
            }
        }
    });
}

// ---- reductions and indexing ----------------------------------------------------

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    auto px = x.impl();
    return make_node({1}, {acc}, {px}, [px](TensorImpl& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (double& g : px->grad) g += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    double inv = 1.0 / static_cast<double>(x.size());
    auto px = x.impl();
    return make_node({1}, {acc * inv}, {px}, [px, inv](TensorImpl& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (double& g : px->grad) g += self.grad[0] * inv;
    });
}

Tensor logsumexp(const Tensor& x) {
    if (x.rank() != 1) fail("logsumexp: rank-1 tensor required, got " + shape_str(x.shape()));
    double mx = -HUGE_VAL;
    for (double v : x.data()) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : x.data()) denom += std::exp(v - mx);
    auto px = x.impl();
    return make_node({1}, {mx + std::log(denom)}, {px}, [px](TensorImpl& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        double out = self.data[0];
        for (std::size_t i = 0; i < px->data.size(); ++i)
            px->grad[i] += self.grad[0] * std::exp(px->data[i] - out);
    });
}

Tensor row(const Tensor& x, int i) {
    if (x.rank() != 2) fail("row: rank-2 tensor required, got " + shape_str(x.shape()));
    if (i < 0 || i >= x.dim(0)) fail("row: index " + std::to_string(i) + " out of range");
    std::size_t c = static_cast<std::size_t>(x.dim(1));
    std::size_t base = static_cast<std::size_t>(i) * c;
    std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(base),
                            x.data().begin() + static_cast<std::ptrdiff_t>(base + c));
    auto px = x.impl();
    return make_node({x.dim(1)}, std::move(out), {px}, [px, base, c](TensorImpl& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t j = 0; j < c; ++j) px->grad[base + j] += self.grad[j];
    });
}

Tensor pick(const Tensor& v, int i) {
    if (v.rank() != 1) fail("pick: rank-1 tensor required, got " + shape_str(v.shape()));
    if (i < 0 || i >= v.dim(0)) fail("pick: index " + std::to_string(i) + " out of range");
    auto pv = v.impl();
    std::size_t k = static_cast<std::size_t>(i);
    return make_node({1}, {v.data()[k]}, {pv}, [pv, k](TensorImpl& self) {
        if (!pv->requires_grad) return;
        pv->ensure_grad();
        pv->grad[k] += self.grad[0];
    });
}

Tensor slice_cols(const Tensor& x, int start, int len) {
    if (x.rank() != 2) fail("slice_cols: rank-2 tensor required");
    if (start < 0 || len <= 0 || start + len > x.dim(1))
        fail("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + len) +
             ") out of range for " + shape_str(x.shape()));
    std::size_t r = static_cast<std::size_t>(x.dim(0)), c = static_cast<std::size_t>(x.dim(1));
    std::size_t s = static_cast<std::size_t>(start), l = static_cast<std::size_t>(len);
    std::vector<double> out(r * l);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < l; ++j) out[i * l + j] = x.data()[i * c + s + j];
    auto px = x.impl();
    return make_node({x.dim(0), len}, std::move(out), {px}, [px, r, c, s, l](TensorImpl& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < l; ++j) px->grad[i * c + s + j] += self.grad[i * l + j];
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) fail("concat_cols: no parts");
    int rows = parts[0].dim(0);
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.dim(0) != rows)
            fail("concat_cols: inconsistent shapes, first part has " +
                 std::to_string(rows) + " rows, got " + shape_str(p.shape()));
        total += p.dim(1);
    }
    std::size_t r = static_cast<std::size_t>(rows), t = static_cast<std::size_t>(total);
    std::vector<double> out(r * t);
    std::vector<Impl> impls;
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        std::size_t c = static_cast<std::size_t>(p.dim(1));
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out[i * t + off + j] = p.data()[i * c + j];
        impls.push_back(p.impl());
        offsets.push_back(off);
        off += c;
    }
    return make_node({rows, total}, std::move(out), impls,
                     [impls, offsets, r, t](TensorImpl& self) {
        for (std::size_t k = 0; k < impls.size(); ++k) {
            const auto& p = impls[k];
            if (!p->requires_grad) continue;
            p->ensure_grad();
            std::size_t c = p->data.size() / r;
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    p->grad[i * c + j] += self.grad[i * t + offsets[k] + j];
        }
    });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) fail("stack_rows: no rows");
    int d = rows[0].dim(0);
    std::vector<double> out;
    out.reserve(rows.size() * static_cast<std::size_t>(d));
    std::vector<Impl> impls;
    for (const Tensor& v : rows) {
        if (v.rank() != 1 || v.dim(0) != d)
            fail("stack_rows: inconsistent row shapes, expected [" + std::to_string(d) +
                 "], got " + shape_str(v.shape()));
        out.insert(out.end(), v.data().begin(), v.data().end());
        impls.push_back(v.impl());
    }
    std::size_t dd = static_cast<std::size_t>(d);
    return make_node({static_cast<int>(rows.size()), d}, std::move(out), impls,
                     [impls, dd](TensorImpl& self) {
        for (std::size_t i = 0; i < impls.size(); ++i) {
            const auto& p = impls[i];
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (std::size_t j = 0; j < dd; ++j) p->grad[j] += self.grad[i * dd + j];
        }
    });
}

Tensor stack_scalars(const std::vector<Tensor>& scalars) {
    if (scalars.empty()) fail("stack_scalars: no values");
    std::vector<double> out;
    out.reserve(scalars.size());
    std::vector<Impl> impls;
    for (const Tensor& s : scalars) {
        if (s.size() != 1) fail("stack_scalars: non-scalar entry " + shape_str(s.shape()));
        out.push_back(s.data()[0]);
        impls.push_back(s.impl());
    }
    return make_node({static_cast<int>(scalars.size())}, std::move(out), impls,
                     [impls](TensorImpl& self) {
        for (std::size_t i = 0; i < impls.size(); ++i) {
            if (!impls[i]->requires_grad) continue;
            impls[i]->ensure_grad();
            impls[i]->grad[0] += self.grad[i];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.size())
        fail("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    std::vector<double> out(x.data().begin(), x.data().end());
    auto px = x.impl();
    return make_node(std::move(shape), std::move(out), {px}, [px](TensorImpl& self) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
    });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
    if (table.rank() != 2) fail("embedding: table must be rank 2");
    int v = table.dim(0), d = table.dim(1);
    for (int id : ids)
        if (id < 0 || id >= v)
            fail("embedding: id " + std::to_string(id) + " out of range [0, " + std::to_string(v) +
                 ")");
    std::size_t dd = static_cast<std::size_t>(d);
    std::vector<double> out(ids.size() * dd);
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(table.data().data() + idx[i] * dd, dd, out.data() + i * dd);
    auto pt = table.impl();
    return make_node({static_cast<int>(ids.size()), d}, std::move(out), {pt},
                     [pt, idx = std::move(idx), dd](TensorImpl& self) {
        if (!pt->requires_grad) return;
        pt->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < dd; ++j)
                pt->grad[idx[i] * dd + j] += self.grad[i * dd + j];
    });
}

// ---- straight-through Gumbel-Softmax ------------------------------------------

Tensor gumbel_softmax_hard_with_noise(const Tensor& logits, std::span<const double> noise,
                                      double temperature) {
    if (logits.rank() != 1 || logits.dim(0) < 1)
        fail("gumbel_softmax_hard: logits must be a nonempty vector");
    if (!(temperature > 0.0))
        fail("gumbel_softmax_hard: temperature must be positive, got " +
             std::to_string(temperature));
    if (noise.size() != logits.size()) fail("gumbel_softmax_hard: noise size mismatch");
    std::size_t n = logits.size();
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (logits.data()[i] + noise[i]) / temperature;
    double mx = *std::max_element(z.begin(), z.end());
    std::size_t sel =
        static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    double denom = 0.0;
    std::vector<double> soft(n);
    for (std::size_t i = 0; i < n; ++i) {
        soft[i] = std::exp(z[i] - mx);
        denom += soft[i];
    }
    for (std::size_t i = 0; i < n; ++i) soft[i] /= denom;
    std::vector<double> out(n, 0.0);
    out[sel] = 1.0;
    auto pl = logits.impl();
    return make_node(logits.shape(), std::move(out), {pl},
                     [pl, soft = std::move(soft), temperature](TensorImpl& self) {
        if (!pl->requires_grad) return;
        pl->ensure_grad();
        double inner = 0.0;
        for (std::size_t i = 0; i < soft.size(); ++i) inner += self.grad[i] * soft[i];
        for (std::size_t i = 0; i < soft.size(); ++i)
            pl->grad[i] += soft[i] * (self.grad[i] - inner) / temperature;
    });
}

Tensor gumbel_softmax_hard(const Tensor& logits, double temperature, Rng& rng, RunMode mode) {
    if (logits.rank() != 1 || logits.dim(0) < 1)
        fail("gumbel_softmax_hard: logits must be a nonempty vector");
    if (!(temperature > 0.0))
        fail("gumbel_softmax_hard: temperature must be positive, got " +
             std::to_string(temperature));
    if (mode == RunMode::Eval) {
        std::size_t sel = static_cast<std::size_t>(
            std::max_element(logits.data().begin(), logits.data().end()) - logits.data().begin());
        std::vector<double> out(logits.size(), 0.0);
        out[sel] = 1.0;
        return Tensor::from_vector(std::move(out), logits.shape());
    }
    std::vector<double> noise(logits.size());
    for (double& g : noise) g = rng.gumbel();
    return gumbel_softmax_hard_with_noise(logits, noise, temperature);
}

// ---- gradient checking -----------------------------------------------------------

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    Tensor probe = Tensor::from_vector(std::vector<double>(x.data().begin(), x.data().end()),
                                       x.shape());
    probe.set_requires_grad(true);
    Tensor loss = f(probe);
    if (loss.size() != 1) fail("grad_check: f must return a scalar");
    loss.backward();
    std::vector<double> analytic(probe.size(), 0.0);
    if (probe.has_grad())
        analytic.assign(probe.grad().begin(), probe.grad().end());

    std::vector<double> base(x.data().begin(), x.data().end());
    double worst = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        std::vector<double> hi = base, lo = base;
        hi[i] += eps;
        lo[i] -= eps;
        double fp = f(Tensor::from_vector(std::move(hi), x.shape())).item();
        double fm = f(Tensor::from_vector(std::move(lo), x.shape())).item();
        double numeric = (fp - fm) / (2.0 * eps);
        double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace taser
