#pragma once

// Dense tensors with reverse-mode automatic differentiation on a tape.
// Scalar type is a template parameter: float for training, double for
// gradient checking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bpd {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ')';
    return os.str();
}

template <class S>
class Tensor {
public:
    Tensor() : impl_(std::make_shared<Impl>()) {}

    static Tensor zeros(Shape shape) {
        Tensor t;
        t.impl_->shape = std::move(shape);
        t.impl_->v.assign(shape_numel(t.impl_->shape), S(0));
        return t;
    }

    static Tensor full(Shape shape, S value) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.impl_->v.begin(), t.impl_->v.end(), value);
        return t;
    }

    static Tensor scalar(S value) { return full({1}, value); }

    static Tensor from(std::vector<S> values, Shape shape) {
        if (values.size() != shape_numel(shape)) {
            throw ShapeError("tensor: " + std::to_string(values.size()) +
                             " values do not fill shape " + shape_str(shape));
        }
        Tensor t;
        t.impl_->shape = std::move(shape);
        t.impl_->v = std::move(values);
        return t;
    }

    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t size() const { return impl_->v.size(); }
    std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }

    std::vector<S>& values() { return impl_->v; }
    const std::vector<S>& values() const { return impl_->v; }

    S item() const {
        if (size() != 1) throw ShapeError("item: tensor has " + std::to_string(size()) + " elements");
        return impl_->v[0];
    }

    bool requires_grad() const { return impl_->rg; }

    Tensor& set_requires_grad(bool rg) {
        impl_->rg = rg;
        if (rg && impl_->g.size() != impl_->v.size()) impl_->g.assign(impl_->v.size(), S(0));
        return *this;
    }

    std::vector<S>& grad() {
        if (!impl_->rg) throw std::logic_error("grad: tensor does not require grad");
        return impl_->g;
    }
    const std::vector<S>& grad() const {
        if (!impl_->rg) throw std::logic_error("grad: tensor does not require grad");
        return impl_->g;
    }

    void zero_grad() {
        if (impl_->rg) std::fill(impl_->g.begin(), impl_->g.end(), S(0));
    }

    // identity of the underlying storage, used for graph bookkeeping
    const void* id() const { return impl_.get(); }

    struct Impl {
        Shape shape;
        std::vector<S> v;
        std::vector<S> g;
        bool rg = false;
    };
    std::shared_ptr<Impl> impl() const { return impl_; }

private:
    std::shared_ptr<Impl> impl_;
};

// Tape of recorded primitive applications. Activation is scoped: the tape
// registers itself on construction and restores the previous one on
// destruction. Single-threaded per tape; distinct threads get distinct
// active tapes.
template <class S>
class Tape {
public:
    Tape() : prev_(active_ref()) { active_ref() = this; }
    ~Tape() { active_ref() = prev_; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return active_ref(); }

    void record(std::function<void()> backward_fn,
                std::shared_ptr<typename Tensor<S>::Impl> output) {
        ops_.push_back(std::move(backward_fn));
        outputs_.push_back(std::move(output));
    }

    std::size_t node_count() const { return ops_.size(); }

    // Seeds grad(root) = 1 and replays recorded nodes in reverse order.
    // Node-output grads are reset first, so leaf grads accumulate across
    // repeated calls.
    void backward(Tensor<S>& root) {
        if (root.size() != 1) {
            throw ShapeError("backward: root must be scalar, got shape " + shape_str(root.shape()));
        }
        if (!root.requires_grad()) {
            throw std::logic_error("backward: root was not produced under this tape");
        }
        bool found = false;
        for (const auto& out : outputs_) {
            if (out.get() == root.id()) { found = true; break; }
        }
        if (!found) {
            throw std::logic_error("backward: root was not produced under this tape");
        }
        for (const auto& out : outputs_) std::fill(out->g.begin(), out->g.end(), S(0));
        root.grad()[0] = S(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

private:
    static Tape*& active_ref() {
        static thread_local Tape* active = nullptr;
        return active;
    }
    std::vector<std::function<void()>> ops_;
    std::vector<std::shared_ptr<typename Tensor<S>::Impl>> outputs_;
    Tape* prev_;
};

namespace detail {

template <class S>
bool any_requires_grad(std::initializer_list<Tensor<S>> ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

// Marks the output differentiable and records the backward closure when a
// tape is active and some input carries grad.
template <class S, class F>
void register_node(std::initializer_list<Tensor<S>> inputs, Tensor<S>& out, F&& backward_fn) {
    Tape<S>* tape = Tape<S>::active();
    if (!tape || !any_requires_grad(inputs)) return;
    out.set_requires_grad(true);
    tape->record(std::forward<F>(backward_fn), out.impl());
}

// Broadcast check: returns true when small's shape equals the trailing dims
// of big's shape (leading-dimension broadcast only).
inline bool is_suffix_shape(const Shape& big, const Shape& small) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary primitives with leading-dimension broadcasting
// ---------------------------------------------------------------------------

template <class S, class FwdOp, class BwdA, class BwdB>
Tensor<S> binary_elementwise(const char* name, const Tensor<S>& a, const Tensor<S>& b,
                             FwdOp fwd, BwdA bwd_a, BwdB bwd_b) {
    const bool a_big = detail::is_suffix_shape(a.shape(), b.shape());
    const bool b_big = detail::is_suffix_shape(b.shape(), a.shape());
    if (!a_big && !b_big) {
        throw ShapeError(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    const Tensor<S>& big = a_big ? a : b;
    const std::size_t n = big.size();
    const std::size_t na = a.size();
    const std::size_t nb = b.size();

    Tensor<S> out = Tensor<S>::zeros(big.shape());
    {
        const S* pa = a.values().data();
        const S* pb = b.values().data();
        S* po = out.values().data();
        for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pa[i % na], pb[i % nb]);
    }
    auto ai = a.impl();
    auto bi = b.impl();
    auto oi = out.impl();
    detail::register_node({a, b}, out, [=]() {
        const std::size_t total = oi->v.size();
        if (ai->rg) {
            for (std::size_t i = 0; i < total; ++i)
                ai->g[i % na] += bwd_a(ai->v[i % na], bi->v[i % nb]) * oi->g[i];
        }
        if (bi->rg) {
            for (std::size_t i = 0; i < total; ++i)
                bi->g[i % nb] += bwd_b(ai->v[i % na], bi->v[i % nb]) * oi->g[i];
        }
    });
    return out;
}

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_elementwise<S>(
        "add", a, b, [](S x, S y) { return x + y; }, [](S, S) { return S(1); },
        [](S, S) { return S(1); });
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_elementwise<S>(
        "sub", a, b, [](S x, S y) { return x - y; }, [](S, S) { return S(1); },
        [](S, S) { return S(-1); });
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_elementwise<S>(
        "mul", a, b, [](S x, S y) { return x * y; }, [](S, S y) { return y; },
        [](S x, S) { return x; });
}

template <class S>
Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_elementwise<S>(
        "div", a, b, [](S x, S y) { return x / y; }, [](S, S y) { return S(1) / y; },
        [](S x, S y) { return -x / (y * y); });
}

// ---------------------------------------------------------------------------
// Elementwise unary primitives
// ---------------------------------------------------------------------------

template <class S, class FwdOp, class BwdOp>
Tensor<S> unary_elementwise(const Tensor<S>& x, FwdOp fwd, BwdOp bwd) {
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = fwd(x.values()[i]);
    auto xi = x.impl();
    auto oi = out.impl();
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        for (std::size_t i = 0; i < xi->v.size(); ++i)
            xi->g[i] += bwd(xi->v[i], oi->v[i]) * oi->g[i];
    });
    return out;
}

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
    return unary_elementwise<S>(
        x, [](S v) { return v > S(0) ? v : S(0); },
        [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& x) {
    return unary_elementwise<S>(
        x, [](S v) { return S(1) / (S(1) + std::exp(-v)); },
        [](S, S y) { return y * (S(1) - y); });
}

template <class S>
Tensor<S> tanh_t(const Tensor<S>& x) {
    return unary_elementwise<S>(
        x, [](S v) { return std::tanh(v); }, [](S, S y) { return S(1) - y * y; });
}

template <class S>
Tensor<S> exp_t(const Tensor<S>& x) {
    return unary_elementwise<S>(
        x, [](S v) { return std::exp(v); }, [](S, S y) { return y; });
}

template <class S>
Tensor<S> log_t(const Tensor<S>& x) {
    for (S v : x.values()) {
        if (!(v > S(0))) {
            throw DomainError("log: non-positive input " + std::to_string(static_cast<double>(v)));
        }
    }
    return unary_elementwise<S>(
        x, [](S v) { return std::log(v); }, [](S v, S) { return S(1) / v; });
}

template <class S>
Tensor<S> square(const Tensor<S>& x) {
    return unary_elementwise<S>(
        x, [](S v) { return v * v; }, [](S v, S) { return S(2) * v; });
}

template <class S>
Tensor<S> sqrt_t(const Tensor<S>& x) {
    for (S v : x.values()) {
        if (v < S(0)) {
            throw DomainError("sqrt: negative input " + std::to_string(static_cast<double>(v)));
        }
    }
    return unary_elementwise<S>(
        x, [](S v) { return std::sqrt(v); },
        [](S, S y) { return y > S(0) ? S(1) / (S(2) * y) : S(0); });
}

template <class S>
Tensor<S> neg(const Tensor<S>& x) {
    return unary_elementwise<S>(
        x, [](S v) { return -v; }, [](S, S) { return S(-1); });
}

template <class S>
Tensor<S> scale(const Tensor<S>& x, S c) {
    return unary_elementwise<S>(
        x, [c](S v) { return c * v; }, [c](S, S) { return c; });
}

template <class S>
Tensor<S> add_scalar(const Tensor<S>& x, S c) {
    return unary_elementwise<S>(
        x, [c](S v) { return v + c; }, [](S, S) { return S(1); });
}

// Values below the floor are clamped; clamped positions get zero gradient.
template <class S>
Tensor<S> clamp_min(const Tensor<S>& x, S floor) {
    return unary_elementwise<S>(
        x, [floor](S v) { return v < floor ? floor : v; },
        [floor](S v, S) { return v < floor ? S(0) : S(1); });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> sum(const Tensor<S>& x) {
    S acc = std::accumulate(x.values().begin(), x.values().end(), S(0));
    Tensor<S> out = Tensor<S>::scalar(acc);
    auto xi = x.impl();
    auto oi = out.impl();
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        const S g = oi->g[0];
        for (auto& gi : xi->g) gi += g;
    });
    return out;
}

template <class S>
Tensor<S> mean(const Tensor<S>& x) {
    const S inv = S(1) / static_cast<S>(x.size());
    S acc = std::accumulate(x.values().begin(), x.values().end(), S(0));
    Tensor<S> out = Tensor<S>::scalar(acc * inv);
    auto xi = x.impl();
    auto oi = out.impl();
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        const S g = oi->g[0] * inv;
        for (auto& gi : xi->g) gi += g;
    });
    return out;
}

// Column means of a 2-D tensor: (n,d) -> (d)
template <class S>
Tensor<S> mean_axis0(const Tensor<S>& x) {
    if (x.rank() != 2) throw ShapeError("mean_axis0: expected rank 2, got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), d = x.dim(1);
    Tensor<S> out = Tensor<S>::zeros({d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.values()[j] += x.values()[i * d + j];
    const S inv = S(1) / static_cast<S>(n);
    for (auto& v : out.values()) v *= inv;
    auto xi = x.impl();
    auto oi = out.impl();
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) xi->g[i * d + j] += oi->g[j] * inv;
    });
    return out;
}

// Row sums of a 2-D tensor: (n,d) -> (n)
template <class S>
Tensor<S> sum_last(const Tensor<S>& x) {
    if (x.rank() != 2) throw ShapeError("sum_last: expected rank 2, got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), d = x.dim(1);
    Tensor<S> out = Tensor<S>::zeros({n});
    for (std::size_t i = 0; i < n; ++i) {
        S acc = S(0);
        for (std::size_t j = 0; j < d; ++j) acc += x.values()[i * d + j];
        out.values()[i] = acc;
    }
    auto xi = x.impl();
    auto oi = out.impl();
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) xi->g[i * d + j] += oi->g[i];
    });
    return out;
}

// ---------------------------------------------------------------------------
// Structural primitives
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> reshape(const Tensor<S>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.size()) {
        throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(new_shape));
    }
    Tensor<S> out = Tensor<S>::from(x.values(), std::move(new_shape));
    auto xi = x.impl();
    auto oi = out.impl();
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        for (std::size_t i = 0; i < xi->g.size(); ++i) xi->g[i] += oi->g[i];
    });
    return out;
}

// Concatenation of 2-D tensors along the feature (last) axis.
template <class S>
Tensor<S> concat(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
        throw ShapeError("concat: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const std::size_t n = a.dim(0), da = a.dim(1), db = b.dim(1);
    Tensor<S> out = Tensor<S>::zeros({n, da + db});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(a.values().begin() + i * da, da, out.values().begin() + i * (da + db));
        std::copy_n(b.values().begin() + i * db, db, out.values().begin() + i * (da + db) + da);
    }
    auto ai = a.impl();
    auto bi = b.impl();
    auto oi = out.impl();
    detail::register_node({a, b}, out, [=]() {
        for (std::size_t i = 0; i < n; ++i) {
            if (ai->rg)
                for (std::size_t j = 0; j < da; ++j) ai->g[i * da + j] += oi->g[i * (da + db) + j];
            if (bi->rg)
                for (std::size_t j = 0; j < db; ++j) bi->g[i * db + j] += oi->g[i * (da + db) + da + j];
        }
    });
    return out;
}

// Row gather: out[i] = x[perm[i]]. Used for the in-batch marginal shuffle.
template <class S>
Tensor<S> permute_rows(const Tensor<S>& x, const std::vector<std::size_t>& perm) {
    if (x.rank() != 2 || perm.size() != x.dim(0)) {
        throw ShapeError("permute_rows: " + shape_str(x.shape()) + " with " +
                         std::to_string(perm.size()) + " indices");
    }
    const std::size_t d = x.dim(1);
    Tensor<S> out = Tensor<S>::zeros({perm.size(), d});
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] >= x.dim(0)) throw ShapeError("permute_rows: index out of range");
        std::copy_n(x.values().begin() + perm[i] * d, d, out.values().begin() + i * d);
    }
    auto xi = x.impl();
    auto oi = out.impl();
    auto p = perm;
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        for (std::size_t i = 0; i < p.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) xi->g[p[i] * d + j] += oi->g[i * d + j];
    });
    return out;
}

// Time slice of a (n, channels, time) tensor: -> (n, channels)
template <class S>
Tensor<S> select_time(const Tensor<S>& x, std::size_t t) {
    if (x.rank() != 3 || t >= x.dim(2)) {
        throw ShapeError("select_time: shape " + shape_str(x.shape()) + " at t=" + std::to_string(t));
    }
    const std::size_t n = x.dim(0), c = x.dim(1), T = x.dim(2);
    Tensor<S> out = Tensor<S>::zeros({n, c});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) out.values()[i * c + j] = x.values()[(i * c + j) * T + t];
    auto xi = x.impl();
    auto oi = out.impl();
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) xi->g[(i * c + j) * T + t] += oi->g[i * c + j];
    });
    return out;
}

// ---------------------------------------------------------------------------
// Linear algebra and convolution
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor<S> out = Tensor<S>::zeros({m, n});
    {
        const S* pa = a.values().data();
        const S* pb = b.values().data();
        S* po = out.values().data();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t l = 0; l < k; ++l) {
                const S av = pa[i * k + l];
                const S* brow = pb + l * n;
                S* orow = po + i * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
    }
    auto ai = a.impl();
    auto bi = b.impl();
    auto oi = out.impl();
    detail::register_node({a, b}, out, [=]() {
        if (ai->rg) { // dA = dC * B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t l = 0; l < k; ++l) {
                    S acc = S(0);
                    const S* gorow = oi->g.data() + i * n;
                    const S* brow = bi->v.data() + l * n;
                    for (std::size_t j = 0; j < n; ++j) acc += gorow[j] * brow[j];
                    ai->g[i * k + l] += acc;
                }
        }
        if (bi->rg) { // dB = A^T * dC
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t l = 0; l < k; ++l) {
                    const S av = ai->v[i * k + l];
                    const S* gorow = oi->g.data() + i * n;
                    S* gbrow = bi->g.data() + l * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * gorow[j];
                }
        }
    });
    return out;
}

// Valid 1-D convolution over the time axis, stride 1.
// x: (n, in_ch, T); w: (out_ch, in_ch, k); bias: (out_ch) -> (n, out_ch, T-k+1)
template <class S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias) {
    if (x.rank() != 3 || w.rank() != 3 || bias.rank() != 1 || x.dim(1) != w.dim(1) ||
        bias.dim(0) != w.dim(0) || x.dim(2) < w.dim(2)) {
        throw ShapeError("conv1d: x " + shape_str(x.shape()) + ", w " + shape_str(w.shape()) +
                         ", bias " + shape_str(bias.shape()));
    }
    const std::size_t n = x.dim(0), ci = x.dim(1), T = x.dim(2);
    const std::size_t co = w.dim(0), kw = w.dim(2), to = T - kw + 1;
    Tensor<S> out = Tensor<S>::zeros({n, co, to});
    {
        const S* px = x.values().data();
        const S* pw = w.values().data();
        const S* pbias = bias.values().data();
        S* po = out.values().data();
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t f = 0; f < co; ++f) {
                S* orow = po + (b * co + f) * to;
                for (std::size_t t = 0; t < to; ++t) orow[t] = pbias[f];
                for (std::size_t c = 0; c < ci; ++c) {
                    const S* xrow = px + (b * ci + c) * T;
                    const S* wrow = pw + (f * ci + c) * kw;
                    for (std::size_t k = 0; k < kw; ++k) {
                        const S wv = wrow[k];
                        for (std::size_t t = 0; t < to; ++t) orow[t] += wv * xrow[t + k];
                    }
                }
            }
    }
    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = bias.impl();
    auto oi = out.impl();
    detail::register_node({x, w, bias}, out, [=]() {
        const S* go = oi->g.data();
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t f = 0; f < co; ++f) {
                const S* gorow = go + (b * co + f) * to;
                if (bi->rg) {
                    S acc = S(0);
                    for (std::size_t t = 0; t < to; ++t) acc += gorow[t];
                    bi->g[f] += acc;
                }
                for (std::size_t c = 0; c < ci; ++c) {
                    const S* xrow = xi->v.data() + (b * ci + c) * T;
                    const S* wrow = wi->v.data() + (f * ci + c) * kw;
                    S* gxrow = xi->rg ? xi->g.data() + (b * ci + c) * T : nullptr;
                    S* gwrow = wi->rg ? wi->g.data() + (f * ci + c) * kw : nullptr;
                    for (std::size_t k = 0; k < kw; ++k) {
                        if (gwrow) {
                            S acc = S(0);
                            for (std::size_t t = 0; t < to; ++t) acc += gorow[t] * xrow[t + k];
                            gwrow[k] += acc;
                        }
                        if (gxrow) {
                            const S wv = wrow[k];
                            for (std::size_t t = 0; t < to; ++t) gxrow[t + k] += wv * gorow[t];
                        }
                    }
                }
            }
    });
    return out;
}

// Non-overlapping max pooling over the time axis; trailing remainder dropped.
template <class S>
Tensor<S> maxpool1d(const Tensor<S>& x, std::size_t window) {
    if (x.rank() != 3 || window == 0 || x.dim(2) < window) {
        throw ShapeError("maxpool1d: shape " + shape_str(x.shape()) + " window " +
                         std::to_string(window));
    }
    const std::size_t n = x.dim(0), c = x.dim(1), T = x.dim(2), to = T / window;
    Tensor<S> out = Tensor<S>::zeros({n, c, to});
    auto argmax = std::make_shared<std::vector<std::size_t>>(n * c * to);
    for (std::size_t r = 0; r < n * c; ++r) {
        const S* xrow = x.values().data() + r * T;
        for (std::size_t t = 0; t < to; ++t) {
            std::size_t best = t * window;
            for (std::size_t k = 1; k < window; ++k)
                if (xrow[t * window + k] > xrow[best]) best = t * window + k;
            out.values()[r * to + t] = xrow[best];
            (*argmax)[r * to + t] = best;
        }
    }
    auto xi = x.impl();
    auto oi = out.impl();
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        for (std::size_t r = 0; r < n * c; ++r)
            for (std::size_t t = 0; t < to; ++t)
                xi->g[r * T + (*argmax)[r * to + t]] += oi->g[r * to + t];
    });
    return out;
}

// ---------------------------------------------------------------------------
// Softmax and dropout
// ---------------------------------------------------------------------------

// Softmax along the class (last) axis of a 2-D tensor, max-subtracted.
template <class S>
Tensor<S> softmax(const Tensor<S>& x) {
    if (x.rank() != 2) throw ShapeError("softmax: expected rank 2, got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), k = x.dim(1);
    Tensor<S> out = Tensor<S>::zeros({n, k});
    for (std::size_t i = 0; i < n; ++i) {
        const S* xrow = x.values().data() + i * k;
        S* orow = out.values().data() + i * k;
        S mx = xrow[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, xrow[j]);
        S denom = S(0);
        for (std::size_t j = 0; j < k; ++j) {
            orow[j] = std::exp(xrow[j] - mx);
            denom += orow[j];
        }
        for (std::size_t j = 0; j < k; ++j) orow[j] /= denom;
    }
    auto xi = x.impl();
    auto oi = out.impl();
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        for (std::size_t i = 0; i < n; ++i) {
            const S* p = oi->v.data() + i * k;
            const S* go = oi->g.data() + i * k;
            S dot = S(0);
            for (std::size_t j = 0; j < k; ++j) dot += p[j] * go[j];
            for (std::size_t j = 0; j < k; ++j) xi->g[i * k + j] += p[j] * (go[j] - dot);
        }
    });
    return out;
}

// Inverted dropout: kept activations are scaled by 1/(1-rate) so the
// evaluation path is the identity. Train-mode only; callers bypass in eval.
template <class S>
Tensor<S> dropout(const Tensor<S>& x, double rate, std::mt19937& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
    auto mask = std::make_shared<std::vector<S>>(x.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const S keep_scale = S(1.0 / (1.0 - rate));
    for (auto& m : *mask) m = u(rng) < rate ? S(0) : keep_scale;
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.values()[i] = x.values()[i] * (*mask)[i];
    auto xi = x.impl();
    auto oi = out.impl();
    detail::register_node({x}, out, [=]() {
        if (!xi->rg) return;
        for (std::size_t i = 0; i < xi->g.size(); ++i) xi->g[i] += (*mask)[i] * oi->g[i];
    });
    return out;
}

} // namespace bpd
