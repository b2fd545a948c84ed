#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace scd {

template <typename T>
struct Tensor;

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

inline std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

inline void check_shape_valid(const std::vector<int>& shape) {
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_str(shape));
    }
}

/// Dense row-major tensor with an optional gradient buffer. Non-leaf tensors
/// carry references to their parents and a closure that propagates the
/// gradient one op backwards; the graph is acyclic by construction. A tensor's
/// data is treated as immutable once an op has consumed it; the grad slot is
/// the only mutable part during backward.
template <typename T>
struct Tensor : std::enable_shared_from_this<Tensor<T>> {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until backward touches this tensor
    bool requires_grad = false;

    std::vector<TensorPtr<T>> parents;
    std::function<void(Tensor<T>&)> backward_fn;  // null for leaves
    const char* op_tag = "leaf";
    bool backward_consumed = false;

    Tensor(std::vector<int> shape_, bool req_grad)
        : shape(std::move(shape_)), requires_grad(req_grad) {
        check_shape_valid(shape);
        data.assign(shape_numel(shape), T(0));
    }

    static TensorPtr<T> create(std::vector<int> shape, bool requires_grad = false) {
        return std::make_shared<Tensor<T>>(std::move(shape), requires_grad);
    }

    static TensorPtr<T> from_data(std::vector<int> shape, std::vector<T> values, bool requires_grad = false) {
        auto t = create(std::move(shape), requires_grad);
        if (values.size() != t->data.size())
            throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(t->shape));
        t->data = std::move(values);
        return t;
    }

    static TensorPtr<T> full(std::vector<int> shape, T value, bool requires_grad = false) {
        auto t = create(std::move(shape), requires_grad);
        std::fill(t->data.begin(), t->data.end(), value);
        return t;
    }

    static TensorPtr<T> zeros(std::vector<int> shape, bool requires_grad = false) {
        return create(std::move(shape), requires_grad);
    }

    static TensorPtr<T> ones(std::vector<int> shape, bool requires_grad = false) {
        return full(std::move(shape), T(1), requires_grad);
    }

    /// Rank-0 tensor holding a single value.
    static TensorPtr<T> scalar(T value, bool requires_grad = false) {
        auto t = create(std::vector<int>{}, requires_grad);
        t->data[0] = value;
        return t;
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool is_scalar() const { return shape.empty(); }
    bool is_leaf() const { return !backward_fn; }

    T item() const {
        if (numel() != 1) throw std::invalid_argument("item() requires a single-element tensor");
        return data[0];
    }

    T at(std::initializer_list<int> idx) const { return data[flat_index(idx)]; }
    T& at(std::initializer_list<int> idx) { return data[flat_index(idx)]; }

    std::size_t flat_index(std::initializer_list<int> idx) const {
        if (idx.size() != shape.size()) throw std::invalid_argument("index rank mismatch");
        std::size_t flat = 0;
        auto it = idx.begin();
        for (std::size_t k = 0; k < shape.size(); ++k, ++it) {
            if (*it < 0 || *it >= shape[k]) throw std::invalid_argument("index out of bounds");
            flat = flat * static_cast<std::size_t>(shape[k]) + static_cast<std::size_t>(*it);
        }
        return flat;
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }

    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
        backward_consumed = false;
    }

    bool same_shape(const Tensor<T>& other) const { return shape == other.shape; }
};

namespace detail {

template <typename T>
inline bool any_requires_grad(const std::vector<TensorPtr<T>>& ts) {
    for (const auto& t : ts)
        if (t && t->requires_grad) return true;
    return false;
}

/// Records a graph node when any parent wants gradients; otherwise the result
/// is a plain leaf and the closure is dropped.
template <typename T>
TensorPtr<T> make_node(std::vector<int> shape, std::vector<TensorPtr<T>> parents, const char* tag,
                       std::function<void(Tensor<T>&)> backward_fn) {
    auto out = Tensor<T>::create(std::move(shape));
    if (any_requires_grad(parents)) {
        out->requires_grad = true;
        out->parents = std::move(parents);
        out->backward_fn = std::move(backward_fn);
        out->op_tag = tag;
    }
    return out;
}

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                                    shape_str(b.shape));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    detail::require_same_shape(*a, *b, "add");
    auto out = detail::make_node<T>(a->shape, {a, b}, "add", [a, b](Tensor<T>& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) b->grad[i] += self.grad[i];
        }
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    return out;
}

template <typename T>
TensorPtr<T> sub(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    detail::require_same_shape(*a, *b, "sub");
    auto out = detail::make_node<T>(a->shape, {a, b}, "sub", [a, b](Tensor<T>& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) b->grad[i] -= self.grad[i];
        }
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] - b->data[i];
    return out;
}

template <typename T>
TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    detail::require_same_shape(*a, *b, "mul");
    auto out = detail::make_node<T>(a->shape, {a, b}, "mul", [a, b](Tensor<T>& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i] * b->data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) b->grad[i] += self.grad[i] * a->data[i];
        }
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
    return out;
}

template <typename T>
TensorPtr<T> divide(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    detail::require_same_shape(*a, *b, "divide");
    for (const T v : b->data)
        if (v == T(0)) throw std::invalid_argument("divide: zero denominator");
    auto out = detail::make_node<T>(a->shape, {a, b}, "divide", [a, b](Tensor<T>& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i] / b->data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                b->grad[i] -= self.grad[i] * a->data[i] / (b->data[i] * b->data[i]);
        }
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] / b->data[i];
    return out;
}

template <typename T>
TensorPtr<T> neg(const TensorPtr<T>& a) {
    auto out = detail::make_node<T>(a->shape, {a}, "neg", [a](Tensor<T>& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] -= self.grad[i];
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = -a->data[i];
    return out;
}

template <typename T>
TensorPtr<T> abs(const TensorPtr<T>& a) {
    auto out = detail::make_node<T>(a->shape, {a}, "abs", [a](Tensor<T>& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const T x = a->data[i];
            // subgradient 0 at x == 0
            a->grad[i] += self.grad[i] * (x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)));
        }
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = std::abs(a->data[i]);
    return out;
}

template <typename T>
TensorPtr<T> log(const TensorPtr<T>& a) {
    for (const T v : a->data)
        if (!(v > T(0))) throw std::domain_error("log: non-positive value; clamp inputs first");
    auto out = detail::make_node<T>(a->shape, {a}, "log", [a](Tensor<T>& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i] / a->data[i];
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = std::log(a->data[i]);
    return out;
}

template <typename T>
TensorPtr<T> scalar_mul(const TensorPtr<T>& a, T c) {
    auto out = detail::make_node<T>(a->shape, {a}, "scalar_mul", [a, c](Tensor<T>& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i] * c;
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * c;
    return out;
}

template <typename T>
TensorPtr<T> scalar_add(const TensorPtr<T>& a, T c) {
    auto out = detail::make_node<T>(a->shape, {a}, "scalar_add", [a](Tensor<T>& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i];
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + c;
    return out;
}

/// Clamp to [lo, hi]; gradient passes through wherever the input is inside the
/// interval (inclusive) and is zero where the value was clipped.
template <typename T>
TensorPtr<T> clamp(const TensorPtr<T>& a, T lo, T hi) {
    if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
    auto out = detail::make_node<T>(a->shape, {a}, "clamp", [a, lo, hi](Tensor<T>& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const T x = a->data[i];
            if (x >= lo && x <= hi) a->grad[i] += self.grad[i];
        }
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = std::min(hi, std::max(lo, a->data[i]));
    return out;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> relu(const TensorPtr<T>& a) {
    auto out = detail::make_node<T>(a->shape, {a}, "relu", [a](Tensor<T>& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (a->data[i] > T(0)) a->grad[i] += self.grad[i];
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = std::max(a->data[i], T(0));
    return out;
}

namespace detail {

/// Numerically stable logistic; the result is pinned to (0, 1) even where
/// exp underflows.
template <typename T>
inline T stable_sigmoid(T x) {
    if (std::isnan(x)) return x;  // keep divergence visible downstream
    T s;
    if (x >= T(0)) {
        const T e = std::exp(-x);
        s = T(1) / (T(1) + e);
    } else {
        const T e = std::exp(x);
        s = e / (T(1) + e);
    }
    const T lo = std::numeric_limits<T>::min();
    const T hi = T(1) - std::numeric_limits<T>::epsilon();
    return std::min(hi, std::max(lo, s));
}

}  // namespace detail

template <typename T>
TensorPtr<T> sigmoid(const TensorPtr<T>& a) {
    auto out = detail::make_node<T>(a->shape, {a}, "sigmoid", [a](Tensor<T>& self) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const T s = self.data[i];
            a->grad[i] += self.grad[i] * s * (T(1) - s);
        }
    });
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = detail::stable_sigmoid(a->data[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Matrix product
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> matmul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->rank() != 2 || b->rank() != 2)
        throw std::invalid_argument("matmul: rank-2 tensors required");
    const int m = a->shape[0], k = a->shape[1];
    const int k2 = b->shape[0], n = b->shape[1];
    if (k != k2)
        throw std::invalid_argument("matmul: inner dimensions disagree " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    auto out = detail::make_node<T>({m, n}, {a, b}, "matmul", [a, b, m, k, n](Tensor<T>& self) {
        // dA = G · Bᵀ, dB = Aᵀ · G
        if (a->requires_grad) {
            a->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const T g = self.grad[std::size_t(i) * n + j];
                    for (int p = 0; p < k; ++p) a->grad[std::size_t(i) * k + p] += g * b->data[std::size_t(p) * n + j];
                }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    const T av = a->data[std::size_t(i) * k + p];
                    for (int j = 0; j < n; ++j) b->grad[std::size_t(p) * n + j] += av * self.grad[std::size_t(i) * n + j];
                }
        }
    });
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const T av = a->data[std::size_t(i) * k + p];
            for (int j = 0; j < n; ++j) out->data[std::size_t(i) * n + j] += av * b->data[std::size_t(p) * n + j];
        }
    return out;
}

// ---------------------------------------------------------------------------
// Channel concat / slice / broadcast (rank-3 CxHxW)
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> concat(const std::vector<TensorPtr<T>>& ts) {
    if (ts.empty()) throw std::invalid_argument("concat: empty input list");
    for (const auto& t : ts)
        if (t->rank() != 3) throw std::invalid_argument("concat: rank-3 tensors required");
    const int h = ts[0]->shape[1], w = ts[0]->shape[2];
    int channels = 0;
    for (const auto& t : ts) {
        if (t->shape[1] != h || t->shape[2] != w)
            throw std::invalid_argument("concat: spatial dims disagree " + shape_str(ts[0]->shape) + " vs " +
                                        shape_str(t->shape));
        channels += t->shape[0];
    }
    const std::size_t plane = std::size_t(h) * w;
    auto out = detail::make_node<T>({channels, h, w}, ts, "concat", [ts, plane](Tensor<T>& self) {
        std::size_t offset = 0;
        for (const auto& t : ts) {
            const std::size_t n = std::size_t(t->shape[0]) * plane;
            if (t->requires_grad) {
                t->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) t->grad[i] += self.grad[offset + i];
            }
            offset += n;
        }
    });
    std::size_t offset = 0;
    for (const auto& t : ts) {
        std::copy(t->data.begin(), t->data.end(), out->data.begin() + offset);
        offset += t->data.size();
    }
    return out;
}

template <typename T>
TensorPtr<T> concat(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    return concat<T>(std::vector<TensorPtr<T>>{a, b});
}

/// Channels [begin, end) of a rank-3 tensor.
template <typename T>
TensorPtr<T> slice_channels(const TensorPtr<T>& t, int begin, int end) {
    if (t->rank() != 3) throw std::invalid_argument("slice_channels: rank-3 tensor required");
    if (begin < 0 || end <= begin || end > t->shape[0])
        throw std::invalid_argument("slice_channels: range out of bounds");
    const int count = end - begin;
    const std::size_t plane = std::size_t(t->shape[1]) * t->shape[2];
    const std::size_t from = std::size_t(begin) * plane;
    auto out = detail::make_node<T>({count, t->shape[1], t->shape[2]}, {t}, "slice_channels",
                                    [t, from](Tensor<T>& self) {
                                        t->ensure_grad();
                                        for (std::size_t i = 0; i < self.grad.size(); ++i)
                                            t->grad[from + i] += self.grad[i];
                                    });
    std::copy(t->data.begin() + from, t->data.begin() + from + out->data.size(), out->data.begin());
    return out;
}

/// out[c,y,x] = x[c,y,x] * a[0,y,x] — a single-channel map scaled across all
/// channels of x.
template <typename T>
TensorPtr<T> channel_broadcast_mul(const TensorPtr<T>& x, const TensorPtr<T>& a) {
    if (x->rank() != 3 || a->rank() != 3 || a->shape[0] != 1)
        throw std::invalid_argument("channel_broadcast_mul: x rank-3 and a [1xHxW] required");
    if (x->shape[1] != a->shape[1] || x->shape[2] != a->shape[2])
        throw std::invalid_argument("channel_broadcast_mul: spatial dims disagree");
    const int c = x->shape[0];
    const std::size_t plane = std::size_t(x->shape[1]) * x->shape[2];
    auto out = detail::make_node<T>(x->shape, {x, a}, "channel_broadcast_mul", [x, a, c, plane](Tensor<T>& self) {
        if (x->requires_grad) {
            x->ensure_grad();
            for (int ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < plane; ++i)
                    x->grad[ch * plane + i] += self.grad[ch * plane + i] * a->data[i];
        }
        if (a->requires_grad) {
            a->ensure_grad();
            for (int ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < plane; ++i)
                    a->grad[i] += self.grad[ch * plane + i] * x->data[ch * plane + i];
        }
    });
    for (int ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i) out->data[ch * plane + i] = x->data[ch * plane + i] * a->data[i];
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> sum(const TensorPtr<T>& a) {
    auto out = detail::make_node<T>({}, {a}, "sum", [a](Tensor<T>& self) {
        a->ensure_grad();
        const T g = self.grad[0];
        for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
    });
    T acc(0);
    for (const T v : a->data) acc += v;
    out->data[0] = acc;
    return out;
}

template <typename T>
TensorPtr<T> mean(const TensorPtr<T>& a) {
    const T inv = T(1) / static_cast<T>(a->numel());
    return scalar_mul(sum(a), inv);
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
std::vector<Tensor<T>*> reverse_topo_order(Tensor<T>* root) {
    // Iterative post-order DFS: children (parents in graph terms) first.
    std::vector<Tensor<T>*> order;
    std::unordered_set<Tensor<T>*> visited;
    std::vector<std::pair<Tensor<T>*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor<T>* p = node->parents[next++].get();
            if (p && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    std::reverse(order.begin(), order.end());  // root first
    return order;
}

}  // namespace detail

/// Reverse-mode sweep from a scalar loss: fills the grad buffer of every
/// tensor in the graph that requires gradients, visiting each node once.
/// A graph is single-use — calling backward twice on the same loss without
/// resetting grads is an error.
template <typename T>
void backward(const TensorPtr<T>& loss) {
    if (!loss->is_scalar()) throw std::invalid_argument("backward: loss must be a rank-0 scalar");
    if (!loss->requires_grad)
        throw std::invalid_argument("backward: loss does not require gradients (no graph recorded)");
    if (loss->backward_consumed)
        throw std::logic_error("backward: already called on this graph; reset grads and rebuild first");
    loss->backward_consumed = true;
    loss->ensure_grad();
    loss->grad[0] = T(1);
    for (Tensor<T>* node : detail::reverse_topo_order(loss.get())) {
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
}

template <typename T>
void zero_grad(const std::vector<TensorPtr<T>>& params) {
    for (const auto& p : params) p->zero_grad();
}

}  // namespace scd
