#pragma once

// Minimal reverse-mode automatic differentiation over dense float64
// tensors. A Graph is a define-by-run tape, rebuilt per example; backward
// walks the tape in reverse append order exactly once.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace seq4::ad {

struct DimError : std::runtime_error {
    explicit DimError(const std::string& what) : std::runtime_error(what) {}
};
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

struct Tensor {
    Shape shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
        if (numel(shape) != v.size())
            throw DimError("tensor data length " + std::to_string(v.size()) +
                           " does not match shape " + shape_str(shape));
    }

    static std::size_t numel(const Shape& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }
    static Tensor zeros(Shape s) {
        std::size_t n = numel(s);
        return Tensor{std::move(s), std::vector<double>(n, 0.0)};
    }
    static Tensor scalar(double x) { return Tensor{{1}, {x}}; }
    static Tensor vec(std::vector<double> data) {
        Shape s{data.size()};
        return Tensor{std::move(s), std::move(data)};
    }

    std::size_t numel() const { return v.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }
    double& at(std::size_t i, std::size_t j) { return v[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols() + j]; }

    bool finite() const {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    }
};

// Named parameter with a gradient accumulator that persists across graphs.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor val)
        : name(std::move(n)), value(std::move(val)), grad(Tensor::zeros(value.shape)) {}

    void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

struct Node {
    Tensor val;
    Tensor grad;
    std::function<void()> back;  // empty for constants
    bool requires_grad = false;
};

using Value = std::shared_ptr<Node>;

class Graph {
public:
    Value constant(Tensor t) {
        auto n = std::make_shared<Node>();
        n->grad = Tensor::zeros(t.shape);
        n->val = std::move(t);
        n->requires_grad = false;
        nodes_.push_back(n);
        return n;
    }

    // Leaf referencing a persistent parameter; backward adds into p.grad.
    Value leaf(Param& p) {
        auto n = std::make_shared<Node>();
        n->val = p.value;
        n->grad = Tensor::zeros(p.value.shape);
        n->requires_grad = true;
        Param* pp = &p;
        Node* raw = n.get();
        n->back = [pp, raw] {
            for (std::size_t i = 0; i < raw->grad.v.size(); ++i) pp->grad.v[i] += raw->grad.v[i];
        };
        nodes_.push_back(n);
        return n;
    }

    Value matmul(Value a, Value b) {
        if (a->val.rank() != 2 || b->val.rank() != 2 || a->val.cols() != b->val.rows())
            throw DimError("matmul shape mismatch: " + shape_str(a->val.shape) + " x " +
                           shape_str(b->val.shape));
        std::size_t m = a->val.rows(), k = a->val.cols(), n = b->val.cols();
        Tensor out = Tensor::zeros({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                double av = a->val.at(i, p);
                for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * b->val.at(p, j);
            }
        return make(std::move(out), {a, b}, [a, b](Node& o) {
            std::size_t m = a->val.rows(), k = a->val.cols(), n = b->val.cols();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double g = o.grad.at(i, j);
                    for (std::size_t p = 0; p < k; ++p) {
                        a->grad.at(i, p) += g * b->val.at(p, j);
                        b->grad.at(p, j) += a->val.at(i, p) * g;
                    }
                }
        });
    }

    // [m,k] x [k] -> [m]
    Value matvec(Value mat, Value vec) {
        if (mat->val.rank() != 2 || vec->val.rank() != 1 || mat->val.cols() != vec->val.numel())
            throw DimError("matvec shape mismatch: " + shape_str(mat->val.shape) + " x " +
                           shape_str(vec->val.shape));
        std::size_t m = mat->val.rows(), k = mat->val.cols();
        Tensor out = Tensor::zeros({m});
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0;
            for (std::size_t p = 0; p < k; ++p) s += mat->val.at(i, p) * vec->val.v[p];
            out.v[i] = s;
        }
        return make(std::move(out), {mat, vec}, [mat, vec](Node& o) {
            std::size_t m = mat->val.rows(), k = mat->val.cols();
            for (std::size_t i = 0; i < m; ++i) {
                double g = o.grad.v[i];
                for (std::size_t p = 0; p < k; ++p) {
                    mat->grad.at(i, p) += g * vec->val.v[p];
                    vec->grad.v[p] += mat->val.at(i, p) * g;
                }
            }
        });
    }

    // [k] x [k,n] -> [n]
    Value vecmat(Value vec, Value mat) {
        if (vec->val.rank() != 1 || mat->val.rank() != 2 || vec->val.numel() != mat->val.rows())
            throw DimError("vecmat shape mismatch: " + shape_str(vec->val.shape) + " x " +
                           shape_str(mat->val.shape));
        std::size_t k = mat->val.rows(), n = mat->val.cols();
        Tensor out = Tensor::zeros({n});
        for (std::size_t p = 0; p < k; ++p) {
            double vv = vec->val.v[p];
            for (std::size_t j = 0; j < n; ++j) out.v[j] += vv * mat->val.at(p, j);
        }
        return make(std::move(out), {vec, mat}, [vec, mat](Node& o) {
            std::size_t k = mat->val.rows(), n = mat->val.cols();
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t j = 0; j < n; ++j) {
                    vec->grad.v[p] += o.grad.v[j] * mat->val.at(p, j);
                    mat->grad.at(p, j) += vec->val.v[p] * o.grad.v[j];
                }
        });
    }

    Value add(Value a, Value b) {
        require_same_shape("add", a, b);
        Tensor out = a->val;
        for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->val.v[i];
        return make(std::move(out), {a, b}, [a, b](Node& o) {
            for (std::size_t i = 0; i < o.grad.v.size(); ++i) {
                a->grad.v[i] += o.grad.v[i];
                b->grad.v[i] += o.grad.v[i];
            }
        });
    }

    Value mul(Value a, Value b) {
        require_same_shape("mul", a, b);
        Tensor out = a->val;
        for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b->val.v[i];
        return make(std::move(out), {a, b}, [a, b](Node& o) {
            for (std::size_t i = 0; i < o.grad.v.size(); ++i) {
                a->grad.v[i] += o.grad.v[i] * b->val.v[i];
                b->grad.v[i] += o.grad.v[i] * a->val.v[i];
            }
        });
    }

    Value scale(Value a, double s) {
        Tensor out = a->val;
        for (double& x : out.v) x *= s;
        return make(std::move(out), {a}, [a, s](Node& o) {
            for (std::size_t i = 0; i < o.grad.v.size(); ++i) a->grad.v[i] += s * o.grad.v[i];
        });
    }

    Value sigmoid(Value a) {
        Tensor out = a->val;
        for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
        auto o = make(std::move(out), {a}, nullptr);
        Node* raw = o.get();
        raw->back = [a, raw] {
            for (std::size_t i = 0; i < raw->grad.v.size(); ++i) {
                double y = raw->val.v[i];
                a->grad.v[i] += raw->grad.v[i] * y * (1.0 - y);
            }
        };
        return o;
    }

    Value tanh(Value a) {
        Tensor out = a->val;
        for (double& x : out.v) x = std::tanh(x);
        auto o = make(std::move(out), {a}, nullptr);
        Node* raw = o.get();
        raw->back = [a, raw] {
            for (std::size_t i = 0; i < raw->grad.v.size(); ++i) {
                double y = raw->val.v[i];
                a->grad.v[i] += raw->grad.v[i] * (1.0 - y * y);
            }
        };
        return o;
    }

    Value exp(Value a) {
        Tensor out = a->val;
        for (double& x : out.v) x = std::exp(x);
        auto o = make(std::move(out), {a}, nullptr);
        Node* raw = o.get();
        raw->back = [a, raw] {
            for (std::size_t i = 0; i < raw->grad.v.size(); ++i)
                a->grad.v[i] += raw->grad.v[i] * raw->val.v[i];
        };
        return o;
    }

    Value log(Value a) {
        for (double x : a->val.v)
            if (!(x > 0.0)) throw DomainError("log of non-positive value " + std::to_string(x));
        Tensor out = a->val;
        for (double& x : out.v) x = std::log(x);
        return make(std::move(out), {a}, [a](Node& o) {
            for (std::size_t i = 0; i < o.grad.v.size(); ++i)
                a->grad.v[i] += o.grad.v[i] / a->val.v[i];
        });
    }

    // Gradient passes through inside (lo, hi), zero where clamped.
    Value clamp(Value a, double lo, double hi) {
        Tensor out = a->val;
        for (double& x : out.v) x = std::min(hi, std::max(lo, x));
        return make(std::move(out), {a}, [a, lo, hi](Node& o) {
            for (std::size_t i = 0; i < o.grad.v.size(); ++i) {
                double x = a->val.v[i];
                if (x > lo && x < hi) a->grad.v[i] += o.grad.v[i];
            }
        });
    }

    Value concat(Value a, Value b) {
        if (a->val.rank() != 1 || b->val.rank() != 1)
            throw DimError("concat requires rank-1 tensors, got " + shape_str(a->val.shape) +
                           " and " + shape_str(b->val.shape));
        std::size_t na = a->val.numel(), nb = b->val.numel();
        Tensor out = Tensor::zeros({na + nb});
        std::copy(a->val.v.begin(), a->val.v.end(), out.v.begin());
        std::copy(b->val.v.begin(), b->val.v.end(), out.v.begin() + static_cast<long>(na));
        return make(std::move(out), {a, b}, [a, b, na, nb](Node& o) {
            for (std::size_t i = 0; i < na; ++i) a->grad.v[i] += o.grad.v[i];
            for (std::size_t i = 0; i < nb; ++i) b->grad.v[i] += o.grad.v[na + i];
        });
    }

    Value slice(Value a, std::size_t start, std::size_t len) {
        if (a->val.rank() != 1 || start + len > a->val.numel())
            throw DimError("slice [" + std::to_string(start) + "," + std::to_string(start + len) +
                           ") out of range for " + shape_str(a->val.shape));
        Tensor out = Tensor::zeros({len});
        std::copy(a->val.v.begin() + static_cast<long>(start),
                  a->val.v.begin() + static_cast<long>(start + len), out.v.begin());
        return make(std::move(out), {a}, [a, start, len](Node& o) {
            for (std::size_t i = 0; i < len; ++i) a->grad.v[start + i] += o.grad.v[i];
        });
    }

    // Row r of a [V,E] matrix as a vector.
    Value row(Value mat, std::size_t r) {
        if (mat->val.rank() != 2 || r >= mat->val.rows())
            throw DimError("row " + std::to_string(r) + " out of range for " +
                           shape_str(mat->val.shape));
        std::size_t e = mat->val.cols();
        Tensor out = Tensor::zeros({e});
        for (std::size_t j = 0; j < e; ++j) out.v[j] = mat->val.at(r, j);
        return make(std::move(out), {mat}, [mat, r](Node& o) {
            std::size_t e = mat->val.cols();
            for (std::size_t j = 0; j < e; ++j) mat->grad.at(r, j) += o.grad.v[j];
        });
    }

    // Single element as a scalar node.
    Value pick(Value a, std::size_t i) {
        if (a->val.rank() != 1 || i >= a->val.numel())
            throw DimError("pick index " + std::to_string(i) + " out of range for " +
                           shape_str(a->val.shape));
        return make(Tensor::scalar(a->val.v[i]), {a},
                    [a, i](Node& o) { a->grad.v[i] += o.grad.v[0]; });
    }

    Value sum(Value a) {
        double s = std::accumulate(a->val.v.begin(), a->val.v.end(), 0.0);
        return make(Tensor::scalar(s), {a}, [a](Node& o) {
            for (double& g : a->grad.v) g += o.grad.v[0];
        });
    }

    // vector times scalar node
    Value scale_by(Value vec, Value s) {
        if (s->val.numel() != 1) throw DimError("scale_by expects scalar, got " + shape_str(s->val.shape));
        Tensor out = vec->val;
        for (double& x : out.v) x *= s->val.v[0];
        return make(std::move(out), {vec, s}, [vec, s](Node& o) {
            for (std::size_t i = 0; i < o.grad.v.size(); ++i) {
                vec->grad.v[i] += o.grad.v[i] * s->val.v[0];
                s->grad.v[0] += o.grad.v[i] * vec->val.v[i];
            }
        });
    }

    // Max-subtraction stabilised; valid for logit magnitudes up to ~1e4.
    Value softmax(Value a) {
        if (a->val.rank() != 1 || a->val.numel() == 0)
            throw DimError("softmax requires non-empty vector, got " + shape_str(a->val.shape));
        Tensor out = a->val;
        double mx = *std::max_element(out.v.begin(), out.v.end());
        double z = 0;
        for (double& x : out.v) { x = std::exp(x - mx); z += x; }
        for (double& x : out.v) x /= z;
        auto o = make(std::move(out), {a}, nullptr);
        Node* raw = o.get();
        raw->back = [a, raw] {
            double dot = 0;
            for (std::size_t i = 0; i < raw->grad.v.size(); ++i)
                dot += raw->grad.v[i] * raw->val.v[i];
            for (std::size_t i = 0; i < raw->grad.v.size(); ++i)
                a->grad.v[i] += raw->val.v[i] * (raw->grad.v[i] - dot);
        };
        return o;
    }

    Value log_softmax(Value a) {
        if (a->val.rank() != 1 || a->val.numel() == 0)
            throw DimError("log_softmax requires non-empty vector, got " + shape_str(a->val.shape));
        Tensor out = a->val;
        double mx = *std::max_element(out.v.begin(), out.v.end());
        double z = 0;
        for (double x : out.v) z += std::exp(x - mx);
        double lz = mx + std::log(z);
        for (double& x : out.v) x -= lz;
        auto o = make(std::move(out), {a}, nullptr);
        Node* raw = o.get();
        raw->back = [a, raw] {
            double gsum = std::accumulate(raw->grad.v.begin(), raw->grad.v.end(), 0.0);
            for (std::size_t i = 0; i < raw->grad.v.size(); ++i)
                a->grad.v[i] += raw->grad.v[i] - std::exp(raw->val.v[i]) * gsum;
        };
        return o;
    }

    // Reverse append order; each node visited exactly once.
    void backward(Value root) {
        if (root->val.numel() != 1)
            throw ContractError("backward root must be scalar, got " + shape_str(root->val.shape));
        root->grad.v[0] = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node& n = **it;
            if (n.back && n.requires_grad) n.back();
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    static void require_same_shape(const char* op, const Value& a, const Value& b) {
        if (a->val.shape != b->val.shape)
            throw DimError(std::string(op) + " shape mismatch: " + shape_str(a->val.shape) +
                           " vs " + shape_str(b->val.shape));
    }

    Value make(Tensor out, std::initializer_list<Value> inputs,
               std::function<void(Node&)> back) {
        auto n = std::make_shared<Node>();
        n->grad = Tensor::zeros(out.shape);
        n->val = std::move(out);
        for (const Value& in : inputs)
            if (in->requires_grad) { n->requires_grad = true; break; }
        if (back && n->requires_grad) {
            Node* raw = n.get();
            auto fn = std::move(back);
            n->back = [raw, fn] { fn(*raw); };
        }
        nodes_.push_back(n);
        return n;
    }

    std::vector<Value> nodes_;
};

}  // namespace seq4::ad
