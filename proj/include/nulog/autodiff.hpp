#pragma once

#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nulog/numerics.hpp"

namespace nulog {

template <typename Scalar>
struct Parameter {
    std::string name;
    Matrix<Scalar> value;
    Matrix<Scalar> grad;  // same shape as value, zero until backward() touches it
    bool has_grad = false;
};

/// Named learnable tensors in insertion order. References returned by add()
/// and at() stay valid while the set is alive.
template <typename Scalar>
class ParameterSet {
public:
    Parameter<Scalar>& add(std::string name, Matrix<Scalar> value) {
        if (index_.count(name)) {
            throw ValidationError("duplicate parameter '" + name + "'");
        }
        index_.emplace(name, params_.size());
        Parameter<Scalar> p;
        p.name = std::move(name);
        p.grad = Matrix<Scalar>::Zero(value.rows(), value.cols());
        p.value = std::move(value);
        params_.push_back(std::move(p));
        return params_.back();
    }

    bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }

    Parameter<Scalar>& at(std::string_view name) { return params_[position(name)]; }
    const Parameter<Scalar>& at(std::string_view name) const { return params_[position(name)]; }

    std::size_t size() const noexcept { return params_.size(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad() {
        for (auto& p : params_) {
            p.grad.setZero();
            p.has_grad = false;
        }
    }

    bool gradients_ready() const {
        for (const auto& p : params_) {
            if (p.has_grad) {
                return true;
            }
        }
        return false;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) {
            n += static_cast<std::size_t>(p.value.size());
        }
        return n;
    }

    template <typename To>
    ParameterSet<To> cast() const {
        ParameterSet<To> out;
        for (const auto& p : params_) {
            out.add(p.name, p.value.template cast<To>());
        }
        return out;
    }

private:
    std::size_t position(std::string_view name) const {
        const auto it = index_.find(name);
        if (it == index_.end()) {
            throw IndexError("unknown parameter '" + std::string(name) + "'");
        }
        return it->second;
    }

    std::deque<Parameter<Scalar>> params_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename Scalar>
class Var {
public:
    Var() = default;
    const Matrix<Scalar>& value() const { return tape_->value(*this); }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    Tape<Scalar>* tape() const noexcept { return tape_; }
    std::size_t index() const noexcept { return index_; }

private:
    friend class Tape<Scalar>;
    Var(Tape<Scalar>* tape, std::size_t index) : tape_(tape), index_(index) {}
    Tape<Scalar>* tape_ = nullptr;
    std::size_t index_ = 0;
};

/// Records a composition of matrix kernels and replays it backwards.
/// Gradients of parameter leaves accumulate straight into Parameter::grad.
/// A tape built with record=false only evaluates (inference mode).
template <typename Scalar>
class Tape {
public:
    using Mat = Matrix<Scalar>;
    using Backprop = std::function<void(const Mat& out_grad)>;

    explicit Tape(bool record = true) : record_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const noexcept { return record_; }

    Var<Scalar> constant(Mat value) {
        Node n;
        n.owned = std::move(value);
        return push(std::move(n));
    }

    /// Detached leaf that references `value`, which must outlive the tape.
    Var<Scalar> constant_ref(const Mat& value) {
        Node n;
        n.ref = &value;
        return push(std::move(n));
    }

    /// Leaf bound to a parameter; the value is referenced, not copied.
    Var<Scalar> parameter(Parameter<Scalar>& p) {
        Node n;
        n.ref = &p.value;
        n.param = &p;
        n.requires_grad = record_;
        return push(std::move(n));
    }

    const Mat& value(Var<Scalar> v) const { return nodes_.at(v.index_).value(); }
    bool requires_grad(Var<Scalar> v) const { return nodes_.at(v.index_).requires_grad; }

    /// Gradient of a non-parameter node after backward(); empty when the node
    /// was not reached.
    const Mat& grad(Var<Scalar> v) const {
        const auto& n = nodes_.at(v.index_);
        return n.param ? n.param->grad : n.grad;
    }

    /// Records an op. `backprop` receives d(loss)/d(output) and should call
    /// accumulate() for the inputs that require gradients.
    Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> inputs, Backprop backprop) {
        Node n;
        n.owned = std::move(value);
        if (record_) {
            for (auto in : inputs) {
                check_owner(in);
                n.requires_grad = n.requires_grad || nodes_[in.index_].requires_grad;
            }
            if (n.requires_grad) {
                n.backprop = std::move(backprop);
            }
        }
        return push(std::move(n));
    }

    Var<Scalar> record(Mat value, std::span<const Var<Scalar>> inputs, Backprop backprop) {
        Node n;
        n.owned = std::move(value);
        if (record_) {
            for (auto in : inputs) {
                check_owner(in);
                n.requires_grad = n.requires_grad || nodes_[in.index_].requires_grad;
            }
            if (n.requires_grad) {
                n.backprop = std::move(backprop);
            }
        }
        return push(std::move(n));
    }

    /// Adds `g` to the gradient of `v` (no-op for detached values).
    template <typename Derived>
    void accumulate(Var<Scalar> v, const Eigen::MatrixBase<Derived>& g) {
        auto& n = nodes_[v.index_];
        if (!n.requires_grad) {
            return;
        }
        auto& target = grad_slot(n);
        target.noalias() += g;
        if (n.param) {
            n.param->has_grad = true;
        }
    }

    /// Adds `g` to a single row of the gradient of `v`.
    template <typename Derived>
    void accumulate_row(Var<Scalar> v, Eigen::Index row, const Eigen::MatrixBase<Derived>& g) {
        auto& n = nodes_[v.index_];
        if (!n.requires_grad) {
            return;
        }
        grad_slot(n).row(row) += g;
        if (n.param) {
            n.param->has_grad = true;
        }
    }

    /// Reverse pass from a 1x1 value that depends on at least one parameter.
    void backward(Var<Scalar> loss) {
        check_owner(loss);
        auto& root = nodes_[loss.index_];
        if (!record_) {
            throw UsageError("backward() on a tape created in inference mode");
        }
        if (!root.requires_grad) {
            throw UsageError("backward() on a detached value: it does not depend on any parameter");
        }
        if (root.value().rows() != 1 || root.value().cols() != 1) {
            throw UsageError("backward() needs a scalar loss, got " +
                             shape_string(root.value().rows(), root.value().cols()));
        }
        accumulate(loss, Mat::Ones(1, 1));
        for (std::size_t i = loss.index_ + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (n.backprop && n.grad.size() != 0) {
                n.backprop(n.grad);
            }
        }
    }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Mat owned;
        const Mat* ref = nullptr;
        Parameter<Scalar>* param = nullptr;
        bool requires_grad = false;
        Mat grad;
        Backprop backprop;

        const Mat& value() const { return ref ? *ref : owned; }
    };

    Var<Scalar> push(Node n) {
        nodes_.push_back(std::move(n));
        return Var<Scalar>(this, nodes_.size() - 1);
    }

    void check_owner(Var<Scalar> v) const {
        if (v.tape_ != this || v.index_ >= nodes_.size()) {
            throw UsageError("value does not belong to this tape");
        }
    }

    Mat& grad_slot(Node& n) {
        if (n.param) {
            return n.param->grad;
        }
        if (n.grad.size() == 0) {
            n.grad = Mat::Zero(n.value().rows(), n.value().cols());
        }
        return n.grad;
    }

    bool record_;
    std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable ops. Each records its forward value and a closure producing
// input gradients from the output gradient.

namespace ad {

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
    auto& t = *a.tape();
    auto out = nulog::matmul(a.value(), b.value());
    return t.record(std::move(out), {a, b}, [&t, a, b](const Matrix<Scalar>& g) {
        if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
        if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
    });
}

/// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(Var<Scalar> a, Var<Scalar> b) {
    auto& t = *a.tape();
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: cannot multiply " + shape_string(a.rows(), a.cols()) + " by transpose of " +
                         shape_string(b.rows(), b.cols()));
    }
    Matrix<Scalar> out = a.value() * b.value().transpose();
    return t.record(std::move(out), {a, b}, [&t, a, b](const Matrix<Scalar>& g) {
        if (t.requires_grad(a)) t.accumulate(a, g * b.value());
        if (t.requires_grad(b)) t.accumulate(b, g.transpose() * a.value());
    });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
    auto& t = *a.tape();
    require_same_shape(a.value(), b.value(), "add");
    Matrix<Scalar> out = a.value() + b.value();
    return t.record(std::move(out), {a, b}, [&t, a, b](const Matrix<Scalar>& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

/// Adds a 1 x cols row to every row of `a`.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> row) {
    auto& t = *a.tape();
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeError("add_row: row " + shape_string(row.rows(), row.cols()) + " does not broadcast over " +
                         shape_string(a.rows(), a.cols()));
    }
    Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
    return t.record(std::move(out), {a, row}, [&t, a, row](const Matrix<Scalar>& g) {
        t.accumulate(a, g);
        if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
    });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
    auto& t = *a.tape();
    Matrix<Scalar> out = a.value() * s;
    return t.record(std::move(out), {a}, [&t, a, s](const Matrix<Scalar>& g) { t.accumulate(a, g * s); });
}

template <typename Scalar>
Var<Scalar> softmax_rows(Var<Scalar> a) {
    auto& t = *a.tape();
    auto out = nulog::softmax_rows(a.value());
    Matrix<Scalar> y = t.recording() ? out : Matrix<Scalar>();
    return t.record(std::move(out), {a}, [&t, a, y = std::move(y)](const Matrix<Scalar>& g) {
        // dx = y * (g - rowsum(g * y))
        const auto dot = (g.array() * y.array()).rowwise().sum().eval();
        t.accumulate(a, (y.array() * (g.array().colwise() - dot)).matrix());
    });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
    auto& t = *a.tape();
    auto out = nulog::relu(a.value());
    return t.record(std::move(out), {a}, [&t, a](const Matrix<Scalar>& g) {
        t.accumulate(a, (a.value().array() > Scalar(0)).select(g.array(), Scalar(0)).matrix());
    });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
    auto& t = *a.tape();
    Matrix<Scalar> out(1, 1);
    out(0, 0) = a.value().sum();
    return t.record(std::move(out), {a}, [&t, a](const Matrix<Scalar>& g) {
        t.accumulate(a, Matrix<Scalar>::Constant(a.rows(), a.cols(), g(0, 0)));
    });
}

/// Copy of row `r` as a 1 x cols matrix.
template <typename Scalar>
Var<Scalar> row(Var<Scalar> a, Eigen::Index r) {
    auto& t = *a.tape();
    if (r < 0 || r >= a.rows()) {
        throw IndexError("row " + std::to_string(r) + " outside 0.." + std::to_string(a.rows() - 1));
    }
    Matrix<Scalar> out = a.value().row(r);
    return t.record(std::move(out), {a}, [&t, a, r](const Matrix<Scalar>& g) { t.accumulate_row(a, r, g.row(0)); });
}

/// Rows of `table` picked by `ids` (embedding lookup).
template <typename Scalar, typename Id>
Var<Scalar> gather_rows(Var<Scalar> table, std::span<const Id> ids) {
    auto& t = *table.tape();
    const auto& v = table.value();
    Matrix<Scalar> out(static_cast<Eigen::Index>(ids.size()), v.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto id = static_cast<Eigen::Index>(ids[i]);
        if (id < 0 || id >= v.rows()) {
            throw IndexError("id " + std::to_string(id) + " outside table of " + std::to_string(v.rows()) + " rows");
        }
        out.row(static_cast<Eigen::Index>(i)) = v.row(id);
    }
    std::vector<Eigen::Index> rows(ids.begin(), ids.end());
    return t.record(std::move(out), {table}, [&t, table, rows = std::move(rows)](const Matrix<Scalar>& g) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            t.accumulate_row(table, rows[i], g.row(static_cast<Eigen::Index>(i)));
        }
    });
}

/// Horizontal concatenation.
template <typename Scalar>
Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_cols of nothing");
    }
    auto& t = *parts.front().tape();
    const auto rows = parts.front().rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) {
            throw ShapeError("concat_cols: row counts differ");
        }
        cols += p.cols();
    }
    Matrix<Scalar> out(rows, cols);
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
        out.middleCols(offset, p.cols()) = p.value();
        offset += p.cols();
    }
    std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
    return t.record(std::move(out), parts, [&t, inputs](const Matrix<Scalar>& g) {
        Eigen::Index off = 0;
        for (const auto& p : inputs) {
            t.accumulate(p, g.middleCols(off, p.cols()));
            off += p.cols();
        }
    });
}

template <typename Scalar>
Var<Scalar> layer_norm_rows(Var<Scalar> x, Var<Scalar> gain, Var<Scalar> bias,
                            Scalar eps = static_cast<Scalar>(kLayerNormEps)) {
    auto& t = *x.tape();
    LayerNormCache<Scalar> cache;
    auto out = nulog::layer_norm_rows<Scalar>(x.value(), gain.value().row(0), bias.value().row(0), eps,
                                              t.recording() ? &cache : nullptr);
    return t.record(std::move(out), {x, gain, bias}, [&t, x, gain, bias, cache = std::move(cache)](const Matrix<Scalar>& g) {
        const auto& xhat = cache.normalized;
        if (t.requires_grad(gain)) t.accumulate(gain, (g.array() * xhat.array()).colwise().sum().matrix());
        if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
        if (t.requires_grad(x)) {
            const auto n = static_cast<Scalar>(xhat.cols());
            Matrix<Scalar> dxhat = g.array().rowwise() * gain.value().row(0).array();
            Matrix<Scalar> dx(xhat.rows(), xhat.cols());
            for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                const Scalar mean_d = dxhat.row(r).sum() / n;
                const Scalar mean_dx = dxhat.row(r).dot(xhat.row(r)) / n;
                dx.row(r) = cache.inv_std(r) *
                            (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx).matrix();
            }
            t.accumulate(x, dx);
        }
    });
}

/// Cross entropy of a 1 x n row of logits against `target`; 1 x 1 result.
template <typename Scalar>
Var<Scalar> cross_entropy(Var<Scalar> logits, Eigen::Index target) {
    auto& t = *logits.tape();
    Matrix<Scalar> out(1, 1);
    out(0, 0) = nulog::cross_entropy(logits.value(), target);
    return t.record(std::move(out), {logits}, [&t, logits, target](const Matrix<Scalar>& g) {
        Matrix<Scalar> d = nulog::softmax_rows(logits.value());
        d(0, target) -= Scalar(1);
        t.accumulate(logits, d * g(0, 0));
    });
}

}  // namespace ad
}  // namespace nulog
