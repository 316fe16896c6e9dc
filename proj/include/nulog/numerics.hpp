#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "nulog/error.hpp"

namespace nulog {

/// Row-major dense matrix; rank-2 is all the encoder needs.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrixf = Matrix<float>;
using Matrixd = Matrix<double>;

inline constexpr double kLayerNormEps = 1e-5;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(what) + ": shapes " + shape_string(a.rows(), a.cols()) + " and " +
                         shape_string(b.rows(), b.cols()) + " differ");
    }
}

template <typename Scalar>
Matrix<Scalar> matmul(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: cannot multiply " + shape_string(a.rows(), a.cols()) + " by " +
                         shape_string(b.rows(), b.cols()));
    }
    if (a.cols() == 0) {
        return Matrix<Scalar>::Zero(a.rows(), b.cols());
    }
    Matrix<Scalar> out(a.rows(), b.cols());
    out.noalias() = a * b;
    return out;
}

/// Row-wise softmax with the row maximum subtracted first.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& a) {
    using Scalar = typename Derived::Scalar;
    Matrix<Scalar> out(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        if (a.cols() == 0) {
            continue;
        }
        const Scalar peak = a.row(r).maxCoeff();
        out.row(r) = (a.row(r).array() - peak).exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

/// log(sum(exp(row))) computed stably.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& row) {
    using Scalar = typename Derived::Scalar;
    const Scalar peak = row.maxCoeff();
    return peak + std::log((row.array() - peak).exp().sum());
}

template <typename Scalar>
struct LayerNormCache {
    Matrix<Scalar> normalized;        // (x - mean) / sqrt(var + eps)
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
};

/// Standardises each row (population variance, eps inside the root), then
/// applies gain and bias. Optionally keeps what the backward pass needs.
template <typename Scalar>
Matrix<Scalar> layer_norm_rows(const Matrix<Scalar>& a, const RowVector<Scalar>& gain, const RowVector<Scalar>& bias,
                               Scalar eps = static_cast<Scalar>(kLayerNormEps), LayerNormCache<Scalar>* cache = nullptr) {
    if (gain.cols() != a.cols() || bias.cols() != a.cols()) {
        throw ShapeError("layer_norm_rows: gain/bias length " + std::to_string(gain.cols()) + "/" +
                         std::to_string(bias.cols()) + " does not match " + std::to_string(a.cols()) + " columns");
    }
    const auto n = static_cast<Scalar>(a.cols());
    Matrix<Scalar> normalized(a.rows(), a.cols());
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(a.rows());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const Scalar mean = a.row(r).sum() / n;
        const auto centered = (a.row(r).array() - mean).eval();
        const Scalar var = centered.square().sum() / n;
        inv_std(r) = Scalar(1) / std::sqrt(var + eps);
        normalized.row(r) = (centered * inv_std(r)).matrix();
    }
    Matrix<Scalar> out = (normalized.array().rowwise() * gain.array()).rowwise() + bias.array();
    if (cache) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

template <typename Derived>
Matrix<typename Derived::Scalar> relu(const Eigen::MatrixBase<Derived>& a) {
    return a.cwiseMax(typename Derived::Scalar(0));
}

/// -log softmax(logits)[target], evaluated in log space.
template <typename Derived>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& logits, Eigen::Index target) {
    if (logits.rows() != 1) {
        throw ShapeError("cross_entropy expects a single row of logits, got " + shape_string(logits.rows(), logits.cols()));
    }
    if (target < 0 || target >= logits.cols()) {
        throw IndexError("cross_entropy target " + std::to_string(target) + " outside 0.." +
                         std::to_string(logits.cols() - 1));
    }
    return log_sum_exp(logits) - logits(0, target);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
    return a.allFinite();
}

}  // namespace nulog
