#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "nulog/model.hpp"

namespace nulog::testing {

/// Parsing accuracy by direct set comparison, quadratic in the message count.
inline double brute_force_pa(const std::map<std::int64_t, std::string>& predicted,
                             const std::map<std::int64_t, std::string>& truth) {
    if (truth.empty()) return 1.0;
    std::size_t correct = 0;
    for (const auto& [i, _] : truth) {
        std::set<std::int64_t> same_truth, same_pred;
        for (const auto& [j, g] : truth) {
            if (g == truth.at(i)) same_truth.insert(j);
        }
        for (const auto& [j, g] : predicted) {
            if (g == predicted.at(i)) same_pred.insert(j);
        }
        correct += same_truth == same_pred;
    }
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

/// Edit distance by memoized recursion over byte strings (ASCII inputs).
inline std::size_t recursive_edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
    std::function<long(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> long {
        if (i == a.size()) return static_cast<long>(b.size() - j);
        if (j == b.size()) return static_cast<long>(a.size() - i);
        auto& m = memo[i][j];
        if (m >= 0) return m;
        if (a[i] == b[j]) return m = go(i + 1, j + 1);
        return m = 1 + std::min({go(i + 1, j), go(i, j + 1), go(i + 1, j + 1)});
    };
    return static_cast<std::size_t>(go(0, 0));
}

inline std::string random_string(std::mt19937_64& rng, std::size_t max_len, const std::string& alphabet = "abcd") {
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string s(len(rng), ' ');
    for (auto& c : s) c = alphabet[pick(rng)];
    return s;
}

/// Masked-token loss and its tape gradient (written into state.params).
inline double loss_with_gradient(ModelState<double>& state, const MaskedSample& sample) {
    state.params.zero_grad();
    Tape<double> tape;
    auto logits = mlm_logits(tape, state, std::span<const TokenId>(sample.input_ids));
    auto loss = ad::cross_entropy(logits, sample.target_id);
    tape.backward(loss);
    return loss.value()(0, 0);
}

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t coordinates = 0;
    std::size_t kinks = 0;  // coordinates whose stencil crosses a ReLU gate
    std::string worst;
};

/// Signs of every feed-forward pre-activation, recomputed from the encoder's
/// building blocks.
inline std::vector<bool> relu_gates(const ModelState<double>& state, const std::vector<TokenId>& ids) {
    Tape<double> t(false);
    auto x = embed(t, state, std::span<const TokenId>(ids));
    std::vector<bool> gates;
    auto p = [&](int b, const char* leaf) { return bind(t, state.params.at(param_names::block(b, leaf))); };
    for (int b = 0; b < state.config.blocks; ++b) {
        x = ad::layer_norm_rows(ad::add(x, attention(t, state, x, b)), p(b, "attn_norm.gain"), p(b, "attn_norm.bias"));
        auto pre = ad::add_row(ad::matmul(x, p(b, "ffn.w1")), p(b, "ffn.b1"));
        for (Eigen::Index i = 0; i < pre.value().size(); ++i) gates.push_back(pre.value().data()[i] > 0);
        auto projected = ad::add_row(ad::matmul(ad::relu(pre), p(b, "ffn.w2")), p(b, "ffn.b2"));
        x = ad::layer_norm_rows(ad::add(x, projected), p(b, "ffn_norm.gain"), p(b, "ffn_norm.bias"));
    }
    return gates;
}

/// Central differences with step h on every scalar of every parameter,
/// relative error |analytic - numeric| / max(|analytic|, |numeric|) (0 when
/// both vanish). A coordinate whose +-h stencil flips a ReLU gate is not
/// differentiable over the stencil; it is counted in `kinks` and left out of
/// the maximum.
inline GradientCheck finite_difference_check(ModelState<double>& state, const MaskedSample& sample, double h) {
    loss_with_gradient(state, sample);
    const auto& cstate = static_cast<const ModelState<double>&>(state);
    const auto gates = relu_gates(cstate, sample.input_ids);
    GradientCheck out;
    for (auto& p : state.params) {
        const Matrix<double> analytic = p.grad;
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            const double saved = p.value.data()[i];
            p.value.data()[i] = saved + h;
            const double up = masked_loss(sample, cstate);
            const bool up_kink = relu_gates(cstate, sample.input_ids) != gates;
            p.value.data()[i] = saved - h;
            const double down = masked_loss(sample, cstate);
            const bool down_kink = relu_gates(cstate, sample.input_ids) != gates;
            p.value.data()[i] = saved;
            ++out.coordinates;
            if (up_kink || down_kink) {
                ++out.kinks;
                continue;
            }
            const double numeric = (up - down) / (2 * h);
            const double a = analytic.data()[i];
            const double scale = std::max(std::abs(a), std::abs(numeric));
            const double rel = scale == 0.0 ? 0.0 : std::abs(a - numeric) / scale;
            if (rel > out.max_relative_error) {
                out.max_relative_error = rel;
                out.worst = p.name + "[" + std::to_string(i) + "] analytic " + std::to_string(a) + " numeric " +
                            std::to_string(numeric);
            }
        }
    }
    return out;
}

/// The tiny configuration used for gradient checks: d=8, two blocks,
/// 20 vocabulary entries, frame length 6.
inline ModelConfig tiny_config() {
    ModelConfig c;
    c.d = 8;
    c.heads = 2;
    c.ffn_hidden = 16;
    c.blocks = 2;
    c.vocab_size = 20;
    c.frame_length = 6;
    return c;
}

/// A framed sample over the tiny vocabulary: CLS, four tokens, PAD.
inline MaskedSample tiny_sample(std::mt19937_64& rng) {
    std::uniform_int_distribution<TokenId> id(4, 19);
    std::uniform_int_distribution<std::size_t> pos(1, 4);
    MaskedSample s;
    s.input_ids = {0, id(rng), id(rng), id(rng), id(rng), 2};
    s.position = pos(rng);
    s.target_id = s.input_ids[s.position];
    s.input_ids[s.position] = 1;
    return s;
}

}  // namespace nulog::testing
