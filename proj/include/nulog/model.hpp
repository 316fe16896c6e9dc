#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nulog/autodiff.hpp"
#include "nulog/mlm_sampler.hpp"
#include "nulog/tokenizer.hpp"

namespace nulog {

struct ModelConfig {
    int d = 256;            // embedding width
    int heads = 4;          // attention heads; d must be divisible by heads
    int ffn_hidden = 512;   // hidden width of the position-wise feed-forward
    int blocks = 1;         // encoder blocks
    int frame_length = 0;   // CLS + payload budget, i.e. M + 1
    int vocab_size = 0;     // |T| including the four specials
    int epochs = 5;
    int batch_size = 32;
    std::uint32_t seed = static_cast<std::uint32_t>(kDefaultSeed);
    int epsilon = 50;       // top-rank cutoff carried along for parsing
    double learning_rate = 1e-3;

    int head_width() const { return d / heads; }

    /// Throws ValidationError unless every dimension is positive and d is a
    /// multiple of heads.
    void validate() const;
};

/// Sinusoidal position table, frame_length x d. Column c of row j holds
/// sin(j / 10000^(c/d)) for even c and cos(j / 10000^(c/d)) for odd c.
template <typename Scalar>
Matrix<Scalar> positional_encoding(int frame_length, int d) {
    Matrix<Scalar> p(frame_length, d);
    for (int j = 0; j < frame_length; ++j) {
        for (int c = 0; c < d; ++c) {
            const double angle = j / std::pow(10000.0, static_cast<double>(c) / d);
            p(j, c) = static_cast<Scalar>(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    }
    return p;
}

namespace param_names {
inline std::string embedding() { return "embedding"; }
inline std::string query(int block, int head) { return "block" + std::to_string(block) + ".head" + std::to_string(head) + ".query"; }
inline std::string key(int block, int head) { return "block" + std::to_string(block) + ".head" + std::to_string(head) + ".key"; }
inline std::string value(int block, int head) { return "block" + std::to_string(block) + ".head" + std::to_string(head) + ".value"; }
inline std::string block(int block, const char* leaf) { return "block" + std::to_string(block) + "." + leaf; }
inline std::string head_weight() { return "head.weight"; }
inline std::string head_bias() { return "head.bias"; }
}  // namespace param_names

/// Every learnable tensor of the encoder plus the fixed position table.
template <typename Scalar>
struct ModelState {
    ModelConfig config;
    ParameterSet<Scalar> params;
    Matrix<Scalar> positional;

    /// Weights uniform(-0.1, 0.1) from `rng`; biases 0; norm gains 1.
    static ModelState initialize(const ModelConfig& config, Rng& rng);

    /// Shapes every tensor must have for `config`, in canonical order.
    static std::vector<std::pair<std::string, std::pair<int, int>>> expected_shapes(const ModelConfig& config);

    /// Throws ValidationError when a tensor is missing or mis-shaped.
    void validate() const;

    template <typename To>
    ModelState<To> cast() const {
        ModelState<To> out;
        out.config = config;
        out.params = params.template cast<To>();
        out.positional = positional.template cast<To>();
        return out;
    }
};

struct MessageEmbedding {
    std::int64_t message_index = 0;
    std::vector<float> vector;
};

// ---------------------------------------------------------------------------
// Forward pass, usable for training (mutable state, recording tape) and for
// inference (const state).

template <typename Scalar>
Var<Scalar> bind(Tape<Scalar>& tape, Parameter<Scalar>& p) {
    return tape.parameter(p);
}

template <typename Scalar>
Var<Scalar> bind(Tape<Scalar>& tape, const Parameter<Scalar>& p) {
    return tape.constant_ref(p.value);
}

/// X' = E[ids] + P
template <typename Scalar, typename State>
Var<Scalar> embed(Tape<Scalar>& tape, State& state, std::span<const TokenId> ids) {
    if (static_cast<int>(ids.size()) != state.positional.rows()) {
        throw ShapeError("embed: frame of " + std::to_string(ids.size()) + " ids, model expects " +
                         std::to_string(state.positional.rows()));
    }
    auto table = bind(tape, state.params.at(param_names::embedding()));
    auto tokens = ad::gather_rows<Scalar, TokenId>(table, ids);
    auto positions = tape.constant_ref(state.positional);
    return ad::add(tokens, positions);
}

/// Multi-head self-attention: per head softmax(Q K^T / sqrt(w)) V, heads
/// concatenated column-wise. `weights`, when given, receives the per-head
/// attention matrices.
template <typename Scalar, typename State>
Var<Scalar> attention(Tape<Scalar>& tape, State& state, Var<Scalar> x, int block,
                      std::vector<Matrix<Scalar>>* weights = nullptr) {
    const auto& cfg = state.config;
    if (x.cols() != cfg.d) {
        throw ShapeError("attention: input has " + std::to_string(x.cols()) + " columns, model width is " +
                         std::to_string(cfg.d));
    }
    const Scalar inv_sqrt_w = Scalar(1) / std::sqrt(static_cast<Scalar>(cfg.head_width()));
    std::vector<Var<Scalar>> heads;
    heads.reserve(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
        auto q = ad::matmul(x, bind(tape, state.params.at(param_names::query(block, h))));
        auto k = ad::matmul(x, bind(tape, state.params.at(param_names::key(block, h))));
        auto v = ad::matmul(x, bind(tape, state.params.at(param_names::value(block, h))));
        auto a = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv_sqrt_w));
        if (weights) {
            weights->push_back(a.value());
        }
        heads.push_back(ad::matmul(a, v));
    }
    return ad::concat_cols<Scalar>(heads);
}

/// `blocks` repetitions of X = norm(X + attention(X)); X = norm(X + ffn(X)).
template <typename Scalar, typename State>
Var<Scalar> encoder_forward(Tape<Scalar>& tape, State& state, Var<Scalar> x) {
    auto p = [&](int b, const char* leaf) { return bind(tape, state.params.at(param_names::block(b, leaf))); };
    for (int b = 0; b < state.config.blocks; ++b) {
        auto attended = attention(tape, state, x, b);
        x = ad::layer_norm_rows(ad::add(x, attended), p(b, "attn_norm.gain"), p(b, "attn_norm.bias"));
        auto hidden = ad::relu(ad::add_row(ad::matmul(x, p(b, "ffn.w1")), p(b, "ffn.b1")));
        auto projected = ad::add_row(ad::matmul(hidden, p(b, "ffn.w2")), p(b, "ffn.b2"));
        x = ad::layer_norm_rows(ad::add(x, projected), p(b, "ffn_norm.gain"), p(b, "ffn_norm.bias"));
    }
    return x;
}

/// CLS row of the encoder output for a framed input.
template <typename Scalar, typename State>
Var<Scalar> encode_cls(Tape<Scalar>& tape, State& state, std::span<const TokenId> ids) {
    return ad::row(encoder_forward(tape, state, embed(tape, state, ids)), 0);
}

/// Unnormalised scores over the vocabulary, 1 x |T|.
template <typename Scalar, typename State>
Var<Scalar> mlm_logits(Tape<Scalar>& tape, State& state, std::span<const TokenId> ids) {
    auto cls = encode_cls(tape, state, ids);
    auto w = bind(tape, state.params.at(param_names::head_weight()));
    auto b = bind(tape, state.params.at(param_names::head_bias()));
    return ad::add_row(ad::matmul(cls, w), b);
}

/// Probability of every vocabulary entry at the masked slot.
template <typename Scalar>
RowVector<Scalar> predict_masked(const MaskedSample& sample, const ModelState<Scalar>& state) {
    Tape<Scalar> tape(false);
    auto logits = mlm_logits(tape, state, std::span<const TokenId>(sample.input_ids));
    return softmax_rows(logits.value()).row(0);
}

/// Masked-token cross entropy of one sample.
template <typename Scalar>
Scalar masked_loss(const MaskedSample& sample, const ModelState<Scalar>& state) {
    Tape<Scalar> tape(false);
    auto logits = mlm_logits(tape, state, std::span<const TokenId>(sample.input_ids));
    return cross_entropy(logits.value(), sample.target_id);
}

/// Row 0 of the encoder output for the unmasked frame.
template <typename Scalar>
RowVector<Scalar> cls_vector(std::span<const TokenId> ids, const ModelState<Scalar>& state) {
    Tape<Scalar> tape(false);
    return encode_cls(tape, state, ids).value().row(0);
}

MessageEmbedding cls_embedding(const TokenSequence& message, const ModelState<float>& state);

struct TrainingReport {
    std::vector<double> epoch_mean_loss;
    std::size_t samples_seen = 0;
};

/// Builds the config a corpus needs: frame length and vocabulary size come
/// from the data, everything else from `base`.
ModelConfig make_model_config(const ModelConfig& base, int payload_budget, const Vocabulary& vocab);

/// Masked-token training. Each epoch draws one random mask per non-empty
/// message (message order shuffled), accumulates mean cross entropy over
/// batches of `batch_size` and takes an Adam step per batch. A single
/// generator seeded with config.seed drives initialisation, shuffling and
/// masking. Throws ValidationError for an empty corpus.
ModelState<float> train(const std::vector<TokenSequence>& corpus, const ModelConfig& config,
                        TrainingReport* report = nullptr);

/// Continues training an existing state for `epochs` epochs.
void train_epochs(ModelState<float>& state, const std::vector<TokenSequence>& corpus, int epochs, Rng& rng,
                  TrainingReport* report = nullptr);

/// The state train() starts from for this config.
ModelState<float> initial_state(const ModelConfig& config);

extern template struct ModelState<float>;
extern template struct ModelState<double>;

}  // namespace nulog
