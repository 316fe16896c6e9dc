#include "nulog/model.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "nulog/log.hpp"
#include "nulog/optimizer.hpp"

namespace nulog {

void ModelConfig::validate() const {
    auto positive = [](int v, const char* what) {
        if (v < 1) {
            throw ValidationError(std::string("model config: ") + what + " must be positive, got " + std::to_string(v));
        }
    };
    positive(d, "d");
    positive(heads, "heads");
    positive(ffn_hidden, "ffn_hidden");
    positive(blocks, "blocks");
    positive(frame_length, "frame_length");
    positive(vocab_size, "vocab_size");
    positive(batch_size, "batch_size");
    positive(epsilon, "epsilon");
    if (epochs < 0) {
        throw ValidationError("model config: epochs must be >= 0");
    }
    if (d % heads != 0) {
        throw ValidationError("model config: d=" + std::to_string(d) + " is not a multiple of heads=" +
                              std::to_string(heads));
    }
    if (vocab_size < Vocabulary::first_regular) {
        throw ValidationError("model config: vocabulary smaller than the special tokens");
    }
    if (!(learning_rate > 0.0)) {
        throw ValidationError("model config: learning_rate must be positive");
    }
}

template <typename Scalar>
std::vector<std::pair<std::string, std::pair<int, int>>> ModelState<Scalar>::expected_shapes(const ModelConfig& c) {
    std::vector<std::pair<std::string, std::pair<int, int>>> shapes;
    shapes.push_back({param_names::embedding(), {c.vocab_size, c.d}});
    for (int b = 0; b < c.blocks; ++b) {
        for (int h = 0; h < c.heads; ++h) {
            shapes.push_back({param_names::query(b, h), {c.d, c.head_width()}});
            shapes.push_back({param_names::key(b, h), {c.d, c.head_width()}});
            shapes.push_back({param_names::value(b, h), {c.d, c.head_width()}});
        }
        shapes.push_back({param_names::block(b, "attn_norm.gain"), {1, c.d}});
        shapes.push_back({param_names::block(b, "attn_norm.bias"), {1, c.d}});
        shapes.push_back({param_names::block(b, "ffn.w1"), {c.d, c.ffn_hidden}});
        shapes.push_back({param_names::block(b, "ffn.b1"), {1, c.ffn_hidden}});
        shapes.push_back({param_names::block(b, "ffn.w2"), {c.ffn_hidden, c.d}});
        shapes.push_back({param_names::block(b, "ffn.b2"), {1, c.d}});
        shapes.push_back({param_names::block(b, "ffn_norm.gain"), {1, c.d}});
        shapes.push_back({param_names::block(b, "ffn_norm.bias"), {1, c.d}});
    }
    shapes.push_back({param_names::head_weight(), {c.d, c.vocab_size}});
    shapes.push_back({param_names::head_bias(), {1, c.vocab_size}});
    return shapes;
}

template <typename Scalar>
ModelState<Scalar> ModelState<Scalar>::initialize(const ModelConfig& config, Rng& rng) {
    config.validate();
    ModelState state;
    state.config = config;
    state.positional = positional_encoding<Scalar>(config.frame_length, config.d);
    std::uniform_real_distribution<double> uniform(-0.1, 0.1);
    for (const auto& [name, shape] : expected_shapes(config)) {
        Matrix<Scalar> value(shape.first, shape.second);
        const bool is_gain = name.ends_with(".gain");
        const bool is_bias = name.ends_with(".bias") || name.ends_with(".b1") || name.ends_with(".b2");
        if (is_gain) {
            value.setOnes();
        } else if (is_bias) {
            value.setZero();
        } else {
            for (Eigen::Index i = 0; i < value.size(); ++i) {
                value.data()[i] = static_cast<Scalar>(uniform(rng));
            }
        }
        state.params.add(name, std::move(value));
    }
    return state;
}

template <typename Scalar>
void ModelState<Scalar>::validate() const {
    config.validate();
    const auto shapes = expected_shapes(config);
    for (const auto& [name, shape] : shapes) {
        if (!params.contains(name)) {
            throw ValidationError("model state is missing tensor '" + name + "'");
        }
        const auto& v = params.at(name).value;
        if (v.rows() != shape.first || v.cols() != shape.second) {
            throw ValidationError("tensor '" + name + "' is " + shape_string(v.rows(), v.cols()) + ", config needs " +
                                  shape_string(shape.first, shape.second));
        }
    }
    if (positional.rows() != config.frame_length || positional.cols() != config.d) {
        throw ValidationError("positional table does not match the config");
    }
}

template struct ModelState<float>;
template struct ModelState<double>;

MessageEmbedding cls_embedding(const TokenSequence& message, const ModelState<float>& state) {
    const auto v = cls_vector<float>(std::span<const TokenId>(message.framed_ids), state);
    MessageEmbedding out;
    out.message_index = message.message_index;
    out.vector.assign(v.data(), v.data() + v.size());
    return out;
}

ModelConfig make_model_config(const ModelConfig& base, int payload_budget, const Vocabulary& vocab) {
    ModelConfig c = base;
    c.frame_length = payload_budget + 1;
    c.vocab_size = static_cast<int>(vocab.size());
    c.validate();
    return c;
}

namespace {

Rng training_rng(const ModelConfig& config) { return Rng(config.seed); }

}  // namespace

ModelState<float> initial_state(const ModelConfig& config) {
    auto rng = training_rng(config);
    return ModelState<float>::initialize(config, rng);
}

void train_epochs(ModelState<float>& state, const std::vector<TokenSequence>& corpus, int epochs, Rng& rng,
                  TrainingReport* report) {
    const auto& cfg = state.config;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (corpus[i].real_length() > 0) {
            order.push_back(i);
        }
    }
    if (order.empty()) {
        log::warn("training corpus has no message with tokens; nothing to learn");
        return;
    }
    Adam<float> adam(state.params, AdamOptions{cfg.learning_rate});
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const auto stop = std::min(order.size(), start + batch);
            const float weight = 1.0f / static_cast<float>(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const auto sample = sample_random_mask(corpus[order[i]], rng);
                Tape<float> tape;
                auto logits = mlm_logits(tape, state, std::span<const TokenId>(sample->input_ids));
                auto loss = ad::cross_entropy(logits, sample->target_id);
                loss_sum += loss.value()(0, 0);
                tape.backward(ad::scale(loss, weight));
            }
            adam.step(state.params);
        }
        const double mean = loss_sum / static_cast<double>(order.size());
        std::ostringstream msg;
        msg << "epoch " << (epoch + 1) << "/" << epochs << " mean masked-token loss " << mean;
        log::info(msg.str());
        if (report) {
            report->epoch_mean_loss.push_back(mean);
            report->samples_seen += order.size();
        }
    }
}

ModelState<float> train(const std::vector<TokenSequence>& corpus, const ModelConfig& config, TrainingReport* report) {
    if (corpus.empty()) {
        throw ValidationError("cannot train on an empty corpus");
    }
    auto rng = training_rng(config);
    auto state = ModelState<float>::initialize(config, rng);
    for (const auto& seq : corpus) {
        if (static_cast<int>(seq.framed_ids.size()) != config.frame_length) {
            throw ValidationError("message " + std::to_string(seq.message_index) + " framed to " +
                                  std::to_string(seq.framed_ids.size()) + " ids, config expects " +
                                  std::to_string(config.frame_length));
        }
    }
    train_epochs(state, corpus, config.epochs, rng, report);
    return state;
}

}  // namespace nulog
