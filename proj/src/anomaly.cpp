#include "nulog/anomaly.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "nulog/csv.hpp"
#include "nulog/error.hpp"
#include "nulog/extraction.hpp"
#include "nulog/log.hpp"
#include "nulog/optimizer.hpp"

namespace nulog {
namespace {

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << std::fixed << v;
    return s.str();
}

struct PreparedSplit {
    Vocabulary vocab = Vocabulary::from_regular_tokens({});
    ModelConfig model;
    std::vector<TokenSequence> train;
    std::vector<AnomalyLabel> train_labels;
    std::vector<TokenSequence> test;
    std::vector<const LogRecord*> test_records;
};

PreparedSplit prepare(const std::vector<LogRecord>& records, const AnomalyConfig& config, int epochs) {
    config.validate();
    for (const auto& r : records) {
        if (!r.anomaly_label) {
            throw ValidationError("record " + std::to_string(r.line_id) + " carries no anomaly label");
        }
    }
    const auto cut = static_cast<std::size_t>(static_cast<double>(records.size()) * config.train_fraction);
    if (cut == 0 || cut >= records.size()) {
        throw ValidationError("train/test split of " + std::to_string(records.size()) + " records leaves a side empty");
    }
    const Tokenizer tokenizer(config.tokenization_filter);

    std::vector<TokenList> train_tokens;
    std::vector<const LogRecord*> train_records;
    for (std::size_t i = 0; i < cut; ++i) {
        if (config.train_on_normal_only && *records[i].anomaly_label == AnomalyLabel::anomaly) {
            continue;
        }
        train_tokens.push_back(tokenizer(records[i].content));
        train_records.push_back(&records[i]);
    }
    if (train_tokens.empty()) {
        throw ValidationError("no training messages left after filtering");
    }

    PreparedSplit split;
    split.vocab = Vocabulary::build(train_tokens);
    const int budget = config.model.frame_length > 0 ? config.model.frame_length - 1 : compute_frame_length(train_tokens);
    split.model = make_model_config(config.model, budget, split.vocab);
    split.model.epochs = epochs;
    split.model.epsilon = config.epsilon;
    for (std::size_t i = 0; i < train_tokens.size(); ++i) {
        split.train.push_back(frame(train_tokens[i], budget, split.vocab, train_records[i]->line_id));
        split.train_labels.push_back(*train_records[i]->anomaly_label);
    }
    for (std::size_t i = cut; i < records.size(); ++i) {
        split.test.push_back(frame(tokenizer(records[i].content), budget, split.vocab, records[i].line_id));
        split.test_records.push_back(&records[i]);
    }
    return split;
}

DetectionMetrics metrics_of(const std::vector<Verdict>& verdicts) {
    std::vector<AnomalyLabel> predicted, labels;
    for (const auto& v : verdicts) {
        predicted.push_back(v.verdict);
        labels.push_back(v.label);
    }
    return compute_metrics(predicted, labels);
}

}  // namespace

void AnomalyConfig::validate() const {
    if (epsilon < 1) {
        throw ValidationError("anomaly epsilon must be >= 1");
    }
    if (!(delta >= 0.0 && delta <= 1.0)) {
        throw ValidationError("delta must lie in [0, 1]");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("train_fraction must lie in (0, 1)");
    }
    if (epochs_unsupervised < 0 || epochs_finetune < 0) {
        throw ValidationError("epoch counts must be >= 0");
    }
}

DetectionMetrics compute_metrics(const std::vector<AnomalyLabel>& verdicts, const std::vector<AnomalyLabel>& labels) {
    if (verdicts.size() != labels.size()) {
        throw ValidationError("compute_metrics: " + std::to_string(verdicts.size()) + " verdicts for " +
                              std::to_string(labels.size()) + " labels");
    }
    DetectionMetrics m;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const bool flagged = verdicts[i] == AnomalyLabel::anomaly;
        const bool actual = labels[i] == AnomalyLabel::anomaly;
        if (flagged && actual) {
            ++m.true_positive;
        } else if (flagged) {
            ++m.false_positive;
        } else if (actual) {
            ++m.false_negative;
        } else {
            ++m.true_negative;
        }
    }
    auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    m.accuracy = ratio(m.true_positive + m.true_negative, verdicts.size());
    m.precision = ratio(m.true_positive, m.true_positive + m.false_positive);
    m.recall = ratio(m.true_positive, m.true_positive + m.false_negative);
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

double token_anomaly_fraction(const TokenSequence& message, const ModelState<float>& state, int epsilon) {
    if (message.real_length() == 0) {
        log::warn("message " + std::to_string(message.message_index) + " has no tokens; anomaly fraction set to 0");
        return 0.0;
    }
    const auto constant = constant_tokens(token_ranks(message, state), epsilon);
    const auto failing = std::count(constant.begin(), constant.end(), false);
    return static_cast<double>(failing) / static_cast<double>(constant.size());
}

AnomalyLabel unsupervised_classify(double fraction, double delta) {
    return fraction > delta ? AnomalyLabel::anomaly : AnomalyLabel::normal;
}

StudyResult run_unsupervised_study(const std::vector<LogRecord>& records, const AnomalyConfig& config) {
    const auto split = prepare(records, config, config.epochs_unsupervised);
    const auto state = train(split.train, split.model);

    StudyResult result;
    result.train_size = split.train.size();
    result.test_size = split.test.size();
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        Verdict v;
        v.line_id = split.test_records[i]->line_id;
        v.score = token_anomaly_fraction(split.test[i], state, config.epsilon);
        v.verdict = unsupervised_classify(v.score, config.delta);
        v.label = *split.test_records[i]->anomaly_label;
        result.verdicts.push_back(v);
    }
    result.metrics = metrics_of(result.verdicts);
    return result;
}

std::vector<std::pair<double, DetectionMetrics>> sweep_delta(const std::vector<Verdict>& scored,
                                                             const std::vector<double>& deltas) {
    std::vector<std::pair<double, DetectionMetrics>> out;
    for (double delta : deltas) {
        auto verdicts = scored;
        for (auto& v : verdicts) {
            v.verdict = unsupervised_classify(v.score, delta);
        }
        out.emplace_back(delta, metrics_of(verdicts));
    }
    return out;
}

ModelState<float> make_classifier(const ModelState<float>& pretrained, Rng& rng) {
    ModelState<float> out;
    out.config = pretrained.config;
    out.positional = pretrained.positional;
    for (const auto& p : pretrained.params) {
        if (p.name == param_names::head_weight() || p.name == param_names::head_bias()) {
            continue;
        }
        out.params.add(p.name, p.value);
    }
    std::uniform_real_distribution<double> uniform(-0.1, 0.1);
    Matrix<float> w(pretrained.config.d, 2);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        w.data()[i] = static_cast<float>(uniform(rng));
    }
    out.params.add(param_names::classifier_weight(), std::move(w));
    out.params.add(param_names::classifier_bias(), Matrix<float>::Zero(1, 2));
    return out;
}

namespace {

template <typename State>
Var<float> classifier_logits(Tape<float>& tape, State& state, std::span<const TokenId> ids) {
    auto cls = encode_cls(tape, state, ids);
    auto w = bind(tape, state.params.at(param_names::classifier_weight()));
    auto b = bind(tape, state.params.at(param_names::classifier_bias()));
    return ad::add_row(ad::matmul(cls, w), b);
}

}  // namespace

RowVector<float> classify_probabilities(const TokenSequence& message, const ModelState<float>& classifier) {
    Tape<float> tape(false);
    auto logits = classifier_logits(tape, classifier, std::span<const TokenId>(message.framed_ids));
    return softmax_rows(logits.value()).row(0);
}

void fine_tune_supervised(ModelState<float>& classifier, const std::vector<TokenSequence>& train,
                          const std::vector<AnomalyLabel>& labels, int epochs, Rng& rng, TrainingReport* report) {
    if (train.size() != labels.size()) {
        throw ValidationError("fine-tuning needs one label per message");
    }
    if (train.empty()) {
        throw ValidationError("fine-tuning set is empty");
    }
    if (std::all_of(labels.begin(), labels.end(), [&](auto l) { return l == labels.front(); })) {
        log::warn("fine-tuning set contains a single class");
    }
    Adam<float> adam(classifier.params, AdamOptions{classifier.config.learning_rate});
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    const auto batch = static_cast<std::size_t>(classifier.config.batch_size);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const auto stop = std::min(order.size(), start + batch);
            const float weight = 1.0f / static_cast<float>(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const auto& seq = train[order[i]];
                Tape<float> tape;
                auto logits = classifier_logits(tape, classifier, std::span<const TokenId>(seq.framed_ids));
                auto loss = ad::cross_entropy(logits, labels[order[i]] == AnomalyLabel::anomaly ? 1 : 0);
                loss_sum += loss.value()(0, 0);
                tape.backward(ad::scale(loss, weight));
            }
            adam.step(classifier.params);
        }
        const double mean = loss_sum / static_cast<double>(order.size());
        log::info("fine-tune epoch " + std::to_string(epoch + 1) + "/" + std::to_string(epochs) + " mean loss " + fmt(mean));
        if (report) {
            report->epoch_mean_loss.push_back(mean);
            report->samples_seen += order.size();
        }
    }
}

StudyResult run_supervised_study(const std::vector<LogRecord>& records, const AnomalyConfig& config) {
    const auto split = prepare(records, config, config.epochs_unsupervised);
    Rng rng(split.model.seed);
    auto pretrained = ModelState<float>::initialize(split.model, rng);
    train_epochs(pretrained, split.train, split.model.epochs, rng);
    auto classifier = make_classifier(pretrained, rng);
    fine_tune_supervised(classifier, split.train, split.train_labels, config.epochs_finetune, rng);

    StudyResult result;
    result.train_size = split.train.size();
    result.test_size = split.test.size();
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        const auto probs = classify_probabilities(split.test[i], classifier);
        Verdict v;
        v.line_id = split.test_records[i]->line_id;
        v.score = probs(1);
        v.verdict = probs(1) > probs(0) ? AnomalyLabel::anomaly : AnomalyLabel::normal;
        v.label = *split.test_records[i]->anomaly_label;
        result.verdicts.push_back(v);
    }
    result.metrics = metrics_of(result.verdicts);
    return result;
}

const char* label_name(AnomalyLabel label) { return label == AnomalyLabel::anomaly ? "anomaly" : "normal"; }

void write_verdicts_csv(std::ostream& out, const std::vector<Verdict>& verdicts) {
    csv::write_row(out, {"line_id", "score", "verdict", "label"});
    for (const auto& v : verdicts) {
        csv::write_row(out, {std::to_string(v.line_id), fmt(v.score), label_name(v.verdict), label_name(v.label)});
    }
}

void write_metrics_csv(std::ostream& out, const DetectionMetrics& m) {
    csv::write_row(out, {"accuracy", "precision", "recall", "f1", "tp", "fp", "tn", "fn"});
    csv::write_row(out, {fmt(m.accuracy), fmt(m.precision), fmt(m.recall), fmt(m.f1), std::to_string(m.true_positive),
                         std::to_string(m.false_positive), std::to_string(m.true_negative),
                         std::to_string(m.false_negative)});
}

void write_sweep_csv(std::ostream& out, const std::vector<std::pair<double, DetectionMetrics>>& sweep) {
    csv::write_row(out, {"delta", "accuracy", "precision", "recall", "f1"});
    for (const auto& [delta, m] : sweep) {
        csv::write_row(out, {fmt(delta), fmt(m.accuracy), fmt(m.precision), fmt(m.recall), fmt(m.f1)});
    }
}

}  // namespace nulog
