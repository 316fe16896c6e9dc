#pragma once

#include <iosfwd>
#include <vector>

#include "nulog/ingest.hpp"
#include "nulog/model.hpp"

namespace nulog {

struct AnomalyConfig {
    int epsilon = 50;
    double delta = 0.5;
    double train_fraction = 0.8;
    int epochs_unsupervised = 3;
    int epochs_finetune = 2;
    std::string tokenization_filter = builtin_config("BGL")->tokenization_filter;
    ModelConfig model;          // widths, batch size, learning rate and seed
    bool train_on_normal_only = false;

    void validate() const;
};

struct DetectionMetrics {
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
    std::size_t true_positive = 0, false_positive = 0, true_negative = 0, false_negative = 0;
};

/// Anomaly is the positive class. Precision/recall are 0 when their
/// denominator is 0; F1 is 0 when precision + recall is 0.
DetectionMetrics compute_metrics(const std::vector<AnomalyLabel>& verdicts, const std::vector<AnomalyLabel>& labels);

/// Share of real tokens whose identity is not within the top `epsilon`
/// predictions. Empty messages score 0 and log a warning.
double token_anomaly_fraction(const TokenSequence& message, const ModelState<float>& state, int epsilon);

/// Anomaly iff fraction > delta.
AnomalyLabel unsupervised_classify(double fraction, double delta);

struct Verdict {
    std::int64_t line_id = 0;
    double score = 0;  // anomalous-token fraction, or P(anomaly) for the supervised head
    AnomalyLabel verdict = AnomalyLabel::normal;
    AnomalyLabel label = AnomalyLabel::normal;
};

struct StudyResult {
    DetectionMetrics metrics;
    std::vector<Verdict> verdicts;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

/// Positional split: the first train_fraction of records train the masked
/// token model (labels unused), the rest are scored and classified.
StudyResult run_unsupervised_study(const std::vector<LogRecord>& records, const AnomalyConfig& config);

/// Metrics for each threshold over the same scored verdicts.
std::vector<std::pair<double, DetectionMetrics>> sweep_delta(const std::vector<Verdict>& scored,
                                                             const std::vector<double>& deltas);

namespace param_names {
inline std::string classifier_weight() { return "classifier.weight"; }
inline std::string classifier_bias() { return "classifier.bias"; }
}  // namespace param_names

/// Copies the encoder of `pretrained` and swaps the vocabulary head for a
/// fresh d x 2 linear layer (uniform(-0.1, 0.1) weights from `rng`).
ModelState<float> make_classifier(const ModelState<float>& pretrained, Rng& rng);

/// Two-way distribution (normal, anomaly) from the CLS row of the unmasked
/// frame.
RowVector<float> classify_probabilities(const TokenSequence& message, const ModelState<float>& classifier);

/// Fine-tunes every weight of `classifier` with binary cross entropy for
/// `epochs` epochs. Warns when the labels contain a single class.
void fine_tune_supervised(ModelState<float>& classifier, const std::vector<TokenSequence>& train,
                          const std::vector<AnomalyLabel>& labels, int epochs, Rng& rng,
                          TrainingReport* report = nullptr);

/// Pretrain (masked tokens) on the first split, fine-tune the classifier on
/// the same split, classify the rest.
StudyResult run_supervised_study(const std::vector<LogRecord>& records, const AnomalyConfig& config);

void write_verdicts_csv(std::ostream& out, const std::vector<Verdict>& verdicts);
void write_metrics_csv(std::ostream& out, const DetectionMetrics& metrics);
void write_sweep_csv(std::ostream& out, const std::vector<std::pair<double, DetectionMetrics>>& sweep);

const char* label_name(AnomalyLabel label);

}  // namespace nulog
