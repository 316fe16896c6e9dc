#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nulog/extraction.hpp"
#include "nulog/ingest.hpp"
#include "nulog/tokenizer.hpp"

namespace nulog {

/// message index -> group label
using Assignment = std::map<std::int64_t, std::string>;

/// Fraction of messages whose predicted group has exactly the same members
/// as their true group. Throws ValidationError when the index sets differ.
double parsing_accuracy(const Assignment& predicted, const Assignment& truth);

/// Character-level (UTF-8 code point) edit distance with unit costs.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Tokenizes with the dataset filter and joins with single spaces; any token
/// that contains a "<*>" placeholder collapses to exactly "<*>".
std::string normalize_template(std::string_view text, const Tokenizer& tokenizer);

/// Mean edit distance between predicted and true templates after
/// normalization. Messages are matched by message_index == line_id. Throws
/// ValidationError when a record has no truth template or no parse.
double mean_template_edit_distance(const std::vector<ParsedMessage>& parsed, const std::vector<LogRecord>& records,
                                   const Tokenizer& tokenizer);

/// Same metric for the baseline that keeps every message verbatim as its own
/// template.
double verbatim_baseline_edit_distance(const std::vector<LogRecord>& records, const Tokenizer& tokenizer);

struct TemplateDiagnostic {
    std::string truth_group;
    std::size_t truth_count = 0;
    std::size_t predicted_groups = 0;  // distinct predicted groups its members landed in
    std::size_t correct = 0;
};

struct EvaluationReport {
    std::string dataset;
    double parsing_accuracy = 0.0;
    double mean_edit_distance = 0.0;
    std::vector<TemplateDiagnostic> per_template;
};

/// PA against truth event ids (or truth templates when ids are absent) plus
/// the normalized edit distance.
EvaluationReport evaluate(const std::string& dataset, const std::vector<ParsedMessage>& parsed,
                          const std::vector<LogRecord>& records, const Tokenizer& tokenizer);

struct FiveNumberSummary {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Quantile with linear interpolation between order statistics (type 7).
double quantile(std::vector<double> values, double q);

/// Throws ValidationError on empty input.
FiveNumberSummary robustness_summary(const std::vector<std::pair<std::string, double>>& per_dataset);

void write_report_csv(std::ostream& out, const std::vector<EvaluationReport>& reports);
/// A metric name with one score per dataset.
using MetricScores = std::pair<std::string, std::vector<std::pair<std::string, double>>>;

/// One five-number-summary row per metric under a shared header.
void write_robustness_csv(std::ostream& out, const std::vector<MetricScores>& metrics);

}  // namespace nulog
