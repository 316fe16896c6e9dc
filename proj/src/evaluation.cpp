#include "nulog/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "nulog/csv.hpp"
#include "nulog/error.hpp"

namespace nulog {
namespace {

std::u32string code_points(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto c = static_cast<unsigned char>(s[i]);
        int extra = c >= 0xF0 ? 3 : c >= 0xE0 ? 2 : c >= 0xC0 ? 1 : 0;
        if (extra > 0 && i + static_cast<std::size_t>(extra) >= s.size()) {
            extra = 0;
        }
        char32_t cp = extra == 0 ? c : c & (0x3F >> extra);
        bool valid = true;
        for (int k = 1; k <= extra; ++k) {
            const auto cont = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
            if ((cont & 0xC0) != 0x80) {
                valid = false;
                break;
            }
            cp = (cp << 6) | (cont & 0x3F);
        }
        if (!valid) {
            cp = c;
            extra = 0;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(extra) + 1;
    }
    return out;
}

std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << std::fixed << v;
    return s.str();
}

}  // namespace

double parsing_accuracy(const Assignment& predicted, const Assignment& truth) {
    if (predicted.size() != truth.size() ||
        !std::equal(predicted.begin(), predicted.end(), truth.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
        throw ValidationError("parsing_accuracy: predicted and truth cover different message sets (" +
                              std::to_string(predicted.size()) + " vs " + std::to_string(truth.size()) + ")");
    }
    if (truth.empty()) {
        return 1.0;
    }
    // A predicted group is correct as a whole iff all its members share one
    // truth group and that truth group has no other members.
    std::unordered_map<std::string, std::size_t> truth_sizes;
    for (const auto& [_, group] : truth) {
        ++truth_sizes[group];
    }
    struct Tally {
        const std::string* truth_group = nullptr;
        std::size_t count = 0;
        bool pure = true;
    };
    std::unordered_map<std::string, Tally> tallies;
    for (const auto& [index, group] : predicted) {
        auto& t = tallies[group];
        const auto& truth_group = truth.at(index);
        if (t.truth_group == nullptr) {
            t.truth_group = &truth_group;
        } else if (*t.truth_group != truth_group) {
            t.pure = false;
        }
        ++t.count;
    }
    std::size_t correct = 0;
    for (const auto& [_, t] : tallies) {
        if (t.pure && truth_sizes.at(*t.truth_group) == t.count) {
            correct += t.count;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

std::size_t levenshtein(std::string_view a_bytes, std::string_view b_bytes) {
    auto a = code_points(a_bytes);
    auto b = code_points(b_bytes);
    if (a.size() < b.size()) {
        std::swap(a, b);
    }
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        row[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diagonal = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t above = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diagonal + (a[i - 1] == b[j - 1] ? 0u : 1u)});
            diagonal = above;
        }
    }
    return row[b.size()];
}

std::string normalize_template(std::string_view text, const Tokenizer& tokenizer) {
    std::string out;
    for (const auto& token : tokenizer(text)) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += token.find(kVariablePlaceholder) != std::string::npos ? std::string(kVariablePlaceholder) : token;
    }
    return out;
}

double mean_template_edit_distance(const std::vector<ParsedMessage>& parsed, const std::vector<LogRecord>& records,
                                   const Tokenizer& tokenizer) {
    if (records.empty()) {
        return 0.0;
    }
    std::unordered_map<std::int64_t, const ParsedMessage*> by_index;
    for (const auto& p : parsed) {
        by_index[p.message_index] = &p;
    }
    double total = 0.0;
    for (const auto& r : records) {
        if (!r.truth_template) {
            throw ValidationError("record " + std::to_string(r.line_id) + " has no ground-truth template");
        }
        const auto it = by_index.find(r.line_id);
        if (it == by_index.end()) {
            throw ValidationError("record " + std::to_string(r.line_id) + " was not parsed");
        }
        total += static_cast<double>(levenshtein(normalize_template(it->second->template_text, tokenizer),
                                                 normalize_template(*r.truth_template, tokenizer)));
    }
    return total / static_cast<double>(records.size());
}

double verbatim_baseline_edit_distance(const std::vector<LogRecord>& records, const Tokenizer& tokenizer) {
    std::vector<ParsedMessage> verbatim;
    verbatim.reserve(records.size());
    for (const auto& r : records) {
        ParsedMessage p;
        p.message_index = r.line_id;
        p.template_text = r.content;
        verbatim.push_back(std::move(p));
    }
    return mean_template_edit_distance(verbatim, records, tokenizer);
}

EvaluationReport evaluate(const std::string& dataset, const std::vector<ParsedMessage>& parsed,
                          const std::vector<LogRecord>& records, const Tokenizer& tokenizer) {
    Assignment predicted;
    for (const auto& p : parsed) {
        predicted[p.message_index] = std::to_string(p.template_id) + "|" + p.template_text;
    }
    Assignment truth;
    for (const auto& r : records) {
        if (r.truth_event_id) {
            truth[r.line_id] = *r.truth_event_id;
        } else if (r.truth_template) {
            truth[r.line_id] = *r.truth_template;
        } else {
            throw ValidationError("record " + std::to_string(r.line_id) + " has no ground truth");
        }
    }

    EvaluationReport report;
    report.dataset = dataset;
    report.parsing_accuracy = parsing_accuracy(predicted, truth);
    report.mean_edit_distance = mean_template_edit_distance(parsed, records, tokenizer);

    std::map<std::string, std::vector<std::int64_t>> truth_groups;
    for (const auto& [index, group] : truth) {
        truth_groups[group].push_back(index);
    }
    std::map<std::string, std::set<std::int64_t>> predicted_groups;
    for (const auto& [index, group] : predicted) {
        predicted_groups[group].insert(index);
    }
    for (const auto& [group, members] : truth_groups) {
        TemplateDiagnostic diag;
        diag.truth_group = group;
        diag.truth_count = members.size();
        std::set<std::string> landed;
        for (auto index : members) {
            landed.insert(predicted.at(index));
        }
        diag.predicted_groups = landed.size();
        if (landed.size() == 1 && predicted_groups.at(*landed.begin()).size() == members.size()) {
            diag.correct = members.size();
        }
        report.per_template.push_back(std::move(diag));
    }
    return report;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw ValidationError("quantile of an empty sample");
    }
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

FiveNumberSummary robustness_summary(const std::vector<std::pair<std::string, double>>& per_dataset) {
    if (per_dataset.empty()) {
        throw ValidationError("robustness summary needs at least one dataset score");
    }
    std::vector<double> scores;
    for (const auto& [_, s] : per_dataset) {
        scores.push_back(s);
    }
    return {quantile(scores, 0.0), quantile(scores, 0.25), quantile(scores, 0.5), quantile(scores, 0.75),
            quantile(scores, 1.0)};
}

void write_report_csv(std::ostream& out, const std::vector<EvaluationReport>& reports) {
    csv::write_row(out, {"dataset", "PA", "mean_edit_distance"});
    for (const auto& r : reports) {
        csv::write_row(out, {r.dataset, format_double(r.parsing_accuracy), format_double(r.mean_edit_distance)});
    }
}

void write_robustness_csv(std::ostream& out, const std::vector<MetricScores>& metrics) {
    csv::write_row(out, {"metric", "datasets", "min", "q1", "median", "q3", "max"});
    for (const auto& [metric, per_dataset] : metrics) {
        const auto s = robustness_summary(per_dataset);
        csv::write_row(out, {metric, std::to_string(per_dataset.size()), format_double(s.min), format_double(s.q1),
                             format_double(s.median), format_double(s.q3), format_double(s.max)});
    }
}

}  // namespace nulog
