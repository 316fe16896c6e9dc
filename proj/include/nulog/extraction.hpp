#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "nulog/ingest.hpp"
#include "nulog/model.hpp"

namespace nulog {

/// Rendering of a variable slot in a template.
inline constexpr const char* kVariablePlaceholder = "<*>";

struct ParsedMessage {
    std::int64_t message_index = 0;
    std::string template_text;
    std::vector<std::string> variables;
    int template_id = -1;
};

/// Groups messages by identical template string. Ids are dense and handed
/// out in first-appearance order.
class TemplateStore {
public:
    int assign(const std::string& template_text, std::int64_t message_index);

    std::size_t size() const noexcept { return templates_.size(); }
    const std::string& template_text(int id) const { return templates_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::int64_t>& members(int id) const { return members_.at(static_cast<std::size_t>(id)); }
    int id_of(const std::string& template_text) const;

private:
    std::map<std::string, int> ids_;
    std::vector<std::string> templates_;
    std::vector<std::vector<std::int64_t>> members_;
};

/// Rank of `true_id` when entries are ordered by probability descending,
/// then id ascending (0 = most probable).
std::size_t rank_of(const RowVector<float>& probs, TokenId true_id);

/// True iff `true_id` is among the `epsilon` most probable entries.
bool is_constant(const RowVector<float>& probs, TokenId true_id, int epsilon);

/// Rank of the true token at every real position (masking one at a time).
/// UNK tokens get the vocabulary size, so they never count as constant.
std::vector<std::size_t> token_ranks(const TokenSequence& message, const ModelState<float>& state);

/// Per-position constant/variable verdicts for a cutoff.
std::vector<bool> constant_tokens(const std::vector<std::size_t>& ranks, int epsilon);

ParsedMessage render_template(const TokenSequence& message, const std::vector<bool>& constant);

/// Masks every token in turn; tokens whose identity ranks within the top
/// `epsilon` predictions are kept, the rest become variables.
ParsedMessage extract_template(const TokenSequence& message, const ModelState<float>& state, int epsilon);

struct ParseResult {
    std::vector<ParsedMessage> messages;
    TemplateStore store;
};

/// Tokenizes, frames and parses every record; message_index is the record's
/// line_id. Uses config.epsilon and config.tokenization_filter.
ParseResult parse_corpus(const std::vector<LogRecord>& records, const ModelState<float>& state,
                         const Vocabulary& vocab, const DatasetConfig& config);

struct TrainedParser {
    ModelState<float> state;
    Vocabulary vocab;
};

/// Tokenizes `records` with the dataset filter, builds the vocabulary, frames
/// every message and trains for config.epochs. Widths, batch size, learning
/// rate and seed come from `base`; frame length comes from the data unless
/// config.frame_length_override is set.
TrainedParser fit_parser(const std::vector<LogRecord>& records, const DatasetConfig& config,
                         const ModelConfig& base = {}, TrainingReport* report = nullptr);

/// Columns line_id, template_id, template, variables (JSON string array).
void write_parsed_csv(std::ostream& out, const std::vector<ParsedMessage>& messages);
std::vector<ParsedMessage> read_parsed_csv(std::string_view text, const std::string& origin = "<memory>");

/// Columns template_id, template, count.
void write_template_csv(std::ostream& out, const TemplateStore& store);

}  // namespace nulog
