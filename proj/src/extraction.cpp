#include "nulog/extraction.hpp"

#include <charconv>
#include <ostream>

#include <json.hpp>

#include "nulog/csv.hpp"
#include "nulog/error.hpp"

namespace nulog {

int TemplateStore::assign(const std::string& template_text, std::int64_t message_index) {
    auto [it, inserted] = ids_.emplace(template_text, static_cast<int>(templates_.size()));
    if (inserted) {
        templates_.push_back(template_text);
        members_.emplace_back();
    }
    members_[static_cast<std::size_t>(it->second)].push_back(message_index);
    return it->second;
}

int TemplateStore::id_of(const std::string& template_text) const {
    const auto it = ids_.find(template_text);
    return it == ids_.end() ? -1 : it->second;
}

std::size_t rank_of(const RowVector<float>& probs, TokenId true_id) {
    if (true_id < 0 || true_id >= probs.size()) {
        throw IndexError("token id " + std::to_string(true_id) + " outside distribution of size " +
                         std::to_string(probs.size()));
    }
    const float p = probs(true_id);
    std::size_t rank = 0;
    for (Eigen::Index j = 0; j < probs.size(); ++j) {
        if (probs(j) > p || (probs(j) == p && j < true_id)) {
            ++rank;
        }
    }
    return rank;
}

bool is_constant(const RowVector<float>& probs, TokenId true_id, int epsilon) {
    return rank_of(probs, true_id) < static_cast<std::size_t>(std::max(epsilon, 0));
}

std::vector<std::size_t> token_ranks(const TokenSequence& message, const ModelState<float>& state) {
    std::vector<std::size_t> ranks;
    ranks.reserve(message.real_length());
    for (const auto& sample : enumerate_masks(message)) {
        if (sample.target_id == Vocabulary::unk) {
            ranks.push_back(static_cast<std::size_t>(state.config.vocab_size));
            continue;
        }
        ranks.push_back(rank_of(predict_masked(sample, state), sample.target_id));
    }
    return ranks;
}

std::vector<bool> constant_tokens(const std::vector<std::size_t>& ranks, int epsilon) {
    std::vector<bool> out(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        out[i] = ranks[i] < static_cast<std::size_t>(std::max(epsilon, 0));
    }
    return out;
}

ParsedMessage render_template(const TokenSequence& message, const std::vector<bool>& constant) {
    ParsedMessage parsed;
    parsed.message_index = message.message_index;
    for (std::size_t i = 0; i < message.tokens.size(); ++i) {
        if (i != 0) {
            parsed.template_text.push_back(' ');
        }
        if (constant[i]) {
            parsed.template_text += message.tokens[i];
        } else {
            parsed.template_text += kVariablePlaceholder;
            parsed.variables.push_back(message.tokens[i]);
        }
    }
    return parsed;
}

ParsedMessage extract_template(const TokenSequence& message, const ModelState<float>& state, int epsilon) {
    return render_template(message, constant_tokens(token_ranks(message, state), epsilon));
}

ParseResult parse_corpus(const std::vector<LogRecord>& records, const ModelState<float>& state,
                         const Vocabulary& vocab, const DatasetConfig& config) {
    const Tokenizer tokenizer(config.tokenization_filter);
    const int budget = state.config.frame_length - 1;
    ParseResult result;
    result.messages.reserve(records.size());
    for (const auto& record : records) {
        const auto seq = frame(tokenizer(record.content), budget, vocab, record.line_id);
        auto parsed = extract_template(seq, state, config.epsilon);
        parsed.template_id = result.store.assign(parsed.template_text, record.line_id);
        result.messages.push_back(std::move(parsed));
    }
    return result;
}

TrainedParser fit_parser(const std::vector<LogRecord>& records, const DatasetConfig& config, const ModelConfig& base,
                         TrainingReport* report) {
    config.validate();
    if (records.empty()) {
        throw ValidationError("cannot fit a parser on an empty dataset");
    }
    const Tokenizer tokenizer(config.tokenization_filter);
    std::vector<TokenList> tokens;
    tokens.reserve(records.size());
    for (const auto& r : records) {
        tokens.push_back(tokenizer(r.content));
    }
    auto vocab = Vocabulary::build(tokens);
    const int budget = config.frame_length_override ? *config.frame_length_override - 1 : compute_frame_length(tokens);
    auto model = make_model_config(base, budget, vocab);
    model.epochs = config.epochs;
    model.epsilon = config.epsilon;
    std::vector<TokenSequence> corpus;
    corpus.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        corpus.push_back(frame(tokens[i], budget, vocab, records[i].line_id));
    }
    auto state = train(corpus, model, report);
    return TrainedParser{std::move(state), std::move(vocab)};
}

void write_parsed_csv(std::ostream& out, const std::vector<ParsedMessage>& messages) {
    csv::write_row(out, {"line_id", "template_id", "template", "variables"});
    for (const auto& m : messages) {
        csv::write_row(out, {std::to_string(m.message_index), std::to_string(m.template_id), m.template_text,
                             nlohmann::json(m.variables).dump()});
    }
}

std::vector<ParsedMessage> read_parsed_csv(std::string_view text, const std::string& origin) {
    const auto rows = csv::parse(text);
    if (rows.empty()) {
        throw ConfigError(origin + ": empty parsed-message file");
    }
    const csv::Row expected{"line_id", "template_id", "template", "variables"};
    if (rows.front() != expected) {
        throw ConfigError(origin + ": header must be line_id,template_id,template,variables");
    }
    auto to_int = [&](const std::string& s, std::size_t row) {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw ValidationError(origin + ": row " + std::to_string(row + 1) + " has a non-integer id '" + s + "'");
        }
        return v;
    };
    std::vector<ParsedMessage> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) {
            continue;
        }
        if (row.size() != 4) {
            throw ValidationError(origin + ": row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                                  " fields, expected 4");
        }
        ParsedMessage m;
        m.message_index = to_int(row[0], r);
        m.template_id = static_cast<int>(to_int(row[1], r));
        m.template_text = row[2];
        try {
            m.variables = nlohmann::json::parse(row[3]).get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(origin + ": row " + std::to_string(r + 1) + " variables are not a string array: " +
                                  e.what());
        }
        out.push_back(std::move(m));
    }
    return out;
}

void write_template_csv(std::ostream& out, const TemplateStore& store) {
    csv::write_row(out, {"template_id", "template", "count"});
    for (std::size_t id = 0; id < store.size(); ++id) {
        const auto i = static_cast<int>(id);
        csv::write_row(out, {std::to_string(id), store.template_text(i), std::to_string(store.members(i).size())});
    }
}

}  // namespace nulog
