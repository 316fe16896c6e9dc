#include "nulog/tokenizer.hpp"

#include <algorithm>

#include "nulog/error.hpp"
#include "nulog/log.hpp"

namespace nulog {
namespace {

std::regex compile(const std::string& pattern) {
    try {
        return std::regex(pattern);
    } catch (const std::regex_error& e) {
        throw ConfigError("tokenization filter '" + pattern + "' does not compile: " + e.what());
    }
}

const char* const kSpecialNames[] = {"<CLS>", "<MASK>", "<PAD>", "<UNK>"};

}  // namespace

Tokenizer::Tokenizer(std::string pattern) : pattern_(std::move(pattern)), regex_(compile(pattern_)) {}

TokenList Tokenizer::operator()(std::string_view content) const {
    TokenList out;
    const char* begin = content.data();
    const char* end = begin + content.size();
    const char* fragment = begin;
    for (std::cregex_iterator it(begin, end, regex_), stop; it != stop; ++it) {
        const char* match_begin = begin + it->position(0);
        if (match_begin > fragment) {
            out.emplace_back(fragment, match_begin);
        }
        fragment = std::max(fragment, match_begin + it->length(0));
    }
    if (fragment < end) {
        out.emplace_back(fragment, end);
    }
    return out;
}

TokenList tokenize(std::string_view content, const std::string& filter) { return Tokenizer(filter)(content); }

Vocabulary::Vocabulary() {
    for (const char* name : kSpecialNames) {
        tokens_.emplace_back(name);
    }
}

void Vocabulary::add(std::string token) {
    const auto id = static_cast<TokenId>(tokens_.size());
    if (index_.emplace(token, id).second) {
        tokens_.push_back(std::move(token));
    }
}

Vocabulary Vocabulary::build(const std::vector<TokenList>& corpus) {
    if (corpus.empty()) {
        throw ValidationError("cannot build a vocabulary from an empty corpus");
    }
    Vocabulary vocab;
    for (const auto& message : corpus) {
        for (const auto& token : message) {
            vocab.add(token);
        }
    }
    return vocab;
}

Vocabulary Vocabulary::from_regular_tokens(std::vector<std::string> tokens) {
    Vocabulary vocab;
    for (auto& token : tokens) {
        const auto before = vocab.size();
        vocab.add(std::move(token));
        if (vocab.size() == before) {
            throw ValidationError("duplicate vocabulary entry");
        }
    }
    return vocab;
}

TokenId Vocabulary::encode(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? unk : it->second;
}

const std::string& Vocabulary::decode(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                         std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

int compute_frame_length(const std::vector<TokenList>& corpus) {
    if (corpus.empty()) {
        throw ValidationError("cannot compute a frame length for an empty corpus");
    }
    std::size_t longest = 0;
    for (const auto& message : corpus) {
        longest = std::max(longest, message.size());
    }
    return static_cast<int>(longest) + 1;
}

TokenSequence frame(const TokenList& tokens, int payload_budget, const Vocabulary& vocab,
                    std::int64_t message_index) {
    if (payload_budget < 1) {
        throw ValidationError("payload budget must be >= 1");
    }
    TokenSequence seq;
    seq.message_index = message_index;
    const auto capacity = static_cast<std::size_t>(payload_budget - 1);
    if (tokens.size() > capacity) {
        seq.truncated = true;
        log::warn("message " + std::to_string(message_index) + " has " + std::to_string(tokens.size()) +
                  " tokens, truncated to " + std::to_string(capacity));
        seq.tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(capacity));
    } else {
        seq.tokens = tokens;
    }
    seq.framed_ids.assign(static_cast<std::size_t>(payload_budget) + 1, Vocabulary::pad);
    seq.framed_ids[0] = Vocabulary::cls;
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        seq.framed_ids[i + 1] = vocab.encode(seq.tokens[i]);
    }
    return seq;
}

}  // namespace nulog
