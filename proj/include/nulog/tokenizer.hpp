#pragma once

#include <cstdint>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nulog {

using TokenId = std::int32_t;
using TokenList = std::vector<std::string>;

/// Splits text at every match of a filter pattern. Matched text is dropped,
/// as are empty fragments; nothing else is rewritten.
class Tokenizer {
public:
    /// Throws ConfigError when the pattern does not compile.
    explicit Tokenizer(std::string pattern);

    TokenList operator()(std::string_view content) const;
    const std::string& pattern() const noexcept { return pattern_; }

private:
    std::string pattern_;
    std::regex regex_;
};

TokenList tokenize(std::string_view content, const std::string& filter);

/// Token <-> id mapping with four reserved ids in front.
class Vocabulary {
public:
    static constexpr TokenId cls = 0;
    static constexpr TokenId mask = 1;
    static constexpr TokenId pad = 2;
    static constexpr TokenId unk = 3;
    static constexpr TokenId first_regular = 4;

    /// Ids are handed out in first-appearance order. Throws ValidationError on
    /// an empty corpus.
    static Vocabulary build(const std::vector<TokenList>& corpus);

    /// Rebuilds from the regular tokens in id order (ids 4, 5, ...).
    static Vocabulary from_regular_tokens(std::vector<std::string> tokens);

    /// UNK for out-of-vocabulary tokens.
    TokenId encode(std::string_view token) const;
    const std::string& decode(TokenId id) const;

    bool contains(std::string_view token) const;
    static bool is_special(TokenId id) noexcept { return id >= 0 && id < first_regular; }

    std::size_t size() const noexcept { return tokens_.size(); }
    /// All entries in id order, specials included.
    const std::vector<std::string>& entries() const noexcept { return tokens_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    Vocabulary();
    void add(std::string token);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

/// A tokenized message framed as [CLS] + ids + PAD... with a fixed length.
struct TokenSequence {
    std::int64_t message_index = 0;
    TokenList tokens;
    std::vector<TokenId> framed_ids;
    bool truncated = false;

    /// Positions 1..real_length() hold message tokens.
    std::size_t real_length() const noexcept { return tokens.size(); }
};

/// Payload budget M = longest message + 1. The framed length is M + 1
/// because CLS takes an extra slot. Throws ValidationError on an empty corpus.
int compute_frame_length(const std::vector<TokenList>& corpus);

/// Frames `tokens` to length M + 1. Messages longer than M - 1 tokens are
/// cut to M - 1 tokens and a warning is logged.
TokenSequence frame(const TokenList& tokens, int payload_budget, const Vocabulary& vocab,
                    std::int64_t message_index = 0);

}  // namespace nulog
