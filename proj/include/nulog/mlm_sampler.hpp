#pragma once

#include <optional>
#include <random>
#include <vector>

#include "nulog/tokenizer.hpp"

namespace nulog {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 7;

/// A framed message with exactly one real token replaced by MASK.
struct MaskedSample {
    std::vector<TokenId> input_ids;
    TokenId target_id = Vocabulary::unk;
    std::size_t position = 0;  // 1 <= position <= real_length()
};

MaskedSample mask_at(const TokenSequence& seq, std::size_t position);

/// Uniform over real-token positions. nullopt when the message has no tokens,
/// meaning the message sits out this epoch.
std::optional<MaskedSample> sample_random_mask(const TokenSequence& seq, Rng& rng);

/// One sample per real token, in token order.
std::vector<MaskedSample> enumerate_masks(const TokenSequence& seq);

}  // namespace nulog
