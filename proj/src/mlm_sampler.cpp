#include "nulog/mlm_sampler.hpp"

#include "nulog/error.hpp"

namespace nulog {

MaskedSample mask_at(const TokenSequence& seq, std::size_t position) {
    if (position < 1 || position > seq.real_length()) {
        throw IndexError("mask position " + std::to_string(position) + " outside 1.." +
                         std::to_string(seq.real_length()));
    }
    MaskedSample sample;
    sample.input_ids = seq.framed_ids;
    sample.target_id = seq.framed_ids[position];
    sample.position = position;
    sample.input_ids[position] = Vocabulary::mask;
    return sample;
}

std::optional<MaskedSample> sample_random_mask(const TokenSequence& seq, Rng& rng) {
    if (seq.real_length() == 0) {
        return std::nullopt;
    }
    std::uniform_int_distribution<std::size_t> pick(1, seq.real_length());
    return mask_at(seq, pick(rng));
}

std::vector<MaskedSample> enumerate_masks(const TokenSequence& seq) {
    std::vector<MaskedSample> out;
    out.reserve(seq.real_length());
    for (std::size_t p = 1; p <= seq.real_length(); ++p) {
        out.push_back(mask_at(seq, p));
    }
    return out;
}

}  // namespace nulog
