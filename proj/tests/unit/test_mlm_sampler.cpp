#include <doctest.h>

#include <array>
#include <cmath>

#include "nulog/error.hpp"
#include "nulog/mlm_sampler.hpp"

using namespace nulog;

namespace {

TokenSequence sequence_of(const TokenList& tokens, int budget) {
    static const auto vocab = Vocabulary::build({{"a", "b", "c", "d"}});
    return frame(tokens, budget, vocab);
}

}  // namespace

TEST_SUITE("mlm_sampler") {

TEST_CASE("single token is always the one masked") {
    const auto seq = sequence_of({"a"}, 3);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const auto s = sample_random_mask(seq, rng);
        REQUIRE(s.has_value());
        CHECK(s->position == 1);
        CHECK(s->target_id == 4);
        CHECK(s->input_ids == std::vector<TokenId>{0, Vocabulary::mask, 2, 2});
    }
}

TEST_CASE("empty message sits out") {
    Rng rng(1);
    CHECK_FALSE(sample_random_mask(sequence_of({}, 3), rng).has_value());
    CHECK(enumerate_masks(sequence_of({}, 3)).empty());
}

TEST_CASE("fixed seed repeats the same positions") {
    const auto seq = sequence_of({"a", "b", "c", "d"}, 5);
    Rng r1(kDefaultSeed), r2(kDefaultSeed);
    for (int i = 0; i < 100; ++i) {
        CHECK(sample_random_mask(seq, r1)->position == sample_random_mask(seq, r2)->position);
    }
}

TEST_CASE("positions are uniform") {
    const auto seq = sequence_of({"a", "b", "c", "d"}, 5);
    Rng rng(kDefaultSeed);
    std::array<int, 5> counts{};
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        ++counts[sample_random_mask(seq, rng)->position];
    }
    CHECK(counts[0] == 0);
    for (int p = 1; p <= 4; ++p) {
        const double freq = static_cast<double>(counts[static_cast<std::size_t>(p)]) / draws;
        CHECK(std::abs(freq - 0.25) <= 0.02);
    }
}

TEST_CASE("enumeration covers every token once") {
    const auto seq = sequence_of({"c", "a", "b"}, 4);
    const auto samples = enumerate_masks(seq);
    REQUIRE(samples.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(samples[i].position == i + 1);
        CHECK(samples[i].target_id == seq.framed_ids[i + 1]);
        CHECK(samples[i].input_ids[i + 1] == Vocabulary::mask);
    }
    CHECK_THROWS_AS(mask_at(seq, 0), IndexError);
    CHECK_THROWS_AS(mask_at(seq, 4), IndexError);
}

}
