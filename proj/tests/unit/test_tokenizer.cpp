#include <doctest.h>

#include <set>

#include "nulog/error.hpp"
#include "nulog/ingest.hpp"
#include "nulog/log.hpp"
#include "nulog/tokenizer.hpp"

using namespace nulog;

TEST_SUITE("tokenizer") {

TEST_CASE("whitespace split of a path-bearing message") {
    const auto tokens = tokenize("Deleting instance /var/lib/nova/instances/4b2ab87e23b4de", "([ ])");
    CHECK(tokens == TokenList{"Deleting", "instance", "/var/lib/nova/instances/4b2ab87e23b4de"});
}

TEST_CASE("empty input and empty fragments") {
    CHECK(tokenize("", "([ ])").empty());
    CHECK(tokenize("  a   b ", "([ ])") == TokenList{"a", "b"});
}

TEST_CASE("alternation filter") {
    CHECK(tokenize("a=b,c", "([ |=|,])") == TokenList{"a", "b", "c"});
}

TEST_CASE("multi-character matches are consumed whole") {
    const auto bgl = builtin_config("BGL")->tokenization_filter;
    CHECK(tokenize("core.1234 wait...done x=(y)", bgl) == TokenList{"1234", "wait", "done", "x", "y"});
}

TEST_CASE("bad pattern is a configuration error") {
    CHECK_THROWS_AS(Tokenizer("(["), ConfigError);
}

TEST_CASE("vocabulary ids") {
    const auto vocab = Vocabulary::build({{"a", "b"}, {"a"}});
    CHECK(vocab.size() == 6);
    CHECK(vocab.encode("a") == 4);
    CHECK(vocab.encode("b") == 5);
    CHECK(vocab.encode("zzz") == Vocabulary::unk);
    CHECK(vocab.decode(Vocabulary::cls) == "<CLS>");
    CHECK(vocab.decode(5) == "b");
    CHECK_THROWS_AS(vocab.decode(6), IndexError);
    CHECK(Vocabulary::is_special(3));
    CHECK_FALSE(Vocabulary::is_special(4));
    CHECK_THROWS_AS(Vocabulary::build({}), ValidationError);
    CHECK_THROWS_AS(Vocabulary::from_regular_tokens({"x", "x"}), ValidationError);
}

TEST_CASE("vocabulary size equals specials plus distinct tokens") {
    std::vector<TokenList> corpus;
    std::set<std::string> distinct;
    for (int i = 0; i < 200; ++i) {
        TokenList m;
        for (int j = 0; j <= i % 7; ++j) {
            m.push_back("t" + std::to_string((i * 31 + j * 17) % 53));
            distinct.insert(m.back());
        }
        corpus.push_back(m);
    }
    CHECK(Vocabulary::build(corpus).size() == 4 + distinct.size());
}

TEST_CASE("frame length") {
    CHECK(compute_frame_length({{"1", "2", "3", "4", "5", "6", "7", "8", "9"}, {"x"}}) == 10);
    CHECK(compute_frame_length({{"a"}, {"b"}}) == 2);
    CHECK_THROWS_AS(compute_frame_length({}), ValidationError);
}

TEST_CASE("framing") {
    const auto vocab = Vocabulary::build({{"a", "b"}});
    SUBCASE("two tokens in a budget of four") {
        const auto seq = frame({"a", "b"}, 4, vocab, 9);
        CHECK(seq.framed_ids == std::vector<TokenId>{0, 4, 5, 2, 2});
        CHECK(seq.message_index == 9);
        CHECK_FALSE(seq.truncated);
    }
    SUBCASE("unseen token") {
        CHECK(frame({"zzz"}, 2, vocab).framed_ids == std::vector<TokenId>{0, Vocabulary::unk, 2});
    }
    SUBCASE("longest message keeps exactly one pad") {
        const auto seq = frame({"a", "b", "a"}, 4, vocab);
        CHECK(seq.framed_ids == std::vector<TokenId>{0, 4, 5, 4, 2});
    }
    SUBCASE("overlong message is truncated with a warning") {
        const auto before = log::warning_count();
        const auto seq = frame({"a", "b", "a", "b", "a"}, 4, vocab);
        CHECK(seq.truncated);
        CHECK(seq.real_length() == 3);
        CHECK(seq.framed_ids == std::vector<TokenId>{0, 4, 5, 4, 2});
        CHECK(log::warning_count() == before + 1);
    }
}

}
