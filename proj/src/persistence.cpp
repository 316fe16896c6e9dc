#include "nulog/persistence.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "nulog/error.hpp"
#include "nulog/ingest.hpp"

namespace nulog {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

void put_string(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

std::uint32_t checked_u32(long long v, const char* what) {
    if (v < 0 || v > 0xFFFFFFFFLL) {
        throw ValidationError(std::string("cannot store ") + what + "=" + std::to_string(v) + " as u32");
    }
    return static_cast<std::uint32_t>(v);
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::string string(const char* what) {
        const auto n = u32(what);
        need(n, what);
        std::string s(bytes_.substr(pos_, n));
        pos_ += n;
        return s;
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    std::string_view raw(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(std::string("model archive truncated while reading ") + what);
        }
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const ModelState<float>& state, const Vocabulary& vocab) {
    state.validate();
    const auto& c = state.config;
    if (static_cast<int>(vocab.size()) != c.vocab_size) {
        throw ValidationError("vocabulary of " + std::to_string(vocab.size()) + " entries does not match vocab_size " +
                              std::to_string(c.vocab_size));
    }
    std::string out(kArchiveMagic, sizeof(kArchiveMagic));
    put_u32(out, kArchiveVersion);
    for (long long v : {static_cast<long long>(c.d), static_cast<long long>(c.heads), static_cast<long long>(c.ffn_hidden),
                        static_cast<long long>(c.blocks), static_cast<long long>(c.frame_length),
                        static_cast<long long>(c.vocab_size), static_cast<long long>(c.epochs),
                        static_cast<long long>(c.batch_size), static_cast<long long>(c.seed),
                        static_cast<long long>(c.epsilon)}) {
        put_u32(out, checked_u32(v, "config scalar"));
    }
    put_u32(out, static_cast<std::uint32_t>(vocab.size()));
    for (const auto& token : vocab.entries()) {
        put_string(out, token);
    }
    put_u32(out, static_cast<std::uint32_t>(state.params.size()));
    for (const auto& p : state.params) {
        put_string(out, p.name);
        put_u32(out, static_cast<std::uint32_t>(p.value.rows()));
        put_u32(out, static_cast<std::uint32_t>(p.value.cols()));
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            put_u32(out, std::bit_cast<std::uint32_t>(p.value.data()[i]));
        }
    }
    return out;
}

LoadedModel deserialize_model(std::string_view bytes) {
    Reader in(bytes);
    const auto magic = in.raw(4, "magic");
    if (std::memcmp(magic.data(), kArchiveMagic, 4) != 0) {
        throw FormatError("not a model archive (bad magic)");
    }
    const auto version = in.u32("version");
    if (version > kArchiveVersion) {
        throw VersionError("model archive version " + std::to_string(version) + " is newer than supported version " +
                           std::to_string(kArchiveVersion));
    }
    if (version == 0) {
        throw FormatError("model archive version 0 is invalid");
    }

    ModelConfig c;
    auto as_int = [](std::uint32_t v, const char* what) {
        if (v > 0x7FFFFFFFu) {
            throw ValidationError(std::string("config field ") + what + " out of range");
        }
        return static_cast<int>(v);
    };
    c.d = as_int(in.u32("d"), "d");
    c.heads = as_int(in.u32("heads"), "heads");
    c.ffn_hidden = as_int(in.u32("ffn_hidden"), "ffn_hidden");
    c.blocks = as_int(in.u32("blocks"), "blocks");
    c.frame_length = as_int(in.u32("frame_length"), "frame_length");
    c.vocab_size = as_int(in.u32("vocab_size"), "vocab_size");
    c.epochs = as_int(in.u32("epochs"), "epochs");
    c.batch_size = as_int(in.u32("batch_size"), "batch_size");
    c.seed = in.u32("seed");
    c.epsilon = as_int(in.u32("epsilon"), "epsilon");
    c.validate();

    const auto vocab_count = in.u32("vocabulary size");
    if (vocab_count != static_cast<std::uint32_t>(c.vocab_size)) {
        throw ValidationError("archive holds " + std::to_string(vocab_count) + " vocabulary entries, config says " +
                              std::to_string(c.vocab_size));
    }
    std::vector<std::string> entries;
    entries.reserve(vocab_count);
    for (std::uint32_t i = 0; i < vocab_count; ++i) {
        entries.push_back(in.string("vocabulary entry"));
    }
    const auto reference = Vocabulary::from_regular_tokens({});
    for (TokenId id = 0; id < Vocabulary::first_regular; ++id) {
        if (entries[static_cast<std::size_t>(id)] != reference.decode(id)) {
            throw FormatError("vocabulary does not start with the special tokens");
        }
    }
    entries.erase(entries.begin(), entries.begin() + Vocabulary::first_regular);
    auto vocab = Vocabulary::from_regular_tokens(std::move(entries));

    ModelState<float> state;
    state.config = c;
    state.positional = positional_encoding<float>(c.frame_length, c.d);
    const auto tensor_count = in.u32("tensor count");
    std::set<std::string> expected;
    for (const auto& [name, _] : ModelState<float>::expected_shapes(c)) {
        expected.insert(name);
    }
    for (std::uint32_t t = 0; t < tensor_count; ++t) {
        auto name = in.string("tensor name");
        const auto rows = in.u32("tensor rows");
        const auto cols = in.u32("tensor cols");
        if (!expected.count(name)) {
            throw ValidationError("unexpected tensor '" + name + "' in archive");
        }
        const auto want = [&] {
            for (const auto& [n, shape] : ModelState<float>::expected_shapes(c)) {
                if (n == name) {
                    return shape;
                }
            }
            return std::pair<int, int>{0, 0};
        }();
        if (rows != static_cast<std::uint32_t>(want.first) || cols != static_cast<std::uint32_t>(want.second)) {
            throw ValidationError("tensor '" + name + "' is " + shape_string(rows, cols) + ", config needs " +
                                  shape_string(want.first, want.second));
        }
        Matrix<float> value(rows, cols);
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            value.data()[i] = in.f32("tensor data");
        }
        state.params.add(std::move(name), std::move(value));
    }
    if (!in.at_end()) {
        throw FormatError("trailing bytes after the last tensor");
    }
    state.validate();
    return LoadedModel{std::move(state), std::move(vocab), c};
}

void save_model(const ModelState<float>& state, const Vocabulary& vocab, const std::filesystem::path& path) {
    const auto bytes = serialize_model(state, vocab);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) {
        throw IoError("failed writing model archive '" + path.string() + "'");
    }
}

LoadedModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace nulog
