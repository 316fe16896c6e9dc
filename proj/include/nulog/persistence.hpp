#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "nulog/model.hpp"
#include "nulog/tokenizer.hpp"

namespace nulog {

/// Single-file little-endian archive:
///
///   "NULG" | version u32 | 10 config u32 (d, heads, ffn_hidden, blocks,
///   frame_length, vocab_size, epochs, batch_size, seed, epsilon) |
///   vocab count u32, then per entry u32 byte length + UTF-8 bytes (specials
///   included, id order) | tensor count u32, then per tensor: u32 name
///   length + name, rows u32, cols u32, rows*cols f32 in row-major order.
inline constexpr char kArchiveMagic[4] = {'N', 'U', 'L', 'G'};
inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr std::size_t kArchiveConfigScalars = 10;

struct LoadedModel {
    ModelState<float> state;
    Vocabulary vocab;
    ModelConfig config;
};

std::string serialize_model(const ModelState<float>& state, const Vocabulary& vocab);

/// Throws FormatError (bad magic, truncation), VersionError (newer format)
/// or ValidationError (tensors inconsistent with the config). Nothing is
/// returned unless the whole archive checks out.
LoadedModel deserialize_model(std::string_view bytes);

/// Throws IoError naming the path when writing fails.
void save_model(const ModelState<float>& state, const Vocabulary& vocab, const std::filesystem::path& path);
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace nulog
