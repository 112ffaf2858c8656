#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace attnablate {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

// Byte-level tokenizer: ids 0..255 are raw bytes, followed by two specials.
namespace bytes_tok {

inline constexpr TokenId kBos = 256;
inline constexpr TokenId kEos = 257;
inline constexpr std::size_t kVocabSize = 258;

TokenSeq encode(std::string_view text, bool add_bos = true);

// Printable ASCII and whitespace pass through; any other byte becomes
// "<0xNN>", and specials render as "<bos>"/"<eos>"/"<tok:N>". The output is
// always valid UTF-8.
std::string decode(const TokenSeq& tokens);

}  // namespace bytes_tok
}  // namespace attnablate
