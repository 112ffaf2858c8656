#include "attnablate/tokenizer.hpp"

#include <cstdio>

namespace attnablate::bytes_tok {

TokenSeq encode(std::string_view text, bool add_bos) {
  TokenSeq out;
  out.reserve(text.size() + 1);
  if (add_bos) out.push_back(kBos);
  for (unsigned char c : text) out.push_back(c);
  return out;
}

std::string decode(const TokenSeq& tokens) {
  std::string out;
  for (TokenId t : tokens) {
    if (t == kBos) {
      out += "<bos>";
    } else if (t == kEos) {
      out += "<eos>";
    } else if (t > 255) {
      out += "<tok:" + std::to_string(t) + ">";
    } else if ((t >= 0x20 && t < 0x7f) || t == '\n' || t == '\t') {
      out.push_back(static_cast<char>(t));
    } else {
      char buf[8];
      std::snprintf(buf, sizeof buf, "<0x%02X>", static_cast<unsigned>(t));
      out += buf;
    }
  }
  return out;
}

}  // namespace attnablate::bytes_tok
