#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>

#include "kgforge/detail/casefold_table.hpp"

namespace kgforge {

namespace detail {

// Decodes one UTF-8 code point starting at `i`, advancing `i`. Invalid bytes
// decode to themselves (0x80..0xFF) so canonicalize stays total and
// idempotent on arbitrary byte strings.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  auto cont = [&](std::size_t k) { return k < s.size() && (byte(k) & 0xC0) == 0x80; };
  if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
    char32_t cp = (static_cast<char32_t>(b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
    if (cp >= 0x80) {
      i += 2;
      return cp;
    }
  } else if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
    char32_t cp = (static_cast<char32_t>(b0 & 0x0F) << 12) |
                  (static_cast<char32_t>(byte(i + 1) & 0x3F) << 6) | (byte(i + 2) & 0x3F);
    if (cp >= 0x800 && !(cp >= 0xD800 && cp <= 0xDFFF)) {
      i += 3;
      return cp;
    }
  } else if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
    char32_t cp = (static_cast<char32_t>(b0 & 0x07) << 18) |
                  (static_cast<char32_t>(byte(i + 1) & 0x3F) << 12) |
                  (static_cast<char32_t>(byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
    if (cp >= 0x10000 && cp <= 0x10FFFF) {
      i += 4;
      return cp;
    }
  }
  ++i;  // invalid lead or truncated sequence: pass the byte through
  return b0;
}

inline void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Full case folding: appends the folded form of `cp` (1..3 code points).
inline void fold_codepoint(char32_t cp, std::string& out) {
  const FoldEntry* begin = kCaseFoldTable;
  const FoldEntry* end = kCaseFoldTable + kCaseFoldTableSize;
  const FoldEntry* it = std::lower_bound(
      begin, end, cp, [](const FoldEntry& e, char32_t v) { return e.cp < v; });
  if (it != end && it->cp == cp) {
    for (int k = 0; k < it->len; ++k) encode_utf8(it->out[k], out);
  } else {
    encode_utf8(cp, out);
  }
}

// Unicode White_Space property.
inline bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

}  // namespace detail

// Canonical key form of a name: full Unicode case folding, leading/trailing
// whitespace removed, internal whitespace runs collapsed to one U+0020.
// Total and idempotent; an empty input yields an empty key.
inline std::string canonicalize(std::string_view raw) {
  std::string folded;
  folded.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    detail::fold_codepoint(detail::decode_utf8(raw, i), folded);
  }
  std::string out;
  out.reserve(folded.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < folded.size();) {
    char32_t cp = detail::decode_utf8(folded, i);
    if (detail::is_space(cp)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    detail::encode_utf8(cp, out);
  }
  return out;
}

// ASCII-trim of leading/trailing whitespace; used for display strings where
// the original casing and inner spacing must be preserved.
inline std::string trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace kgforge
