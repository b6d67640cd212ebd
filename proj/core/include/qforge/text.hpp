#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qforge::text {

// UTF-8 <-> code points. Invalid sequences decode to U+FFFD.
std::u32string to_code_points(std::string_view utf8);
std::string to_utf8(std::u32string_view cps);

// NFC + lowercase.
std::string fold(std::string_view utf8);

// Matching form used by leakage detection: lowercase, NFC, punctuation
// removed, whitespace runs collapsed to one ASCII space, trimmed.
std::string normalize_for_match(std::string_view utf8);

// Game tokenizer: fold, split on Unicode whitespace, strip leading and
// trailing punctuation from each token, drop tokens that become empty.
// No stemming.
std::vector<std::string> tokenize(std::string_view utf8);

// Whitespace-normalized folded form (used for duplicate detection and as
// the answerer's input normalization).
std::string canonical(std::string_view utf8);

// True iff `needle` occurs as a contiguous run inside `haystack`.
bool contains_run(const std::vector<std::string>& haystack,
                  const std::vector<std::string>& needle);

// 64-bit FNV-1a; stable across platforms (used for feature hashing and
// cache keys).
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

}  // namespace qforge::text
