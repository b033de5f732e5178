#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace catbear {

/// Corpus token policy shared by statistics and text-overlap metrics:
///   - every maximal run of ASCII letters/digits is one token;
///   - every other non-whitespace code point (Han characters, punctuation,
///     full-width symbols) is one token;
///   - whitespace separates and is never a token.
std::vector<std::string> tokenize(std::string_view text);
std::size_t count_tokens(std::string_view text);

}  // namespace catbear
