// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace isprm::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

/// Case-fold, trim and collapse internal whitespace runs to one space.
std::string normalize(std::string_view s);

/// Lower-cased whitespace-separated tokens.
std::vector<std::string> whitespace_tokens(std::string_view s);

/// Lower-cased alphanumeric tokens with stopwords removed.
std::set<std::string> content_tokens(std::string_view s);

/// Sentences split on terminal punctuation and newlines; each keeps its
/// terminator and is trimmed. Empty pieces are dropped.
std::vector<std::string> split_sentences(std::string_view s);

/// Longest prefix of `s` no longer than `max_bytes` that does not cut a
/// UTF-8 sequence.
std::string utf8_truncate(std::string_view s, std::size_t max_bytes);

std::vector<std::string> split_lines(std::string_view s);

} // namespace isprm::text
