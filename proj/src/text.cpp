// SPDX-License-Identifier: Apache-2.0
#include "isprm/text.hpp"

#include <algorithm>
#include <cctype>

namespace isprm::text {

namespace {

bool is_space(char c)
{
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

const std::set<std::string>& stopwords()
{
    static const std::set<std::string> words = {
        "a",    "an",   "and",  "are",   "as",    "at",    "be",   "by",   "do",   "for",
        "from", "has",  "have", "i",     "in",    "is",    "it",   "its",  "of",   "on",
        "or",   "that", "the",  "this",  "to",    "was",   "which", "with", "you", "what",
        "who",  "will", "not",  "no",    "may",   "need",  "next", "then", "it's", "into",
    };
    return words;
}

} // namespace

std::string to_lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s)
{
    auto b = s.begin();
    auto e = s.end();
    while (b != e && is_space(*b))
        ++b;
    while (e != b && is_space(*(e - 1)))
        --e;
    return std::string(b, e);
}

std::string normalize(std::string_view s)
{
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

std::vector<std::string> whitespace_tokens(std::string_view s)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (is_space(c)) {
            if (!cur.empty())
                out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty())
        out.push_back(std::move(cur));
    return out;
}

std::set<std::string> content_tokens(std::string_view s)
{
    std::set<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && !stopwords().contains(cur))
            out.insert(cur);
        cur.clear();
    };
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)) != 0)
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else
            flush();
    }
    flush();
    return out;
}

std::vector<std::string> split_sentences(std::string_view s)
{
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        auto t = trim(cur);
        if (!t.empty())
            out.push_back(std::move(t));
        cur.clear();
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\n') {
            flush();
            continue;
        }
        cur.push_back(c);
        bool terminal = c == '.' || c == '!' || c == '?';
        if (terminal && (i + 1 == s.size() || is_space(s[i + 1])))
            flush();
    }
    flush();
    return out;
}

std::string utf8_truncate(std::string_view s, std::size_t max_bytes)
{
    if (s.size() <= max_bytes)
        return std::string(s);
    std::size_t cut = max_bytes;
    // back up over continuation bytes so the cut lands on a code point start
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80)
        --cut;
    return std::string(s.substr(0, cut));
}

std::vector<std::string> split_lines(std::string_view s)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto pos = s.find('\n', start);
        if (pos == std::string_view::npos) {
            if (start < s.size())
                out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

} // namespace isprm::text
