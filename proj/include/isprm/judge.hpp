// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string_view>

namespace isprm {

/// judge(final answer, gold answer) -> correct?
using Judge = std::function<bool(std::string_view answer, std::string_view gold)>;

/// Case-folded, trimmed, whitespace-collapsed equality.
bool exact_match_judge(std::string_view answer, std::string_view gold);

} // namespace isprm
