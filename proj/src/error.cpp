// SPDX-License-Identifier: Apache-2.0
#include "isprm/error.hpp"

namespace isprm {

const char* to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::IndexGap: return "IndexGap";
    case Errc::AfterTerminal: return "AfterTerminal";
    case Errc::MissingSummary: return "MissingSummary";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::UnknownTool: return "UnknownTool";
    case Errc::NonEnumerablePolicy: return "NonEnumerablePolicy";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::NoScoreFound: return "NoScoreFound";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ZeroBaseline: return "ZeroBaseline";
    case Errc::MissingLogprobs: return "MissingLogprobs";
    case Errc::EmptySuite: return "EmptySuite";
    case Errc::UnknownCommand: return "UnknownCommand";
    case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

} // namespace isprm
