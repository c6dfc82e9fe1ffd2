// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace isprm {

enum class Errc {
    IndexGap,
    AfterTerminal,
    MissingSummary,
    SchemaViolation,
    InvalidSpec,
    UnknownTool,
    NonEnumerablePolicy,
    BackendUnavailable,
    ParseFailure,
    NoScoreFound,
    LengthMismatch,
    ZeroBaseline,
    MissingLogprobs,
    EmptySuite,
    UnknownCommand,
    InvalidArgument,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

/// Raised by every record reader; `field_path()` names the offending field
/// (e.g. `steps[2].t`).
class SchemaViolation : public Error {
  public:
    explicit SchemaViolation(std::string field_path, const std::string& detail = {})
      : Error(Errc::SchemaViolation, detail.empty() ? field_path : field_path + " (" + detail + ")"),
        field_path_(std::move(field_path))
    {
    }

    const std::string& field_path() const noexcept { return field_path_; }

  private:
    std::string field_path_;
};

} // namespace isprm
