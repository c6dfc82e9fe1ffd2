// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "isprm/chat_client.hpp"
#include "isprm/trajectory.hpp"

namespace isprm {

inline constexpr std::size_t kDefaultSummaryBound = 2000;

/// h_t = f(q, h_{t-1}, o_{t-1}, s_t, a_t). Implementations see only these
/// five inputs.
class SummaryBackend {
  public:
    virtual ~SummaryBackend() = default;
    virtual std::string summarize(std::string_view query, const Summary& prev, std::string_view prev_response,
                                  const TrajStep& step) const = 0;
    virtual std::size_t bound() const = 0;
};

/// Question / Findings / Plan sections. Findings keep sentences from tool
/// responses sharing at least one content token with the query or an
/// already-retained finding; the oldest findings are evicted first.
class ExtractiveSummarizer final : public SummaryBackend {
  public:
    explicit ExtractiveSummarizer(std::size_t bound = kDefaultSummaryBound) : bound_(bound) {}

    std::string summarize(std::string_view query, const Summary& prev, std::string_view prev_response,
                          const TrajStep& step) const override;
    std::size_t bound() const override { return bound_; }

  private:
    std::size_t bound_;
};

class RemoteSummarizer final : public SummaryBackend {
  public:
    RemoteSummarizer(std::shared_ptr<const ChatBackend> backend, std::size_t bound = kDefaultSummaryBound)
      : backend_(std::move(backend)), bound_(bound)
    {
    }

    std::string summarize(std::string_view query, const Summary& prev, std::string_view prev_response,
                          const TrajStep& step) const override;
    std::size_t bound() const override { return bound_; }

  private:
    std::shared_ptr<const ChatBackend> backend_;
    std::size_t bound_;
};

/// Checks h_prev.step_index == step.step_index - 1, runs the backend, and
/// returns a summary no longer than the backend's bound.
Summary update_summary(std::string_view query, const Summary& prev, std::string_view prev_response,
                       const TrajStep& step, const SummaryBackend& backend);

/// Summaries h_1..h_t of a trajectory, chained from the empty h_0.
std::vector<Summary> summarize_trajectory(std::string_view query, const Trajectory& traj,
                                          const SummaryBackend& backend);

/// The five summarizer inputs, as rendered into a prompt.
struct SummaryInputs {
    std::string query;
    std::string prev_summary;
    std::string prev_response;
    std::string reasoning;
    ToolCall action;

    bool operator==(const SummaryInputs&) const = default;
};

std::string render_summary_input(const SummaryInputs& inputs);
/// Inverse of render_summary_input; throws SchemaViolation.
SummaryInputs parse_summary_input(std::string_view rendered);

struct SftRecord {
    std::string input_context;
    std::string target_summary;

    bool operator==(const SftRecord&) const = default;
};

SftRecord emit_sft_record(std::string_view query, const Summary& prev, std::string_view prev_response,
                          const TrajStep& step, const Summary& target);

nlohmann::json to_json(const SftRecord& rec);
SftRecord sft_record_from_json(const nlohmann::json& j);

/// Summaries keyed by (task_id, t), persisted as a line-delimited file.
class SummaryCache {
  public:
    const Summary* find(const std::string& task_id, int t) const;
    void put(const std::string& task_id, Summary summary);
    std::size_t size() const { return entries_.size(); }

    void save(const std::filesystem::path& path) const;
    static SummaryCache load(const std::filesystem::path& path);

  private:
    std::map<std::pair<std::string, int>, Summary> entries_;
};

} // namespace isprm
