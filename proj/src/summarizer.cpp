// SPDX-License-Identifier: Apache-2.0
#include "isprm/summarizer.hpp"

#include <deque>

#include "isprm/error.hpp"
#include "isprm/records.hpp"
#include "isprm/text.hpp"

namespace isprm {

using nlohmann::json;

namespace {

constexpr std::string_view kQuestionLabel = "Question: ";
constexpr std::string_view kFindingsLabel = "Findings:";
constexpr std::string_view kFindingBullet = "- ";
constexpr std::string_view kPlanLabel = "Plan: ";

struct Sections {
    std::string question;
    std::deque<std::string> findings;
    std::string plan;
};

Sections parse_sections(std::string_view summary_text)
{
    Sections s;
    bool in_findings = false;
    for (const auto& line : text::split_lines(summary_text)) {
        if (line.starts_with(kQuestionLabel)) {
            s.question = line.substr(kQuestionLabel.size());
            in_findings = false;
        } else if (line == kFindingsLabel) {
            in_findings = true;
        } else if (line.starts_with(kPlanLabel)) {
            s.plan = line.substr(kPlanLabel.size());
            in_findings = false;
        } else if (in_findings && line.starts_with(kFindingBullet)) {
            s.findings.push_back(line.substr(kFindingBullet.size()));
        }
    }
    return s;
}

std::string render_sections(const Sections& s)
{
    std::string out = std::string(kQuestionLabel) + s.question + "\n" + std::string(kFindingsLabel) + "\n";
    for (const auto& f : s.findings)
        out += std::string(kFindingBullet) + f + "\n";
    out += std::string(kPlanLabel) + s.plan;
    return out;
}

std::string one_line(std::string_view s)
{
    std::string out;
    for (char c : s)
        out.push_back(c == '\n' || c == '\r' ? ' ' : c);
    return text::trim(out);
}

} // namespace

std::string ExtractiveSummarizer::summarize(std::string_view query, const Summary& prev,
                                            std::string_view prev_response, const TrajStep& step) const
{
    Sections s = parse_sections(prev.text);
    s.question = one_line(query);

    auto anchor = text::content_tokens(query);
    for (const auto& f : s.findings)
        anchor.merge(text::content_tokens(f));

    for (auto& sentence : text::split_sentences(prev_response)) {
        auto tokens = text::content_tokens(sentence);
        bool relevant = false;
        for (const auto& tok : tokens) {
            if (anchor.contains(tok)) {
                relevant = true;
                break;
            }
        }
        if (!relevant)
            continue;
        sentence = one_line(sentence);
        if (std::find(s.findings.begin(), s.findings.end(), sentence) != s.findings.end())
            continue;
        anchor.merge(tokens);
        s.findings.push_back(std::move(sentence));
    }

    auto sentences = text::split_sentences(step.reasoning);
    std::string plan = sentences.empty() ? std::string() : one_line(sentences.back());
    s.plan = plan + (plan.empty() ? "" : " ") + "Next action: " + step.action.render();

    auto rendered = render_sections(s);
    while (rendered.size() > bound_ && !s.findings.empty()) {
        s.findings.pop_front();
        rendered = render_sections(s);
    }
    if (rendered.size() > bound_) {
        // the fixed sections alone overflow; shorten the plan, then the question
        auto fixed = rendered.size() - s.plan.size();
        s.plan = fixed < bound_ ? text::utf8_truncate(s.plan, bound_ - fixed) : std::string();
        rendered = render_sections(s);
        if (rendered.size() > bound_)
            rendered = text::utf8_truncate(rendered, bound_);
    }
    return rendered;
}

std::string RemoteSummarizer::summarize(std::string_view query, const Summary& prev, std::string_view prev_response,
                                        const TrajStep& step) const
{
    ChatRequest req;
    req.messages.push_back({"system", "Update the running summary of an information-seeking trajectory. Keep only "
                                      "the essential findings and the current plan. Reply with the new summary "
                                      "only, at most " +
                                          std::to_string(bound_) + " characters."});
    req.messages.push_back(
        {"user", render_summary_input({std::string(query), prev.text, std::string(prev_response), step.reasoning,
                                       step.action})});
    return text::utf8_truncate(text::trim(backend_->complete(req).content), bound_);
}

Summary update_summary(std::string_view query, const Summary& prev, std::string_view prev_response,
                       const TrajStep& step, const SummaryBackend& backend)
{
    if (prev.step_index != step.step_index - 1)
        throw Error(Errc::IndexGap, "summary through step " + std::to_string(prev.step_index) +
                                        " cannot absorb step " + std::to_string(step.step_index));
    auto text = backend.summarize(query, prev, prev_response, step);
    if (text.size() > backend.bound())
        text = text::utf8_truncate(text, backend.bound());
    return Summary{std::move(text), step.step_index};
}

std::vector<Summary> summarize_trajectory(std::string_view query, const Trajectory& traj,
                                          const SummaryBackend& backend)
{
    std::vector<Summary> out;
    Summary h;
    std::string prev_response;
    for (const auto& step : traj.steps) {
        h = update_summary(query, h, prev_response, step, backend);
        out.push_back(h);
        prev_response = step.response.value_or("");
    }
    return out;
}

namespace {

constexpr std::pair<std::string_view, std::string_view> kTags[] = {
    {"<question>\n", "\n</question>\n"},
    {"<previous_summary>\n", "\n</previous_summary>\n"},
    {"<latest_observation>\n", "\n</latest_observation>\n"},
    {"<reasoning>\n", "\n</reasoning>\n"},
    {"<action>\n", "\n</action>\n"},
};

} // namespace

std::string render_summary_input(const SummaryInputs& in)
{
    const std::string fields[] = {
        in.query,
        in.prev_summary.empty() ? std::string(kNoPriorSummary) : in.prev_summary,
        in.prev_response,
        in.reasoning,
        in.action.render(),
    };
    std::string out;
    for (std::size_t i = 0; i < std::size(kTags); ++i)
        out += std::string(kTags[i].first) + fields[i] + std::string(kTags[i].second);
    return out;
}

SummaryInputs parse_summary_input(std::string_view rendered)
{
    std::string fields[std::size(kTags)];
    std::size_t pos = 0;
    for (std::size_t i = 0; i < std::size(kTags); ++i) {
        const auto& [open, close] = kTags[i];
        if (rendered.substr(pos, open.size()) != open)
            throw SchemaViolation("input_context", "expected " + text::trim(open));
        pos += open.size();
        // the closing tag of the last field is anchored at the end of the text
        auto end = i + 1 == std::size(kTags) ? rendered.rfind(close) : rendered.find(close, pos);
        if (end == std::string_view::npos || end < pos)
            throw SchemaViolation("input_context", "unterminated " + text::trim(open));
        fields[i] = std::string(rendered.substr(pos, end - pos));
        pos = end + close.size();
    }
    SummaryInputs out;
    out.query = fields[0];
    out.prev_summary = fields[1] == kNoPriorSummary ? std::string() : fields[1];
    out.prev_response = fields[2];
    out.reasoning = fields[3];
    auto space = fields[4].find(' ');
    out.action.tool_name = fields[4].substr(0, space);
    if (space != std::string::npos) {
        try {
            auto args = json::parse(fields[4].substr(space + 1));
            out.action.arguments = args.get<std::map<std::string, std::string>>();
        } catch (const json::exception& e) {
            throw SchemaViolation("input_context.action", e.what());
        }
    }
    return out;
}

SftRecord emit_sft_record(std::string_view query, const Summary& prev, std::string_view prev_response,
                          const TrajStep& step, const Summary& target)
{
    return SftRecord{render_summary_input({std::string(query), prev.text, std::string(prev_response), step.reasoning,
                                           step.action}),
                     target.text};
}

json to_json(const SftRecord& rec)
{
    return json{{"input_context", rec.input_context}, {"target_summary", rec.target_summary}};
}

SftRecord sft_record_from_json(const json& j)
{
    return SftRecord{records::require_string(j, "input_context", ""), records::require_string(j, "target_summary", "")};
}

const Summary* SummaryCache::find(const std::string& task_id, int t) const
{
    auto it = entries_.find({task_id, t});
    return it == entries_.end() ? nullptr : &it->second;
}

void SummaryCache::put(const std::string& task_id, Summary summary)
{
    auto t = summary.step_index;
    entries_.insert_or_assign({task_id, t}, std::move(summary));
}

void SummaryCache::save(const std::filesystem::path& path) const
{
    std::vector<json> rows;
    for (const auto& [key, s] : entries_)
        rows.push_back({{"task_id", key.first}, {"t", key.second}, {"summary", s.text}});
    records::write_jsonl(path, records::schema::summaries, rows);
}

SummaryCache SummaryCache::load(const std::filesystem::path& path)
{
    SummaryCache cache;
    for (const auto& row : records::read_jsonl(path, records::schema::summaries)) {
        auto t = static_cast<int>(records::require_integer(row, "t", ""));
        cache.put(records::require_string(row, "task_id", ""), Summary{records::require_string(row, "summary", ""), t});
    }
    return cache;
}

} // namespace isprm
