#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sizer {

/// Something that answers structured advisor requests with JSON.
///
/// Requests look like
/// `{system, context:{hierarchy_json, focus_items, circuit_text, ...}, task, response_schema, meta:{purpose, round, circuit, repair}}`.
/// Implementations throw AdvisorUnavailable when no answer can be produced.
class AdvisorHandle {
 public:
  virtual ~AdvisorHandle() = default;
  virtual nlohmann::json ask(const nlohmann::json& request) = 0;
  virtual std::string id() const = 0;
};

/// Replays fixture entries `{match:{...}, response}`. An entry matches when every key of
/// `match` equals the same key of the request's `meta`; the first match wins.
class ScriptedAdvisor : public AdvisorHandle {
 public:
  explicit ScriptedAdvisor(nlohmann::json fixture);
  static ScriptedAdvisor from_file(const std::string& path);

  nlohmann::json ask(const nlohmann::json& request) override;
  std::string id() const override { return "scripted"; }

 private:
  std::vector<nlohmann::json> entries_;
};

struct OpenAiConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  double temperature = 0.5;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{120};
};

/// Client for OpenAI-compatible chat-completions endpoints. The reply content is parsed as JSON.
class OpenAiAdvisor : public AdvisorHandle {
 public:
  explicit OpenAiAdvisor(OpenAiConfig cfg);
  nlohmann::json ask(const nlohmann::json& request) override;
  std::string id() const override { return "openai:" + cfg_.model; }

 private:
  OpenAiConfig cfg_;
};

/// Forwards to another advisor and keeps every exchange as a replayable fixture.
class RecordingAdvisor : public AdvisorHandle {
 public:
  explicit RecordingAdvisor(AdvisorHandle& inner) : inner_(inner) {}
  nlohmann::json ask(const nlohmann::json& request) override;
  std::string id() const override { return "record:" + inner_.id(); }

  nlohmann::json fixture() const { return entries_; }
  void save(const std::string& path) const;

 private:
  AdvisorHandle& inner_;
  nlohmann::json entries_ = nlohmann::json::array();
};

struct TranscriptEntry {
  nlohmann::json request;
  nlohmann::json response;  // null when the call failed
  int round = 0;
  std::string purpose;
  std::string error;
};

/// Counts and logs every call made through one advisor.
class AdvisorSession {
 public:
  explicit AdvisorSession(AdvisorHandle* advisor) : advisor_(advisor) {}

  bool available() const noexcept { return advisor_ != nullptr; }
  nlohmann::json call(const nlohmann::json& request);

  const std::vector<TranscriptEntry>& transcript() const noexcept { return transcript_; }
  std::size_t calls() const noexcept { return transcript_.size(); }
  nlohmann::json transcript_json() const;

 private:
  AdvisorHandle* advisor_;
  std::vector<TranscriptEntry> transcript_;
};

nlohmann::json make_request(std::string system, nlohmann::json context, std::string task,
                            nlohmann::json response_schema, std::string purpose, int round,
                            std::string circuit);

/// Builds an advisor from a selector: "stub:<fixture.json>", "openai[:<model>]", or
/// "record:<out.json>:<inner selector>". Returns null for "none".
struct AdvisorStack {
  std::unique_ptr<AdvisorHandle> inner;
  std::unique_ptr<RecordingAdvisor> recorder;
  std::string record_path;

  AdvisorHandle* get() const { return recorder ? static_cast<AdvisorHandle*>(recorder.get()) : inner.get(); }
  void flush() const;
};
AdvisorStack make_advisor(const std::string& selector);

}  // namespace sizer
