#include "sizer/advisor.hpp"

#include <cstdlib>
#include <fstream>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "sizer/error.hpp"

namespace sizer {

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AdvisorUnavailable("cannot open advisor fixture '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw AdvisorUnavailable("advisor fixture '" + path + "' is not valid JSON: " + e.what());
  }
}

bool meta_matches(const json& match, const json& meta) {
  for (const auto& [k, v] : match.items()) {
    if (!meta.contains(k) || meta.at(k) != v) return false;
  }
  return true;
}

}  // namespace

ScriptedAdvisor::ScriptedAdvisor(json fixture) {
  const json& list = fixture.is_array() ? fixture : fixture.at("entries");
  for (const auto& e : list) {
    if (!e.contains("match") || !e.at("match").is_object() || !e.contains("response"))
      throw SchemaError("advisor fixture entries need an object 'match' and a 'response'");
    entries_.push_back(e);
  }
}

ScriptedAdvisor ScriptedAdvisor::from_file(const std::string& path) { return ScriptedAdvisor(read_json_file(path)); }

json ScriptedAdvisor::ask(const json& request) {
  const json meta = request.value("meta", json::object());
  for (const auto& e : entries_)
    if (meta_matches(e.at("match"), meta)) return e.at("response");
  throw AdvisorUnavailable("no scripted response for request " + meta.dump());
}

OpenAiAdvisor::OpenAiAdvisor(OpenAiConfig cfg) : cfg_(std::move(cfg)) {}

json OpenAiAdvisor::ask(const json& request) {
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (!key || !*key) throw AdvisorUnavailable("environment variable " + cfg_.api_key_env + " is not set");

  json user = {{"context", request.value("context", json::object())},
               {"task", request.value("task", "")},
               {"response_schema", request.value("response_schema", json::object())}};
  json body = {{"model", cfg_.model},
               {"temperature", cfg_.temperature},
               {"response_format", {{"type", "json_object"}}},
               {"messages",
                {{{"role", "system"}, {"content", request.value("system", "")}},
                 {{"role", "user"}, {"content", user.dump()}}}}};

  httplib::Result res;
  try {
    httplib::Client client(cfg_.base_url);
    client.set_read_timeout(cfg_.timeout);
    client.set_write_timeout(cfg_.timeout);
    client.set_bearer_token_auth(key);
    res = client.Post(cfg_.path, body.dump(), "application/json");
  } catch (const std::exception& e) {
    throw AdvisorUnavailable(std::string("advisor endpoint error: ") + e.what());
  }
  if (!res) throw AdvisorUnavailable("advisor endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw AdvisorUnavailable("advisor endpoint returned HTTP " + std::to_string(res->status));
  try {
    auto reply = json::parse(res->body);
    std::string content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    auto parsed = json::parse(content, nullptr, false);
    return parsed.is_discarded() ? json(content) : parsed;
  } catch (const json::exception& e) {
    throw AdvisorUnavailable(std::string("unexpected chat-completions reply: ") + e.what());
  }
}

json RecordingAdvisor::ask(const json& request) {
  json response = inner_.ask(request);
  json match = request.value("meta", json::object());
  entries_.push_back({{"match", match}, {"response", response}});
  return response;
}

void RecordingAdvisor::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write advisor recording '" + path + "'");
  out << entries_.dump(1) << "\n";
}

json AdvisorSession::call(const json& request) {
  TranscriptEntry entry;
  entry.request = request;
  const json meta = request.value("meta", json::object());
  entry.round = meta.value("round", 0);
  entry.purpose = meta.value("purpose", "");
  if (!advisor_) {
    entry.error = "no advisor configured";
    transcript_.push_back(std::move(entry));
    throw AdvisorUnavailable("no advisor configured");
  }
  try {
    entry.response = advisor_->ask(request);
  } catch (const std::exception& e) {
    entry.error = e.what();
    transcript_.push_back(std::move(entry));
    throw;
  }
  transcript_.push_back(entry);
  return entry.response;
}

json AdvisorSession::transcript_json() const {
  json out = json::array();
  for (const auto& e : transcript_) {
    json j = {{"round", e.round}, {"purpose", e.purpose}, {"request", e.request}, {"response", e.response}};
    if (!e.error.empty()) j["error"] = e.error;
    out.push_back(j);
  }
  return out;
}

json make_request(std::string system, json context, std::string task, json response_schema, std::string purpose,
                  int round, std::string circuit) {
  return {{"system", std::move(system)},
          {"context", std::move(context)},
          {"task", std::move(task)},
          {"response_schema", std::move(response_schema)},
          {"meta", {{"purpose", std::move(purpose)}, {"round", round}, {"circuit", std::move(circuit)}}}};
}

void AdvisorStack::flush() const {
  if (recorder && !record_path.empty()) recorder->save(record_path);
}

AdvisorStack make_advisor(const std::string& selector) {
  AdvisorStack stack;
  if (selector.empty() || selector == "none") return stack;
  if (selector.rfind("stub:", 0) == 0) {
    stack.inner = std::make_unique<ScriptedAdvisor>(ScriptedAdvisor::from_file(selector.substr(5)));
    return stack;
  }
  if (selector.rfind("record:", 0) == 0) {
    auto rest = selector.substr(7);
    auto colon = rest.find(':');
    if (colon == std::string::npos) throw ConfigError("record advisor needs 'record:<out.json>:<advisor>'");
    auto inner = make_advisor(rest.substr(colon + 1));
    if (!inner.inner) throw ConfigError("record advisor needs an inner advisor");
    stack.inner = std::move(inner.inner);
    stack.recorder = std::make_unique<RecordingAdvisor>(*stack.inner);
    stack.record_path = rest.substr(0, colon);
    return stack;
  }
  if (selector == "openai" || selector.rfind("openai:", 0) == 0) {
    OpenAiConfig cfg;
    if (selector.size() > 7) {
      auto spec = selector.substr(7);
      auto at = spec.find('@');
      cfg.model = spec.substr(0, at);
      if (at != std::string::npos) cfg.base_url = spec.substr(at + 1);
    }
    stack.inner = std::make_unique<OpenAiAdvisor>(cfg);
    return stack;
  }
  throw ConfigError("unknown advisor selector '" + selector + "'");
}

}  // namespace sizer
