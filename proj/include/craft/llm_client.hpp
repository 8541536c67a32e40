#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "craft/error.hpp"
#include "craft/priors.hpp"
#include "craft/provider.hpp"

namespace craft {

// Replays recorded responses keyed by verb label. `path` is either a
// directory of <verb>.json files or one JSON object mapping verb -> response.
class FixtureLlmClient final : public LlmClient {
 public:
  explicit FixtureLlmClient(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) {
      for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (entry.path().extension() != ".json") continue;
        responses_[entry.path().stem().string()] = slurp(entry.path());
      }
    } else {
      const auto doc = nlohmann::json::parse(slurp(path));
      if (!doc.is_object()) throw FormatError("LLM fixture must be a JSON object keyed by verb");
      for (const auto& [verb, response] : doc.items()) responses_[verb] = response.dump();
    }
  }

  explicit FixtureLlmClient(std::map<std::string, std::string> responses) : responses_(std::move(responses)) {}

  std::string request(const std::string& request_json) const override {
    const auto req = nlohmann::json::parse(request_json);
    const auto verb = req.at("verb").get<std::string>();
    const auto it = responses_.find(verb);
    if (it == responses_.end()) throw LlmPriorError("no recorded response for verb '" + verb + "'", "");
    return it->second;
  }

 private:
  static std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FormatError("cannot open " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  std::map<std::string, std::string> responses_;
};

// Live endpoint: POSTs the request JSON to `<base_url><path>`.
class HttpLlmClient final : public LlmClient {
 public:
  HttpLlmClient(std::string base_url, std::string path = "/objects", RetryPolicy retry = {})
      : base_url_(std::move(base_url)), path_(std::move(path)), retry_(retry) {}

  std::string request(const std::string& request_json) const override {
    return detail::post_json(base_url_, path_, nlohmann::json::parse(request_json), retry_,
                             std::chrono::seconds(60))
        .dump();
  }

 private:
  std::string base_url_;
  std::string path_;
  RetryPolicy retry_;
};

}  // namespace craft
