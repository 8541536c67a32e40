#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "craft/concept.hpp"
#include "craft/embedding.hpp"
#include "craft/error.hpp"
#include "craft/priors.hpp"

namespace craft {

// ---------------------------------------------------------------------------
// prompt templates

inline constexpr std::string_view kTemplatePhoto = "photo";                   // a photo of a {object}
inline constexpr std::string_view kTemplateUsedTo = "used-to";                // a {object} used to {verb}
inline constexpr std::string_view kTemplateAffordance = "affordance-oracle";  // something used to {verb}

inline bool is_known_template(std::string_view id) {
  return id == kTemplatePhoto || id == kTemplateUsedTo || id == kTemplateAffordance;
}

inline std::string render_prompt(std::string_view template_id, std::string_view object_label,
                                 std::string_view verb_label) {
  if (template_id == kTemplatePhoto) return "a photo of a " + std::string(object_label);
  if (template_id == kTemplateUsedTo) {
    return "a " + std::string(object_label) + " used to " + std::string(verb_label);
  }
  if (template_id == kTemplateAffordance) return "something used to " + std::string(verb_label);
  throw ConfigError("unknown prompt template '" + std::string(template_id) + "'");
}

// ---------------------------------------------------------------------------
// providers

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingVector embed_text(std::string_view prompt, std::string_view template_id = {}) const = 0;
  virtual EmbeddingVector embed_image(std::string_view ref) const = 0;
  virtual std::string describe() const = 0;
};

inline EmbeddingVector embed_text(const EmbeddingProvider& provider, std::string_view prompt,
                                  std::string_view template_id = {}) {
  return provider.embed_text(prompt, template_id);
}

inline EmbeddingVector embed_image(const EmbeddingProvider& provider, std::string_view ref) {
  return provider.embed_image(ref);
}

// Pure lookup over a loaded store.
class StoreProvider final : public EmbeddingProvider {
 public:
  explicit StoreProvider(std::shared_ptr<const EmbeddingStore> store, std::string origin = "memory")
      : store_(std::move(store)), origin_(std::move(origin)) {}

  EmbeddingVector embed_text(std::string_view prompt, std::string_view /*template_id*/ = {}) const override {
    return lookup(text_key(prompt));
  }
  EmbeddingVector embed_image(std::string_view ref) const override { return lookup(image_key(ref)); }
  std::string describe() const override { return "file:" + origin_; }

  const EmbeddingStore& store() const noexcept { return *store_; }

 private:
  EmbeddingVector lookup(const std::string& key) const {
    if (const auto* v = store_->find(key)) return *v;
    const auto keys = store_->keys();
    throw KeyMissingError(key, nearest_keys(key, keys, 5));
  }

  std::shared_ptr<const EmbeddingStore> store_;
  std::string origin_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{100};
};

namespace detail {

// POSTs JSON with retries on transport failures and 5xx. 4xx is not retried.
inline nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                                const RetryPolicy& retry, std::chrono::seconds timeout) {
  std::string last_error;
  const int attempts = std::max(1, retry.attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(base_url);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    const auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
      last_error = base_url + path + ": " + httplib::to_string(res.error());
    } else if (res->status >= 500) {
      last_error = base_url + path + ": HTTP " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw ProtocolError(base_url + path + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
    } else {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& ex) {
        throw ProtocolError(base_url + path + " returned invalid JSON: " + ex.what());
      }
    }
    if (attempt < attempts) std::this_thread::sleep_for(retry.base_delay * (1 << (attempt - 1)));
  }
  throw TransportError(last_error, attempts);
}

}  // namespace detail

// Client for the encoder sidecar's POST /embed. Responses are cached by
// (kind, payload, template id); the cache is the only mutable state.
class HttpProvider final : public EmbeddingProvider {
 public:
  explicit HttpProvider(std::string base_url, RetryPolicy retry = {},
                        std::chrono::seconds timeout = std::chrono::seconds(30))
      : base_url_(std::move(base_url)), retry_(retry), timeout_(timeout) {}

  EmbeddingVector embed_text(std::string_view prompt, std::string_view template_id = {}) const override {
    return fetch("text", prompt, template_id.empty() ? kTemplatePhoto : template_id);
  }
  EmbeddingVector embed_image(std::string_view ref) const override { return fetch("image", ref, {}); }
  std::string describe() const override { return "http:" + base_url_; }

  std::size_t wire_requests() const {
    std::lock_guard lock(mutex_);
    return wire_requests_;
  }

 private:
  EmbeddingVector fetch(std::string_view kind, std::string_view payload, std::string_view template_id) const {
    auto key = std::make_tuple(std::string(kind), std::string(payload), std::string(template_id));
    {
      std::lock_guard lock(mutex_);
      if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
      ++wire_requests_;
    }
    const nlohmann::json body = {{"kind", kind}, {"payload", payload}, {"template_id", template_id}};
    const auto doc = detail::post_json(base_url_, "/embed", body, retry_, timeout_);
    if (!doc.is_object() || !doc.contains("values") || !doc["values"].is_array()) {
      throw ProtocolError("/embed response lacks 'values'");
    }
    std::vector<double> values;
    for (const auto& x : doc["values"]) {
      if (!x.is_number()) throw ProtocolError("/embed response has a non-numeric value");
      values.push_back(x.get<double>());
    }
    if (doc.contains("dim") && doc["dim"].get<std::size_t>() != values.size()) {
      throw ProtocolError("/embed response dim does not match value count");
    }
    EmbeddingVector v(std::move(values));
    std::lock_guard lock(mutex_);
    return cache_.try_emplace(std::move(key), std::move(v)).first->second;
  }

  std::string base_url_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<std::string, std::string, std::string>, EmbeddingVector> cache_;
  mutable std::size_t wire_requests_ = 0;
};

// Verb similarity served by the sidecar's POST /similarity.
class HttpVerbSimilarity final : public VerbSimilarity {
 public:
  explicit HttpVerbSimilarity(std::string base_url, RetryPolicy retry = {})
      : base_url_(std::move(base_url)), retry_(retry) {}

  std::optional<double> similarity(std::string_view verb, std::string_view concept_id) const override {
    auto key = std::make_pair(concept_label(normalize_concept_id(verb)), concept_label(normalize_concept_id(concept_id)));
    {
      std::lock_guard lock(mutex_);
      if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const nlohmann::json body = {{"verb", key.first}, {"terms", {key.second}}};
    const auto doc = detail::post_json(base_url_, "/similarity", body, retry_, std::chrono::seconds(30));
    if (!doc.contains("scores") || !doc["scores"].is_array() || doc["scores"].size() != 1) {
      throw ProtocolError("/similarity response must carry one score per term");
    }
    std::optional<double> score = doc["scores"][0].get<double>();
    if (doc.contains("missing") && doc["missing"].is_array() && !doc["missing"].empty() &&
        doc["missing"][0].is_boolean() && doc["missing"][0].get<bool>()) {
      score.reset();
    }
    std::lock_guard lock(mutex_);
    cache_.emplace(std::move(key), score);
    return score;
  }

 private:
  std::string base_url_;
  RetryPolicy retry_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::string, std::string>, std::optional<double>> cache_;
};

}  // namespace craft
