#pragma once

#include <string>
#include <string_view>

#include "craft/util.hpp"

namespace craft {

enum class Pos { noun, verb, adjective, adverb, unknown };

inline std::string_view to_string(Pos p) {
  switch (p) {
    case Pos::noun: return "noun";
    case Pos::verb: return "verb";
    case Pos::adjective: return "adjective";
    case Pos::adverb: return "adverb";
    case Pos::unknown: break;
  }
  return "unknown";
}

inline Pos pos_from_string(std::string_view s) {
  if (s == "noun") return Pos::noun;
  if (s == "verb") return Pos::verb;
  if (s == "adjective") return Pos::adjective;
  if (s == "adverb") return Pos::adverb;
  return Pos::unknown;
}

// ConceptNet URI POS tags: n, v, a (adjective), s (satellite adjective), r (adverb).
inline Pos pos_from_tag(std::string_view tag) {
  if (tag == "n") return Pos::noun;
  if (tag == "v") return Pos::verb;
  if (tag == "a" || tag == "s") return Pos::adjective;
  if (tag == "r") return Pos::adverb;
  return Pos::unknown;
}

struct ConceptRef {
  std::string language;
  std::string term;
  Pos pos = Pos::unknown;

  std::string id() const { return "/c/" + language + "/" + term; }
};

namespace detail {

inline std::string normalize_term(std::string_view raw) {
  std::string lowered = to_lower_ascii(trim(raw));
  std::string out;
  out.reserve(lowered.size());
  bool pending_sep = false;
  for (char c : lowered) {
    if (c == ' ' || c == '\t' || c == '_') {
      pending_sep = !out.empty();
      continue;
    }
    if (pending_sep) {
      out.push_back('_');
      pending_sep = false;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

// Parses "/c/en/knife/n/...", "/c/en/knife", or a bare term ("Ice cream").
// Returns an empty term when the input cannot name a concept.
inline ConceptRef parse_concept(std::string_view raw, std::string_view default_language = "en") {
  ConceptRef ref;
  const auto s = trim(raw);
  if (starts_with(s, "/c/")) {
    const auto parts = split(s.substr(3), '/');
    ref.language = to_lower_ascii(trim(parts[0]));
    if (parts.size() > 1) ref.term = detail::normalize_term(parts[1]);
    if (parts.size() > 2) ref.pos = pos_from_tag(trim(parts[2]));
    return ref;
  }
  ref.language = std::string(default_language);
  ref.term = detail::normalize_term(s);
  return ref;
}

// Canonical concept key: "/c/<lang>/<term>" with lowercase, underscore-joined
// words. Idempotent.
inline std::string normalize_concept_id(std::string_view raw, std::string_view default_language = "en") {
  return parse_concept(raw, default_language).id();
}

inline std::string concept_term(std::string_view id) {
  return parse_concept(id).term;
}

// Display form: "/c/en/ice_cream" -> "ice cream".
inline std::string concept_label(std::string_view id) {
  std::string term = concept_term(id);
  for (auto& c : term) {
    if (c == '_') c = ' ';
  }
  return term;
}

inline std::size_t token_count(std::string_view label) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : label) {
    const bool sep = c == ' ' || c == '_';
    if (!sep && !in_token) ++n;
    in_token = !sep;
  }
  return n;
}

struct ConceptNode {
  std::string id;
  std::string label;
  Pos pos = Pos::unknown;

  friend bool operator==(const ConceptNode&, const ConceptNode&) = default;
};

}  // namespace craft
