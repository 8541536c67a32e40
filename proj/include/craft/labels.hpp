#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "craft/error.hpp"
#include "craft/util.hpp"

namespace craft {

// Verb <-> category affordance labels.
//
// File format (UTF-8, tab-separated):
//   #verbs=<int> #categories=<int>      required header, first non-blank line
//   @verb <TAB> <id>                    optional declarations; when present,
//   @category <TAB> <id>                pairs must reference declared ids
//   @image <TAB> <category> <TAB> <ref> optional image refs per category
//   <verb> <TAB> <category>             affordance pair
// Other '#' lines are comments.
struct LabelTable {
  std::vector<std::string> verbs;       // sorted
  std::vector<std::string> categories;  // sorted
  std::set<std::pair<std::string, std::string>> affords;
  std::map<std::string, std::vector<std::string>> image_index;
  std::size_t duplicate_pairs = 0;
  std::vector<std::string> excluded_verbs;  // lacking positives or negatives

  bool has_pair(std::string_view verb, std::string_view category) const {
    return affords.contains({std::string(verb), std::string(category)});
  }

  std::vector<std::string> affording(std::string_view verb) const {
    std::vector<std::string> out;
    for (const auto& c : categories) {
      if (has_pair(verb, c)) out.push_back(c);
    }
    return out;
  }

  std::vector<std::string> non_affording(std::string_view verb) const {
    std::vector<std::string> out;
    for (const auto& c : categories) {
      if (!has_pair(verb, c)) out.push_back(c);
    }
    return out;
  }

  std::vector<std::string> eligible_verbs() const {
    std::vector<std::string> out;
    for (const auto& v : verbs) {
      if (std::find(excluded_verbs.begin(), excluded_verbs.end(), v) == excluded_verbs.end()) out.push_back(v);
    }
    return out;
  }

  const std::vector<std::string>& images(const std::string& category) const {
    static const std::vector<std::string> none;
    const auto it = image_index.find(category);
    return it == image_index.end() ? none : it->second;
  }

  // Category an image ref belongs to (reverse of image_index).
  std::string category_of(std::string_view ref) const {
    for (const auto& [cat, refs] : image_index) {
      if (std::find(refs.begin(), refs.end(), ref) != refs.end()) return cat;
    }
    return {};
  }
};

inline std::string synthetic_image_ref(std::string_view category, std::size_t k) {
  return "image:" + std::string(category) + ":" + std::to_string(k);
}

struct LabelLoadOptions {
  // Synthetic refs generated per category lacking @image lines.
  std::size_t synthetic_images_per_category = 1;
};

inline void finalize_labels(LabelTable& t, const LabelLoadOptions& opts) {
  for (const auto& c : t.categories) {
    auto& refs = t.image_index[c];
    if (refs.empty()) {
      for (std::size_t k = 0; k < std::max<std::size_t>(1, opts.synthetic_images_per_category); ++k) {
        refs.push_back(synthetic_image_ref(c, k));
      }
    }
  }
  t.excluded_verbs.clear();
  for (const auto& v : t.verbs) {
    const auto pos = t.affording(v).size();
    if (pos == 0 || pos == t.categories.size()) t.excluded_verbs.push_back(v);
  }
}

inline LabelTable load_affordance_labels(std::istream& in, const LabelLoadOptions& opts = {}) {
  LabelTable t;
  std::set<std::string> declared_verbs, declared_categories, seen_verbs, seen_categories;
  struct Pair {
    std::string verb, category;
    std::size_t line;
  };
  std::vector<Pair> pairs;
  std::map<std::string, std::vector<std::string>> images;
  std::size_t header_verbs = 0, header_categories = 0, header_line = 0;
  bool have_header = false;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty()) continue;
    if (!have_header) {
      if (!starts_with(s, "#verbs=")) throw LoadError("missing '#verbs=<int> #categories=<int>' header", lineno);
      const auto fields = split(s, ' ');
      std::optional<std::size_t> nv, nc;
      for (auto f : fields) {
        f = trim(f);
        if (starts_with(f, "#verbs=")) nv = parse_int<std::size_t>(f.substr(7));
        if (starts_with(f, "#categories=")) nc = parse_int<std::size_t>(f.substr(12));
      }
      if (!nv || !nc) throw LoadError("malformed header", lineno);
      header_verbs = *nv;
      header_categories = *nc;
      header_line = lineno;
      have_header = true;
      continue;
    }
    if (s.front() == '#') continue;
    const auto cols = split(s, '\t');
    if (s.front() == '@') {
      const auto kind = trim(cols[0]);
      if (kind == "@verb" && cols.size() == 2) {
        declared_verbs.emplace(trim(cols[1]));
      } else if (kind == "@category" && cols.size() == 2) {
        declared_categories.emplace(trim(cols[1]));
      } else if (kind == "@image" && cols.size() == 3) {
        images[std::string(trim(cols[1]))].emplace_back(trim(cols[2]));
      } else {
        throw LoadError("malformed declaration", lineno);
      }
      continue;
    }
    if (cols.size() != 2) throw LoadError("expected 'verb<TAB>category'", lineno);
    Pair p{std::string(trim(cols[0])), std::string(trim(cols[1])), lineno};
    if (p.verb.empty() || p.category.empty()) throw LoadError("empty id", lineno);
    pairs.push_back(std::move(p));
  }
  if (!have_header) throw LoadError("empty label file", lineno);

  for (const auto& p : pairs) {
    if (!declared_verbs.empty() && !declared_verbs.contains(p.verb)) throw LoadError("unknown verb '" + p.verb + "'", p.line);
    if (!declared_categories.empty() && !declared_categories.contains(p.category)) {
      throw LoadError("unknown category '" + p.category + "'", p.line);
    }
    seen_verbs.insert(p.verb);
    seen_categories.insert(p.category);
    if (!t.affords.emplace(p.verb, p.category).second) ++t.duplicate_pairs;
  }
  const auto& verbs = declared_verbs.empty() ? seen_verbs : declared_verbs;
  const auto& cats = declared_categories.empty() ? seen_categories : declared_categories;
  t.verbs.assign(verbs.begin(), verbs.end());
  t.categories.assign(cats.begin(), cats.end());
  for (auto& [cat, refs] : images) {
    if (!cats.contains(cat)) throw LoadError("@image for unknown category '" + cat + "'", header_line);
    t.image_index[cat] = std::move(refs);
  }
  if (t.verbs.size() != header_verbs || t.categories.size() != header_categories) {
    throw LoadError("header declares " + std::to_string(header_verbs) + " verbs / " +
                        std::to_string(header_categories) + " categories but file has " +
                        std::to_string(t.verbs.size()) + " / " + std::to_string(t.categories.size()),
                    header_line);
  }
  finalize_labels(t, opts);
  return t;
}

inline LabelTable load_affordance_labels(const std::filesystem::path& path, const LabelLoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return load_affordance_labels(in, opts);
}

inline void write_affordance_labels(std::ostream& out, const LabelTable& t) {
  out << "#verbs=" << t.verbs.size() << " #categories=" << t.categories.size() << '\n';
  for (const auto& v : t.verbs) out << "@verb\t" << v << '\n';
  for (const auto& c : t.categories) out << "@category\t" << c << '\n';
  for (const auto& [v, c] : t.affords) out << v << '\t' << c << '\n';
}

// ---------------------------------------------------------------------------
// episodes

struct Episode {
  std::string verb;
  std::vector<std::string> candidates;  // image refs
  std::vector<std::string> categories;  // category of each candidate
  std::vector<std::size_t> relevant;    // sorted candidate indices
  std::size_t n_pos = 1;
  std::uint64_t seed = 0;

  friend bool operator==(const Episode&, const Episode&) = default;
};

// Stable per-episode seed, independent of evaluation order.
inline std::uint64_t episode_seed(std::uint64_t base_seed, std::string_view verb, std::size_t episode_index,
                                  std::size_t n, std::size_t n_pos) {
  Fnv1a h;
  h.u64(base_seed).field(verb).u64(episode_index).u64(n).u64(n_pos);
  return splitmix64(h.value());
}

// n_pos images from distinct affording categories plus n - n_pos from
// distinct non-affording categories, shuffled.
inline Episode sample_episode(const LabelTable& t, std::string_view verb, std::size_t n, std::size_t n_pos,
                              std::uint64_t seed) {
  const std::string v(verb);
  if (n_pos < 1 || n_pos > 2) throw ConfigError("n_pos must be 1 or 2");
  if (n <= n_pos) throw ConfigError("n must exceed n_pos");
  if (std::find(t.verbs.begin(), t.verbs.end(), v) == t.verbs.end()) throw SamplingError(v, "unknown verb");
  const auto pos = t.affording(v);
  const auto neg = t.non_affording(v);
  if (pos.size() < n_pos) {
    throw SamplingError(v, "needs " + std::to_string(n_pos) + " affording categories, has " + std::to_string(pos.size()));
  }
  if (neg.size() < n - n_pos) {
    throw SamplingError(v, "needs " + std::to_string(n - n_pos) + " distractor categories, has " +
                               std::to_string(neg.size()));
  }

  Rng rng(seed);
  auto cats = rng.sample(pos, n_pos);
  const auto distractors = rng.sample(neg, n - n_pos);
  cats.insert(cats.end(), distractors.begin(), distractors.end());
  rng.shuffle(cats);

  Episode ep;
  ep.verb = v;
  ep.n_pos = n_pos;
  ep.seed = seed;
  ep.categories = cats;
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const auto& refs = t.images(cats[i]);
    if (refs.empty()) throw SamplingError(v, "category '" + cats[i] + "' has no images");
    ep.candidates.push_back(refs[rng.below(refs.size())]);
    if (t.has_pair(v, cats[i])) ep.relevant.push_back(i);
  }
  return ep;
}

inline bool episode_feasible(const LabelTable& t, std::string_view verb, std::size_t n, std::size_t n_pos) {
  return t.affording(verb).size() >= n_pos && t.non_affording(verb).size() >= n - n_pos;
}

}  // namespace craft
