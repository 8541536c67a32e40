#pragma once

// Synthetic worlds for offline evaluation: generated label tables, embedding
// stores with controlled geometry, and noisy priors.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "craft/benchmark.hpp"
#include "craft/embedding.hpp"
#include "craft/grounding.hpp"
#include "craft/labels.hpp"
#include "craft/provider.hpp"
#include "craft/util.hpp"

namespace craft {

struct LabelGenOptions {
  std::size_t verbs = 50;
  std::size_t categories = 216;
  std::size_t affording_per_verb = 12;
  std::size_t images_per_category = 3;
  std::uint64_t seed = 0;
};

inline std::string synthetic_verb_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "verb_%02zu", i);
  return buf;
}

inline std::string synthetic_category_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "object_%03zu", i);
  return buf;
}

inline LabelTable generate_labels(const LabelGenOptions& opts) {
  if (opts.affording_per_verb == 0 || opts.affording_per_verb >= opts.categories) {
    throw ConfigError("affording_per_verb must be in [1, categories)");
  }
  LabelTable t;
  for (std::size_t v = 0; v < opts.verbs; ++v) t.verbs.push_back(synthetic_verb_id(v));
  for (std::size_t c = 0; c < opts.categories; ++c) t.categories.push_back(synthetic_category_id(c));
  Rng rng(opts.seed);
  for (const auto& v : t.verbs) {
    for (const auto& c : rng.sample(t.categories, opts.affording_per_verb)) t.affords.emplace(v, c);
  }
  finalize_labels(t, {opts.images_per_category});
  return t;
}

inline std::string category_text_prompt(std::string_view category) {
  return render_prompt(kTemplatePhoto, concept_label(normalize_concept_id(category)), "");
}

inline std::string verb_affordance_prompt(std::string_view verb) {
  return render_prompt(kTemplateAffordance, "", concept_label(normalize_concept_id(verb)));
}

namespace detail {

using Vec = std::vector<double>;

inline Vec gaussian(Rng& rng, std::size_t d, double scale = 1.0) {
  Vec v(d);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline Vec unit(Vec v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  for (auto& x : v) x /= n;
  return v;
}

inline void axpy(Vec& y, double a, const Vec& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// Each image embedding is exactly its category's "a photo of a ..." text
// embedding; category texts are random unit vectors.
inline std::shared_ptr<EmbeddingStore> identity_world(const LabelTable& t, std::size_t dim, std::uint64_t seed) {
  auto store = std::make_shared<EmbeddingStore>(dim);
  Rng rng(seed);
  for (const auto& c : t.categories) {
    const auto v = detail::gaussian(rng, dim);
    store->insert(text_key(category_text_prompt(c)), EmbeddingVector(v));
    for (const auto& ref : t.images(c)) store->insert(image_key(ref), EmbeddingVector(v));
  }
  for (const auto& v : t.verbs) store->insert(text_key(verb_affordance_prompt(v)), EmbeddingVector(detail::gaussian(rng, dim)));
  return store;
}

struct MarginWorldOptions {
  std::size_t dim = 64;
  double beta = 1.5;    // image noise scale (per-coordinate sd = beta / sqrt(dim))
  double delta = 0.15;  // target margin
  std::uint64_t seed = 0;
};

struct MarginWorld {
  std::shared_ptr<EmbeddingStore> store;
  double alpha = 0.0;   // weight of the shared verb directions in category texts
  double margin = 0.0;  // achieved margin
};

// Category text  t_c = unit(u_c + alpha * sum of a_v over verbs c affords)
// Image          x   = unit(t_c + noise)
// Verb prompt        = a_v
// alpha is bisected so that, averaged over verbs, the cosine between an
// affording category's text and images of the verb's other affording
// categories exceeds its cosine to distractor images by `delta`.
inline MarginWorld margin_world(const LabelTable& t, const MarginWorldOptions& opts) {
  using detail::Vec;
  const std::size_t d = opts.dim;
  const std::size_t nc = t.categories.size();
  Rng rng(opts.seed);

  std::vector<Vec> verb_dir;
  for (std::size_t v = 0; v < t.verbs.size(); ++v) verb_dir.push_back(detail::unit(detail::gaussian(rng, d)));
  std::vector<Vec> base;
  for (std::size_t c = 0; c < nc; ++c) base.push_back(detail::unit(detail::gaussian(rng, d)));
  std::vector<std::vector<Vec>> noise(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t k = 0; k < t.images(t.categories[c]).size(); ++k) {
      noise[c].push_back(detail::gaussian(rng, d, opts.beta / std::sqrt(static_cast<double>(d))));
    }
  }
  std::vector<Vec> shared(nc, Vec(d, 0.0));
  for (std::size_t v = 0; v < t.verbs.size(); ++v) {
    for (std::size_t c = 0; c < nc; ++c) {
      if (t.has_pair(t.verbs[v], t.categories[c])) detail::axpy(shared[c], 1.0, verb_dir[v]);
    }
  }

  std::vector<Vec> text(nc), mean_image(nc);
  std::vector<std::vector<Vec>> images(nc);
  const auto build = [&](double alpha) {
    for (std::size_t c = 0; c < nc; ++c) {
      Vec tc = base[c];
      detail::axpy(tc, alpha, shared[c]);
      text[c] = detail::unit(std::move(tc));
      images[c].clear();
      mean_image[c] = Vec(d, 0.0);
      for (const auto& nz : noise[c]) {
        Vec x = text[c];
        detail::axpy(x, 1.0, nz);
        images[c].push_back(detail::unit(std::move(x)));
        detail::axpy(mean_image[c], 1.0 / static_cast<double>(noise[c].size()), images[c].back());
      }
    }
  };
  // Cosine is linear in the (unit) image, so means over images reduce to dots with mean images.
  const auto margin = [&]() {
    double total = 0.0;
    std::size_t counted = 0;
    for (const auto& v : t.verbs) {
      std::vector<std::size_t> pos, neg;
      for (std::size_t c = 0; c < nc; ++c) (t.has_pair(v, t.categories[c]) ? pos : neg).push_back(c);
      if (pos.size() < 2 || neg.empty()) continue;
      Vec pos_sum(d, 0.0), neg_sum(d, 0.0), text_sum(d, 0.0);
      double self = 0.0;
      for (auto c : pos) {
        detail::axpy(pos_sum, 1.0, mean_image[c]);
        detail::axpy(text_sum, 1.0, text[c]);
        self += detail::dot(text[c], mean_image[c]);
      }
      for (auto c : neg) detail::axpy(neg_sum, 1.0, mean_image[c]);
      const double np = static_cast<double>(pos.size());
      const double same = (detail::dot(text_sum, pos_sum) - self) / (np * (np - 1.0));
      const double other = detail::dot(text_sum, neg_sum) / (np * static_cast<double>(neg.size()));
      total += same - other;
      ++counted;
    }
    if (counted == 0) throw ConfigError("margin world needs verbs with >= 2 affording categories");
    return total / static_cast<double>(counted);
  };

  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    build(mid);
    (margin() < opts.delta ? lo : hi) = mid;
  }
  MarginWorld world;
  world.alpha = 0.5 * (lo + hi);
  build(world.alpha);
  world.margin = margin();

  world.store = std::make_shared<EmbeddingStore>(d);
  for (std::size_t c = 0; c < nc; ++c) {
    const auto& cat = t.categories[c];
    world.store->insert(text_key(category_text_prompt(cat)), EmbeddingVector(text[c]));
    const auto& refs = t.images(cat);
    for (std::size_t k = 0; k < refs.size(); ++k) world.store->insert(image_key(refs[k]), EmbeddingVector(images[c][k]));
  }
  for (std::size_t v = 0; v < t.verbs.size(); ++v) {
    world.store->insert(text_key(verb_affordance_prompt(t.verbs[v])), EmbeddingVector(verb_dir[v]));
  }
  return world;
}

struct NoisyPriorOptions {
  double sigma = 0.5;               // log-normal multiplicative noise
  double spurious_fraction = 0.2;   // share of prior objects that do not afford the verb
  std::uint64_t seed = 0;
};

// Every affording category plus spurious non-affording ones, with scores
// exp(sigma * z), normalized.
inline std::shared_ptr<FixedPriorSource> noisy_priors(const LabelTable& t, const NoisyPriorOptions& opts) {
  if (!(opts.spurious_fraction >= 0.0 && opts.spurious_fraction < 1.0)) {
    throw ConfigError("spurious_fraction must be in [0, 1)");
  }
  auto source = std::make_shared<FixedPriorSource>();
  Rng rng(opts.seed);
  for (const auto& v : t.verbs) {
    const auto pos = t.affording(v);
    const auto neg = t.non_affording(v);
    const auto n_spurious = static_cast<std::size_t>(
        std::llround(opts.spurious_fraction * static_cast<double>(pos.size()) / (1.0 - opts.spurious_fraction)));
    auto objects = pos;
    for (const auto& c : rng.sample(neg, n_spurious)) objects.push_back(c);
    std::vector<PriorEntry> raw;
    for (const auto& o : objects) raw.push_back({normalize_concept_id(o), std::exp(opts.sigma * rng.normal()), 1.0});
    source->set(PriorSet::from_raw(normalize_concept_id(v), std::move(raw), PriorProvenance::conceptnet, 0));
  }
  return source;
}

}  // namespace craft
