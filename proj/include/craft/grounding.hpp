#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/concept.hpp"
#include "craft/embedding.hpp"
#include "craft/error.hpp"
#include "craft/priors.hpp"
#include "craft/provider.hpp"

namespace craft {

// s(o, x) for every prior object (rows) and candidate image (columns).
struct SimMatrix {
  std::vector<std::string> objects;
  std::vector<std::string> candidates;
  std::vector<double> values;  // row-major, objects.size() x candidates.size()

  std::size_t rows() const noexcept { return objects.size(); }
  std::size_t cols() const noexcept { return candidates.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row * cols() + col]; }
  double& at(std::size_t row, std::size_t col) { return values[row * cols() + col]; }

  std::optional<std::size_t> row_of(std::string_view object) const {
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (objects[i] == object) return i;
    }
    return std::nullopt;
  }
};

struct PromptSpec {
  std::string template_id = std::string(kTemplatePhoto);
};

inline std::string object_prompt(const PromptSpec& spec, std::string_view object_id, std::string_view verb_id) {
  return render_prompt(spec.template_id, concept_label(object_id), concept_label(verb_id));
}

inline SimMatrix similarity_matrix(const PriorSet& p, std::span<const std::string> candidates,
                                   const EmbeddingProvider& provider, const PromptSpec& prompt = {}) {
  SimMatrix m;
  m.objects = p.objects();
  m.candidates.assign(candidates.begin(), candidates.end());
  m.values.resize(m.rows() * m.cols());
  std::vector<EmbeddingVector> images;
  images.reserve(m.cols());
  for (const auto& c : m.candidates) images.push_back(provider.embed_image(c));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto text = provider.embed_text(object_prompt(prompt, m.objects[i], p.verb), prompt.template_id);
    for (std::size_t j = 0; j < m.cols(); ++j) m.at(i, j) = cosine(text, images[j]);
  }
  return m;
}

namespace detail {

// Row index in `m` for every entry of `p`, in entry order.
inline std::vector<std::size_t> align(const PriorSet& p, const SimMatrix& m) {
  if (p.empty()) throw AlignmentError("empty prior set");
  if (m.values.size() != m.rows() * m.cols()) throw AlignmentError("similarity matrix shape is inconsistent");
  std::unordered_map<std::string_view, std::size_t> rows;
  for (std::size_t i = 0; i < m.rows(); ++i) rows.emplace(m.objects[i], i);
  std::vector<std::size_t> out;
  out.reserve(p.size());
  for (const auto& e : p.entries) {
    const auto it = rows.find(e.object);
    if (it == rows.end()) throw AlignmentError("prior object '" + e.object + "' has no similarity row");
    out.push_back(it->second);
  }
  return out;
}

inline std::vector<double> energies(const PriorSet& p, const std::vector<std::size_t>& rows, const SimMatrix& m) {
  std::vector<double> e(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rows.size(); ++k) best = std::max(best, p.entries[k].score * m.at(rows[k], j));
    e[j] = -best;
  }
  return e;
}

}  // namespace detail

// E(v, x_j) = -max_o phi(o, v) * s(o, x_j)
inline std::vector<double> grounding_energy(const PriorSet& p, const SimMatrix& m) {
  return detail::energies(p, detail::align(p, m), m);
}

// argmin; ties go to the lowest index.
inline std::size_t select_best(std::span<const double> energies) {
  if (energies.empty()) throw NumericError("cannot select from an empty energy array");
  std::size_t best = 0;
  for (std::size_t j = 0; j < energies.size(); ++j) {
    if (std::isnan(energies[j])) throw NumericError("NaN energy at candidate " + std::to_string(j));
    if (energies[j] < energies[best]) best = j;
  }
  return best;
}

// Candidate indices by ascending energy, ties by index.
inline std::vector<std::size_t> rank_by_energy(std::span<const double> energies) {
  std::vector<std::size_t> order(energies.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return energies[a] < energies[b]; });
  return order;
}

// phi'(o) ∝ phi(o) * exp(lambda * s(o, x_top))
inline PriorSet rerank_step(const PriorSet& p, const SimMatrix& m, std::size_t top, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (top >= m.cols()) throw AlignmentError("top index " + std::to_string(top) + " out of range");
  const auto rows = detail::align(p, m);
  PriorSet next = p;
  next.iteration = p.iteration + 1;
  if (lambda == 0.0) return next;

  // Shift by the largest exponent; the common factor cancels on renormalization.
  double shift = -std::numeric_limits<double>::infinity();
  for (auto r : rows) shift = std::max(shift, lambda * m.at(r, top));
  std::vector<double> raw(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) raw[k] = p.entries[k].score * std::exp(lambda * m.at(rows[k], top) - shift);
  const auto normalized = to_simplex(raw);
  for (std::size_t k = 0; k < p.size(); ++k) next.entries[k].score = normalized[k];
  next.sort();
  return next;
}

struct LoopConfig {
  double lambda = 1.0;
  int max_iters = 10;
  double epsilon = 1e-6;
  // Hard-drop objects whose score falls below this after an update. Off by default.
  std::optional<double> prune_below;
};

struct IterationSnapshot {
  PriorSet prior;
  std::vector<double> energies;
  std::size_t top = 0;
};

struct GroundingResult {
  std::string verb;
  std::vector<std::string> candidates;
  double lambda = 0.0;
  std::vector<IterationSnapshot> iterations;  // t = 0 is the initial prior
  std::vector<double> energies;               // final iteration
  std::vector<std::size_t> ranking;
  std::size_t selected = 0;
  bool converged = false;
};

inline double l1_distance(const PriorSet& a, const PriorSet& b) {
  double d = 0.0;
  for (const auto& e : a.entries) {
    const auto* other = b.find(e.object);
    d += std::abs(e.score - (other ? other->score : 0.0));
  }
  for (const auto& e : b.entries) {
    if (!a.find(e.object)) d += e.score;
  }
  return d;
}

namespace detail {

inline PriorSet prune(const PriorSet& p, double threshold) {
  std::vector<PriorEntry> kept;
  for (const auto& e : p.entries) {
    if (e.score >= threshold) kept.push_back(e);
  }
  if (kept.empty()) kept.push_back(p.entries.front());
  if (kept.size() == p.size()) return p;
  return PriorSet::from_raw(p.verb, std::move(kept), p.provenance, p.iteration);
}

}  // namespace detail

// Alternates energy / argmin / re-weighting over a fixed similarity matrix.
// Stops when the top index is unchanged and ||phi' - phi||_1 < epsilon
// (converged), or after max_iters updates.
inline GroundingResult ground_iterative(const PriorSet& p0, const SimMatrix& m, const LoopConfig& cfg) {
  if (cfg.max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (m.cols() == 0) throw AlignmentError("no candidates");
  GroundingResult result;
  result.verb = p0.verb;
  result.candidates = m.candidates;
  result.lambda = cfg.lambda;

  PriorSet phi = p0;
  auto energies = grounding_energy(phi, m);
  auto top = select_best(energies);
  result.iterations.push_back({phi, energies, top});

  for (int t = 1; t <= cfg.max_iters; ++t) {
    try {
      auto next = rerank_step(phi, m, top, cfg.lambda);
      if (cfg.prune_below) next = detail::prune(next, *cfg.prune_below);
      auto next_energies = grounding_energy(next, m);
      const auto next_top = select_best(next_energies);
      const double change = l1_distance(next, phi);
      phi = std::move(next);
      energies = std::move(next_energies);
      const bool stable = next_top == top;
      top = next_top;
      result.iterations.push_back({phi, energies, top});
      if (stable && change < cfg.epsilon) {
        result.converged = true;
        break;
      }
    } catch (const Error& ex) {
      throw Error("iteration " + std::to_string(t) + ": " + ex.what(), ex.kind());
    }
  }

  result.energies = energies;
  result.ranking = rank_by_energy(energies);
  result.selected = result.ranking.front();
  return result;
}

inline GroundingResult ground_iterative(const PriorSet& p0, std::span<const std::string> candidates,
                                        const EmbeddingProvider& provider, const LoopConfig& cfg,
                                        const PromptSpec& prompt = {}) {
  return ground_iterative(p0, similarity_matrix(p0, candidates, provider, prompt), cfg);
}

// Ranking from the initial prior alone (no feedback).
inline GroundingResult ground_prior_only(const PriorSet& p0, const SimMatrix& m) {
  GroundingResult result;
  result.verb = p0.verb;
  result.candidates = m.candidates;
  result.lambda = 0.0;
  result.energies = grounding_energy(p0, m);
  const auto top = select_best(result.energies);
  result.iterations.push_back({p0, result.energies, top});
  result.ranking = rank_by_energy(result.energies);
  result.selected = result.ranking.front();
  result.converged = true;
  return result;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json prior_to_json(const PriorSet& p) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : p.entries) entries.push_back({{"object", e.object}, {"score", e.score}});
  return {{"verb", p.verb}, {"provenance", to_string(p.provenance)}, {"iteration", p.iteration}, {"entries", entries}};
}

inline nlohmann::json result_to_json(const GroundingResult& r, std::string_view config_hash = {}) {
  nlohmann::json iterations = nlohmann::json::array();
  for (std::size_t t = 0; t < r.iterations.size(); ++t) {
    const auto& s = r.iterations[t];
    iterations.push_back({{"t", t}, {"phi", prior_to_json(s.prior)["entries"]}, {"energies", s.energies}, {"top", s.top}});
  }
  nlohmann::json j = {{"verb", r.verb},
                      {"candidates", r.candidates},
                      {"lambda", r.lambda},
                      {"iterations", iterations},
                      {"energies", r.energies},
                      {"ranking", r.ranking},
                      {"selected", r.selected},
                      {"converged", r.converged}};
  if (!config_hash.empty()) j["config_hash"] = std::string(config_hash);
  return j;
}

}  // namespace craft
