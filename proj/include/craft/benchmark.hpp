#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/affordance_graph.hpp"
#include "craft/concept.hpp"
#include "craft/error.hpp"
#include "craft/grounding.hpp"
#include "craft/labels.hpp"
#include "craft/metrics.hpp"
#include "craft/priors.hpp"
#include "craft/provider.hpp"
#include "craft/util.hpp"

namespace craft {

// ---------------------------------------------------------------------------
// prior sources

class PriorSource {
 public:
  virtual ~PriorSource() = default;
  virtual PriorSet prior(std::string_view verb) const = 0;
  virtual std::string describe() const = 0;
};

class FixedPriorSource final : public PriorSource {
 public:
  FixedPriorSource() = default;
  explicit FixedPriorSource(std::map<std::string, PriorSet, std::less<>> priors) : priors_(std::move(priors)) {}

  void set(PriorSet p) {
    auto key = p.verb;
    priors_.insert_or_assign(std::move(key), std::move(p));
  }

  PriorSet prior(std::string_view verb) const override {
    const auto it = priors_.find(normalize_concept_id(verb));
    if (it == priors_.end()) throw EmptyPriorError(normalize_concept_id(verb));
    return it->second;
  }
  std::string describe() const override { return "fixed"; }

 private:
  std::map<std::string, PriorSet, std::less<>> priors_;
};

struct GraphPriorOptions {
  int depth = 2;
  RelationSet whitelist = default_whitelist();
  ObjectHeuristic heuristic;
  PathOptions paths;
  std::size_t top_k = 0;  // 0 keeps every scored candidate
};

// Ego-graph prior, optionally cut to top-k by verb similarity. Memoized per verb.
class GraphPriorSource final : public PriorSource {
 public:
  GraphPriorSource(std::shared_ptr<const AffordanceGraph> graph, GraphPriorOptions opts,
                   std::shared_ptr<const VerbSimilarity> similarity = nullptr)
      : graph_(std::move(graph)), opts_(std::move(opts)), similarity_(std::move(similarity)) {}

  PriorSet prior(std::string_view verb) const override {
    const auto id = normalize_concept_id(verb);
    {
      std::lock_guard lock(mu_);
      if (const auto it = cache_.find(id); it != cache_.end()) return it->second;
    }
    const auto ego = extract_ego_subgraph(*graph_, id, opts_.depth, opts_.whitelist, opts_.heuristic);
    auto p = score_prior(ego, opts_.paths);
    if (opts_.top_k > 0) {
      const TableVerbSimilarity none;
      p = select_top_k(p, opts_.top_k, similarity_ ? *similarity_ : static_cast<const VerbSimilarity&>(none));
    }
    std::lock_guard lock(mu_);
    return cache_.emplace(id, std::move(p)).first->second;
  }
  std::string describe() const override { return "conceptnet"; }

 private:
  std::shared_ptr<const AffordanceGraph> graph_;
  GraphPriorOptions opts_;
  std::shared_ptr<const VerbSimilarity> similarity_;
  mutable std::mutex mu_;
  mutable std::map<std::string, PriorSet, std::less<>> cache_;
};

class LlmPriorSource final : public PriorSource {
 public:
  LlmPriorSource(std::shared_ptr<const LlmClient> client, std::size_t k,
                 LlmWeighting weighting = LlmWeighting::rank_reciprocal)
      : client_(std::move(client)), k_(k), weighting_(weighting) {}

  PriorSet prior(std::string_view verb) const override {
    const auto id = normalize_concept_id(verb);
    {
      std::lock_guard lock(mu_);
      if (const auto it = cache_.find(id); it != cache_.end()) return it->second;
    }
    auto p = llm_prior(id, *client_, k_, weighting_);
    std::lock_guard lock(mu_);
    return cache_.emplace(id, std::move(p)).first->second;
  }
  std::string describe() const override { return "llm"; }

 private:
  std::shared_ptr<const LlmClient> client_;
  std::size_t k_;
  LlmWeighting weighting_;
  mutable std::mutex mu_;
  mutable std::map<std::string, PriorSet, std::less<>> cache_;
};

// ---------------------------------------------------------------------------
// backends

class GroundingBackend {
 public:
  virtual ~GroundingBackend() = default;
  virtual std::string id() const = 0;
  virtual GroundingResult ground(const Episode& ep) const = 0;
};

class CraftBackend final : public GroundingBackend {
 public:
  CraftBackend(std::shared_ptr<const PriorSource> priors, std::shared_ptr<const EmbeddingProvider> provider,
               LoopConfig loop = {}, PromptSpec prompt = {})
      : priors_(std::move(priors)), provider_(std::move(provider)), loop_(loop), prompt_(std::move(prompt)) {}

  std::string id() const override { return "craft"; }
  GroundingResult ground(const Episode& ep) const override {
    const auto p = priors_->prior(ep.verb);
    return ground_iterative(p, similarity_matrix(p, ep.candidates, *provider_, prompt_), loop_);
  }

 private:
  std::shared_ptr<const PriorSource> priors_;
  std::shared_ptr<const EmbeddingProvider> provider_;
  LoopConfig loop_;
  PromptSpec prompt_;
};

class PriorOnlyBackend final : public GroundingBackend {
 public:
  PriorOnlyBackend(std::shared_ptr<const PriorSource> priors, std::shared_ptr<const EmbeddingProvider> provider,
                   PromptSpec prompt = {})
      : priors_(std::move(priors)), provider_(std::move(provider)), prompt_(std::move(prompt)) {}

  std::string id() const override { return "prior-only"; }
  GroundingResult ground(const Episode& ep) const override {
    const auto p = priors_->prior(ep.verb);
    return ground_prior_only(p, similarity_matrix(p, ep.candidates, *provider_, prompt_));
  }

 private:
  std::shared_ptr<const PriorSource> priors_;
  std::shared_ptr<const EmbeddingProvider> provider_;
  PromptSpec prompt_;
};

namespace detail {

inline GroundingResult from_energies(std::string verb, const Episode& ep, std::vector<double> energies) {
  GroundingResult r;
  r.verb = std::move(verb);
  r.candidates = ep.candidates;
  r.energies = std::move(energies);
  r.ranking = rank_by_energy(r.energies);
  r.selected = r.ranking.front();
  r.converged = true;
  return r;
}

}  // namespace detail

// Knows which categories afford the verb; scores each image by its best
// cosine to those categories' text embeddings.
class ObjectOracleBackend final : public GroundingBackend {
 public:
  ObjectOracleBackend(std::shared_ptr<const LabelTable> labels, std::shared_ptr<const EmbeddingProvider> provider,
                      PromptSpec prompt = {})
      : labels_(std::move(labels)), provider_(std::move(provider)), prompt_(std::move(prompt)) {}

  std::string id() const override { return "oracle-object"; }
  GroundingResult ground(const Episode& ep) const override {
    const auto verb_id = normalize_concept_id(ep.verb);
    std::vector<EmbeddingVector> texts;
    for (const auto& c : labels_->affording(ep.verb)) {
      const auto prompt = object_prompt(prompt_, normalize_concept_id(c), verb_id);
      texts.push_back(provider_->embed_text(prompt, prompt_.template_id));
    }
    if (texts.empty()) throw SamplingError(ep.verb, "no affording categories");
    std::vector<double> energies;
    for (const auto& ref : ep.candidates) {
      const auto img = provider_->embed_image(ref);
      double best = -1.0;
      for (const auto& t : texts) best = std::max(best, cosine(t, img));
      energies.push_back(-best);
    }
    return detail::from_energies(verb_id, ep, std::move(energies));
  }

 private:
  std::shared_ptr<const LabelTable> labels_;
  std::shared_ptr<const EmbeddingProvider> provider_;
  PromptSpec prompt_;
};

// Cosine to "something used to {verb}".
class AffordanceOracleBackend final : public GroundingBackend {
 public:
  explicit AffordanceOracleBackend(std::shared_ptr<const EmbeddingProvider> provider)
      : provider_(std::move(provider)) {}

  std::string id() const override { return "oracle-affordance"; }
  GroundingResult ground(const Episode& ep) const override {
    const auto verb_id = normalize_concept_id(ep.verb);
    const auto text = provider_->embed_text(render_prompt(kTemplateAffordance, "", concept_label(verb_id)),
                                            kTemplateAffordance);
    std::vector<double> energies;
    for (const auto& ref : ep.candidates) energies.push_back(-cosine(text, provider_->embed_image(ref)));
    return detail::from_energies(verb_id, ep, std::move(energies));
  }

 private:
  std::shared_ptr<const EmbeddingProvider> provider_;
};

// Seeded shuffle; energy of a candidate is its shuffled position scaled into [-1, 0].
class RandomBackend final : public GroundingBackend {
 public:
  std::string id() const override { return "random"; }
  GroundingResult ground(const Episode& ep) const override {
    const auto n = ep.candidates.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(ep.seed ^ 0x52414e444f4dULL);
    rng.shuffle(order);
    std::vector<double> energies(n);
    for (std::size_t r = 0; r < n; ++r) energies[order[r]] = static_cast<double>(r) / static_cast<double>(n) - 1.0;
    return detail::from_energies(normalize_concept_id(ep.verb), ep, std::move(energies));
  }
};

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkConfig {
  std::size_t n = 5;
  std::size_t n_pos = 1;
  std::size_t episodes_per_verb = 100;
  std::uint64_t base_seed = 0;
  std::vector<std::string> verbs;  // empty: every eligible verb
  unsigned jobs = 1;               // 0: hardware concurrency; does not affect results

  std::uint64_t hash() const {
    Fnv1a h;
    h.u64(n).u64(n_pos).u64(episodes_per_verb).u64(base_seed).u64(verbs.size());
    for (const auto& v : verbs) h.field(v);
    return h.value();
  }
};

struct MetricSummary {
  std::size_t episodes = 0;
  MeanStderr accuracy_at_1;
  MeanStderr mrr;
  MeanStderr ndcg;
};

inline MetricSummary summarize(std::span<const EpisodeScores> scores) {
  std::vector<double> acc, rr, nd;
  for (const auto& s : scores) {
    acc.push_back(s.hit ? 1.0 : 0.0);
    rr.push_back(s.reciprocal_rank);
    nd.push_back(s.ndcg);
  }
  return {scores.size(), mean_stderr(acc), mean_stderr(rr), mean_stderr(nd)};
}

struct EpisodeRecord {
  std::string verb;
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> candidates;
  std::vector<std::size_t> relevant;
  std::vector<double> energies;
  std::vector<std::size_t> ranking;
  std::size_t selected = 0;
  std::size_t iterations = 0;
  bool converged = false;
  EpisodeScores scores;
};

struct EpisodeFailure {
  std::string verb;
  std::size_t index = 0;
  std::string message;
};

struct SkippedVerb {
  std::string verb;
  std::string reason;
};

struct Report {
  std::string backend;
  std::string config_hash;
  BenchmarkConfig config;
  MetricSummary aggregate;
  std::map<std::string, MetricSummary> per_verb;
  std::vector<EpisodeRecord> episodes;  // ordered by (verb, index)
  std::vector<EpisodeFailure> failures;
  std::vector<SkippedVerb> skipped;
};

namespace detail {

struct EpisodeTask {
  std::string verb;
  std::size_t index = 0;
};

struct EpisodeOutcome {
  std::optional<EpisodeRecord> record;
  std::optional<EpisodeFailure> failure;
};

inline EpisodeOutcome run_episode(const LabelTable& t, const GroundingBackend& backend, const BenchmarkConfig& cfg,
                                  const EpisodeTask& task) {
  EpisodeOutcome out;
  try {
    const auto seed = episode_seed(cfg.base_seed, task.verb, task.index, cfg.n, cfg.n_pos);
    const auto ep = sample_episode(t, task.verb, cfg.n, cfg.n_pos, seed);
    const auto r = backend.ground(ep);
    EpisodeRecord rec;
    rec.verb = task.verb;
    rec.index = task.index;
    rec.seed = seed;
    rec.candidates = ep.candidates;
    rec.relevant = ep.relevant;
    rec.energies = r.energies;
    rec.ranking = r.ranking;
    rec.selected = r.selected;
    rec.iterations = r.iterations.empty() ? 0 : r.iterations.size() - 1;
    rec.converged = r.converged;
    rec.scores = score_episode(rec.ranking, rec.relevant);
    out.record = std::move(rec);
  } catch (const std::exception& ex) {
    out.failure = EpisodeFailure{task.verb, task.index, ex.what()};
  }
  return out;
}

}  // namespace detail

// Episodes run on `cfg.jobs` workers; results land in per-task slots and are
// reduced in (verb, index) order, so the Report does not depend on scheduling.
inline Report run_benchmark(const LabelTable& t, const GroundingBackend& backend, const BenchmarkConfig& cfg,
                            std::string_view config_hash = {}) {
  if (cfg.n_pos < 1 || cfg.n_pos > 2) throw ConfigError("n_pos must be 1 or 2");
  if (cfg.n <= cfg.n_pos) throw ConfigError("n must exceed n_pos");
  if (cfg.episodes_per_verb == 0) throw ConfigError("episodes per verb must be >= 1");

  Report report;
  report.backend = backend.id();
  report.config = cfg;
  {
    Fnv1a h;
    h.field(config_hash).field(report.backend).u64(cfg.hash());
    report.config_hash = hex64(h.value());
  }

  std::vector<std::string> verbs = cfg.verbs.empty() ? t.verbs : cfg.verbs;
  std::sort(verbs.begin(), verbs.end());
  verbs.erase(std::unique(verbs.begin(), verbs.end()), verbs.end());

  std::vector<detail::EpisodeTask> tasks;
  for (const auto& v : verbs) {
    if (std::find(t.verbs.begin(), t.verbs.end(), v) == t.verbs.end()) {
      report.skipped.push_back({v, "unknown verb"});
      continue;
    }
    if (std::find(t.excluded_verbs.begin(), t.excluded_verbs.end(), v) != t.excluded_verbs.end()) {
      report.skipped.push_back({v, "no affording or no non-affording category"});
      continue;
    }
    if (!episode_feasible(t, v, cfg.n, cfg.n_pos)) {
      report.skipped.push_back({v, "too few categories for n=" + std::to_string(cfg.n) +
                                       " n_pos=" + std::to_string(cfg.n_pos)});
      continue;
    }
    for (std::size_t i = 0; i < cfg.episodes_per_verb; ++i) tasks.push_back({v, i});
  }

  std::vector<detail::EpisodeOutcome> slots(tasks.size());
  unsigned jobs = cfg.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.jobs;
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(1, tasks.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) slots[i] = detail::run_episode(t, backend, cfg, tasks[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (auto i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
          slots[i] = detail::run_episode(t, backend, cfg, tasks[i]);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  std::vector<EpisodeScores> all;
  std::map<std::string, std::vector<EpisodeScores>> by_verb;
  for (auto& s : slots) {
    if (s.failure) {
      report.failures.push_back(std::move(*s.failure));
      continue;
    }
    all.push_back(s.record->scores);
    by_verb[s.record->verb].push_back(s.record->scores);
    report.episodes.push_back(std::move(*s.record));
  }
  report.aggregate = summarize(all);
  for (const auto& [v, scores] : by_verb) report.per_verb[v] = summarize(scores);
  return report;
}

// ---------------------------------------------------------------------------
// serialization

inline nlohmann::json summary_to_json(const MetricSummary& s) {
  return {{"episodes", s.episodes},
          {"accuracy_at_1", s.accuracy_at_1.mean},
          {"accuracy_at_1_stderr", s.accuracy_at_1.stderr_},
          {"mrr", s.mrr.mean},
          {"mrr_stderr", s.mrr.stderr_},
          {"ndcg", s.ndcg.mean},
          {"ndcg_stderr", s.ndcg.stderr_}};
}

inline nlohmann::json report_to_json(const Report& r) {
  nlohmann::json per_verb = nlohmann::json::object();
  for (const auto& [v, s] : r.per_verb) per_verb[v] = summary_to_json(s);
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : r.failures) failures.push_back({{"verb", f.verb}, {"index", f.index}, {"error", f.message}});
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"verb", s.verb}, {"reason", s.reason}});
  return {{"tool_version", kToolVersion},
          {"backend", r.backend},
          {"config_hash", r.config_hash},
          {"n", r.config.n},
          {"n_pos", r.config.n_pos},
          {"episodes_per_verb", r.config.episodes_per_verb},
          {"base_seed", r.config.base_seed},
          {"accuracy_at_1_comparable", r.config.n_pos == 1},
          {"aggregate", summary_to_json(r.aggregate)},
          {"per_verb", per_verb},
          {"failed_episodes", r.failures.size()},
          {"failures", failures},
          {"skipped_verbs", skipped}};
}

inline nlohmann::json episode_to_json(const EpisodeRecord& e) {
  return {{"verb", e.verb},
          {"index", e.index},
          {"seed", e.seed},
          {"candidates", e.candidates},
          {"relevant", e.relevant},
          {"energies", e.energies},
          {"ranking", e.ranking},
          {"selected", e.selected},
          {"iterations", e.iterations},
          {"converged", e.converged},
          {"hit", e.scores.hit},
          {"reciprocal_rank", e.scores.reciprocal_rank},
          {"ndcg", e.scores.ndcg}};
}

inline std::string report_jsonl(const Report& r) {
  std::string out;
  for (const auto& e : r.episodes) {
    auto j = episode_to_json(e);
    j["config_hash"] = r.config_hash;
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// distractor sweep

struct SweepReport {
  std::vector<Report> reports;  // one per n, ascending

  // n,metric,mean,stderr; grouped by metric.
  std::string csv() const {
    std::ostringstream out;
    out << "n,metric,mean,stderr\n";
    const auto rows = [&](std::string_view name, auto pick) {
      for (const auto& r : reports) {
        const MeanStderr& m = pick(r.aggregate);
        out << r.config.n << ',' << name << ',' << format_double(m.mean) << ',' << format_double(m.stderr_) << '\n';
      }
    };
    rows("accuracy_at_1", [](const MetricSummary& s) -> const MeanStderr& { return s.accuracy_at_1; });
    rows("mrr", [](const MetricSummary& s) -> const MeanStderr& { return s.mrr; });
    rows("ndcg", [](const MetricSummary& s) -> const MeanStderr& { return s.ndcg; });
    return out.str();
  }
};

inline SweepReport distractor_sweep(const LabelTable& t, const GroundingBackend& backend,
                                    std::span<const std::size_t> n_values, const BenchmarkConfig& cfg,
                                    std::string_view config_hash = {}) {
  if (n_values.empty()) throw ConfigError("sweep needs at least one n");
  for (std::size_t i = 1; i < n_values.size(); ++i) {
    if (n_values[i] <= n_values[i - 1]) throw ConfigError("sweep n values must be strictly ascending");
  }
  SweepReport sweep;
  for (auto n : n_values) {
    auto c = cfg;
    c.n = n;
    sweep.reports.push_back(run_benchmark(t, backend, c, config_hash));
  }
  return sweep;
}

}  // namespace craft
