// craft: command-line entry point.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "craft/craft.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log_event(std::string_view level, std::string_view event, json fields = json::object()) {
  fields["level"] = level;
  fields["event"] = event;
  std::cerr << fields.dump() << '\n';
}

// Flag values; unset flags leave the config file (or defaults) alone.
struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> graph, relations, provider, prior, llm_path, template_id, labels, backend, out_dir;
  std::optional<int> depth, max_iters;
  std::optional<std::size_t> top_k, llm_k, n_pos, episodes;
  std::optional<double> lambda, epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
};

craft::RunConfig resolve(const Flags& f) {
  craft::RunConfig c = f.config ? craft::load_run_config(*f.config) : craft::RunConfig{};
  if (f.graph) c.graph_path = *f.graph;
  if (f.relations) {
    c.relations.clear();
    for (auto r : craft::split(*f.relations, ',')) {
      if (!craft::trim(r).empty()) c.relations.emplace_back(craft::trim(r));
    }
  }
  if (f.provider) c.provider = *f.provider;
  if (f.prior) c.prior_source = *f.prior;
  if (f.llm_path) c.llm_path = *f.llm_path;
  if (f.template_id) c.template_id = *f.template_id;
  if (f.labels) c.labels_path = *f.labels;
  if (f.backend) c.backend = *f.backend;
  if (f.out_dir) c.output_dir = *f.out_dir;
  if (f.depth) c.depth = *f.depth;
  if (f.max_iters) c.max_iters = *f.max_iters;
  if (f.top_k) c.top_k = *f.top_k;
  if (f.llm_k) c.llm_k = *f.llm_k;
  if (f.n_pos) c.n_pos = *f.n_pos;
  if (f.episodes) c.episodes = *f.episodes;
  if (f.lambda) c.lambda = *f.lambda;
  if (f.epsilon) c.epsilon = *f.epsilon;
  if (f.seed) c.seed = *f.seed;
  if (f.jobs) c.jobs = *f.jobs;
  if (c.provider.empty()) {
    if (const char* env = std::getenv("CRAFT_SIDECAR_URL"); env && *env) c.provider = env;
  }
  return c;
}

std::shared_ptr<const craft::EmbeddingProvider> make_provider(const craft::RunConfig& c) {
  if (c.provider.empty()) {
    throw craft::ConfigError("no embedding provider: pass --provider file:<store.cemb> or set CRAFT_SIDECAR_URL");
  }
  if (craft::starts_with(c.provider, "file:")) {
    const fs::path path = c.provider.substr(5);
    return std::make_shared<craft::StoreProvider>(std::make_shared<craft::EmbeddingStore>(craft::load_store(path)),
                                                  path.string());
  }
  if (craft::starts_with(c.provider, "http://") || craft::starts_with(c.provider, "https://")) {
    return std::make_shared<craft::HttpProvider>(c.provider);
  }
  throw craft::ConfigError("provider must be file:<path> or an http(s) URL, got '" + c.provider + "'");
}

std::shared_ptr<const craft::AffordanceGraph> load_graph(const craft::RunConfig& c) {
  if (c.graph_path.empty()) throw craft::ConfigError("--graph is required for the conceptnet prior");
  std::ifstream in(c.graph_path);
  if (!in) throw craft::Error("cannot open graph " + c.graph_path);
  return std::make_shared<craft::AffordanceGraph>(craft::read_snapshot(in));
}

std::shared_ptr<const craft::PriorSource> make_prior_source(const craft::RunConfig& c) {
  if (c.prior_source == "conceptnet") {
    craft::GraphPriorOptions opts;
    opts.depth = c.depth;
    opts.whitelist = c.whitelist();
    opts.top_k = c.top_k;
    std::shared_ptr<const craft::VerbSimilarity> sim;
    if (c.top_k > 0 && craft::starts_with(c.provider, "http")) sim = std::make_shared<craft::HttpVerbSimilarity>(c.provider);
    return std::make_shared<craft::GraphPriorSource>(load_graph(c), opts, sim);
  }
  if (c.prior_source == "llm-fixture") {
    if (c.llm_path.empty()) throw craft::ConfigError("--llm-path is required for llm-fixture");
    return std::make_shared<craft::LlmPriorSource>(std::make_shared<craft::FixtureLlmClient>(fs::path(c.llm_path)),
                                                   c.llm_k);
  }
  if (c.prior_source == "llm-live") {
    if (c.llm_path.empty()) throw craft::ConfigError("--llm-path must be the LLM endpoint URL for llm-live");
    return std::make_shared<craft::LlmPriorSource>(std::make_shared<craft::HttpLlmClient>(c.llm_path), c.llm_k);
  }
  throw craft::ConfigError("unknown prior source '" + c.prior_source + "'");
}

craft::LoopConfig loop_config(const craft::RunConfig& c) {
  craft::LoopConfig l;
  l.lambda = c.lambda;
  l.max_iters = c.max_iters;
  l.epsilon = c.epsilon;
  return l;
}

std::unique_ptr<craft::GroundingBackend> make_backend(const craft::RunConfig& c,
                                                      std::shared_ptr<const craft::LabelTable> labels) {
  const craft::PromptSpec prompt{c.template_id};
  if (c.backend == "random") return std::make_unique<craft::RandomBackend>();
  const auto provider = make_provider(c);
  if (c.backend == "craft") return std::make_unique<craft::CraftBackend>(make_prior_source(c), provider, loop_config(c), prompt);
  if (c.backend == "prior-only") return std::make_unique<craft::PriorOnlyBackend>(make_prior_source(c), provider, prompt);
  if (c.backend == "oracle-object") return std::make_unique<craft::ObjectOracleBackend>(labels, provider, prompt);
  if (c.backend == "oracle-affordance") return std::make_unique<craft::AffordanceOracleBackend>(provider);
  throw craft::ConfigError("unknown backend '" + c.backend + "'");
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw craft::Error("cannot write " + path.string());
  out << content;
}

std::string artifact_json(json j, const craft::RunConfig& c) {
  j["config_hash"] = c.hash();
  j["tool_version"] = craft::kToolVersion;
  return j.dump(2) + "\n";
}

std::vector<std::size_t> parse_n_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (auto part : craft::split(s, ',')) {
    const auto v = craft::parse_int<std::size_t>(craft::trim(part));
    if (!v) throw craft::ConfigError("bad --n value '" + std::string(part) + "'");
    out.push_back(*v);
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& assertions, const std::string& out_path, const std::string& language,
               const std::optional<std::string>& relations) {
  craft::IngestConfig cfg;
  cfg.language = language;
  if (relations) {
    cfg.relations.clear();
    for (auto r : craft::split(*relations, ',')) {
      if (!craft::trim(r).empty()) cfg.relations.insert(craft::relation_name(craft::trim(r)));
    }
  }
  std::ifstream in(assertions);
  if (!in) throw craft::Error("cannot open " + assertions);
  craft::IngestReport report;
  const auto graph = craft::ingest_assertions(in, cfg, report);
  for (const auto& m : report.malformed) log_event("warn", "ingest.malformed_row", {{"line", m.line}, {"reason", m.reason}});
  write_file(out_path, craft::snapshot_string(graph));
  json summary = {{"lines_read", report.lines_read},
                  {"accepted", report.accepted},
                  {"filtered_language", report.filtered_language},
                  {"filtered_relation", report.filtered_relation},
                  {"duplicates", report.duplicates},
                  {"malformed", report.malformed.size()},
                  {"nodes", graph.node_ids().size()},
                  {"edges", graph.edges().size()},
                  {"config_hash", graph.config_hash()},
                  {"tool_version", craft::kToolVersion},
                  {"snapshot", out_path}};
  std::cout << summary.dump(2) << '\n';
  log_event("info", "ingest.done", {{"edges", graph.edges().size()}});
  return 0;
}

int cmd_ground(const craft::RunConfig& c, const std::string& verb, const std::string& candidates, bool prior_only) {
  std::vector<std::string> cands;
  for (auto part : craft::split(candidates, ',')) {
    if (!craft::trim(part).empty()) cands.emplace_back(craft::trim(part));
  }
  if (cands.empty()) throw craft::ConfigError("--candidates must list at least one image ref");
  const auto provider = make_provider(c);
  const auto p0 = make_prior_source(c)->prior(verb);
  const auto m = craft::similarity_matrix(p0, cands, *provider, {c.template_id});
  const auto result = prior_only ? craft::ground_prior_only(p0, m) : craft::ground_iterative(p0, m, loop_config(c));
  std::cout << artifact_json(craft::result_to_json(result), c);
  log_event("info", "ground.done",
            {{"verb", result.verb}, {"selected", result.selected}, {"iterations", result.iterations.size() - 1},
             {"converged", result.converged}});
  return 0;
}

std::shared_ptr<const craft::LabelTable> load_labels(const craft::RunConfig& c) {
  if (c.labels_path.empty()) throw craft::ConfigError("--labels is required");
  return std::make_shared<craft::LabelTable>(craft::load_affordance_labels(fs::path(c.labels_path)));
}

craft::BenchmarkConfig bench_config(const craft::RunConfig& c) {
  craft::BenchmarkConfig b;
  b.n = c.n;
  b.n_pos = c.n_pos;
  b.episodes_per_verb = c.episodes;
  b.base_seed = c.seed;
  b.jobs = c.jobs;
  return b;
}

void log_report(const craft::Report& r) {
  for (const auto& s : r.skipped) log_event("warn", "eval.skipped_verb", {{"verb", s.verb}, {"reason", s.reason}});
  if (!r.failures.empty()) {
    log_event("warn", "eval.failed_episodes",
              {{"count", r.failures.size()}, {"first_error", r.failures.front().message}});
  }
}

int cmd_eval(const craft::RunConfig& c, std::size_t n) {
  auto cfg = c;
  cfg.n = n;
  const auto labels = load_labels(cfg);
  const auto backend = make_backend(cfg, labels);
  const auto report = craft::run_benchmark(*labels, *backend, bench_config(cfg), cfg.hash());
  log_report(report);
  const fs::path dir = cfg.output_dir;
  auto summary = craft::report_to_json(report);
  summary["run_config_hash"] = cfg.hash();
  write_file(dir / "report.json", summary.dump(2) + "\n");
  write_file(dir / "episodes.jsonl", craft::report_jsonl(report));
  std::cout << summary["aggregate"].dump(2) << '\n';
  log_event("info", "eval.done", {{"episodes", report.episodes.size()}, {"out_dir", dir.string()}});
  return 0;
}

int cmd_sweep(const craft::RunConfig& c, const std::string& n_list) {
  const auto ns = parse_n_list(n_list);
  const auto labels = load_labels(c);
  const auto backend = make_backend(c, labels);
  const auto sweep = craft::distractor_sweep(*labels, *backend, ns, bench_config(c), c.hash());
  const fs::path dir = c.output_dir;
  for (const auto& r : sweep.reports) {
    log_report(r);
    auto summary = craft::report_to_json(r);
    summary["run_config_hash"] = c.hash();
    write_file(dir / ("report_n" + std::to_string(r.config.n) + ".json"), summary.dump(2) + "\n");
  }
  write_file(dir / "sweep.csv", sweep.csv());
  std::cout << sweep.csv();
  log_event("info", "sweep.done", {{"points", sweep.reports.size()}, {"out_dir", dir.string()}});
  return 0;
}

int cmd_export_traces(const craft::RunConfig& c, const std::string& verb, const std::string& out,
                      const std::optional<std::string>& dot, std::size_t all_paths) {
  const auto graph = load_graph(c);
  const auto ego = craft::extract_ego_subgraph(*graph, verb, c.depth, c.whitelist());
  auto prior = craft::score_prior(ego);
  if (c.top_k > 0) prior = craft::select_top_k(prior, c.top_k, craft::TableVerbSimilarity{});
  std::vector<craft::ReasoningTrace> traces;
  for (const auto& e : prior.entries) {
    const auto ts = craft::extract_traces(ego, e.object, std::max<std::size_t>(1, all_paths));
    traces.insert(traces.end(), ts.begin(), ts.end());
  }
  write_file(out, craft::export_traces_json(traces, c.hash()));
  if (dot) {
    write_file(*dot, "// config " + c.hash() + " craft " + craft::kToolVersion + "\n" +
                         craft::export_ego_dot(craft::make_render(ego, prior)));
  }
  log_event("info", "export.done", {{"verb", ego.root}, {"traces", traces.size()}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"craft: commonsense-prior visual affordance grounding"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(craft::kToolVersion));
  Flags f;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "INI config file; flags override it");
    sub->add_option("--graph", f.graph, "graph snapshot written by `ingest`");
    sub->add_option("--depth", f.depth, "ego-graph depth");
    sub->add_option("--relations", f.relations, "comma-separated relation whitelist");
    sub->add_option("--top-k", f.top_k, "keep the k best prior objects (0 = all)");
  };
  const auto add_grounding = [&](CLI::App* sub) {
    add_common(sub);
    sub->add_option("--provider", f.provider, "file:<store.cemb> or sidecar URL (default $CRAFT_SIDECAR_URL)");
    sub->add_option("--prior", f.prior, "conceptnet | llm-fixture | llm-live");
    sub->add_option("--llm-path", f.llm_path, "LLM fixture file/directory, or endpoint URL for llm-live");
    sub->add_option("--llm-k", f.llm_k, "objects requested from the LLM");
    sub->add_option("--lambda", f.lambda, "re-weighting strength");
    sub->add_option("--max-iters", f.max_iters, "iteration cap");
    sub->add_option("--epsilon", f.epsilon, "convergence threshold on the L1 prior change");
    sub->add_option("--template", f.template_id, "object prompt template (photo | used-to)");
  };
  const auto add_eval = [&](CLI::App* sub) {
    add_grounding(sub);
    sub->add_option("--labels", f.labels, "affordance label file");
    sub->add_option("--backend", f.backend, "craft | prior-only | oracle-object | oracle-affordance | random");
    sub->add_option("--n-pos", f.n_pos, "relevant candidates per episode (1 or 2)");
    sub->add_option("--episodes", f.episodes, "episodes per verb");
    sub->add_option("--seed", f.seed, "base seed");
    sub->add_option("--jobs", f.jobs, "worker threads (0 = all cores)");
    sub->add_option("--out-dir", f.out_dir, "artifact directory");
  };

  auto* ingest = app.add_subcommand("ingest", "ingest an assertions dump into a graph snapshot");
  std::string assertions, snapshot_out, language = "en";
  std::optional<std::string> ingest_relations;
  ingest->add_option("--assertions", assertions, "tab-separated assertions file")->required();
  ingest->add_option("--out", snapshot_out, "snapshot path")->required();
  ingest->add_option("--language", language, "language filter");
  ingest->add_option("--relations", ingest_relations, "relations to keep (comma-separated)");

  auto* ground = app.add_subcommand("ground", "ground one verb against candidate images");
  add_grounding(ground);
  std::string verb, candidates;
  bool prior_only = false;
  ground->add_option("--verb", verb, "verb")->required();
  ground->add_option("--candidates", candidates, "comma-separated image refs")->required();
  ground->add_flag("--prior-only", prior_only, "rank by the initial prior only");

  auto* eval = app.add_subcommand("eval", "run a benchmark");
  add_eval(eval);
  std::size_t n = 5;
  eval->add_option("--n", n, "candidates per episode");

  auto* sweep = app.add_subcommand("sweep", "distractor sweep over several n");
  add_eval(sweep);
  std::string n_list = "5,10,15,20";
  sweep->add_option("--n", n_list, "comma-separated candidate counts, ascending");

  auto* traces = app.add_subcommand("export-traces", "export reasoning traces and the ego graph");
  add_common(traces);
  std::string traces_out;
  std::optional<std::string> dot_out;
  std::size_t all_paths = 1;
  traces->add_option("--verb", verb, "verb")->required();
  traces->add_option("--out", traces_out, "traces JSON path")->required();
  traces->add_option("--dot", dot_out, "ego graph DOT path");
  traces->add_option("--all-paths", all_paths, "paths exported per object (default: best only)");

  auto* selftest = app.add_subcommand("selftest", "run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*selftest) return craft::selftest::run(std::cout);
    if (*ingest) return cmd_ingest(assertions, snapshot_out, language, ingest_relations);
    const auto cfg = resolve(f);
    if (*ground) return cmd_ground(cfg, verb, candidates, prior_only);
    if (*eval) return cmd_eval(cfg, n);
    if (*sweep) return cmd_sweep(cfg, n_list);
    if (*traces) return cmd_export_traces(cfg, verb, traces_out, dot_out, all_paths);
  } catch (const craft::Error& e) {
    log_event("error", "failed", {{"kind", static_cast<int>(e.kind())}, {"message", e.what()}});
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    log_event("error", "failed", {{"message", e.what()}});
    return 2;
  }
  return 1;
}
