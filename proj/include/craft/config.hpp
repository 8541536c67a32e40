#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "craft/affordance_graph.hpp"
#include "craft/error.hpp"
#include "craft/util.hpp"

namespace craft {

// Everything that influences an artifact. Loaded from an INI file, then
// overridden by command-line flags.
//
//   [graph]     path, depth, relations (comma list), top_k, language
//   [provider]  spec  (file:<path.cemb> | http://host:port)
//   [prior]     source (conceptnet | llm-fixture | llm-live), llm_path, llm_k
//   [grounding] lambda, max_iters, epsilon, template
//   [eval]      labels, backend, n, n_pos, episodes, seed, jobs
//   [output]    dir
struct RunConfig {
  std::string graph_path;
  int depth = 2;
  std::vector<std::string> relations;  // empty: default whitelist
  std::size_t top_k = 0;
  std::string language = "en";

  std::string provider;

  std::string prior_source = "conceptnet";
  std::string llm_path;
  std::size_t llm_k = 10;

  double lambda = 1.0;
  int max_iters = 10;
  double epsilon = 1e-6;
  std::string template_id = "photo";

  std::string labels_path;
  std::string backend = "craft";
  std::size_t n = 5;
  std::size_t n_pos = 1;
  std::size_t episodes = 100;
  std::uint64_t seed = 0;
  unsigned jobs = 0;

  std::string output_dir = ".";

  RelationSet whitelist() const {
    if (relations.empty()) return default_whitelist();
    RelationSet out;
    for (const auto& r : relations) out.insert(relation_name(r));
    return out;
  }

  // Canonical text form; `jobs` and `output_dir` are excluded since they do not change results.
  std::string canonical() const {
    std::ostringstream out;
    out << "graph.path=" << graph_path << '\n'
        << "graph.depth=" << depth << '\n'
        << "graph.relations=";
    for (const auto& r : whitelist()) out << r << ',';
    out << '\n'
        << "graph.top_k=" << top_k << '\n'
        << "graph.language=" << language << '\n'
        << "provider.spec=" << provider << '\n'
        << "prior.source=" << prior_source << '\n'
        << "prior.llm_path=" << llm_path << '\n'
        << "prior.llm_k=" << llm_k << '\n'
        << "grounding.lambda=" << format_double(lambda) << '\n'
        << "grounding.max_iters=" << max_iters << '\n'
        << "grounding.epsilon=" << format_double(epsilon) << '\n'
        << "grounding.template=" << template_id << '\n'
        << "eval.labels=" << labels_path << '\n'
        << "eval.backend=" << backend << '\n'
        << "eval.n=" << n << '\n'
        << "eval.n_pos=" << n_pos << '\n'
        << "eval.episodes=" << episodes << '\n'
        << "eval.seed=" << seed << '\n';
    return out.str();
  }

  std::string hash() const {
    Fnv1a h;
    h.bytes(kToolVersion).bytes("\n").bytes(canonical());
    return hex64(h.value());
  }
};

namespace detail {

template <typename T>
T ini_get(const boost::property_tree::ptree& pt, const char* key, T fallback) {
  const auto v = pt.get_optional<std::string>(key);
  if (!v) return fallback;
  if constexpr (std::is_same_v<T, std::string>) {
    return std::string(trim(*v));
  } else if constexpr (std::is_floating_point_v<T>) {
    const auto d = parse_double(trim(*v));
    if (!d) throw ConfigError(std::string("config key ") + key + ": expected a number, got '" + *v + "'");
    return *d;
  } else {
    const auto i = parse_int<T>(trim(*v));
    if (!i) throw ConfigError(std::string("config key ") + key + ": expected an integer, got '" + *v + "'");
    return *i;
  }
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  RunConfig c;
  using detail::ini_get;
  c.graph_path = ini_get(pt, "graph.path", c.graph_path);
  c.depth = ini_get(pt, "graph.depth", c.depth);
  c.top_k = ini_get(pt, "graph.top_k", c.top_k);
  c.language = ini_get(pt, "graph.language", c.language);
  if (const auto rel = pt.get_optional<std::string>("graph.relations")) {
    for (auto r : split(*rel, ',')) {
      r = trim(r);
      if (!r.empty()) c.relations.emplace_back(r);
    }
  }
  c.provider = ini_get(pt, "provider.spec", c.provider);
  c.prior_source = ini_get(pt, "prior.source", c.prior_source);
  c.llm_path = ini_get(pt, "prior.llm_path", c.llm_path);
  c.llm_k = ini_get(pt, "prior.llm_k", c.llm_k);
  c.lambda = ini_get(pt, "grounding.lambda", c.lambda);
  c.max_iters = ini_get(pt, "grounding.max_iters", c.max_iters);
  c.epsilon = ini_get(pt, "grounding.epsilon", c.epsilon);
  c.template_id = ini_get(pt, "grounding.template", c.template_id);
  c.labels_path = ini_get(pt, "eval.labels", c.labels_path);
  c.backend = ini_get(pt, "eval.backend", c.backend);
  c.n = ini_get(pt, "eval.n", c.n);
  c.n_pos = ini_get(pt, "eval.n_pos", c.n_pos);
  c.episodes = ini_get(pt, "eval.episodes", c.episodes);
  c.seed = ini_get(pt, "eval.seed", c.seed);
  c.jobs = ini_get(pt, "eval.jobs", c.jobs);
  c.output_dir = ini_get(pt, "output.dir", c.output_dir);
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_run_config(in);
}

}  // namespace craft
