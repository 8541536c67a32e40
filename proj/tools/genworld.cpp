// craft-genworld: writes a synthetic label file, embedding store, and LLM
// fixture so that every CLI command can run offline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "craft/craft.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate a synthetic evaluation world"};
  std::string kind = "margin", out_dir = "world";
  craft::LabelGenOptions labels_opts;
  craft::MarginWorldOptions world_opts;
  craft::NoisyPriorOptions prior_opts;
  std::uint64_t seed = 0;
  app.add_option("--kind", kind, "margin | identity")->check(CLI::IsMember({"margin", "identity"}));
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--seed", seed, "seed for labels, embeddings, and priors");
  app.add_option("--verbs", labels_opts.verbs);
  app.add_option("--categories", labels_opts.categories);
  app.add_option("--affording", labels_opts.affording_per_verb, "affording categories per verb");
  app.add_option("--images", labels_opts.images_per_category, "images per category");
  app.add_option("--dim", world_opts.dim);
  app.add_option("--beta", world_opts.beta, "image noise scale");
  app.add_option("--delta", world_opts.delta, "target cosine margin");
  app.add_option("--sigma", prior_opts.sigma, "prior noise");
  app.add_option("--spurious", prior_opts.spurious_fraction, "share of spurious prior objects");
  CLI11_PARSE(app, argc, argv);

  try {
    labels_opts.seed = seed;
    world_opts.seed = seed + 1;
    prior_opts.seed = seed + 2;
    const auto labels = craft::generate_labels(labels_opts);
    std::shared_ptr<craft::EmbeddingStore> store;
    if (kind == "identity") {
      store = craft::identity_world(labels, world_opts.dim, world_opts.seed);
    } else {
      const auto world = craft::margin_world(labels, world_opts);
      store = world.store;
      std::cerr << "alpha=" << world.alpha << " margin=" << world.margin << '\n';
    }
    const std::filesystem::path dir = out_dir;
    std::filesystem::create_directories(dir);
    {
      std::ofstream out(dir / "labels.tsv");
      craft::write_affordance_labels(out, labels);
    }
    craft::save_store(dir / "store.cemb", *store);

    // Noisy priors, recorded as ranked LLM answers.
    const auto priors = craft::noisy_priors(labels, prior_opts);
    nlohmann::json fixture = nlohmann::json::object();
    for (const auto& v : labels.verbs) {
      nlohmann::json objects = nlohmann::json::array();
      for (const auto& e : priors->prior(v).entries) objects.push_back(craft::concept_label(e.object));
      fixture[craft::concept_label(craft::normalize_concept_id(v))] = {{"objects", objects}};
    }
    std::ofstream(dir / "llm.json") << fixture.dump(2) << '\n';
    std::cout << dir.string() << ": " << labels.verbs.size() << " verbs, " << labels.categories.size()
              << " categories, " << store->size() << " embeddings\n";
  } catch (const craft::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  }
  return 0;
}
