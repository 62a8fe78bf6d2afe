#pragma once

// Command-line front end: map, compare, frames, dpo-filter, serve.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cartograph/http.hpp"
#include "json.hpp"

#include "cartograph/clustering.hpp"
#include "cartograph/corpus.hpp"
#include "cartograph/dpo.hpp"
#include "cartograph/embedding.hpp"
#include "cartograph/frames.hpp"
#include "cartograph/geometry.hpp"
#include "cartograph/pipeline.hpp"
#include "cartograph/service.hpp"

namespace cartograph::cli {

namespace fs = std::filesystem;

struct CorpusArgs {
  std::string input;
  std::string format = "jsonl";
  std::string text_field = "text";
  std::string id_field;
  std::string stopwords;
  bool no_dedup = false;

  void add(CLI::App& app, bool required = true) {
    auto* opt = app.add_option("--input", input, "Corpus file (JSONL or CSV)");
    if (required) opt->required();
    app.add_option("--format", format, "Corpus format")->check(CLI::IsMember({"jsonl", "csv"}));
    app.add_option("--text-field", text_field, "Record field holding the document text");
    app.add_option("--id-field", id_field, "Record field holding the document id (default: record index)");
    app.add_option("--stopwords", stopwords, "Stopword file, one word per line");
    app.add_flag("--no-dedup", no_dedup, "Keep exact duplicates");
  }

  std::pair<Corpus, IngestReport> load() const {
    auto loaded = load_corpus(input, format == "csv" ? CorpusFormat::csv : CorpusFormat::jsonl, text_field,
                              id_field.empty() ? std::nullopt : std::optional<std::string>(id_field));
    IngestReport report{loaded.corpus.size(), loaded.skipped, 0};
    if (!no_dedup) {
      auto [deduped, removed] = deduplicate(loaded.corpus);
      loaded.corpus = std::move(deduped);
      report.deduplicated = removed;
    }
    report.loaded = loaded.corpus.size();
    return {std::move(loaded.corpus), report};
  }

  HeuristicTermExtractor extractor() const {
    return stopwords.empty() ? HeuristicTermExtractor{} : HeuristicTermExtractor{load_stopwords(stopwords)};
  }
};

struct EmbedderArgs {
  std::string url;
  std::string name;
  std::size_t batch_size = 64;
  std::string cache;

  void add(CLI::App& app) {
    app.add_option("--embedder-url", url, "Embedding endpoint (http://...), or hash://<dim> for the offline embedder");
    app.add_option("--embedder-name", name, "Embedder name recorded in caches and artifacts");
    app.add_option("--batch-size", batch_size, "Texts per embedding request")->check(CLI::PositiveNumber);
    app.add_option("--cache", cache, "Embedding cache (JSONL)");
  }

  std::shared_ptr<EmbeddingProvider> provider() const {
    if (url.empty()) throw Error("--embedder-url is required");
    return make_provider(name.empty() ? url : name, url);
  }

  // With no url the cache alone must cover the corpus.
  EmbeddedCorpus embed(const Corpus& corpus) const {
    const std::optional<fs::path> cache_path = cache.empty() ? std::nullopt : std::optional<fs::path>(cache);
    if (url.empty()) {
      if (!cache_path || name.empty()) throw Error("need --embedder-url, or --cache with --embedder-name");
      CacheOnlyProvider offline(name);
      return embed_corpus(corpus, offline, {batch_size, 4}, cache_path);
    }
    auto p = provider();
    return embed_corpus(corpus, *p, {batch_size, 4}, cache_path);
  }

  class CacheOnlyProvider final : public EmbeddingProvider {
   public:
    explicit CacheOnlyProvider(std::string name) : name_(std::move(name)) {}
    std::string name() const override { return name_; }
    std::vector<Vector> fetch_embeddings(std::span<const std::string>) override {
      throw Error("embedding cache for '" + name_ + "' does not cover every document and no --embedder-url was given");
    }

   private:
    std::string name_;
  };
};

struct PipelineArgs {
  std::uint64_t seed = 42;
  double perplexity = 30.0;
  int iterations = 1000;
  std::optional<double> learning_rate;
  int k = 15;
  std::uint64_t cluster_seed = 0;
  int restarts = 1;
  double cutoff_fraction = 0.10;
  std::size_t name_terms = 10;
  std::size_t rank_terms = 20;

  void add(CLI::App& app, int default_k) {
    k = default_k;
    app.add_option("--seed", seed, "Projection seed");
    app.add_option("--perplexity", perplexity, "t-SNE perplexity")->check(CLI::PositiveNumber);
    app.add_option("--iterations", iterations, "t-SNE iterations")->check(CLI::PositiveNumber);
    app.add_option("--learning-rate", learning_rate, "t-SNE learning rate (default: n/48 clamped to [50, 200])")
        ->check(CLI::PositiveNumber);
    app.add_option("--k", k, "Number of clusters")->check(CLI::PositiveNumber);
    app.add_option("--cluster-seed", cluster_seed, "k-means seed");
    app.add_option("--restarts", restarts, "k-means restarts (best inertia wins)")->check(CLI::PositiveNumber);
    app.add_option("--cutoff-fraction", cutoff_fraction, "Fraction of most frequent terms kept")
        ->check(CLI::Range(1e-9, 1.0));
    app.add_option("--name-terms", name_terms, "Terms used to name a topic");
    app.add_option("--rank-terms", rank_terms, "Top terms used to rank documents");
  }

  PipelineOptions options() const {
    PipelineOptions o;
    o.seed = seed;
    o.tsne.perplexity = perplexity;
    o.tsne.iterations = iterations;
    o.tsne.learning_rate = learning_rate;
    o.k = k;
    o.cluster_seed = cluster_seed;
    o.restarts = restarts;
    o.topics = {cutoff_fraction, name_terms, rank_terms};
    return o;
  }
};

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

inline std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(std::stod(std::string(trim(item))));
  }
  return out;
}

// "0-10,10-30" -> [0,10), [10,30)
inline std::vector<TokenBucket> parse_buckets(const std::string& text) {
  std::vector<TokenBucket> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw Error("bucket must look like lo-hi: " + item);
    out.push_back({std::stoul(item.substr(0, dash)), std::stoul(item.substr(dash + 1))});
  }
  return out;
}

inline nlohmann::ordered_json compare_embedders(const Corpus& corpus, const std::vector<std::string>& caches,
                                                const PipelineOptions& options, const TermExtractor& extractor) {
  std::vector<std::string> names;
  std::vector<Clustering> clusterings;
  for (const auto& cache_path : caches) {
    const EmbeddingCache cache(cache_path);
    const auto embedders = cache.embedders();
    if (embedders.empty()) throw Error("cache " + cache_path + " holds no embeddings");
    for (const auto& name : embedders) {
      if (std::find(names.begin(), names.end(), name) != names.end()) continue;
      EmbedderArgs::CacheOnlyProvider offline(name);
      const auto ec = embed_corpus(corpus, offline, {}, fs::path(cache_path));
      names.push_back(name);
      clusterings.push_back(run_pipeline(ec, options, extractor).clustering);
    }
  }
  if (names.size() < 2) throw Error("compare needs embeddings from at least two embedders");
  std::vector<std::vector<double>> ari(names.size(), std::vector<double>(names.size(), 1.0));
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      ari[i][j] = ari[j][i] = adjusted_rand_index(clusterings[i], clusterings[j]);
  nlohmann::ordered_json j;
  j["embedders"] = names;
  j["k"] = options.k;
  j["seed"] = options.seed;
  j["ari"] = ari;
  return j;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Dataset cartography: topic maps, embedder comparison, semantic frames and preference filtering"};
  app.set_config("--config", "", "Config file (key = value); command-line flags take precedence");
  app.require_subcommand(1);

  // map
  CorpusArgs map_corpus;
  EmbedderArgs map_embedder;
  PipelineArgs map_pipeline;
  std::string map_out;
  std::size_t resolution = 100;
  auto* map_cmd = app.add_subcommand("map", "Build the topic map JSON");
  map_corpus.add(*map_cmd);
  map_embedder.add(*map_cmd);
  map_pipeline.add(*map_cmd, 15);
  map_cmd->add_option("--resolution", resolution, "Density grid resolution")->check(CLI::PositiveNumber);
  map_cmd->add_option("--out", map_out, "Output directory")->required();

  // compare
  CorpusArgs cmp_corpus;
  PipelineArgs cmp_pipeline;
  std::vector<std::string> cmp_caches;
  std::string cmp_out;
  auto* cmp_cmd = app.add_subcommand("compare", "Pairwise ARI between clusterings from several embedders");
  cmp_corpus.add(*cmp_cmd);
  cmp_pipeline.add(*cmp_cmd, 15);
  cmp_cmd->add_option("--cache", cmp_caches, "Embedding caches (repeatable, at least two embedders)")
      ->required()
      ->expected(1, -1);
  cmp_cmd->add_option("--out", cmp_out, "Output directory")->required();

  // frames
  CorpusArgs fr_corpus;
  EmbedderArgs fr_embedder;
  std::string axis_x, axis_y, labels_path, curve = "0.1,0.2,0.3,0.4", buckets, fr_out;
  double coefficient = 0.25;
  int frame_k = 0;
  std::uint64_t frame_seed = 0;
  auto* fr_cmd = app.add_subcommand("frames", "Semantic frame report for two axes");
  fr_corpus.add(*fr_cmd);
  fr_embedder.add(*fr_cmd);
  fr_cmd->add_option("--axis-x", axis_x, "\"positive::negative\" sentences of the x axis")->required();
  fr_cmd->add_option("--axis-y", axis_y, "\"positive::negative\" sentences of the y axis")->required();
  fr_cmd->add_option("--coefficient", coefficient, "Radius filter coefficient")->check(CLI::Range(0.0, 1.0));
  fr_cmd->add_option("--labels", labels_path, "External labels JSONL {id,label_x,label_y}");
  fr_cmd->add_option("--curve", curve, "Comma-separated coefficients for agreement curves");
  fr_cmd->add_option("--buckets", buckets, "Token-length buckets, e.g. 0-10,10-30,30-100000");
  fr_cmd->add_option("--frame-k", frame_k, "Cluster retained frame coordinates into k groups");
  fr_cmd->add_option("--cluster-seed", frame_seed, "Seed for frame clustering");
  fr_cmd->add_option("--out", fr_out, "Output directory")->required();

  // dpo-filter
  EmbedderArgs dpo_embedder;
  PipelineArgs dpo_pipeline;
  std::string dpo_input, dpo_out, dpo_stopwords;
  std::size_t threshold = 2;
  std::size_t top_n = 10;
  auto* dpo_cmd = app.add_subcommand("dpo-filter", "Keep triples whose chosen answer lies in a topic absent from the rejected side");
  dpo_cmd->add_option("--input", dpo_input, "Preference JSONL with prompt/chosen/rejected")->required();
  dpo_embedder.add(*dpo_cmd);
  dpo_pipeline.add(*dpo_cmd, 30);
  dpo_cmd->add_option("--threshold", threshold, "Shared top terms that make two topics overlap");
  dpo_cmd->add_option("--top-n", top_n, "Top terms compared per topic");
  dpo_cmd->add_option("--stopwords", dpo_stopwords, "Stopword file");
  dpo_cmd->add_option("--out", dpo_out, "Filtered JSONL output")->required();

  // serve
  std::string serve_map, serve_compare, host = "0.0.0.0";
  int port = 7860;
  CorpusArgs sv_corpus;
  EmbedderArgs sv_embedder;
  auto* sv_cmd = app.add_subcommand("serve", "Serve a map JSON over HTTP");
  sv_cmd->add_option("--map", serve_map, "Map JSON produced by `map`")->required();
  sv_cmd->add_option("--compare", serve_compare, "ARI matrix produced by `compare`");
  sv_cmd->add_option("--host", host, "Bind address");
  sv_cmd->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));
  sv_corpus.add(*sv_cmd, false);
  sv_embedder.add(*sv_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (map_cmd->parsed()) {
      auto [corpus, report] = map_corpus.load();
      write_ingest_report(map_out, report);
      const auto ec = map_embedder.embed(corpus);
      const auto extractor = map_corpus.extractor();
      const auto result = run_pipeline(ec, map_pipeline.options(), extractor);
      const auto map = build_map(ec, result, {resolution, std::nullopt});
      write_file(fs::path(map_out) / "map.json", serialize_map(map));
      out << "wrote " << (fs::path(map_out) / "map.json").string() << " (" << map.points.size() << " documents, "
          << map.k << " topics)\n";
    } else if (cmp_cmd->parsed()) {
      auto [corpus, report] = cmp_corpus.load();
      write_ingest_report(cmp_out, report);
      const auto j = compare_embedders(corpus, cmp_caches, cmp_pipeline.options(), cmp_corpus.extractor());
      write_file(fs::path(cmp_out) / "compare.json", j.dump(2) + "\n");
      out << "wrote " << (fs::path(cmp_out) / "compare.json").string() << '\n';
    } else if (fr_cmd->parsed()) {
      auto [corpus, report] = fr_corpus.load();
      write_ingest_report(fr_out, report);
      const auto provider = fr_embedder.provider();
      auto ec = embed_corpus(corpus, *provider, {fr_embedder.batch_size, 4},
                             fr_embedder.cache.empty() ? std::nullopt : std::optional<fs::path>(fr_embedder.cache));
      const auto [px, nx] = parse_axis_spec(axis_x);
      const auto [py, ny] = parse_axis_spec(axis_y);
      const auto plot = build_frame_plot(ec, embed_frame_axis(px, nx, *provider), embed_frame_axis(py, ny, *provider),
                                         coefficient);
      std::optional<ExternalLabels> labels;
      if (!labels_path.empty()) labels = load_labels(labels_path);
      FrameReportOptions options;
      options.labels = labels ? &*labels : nullptr;
      options.curve_coefficients = parse_number_list(curve);
      if (!buckets.empty()) options.token_buckets = parse_buckets(buckets);
      if (frame_k > 0) options.clusters = frame_k;
      options.cluster_seed = frame_seed;
      write_file(fs::path(fr_out) / "frame_report.json", frame_report(plot, options).dump(2) + "\n");
      out << "wrote " << (fs::path(fr_out) / "frame_report.json").string() << " (" << plot.retained_count() << " of "
          << plot.coords.size() << " documents retained)\n";
    } else if (dpo_cmd->parsed()) {
      const auto triples = load_preference_triples(dpo_input);
      const HeuristicTermExtractor extractor =
          dpo_stopwords.empty() ? HeuristicTermExtractor{} : HeuristicTermExtractor{load_stopwords(dpo_stopwords)};
      auto chosen_corpus = answers_corpus(triples, true);
      auto rejected_corpus = answers_corpus(triples, false);
      // The cache is keyed by id, so the two sides get distinct id prefixes there.
      const auto embed_side = [&](Corpus corpus, const std::string& prefix) {
        Corpus keyed = corpus;
        for (auto& d : keyed.documents) d.id = prefix + d.id;
        auto ec = dpo_embedder.embed(keyed);
        ec.corpus = std::move(corpus);
        return ec;
      };
      const auto ec_chosen = embed_side(chosen_corpus, "chosen/");
      const auto ec_rejected = embed_side(rejected_corpus, "rejected/");
      DpoOptions options;
      options.pipeline = dpo_pipeline.options();
      options.shared_threshold = threshold;
      options.top_n = top_n;
      const auto result = filter_preference_dataset(triples, ec_chosen, ec_rejected, options, extractor);
      write_triples(dpo_out, result.filtered);
      const auto report_path = fs::path(dpo_out).parent_path() / "overlap_report.json";
      write_file(report_path, overlap_report_to_json(result.report, triples.size()).dump(2) + "\n");
      out << "kept " << result.filtered.size() << " of " << triples.size() << " triples ("
          << result.report.unique_chosen_topic_ids.size() << " unique topics of " << options.pipeline.k << ")\n";
    } else if (sv_cmd->parsed()) {
      std::ifstream in(serve_map);
      if (!in) throw Error("cannot open map " + serve_map);
      std::stringstream buffer;
      buffer << in.rdbuf();
      auto map = parse_map(buffer.str());
      std::optional<FrameCapability> frames;
      if (!sv_embedder.url.empty() && !sv_corpus.input.empty()) {
        auto [corpus, report] = sv_corpus.load();
        auto provider = sv_embedder.provider();
        auto ec = embed_corpus(corpus, *provider, {sv_embedder.batch_size, 4},
                               sv_embedder.cache.empty() ? std::nullopt : std::optional<fs::path>(sv_embedder.cache));
        frames = FrameCapability{std::move(ec), std::move(provider)};
      }
      std::optional<nlohmann::json> compare;
      if (!serve_compare.empty()) {
        std::ifstream cin(serve_compare);
        if (!cin) throw Error("cannot open " + serve_compare);
        compare = nlohmann::json::parse(cin);
      }
      Session session(std::move(map), std::move(frames), std::move(compare));
      httplib::Server server;
      mount_routes(server, session);
      out << "serving on http://" << host << ':' << port << '\n' << std::flush;
      if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace cartograph::cli
