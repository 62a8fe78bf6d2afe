// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every check uses seeded synthetic fixtures and independent oracles.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "cartograph/cartograph.hpp"
#include "cartograph/cli.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cartograph;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail = what;
    pass = false;
  }
};

int run_cli(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "cartograph");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, errors;
  const int code = cli::run(int(argv.size()), argv.data(), out, errors);
  if (err) *err = errors.str();
  return code;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(CARTOGRAPH_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_planted_corpus(const fixtures::TempDir& dir) {
  const auto planted = fixtures::planted_corpus(3, 14, 10, 5);
  std::string lines;
  for (std::size_t i = 0; i < planted.texts.size(); ++i)
    lines += json{{"id", "d" + std::to_string(i)}, {"text", planted.texts[i]}}.dump() + "\n";
  const auto path = dir / "corpus.jsonl";
  fixtures::write_text(path, lines);
  return path.string();
}

std::vector<Vector> random_vectors(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> normal;
  std::vector<Vector> out(n, Vector(dim));
  for (auto& v : out)
    for (auto& x : v) x = normal(rng);
  return out;
}

FrameAxis unit_axis(std::size_t dim, std::size_t index, const std::string& pos, const std::string& neg) {
  Vector e1(dim, 0.0), e2(dim, 0.0);
  e1[index] = 1.0;
  return make_frame_axis(pos, neg, e1, e2, "synthetic");
}

FramePlot plot_of(const std::vector<Vector>& vectors, double coefficient) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < vectors.size(); ++i) ids.push_back(padded_index(i));
  return build_frame_plot(ids, std::vector<std::size_t>(vectors.size(), 10), vectors,
                          unit_axis(vectors[0].size(), 0, "future", "past"),
                          unit_axis(vectors[0].size(), 1, "work", "leisure"), coefficient);
}

Outcome ari_suite() {
  Outcome o;
  const std::vector<int> a = {0, 0, 1, 1, 2, 2, 2, 0};
  o.require(adjusted_rand_index(a, a) == 1.0, "ARI(a, a) != 1");
  const std::vector<int> b = {1, 1, 0, 2, 2, 2, 0, 0};
  std::vector<int> renamed;
  for (int x : b) renamed.push_back((x + 1) % 3 + 10);
  o.require(adjusted_rand_index(a, b) == adjusted_rand_index(a, renamed), "not invariant to label permutation");
  const std::vector<int> x = {0, 0, 1}, y = {0, 1, 1};
  o.require(adjusted_rand_index(x, y) == -0.5 && oracle::ari_by_pairs(x, y) == -0.5, "three-document case != -0.5");

  fixtures::TempDir dir;
  const auto input = write_planted_corpus(dir);
  const auto cache = (dir / "cache.jsonl").string();
  const std::vector<std::string> names = {"fake-a", "fake-b", "fake-c", "fake-d"};
  for (const auto& name : names) {
    const int code = run_cli({"map", "--input", input, "--embedder-url", "hash://24", "--embedder-name", name, "--cache",
                              cache, "--k", "3", "--iterations", "300", "--cutoff-fraction", "0.3", "--out",
                              (dir / name).string()});
    o.require(code == 0, "map for " + name + " failed");
  }
  const int code = run_cli({"compare", "--input", input, "--cache", cache, "--k", "3", "--iterations", "300",
                            "--cutoff-fraction", "0.3", "--out", (dir / "cmp").string()});
  o.require(code == 0, "compare failed");
  if (code != 0) return o;
  const auto j = json::parse(fixtures::read_text(dir / "cmp" / "compare.json"));
  o.require(j["embedders"] == json(names), "compare did not read the four embedders");
  const auto m = j["ari"].get<std::vector<std::vector<double>>>();
  o.require(m.size() == 4, "matrix is not 4x4");
  for (std::size_t i = 0; i < m.size(); ++i) {
    o.require(m[i].size() == 4, "matrix is not 4x4");
    o.require(m[i][i] == 1.0, "diagonal entry != 1");
    for (std::size_t k = 0; k < m[i].size(); ++k) o.require(m[i][k] == m[k][i], "matrix is not symmetric");
  }
  std::ostringstream d;
  d << "4x4 matrix, ARI(fake-a, fake-b) = " << std::setprecision(3) << m[0][1];
  if (o.pass) o.detail = d.str();
  return o;
}

Outcome chi2_oracle() {
  Outcome o;
  const std::unordered_set<std::string> stop = {"the", "and", "of", "with", "about", "this"};
  const auto planted = fixtures::planted_corpus(5, 10, 20, 17);
  Clustering labels;
  labels.k = 5;
  labels.labels = planted.labels;
  labels.centroids.assign(5, Point2{});
  const auto table = build_term_table(fixtures::corpus_of(planted.texts), 0.10, HeuristicTermExtractor(stop));
  const auto scored = score_specificity(table, labels);
  const auto expected = oracle::chi2_top_terms(planted.texts, planted.labels, 5, stop, 0.10, 10);
  std::size_t mismatches = 0;
  for (std::size_t c = 0; c < 5; ++c) {
    o.require(expected[c].size() == 10, "oracle list shorter than 10");
    std::vector<std::string> got;
    for (std::size_t i = 0; i < std::min<std::size_t>(10, scored[c].size()); ++i) got.push_back(scored[c][i].term);
    if (got != expected[c]) ++mismatches;
  }
  o.require(planted.texts.size() == 50, "fixture is not 50 documents");
  o.require(mismatches == 0, std::to_string(mismatches) + " of 5 top-10 lists differ from the oracle");
  if (o.pass) o.detail = "50 docs, 5 clusters, 0 mismatches";
  return o;
}

Outcome geometry_suite() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  std::size_t checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point2> pts(std::size_t(3 + rng() % 60));
    for (auto& p : pts) p = {normal(rng) * 3.0, normal(rng)};
    const auto hull = convex_hull(pts);
    for (const auto& p : pts) {
      o.require(oracle::inside_or_on(hull, p), "point outside its hull in trial " + std::to_string(trial));
      ++checked;
    }
  }

  std::vector<Point2> sample(500);
  for (auto& p : sample) p = {normal(rng), normal(rng)};
  const double integral = kde_grid(sample).integral();
  o.require(std::abs(integral - 1.0) <= 0.05, "KDE integral " + std::to_string(integral));

  const auto blobs = fixtures::gaussian_blobs(3, 15, 8, 10.0, 1.0, 21);
  auto ec = fixtures::embedded(blobs.vectors, "fixture-embedder");
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < blobs.labels.size(); ++i)
    texts.push_back(fixtures::word("w", std::size_t(blobs.labels[i]), i % 4) + " " +
                    fixtures::word("w", std::size_t(blobs.labels[i]), (i + 1) % 4) + " shared");
  ec.corpus = fixtures::corpus_of(texts);
  PipelineOptions options;
  options.k = 3;
  options.tsne.iterations = 300;
  options.topics.cutoff_fraction = 0.5;
  const auto map = build_map(ec, run_pipeline(ec, options));
  const auto text = serialize_map(map);
  const auto back = parse_map(text);
  o.require(serialize_map(back) == text, "map JSON does not re-serialize identically");
  o.require(back.points == map.points && back.hulls == map.hulls && back.density.values == map.density.values,
            "map JSON round trip changed points, hulls or density");
  for (std::size_t i = 0; i < map.topics.size() && i < back.topics.size(); ++i)
    o.require(back.topics[i].name == map.topics[i].name && back.topics[i].top_documents == map.topics[i].top_documents,
              "map JSON round trip changed topics");

  std::ostringstream d;
  d << "200 hulls (" << checked << " points), KDE integral " << std::setprecision(4) << integral
    << ", round trip lossless";
  if (o.pass) o.detail = d.str();
  return o;
}

Outcome frame_math_suite() {
  Outcome o;
  std::mt19937_64 rng(1000);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t dim = 2 + rng() % 30;
    Vector e1(dim), e2(dim), doc(dim);
    for (auto* v : {&e1, &e2, &doc})
      for (auto& x : *v) x = normal(rng);
    const auto forward = make_frame_axis("p", "n", e1, e2, "e");
    const auto backward = make_frame_axis("n", "p", e2, e1, "e");
    double num = 0, dd = 0, cc = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      num += doc[k] * (e1[k] - e2[k]);
      dd += doc[k] * doc[k];
      cc += (e1[k] - e2[k]) * (e1[k] - e2[k]);
    }
    const double got = frame_coordinate(doc, forward);
    worst = std::max(worst, std::abs(got - num / (std::sqrt(dd) * std::sqrt(cc))));
    o.require(frame_coordinate(doc, backward) == -got, "swapping poles does not negate exactly");
    Vector scaled = doc;
    const double s = scale(rng);
    for (auto& x : scaled) x *= s;
    o.require(std::abs(frame_coordinate(scaled, forward) - got) <= 1e-9, "not invariant to positive scaling");
  }
  o.require(worst <= 1e-9, "deviation from direct formula " + std::to_string(worst));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto plot = plot_of(random_vectors(rng, 97, 6), 0.05 * double(seed));
    o.require(std::abs(quadrant_shares(plot).total() - 1.0) <= 1e-9, "quadrant shares do not sum to 1");
  }

  auto plot = plot_of(random_vectors(rng, 500, 10), 0.0);
  std::vector<std::size_t> counts{plot.retained_count()};
  for (int step = 1; step <= 10; ++step) {
    set_coefficient(plot, step / 10.0);
    o.require(plot.retained_count() <= counts.back(), "retained count increased at coefficient " +
                                                          std::to_string(step / 10.0));
    counts.push_back(plot.retained_count());
  }

  std::ostringstream d;
  d << "max formula deviation " << std::scientific << std::setprecision(1) << worst << ", retained " << counts.front()
    << " -> " << counts.back() << " over 0..1";
  if (o.pass) o.detail = d.str();
  return o;
}

Outcome dpo_planted() {
  Outcome o;
  const auto fixture = fixtures::planted_dpo();
  o.require(fixture.triples.size() == 600, "fixture is not 600 triples");
  const auto result = filter_preference_dataset(fixture.triples, fixture.chosen, fixture.rejected);
  std::set<std::string> planted;
  for (std::size_t i = 0; i < fixture.triples.size(); ++i)
    if (fixture.chosen_labels[i] >= 25) planted.insert(fixture.triples[i].id);
  const std::set<std::string> retained(result.report.retained_triple_ids.begin(),
                                       result.report.retained_triple_ids.end());
  std::size_t hits = 0;
  for (const auto& id : retained) hits += planted.count(id);
  const double precision = retained.empty() ? 0.0 : double(hits) / double(retained.size());
  const double recall = double(hits) / double(planted.size());
  o.require(precision == 1.0 && recall == 1.0,
            "precision " + std::to_string(precision) + ", recall " + std::to_string(recall));
  std::ostringstream d;
  d << retained.size() << " retained, precision " << precision << ", recall " << recall;
  if (o.pass) o.detail = d.str();
  return o;
}

Outcome determinism() {
  Outcome o;
  fixtures::TempDir dir;
  const auto input = write_planted_corpus(dir);
  for (const char* run : {"a", "b"})
    o.require(run_binary("map --input " + input + " --embedder-url hash://24 --k 3 --seed 42 --cutoff-fraction 0.3 "
                         "--out " + (dir / run).string()) == 0,
              "map run failed");
  const auto first = fixtures::read_text(dir / "a" / "map.json");
  o.require(!first.empty() && first == fixtures::read_text(dir / "b" / "map.json"), "map JSON differs between runs");

  const auto blobs = fixtures::gaussian_blobs(3, 20, 16, 10.0, 1.0, 3);
  const auto ec = fixtures::embedded(blobs.vectors);
  PipelineOptions options;
  options.k = 3;
  const auto result = run_pipeline(ec, options);
  const double t = trustworthiness(ec, result.projection, 10);
  o.require(t >= 0.95, "3-blob trustworthiness " + std::to_string(t));
  std::ostringstream d;
  d << "map.json identical (" << first.size() << " bytes), 3-blob trustworthiness " << std::setprecision(4) << t;
  if (o.pass) o.detail = d.str();
  return o;
}

Outcome agreement_curve_check() {
  Outcome o;
  std::mt19937_64 rng(12);
  const auto plot = plot_of(random_vectors(rng, 400, 6), 0.0);
  ExternalLabels labels;
  for (std::size_t i = 0; i < plot.ids.size(); ++i) {
    auto label = classify_by_sign(plot.coords[i].x, plot.axis_x);
    if (std::hypot(plot.coords[i].x, plot.coords[i].y) < 0.1) label = label == "future" ? "past" : "future";
    labels.x[plot.ids[i]] = label;
  }
  const auto curve = agreement_curve(plot, labels, FrameDim::x, {0.0, 0.3});
  o.require(curve[0].rate.has_value() && curve[1].rate.has_value(), "agreement undefined");
  if (!o.pass) return o;
  o.require(*curve[1].rate > *curve[0].rate, "agreement at 0.3 is not above agreement at 0.0");
  std::ostringstream d;
  d << std::setprecision(4) << "agreement " << *curve[0].rate << " at 0.0, " << *curve[1].rate << " at 0.3";
  if (o.pass) o.detail = d.str();
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<Outcome()> check;
    double budget_seconds;  // zero: no runtime bound
  };
  const std::vector<Criterion> criteria = {
      {"ARI suite", ari_suite, 1.0},
      {"Chi2 oracle equivalence", chi2_oracle, 5.0},
      {"Geometry suite", geometry_suite, 0.0},
      {"Frame math suite", frame_math_suite, 0.0},
      {"DPO planted fixture", dpo_planted, 60.0},
      {"Determinism", determinism, 0.0},
      {"Agreement curve", agreement_curve_check, 0.0},
  };
  set_warning_handler([](std::string_view) {});

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && seconds >= c.budget_seconds) {
      outcome.pass = false;
      outcome.detail = "runtime over the " + std::to_string(int(c.budget_seconds)) + " s budget; " + outcome.detail;
    }
    failures += outcome.pass ? 0 : 1;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << "  " << c.name << "  (" << std::fixed << std::setprecision(2)
              << seconds << " s)  " << outcome.detail << std::defaultfloat << "\n";
  }
  std::cout << (criteria.size() - std::size_t(failures)) << "/" << criteria.size() << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}
