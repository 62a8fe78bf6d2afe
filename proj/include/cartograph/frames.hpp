#pragma once

// Semantic frame analysis. A frame axis is the difference between the
// embeddings of two pole sentences; a document's coordinate on the axis is its
// cosine similarity with that difference. Two axes give a 2D plot, centered at
// the origin, with a central exclusion circle for uncertain documents.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "cartograph/clustering.hpp"
#include "cartograph/common.hpp"
#include "cartograph/embedding.hpp"

namespace cartograph {

struct FrameAxis {
  std::string positive_text;
  std::string negative_text;
  Vector positive;   // embedding of positive_text
  Vector negative;   // embedding of negative_text
  Vector direction;  // positive - negative
  std::string embedder_name;
};

inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

inline FrameAxis make_frame_axis(std::string positive_text, std::string negative_text, Vector positive,
                                 Vector negative, std::string embedder_name) {
  if (positive.size() != negative.size()) throw Error("frame pole embeddings differ in dimension");
  Vector direction(positive.size());
  for (std::size_t i = 0; i < positive.size(); ++i) direction[i] = positive[i] - negative[i];
  if (!(norm(direction) > 0.0))
    throw Error("frame poles '" + positive_text + "' and '" + negative_text + "' embed identically");
  return {std::move(positive_text), std::move(negative_text), std::move(positive), std::move(negative),
          std::move(direction), std::move(embedder_name)};
}

inline FrameAxis embed_frame_axis(const std::string& positive_text, const std::string& negative_text,
                                  EmbeddingProvider& provider) {
  const std::vector<std::string> texts{positive_text, negative_text};
  auto vectors = provider.fetch_embeddings(texts);
  if (vectors.size() != 2) throw Error("count mismatch embedding frame poles");
  return make_frame_axis(positive_text, negative_text, std::move(vectors[0]), std::move(vectors[1]), provider.name());
}

// Parses "positive::negative".
inline std::pair<std::string, std::string> parse_axis_spec(const std::string& spec) {
  const auto sep = spec.find("::");
  if (sep == std::string::npos || sep == 0 || sep + 2 >= spec.size())
    throw Error("axis must look like 'positive text::negative text', got '" + spec + "'");
  return {spec.substr(0, sep), spec.substr(sep + 2)};
}

inline double frame_coordinate(const Vector& doc, const FrameAxis& axis) {
  if (doc.size() != axis.direction.size()) throw Error("document and frame dimensions differ");
  const double doc_norm = norm(doc);
  if (!(doc_norm > 0.0)) throw Error("zero-norm document embedding");
  const double c = dot(doc, axis.direction) / (doc_norm * norm(axis.direction));
  return std::clamp(c, -1.0, 1.0);
}

enum class FrameDim { x, y };

struct FramePlot {
  FrameAxis axis_x;
  FrameAxis axis_y;
  std::vector<std::string> ids;
  std::vector<std::size_t> token_counts;
  std::vector<Point2> raw;     // cosine coordinates before centering
  std::vector<Point2> coords;  // centered
  double coefficient = 0.0;
  double max_abs = 0.0;  // largest |coordinate| over both centered axes
  std::vector<bool> retained;

  double radius() const { return radius_for(coefficient); }
  double radius_for(double c) const { return c * max_abs; }

  std::vector<bool> retained_for(double c) const {
    const double r = radius_for(c);
    std::vector<bool> out(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) out[i] = std::hypot(coords[i].x, coords[i].y) >= r;
    return out;
  }

  std::size_t retained_count() const { return std::size_t(std::count(retained.begin(), retained.end(), true)); }

  const FrameAxis& axis(FrameDim d) const { return d == FrameDim::x ? axis_x : axis_y; }
  static double pick(const Point2& p, FrameDim d) { return d == FrameDim::x ? p.x : p.y; }
};

inline void set_coefficient(FramePlot& plot, double coefficient) {
  if (!(coefficient >= 0.0 && coefficient <= 1.0)) throw Error("coefficient must lie in [0, 1]");
  plot.coefficient = coefficient;
  plot.retained = plot.retained_for(coefficient);
}

// Builds the plot from raw per-document vectors. Centering subtracts the mean
// per axis; the filter keeps documents at distance >= coefficient * max_abs.
inline FramePlot build_frame_plot(const std::vector<std::string>& ids, const std::vector<std::size_t>& token_counts,
                                  const std::vector<Vector>& vectors, FrameAxis axis_x, FrameAxis axis_y,
                                  double coefficient) {
  if (ids.size() != vectors.size() || token_counts.size() != vectors.size())
    throw Error("frame plot inputs have inconsistent lengths");
  FramePlot plot{std::move(axis_x), std::move(axis_y), ids, token_counts, {}, {}, 0.0, 0.0, {}};
  plot.raw.reserve(vectors.size());
  double mx = 0, my = 0;
  for (const auto& v : vectors) {
    plot.raw.push_back({frame_coordinate(v, plot.axis_x), frame_coordinate(v, plot.axis_y)});
    mx += plot.raw.back().x;
    my += plot.raw.back().y;
  }
  if (!vectors.empty()) {
    mx /= double(vectors.size());
    my /= double(vectors.size());
  }
  for (const auto& p : plot.raw) {
    plot.coords.push_back({p.x - mx, p.y - my});
    plot.max_abs = std::max({plot.max_abs, std::abs(plot.coords.back().x), std::abs(plot.coords.back().y)});
  }
  set_coefficient(plot, coefficient);
  return plot;
}

inline FramePlot build_frame_plot(const EmbeddedCorpus& ec, FrameAxis axis_x, FrameAxis axis_y, double coefficient) {
  for (const auto* axis : {&axis_x, &axis_y})
    if (axis->embedder_name != ec.embedder_name)
      throw Error("embedder mismatch: frame axis from '" + axis->embedder_name + "', documents from '" +
                  ec.embedder_name + "'");
  std::vector<std::string> ids;
  std::vector<std::size_t> tokens;
  for (const auto& d : ec.corpus.documents) {
    ids.push_back(d.id);
    tokens.push_back(d.token_count);
  }
  return build_frame_plot(ids, tokens, ec.vectors, std::move(axis_x), std::move(axis_y), coefficient);
}

// Shares of retained documents per sign quadrant; zero counts as positive.
struct QuadrantShares {
  double pos_pos = 0.0;  // x >= 0, y >= 0
  double neg_pos = 0.0;  // x <  0, y >= 0
  double neg_neg = 0.0;  // x <  0, y <  0
  double pos_neg = 0.0;  // x >= 0, y <  0

  double total() const { return pos_pos + neg_pos + neg_neg + pos_neg; }
};

inline QuadrantShares quadrant_shares(const FramePlot& plot) {
  QuadrantShares s;
  std::size_t n = 0;
  for (std::size_t i = 0; i < plot.coords.size(); ++i) {
    if (!plot.retained[i]) continue;
    ++n;
    const bool px = plot.coords[i].x >= 0.0;
    const bool py = plot.coords[i].y >= 0.0;
    (px ? (py ? s.pos_pos : s.pos_neg) : (py ? s.neg_pos : s.neg_neg)) += 1.0;
  }
  if (n == 0) throw Error("no retained documents to compute quadrant shares");
  for (double* v : {&s.pos_pos, &s.neg_pos, &s.neg_neg, &s.pos_neg}) *v /= double(n);
  return s;
}

// Positive pole label iff coordinate >= 0.
inline const std::string& classify_by_sign(double coordinate, const FrameAxis& axis) {
  return coordinate >= 0.0 ? axis.positive_text : axis.negative_text;
}

inline const std::string& classify_document(const FramePlot& plot, std::size_t index, FrameDim dim) {
  if (!plot.retained.at(index)) throw Error("document '" + plot.ids[index] + "' was removed by the radius filter");
  return classify_by_sign(FramePlot::pick(plot.coords[index], dim), plot.axis(dim));
}

// External reference labels per document id; "None" (or absent) means the
// labeler abstained on that axis.
struct ExternalLabels {
  std::unordered_map<std::string, std::string> x;
  std::unordered_map<std::string, std::string> y;

  const std::unordered_map<std::string, std::string>& for_dim(FrameDim d) const { return d == FrameDim::x ? x : y; }
};

// JSONL records {"id":..., "label_x":..., "label_y":...}.
inline ExternalLabels load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open labels file: " + path.string());
  ExternalLabels labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      if (j.contains("label_x") && j["label_x"].is_string()) labels.x[id] = j["label_x"].get<std::string>();
      if (j.contains("label_y") && j["label_y"].is_string()) labels.y[id] = j["label_y"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error("labels line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return labels;
}

struct AgreementPoint {
  double coefficient = 0.0;
  std::size_t retained = 0;
  std::size_t comparable = 0;
  std::optional<double> rate;  // empty when nothing is comparable
};

namespace detail {
inline AgreementPoint agreement_over(const FramePlot& plot, const ExternalLabels& labels, FrameDim dim,
                                     const std::vector<bool>& include, double coefficient) {
  AgreementPoint point{coefficient, 0, 0, std::nullopt};
  std::size_t matches = 0;
  const auto& table = labels.for_dim(dim);
  for (std::size_t i = 0; i < plot.coords.size(); ++i) {
    if (!include[i]) continue;
    ++point.retained;
    const auto it = table.find(plot.ids[i]);
    if (it == table.end() || it->second == "None") continue;
    ++point.comparable;
    if (classify_by_sign(FramePlot::pick(plot.coords[i], dim), plot.axis(dim)) == it->second) ++matches;
  }
  if (point.comparable > 0) point.rate = double(matches) / double(point.comparable);
  return point;
}
}  // namespace detail

inline std::vector<AgreementPoint> agreement_curve(const FramePlot& plot, const ExternalLabels& labels, FrameDim dim,
                                                   const std::vector<double>& coefficients) {
  std::vector<AgreementPoint> curve;
  for (double c : coefficients) {
    if (!(c >= 0.0 && c <= 1.0)) throw Error("coefficient must lie in [0, 1]");
    curve.push_back(detail::agreement_over(plot, labels, dim, plot.retained_for(c), c));
  }
  return curve;
}

struct TokenBucket {
  std::size_t lo = 0;  // inclusive
  std::size_t hi = 0;  // exclusive
};

struct BucketAgreement {
  TokenBucket bucket;
  AgreementPoint agreement;
};

// Agreement restricted to retained documents whose token count falls in each
// [lo, hi) bucket, at the plot's current coefficient.
inline std::vector<BucketAgreement> length_bucket_agreement(const FramePlot& plot, const ExternalLabels& labels,
                                                            FrameDim dim, std::vector<TokenBucket> buckets) {
  auto sorted = buckets;
  std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a.lo < b.lo; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].hi <= sorted[i].lo) throw Error("token bucket must satisfy lo < hi");
    if (i > 0 && sorted[i].lo < sorted[i - 1].hi) throw Error("token buckets overlap");
  }
  std::vector<BucketAgreement> out;
  for (const auto& b : buckets) {
    std::vector<bool> include(plot.coords.size());
    for (std::size_t i = 0; i < include.size(); ++i)
      include[i] = plot.retained[i] && plot.token_counts[i] >= b.lo && plot.token_counts[i] < b.hi;
    out.push_back({b, detail::agreement_over(plot, labels, dim, include, plot.coefficient)});
  }
  return out;
}

// k-means over the retained frame coordinates; labels follow retained order.
inline Clustering frame_clusters(const FramePlot& plot, int k = 5, std::uint64_t seed = 0,
                                 const KMeansOptions& options = {}) {
  std::vector<Point2> points;
  for (std::size_t i = 0; i < plot.coords.size(); ++i)
    if (plot.retained[i]) points.push_back(plot.coords[i]);
  if (points.size() < std::size_t(k))
    throw Error("frame clustering needs at least k=" + std::to_string(k) + " retained documents, have " +
                std::to_string(points.size()));
  return kmeans(points, k, seed, options);
}

inline nlohmann::ordered_json agreement_to_json(const std::vector<AgreementPoint>& curve) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : curve) {
    nlohmann::ordered_json j;
    j["coefficient"] = p.coefficient;
    j["retained"] = p.retained;
    j["rate"] = p.rate ? nlohmann::ordered_json(*p.rate) : nlohmann::ordered_json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

struct FrameReportOptions {
  const ExternalLabels* labels = nullptr;
  std::vector<double> curve_coefficients = {0.1, 0.2, 0.3, 0.4};
  std::vector<TokenBucket> token_buckets;
  std::optional<int> clusters;  // k for frame-space clustering
  std::uint64_t cluster_seed = 0;
  bool include_documents = true;
};

inline nlohmann::ordered_json frame_report(const FramePlot& plot, const FrameReportOptions& options = {}) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["axis_x"] = {{"positive", plot.axis_x.positive_text}, {"negative", plot.axis_x.negative_text}};
  j["axis_y"] = {{"positive", plot.axis_y.positive_text}, {"negative", plot.axis_y.negative_text}};
  j["embedder"] = plot.axis_x.embedder_name;
  j["coefficient"] = plot.coefficient;
  j["radius"] = plot.radius();
  j["documents"] = plot.coords.size();
  j["retained"] = plot.retained_count();
  if (plot.retained_count() > 0) {
    const auto s = quadrant_shares(plot);
    j["shares"] = {{"pos_pos", s.pos_pos}, {"neg_pos", s.neg_pos}, {"neg_neg", s.neg_neg}, {"pos_neg", s.pos_neg}};
  } else {
    j["shares"] = nullptr;
  }
  std::optional<Clustering> clusters;
  if (options.clusters) clusters = frame_clusters(plot, *options.clusters, options.cluster_seed);
  if (options.include_documents) {
    auto docs = ordered_json::array();
    std::size_t retained_index = 0;
    for (std::size_t i = 0; i < plot.coords.size(); ++i) {
      ordered_json d;
      d["id"] = plot.ids[i];
      d["x"] = plot.coords[i].x;
      d["y"] = plot.coords[i].y;
      d["retained"] = bool(plot.retained[i]);
      if (plot.retained[i]) {
        d["label_x"] = classify_by_sign(plot.coords[i].x, plot.axis_x);
        d["label_y"] = classify_by_sign(plot.coords[i].y, plot.axis_y);
        if (clusters) d["cluster"] = clusters->labels[retained_index];
        ++retained_index;
      }
      docs.push_back(std::move(d));
    }
    j["points"] = std::move(docs);
  }
  if (options.labels) {
    j["agreement"] = {
        {"x", agreement_to_json(agreement_curve(plot, *options.labels, FrameDim::x, options.curve_coefficients))},
        {"y", agreement_to_json(agreement_curve(plot, *options.labels, FrameDim::y, options.curve_coefficients))}};
    if (!options.token_buckets.empty()) {
      auto buckets = ordered_json::array();
      const auto bx = length_bucket_agreement(plot, *options.labels, FrameDim::x, options.token_buckets);
      const auto by = length_bucket_agreement(plot, *options.labels, FrameDim::y, options.token_buckets);
      for (std::size_t i = 0; i < bx.size(); ++i) {
        const auto rate = [](const AgreementPoint& p) {
          return p.rate ? ordered_json(*p.rate) : ordered_json(nullptr);
        };
        buckets.push_back({{"lo", bx[i].bucket.lo},
                           {"hi", bx[i].bucket.hi},
                           {"retained", bx[i].agreement.retained},
                           {"rate_x", rate(bx[i].agreement)},
                           {"rate_y", rate(by[i].agreement)}});
      }
      j["length_buckets"] = std::move(buckets);
    }
  }
  return j;
}

}  // namespace cartograph
