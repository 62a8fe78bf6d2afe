#pragma once

// Topic extraction: document-frequency term table, chi-square specificity per
// cluster, topic naming and per-cluster document ranking.

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cartograph/clustering.hpp"
#include "cartograph/common.hpp"
#include "cartograph/corpus.hpp"

namespace cartograph {

struct TermEntry {
  std::string term;
  std::size_t doc_frequency = 0;
  bool kept = false;
};

struct TermTable {
  std::vector<TermEntry> terms;  // doc_frequency descending, then lexicographic
  double cutoff_fraction = 0.10;
  // Extracted distinct terms of every document, in corpus order.
  std::vector<std::vector<std::string>> doc_terms;

  std::vector<std::string> kept_terms() const {
    std::vector<std::string> out;
    for (const auto& t : terms)
      if (t.kept) out.push_back(t.term);
    return out;
  }
};

struct ScoredTerm {
  std::string term;
  double chi2 = 0.0;
  std::size_t doc_frequency = 0;

  friend bool operator==(const ScoredTerm&, const ScoredTerm&) = default;
};

struct Topic {
  int cluster_id = 0;
  std::vector<ScoredTerm> specific_terms;
  std::string name;
  std::size_t size = 0;
  std::vector<std::string> top_documents;
  Point2 label_position;
};

struct TopicOptions {
  double cutoff_fraction = 0.10;
  std::size_t name_terms = 10;
  std::size_t rank_terms = 20;
};

inline TermTable build_term_table(const Corpus& corpus, double cutoff_fraction, const TermExtractor& extractor) {
  if (corpus.empty()) throw Error("cannot build a term table from an empty corpus");
  if (!(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0)) throw Error("cutoff fraction must lie in (0, 1]");

  TermTable table;
  table.cutoff_fraction = cutoff_fraction;
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : corpus.documents) {
    auto terms = extractor.extract(doc.text);
    for (const auto& t : terms) ++df[t];
    table.doc_terms.push_back(std::move(terms));
  }
  for (auto& [term, count] : df) table.terms.push_back({term, count, false});
  std::sort(table.terms.begin(), table.terms.end(), [](const TermEntry& a, const TermEntry& b) {
    return a.doc_frequency != b.doc_frequency ? a.doc_frequency > b.doc_frequency : a.term < b.term;
  });
  if (table.terms.empty()) return table;

  // Keep the top ceil(fraction * |terms|) by frequency, plus everything tied
  // with the last one kept.
  const auto keep = std::max<std::size_t>(
      1, std::size_t(std::ceil(cutoff_fraction * double(table.terms.size()) - 1e-9)));
  const std::size_t threshold = table.terms[std::min(keep, table.terms.size()) - 1].doc_frequency;
  for (auto& t : table.terms) t.kept = t.doc_frequency >= threshold;
  return table;
}

inline TermTable build_term_table(const Corpus& corpus, double cutoff_fraction = 0.10) {
  return build_term_table(corpus, cutoff_fraction, HeuristicTermExtractor{});
}

// Pearson chi-square of a 2x2 table without continuity correction; zero when a
// margin is empty.
inline double chi2_2x2(double a, double b, double c, double d) {
  const double n = a + b + c + d;
  const double denom = (a + b) * (c + d) * (a + c) * (b + d);
  if (denom == 0.0) return 0.0;
  const double diff = a * d - b * c;
  return n * diff * diff / denom;
}

// Per cluster (index = label), kept terms positively associated with the
// cluster, ranked by chi-square.
inline std::vector<std::vector<ScoredTerm>> score_specificity(const TermTable& table, const Clustering& clustering) {
  const auto kept = table.kept_terms();
  if (kept.empty()) throw Error("term table has no kept terms");
  if (clustering.labels.size() != table.doc_terms.size())
    throw Error("clustering covers " + std::to_string(clustering.labels.size()) + " documents, corpus has " +
                std::to_string(table.doc_terms.size()));

  const auto k = std::size_t(clustering.k);
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::size_t> df(kept.size(), 0);
  for (std::size_t t = 0; t < kept.size(); ++t) index.emplace(kept[t], t);

  std::vector<std::size_t> cluster_size(k, 0);
  std::vector<std::vector<std::size_t>> in_cluster(k, std::vector<std::size_t>(kept.size(), 0));
  for (std::size_t d = 0; d < table.doc_terms.size(); ++d) {
    const auto c = std::size_t(clustering.labels[d]);
    if (c >= k) throw Error("cluster label out of range");
    ++cluster_size[c];
    for (const auto& term : table.doc_terms[d]) {
      const auto it = index.find(term);
      if (it == index.end()) continue;
      ++in_cluster[c][it->second];
      ++df[it->second];
    }
  }

  // Scores are kept as exact rationals n(ad-bc)^2 / margins so that equal
  // statistics compare equal regardless of floating-point evaluation order.
  using Wide = unsigned __int128;
  struct Exact {
    Wide num;
    Wide den;
    std::size_t term;
  };
  const auto n = std::uint64_t(table.doc_terms.size());
  std::vector<std::vector<ScoredTerm>> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (cluster_size[c] == 0) throw Error("cluster " + std::to_string(c) + " has no documents");
    const auto size = std::uint64_t(cluster_size[c]);
    std::vector<Exact> exact;
    for (std::size_t t = 0; t < kept.size(); ++t) {
      const auto a = std::uint64_t(in_cluster[c][t]);
      const std::uint64_t b = size - a;
      const std::uint64_t cc = std::uint64_t(df[t]) - a;
      const std::uint64_t d = n - size - cc;
      if (a * d <= b * cc) continue;  // not over-represented in c
      const Wide diff = Wide(a * d - b * cc);
      const Wide den = Wide(a + b) * Wide(cc + d) * Wide(a + cc) * Wide(b + d);
      if (den == 0) continue;
      exact.push_back({Wide(n) * diff * diff, den, t});
    }
    std::sort(exact.begin(), exact.end(), [&](const Exact& x, const Exact& y) {
      const Wide lhs = x.num * y.den;
      const Wide rhs = y.num * x.den;
      if (lhs != rhs) return lhs > rhs;
      if (df[x.term] != df[y.term]) return df[x.term] > df[y.term];
      return kept[x.term] < kept[y.term];
    });
    for (const auto& e : exact)
      out[c].push_back({kept[e.term], double(static_cast<long double>(e.num) / static_cast<long double>(e.den)),
                        df[e.term]});
  }
  return out;
}

// Top `n` terms joined with " | ", minus unigrams that appear as a word of a
// bigram within the same selection.
inline std::string name_topic(const std::vector<std::string>& ranked_terms, std::size_t n = 10) {
  const std::size_t take = std::min(n, ranked_terms.size());
  std::unordered_set<std::string> constituents;
  for (std::size_t i = 0; i < take; ++i) {
    const auto& term = ranked_terms[i];
    std::size_t start = 0;
    if (term.find(' ') == std::string::npos) continue;
    while (start <= term.size()) {
      const auto end = std::min(term.find(' ', start), term.size());
      if (end > start) constituents.insert(term.substr(start, end - start));
      start = end + 1;
    }
  }
  std::string name;
  for (std::size_t i = 0; i < take; ++i) {
    const auto& term = ranked_terms[i];
    if (term.find(' ') == std::string::npos && constituents.contains(term)) continue;
    if (!name.empty()) name += " | ";
    name += term;
  }
  return name;
}

inline std::string name_topic(const std::vector<ScoredTerm>& ranked_terms, std::size_t n = 10) {
  std::vector<std::string> terms;
  for (const auto& t : ranked_terms) terms.push_back(t.term);
  return name_topic(terms, n);
}

// Documents of the cluster by number of distinct top-`top_terms` specific
// terms they contain, descending; ties by id ascending.
inline std::vector<std::string> rank_documents(int cluster_id, const std::vector<ScoredTerm>& specific_terms,
                                               const Corpus& corpus, const Clustering& clustering,
                                               const TermTable& table, std::size_t top_terms = 20) {
  std::unordered_set<std::string> wanted;
  for (std::size_t i = 0; i < std::min(top_terms, specific_terms.size()); ++i) wanted.insert(specific_terms[i].term);

  std::vector<std::pair<std::size_t, const std::string*>> scored;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (clustering.labels[d] != cluster_id) continue;
    std::size_t hits = 0;
    for (const auto& term : table.doc_terms[d]) hits += wanted.contains(term) ? 1 : 0;
    scored.emplace_back(hits, &corpus.documents[d].id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : *a.second < *b.second;
  });
  std::vector<std::string> ids;
  ids.reserve(scored.size());
  for (const auto& [_, id] : scored) ids.push_back(*id);
  return ids;
}

// The whole topic stage for a clustered corpus; topic i describes cluster i.
inline std::vector<Topic> build_topics(const Corpus& corpus, const Clustering& clustering,
                                       const TopicOptions& options, const TermExtractor& extractor) {
  if (clustering.labels.size() != corpus.size()) throw Error("clustering and corpus sizes differ");
  const auto table = build_term_table(corpus, options.cutoff_fraction, extractor);
  const auto scored = score_specificity(table, clustering);
  const std::size_t keep_terms = std::max(options.name_terms, options.rank_terms);

  std::vector<Topic> topics(std::size_t(clustering.k));
  for (std::size_t c = 0; c < topics.size(); ++c) {
    auto& topic = topics[c];
    topic.cluster_id = int(c);
    topic.specific_terms.assign(scored[c].begin(),
                                scored[c].begin() + std::ptrdiff_t(std::min(keep_terms, scored[c].size())));
    topic.name = name_topic(topic.specific_terms, options.name_terms);
    topic.size = std::size_t(std::count(clustering.labels.begin(), clustering.labels.end(), int(c)));
    topic.top_documents = rank_documents(int(c), scored[c], corpus, clustering, table, options.rank_terms);
    if (c < clustering.centroids.size()) topic.label_position = clustering.centroids[c];
  }
  return topics;
}

inline std::vector<Topic> build_topics(const Corpus& corpus, const Clustering& clustering,
                                       const TopicOptions& options = {}) {
  return build_topics(corpus, clustering, options, HeuristicTermExtractor{});
}

}  // namespace cartograph
