#pragma once

// Preference-dataset filtering by topic diff: topics of the chosen answers
// that share too few top terms with every topic of the rejected answers are
// "unique", and only triples whose chosen answer falls in a unique topic are
// kept.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "cartograph/common.hpp"
#include "cartograph/corpus.hpp"
#include "cartograph/embedding.hpp"
#include "cartograph/pipeline.hpp"

namespace cartograph {

struct PreferenceTriple {
  std::string id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  std::string raw;  // original JSONL line, re-emitted verbatim when kept
};

namespace detail {

// Plain string, or a ChatML message list: the last message with `role`
// (falling back to the last message) supplies the text.
inline std::string message_text(const nlohmann::json& v, const char* role) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array() && !v.empty()) {
    for (auto it = v.rbegin(); it != v.rend(); ++it)
      if (it->is_object() && it->value("role", "") == role && it->contains("content"))
        return it->at("content").get<std::string>();
    const auto& last = v.back();
    if (last.is_object() && last.contains("content")) return last.at("content").get<std::string>();
  }
  throw Error(std::string("unsupported message value for role '") + role + "'");
}

}  // namespace detail

inline std::vector<PreferenceTriple> load_preference_triples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open preference dataset: " + path.string());
  std::vector<PreferenceTriple> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(where + "malformed JSON record");
    }
    PreferenceTriple t;
    try {
      t.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                              : padded_index(out.size());
      t.prompt = detail::message_text(j.at("prompt"), "user");
      t.chosen = detail::message_text(j.at("chosen"), "assistant");
      t.rejected = detail::message_text(j.at("rejected"), "assistant");
    } catch (const nlohmann::json::exception& e) {
      throw Error(where + e.what());
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
    if (trim(t.prompt).empty() || trim(t.chosen).empty() || trim(t.rejected).empty())
      throw Error(where + "prompt, chosen and rejected must all be non-empty");
    if (!ids.insert(t.id).second) throw Error(where + "duplicate id '" + t.id + "'");
    t.raw = line;
    out.push_back(std::move(t));
  }
  return out;
}

inline Corpus answers_corpus(const std::vector<PreferenceTriple>& triples, bool chosen) {
  Corpus c;
  c.source_path = chosen ? "chosen" : "rejected";
  for (const auto& t : triples) c.documents.push_back(make_document(t.id, chosen ? t.chosen : t.rejected));
  return c;
}

struct TopicOverlap {
  int chosen_topic = 0;
  int rejected_topic = 0;
  std::vector<std::string> shared_terms;
};

struct OverlapReport {
  std::vector<Topic> topics_chosen;
  std::vector<Topic> topics_rejected;
  std::vector<TopicOverlap> overlapping_pairs;
  std::set<int> unique_chosen_topic_ids;
  std::vector<std::string> retained_triple_ids;  // input order
};

// Two topics overlap when at least `shared_threshold` of their top `top_n`
// terms coincide exactly.
inline OverlapReport topic_diff(const std::vector<Topic>& chosen, const std::vector<Topic>& rejected,
                                std::size_t shared_threshold = 2, std::size_t top_n = 10) {
  const auto top_terms = [top_n](const Topic& t) {
    std::vector<std::string> terms;
    for (std::size_t i = 0; i < std::min(top_n, t.specific_terms.size()); ++i) terms.push_back(t.specific_terms[i].term);
    return terms;
  };
  OverlapReport report;
  report.topics_chosen = chosen;
  report.topics_rejected = rejected;
  for (const auto& a : chosen) {
    const auto terms_a = top_terms(a);
    bool overlaps = false;
    for (const auto& b : rejected) {
      const auto terms_b = top_terms(b);
      std::vector<std::string> shared;
      for (const auto& t : terms_a)
        if (std::find(terms_b.begin(), terms_b.end(), t) != terms_b.end()) shared.push_back(t);
      if (shared.size() >= shared_threshold) {
        overlaps = true;
        report.overlapping_pairs.push_back({a.cluster_id, b.cluster_id, std::move(shared)});
      }
    }
    if (!overlaps) report.unique_chosen_topic_ids.insert(a.cluster_id);
  }
  return report;
}

struct DpoOptions {
  PipelineOptions pipeline = [] {
    PipelineOptions p;
    p.k = 30;
    return p;
  }();
  std::size_t shared_threshold = 2;
  std::size_t top_n = 10;
};

struct DpoResult {
  OverlapReport report;
  Clustering chosen_clustering;
  Clustering rejected_clustering;
  std::vector<PreferenceTriple> filtered;
};

inline DpoResult filter_preference_dataset(const std::vector<PreferenceTriple>& triples,
                                           const EmbeddedCorpus& ec_chosen, const EmbeddedCorpus& ec_rejected,
                                           const DpoOptions& options = {},
                                           const TermExtractor& extractor = HeuristicTermExtractor{}) {
  if (ec_chosen.size() != triples.size() || ec_rejected.size() != triples.size())
    throw Error("misaligned corpora: " + std::to_string(triples.size()) + " triples, " +
                std::to_string(ec_chosen.size()) + " chosen and " + std::to_string(ec_rejected.size()) +
                " rejected embeddings");
  for (std::size_t i = 0; i < triples.size(); ++i)
    if (ec_chosen.corpus.documents[i].id != triples[i].id || ec_rejected.corpus.documents[i].id != triples[i].id)
      throw Error("misaligned corpora at triple '" + triples[i].id + "'");

  auto rejected_future = std::async(std::launch::async, [&] { return run_pipeline(ec_rejected, options.pipeline, extractor); });
  auto chosen = run_pipeline(ec_chosen, options.pipeline, extractor);
  auto rejected = rejected_future.get();

  DpoResult result;
  result.report = topic_diff(chosen.topics, rejected.topics, options.shared_threshold, options.top_n);
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (result.report.unique_chosen_topic_ids.contains(chosen.clustering.labels[i])) {
      result.report.retained_triple_ids.push_back(triples[i].id);
      result.filtered.push_back(triples[i]);
    }
  }
  result.chosen_clustering = std::move(chosen.clustering);
  result.rejected_clustering = std::move(rejected.clustering);
  return result;
}

inline nlohmann::ordered_json overlap_report_to_json(const OverlapReport& report, std::size_t input_count) {
  using nlohmann::ordered_json;
  const auto topics_json = [](const std::vector<Topic>& topics) {
    auto arr = ordered_json::array();
    for (const auto& t : topics) {
      std::vector<std::string> terms;
      for (const auto& s : t.specific_terms) terms.push_back(s.term);
      arr.push_back({{"cluster", t.cluster_id}, {"name", t.name}, {"size", t.size}, {"terms", terms}});
    }
    return arr;
  };
  ordered_json j;
  j["input_triples"] = input_count;
  j["retained_triples"] = report.retained_triple_ids.size();
  j["unique_chosen_topics"] = report.unique_chosen_topic_ids;
  auto pairs = ordered_json::array();
  for (const auto& p : report.overlapping_pairs)
    pairs.push_back({{"chosen", p.chosen_topic}, {"rejected", p.rejected_topic}, {"shared_terms", p.shared_terms}});
  j["overlapping_pairs"] = std::move(pairs);
  j["topics_chosen"] = topics_json(report.topics_chosen);
  j["topics_rejected"] = topics_json(report.topics_rejected);
  j["retained_ids"] = report.retained_triple_ids;
  return j;
}

inline void write_triples(const std::filesystem::path& path, const std::vector<PreferenceTriple>& triples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : triples) out << t.raw << '\n';
}

}  // namespace cartograph
