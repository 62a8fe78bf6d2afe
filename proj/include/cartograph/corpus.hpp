#pragma once

// Corpus ingestion: JSONL/CSV loading, normalized-text deduplication and
// candidate term extraction (unigrams + bigrams).

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "cartograph/common.hpp"

namespace cartograph {

struct Document {
  std::string id;
  std::string text;
  std::map<std::string, std::string> metadata;
  std::size_t token_count = 0;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class CorpusFormat { jsonl, csv };

struct Corpus {
  std::vector<Document> documents;
  std::string source_path;
  CorpusFormat format = CorpusFormat::jsonl;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct IngestReport {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::size_t deduplicated = 0;
};

struct LoadedCorpus {
  Corpus corpus;
  std::size_t skipped = 0;
};

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::size_t whitespace_token_count(std::string_view s) {
  std::size_t count = 0;
  bool in_token = false;
  for (unsigned char c : s) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

inline std::string padded_index(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

inline Document make_document(std::string id, std::string text,
                              std::map<std::string, std::string> metadata = {}) {
  Document doc{std::move(id), std::move(text), std::move(metadata), 0};
  doc.token_count = std::max<std::size_t>(1, whitespace_token_count(doc.text));
  return doc;
}

namespace detail {

// RFC 4180 reader. Returns false at end of input. `line` tracks the 1-based
// physical line on which the record started.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                            std::size_t& line, std::size_t& record_line) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  record_line = line;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  for (;;) {
    const int ch = in.get();
    if (ch == std::char_traits<char>::eof()) {
      if (quoted) throw Error("csv line " + std::to_string(record_line) + ": unterminated quoted field");
      fields.push_back(std::move(field));
      return true;
    }
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_was_quoted)
        throw Error("csv line " + std::to_string(line) + ": stray quote inside field");
      quoted = true;
      field_was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
    } else if (c == '\r' && in.peek() == '\n') {
      // CRLF terminator; the '\n' ends the record on the next turn.
    } else if (c == '\n') {
      ++line;
      fields.push_back(std::move(field));
      return true;
    } else {
      if (field_was_quoted)
        throw Error("csv line " + std::to_string(line) + ": data after closing quote");
      field.push_back(c);
    }
  }
}

inline std::string scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return {};
  return v.dump();
}

}  // namespace detail

// Loads a corpus. Records whose text is empty after trimming are skipped and
// counted; malformed records abort with the offending line number.
inline LoadedCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                const std::string& text_field,
                                const std::optional<std::string>& id_field = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file: " + path.string());

  LoadedCorpus out;
  out.corpus.source_path = path.string();
  out.corpus.format = format;
  std::unordered_set<std::string> seen_ids;
  std::size_t record_index = 0;

  const auto add = [&](std::size_t line, std::string id, const std::string& text,
                       std::map<std::string, std::string> metadata) {
    const std::size_t index = record_index++;
    if (trim(text).empty()) {
      ++out.skipped;
      return;
    }
    if (!id_field) id = padded_index(index);
    if (id.empty()) throw Error("line " + std::to_string(line) + ": empty document id");
    if (!seen_ids.insert(id).second)
      throw Error("line " + std::to_string(line) + ": duplicate document id '" + id + "'");
    out.corpus.documents.push_back(make_document(std::move(id), text, std::move(metadata)));
  };

  if (format == CorpusFormat::jsonl) {
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
      ++line;
      if (trim(raw).empty()) continue;
      nlohmann::json record;
      try {
        record = nlohmann::json::parse(raw);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error("line " + std::to_string(line) + ": malformed JSON record (" + e.what() + ")");
      }
      if (!record.is_object()) throw Error("line " + std::to_string(line) + ": record is not an object");
      const auto text_it = record.find(text_field);
      if (text_it == record.end() || !text_it->is_string())
        throw Error("line " + std::to_string(line) + ": missing string field '" + text_field + "'");
      std::string id;
      if (id_field) {
        const auto id_it = record.find(*id_field);
        if (id_it == record.end() || id_it->is_null())
          throw Error("line " + std::to_string(line) + ": missing id field '" + *id_field + "'");
        id = detail::scalar_to_string(*id_it);
      }
      std::map<std::string, std::string> metadata;
      for (auto it = record.begin(); it != record.end(); ++it) {
        if (it.key() == text_field || (id_field && it.key() == *id_field)) continue;
        if (it->is_primitive()) metadata[it.key()] = detail::scalar_to_string(*it);
      }
      add(line, std::move(id), text_it->get<std::string>(), std::move(metadata));
    }
  } else {
    std::vector<std::string> header;
    std::vector<std::string> fields;
    std::size_t line = 1;
    std::size_t record_line = 1;
    if (!detail::read_csv_record(in, header, line, record_line)) throw Error("csv file has no header row");
    const auto column = [&](const std::string& name) -> std::optional<std::size_t> {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) return std::nullopt;
      return static_cast<std::size_t>(it - header.begin());
    };
    const auto text_col = column(text_field);
    if (!text_col) throw Error("csv header lacks text column '" + text_field + "'");
    std::optional<std::size_t> id_col;
    if (id_field) {
      id_col = column(*id_field);
      if (!id_col) throw Error("csv header lacks id column '" + *id_field + "'");
    }
    while (detail::read_csv_record(in, fields, line, record_line)) {
      if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
      if (fields.size() != header.size())
        throw Error("csv line " + std::to_string(record_line) + ": expected " +
                    std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
      std::map<std::string, std::string> metadata;
      for (std::size_t i = 0; i < header.size(); ++i)
        if (i != *text_col && (!id_col || i != *id_col)) metadata[header[i]] = fields[i];
      add(record_line, id_col ? fields[*id_col] : std::string{}, fields[*text_col], std::move(metadata));
    }
  }
  return out;
}

inline std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : trim(text)) {
    if (std::isspace(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// Exact-match dedup on normalized text; the first occurrence wins.
inline std::pair<Corpus, std::size_t> deduplicate(const Corpus& corpus) {
  Corpus out{{}, corpus.source_path, corpus.format};
  std::unordered_set<std::string> seen;
  std::size_t removed = 0;
  for (const auto& doc : corpus.documents) {
    if (seen.insert(normalize_text(doc.text)).second)
      out.documents.push_back(doc);
    else
      ++removed;
  }
  return {std::move(out), removed};
}

inline void write_ingest_report(const std::filesystem::path& out_dir, const IngestReport& report) {
  std::filesystem::create_directories(out_dir);
  nlohmann::ordered_json j;
  j["loaded"] = report.loaded;
  j["skipped"] = report.skipped;
  j["deduplicated"] = report.deduplicated;
  std::ofstream(out_dir / "ingest_report.json") << j.dump(2) << '\n';
}

using StopwordSet = std::unordered_set<std::string>;

inline const StopwordSet& default_stopwords() {
  static const StopwordSet words = {
      "a", "about", "above", "across", "after", "afterwards", "again", "against", "all", "almost",
      "alone", "along", "already", "also", "although", "always", "am", "among", "amongst", "an",
      "and", "another", "any", "anyhow", "anyone", "anything", "anyway", "anywhere", "are", "around",
      "as", "at", "back", "be", "became", "because", "become", "becomes", "becoming", "been",
      "before", "beforehand", "behind", "being", "below", "beside", "besides", "between", "beyond",
      "both", "but", "by", "can", "cannot", "could", "did", "do", "does", "doing", "done", "down",
      "due", "during", "each", "either", "else", "elsewhere", "enough", "etc", "even", "ever",
      "every", "everyone", "everything", "everywhere", "except", "few", "first", "for", "former",
      "formerly", "from", "further", "get", "gets", "getting", "give", "given", "go", "goes",
      "going", "got", "had", "has", "have", "having", "he", "hence", "her", "here", "hereafter",
      "hereby", "herein", "hers", "herself", "him", "himself", "his", "how", "however", "i", "if",
      "in", "indeed", "instead", "into", "is", "it", "its", "itself", "just", "keep", "last",
      "latter", "least", "less", "let", "like", "made", "make", "makes", "many", "may", "me",
      "meanwhile", "might", "mine", "more", "moreover", "most", "mostly", "much", "must", "my",
      "myself", "namely", "neither", "never", "nevertheless", "next", "no", "nobody", "none",
      "nor", "not", "nothing", "now", "nowhere", "of", "off", "often", "on", "once", "one", "only",
      "onto", "or", "other", "others", "otherwise", "our", "ours", "ourselves", "out", "over",
      "own", "per", "perhaps", "please", "put", "quite", "rather", "re", "really", "regarding",
      "same", "say", "says", "see", "seem", "seemed", "seeming", "seems", "several", "she",
      "should", "show", "since", "so", "some", "somehow", "someone", "something", "sometime",
      "sometimes", "somewhere", "still", "such", "take", "than", "that", "the", "their", "theirs",
      "them", "themselves", "then", "thence", "there", "thereafter", "thereby", "therefore",
      "therein", "thereupon", "these", "they", "this", "those", "though", "through", "throughout",
      "thru", "thus", "to", "together", "too", "toward", "towards", "under", "unless", "until",
      "up", "upon", "us", "use", "used", "using", "various", "very", "via", "was", "we", "well",
      "were", "what", "whatever", "when", "whence", "whenever", "where", "whereafter", "whereas",
      "whereby", "wherein", "whereupon", "wherever", "whether", "which", "while", "whither", "who",
      "whoever", "whole", "whom", "whose", "why", "will", "with", "within", "without", "would",
      "yet", "you", "your", "yours", "yourself", "yourselves", "s", "t", "d", "ll", "m", "ve",
      "don", "doesn", "didn", "isn", "aren", "wasn", "weren", "won", "wouldn", "shouldn", "couldn",
      "want", "need", "new", "way", "ways", "thing", "things", "lot", "also", "able",
      "two", "three", "yes", "ok", "okay", "sure", "shall", "upon", "within", "whose", "s"};
  return words;
}

// One word per line; blank lines and lines starting with '#' are ignored.
inline StopwordSet load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stopword file: " + path.string());
  StopwordSet words;
  std::string line;
  while (std::getline(in, line)) {
    const auto w = trim(line);
    if (w.empty() || w.front() == '#') continue;
    words.insert(normalize_text(w));
  }
  return words;
}

// Maximal runs of letters, lowercased. Bytes >= 0x80 count as letters so that
// UTF-8 words are kept whole.
inline std::vector<std::string> alphabetic_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalpha(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// Extension point for a real part-of-speech based noun extractor.
class TermExtractor {
 public:
  virtual ~TermExtractor() = default;
  // Distinct candidate terms of `text`, in a deterministic order.
  virtual std::vector<std::string> extract(std::string_view text) const = 0;
};

inline std::vector<std::string> tokenize_terms(std::string_view text, const StopwordSet& stopwords) {
  const auto tokens = alphabetic_tokens(text);
  std::vector<std::string> terms;
  std::unordered_set<std::string> seen;
  const auto emit = [&](std::string term) {
    if (seen.insert(term).second) terms.push_back(std::move(term));
  };
  for (const auto& t : tokens)
    if (!stopwords.contains(t)) emit(t);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
    if (!stopwords.contains(tokens[i]) && !stopwords.contains(tokens[i + 1]))
      emit(tokens[i] + ' ' + tokens[i + 1]);
  return terms;
}

inline std::vector<std::string> tokenize_terms(const Document& doc, const StopwordSet& stopwords) {
  return tokenize_terms(doc.text, stopwords);
}

class HeuristicTermExtractor final : public TermExtractor {
 public:
  HeuristicTermExtractor() : stopwords_(default_stopwords()) {}
  explicit HeuristicTermExtractor(StopwordSet stopwords) : stopwords_(std::move(stopwords)) {}

  std::vector<std::string> extract(std::string_view text) const override {
    return tokenize_terms(text, stopwords_);
  }

  const StopwordSet& stopwords() const { return stopwords_; }

 private:
  StopwordSet stopwords_;
};

}  // namespace cartograph
