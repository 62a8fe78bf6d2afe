#pragma once

// Read-mostly HTTP API over a loaded map. The only mutation is topic renaming;
// frame reports are computed on demand when an embedder is configured.

#include <chrono>
#include <ctime>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cartograph/http.hpp"
#include "json.hpp"

#include "cartograph/common.hpp"
#include "cartograph/embedding.hpp"
#include "cartograph/frames.hpp"
#include "cartograph/geometry.hpp"

namespace cartograph {

struct Response {
  int status = 200;
  std::string body;
};

struct RenameEntry {
  int cluster = 0;
  std::string old_name;
  std::string new_name;
  std::string timestamp;
};

// Documents plus the provider used to embed frame poles.
struct FrameCapability {
  EmbeddedCorpus corpus;
  std::shared_ptr<EmbeddingProvider> provider;
};

class Session {
 public:
  explicit Session(MapModel map, std::optional<FrameCapability> frames = std::nullopt,
                   std::optional<nlohmann::json> compare = std::nullopt)
      : map_(std::move(map)), frames_(std::move(frames)), compare_(std::move(compare)) {
    for (std::size_t i = 0; i < map_.topics.size(); ++i) topic_index_[map_.topics[i].cluster_id] = i;
  }

  Response get_map() const {
    std::shared_lock lock(mutex_);
    return {200, serialize_map(map_)};
  }

  MapModel snapshot() const {
    std::shared_lock lock(mutex_);
    return map_;
  }

  std::vector<RenameEntry> rename_log() const {
    std::shared_lock lock(mutex_);
    return rename_log_;
  }

  Response cluster_docs(int cluster, std::optional<std::size_t> limit) const {
    std::shared_lock lock(mutex_);
    const auto it = topic_index_.find(cluster);
    if (it == topic_index_.end()) return error(404, "unknown cluster " + std::to_string(cluster));
    const auto& docs = map_.topics[it->second].top_documents;
    const std::size_t n = std::min(docs.size(), limit.value_or(docs.size()));
    nlohmann::ordered_json j;
    j["cluster"] = cluster;
    j["docs"] = std::vector<std::string>(docs.begin(), docs.begin() + std::ptrdiff_t(n));
    return {200, j.dump()};
  }

  Response rename(int cluster, const std::string& body) {
    nlohmann::json j;
    if (!parse_body(body, j) || !j.is_object() || !j.contains("name") || !j["name"].is_string())
      return error(400, "expected {\"name\": string}");
    const auto name = j["name"].get<std::string>();
    if (trim(name).empty()) return error(400, "name must be non-empty");
    std::unique_lock lock(mutex_);
    const auto it = topic_index_.find(cluster);
    if (it == topic_index_.end()) return error(404, "unknown cluster " + std::to_string(cluster));
    auto& topic = map_.topics[it->second];
    RenameEntry entry{cluster, topic.name, name, now_iso8601()};
    topic.name = name;
    rename_log_.push_back(entry);
    nlohmann::ordered_json out;
    out["cluster"] = cluster;
    out["old_name"] = entry.old_name;
    out["new_name"] = entry.new_name;
    return {200, out.dump()};
  }

  Response frames(const std::string& body) {
    if (!frames_) return error(409, "frame analysis needs an embedder and corpus configured on the server");
    nlohmann::json j;
    if (!parse_body(body, j) || !j.is_object()) return error(400, "expected a JSON object");
    std::string px, nx, py, ny;
    double coefficient = 0.25;
    try {
      px = j.at("axis_x").at("pos").get<std::string>();
      nx = j.at("axis_x").at("neg").get<std::string>();
      py = j.at("axis_y").at("pos").get<std::string>();
      ny = j.at("axis_y").at("neg").get<std::string>();
      if (j.contains("coefficient")) coefficient = j["coefficient"].get<double>();
    } catch (const nlohmann::json::exception&) {
      return error(400, "expected {axis_x:{pos,neg}, axis_y:{pos,neg}, coefficient}");
    }
    if (!(coefficient >= 0.0 && coefficient <= 1.0)) return error(400, "coefficient must lie in [0, 1]");

    const nlohmann::json key_json = {px, nx, py, ny, coefficient};
    const std::string key = key_json.dump();
    {
      std::lock_guard lock(frame_mutex_);
      if (const auto it = frame_plots_.find(key); it != frame_plots_.end()) return {200, it->second};
    }
    try {
      auto& provider = *frames_->provider;
      auto plot = build_frame_plot(frames_->corpus, embed_frame_axis(px, nx, provider),
                                   embed_frame_axis(py, ny, provider), coefficient);
      auto report = frame_report(plot).dump();
      std::lock_guard lock(frame_mutex_);
      frame_plots_.emplace(key, report);
      return {200, std::move(report)};
    } catch (const Error& e) {
      return error(400, e.what());
    }
  }

  // Ids (map order) of the documents in the selected topics.
  Response dpo_selection(const std::string& body) const {
    nlohmann::json j;
    if (!parse_body(body, j) || !j.is_object() || !j.contains("keep_topic_ids") || !j["keep_topic_ids"].is_array())
      return error(400, "expected {\"keep_topic_ids\": [int...]}");
    std::set<int> keep;
    try {
      for (const auto& v : j["keep_topic_ids"]) keep.insert(v.get<int>());
    } catch (const nlohmann::json::exception&) {
      return error(400, "keep_topic_ids must be integers");
    }
    std::shared_lock lock(mutex_);
    for (int id : keep)
      if (!topic_index_.contains(id)) return error(404, "unknown cluster " + std::to_string(id));
    std::vector<std::string> ids;
    for (const auto& p : map_.points)
      if (keep.contains(p.cluster)) ids.push_back(p.id);
    nlohmann::ordered_json out;
    out["count"] = ids.size();
    out["ids"] = std::move(ids);
    return {200, out.dump()};
  }

  Response compare() const {
    if (!compare_) return error(409, "no comparison matrix was loaded");
    return {200, compare_->dump()};
  }

  static Response error(int status, const std::string& message) {
    return {status, nlohmann::json{{"error", message}}.dump()};
  }

 private:
  static bool parse_body(const std::string& body, nlohmann::json& out) {
    try {
      out = nlohmann::json::parse(body);
      return true;
    } catch (const nlohmann::json::parse_error&) {
      return false;
    }
  }

  static std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  mutable std::shared_mutex mutex_;
  MapModel map_;
  std::map<int, std::size_t> topic_index_;
  std::vector<RenameEntry> rename_log_;

  std::optional<FrameCapability> frames_;
  std::mutex frame_mutex_;
  std::map<std::string, std::string> frame_plots_;

  std::optional<nlohmann::json> compare_;
};

// Registers the /api routes (with permissive CORS) on `server`.
inline void mount_routes(httplib::Server& server, Session& session) {
  const auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  // Path ids too large for int cannot name a cluster.
  const auto cluster_id = [](const std::string& text) -> std::optional<int> {
    try {
      return std::stoi(text);
    } catch (const std::out_of_range&) {
      return std::nullopt;
    }
  };
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/api/map", [&, reply](const httplib::Request&, httplib::Response& res) { reply(res, session.get_map()); });

  server.Get(R"(/api/clusters/(-?\d+)/docs)", [&, reply, cluster_id](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::size_t> limit;
    if (req.has_param("limit")) {
      try {
        const long v = std::stol(req.get_param_value("limit"));
        if (v < 0) throw std::invalid_argument("negative");
        limit = std::size_t(v);
      } catch (const std::exception&) {
        return reply(res, Session::error(400, "limit must be a non-negative integer"));
      }
    }
    const auto id = cluster_id(req.matches[1]);
    if (!id) return reply(res, Session::error(404, "unknown cluster"));
    reply(res, session.cluster_docs(*id, limit));
  });

  server.Post(R"(/api/topics/(-?\d+)/rename)", [&, reply, cluster_id](const httplib::Request& req,
                                                                      httplib::Response& res) {
    const auto id = cluster_id(req.matches[1]);
    if (!id) return reply(res, Session::error(404, "unknown cluster"));
    reply(res, session.rename(*id, req.body));
  });

  server.Post("/api/frames", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, session.frames(req.body));
  });

  server.Post("/api/dpo/selection", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, session.dpo_selection(req.body));
  });

  server.Get("/api/compare", [&, reply](const httplib::Request&, httplib::Response& res) { reply(res, session.compare()); });
}

}  // namespace cartograph
