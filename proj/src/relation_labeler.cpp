#include <httplib.h>

#include <json.hpp>

#include "kcrec/domain_graph.hpp"
#include "kcrec/error.hpp"

namespace kcrec {

HttpRelationLabeler::HttpRelationLabeler(std::string url, double timeout_seconds)
    : timeout_seconds_(timeout_seconds) {
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    base_ = url;
    path_ = "/";
  } else {
    base_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
  }
  if (timeout_seconds_ <= 0.0) throw Error("labeler timeout must be positive");
}

std::vector<RelationLabel> HttpRelationLabeler::label(const PrunedView& view, const KcUniverse& universe,
                                                      std::span<const LabeledEdge> edges) {
  nlohmann::json request;
  request["focus"] = universe.display_name(view.focus);
  request["edges"] = nlohmann::json::array();
  for (const auto& e : edges) {
    request["edges"].push_back({{"src", universe.display_name(e.src)}, {"dst", universe.display_name(e.dst)}});
  }

  httplib::Client client(base_);
  const auto secs = static_cast<time_t>(timeout_seconds_);
  const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  auto res = client.Post(path_, request.dump(), "application/json");
  if (!res) throw Error("relation labeler request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error("relation labeler returned HTTP " + std::to_string(res->status));

  const auto body = nlohmann::json::parse(res->body);
  const auto& labels = body.at("labels");
  if (!labels.is_array() || labels.size() != edges.size()) throw Error("relation labeler returned wrong label count");
  std::vector<RelationLabel> out;
  for (const auto& l : labels) {
    auto parsed = parse_relation(l.get<std::string>());
    if (!parsed) throw Error("relation labeler returned unknown label " + l.dump());
    out.push_back(*parsed);
  }
  return out;
}

}  // namespace kcrec
