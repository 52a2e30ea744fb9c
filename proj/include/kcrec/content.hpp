#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "kcrec/kc_space.hpp"

namespace kcrec {

struct ResourceSegment {
  std::size_t index = 0;
  KcVector annotations;  // coverage weights in (0, 1]
};

/// A segmented learning resource.
///
/// `aggregate` is the per-KC sum of segment weights divided by its max entry,
/// so the strongest KC has weight 1. `depth` is the per-KC mean annotation
/// weight over the segments that mention it; the learner model reads it as
/// the difficulty of the resource on that KC.
struct Resource {
  std::string id;
  std::vector<ResourceSegment> segments;
  KcVector aggregate;
  KcVector depth;
};

/// Builds a resource from ordered segment annotations. Throws if there are
/// no segments, a segment is empty, or a weight lies outside (0, 1].
Resource make_resource(std::string id, std::vector<KcVector> segments);

/// Immutable collection of resources over one KC universe. Resources are
/// kept sorted by id.
class ContentIndex {
 public:
  ContentIndex(KcUniverse universe, std::vector<Resource> resources);

  const KcUniverse& universe() const { return universe_; }
  const std::vector<Resource>& resources() const { return resources_; }
  std::size_t size() const { return resources_.size(); }
  const Resource* find(const std::string& id) const;
  const Resource& at(const std::string& id) const;

 private:
  KcUniverse universe_;
  std::vector<Resource> resources_;
  std::map<std::string, std::size_t> by_id_;
};

/// Parses the corpus CSV `resource_id,segment_index,kc_id,weight`.
/// Errors name the offending row (1-based line number, header is row 1).
ContentIndex ingest_corpus(std::istream& in);
ContentIndex load_corpus(const std::filesystem::path& path);

/// Writes the canonical CSV: rows sorted by (resource_id, segment_index,
/// kc_id), weights in shortest round-trip decimal form.
void export_corpus(const ContentIndex& index, std::ostream& out);
void save_corpus(const ContentIndex& index, const std::filesystem::path& path);

struct SyntheticCorpusSpec {
  std::size_t n_resources = 1200;
  std::size_t n_kcs = 200;
  std::size_t segments_per_resource = 4;
  std::size_t kcs_per_segment = 3;
  double topic_locality = 0.5;  // in [0, 1]
};

/// Deterministic synthetic corpus. Each resource draws its KCs from a
/// contiguous topic window; with probability `topic_locality` a segment
/// carries one KC over from its predecessor. Weights are uniform in (0.1, 1].
ContentIndex generate_synthetic_corpus(const SyntheticCorpusSpec& spec, std::uint64_t seed);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

}  // namespace kcrec
