#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kcrec {

/// Dense index of a knowledge component inside a KcUniverse.
enum class KcId : std::uint32_t {};

constexpr std::size_t to_index(KcId id) { return static_cast<std::size_t>(id); }
constexpr KcId kc(std::size_t index) { return static_cast<KcId>(index); }

/// Id <-> label table for a universe of K knowledge components.
/// Ids are dense in [0, K). Labels are optional but unique when present.
class KcUniverse {
 public:
  KcUniverse() = default;
  /// Unlabeled universe of the given size.
  explicit KcUniverse(std::size_t size);
  /// Labeled universe; label i names KcId i. Throws on empty input or duplicates.
  explicit KcUniverse(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  bool contains(KcId id) const { return to_index(id) < labels_.size(); }

  /// Stored label, possibly empty.
  const std::string& label(KcId id) const;
  /// Label if present, else "kc<N>".
  std::string display_name(KcId id) const;
  std::optional<KcId> find(std::string_view label) const;
  /// Resolves a label, falling back to a plain decimal id.
  KcId resolve(std::string_view label_or_id) const;

  bool operator==(const KcUniverse& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, KcId> by_label_;
};

/// Sparse nonnegative vector over knowledge components.
/// Only strictly positive, finite weights are stored.
class KcVector {
 public:
  using Map = std::map<KcId, double>;

  KcVector() = default;
  KcVector(std::initializer_list<std::pair<const KcId, double>> entries);

  /// Sets a weight; zero erases. Throws on negative or non-finite weights.
  void set(KcId id, double weight);
  void add(KcId id, double weight);
  double get(KcId id) const;
  bool contains(KcId id) const { return entries_.count(id) != 0; }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  double norm() const;
  double sum() const;
  double max() const;

  std::vector<double> to_dense(std::size_t dim) const;
  static KcVector from_dense(std::span<const double> dense);

  bool operator==(const KcVector& other) const = default;

 private:
  Map entries_;
};

/// Cosine of the angle between two vectors; 0 when either is empty.
double cosine_similarity(const KcVector& a, const KcVector& b);
/// Same, with a dense left operand (length K).
double cosine_similarity(std::span<const double> dense, const KcVector& b);

/// Unit L2 norm copy. Throws on an empty vector.
KcVector normalize(const KcVector& v);

/// Maps a tanh-range action in [-1,1]^K to coverage space via (x+1)/2.
/// Components that land on 0 are dropped. Throws on out-of-range input.
KcVector shift_to_coverage(std::span<const double> action);

/// Inverse of shift_to_coverage: dense 2x-1 over the universe.
std::vector<double> coverage_to_action(const KcVector& coverage, std::size_t dim);

}  // namespace kcrec
