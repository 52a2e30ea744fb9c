#include "kcrec/kc_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "kcrec/error.hpp"

namespace kcrec {

KcUniverse::KcUniverse(std::size_t size) : labels_(size) {
  if (size == 0) throw Error("universe must contain at least one knowledge component");
}

KcUniverse::KcUniverse(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw Error("universe must contain at least one knowledge component");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) continue;
    auto [it, inserted] = by_label_.emplace(labels_[i], kc(i));
    if (!inserted) throw Error("duplicate knowledge component label '" + labels_[i] + "'");
  }
}

const std::string& KcUniverse::label(KcId id) const {
  if (!contains(id)) throw Error("knowledge component id " + std::to_string(to_index(id)) + " outside universe");
  return labels_[to_index(id)];
}

std::string KcUniverse::display_name(KcId id) const {
  const auto& l = label(id);
  return l.empty() ? "kc" + std::to_string(to_index(id)) : l;
}

std::optional<KcId> KcUniverse::find(std::string_view label) const {
  auto it = by_label_.find(std::string(label));
  if (it == by_label_.end()) return std::nullopt;
  return it->second;
}

KcId KcUniverse::resolve(std::string_view label_or_id) const {
  if (auto id = find(label_or_id)) return *id;
  std::size_t index = 0;
  auto [ptr, ec] = std::from_chars(label_or_id.data(), label_or_id.data() + label_or_id.size(), index);
  if (ec == std::errc() && ptr == label_or_id.data() + label_or_id.size() && index < size()) return kc(index);
  throw Error("unknown knowledge component '" + std::string(label_or_id) + "'");
}

KcVector::KcVector(std::initializer_list<std::pair<const KcId, double>> entries) {
  for (const auto& [id, w] : entries) set(id, w);
}

void KcVector::set(KcId id, double weight) {
  if (!std::isfinite(weight) || weight < 0.0) {
    throw Error("KC weight must be finite and nonnegative, got " + std::to_string(weight));
  }
  if (weight == 0.0) {
    entries_.erase(id);
  } else {
    entries_[id] = weight;
  }
}

void KcVector::add(KcId id, double weight) { set(id, get(id) + weight); }

double KcVector::get(KcId id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? 0.0 : it->second;
}

double KcVector::norm() const {
  double s = 0.0;
  for (const auto& [id, w] : entries_) s += w * w;
  return std::sqrt(s);
}

double KcVector::sum() const {
  double s = 0.0;
  for (const auto& [id, w] : entries_) s += w;
  return s;
}

double KcVector::max() const {
  double m = 0.0;
  for (const auto& [id, w] : entries_) m = std::max(m, w);
  return m;
}

std::vector<double> KcVector::to_dense(std::size_t dim) const {
  std::vector<double> out(dim, 0.0);
  for (const auto& [id, w] : entries_) {
    if (to_index(id) >= dim) throw Error("KC vector entry outside dense dimension");
    out[to_index(id)] = w;
  }
  return out;
}

KcVector KcVector::from_dense(std::span<const double> dense) {
  KcVector v;
  for (std::size_t i = 0; i < dense.size(); ++i) v.set(kc(i), dense[i]);
  return v;
}

double cosine_similarity(const KcVector& a, const KcVector& b) {
  if (a.empty() || b.empty()) return 0.0;
  const KcVector& small = a.size() <= b.size() ? a : b;
  const KcVector& large = a.size() <= b.size() ? b : a;
  double dot = 0.0;
  for (const auto& [id, w] : small) dot += w * large.get(id);
  return std::clamp(dot / (a.norm() * b.norm()), 0.0, 1.0);
}

double cosine_similarity(std::span<const double> dense, const KcVector& b) {
  double dense_sq = 0.0;
  for (double x : dense) dense_sq += x * x;
  if (dense_sq == 0.0 || b.empty()) return 0.0;
  double dot = 0.0;
  for (const auto& [id, w] : b) {
    if (to_index(id) < dense.size()) dot += w * dense[to_index(id)];
  }
  return std::clamp(dot / (std::sqrt(dense_sq) * b.norm()), 0.0, 1.0);
}

KcVector normalize(const KcVector& v) {
  if (v.empty()) throw Error("cannot normalize zero vector");
  const double n = v.norm();
  KcVector out;
  for (const auto& [id, w] : v) out.set(id, w / n);
  return out;
}

KcVector shift_to_coverage(std::span<const double> action) {
  KcVector out;
  for (std::size_t i = 0; i < action.size(); ++i) {
    const double x = action[i];
    if (!(x >= -1.0 && x <= 1.0)) {
      throw Error("action component " + std::to_string(i) + " outside [-1, 1]: " + std::to_string(x));
    }
    out.set(kc(i), (x + 1.0) / 2.0);
  }
  return out;
}

std::vector<double> coverage_to_action(const KcVector& coverage, std::size_t dim) {
  std::vector<double> out = coverage.to_dense(dim);
  for (double& x : out) x = 2.0 * x - 1.0;
  return out;
}

}  // namespace kcrec
