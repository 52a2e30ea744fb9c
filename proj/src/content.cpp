#include "kcrec/content.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "kcrec/error.hpp"

namespace kcrec {

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return fields;
}

std::string zero_pad(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

std::size_t digits(std::size_t n) { return n < 10 ? 1 : 1 + digits(n / 10); }

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("failed to format number");
  return std::string(buf, ptr);
}

Resource make_resource(std::string id, std::vector<KcVector> segments) {
  if (segments.empty()) throw Error("resource '" + id + "' has no segments");
  Resource r;
  r.id = std::move(id);
  KcVector sum;
  std::map<KcId, std::size_t> occurrences;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].empty()) {
      throw Error("resource '" + r.id + "' segment " + std::to_string(i) + " has no annotations");
    }
    for (const auto& [k, w] : segments[i]) {
      if (w > 1.0) throw Error("resource '" + r.id + "' annotation weight above 1");
      sum.add(k, w);
      ++occurrences[k];
    }
    r.segments.push_back({i, std::move(segments[i])});
  }
  const double top = sum.max();
  for (const auto& [k, w] : sum) {
    r.aggregate.set(k, w / top);
    r.depth.set(k, w / static_cast<double>(occurrences[k]));
  }
  return r;
}

ContentIndex::ContentIndex(KcUniverse universe, std::vector<Resource> resources)
    : universe_(std::move(universe)), resources_(std::move(resources)) {
  if (universe_.size() == 0) throw Error("content index requires a non-empty universe");
  std::sort(resources_.begin(), resources_.end(),
            [](const Resource& a, const Resource& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < resources_.size(); ++i) {
    const auto& r = resources_[i];
    if (!by_id_.emplace(r.id, i).second) throw Error("duplicate resource id '" + r.id + "'");
    for (const auto& seg : r.segments) {
      for (const auto& [k, w] : seg.annotations) {
        if (!universe_.contains(k)) throw Error("resource '" + r.id + "' annotates a KC outside the universe");
      }
    }
  }
}

const Resource* ContentIndex::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &resources_[it->second];
}

const Resource& ContentIndex::at(const std::string& id) const {
  if (const auto* r = find(id)) return *r;
  throw Error("unknown resource '" + id + "'");
}

ContentIndex ingest_corpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty corpus");
  const auto header = split_csv_line(line);
  const std::array<std::string_view, 4> required{"resource_id", "segment_index", "kc_id", "weight"};
  std::array<std::size_t, 4> col{};
  for (std::size_t c = 0; c < required.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), required[c]);
    if (it == header.end()) throw Error("row 1: missing column '" + std::string(required[c]) + "'");
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::string> labels;
  std::map<std::string, KcId, std::less<>> label_ids;
  // resource -> segment -> annotations
  std::map<std::string, std::map<std::size_t, KcVector>> rows;
  std::set<std::tuple<std::string, std::size_t, KcId>> seen;

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    auto fail = [row](const std::string& msg) -> Error {
      return Error("row " + std::to_string(row) + ": " + msg);
    };
    if (fields.size() != header.size()) throw fail("expected " + std::to_string(header.size()) + " fields");

    const std::string resource_id(fields[col[0]]);
    if (resource_id.empty()) throw fail("empty resource_id");

    std::size_t segment = 0;
    const auto seg_field = fields[col[1]];
    auto [sp, sec] = std::from_chars(seg_field.data(), seg_field.data() + seg_field.size(), segment);
    if (sec != std::errc() || sp != seg_field.data() + seg_field.size() || seg_field.empty()) {
      throw fail("segment_index is not a non-negative integer");
    }

    const std::string kc_label(fields[col[2]]);
    if (kc_label.empty()) throw fail("empty kc_id");

    double weight = 0.0;
    const auto w_field = fields[col[3]];
    auto [wp, wec] = std::from_chars(w_field.data(), w_field.data() + w_field.size(), weight);
    if (wec != std::errc() || wp != w_field.data() + w_field.size() || w_field.empty()) {
      throw fail("weight is not numeric");
    }
    if (!(weight > 0.0 && weight <= 1.0)) throw fail("weight " + std::string(w_field) + " outside (0, 1]");

    auto [it, inserted] = label_ids.try_emplace(kc_label, kc(labels.size()));
    if (inserted) labels.push_back(kc_label);
    const KcId id = it->second;

    if (!seen.emplace(resource_id, segment, id).second) {
      throw fail("duplicate (resource, segment, kc) triple");
    }
    rows[resource_id][segment].set(id, weight);
  }
  if (rows.empty()) throw Error("empty corpus");

  std::vector<Resource> resources;
  for (auto& [rid, segs] : rows) {
    std::vector<KcVector> ordered;
    std::size_t expected = 0;
    for (auto& [index, ann] : segs) {
      if (index != expected) {
        throw Error("resource '" + rid + "': segment indices not contiguous from 0 (missing " +
                    std::to_string(expected) + ")");
      }
      ordered.push_back(std::move(ann));
      ++expected;
    }
    resources.push_back(make_resource(rid, std::move(ordered)));
  }
  return ContentIndex(KcUniverse(std::move(labels)), std::move(resources));
}

ContentIndex load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file '" + path.string() + "': file not found or unreadable");
  return ingest_corpus(in);
}

void export_corpus(const ContentIndex& index, std::ostream& out) {
  const auto& u = index.universe();
  out << "resource_id,segment_index,kc_id,weight\n";
  for (const auto& r : index.resources()) {
    for (const auto& seg : r.segments) {
      std::vector<std::pair<std::string, double>> entries;
      for (const auto& [k, w] : seg.annotations) entries.emplace_back(u.display_name(k), w);
      std::sort(entries.begin(), entries.end());
      for (const auto& [name, w] : entries) {
        out << r.id << ',' << seg.index << ',' << name << ',' << format_double(w) << '\n';
      }
    }
  }
}

void save_corpus(const ContentIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  export_corpus(index, out);
}

ContentIndex generate_synthetic_corpus(const SyntheticCorpusSpec& spec, std::uint64_t seed) {
  if (spec.n_resources < 1 || spec.n_kcs < 1 || spec.segments_per_resource < 1 || spec.kcs_per_segment < 1) {
    throw Error("synthetic corpus counts must all be >= 1");
  }
  if (spec.kcs_per_segment > spec.n_kcs) throw Error("kcs_per_segment exceeds n_kcs");
  if (!(spec.topic_locality >= 0.0 && spec.topic_locality <= 1.0)) throw Error("topic_locality must lie in [0, 1]");

  std::mt19937_64 rng(seed);
  const std::size_t window = std::min(spec.n_kcs, 2 * spec.kcs_per_segment);
  std::uniform_int_distribution<std::size_t> pick_home(0, spec.n_kcs - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution carry(spec.topic_locality);

  auto draw_weight = [&] {
    const double u = 1.0 - unit(rng);  // (0, 1]
    double w = std::min(1.0, 0.1 + 0.9 * u);
    if (w <= 0.1) w = std::nextafter(0.1, 1.0);
    return w;
  };

  const std::size_t kc_width = std::max<std::size_t>(2, digits(spec.n_kcs - 1));
  const std::size_t res_width = std::max<std::size_t>(4, digits(spec.n_resources - 1));
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < spec.n_kcs; ++k) labels.push_back("kc" + zero_pad(k, kc_width));

  std::vector<Resource> resources;
  resources.reserve(spec.n_resources);
  for (std::size_t r = 0; r < spec.n_resources; ++r) {
    const std::size_t home = pick_home(rng);
    std::vector<KcVector> segments;
    std::vector<KcId> previous;
    for (std::size_t s = 0; s < spec.segments_per_resource; ++s) {
      std::vector<KcId> chosen;
      if (s > 0 && carry(rng)) {
        std::uniform_int_distribution<std::size_t> pick_prev(0, previous.size() - 1);
        chosen.push_back(previous[pick_prev(rng)]);
      }
      std::vector<std::size_t> offsets(window);
      std::iota(offsets.begin(), offsets.end(), std::size_t{0});
      for (std::size_t i = offsets.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(offsets[i - 1], offsets[pick(rng)]);
      }
      for (std::size_t off : offsets) {
        if (chosen.size() >= spec.kcs_per_segment) break;
        const KcId id = kc((home + off) % spec.n_kcs);
        if (std::find(chosen.begin(), chosen.end(), id) == chosen.end()) chosen.push_back(id);
      }
      KcVector seg;
      for (KcId id : chosen) seg.set(id, draw_weight());
      segments.push_back(std::move(seg));
      previous = std::move(chosen);
    }
    resources.push_back(make_resource("res" + zero_pad(r, res_width), std::move(segments)));
  }
  return ContentIndex(KcUniverse(std::move(labels)), std::move(resources));
}

}  // namespace kcrec
