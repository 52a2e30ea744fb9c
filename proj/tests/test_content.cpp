#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "kcrec/content.hpp"
#include "kcrec/error.hpp"

using namespace kcrec;

namespace {

ContentIndex parse(const std::string& text) {
  std::istringstream in(text);
  return ingest_corpus(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

std::string exported(const ContentIndex& index) {
  std::ostringstream out;
  export_corpus(index, out);
  return out.str();
}

}  // namespace

TEST(MakeResource, AggregateIsMaxNormalisedSumAndDepthIsMean) {
  const auto r = make_resource("r", {KcVector{{kc(0), 0.5}, {kc(1), 0.2}}, KcVector{{kc(0), 0.3}}});
  EXPECT_DOUBLE_EQ(r.aggregate.get(kc(0)), 1.0);
  EXPECT_DOUBLE_EQ(r.aggregate.get(kc(1)), 0.2 / 0.8);
  EXPECT_DOUBLE_EQ(r.depth.get(kc(0)), 0.4);
  EXPECT_DOUBLE_EQ(r.depth.get(kc(1)), 0.2);
  EXPECT_EQ(r.segments[1].index, 1u);
  EXPECT_THROW(make_resource("x", {}), Error);
  EXPECT_THROW(make_resource("x", {KcVector{}}), Error);
}

TEST(IngestCorpus, ThreeRowsOneResourceTwoSegments) {
  const auto index = parse(
      "resource_id,segment_index,kc_id,weight\n"
      "v1,0,Algebra,0.5\n"
      "v1,1,Calculus,0.7\n"
      "v1,0,Calculus,0.25\n");
  ASSERT_EQ(index.size(), 1u);
  const auto& r = index.at("v1");
  EXPECT_EQ(r.segments.size(), 2u);
  EXPECT_EQ(index.universe().size(), 2u);
  // universe in first-appearance order
  EXPECT_EQ(index.universe().find("Algebra"), kc(0));
  EXPECT_EQ(index.universe().find("Calculus"), kc(1));
  EXPECT_EQ(r.segments[0].annotations.size(), 2u);
}

TEST(IngestCorpus, ColumnOrderIsFreeAndCrLfTolerated) {
  const auto index = parse("weight,kc_id,resource_id,segment_index\r\n0.5,A,r,0\r\n");
  EXPECT_DOUBLE_EQ(index.at("r").segments[0].annotations.get(kc(0)), 0.5);
}

TEST(IngestCorpus, Errors) {
  EXPECT_EQ(error_of(""), "empty corpus");
  EXPECT_EQ(error_of("resource_id,segment_index,kc_id,weight\n"), "empty corpus");
  EXPECT_EQ(error_of("resource_id,segment_index,kc_id,weight\nr,0,A,0.5\nr,0,B,1.5\n"),
            "row 3: weight 1.5 outside (0, 1]");
  EXPECT_EQ(error_of("resource_id,segment_index,kc_id,weight\nr,0,A,0\n"), "row 2: weight 0 outside (0, 1]");
  EXPECT_EQ(error_of("resource_id,segment_index,kc_id\nr,0,A\n"), "row 1: missing column 'weight'");
  EXPECT_EQ(error_of("resource_id,segment_index,kc_id,weight\nr,0,A,heavy\n"), "row 2: weight is not numeric");
  EXPECT_EQ(error_of("resource_id,segment_index,kc_id,weight\nr,0,A,0.5\nr,0,A,0.6\n"),
            "row 3: duplicate (resource, segment, kc) triple");
  EXPECT_EQ(error_of("resource_id,segment_index,kc_id,weight\nr,x,A,0.5\n"),
            "row 2: segment_index is not a non-negative integer");
  EXPECT_NE(error_of("resource_id,segment_index,kc_id,weight\nr,1,A,0.5\n").find("not contiguous"), std::string::npos);
}

TEST(ExportCorpus, CanonicalRoundTripIsByteIdentical) {
  const auto index = generate_synthetic_corpus({30, 12, 3, 2, 0.4}, 99);
  const std::string canonical = exported(index);
  const auto reparsed = parse(canonical);
  EXPECT_EQ(exported(reparsed), canonical);
  EXPECT_EQ(reparsed.size(), index.size());
}

TEST(ExportCorpus, SortsRowsCanonically) {
  const auto index = parse(
      "resource_id,segment_index,kc_id,weight\n"
      "b,0,Z,0.1\n"
      "a,1,Y,0.3\n"
      "a,0,Y,0.2\n"
      "a,0,X,1\n");
  EXPECT_EQ(exported(index),
            "resource_id,segment_index,kc_id,weight\n"
            "a,0,X,1\n"
            "a,0,Y,0.2\n"
            "a,1,Y,0.3\n"
            "b,0,Z,0.1\n");
}

TEST(SyntheticCorpus, DefaultsMirrorDemoCorpusSize) {
  EXPECT_EQ(SyntheticCorpusSpec{}.n_resources, 1200u);
}

TEST(SyntheticCorpus, DeterministicForSeed) {
  const SyntheticCorpusSpec spec{50, 20, 4, 3, 0.5};
  const auto a = generate_synthetic_corpus(spec, 7);
  const auto b = generate_synthetic_corpus(spec, 7);
  EXPECT_EQ(exported(a), exported(b));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.resources()[i].aggregate, b.resources()[i].aggregate);
  EXPECT_NE(exported(a), exported(generate_synthetic_corpus(spec, 8)));
}

TEST(SyntheticCorpus, SingleResourceSingleSegment) {
  const auto index = generate_synthetic_corpus({1, 5, 1, 2, 0.0}, 1);
  ASSERT_EQ(index.size(), 1u);
  EXPECT_EQ(index.resources()[0].segments.size(), 1u);
  EXPECT_EQ(index.resources()[0].segments[0].annotations.size(), 2u);
}

TEST(SyntheticCorpus, WeightsInRangeAndCountsRespected) {
  const auto index = generate_synthetic_corpus({200, 20, 4, 3, 0.5}, 3);
  EXPECT_EQ(index.size(), 200u);
  for (const auto& r : index.resources()) {
    EXPECT_EQ(r.segments.size(), 4u);
    for (const auto& s : r.segments) {
      EXPECT_EQ(s.annotations.size(), 3u);
      for (const auto& [k, w] : s.annotations) {
        EXPECT_GT(w, 0.1);
        EXPECT_LE(w, 1.0);
      }
    }
  }
}

TEST(SyntheticCorpus, FullLocalityChainsSegments) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto index = generate_synthetic_corpus({40, 30, 5, 2, 1.0}, seed);
    for (const auto& r : index.resources()) {
      for (std::size_t s = 1; s < r.segments.size(); ++s) {
        bool shared = false;
        for (const auto& [k, w] : r.segments[s].annotations) shared |= r.segments[s - 1].annotations.contains(k);
        EXPECT_TRUE(shared) << r.id << " segment " << s;
      }
    }
  }
}

TEST(SyntheticCorpus, InconsistentCountsRejected) {
  EXPECT_THROW(generate_synthetic_corpus({0, 5, 1, 1, 0.5}, 1), Error);
  EXPECT_THROW(generate_synthetic_corpus({3, 2, 1, 3, 0.5}, 1), Error);
  EXPECT_THROW(generate_synthetic_corpus({3, 5, 1, 1, 1.5}, 1), Error);
}
