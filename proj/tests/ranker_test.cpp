#include <gtest/gtest.h>

#include "m2hf/ranker.hpp"
#include "oracles.hpp"

using namespace m2hf;

namespace {

RankMatrix rank_rows(std::size_t cands, std::vector<std::uint32_t> ranks) {
  return {Direction::t2v, ranks.size() / cands, cands, std::move(ranks)};
}

SimilarityMatrix random_sim(std::size_t n, Rng& rng, Level level = Level::visual) {
  return {level, uniform_init({n, n}, -1, 1, rng)};
}

std::vector<double> row_of(const Tensor& t, std::size_t r) { return {t.row(r).begin(), t.row(r).end()}; }

}  // namespace

TEST(RankerTests, RowHandCases) {
  const std::vector<double> s = {0.9, 0.1, 0.5};
  EXPECT_EQ(competition_ranks(s), (std::vector<std::uint32_t>{1, 3, 2}));
  const std::vector<double> tied = {0.4, 0.4, 0.4, 0.4};
  EXPECT_EQ(competition_ranks(tied), (std::vector<std::uint32_t>{1, 1, 1, 1}));
  const std::vector<double> partial = {0.2, 0.7, 0.7, 0.1};
  EXPECT_EQ(competition_ranks(partial), (std::vector<std::uint32_t>{3, 1, 1, 4}));
}

TEST(RankerTests, MatchesSortOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    // Coarse scores so ties are common.
    Tensor s({6, 6});
    for (auto& v : s.data()) v = static_cast<double>(rng.below(4));
    const RankMatrix r = ranks_from_similarity({Level::visual, s}, Direction::t2v);
    for (std::size_t q = 0; q < 6; ++q) {
      const auto expect = oracle::sort_ranks(row_of(s, q));
      EXPECT_EQ(expect, oracle::competition_ranks(row_of(s, q)));
      for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(r.at(q, c), expect[c]);
    }
  }
}

TEST(RankerTests, VideoToTextRanksColumns) {
  Rng rng(2);
  const SimilarityMatrix s = {Level::visual, uniform_init({3, 5}, -1, 1, rng)};
  const RankMatrix r = ranks_from_similarity(s, Direction::v2t);
  EXPECT_EQ(r.queries, 5u);
  EXPECT_EQ(r.candidates, 3u);
  const Tensor t = transpose(s.scores);
  for (std::size_t q = 0; q < 5; ++q) {
    const auto expect = oracle::sort_ranks(row_of(t, q));
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(r.at(q, c), expect[c]);
  }
}

TEST(RankerTests, SingleLevelRowsArePermutationsWithTies) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor s({5, 7});
    for (auto& v : s.data()) v = static_cast<double>(rng.below(3));
    const RankMatrix r = ranks_from_similarity({Level::visual, s}, Direction::t2v);
    for (std::size_t q = 0; q < 5; ++q) {
      std::vector<std::uint32_t> row(r.ranks.begin() + q * 7, r.ranks.begin() + (q + 1) * 7);
      std::sort(row.begin(), row.end());
      EXPECT_EQ(row.front(), 1u);
      for (std::size_t i = 0; i < row.size(); ++i) EXPECT_TRUE(row[i] == i + 1 || row[i] == row[i - 1]);
    }
  }
}

TEST(RankerTests, MmbfTakesEntrywiseMinimum) {
  const RankMatrix fused = mmbf({rank_rows(1, {3}), rank_rows(1, {1}), rank_rows(1, {7}), rank_rows(1, {2})});
  EXPECT_EQ(fused.ranks, std::vector<std::uint32_t>{1});
  const RankMatrix one = rank_rows(3, {1, 2, 3, 3, 1, 2});
  EXPECT_EQ(mmbf({one}).ranks, one.ranks);
  EXPECT_THROW(mmbf({}), std::invalid_argument);
  EXPECT_THROW(mmbf({one, rank_rows(2, {1, 2, 2, 1})}), std::invalid_argument);
}

TEST(RankerTests, FusedGtRankNeverWorse) {
  Rng rng(4);
  const auto gt = GroundTruth::diagonal(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RankMatrix> levels;
    for (int l = 0; l < 4; ++l) levels.push_back(ranks_from_similarity(random_sim(8, rng), Direction::t2v));
    const RankMatrix fused = mmbf(levels);
    for (std::size_t i = 0; i < fused.ranks.size(); ++i)
      for (const auto& l : levels) EXPECT_LE(fused.ranks[i], l.ranks[i]);
    const auto f = gt_ranks(fused, gt.t2v);
    for (const auto& l : levels) {
      const auto g = gt_ranks(l, gt.t2v);
      for (std::size_t q = 0; q < g.size(); ++q) EXPECT_LE(f[q], g[q]);
    }
  }
}

TEST(RankerTests, MetricsHandCases) {
  const Metrics m = metrics_from_ranks({1, 3, 11, 2, 5});
  EXPECT_DOUBLE_EQ(m.r1, 0.2);
  EXPECT_DOUBLE_EQ(m.r5, 0.8);
  EXPECT_DOUBLE_EQ(m.r10, 0.8);
  EXPECT_DOUBLE_EQ(m.mdr, 3);
  EXPECT_DOUBLE_EQ(m.mnr, 4.4);
  const Metrics p = metrics_from_ranks({1, 1, 1});
  EXPECT_EQ(p.r1, 1.0);
  EXPECT_EQ(p.mdr, 1.0);
  EXPECT_EQ(p.mnr, 1.0);
  EXPECT_EQ(metrics_from_ranks({4, 1, 2, 9}).mdr, 2.0);
}

TEST(RankerTests, MetricsMatchBruteForce) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor s({5, 5});
    for (auto& v : s.data()) v = static_cast<double>(rng.below(5));
    const RankMatrix r = ranks_from_similarity({Level::visual, s}, Direction::t2v);
    std::vector<std::uint32_t> gt;
    for (std::size_t q = 0; q < 5; ++q) gt.push_back(oracle::competition_ranks(row_of(s, q))[q]);
    const auto expect = oracle::metrics(gt);
    const Metrics m = metrics(r, GroundTruth::diagonal(5));
    EXPECT_NEAR(m.r1, expect.r1, 1e-12);
    EXPECT_NEAR(m.r5, expect.r5, 1e-12);
    EXPECT_NEAR(m.r10, expect.r10, 1e-12);
    EXPECT_EQ(m.mdr, expect.mdr);
    EXPECT_NEAR(m.mnr, expect.mnr, 1e-12);
    EXPECT_LE(m.r1, m.r5);
    EXPECT_LE(m.r5, m.r10);
    EXPECT_GE(m.mdr, 1.0);
    EXPECT_GE(m.mnr, 1.0);
  }
}

TEST(RankerTests, GroundTruthUsesBestCorrectCandidate) {
  // Caption 0 matches videos 0 and 2; caption 1 matches video 1.
  const auto gt = GroundTruth::from_pairs(2, 3, {{0, 0}, {2, 0}, {1, 1}});
  EXPECT_EQ(gt.t2v[0], (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(gt.v2t[2], (std::vector<std::size_t>{0}));
  const RankMatrix r = rank_rows(3, {3, 2, 1, 1, 2, 3});
  EXPECT_EQ(gt_ranks(r, gt.t2v), (std::vector<std::uint32_t>{1, 2}));
}

TEST(RankerTests, MonotoneTransformKeepsMetrics) {
  Rng rng(6);
  const auto gt = GroundTruth::diagonal(10);
  for (int trial = 0; trial < 50; ++trial) {
    const SimilarityMatrix s = random_sim(10, rng);
    SimilarityMatrix t = s;
    for (auto& v : t.scores.data()) v = std::exp(3 * v) - 2;
    for (Direction d : {Direction::t2v, Direction::v2t}) {
      EXPECT_EQ(ranks_from_similarity(s, d).ranks, ranks_from_similarity(t, d).ranks);
    }
  }
}

TEST(RankerTests, FusedMetricsDominateEveryLevel) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SimilarityMatrix> levels;
    for (Level l : kAllLevels) levels.push_back(random_sim(20, rng, l));
    const RetrievalReport rep = evaluate(levels, GroundTruth::diagonal(20));
    for (Direction d : {Direction::t2v, Direction::v2t}) {
      const Metrics& f = rep.find(d, "fused");
      for (Level l : kAllLevels) {
        const Metrics& m = rep.find(d, level_name(l));
        EXPECT_GE(f.r1, m.r1);
        EXPECT_GE(f.r5, m.r5);
        EXPECT_GE(f.r10, m.r10);
        EXPECT_LE(f.mnr, m.mnr);
      }
    }
  }
}

TEST(RankerTests, RankOneMultiplicity) {
  EXPECT_DOUBLE_EQ(rank1_multiplicity(rank_rows(3, {1, 1, 3, 1, 2, 3})), 1.5);
  Rng rng(8);
  EXPECT_DOUBLE_EQ(rank1_multiplicity(ranks_from_similarity(random_sim(6, rng), Direction::t2v)), 1.0);
  const SimilarityMatrix flat = {Level::text, zeros({4, 4})};
  EXPECT_DOUBLE_EQ(rank1_multiplicity(ranks_from_similarity(flat, Direction::t2v)), 4.0);
}

TEST(RankerTests, AlternativeRankFusions) {
  const RankMatrix a = rank_rows(3, {1, 2, 3}), b = rank_rows(3, {3, 1, 2});
  // Sums 4, 3, 5 -> ranks 2, 1, 3.
  EXPECT_EQ(fuse_ranks({a, b}, Fusion::add).ranks, (std::vector<std::uint32_t>{2, 1, 3}));
  EXPECT_EQ(fuse_ranks({a, b}, Fusion::avg).ranks, (std::vector<std::uint32_t>{2, 1, 3}));
  // Max 3, 2, 3 -> ranks 2, 1, 2.
  EXPECT_EQ(fuse_ranks({a, b}, Fusion::max).ranks, (std::vector<std::uint32_t>{2, 1, 2}));
  EXPECT_EQ(fuse_ranks({a, b}, Fusion::min).ranks, mmbf({a, b}).ranks);
}

TEST(RankerTests, ReportFormatsAreStable) {
  const SimilarityMatrix v = {Level::visual, Tensor::matrix({{0.9, 0.1}, {0.2, 0.8}})};
  const SimilarityMatrix t = {Level::text, Tensor::matrix({{0.0, 0.0}, {0.5, 0.0}})};
  RetrievalReport rep = evaluate({v, t}, GroundTruth::diagonal(2));
  rep.padded_audio = 1;
  EXPECT_EQ(format_report_tsv(rep),
            "direction\tlevel\tmetric\tvalue\n"
            "t2v\tvisual\tR@1\t1.0000\nt2v\tvisual\tR@5\t1.0000\nt2v\tvisual\tR@10\t1.0000\n"
            "t2v\tvisual\tMdR\t1.0000\nt2v\tvisual\tMnR\t1.0000\n"
            "t2v\ttext\tR@1\t0.5000\nt2v\ttext\tR@5\t1.0000\nt2v\ttext\tR@10\t1.0000\n"
            "t2v\ttext\tMdR\t1.0000\nt2v\ttext\tMnR\t1.5000\n"
            "t2v\tfused\tR@1\t1.0000\nt2v\tfused\tR@5\t1.0000\nt2v\tfused\tR@10\t1.0000\n"
            "t2v\tfused\tMdR\t1.0000\nt2v\tfused\tMnR\t1.0000\n"
            "v2t\tvisual\tR@1\t1.0000\nv2t\tvisual\tR@5\t1.0000\nv2t\tvisual\tR@10\t1.0000\n"
            "v2t\tvisual\tMdR\t1.0000\nv2t\tvisual\tMnR\t1.0000\n"
            "v2t\ttext\tR@1\t0.5000\nv2t\ttext\tR@5\t1.0000\nv2t\ttext\tR@10\t1.0000\n"
            "v2t\ttext\tMdR\t1.0000\nv2t\ttext\tMnR\t1.5000\n"
            "v2t\tfused\tR@1\t1.0000\nv2t\tfused\tR@5\t1.0000\nv2t\tfused\tR@10\t1.0000\n"
            "v2t\tfused\tMdR\t1.0000\nv2t\tfused\tMnR\t1.0000\n"
            "t2v\tfused\trank1_multiplicity\t2.0000\n"
            "v2t\tfused\trank1_multiplicity\t2.0000\n"
            "all\tall\tpadded_audio\t1\n"
            "all\tall\tpadded_motion\t0\n");
  const std::string text = format_report_text(rep);
  EXPECT_EQ(text.substr(0, text.find('\n')), "fusion: min over visual text");
  EXPECT_NE(text.find("  fused      1.0000   1.0000   1.0000      1.0   1.0000\n"), std::string::npos);
  EXPECT_NE(text.find("padded audio videos: 1\n"), std::string::npos);
}

TEST(RankerTests, NonFiniteScoresRejected) {
  const SimilarityMatrix s = {Level::visual, Tensor::matrix({{NAN}})};
  EXPECT_THROW(ranks_from_similarity(s, Direction::t2v), NonFiniteError);
}
