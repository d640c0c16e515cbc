#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "m2hf/objective.hpp"
#include "m2hf/similarity.hpp"

namespace m2hf {

/// t2v: queries are captions, candidates videos. v2t: the reverse.
enum class Direction { t2v, v2t };

std::string_view direction_name(Direction direction);

/// Competition ranks (1 = best) of every candidate for every query.
struct RankMatrix {
  Direction direction = Direction::t2v;
  std::size_t queries = 0;
  std::size_t candidates = 0;
  std::vector<std::uint32_t> ranks;  // row-major queries × candidates

  std::uint32_t at(std::size_t query, std::size_t candidate) const { return ranks[query * candidates + candidate]; }
};

/// Correct candidates per query, for both directions.
struct GroundTruth {
  std::vector<std::vector<std::size_t>> t2v;  // caption → videos
  std::vector<std::vector<std::size_t>> v2t;  // video → captions

  /// `pairs` holds (video index, caption index).
  static GroundTruth from_pairs(std::size_t n_captions, std::size_t n_videos,
                                const std::vector<std::pair<std::size_t, std::size_t>>& pairs);
  /// Caption i matches video i.
  static GroundTruth diagonal(std::size_t n);

  const std::vector<std::vector<std::size_t>>& operator[](Direction d) const { return d == Direction::t2v ? t2v : v2t; }
};

/// Competition ranks of scores sorted descending: 1 + number of strictly larger.
std::vector<std::uint32_t> competition_ranks(std::span<const double> scores);

RankMatrix ranks_from_similarity(const SimilarityMatrix& s, Direction direction);

/// Entry-wise minimum over levels.
RankMatrix mmbf(const std::vector<RankMatrix>& levels);

/// Combines levels entry-wise; min is MMBF, the other rules combine the rank
/// values and re-rank ascending.
RankMatrix fuse_ranks(const std::vector<RankMatrix>& levels, Fusion fusion);

/// Rank of the best-ranked correct candidate for every query.
std::vector<std::uint32_t> gt_ranks(const RankMatrix& r, const std::vector<std::vector<std::size_t>>& gt);

struct Metrics {
  double r1 = 0, r5 = 0, r10 = 0;
  double mdr = 0;  // lower middle for even counts
  double mnr = 0;
  std::size_t queries = 0;
};

Metrics metrics_from_ranks(const std::vector<std::uint32_t>& ranks);
Metrics metrics(const RankMatrix& r, const GroundTruth& gt);

/// Mean number of candidates holding rank 1 per query.
double rank1_multiplicity(const RankMatrix& r);

struct ReportEntry {
  Direction direction;
  std::string level;  // level name or "fused"
  Metrics metrics;
};

struct RetrievalReport {
  std::vector<ReportEntry> entries;
  std::vector<Level> fused_levels;
  Fusion fusion = Fusion::min;
  std::size_t padded_audio = 0;
  std::size_t padded_motion = 0;
  double fused_rank1_multiplicity_t2v = 0;
  double fused_rank1_multiplicity_v2t = 0;

  const Metrics& find(Direction direction, std::string_view level) const;
};

/// Per-level metrics for every matrix plus the fused metrics over all of them.
RetrievalReport evaluate(const std::vector<SimilarityMatrix>& levels, const GroundTruth& gt,
                         Fusion fusion = Fusion::min);

std::string format_report_text(const RetrievalReport& report);
/// One metric per line: direction, level, metric, value (tab-separated).
std::string format_report_tsv(const RetrievalReport& report);

}  // namespace m2hf
