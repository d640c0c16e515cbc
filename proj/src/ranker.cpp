#include "m2hf/ranker.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "m2hf/parallel.hpp"

namespace m2hf {

std::string_view direction_name(Direction direction) { return direction == Direction::t2v ? "t2v" : "v2t"; }

GroundTruth GroundTruth::from_pairs(std::size_t n_captions, std::size_t n_videos,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  GroundTruth gt;
  gt.t2v.resize(n_captions);
  gt.v2t.resize(n_videos);
  for (const auto& [video, caption] : pairs) {
    if (video >= n_videos || caption >= n_captions) throw std::out_of_range("ground-truth pair out of range");
    gt.t2v[caption].push_back(video);
    gt.v2t[video].push_back(caption);
  }
  return gt;
}

GroundTruth GroundTruth::diagonal(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(i, i);
  return from_pairs(n, n, pairs);
}

std::vector<std::uint32_t> competition_ranks(std::span<const double> scores) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::uint32_t> ranks(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const bool tied = pos > 0 && scores[order[pos]] == scores[order[pos - 1]];
    ranks[order[pos]] = tied ? ranks[order[pos - 1]] : static_cast<std::uint32_t>(pos + 1);
  }
  return ranks;
}

RankMatrix ranks_from_similarity(const SimilarityMatrix& s, Direction direction) {
  check_finite(s.scores, "ranks_from_similarity");
  const bool t2v = direction == Direction::t2v;
  const Tensor scores = t2v ? s.scores : transpose(s.scores);
  RankMatrix r{direction, scores.rows(), scores.cols(), std::vector<std::uint32_t>(scores.size())};
  parallel_chunks(r.queries, [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) {
      const auto row = competition_ranks(scores.row(q));
      std::copy(row.begin(), row.end(), r.ranks.begin() + static_cast<std::ptrdiff_t>(q * r.candidates));
    }
  });
  return r;
}

namespace {

void require_compatible(const std::vector<RankMatrix>& levels) {
  if (levels.empty()) throw std::invalid_argument("rank fusion over zero levels");
  const RankMatrix& first = levels.front();
  for (const auto& l : levels) {
    if (l.direction != first.direction || l.queries != first.queries || l.candidates != first.candidates) {
      throw ShapeError("rank matrices disagree in shape or direction");
    }
  }
}

}  // namespace

RankMatrix mmbf(const std::vector<RankMatrix>& levels) {
  require_compatible(levels);
  RankMatrix out = levels.front();
  for (std::size_t l = 1; l < levels.size(); ++l) {
    for (std::size_t i = 0; i < out.ranks.size(); ++i) out.ranks[i] = std::min(out.ranks[i], levels[l].ranks[i]);
  }
  return out;
}

RankMatrix fuse_ranks(const std::vector<RankMatrix>& levels, Fusion fusion) {
  if (fusion == Fusion::min) return mmbf(levels);
  require_compatible(levels);
  const RankMatrix& first = levels.front();
  std::vector<double> combined(first.ranks.size(), 0.0);
  for (std::size_t i = 0; i < combined.size(); ++i) {
    double acc = 0.0;
    for (const auto& l : levels) {
      const double r = l.ranks[i];
      acc = fusion == Fusion::max ? std::max(acc, r) : acc + r;
    }
    // Negated so that competition_ranks (descending) ranks small values first.
    combined[i] = -(fusion == Fusion::avg ? acc / static_cast<double>(levels.size()) : acc);
  }
  RankMatrix out{first.direction, first.queries, first.candidates, {}};
  out.ranks.reserve(combined.size());
  for (std::size_t q = 0; q < out.queries; ++q) {
    const auto row = competition_ranks(std::span<const double>(combined).subspan(q * out.candidates, out.candidates));
    out.ranks.insert(out.ranks.end(), row.begin(), row.end());
  }
  return out;
}

std::vector<std::uint32_t> gt_ranks(const RankMatrix& r, const std::vector<std::vector<std::size_t>>& gt) {
  if (gt.size() != r.queries) {
    throw std::invalid_argument("ground truth covers " + std::to_string(gt.size()) + " queries, rank matrix has " +
                                std::to_string(r.queries));
  }
  std::vector<std::uint32_t> out(r.queries);
  for (std::size_t q = 0; q < r.queries; ++q) {
    if (gt[q].empty()) throw std::invalid_argument("query " + std::to_string(q) + " has no correct candidate");
    std::uint32_t best = UINT32_MAX;
    for (std::size_t c : gt[q]) best = std::min(best, r.at(q, c));
    out[q] = best;
  }
  return out;
}

Metrics metrics_from_ranks(const std::vector<std::uint32_t>& ranks) {
  if (ranks.empty()) throw std::invalid_argument("metrics over zero queries");
  Metrics m;
  m.queries = ranks.size();
  const double n = static_cast<double>(ranks.size());
  double total = 0;
  for (std::uint32_t r : ranks) {
    m.r1 += r <= 1;
    m.r5 += r <= 5;
    m.r10 += r <= 10;
    total += r;
  }
  m.r1 /= n;
  m.r5 /= n;
  m.r10 /= n;
  m.mnr = total / n;
  std::vector<std::uint32_t> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  m.mdr = sorted[(sorted.size() - 1) / 2];
  return m;
}

Metrics metrics(const RankMatrix& r, const GroundTruth& gt) { return metrics_from_ranks(gt_ranks(r, gt[r.direction])); }

double rank1_multiplicity(const RankMatrix& r) {
  if (r.queries == 0) return 0.0;
  const auto ones = std::count(r.ranks.begin(), r.ranks.end(), 1u);
  return static_cast<double>(ones) / static_cast<double>(r.queries);
}

const Metrics& RetrievalReport::find(Direction direction, std::string_view level) const {
  for (const auto& e : entries) {
    if (e.direction == direction && e.level == level) return e.metrics;
  }
  throw std::out_of_range("report has no entry for " + std::string(direction_name(direction)) + "/" +
                          std::string(level));
}

RetrievalReport evaluate(const std::vector<SimilarityMatrix>& levels, const GroundTruth& gt, Fusion fusion) {
  if (levels.empty()) throw std::invalid_argument("evaluation needs at least one level");
  RetrievalReport report;
  report.fusion = fusion;
  for (Direction d : {Direction::t2v, Direction::v2t}) {
    std::vector<RankMatrix> ranks;
    for (const auto& s : levels) {
      ranks.push_back(ranks_from_similarity(s, d));
      report.entries.push_back({d, std::string(level_name(s.level)), metrics(ranks.back(), gt)});
    }
    const RankMatrix fused = fuse_ranks(ranks, fusion);
    report.entries.push_back({d, "fused", metrics(fused, gt)});
    (d == Direction::t2v ? report.fused_rank1_multiplicity_t2v : report.fused_rank1_multiplicity_v2t) =
        rank1_multiplicity(fused);
  }
  for (const auto& s : levels) report.fused_levels.push_back(s.level);
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string format_report_text(const RetrievalReport& report) {
  std::ostringstream os;
  os << "fusion: " << fusion_name(report.fusion) << " over";
  for (Level l : report.fused_levels) os << ' ' << level_name(l);
  os << "\npadded audio videos: " << report.padded_audio << "\npadded motion videos: " << report.padded_motion
     << '\n';
  for (Direction d : {Direction::t2v, Direction::v2t}) {
    os << '\n' << direction_name(d) << "\n";
    char line[160];
    std::snprintf(line, sizeof line, "  %-8s %8s %8s %8s %8s %8s\n", "level", "R@1", "R@5", "R@10", "MdR", "MnR");
    os << line;
    for (const auto& e : report.entries) {
      if (e.direction != d) continue;
      const Metrics& m = e.metrics;
      std::snprintf(line, sizeof line, "  %-8s %8.4f %8.4f %8.4f %8.1f %8.4f\n", e.level.c_str(), m.r1, m.r5, m.r10,
                    m.mdr, m.mnr);
      os << line;
    }
    os << "  fused rank-1 multiplicity: "
       << fmt(d == Direction::t2v ? report.fused_rank1_multiplicity_t2v : report.fused_rank1_multiplicity_v2t) << '\n';
  }
  return os.str();
}

std::string format_report_tsv(const RetrievalReport& report) {
  std::ostringstream os;
  os << "direction\tlevel\tmetric\tvalue\n";
  for (const auto& e : report.entries) {
    const std::string prefix = std::string(direction_name(e.direction)) + "\t" + e.level + "\t";
    os << prefix << "R@1\t" << fmt(e.metrics.r1) << '\n'
       << prefix << "R@5\t" << fmt(e.metrics.r5) << '\n'
       << prefix << "R@10\t" << fmt(e.metrics.r10) << '\n'
       << prefix << "MdR\t" << fmt(e.metrics.mdr) << '\n'
       << prefix << "MnR\t" << fmt(e.metrics.mnr) << '\n';
  }
  os << "t2v\tfused\trank1_multiplicity\t" << fmt(report.fused_rank1_multiplicity_t2v) << '\n';
  os << "v2t\tfused\trank1_multiplicity\t" << fmt(report.fused_rank1_multiplicity_v2t) << '\n';
  os << "all\tall\tpadded_audio\t" << report.padded_audio << '\n';
  os << "all\tall\tpadded_motion\t" << report.padded_motion << '\n';
  return os.str();
}

}  // namespace m2hf
