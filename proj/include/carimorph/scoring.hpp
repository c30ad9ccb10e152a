#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "carimorph/error.hpp"

namespace carimorph {

inline constexpr std::int64_t kDefaultMaxVotes = 40;

/// Votes per candidate result for one photo.
struct VoteTally {
  std::vector<std::string> candidates;
  std::vector<std::int64_t> votes;
  std::int64_t s_max = kDefaultMaxVotes;

  /// >= 2 distinct candidates, votes in [0, s_max], s_max > 0. Throws Tally errors.
  void validate() const;
};

/// A pairwise ranking score kept as an exact rational numerator / s_max.
struct RankScore {
  std::int64_t numerator = 0;
  std::int64_t denominator = 1;

  double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
};

/// score(I_i) = sum over j != i of (s_i - s_j) / s_max.
std::map<std::string, RankScore> rank_score(const VoteTally& tally);

/// Arithmetic mean of per-photo scores; every map must have the same candidates.
std::map<std::string, double> average_scores(const std::vector<std::map<std::string, double>>& per_photo);

std::map<std::string, double> score_values(const std::map<std::string, RankScore>& scores);

/// CSV "photo_id,candidate_id,votes" (header optional) -> tallies keyed by
/// photo id, candidates in first-seen order.
std::map<std::string, VoteTally> parse_vote_csv(std::istream& in, std::int64_t s_max = kDefaultMaxVotes);

/// "candidate_id,score" rows in candidate order.
void write_score_csv(const std::map<std::string, double>& scores, std::ostream& out);

}  // namespace carimorph
