#include "carimorph/scoring.hpp"

#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "carimorph/obj_io.hpp"

namespace carimorph {

void VoteTally::validate() const {
  require(s_max > 0, ErrorKind::Tally, "s_max must be positive");
  require(candidates.size() >= 2, ErrorKind::Tally, "need at least two candidates");
  require(candidates.size() == votes.size(), ErrorKind::Tally, "candidate and vote counts differ");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    require(seen.insert(candidates[i]).second, ErrorKind::Tally, "duplicate candidate '" + candidates[i] + "'");
    require(votes[i] >= 0, ErrorKind::Tally, "negative vote count for '" + candidates[i] + "'");
    require(votes[i] <= s_max, ErrorKind::Tally,
            "candidate '" + candidates[i] + "' has " + std::to_string(votes[i]) + " votes, above s_max " +
                std::to_string(s_max));
  }
}

std::map<std::string, RankScore> rank_score(const VoteTally& tally) {
  tally.validate();
  const auto k = static_cast<std::int64_t>(tally.votes.size());
  const std::int64_t total = std::accumulate(tally.votes.begin(), tally.votes.end(), std::int64_t{0});
  std::map<std::string, RankScore> scores;
  for (std::size_t i = 0; i < tally.votes.size(); ++i) {
    // sum_{j != i} (s_i - s_j) = k * s_i - sum_j s_j
    scores[tally.candidates[i]] = {k * tally.votes[i] - total, tally.s_max};
  }
  return scores;
}

std::map<std::string, double> score_values(const std::map<std::string, RankScore>& scores) {
  std::map<std::string, double> out;
  for (const auto& [id, s] : scores) out[id] = s.value();
  return out;
}

std::map<std::string, double> average_scores(const std::vector<std::map<std::string, double>>& per_photo) {
  require(!per_photo.empty(), ErrorKind::Aggregation, "no scores to average");
  std::map<std::string, double> sum = per_photo.front();
  for (std::size_t p = 1; p < per_photo.size(); ++p) {
    require(per_photo[p].size() == sum.size(), ErrorKind::Aggregation, "photos have different candidate sets");
    for (const auto& [id, value] : per_photo[p]) {
      auto it = sum.find(id);
      require(it != sum.end(), ErrorKind::Aggregation, "candidate '" + id + "' missing from the first photo");
      it->second += value;
    }
  }
  for (auto& [id, value] : sum) value /= static_cast<double>(per_photo.size());
  return sum;
}

std::map<std::string, VoteTally> parse_vote_csv(std::istream& in, std::int64_t s_max) {
  std::map<std::string, VoteTally> tallies;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    require(fields.size() == 3, ErrorKind::Format,
            "line " + std::to_string(line_no) + ": expected photo_id,candidate_id,votes");
    std::int64_t votes = 0;
    const auto& v = fields[2];
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), votes);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      if (line_no == 1) continue;  // header row
      fail(ErrorKind::Format, "line " + std::to_string(line_no) + ": invalid vote count '" + v + "'");
    }
    auto& tally = tallies[fields[0]];
    tally.s_max = s_max;
    tally.candidates.push_back(fields[1]);
    tally.votes.push_back(votes);
  }
  return tallies;
}

void write_score_csv(const std::map<std::string, double>& scores, std::ostream& out) {
  out << "candidate_id,score\n";
  for (const auto& [id, value] : scores) out << id << ',' << format_double(value) << '\n';
}

}  // namespace carimorph
