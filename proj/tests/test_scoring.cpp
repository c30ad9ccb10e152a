#include <doctest.h>

#include <random>
#include <sstream>

#include "carimorph/scoring.hpp"

using namespace carimorph;

namespace {

VoteTally tally(std::vector<std::int64_t> votes, std::int64_t s_max = 40) {
  VoteTally t;
  for (std::size_t i = 0; i < votes.size(); ++i) t.candidates.push_back("c" + std::to_string(i));
  t.votes = std::move(votes);
  t.s_max = s_max;
  return t;
}

}  // namespace

TEST_CASE("rank score: extreme tally") {
  const auto s = score_values(rank_score(tally({40, 0, 0, 0, 0})));
  CHECK(s.at("c0") == 4.0);
  for (const char* id : {"c1", "c2", "c3", "c4"}) CHECK(s.at(id) == -1.0);
}

TEST_CASE("rank score: equal votes give zeros") {
  for (std::int64_t v : {0, 7, 40}) {
    for (const auto& [id, r] : rank_score(tally({v, v, v, v}))) CHECK(r.numerator == 0);
  }
}

TEST_CASE("rank score: zero-sum exactly on random tallies") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> k_dist(2, 12);
  std::uniform_int_distribution<std::int64_t> s_dist(1, 1000);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::int64_t s_max = s_dist(rng);
    std::uniform_int_distribution<std::int64_t> v_dist(0, s_max);
    std::vector<std::int64_t> votes(static_cast<std::size_t>(k_dist(rng)));
    for (auto& v : votes) v = v_dist(rng);
    const auto scores = rank_score(tally(votes, s_max));
    std::int64_t sum = 0;
    for (const auto& [id, r] : scores) {
      sum += r.numerator;
      CHECK(r.denominator == s_max);
    }
    CHECK(sum == 0);
  }
}

TEST_CASE("rank score: matches the pairwise definition") {
  const auto t = tally({14, 9, 8, 5, 4});
  const auto s = rank_score(t);
  for (std::size_t i = 0; i < t.votes.size(); ++i) {
    std::int64_t pairwise = 0;
    for (std::size_t j = 0; j < t.votes.size(); ++j) {
      if (j != i) pairwise += t.votes[i] - t.votes[j];
    }
    CHECK(s.at(t.candidates[i]).numerator == pairwise);
  }
  CHECK(s.at("c0").value() == 0.75);
}

TEST_CASE("rank score: invalid tallies") {
  auto expect_tally_error = [](const VoteTally& t) {
    try {
      rank_score(t);
      FAIL("expected a tally error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Tally);
    }
  };
  expect_tally_error(tally({41, 0}));
  expect_tally_error(tally({-1, 3}));
  expect_tally_error(tally({5}));
  expect_tally_error(tally({1, 1}, 0));
  VoteTally dup = tally({1, 2});
  dup.candidates[1] = "c0";
  expect_tally_error(dup);
}

TEST_CASE("average scores") {
  const auto avg = average_scores({{{"a", 1.0}, {"b", -1.0}}, {{"a", 3.0}, {"b", -3.0}}});
  CHECK(avg.at("a") == 2.0);
  CHECK(avg.at("b") == -2.0);
  CHECK_THROWS_AS(average_scores({}), Error);
  CHECK_THROWS_AS(average_scores({{{"a", 1.0}}, {{"b", 1.0}}}), Error);
  CHECK_THROWS_AS(average_scores({{{"a", 1.0}}, {{"a", 1.0}, {"b", 1.0}}}), Error);
}

TEST_CASE("vote csv: header, comments, CRLF and grouping") {
  std::istringstream in("photo_id,candidate_id,votes\r\n# comment\np1,x,10\np1,y,30\n\np2,x,20\np2,y,20\n");
  const auto tallies = parse_vote_csv(in);
  REQUIRE(tallies.size() == 2);
  CHECK(tallies.at("p1").candidates == std::vector<std::string>{"x", "y"});
  CHECK(tallies.at("p1").votes == std::vector<std::int64_t>{10, 30});
  CHECK(tallies.at("p2").s_max == 40);
}

TEST_CASE("vote csv: malformed rows") {
  std::istringstream bad_count("p1,x,10\np1,y,ten\n");
  CHECK_THROWS_AS(parse_vote_csv(bad_count), Error);
  std::istringstream bad_fields("p1,x\n");
  CHECK_THROWS_AS(parse_vote_csv(bad_fields), Error);
}

TEST_CASE("score csv output") {
  std::ostringstream out;
  write_score_csv({{"a", 4.0}, {"b", -1.0}, {"c", 0.25}}, out);
  CHECK(out.str() == "candidate_id,score\na,4\nb,-1\nc,0.25\n");
}
