#include <gtest/gtest.h>

#include <map>
#include <sstream>
#include <vector>

#include "fsdd/error.hpp"
#include "fsdd/multiset.hpp"
#include "fsdd/prob.hpp"
#include "fsdd/text_format.hpp"

namespace fsdd {
namespace {

std::vector<int> counts_of(const CountVector& x) { return x.to_vector(); }

TEST(MultisetCodec, CountsSmallSet) {
  const TokenMultiset s({0, 0, 2}, 4, 3);
  EXPECT_EQ(counts_of(set_to_counts(s)), (std::vector<int>{2, 0, 1, 0}));
}

TEST(MultisetCodec, EmptySet) {
  const TokenMultiset s({}, 3, 0);
  EXPECT_EQ(counts_of(set_to_counts(s)), (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(counts_to_set(CountVector({0, 0, 0}, 0)).cardinality(), 0);
}

TEST(MultisetCodec, InverseEmitsAscendingTokens) {
  const auto s = counts_to_set(CountVector({2, 0, 1, 0}, 3));
  EXPECT_EQ(std::vector<int>(s.tokens().begin(), s.tokens().end()), (std::vector<int>{0, 0, 2}));
}

TEST(MultisetCodec, CountsMatchIndependentTally) {
  RngStream rng(11, 0);
  std::vector<int> tokens;
  for (int i = 0; i < 64; ++i) tokens.push_back(static_cast<int>(rng.uniform_index(16)));
  std::map<int, int> tally;
  for (int t : tokens) tally[t] += 1;

  const auto x = set_to_counts(TokenMultiset(tokens, 16, 64));
  ASSERT_EQ(total(x.counts()), 64);
  for (int j = 0; j < 16; ++j) {
    EXPECT_EQ(x[j], tally.contains(j) ? tally[j] : 0) << "index " << j;
  }
}

TEST(MultisetCodec, EqualityIgnoresConstructionOrder) {
  EXPECT_EQ(TokenMultiset({3, 1, 1, 2}, 4), TokenMultiset({1, 2, 3, 1}, 4));
  EXPECT_NE(TokenMultiset({3, 1, 1, 2}, 4), TokenMultiset({1, 2, 3, 3}, 4));
}

TEST(MultisetCodec, RejectsInvalidValues) {
  EXPECT_THROW(TokenMultiset({0, 4}, 4), ValidationError);
  EXPECT_THROW(TokenMultiset({-1}, 4), ValidationError);
  EXPECT_THROW(TokenMultiset({0, 1}, 4, 3), ValidationError);
  EXPECT_THROW(CountVector({2, -1, 2}, 3), ValidationError);
  EXPECT_THROW(CountVector({2, 0, 2}, 3), ValidationError);
  EXPECT_THROW(counts_to_set(std::vector<int>{1, 1}, 3), ValidationError);
}

TEST(MultisetCodec, BijectionProperty) {
  // Both directions, 10^4 cases spread over the grid of shapes.
  const int codebooks[] = {2, 8, 64, 4096};
  const int sizes[] = {0, 1, 32, 128};
  RngStream rng(2024, 1);
  int cases = 0;
  for (int rep = 0; rep < 625; ++rep) {
    for (int c : codebooks) {
      for (int m : sizes) {
        std::vector<int> tokens(static_cast<std::size_t>(m));
        for (auto& t : tokens) t = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(c)));
        const TokenMultiset s(tokens, c, m);
        ASSERT_EQ(counts_to_set(set_to_counts(s)), s);

        const auto x = sample_multinomial_noise(c, m, rng);
        ASSERT_EQ(set_to_counts(counts_to_set(x)), x);
        ++cases;
      }
    }
  }
  EXPECT_EQ(cases, 10000);
}

TEST(MultisetCodec, PermutationInvariance) {
  RngStream rng(5, 0);
  const TokenMultiset s({7, 1, 1, 3, 0, 7, 7, 2}, 8);
  const auto reference = set_to_counts(s);
  for (int i = 0; i < 50; ++i) {
    const auto order = random_permutation(s, rng);
    EXPECT_EQ(set_to_counts(TokenMultiset(order, 8)), reference);
  }
}

TEST(RandomPermutation, Basics) {
  RngStream rng(1, 0);
  EXPECT_EQ(random_permutation(TokenMultiset({5}, 8), rng), std::vector<int>{5});

  auto perm = random_permutation(TokenMultiset({1, 1, 2}, 4), rng);
  std::sort(perm.begin(), perm.end());
  EXPECT_EQ(perm, (std::vector<int>{1, 1, 2}));

  const TokenMultiset big({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 10);
  RngStream a(99, 3);
  RngStream b(99, 3);
  EXPECT_EQ(random_permutation(big, a), random_permutation(big, b));
}

TEST(TextFormat, TokenFileRoundTrip) {
  RngStream rng(8, 0);
  std::vector<TokenMultiset> sets;
  for (int i = 0; i < 1000; ++i) {
    std::vector<int> tokens(12);
    for (auto& t : tokens) t = static_cast<int>(rng.uniform_index(50));
    sets.emplace_back(tokens, 50);
  }
  std::stringstream buffer;
  write_token_file(buffer, 50, 12, sets);
  const auto file = read_token_file(buffer, "mem");
  EXPECT_EQ(file.codebook_size, 50);
  EXPECT_EQ(file.cardinality, 12);
  EXPECT_EQ(file.sets, sets);
  EXPECT_EQ(file.lines.front(), 2u);
}

TEST(TextFormat, TokenFileErrorsNameTheLine) {
  std::stringstream bad_count("C=4 M=3\n0 1 2\n0 1\n");
  try {
    read_token_file(bad_count, "tokens.txt");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("tokens.txt:3"), std::string::npos);
  }
  std::stringstream out_of_range("C=4 M=2\n0 4\n");
  EXPECT_THROW(read_token_file(out_of_range, "x"), ParseError);
  std::stringstream no_header("0 1 2\n");
  EXPECT_THROW(read_token_file(no_header, "x"), ParseError);
  std::stringstream missing_m("C=4\n");
  EXPECT_THROW(read_token_file(missing_m, "x"), ParseError);
}

TEST(TextFormat, CountFileLabeledRoundTrip) {
  CountFile file;
  file.codebook_size = 3;
  file.target_sum = 4;
  file.num_classes = 2;
  file.rows = {{4, 0, 0}, {1, 2, 1}};
  file.labels = {1, 0};
  std::stringstream buffer;
  write_count_file(buffer, file);
  EXPECT_EQ(buffer.str(), "C=3 M=4 classes=2\n1: 4 0 0\n0: 1 2 1\n");
  const auto back = read_count_file(buffer, "mem");
  EXPECT_EQ(back.rows, file.rows);
  EXPECT_EQ(back.labels, file.labels);
}

TEST(TextFormat, CountFileSumCheck) {
  std::stringstream strict("C=2 M=3\n2 1\n3 1\n");
  EXPECT_THROW(read_count_file(strict, "s"), ParseError);
  std::stringstream raw("C=2 M=3\n2 1\n3 1\n");
  const auto file = read_count_file(raw, "s", SumCheck::raw);
  EXPECT_EQ(file.rows.size(), 2u);
}

}  // namespace
}  // namespace fsdd
