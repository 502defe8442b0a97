#include "answer_corpus.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace apvqa;
using namespace apvqa::testing;

TEST(ParseAnswer, CuratedCorpus) {
  ASSERT_GE(answer_corpus().size(), 20u);
  for (const auto& c : answer_corpus()) {
    const ParsedAnswer p = parse_answer(c.raw);
    EXPECT_EQ(p.valid, c.expected.has_value()) << '"' << c.raw << '"';
    EXPECT_EQ(p.label, c.expected) << '"' << c.raw << '"';
  }
}

TEST(ParseAnswer, EveryLabelParsesToItself) {
  for (PositionLabel l : kAllLabels) {
    EXPECT_EQ(parse_answer(to_string(l)).label, l);
    EXPECT_EQ(parse_answer("It is in the " + std::string(to_string(l)) + ".").label, l);
  }
}

TEST(ParseAnswer, AnyTwoDistinctLabelsAreInvalid) {
  for (PositionLabel a : kAllLabels) {
    for (PositionLabel b : kAllLabels) {
      const std::string text = std::string(to_string(a)) + " or " + std::string(to_string(b));
      EXPECT_FALSE(parse_answer(text).valid) << text;
    }
  }
}

TEST(NormalizeAnswer, Examples) {
  EXPECT_EQ(normalize_answer("  Top-LEFT!!  "), "top left");
  EXPECT_EQ(normalize_answer("a\tb\n\nc"), "a b c");
  EXPECT_EQ(normalize_answer(""), "");
}

TEST(NormalizeAnswer, IdempotentAndParseInvariant) {
  for (const auto& c : answer_corpus()) {
    const std::string once = normalize_answer(c.raw);
    EXPECT_EQ(normalize_answer(once), once);
    EXPECT_EQ(parse_answer(once), parse_answer(c.raw));
  }
}
