#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "glyphnet/datasets.hpp"
#include "glyphnet/error.hpp"

using namespace glyphnet;

namespace {

std::vector<LabeledText> parse(const std::string& csv, std::size_t classes, std::vector<std::string>* warnings = nullptr) {
  std::istringstream in(csv);
  return parse_csv_corpus(in, classes, warnings);
}

BabiCorpus parse_babi(const std::string& text) {
  std::istringstream in(text);
  return parse_babi_dialogs(in);
}

// Keyword oracle: the class whose vocabulary occurs in the text.
std::size_t keyword_class(const std::string& text, std::size_t num_classes) {
  std::size_t found = num_classes;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (const auto& k : synthetic_keywords(c, num_classes)) {
      if (text.find(k) != std::string::npos) {
        if (found != num_classes && found != c) return num_classes;
        found = c;
      }
    }
  }
  return found;
}

const char* kTaskFourSample =
    "1 resto_paris_cheap_thai_2stars R_phone resto_paris_cheap_thai_2stars_phone\n"
    "2 resto_paris_cheap_thai_2stars R_cuisine thai\n"
    "3 resto_paris_cheap_thai_2stars R_address resto_paris_cheap_thai_2stars_address\n"
    "4 resto_paris_cheap_thai_2stars R_location paris\n"
    "5 resto_paris_cheap_thai_2stars R_number four\n"
    "6 resto_paris_cheap_thai_2stars R_price cheap\n"
    "7 resto_paris_cheap_thai_2stars R_rating 2\n"
    "8 hi\thello what can i help you with today\n"
    "9 can you make a restaurant reservation at resto_paris_cheap_thai_2stars\tgreat let me do the reservation\n"
    "10 <SILENCE>\tis there anything i can help you with\n"
    "11 may i have the address of the restaurant\there it is resto_paris_cheap_thai_2stars_address\n"
    "12 thanks\tis there anything i can help you with\n"
    "13 no thank you\tyou're welcome\n"
    "\n"
    "1 resto_rome_moderate_indian_6stars R_phone resto_rome_moderate_indian_6stars_phone\n"
    "2 resto_rome_moderate_indian_6stars R_rating 6\n"
    "3 good morning\thello what can i help you with today\n"
    "4 what is the phone number of the restaurant\there it is resto_rome_moderate_indian_6stars_phone\n"
    "\n";

}  // namespace

TEST(Csv, QuotedThreeFieldRow) {
  const auto c = parse("\"3\",\"T\",\"B\"\n", 4);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].label, 2u);
  EXPECT_EQ(c[0].text, "T. B");
}

TEST(Csv, EscapesAndQuotes) {
  const auto c = parse("\"1\",\"Title \"\"quoted\"\"\",\"line\\none, two\"\n\"2\",\"\",\"body only\"\n", 2);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].text, "Title \"quoted\". line one, two");
  EXPECT_EQ(c[1].text, "body only");
  EXPECT_EQ(c[1].label, 1u);
}

TEST(Csv, LabelOutOfRangeCitesRow) {
  try {
    parse("\"1\",\"a\",\"b\"\n\"5\",\"c\",\"d\"\n", 4);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
  EXPECT_THROW(parse("\"0\",\"a\"\n", 4), ParseError);
  EXPECT_THROW(parse("\"x\",\"a\"\n", 4), ParseError);
}

TEST(Csv, ColumnCountMismatch) {
  EXPECT_THROW(parse("\"1\",\"a\",\"b\"\n\"2\",\"c\"\n", 4), ParseError);
}

TEST(Csv, EmptyFileWarns) {
  std::vector<std::string> warnings;
  EXPECT_TRUE(parse("", 4, &warnings).empty());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Csv, RoundTripIsExact) {
  const std::vector<LabeledText> corpus{{0, "plain"}, {3, "with \"quotes\", commas"}, {1, "unicode caf\xc3\xa9"}};
  const std::string bytes = serialize_csv_corpus(corpus);
  EXPECT_EQ(parse(bytes, 4), corpus);
  EXPECT_EQ(serialize_csv_corpus(parse(bytes, 4)), bytes);
  const auto synthetic = generate_synthetic_classification(4, 50, 3);
  EXPECT_EQ(parse(serialize_csv_corpus(synthetic), 4), synthetic);
}

TEST(Babi, TwoDialogsAndKbAttachment) {
  const auto corpus = parse_babi(kTaskFourSample);
  ASSERT_EQ(corpus.dialogs.size(), 2u);
  const auto& d0 = corpus.dialogs[0];
  EXPECT_EQ(d0.id, 0u);
  ASSERT_EQ(d0.turns.size(), 12u);
  EXPECT_EQ(d0.turns[0].speaker, Speaker::user);
  EXPECT_EQ(d0.turns[0].kb_facts.size(), 7u);
  EXPECT_EQ(d0.turns[0].kb_facts[0], "resto_paris_cheap_thai_2stars R_phone resto_paris_cheap_thai_2stars_phone");
  EXPECT_EQ(d0.turns[1].speaker, Speaker::system);
  EXPECT_EQ(d0.turns[1].utterance, "hello what can i help you with today");
  EXPECT_EQ(d0.system_turn_count(), 6u);
  EXPECT_EQ(corpus.dialogs[1].kb_facts().size(), 2u);
  EXPECT_TRUE(corpus.candidates.contains("you're welcome"));
  EXPECT_EQ(corpus.candidates.size(), 6u);
}

TEST(Babi, SerializationIsLossless) {
  const auto corpus = parse_babi(kTaskFourSample);
  EXPECT_EQ(serialize_babi_dialogs(corpus.dialogs), kTaskFourSample);
  EXPECT_EQ(parse_babi(serialize_babi_dialogs(corpus.dialogs)).dialogs, corpus.dialogs);
}

TEST(Babi, KbLineOnItsOwn) {
  const auto corpus = parse_babi("1 resto1 R_phone resto1_phone\n2 hello\thi\n");
  ASSERT_EQ(corpus.dialogs.size(), 1u);
  EXPECT_EQ(corpus.dialogs[0].turns[0].kb_facts, std::vector<std::string>{"resto1 R_phone resto1_phone"});
}

TEST(Babi, RestartedNumberingStartsANewDialog) {
  EXPECT_EQ(parse_babi("1 a\tb\n2 c\td\n1 e\tf\n").dialogs.size(), 2u);
}

TEST(Babi, Errors) {
  try {
    parse_babi("1 a\tb\n2 c\td\n2 e\tf\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_babi("1 this is not a fact\n"), ParseError);
  EXPECT_THROW(parse_babi("1 a R_phone b\n\n"), ParseError);
  EXPECT_THROW(parse_babi("x a\tb\n"), ParseError);
  EXPECT_THROW(parse_babi("1 \tb\n"), ParseError);
}

TEST(Candidates, IndexedAndPlain) {
  std::istringstream indexed("1 here it is\n1 you're welcome\n");
  EXPECT_EQ(parse_candidates(indexed).candidates, (std::vector<std::string>{"here it is", "you're welcome"}));
  std::istringstream plain("here it is\n3 mixed\n");
  EXPECT_EQ(parse_candidates(plain).candidates, (std::vector<std::string>{"here it is", "3 mixed"}));
}

TEST(Synthetic, ClassificationCountsAndDeterminism) {
  const auto a = generate_synthetic_classification(2, 100, 7);
  EXPECT_EQ(a.size(), 200u);
  std::map<std::size_t, std::size_t> per;
  for (const auto& s : a) ++per[s.label];
  EXPECT_EQ(per[0], 100u);
  EXPECT_EQ(per[1], 100u);
  EXPECT_EQ(generate_synthetic_classification(2, 100, 7), a);
  EXPECT_NE(generate_synthetic_classification(2, 100, 8), a);
  EXPECT_THROW(generate_synthetic_classification(1, 10, 1), ConfigError);
  EXPECT_THROW(generate_synthetic_classification(synthetic_class_limit() + 1, 10, 1), ConfigError);
}

TEST(Synthetic, KeywordOracleIsPerfect) {
  for (std::size_t k = 2; k <= synthetic_class_limit(); ++k) {
    for (const auto& s : generate_synthetic_classification(k, 100, 11)) {
      ASSERT_EQ(keyword_class(s.text, k), s.label) << s.text;
      ASSERT_LE(s.text.size(), 72u);
      const auto& vocab = synthetic_keywords(s.label, k);
      EXPECT_NE(std::find(vocab.begin(), vocab.end(), s.text.substr(0, s.text.find(' '))), vocab.end()) << s.text;
    }
  }
  for (const auto& f : synthetic_filler_words())
    for (std::size_t c = 0; c < synthetic_class_limit(); ++c)
      for (const auto& k : synthetic_keywords(c, synthetic_class_limit())) EXPECT_EQ(f.find(k), std::string::npos);
}

TEST(Synthetic, SentimentCorpus) {
  const auto c = generate_synthetic_sentiment(100, 0.2, 5);
  ASSERT_EQ(c.size(), 200u);
  std::size_t neutral = 0;
  for (const auto& s : c) {
    bool pos = false, neg = false;
    for (const auto& w : sentiment_words(true)) pos = pos || s.text.find(w) != std::string::npos;
    for (const auto& w : sentiment_words(false)) neg = neg || s.text.find(w) != std::string::npos;
    EXPECT_FALSE(pos && neg);
    if (!pos && !neg) {
      ++neutral;
      continue;
    }
    EXPECT_EQ(s.label, pos ? 1u : 0u) << s.text;
  }
  EXPECT_EQ(neutral, 40u);
}

TEST(Synthetic, SentimentNeutralTextsAppearUnderBothLabels) {
  const auto c = generate_synthetic_sentiment(50, 0.2, 9);
  std::map<std::string, std::set<std::size_t>> labels;
  for (const auto& s : c) labels[s.text].insert(s.label);
  std::size_t both = 0;
  for (const auto& [text, l] : labels) both += l.size() == 2;
  EXPECT_EQ(both, 10u);
  EXPECT_EQ(generate_synthetic_sentiment(50, 0.2, 9)[3].text, c[3].text);
}

TEST(Synthetic, DialogsGoldReachableAndCandidateCount) {
  const auto corpus = generate_synthetic_dialogs(300, 10, 4);
  EXPECT_EQ(corpus.dialogs.size(), 300u);
  EXPECT_GE(corpus.candidates.size(), 20u);
  for (const auto& d : corpus.dialogs) {
    ASSERT_EQ(d.turns.size(), 4u);
    ASSERT_EQ(d.turns[0].kb_facts.size(), 3u);
    for (const auto& t : d.turns)
      if (t.speaker == Speaker::system) EXPECT_TRUE(corpus.candidates.contains(t.utterance));
    const std::string name = d.turns[0].kb_facts[0].substr(0, d.turns[0].kb_facts[0].find(' '));
    EXPECT_NE(d.turns[1].utterance.find(name + "_"), std::string::npos);
  }
  const auto again = generate_synthetic_dialogs(300, 10, 4);
  EXPECT_EQ(again.dialogs, corpus.dialogs);
}

TEST(Synthetic, RatingsAreUniform) {
  const auto corpus = generate_synthetic_dialogs(1000, 10, 17);
  std::array<double, 8> counts{};
  for (const auto& d : corpus.dialogs) {
    const auto& fact = d.turns[0].kb_facts.at(2);
    ASSERT_NE(fact.find(" R_rating "), std::string::npos);
    const int r = std::stoi(fact.substr(fact.rfind(' ') + 1));
    ASSERT_GE(r, 1);
    ASSERT_LE(r, 8);
    counts[static_cast<std::size_t>(r - 1)] += 1;
  }
  double chi2 = 0.0;
  for (const double c : counts) chi2 += (c - 125.0) * (c - 125.0) / 125.0;
  // 7 degrees of freedom, 0.999 quantile.
  EXPECT_LT(chi2, 24.32);
}

TEST(Split, StratifiedCounts) {
  const auto data = generate_synthetic_classification(2, 50, 1);
  const auto s = split_dataset(data, {0.8, 0.1, 0.1}, 3);
  for (std::size_t label = 0; label < 2; ++label) {
    auto count = [label](const std::vector<LabeledText>& v) {
      return std::count_if(v.begin(), v.end(), [label](const LabeledText& t) { return t.label == label; });
    };
    EXPECT_EQ(count(s.train), 40);
    EXPECT_EQ(count(s.val), 5);
    EXPECT_EQ(count(s.test), 5);
  }
}

TEST(Split, DisjointExhaustiveAndSeeded) {
  const auto data = generate_synthetic_classification(3, 40, 2);
  const auto s = split_dataset(data, {0.6, 0.2, 0.2}, 9);
  std::multiset<std::string> all;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (const auto& t : *part) all.insert(std::to_string(t.label) + t.text);
  std::multiset<std::string> expected;
  for (const auto& t : data) expected.insert(std::to_string(t.label) + t.text);
  EXPECT_EQ(all, expected);
  const auto again = split_dataset(data, {0.6, 0.2, 0.2}, 9);
  EXPECT_EQ(again.train, s.train);
  EXPECT_EQ(again.test, s.test);

  const auto everything = split_dataset(data, {1.0, 0.0, 0.0}, 1);
  EXPECT_EQ(everything.train.size(), data.size());
  EXPECT_TRUE(everything.val.empty());
  EXPECT_THROW(split_dataset(data, {0.5, 0.2, 0.2}, 1), ConfigError);

  const auto dialogs = generate_synthetic_dialogs(20, 4, 1).dialogs;
  const auto ds = split_dataset(dialogs, {0.5, 0.25, 0.25}, 2);
  EXPECT_EQ(ds.train.size() + ds.val.size() + ds.test.size(), 20u);
}
