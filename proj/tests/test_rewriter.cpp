// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dsum/corpus.hpp"
#include "dsum/rewriter.hpp"

using namespace dsum;
using namespace dsum::rewriter;

namespace {

TagSet sample_tagset() {
  return TagSet({{"statement", Role::Statement},
                 {"wh_question", Role::Question},
                 {"yes_no_question", Role::YesNoQuestion},
                 {"answer", Role::Answer},
                 {"agree", Role::Agreement},
                 {"disagree", Role::Disagreement},
                 {"appreciate", Role::Appreciation},
                 {"backchannel", Role::Removable},
                 {"greeting", Role::Removable},
                 {"other", Role::Other}});
}

Utterance utt(std::string speaker, const char* text, std::string tag,
              std::size_t index) {
  Utterance u;
  u.speaker = std::move(speaker);
  u.tokens = tokenize(text);
  u.da_tag = std::move(tag);
  u.index = index;
  return u;
}

Conversation conv_of(std::vector<Utterance> utts) {
  Conversation c;
  c.id = "c";
  c.utterances = std::move(utts);
  return c;
}

}  // namespace

TEST_CASE("default config is valid and round-trips through text") {
  const RewriteConfig cfg = default_config();
  CHECK_NOTHROW(validate_config(cfg));
  CHECK(cfg.qa_window == 3);
  CHECK(cfg.qa_min_overlap == 1);
  CHECK(cfg.removable_roles == std::set<Role>{Role::Removable});

  std::istringstream in(serialize_config(cfg));
  const RewriteConfig back = parse_config(in, "round");
  CHECK(back.qa_window == cfg.qa_window);
  CHECK(back.qa_min_overlap == cfg.qa_min_overlap);
  CHECK(back.removable_roles == cfg.removable_roles);
  CHECK(back.stopwords == cfg.stopwords);
  CHECK(back.templates == cfg.templates);
}

TEST_CASE("config file parsing") {
  std::istringstream in(
      "# rewrite options\n"
      "qa_window = 2\n"
      "removable_roles = removable other\n"
      "stopwords = the a\n"
      "template agreement = {speaker} concurred.\n");
  const RewriteConfig cfg = parse_config(in, "cfg");
  CHECK(cfg.qa_window == 2);
  CHECK(cfg.qa_min_overlap == 1);  // untouched default
  CHECK(cfg.removable_roles == std::set<Role>{Role::Removable, Role::Other});
  CHECK(cfg.stopwords == std::set<std::string>{"a", "the"});
  CHECK(cfg.templates.at("agreement") == "{speaker} concurred.");
  CHECK(cfg.templates.at("attribution") == "{speaker} said that {text}.");
}

TEST_CASE("config errors") {
  auto expect = [](const std::string& text, const char* msg) {
    std::istringstream in(text);
    CHECK_THROWS_WITH_AS(parse_config(in, "cfg"), msg, ParseError);
  };
  expect("qa_window = x\n", "cfg:1: bad number 'x'");
  expect("qa_window = 0\n", "cfg: qa_window must be positive");
  expect("no equals here\n", "cfg:1: expected 'key = value'");
  expect("template bogus = hi\n", "cfg:1: unknown template 'bogus'");
  expect("whatever = 3\n", "cfg:1: unknown key 'whatever'");
  expect("removable_roles = nope\n", "cfg:1: unknown role 'nope'");
  expect("template agreement = no placeholder\n",
         "cfg: template 'agreement' lacks placeholder {speaker}");

  RewriteConfig cfg = default_config();
  cfg.templates.erase("appreciation");
  CHECK_THROWS_WITH_AS(validate_config(cfg), "missing template 'appreciation'",
                       ParseError);
}

TEST_CASE("content words drop stopwords and punctuation") {
  const RewriteConfig cfg = default_config();
  CHECK(content_words(tokenize("what breed is your dog ?"), cfg) ==
        std::vector<std::string>{"breed", "dog"});
  CHECK(content_words(tokenize("yes , it is ."), cfg).empty());
}

TEST_CASE("remove_redundant keeps non-removable utterances in order") {
  const TagSet tags = sample_tagset();
  const RewriteConfig cfg = default_config();
  const auto conv = conv_of({
      utt("A", "first point", "statement", 0),
      utt("B", "uh huh", "backchannel", 1),
      utt("A", "second point", "statement", 2),
  });
  const auto f = remove_redundant(conv, tags, cfg);
  CHECK_FALSE(f.all_removed);
  REQUIRE(f.conv.utterances.size() == 2);
  CHECK(f.original_index == std::vector<std::size_t>{0, 2});
  CHECK(f.conv.utterances[0].tokens == tokenize("first point"));
  CHECK(f.conv.utterances[1].tokens == tokenize("second point"));
  CHECK(f.conv.utterances[0].index == 0);
  CHECK(f.conv.utterances[1].index == 1);

  // idempotent: a second pass removes nothing
  const auto again = remove_redundant(f.conv, tags, cfg);
  CHECK(again.conv == f.conv);

  // nothing removable: identity
  const auto id =
      remove_redundant(conv_of({utt("A", "hi", "statement", 0)}), tags, cfg);
  CHECK(id.conv.utterances.size() == 1);
  CHECK_FALSE(id.all_removed);

  // everything removable: empty plus warning
  const auto gone =
      remove_redundant(conv_of({utt("A", "hello", "greeting", 0),
                                utt("B", "mhm", "backchannel", 1)}),
                       tags, cfg);
  CHECK(gone.conv.utterances.empty());
  CHECK(gone.all_removed);

  // untagged input is rejected
  auto untagged = conv;
  untagged.utterances[1].da_tag.clear();
  CHECK_THROWS_AS(remove_redundant(untagged, tags, cfg), std::invalid_argument);
}

TEST_CASE("question-answer linking by content overlap") {
  const TagSet tags = sample_tagset();
  const RewriteConfig cfg = default_config();

  // shared content word "dog" links question to answer
  const auto linked = link_questions_answers(
      conv_of({utt("A", "what breed is your dog ?", "wh_question", 0),
               utt("B", "my dog is a collie .", "answer", 1)}),
      tags, cfg);
  CHECK(linked == std::vector<QaLink>{{0, 1}});

  // no content overlap within the window: question stays unlinked
  const auto none = link_questions_answers(
      conv_of({utt("A", "what breed is your dog ?", "wh_question", 0),
               utt("B", "nice weather lately .", "statement", 1),
               utt("B", "really nice .", "statement", 2),
               utt("B", "the dog is a collie .", "statement", 3)}),
      tags, cfg);
  CHECK(none == std::vector<QaLink>{{0, 3}});

  // beyond the window: unlinked
  RewriteConfig narrow = default_config();
  narrow.qa_window = 2;
  const auto far = link_questions_answers(
      conv_of({utt("A", "what breed is your dog ?", "wh_question", 0),
               utt("B", "nice weather lately .", "statement", 1),
               utt("B", "really nice .", "statement", 2),
               utt("B", "the dog is a collie .", "statement", 3)}),
      tags, narrow);
  CHECK(far.empty());

  // first match wins; pairs stay disjoint
  const auto first = link_questions_answers(
      conv_of({utt("A", "where is the dog ?", "wh_question", 0),
               utt("B", "the dog is outside .", "statement", 1),
               utt("A", "which dog do you mean ?", "wh_question", 2),
               utt("B", "the small dog .", "statement", 3)}),
      tags, cfg);
  CHECK(first == std::vector<QaLink>{{0, 1}, {2, 3}});

  // non-question roles never link
  CHECK(link_questions_answers(
            conv_of({utt("A", "the dog is here .", "statement", 0),
                     utt("B", "the dog is nice .", "statement", 1)}),
            tags, cfg)
            .empty());
}

TEST_CASE("yes/no coupling") {
  const TagSet tags = sample_tagset();
  const RewriteConfig cfg = default_config();

  const auto simple = couple_yes_no(
      conv_of({utt("A", "do you like dogs ?", "yes_no_question", 0),
               utt("B", "yeah .", "agree", 1)}),
      tags, cfg);
  REQUIRE(simple.size() == 1);
  CHECK(simple[0] == YesNoLink{0, 1, Polarity::Agree});

  const auto neg = couple_yes_no(
      conv_of({utt("A", "do you like cats ?", "yes_no_question", 0),
               utt("B", "not really .", "disagree", 1)}),
      tags, cfg);
  REQUIRE(neg.size() == 1);
  CHECK(neg[0].polarity == Polarity::Disagree);

  // nothing to couple with inside the window
  CHECK(couple_yes_no(
            conv_of({utt("A", "do you like dogs ?", "yes_no_question", 0),
                     utt("B", "the weather is nice .", "statement", 1)}),
            tags, cfg)
            .empty());

  // two stacked questions, one agreement: the nearer question couples
  const auto stacked = couple_yes_no(
      conv_of({utt("A", "do you like dogs ?", "yes_no_question", 0),
               utt("A", "do you like cats ?", "yes_no_question", 1),
               utt("B", "yes .", "agree", 2)}),
      tags, cfg);
  CHECK(stacked == std::vector<YesNoLink>{{1, 2, Polarity::Agree}});

  // an agreement before the question never couples backwards
  CHECK(couple_yes_no(conv_of({utt("B", "sure .", "agree", 0),
                               utt("A", "really ?", "yes_no_question", 1)}),
                      tags, cfg)
            .empty());
}

TEST_CASE("realize_action") {
  const TagSet tags = sample_tagset();
  const RewriteConfig cfg = default_config();
  CHECK(realize_action(utt("B", "yeah .", "agree", 0), tags, cfg) ==
        "B agreed.");
  CHECK(realize_action(utt("A", "no way .", "disagree", 0), tags, cfg) ==
        "A disagreed.");
  CHECK(realize_action(utt("A", "that is great .", "appreciate", 0), tags,
                       cfg) == "A appreciated that.");
  CHECK_THROWS_AS(realize_action(utt("A", "hello", "statement", 0), tags, cfg),
                  std::invalid_argument);
}

TEST_CASE("attribute_speech") {
  const RewriteConfig cfg = default_config();
  CHECK(attribute_speech(utt("A", "i like dogs", "", 0), cfg) ==
        "A said that i like dogs.");
  CHECK(attribute_speech(utt("B", "no", "", 0), cfg) == "B said that no.");
  // trailing punctuation collapses into the template's period
  CHECK(attribute_speech(utt("A", "dogs are great .", "", 0), cfg) ==
        "A said that dogs are great.");
  CHECK(attribute_speech(utt("A", "seriously ? !", "", 0), cfg) ==
        "A said that seriously.");
  Utterance empty;
  empty.speaker = "A";
  CHECK_THROWS_AS(attribute_speech(empty, cfg), std::invalid_argument);
}

TEST_CASE("render: baseline attributes everything in order") {
  const TagSet tags = sample_tagset();
  const RewriteConfig cfg = default_config();
  RuleGates baseline;
  baseline.remove_redundant = false;
  baseline.realize_actions = false;
  baseline.join_qa = false;
  baseline.join_wh = false;

  const auto conv = conv_of({utt("A", "i got a new car .", "statement", 0),
                             utt("B", "mine broke down .", "statement", 1)});
  const auto doc = render_document(conv, tags, cfg, baseline);
  REQUIRE(doc.sentences.size() == 2);
  CHECK(doc.sentences[0].text == "A said that i got a new car.");
  CHECK(doc.sentences[1].text == "B said that mine broke down.");
  CHECK(doc.sentences[0].sources == std::vector<std::size_t>{0});
  CHECK(doc.sentences[1].sources == std::vector<std::size_t>{1});
  CHECK(to_paragraph(doc) ==
        "A said that i got a new car. B said that mine broke down.");
}

TEST_CASE("render: all removable yields an empty document with a warning") {
  const TagSet tags = sample_tagset();
  const auto doc = render_document(
      conv_of({utt("A", "hi", "greeting", 0), utt("B", "mhm", "backchannel", 1)}),
      tags, default_config(), RuleGates{});
  CHECK(doc.sentences.empty());
  CHECK(doc.warning);
}

TEST_CASE("render: six-utterance conversation exercising every rule") {
  const TagSet tags = sample_tagset();
  const RewriteConfig cfg = default_config();
  const auto conv = conv_of({
      utt("A", "hello there", "greeting", 0),
      utt("A", "do you have any dogs ?", "yes_no_question", 1),
      utt("B", "yeah .", "agree", 2),
      utt("B", "i have two dogs .", "statement", 3),
      utt("A", "what breed are your dogs ?", "wh_question", 4),
      utt("B", "my dogs are collies .", "answer", 5),
  });
  RuleGates full;
  full.join_wh = true;
  const auto doc = render_document(conv, tags, cfg, full);
  REQUIRE(doc.sentences.size() == 3);
  CHECK(doc.sentences[0].text ==
        "A asked whether do you have any dogs, and B agreed.");
  CHECK(doc.sentences[0].sources == std::vector<std::size_t>{1, 2});
  CHECK(doc.sentences[1].text == "B said that i have two dogs.");
  CHECK(doc.sentences[1].sources == std::vector<std::size_t>{3});
  CHECK(doc.sentences[2].text ==
        "A asked whether what breed are your dogs, and B said my dogs are "
        "collies.");
  CHECK(doc.sentences[2].sources == std::vector<std::size_t>{4, 5});

  // rendering is deterministic
  CHECK(render_document(conv, tags, cfg, full) == doc);

  // without join_wh the wh-question and answer are attributed separately
  RuleGates no_wh;
  const auto doc2 = render_document(conv, tags, cfg, no_wh);
  REQUIRE(doc2.sentences.size() == 4);
  CHECK(doc2.sentences[2].text ==
        "A said that what breed are your dogs.");
  CHECK(doc2.sentences[3].text == "B said that my dogs are collies.");

  // without realize_actions an unconsumed agreement is attributed
  RuleGates attribution_only;
  attribution_only.join_qa = false;
  attribution_only.join_wh = false;
  attribution_only.realize_actions = false;
  const auto doc3 = render_document(conv, tags, cfg, attribution_only);
  REQUIRE(doc3.sentences.size() == 5);
  CHECK(doc3.sentences[1].text == "B said that yeah.");
}

TEST_CASE("render: realize handles uncoupled actions") {
  const TagSet tags = sample_tagset();
  const auto conv = conv_of({utt("A", "i think so .", "statement", 0),
                             utt("B", "yeah .", "agree", 1),
                             utt("C", "nah .", "disagree", 2),
                             utt("A", "that is lovely .", "appreciate", 3)});
  const auto doc =
      render_document(conv, tags, default_config(), RuleGates{});
  REQUIRE(doc.sentences.size() == 4);
  CHECK(doc.sentences[1].text == "B agreed.");
  CHECK(doc.sentences[2].text == "C disagreed.");
  CHECK(doc.sentences[3].text == "A appreciated that.");
}

namespace {

Conversation random_tagged_conv(std::mt19937_64& rng, const TagSet& tags) {
  static const std::vector<std::string> words = {
      "dog", "cat", "car", "house", "rain", "good", "bad", "see", "go", "day"};
  static const std::vector<std::string> speakers = {"A", "B", "C"};
  Conversation conv;
  conv.id = "rand";
  const std::size_t n = 1 + rng() % 8;
  for (std::size_t t = 0; t < n; ++t) {
    Utterance u;
    u.speaker = speakers[rng() % speakers.size()];
    const std::size_t len = 1 + rng() % 4;
    for (std::size_t j = 0; j < len; ++j)
      u.tokens.push_back(words[rng() % words.size()]);
    if (rng() % 2) u.tokens.push_back(rng() % 2 ? "." : "?");
    u.da_tag = tags.tag(rng() % tags.size());
    u.index = t;
    conv.utterances.push_back(std::move(u));
  }
  return conv;
}

void check_invariants(const Conversation& conv, const TagSet& tags,
                      const RewriteConfig& cfg, const RuleGates& gates) {
  const auto doc = render_document(conv, tags, cfg, gates);
  CHECK(render_document(conv, tags, cfg, gates) == doc);

  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
    const Role r = tags.role(conv.utterances[i].da_tag);
    if (!gates.remove_redundant || !cfg.removable_roles.count(r))
      survivors.push_back(i);
  }

  CHECK(doc.sentences.size() <= survivors.size());

  // every survivor appears in exactly one sentence's sources
  std::map<std::size_t, int> seen;
  std::size_t last_min = 0;
  bool first = true;
  for (const auto& sent : doc.sentences) {
    REQUIRE(!sent.sources.empty());
    std::size_t mn = sent.sources[0];
    for (std::size_t s : sent.sources) {
      ++seen[s];
      mn = std::min(mn, s);
      if (gates.remove_redundant)
        CHECK_FALSE(cfg.removable_roles.count(
            tags.role(conv.utterances[s].da_tag)));
    }
    if (!first) CHECK(mn > last_min);
    last_min = mn;
    first = false;
  }
  CHECK(seen.size() == survivors.size());
  for (std::size_t s : survivors) CHECK(seen[s] == 1);
}

}  // namespace

TEST_CASE("render invariants hold on random conversations") {
  const TagSet tags = sample_tagset();
  const RewriteConfig cfg = default_config();
  std::mt19937_64 rng(77);
  const RuleGates combos[] = {
      {false, false, false, false},
      {true, false, false, false},
      {true, true, false, false},
      {true, true, true, false},
      {true, true, true, true},
  };
  for (int iter = 0; iter < 300; ++iter) {
    const auto conv = random_tagged_conv(rng, tags);
    for (const auto& gates : combos) check_invariants(conv, tags, cfg, gates);
  }
}
