// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0
//
// Rule-based rewriting of a dialogue-act-tagged conversation into an ordered
// prose paragraph: drop zero-contribution utterances, couple yes/no questions
// with agreement or disagreement, link questions to answers by content-word
// overlap, realize actions ("B agreed."), attribute the rest ("A said that ...").

#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dsum/corpus.hpp"

namespace dsum::rewriter {

// Template keys: attribution, question-answer, yes-no-agree, yes-no-disagree,
// agreement, disagreement, appreciation. Placeholders {speaker} {text}
// {qspeaker} {qtext} are substituted as applicable.
struct RewriteConfig {
  std::set<Role> removable_roles = {Role::Removable};
  std::size_t qa_window = 3;
  std::size_t qa_min_overlap = 1;
  std::set<std::string> stopwords;
  std::map<std::string, std::string> templates;
};

// all defaults filled in (bundled stopword list, default templates)
RewriteConfig default_config();

// Throws ParseError when a template misses a required placeholder, a window
// or threshold is zero, or a template key is unknown.
void validate_config(const RewriteConfig& cfg);

// ---- config files -------------------------------------------------------
// Plain text: `qa_window = 3`, `removable_roles = removable ...`,
// `stopwords = a an the ...`, `template <key> = <string>`. '#' comments.
// Omitted keys keep their defaults.

RewriteConfig parse_config(std::istream& in, const std::string& source_name);
RewriteConfig load_config(const std::string& path);
std::string serialize_config(const RewriteConfig& cfg);

// which rewrite rules a pipeline variant enables
struct RuleGates {
  bool remove_redundant = true;
  bool realize_actions = true;
  bool join_qa = true;
  bool join_wh = false;
};

struct FilteredConversation {
  Conversation conv;                        // survivors, reindexed from 0
  std::vector<std::size_t> original_index;  // survivor -> index in the input
  bool all_removed = false;
};

struct Sentence {
  std::string text;
  std::vector<std::size_t> sources;  // original utterance indices, ascending

  bool operator==(const Sentence&) const = default;
};

struct Document {
  std::vector<Sentence> sentences;
  bool warning = false;  // nothing survived removal

  bool operator==(const Document&) const = default;
};

struct QaLink {
  std::size_t q_index = 0;
  std::size_t a_index = 0;

  bool operator==(const QaLink&) const = default;
};

enum class Polarity { Agree, Disagree };

struct YesNoLink {
  std::size_t q_index = 0;
  std::size_t a_index = 0;
  Polarity polarity = Polarity::Agree;

  bool operator==(const YesNoLink&) const = default;
};

// tokens that are neither stopwords nor punctuation
std::vector<std::string> content_words(const std::vector<std::string>& tokens,
                                       const RewriteConfig& cfg);

// Keeps utterances whose role is not removable, in order, remembering the
// original indices. Every utterance must carry a da_tag.
FilteredConversation remove_redundant(const Conversation& conv,
                                      const TagSet& tagset,
                                      const RewriteConfig& cfg);

// For each question-role utterance, in order: the first of the next
// qa_window utterances sharing >= qa_min_overlap distinct content words
// becomes its answer. Pairs are disjoint.
std::vector<QaLink> link_questions_answers(const Conversation& conv,
                                           const TagSet& tagset,
                                           const RewriteConfig& cfg);

// Couples each agreement/disagreement utterance with the nearest preceding
// uncoupled yes_no_question within qa_window. No word overlap required.
std::vector<YesNoLink> couple_yes_no(const Conversation& conv,
                                     const TagSet& tagset,
                                     const RewriteConfig& cfg);

// "B agreed." / "A disagreed." / "A appreciated that."
// Throws std::invalid_argument unless the role is one of those three.
std::string realize_action(const Utterance& utt, const TagSet& tagset,
                           const RewriteConfig& cfg);

// "A said that i like dogs." Trailing punctuation tokens are dropped from
// the text before substitution. Throws std::invalid_argument on an empty
// utterance.
std::string attribute_speech(const Utterance& utt, const RewriteConfig& cfg);

// Applies, gated by `gates` and in this order: removal, yes/no coupling,
// question-answer linking, action realization, speech attribution. Sentence
// sources carry original utterance indices.
Document render_document(const Conversation& conv, const TagSet& tagset,
                         const RewriteConfig& cfg, const RuleGates& gates);

// sentences joined with single spaces
std::string to_paragraph(const Document& doc);

}  // namespace dsum::rewriter
