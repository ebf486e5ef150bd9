// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0
//
// Conversation corpus: domain types, tokenization, a fallback POS tagger and
// the line-oriented file formats (conversations, tag sets, summary examples).

#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dsum {

// Raised by all loaders; the message carries "<source>:<line>: ..." context.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// What the rewriter does with a dialogue-act tag.
enum class Role {
  Removable,
  Question,
  YesNoQuestion,
  Answer,
  Agreement,
  Disagreement,
  Appreciation,
  Statement,
  Other,
};

const char* role_name(Role r);
Role role_from_string(const std::string& s);  // throws ParseError

// One speaker turn. pos_tags is either empty or aligned with tokens.
struct Utterance {
  std::string speaker;
  std::vector<std::string> tokens;
  std::vector<std::string> pos_tags;
  std::string da_tag;  // empty means untagged
  std::size_t index = 0;

  bool operator==(const Utterance&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;

  bool operator==(const Conversation&) const = default;
};

// Closed universe of dialogue-act tags with their rewrite roles.
class TagSet {
 public:
  TagSet() = default;
  // throws ParseError on duplicate tags
  explicit TagSet(std::vector<std::pair<std::string, Role>> entries);

  std::size_t size() const { return tags_.size(); }
  const std::vector<std::string>& tags() const { return tags_; }
  const std::string& tag(std::size_t idx) const { return tags_[idx]; }
  Role role_at(std::size_t idx) const { return roles_[idx]; }
  bool contains(const std::string& tag) const;
  std::size_t index_of(const std::string& tag) const;  // throws on unknown
  Role role(const std::string& tag) const;             // throws on unknown

  bool operator==(const TagSet& other) const {
    return tags_ == other.tags_ && roles_ == other.roles_;
  }

 private:
  std::vector<std::string> tags_;
  std::vector<Role> roles_;
  std::unordered_map<std::string, std::size_t> index_;
};

// A source text with one or more reference summaries.
struct SummaryExample {
  std::vector<std::string> source_text;
  std::vector<std::vector<std::string>> references;

  bool operator==(const SummaryExample&) const = default;
};

// Lowercases and splits on whitespace; every punctuation character becomes
// its own token ("don't" -> don ' t). Bytes >= 0x80 pass through unchanged.
std::vector<std::string> tokenize(const std::string& raw);

std::string join_tokens(const std::vector<std::string>& tokens);

// token made only of ASCII punctuation characters
bool is_punct_token(const std::string& token);

// Coarse POS tagger used when the input carries no tags: bundled lexicon,
// then suffix rules, then OTHER. Output tags are drawn from
// {NOUN, VERB, ADJ, ADV, PRON, DET, PREP, CONJ, NUM, INTJ, PUNCT, OTHER}.
std::vector<std::string> fallback_pos_tag(const std::vector<std::string>& tokens);

// ---- conversation files -----------------------------------------------------
// One utterance per line, tab-separated:
//   conv_id  utt_index  speaker  da_tag  text  [pos]
// da_tag may be empty; pos is space-separated and aligned with the tokenized
// text. Lines starting with '#' are comments; blank lines are skipped.

std::vector<Conversation> load_conversations(const std::string& path,
                                             const TagSet& tagset);
std::vector<Conversation> parse_conversations(std::istream& in,
                                              const TagSet& tagset,
                                              const std::string& source_name);
std::string serialize_conversations(const std::vector<Conversation>& convs);
void save_conversations(const std::vector<Conversation>& convs,
                        const std::string& path);

// ---- tag set files ----------------------------------------------------------
// One "tag<TAB>role" pair per line; '#' comments and blank lines allowed.

TagSet load_tagset(const std::string& path);
TagSet parse_tagset(std::istream& in, const std::string& source_name);
std::string serialize_tagset(const TagSet& tagset);

// ---- summary example files --------------------------------------------------
// Records of a "source:" block followed by "ref-1:", "ref-2:", ... blocks,
// records separated by a line of "===". Block text is tokenized.

std::vector<SummaryExample> load_summary_examples(const std::string& path);
std::vector<SummaryExample> parse_summary_examples(
    std::istream& in, const std::string& source_name);

}  // namespace dsum
