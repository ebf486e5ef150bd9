// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0

#include "dsum/corpus.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace dsum {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line,
                       const std::string& msg) {
  throw ParseError(source + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> split_spaces(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  return in;
}

void write_or_throw(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  out << content;
  if (!out) throw ParseError(path + ": write failed");
}

}  // namespace

const char* role_name(Role r) {
  switch (r) {
    case Role::Removable: return "removable";
    case Role::Question: return "question";
    case Role::YesNoQuestion: return "yes_no_question";
    case Role::Answer: return "answer";
    case Role::Agreement: return "agreement";
    case Role::Disagreement: return "disagreement";
    case Role::Appreciation: return "appreciation";
    case Role::Statement: return "statement";
    case Role::Other: return "other";
  }
  return "?";
}

Role role_from_string(const std::string& s) {
  static const std::array<Role, 9> all = {
      Role::Removable,    Role::Question,     Role::YesNoQuestion,
      Role::Answer,       Role::Agreement,    Role::Disagreement,
      Role::Appreciation, Role::Statement,    Role::Other};
  for (Role r : all)
    if (s == role_name(r)) return r;
  throw ParseError("unknown role '" + s + "'");
}

TagSet::TagSet(std::vector<std::pair<std::string, Role>> entries) {
  tags_.reserve(entries.size());
  roles_.reserve(entries.size());
  for (auto& [tag, role] : entries) {
    if (index_.count(tag))
      throw ParseError("duplicate tag '" + tag + "' in tag set");
    index_.emplace(tag, tags_.size());
    tags_.push_back(std::move(tag));
    roles_.push_back(role);
  }
}

bool TagSet::contains(const std::string& tag) const {
  return index_.count(tag) != 0;
}

std::size_t TagSet::index_of(const std::string& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) throw ParseError("unknown tag '" + tag + "'");
  return it->second;
}

Role TagSet::role(const std::string& tag) const {
  return roles_[index_of(tag)];
}

std::vector<std::string> tokenize(const std::string& raw) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : raw) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c >= 0x80) {
      cur += static_cast<char>(c);
    } else if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else {
      flush();
      out.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  flush();
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

bool is_punct_token(const std::string& token) {
  if (token.empty()) return false;
  for (unsigned char c : token)
    if (c >= 0x80 || std::isalnum(c) || std::isspace(c)) return false;
  return true;
}

namespace {

const std::unordered_map<std::string, const char*>& pos_lexicon() {
  static const std::unordered_map<std::string, const char*> lex = {
      // pronouns
      {"i", "PRON"}, {"you", "PRON"}, {"he", "PRON"}, {"she", "PRON"},
      {"it", "PRON"}, {"we", "PRON"}, {"they", "PRON"}, {"me", "PRON"},
      {"him", "PRON"}, {"us", "PRON"}, {"them", "PRON"}, {"my", "PRON"},
      {"your", "PRON"}, {"his", "PRON"}, {"its", "PRON"}, {"our", "PRON"},
      {"their", "PRON"}, {"mine", "PRON"}, {"yours", "PRON"}, {"hers", "PRON"},
      {"this", "PRON"}, {"that", "PRON"}, {"these", "PRON"}, {"those", "PRON"},
      {"who", "PRON"}, {"whom", "PRON"}, {"whose", "PRON"}, {"what", "PRON"},
      {"which", "PRON"}, {"someone", "PRON"}, {"something", "PRON"},
      {"anyone", "PRON"}, {"anything", "PRON"}, {"everyone", "PRON"},
      {"everything", "PRON"}, {"nobody", "PRON"}, {"nothing", "PRON"},
      {"myself", "PRON"}, {"yourself", "PRON"}, {"itself", "PRON"},
      // determiners
      {"the", "DET"}, {"a", "DET"}, {"an", "DET"}, {"some", "DET"},
      {"any", "DET"}, {"every", "DET"}, {"each", "DET"}, {"either", "DET"},
      {"neither", "DET"}, {"both", "DET"}, {"all", "DET"}, {"few", "DET"},
      {"many", "DET"}, {"much", "DET"}, {"most", "DET"}, {"several", "DET"},
      {"another", "DET"}, {"other", "DET"}, {"such", "DET"},
      // prepositions
      {"of", "PREP"}, {"in", "PREP"}, {"on", "PREP"}, {"at", "PREP"},
      {"by", "PREP"}, {"for", "PREP"}, {"with", "PREP"}, {"without", "PREP"},
      {"about", "PREP"}, {"against", "PREP"}, {"between", "PREP"},
      {"into", "PREP"}, {"through", "PREP"}, {"during", "PREP"},
      {"before", "PREP"}, {"after", "PREP"}, {"above", "PREP"},
      {"below", "PREP"}, {"to", "PREP"}, {"from", "PREP"}, {"up", "PREP"},
      {"down", "PREP"}, {"over", "PREP"}, {"under", "PREP"}, {"off", "PREP"},
      {"near", "PREP"}, {"across", "PREP"}, {"around", "PREP"},
      // conjunctions
      {"and", "CONJ"}, {"or", "CONJ"}, {"but", "CONJ"}, {"nor", "CONJ"},
      {"so", "CONJ"}, {"because", "CONJ"}, {"although", "CONJ"},
      {"though", "CONJ"}, {"while", "CONJ"}, {"if", "CONJ"},
      {"unless", "CONJ"}, {"since", "CONJ"}, {"when", "CONJ"},
      {"whereas", "CONJ"}, {"whether", "CONJ"}, {"until", "CONJ"},
      // interjections
      {"yes", "INTJ"}, {"no", "INTJ"}, {"yeah", "INTJ"}, {"yep", "INTJ"},
      {"nope", "INTJ"}, {"uh", "INTJ"}, {"um", "INTJ"}, {"huh", "INTJ"},
      {"oh", "INTJ"}, {"wow", "INTJ"}, {"hey", "INTJ"}, {"hello", "INTJ"},
      {"hi", "INTJ"}, {"bye", "INTJ"}, {"goodbye", "INTJ"}, {"okay", "INTJ"},
      {"ok", "INTJ"}, {"hmm", "INTJ"}, {"ah", "INTJ"}, {"well", "INTJ"},
      {"right", "INTJ"}, {"sure", "INTJ"}, {"thanks", "INTJ"},
      // verbs
      {"be", "VERB"}, {"am", "VERB"}, {"is", "VERB"}, {"are", "VERB"},
      {"was", "VERB"}, {"were", "VERB"}, {"been", "VERB"}, {"being", "VERB"},
      {"have", "VERB"}, {"has", "VERB"}, {"had", "VERB"}, {"do", "VERB"},
      {"does", "VERB"}, {"did", "VERB"}, {"done", "VERB"}, {"will", "VERB"},
      {"would", "VERB"}, {"can", "VERB"}, {"could", "VERB"}, {"shall", "VERB"},
      {"should", "VERB"}, {"may", "VERB"}, {"might", "VERB"}, {"must", "VERB"},
      {"go", "VERB"}, {"goes", "VERB"}, {"went", "VERB"}, {"gone", "VERB"},
      {"get", "VERB"}, {"got", "VERB"}, {"make", "VERB"}, {"made", "VERB"},
      {"know", "VERB"}, {"knew", "VERB"}, {"think", "VERB"},
      {"thought", "VERB"}, {"say", "VERB"}, {"said", "VERB"}, {"see", "VERB"},
      {"saw", "VERB"}, {"come", "VERB"}, {"came", "VERB"}, {"take", "VERB"},
      {"took", "VERB"}, {"want", "VERB"}, {"like", "VERB"}, {"need", "VERB"},
      {"use", "VERB"}, {"find", "VERB"}, {"found", "VERB"}, {"give", "VERB"},
      {"gave", "VERB"}, {"tell", "VERB"}, {"told", "VERB"}, {"work", "VERB"},
      {"call", "VERB"}, {"try", "VERB"}, {"ask", "VERB"}, {"feel", "VERB"},
      {"felt", "VERB"}, {"seem", "VERB"}, {"leave", "VERB"}, {"left", "VERB"},
      {"put", "VERB"}, {"mean", "VERB"}, {"keep", "VERB"}, {"kept", "VERB"},
      {"let", "VERB"}, {"begin", "VERB"}, {"began", "VERB"}, {"help", "VERB"},
      {"talk", "VERB"}, {"turn", "VERB"}, {"start", "VERB"}, {"show", "VERB"},
      {"hear", "VERB"}, {"heard", "VERB"}, {"play", "VERB"}, {"run", "VERB"},
      {"ran", "VERB"}, {"move", "VERB"}, {"live", "VERB"},
      {"believe", "VERB"}, {"bring", "VERB"}, {"brought", "VERB"},
      {"happen", "VERB"}, {"agree", "VERB"}, {"disagree", "VERB"},
      {"guess", "VERB"}, {"suppose", "VERB"}, {"eat", "VERB"}, {"ate", "VERB"},
      // adverbs
      {"very", "ADV"}, {"really", "ADV"}, {"quite", "ADV"}, {"too", "ADV"},
      {"also", "ADV"}, {"just", "ADV"}, {"now", "ADV"}, {"then", "ADV"},
      {"here", "ADV"}, {"there", "ADV"}, {"always", "ADV"}, {"never", "ADV"},
      {"often", "ADV"}, {"sometimes", "ADV"}, {"usually", "ADV"},
      {"again", "ADV"}, {"soon", "ADV"}, {"already", "ADV"}, {"still", "ADV"},
      {"maybe", "ADV"}, {"perhaps", "ADV"}, {"not", "ADV"}, {"rather", "ADV"},
      {"pretty", "ADV"}, {"almost", "ADV"}, {"together", "ADV"},
      // adjectives
      {"good", "ADJ"}, {"bad", "ADJ"}, {"great", "ADJ"}, {"big", "ADJ"},
      {"small", "ADJ"}, {"new", "ADJ"}, {"old", "ADJ"}, {"high", "ADJ"},
      {"low", "ADJ"}, {"long", "ADJ"}, {"short", "ADJ"}, {"nice", "ADJ"},
      {"fine", "ADJ"}, {"wrong", "ADJ"}, {"happy", "ADJ"}, {"sad", "ADJ"},
      {"easy", "ADJ"}, {"hard", "ADJ"}, {"early", "ADJ"}, {"late", "ADJ"},
      {"young", "ADJ"}, {"important", "ADJ"}, {"different", "ADJ"},
      {"same", "ADJ"}, {"little", "ADJ"}, {"own", "ADJ"}, {"last", "ADJ"},
      {"next", "ADJ"}, {"first", "ADJ"}, {"second", "ADJ"}, {"best", "ADJ"},
      {"better", "ADJ"}, {"interesting", "ADJ"},
      // nouns
      {"time", "NOUN"}, {"people", "NOUN"}, {"person", "NOUN"},
      {"way", "NOUN"}, {"day", "NOUN"}, {"man", "NOUN"}, {"woman", "NOUN"},
      {"thing", "NOUN"}, {"child", "NOUN"}, {"children", "NOUN"},
      {"world", "NOUN"}, {"life", "NOUN"}, {"hand", "NOUN"}, {"part", "NOUN"},
      {"place", "NOUN"}, {"week", "NOUN"}, {"year", "NOUN"}, {"years", "NOUN"},
      {"home", "NOUN"}, {"number", "NOUN"}, {"group", "NOUN"},
      {"problem", "NOUN"}, {"fact", "NOUN"}, {"dog", "NOUN"}, {"dogs", "NOUN"},
      {"cat", "NOUN"}, {"cats", "NOUN"}, {"house", "NOUN"}, {"car", "NOUN"},
      {"money", "NOUN"}, {"water", "NOUN"}, {"family", "NOUN"},
      {"friend", "NOUN"}, {"school", "NOUN"}, {"state", "NOUN"},
      {"city", "NOUN"}, {"question", "NOUN"}, {"answer", "NOUN"},
      {"word", "NOUN"}, {"name", "NOUN"}, {"kid", "NOUN"}, {"kids", "NOUN"},
      {"breed", "NOUN"}, {"topic", "NOUN"}, {"idea", "NOUN"},
  };
  return lex;
}

bool ends_with(const std::string& s, const char* suffix) {
  const std::size_t m = std::char_traits<char>::length(suffix);
  return s.size() >= m && s.compare(s.size() - m, m, suffix) == 0;
}

std::string pos_of(const std::string& tok) {
  if (is_punct_token(tok)) return "PUNCT";
  bool all_digits = !tok.empty();
  for (unsigned char c : tok)
    if (!std::isdigit(c)) {
      all_digits = false;
      break;
    }
  if (all_digits) return "NUM";
  const auto& lex = pos_lexicon();
  if (auto it = lex.find(tok); it != lex.end()) return it->second;
  // suffix rules, most specific first
  const std::size_t n = tok.size();
  if (n > 4 && ends_with(tok, "ing")) return "VERB";
  if (n > 4 && (ends_with(tok, "tion") || ends_with(tok, "sion") ||
                ends_with(tok, "ness") || ends_with(tok, "ment") ||
                ends_with(tok, "ance") || ends_with(tok, "ence") ||
                ends_with(tok, "ship") || ends_with(tok, "ity")))
    return "NOUN";
  if (n > 4 && (ends_with(tok, "ous") || ends_with(tok, "ful") ||
                ends_with(tok, "ive") || ends_with(tok, "able") ||
                ends_with(tok, "ible")))
    return "ADJ";
  if (n > 3 && ends_with(tok, "ly")) return "ADV";
  if (n > 3 && ends_with(tok, "ed")) return "VERB";
  if (n > 4 && (ends_with(tok, "ize") || ends_with(tok, "ise") ||
                ends_with(tok, "ate")))
    return "VERB";
  if (n > 4 && (ends_with(tok, "er") || ends_with(tok, "or") ||
                ends_with(tok, "ist")))
    return "NOUN";
  if (n > 3 && ends_with(tok, "s")) return "NOUN";
  return "OTHER";
}

}  // namespace

std::vector<std::string> fallback_pos_tag(
    const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) out.push_back(pos_of(tok));
  return out;
}

// ---- conversation files -----------------------------------------------------

std::vector<Conversation> parse_conversations(std::istream& in,
                                              const TagSet& tagset,
                                              const std::string& source_name) {
  std::vector<Conversation> convs;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 5 && fields.size() != 6)
      fail(source_name, lineno,
           "expected 5 or 6 tab-separated fields, got " +
               std::to_string(fields.size()));
    const std::string& conv_id = fields[0];
    if (conv_id.empty()) fail(source_name, lineno, "empty conv_id");
    std::size_t utt_index = 0;
    try {
      std::size_t pos = 0;
      utt_index = std::stoul(fields[1], &pos);
      if (pos != fields[1].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      fail(source_name, lineno, "bad utt_index '" + fields[1] + "'");
    }
    const std::string& speaker = fields[2];
    if (speaker.empty()) fail(source_name, lineno, "empty speaker");
    const std::string& da_tag = fields[3];
    if (!da_tag.empty() && !tagset.contains(da_tag))
      fail(source_name, lineno, "unknown tag '" + da_tag + "'");

    Utterance utt;
    utt.speaker = speaker;
    utt.da_tag = da_tag;
    utt.tokens = tokenize(fields[4]);
    if (utt.tokens.empty())
      fail(source_name, lineno, "utterance has no tokens");
    if (fields.size() == 6) {
      utt.pos_tags = split_spaces(fields[5]);
      if (utt.pos_tags.size() != utt.tokens.size())
        fail(source_name, lineno,
             "pos field has " + std::to_string(utt.pos_tags.size()) +
                 " tags for " + std::to_string(utt.tokens.size()) + " tokens");
    }

    if (convs.empty() || convs.back().id != conv_id) {
      if (!seen_ids.insert(conv_id).second)
        fail(source_name, lineno,
             "conversation id '" + conv_id + "' appears in two blocks");
      convs.push_back(Conversation{conv_id, {}});
    }
    Conversation& conv = convs.back();
    if (utt_index != conv.utterances.size())
      fail(source_name, lineno,
           "utt_index " + std::to_string(utt_index) + " out of order, expected " +
               std::to_string(conv.utterances.size()));
    utt.index = utt_index;
    conv.utterances.push_back(std::move(utt));
  }
  return convs;
}

std::vector<Conversation> load_conversations(const std::string& path,
                                             const TagSet& tagset) {
  auto in = open_or_throw(path);
  return parse_conversations(in, tagset, path);
}

std::string serialize_conversations(const std::vector<Conversation>& convs) {
  std::string out;
  for (const auto& conv : convs) {
    for (const auto& utt : conv.utterances) {
      out += conv.id;
      out += '\t';
      out += std::to_string(utt.index);
      out += '\t';
      out += utt.speaker;
      out += '\t';
      out += utt.da_tag;
      out += '\t';
      out += join_tokens(utt.tokens);
      if (!utt.pos_tags.empty()) {
        out += '\t';
        out += join_tokens(utt.pos_tags);
      }
      out += '\n';
    }
  }
  return out;
}

void save_conversations(const std::vector<Conversation>& convs,
                        const std::string& path) {
  write_or_throw(path, serialize_conversations(convs));
}

// ---- tag set files ----------------------------------------------------------

TagSet parse_tagset(std::istream& in, const std::string& source_name) {
  std::vector<std::pair<std::string, Role>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2)
      fail(source_name, lineno, "expected 'tag<TAB>role'");
    if (fields[0].empty()) fail(source_name, lineno, "empty tag");
    Role role;
    try {
      role = role_from_string(fields[1]);
    } catch (const ParseError& e) {
      fail(source_name, lineno, e.what());
    }
    entries.emplace_back(fields[0], role);
  }
  try {
    return TagSet(std::move(entries));
  } catch (const ParseError& e) {
    throw ParseError(source_name + ": " + e.what());
  }
}

TagSet load_tagset(const std::string& path) {
  auto in = open_or_throw(path);
  return parse_tagset(in, path);
}

std::string serialize_tagset(const TagSet& tagset) {
  std::string out;
  for (std::size_t i = 0; i < tagset.size(); ++i) {
    out += tagset.tag(i);
    out += '\t';
    out += role_name(tagset.role_at(i));
    out += '\n';
  }
  return out;
}

// ---- summary example files --------------------------------------------------

namespace {

bool is_ref_header(const std::string& line, std::size_t* k) {
  if (line.size() < 6 || line.compare(0, 4, "ref-") != 0 || line.back() != ':')
    return false;
  const std::string num = line.substr(4, line.size() - 5);
  if (num.empty()) return false;
  for (unsigned char c : num)
    if (!std::isdigit(c)) return false;
  *k = std::stoul(num);
  return true;
}

}  // namespace

std::vector<SummaryExample> parse_summary_examples(
    std::istream& in, const std::string& source_name) {
  std::vector<SummaryExample> out;
  SummaryExample cur;
  bool in_record = false;
  bool have_source = false;
  // -1 none, 0 source, >=1 ref-k
  long block = -1;
  std::string line;
  std::size_t lineno = 0;

  auto finish = [&] {
    if (!in_record) return;
    if (!have_source) fail(source_name, lineno, "record has no source block");
    if (cur.references.empty())
      fail(source_name, lineno, "record has no ref-k blocks");
    out.push_back(std::move(cur));
    cur = SummaryExample{};
    in_record = false;
    have_source = false;
    block = -1;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "===") {
      finish();
      continue;
    }
    std::size_t k = 0;
    if (line == "source:") {
      if (have_source) fail(source_name, lineno, "duplicate source block");
      in_record = true;
      have_source = true;
      block = 0;
      continue;
    }
    if (is_ref_header(line, &k)) {
      if (!in_record) fail(source_name, lineno, "ref block before source");
      if (k != cur.references.size() + 1)
        fail(source_name, lineno,
             "expected ref-" + std::to_string(cur.references.size() + 1) +
                 ", got ref-" + std::to_string(k));
      cur.references.emplace_back();
      block = static_cast<long>(k);
      continue;
    }
    if (block < 0) fail(source_name, lineno, "text outside of any block");
    auto toks = tokenize(line);
    auto& dst = block == 0 ? cur.source_text
                           : cur.references[static_cast<std::size_t>(block) - 1];
    dst.insert(dst.end(), toks.begin(), toks.end());
  }
  finish();
  return out;
}

std::vector<SummaryExample> load_summary_examples(const std::string& path) {
  auto in = open_or_throw(path);
  return parse_summary_examples(in, path);
}

}  // namespace dsum
