// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0

#include "dsum/rewriter.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace dsum::rewriter {

namespace {

const std::map<std::string, std::vector<std::string>>& required_placeholders() {
  static const std::map<std::string, std::vector<std::string>> req = {
      {"attribution", {"{speaker}", "{text}"}},
      {"question-answer", {"{qspeaker}", "{qtext}", "{speaker}", "{text}"}},
      {"yes-no-agree", {"{qspeaker}", "{qtext}", "{speaker}"}},
      {"yes-no-disagree", {"{qspeaker}", "{qtext}", "{speaker}"}},
      {"agreement", {"{speaker}"}},
      {"disagreement", {"{speaker}"}},
      {"appreciation", {"{speaker}"}},
  };
  return req;
}

Role role_of(const TagSet& tagset, const Utterance& utt) {
  if (utt.da_tag.empty())
    throw std::invalid_argument("utterance " + std::to_string(utt.index) +
                                " has no dialogue-act tag");
  return tagset.role(utt.da_tag);
}

std::string replace_all(std::string s, const std::string& from,
                        const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// substitution can leave doubled spaces or a space before punctuation when a
// text slot came up empty; normalize those away
std::string tidy(std::string s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' && !out.empty() && out.back() == ' ') continue;
    if ((c == '.' || c == ',') && !out.empty() && out.back() == ' ')
      out.pop_back();
    out += c;
  }
  while (!out.empty() && out.front() == ' ') out.erase(out.begin());
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string apply_template(
    const RewriteConfig& cfg, const std::string& key,
    const std::vector<std::pair<std::string, std::string>>& subs) {
  const auto it = cfg.templates.find(key);
  if (it == cfg.templates.end())
    throw std::invalid_argument("missing template '" + key + "'");
  std::string s = it->second;
  for (const auto& [placeholder, value] : subs)
    s = replace_all(s, placeholder, value);
  return tidy(s);
}

// utterance text for a template slot: trailing punctuation dropped
std::string slot_text(const std::vector<std::string>& tokens) {
  std::size_t end = tokens.size();
  while (end > 0 && is_punct_token(tokens[end - 1])) --end;
  return join_tokens({tokens.begin(), tokens.begin() + end});
}

// count of distinct shared content words
std::size_t overlap_count(const std::set<std::string>& q,
                          const std::vector<std::string>& a_content) {
  std::set<std::string> seen;
  std::size_t n = 0;
  for (const auto& w : a_content)
    if (q.count(w) && seen.insert(w).second) ++n;
  return n;
}

std::vector<QaLink> link_over(const Conversation& conv, const TagSet& tagset,
                              const RewriteConfig& cfg,
                              const std::set<Role>& q_roles,
                              std::vector<bool>& consumed) {
  std::vector<QaLink> out;
  const std::size_t n = conv.utterances.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (consumed[i]) continue;
    if (!q_roles.count(role_of(tagset, conv.utterances[i]))) continue;
    const auto qc_vec = content_words(conv.utterances[i].tokens, cfg);
    const std::set<std::string> qc(qc_vec.begin(), qc_vec.end());
    for (std::size_t j = i + 1; j < n && j <= i + cfg.qa_window; ++j) {
      if (consumed[j]) continue;
      if (overlap_count(qc, content_words(conv.utterances[j].tokens, cfg)) >=
          cfg.qa_min_overlap) {
        out.push_back({i, j});
        consumed[i] = consumed[j] = true;
        break;
      }
    }
  }
  return out;
}

std::vector<YesNoLink> couple_over(const Conversation& conv,
                                   const TagSet& tagset,
                                   const RewriteConfig& cfg,
                                   std::vector<bool>& consumed) {
  std::vector<YesNoLink> out;
  const std::size_t n = conv.utterances.size();
  // Answer-first scan: each agreement/disagreement attaches to the nearest
  // preceding open yes/no question, so of two stacked questions the nearer
  // one wins.
  for (std::size_t a = 0; a < n; ++a) {
    if (consumed[a]) continue;
    const Role r = role_of(tagset, conv.utterances[a]);
    if (r != Role::Agreement && r != Role::Disagreement) continue;
    for (std::size_t d = 1; d <= cfg.qa_window && d <= a; ++d) {
      const std::size_t q = a - d;
      if (consumed[q]) continue;
      if (role_of(tagset, conv.utterances[q]) != Role::YesNoQuestion) continue;
      out.push_back({q, a,
                     r == Role::Agreement ? Polarity::Agree
                                          : Polarity::Disagree});
      consumed[q] = consumed[a] = true;
      break;
    }
  }
  std::sort(out.begin(), out.end(), [](const YesNoLink& x, const YesNoLink& y) {
    return x.q_index < y.q_index;
  });
  return out;
}

}  // namespace

RewriteConfig default_config() {
  RewriteConfig cfg;
  cfg.stopwords = {
      "a",    "an",   "the",  "and",  "or",    "but",   "if",    "then",
      "this", "that", "these", "those", "i",   "you",   "he",    "she",
      "it",   "we",   "they", "me",   "him",   "her",   "them",  "us",
      "my",   "your", "his",  "its",  "our",   "their", "am",    "is",
      "are",  "was",  "were", "be",   "been",  "being", "do",    "does",
      "did",  "have", "has",  "had",  "will",  "would", "can",   "could",
      "shall", "should", "may", "might", "must", "of",  "in",    "on",
      "at",   "by",   "for",  "with", "about", "to",    "from",  "as",
      "into", "not",  "no",   "yes",  "so",    "such",  "what",  "which",
      "who",  "whom", "whose", "when", "where", "why",  "how",   "there",
      "here", "very", "just", "too",  "also",  "well",  "oh",    "uh",
      "um",   "yeah", "okay", "ok",
  };
  cfg.templates = {
      {"attribution", "{speaker} said that {text}."},
      {"question-answer",
       "{qspeaker} asked whether {qtext}, and {speaker} said {text}."},
      {"yes-no-agree", "{qspeaker} asked whether {qtext}, and {speaker} agreed."},
      {"yes-no-disagree",
       "{qspeaker} asked whether {qtext}, and {speaker} disagreed."},
      {"agreement", "{speaker} agreed."},
      {"disagreement", "{speaker} disagreed."},
      {"appreciation", "{speaker} appreciated that."},
  };
  return cfg;
}

void validate_config(const RewriteConfig& cfg) {
  if (cfg.qa_window == 0) throw ParseError("qa_window must be positive");
  if (cfg.qa_min_overlap == 0)
    throw ParseError("qa_min_overlap must be positive");
  for (const auto& [key, tmpl] : cfg.templates)
    if (!required_placeholders().count(key))
      throw ParseError("unknown template '" + key + "'");
  for (const auto& [key, placeholders] : required_placeholders()) {
    const auto it = cfg.templates.find(key);
    if (it == cfg.templates.end())
      throw ParseError("missing template '" + key + "'");
    for (const auto& ph : placeholders)
      if (it->second.find(ph) == std::string::npos)
        throw ParseError("template '" + key + "' lacks placeholder " + ph);
  }
}

// ---- config files -----------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

RewriteConfig parse_config(std::istream& in, const std::string& source_name) {
  RewriteConfig cfg = default_config();
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw ParseError(source_name + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key == "qa_window" || key == "qa_min_overlap") {
      std::size_t parsed = 0, pos = 0;
      try {
        parsed = std::stoul(value, &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      if (pos != value.size()) fail("bad number '" + value + "'");
      (key == "qa_window" ? cfg.qa_window : cfg.qa_min_overlap) = parsed;
    } else if (key == "removable_roles") {
      cfg.removable_roles.clear();
      for (const auto& w : split_words(value)) {
        try {
          cfg.removable_roles.insert(role_from_string(w));
        } catch (const ParseError& e) {
          fail(e.what());
        }
      }
    } else if (key == "stopwords") {
      cfg.stopwords.clear();
      for (const auto& w : split_words(value)) cfg.stopwords.insert(w);
    } else if (key.rfind("template ", 0) == 0) {
      const std::string name = trim(key.substr(9));
      if (!required_placeholders().count(name))
        fail("unknown template '" + name + "'");
      cfg.templates[name] = value;
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  try {
    validate_config(cfg);
  } catch (const ParseError& e) {
    throw ParseError(source_name + ": " + e.what());
  }
  return cfg;
}

RewriteConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  return parse_config(in, path);
}

std::string serialize_config(const RewriteConfig& cfg) {
  std::string out;
  out += "qa_window = " + std::to_string(cfg.qa_window) + "\n";
  out += "qa_min_overlap = " + std::to_string(cfg.qa_min_overlap) + "\n";
  out += "removable_roles =";
  for (Role r : cfg.removable_roles) out += std::string(" ") + role_name(r);
  out += "\nstopwords =";
  for (const auto& w : cfg.stopwords) out += " " + w;
  out += "\n";
  for (const auto& [key, tmpl] : cfg.templates)
    out += "template " + key + " = " + tmpl + "\n";
  return out;
}

// ---- rewrite rules ----------------------------------------------------------

std::vector<std::string> content_words(const std::vector<std::string>& tokens,
                                       const RewriteConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& t : tokens)
    if (!is_punct_token(t) && !cfg.stopwords.count(t)) out.push_back(t);
  return out;
}

FilteredConversation remove_redundant(const Conversation& conv,
                                      const TagSet& tagset,
                                      const RewriteConfig& cfg) {
  FilteredConversation out;
  out.conv.id = conv.id;
  for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
    const Role r = role_of(tagset, conv.utterances[i]);
    if (cfg.removable_roles.count(r)) continue;
    Utterance utt = conv.utterances[i];
    utt.index = out.conv.utterances.size();
    out.conv.utterances.push_back(std::move(utt));
    out.original_index.push_back(i);
  }
  out.all_removed = out.conv.utterances.empty() && !conv.utterances.empty();
  return out;
}

std::vector<QaLink> link_questions_answers(const Conversation& conv,
                                           const TagSet& tagset,
                                           const RewriteConfig& cfg) {
  std::vector<bool> consumed(conv.utterances.size(), false);
  return link_over(conv, tagset, cfg, {Role::Question}, consumed);
}

std::vector<YesNoLink> couple_yes_no(const Conversation& conv,
                                     const TagSet& tagset,
                                     const RewriteConfig& cfg) {
  std::vector<bool> consumed(conv.utterances.size(), false);
  return couple_over(conv, tagset, cfg, consumed);
}

std::string realize_action(const Utterance& utt, const TagSet& tagset,
                           const RewriteConfig& cfg) {
  switch (role_of(tagset, utt)) {
    case Role::Agreement:
      return apply_template(cfg, "agreement", {{"{speaker}", utt.speaker}});
    case Role::Disagreement:
      return apply_template(cfg, "disagreement", {{"{speaker}", utt.speaker}});
    case Role::Appreciation:
      return apply_template(cfg, "appreciation", {{"{speaker}", utt.speaker}});
    default:
      throw std::invalid_argument("realize_action: utterance " +
                                  std::to_string(utt.index) +
                                  " is not an agreement, disagreement, or "
                                  "appreciation");
  }
}

std::string attribute_speech(const Utterance& utt, const RewriteConfig& cfg) {
  if (utt.tokens.empty())
    throw std::invalid_argument("attribute_speech: empty utterance");
  return apply_template(cfg, "attribution",
                        {{"{speaker}", utt.speaker},
                         {"{text}", slot_text(utt.tokens)}});
}

Document render_document(const Conversation& conv, const TagSet& tagset,
                         const RewriteConfig& cfg, const RuleGates& gates) {
  FilteredConversation f;
  if (gates.remove_redundant) {
    f = remove_redundant(conv, tagset, cfg);
  } else {
    f.conv = conv;
    for (std::size_t i = 0; i < f.conv.utterances.size(); ++i) {
      role_of(tagset, f.conv.utterances[i]);  // enforce the tags-present pre
      f.conv.utterances[i].index = i;
      f.original_index.push_back(i);
    }
  }

  Document doc;
  if (f.conv.utterances.empty()) {
    doc.warning = f.all_removed;
    return doc;
  }

  const std::size_t n = f.conv.utterances.size();
  std::vector<bool> consumed(n, false);

  std::vector<YesNoLink> couples;
  if (gates.join_qa) couples = couple_over(f.conv, tagset, cfg, consumed);
  std::set<Role> link_roles;
  if (gates.join_qa) link_roles.insert(Role::YesNoQuestion);
  if (gates.join_wh) link_roles.insert(Role::Question);
  std::vector<QaLink> links;
  if (!link_roles.empty())
    links = link_over(f.conv, tagset, cfg, link_roles, consumed);

  struct Plan {
    enum Kind { YesNo, Qa, Realize, Attribute } kind;
    std::size_t partner = 0;
    Polarity polarity = Polarity::Agree;
  };
  std::vector<std::optional<Plan>> plan(n);
  for (const auto& c : couples)
    plan[c.q_index] = Plan{Plan::YesNo, c.a_index, c.polarity};
  for (const auto& l : links) plan[l.q_index] = Plan{Plan::Qa, l.a_index, {}};
  for (std::size_t i = 0; i < n; ++i) {
    if (consumed[i]) continue;
    if (gates.realize_actions) {
      const Role r = role_of(tagset, f.conv.utterances[i]);
      if (r == Role::Agreement || r == Role::Disagreement ||
          r == Role::Appreciation) {
        plan[i] = Plan{Plan::Realize, 0, {}};
        continue;
      }
    }
    plan[i] = Plan{Plan::Attribute, 0, {}};
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!plan[i]) continue;  // a coupled answer renders with its question
    const Plan& p = *plan[i];
    const Utterance& utt = f.conv.utterances[i];
    Sentence sent;
    switch (p.kind) {
      case Plan::YesNo: {
        const Utterance& ans = f.conv.utterances[p.partner];
        sent.text = apply_template(
            cfg,
            p.polarity == Polarity::Agree ? "yes-no-agree" : "yes-no-disagree",
            {{"{qspeaker}", utt.speaker},
             {"{qtext}", slot_text(utt.tokens)},
             {"{speaker}", ans.speaker}});
        sent.sources = {f.original_index[i], f.original_index[p.partner]};
        break;
      }
      case Plan::Qa: {
        const Utterance& ans = f.conv.utterances[p.partner];
        sent.text = apply_template(cfg, "question-answer",
                                   {{"{qspeaker}", utt.speaker},
                                    {"{qtext}", slot_text(utt.tokens)},
                                    {"{speaker}", ans.speaker},
                                    {"{text}", slot_text(ans.tokens)}});
        sent.sources = {f.original_index[i], f.original_index[p.partner]};
        break;
      }
      case Plan::Realize:
        sent.text = realize_action(utt, tagset, cfg);
        sent.sources = {f.original_index[i]};
        break;
      case Plan::Attribute:
        sent.text = attribute_speech(utt, cfg);
        sent.sources = {f.original_index[i]};
        break;
    }
    doc.sentences.push_back(std::move(sent));
  }
  return doc;
}

std::string to_paragraph(const Document& doc) {
  std::string out;
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    if (i) out += ' ';
    out += doc.sentences[i].text;
  }
  return out;
}

}  // namespace dsum::rewriter
