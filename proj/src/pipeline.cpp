// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0

#include "dsum/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace dsum::pipeline {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void fail_at(const std::string& source, std::size_t lineno,
                          const std::string& msg) {
  throw ParseError(source + ":" + std::to_string(lineno) + ": " + msg);
}

std::uint64_t parse_number(const std::string& source, std::size_t lineno,
                           const std::string& value) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    // stoull wraps negatives silently, so reject them up front
    if (value.find('-') != std::string::npos) throw std::invalid_argument("");
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    fail_at(source, lineno, "bad number '" + value + "'");
  }
  if (used != value.size()) fail_at(source, lineno, "bad number '" + value + "'");
  return v;
}

std::string fixed5(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5f", v);
  return buf;
}

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* mode_name(MultiRefMode mode) {
  return mode == MultiRefMode::Best ? "best" : "average";
}

}  // namespace

// ---- variants -----------------------------------------------------------------

void validate_variant(const Variant& v) {
  if (v.name.empty())
    throw std::invalid_argument("variant name must not be empty");
  if ((v.join_qa || v.join_wh) && !v.use_crf_tags)
    throw std::invalid_argument("variant '" + v.name +
                                "': join_qa/join_wh require use_crf_tags");
}

// ---- references -----------------------------------------------------------------

ReferenceSet parse_references(std::istream& in, const std::string& source) {
  ReferenceSet refs;
  std::string line, current;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::size_t sp = text.find_first_of(" \t");
    const std::string kind = text.substr(0, sp);
    const std::string rest =
        sp == std::string::npos ? "" : trim(text.substr(sp + 1));
    if (kind == "conv") {
      if (rest.empty()) fail_at(source, lineno, "conv line without an id");
      if (refs.by_conv.count(rest))
        fail_at(source, lineno, "duplicate conversation '" + rest + "'");
      refs.by_conv[rest];
      current = rest;
    } else if (kind == "ref") {
      if (current.empty())
        fail_at(source, lineno, "ref line before any conv line");
      const std::vector<std::string> tokens = tokenize(rest);
      if (tokens.empty()) fail_at(source, lineno, "empty reference");
      refs.by_conv[current].push_back(tokens);
    } else {
      fail_at(source, lineno, "expected 'conv <id>' or 'ref <text>'");
    }
  }
  for (const auto& [id, rs] : refs.by_conv)
    if (rs.empty())
      throw ParseError(source + ": conversation '" + id +
                       "' has no references");
  return refs;
}

ReferenceSet load_references(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  return parse_references(in, path);
}

// ---- one variant ------------------------------------------------------------------

VariantResult run_variant(const Variant& variant,
                          const std::vector<Conversation>& conversations,
                          const TagSet& tagset, const crf::CrfModel* crf_model,
                          const pgen::Seq2SeqModel& summarizer,
                          const rewriter::RewriteConfig& rewrite_cfg,
                          const ReferenceSet* refs, MultiRefMode rouge_mode,
                          const pgen::BeamConfig& beam) {
  validate_variant(variant);
  if (conversations.empty())
    throw std::invalid_argument("run_variant: empty corpus");
  if (variant.use_crf_tags && crf_model == nullptr)
    throw std::invalid_argument("run_variant: variant '" + variant.name +
                                "' needs a CRF model");

  VariantResult out;
  out.variant_name = variant.name;
  const std::vector<Conversation> work =
      variant.use_crf_tags ? crf::tag_conversations(*crf_model, conversations)
                           : conversations;
  rewriter::RuleGates gates;
  gates.remove_redundant = variant.remove_redundant;
  gates.realize_actions = variant.realize_actions;
  gates.join_qa = variant.join_qa;
  gates.join_wh = variant.join_wh;

  if (refs == nullptr)
    out.warnings.push_back("references missing; scoring skipped");

  double sum1 = 0.0, sum2 = 0.0;
  std::size_t scored = 0;
  for (const auto& conv : work) {
    const rewriter::Document doc =
        rewriter::render_document(conv, tagset, rewrite_cfg, gates);
    const std::vector<std::string> source =
        tokenize(rewriter::to_paragraph(doc));
    std::vector<std::string> summary;
    if (source.empty())
      out.warnings.push_back("conversation '" + conv.id +
                             "': empty document after rewriting");
    else
      summary = pgen::beam_search_decode(summarizer, source, beam);
    out.summaries.emplace_back(conv.id, summary);

    ConversationScore cs;
    cs.conv_id = conv.id;
    if (refs != nullptr) {
      const auto it = refs->by_conv.find(conv.id);
      if (it == refs->by_conv.end()) {
        out.warnings.push_back("conversation '" + conv.id +
                               "': no references; scoring skipped");
      } else {
        cs.scored = true;
        cs.r1_f1 = rouge_multi(summary, it->second, 1, rouge_mode).f1;
        cs.r2_f1 = rouge_multi(summary, it->second, 2, rouge_mode).f1;
        sum1 += cs.r1_f1;
        sum2 += cs.r2_f1;
        ++scored;
      }
    }
    out.scores.push_back(cs);
  }
  if (scored > 0) {
    out.scored = true;
    out.r1_f1 = sum1 / static_cast<double>(scored);
    out.r2_f1 = sum2 / static_cast<double>(scored);
  }
  return out;
}

// ---- config ----------------------------------------------------------------------

namespace {

Variant parse_variant_line(const std::string& source, std::size_t lineno,
                           const std::string& value) {
  const std::vector<std::string> toks = split_ws(value);
  if (toks.empty()) fail_at(source, lineno, "variant line without a name");
  Variant v;
  v.name = toks[0];
  for (std::size_t i = 1; i < toks.size(); ++i) {
    const std::string& f = toks[i];
    if (f == "crf")
      v.use_crf_tags = true;
    else if (f == "remove")
      v.remove_redundant = true;
    else if (f == "realize")
      v.realize_actions = true;
    else if (f == "join_qa")
      v.join_qa = true;
    else if (f == "join_wh")
      v.join_wh = true;
    else
      fail_at(source, lineno, "unknown variant flag '" + f + "'");
  }
  return v;
}

}  // namespace

PipelineConfig parse_config(std::istream& in, const std::string& source) {
  PipelineConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      fail_at(source, lineno, "expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key == "conversations")
      cfg.conversations = value;
    else if (key == "tagset")
      cfg.tagset = value;
    else if (key == "pgen_model")
      cfg.pgen_model = value;
    else if (key == "crf_model")
      cfg.crf_model = value;
    else if (key == "references")
      cfg.references = value;
    else if (key == "rewrite_config")
      cfg.rewrite_config = value;
    else if (key == "report")
      cfg.report = value;
    else if (key == "sidecar")
      cfg.sidecar = value;
    else if (key == "summaries_prefix")
      cfg.summaries_prefix = value;
    else if (key == "seed")
      cfg.seed = parse_number(source, lineno, value);
    else if (key == "beam_width")
      cfg.beam.beam_width = parse_number(source, lineno, value);
    else if (key == "max_len")
      cfg.beam.max_len = parse_number(source, lineno, value);
    else if (key == "min_len")
      cfg.beam.min_len = parse_number(source, lineno, value);
    else if (key == "rouge_mode") {
      if (value == "best")
        cfg.rouge_mode = MultiRefMode::Best;
      else if (value == "average")
        cfg.rouge_mode = MultiRefMode::Average;
      else
        fail_at(source, lineno, "unknown rouge mode '" + value + "'");
    } else if (key == "variant") {
      cfg.variants.push_back(parse_variant_line(source, lineno, value));
    } else {
      fail_at(source, lineno, "unknown key '" + key + "'");
    }
  }
  try {
    validate_config(cfg);
  } catch (const std::invalid_argument& e) {
    throw ParseError(source + ": " + e.what());
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  return parse_config(in, path);
}

void validate_config(const PipelineConfig& cfg) {
  if (cfg.conversations.empty())
    throw std::invalid_argument("missing key 'conversations'");
  if (cfg.tagset.empty()) throw std::invalid_argument("missing key 'tagset'");
  if (cfg.pgen_model.empty())
    throw std::invalid_argument("missing key 'pgen_model'");
  if (cfg.variants.empty())
    throw std::invalid_argument("config names no variants");
  if (cfg.beam.beam_width < 1 || cfg.beam.min_len < 1 ||
      cfg.beam.max_len < cfg.beam.min_len)
    throw std::invalid_argument("bad beam limits");
  for (std::size_t i = 0; i < cfg.variants.size(); ++i) {
    const Variant& v = cfg.variants[i];
    validate_variant(v);
    if (v.use_crf_tags && cfg.crf_model.empty())
      throw std::invalid_argument("variant '" + v.name +
                                  "' uses crf tags but no crf_model is "
                                  "configured");
    for (std::size_t j = 0; j < i; ++j)
      if (cfg.variants[j].name == v.name)
        throw std::invalid_argument("duplicate variant name '" + v.name + "'");
  }
}

std::string serialize_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "conversations = " << cfg.conversations << "\n";
  out << "tagset = " << cfg.tagset << "\n";
  out << "pgen_model = " << cfg.pgen_model << "\n";
  out << "crf_model = " << cfg.crf_model << "\n";
  out << "references = " << cfg.references << "\n";
  out << "rewrite_config = " << cfg.rewrite_config << "\n";
  out << "rouge_mode = " << mode_name(cfg.rouge_mode) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "beam_width = " << cfg.beam.beam_width << "\n";
  out << "max_len = " << cfg.beam.max_len << "\n";
  out << "min_len = " << cfg.beam.min_len << "\n";
  for (const Variant& v : cfg.variants) {
    out << "variant = " << v.name;
    if (v.use_crf_tags) out << " crf";
    if (v.remove_redundant) out << " remove";
    if (v.realize_actions) out << " realize";
    if (v.join_qa) out << " join_qa";
    if (v.join_wh) out << " join_wh";
    out << "\n";
  }
  return out.str();
}

std::string config_digest(const PipelineConfig& cfg) {
  const std::string text = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// ---- full run ----------------------------------------------------------------------

ExperimentReport run_all(const PipelineConfig& cfg) {
  validate_config(cfg);
  const TagSet tagset = load_tagset(cfg.tagset);
  const std::vector<Conversation> convs =
      load_conversations(cfg.conversations, tagset);
  if (convs.empty())
    throw std::invalid_argument("pipeline: empty corpus in '" +
                                cfg.conversations + "'");
  const pgen::Seq2SeqModel summarizer = pgen::load_model(cfg.pgen_model);
  std::optional<crf::CrfModel> crf_model;
  if (!cfg.crf_model.empty()) crf_model = crf::load_model(cfg.crf_model);
  std::optional<ReferenceSet> refs;
  if (!cfg.references.empty()) refs = load_references(cfg.references);
  const rewriter::RewriteConfig rewrite_cfg =
      cfg.rewrite_config.empty() ? rewriter::default_config()
                                 : rewriter::load_config(cfg.rewrite_config);

  ExperimentReport report;
  report.seed = cfg.seed;
  report.rouge_mode = cfg.rouge_mode;
  report.config_digest = config_digest(cfg);
  for (const Variant& v : cfg.variants) {
    VariantResult res =
        run_variant(v, convs, tagset, crf_model ? &*crf_model : nullptr,
                    summarizer, rewrite_cfg, refs ? &*refs : nullptr,
                    cfg.rouge_mode, cfg.beam);
    report.rows.push_back({v.name, res.scored, res.r1_f1, res.r2_f1});
    for (const std::string& w : res.warnings)
      report.warnings.push_back(v.name + ": " + w);
    report.results.push_back(std::move(res));
  }
  return report;
}

// ---- output formats ------------------------------------------------------------------

std::string format_report(const ExperimentReport& report) {
  std::size_t name_w = 7;  // "variant"
  for (const ReportRow& r : report.rows)
    name_w = std::max(name_w, r.name.size());

  std::ostringstream out;
  out << "summarization experiment report\n";
  out << "seed:       " << report.seed << "\n";
  out << "config:     " << report.config_digest << "\n";
  out << "rouge mode: " << mode_name(report.rouge_mode)
      << " (aggregate: unweighted mean F1 over conversations)\n\n";

  out << "variant" << std::string(name_w - 7, ' ')
      << "  rouge-1 f1  rouge-2 f1\n";
  out << std::string(name_w, '-') << "  ----------  ----------\n";
  for (const ReportRow& r : report.rows) {
    out << r.name << std::string(name_w - r.name.size(), ' ');
    if (r.scored)
      out << "  " << std::string(10 - 7, ' ') << fixed5(r.r1_f1) << "  "
          << std::string(10 - 7, ' ') << fixed5(r.r2_f1) << "\n";
    else
      out << "         n/a         n/a\n";
  }
  if (!report.warnings.empty()) {
    out << "\nwarnings:\n";
    for (const std::string& w : report.warnings) out << "  - " << w << "\n";
  }
  return out.str();
}

std::string format_sidecar(const ExperimentReport& report) {
  std::ostringstream out;
  out << "# dsum experiment sidecar\n";
  out << "# digest=" << report.config_digest << "\n";
  out << "# seed=" << report.seed << "\n";
  out << "# rouge_mode=" << mode_name(report.rouge_mode) << "\n";
  out << "variant\trouge1_f1\trouge2_f1\tscored\n";
  for (const ReportRow& r : report.rows)
    out << r.name << "\t" << full_precision(r.r1_f1) << "\t"
        << full_precision(r.r2_f1) << "\t" << (r.scored ? 1 : 0) << "\n";
  return out.str();
}

std::string format_summaries(const VariantResult& result) {
  std::ostringstream out;
  for (const auto& [conv_id, tokens] : result.summaries)
    out << conv_id << "\t" << join_tokens(tokens) << "\n";
  return out.str();
}

void write_outputs(const ExperimentReport& report, const PipelineConfig& cfg) {
  auto write_file = [](const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << text;
    if (!out) throw std::runtime_error(path + ": write failed");
  };
  if (!cfg.report.empty()) write_file(cfg.report, format_report(report));
  if (!cfg.sidecar.empty()) write_file(cfg.sidecar, format_sidecar(report));
  if (!cfg.summaries_prefix.empty())
    for (const VariantResult& res : report.results)
      write_file(cfg.summaries_prefix + res.variant_name + ".tsv",
                 format_summaries(res));
}

}  // namespace dsum::pipeline
