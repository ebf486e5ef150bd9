// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0

// Experiment pipeline: tag -> rewrite -> summarize -> evaluate over a corpus
// of conversations, one row per configured variant, emitting a structured
// text report plus a machine-readable sidecar.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dsum/corpus.hpp"
#include "dsum/crf.hpp"
#include "dsum/pointer_gen.hpp"
#include "dsum/rewriter.hpp"
#include "dsum/rouge.hpp"

namespace dsum::pipeline {

// One ablation row: which rewriter rules run and whose tags feed them.
struct Variant {
  std::string name;
  bool use_crf_tags = false;
  bool remove_redundant = false;
  bool realize_actions = false;
  bool join_qa = false;
  bool join_wh = false;
};

// join_qa and join_wh need predicted question roles, hence use_crf_tags.
// Throws std::invalid_argument on violations or an empty name.
void validate_variant(const Variant& v);

// References keyed by conversation id; each entry is one or more tokenized
// reference summaries.
struct ReferenceSet {
  std::map<std::string, std::vector<std::vector<std::string>>> by_conv;
};

// Line format: `conv <id>` opens a block, `ref <text...>` adds a tokenized
// reference to it. '#' comments and blank lines are ignored.
ReferenceSet parse_references(std::istream& in, const std::string& source);
ReferenceSet load_references(const std::string& path);

struct ConversationScore {
  std::string conv_id;
  bool scored = false;
  double r1_f1 = 0.0;
  double r2_f1 = 0.0;
};

struct VariantResult {
  std::string variant_name;
  // one summary per conversation, in corpus order
  std::vector<std::pair<std::string, std::vector<std::string>>> summaries;
  std::vector<ConversationScore> scores;
  bool scored = false;  // true iff at least one conversation was scored
  double r1_f1 = 0.0;   // unweighted mean over scored conversations
  double r2_f1 = 0.0;
  std::vector<std::string> warnings;
};

// Tags (optionally), rewrites, summarizes, and scores every conversation.
// crf_model may be null when the variant uses gold tags; refs may be null,
// in which case scoring is skipped with a warning but summaries are still
// produced. Throws std::invalid_argument on an empty corpus.
VariantResult run_variant(const Variant& variant,
                          const std::vector<Conversation>& conversations,
                          const TagSet& tagset, const crf::CrfModel* crf_model,
                          const pgen::Seq2SeqModel& summarizer,
                          const rewriter::RewriteConfig& rewrite_cfg,
                          const ReferenceSet* refs, MultiRefMode rouge_mode,
                          const pgen::BeamConfig& beam);

struct PipelineConfig {
  std::string conversations;  // tagged conversation corpus (required)
  std::string tagset;         // tag inventory (required)
  std::string pgen_model;     // summarizer model file (required)
  std::string crf_model;      // required iff some variant sets use_crf_tags
  std::string references;     // optional; scoring is skipped without it
  std::string rewrite_config; // optional; defaults otherwise
  MultiRefMode rouge_mode = MultiRefMode::Best;
  std::uint64_t seed = 1;
  pgen::BeamConfig beam{4, 30, 2};
  std::string report;            // output paths, all optional
  std::string sidecar;
  std::string summaries_prefix;  // per-variant TSVs <prefix><name>.tsv
  std::vector<Variant> variants;
};

// `key = value` lines plus one `variant = <name> [crf] [remove] [realize]
// [join_qa] [join_wh]` line per variant, '#' comments. Throws ParseError
// with <source>:<line> context; validation failures carry the source name.
PipelineConfig parse_config(std::istream& in, const std::string& source);
PipelineConfig load_config(const std::string& path);
void validate_config(const PipelineConfig& cfg);

// Canonical text form of the experiment-defining fields (output paths are
// excluded); comments and declaration order in the user's file do not affect
// it. The report digest is the FNV-1a 64-bit hash of this string.
std::string serialize_config(const PipelineConfig& cfg);
std::string config_digest(const PipelineConfig& cfg);

struct ReportRow {
  std::string name;
  bool scored = false;
  double r1_f1 = 0.0;
  double r2_f1 = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;  // declared variant order
  std::string config_digest;
  std::uint64_t seed = 1;
  MultiRefMode rouge_mode = MultiRefMode::Best;
  std::vector<std::string> warnings;
  std::vector<VariantResult> results;
};

// Loads everything the config names and executes the variants in declared
// order. Errors from loading and run_variant propagate.
ExperimentReport run_all(const PipelineConfig& cfg);

// Human-readable table (scores to five decimals) and one-record-per-row
// sidecar (tab-separated, full precision). Both byte-deterministic.
std::string format_report(const ExperimentReport& report);
std::string format_sidecar(const ExperimentReport& report);

// One `<conv_id>\t<summary text>` line per conversation.
std::string format_summaries(const VariantResult& result);

// Writes report/sidecar/summaries to the paths named in the config; paths
// left empty are skipped.
void write_outputs(const ExperimentReport& report, const PipelineConfig& cfg);

}  // namespace dsum::pipeline
