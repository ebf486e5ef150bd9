// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: CRF tagging, discourse rewriting, pointer-generator
// training and decoding, ROUGE scoring, and the full experiment pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dsum/corpus.hpp"
#include "dsum/crf.hpp"
#include "dsum/kernels.hpp"
#include "dsum/pipeline.hpp"
#include "dsum/pointer_gen.hpp"
#include "dsum/rewriter.hpp"
#include "dsum/rouge.hpp"

namespace {

using namespace dsum;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  return in;
}

// `id<TAB>text` per line; a line without a tab gets its line number as id.
std::vector<std::pair<std::string, std::string>> read_id_text(
    const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      out.emplace_back(std::to_string(lineno), line);
    else
      out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

// ---- tag-train ------------------------------------------------------------

struct TagTrainArgs {
  std::string train, dev, tagset, out;
  crf::TrainConfig cfg;
};

void run_tag_train(const TagTrainArgs& a) {
  const TagSet tagset = load_tagset(a.tagset);
  const std::vector<Conversation> train = load_conversations(a.train, tagset);
  const std::vector<Conversation> dev =
      a.dev.empty() ? train : load_conversations(a.dev, tagset);
  const crf::CrfModel model = crf::train(train, dev, tagset, a.cfg);
  crf::save_model(model, a.out);
  std::printf("trained on %zu conversations (%zu features)\n", train.size(),
              model.features.size());
  std::printf("dev accuracy: %.4f\n", crf::evaluate_accuracy(model, dev));
  std::printf("wrote %s\n", a.out.c_str());
}

// ---- tag ------------------------------------------------------------------

struct TagArgs {
  std::string model, input, out;
};

void run_tag(const TagArgs& a) {
  const crf::CrfModel model = crf::load_model(a.model);
  const std::vector<Conversation> convs =
      load_conversations(a.input, model.tagset);
  const std::vector<Conversation> tagged = crf::tag_conversations(model, convs);
  save_conversations(tagged, a.out);
  std::printf("tagged %zu conversations -> %s\n", tagged.size(), a.out.c_str());
}

// ---- rewrite ----------------------------------------------------------------

struct RewriteArgs {
  std::string input, tagset, config, out;
  bool no_remove = false, no_realize = false, no_join_qa = false;
  bool join_wh = false;
};

void run_rewrite(const RewriteArgs& a) {
  const TagSet tagset = load_tagset(a.tagset);
  const std::vector<Conversation> convs = load_conversations(a.input, tagset);
  const rewriter::RewriteConfig cfg = a.config.empty()
                                          ? rewriter::default_config()
                                          : rewriter::load_config(a.config);
  rewriter::RuleGates gates;
  gates.remove_redundant = !a.no_remove;
  gates.realize_actions = !a.no_realize;
  gates.join_qa = !a.no_join_qa;
  gates.join_wh = a.join_wh;

  std::ofstream out = open_out(a.out);
  for (const Conversation& conv : convs) {
    const rewriter::Document doc =
        rewriter::render_document(conv, tagset, cfg, gates);
    if (doc.warning)
      std::fprintf(stderr, "%s: nothing survived removal\n", conv.id.c_str());
    out << conv.id << "\t" << rewriter::to_paragraph(doc) << "\n";
  }
  std::printf("rewrote %zu conversations -> %s\n", convs.size(), a.out.c_str());
}

// ---- summ-train -----------------------------------------------------------------

struct SummTrainArgs {
  std::string data, out;
  std::size_t d_e = 64, d_h = 128, vocab = 10000;
  double cov_weight = 1.0;
  pgen::TrainConfig cfg;
};

void run_summ_train(const SummTrainArgs& a) {
  const std::vector<SummaryExample> examples = load_summary_examples(a.data);
  std::vector<pgen::TrainPair> pairs;
  std::vector<std::vector<std::string>> texts;
  for (const SummaryExample& ex : examples) {
    texts.push_back(ex.source_text);
    for (const auto& ref : ex.references) {
      texts.push_back(ref);
      pairs.push_back({ex.source_text, ref});
    }
  }
  const pgen::Vocab vocab = pgen::build_vocab(texts, a.vocab);
  pgen::Seq2SeqModel model =
      pgen::make_model(vocab, a.d_e, a.d_h, a.cov_weight, a.cfg.seed);
  pgen::TrainTrace trace;
  pgen::train(model, pairs, a.cfg, &trace);
  pgen::save_model(model, a.out);
  std::printf("trained on %zu pairs, vocab %zu, %zu params\n", pairs.size(),
              vocab.size(), model.params.size());
  if (!trace.step_loss.empty())
    std::printf("loss: %.4f -> %.4f\n", trace.step_loss.front(),
                trace.step_loss.back());
  std::printf("wrote %s\n", a.out.c_str());
}

// ---- summarize ------------------------------------------------------------------

struct SummarizeArgs {
  std::string model, input, out;
  pgen::BeamConfig beam{4, 100, 10};
};

void run_summarize(const SummarizeArgs& a) {
  const pgen::Seq2SeqModel model = pgen::load_model(a.model);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!a.out.empty()) {
    file = open_out(a.out);
    out = &file;
  }
  for (const auto& [id, text] : read_id_text(a.input)) {
    const std::vector<std::string> source = tokenize(text);
    if (source.empty()) {
      std::fprintf(stderr, "%s: empty source; skipped\n", id.c_str());
      continue;
    }
    const std::vector<std::string> summary =
        pgen::beam_search_decode(model, source, a.beam);
    *out << id << "\t" << join_tokens(summary) << "\n";
  }
}

// ---- evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  std::string candidates, references;
  std::string mode = "best";
  std::string orders = "1,2";
};

void run_evaluate(const EvaluateArgs& a) {
  const MultiRefMode mode =
      a.mode == "best" ? MultiRefMode::Best : MultiRefMode::Average;
  std::vector<int> orders;
  if (a.orders.find('1') != std::string::npos) orders.push_back(1);
  if (a.orders.find('2') != std::string::npos) orders.push_back(2);
  const pipeline::ReferenceSet refs = pipeline::load_references(a.references);
  std::vector<double> sums(orders.size(), 0.0);
  std::size_t scored = 0;
  std::printf("%-20s", "conversation");
  for (int n : orders) std::printf("  rouge-%d f1", n);
  std::printf("\n");
  for (const auto& [id, text] : read_id_text(a.candidates)) {
    const auto it = refs.by_conv.find(id);
    if (it == refs.by_conv.end()) {
      std::fprintf(stderr, "%s: no references; skipped\n", id.c_str());
      continue;
    }
    const std::vector<std::string> cand = tokenize(text);
    std::printf("%-20s", id.c_str());
    for (std::size_t k = 0; k < orders.size(); ++k) {
      const double f1 = rouge_multi(cand, it->second, orders[k], mode).f1;
      std::printf("  %10.5f", f1);
      sums[k] += f1;
    }
    std::printf("\n");
    ++scored;
  }
  if (scored == 0) throw std::runtime_error("no candidate could be scored");
  std::printf("%-20s", "mean");
  for (double s : sums) std::printf("  %10.5f", s / static_cast<double>(scored));
  std::printf("\n");
}

// ---- pipeline -------------------------------------------------------------------

void run_pipeline(const std::string& config_path) {
  const pipeline::PipelineConfig cfg = pipeline::load_config(config_path);
  const pipeline::ExperimentReport report = pipeline::run_all(cfg);
  pipeline::write_outputs(report, cfg);
  std::cout << pipeline::format_report(report);
}

void apply_kernels(const std::string& name) {
  if (name == "auto")
    kernels::select_auto();
  else if (name == "scalar")
    kernels::select(kernels::Backend::Scalar);
  else if (name == "avx2")
    kernels::select(kernels::Backend::Avx2);
  else
    kernels::select(kernels::Backend::Neon);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dsum: dialogue summarization toolkit"};
  app.require_subcommand(1);
  std::string kernels_name = "auto";
  app.add_option("--kernels", kernels_name, "kernel backend")
      ->check(CLI::IsMember({"auto", "scalar", "avx2", "neon"}))
      ->capture_default_str();

  TagTrainArgs tt;
  CLI::App* tag_train =
      app.add_subcommand("tag-train", "train the dialogue-act CRF");
  tag_train->add_option("--train", tt.train, "tagged conversations")->required();
  tag_train->add_option("--dev", tt.dev, "held-out conversations for early stopping");
  tag_train->add_option("--tagset", tt.tagset, "tag inventory file")->required();
  tag_train->add_option("--out", tt.out, "model output path")->required();
  tag_train->add_option("--epochs", tt.cfg.epochs, "training epochs");
  tag_train->add_option("--lr", tt.cfg.learning_rate, "Adam learning rate");
  tag_train->add_option("--l2", tt.cfg.l2_lambda, "L2 strength");
  tag_train->add_option("--batch", tt.cfg.batch_size, "mini-batch size");
  tag_train->add_option("--patience", tt.cfg.early_stop_patience,
                        "early stopping patience, in epochs");
  tag_train->add_option("--seed", tt.cfg.seed, "rng seed");

  TagArgs tg;
  CLI::App* tag = app.add_subcommand("tag", "tag conversations with a CRF model");
  tag->add_option("--model", tg.model, "CRF model file")->required();
  tag->add_option("--input,--in", tg.input, "conversations to tag")->required();
  tag->add_option("--out", tg.out, "tagged output path")->required();

  RewriteArgs rw;
  CLI::App* rewrite =
      app.add_subcommand("rewrite", "rewrite conversations into paragraphs");
  rewrite->add_option("--input", rw.input, "tagged conversations")->required();
  rewrite->add_option("--tagset", rw.tagset, "tag inventory file")->required();
  rewrite->add_option("--config", rw.config, "rewrite rule configuration");
  rewrite->add_option("--out", rw.out, "paragraph output path")->required();
  rewrite->add_flag("--no-remove", rw.no_remove, "keep redundant utterances");
  rewrite->add_flag("--no-realize", rw.no_realize, "skip action realization");
  rewrite->add_flag("--no-join-qa", rw.no_join_qa, "skip yes/no QA joining");
  rewrite->add_flag("--join-wh", rw.join_wh, "also join wh-questions");

  SummTrainArgs st;
  CLI::App* summ_train =
      app.add_subcommand("summ-train", "train the pointer-generator");
  summ_train->add_option("--data", st.data, "summary examples file")->required();
  summ_train->add_option("--out", st.out, "model output path")->required();
  summ_train->add_option("--d-e", st.d_e, "embedding size");
  summ_train->add_option("--d-h", st.d_h, "hidden size per direction");
  summ_train->add_option("--vocab", st.vocab, "max vocabulary size");
  summ_train->add_option("--cov-weight", st.cov_weight, "coverage loss weight");
  summ_train->add_option("--steps", st.cfg.steps, "training steps");
  summ_train->add_option("--batch", st.cfg.batch_size, "mini-batch size");
  summ_train->add_option("--lr", st.cfg.learning_rate, "Adam learning rate");
  summ_train->add_option("--clip", st.cfg.clip_norm, "global gradient norm clip");
  summ_train->add_option("--phase-in", st.cfg.coverage_phase_in,
                         "fraction of steps before coverage loss turns on");
  summ_train->add_option("--seed", st.cfg.seed, "rng seed");

  SummarizeArgs sm;
  CLI::App* summarize =
      app.add_subcommand("summarize", "beam-search decode summaries");
  summarize->add_option("--model", sm.model, "pointer-generator model")->required();
  summarize->add_option("--input", sm.input, "id<TAB>text lines")->required();
  summarize->add_option("--out", sm.out, "output path (default stdout)");
  summarize->add_option("--beam", sm.beam.beam_width, "beam width");
  summarize->add_option("--max-len", sm.beam.max_len, "max summary length");
  summarize->add_option("--min-len", sm.beam.min_len, "min summary length");

  EvaluateArgs ev;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "score candidate summaries with ROUGE");
  evaluate->add_option("--candidates,--cand", ev.candidates, "id<TAB>text lines")
      ->required();
  evaluate->add_option("--references,--refs", ev.references, "reference file")
      ->required();
  evaluate->add_option("--mode", ev.mode, "multi-reference mode")
      ->check(CLI::IsMember({"best", "average"}))
      ->capture_default_str();
  evaluate->add_option("--n", ev.orders, "ROUGE orders to report")
      ->check(CLI::IsMember({"1", "2", "1,2"}))
      ->capture_default_str();

  std::string pipeline_config;
  CLI::App* pipeline_cmd =
      app.add_subcommand("pipeline", "run the full experiment pipeline");
  pipeline_cmd->add_option("--config", pipeline_config, "pipeline config file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    apply_kernels(kernels_name);
    if (tag_train->parsed()) run_tag_train(tt);
    if (tag->parsed()) run_tag(tg);
    if (rewrite->parsed()) run_rewrite(rw);
    if (summ_train->parsed()) run_summ_train(st);
    if (summarize->parsed()) run_summarize(sm);
    if (evaluate->parsed()) run_evaluate(ev);
    if (pipeline_cmd->parsed()) run_pipeline(pipeline_config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
