// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0
//
// Regenerates the committed golden fixtures: expected rewriter paragraphs,
// the tiny CRF and pointer-generator models for the golden mini-corpus, and
// the golden pipeline report. Deterministic, so a rerun reproduces the
// committed bytes. Run from the tests/ directory:
//
//   make_golden [golden_dir]     (default data/golden)

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsum/corpus.hpp"
#include "dsum/crf.hpp"
#include "dsum/pipeline.hpp"
#include "dsum/pointer_gen.hpp"
#include "dsum/rewriter.hpp"

using namespace dsum;

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << text;
  std::printf("wrote %s\n", path.c_str());
}

struct GateSet {
  const char* name;
  rewriter::RuleGates gates;
};

constexpr GateSet kGateSets[] = {
    {"baseline", {false, false, false, false}},
    {"remove", {true, false, false, false}},
    {"remove_realize", {true, true, false, false}},
    {"join_qa", {true, true, true, false}},
    {"all_rules", {true, true, true, true}},
};

std::string render_expected(const std::vector<Conversation>& convs,
                            const TagSet& tagset,
                            const rewriter::RewriteConfig& cfg) {
  std::string out;
  for (const GateSet& gs : kGateSets) {
    for (const Conversation& conv : convs) {
      const rewriter::Document doc =
          rewriter::render_document(conv, tagset, cfg, gs.gates);
      out += gs.name;
      out += '\t';
      out += conv.id;
      out += '\t';
      out += rewriter::to_paragraph(doc);
      out += '\n';
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "data/golden";
  try {
    const TagSet tagset = load_tagset(dir + "/tagset.tsv");
    const rewriter::RewriteConfig rw_cfg = rewriter::default_config();

    // expected paragraphs for the handcrafted rewriter suite
    const std::vector<Conversation> rw_convs =
        load_conversations(dir + "/rewriter_convs.tsv", tagset);
    write_file(dir + "/rewriter_expected.txt",
               render_expected(rw_convs, tagset, rw_cfg));

    // tiny CRF fitted to the mini-corpus tags
    const std::vector<Conversation> convs =
        load_conversations(dir + "/convs.tsv", tagset);
    crf::TrainConfig crf_cfg;
    const crf::CrfModel crf_model = crf::train(convs, convs, tagset, crf_cfg);
    crf::save_model(crf_model, dir + "/crf.bin");
    std::printf("wrote %s (train accuracy %.4f)\n", (dir + "/crf.bin").c_str(),
                crf::evaluate_accuracy(crf_model, convs));

    // tiny pointer-generator fitted to (baseline paragraph, reference) pairs
    const pipeline::ReferenceSet refs =
        pipeline::load_references(dir + "/refs.txt");
    std::vector<pgen::TrainPair> pairs;
    std::vector<std::vector<std::string>> texts;
    for (const Conversation& conv : convs) {
      const rewriter::Document doc = rewriter::render_document(
          conv, tagset, rw_cfg, rewriter::RuleGates{false, false, false, false});
      const std::vector<std::string> source =
          tokenize(rewriter::to_paragraph(doc));
      texts.push_back(source);
      for (const auto& ref : refs.by_conv.at(conv.id)) {
        texts.push_back(ref);
        pairs.push_back({source, ref});
      }
    }
    pgen::Seq2SeqModel pg = pgen::make_model(pgen::build_vocab(texts, 120),
                                             16, 24, 1.0, 1);
    pgen::TrainConfig pg_cfg;
    pg_cfg.steps = 300;
    pg_cfg.batch_size = 2;
    pg_cfg.learning_rate = 5e-3;
    pgen::TrainTrace trace;
    pgen::train(pg, pairs, pg_cfg, &trace);
    pgen::save_model(pg, dir + "/pgen.bin");
    std::printf("wrote %s (loss %.4f -> %.4f)\n", (dir + "/pgen.bin").c_str(),
                trace.step_loss.front(), trace.step_loss.back());

    // golden pipeline report from the committed config
    const pipeline::PipelineConfig cfg =
        pipeline::load_config(dir + "/pipeline.cfg");
    const pipeline::ExperimentReport report = pipeline::run_all(cfg);
    write_file(dir + "/report.txt", pipeline::format_report(report));
    write_file(dir + "/report.tsv", pipeline::format_sidecar(report));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
