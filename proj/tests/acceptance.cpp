// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: ten end-to-end criteria, one pass/fail line each.
// Exits nonzero if any criterion fails. Run from the tests/ directory so the
// committed golden fixtures under data/golden resolve.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dsum/corpus.hpp"
#include "dsum/crf.hpp"
#include "dsum/pipeline.hpp"
#include "dsum/pointer_gen.hpp"
#include "dsum/rewriter.hpp"
#include "dsum/rouge.hpp"
#include "testutil.hpp"

using namespace dsum;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome fail(std::string detail) { return {false, std::move(detail)}; }
Outcome pass(std::string detail) { return {true, std::move(detail)}; }

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing file: " + path + ">";
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---- CRF helpers ------------------------------------------------------------

TagSet crf_tags(std::size_t k) {
  std::vector<std::pair<std::string, Role>> entries;
  for (std::size_t i = 0; i < k; ++i)
    entries.emplace_back("t" + std::to_string(i), Role::Other);
  return TagSet(std::move(entries));
}

Conversation random_crf_conv(std::mt19937_64& rng, std::size_t n) {
  static const std::vector<std::string> words = {"a", "b", "c", "d", "yes", "no"};
  Conversation conv;
  conv.id = "r";
  for (std::size_t t = 0; t < n; ++t) {
    Utterance u;
    u.speaker = (rng() % 2) ? "s1" : "s2";
    const std::size_t len = 1 + rng() % 3;
    for (std::size_t j = 0; j < len; ++j)
      u.tokens.push_back(words[rng() % words.size()]);
    u.index = t;
    conv.utterances.push_back(std::move(u));
  }
  return conv;
}

crf::CrfModel random_crf_model(std::mt19937_64& rng, std::size_t T,
                               const std::vector<Conversation>& convs,
                               double lo, double hi) {
  crf::CrfModel model = crf::make_model(crf_tags(T));
  for (const auto& conv : convs)
    for (std::size_t i = 0; i < conv.utterances.size(); ++i)
      for (const auto& name :
           crf::feature_strings(conv, i, model.feature_config))
        model.features.add(name);
  model.emission = testutil::random_vec(rng, model.features.size() * T, lo, hi);
  model.transition = testutil::random_vec(rng, (T + 1) * T, lo, hi);
  return model;
}

// Independent total-score computation, no dynamic programming. Emissions
// accumulate per position before joining the total, the same order the
// library uses, so per-sequence scores agree bitwise and near-ties rank
// identically.
double oracle_seq_score(const crf::CrfModel& m, const Conversation& conv,
                        const std::vector<std::size_t>& seq) {
  const std::size_t T = m.num_tags();
  double s = 0.0;
  std::size_t prev = m.start_state();
  for (std::size_t t = 0; t < seq.size(); ++t) {
    s += m.trans_weight(prev, seq[t]);
    double emit = 0.0;
    for (std::size_t f : crf::extract_features(m, conv, t).active)
      emit += m.emission[f * T + seq[t]];
    s += emit;
    prev = seq[t];
  }
  return s;
}

// visits all |T|^n tag sequences in lexicographic order
template <class Fn>
void for_each_sequence(std::size_t n, std::size_t T, Fn&& fn) {
  std::vector<std::size_t> seq(n, 0);
  while (true) {
    fn(seq);
    std::size_t t = n;
    while (t > 0) {
      if (++seq[t - 1] < T) break;
      seq[t - 1] = 0;
      --t;
    }
    if (t == 0) return;
  }
}

// ---- Criterion 1: CRF inference vs brute force -----------------------------

Outcome crit_crf_inference() {
  std::mt19937_64 rng(101);
  double max_z_err = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t T = 1 + rng() % 4;
    const std::size_t n = 1 + rng() % 6;
    const Conversation conv = random_crf_conv(rng, n);
    const crf::CrfModel model = random_crf_model(rng, T, {conv}, -1.0, 1.0);

    // Exact ties are structural, not rounding: duplicated utterances make
    // distinct sequences sum the same multiset of weights. Backtracking with
    // lowest-index tie-breaks returns the optimum whose tags read smallest
    // from the last position backwards, so rank ties that way here.
    auto reverse_less = [](const std::vector<std::size_t>& a,
                           const std::vector<std::size_t>& b) {
      for (std::size_t k = a.size(); k-- > 0;)
        if (a[k] != b[k]) return a[k] < b[k];
      return false;
    };
    std::vector<std::size_t> best_seq;
    double best_score = -1e300;
    std::vector<double> scores;
    for_each_sequence(n, T, [&](const std::vector<std::size_t>& seq) {
      const double s = oracle_seq_score(model, conv, seq);
      scores.push_back(s);
      if (s > best_score ||
          (s == best_score && reverse_less(seq, best_seq))) {
        best_score = s;
        best_seq = seq;
      }
    });
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double acc = 0.0;
    for (double s : scores) acc += std::exp(s - mx);
    const double brute_z = mx + std::log(acc);

    const auto [vit_seq, vit_score] = crf::viterbi_decode(model, conv);
    if (vit_seq != best_seq)
      return fail(fmt("draw %d: viterbi argmax differs from brute force", draw));
    if (std::abs(vit_score - best_score) > 1e-9)
      return fail(fmt("draw %d: viterbi score off by %.3e", draw,
                      vit_score - best_score));
    const double z_err = std::abs(crf::log_partition(model, conv) - brute_z);
    max_z_err = std::max(max_z_err, z_err);
    if (z_err > 1e-9)
      return fail(fmt("draw %d: log partition off by %.3e", draw, z_err));
  }
  return pass(fmt("1000 draws, exact argmax, max |logZ err| %.1e", max_z_err));
}

// ---- Criterion 2: CRF gradient vs finite differences ------------------------

Outcome crit_crf_gradient() {
  std::mt19937_64 rng(202);
  std::size_t coords = 0;
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t T = 2 + rng() % 2;
    std::vector<Conversation> batch;
    const std::size_t batch_n = 1 + rng() % 2;
    for (std::size_t b = 0; b < batch_n; ++b)
      batch.push_back(random_crf_conv(rng, 1 + rng() % 3));
    crf::CrfModel m = random_crf_model(rng, T, batch, -0.5, 0.5);
    for (auto& conv : batch)
      for (auto& u : conv.utterances) u.da_tag = m.tagset.tag(rng() % T);
    const double lambda = (draw % 2 == 0) ? 0.0 : 0.1;

    const auto obj = crf::log_likelihood_and_gradient(m, batch, lambda);
    auto value = [&] {
      return crf::log_likelihood_and_gradient(m, batch, lambda).value;
    };
    for (std::size_t i = 0; i < m.emission.size(); ++i) {
      const double fd = testutil::central_diff(value, m.emission[i], 1e-5);
      worst = std::max(worst, testutil::rel_err(obj.emission_grad[i], fd));
      ++coords;
    }
    for (std::size_t i = 0; i < m.transition.size(); ++i) {
      const double fd = testutil::central_diff(value, m.transition[i], 1e-5);
      worst = std::max(worst, testutil::rel_err(obj.transition_grad[i], fd));
      ++coords;
    }
  }
  if (worst >= 1e-4)
    return fail(fmt("worst relative error %.2e over %zu coordinates", worst,
                    coords));
  return pass(fmt("100 draws, %zu coordinates, worst rel err %.1e", coords,
                  worst));
}

// ---- Criterion 3: CRF learning on a cue-word corpus --------------------------

// The gold tag is a deterministic function of one cue word per utterance and
// the previous tag, so the chain structure carries real information:
//   yeah   -> agreement if prev is yes_no_question, else statement
//   right  -> yes_no_question if prev is statement, else other
//   budget -> statement; really -> yes_no_question
//   agreed -> agreement; hmm -> other
std::vector<Conversation> cue_corpus(std::mt19937_64& rng, std::size_t n_convs,
                                     const char* prefix) {
  static const std::vector<std::string> filler = {
      "the", "we", "about", "today", "meeting", "plan", "work", "time"};
  std::vector<Conversation> out;
  for (std::size_t c = 0; c < n_convs; ++c) {
    Conversation conv;
    conv.id = std::string(prefix) + std::to_string(c);
    std::string prev = "start";
    const std::size_t n = 6 + rng() % 7;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t roll = rng() % 100;
      std::string cue, tag;
      if (roll < 25) {
        cue = "yeah";
        tag = prev == "yes_no_question" ? "agreement" : "statement";
      } else if (roll < 45) {
        cue = "right";
        tag = prev == "statement" ? "yes_no_question" : "other";
      } else if (roll < 60) {
        cue = "budget";
        tag = "statement";
      } else if (roll < 78) {
        cue = "really";
        tag = "yes_no_question";
      } else if (roll < 88) {
        cue = "agreed";
        tag = "agreement";
      } else {
        cue = "hmm";
        tag = "other";
      }
      Utterance u;
      u.speaker = (rng() % 2) ? "a" : "b";
      const std::size_t n_fill = 1 + rng() % 3;
      for (std::size_t j = 0; j < n_fill; ++j)
        u.tokens.push_back(filler[rng() % filler.size()]);
      u.tokens.insert(u.tokens.begin() + rng() % (u.tokens.size() + 1), cue);
      u.da_tag = tag;
      u.index = t;
      conv.utterances.push_back(std::move(u));
      prev = tag;
    }
    out.push_back(std::move(conv));
  }
  return out;
}

Outcome crit_crf_learning() {
  const TagSet tagset({{"statement", Role::Statement},
                       {"yes_no_question", Role::YesNoQuestion},
                       {"agreement", Role::Agreement},
                       {"other", Role::Other}});
  std::mt19937_64 rng(303);
  const auto train_set = cue_corpus(rng, 400, "tr");
  const auto dev_set = cue_corpus(rng, 50, "dv");
  const auto test_set = cue_corpus(rng, 50, "te");

  crf::TrainConfig cfg;
  cfg.epochs = 20;
  cfg.l2_lambda = 0.01;
  const crf::CrfModel model = crf::train(train_set, dev_set, tagset, cfg);
  const double acc = crf::evaluate_accuracy(model, test_set);

  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& conv : test_set)
    for (const auto& u : conv.utterances) {
      ++counts[u.da_tag];
      ++total;
    }
  std::size_t top = 0;
  for (const auto& [tag, c] : counts) top = std::max(top, c);
  const double majority = static_cast<double>(top) / static_cast<double>(total);

  if (acc < 0.90)
    return fail(fmt("test accuracy %.4f < 0.90", acc));
  if (acc - majority < 0.25)
    return fail(fmt("accuracy %.4f only %.3f above majority %.4f", acc,
                    acc - majority, majority));
  return pass(fmt("500 conversations: accuracy %.4f vs majority %.4f", acc,
                  majority));
}

// ---- Criterion 4: rewriter golden suite + random invariants ------------------

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

Outcome crit_rewriter_golden() {
  const TagSet tagset = load_tagset("data/golden/tagset.tsv");
  const rewriter::RewriteConfig cfg = rewriter::default_config();
  const auto convs = load_conversations("data/golden/rewriter_convs.tsv", tagset);
  if (convs.size() != 10)
    return fail(fmt("expected 10 golden conversations, found %zu", convs.size()));

  std::string got;
  for (const GateSet& gs : kGateSets)
    for (const Conversation& conv : convs) {
      const rewriter::Document doc =
          rewriter::render_document(conv, tagset, cfg, gs.gates);
      got += gs.name;
      got += '\t';
      got += conv.id;
      got += '\t';
      got += rewriter::to_paragraph(doc);
      got += '\n';
    }
  if (got != slurp("data/golden/rewriter_expected.txt"))
    return fail("rendered paragraphs differ from the committed golden file");

  // random invariants: removal idempotence and per-sentence provenance
  std::mt19937_64 rng(404);
  for (int iter = 0; iter < 1000; ++iter) {
    const Conversation conv = random_tagged_conv(rng, tagset);

    const rewriter::FilteredConversation once =
        rewriter::remove_redundant(conv, tagset, cfg);
    const rewriter::FilteredConversation twice =
        rewriter::remove_redundant(once.conv, tagset, cfg);
    if (!(twice.conv.utterances == once.conv.utterances) || twice.all_removed)
      return fail(fmt("iter %d: removal is not idempotent", iter));

    for (const GateSet& gs : kGateSets) {
      const rewriter::Document doc =
          rewriter::render_document(conv, tagset, cfg, gs.gates);
      if (!(rewriter::render_document(conv, tagset, cfg, gs.gates) == doc))
        return fail(fmt("iter %d/%s: render not deterministic", iter, gs.name));

      std::vector<std::size_t> survivors;
      for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
        const Role r = tagset.role(conv.utterances[i].da_tag);
        if (!gs.gates.remove_redundant || !cfg.removable_roles.count(r))
          survivors.push_back(i);
      }
      std::map<std::size_t, int> seen;
      bool first = true;
      std::size_t last_min = 0;
      for (const auto& sent : doc.sentences) {
        if (sent.sources.empty())
          return fail(fmt("iter %d/%s: sentence without sources", iter, gs.name));
        std::size_t mn = sent.sources[0];
        for (std::size_t s : sent.sources) {
          ++seen[s];
          mn = std::min(mn, s);
          if (gs.gates.remove_redundant &&
              cfg.removable_roles.count(tagset.role(conv.utterances[s].da_tag)))
            return fail(fmt("iter %d/%s: removable utterance %zu survived",
                            iter, gs.name, s));
        }
        if (!first && mn <= last_min)
          return fail(fmt("iter %d/%s: sentence order broken", iter, gs.name));
        last_min = mn;
        first = false;
      }
      if (seen.size() != survivors.size())
        return fail(fmt("iter %d/%s: %zu survivors, %zu sourced", iter,
                        gs.name, survivors.size(), seen.size()));
      for (std::size_t s : survivors)
        if (seen[s] != 1)
          return fail(fmt("iter %d/%s: utterance %zu sourced %d times", iter,
                          gs.name, s, seen[s]));
    }
  }
  return pass("10 golden conversations byte-identical; 1000 random "
              "conversations hold removal and provenance invariants");
}

// ---- Pointer-generator helpers ----------------------------------------------

pgen::Seq2SeqModel tiny_pgen(std::uint64_t seed, std::size_t extra,
                             std::size_t d_e, std::size_t d_h) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < extra; ++i)
    words.push_back("w" + std::to_string(i));
  return pgen::make_model(pgen::Vocab(words), d_e, d_h, 1.0, seed);
}

std::vector<std::string> random_pgen_tokens(std::mt19937_64& rng,
                                            std::size_t lo, std::size_t hi,
                                            std::size_t known, bool with_oov) {
  const std::size_t n = lo + rng() % (hi - lo + 1);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (with_oov && rng() % 3 == 0)
      out.push_back("x" + std::to_string(rng() % 3));
    else
      out.push_back("w" + std::to_string(rng() % known));
  }
  return out;
}

// ---- Criterion 5: distribution invariants -------------------------------------

Outcome crit_pgen_distributions() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  for (int draw = 0; draw < 500; ++draw) {
    const std::size_t extra = 3 + rng() % 6;
    const std::size_t d_e = 2 + rng() % 4;
    const std::size_t d_h = 2 + rng() % 6;
    const pgen::Seq2SeqModel m = tiny_pgen(5000 + draw, extra, d_e, d_h);
    const auto source = random_pgen_tokens(rng, 1, 7, extra, true);
    const pgen::SourceEncoding src = pgen::encode_source(m.vocab, source);
    const pgen::EncoderOut enc = pgen::encode(m, src.ids);
    const std::size_t n = src.ids.size();
    const std::size_t ext = m.vocab.size() + src.oov_words.size();

    std::vector<double> cov(n, 0.0), state = enc.s0;
    std::size_t prev = pgen::Vocab::kStart;
    const std::size_t steps = 1 + rng() % 3;
    for (std::size_t t = 0; t < steps; ++t) {
      const auto res = pgen::decode_step(m, state, src, enc, cov, prev);
      const auto& o = res.out;

      double s_att = 0.0, s_voc = 0.0, s_fin = 0.0;
      for (double a : o.attention) s_att += a;
      for (double v : o.vocab_dist) s_voc += v;
      for (double f : o.final_dist) s_fin += f;
      worst = std::max({worst, std::abs(s_att - 1.0), std::abs(s_voc - 1.0),
                        std::abs(s_fin - 1.0)});
      if (worst > 1e-6)
        return fail(fmt("draw %d: distribution sum off by %.2e", draw, worst));

      // mixture decomposition over the extended vocabulary
      std::vector<double> expect(ext, 0.0);
      for (std::size_t w = 0; w < m.vocab.size(); ++w)
        expect[w] = o.p_gen * o.vocab_dist[w];
      for (std::size_t i = 0; i < n; ++i)
        expect[src.ids[i]] += (1.0 - o.p_gen) * o.attention[i];
      for (std::size_t w = 0; w < ext; ++w) {
        const double err = std::abs(o.final_dist[w] - expect[w]);
        worst = std::max(worst, err);
        if (err > 1e-6)
          return fail(fmt("draw %d: mixture off by %.2e at word %zu", draw,
                          err, w));
      }

      for (std::size_t i = 0; i < n; ++i) cov[i] += o.attention[i];
      state = res.state;
      prev = rng() % ext;
      if (prev == pgen::Vocab::kStop || prev == pgen::Vocab::kPad)
        prev = pgen::Vocab::kUnk;
    }
  }
  return pass(fmt("500 draws, worst deviation %.1e", worst));
}

// ---- Criterion 6: pointer-generator gradient ----------------------------------

Outcome crit_pgen_gradient() {
  std::size_t checked = 0, bad = 0;
  double worst = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    pgen::Seq2SeqModel m = tiny_pgen(7000 + seed, 6, 4, 6);
    // larger weights move the model away from the near-linear regime
    for (double& p : m.params) p *= 5.0;
    std::mt19937_64 rng(900 + seed);
    const auto source = random_pgen_tokens(rng, 2, 5, 6, true);
    const auto target = random_pgen_tokens(rng, 1, 4, 6, true);

    const pgen::GradResult res =
        pgen::loss_and_gradient(m, source, target, 1.0);
    auto value = [&] { return pgen::sequence_loss(m, source, target).total; };
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      const double fd = testutil::central_diff(value, m.params[i], 1e-5);
      const double an = res.grad[i];
      const double denom = std::max(std::abs(fd), std::abs(an));
      if (denom <= 1e-5) continue;
      const double rel = std::abs(fd - an) / denom;
      worst = std::max(worst, rel);
      ++checked;
      if (rel >= 1e-3) ++bad;
    }
  }
  if (bad > 0)
    return fail(fmt("%zu/%zu coordinates exceed 1e-3 (worst %.2e)", bad,
                    checked, worst));
  return pass(fmt("20 seeds, %zu coordinates, worst rel err %.1e", checked,
                  worst));
}

// ---- Criterion 7: toy copy task -------------------------------------------------

// Sources are 2-3 simple sentences; the reference summary is exactly the
// first sentence. Names are drawn from a pool larger than the vocabulary, so
// most subjects are out-of-vocabulary and only reachable through the copy
// mechanism.
struct CopyCorpus {
  std::vector<pgen::TrainPair> train;
  std::vector<pgen::TrainPair> test;
  pgen::Vocab vocab;
};

CopyCorpus make_copy_corpus() {
  static const std::vector<std::string> names = {
      "ada",  "bo",   "cy",   "dee",  "ed",   "fay",  "gus",  "hal",
      "ida",  "jo",   "kay",  "lu",   "max",  "ned",  "ollie", "pia",
      "quin", "rex",  "sue",  "tess", "udo",  "vi",   "wes",  "xan",
      "yan",  "zed",  "arlo", "bree", "cole", "dara", "eve",  "finn",
      "gia",  "hank", "iris", "jade", "kian", "lena", "mira", "nova"};
  static const std::vector<std::string> verbs = {
      "sees", "takes", "likes", "finds", "paints", "moves", "holds", "keeps"};
  static const std::vector<std::string> nouns = {
      "box",  "car",  "book", "lamp", "tree", "road",
      "song", "cake", "bird", "door", "ship", "coat"};

  std::mt19937_64 rng(606);
  auto sentence = [&] {
    return std::vector<std::string>{names[rng() % names.size()],
                                    verbs[rng() % verbs.size()], "the",
                                    nouns[rng() % nouns.size()], "."};
  };
  auto example = [&] {
    pgen::TrainPair p;
    const std::vector<std::string> first = sentence();
    p.source = first;
    const std::size_t extra = 1 + rng() % 2;
    for (std::size_t k = 0; k < extra; ++k) {
      const std::vector<std::string> s = sentence();
      p.source.insert(p.source.end(), s.begin(), s.end());
    }
    p.target = first;
    return p;
  };

  CopyCorpus corpus;
  for (int i = 0; i < 200; ++i) corpus.train.push_back(example());
  for (int i = 0; i < 20; ++i) corpus.test.push_back(example());
  std::vector<std::vector<std::string>> texts;
  for (const auto& p : corpus.train) texts.push_back(p.source);
  // max 40 entries: all verbs and nouns fit, most names stay OOV
  corpus.vocab = pgen::build_vocab(texts, 40);
  return corpus;
}

Outcome crit_copy_task() {
  const CopyCorpus corpus = make_copy_corpus();
  std::size_t oov_names = 0, test_tokens = 0;
  for (const auto& p : corpus.test)
    for (const auto& w : p.target) {
      ++test_tokens;
      if (!corpus.vocab.contains(w)) ++oov_names;
    }

  pgen::Seq2SeqModel model = pgen::make_model(corpus.vocab, 32, 48, 1.0, 1);
  pgen::TrainConfig cfg;
  cfg.steps = 1200;
  cfg.batch_size = 8;
  cfg.learning_rate = 2e-3;
  pgen::train(model, corpus.train, cfg);

  pgen::BeamConfig beam;
  beam.beam_width = 4;
  beam.max_len = 10;
  beam.min_len = 1;
  double sum_f1 = 0.0;
  for (const auto& p : corpus.test) {
    const auto summary = pgen::beam_search_decode(model, p.source, beam);
    sum_f1 += rouge_n(summary, p.target, 1).f1;
  }
  const double mean_f1 = sum_f1 / static_cast<double>(corpus.test.size());
  if (mean_f1 < 0.90)
    return fail(fmt("held-out ROUGE-1 F1 %.4f < 0.90", mean_f1));
  return pass(fmt("held-out ROUGE-1 F1 %.4f (%zu/%zu target tokens OOV)",
                  mean_f1, oov_names, test_tokens));
}

// ---- Criterion 8: coverage mechanics ---------------------------------------------

Outcome crit_coverage_mechanics() {
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 50; ++trial) {
    pgen::Seq2SeqModel m = tiny_pgen(8000 + trial, 6, 3, 5);
    if (trial == 0) std::fill(m.params.begin(), m.params.end(), 0.0);
    const auto source = random_pgen_tokens(rng, 1, 6, 6, true);
    const pgen::SourceEncoding src = pgen::encode_source(m.vocab, source);
    const pgen::EncoderOut enc = pgen::encode(m, src.ids);
    const std::size_t n = src.ids.size();

    std::vector<double> running(n, 0.0), state = enc.s0;
    std::size_t prev = pgen::Vocab::kStart;
    const std::size_t steps = 2 + rng() % 4;
    for (std::size_t t = 0; t < steps; ++t) {
      const auto res = pgen::decode_step(m, state, src, enc, running, prev);
      if (!(res.out.coverage == running))
        return fail(fmt("trial %d step %zu: coverage is not the exact "
                        "running attention sum", trial, t));
      double pen = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        pen += std::min(res.out.attention[i], res.out.coverage[i]);
      if (t == 0 && pen != 0.0)
        return fail(fmt("trial %d: step-1 penalty %.3e != 0", trial, pen));
      if (pen < 0.0 || pen > 1.0 + 1e-12)
        return fail(fmt("trial %d step %zu: penalty %.6f outside [0,1]",
                        trial, t, pen));
      for (std::size_t i = 0; i < n; ++i) running[i] += res.out.attention[i];
      state = res.state;
      prev = (t % 2 == 0) ? pgen::Vocab::kUnk : src.ids[rng() % n];
    }
  }
  return pass("50 chains: coverage equals running sum exactly, penalties in "
              "[0,1], step-1 penalty 0");
}

// ---- Criterion 9: ROUGE vs independent oracle -------------------------------------

// clipped-count oracle with no hash maps: nested scans over n-gram vectors
RougeScore oracle_rouge(const std::vector<std::string>& cand,
                        const std::vector<std::string>& ref, int n) {
  auto grams = [n](const std::vector<std::string>& toks) {
    std::vector<std::vector<std::string>> gs;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
      gs.emplace_back(toks.begin() + i, toks.begin() + i + n);
    return gs;
  };
  const auto cg = grams(cand);
  const auto rg = grams(ref);
  long overlap = 0;
  std::vector<bool> cand_done(cg.size(), false);
  for (std::size_t i = 0; i < cg.size(); ++i) {
    if (cand_done[i]) continue;
    long in_cand = 0, in_ref = 0;
    for (std::size_t j = i; j < cg.size(); ++j)
      if (cg[j] == cg[i]) {
        ++in_cand;
        cand_done[j] = true;
      }
    for (const auto& g : rg)
      if (g == cg[i]) ++in_ref;
    overlap += std::min(in_cand, in_ref);
  }
  RougeScore s;
  s.n = n;
  s.precision = cg.empty() ? 0.0 : static_cast<double>(overlap) / cg.size();
  s.recall = rg.empty() ? 0.0 : static_cast<double>(overlap) / rg.size();
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

Outcome crit_rouge_oracle() {
  const auto c1 = tokenize("the cat sat on the mat");
  const auto r1 = tokenize("the cat was on the mat");
  const RougeScore f1 = rouge_n(c1, r1, 1);
  if (f1.precision != 5.0 / 6.0 || f1.recall != 5.0 / 6.0 ||
      f1.f1 != 5.0 / 6.0)
    return fail("unigram fixture is not exactly 5/6");
  const RougeScore f2 = rouge_n(tokenize("the cat sat"),
                                tokenize("the cat ran"), 2);
  if (f2.precision != 0.5 || f2.recall != 0.5 || f2.f1 != 0.5)
    return fail("bigram fixture is not exactly 0.5");

  std::mt19937_64 rng(909);
  for (int pair = 0; pair < 1000; ++pair) {
    const std::size_t alphabet = 2 + rng() % 7;
    auto text = [&] {
      std::vector<std::string> t(rng() % 15);
      for (auto& w : t) w = std::string(1, char('a' + rng() % alphabet));
      return t;
    };
    const auto cand = text();
    const auto ref = text();
    const int n = 1 + static_cast<int>(rng() % 2);
    const RougeScore got = rouge_n(cand, ref, n);
    const RougeScore want = oracle_rouge(cand, ref, n);
    if (got.precision != want.precision || got.recall != want.recall ||
        got.f1 != want.f1)
      return fail(fmt("pair %d (n=%d): rouge_n differs from oracle", pair, n));
  }
  return pass("both fixtures exact; 1000 random pairs equal the independent "
              "oracle bitwise");
}

// ---- Criterion 10: end-to-end determinism -------------------------------------------

Outcome crit_determinism() {
  const pipeline::PipelineConfig cfg =
      pipeline::load_config("data/golden/pipeline.cfg");
  const pipeline::ExperimentReport a = pipeline::run_all(cfg);
  const pipeline::ExperimentReport b = pipeline::run_all(cfg);
  const std::string report_a = pipeline::format_report(a);
  if (report_a != pipeline::format_report(b))
    return fail("two runs produced different reports");
  if (pipeline::format_sidecar(a) != pipeline::format_sidecar(b))
    return fail("two runs produced different sidecars");
  if (report_a != slurp("data/golden/report.txt"))
    return fail("report differs from the committed golden report");
  if (pipeline::format_sidecar(a) != slurp("data/golden/report.tsv"))
    return fail("sidecar differs from the committed golden sidecar");
  for (std::size_t i = 0; i < a.results.size(); ++i)
    if (!(a.results[i].summaries == b.results[i].summaries))
      return fail("two runs produced different summaries");
  return pass(fmt("repeated runs byte-identical and equal to the committed "
                  "golden report (%zu variants)", a.rows.size()));
}

struct Criterion {
  const char* name;
  Outcome (*run)();
  double budget_s;  // 0 means no stated budget
};

constexpr Criterion kCriteria[] = {
    {"crf inference oracle", crit_crf_inference, 60.0},
    {"crf gradient check", crit_crf_gradient, 120.0},
    {"crf learning", crit_crf_learning, 300.0},
    {"rewriter golden suite", crit_rewriter_golden, 0.0},
    {"pgen distribution invariants", crit_pgen_distributions, 0.0},
    {"pgen gradient check", crit_pgen_gradient, 300.0},
    {"toy copy task", crit_copy_task, 1800.0},
    {"coverage mechanics", crit_coverage_mechanics, 0.0},
    {"rouge oracle", crit_rouge_oracle, 0.0},
    {"end-to-end determinism", crit_determinism, 0.0},
};

}  // namespace

int main() {
  const std::size_t total = std::size(kCriteria);
  std::size_t passed = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const Criterion& c = kCriteria[i];
    const double t0 = now_s();
    Outcome out = c.run();
    const double elapsed = now_s() - t0;
    if (out.pass && c.budget_s > 0.0 && elapsed > c.budget_s)
      out = fail(fmt("over budget: %.1fs > %.0fs", elapsed, c.budget_s));
    std::printf("[%2zu/%zu] %s  %-28s  %s  (%.1fs)\n", i + 1, total,
                out.pass ? "PASS" : "FAIL", c.name, out.detail.c_str(),
                elapsed);
    std::fflush(stdout);
    if (out.pass) ++passed;
  }
  std::printf("%zu/%zu acceptance criteria passed\n", passed, total);
  return passed == total ? 0 : 1;
}
