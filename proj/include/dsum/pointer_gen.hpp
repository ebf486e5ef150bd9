// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0

// Pointer-generator sequence-to-sequence summarizer with coverage attention.
//
// Architecture (all cells are single-layer GRUs):
//   encoder   bidirectional GRU over source embeddings; state i is the
//             concatenation [fwd_i; bwd_i] of size 2*d_h
//   s_0       tanh(W_red [fwd_n; bwd_1] + b_red)
//   decoder   GRU; at step t it consumes the embedding of the previous
//             output token, then attends over the encoder states
//   attention e_i = v . tanh(W_h h_i + W_s s_t + w_c c_i + b); a = softmax(e)
//             where c is the coverage vector (sum of attentions of all
//             previous steps)
//   p_gen     sigmoid(u_ctx . ctx + u_s . s_t + u_x . x_t + b_gen)
//   output    softmax(W_out [s_t; ctx_t] + b_out) over the vocabulary
//   final     p_gen * vocab_dist(w) + (1 - p_gen) * sum_{i: src_i = w} a_i,
//             defined over the vocabulary extended with the source's
//             out-of-vocabulary words
//
// Loss is the per-step mean of -log final(target_t) plus cov_weight times the
// coverage penalty sum_i min(a_i, c_i).  Gradients are derived by hand; there
// is no autodiff dependency.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsum::pgen {

// ---- vocabulary -------------------------------------------------------------

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kStart = 2;
  static constexpr std::size_t kStop = 3;

  // Reserved tokens only.
  Vocab();
  // Reserved tokens plus `words` in the given order.  Throws
  // std::invalid_argument on duplicates or words equal to a reserved token.
  explicit Vocab(const std::vector<std::string>& words);

  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t id) const;
  // Id of `word`, or kUnk if absent.
  std::size_t id(const std::string& word) const;
  bool contains(const std::string& word) const;

  bool operator==(const Vocab& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::vector<std::size_t> order_;  // ids sorted by word, for binary search
};

// The most frequent max_size - 4 words, ties broken lexicographically.
// Throws std::invalid_argument if the corpus is empty or max_size <= 4.
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus,
                  std::size_t max_size);

// Source tokens mapped to ids over the extended vocabulary: in-vocabulary
// tokens keep their id, out-of-vocabulary tokens get vocab.size() + k where k
// indexes distinct OOV words in order of first occurrence.
struct SourceEncoding {
  std::vector<std::size_t> ids;
  std::vector<std::string> oov_words;
};

SourceEncoding encode_source(const Vocab& vocab,
                             const std::vector<std::string>& tokens);

// Target ids over the same extended vocabulary: OOV tokens that occur in the
// source map to that source's extended id, all others map to kUnk.
std::vector<std::size_t> encode_target(const Vocab& vocab,
                                       const SourceEncoding& src,
                                       const std::vector<std::string>& tokens);

// ---- model ------------------------------------------------------------------

// Offsets of one GRU cell's parameters inside the flat parameter vector.
// Gate order: update z, reset r, candidate h.  Weight shapes: w_* is
// hid x in, u_* is hid x hid, b_* is hid.
struct GruLayout {
  std::size_t in = 0, hid = 0;
  std::size_t wz = 0, uz = 0, bz = 0;
  std::size_t wr = 0, ur = 0, br = 0;
  std::size_t wh = 0, uh = 0, bh = 0;
};

// Offsets of every parameter tensor inside Seq2SeqModel::params.
struct ParamLayout {
  std::size_t embedding = 0;  // V x d_e
  GruLayout enc_fwd, enc_bwd, dec;
  std::size_t w_red = 0, b_red = 0;      // d_h x 2d_h, d_h
  std::size_t attn_wh = 0;               // d_h x 2d_h
  std::size_t attn_ws = 0;               // d_h x d_h
  std::size_t attn_wc = 0;               // d_h
  std::size_t attn_b = 0;                // d_h
  std::size_t attn_v = 0;                // d_h
  std::size_t pgen_ctx = 0;              // 2d_h
  std::size_t pgen_s = 0;                // d_h
  std::size_t pgen_x = 0;                // d_e
  std::size_t pgen_b = 0;                // 1
  std::size_t w_out = 0, b_out = 0;      // V x 3d_h, V
  std::size_t total = 0;
};

ParamLayout make_layout(std::size_t vocab_size, std::size_t d_e,
                        std::size_t d_h);

struct Seq2SeqModel {
  Vocab vocab;
  std::size_t d_e = 64;
  std::size_t d_h = 128;
  double cov_weight = 1.0;
  ParamLayout layout;
  std::vector<double> params;  // every tensor, contiguous per `layout`
};

// Model with parameters drawn uniformly from [-0.08, 0.08], deterministic in
// the seed.
Seq2SeqModel make_model(Vocab vocab, std::size_t d_e = 64,
                        std::size_t d_h = 128, double cov_weight = 1.0,
                        std::uint64_t seed = 1);

// ---- forward pass -----------------------------------------------------------

struct EncoderOut {
  std::vector<double> states;  // n x 2d_h row-major, row i = [fwd_i; bwd_i]
  std::vector<double> s0;      // initial decoder state, d_h
};

// Throws std::invalid_argument on an empty source.  Extended ids embed as
// kUnk.
EncoderOut encode(const Seq2SeqModel& model,
                  const std::vector<std::size_t>& src_ids);

struct DecoderStepOutput {
  std::vector<double> attention;   // over source positions, sums to 1
  double p_gen = 0.0;              // in [0, 1]
  std::vector<double> vocab_dist;  // over the vocabulary, sums to 1
  std::vector<double> final_dist;  // over vocab + source OOVs, sums to 1
  std::vector<double> coverage;    // the coverage this step attended with
};

struct DecodeStepResult {
  DecoderStepOutput out;
  std::vector<double> state;  // decoder state after this step
};

// One teacher-forcing/decoding step.  `coverage` must hold the elementwise
// sum of the attention vectors of all previous steps (all zeros at step 1);
// the caller advances it with out.attention afterwards.  Throws
// std::invalid_argument on dimension mismatches.
DecodeStepResult decode_step(const Seq2SeqModel& model,
                             const std::vector<double>& state,
                             const SourceEncoding& src, const EncoderOut& enc,
                             const std::vector<double>& coverage,
                             std::size_t prev_token);

// ---- loss and gradient ------------------------------------------------------

struct LossBreakdown {
  double total = 0.0;             // nll + cov_weight * coverage_penalty
  double nll = 0.0;               // mean -log final(target_t)
  double coverage_penalty = 0.0;  // mean sum_i min(a_i, c_i)
  std::size_t steps = 0;          // target length + 1 (the STOP emission)
};

// Teacher-forcing loss over target + STOP, coverage weighted by
// model.cov_weight.  Throws std::invalid_argument on empty source or target.
LossBreakdown sequence_loss(const Seq2SeqModel& model,
                            const std::vector<std::string>& source,
                            const std::vector<std::string>& target);

struct GradResult {
  LossBreakdown loss;
  std::vector<double> grad;  // d total / d params, layout of model.params
};

// Loss plus hand-derived gradients; `cov_weight` overrides the model's
// coverage weight (training phases it in).
GradResult loss_and_gradient(const Seq2SeqModel& model,
                             const std::vector<std::string>& source,
                             const std::vector<std::string>& target,
                             double cov_weight);

// ---- training ---------------------------------------------------------------

struct TrainPair {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 2.0;         // global-norm gradient clip
  double coverage_phase_in = 0.8; // fraction of steps before the penalty is on
  std::uint64_t seed = 1;
};

struct TrainTrace {
  std::vector<double> step_loss;  // mini-batch training loss per step
};

// Adam on mini-batches sampled with replacement; deterministic in cfg.seed.
// Throws std::invalid_argument on an empty dataset and std::runtime_error if
// the loss turns non-finite.
void train(Seq2SeqModel& model, const std::vector<TrainPair>& data,
           const TrainConfig& cfg, TrainTrace* trace = nullptr);

// ---- decoding ---------------------------------------------------------------

struct BeamConfig {
  std::size_t beam_width = 4;
  std::size_t max_len = 100;
  std::size_t min_len = 10;
};

// Length-normalized beam search (log-probability divided by the number of
// emissions, STOP included when emitted).  STOP is masked before min_len;
// PAD and START are never emitted; UNK is never emitted while some source OOV
// has at least its copy probability.  Ties break toward the smaller token id.
// Throws std::invalid_argument on an empty source or invalid limits.
std::vector<std::string> beam_search_decode(const Seq2SeqModel& model,
                                            const std::vector<std::string>& source,
                                            const BeamConfig& cfg = {});

// Generic beam core, exposed for direct testing against hand-built
// probability tables.  `step` maps (state, previous token) to the next
// state and a probability distribution over an extended alphabet; ids at or
// above first_extended count as copy (OOV) tokens for the UNK rule.  Banned
// ids are never emitted.
struct BeamParams {
  std::size_t beam_width = 4;
  std::size_t max_len = 100;
  std::size_t min_len = 1;
  std::size_t stop_id = Vocab::kStop;
  std::size_t unk_id = Vocab::kUnk;
  std::size_t first_extended = SIZE_MAX;  // no copy tokens by default
  std::vector<std::size_t> banned;
};

template <class State>
struct BeamStep {
  std::vector<double> probs;
  State state;
};

template <class State>
std::vector<std::size_t> beam_search(
    const State& init,
    const std::function<BeamStep<State>(const State&, std::size_t)>& step,
    const BeamParams& bp);

// ---- serialization ----------------------------------------------------------

// Versioned binary format, magic "PGEN/1\n".  load_model validates dimensions,
// the vocabulary bijection, and parameter finiteness.
void save_model(const Seq2SeqModel& model, std::ostream& out);
void save_model(const Seq2SeqModel& model, const std::string& path);
Seq2SeqModel load_model(std::istream& in, const std::string& source);
Seq2SeqModel load_model(const std::string& path);

// ---- beam template implementation -------------------------------------------

namespace detail {

struct BeamHyp {
  std::vector<std::size_t> tokens;
  double logprob = 0.0;
  std::size_t state = 0;  // index into the state pool
};

// Candidate ordering and UNK masking shared by all State types.
struct BeamRank {
  double score;
  std::size_t parent;
  std::size_t token;
};

bool beam_rank_less(const BeamRank& a, const BeamRank& b);
bool beam_allows(const std::vector<double>& probs, std::size_t token,
                 std::size_t out_len, const BeamParams& bp);
bool beam_better(double norm_a, const std::vector<std::size_t>& toks_a,
                 double norm_b, const std::vector<std::size_t>& toks_b);

}  // namespace detail

template <class State>
std::vector<std::size_t> beam_search(
    const State& init,
    const std::function<BeamStep<State>(const State&, std::size_t)>& step,
    const BeamParams& bp) {
  if (bp.beam_width < 1)
    throw std::invalid_argument("beam_search: beam_width must be >= 1");
  if (bp.min_len < 1 || bp.max_len < bp.min_len)
    throw std::invalid_argument("beam_search: need max_len >= min_len >= 1");

  std::vector<State> pool = {init};
  std::vector<detail::BeamHyp> live(1);
  live[0].state = 0;

  bool have_best = false;
  double best_norm = 0.0;
  std::vector<std::size_t> best_tokens;
  auto offer = [&](double logprob, std::size_t emissions,
                   const std::vector<std::size_t>& tokens) {
    const double norm = logprob / static_cast<double>(emissions);
    if (!have_best || detail::beam_better(norm, tokens, best_norm, best_tokens)) {
      have_best = true;
      best_norm = norm;
      best_tokens = tokens;
    }
  };

  for (std::size_t len = 0; len < bp.max_len && !live.empty(); ++len) {
    std::vector<detail::BeamRank> ranks;
    std::vector<BeamStep<State>> steps(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      const std::size_t prev =
          live[h].tokens.empty() ? Vocab::kStart : live[h].tokens.back();
      steps[h] = step(pool[live[h].state], prev);
      const auto& probs = steps[h].probs;
      for (std::size_t tok = 0; tok < probs.size(); ++tok) {
        if (!detail::beam_allows(probs, tok, len, bp)) continue;
        if (probs[tok] <= 0.0) continue;
        ranks.push_back({live[h].logprob + std::log(probs[tok]), h, tok});
      }
    }
    std::sort(ranks.begin(), ranks.end(), detail::beam_rank_less);
    if (ranks.size() > bp.beam_width) ranks.resize(bp.beam_width);

    std::vector<State> next_pool;
    std::vector<detail::BeamHyp> next_live;
    for (const auto& r : ranks) {
      const auto& parent = live[r.parent];
      if (r.token == bp.stop_id) {
        offer(r.score, parent.tokens.size() + 1, parent.tokens);
        continue;
      }
      detail::BeamHyp hyp;
      hyp.tokens = parent.tokens;
      hyp.tokens.push_back(r.token);
      hyp.logprob = r.score;
      hyp.state = next_pool.size();
      next_pool.push_back(steps[r.parent].state);
      next_live.push_back(std::move(hyp));
    }
    pool = std::move(next_pool);
    live = std::move(next_live);
  }

  // Hypotheses cut off at max_len count as completed without a STOP emission.
  for (const auto& hyp : live)
    if (!hyp.tokens.empty()) offer(hyp.logprob, hyp.tokens.size(), hyp.tokens);

  return best_tokens;
}

}  // namespace dsum::pgen
