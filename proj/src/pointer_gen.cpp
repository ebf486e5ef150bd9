// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0

#include "dsum/pointer_gen.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include "dsum/binio.hpp"
#include "dsum/kernels.hpp"

namespace dsum::pgen {

namespace k = dsum::kernels;

namespace {

const char* const kReserved[4] = {"<pad>", "<unk>", "<start>", "<stop>"};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Uniform in [0, 1) from the top 53 bits; identical across platforms.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Extended ids (source OOVs) embed as UNK.
std::size_t emb_row(const Vocab& v, std::size_t id) {
  return id < v.size() ? id : Vocab::kUnk;
}

}  // namespace

// ---- vocabulary -------------------------------------------------------------

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& words) {
  words_.assign(kReserved, kReserved + 4);
  words_.insert(words_.end(), words.begin(), words.end());
  order_.resize(words_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  std::sort(order_.begin(), order_.end(),
            [&](std::size_t a, std::size_t b) { return words_[a] < words_[b]; });
  for (std::size_t i = 1; i < order_.size(); ++i)
    if (words_[order_[i - 1]] == words_[order_[i]])
      throw std::invalid_argument("vocab: duplicate word '" +
                                  words_[order_[i]] + "'");
}

const std::string& Vocab::word(std::size_t id) const {
  if (id >= words_.size())
    throw std::invalid_argument("vocab: id out of range");
  return words_[id];
}

std::size_t Vocab::id(const std::string& word) const {
  auto it = std::lower_bound(
      order_.begin(), order_.end(), word,
      [&](std::size_t a, const std::string& w) { return words_[a] < w; });
  if (it != order_.end() && words_[*it] == word) return *it;
  return kUnk;
}

bool Vocab::contains(const std::string& word) const {
  auto it = std::lower_bound(
      order_.begin(), order_.end(), word,
      [&](std::size_t a, const std::string& w) { return words_[a] < w; });
  return it != order_.end() && words_[*it] == word;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus,
                  std::size_t max_size) {
  if (corpus.empty())
    throw std::invalid_argument("build_vocab: empty corpus");
  if (max_size <= 4)
    throw std::invalid_argument("build_vocab: max_size must exceed 4");
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : corpus)
    for (const auto& tok : seq) ++counts[tok];
  for (const char* r : kReserved) counts.erase(r);

  std::vector<std::pair<std::string, std::size_t>> by_freq(counts.begin(),
                                                           counts.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t keep = std::min(max_size - 4, by_freq.size());
  std::vector<std::string> words;
  words.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) words.push_back(by_freq[i].first);
  return Vocab(words);
}

SourceEncoding encode_source(const Vocab& vocab,
                             const std::vector<std::string>& tokens) {
  SourceEncoding src;
  src.ids.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const std::size_t id = vocab.id(tok);
    if (id != Vocab::kUnk || vocab.contains(tok)) {
      src.ids.push_back(id);
      continue;
    }
    std::size_t oov = src.oov_words.size();
    for (std::size_t j = 0; j < src.oov_words.size(); ++j)
      if (src.oov_words[j] == tok) {
        oov = j;
        break;
      }
    if (oov == src.oov_words.size()) src.oov_words.push_back(tok);
    src.ids.push_back(vocab.size() + oov);
  }
  return src;
}

std::vector<std::size_t> encode_target(const Vocab& vocab,
                                       const SourceEncoding& src,
                                       const std::vector<std::string>& tokens) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const std::size_t id = vocab.id(tok);
    if (id != Vocab::kUnk || vocab.contains(tok)) {
      ids.push_back(id);
      continue;
    }
    std::size_t mapped = Vocab::kUnk;
    for (std::size_t j = 0; j < src.oov_words.size(); ++j)
      if (src.oov_words[j] == tok) {
        mapped = vocab.size() + j;
        break;
      }
    ids.push_back(mapped);
  }
  return ids;
}

// ---- layout and construction ------------------------------------------------

namespace {

GruLayout gru_layout(std::size_t in, std::size_t hid, std::size_t& off) {
  auto take = [&off](std::size_t n) {
    const std::size_t o = off;
    off += n;
    return o;
  };
  GruLayout gl;
  gl.in = in;
  gl.hid = hid;
  gl.wz = take(hid * in);
  gl.uz = take(hid * hid);
  gl.bz = take(hid);
  gl.wr = take(hid * in);
  gl.ur = take(hid * hid);
  gl.br = take(hid);
  gl.wh = take(hid * in);
  gl.uh = take(hid * hid);
  gl.bh = take(hid);
  return gl;
}

}  // namespace

ParamLayout make_layout(std::size_t vocab_size, std::size_t d_e,
                        std::size_t d_h) {
  ParamLayout pl;
  std::size_t off = 0;
  auto take = [&off](std::size_t n) {
    const std::size_t o = off;
    off += n;
    return o;
  };
  pl.embedding = take(vocab_size * d_e);
  pl.enc_fwd = gru_layout(d_e, d_h, off);
  pl.enc_bwd = gru_layout(d_e, d_h, off);
  pl.dec = gru_layout(d_e, d_h, off);
  pl.w_red = take(d_h * 2 * d_h);
  pl.b_red = take(d_h);
  pl.attn_wh = take(d_h * 2 * d_h);
  pl.attn_ws = take(d_h * d_h);
  pl.attn_wc = take(d_h);
  pl.attn_b = take(d_h);
  pl.attn_v = take(d_h);
  pl.pgen_ctx = take(2 * d_h);
  pl.pgen_s = take(d_h);
  pl.pgen_x = take(d_e);
  pl.pgen_b = take(1);
  pl.w_out = take(vocab_size * 3 * d_h);
  pl.b_out = take(vocab_size);
  pl.total = off;
  return pl;
}

Seq2SeqModel make_model(Vocab vocab, std::size_t d_e, std::size_t d_h,
                        double cov_weight, std::uint64_t seed) {
  if (d_e == 0 || d_h == 0)
    throw std::invalid_argument("make_model: dimensions must be positive");
  if (!(cov_weight >= 0.0))
    throw std::invalid_argument("make_model: cov_weight must be >= 0");
  Seq2SeqModel m;
  m.vocab = std::move(vocab);
  m.d_e = d_e;
  m.d_h = d_h;
  m.cov_weight = cov_weight;
  m.layout = make_layout(m.vocab.size(), d_e, d_h);
  m.params.resize(m.layout.total);
  std::mt19937_64 rng(seed);
  for (double& p : m.params) p = (2.0 * unit_uniform(rng) - 1.0) * 0.08;
  return m;
}

// ---- GRU cell ----------------------------------------------------------------

namespace {

struct GruCacheStep {
  std::vector<double> z, r, hc;
};

// h = (1 - z) . h_prev + z . tanh(Wh x + Uh (r . h_prev) + bh)
void gru_forward(const double* p, const GruLayout& gl, const double* x,
                 const double* hp, double* h, GruCacheStep& c) {
  const std::size_t H = gl.hid, I = gl.in;
  std::vector<double> a(H), b(H);
  c.z.resize(H);
  c.r.resize(H);
  c.hc.resize(H);

  k::matvec(p + gl.wz, x, a.data(), H, I);
  k::matvec(p + gl.uz, hp, b.data(), H, H);
  for (std::size_t i = 0; i < H; ++i)
    c.z[i] = sigmoid(a[i] + b[i] + p[gl.bz + i]);

  k::matvec(p + gl.wr, x, a.data(), H, I);
  k::matvec(p + gl.ur, hp, b.data(), H, H);
  for (std::size_t i = 0; i < H; ++i)
    c.r[i] = sigmoid(a[i] + b[i] + p[gl.br + i]);

  std::vector<double> rh(H);
  for (std::size_t i = 0; i < H; ++i) rh[i] = c.r[i] * hp[i];
  k::matvec(p + gl.wh, x, a.data(), H, I);
  k::matvec(p + gl.uh, rh.data(), b.data(), H, H);
  for (std::size_t i = 0; i < H; ++i)
    c.hc[i] = std::tanh(a[i] + b[i] + p[gl.bh + i]);

  for (std::size_t i = 0; i < H; ++i)
    h[i] = (1.0 - c.z[i]) * hp[i] + c.z[i] * c.hc[i];
}

// Accumulates parameter gradients into g and input gradients into dhp / dx.
void gru_backward(const double* p, double* g, const GruLayout& gl,
                  const double* x, const double* hp, const GruCacheStep& c,
                  const double* dh, double* dhp, double* dx) {
  const std::size_t H = gl.hid, I = gl.in;
  std::vector<double> daz(H), dar(H), dah(H), rh(H), drh(H, 0.0);
  for (std::size_t i = 0; i < H; ++i) {
    const double dz = dh[i] * (c.hc[i] - hp[i]);
    daz[i] = dz * c.z[i] * (1.0 - c.z[i]);
    dah[i] = dh[i] * c.z[i] * (1.0 - c.hc[i] * c.hc[i]);
    dhp[i] += dh[i] * (1.0 - c.z[i]);
    rh[i] = c.r[i] * hp[i];
  }
  // candidate
  k::outer_add(dah.data(), x, g + gl.wh, H, I);
  k::outer_add(dah.data(), rh.data(), g + gl.uh, H, H);
  k::axpy(1.0, dah.data(), g + gl.bh, H);
  k::matvec_t_add(p + gl.uh, dah.data(), drh.data(), H, H);
  k::matvec_t_add(p + gl.wh, dah.data(), dx, H, I);
  for (std::size_t i = 0; i < H; ++i) {
    dhp[i] += drh[i] * c.r[i];
    dar[i] = drh[i] * hp[i] * c.r[i] * (1.0 - c.r[i]);
  }
  // update gate
  k::outer_add(daz.data(), x, g + gl.wz, H, I);
  k::outer_add(daz.data(), hp, g + gl.uz, H, H);
  k::axpy(1.0, daz.data(), g + gl.bz, H);
  k::matvec_t_add(p + gl.uz, daz.data(), dhp, H, H);
  k::matvec_t_add(p + gl.wz, daz.data(), dx, H, I);
  // reset gate
  k::outer_add(dar.data(), x, g + gl.wr, H, I);
  k::outer_add(dar.data(), hp, g + gl.ur, H, H);
  k::axpy(1.0, dar.data(), g + gl.br, H);
  k::matvec_t_add(p + gl.ur, dar.data(), dhp, H, H);
  k::matvec_t_add(p + gl.wr, dar.data(), dx, H, I);
}

}  // namespace

// ---- encoder -----------------------------------------------------------------

namespace {

struct EncCache {
  std::vector<std::size_t> rows;  // embedding row per position
  std::vector<double> x;          // n x d_e
  std::vector<GruCacheStep> fwd, bwd;
  std::vector<double> fstate;  // (n+1) x d_h, row i+1 after token i, row 0 zero
  std::vector<double> bstate;  // (n+1) x d_h, row i after token i, row n zero
  std::vector<double> red_in;  // [fwd_n; bwd_1]
};

void encode_impl(const Seq2SeqModel& m, const std::vector<std::size_t>& ids,
                 EncoderOut& out, EncCache& c) {
  if (ids.empty()) throw std::invalid_argument("encode: empty source");
  const std::size_t n = ids.size(), de = m.d_e, dh = m.d_h;
  const double* p = m.params.data();
  const ParamLayout& pl = m.layout;

  c.rows.resize(n);
  c.x.resize(n * de);
  for (std::size_t i = 0; i < n; ++i) {
    c.rows[i] = emb_row(m.vocab, ids[i]);
    std::memcpy(c.x.data() + i * de, p + pl.embedding + c.rows[i] * de,
                de * sizeof(double));
  }

  c.fwd.resize(n);
  c.bwd.resize(n);
  c.fstate.assign((n + 1) * dh, 0.0);
  c.bstate.assign((n + 1) * dh, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    gru_forward(p, pl.enc_fwd, c.x.data() + i * de, c.fstate.data() + i * dh,
                c.fstate.data() + (i + 1) * dh, c.fwd[i]);
  for (std::size_t i = n; i-- > 0;)
    gru_forward(p, pl.enc_bwd, c.x.data() + i * de,
                c.bstate.data() + (i + 1) * dh, c.bstate.data() + i * dh,
                c.bwd[i]);

  out.states.resize(n * 2 * dh);
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(out.states.data() + i * 2 * dh, c.fstate.data() + (i + 1) * dh,
                dh * sizeof(double));
    std::memcpy(out.states.data() + i * 2 * dh + dh, c.bstate.data() + i * dh,
                dh * sizeof(double));
  }

  c.red_in.resize(2 * dh);
  std::memcpy(c.red_in.data(), c.fstate.data() + n * dh, dh * sizeof(double));
  std::memcpy(c.red_in.data() + dh, c.bstate.data(), dh * sizeof(double));
  out.s0.assign(dh, 0.0);
  k::matvec(p + pl.w_red, c.red_in.data(), out.s0.data(), dh, 2 * dh);
  for (std::size_t j = 0; j < dh; ++j)
    out.s0[j] = std::tanh(out.s0[j] + p[pl.b_red + j]);
}

// W_h h_i for every source position, reused across decoder steps.
void project_encoder(const Seq2SeqModel& m, const std::vector<double>& states,
                     std::size_t n, std::vector<double>& p_enc) {
  const std::size_t dh = m.d_h;
  p_enc.assign(n * dh, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    k::matvec(m.params.data() + m.layout.attn_wh, states.data() + i * 2 * dh,
              p_enc.data() + i * dh, dh, 2 * dh);
}

}  // namespace

EncoderOut encode(const Seq2SeqModel& model,
                  const std::vector<std::size_t>& src_ids) {
  EncoderOut out;
  EncCache cache;
  encode_impl(model, src_ids, out, cache);
  return out;
}

// ---- one decoder step --------------------------------------------------------

namespace {

struct StepForward {
  std::vector<double> tanhq;  // n x d_h
  std::vector<double> att;    // n
  std::vector<double> ctx;    // 2 d_h
  std::vector<double> sc;     // [s; ctx]
  std::vector<double> vdist;  // V
  double pgen = 0.0;
};

// Attention, context, p_gen, and the vocabulary distribution for state s.
void step_forward(const Seq2SeqModel& m, const double* s, const double* cov,
                  const double* x, const std::vector<double>& states,
                  std::size_t n, const std::vector<double>& p_enc,
                  StepForward& o) {
  const std::size_t dh = m.d_h, de = m.d_e, V = m.vocab.size();
  const double* p = m.params.data();
  const ParamLayout& pl = m.layout;

  std::vector<double> sproj(dh, 0.0);
  k::matvec(p + pl.attn_ws, s, sproj.data(), dh, dh);
  k::axpy(1.0, p + pl.attn_b, sproj.data(), dh);

  o.tanhq.resize(n * dh);
  o.att.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (std::size_t j = 0; j < dh; ++j) {
      const double q = p_enc[i * dh + j] + sproj[j] + cov[i] * p[pl.attn_wc + j];
      const double t = std::tanh(q);
      o.tanhq[i * dh + j] = t;
      e += p[pl.attn_v + j] * t;
    }
    o.att[i] = e;
  }
  k::softmax_inplace(o.att.data(), n);

  o.ctx.assign(2 * dh, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    k::axpy(o.att[i], states.data() + i * 2 * dh, o.ctx.data(), 2 * dh);

  o.pgen = sigmoid(k::dot(p + pl.pgen_ctx, o.ctx.data(), 2 * dh) +
                   k::dot(p + pl.pgen_s, s, dh) +
                   k::dot(p + pl.pgen_x, x, de) + p[pl.pgen_b]);

  o.sc.resize(3 * dh);
  std::memcpy(o.sc.data(), s, dh * sizeof(double));
  std::memcpy(o.sc.data() + dh, o.ctx.data(), 2 * dh * sizeof(double));
  o.vdist.assign(V, 0.0);
  k::matvec(p + pl.w_out, o.sc.data(), o.vdist.data(), V, 3 * dh);
  k::axpy(1.0, p + pl.b_out, o.vdist.data(), V);
  k::softmax_inplace(o.vdist.data(), V);
}

void mix_final(const Seq2SeqModel& m, const SourceEncoding& src,
               const StepForward& f, std::vector<double>& final_dist) {
  const std::size_t V = m.vocab.size();
  final_dist.assign(V + src.oov_words.size(), 0.0);
  for (std::size_t w = 0; w < V; ++w) final_dist[w] = f.pgen * f.vdist[w];
  for (std::size_t i = 0; i < src.ids.size(); ++i)
    final_dist[src.ids[i]] += (1.0 - f.pgen) * f.att[i];
}

}  // namespace

DecodeStepResult decode_step(const Seq2SeqModel& model,
                             const std::vector<double>& state,
                             const SourceEncoding& src, const EncoderOut& enc,
                             const std::vector<double>& coverage,
                             std::size_t prev_token) {
  const std::size_t n = src.ids.size(), dh = model.d_h;
  if (n == 0) throw std::invalid_argument("decode_step: empty source");
  if (state.size() != dh)
    throw std::invalid_argument("decode_step: decoder state size mismatch");
  if (enc.states.size() != n * 2 * dh)
    throw std::invalid_argument("decode_step: encoder state size mismatch");
  if (coverage.size() != n)
    throw std::invalid_argument("decode_step: coverage size mismatch");
  for (double c : coverage)
    if (!(c >= 0.0))
      throw std::invalid_argument("decode_step: coverage must be non-negative");

  const double* p = model.params.data();
  const double* x =
      p + model.layout.embedding + emb_row(model.vocab, prev_token) * model.d_e;

  DecodeStepResult r;
  r.state.assign(dh, 0.0);
  GruCacheStep gc;
  gru_forward(p, model.layout.dec, x, state.data(), r.state.data(), gc);

  std::vector<double> p_enc;
  project_encoder(model, enc.states, n, p_enc);
  StepForward f;
  step_forward(model, r.state.data(), coverage.data(), x, enc.states, n, p_enc,
               f);

  mix_final(model, src, f, r.out.final_dist);
  r.out.attention = std::move(f.att);
  r.out.p_gen = f.pgen;
  r.out.vocab_dist = std::move(f.vdist);
  r.out.coverage = coverage;
  return r;
}

// ---- sequence loss and gradients ----------------------------------------------

namespace {

struct StepCache {
  std::size_t in_row = 0;   // embedding row of the input token
  std::size_t target = 0;   // extended id scored at this step
  double final_target = 0.0;
  GruCacheStep gru;
  std::vector<double> s;    // decoder state after this step
  std::vector<double> cov;  // coverage this step attended with
  StepForward f;
};

struct SeqCache {
  SourceEncoding src;
  EncCache enc_c;
  EncoderOut enc;
  std::vector<double> p_enc;
  std::vector<StepCache> steps;
};

LossBreakdown forward_sequence(const Seq2SeqModel& m,
                               const std::vector<std::string>& source,
                               const std::vector<std::string>& target,
                               double cov_weight, SeqCache& c) {
  if (source.empty())
    throw std::invalid_argument("sequence_loss: empty source");
  if (target.empty())
    throw std::invalid_argument("sequence_loss: empty target");
  const std::size_t de = m.d_e, dh = m.d_h, V = m.vocab.size();
  const double* p = m.params.data();

  c.src = encode_source(m.vocab, source);
  const std::vector<std::size_t> tgt = encode_target(m.vocab, c.src, target);
  encode_impl(m, c.src.ids, c.enc, c.enc_c);
  const std::size_t n = c.src.ids.size();
  project_encoder(m, c.enc.states, n, c.p_enc);

  const std::size_t T = tgt.size() + 1;  // target tokens plus STOP
  c.steps.assign(T, StepCache{});
  std::vector<double> cov(n, 0.0);
  double nll = 0.0, covpen = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    StepCache& sc = c.steps[t];
    const std::size_t in_id = t == 0 ? Vocab::kStart : tgt[t - 1];
    sc.in_row = emb_row(m.vocab, in_id);
    const double* x = p + m.layout.embedding + sc.in_row * de;
    const double* hp = t == 0 ? c.enc.s0.data() : c.steps[t - 1].s.data();
    sc.s.assign(dh, 0.0);
    gru_forward(p, m.layout.dec, x, hp, sc.s.data(), sc.gru);
    sc.cov = cov;
    step_forward(m, sc.s.data(), cov.data(), x, c.enc.states, n, c.p_enc,
                 sc.f);

    sc.target = t < tgt.size() ? tgt[t] : Vocab::kStop;
    double fv = sc.target < V ? sc.f.pgen * sc.f.vdist[sc.target] : 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (c.src.ids[i] == sc.target) fv += (1.0 - sc.f.pgen) * sc.f.att[i];
    sc.final_target = fv;
    nll -= std::log(fv);

    for (std::size_t i = 0; i < n; ++i) {
      covpen += std::min(sc.f.att[i], cov[i]);
      cov[i] += sc.f.att[i];
    }
  }
  LossBreakdown out;
  out.steps = T;
  out.nll = nll / static_cast<double>(T);
  out.coverage_penalty = covpen / static_cast<double>(T);
  out.total = out.nll + cov_weight * out.coverage_penalty;
  return out;
}

// Reverse pass; accumulates d total / d params into g.
LossBreakdown backward_into(const Seq2SeqModel& m,
                            const std::vector<std::string>& source,
                            const std::vector<std::string>& target,
                            double cov_weight, double* g) {
  SeqCache c;
  const LossBreakdown loss = forward_sequence(m, source, target, cov_weight, c);
  const std::size_t de = m.d_e, dh = m.d_h, V = m.vocab.size();
  const std::size_t n = c.src.ids.size(), T = c.steps.size();
  const double* p = m.params.data();
  const ParamLayout& pl = m.layout;
  const double invT = 1.0 / static_cast<double>(T);

  std::vector<double> ds_next(dh, 0.0), dcov(n, 0.0);
  std::vector<double> dH(n * 2 * dh, 0.0), dP(n * dh, 0.0);
  std::vector<double> da(n), dc(n), ds(dh), dctx(2 * dh), dlogits(V),
      dsc(3 * dh), dq(dh), dqsum(dh), dx(de), dhp(dh);

  for (std::size_t t = T; t-- > 0;) {
    const StepCache& sc = c.steps[t];
    const double* x = p + pl.embedding + sc.in_row * de;

    da = dcov;  // c_{t+1} = c_t + a_t
    dc = dcov;

    // final(w*) = pgen vdist(w*) + (1 - pgen) copy(w*)
    const double coef = -invT / sc.final_target;
    double copy_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (c.src.ids[i] == sc.target) copy_sum += sc.f.att[i];
    const double pv = sc.target < V ? sc.f.vdist[sc.target] : 0.0;
    const double dg = coef * (pv - copy_sum);
    for (std::size_t i = 0; i < n; ++i)
      if (c.src.ids[i] == sc.target) da[i] += coef * (1.0 - sc.f.pgen);

    // coverage penalty: d min(a, c) goes to the smaller branch, ties to c
    if (cov_weight != 0.0) {
      const double w = cov_weight * invT;
      for (std::size_t i = 0; i < n; ++i) {
        if (sc.f.att[i] < sc.cov[i])
          da[i] += w;
        else
          dc[i] += w;
      }
    }

    ds = ds_next;
    std::fill(dctx.begin(), dctx.end(), 0.0);

    // output softmax; only the target column of vdist receives gradient
    if (sc.target < V) {
      const double dPv = coef * sc.f.pgen;
      const double sdot = dPv * pv;
      for (std::size_t w = 0; w < V; ++w) dlogits[w] = -sc.f.vdist[w] * sdot;
      dlogits[sc.target] += pv * dPv;
      k::outer_add(dlogits.data(), sc.f.sc.data(), g + pl.w_out, V, 3 * dh);
      k::axpy(1.0, dlogits.data(), g + pl.b_out, V);
      std::fill(dsc.begin(), dsc.end(), 0.0);
      k::matvec_t_add(p + pl.w_out, dlogits.data(), dsc.data(), V, 3 * dh);
      for (std::size_t j = 0; j < dh; ++j) ds[j] += dsc[j];
      for (std::size_t j = 0; j < 2 * dh; ++j) dctx[j] += dsc[dh + j];
    }

    // p_gen = sigmoid(...)
    const double dz = dg * sc.f.pgen * (1.0 - sc.f.pgen);
    std::fill(dx.begin(), dx.end(), 0.0);
    k::axpy(dz, sc.f.ctx.data(), g + pl.pgen_ctx, 2 * dh);
    k::axpy(dz, p + pl.pgen_ctx, dctx.data(), 2 * dh);
    k::axpy(dz, sc.s.data(), g + pl.pgen_s, dh);
    k::axpy(dz, p + pl.pgen_s, ds.data(), dh);
    k::axpy(dz, x, g + pl.pgen_x, de);
    k::axpy(dz, p + pl.pgen_x, dx.data(), de);
    g[pl.pgen_b] += dz;

    // ctx = sum_i a_i h_i
    for (std::size_t i = 0; i < n; ++i) {
      da[i] += k::dot(dctx.data(), c.enc.states.data() + i * 2 * dh, 2 * dh);
      k::axpy(sc.f.att[i], dctx.data(), dH.data() + i * 2 * dh, 2 * dh);
    }

    // a = softmax(e)
    const double adot = k::dot(da.data(), sc.f.att.data(), n);
    std::fill(dqsum.begin(), dqsum.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double dei = sc.f.att[i] * (da[i] - adot);
      const double* tq = sc.f.tanhq.data() + i * dh;
      for (std::size_t j = 0; j < dh; ++j)
        dq[j] = dei * p[pl.attn_v + j] * (1.0 - tq[j] * tq[j]);
      k::axpy(1.0, dq.data(), dP.data() + i * dh, dh);
      k::vadd(dqsum.data(), dq.data(), dqsum.data(), dh);
      k::axpy(sc.cov[i], dq.data(), g + pl.attn_wc, dh);
      dc[i] += k::dot(dq.data(), p + pl.attn_wc, dh);
      k::axpy(dei, tq, g + pl.attn_v, dh);
    }
    k::outer_add(dqsum.data(), sc.s.data(), g + pl.attn_ws, dh, dh);
    k::matvec_t_add(p + pl.attn_ws, dqsum.data(), ds.data(), dh, dh);
    k::axpy(1.0, dqsum.data(), g + pl.attn_b, dh);

    // decoder GRU and the input embedding
    const double* hp = t == 0 ? c.enc.s0.data() : c.steps[t - 1].s.data();
    std::fill(dhp.begin(), dhp.end(), 0.0);
    gru_backward(p, g, pl.dec, x, hp, sc.gru, ds.data(), dhp.data(),
                 dx.data());
    k::axpy(1.0, dx.data(), g + pl.embedding + sc.in_row * de, de);

    ds_next = dhp;
    dcov = dc;
  }

  // s0 = tanh(W_red [fwd_n; bwd_1] + b_red)
  std::vector<double> dr(dh), dred(2 * dh, 0.0);
  for (std::size_t j = 0; j < dh; ++j)
    dr[j] = ds_next[j] * (1.0 - c.enc.s0[j] * c.enc.s0[j]);
  k::outer_add(dr.data(), c.enc_c.red_in.data(), g + pl.w_red, dh, 2 * dh);
  k::axpy(1.0, dr.data(), g + pl.b_red, dh);
  k::matvec_t_add(p + pl.w_red, dr.data(), dred.data(), dh, 2 * dh);

  // attention projections P_i = W_h h_i
  for (std::size_t i = 0; i < n; ++i) {
    k::outer_add(dP.data() + i * dh, c.enc.states.data() + i * 2 * dh,
                 g + pl.attn_wh, dh, 2 * dh);
    k::matvec_t_add(p + pl.attn_wh, dP.data() + i * dh,
                    dH.data() + i * 2 * dh, dh, 2 * dh);
  }

  // encoder, forward direction (reverse order)
  std::vector<double> dxsrc(n * de, 0.0);
  std::vector<double> carry(dh, 0.0), dcur(dh);
  for (std::size_t i = n; i-- > 0;) {
    dcur = carry;
    for (std::size_t j = 0; j < dh; ++j) dcur[j] += dH[i * 2 * dh + j];
    if (i == n - 1)
      for (std::size_t j = 0; j < dh; ++j) dcur[j] += dred[j];
    std::fill(carry.begin(), carry.end(), 0.0);
    gru_backward(p, g, pl.enc_fwd, c.enc_c.x.data() + i * de,
                 c.enc_c.fstate.data() + i * dh, c.enc_c.fwd[i], dcur.data(),
                 carry.data(), dxsrc.data() + i * de);
  }
  // encoder, backward direction
  std::fill(carry.begin(), carry.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    dcur = carry;
    for (std::size_t j = 0; j < dh; ++j) dcur[j] += dH[i * 2 * dh + dh + j];
    if (i == 0)
      for (std::size_t j = 0; j < dh; ++j) dcur[j] += dred[dh + j];
    std::fill(carry.begin(), carry.end(), 0.0);
    gru_backward(p, g, pl.enc_bwd, c.enc_c.x.data() + i * de,
                 c.enc_c.bstate.data() + (i + 1) * dh, c.enc_c.bwd[i],
                 dcur.data(), carry.data(), dxsrc.data() + i * de);
  }
  for (std::size_t i = 0; i < n; ++i)
    k::axpy(1.0, dxsrc.data() + i * de, g + pl.embedding + c.enc_c.rows[i] * de,
            de);

  return loss;
}

}  // namespace

LossBreakdown sequence_loss(const Seq2SeqModel& model,
                            const std::vector<std::string>& source,
                            const std::vector<std::string>& target) {
  SeqCache cache;
  return forward_sequence(model, source, target, model.cov_weight, cache);
}

GradResult loss_and_gradient(const Seq2SeqModel& model,
                             const std::vector<std::string>& source,
                             const std::vector<std::string>& target,
                             double cov_weight) {
  GradResult r;
  r.grad.assign(model.layout.total, 0.0);
  r.loss = backward_into(model, source, target, cov_weight, r.grad.data());
  return r;
}

// ---- training ------------------------------------------------------------------

void train(Seq2SeqModel& model, const std::vector<TrainPair>& data,
           const TrainConfig& cfg, TrainTrace* trace) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch_size == 0)
    throw std::invalid_argument("train: batch_size must be positive");
  for (const auto& ex : data)
    if (ex.source.empty() || ex.target.empty())
      throw std::invalid_argument("train: empty source or target in dataset");

  const std::size_t np = model.layout.total;
  std::vector<double> grad(np), mst(np, 0.0), vst(np, 0.0);
  std::mt19937_64 rng(cfg.seed);
  if (trace) trace->step_loss.clear();

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const bool cov_on = static_cast<double>(step) >
                        cfg.coverage_phase_in * static_cast<double>(cfg.steps);
    const double lam = cov_on ? model.cov_weight : 0.0;

    std::fill(grad.begin(), grad.end(), 0.0);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto& ex = data[rng() % data.size()];
      batch_loss +=
          backward_into(model, ex.source, ex.target, lam, grad.data()).total;
    }
    const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
    batch_loss *= inv_b;
    k::scale(grad.data(), np, inv_b);
    if (!std::isfinite(batch_loss))
      throw std::runtime_error("pgen train: non-finite loss at step " +
                               std::to_string(step) +
                               "; reduce learning_rate");

    const double norm = std::sqrt(k::dot(grad.data(), grad.data(), np));
    if (!std::isfinite(norm))
      throw std::runtime_error("pgen train: non-finite gradient at step " +
                               std::to_string(step) +
                               "; reduce learning_rate");
    if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm)
      k::scale(grad.data(), np, cfg.clip_norm / norm);

    const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    k::adam_step(model.params.data(), mst.data(), vst.data(), grad.data(), np,
                 cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps, bias1,
                 bias2);
    if (trace) trace->step_loss.push_back(batch_loss);
  }
}

// ---- decoding -------------------------------------------------------------------

namespace detail {

bool beam_rank_less(const BeamRank& a, const BeamRank& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.token != b.token) return a.token < b.token;
  return a.parent < b.parent;
}

bool beam_allows(const std::vector<double>& probs, std::size_t token,
                 std::size_t out_len, const BeamParams& bp) {
  if (token == bp.stop_id) return out_len >= bp.min_len;
  for (std::size_t banned : bp.banned)
    if (token == banned) return false;
  if (token == bp.unk_id && bp.first_extended < probs.size()) {
    double best_copy = 0.0;
    for (std::size_t i = bp.first_extended; i < probs.size(); ++i)
      best_copy = std::max(best_copy, probs[i]);
    if (best_copy >= probs[token]) return false;
  }
  return true;
}

bool beam_better(double norm_a, const std::vector<std::size_t>& toks_a,
                 double norm_b, const std::vector<std::size_t>& toks_b) {
  if (norm_a != norm_b) return norm_a > norm_b;
  return toks_a < toks_b;
}

}  // namespace detail

std::vector<std::string> beam_search_decode(const Seq2SeqModel& model,
                                            const std::vector<std::string>& source,
                                            const BeamConfig& cfg) {
  if (source.empty())
    throw std::invalid_argument("beam_search_decode: empty source");
  const SourceEncoding src = encode_source(model.vocab, source);
  const EncoderOut enc = encode(model, src.ids);
  const std::size_t n = src.ids.size(), dh = model.d_h, V = model.vocab.size();
  std::vector<double> p_enc;
  project_encoder(model, enc.states, n, p_enc);
  const double* p = model.params.data();

  struct DecState {
    std::vector<double> s, cov;
  };
  DecState init{enc.s0, std::vector<double>(n, 0.0)};

  std::function<BeamStep<DecState>(const DecState&, std::size_t)> step =
      [&](const DecState& st, std::size_t prev) {
        const double* x =
            p + model.layout.embedding + emb_row(model.vocab, prev) * model.d_e;
        BeamStep<DecState> r;
        r.state.s.assign(dh, 0.0);
        GruCacheStep gc;
        gru_forward(p, model.layout.dec, x, st.s.data(), r.state.s.data(), gc);
        StepForward f;
        step_forward(model, r.state.s.data(), st.cov.data(), x, enc.states, n,
                     p_enc, f);
        mix_final(model, src, f, r.probs);
        r.state.cov = st.cov;
        k::axpy(1.0, f.att.data(), r.state.cov.data(), n);
        return r;
      };

  BeamParams bp;
  bp.beam_width = cfg.beam_width;
  bp.max_len = cfg.max_len;
  bp.min_len = cfg.min_len;
  bp.first_extended = V;
  bp.banned = {Vocab::kPad, Vocab::kStart};
  const std::vector<std::size_t> ids = beam_search<DecState>(init, step, bp);

  std::vector<std::string> words;
  words.reserve(ids.size());
  for (std::size_t id : ids)
    words.push_back(id < V ? model.vocab.word(id) : src.oov_words[id - V]);
  return words;
}

// ---- serialization ----------------------------------------------------------------

namespace {
constexpr char kMagic[] = "PGEN/1\n";
}

void save_model(const Seq2SeqModel& model, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic) - 1);
  binio::write_u64(out, model.vocab.size());
  for (std::size_t i = 0; i < model.vocab.size(); ++i)
    binio::write_string(out, model.vocab.word(i));
  binio::write_u64(out, model.d_e);
  binio::write_u64(out, model.d_h);
  binio::write_f64(out, model.cov_weight);
  binio::write_f64_array(out, model.params);
}

void save_model(const Seq2SeqModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw binio::SerializeError(path + ": cannot open for writing");
  save_model(model, out);
  if (!out) throw binio::SerializeError(path + ": write failed");
}

Seq2SeqModel load_model(std::istream& in, const std::string& source) {
  binio::expect_magic(in, std::string(kMagic, sizeof(kMagic) - 1), "PGEN/1");
  const std::uint64_t vsize = binio::read_u64(in);
  if (vsize < 4) throw binio::SerializeError(source + ": vocab too small");
  std::vector<std::string> words;
  words.reserve(vsize);
  for (std::uint64_t i = 0; i < vsize; ++i)
    words.push_back(binio::read_string(in));
  for (std::size_t i = 0; i < 4; ++i)
    if (words[i] != kReserved[i])
      throw binio::SerializeError(source + ": bad reserved token");

  Seq2SeqModel m;
  try {
    m.vocab = Vocab({words.begin() + 4, words.end()});
  } catch (const std::invalid_argument& e) {
    throw binio::SerializeError(source + ": " + e.what());
  }
  m.d_e = binio::read_u64(in);
  m.d_h = binio::read_u64(in);
  if (m.d_e == 0 || m.d_h == 0)
    throw binio::SerializeError(source + ": bad dimensions");
  m.cov_weight = binio::read_f64(in);
  if (!(m.cov_weight >= 0.0) || !std::isfinite(m.cov_weight))
    throw binio::SerializeError(source + ": bad coverage weight");
  m.layout = make_layout(m.vocab.size(), m.d_e, m.d_h);
  m.params = binio::read_f64_array(in);
  if (m.params.size() != m.layout.total)
    throw binio::SerializeError(source + ": parameter array size mismatch");
  for (double w : m.params)
    if (!std::isfinite(w))
      throw binio::SerializeError(source + ": non-finite parameter");
  return m;
}

Seq2SeqModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw binio::SerializeError(path + ": cannot open");
  return load_model(in, path);
}

}  // namespace dsum::pgen
