// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0

#include "dsum/crf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "dsum/binio.hpp"
#include "dsum/kernels.hpp"

namespace dsum::crf {

namespace ker = dsum::kernels;

std::size_t FeatureDict::add(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  const std::size_t id = names_.size();
  names_.push_back(name);
  index_.emplace(name, id);
  return id;
}

std::optional<std::size_t> FeatureDict::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

CrfModel make_model(TagSet tagset, FeatureConfig cfg) {
  CrfModel m;
  m.tagset = std::move(tagset);
  m.feature_config = cfg;
  const std::size_t T = m.num_tags();
  m.transition.assign((T + 1) * T, 0.0);
  return m;
}

std::vector<std::string> feature_strings(const Conversation& conv,
                                         std::size_t i,
                                         const FeatureConfig& cfg) {
  if (i >= conv.utterances.size())
    throw std::out_of_range("feature_strings: position " + std::to_string(i) +
                            " out of range");
  const Utterance& utt = conv.utterances[i];
  std::vector<std::string> out;
  if (cfg.first_utterance && i == 0) out.push_back("first_utt");
  if (cfg.speaker) out.push_back("speaker=" + utt.speaker);
  if (cfg.words) {
    std::set<std::string> words(utt.tokens.begin(), utt.tokens.end());
    for (const auto& w : words) out.push_back("word=" + w);
  }
  if (cfg.pos) {
    const std::vector<std::string>& tags =
        utt.pos_tags.empty() ? fallback_pos_tag(utt.tokens) : utt.pos_tags;
    std::set<std::string> distinct(tags.begin(), tags.end());
    for (const auto& p : distinct) out.push_back("pos=" + p);
  }
  return out;
}

FeatureVector to_feature_vector(const FeatureDict& dict,
                                const std::vector<std::string>& names) {
  FeatureVector fv;
  fv.active.reserve(names.size());
  for (const auto& name : names)
    if (auto id = dict.find(name)) fv.active.push_back(*id);
  std::sort(fv.active.begin(), fv.active.end());
  fv.active.erase(std::unique(fv.active.begin(), fv.active.end()),
                  fv.active.end());
  return fv;
}

FeatureVector extract_features(const CrfModel& model, const Conversation& conv,
                               std::size_t i) {
  return to_feature_vector(model.features,
                           feature_strings(conv, i, model.feature_config));
}

double score_emission(const CrfModel& model, const FeatureVector& fv,
                      std::size_t tag) {
  const std::size_t T = model.num_tags();
  double s = 0.0;
  for (std::size_t f : fv.active) s += model.emission[f * T + tag];
  return s;
}

namespace {

// per-conversation DP tables shared by the inference routines
struct Lattice {
  std::size_t n = 0;
  std::size_t T = 0;
  std::vector<FeatureVector> fvs;  // n
  std::vector<double> escore;      // n x T emission scores
  std::vector<double> trans_t;     // T x T, trans_t[y*T + prev] = w(prev -> y)
};

Lattice build_lattice(const CrfModel& model, const Conversation& conv) {
  if (conv.utterances.empty())
    throw std::invalid_argument("crf: empty conversation");
  Lattice lat;
  lat.n = conv.utterances.size();
  lat.T = model.num_tags();
  lat.fvs.reserve(lat.n);
  lat.escore.assign(lat.n * lat.T, 0.0);
  for (std::size_t t = 0; t < lat.n; ++t) {
    lat.fvs.push_back(extract_features(model, conv, t));
    double* row = lat.escore.data() + t * lat.T;
    for (std::size_t f : lat.fvs.back().active)
      ker::axpy(1.0, model.emission.data() + f * lat.T, row, lat.T);
  }
  lat.trans_t.resize(lat.T * lat.T);
  for (std::size_t y = 0; y < lat.T; ++y)
    for (std::size_t prev = 0; prev < lat.T; ++prev)
      lat.trans_t[y * lat.T + prev] = model.transition[prev * lat.T + y];
  return lat;
}

// alpha[t*T + y] = log sum over prefixes ending in y at t
std::vector<double> forward(const CrfModel& model, const Lattice& lat) {
  const std::size_t T = lat.T;
  std::vector<double> alpha(lat.n * T);
  ker::vadd(model.transition.data() + model.start_state() * T,
            lat.escore.data(), alpha.data(), T);
  std::vector<double> tmp(T);
  for (std::size_t t = 1; t < lat.n; ++t) {
    const double* prev = alpha.data() + (t - 1) * T;
    double* cur = alpha.data() + t * T;
    for (std::size_t y = 0; y < T; ++y) {
      ker::vadd(prev, lat.trans_t.data() + y * T, tmp.data(), T);
      cur[y] = lat.escore[t * T + y] + ker::logsumexp(tmp.data(), T);
    }
  }
  return alpha;
}

// beta[t*T + y] = log sum over suffixes given y at t
std::vector<double> backward(const CrfModel& model, const Lattice& lat) {
  const std::size_t T = lat.T;
  std::vector<double> beta(lat.n * T, 0.0);
  std::vector<double> tmp(T), tail(T);
  for (std::size_t t = lat.n - 1; t-- > 0;) {
    ker::vadd(lat.escore.data() + (t + 1) * T, beta.data() + (t + 1) * T,
              tail.data(), T);
    for (std::size_t prev = 0; prev < T; ++prev) {
      ker::vadd(model.transition.data() + prev * T, tail.data(), tmp.data(), T);
      beta[t * T + prev] = ker::logsumexp(tmp.data(), T);
    }
  }
  return beta;
}

std::size_t gold_index(const CrfModel& model, const Utterance& utt) {
  if (utt.da_tag.empty())
    throw std::invalid_argument("missing gold label on utterance " +
                                std::to_string(utt.index));
  return model.tagset.index_of(utt.da_tag);
}

}  // namespace

double sequence_score(const CrfModel& model, const Conversation& conv,
                      const std::vector<std::size_t>& tags) {
  if (tags.size() != conv.utterances.size())
    throw std::invalid_argument("sequence_score: tag sequence length mismatch");
  double score = 0.0;
  std::size_t prev = model.start_state();
  for (std::size_t t = 0; t < tags.size(); ++t) {
    score += model.trans_weight(prev, tags[t]);
    score += score_emission(model, extract_features(model, conv, t), tags[t]);
    prev = tags[t];
  }
  return score;
}

double log_partition(const CrfModel& model, const Conversation& conv) {
  const Lattice lat = build_lattice(model, conv);
  const auto alpha = forward(model, lat);
  return ker::logsumexp(alpha.data() + (lat.n - 1) * lat.T, lat.T);
}

std::pair<std::vector<std::size_t>, double> viterbi_decode(
    const CrfModel& model, const Conversation& conv) {
  const Lattice lat = build_lattice(model, conv);
  const std::size_t T = lat.T;
  std::vector<double> delta(lat.n * T);
  std::vector<std::size_t> back(lat.n * T, 0);
  ker::vadd(model.transition.data() + model.start_state() * T,
            lat.escore.data(), delta.data(), T);
  for (std::size_t t = 1; t < lat.n; ++t) {
    const double* prev = delta.data() + (t - 1) * T;
    for (std::size_t y = 0; y < T; ++y) {
      // strict > keeps the lowest prev index on ties
      double best = prev[0] + lat.trans_t[y * T + 0];
      std::size_t arg = 0;
      for (std::size_t p = 1; p < T; ++p) {
        const double s = prev[p] + lat.trans_t[y * T + p];
        if (s > best) {
          best = s;
          arg = p;
        }
      }
      delta[t * T + y] = best + lat.escore[t * T + y];
      back[t * T + y] = arg;
    }
  }
  const double* last = delta.data() + (lat.n - 1) * T;
  std::size_t arg = 0;
  for (std::size_t y = 1; y < T; ++y)
    if (last[y] > last[arg]) arg = y;
  std::vector<std::size_t> tags(lat.n);
  tags[lat.n - 1] = arg;
  for (std::size_t t = lat.n - 1; t-- > 0;)
    tags[t] = back[(t + 1) * T + tags[t + 1]];
  return {tags, sequence_score(model, conv, tags)};
}

Marginals posterior_marginals(const CrfModel& model, const Conversation& conv) {
  const Lattice lat = build_lattice(model, conv);
  const std::size_t T = lat.T;
  const auto alpha = forward(model, lat);
  const auto beta = backward(model, lat);
  const double log_z = ker::logsumexp(alpha.data() + (lat.n - 1) * T, T);

  Marginals marg;
  marg.num_tags = T;
  marg.node.resize(lat.n * T);
  for (std::size_t t = 0; t < lat.n; ++t)
    for (std::size_t y = 0; y < T; ++y)
      marg.node[t * T + y] = std::exp(alpha[t * T + y] + beta[t * T + y] - log_z);
  if (lat.n > 1) marg.edge.resize((lat.n - 1) * T * T);
  for (std::size_t t = 1; t < lat.n; ++t) {
    double* block = marg.edge.data() + (t - 1) * T * T;
    for (std::size_t prev = 0; prev < T; ++prev)
      for (std::size_t y = 0; y < T; ++y)
        block[prev * T + y] =
            std::exp(alpha[(t - 1) * T + prev] + model.trans_weight(prev, y) +
                     lat.escore[t * T + y] + beta[t * T + y] - log_z);
  }
  return marg;
}

namespace {

Objective objective_over(const CrfModel& model,
                         const std::vector<const Conversation*>& batch,
                         double l2_lambda) {
  const std::size_t T = model.num_tags();
  Objective obj;
  obj.emission_grad.assign(model.emission.size(), 0.0);
  obj.transition_grad.assign(model.transition.size(), 0.0);

  std::vector<double> diff(T);
  for (const Conversation* conv : batch) {
    const Lattice lat = build_lattice(model, *conv);
    const auto alpha = forward(model, lat);
    const auto beta = backward(model, lat);
    const double log_z = ker::logsumexp(alpha.data() + (lat.n - 1) * T, T);

    std::vector<std::size_t> gold(lat.n);
    for (std::size_t t = 0; t < lat.n; ++t)
      gold[t] = gold_index(model, conv->utterances[t]);

    obj.value += sequence_score(model, *conv, gold) - log_z;

    for (std::size_t t = 0; t < lat.n; ++t) {
      // diff = onehot(gold) - node marginal at t
      for (std::size_t y = 0; y < T; ++y)
        diff[y] = -std::exp(alpha[t * T + y] + beta[t * T + y] - log_z);
      diff[gold[t]] += 1.0;
      for (std::size_t f : lat.fvs[t].active)
        ker::axpy(1.0, diff.data(), obj.emission_grad.data() + f * T, T);
      if (t == 0)
        ker::axpy(1.0, diff.data(),
                  obj.transition_grad.data() + model.start_state() * T, T);
    }

    std::vector<double> tail(T);
    for (std::size_t t = 1; t < lat.n; ++t) {
      ker::vadd(lat.escore.data() + t * T, beta.data() + t * T, tail.data(), T);
      for (std::size_t prev = 0; prev < T; ++prev) {
        double* grow = obj.transition_grad.data() + prev * T;
        const double* trow = model.transition.data() + prev * T;
        const double a = alpha[(t - 1) * T + prev];
        for (std::size_t y = 0; y < T; ++y)
          grow[y] -= std::exp(a + trow[y] + tail[y] - log_z);
      }
      obj.transition_grad[gold[t - 1] * T + gold[t]] += 1.0;
    }
  }

  if (l2_lambda != 0.0) {
    const double sq =
        ker::dot(model.emission.data(), model.emission.data(),
                 model.emission.size()) +
        ker::dot(model.transition.data(), model.transition.data(),
                 model.transition.size());
    obj.value -= 0.5 * l2_lambda * sq;
    ker::axpy(-l2_lambda, model.emission.data(), obj.emission_grad.data(),
              model.emission.size());
    ker::axpy(-l2_lambda, model.transition.data(), obj.transition_grad.data(),
              model.transition.size());
  }
  return obj;
}

}  // namespace

Objective log_likelihood_and_gradient(const CrfModel& model,
                                      const std::vector<Conversation>& batch,
                                      double l2_lambda) {
  std::vector<const Conversation*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& c : batch) ptrs.push_back(&c);
  return objective_over(model, ptrs, l2_lambda);
}

CrfModel train(const std::vector<Conversation>& train_set,
               const std::vector<Conversation>& dev_set, const TagSet& tagset,
               const TrainConfig& cfg, const FeatureConfig& features) {
  if (train_set.empty())
    throw std::invalid_argument("crf train: empty training set");
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("crf train: learning_rate must be positive");
  if (cfg.l2_lambda < 0.0)
    throw std::invalid_argument("crf train: l2_lambda must be non-negative");

  CrfModel model = make_model(tagset, features);
  for (const auto& conv : train_set)
    for (std::size_t i = 0; i < conv.utterances.size(); ++i)
      for (const auto& name : feature_strings(conv, i, features))
        model.features.add(name);
  const std::size_t T = model.num_tags();
  model.emission.assign(model.features.size() * T, 0.0);

  if (cfg.epochs == 0) return model;

  const std::size_t batch_size = cfg.batch_size > 0 ? cfg.batch_size : 1;
  std::vector<double> em_m(model.emission.size(), 0.0);
  std::vector<double> em_v(model.emission.size(), 0.0);
  std::vector<double> tr_m(model.transition.size(), 0.0);
  std::vector<double> tr_v(model.transition.size(), 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_acc = -1.0;
  std::vector<double> best_em, best_tr;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t off = 0; off < order.size(); off += batch_size) {
      std::vector<const Conversation*> batch;
      for (std::size_t i = off; i < std::min(off + batch_size, order.size());
           ++i)
        batch.push_back(&train_set[order[i]]);
      Objective obj = objective_over(model, batch, cfg.l2_lambda);
      if (!std::isfinite(obj.value))
        throw std::runtime_error(
            "crf train: non-finite objective at epoch " +
            std::to_string(epoch) + " (value=" + std::to_string(obj.value) +
            "); reduce learning_rate");
      // adam_step descends, so feed the negated ascent direction
      ker::scale(obj.emission_grad.data(), obj.emission_grad.size(), -1.0);
      ker::scale(obj.transition_grad.data(), obj.transition_grad.size(), -1.0);
      ++step;
      const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      ker::adam_step(model.emission.data(), em_m.data(), em_v.data(),
                     obj.emission_grad.data(), model.emission.size(),
                     cfg.learning_rate, beta1, beta2, eps, bias1, bias2);
      ker::adam_step(model.transition.data(), tr_m.data(), tr_v.data(),
                     obj.transition_grad.data(), model.transition.size(),
                     cfg.learning_rate, beta1, beta2, eps, bias1, bias2);
    }
    if (!dev_set.empty()) {
      const double acc = evaluate_accuracy(model, dev_set);
      if (acc > best_acc) {
        best_acc = acc;
        best_em = model.emission;
        best_tr = model.transition;
        since_best = 0;
      } else if (++since_best >= cfg.early_stop_patience) {
        break;
      }
    }
  }
  if (!dev_set.empty() && best_acc >= 0.0) {
    model.emission = std::move(best_em);
    model.transition = std::move(best_tr);
  }
  return model;
}

double evaluate_accuracy(const CrfModel& model,
                         const std::vector<Conversation>& test_set) {
  std::size_t total = 0, correct = 0;
  for (const auto& conv : test_set) {
    if (conv.utterances.empty()) continue;
    const auto [tags, score] = viterbi_decode(model, conv);
    for (std::size_t t = 0; t < tags.size(); ++t) {
      const std::size_t gold = gold_index(model, conv.utterances[t]);
      ++total;
      if (tags[t] == gold) ++correct;
    }
  }
  if (total == 0)
    throw std::invalid_argument("evaluate_accuracy: empty test set");
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<Conversation> tag_conversations(
    const CrfModel& model, const std::vector<Conversation>& convs) {
  std::vector<Conversation> out = convs;
  for (auto& conv : out) {
    if (conv.utterances.empty()) continue;
    const auto [tags, score] = viterbi_decode(model, conv);
    for (std::size_t t = 0; t < tags.size(); ++t)
      conv.utterances[t].da_tag = model.tagset.tag(tags[t]);
  }
  return out;
}

// ---- serialization ----------------------------------------------------------

namespace {
constexpr char kMagic[] = "CRFMODEL/1\n";
}

void save_model(const CrfModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw binio::SerializeError(path + ": cannot open for writing");
  out.write(kMagic, sizeof(kMagic) - 1);
  const std::size_t T = model.num_tags();
  binio::write_u64(out, T);
  for (std::size_t i = 0; i < T; ++i) {
    binio::write_string(out, model.tagset.tag(i));
    binio::write_u8(out, static_cast<std::uint8_t>(model.tagset.role_at(i)));
  }
  binio::write_u64(out, model.features.size());
  for (std::size_t f = 0; f < model.features.size(); ++f)
    binio::write_string(out, model.features.name(f));
  binio::write_u8(out, model.feature_config.first_utterance);
  binio::write_u8(out, model.feature_config.speaker);
  binio::write_u8(out, model.feature_config.words);
  binio::write_u8(out, model.feature_config.pos);
  binio::write_f64_array(out, model.emission);
  binio::write_f64_array(out, model.transition);
  if (!out) throw binio::SerializeError(path + ": write failed");
}

CrfModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw binio::SerializeError(path + ": cannot open");
  binio::expect_magic(in, std::string(kMagic, sizeof(kMagic) - 1), "CRFMODEL/1");
  const std::uint64_t T = binio::read_u64(in);
  std::vector<std::pair<std::string, Role>> entries;
  entries.reserve(T);
  for (std::uint64_t i = 0; i < T; ++i) {
    std::string tag = binio::read_string(in);
    const std::uint8_t role = binio::read_u8(in);
    if (role > static_cast<std::uint8_t>(Role::Other))
      throw binio::SerializeError(path + ": bad role byte");
    entries.emplace_back(std::move(tag), static_cast<Role>(role));
  }
  CrfModel model = make_model(TagSet(std::move(entries)));
  const std::uint64_t F = binio::read_u64(in);
  for (std::uint64_t f = 0; f < F; ++f)
    model.features.add(binio::read_string(in));
  if (model.features.size() != F)
    throw binio::SerializeError(path + ": duplicate feature names");
  model.feature_config.first_utterance = binio::read_u8(in) != 0;
  model.feature_config.speaker = binio::read_u8(in) != 0;
  model.feature_config.words = binio::read_u8(in) != 0;
  model.feature_config.pos = binio::read_u8(in) != 0;
  model.emission = binio::read_f64_array(in);
  model.transition = binio::read_f64_array(in);
  if (model.emission.size() != F * T)
    throw binio::SerializeError(path + ": emission array size mismatch");
  if (model.transition.size() != (T + 1) * T)
    throw binio::SerializeError(path + ": transition array size mismatch");
  for (const auto* arr : {&model.emission, &model.transition})
    for (double w : *arr)
      if (!std::isfinite(w))
        throw binio::SerializeError(path + ": non-finite weight");
  return model;
}

}  // namespace dsum::crf
