// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0
//
// Linear-chain CRF over utterance sequences. Inference is exact and runs in
// log space throughout (log-sum-exp forward/backward, max-sum Viterbi).

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dsum/corpus.hpp"

namespace dsum::crf {

// Binary features; ids are unique, sorted ascending.
struct FeatureVector {
  std::vector<std::size_t> active;
};

// Gates for the per-utterance feature families.
struct FeatureConfig {
  bool first_utterance = true;
  bool speaker = true;
  bool words = true;
  bool pos = true;
};

// feature string <-> feature id bijection
class FeatureDict {
 public:
  std::size_t add(const std::string& name);
  std::optional<std::size_t> find(const std::string& name) const;
  const std::string& name(std::size_t id) const { return names_[id]; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct CrfModel {
  TagSet tagset;
  FeatureDict features;
  FeatureConfig feature_config;
  // |F| x |T| row-major: weight of feature f for tag y at emission[f*T + y]
  std::vector<double> emission;
  // (|T|+1) x |T| row-major; row |T| holds the start transitions
  std::vector<double> transition;

  std::size_t num_tags() const { return tagset.size(); }
  std::size_t start_state() const { return tagset.size(); }
  double emit_weight(std::size_t f, std::size_t y) const {
    return emission[f * num_tags() + y];
  }
  double trans_weight(std::size_t prev, std::size_t y) const {
    return transition[prev * num_tags() + y];
  }
};

// zero-weight model over the given tag set (features added separately)
CrfModel make_model(TagSet tagset, FeatureConfig cfg = {});

struct TrainConfig {
  double l2_lambda = 0.1;
  double learning_rate = 0.05;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  std::size_t early_stop_patience = 5;
  std::size_t batch_size = 8;
};

// The raw feature strings for utterance i: "first_utt" (only at i == 0),
// "speaker=<s>", one "word=<w>" per distinct token, one "pos=<p>" per
// distinct POS tag (input tags when present, fallback tagger otherwise).
// Deterministic order: first_utt, speaker, sorted words, sorted pos.
std::vector<std::string> feature_strings(const Conversation& conv,
                                         std::size_t i,
                                         const FeatureConfig& cfg);

// Maps names through the dictionary; unknown names are dropped.
FeatureVector to_feature_vector(const FeatureDict& dict,
                                const std::vector<std::string>& names);

// feature_strings + to_feature_vector against the model's dictionary.
// Throws std::out_of_range when i is not a valid position.
FeatureVector extract_features(const CrfModel& model, const Conversation& conv,
                               std::size_t i);

// sum of emission weights of the active features for one tag
double score_emission(const CrfModel& model, const FeatureVector& fv,
                      std::size_t tag);

// total score of a full tag sequence (start transition + emissions + transitions)
double sequence_score(const CrfModel& model, const Conversation& conv,
                      const std::vector<std::size_t>& tags);

// log of the summed exp-scores over all |T|^n tag sequences
double log_partition(const CrfModel& model, const Conversation& conv);

// Max-scoring tag sequence and its score. Ties break toward the lowest tag
// index at each backtrack step.
std::pair<std::vector<std::size_t>, double> viterbi_decode(
    const CrfModel& model, const Conversation& conv);

struct Marginals {
  std::size_t num_tags = 0;
  // node[t*T + y] = P(y at t)
  std::vector<double> node;
  // edge[(t-1)*T*T + prev*T + y] = P(prev at t-1, y at t), for t in 1..n-1
  std::vector<double> edge;
};

Marginals posterior_marginals(const CrfModel& model, const Conversation& conv);

struct Objective {
  double value = 0.0;
  std::vector<double> emission_grad;
  std::vector<double> transition_grad;
};

// value = sum over batch of (gold score - log partition) - l2/2 * ||w||^2,
// gradient = empirical feature counts - expected counts - l2 * w.
// Every utterance must carry a gold da_tag.
Objective log_likelihood_and_gradient(const CrfModel& model,
                                      const std::vector<Conversation>& batch,
                                      double l2_lambda);

// Mini-batch Adam ascent on the regularized log-likelihood. The feature
// dictionary is built from the train set; dev enables early stopping on
// accuracy and the best dev model seen is returned. Deterministic given
// cfg.seed. Throws std::runtime_error if the loss goes non-finite.
CrfModel train(const std::vector<Conversation>& train_set,
               const std::vector<Conversation>& dev_set, const TagSet& tagset,
               const TrainConfig& cfg, const FeatureConfig& features = {});

// fraction of utterances whose Viterbi tag equals the gold tag
double evaluate_accuracy(const CrfModel& model,
                         const std::vector<Conversation>& test_set);

// apply Viterbi tags to a copy of the conversations
std::vector<Conversation> tag_conversations(
    const CrfModel& model, const std::vector<Conversation>& convs);

// model file, magic CRFMODEL/1
void save_model(const CrfModel& model, const std::string& path);
CrfModel load_model(const std::string& path);

}  // namespace dsum::crf
