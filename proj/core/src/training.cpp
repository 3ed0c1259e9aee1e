#include "mtqa/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace mtqa {

void TrainConfig::validate() const {
  if (lambda_weight < 0.0 || lambda_weight > 1.0)
    throw ArgumentError("lambda must lie in [0,1], got " + std::to_string(lambda_weight));
  if (learning_rate <= 0) throw ArgumentError("learning rate must be positive");
  if (batch_size <= 0) throw ArgumentError("batch size must be positive");
  if (epochs <= 0) throw ArgumentError("epoch count must be positive");
  if (momentum < 0 || momentum >= 1) throw ArgumentError("momentum must lie in [0,1)");
  if (clip_norm <= 0) throw ArgumentError("clip norm must be positive");
}

void RlConfig::validate() const {
  if (learning_rate <= 0) throw ArgumentError("rl learning rate must be positive");
  if (batch_size <= 0) throw ArgumentError("rl batch size must be positive");
  if (replay_capacity == 0) throw ArgumentError("replay capacity must be positive");
  if (curriculum.empty()) throw ArgumentError("curriculum needs at least one stage");
  int prev = 0;
  for (const auto& stage : curriculum) {
    if (stage.max_turns < 1 || stage.epochs < 1)
      throw ArgumentError("curriculum stages need positive turn caps and epoch spans");
    if (stage.max_turns < prev)
      throw ArgumentError("curriculum turn caps must be non-decreasing");
    prev = stage.max_turns;
  }
}

// ---------------------------------------------------------------------------
// Turn example construction (teacher forcing)
// ---------------------------------------------------------------------------

namespace {

std::vector<Span> mention_spans_of_type(const AnnotatedSentence& s, const std::string& type) {
  std::vector<Span> spans;
  for (const auto& m : s.mentions)
    if (m.type == type) spans.push_back(m.span);
  return spans;
}

}  // namespace

TrainingData build_turn_examples(const Corpus& corpus, const TemplateSet& templates,
                                 const Schema& schema, QuestionMode mode, uint64_t seed,
                                 bool mismatched_fill_negatives) {
  TrainingData data;
  Rng rng(seed);
  for (size_t si = 0; si < corpus.size(); ++si) {
    const auto& sentence = corpus[si];
    if (sentence.tokens.empty()) continue;
    const int n = static_cast<int>(sentence.tokens.size());

    for (const auto& tmpl : templates.entity_questions) {
      TurnExample ex;
      ex.question = render_entity_question(tmpl, mode);
      ex.sentence_index = si;
      ex.gold = gold_labels(mention_spans_of_type(sentence, tmpl.entity_type), n);
      data.head_examples.push_back(std::move(ex));
    }

    for (const auto& chain : templates.chains) {
      const bool hierarchical =
          schema.hierarchical() && chain.slot_names == schema.chain_slots;
      if (hierarchical) {
        // one example per distinct question; several records may share one
        std::map<std::string, std::pair<Question, std::set<Span>>> grouped;
        for (const auto& rec : sentence.records) {
          for (size_t k = 0; k < chain.steps.size(); ++k) {
            std::vector<std::string> fills;
            for (size_t j = 0; j <= k; ++j)
              fills.push_back(rec.slots[j] ? sentence.surface(rec.slots[j]->span) : kAbsentFill);
            Question q = render_relation_question(chain.steps[k], fills, mode,
                                                  static_cast<int>(k) + 1);
            auto& slot = grouped[q.joined() + "\x1f" + std::to_string(k)];
            slot.first = q;
            if (rec.slots[k + 1]) slot.second.insert(rec.slots[k + 1]->span);
          }
        }
        for (const auto& [key, qa] : grouped) {
          TurnExample ex;
          ex.question = qa.first;
          ex.sentence_index = si;
          ex.gold = gold_labels({qa.second.begin(), qa.second.end()}, n);
          data.tail_examples.push_back(std::move(ex));
        }
        if (mismatched_fill_negatives && !sentence.records.empty()) {
          // corrupt one gold prefix with a same-sentence mention of the
          // wrong type so the gold answer becomes NONE
          const auto& rec = sentence.records[rng.below(sentence.records.size())];
          size_t k = static_cast<size_t>(rng.below(chain.steps.size()));
          std::vector<std::string> fills;
          for (size_t j = 0; j <= k; ++j)
            fills.push_back(rec.slots[j] ? sentence.surface(rec.slots[j]->span) : kAbsentFill);
          std::vector<const EntityMention*> wrong_type;
          for (const auto& m : sentence.mentions)
            if (m.type != chain.slot_names[k]) wrong_type.push_back(&m);
          if (!wrong_type.empty()) {
            fills[k] = sentence.surface(wrong_type[rng.below(wrong_type.size())]->span);
            TurnExample ex;
            ex.question = render_relation_question(chain.steps[k], fills, mode,
                                                   static_cast<int>(k) + 1);
            ex.sentence_index = si;
            ex.gold = gold_labels({}, n);
            data.tail_examples.push_back(std::move(ex));
          }
        }
      } else if (chain.steps.size() == 1) {
        const auto& step = chain.steps[0];
        for (const auto& head : sentence.mentions) {
          if (head.type != step.head_type) continue;
          std::set<Span> answers;
          for (const auto& t : sentence.triples) {
            if (t.relation == step.relation && t.head == head && t.tail.type == step.tail_type)
              answers.insert(t.tail.span);
          }
          TurnExample ex;
          ex.question = render_relation_question(step, {sentence.surface(head.span)}, mode, 1);
          ex.sentence_index = si;
          ex.gold = gold_labels({answers.begin(), answers.end()}, n);
          data.tail_examples.push_back(std::move(ex));
        }
      }
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

double turn_loss(const EncoderParams& params, const Vocabulary& vocab, const Question& question,
                 const std::vector<std::string>& context, const std::vector<Tag>& gold,
                 EncoderParams* grad, double weight) {
  if (gold.size() != context.size())
    throw ArgumentError("turn_loss: gold labeling length " + std::to_string(gold.size()) +
                        " does not match context length " + std::to_string(context.size()));
  ModelInput input = build_input(question, context, vocab, params.config.max_len);
  const int nc = input.context_length;

  if (!grad) {
    TagDistribution dist = encode_and_tag(params, input);
    double loss = 0;
    for (int t = 0; t < nc; ++t)
      loss -= dist.log_probs(t, static_cast<int>(gold[static_cast<size_t>(t)]));
    return loss / nc;
  }

  ForwardCache cache;
  TagDistribution dist = encode_and_tag(params, input, cache);
  double loss = 0;
  Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(input.total_length(), kNumTags);
  for (int t = 0; t < nc; ++t) {
    const int g = static_cast<int>(gold[static_cast<size_t>(t)]);
    loss -= dist.log_probs(t, g);
    dlogits.row(input.context_offset + t) = dist.probs.row(t) * (weight / nc);
    dlogits(input.context_offset + t, g) -= weight / nc;
  }
  encoder_backward(params, input.ids, input.context_offset, cache, dlogits, *grad);
  return loss / nc;
}

double joint_loss(const EncoderParams& params, const Vocabulary& vocab, const Corpus& corpus,
                  const std::vector<const TurnExample*>& head_batch,
                  const std::vector<const TurnExample*>& tail_batch, double lambda_weight,
                  EncoderParams* grad) {
  if (lambda_weight < 0.0 || lambda_weight > 1.0)
    throw ArgumentError("joint_loss: lambda must lie in [0,1]");
  if (head_batch.empty() && lambda_weight < 1.0)
    throw ArgumentError("joint_loss: empty head batch with nonzero head weight");
  if (tail_batch.empty() && lambda_weight > 0.0)
    throw ArgumentError("joint_loss: empty tail batch with nonzero tail weight");

  double head_mean = 0;
  if (lambda_weight < 1.0) {
    const double w = (1.0 - lambda_weight) / static_cast<double>(head_batch.size());
    for (const auto* ex : head_batch)
      head_mean += turn_loss(params, vocab, ex->question, corpus[ex->sentence_index].tokens,
                             ex->gold, grad, w);
    head_mean /= static_cast<double>(head_batch.size());
  }
  double tail_mean = 0;
  if (lambda_weight > 0.0) {
    const double w = lambda_weight / static_cast<double>(tail_batch.size());
    for (const auto* ex : tail_batch)
      tail_mean += turn_loss(params, vocab, ex->question, corpus[ex->sentence_index].tokens,
                             ex->gold, grad, w);
    tail_mean /= static_cast<double>(tail_batch.size());
  }
  return (1.0 - lambda_weight) * head_mean + lambda_weight * tail_mean;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

double global_grad_norm(const EncoderParams& grad) {
  double sq = 0;
  for_each_tensor(grad, [&](const std::string&, const Eigen::MatrixXd& m) {
    sq += m.squaredNorm();
  });
  return std::sqrt(sq);
}

SgdOptimizer::SgdOptimizer(const EncoderConfig& config, double learning_rate, double momentum,
                           double clip_norm, std::string kind)
    : velocity_(EncoderParams::zeros(config)),
      second_(EncoderParams::zeros(config)),
      kind_(std::move(kind)),
      learning_rate_(learning_rate),
      momentum_(momentum),
      clip_norm_(clip_norm) {
  if (kind_ != "sgd" && kind_ != "adam")
    throw ArgumentError("unknown optimizer '" + kind_ + "' (expected sgd|adam)");
}

void SgdOptimizer::step(EncoderParams& params, const EncoderParams& grad) {
  last_norm_ = global_grad_norm(grad);
  const double scale = last_norm_ > clip_norm_ ? clip_norm_ / last_norm_ : 1.0;

  std::vector<Eigen::MatrixXd*> vs, ss, gs, ps;
  for_each_tensor(velocity_, [&](const std::string&, Eigen::MatrixXd& m) { vs.push_back(&m); });
  for_each_tensor(second_, [&](const std::string&, Eigen::MatrixXd& m) { ss.push_back(&m); });
  for_each_tensor(const_cast<EncoderParams&>(grad),
                  [&](const std::string&, Eigen::MatrixXd& m) { gs.push_back(&m); });
  for_each_tensor(params, [&](const std::string&, Eigen::MatrixXd& m) { ps.push_back(&m); });

  if (kind_ == "sgd") {
    for (size_t i = 0; i < ps.size(); ++i) {
      *vs[i] = momentum_ * *vs[i] - learning_rate_ * scale * *gs[i];
      *ps[i] += *vs[i];
    }
    return;
  }
  ++step_count_;
  const double b1 = momentum_ > 0 ? momentum_ : 0.9;
  const double b2 = 0.999, eps = 1e-8;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (size_t i = 0; i < ps.size(); ++i) {
    Eigen::MatrixXd g = scale * *gs[i];
    *vs[i] = b1 * *vs[i] + (1 - b1) * g;
    *ss[i] = b2 * ss[i]->array().matrix() + (1 - b2) * g.cwiseProduct(g);
    ps[i]->array() -=
        learning_rate_ * (vs[i]->array() / bc1) / ((ss[i]->array() / bc2).sqrt() + eps);
  }
}

// ---------------------------------------------------------------------------
// Supervised training
// ---------------------------------------------------------------------------

namespace {

void zero_params(EncoderParams& p) {
  for_each_tensor(p, [](const std::string&, Eigen::MatrixXd& m) { m.setZero(); });
}

struct DevScores {
  double entity_f1 = 0;
  double relation_f1 = 0;
  double slot_f1 = 0;
};

DevScores dev_scores(const EncoderParams& params, const Vocabulary& vocab, const Corpus& dev,
                     const TemplateSet& templates, const Schema& schema, QuestionMode mode) {
  LearnedExtractor extractor(&params, &vocab, DecodingConfig{});
  auto extractions = extract_corpus(extractor, templates, schema, dev, mode, 1);
  EvalReport report = evaluate_extractions(extractions, dev, schema);
  DevScores s;
  s.entity_f1 = report.entity_prf.f;
  s.relation_f1 = report.relation_prf.f;
  s.slot_f1 = report.has_slots ? report.slot_all_prf.f : 0.0;
  return s;
}

}  // namespace

TrainResult train_supervised(const Corpus& corpus, const TemplateSet& templates,
                             const Schema& schema, const TrainConfig& config) {
  config.validate();
  schema.validate();
  {
    auto diagnostics = validate_template_set(templates, schema);
    if (!diagnostics.empty())
      throw TemplateError("templates fail validation: " + diagnostics.front().message);
  }

  TrainResult result;
  result.split = split_corpus(corpus, config.split, config.seed ^ 0x9e3779b97f4a7c15ull);
  const Corpus& train = result.split.train;
  const Corpus& dev = result.split.dev;

  Vocabulary vocab = Vocabulary::build(train, templates);
  EncoderConfig enc_cfg = config.encoder;
  enc_cfg.vocab = vocab.size();
  EncoderParams params = EncoderParams::init(enc_cfg, config.seed + 1);

  TrainingData data = build_turn_examples(train, templates, schema, config.mode, config.seed + 2,
                                          config.mismatched_fill_negatives);

  SgdOptimizer optimizer(enc_cfg, config.learning_rate, config.momentum, config.clip_norm,
                         config.optimizer);
  EncoderParams grad = EncoderParams::zeros(enc_cfg);
  Rng shuffle_rng(config.seed + 3);

  struct Item {
    bool head;
    size_t index;
  };
  std::vector<Item> order;
  order.reserve(data.head_examples.size() + data.tail_examples.size());

  EncoderParams best_params = params;
  double best_metric = -1;
  const bool hierarchical = schema.hierarchical();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    order.clear();
    for (size_t i = 0; i < data.head_examples.size(); ++i) order.push_back({true, i});
    for (size_t i = 0; i < data.tail_examples.size(); ++i) order.push_back({false, i});
    shuffle_rng.shuffle(order);

    double head_sum = 0, tail_sum = 0;
    size_t head_n = 0, tail_n = 0;
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(config.batch_size)) {
      const size_t stop = std::min(order.size(), at + static_cast<size_t>(config.batch_size));
      std::vector<const TurnExample*> heads, tails;
      for (size_t i = at; i < stop; ++i) {
        if (order[i].head)
          heads.push_back(&data.head_examples[order[i].index]);
        else
          tails.push_back(&data.tail_examples[order[i].index]);
      }
      zero_params(grad);
      const double lw = config.lambda_weight;
      if (!heads.empty() && lw < 1.0) {
        const double w = (1.0 - lw) / static_cast<double>(heads.size());
        for (const auto* ex : heads) {
          head_sum += turn_loss(params, vocab, ex->question, train[ex->sentence_index].tokens,
                                ex->gold, &grad, w);
          ++head_n;
        }
      } else {
        for (const auto* ex : heads) {
          head_sum +=
              turn_loss(params, vocab, ex->question, train[ex->sentence_index].tokens, ex->gold);
          ++head_n;
        }
      }
      if (!tails.empty() && lw > 0.0) {
        const double w = lw / static_cast<double>(tails.size());
        for (const auto* ex : tails) {
          tail_sum += turn_loss(params, vocab, ex->question, train[ex->sentence_index].tokens,
                                ex->gold, &grad, w);
          ++tail_n;
        }
      } else {
        for (const auto* ex : tails) {
          tail_sum +=
              turn_loss(params, vocab, ex->question, train[ex->sentence_index].tokens, ex->gold);
          ++tail_n;
        }
      }
      optimizer.step(params, grad);
    }

    DevScores scores = dev_scores(params, vocab, dev, templates, schema, config.mode);
    const double metric = hierarchical ? scores.slot_f1 : scores.relation_f1;

    EpochLog log;
    log.epoch = epoch;
    log.head_loss = head_n ? head_sum / static_cast<double>(head_n) : 0;
    log.tail_loss = tail_n ? tail_sum / static_cast<double>(tail_n) : 0;
    log.joint = (1.0 - config.lambda_weight) * log.head_loss +
                config.lambda_weight * log.tail_loss;
    log.dev_entity_f1 = scores.entity_f1;
    log.dev_relation_f1 = scores.relation_f1;
    log.dev_slot_f1 = scores.slot_f1;
    if (metric > best_metric) {
      best_metric = metric;
      best_params = params;
      log.best = true;
    }
    result.log.push_back(log);
  }

  result.checkpoint.params = std::move(best_params);
  result.checkpoint.vocab = std::move(vocab);
  result.checkpoint.schema_hash = schema_digest(schema);
  result.checkpoint.decoding = DecodingConfig{};
  result.checkpoint.question_mode = question_mode_name(config.mode);
  result.checkpoint.trained = true;
  return result;
}

// ---------------------------------------------------------------------------
// Reinforcement fine-tuning
// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ArgumentError("replay capacity must be positive");
}

void ReplayBuffer::add(Trajectory trajectory) {
  if (store_.size() == capacity_) store_.pop_front();
  store_.push_back(std::move(trajectory));
}

const Trajectory& ReplayBuffer::sample(Rng& rng) const {
  if (store_.empty()) throw ArgumentError("cannot sample from an empty replay buffer");
  return store_[rng.below(store_.size())];
}

Trajectory sample_trajectory(const EncoderParams& params, const Vocabulary& vocab,
                             const Corpus& corpus, size_t sentence_index,
                             const RelationChain& chain, const TemplateSet& templates,
                             const Schema& schema, QuestionMode mode, int max_turns, Rng& rng,
                             bool greedy, bool triple_level_reward) {
  if (max_turns < 1) throw ArgumentError("sample_trajectory: max_turns must be at least 1");
  Trajectory traj;
  traj.sentence_index = sentence_index;
  traj.chain_name = chain.name;
  const auto& sentence = corpus[sentence_index];
  if (sentence.tokens.empty()) return traj;

  QuestionResolver resolver(&templates);
  const auto* head_template = templates.entity_question_for(chain.slot_names[0]);
  if (!head_template)
    throw ArgumentError("sample_trajectory: no entity question for head slot '" +
                        chain.slot_names[0] + "'");

  auto play_turn = [&](const Question& q) {
    ModelInput input = build_input(q, sentence.tokens, vocab, params.config.max_len);
    TagDistribution dist = encode_and_tag(params, input);
    ActionSpace space = enumerate_actions(dist);
    size_t idx = greedy ? space.argmax() : space.sample(rng);

    std::vector<Span> gold;
    if (auto resolved = resolver.resolve(q))
      gold = gold_answer_spans(*resolved, q, sentence, schema);

    TrajectoryTurn turn;
    turn.question = q;
    turn.action = space.actions[idx].span;
    turn.log_prob = space.log_prob(idx);
    if (turn.action) {
      turn.reward =
          std::find(gold.begin(), gold.end(), *turn.action) != gold.end() ? 1 : 0;
    } else {
      turn.reward = gold.empty() ? 1 : 0;
    }
    traj.turns.push_back(turn);
    return turn;
  };

  Question head_q = render_entity_question(*head_template, mode);
  TrajectoryTurn head_turn = play_turn(head_q);

  int span_rewards_after_head = 0;
  if (head_turn.action) {
    HierRecord branch;
    branch.slots.emplace_back(EntityMention{*head_turn.action, chain.slot_names[0]});
    for (size_t k = 0;
         k < chain.steps.size() && static_cast<int>(traj.turns.size()) < max_turns; ++k) {
      const auto& step = chain.steps[k];
      std::vector<std::string> fills;
      for (const auto& slot : branch.slots)
        fills.push_back(slot ? sentence.surface(slot->span) : kAbsentFill);
      Question q = render_relation_question(step, fills, mode, static_cast<int>(k) + 1);
      TrajectoryTurn turn = play_turn(q);
      if (turn.action) {
        if (turn.reward) ++span_rewards_after_head;
        branch.slots.emplace_back(EntityMention{*turn.action, step.tail_type});
      } else {
        if (schema.slot_optional(chain.slot_names[k + 1])) {
          branch.slots.emplace_back(std::nullopt);
        } else {
          break;  // NONE at a mandatory step ends the episode
        }
      }
    }
  }

  if (triple_level_reward) {
    traj.total_reward = span_rewards_after_head;
  } else {
    traj.total_reward = 0;
    for (const auto& t : traj.turns) traj.total_reward += t.reward;
  }
  return traj;
}

void reinforce_update(EncoderParams& params, const Vocabulary& vocab, const Corpus& corpus,
                      const std::vector<Trajectory>& trajectories, BaselineState& baseline,
                      SgdOptimizer& optimizer) {
  if (trajectories.empty()) throw ArgumentError("reinforce_update: empty trajectory batch");
  const double b = baseline.mean();

  EncoderParams grad = EncoderParams::zeros(params.config);
  const double inv_n = 1.0 / static_cast<double>(trajectories.size());
  for (const auto& traj : trajectories) {
    const double coef = (static_cast<double>(traj.total_reward) - b) * inv_n;
    if (coef == 0.0) continue;
    for (const auto& turn : traj.turns) {
      ModelInput input =
          build_input(turn.question, corpus[traj.sentence_index].tokens, vocab,
                      params.config.max_len);
      ForwardCache cache;
      TagDistribution dist = encode_and_tag(params, input, cache);
      ActionSpace space = enumerate_actions(dist);
      size_t idx = space.index_of(turn.action);
      Eigen::MatrixXd dlp = policy_logits_grad(dist, space, idx);
      Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(input.total_length(), kNumTags);
      // ascend the surrogate objective: loss = -(R - b) log pi
      dlogits.middleRows(input.context_offset, input.context_length) = -coef * dlp;
      encoder_backward(params, input.ids, input.context_offset, cache, dlogits, grad);
    }
  }
  optimizer.step(params, grad);
  for (const auto& traj : trajectories)
    baseline.consume(static_cast<double>(traj.total_reward));
}

namespace {

double mean_greedy_dev_reward(const EncoderParams& params, const Vocabulary& vocab,
                              const Corpus& dev, const TemplateSet& templates,
                              const Schema& schema, QuestionMode mode, bool triple_level) {
  if (dev.empty() || templates.chains.empty()) return 0;
  Rng rng(0);  // unused under greedy selection
  double total = 0;
  size_t n = 0;
  for (size_t i = 0; i < dev.size(); ++i) {
    for (const auto& chain : templates.chains) {
      int full = static_cast<int>(chain.steps.size()) + 1;
      Trajectory t = sample_trajectory(params, vocab, dev, i, chain, templates, schema, mode,
                                       full, rng, /*greedy=*/true, triple_level);
      total += t.total_reward;
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0;
}

}  // namespace

RlResult rl_finetune(const Checkpoint& start, const Corpus& train_corpus,
                     const Corpus& dev_corpus, const TemplateSet& templates, const Schema& schema,
                     const RlConfig& config) {
  config.validate();
  RlResult result;
  result.warned_untrained = !start.trained;

  EncoderParams params = start.params;
  const Vocabulary& vocab = start.vocab;
  const QuestionMode mode = config.mode;
  const bool hierarchical = schema.hierarchical();

  SgdOptimizer optimizer(params.config, config.learning_rate, config.momentum, config.clip_norm,
                         config.optimizer);
  BaselineState baseline;
  ReplayBuffer buffer(config.replay_capacity);
  Rng rng(config.seed);

  auto dev_f1 = [&](const EncoderParams& p) {
    DevScores s = dev_scores(p, vocab, dev_corpus, templates, schema, mode);
    return hierarchical ? s.slot_f1 : s.relation_f1;
  };
  auto dev_reward = [&](const EncoderParams& p) {
    return mean_greedy_dev_reward(p, vocab, dev_corpus, templates, schema, mode,
                                  config.triple_level_reward);
  };

  EncoderParams best_params = params;
  double best_reward = dev_reward(params);
  double best_f1 = dev_f1(params);
  {
    RlEpochLog log;
    log.epoch = 0;
    log.stage = 0;
    log.max_turns = config.curriculum.front().max_turns;
    log.dev_reward = best_reward;
    log.dev_f1 = best_f1;
    log.best = true;
    result.log.push_back(log);
  }

  std::vector<std::pair<size_t, size_t>> units;  // (sentence, chain index)
  int epoch = 0;
  for (size_t stage_idx = 0; stage_idx < config.curriculum.size(); ++stage_idx) {
    const auto& stage = config.curriculum[stage_idx];
    for (int e = 0; e < stage.epochs; ++e) {
      ++epoch;
      units.clear();
      for (size_t i = 0; i < train_corpus.size(); ++i)
        for (size_t c = 0; c < templates.chains.size(); ++c) units.emplace_back(i, c);
      rng.shuffle(units);

      double fresh_reward_sum = 0;
      size_t fresh_count = 0;
      int max_observed = 0;

      size_t at = 0;
      while (at < units.size()) {
        const size_t n_replay =
            std::min(static_cast<size_t>(config.batch_size) / 2, buffer.size());
        const size_t n_fresh = std::min(static_cast<size_t>(config.batch_size) - n_replay,
                                        units.size() - at);
        if (n_fresh == 0) break;

        std::vector<Trajectory> batch;
        batch.reserve(n_fresh + n_replay);
        for (size_t i = 0; i < n_replay; ++i) batch.push_back(buffer.sample(rng));
        std::vector<Trajectory> fresh;
        for (size_t i = 0; i < n_fresh; ++i, ++at) {
          const auto [si, ci] = units[at];
          Trajectory t = sample_trajectory(params, vocab, train_corpus, si,
                                           templates.chains[ci], templates, schema, mode,
                                           stage.max_turns, rng, false,
                                           config.triple_level_reward);
          fresh_reward_sum += t.total_reward;
          ++fresh_count;
          max_observed = std::max(max_observed, static_cast<int>(t.turns.size()));
          fresh.push_back(std::move(t));
        }
        for (auto& t : fresh) batch.push_back(t);
        for (auto& t : fresh) buffer.add(std::move(t));
        reinforce_update(params, vocab, train_corpus, batch, baseline, optimizer);
      }

      RlEpochLog log;
      log.epoch = epoch;
      log.stage = static_cast<int>(stage_idx);
      log.max_turns = stage.max_turns;
      log.mean_reward = fresh_count ? fresh_reward_sum / static_cast<double>(fresh_count) : 0;
      log.baseline = baseline.mean();
      log.dev_reward = dev_reward(params);
      log.dev_f1 = dev_f1(params);
      log.buffer_size = buffer.size();
      log.max_observed_turns = max_observed;
      if (log.dev_reward > best_reward + 1e-12 ||
          (std::abs(log.dev_reward - best_reward) <= 1e-12 && log.dev_f1 > best_f1 + 1e-12)) {
        best_reward = log.dev_reward;
        best_f1 = log.dev_f1;
        best_params = params;
        log.best = true;
      }
      result.log.push_back(log);
    }
  }

  result.checkpoint = Checkpoint{std::move(best_params), start.vocab, start.schema_hash,
                                 start.decoding, start.question_mode, true};
  return result;
}

// ---------------------------------------------------------------------------
// Experiment sweeps
// ---------------------------------------------------------------------------

std::vector<SweepCell> run_sweep(const Corpus& corpus, const std::string& axis,
                                 const std::vector<std::string>& values,
                                 const TemplateSet& templates, const Schema& schema,
                                 const TrainConfig& base_config) {
  if (axis != "lambda" && axis != "question_mode")
    throw ArgumentError("unknown sweep axis '" + axis + "' (expected lambda|question_mode)");
  if (values.empty()) throw ArgumentError("sweep needs at least one value");

  std::vector<SweepCell> cells;
  for (const auto& value : values) {
    TrainConfig config = base_config;
    if (axis == "lambda") {
      try {
        config.lambda_weight = std::stod(value);
      } catch (const std::exception&) {
        throw ArgumentError("bad lambda value '" + value + "'");
      }
    } else {
      config.mode = parse_question_mode(value);
    }
    TrainResult trained = train_supervised(corpus, templates, schema, config);
    LearnedExtractor extractor(trained.checkpoint);
    auto extractions = extract_corpus(extractor, templates, schema, trained.split.test,
                                      config.mode, 1);
    EvalReport report = evaluate_extractions(extractions, trained.split.test, schema);
    cells.push_back(SweepCell{value, std::move(report)});
  }
  return cells;
}

std::string render_sweep_table(const std::vector<SweepCell>& cells) {
  std::string out;
  char buf[256];
  bool any_slots = false;
  for (const auto& c : cells) any_slots = any_slots || c.report.has_slots;
  if (any_slots)
    std::snprintf(buf, sizeof buf, "%-14s %9s %9s %9s\n", "value", "Overall P", "Overall R",
                  "Overall F");
  else
    std::snprintf(buf, sizeof buf, "%-14s %9s %9s %9s %11s %11s %11s\n", "value", "Entity P",
                  "Entity R", "Entity F", "Relation P", "Relation R", "Relation F");
  out += buf;
  for (const auto& c : cells) {
    if (any_slots) {
      std::snprintf(buf, sizeof buf, "%-14s %9s %9s %9s\n", c.value.c_str(),
                    render_pct(c.report.slot_all_prf.p).c_str(),
                    render_pct(c.report.slot_all_prf.r).c_str(),
                    render_pct(c.report.slot_all_prf.f).c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%-14s %9s %9s %9s %11s %11s %11s\n", c.value.c_str(),
                    render_pct(c.report.entity_prf.p).c_str(),
                    render_pct(c.report.entity_prf.r).c_str(),
                    render_pct(c.report.entity_prf.f).c_str(),
                    render_pct(c.report.relation_prf.p).c_str(),
                    render_pct(c.report.relation_prf.r).c_str(),
                    render_pct(c.report.relation_prf.f).c_str());
    }
    out += buf;
  }
  return out;
}

}  // namespace mtqa
