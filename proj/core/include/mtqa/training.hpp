#pragma once

#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtqa/eval.hpp"
#include "mtqa/rng.hpp"

namespace mtqa {

// -- span policy --------------------------------------------------------------

/// One element of the per-turn action space: a span or NONE (no span).
struct SpanAction {
  std::optional<Span> span;
  double log_q = 0;  // unnormalized: the span tag-pattern log-probability,
                     // or the all-O log-probability for NONE
};

/// Enumerated action space for one tag distribution: every (i, j) span plus
/// NONE, with probabilities proportional to exp(log_q).
struct ActionSpace {
  std::vector<SpanAction> actions;  // spans sorted by (start, end); NONE last
  double log_z = 0;

  double log_prob(size_t idx) const { return actions[idx].log_q - log_z; }
  double prob(size_t idx) const;
  size_t none_index() const { return actions.size() - 1; }
  size_t index_of(const std::optional<Span>& action) const;
  size_t sample(Rng& rng) const;
  size_t argmax() const;
};

ActionSpace enumerate_actions(const TagDistribution& dist);

/// d log pi(action) / d logits over the context rows.
Eigen::MatrixXd policy_logits_grad(const TagDistribution& dist, const ActionSpace& space,
                                   size_t action_index);

/// Analytic d E_pi[R] / d logits for an enumerated reward vector (one entry
/// per action).
Eigen::MatrixXd expected_reward_logits_grad(const TagDistribution& dist,
                                            const ActionSpace& space,
                                            const std::vector<double>& rewards);

// -- supervised training ------------------------------------------------------

struct TrainConfig {
  double lambda_weight = 0.7;  // Stage weighting: 0 trains head turns only.
  double learning_rate = 2e-3;
  double momentum = 0.9;
  std::string optimizer = "adam";  // adam | sgd
  double clip_norm = 1.0;
  int batch_size = 32;
  int epochs = 8;
  uint64_t seed = 1;
  QuestionMode mode = QuestionMode::kNatural;
  EncoderConfig encoder;  // vocab is filled in from the training split
  SplitRatios split;
  bool mismatched_fill_negatives = true;

  void validate() const;
};

/// One supervised QA turn: a question, the sentence it runs against, and
/// the gold BMESO labeling of that sentence's tokens.
struct TurnExample {
  Question question;
  size_t sentence_index = 0;
  std::vector<Tag> gold;
};

struct TrainingData {
  std::vector<TurnExample> head_examples;
  std::vector<TurnExample> tail_examples;
};

/// Builds teacher-forced turn examples: head turns from every entity
/// template, tail turns from gold records/triples (questions filled with
/// gold earlier-turn entities), plus NONE-labeled negatives.
TrainingData build_turn_examples(const Corpus& corpus, const TemplateSet& templates,
                                 const Schema& schema, QuestionMode mode, uint64_t seed,
                                 bool mismatched_fill_negatives);

/// Mean per-context-token negative log-likelihood of the gold labels. When
/// grad is non-null, accumulates weight * d(loss)/d(params).
double turn_loss(const EncoderParams& params, const Vocabulary& vocab, const Question& question,
                 const std::vector<std::string>& context, const std::vector<Tag>& gold,
                 EncoderParams* grad = nullptr, double weight = 1.0);

/// (1 - lambda) * mean head loss + lambda * mean tail loss over the two
/// batches; both stages share params.
double joint_loss(const EncoderParams& params, const Vocabulary& vocab, const Corpus& corpus,
                  const std::vector<const TurnExample*>& head_batch,
                  const std::vector<const TurnExample*>& tail_batch, double lambda_weight,
                  EncoderParams* grad = nullptr);

/// Gradient-descent step with norm clipping. "sgd" uses momentum; "adam"
/// uses the usual first/second-moment estimates with bias correction.
class SgdOptimizer {
 public:
  SgdOptimizer(const EncoderConfig& config, double learning_rate, double momentum,
               double clip_norm, std::string kind = "adam");
  void step(EncoderParams& params, const EncoderParams& grad);
  double last_grad_norm() const { return last_norm_; }

 private:
  EncoderParams velocity_;  // first moment
  EncoderParams second_;    // second moment (adam only)
  std::string kind_;
  double learning_rate_, momentum_, clip_norm_;
  double last_norm_ = 0;
  long step_count_ = 0;
};

double global_grad_norm(const EncoderParams& grad);

struct EpochLog {
  int epoch = 0;
  double head_loss = 0;
  double tail_loss = 0;
  double joint = 0;
  double dev_entity_f1 = 0;
  double dev_relation_f1 = 0;
  double dev_slot_f1 = 0;
  bool best = false;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  CorpusSplit split;
};

/// Joint supervised training; deterministic under config.seed, returns the
/// best-dev checkpoint.
TrainResult train_supervised(const Corpus& corpus, const TemplateSet& templates,
                             const Schema& schema, const TrainConfig& config);

// -- reinforcement fine-tuning ------------------------------------------------

struct TrajectoryTurn {
  Question question;
  std::optional<Span> action;  // nullopt = NONE
  double log_prob = 0;         // under the sampling-time params (bookkeeping)
  int reward = 0;
};

struct Trajectory {
  size_t sentence_index = 0;
  std::string chain_name;
  std::vector<TrajectoryTurn> turns;
  int total_reward = 0;
};

/// Running mean of every reward consumed so far; mean() is 0 before the
/// first reward.
struct BaselineState {
  double sum = 0;
  size_t count = 0;

  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  void consume(double reward) {
    sum += reward;
    count += 1;
  }
};

/// Bounded trajectory store with uniform sampling; the oldest entry is
/// evicted at capacity.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);
  void add(Trajectory trajectory);
  const Trajectory& sample(Rng& rng) const;
  size_t size() const { return store_.size(); }
  size_t capacity() const { return capacity_; }

 private:
  std::deque<Trajectory> store_;
  size_t capacity_;
};

struct CurriculumStage {
  int max_turns = 2;
  int epochs = 1;
};

struct RlConfig {
  double learning_rate = 2e-4;
  double momentum = 0.9;
  std::string optimizer = "adam";
  double clip_norm = 1.0;
  int batch_size = 16;
  uint64_t seed = 7;
  size_t replay_capacity = 10000;
  std::vector<CurriculumStage> curriculum = {{2, 2}, {4, 2}};
  QuestionMode mode = QuestionMode::kNatural;
  /// When set, only correct span answers on relation turns count toward the
  /// reward (one per retrieved triple) instead of the per-turn +1.
  bool triple_level_reward = false;

  void validate() const;
};

/// Samples one episode: the chain's head question, then chained relation
/// questions whose fills come from the sampled answers. A span action earns
/// +1 when it matches a gold answer for that turn's question; a NONE action
/// earns +1 when the gold answer set is empty. NONE ends the episode unless
/// the slot is optional.
Trajectory sample_trajectory(const EncoderParams& params, const Vocabulary& vocab,
                             const Corpus& corpus, size_t sentence_index,
                             const RelationChain& chain, const TemplateSet& templates,
                             const Schema& schema, QuestionMode mode, int max_turns, Rng& rng,
                             bool greedy = false, bool triple_level_reward = false);

/// One REINFORCE ascent step along sum (R - b) grad log pi, recomputing
/// log pi under the current params; consumes the rewards into the baseline
/// afterwards.
void reinforce_update(EncoderParams& params, const Vocabulary& vocab, const Corpus& corpus,
                      const std::vector<Trajectory>& trajectories, BaselineState& baseline,
                      SgdOptimizer& optimizer);

struct RlEpochLog {
  int epoch = 0;  // 0 is the pre-update snapshot
  int stage = 0;
  int max_turns = 0;
  double mean_reward = 0;
  double baseline = 0;
  double dev_reward = 0;
  double dev_f1 = 0;
  size_t buffer_size = 0;
  int max_observed_turns = 0;
  bool best = false;
};

struct RlResult {
  Checkpoint checkpoint;
  std::vector<RlEpochLog> log;
  bool warned_untrained = false;
};

/// Policy-gradient fine-tuning with experience replay (half fresh, half
/// replayed per batch) and the turn-count curriculum. The starting params
/// are the epoch-0 best-dev candidate.
RlResult rl_finetune(const Checkpoint& start, const Corpus& train_corpus,
                     const Corpus& dev_corpus, const TemplateSet& templates, const Schema& schema,
                     const RlConfig& config);

// -- experiment sweeps --------------------------------------------------------

struct SweepCell {
  std::string value;
  EvalReport report;
};

/// Trains and evaluates once per axis value with a shared seed.
/// axis is "lambda" or "question_mode".
std::vector<SweepCell> run_sweep(const Corpus& corpus, const std::string& axis,
                                 const std::vector<std::string>& values,
                                 const TemplateSet& templates, const Schema& schema,
                                 const TrainConfig& base_config);

std::string render_sweep_table(const std::vector<SweepCell>& cells);

}  // namespace mtqa
