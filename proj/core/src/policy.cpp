#include <algorithm>
#include <cmath>

#include "mtqa/training.hpp"

namespace mtqa {

double ActionSpace::prob(size_t idx) const { return std::exp(log_prob(idx)); }

size_t ActionSpace::index_of(const std::optional<Span>& action) const {
  for (size_t i = 0; i < actions.size(); ++i) {
    if (actions[i].span.has_value() != action.has_value()) continue;
    if (!action || *actions[i].span == *action) return i;
  }
  throw ArgumentError("ActionSpace::index_of: action not in space");
}

size_t ActionSpace::sample(Rng& rng) const {
  std::vector<double> weights(actions.size());
  for (size_t i = 0; i < actions.size(); ++i) weights[i] = prob(i);
  return static_cast<size_t>(rng.categorical(weights));
}

size_t ActionSpace::argmax() const {
  size_t best = 0;
  for (size_t i = 1; i < actions.size(); ++i)
    if (actions[i].log_q > actions[best].log_q) best = i;
  return best;
}

ActionSpace enumerate_actions(const TagDistribution& dist) {
  const int n = dist.length();
  if (n <= 0) throw ArgumentError("enumerate_actions: empty distribution");
  ActionSpace space;
  space.actions.reserve(static_cast<size_t>(n) * static_cast<size_t>(n + 1) / 2 + 1);

  // prefix sums of log p(M) make every span's log_q O(1)
  std::vector<double> m_prefix(static_cast<size_t>(n) + 1, 0.0);
  for (int t = 0; t < n; ++t)
    m_prefix[static_cast<size_t>(t) + 1] =
        m_prefix[static_cast<size_t>(t)] + dist.log_probs(t, static_cast<int>(Tag::kM));

  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double lq;
      if (i == j) {
        lq = dist.log_probs(i, static_cast<int>(Tag::kS));
      } else {
        lq = dist.log_probs(i, static_cast<int>(Tag::kB)) +
             dist.log_probs(j, static_cast<int>(Tag::kE)) +
             (m_prefix[static_cast<size_t>(j)] - m_prefix[static_cast<size_t>(i) + 1]);
      }
      space.actions.push_back(SpanAction{Span{i, j}, lq});
    }
  }
  double none_lq = 0;
  for (int t = 0; t < n; ++t) none_lq += dist.log_probs(t, static_cast<int>(Tag::kO));
  space.actions.push_back(SpanAction{std::nullopt, none_lq});

  double mx = space.actions[0].log_q;
  for (const auto& a : space.actions) mx = std::max(mx, a.log_q);
  double z = 0;
  for (const auto& a : space.actions) z += std::exp(a.log_q - mx);
  space.log_z = std::log(z) + mx;
  return space;
}

namespace {

/// Adds w times the indicator pattern of an action to a log-prob gradient.
void add_action_pattern(Eigen::MatrixXd& g, const SpanAction& action, double w, int n) {
  if (!action.span) {
    for (int t = 0; t < n; ++t) g(t, static_cast<int>(Tag::kO)) += w;
    return;
  }
  const Span& s = *action.span;
  if (s.start == s.end) {
    g(s.start, static_cast<int>(Tag::kS)) += w;
    return;
  }
  g(s.start, static_cast<int>(Tag::kB)) += w;
  for (int t = s.start + 1; t < s.end; ++t) g(t, static_cast<int>(Tag::kM)) += w;
  g(s.end, static_cast<int>(Tag::kE)) += w;
}

/// Chain rule through the per-token log-softmax: dlogits = g - p * rowsum(g).
Eigen::MatrixXd logprob_grad_to_logits(const TagDistribution& dist, const Eigen::MatrixXd& g) {
  Eigen::MatrixXd dlogits = g;
  for (int t = 0; t < dist.length(); ++t) {
    double row_sum = g.row(t).sum();
    dlogits.row(t) -= dist.probs.row(t) * row_sum;
  }
  return dlogits;
}

}  // namespace

Eigen::MatrixXd policy_logits_grad(const TagDistribution& dist, const ActionSpace& space,
                                   size_t action_index) {
  const int n = dist.length();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, kNumTags);
  add_action_pattern(g, space.actions[action_index], 1.0, n);
  for (size_t a = 0; a < space.actions.size(); ++a)
    add_action_pattern(g, space.actions[a], -space.prob(a), n);
  return logprob_grad_to_logits(dist, g);
}

Eigen::MatrixXd expected_reward_logits_grad(const TagDistribution& dist,
                                            const ActionSpace& space,
                                            const std::vector<double>& rewards) {
  if (rewards.size() != space.actions.size())
    throw ArgumentError("expected_reward_logits_grad: one reward per action required");
  const int n = dist.length();
  double expected = 0;
  for (size_t a = 0; a < space.actions.size(); ++a) expected += space.prob(a) * rewards[a];
  // dE/dlog q(a) with softmax normalization: pi(a) * (R(a) - E)
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, kNumTags);
  for (size_t a = 0; a < space.actions.size(); ++a)
    add_action_pattern(g, space.actions[a], space.prob(a) * (rewards[a] - expected), n);
  return logprob_grad_to_logits(dist, g);
}

}  // namespace mtqa
