#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mtqa/encoder.hpp"
#include "mtqa/rng.hpp"

using namespace mtqa;

namespace {

bool exact_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a - b).cwiseAbs().maxCoeff() == 0.0;
}


EncoderConfig toy_config(int layers = 1) {
  EncoderConfig cfg;
  cfg.width = 8;
  cfg.layers = layers;
  cfg.heads = 2;
  cfg.ffn = 16;
  cfg.max_len = 16;
  cfg.vocab = 12;
  // finite differences at 1e-3 steps need parameters on an O(0.1) scale,
  // otherwise the comparison is dominated by curvature, not gradient error
  cfg.init_scale = 0.3;
  return cfg;
}

/// Mean NLL of gold labels over the context rows, plus optional gradient.
double nll_loss(const EncoderParams& params, const std::vector<int>& ids, int context_offset,
                const std::vector<int>& gold, EncoderParams* grad) {
  ForwardCache cache;
  Eigen::MatrixXd logits = encoder_forward(params, ids, context_offset, &cache);
  const int nc = static_cast<int>(gold.size());
  TagDistribution dist =
      TagDistribution::from_logits(logits.middleRows(context_offset, nc));
  double loss = 0;
  for (int t = 0; t < nc; ++t) loss -= dist.log_probs(t, gold[static_cast<size_t>(t)]);
  loss /= nc;
  if (grad) {
    Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(logits.rows(), kNumTags);
    for (int t = 0; t < nc; ++t) {
      dlogits.row(context_offset + t) = dist.probs.row(t) / nc;
      dlogits(context_offset + t, gold[static_cast<size_t>(t)]) -= 1.0 / nc;
    }
    encoder_backward(params, ids, context_offset, cache, dlogits, *grad);
  }
  return loss;
}

struct GradCheckResult {
  double global_ratio = 0;   // |analytic - fd| / |fd| over all parameters
  double worst_tensor = 0;   // the same ratio per named tensor, worst case
  std::string worst_name;
};

/// Central differences with the step pinned at h. Agreement is measured per
/// tensor and globally in the l2 norm; per-coordinate ratios are not used
/// because coordinates with near-zero gradients are dominated by the h^2
/// truncation error of the finite-difference oracle itself.
GradCheckResult finite_difference_check(EncoderParams& params, const std::vector<int>& ids,
                                        int context_offset, const std::vector<int>& gold,
                                        double h = 1e-3) {
  EncoderParams grad = EncoderParams::zeros(params.config);
  nll_loss(params, ids, context_offset, gold, &grad);

  GradCheckResult result;
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> tensors, grads;
  for_each_tensor(params, [&](const std::string& n, Eigen::MatrixXd& m) {
    tensors.emplace_back(n, &m);
  });
  for_each_tensor(grad, [&](const std::string& n, Eigen::MatrixXd& m) {
    grads.emplace_back(n, &m);
  });
  double global_diff = 0, global_fd = 0;
  for (size_t ti = 0; ti < tensors.size(); ++ti) {
    Eigen::MatrixXd& m = *tensors[ti].second;
    Eigen::MatrixXd& g = *grads[ti].second;
    double diff_sq = 0, fd_sq = 0;
    for (Eigen::Index idx = 0; idx < m.size(); ++idx) {
      double saved = m(idx);
      m(idx) = saved + h;
      double up = nll_loss(params, ids, context_offset, gold, nullptr);
      m(idx) = saved - h;
      double down = nll_loss(params, ids, context_offset, gold, nullptr);
      m(idx) = saved;
      double fd = (up - down) / (2 * h);
      diff_sq += (g(idx) - fd) * (g(idx) - fd);
      fd_sq += fd * fd;
    }
    global_diff += diff_sq;
    global_fd += fd_sq;
    // the key bias is structurally null (row softmax is shift invariant), so
    // its finite differences are pure rounding noise; require the analytic
    // gradient to agree that it is zero
    if (fd_sq < 1e-16) {
      REQUIRE(diff_sq < 1e-16);
      continue;
    }
    double ratio = std::sqrt(diff_sq / fd_sq);
    if (ratio > result.worst_tensor) {
      result.worst_tensor = ratio;
      result.worst_name = tensors[ti].first;
    }
  }
  result.global_ratio = std::sqrt(global_diff / global_fd);
  return result;
}

}  // namespace

TEST_CASE("encoder init is seeded and forward is deterministic") {
  EncoderConfig cfg = toy_config();
  EncoderParams a = EncoderParams::init(cfg, 5);
  EncoderParams b = EncoderParams::init(cfg, 5);
  EncoderParams c = EncoderParams::init(cfg, 6);
  CHECK(exact_equal(a.tok_emb, b.tok_emb));
  CHECK(exact_equal(a.layers[0].wq, b.layers[0].wq));
  CHECK(!exact_equal(a.tok_emb, c.tok_emb));

  std::vector<int> ids{0, 4, 5, 1, 7, 8, 9, 1};
  CHECK(exact_equal(encoder_forward(a, ids, 3, nullptr), encoder_forward(b, ids, 3, nullptr)));
}

TEST_CASE("encoder validates ids and length") {
  EncoderParams p = EncoderParams::init(toy_config(), 1);
  CHECK_THROWS_AS(encoder_forward(p, {0, 99}, 0, nullptr), ModelError);
  std::vector<int> too_long(20, 1);
  CHECK_THROWS_AS(encoder_forward(p, too_long, 0, nullptr), ModelError);
  CHECK_THROWS_AS(encoder_forward(p, {}, 0, nullptr), ModelError);
}

TEST_CASE("zero parameters give the uniform five-way distribution") {
  EncoderParams p = EncoderParams::zeros(toy_config());
  for (auto& l : p.layers) {
    l.ln1_g.setOnes();
    l.ln2_g.setOnes();
  }
  ModelInput input;
  input.tokens = {"[CLS]", "q", "[SEP]", "c0", "c1", "[SEP]"};
  input.ids = {0, 3, 1, 4, 5, 1};
  input.context_offset = 3;
  input.context_length = 2;
  TagDistribution dist = encode_and_tag(p, input);
  for (int t = 0; t < 2; ++t)
    for (int k = 0; k < kNumTags; ++k) CHECK(dist.probs(t, k) == doctest::Approx(0.2));
}

TEST_CASE("analytic gradients match central finite differences (1 layer)") {
  EncoderParams params = EncoderParams::init(toy_config(1), 11);
  std::vector<int> ids{0, 3, 4, 1, 5, 6, 7, 8, 1};
  std::vector<int> gold{0, 1, 2, 4, 3};  // B M E O S over the 5 context tokens
  auto result = finite_difference_check(params, ids, /*context_offset=*/4, gold);
  CAPTURE(result.worst_name);
  CHECK(result.global_ratio < 1e-4);
  CHECK(result.worst_tensor < 1e-4);
}

TEST_CASE("analytic gradients match central finite differences (2 layers)") {
  EncoderParams params = EncoderParams::init(toy_config(2), 13);
  std::vector<int> ids{0, 9, 1, 10, 11, 2, 1};
  std::vector<int> gold{3, 4, 0};
  auto result = finite_difference_check(params, ids, /*context_offset=*/3, gold);
  CAPTURE(result.worst_name);
  CHECK(result.global_ratio < 1e-4);
  CHECK(result.worst_tensor < 1e-4);
}

TEST_CASE("a toy model memorizes one example") {
  EncoderConfig cfg = toy_config(1);
  EncoderParams params = EncoderParams::init(cfg, 19);
  std::vector<int> ids{0, 3, 1, 4, 5, 6, 1};
  std::vector<int> gold{0, 2, 4};  // B E O
  double loss = 0;
  for (int step = 0; step < 400; ++step) {
    EncoderParams grad = EncoderParams::zeros(cfg);
    loss = nll_loss(params, ids, 3, gold, &grad);
    std::vector<Eigen::MatrixXd*> ps, gs;
    for_each_tensor(params, [&](const std::string&, Eigen::MatrixXd& m) { ps.push_back(&m); });
    for_each_tensor(grad, [&](const std::string&, Eigen::MatrixXd& m) { gs.push_back(&m); });
    for (size_t i = 0; i < ps.size(); ++i) *ps[i] -= 0.5 * *gs[i];
  }
  CHECK(loss < 1e-2);
  // the argmax tags reproduce the gold labeling after memorization
  Eigen::MatrixXd logits = encoder_forward(params, ids, 3, nullptr);
  TagDistribution dist = TagDistribution::from_logits(logits.middleRows(3, 3));
  auto tags = argmax_tags(dist);
  CHECK(tags == std::vector<Tag>{Tag::kB, Tag::kE, Tag::kO});
}

TEST_CASE("checkpoints round-trip exactly and verify the schema hash") {
  Schema schema;
  schema.entity_types = {"A"};
  schema.relation_types = {"r"};

  Checkpoint ckpt;
  ckpt.params = EncoderParams::init(toy_config(2), 23);
  std::vector<std::string> vocab_tokens{"[CLS]", "[SEP]", "[UNK]"};
  for (int i = 0; i < 9; ++i) vocab_tokens.push_back("tok" + std::to_string(i));
  ckpt.vocab = Vocabulary::from_tokens(vocab_tokens);
  ckpt.schema_hash = schema_digest(schema);
  ckpt.question_mode = "pseudo";
  ckpt.trained = true;

  auto path = (std::filesystem::temp_directory_path() / "mtqa_ckpt_test.json").string();
  save_checkpoint(path, ckpt);
  Checkpoint loaded = load_checkpoint(path, &schema);
  CHECK(exact_equal(loaded.params.tok_emb, ckpt.params.tok_emb));
  CHECK(exact_equal(loaded.params.layers[1].w2, ckpt.params.layers[1].w2));
  CHECK(loaded.vocab.tokens() == ckpt.vocab.tokens());
  CHECK(loaded.question_mode == "pseudo");
  CHECK(loaded.trained);

  Schema other = schema;
  other.entity_types.push_back("B");
  CHECK_THROWS_AS(load_checkpoint(path, &other), ModelError);
  std::filesystem::remove(path);
}

TEST_CASE("parameter visitation covers every tensor exactly once") {
  EncoderParams p = EncoderParams::init(toy_config(2), 3);
  std::vector<std::string> names;
  for_each_tensor(p, [&](const std::string& n, const Eigen::MatrixXd&) { names.push_back(n); });
  CHECK(names.size() == 8 + 2 * 17);
  std::sort(names.begin(), names.end());
  CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
  CHECK(p.parameter_count() > 0);
}
