#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtqa/tagger.hpp"

namespace mtqa {

struct EncoderConfig {
  int width = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 128;
  int max_len = 256;
  int vocab = 0;
  /// Attention uses a learned per-head relative-position bias over signed
  /// token offsets clipped to [-rel_clip, rel_clip].
  int rel_clip = 8;
  double init_scale = 0.02;

  bool operator==(const EncoderConfig&) const = default;
  void validate() const;
};

struct LayerParams {
  Eigen::MatrixXd wq, wk, wv, wo;          // width x width
  Eigen::MatrixXd bq, bk, bv, bo;          // 1 x width
  Eigen::MatrixXd rel_bias;                // heads x (2 * rel_clip + 1)
  Eigen::MatrixXd ln1_g, ln1_b, ln2_g, ln2_b;  // 1 x width
  Eigen::MatrixXd w1, c1, w2, c2;          // width x ffn, 1 x ffn, ffn x width, 1 x width
};

/// Token + position embeddings, a stack of self-attention/feed-forward
/// mixing layers with residuals and layer norm, and a projection to the
/// five tag logits.
struct EncoderParams {
  EncoderConfig config;
  Eigen::MatrixXd tok_emb;  // vocab x width
  Eigen::MatrixXd pos_emb;  // max_len x width
  Eigen::MatrixXd seg_emb;    // 2 x width: question segment, context segment
  Eigen::MatrixXd match_emb;  // 2 x width: token absent from / present in the other segment
  std::vector<LayerParams> layers;
  Eigen::MatrixXd lnf_g, lnf_b;  // final layer norm, 1 x width
  Eigen::MatrixXd w_out;  // width x kNumTags
  Eigen::MatrixXd b_out;  // 1 x kNumTags

  static EncoderParams init(const EncoderConfig& config, uint64_t seed);
  static EncoderParams zeros(const EncoderConfig& config);

  size_t parameter_count() const;
};

/// Enumerates every parameter tensor with a stable name, for SGD updates,
/// serialization, and finite-difference sweeps.
void for_each_tensor(EncoderParams& params,
                     const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn);
void for_each_tensor(const EncoderParams& params,
                     const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn);

/// Pre-norm layer: x += Wo * attention(LN1(x)); x += ffn(LN2(x)).
struct LayerCache {
  Eigen::MatrixXd x_in;               // residual stream entering the layer
  Eigen::MatrixXd a_hat, a_in;        // LN1 normalized input and its output
  Eigen::VectorXd inv_sigma1;
  Eigen::MatrixXd q, k, v;
  std::vector<Eigen::MatrixXd> attn;  // per-head softmax probabilities
  Eigen::MatrixXd attn_out;           // concatenated head outputs before the output projection
  Eigen::MatrixXd x_mid;              // after the attention residual
  Eigen::MatrixXd f_hat, f_in;        // LN2 normalized input and its output
  Eigen::VectorXd inv_sigma2;
  Eigen::MatrixXd z1, g;
  Eigen::MatrixXd x_out;              // after the feed-forward residual
};

struct ForwardCache {
  Eigen::MatrixXd x0;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd final_hat, final_out;  // final layer norm
  Eigen::VectorXd inv_sigma_final;
  Eigen::MatrixXd logits;  // total_length x kNumTags
};

/// Full-sequence logits. Tokens from context_start onward carry the context
/// segment embedding (pass 0 to mark everything as question-side). Validates
/// ids against the vocabulary and length against the position table; throws
/// ModelError on mismatch.
Eigen::MatrixXd encoder_forward(const EncoderParams& params, const std::vector<int>& ids,
                                int context_start, ForwardCache* cache);

/// Softmax tag distributions over the context tokens only.
TagDistribution encode_and_tag(const EncoderParams& params, const ModelInput& input);
TagDistribution encode_and_tag(const EncoderParams& params, const ModelInput& input,
                               ForwardCache& cache);

/// Accumulates d(loss)/d(params) into grad given d(loss)/d(logits) over the
/// full sequence (rows outside the context are typically zero).
void encoder_backward(const EncoderParams& params, const std::vector<int>& ids,
                      int context_start, const ForwardCache& cache,
                      const Eigen::MatrixXd& dlogits, EncoderParams& grad);

// -- checkpoint container ----------------------------------------------------

uint64_t schema_digest(const Schema& schema);

struct Checkpoint {
  EncoderParams params;
  Vocabulary vocab;
  uint64_t schema_hash = 0;
  DecodingConfig decoding;
  std::string question_mode = "natural";
  bool trained = false;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Loads a checkpoint; when expected_schema is non-null the stored schema
/// hash must match it.
Checkpoint load_checkpoint(const std::string& path, const Schema* expected_schema);

}  // namespace mtqa
