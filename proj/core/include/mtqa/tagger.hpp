#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mtqa/corpus.hpp"
#include "mtqa/templates.hpp"

namespace mtqa {

/// Span-tagging label set. Tie-breaks in argmax follow this order.
enum class Tag : int { kB = 0, kM = 1, kE = 2, kS = 3, kO = 4 };
inline constexpr int kNumTags = 5;

char tag_char(Tag t);
Tag tag_from_char(char c);

inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kUnkToken = "[UNK]";

/// Token <-> id mapping. Ids 0..2 are [CLS], [SEP], [UNK]; the rest are
/// sorted corpus/template tokens, so construction is deterministic.
class Vocabulary {
 public:
  Vocabulary();

  static Vocabulary build(const Corpus& corpus, const TemplateSet& templates);

  int id_of(const std::string& token) const;  // unknown -> [UNK] id
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }
  int cls_id() const { return 0; }
  int sep_id() const { return 1; }
  int unk_id() const { return 2; }

  const std::vector<std::string>& tokens() const { return id_to_token_; }
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

/// Concatenated [CLS] question [SEP] context [SEP] input.
struct ModelInput {
  std::vector<std::string> tokens;
  std::vector<int> ids;
  int context_offset = 0;
  int context_length = 0;

  int total_length() const { return static_cast<int>(tokens.size()); }
};

/// Lays out the QA input. Throws ArgumentError on empty question/context or
/// reserved markers inside them, and a "length ... exceeds" ArgumentError
/// instead of truncating when the combined length passes max_len.
ModelInput build_input(const Question& question, const std::vector<std::string>& context_tokens,
                       const Vocabulary& vocab, int max_len);

/// Per-context-token distributions over the five tags. Row t is the
/// distribution for context token t; probs and log_probs stay consistent.
struct TagDistribution {
  Eigen::MatrixXd probs;      // context_length x kNumTags
  Eigen::MatrixXd log_probs;  // context_length x kNumTags

  int length() const { return static_cast<int>(probs.rows()); }
  static TagDistribution from_logits(const Eigen::MatrixXd& logits);
  static TagDistribution from_probs(const Eigen::MatrixXd& probs);
};

struct ScoredSpan {
  Span span;
  double log_prob = 0.0;

  bool operator==(const ScoredSpan&) const = default;
};

struct DecodingConfig {
  /// strict drops dangling B/M/E fragments; lenient turns a dangling B into
  /// a single-token span.
  bool strict = true;
};

/// Greedy argmax labels with ties broken toward the earlier tag.
std::vector<Tag> argmax_tags(const TagDistribution& dist);

/// Maximal well-formed segments of the argmax labeling: S and B (M)* E.
/// Spans come back sorted by start, non-overlapping, each scored by
/// span_log_prob.
std::vector<ScoredSpan> decode_spans(const TagDistribution& dist, const DecodingConfig& config);

/// Joint log-probability of the span's tag pattern: log p(B) + sum log p(M)
/// + log p(E), or log p(S) for a single token.
double span_log_prob(const TagDistribution& dist, const Span& span);

/// Canonical labeling for a set of non-overlapping spans (O elsewhere).
std::vector<Tag> labels_from_spans(const std::vector<Span>& spans, int length);

/// Gold BMESO labeling for the mentions of a context; mentions overlapping
/// an earlier-labeled token are skipped deterministically.
std::vector<Tag> gold_labels(const std::vector<Span>& spans, int length);

}  // namespace mtqa
