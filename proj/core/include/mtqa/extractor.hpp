#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include "mtqa/encoder.hpp"
#include "mtqa/templates.hpp"

namespace mtqa {

/// Answers one question against one context; an empty result is the NONE
/// answer. Implementations must be safe for concurrent extract calls.
class AnswerExtractor {
 public:
  virtual ~AnswerExtractor() = default;
  virtual std::vector<ScoredSpan> extract(const Question& question,
                                          const std::vector<std::string>& context) const = 0;
};

/// build_input -> encode_and_tag -> decode_spans.
std::vector<ScoredSpan> extract_answer(const EncoderParams& params, const Vocabulary& vocab,
                                       const Question& question,
                                       const std::vector<std::string>& context,
                                       const DecodingConfig& decoding);

class LearnedExtractor : public AnswerExtractor {
 public:
  LearnedExtractor(const EncoderParams* params, const Vocabulary* vocab, DecodingConfig decoding)
      : params_(params), vocab_(vocab), decoding_(decoding) {}
  explicit LearnedExtractor(const Checkpoint& ckpt)
      : LearnedExtractor(&ckpt.params, &ckpt.vocab, ckpt.decoding) {}

  std::vector<ScoredSpan> extract(const Question& question,
                                  const std::vector<std::string>& context) const override;

 private:
  const EncoderParams* params_;
  const Vocabulary* vocab_;
  DecodingConfig decoding_;
};

/// What a question is asking, recovered by re-rendering templates with the
/// question's own fills and matching the text.
struct ResolvedQuestion {
  enum class Kind { kEntity, kRelationStep };
  Kind kind = Kind::kEntity;
  std::string entity_type;            // kEntity
  const RelationChain* chain = nullptr;  // kRelationStep
  int step_index = 0;
};

class QuestionResolver {
 public:
  explicit QuestionResolver(const TemplateSet* templates) : templates_(templates) {}
  std::optional<ResolvedQuestion> resolve(const Question& question) const;

 private:
  const TemplateSet* templates_;
};

/// Gold answer spans for a resolved question in one sentence. Relation
/// steps match record prefixes (absent slots match the `none` fill) on
/// hierarchical chains and gold triples on single-step chains.
std::vector<Span> gold_answer_spans(const ResolvedQuestion& resolved, const Question& question,
                                    const AnnotatedSentence& sentence, const Schema& schema);

/// Answers from gold annotations; used to test orchestration and scoring
/// independently of any learned model.
class OracleExtractor : public AnswerExtractor {
 public:
  OracleExtractor(const Corpus* gold, const Schema* schema, const TemplateSet* templates);

  std::vector<ScoredSpan> extract(const Question& question,
                                  const std::vector<std::string>& context) const override;

 private:
  const Corpus* gold_;
  const Schema* schema_;
  QuestionResolver resolver_;
  std::unordered_map<std::string, std::vector<size_t>> by_context_;
};

}  // namespace mtqa
