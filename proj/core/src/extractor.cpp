#include "mtqa/extractor.hpp"

#include <algorithm>
#include <set>

namespace mtqa {

std::vector<ScoredSpan> extract_answer(const EncoderParams& params, const Vocabulary& vocab,
                                       const Question& question,
                                       const std::vector<std::string>& context,
                                       const DecodingConfig& decoding) {
  ModelInput input = build_input(question, context, vocab, params.config.max_len);
  TagDistribution dist = encode_and_tag(params, input);
  return decode_spans(dist, decoding);
}

std::vector<ScoredSpan> LearnedExtractor::extract(const Question& question,
                                                  const std::vector<std::string>& context) const {
  return extract_answer(*params_, *vocab_, question, context, decoding_);
}

std::optional<ResolvedQuestion> QuestionResolver::resolve(const Question& question) const {
  if (question.filled_entities.empty()) {
    for (const auto& tmpl : templates_->entity_questions) {
      for (auto mode : {QuestionMode::kNatural, QuestionMode::kPseudo}) {
        if (render_entity_question(tmpl, mode).text == question.text) {
          ResolvedQuestion r;
          r.kind = ResolvedQuestion::Kind::kEntity;
          r.entity_type = tmpl.entity_type;
          return r;
        }
      }
    }
    return std::nullopt;
  }
  for (const auto& chain : templates_->chains) {
    for (size_t k = 0; k < chain.steps.size(); ++k) {
      const auto& step = chain.steps[k];
      if (static_cast<size_t>(step.arity) != question.filled_entities.size()) continue;
      for (auto mode : {QuestionMode::kNatural, QuestionMode::kPseudo}) {
        Question candidate =
            render_relation_question(step, question.filled_entities, mode, question.turn_index);
        if (candidate.text == question.text) {
          ResolvedQuestion r;
          r.kind = ResolvedQuestion::Kind::kRelationStep;
          r.chain = &chain;
          r.step_index = static_cast<int>(k);
          return r;
        }
      }
    }
  }
  return std::nullopt;
}

std::vector<Span> gold_answer_spans(const ResolvedQuestion& resolved, const Question& question,
                                    const AnnotatedSentence& sentence, const Schema& schema) {
  std::set<Span> spans;
  if (resolved.kind == ResolvedQuestion::Kind::kEntity) {
    for (const auto& m : sentence.mentions)
      if (m.type == resolved.entity_type) spans.insert(m.span);
    return {spans.begin(), spans.end()};
  }

  const auto& chain = *resolved.chain;
  const auto& step = chain.steps[static_cast<size_t>(resolved.step_index)];
  const auto& fills = question.filled_entities;
  const size_t k = static_cast<size_t>(resolved.step_index);

  if (chain.slot_names == schema.chain_slots && schema.hierarchical()) {
    for (const auto& rec : sentence.records) {
      bool prefix_match = true;
      for (size_t j = 0; j <= k && prefix_match; ++j) {
        const auto& slot = rec.slots[j];
        if (slot) {
          prefix_match = sentence.surface(slot->span) == fills[j];
        } else {
          prefix_match = fills[j] == kAbsentFill;
        }
      }
      if (prefix_match && rec.slots[k + 1]) spans.insert(rec.slots[k + 1]->span);
    }
    return {spans.begin(), spans.end()};
  }

  // single-step (triplet) chains answer from gold triples
  for (const auto& t : sentence.triples) {
    if (t.relation != step.relation) continue;
    if (t.head.type != step.head_type || t.tail.type != step.tail_type) continue;
    if (sentence.surface(t.head.span) != fills[0]) continue;
    spans.insert(t.tail.span);
  }
  return {spans.begin(), spans.end()};
}

namespace {

std::string context_key(const std::vector<std::string>& tokens) {
  std::string key;
  for (const auto& t : tokens) {
    key += t;
    key += '\x1f';
  }
  return key;
}

}  // namespace

OracleExtractor::OracleExtractor(const Corpus* gold, const Schema* schema,
                                 const TemplateSet* templates)
    : gold_(gold), schema_(schema), resolver_(templates) {
  for (size_t i = 0; i < gold_->size(); ++i)
    by_context_[context_key((*gold_)[i].tokens)].push_back(i);
}

std::vector<ScoredSpan> OracleExtractor::extract(const Question& question,
                                                 const std::vector<std::string>& context) const {
  auto resolved = resolver_.resolve(question);
  if (!resolved) return {};
  auto it = by_context_.find(context_key(context));
  if (it == by_context_.end()) return {};
  std::set<Span> spans;
  for (size_t idx : it->second) {
    auto s = gold_answer_spans(*resolved, question, (*gold_)[idx], *schema_);
    spans.insert(s.begin(), s.end());
  }
  std::vector<ScoredSpan> out;
  out.reserve(spans.size());
  for (const auto& s : spans) out.push_back(ScoredSpan{s, 0.0});
  return out;
}

}  // namespace mtqa
