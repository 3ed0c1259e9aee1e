#pragma once

#include <string>
#include <vector>

#include "mtqa/extractor.hpp"

namespace mtqa {

/// Structured result of one chain over one sentence: rows aligned to the
/// chain's slot names, deduplicated and sorted.
struct ExtractionTable {
  std::string chain_name;
  std::vector<std::string> slot_names;
  std::vector<HierRecord> rows;
};

/// Provenance for one question-answer turn.
struct TurnRecord {
  int turn_index = 0;
  Question question;
  std::vector<ScoredSpan> answers;
  std::vector<ScoredSpan> chosen;
};

struct SentenceExtraction {
  std::vector<EntityMention> mentions;  // stage-1 entity predictions
  std::vector<ExtractionTable> tables;  // one per chain
  std::vector<RelationTriple> triples;  // flattened over tables
  std::vector<TurnRecord> turns;
};

/// Stage 1: every entity-question template is asked once; answers become
/// typed mentions, deduplicated by (span, type).
std::vector<EntityMention> extract_head_entities(const AnswerExtractor& model,
                                                 const TemplateSet& templates,
                                                 const AnnotatedSentence& sentence,
                                                 QuestionMode mode,
                                                 std::vector<TurnRecord>* turns = nullptr);

/// Stage 2 for one head entity: depth-wise expansion of the chain, one
/// branch per decoded answer. NONE keeps the branch alive with an absent
/// slot when the slot is optional and kills it otherwise.
std::vector<HierRecord> run_relation_chain(const AnswerExtractor& model,
                                           const RelationChain& chain, const Schema& schema,
                                           const EntityMention& head,
                                           const AnnotatedSentence& sentence, QuestionMode mode,
                                           std::vector<TurnRecord>* turns = nullptr);

/// Full pipeline over one sentence: head extraction, then every chain run
/// from every head whose type matches the chain's first slot.
SentenceExtraction extract_table(const AnswerExtractor& model, const TemplateSet& templates,
                                 const Schema& schema, const AnnotatedSentence& sentence,
                                 QuestionMode mode);

/// Flattens table rows into relation triples along the chain links;
/// duplicates are removed.
std::vector<RelationTriple> table_to_triples(const ExtractionTable& table,
                                             const RelationChain& chain);

/// Runs extract_table over a corpus, optionally over several worker
/// threads; output order always follows input order.
std::vector<SentenceExtraction> extract_corpus(const AnswerExtractor& model,
                                               const TemplateSet& templates, const Schema& schema,
                                               const Corpus& corpus, QuestionMode mode,
                                               int jobs = 1);

/// JSONL serialization mirroring the record corpus format, with embedded
/// triple mentions and turn provenance.
std::string serialize_extractions(const std::vector<SentenceExtraction>& extractions,
                                  const Corpus& sentences, const Schema& schema);

}  // namespace mtqa
