#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtqa/corpus.hpp"

namespace mtqa {

/// One sentence pattern. `text` is a space-separated token stream in which
/// `{type}` or `{type:name}` draws a surface from the lexicon of `type`;
/// a named placeholder can be referenced by gold annotations.
///
/// `triples` lists [relation, head_name, tail_name]; `records` lists one
/// entry per chain slot, each a placeholder name or "-" for an absent slot.
struct SentencePattern {
  std::string text;
  std::vector<std::vector<std::string>> triples;
  std::vector<std::vector<std::string>> records;
  double weight = 1.0;
};

/// Lexicons plus sentence patterns driving synthesize_corpus. `chain_links`
/// (relation, head slot name, tail slot name) optionally derives gold
/// triples from every generated record.
struct GrammarConfig {
  std::map<std::string, std::vector<std::string>> lexicons;
  std::vector<SentencePattern> patterns;
  std::vector<std::vector<std::string>> chain_links;

  /// Throws ConfigError on empty lexicons, unknown types, bad placeholder
  /// references, or record width mismatching the schema chain.
  void validate(const Schema& schema) const;
};

GrammarConfig parse_grammar(const std::string& json_text, const Schema& schema);
std::string serialize_grammar(const GrammarConfig& grammar);
GrammarConfig load_grammar_file(const std::string& path, const Schema& schema);

/// Generates n sentences with exact gold annotations. Deterministic for a
/// fixed (schema, grammar, n, seed).
Corpus synthesize_corpus(const Schema& schema, const GrammarConfig& grammar, size_t n,
                         uint64_t seed);

/// Resolves the grammar's chain_links against the schema chain slots.
std::vector<ChainStepLink> grammar_chain_links(const GrammarConfig& grammar,
                                               const Schema& schema);

/// Desk-scale flat triplet task: person/company/place entities with
/// works_for and lives_in relations, two QA turns.
Schema builtin_flat_schema();
GrammarConfig builtin_flat_grammar();

/// Desk-scale hierarchical task shaped like a work-history table:
/// Person -> Company -> Position -> Time with Position optional.
Schema builtin_resume_schema();
GrammarConfig builtin_resume_grammar();

/// Picks the builtin grammar matching the schema shape (flat vs chained).
GrammarConfig builtin_grammar_for(const Schema& schema);

}  // namespace mtqa
