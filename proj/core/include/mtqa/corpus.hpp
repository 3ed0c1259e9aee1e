#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtqa/errors.hpp"

namespace mtqa {

/// Token-level span, inclusive on both ends.
struct Span {
  int start = 0;
  int end = 0;

  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
  int length() const { return end - start + 1; }
};

struct EntityMention {
  Span span;
  std::string type;

  bool operator==(const EntityMention&) const = default;
  auto operator<=>(const EntityMention&) const = default;
};

struct RelationTriple {
  EntityMention head;
  std::string relation;
  EntityMention tail;

  bool operator==(const RelationTriple&) const = default;
  auto operator<=>(const RelationTriple&) const = default;
};

/// One row of a structured table: one optional mention per chain slot,
/// in schema chain order. The first slot is always present.
struct HierRecord {
  std::vector<std::optional<EntityMention>> slots;

  bool operator==(const HierRecord&) const = default;
};

struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<EntityMention> mentions;
  std::vector<RelationTriple> triples;
  std::vector<HierRecord> records;

  bool operator==(const AnnotatedSentence&) const = default;
  std::string surface(const Span& s) const;
};

using Corpus = std::vector<AnnotatedSentence>;

/// Label inventory for a task: entity types, relation types, and (for
/// hierarchical corpora) the ordered chain slots. Slot names are entity
/// types; optional_slots lists slots that may be empty mid-chain.
struct Schema {
  std::vector<std::string> entity_types;
  std::vector<std::string> relation_types;
  std::vector<std::string> chain_slots;
  std::vector<std::string> optional_slots;

  bool operator==(const Schema&) const = default;

  bool has_entity_type(const std::string& t) const;
  bool has_relation_type(const std::string& r) const;
  bool slot_optional(const std::string& slot) const;
  int slot_index(const std::string& slot) const;  // -1 if unknown
  bool hierarchical() const { return !chain_slots.empty(); }

  /// Throws SchemaError when label sets are empty or contain duplicates, or
  /// chain slots are not declared entity types.
  void validate() const;
};

Schema parse_schema(const std::string& json_text);
std::string serialize_schema(const Schema& schema);
Schema load_schema_file(const std::string& path);

/// One step of a relation chain as plain data: the relation label plus the
/// chain-slot indices of its head and tail entities.
struct ChainStepLink {
  std::string relation;
  int head_slot = 0;
  int tail_slot = 0;
};

/// Flattens a record into triples following the chain links. Steps whose
/// head or tail slot is absent in the record contribute nothing.
std::vector<RelationTriple> flatten_record(const HierRecord& record,
                                           const std::vector<ChainStepLink>& links);

/// Validates span bounds, mention/record/table cross-references, and slot
/// layout against the schema. Throws ValidationError/SchemaError with the
/// sentence index in the message.
void validate_sentence(const AnnotatedSentence& sentence, const Schema& schema,
                       size_t sentence_index);
void validate_corpus(const Corpus& corpus, const Schema& schema);

/// Column format: blank-line separated blocks of
///   <tokens, space separated>
///   ENT <start> <end> <type>
///   REL <head_mention_idx> <tail_mention_idx> <relation>
Corpus parse_column_corpus(std::istream& in, const Schema& schema);
Corpus parse_column_corpus(const std::string& text, const Schema& schema);
std::string serialize_column_corpus(const Corpus& corpus);

/// Record format: one JSON object per line with fields `tokens`, `records`
/// (slot name -> {start, end} or null, in schema chain order), and optional
/// `mentions` / `triples`.
Corpus parse_record_corpus(std::istream& in, const Schema& schema);
Corpus parse_record_corpus(const std::string& text, const Schema& schema);
std::string serialize_record_corpus(const Corpus& corpus, const Schema& schema);

/// Reads a corpus file, sniffing the format from the first non-blank line
/// ('{' starts the record format).
Corpus load_corpus_file(const std::string& path, const Schema& schema);
void save_corpus_file(const std::string& path, const Corpus& corpus, const Schema& schema,
                      const std::string& format);

/// Deterministic split into train/dev/test. Ratios must be positive and sum
/// to 1 within 1e-9. Dev and test sizes are floored; train takes the rest.
struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};
struct CorpusSplit {
  Corpus train;
  Corpus dev;
  Corpus test;
};
CorpusSplit split_corpus(const Corpus& corpus, const SplitRatios& ratios, uint64_t seed);

/// Exact per-type totals plus per-passage averages (full precision; render
/// to two decimals for display).
struct CorpusStats {
  size_t passages = 0;
  std::map<std::string, size_t> entity_totals;
  std::map<std::string, size_t> relation_totals;
  std::map<std::string, double> entity_averages;
  std::map<std::string, double> relation_averages;
};
CorpusStats corpus_stats(const Corpus& corpus);
std::string render_stats_table(const CorpusStats& stats);

}  // namespace mtqa
