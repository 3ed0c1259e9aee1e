#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtqa/orchestrator.hpp"

namespace mtqa {

struct MatchCounts {
  size_t tp = 0;
  size_t predicted = 0;
  size_t gold = 0;

  bool operator==(const MatchCounts&) const = default;
  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }
};

struct Prf {
  double p = 0;
  double r = 0;
  double f = 0;
};

/// p = tp/predicted, r = tp/gold, f = harmonic mean; zero denominators give
/// zero, never NaN. Values are fractions; render multiplies by 100.
Prf micro_prf(const MatchCounts& counts);
std::string render_pct(double fraction);  // one decimal, e.g. "84.8"

struct TypedCounts {
  MatchCounts overall;
  std::map<std::string, MatchCounts> per_type;
};

/// One sentence worth of predictions, loadable from extraction output or
/// from a gold-style record corpus.
struct PredictionSentence {
  std::vector<std::string> tokens;
  std::vector<EntityMention> mentions;
  std::vector<RelationTriple> triples;
  std::vector<HierRecord> rows;
};

std::vector<PredictionSentence> parse_predictions(const std::string& text, const Schema& schema);
std::vector<PredictionSentence> load_predictions_file(const std::string& path,
                                                      const Schema& schema);
std::vector<PredictionSentence> predictions_from_extractions(
    const std::vector<SentenceExtraction>& extractions, const Corpus& sentences,
    const Schema& schema);
std::vector<PredictionSentence> predictions_from_gold(const Corpus& corpus);

/// Exact one-to-one (span, type) matching, pooled over sentences; the
/// sentence lists must be aligned.
TypedCounts match_entities(const std::vector<std::vector<EntityMention>>& pred,
                           const std::vector<std::vector<EntityMention>>& gold);

/// Triple matching on (head span+type, relation, tail span+type); pass
/// require_entity_types=false to match on spans and relation only.
TypedCounts match_relations(const std::vector<std::vector<RelationTriple>>& pred,
                            const std::vector<std::vector<RelationTriple>>& gold,
                            bool require_entity_types = true);

struct SlotRow {
  std::string slot;
  MatchCounts counts;
  Prf prf;
};

/// Per-slot scoring of predicted rows against gold records. With
/// dependency_aware credit a slot counts only when every earlier slot of
/// its row also matches the same gold prefix.
std::vector<SlotRow> slot_report(const std::vector<std::vector<HierRecord>>& pred_rows,
                                 const std::vector<std::vector<HierRecord>>& gold_records,
                                 const Schema& schema, bool dependency_aware = true);

struct EvalOptions {
  bool dependency_aware_slots = true;
  bool relation_require_entity_types = true;
};

struct EvalReport {
  TypedCounts entities;
  TypedCounts relations;
  std::vector<SlotRow> slots;  // empty for flat corpora; last row is "all"
  Prf entity_prf;
  Prf relation_prf;
  Prf slot_all_prf;
  bool has_slots = false;
};

EvalReport evaluate_predictions(const std::vector<PredictionSentence>& pred, const Corpus& gold,
                                const Schema& schema, const EvalOptions& options = {});
EvalReport evaluate_extractions(const std::vector<SentenceExtraction>& extractions,
                                const Corpus& gold, const Schema& schema,
                                const EvalOptions& options = {});

std::string render_report_table(const EvalReport& report);
std::string serialize_report(const EvalReport& report);
EvalReport parse_report(const std::string& json_text);

}  // namespace mtqa
