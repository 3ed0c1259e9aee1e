#include "mtqa/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mtqa {

using ordered_json = nlohmann::ordered_json;

Prf micro_prf(const MatchCounts& counts) {
  if (counts.tp > counts.predicted || counts.tp > counts.gold)
    throw ArgumentError("micro_prf: true positives exceed predicted or gold totals");
  Prf out;
  out.p = counts.predicted ? static_cast<double>(counts.tp) / static_cast<double>(counts.predicted)
                           : 0.0;
  out.r = counts.gold ? static_cast<double>(counts.tp) / static_cast<double>(counts.gold) : 0.0;
  out.f = (out.p + out.r) > 0 ? 2.0 * out.p * out.r / (out.p + out.r) : 0.0;
  return out;
}

std::string render_pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
  return buf;
}

namespace {

std::string span_key(const Span& s) {
  return std::to_string(s.start) + ":" + std::to_string(s.end);
}

/// Pooled one-to-one matching: per sentence, tp contribution per key is
/// min(pred multiplicity, gold multiplicity).
void match_keys(const std::vector<std::pair<std::string, std::string>>& pred_keys,
                const std::vector<std::pair<std::string, std::string>>& gold_keys,
                TypedCounts& out) {
  std::map<std::string, std::pair<size_t, size_t>> table;  // key -> (pred count, gold count)
  std::map<std::string, std::string> bucket_of;
  for (const auto& [key, bucket] : pred_keys) {
    table[key].first++;
    bucket_of[key] = bucket;
  }
  for (const auto& [key, bucket] : gold_keys) {
    table[key].second++;
    bucket_of[key] = bucket;
  }
  for (const auto& [key, counts] : table) {
    const auto& bucket = bucket_of[key];
    size_t tp = std::min(counts.first, counts.second);
    out.overall.tp += tp;
    out.overall.predicted += counts.first;
    out.overall.gold += counts.second;
    auto& b = out.per_type[bucket];
    b.tp += tp;
    b.predicted += counts.first;
    b.gold += counts.second;
  }
}

}  // namespace

TypedCounts match_entities(const std::vector<std::vector<EntityMention>>& pred,
                           const std::vector<std::vector<EntityMention>>& gold) {
  if (pred.size() != gold.size())
    throw ArgumentError("match_entities: prediction/gold sentence counts differ");
  TypedCounts out;
  for (size_t i = 0; i < pred.size(); ++i) {
    std::vector<std::pair<std::string, std::string>> pk, gk;
    for (const auto& m : pred[i]) pk.emplace_back(span_key(m.span) + "|" + m.type, m.type);
    for (const auto& m : gold[i]) gk.emplace_back(span_key(m.span) + "|" + m.type, m.type);
    match_keys(pk, gk, out);
  }
  return out;
}

TypedCounts match_relations(const std::vector<std::vector<RelationTriple>>& pred,
                            const std::vector<std::vector<RelationTriple>>& gold,
                            bool require_entity_types) {
  if (pred.size() != gold.size())
    throw ArgumentError("match_relations: prediction/gold sentence counts differ");
  TypedCounts out;
  auto key = [&](const RelationTriple& t) {
    std::string k = span_key(t.head.span);
    if (require_entity_types) k += "|" + t.head.type;
    k += "|" + t.relation + "|" + span_key(t.tail.span);
    if (require_entity_types) k += "|" + t.tail.type;
    return k;
  };
  for (size_t i = 0; i < pred.size(); ++i) {
    std::vector<std::pair<std::string, std::string>> pk, gk;
    for (const auto& t : pred[i]) pk.emplace_back(key(t), t.relation);
    for (const auto& t : gold[i]) gk.emplace_back(key(t), t.relation);
    match_keys(pk, gk, out);
  }
  return out;
}

std::vector<SlotRow> slot_report(const std::vector<std::vector<HierRecord>>& pred_rows,
                                 const std::vector<std::vector<HierRecord>>& gold_records,
                                 const Schema& schema, bool dependency_aware) {
  if (pred_rows.size() != gold_records.size())
    throw ArgumentError("slot_report: prediction/gold sentence counts differ");
  if (!schema.hierarchical()) throw SchemaError("slot_report needs a schema with chain slots");
  const size_t n_slots = schema.chain_slots.size();

  std::vector<SlotRow> rows(n_slots);
  for (size_t k = 0; k < n_slots; ++k) rows[k].slot = schema.chain_slots[k];

  auto prefix_key = [&](const HierRecord& rec, size_t k) {
    std::string key;
    const size_t from = dependency_aware ? 0 : k;
    for (size_t j = from; j <= k; ++j) {
      key += rec.slots[j] ? span_key(rec.slots[j]->span) : "ABSENT";
      key += '|';
    }
    return key;
  };

  for (size_t i = 0; i < pred_rows.size(); ++i) {
    for (size_t k = 0; k < n_slots; ++k) {
      std::map<std::string, std::pair<size_t, size_t>> table;
      for (const auto& rec : pred_rows[i]) {
        if (rec.slots.size() != n_slots)
          throw SchemaError("slot_report: predicted row width mismatches the schema chain");
        if (rec.slots[k]) table[prefix_key(rec, k)].first++;
      }
      for (const auto& rec : gold_records[i]) {
        if (rec.slots.size() != n_slots)
          throw SchemaError("slot_report: gold record width mismatches the schema chain");
        if (rec.slots[k]) table[prefix_key(rec, k)].second++;
      }
      for (const auto& [key, counts] : table) {
        rows[k].counts.tp += std::min(counts.first, counts.second);
        rows[k].counts.predicted += counts.first;
        rows[k].counts.gold += counts.second;
      }
    }
  }

  SlotRow all;
  all.slot = "all";
  for (auto& r : rows) {
    r.prf = micro_prf(r.counts);
    all.counts += r.counts;
  }
  all.prf = micro_prf(all.counts);
  rows.push_back(std::move(all));
  return rows;
}

// ---------------------------------------------------------------------------
// Prediction loading
// ---------------------------------------------------------------------------

namespace {

Span pred_span_from_json(const ordered_json& j) {
  return Span{j.at("start").get<int>(), j.at("end").get<int>()};
}

EntityMention pred_mention_from_json(const ordered_json& j) {
  return EntityMention{pred_span_from_json(j), j.at("type").get<std::string>()};
}

}  // namespace

std::vector<PredictionSentence> parse_predictions(const std::string& text, const Schema& schema) {
  std::vector<PredictionSentence> out;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
    PredictionSentence p;
    p.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("mentions"))
      for (const auto& jm : j["mentions"]) p.mentions.push_back(pred_mention_from_json(jm));
    for (const char* field : {"rows", "records"}) {
      if (!j.contains(field)) continue;
      for (const auto& jr : j[field]) {
        HierRecord rec;
        std::vector<std::string> keys;
        for (auto it = jr.begin(); it != jr.end(); ++it) keys.push_back(it.key());
        if (keys != schema.chain_slots)
          throw SchemaError("predictions line " + std::to_string(line_no) +
                            ": row slot order disagrees with schema chain");
        for (const auto& key : keys) {
          if (jr[key].is_null())
            rec.slots.emplace_back(std::nullopt);
          else
            rec.slots.emplace_back(EntityMention{pred_span_from_json(jr[key]), key});
        }
        p.rows.push_back(std::move(rec));
      }
    }
    if (j.contains("triples")) {
      for (const auto& jt : j["triples"]) {
        RelationTriple t;
        t.relation = jt.at("relation").get<std::string>();
        if (jt.at("head").is_object()) {
          t.head = pred_mention_from_json(jt["head"]);
          t.tail = pred_mention_from_json(jt.at("tail"));
        } else {
          int hi = jt.at("head").get<int>();
          int ti = jt.at("tail").get<int>();
          if (hi < 0 || static_cast<size_t>(hi) >= p.mentions.size() || ti < 0 ||
              static_cast<size_t>(ti) >= p.mentions.size())
            throw ParseError("predictions line " + std::to_string(line_no) +
                             ": triple mention index out of range");
          t.head = p.mentions[static_cast<size_t>(hi)];
          t.tail = p.mentions[static_cast<size_t>(ti)];
        }
        p.triples.push_back(std::move(t));
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PredictionSentence> load_predictions_file(const std::string& path,
                                                      const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open predictions file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_predictions(buf.str(), schema);
}

std::vector<PredictionSentence> predictions_from_extractions(
    const std::vector<SentenceExtraction>& extractions, const Corpus& sentences,
    const Schema& schema) {
  if (extractions.size() != sentences.size())
    throw ArgumentError("predictions_from_extractions: size mismatch");
  std::vector<PredictionSentence> out(extractions.size());
  for (size_t i = 0; i < extractions.size(); ++i) {
    out[i].tokens = sentences[i].tokens;
    out[i].mentions = extractions[i].mentions;
    out[i].triples = extractions[i].triples;
    for (const auto& table : extractions[i].tables)
      if (table.slot_names == schema.chain_slots)
        out[i].rows.insert(out[i].rows.end(), table.rows.begin(), table.rows.end());
  }
  return out;
}

std::vector<PredictionSentence> predictions_from_gold(const Corpus& corpus) {
  std::vector<PredictionSentence> out(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    out[i].tokens = corpus[i].tokens;
    out[i].mentions = corpus[i].mentions;
    out[i].triples = corpus[i].triples;
    out[i].rows = corpus[i].records;
  }
  return out;
}

EvalReport evaluate_predictions(const std::vector<PredictionSentence>& pred, const Corpus& gold,
                                const Schema& schema, const EvalOptions& options) {
  if (pred.size() != gold.size())
    throw ValidationError("evaluation: prediction/gold sentence counts differ");
  for (size_t i = 0; i < pred.size(); ++i)
    if (!pred[i].tokens.empty() && pred[i].tokens != gold[i].tokens)
      throw ValidationError("evaluation: sentence " + std::to_string(i) +
                            " tokens differ between predictions and gold");

  std::vector<std::vector<EntityMention>> pm(pred.size()), gm(pred.size());
  std::vector<std::vector<RelationTriple>> pt(pred.size()), gt(pred.size());
  std::vector<std::vector<HierRecord>> pr(pred.size()), gr(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    pm[i] = pred[i].mentions;
    gm[i] = gold[i].mentions;
    pt[i] = pred[i].triples;
    gt[i] = gold[i].triples;
    pr[i] = pred[i].rows;
    gr[i] = gold[i].records;
  }

  EvalReport report;
  report.entities = match_entities(pm, gm);
  report.relations = match_relations(pt, gt, options.relation_require_entity_types);
  report.entity_prf = micro_prf(report.entities.overall);
  report.relation_prf = micro_prf(report.relations.overall);
  if (schema.hierarchical()) {
    report.slots = slot_report(pr, gr, schema, options.dependency_aware_slots);
    report.slot_all_prf = report.slots.back().prf;
    report.has_slots = true;
  }
  return report;
}

EvalReport evaluate_extractions(const std::vector<SentenceExtraction>& extractions,
                                const Corpus& gold, const Schema& schema,
                                const EvalOptions& options) {
  return evaluate_predictions(predictions_from_extractions(extractions, gold, schema), gold,
                              schema, options);
}

// ---------------------------------------------------------------------------
// Rendering and (de)serialization
// ---------------------------------------------------------------------------

namespace {

void render_block(std::string& out, const std::string& title, const TypedCounts& counts,
                  const Prf& overall) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-22s %7s %7s %7s %7s %7s %7s\n", title.c_str(), "p", "r", "f",
                "tp", "pred", "gold");
  out += buf;
  auto line = [&](const std::string& name, const MatchCounts& c, const Prf& prf) {
    std::snprintf(buf, sizeof buf, "%-22s %7s %7s %7s %7zu %7zu %7zu\n", name.c_str(),
                  render_pct(prf.p).c_str(), render_pct(prf.r).c_str(), render_pct(prf.f).c_str(),
                  c.tp, c.predicted, c.gold);
    out += buf;
  };
  for (const auto& [type, c] : counts.per_type) line(type, c, micro_prf(c));
  line("micro", counts.overall, overall);
}

ordered_json counts_json(const MatchCounts& c, const Prf& prf) {
  return ordered_json{{"tp", c.tp},      {"predicted", c.predicted}, {"gold", c.gold},
                      {"p", prf.p},      {"r", prf.r},               {"f", prf.f}};
}

void counts_from_json(const ordered_json& j, MatchCounts& c, Prf& prf) {
  c.tp = j.at("tp").get<size_t>();
  c.predicted = j.at("predicted").get<size_t>();
  c.gold = j.at("gold").get<size_t>();
  prf.p = j.at("p").get<double>();
  prf.r = j.at("r").get<double>();
  prf.f = j.at("f").get<double>();
}

}  // namespace

std::string render_report_table(const EvalReport& report) {
  std::string out;
  render_block(out, "entities", report.entities, report.entity_prf);
  out += '\n';
  render_block(out, "relations", report.relations, report.relation_prf);
  if (report.has_slots) {
    out += '\n';
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %7s %7s %7s %7s %7s %7s\n", "slots", "p", "r", "f", "tp",
                  "pred", "gold");
    out += buf;
    for (const auto& row : report.slots) {
      std::snprintf(buf, sizeof buf, "%-22s %7s %7s %7s %7zu %7zu %7zu\n", row.slot.c_str(),
                    render_pct(row.prf.p).c_str(), render_pct(row.prf.r).c_str(),
                    render_pct(row.prf.f).c_str(), row.counts.tp, row.counts.predicted,
                    row.counts.gold);
      out += buf;
    }
  }
  return out;
}

std::string serialize_report(const EvalReport& report) {
  ordered_json j;
  auto typed = [&](const TypedCounts& counts, const Prf& overall) {
    ordered_json o;
    o["overall"] = counts_json(counts.overall, overall);
    ordered_json per = ordered_json::object();
    for (const auto& [type, c] : counts.per_type) per[type] = counts_json(c, micro_prf(c));
    o["per_type"] = per;
    return o;
  };
  j["entities"] = typed(report.entities, report.entity_prf);
  j["relations"] = typed(report.relations, report.relation_prf);
  if (report.has_slots) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : report.slots) {
      ordered_json o = counts_json(row.counts, row.prf);
      o["slot"] = row.slot;
      rows.push_back(o);
    }
    j["slots"] = rows;
  }
  return j.dump(2) + "\n";
}

EvalReport parse_report(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  EvalReport report;
  auto typed = [&](const ordered_json& o, TypedCounts& counts, Prf& overall) {
    counts_from_json(o.at("overall"), counts.overall, overall);
    for (auto it = o.at("per_type").begin(); it != o.at("per_type").end(); ++it) {
      Prf ignored;
      counts_from_json(it.value(), counts.per_type[it.key()], ignored);
    }
  };
  typed(j.at("entities"), report.entities, report.entity_prf);
  typed(j.at("relations"), report.relations, report.relation_prf);
  if (j.contains("slots")) {
    report.has_slots = true;
    for (const auto& jr : j["slots"]) {
      SlotRow row;
      row.slot = jr.at("slot").get<std::string>();
      counts_from_json(jr, row.counts, row.prf);
      report.slots.push_back(std::move(row));
    }
    if (!report.slots.empty()) report.slot_all_prf = report.slots.back().prf;
  }
  return report;
}

}  // namespace mtqa
