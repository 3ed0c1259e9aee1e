#include "mtqa/orchestrator.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

namespace mtqa {

using ordered_json = nlohmann::ordered_json;

namespace {

bool row_less(const HierRecord& a, const HierRecord& b) {
  const size_t n = std::min(a.slots.size(), b.slots.size());
  for (size_t i = 0; i < n; ++i) {
    const bool ha = a.slots[i].has_value(), hb = b.slots[i].has_value();
    if (ha != hb) return !ha;  // absent sorts first
    if (ha && hb && !(*a.slots[i] == *b.slots[i])) return *a.slots[i] < *b.slots[i];
  }
  return a.slots.size() < b.slots.size();
}

void sort_dedup_rows(std::vector<HierRecord>& rows) {
  std::sort(rows.begin(), rows.end(), row_less);
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
}

}  // namespace

std::vector<EntityMention> extract_head_entities(const AnswerExtractor& model,
                                                 const TemplateSet& templates,
                                                 const AnnotatedSentence& sentence,
                                                 QuestionMode mode,
                                                 std::vector<TurnRecord>* turns) {
  if (templates.entity_questions.empty())
    throw ArgumentError("extract_head_entities: no entity-question templates");
  std::vector<EntityMention> mentions;
  if (sentence.tokens.empty()) return mentions;
  for (const auto& tmpl : templates.entity_questions) {
    Question q = render_entity_question(tmpl, mode);
    auto answers = model.extract(q, sentence.tokens);
    if (turns) turns->push_back(TurnRecord{0, q, answers, answers});
    for (const auto& a : answers)
      mentions.push_back(EntityMention{a.span, tmpl.entity_type});
  }
  std::sort(mentions.begin(), mentions.end());
  mentions.erase(std::unique(mentions.begin(), mentions.end()), mentions.end());
  return mentions;
}

std::vector<HierRecord> run_relation_chain(const AnswerExtractor& model,
                                           const RelationChain& chain, const Schema& schema,
                                           const EntityMention& head,
                                           const AnnotatedSentence& sentence, QuestionMode mode,
                                           std::vector<TurnRecord>* turns) {
  std::vector<HierRecord> branches(1);
  branches[0].slots.push_back(head);

  for (size_t k = 0; k < chain.steps.size(); ++k) {
    const auto& step = chain.steps[k];
    const std::string& slot_name =
        k + 1 < chain.slot_names.size() ? chain.slot_names[k + 1] : step.tail_type;
    const bool optional_slot = schema.slot_optional(slot_name);

    std::vector<HierRecord> next;
    for (auto& branch : branches) {
      std::vector<std::string> fills;
      fills.reserve(branch.slots.size());
      for (const auto& slot : branch.slots)
        fills.push_back(slot ? sentence.surface(slot->span) : kAbsentFill);
      Question q =
          render_relation_question(step, fills, mode, static_cast<int>(k) + 1);
      auto answers = model.extract(q, sentence.tokens);
      if (turns) turns->push_back(TurnRecord{static_cast<int>(k) + 1, q, answers, answers});
      if (answers.empty()) {
        if (optional_slot) {
          HierRecord extended = branch;
          extended.slots.emplace_back(std::nullopt);
          next.push_back(std::move(extended));
        }
        // mandatory step with NONE: the branch fails the completeness check
        continue;
      }
      for (const auto& a : answers) {
        HierRecord extended = branch;
        extended.slots.emplace_back(EntityMention{a.span, step.tail_type});
        next.push_back(std::move(extended));
      }
    }
    branches = std::move(next);
    if (branches.empty()) break;
  }
  sort_dedup_rows(branches);
  return branches;
}

SentenceExtraction extract_table(const AnswerExtractor& model, const TemplateSet& templates,
                                 const Schema& schema, const AnnotatedSentence& sentence,
                                 QuestionMode mode) {
  SentenceExtraction out;
  if (sentence.tokens.empty()) return out;
  out.mentions = extract_head_entities(model, templates, sentence, mode, &out.turns);

  std::set<RelationTriple> triples;
  for (const auto& chain : templates.chains) {
    ExtractionTable table;
    table.chain_name = chain.name;
    table.slot_names = chain.slot_names;
    const std::string& head_type = chain.slot_names.empty() ? "" : chain.slot_names[0];
    for (const auto& head : out.mentions) {
      if (head.type != head_type) continue;
      auto rows = run_relation_chain(model, chain, schema, head, sentence, mode, &out.turns);
      table.rows.insert(table.rows.end(), rows.begin(), rows.end());
    }
    sort_dedup_rows(table.rows);
    for (auto&& t : table_to_triples(table, chain)) triples.insert(std::move(t));
    out.tables.push_back(std::move(table));
  }
  out.triples.assign(triples.begin(), triples.end());
  return out;
}

std::vector<RelationTriple> table_to_triples(const ExtractionTable& table,
                                             const RelationChain& chain) {
  const auto links = chain_links(chain);
  std::set<RelationTriple> triples;
  for (const auto& row : table.rows)
    for (auto&& t : flatten_record(row, links)) triples.insert(std::move(t));
  return {triples.begin(), triples.end()};
}

std::vector<SentenceExtraction> extract_corpus(const AnswerExtractor& model,
                                               const TemplateSet& templates, const Schema& schema,
                                               const Corpus& corpus, QuestionMode mode,
                                               int jobs) {
  std::vector<SentenceExtraction> out(corpus.size());
  if (jobs <= 1 || corpus.size() < 2) {
    for (size_t i = 0; i < corpus.size(); ++i)
      out[i] = extract_table(model, templates, schema, corpus[i], mode);
    return out;
  }
  const size_t workers = std::min<size_t>(static_cast<size_t>(jobs), corpus.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (size_t i = w; i < corpus.size(); i += workers)
        out[i] = extract_table(model, templates, schema, corpus[i], mode);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

namespace {

ordered_json span_json(const Span& s) {
  return ordered_json{{"start", s.start}, {"end", s.end}};
}

ordered_json mention_json(const EntityMention& m) {
  return ordered_json{{"start", m.span.start}, {"end", m.span.end}, {"type", m.type}};
}

}  // namespace

std::string serialize_extractions(const std::vector<SentenceExtraction>& extractions,
                                  const Corpus& sentences, const Schema& schema) {
  if (extractions.size() != sentences.size())
    throw ArgumentError("serialize_extractions: extraction/sentence count mismatch");
  std::string out;
  for (size_t i = 0; i < extractions.size(); ++i) {
    const auto& ex = extractions[i];
    ordered_json j;
    j["tokens"] = sentences[i].tokens;
    ordered_json jm = ordered_json::array();
    for (const auto& m : ex.mentions) jm.push_back(mention_json(m));
    j["mentions"] = jm;

    // rows of the schema-aligned chain serialize like gold records
    ordered_json jr = ordered_json::array();
    for (const auto& table : ex.tables) {
      if (table.slot_names != schema.chain_slots) continue;
      for (const auto& row : table.rows) {
        ordered_json o = ordered_json::object();
        for (size_t k = 0; k < row.slots.size(); ++k) {
          if (row.slots[k])
            o[table.slot_names[k]] = span_json(row.slots[k]->span);
          else
            o[table.slot_names[k]] = nullptr;
        }
        jr.push_back(o);
      }
    }
    j["rows"] = jr;

    ordered_json jt = ordered_json::array();
    for (const auto& t : ex.triples)
      jt.push_back(ordered_json{{"head", mention_json(t.head)},
                                {"relation", t.relation},
                                {"tail", mention_json(t.tail)}});
    j["triples"] = jt;

    ordered_json jturns = ordered_json::array();
    for (const auto& turn : ex.turns) {
      ordered_json o;
      o["turn"] = turn.turn_index;
      o["question"] = turn.question.joined();
      o["fills"] = turn.question.filled_entities;
      ordered_json ja = ordered_json::array();
      for (const auto& a : turn.answers) {
        ordered_json sa = span_json(a.span);
        sa["log_prob"] = a.log_prob;
        ja.push_back(sa);
      }
      o["answers"] = ja;
      jturns.push_back(o);
    }
    j["turns"] = jturns;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace mtqa
