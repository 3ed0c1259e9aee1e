#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "mtqa/eval.hpp"
#include "mtqa/orchestrator.hpp"
#include "mtqa/synth.hpp"

using namespace mtqa;

namespace {

struct WorkHistoryFixture {
  Schema schema = builtin_resume_schema();
  TemplateSet templates = builtin_resume_templates();
  Corpus gold = fixtures::work_history_corpus();
  OracleExtractor oracle{&gold, &schema, &templates};
};

std::string row_string(const AnnotatedSentence& s, const HierRecord& row) {
  std::string out;
  for (const auto& slot : row.slots) {
    out += slot ? s.surface(slot->span) : "-";
    out += '|';
  }
  return out;
}

}  // namespace

TEST_CASE("oracle head extraction finds the gold mentions") {
  WorkHistoryFixture f;
  auto mentions = extract_head_entities(f.oracle, f.templates, f.gold[0], QuestionMode::kNatural);
  std::multiset<std::string> types;
  for (const auto& m : mentions) types.insert(m.type);
  CHECK(types.count("Person") == 1);   // the single "musk" mention
  CHECK(types.count("Company") == 5);  // the five employers
  CHECK(mentions.size() == f.gold[0].mentions.size());

  // a sentence with no entity of some type contributes nothing for it
  AnnotatedSentence empty;
  empty.tokens = {"nothing", "here"};
  Corpus tiny{empty};
  OracleExtractor oracle(&tiny, &f.schema, &f.templates);
  CHECK(extract_head_entities(oracle, f.templates, empty, QuestionMode::kNatural).empty());
}

TEST_CASE("the work-history table reproduces all five gold rows") {
  WorkHistoryFixture f;
  SentenceExtraction ex =
      extract_table(f.oracle, f.templates, f.schema, f.gold[0], QuestionMode::kNatural);
  REQUIRE(ex.tables.size() == 1);
  const auto& rows = ex.tables[0].rows;
  REQUIRE(rows.size() == 5);

  std::set<std::string> produced;
  for (const auto& r : rows) produced.insert(row_string(f.gold[0], r));
  CHECK(produced.count("musk|spacex|ceo|2002|") == 1);
  CHECK(produced.count("musk|tesla|ceo and product architect|2003|") == 1);
  CHECK(produced.count("musk|solarcity|chairman|2006|") == 1);
  CHECK(produced.count("musk|neuralink|ceo|2016|") == 1);
  // the row with no position stays alive through the optional slot
  CHECK(produced.count("musk|the boring company|-|2016|") == 1);

  std::set<std::string> gold_rows;
  for (const auto& r : f.gold[0].records) gold_rows.insert(row_string(f.gold[0], r));
  CHECK(produced == gold_rows);
}

TEST_CASE("the pre-segmented biography passage extracts its gold rows") {
  WorkHistoryFixture f;
  SentenceExtraction ex =
      extract_table(f.oracle, f.templates, f.schema, f.gold[1], QuestionMode::kNatural);
  std::set<std::string> produced;
  for (const auto& r : ex.tables[0].rows) produced.insert(row_string(f.gold[1], r));
  CHECK(produced.count("郑强|江苏常州公路运输有限公司|主办会计|1995年至1998年|") == 1);
  CHECK(produced.count("郑强|越秀会计师事务所|项目经理|1998年至2000年|") == 1);
  CHECK(ex.tables[0].rows.size() == 2);
}

TEST_CASE("oracle equivalence: the full pipeline scores 100 on synthetic corpora") {
  Schema schema = builtin_resume_schema();
  TemplateSet templates = builtin_resume_templates();
  Corpus corpus = synthesize_corpus(schema, builtin_resume_grammar(), 40, 99);
  OracleExtractor oracle(&corpus, &schema, &templates);
  auto extractions = extract_corpus(oracle, templates, schema, corpus, QuestionMode::kNatural, 1);
  EvalReport report = evaluate_extractions(extractions, corpus, schema);
  CHECK(report.entity_prf.f == doctest::Approx(1.0));
  CHECK(report.relation_prf.f == doctest::Approx(1.0));
  CHECK(report.slot_all_prf.f == doctest::Approx(1.0));

  // pseudo-mode questions drive the same answers through the oracle
  auto pseudo = extract_corpus(oracle, templates, schema, corpus, QuestionMode::kPseudo, 1);
  EvalReport pseudo_report = evaluate_extractions(pseudo, corpus, schema);
  CHECK(pseudo_report.slot_all_prf.f == doctest::Approx(1.0));
}

TEST_CASE("a stage-1 entity that heads nothing yields zero rows") {
  Schema schema = builtin_resume_schema();
  TemplateSet templates = builtin_resume_templates();
  AnnotatedSentence s;
  s.tokens = {"zora", "met", "marek", "at", "cedar", "trust", "in", "2004", "."};
  EntityMention zora{{0, 0}, "Person"};
  EntityMention marek{{2, 2}, "Person"};
  EntityMention cedar{{4, 5}, "Company"};
  EntityMention t{{7, 7}, "Time"};
  s.mentions = {zora, marek, cedar, t};
  HierRecord rec;
  rec.slots = {marek, cedar, std::nullopt, t};
  s.records = {rec};
  Corpus corpus{s};
  OracleExtractor oracle(&corpus, &schema, &templates);

  // zora is extracted in stage 1 but the company question returns NONE
  auto rows = run_relation_chain(oracle, templates.chains[0], schema, zora, s,
                                 QuestionMode::kNatural);
  CHECK(rows.empty());
  auto ex = extract_table(oracle, templates, schema, s, QuestionMode::kNatural);
  CHECK(ex.tables[0].rows.size() == 1);
}

TEST_CASE("branching: one head with two companies gives two rows") {
  WorkHistoryFixture f;
  const auto& zheng = f.gold[1];
  EntityMention head{{0, 0}, "Person"};
  auto rows = run_relation_chain(f.oracle, f.templates.chains[0], f.schema, head, zheng,
                                 QuestionMode::kNatural);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].slots[0] == rows[1].slots[0]);
  CHECK(rows[0].slots[1] != rows[1].slots[1]);
}

TEST_CASE("empty sentence gives an empty table") {
  WorkHistoryFixture f;
  AnnotatedSentence empty;
  SentenceExtraction ex =
      extract_table(f.oracle, f.templates, f.schema, empty, QuestionMode::kNatural);
  CHECK(ex.mentions.empty());
  CHECK(ex.tables.empty());
  CHECK(ex.triples.empty());
}

TEST_CASE("table_to_triples flattens rows along the chain and deduplicates") {
  WorkHistoryFixture f;
  SentenceExtraction ex =
      extract_table(f.oracle, f.templates, f.schema, f.gold[0], QuestionMode::kNatural);
  auto triples = table_to_triples(ex.tables[0], f.templates.chains[0]);
  std::set<RelationTriple> expected(f.gold[0].triples.begin(), f.gold[0].triples.end());
  CHECK(std::set<RelationTriple>(triples.begin(), triples.end()) == expected);
  // rows sharing a prefix emit shared triples once
  CHECK(triples.size() == expected.size());

  ExtractionTable empty;
  empty.slot_names = f.templates.chains[0].slot_names;
  CHECK(table_to_triples(empty, f.templates.chains[0]).empty());
}

TEST_CASE("two-turn degenerate case equals per-head union") {
  Schema schema = builtin_flat_schema();
  TemplateSet templates = builtin_flat_templates();
  Corpus corpus = synthesize_corpus(schema, builtin_flat_grammar(), 30, 7);
  OracleExtractor oracle(&corpus, &schema, &templates);

  for (const auto& sentence : corpus) {
    SentenceExtraction ex =
        extract_table(oracle, templates, schema, sentence, QuestionMode::kNatural);
    std::set<RelationTriple> direct;
    auto heads = extract_head_entities(oracle, templates, sentence, QuestionMode::kNatural);
    for (const auto& chain : templates.chains) {
      for (const auto& head : heads) {
        if (head.type != chain.slot_names[0]) continue;
        Question q = render_relation_question(chain.steps[0], {sentence.surface(head.span)},
                                              QuestionMode::kNatural, 1);
        for (const auto& a : oracle.extract(q, sentence.tokens))
          direct.insert(RelationTriple{head, chain.steps[0].relation,
                                       EntityMention{a.span, chain.steps[0].tail_type}});
      }
    }
    CHECK(std::set<RelationTriple>(ex.triples.begin(), ex.triples.end()) == direct);
  }
}

TEST_CASE("monotone NONE: removing an entity template never adds rows") {
  WorkHistoryFixture f;
  SentenceExtraction full =
      extract_table(f.oracle, f.templates, f.schema, f.gold[0], QuestionMode::kNatural);

  TemplateSet fewer = f.templates;
  fewer.entity_questions.erase(fewer.entity_questions.begin() + 1);  // drop Company questions
  SentenceExtraction reduced =
      extract_table(f.oracle, fewer, f.schema, f.gold[0], QuestionMode::kNatural);

  std::set<std::string> full_rows, reduced_rows;
  for (const auto& r : full.tables[0].rows) full_rows.insert(row_string(f.gold[0], r));
  for (const auto& r : reduced.tables[0].rows) reduced_rows.insert(row_string(f.gold[0], r));
  for (const auto& row : reduced_rows) CHECK(full_rows.count(row) == 1);
  CHECK(reduced.mentions.size() <= full.mentions.size());
}

TEST_CASE("every row entity is traceable to a chosen answer") {
  WorkHistoryFixture f;
  SentenceExtraction ex =
      extract_table(f.oracle, f.templates, f.schema, f.gold[0], QuestionMode::kNatural);
  for (const auto& row : ex.tables[0].rows) {
    for (const auto& slot : row.slots) {
      if (!slot) continue;
      bool chosen = false;
      for (const auto& turn : ex.turns)
        for (const auto& a : turn.chosen)
          if (a.span == slot->span) chosen = true;
      CHECK(chosen);
    }
  }
}

TEST_CASE("parallel extraction matches sequential order and content") {
  Schema schema = builtin_flat_schema();
  TemplateSet templates = builtin_flat_templates();
  Corpus corpus = synthesize_corpus(schema, builtin_flat_grammar(), 24, 3);
  OracleExtractor oracle(&corpus, &schema, &templates);
  auto seq = extract_corpus(oracle, templates, schema, corpus, QuestionMode::kNatural, 1);
  auto par = extract_corpus(oracle, templates, schema, corpus, QuestionMode::kNatural, 4);
  CHECK(serialize_extractions(seq, corpus, schema) ==
        serialize_extractions(par, corpus, schema));
}

TEST_CASE("extraction output serializes and reloads as predictions") {
  WorkHistoryFixture f;
  auto extractions =
      extract_corpus(f.oracle, f.templates, f.schema, f.gold, QuestionMode::kNatural, 1);
  std::string jsonl = serialize_extractions(extractions, f.gold, f.schema);
  auto preds = parse_predictions(jsonl, f.schema);
  REQUIRE(preds.size() == f.gold.size());
  CHECK(preds[0].mentions.size() == f.gold[0].mentions.size());
  CHECK(preds[0].rows.size() == 5);
  CHECK(preds[0].triples.size() == extractions[0].triples.size());
  EvalReport report = evaluate_predictions(preds, f.gold, f.schema);
  CHECK(report.slot_all_prf.f == doctest::Approx(1.0));
}
