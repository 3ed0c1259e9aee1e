#include <doctest.h>

#include "mtqa/synth.hpp"

using namespace mtqa;

TEST_CASE("synthesize_corpus is deterministic and produces valid gold") {
  Schema schema = builtin_flat_schema();
  GrammarConfig grammar = builtin_flat_grammar();

  Corpus a = synthesize_corpus(schema, grammar, 60, 42);
  Corpus b = synthesize_corpus(schema, grammar, 60, 42);
  CHECK(a == b);
  CHECK(serialize_record_corpus(a, schema) == serialize_record_corpus(b, schema));
  CHECK(a.size() == 60);
  CHECK_NOTHROW(validate_corpus(a, schema));

  Corpus c = synthesize_corpus(schema, grammar, 60, 43);
  CHECK(a != c);

  CHECK(synthesize_corpus(schema, grammar, 0, 1).empty());
}

TEST_CASE("single-record pattern inverts to its own gold") {
  Schema schema = builtin_resume_schema();
  GrammarConfig grammar = builtin_resume_grammar();
  grammar.patterns.resize(1);  // keep only the single-record pattern

  Corpus corpus = synthesize_corpus(schema, grammar, 1, 5);
  REQUIRE(corpus.size() == 1);
  const auto& s = corpus[0];
  REQUIRE(s.records.size() == 1);
  const auto& rec = s.records[0];
  // pattern: "<p> is a noted executive . in <t> , he joined <c> as <r> ."
  CHECK(s.surface(rec.slots[0]->span) == s.tokens[0]);
  CHECK(s.tokens[1] == "is");
  REQUIRE(rec.slots[3].has_value());
  // the time surface sits right after "in" at token 6
  CHECK(rec.slots[3]->span.start == 7);
  // flattened gold triples were materialized
  CHECK(s.triples.size() == 3);
}

TEST_CASE("interleaved-record pattern shares one person across records") {
  Schema schema = builtin_resume_schema();
  GrammarConfig grammar = builtin_resume_grammar();
  // keep only "was {Position:r1} at {Company:c1} and became {Position:r2}"
  GrammarConfig only;
  only.lexicons = grammar.lexicons;
  only.chain_links = grammar.chain_links;
  for (const auto& p : grammar.patterns)
    if (p.records.size() == 2 && p.records[0][1] == p.records[1][1]) only.patterns.push_back(p);
  REQUIRE(only.patterns.size() == 1);

  Corpus corpus = synthesize_corpus(schema, only, 4, 9);
  for (const auto& s : corpus) {
    REQUIRE(s.records.size() == 2);
    CHECK(s.records[0].slots[0] == s.records[1].slots[0]);  // shared person
    CHECK(s.records[0].slots[1] == s.records[1].slots[1]);  // shared company
    CHECK(s.records[0].slots[2] != s.records[1].slots[2]);  // distinct positions
  }
}

TEST_CASE("grammar validation catches configuration mistakes") {
  Schema schema = builtin_flat_schema();
  GrammarConfig grammar = builtin_flat_grammar();

  GrammarConfig empty_lex = grammar;
  empty_lex.lexicons["person"].clear();
  CHECK_THROWS_AS(empty_lex.validate(schema), ConfigError);

  GrammarConfig bad_type = grammar;
  bad_type.patterns.push_back({"{alien:a} lands .", {}, {}, 1.0});
  CHECK_THROWS_AS(bad_type.validate(schema), ConfigError);

  GrammarConfig unbound = grammar;
  unbound.patterns.push_back({"{person:a} works .", {{"works_for", "a", "zz"}}, {}, 1.0});
  CHECK_THROWS_AS(unbound.validate(schema), ConfigError);

  GrammarConfig records_flat = grammar;
  records_flat.patterns.push_back({"{person:a} .", {}, {{"a"}}, 1.0});
  CHECK_THROWS_AS(records_flat.validate(schema), ConfigError);
}

TEST_CASE("grammar files round-trip") {
  Schema schema = builtin_resume_schema();
  GrammarConfig grammar = builtin_resume_grammar();
  GrammarConfig parsed = parse_grammar(serialize_grammar(grammar), schema);
  CHECK(parsed.lexicons == grammar.lexicons);
  CHECK(parsed.patterns.size() == grammar.patterns.size());
  CHECK(parsed.chain_links == grammar.chain_links);
  CHECK(synthesize_corpus(schema, parsed, 10, 3) == synthesize_corpus(schema, grammar, 10, 3));
}

TEST_CASE("builtin corpora exercise the documented hard cases") {
  Schema schema = builtin_flat_schema();
  Corpus corpus = synthesize_corpus(schema, builtin_flat_grammar(), 400, 17);
  bool multi_relation_sentence = false;
  bool interleaved = false;
  for (const auto& s : corpus) {
    if (s.triples.size() >= 2) multi_relation_sentence = true;
    // two relations whose spans interleave: headA < headB < tailA < tailB
    for (const auto& a : s.triples)
      for (const auto& b : s.triples)
        if (a.head.span.start < b.head.span.start &&
            b.head.span.start < a.tail.span.start &&
            a.tail.span.start < b.tail.span.start)
          interleaved = true;
  }
  CHECK(multi_relation_sentence);
  CHECK(interleaved);

  Schema rs = builtin_resume_schema();
  Corpus rc = synthesize_corpus(rs, builtin_resume_grammar(), 200, 17);
  bool absent_position_with_time = false;
  bool multi_record = false;
  for (const auto& s : rc) {
    if (s.records.size() >= 2) multi_record = true;
    for (const auto& r : s.records)
      if (!r.slots[2] && r.slots[3]) absent_position_with_time = true;
  }
  CHECK(absent_position_with_time);
  CHECK(multi_record);
}
