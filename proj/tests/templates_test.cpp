#include <doctest.h>

#include "mtqa/templates.hpp"

using namespace mtqa;

namespace {

Schema ace_like_schema() {
  Schema s;
  s.entity_types = {"FAC", "GPE", "WEA", "PER"};
  s.relation_types = {"art", "part_whole"};
  return s;
}

}  // namespace

TEST_CASE("entity questions render in both modes") {
  EntityQuestionTemplate fac{"FAC", "Which facility is mentioned in the text",
                             "entity: facility"};
  Question natural = render_entity_question(fac, QuestionMode::kNatural);
  CHECK(natural.joined() == "Which facility is mentioned in the text");
  CHECK(natural.turn_index == 0);
  CHECK(natural.filled_entities.empty());

  Question pseudo = render_entity_question(fac, QuestionMode::kPseudo);
  CHECK(pseudo.joined() == "entity: facility");

  EntityQuestionTemplate person{"Person", "who is mentioned in the text?", "entity: person"};
  CHECK(render_entity_question(person, QuestionMode::kNatural).joined() ==
        "who is mentioned in the text?");
}

TEST_CASE("relation questions substitute every slot marker") {
  RelationTemplate art{"art", "GPE", "WEA",
                       "find a weapon which is owned or used by {0}",
                       "{0}; agent artifact; weapon", 1};
  Question natural = render_relation_question(art, {"Iraq"}, QuestionMode::kNatural, 1);
  CHECK(natural.joined() == "find a weapon which is owned or used by Iraq");
  CHECK(natural.filled_entities == std::vector<std::string>{"Iraq"});

  Question pseudo = render_relation_question(art, {"Iraq"}, QuestionMode::kPseudo, 1);
  CHECK(pseudo.joined() == "Iraq; agent artifact; weapon");

  RelationTemplate q4{"time_of", "Position", "Time",
                      "During which period did {0} work for {1} as {2}",
                      "{0} ; {1} ; {2} ; time", 3};
  Question turn4 = render_relation_question(q4, {"e1", "e2", "e3"}, QuestionMode::kNatural, 3);
  CHECK(turn4.joined() == "During which period did e1 work for e2 as e3");
  CHECK(turn4.turn_index == 3);

  CHECK_THROWS_AS(render_relation_question(art, {"a", "b"}, QuestionMode::kNatural, 1),
                  TemplateError);
  CHECK_THROWS_AS(render_relation_question(art, {}, QuestionMode::kNatural, 1), TemplateError);
}

TEST_CASE("rendering is pure and leaves no residual markers") {
  RelationTemplate q3{"position_of", "Company", "Position", "what was {0} 's position in {1} ?",
                      "{0} ; {1} ; position", 2};
  Question a = render_relation_question(q3, {"musk", "spacex"}, QuestionMode::kNatural, 2);
  Question b = render_relation_question(q3, {"musk", "spacex"}, QuestionMode::kNatural, 2);
  CHECK(a == b);
  for (const auto& tok : a.text) {
    CAPTURE(tok);
    CHECK(tok.find("{") == std::string::npos);
  }
  // a multi-token fill lands as several question tokens
  Question multi =
      render_relation_question(q3, {"musk", "the boring company"}, QuestionMode::kNatural, 2);
  CHECK(multi.joined() == "what was musk 's position in the boring company ?");

  Question pseudo = render_relation_question(q3, {"musk", "spacex"}, QuestionMode::kPseudo, 2);
  CHECK(pseudo.turn_index == a.turn_index);
  CHECK(pseudo.filled_entities == a.filled_entities);
  CHECK(pseudo.text != a.text);
}

TEST_CASE("validate_chain accepts the builtin resume chain") {
  Schema schema;
  schema.entity_types = {"Person", "Company", "Position", "Time"};
  schema.relation_types = {"company_of", "position_of", "time_of"};
  schema.chain_slots = {"Person", "Company", "Position", "Time"};
  schema.optional_slots = {"Position"};
  TemplateSet set = builtin_resume_templates();
  CHECK(validate_chain(*set.chain_named("work_history"), schema).empty());
  CHECK(validate_template_set(set, schema).empty());
}

TEST_CASE("validate_chain flags forward references and unknown labels") {
  Schema schema = ace_like_schema();
  RelationChain chain;
  chain.name = "bad";
  chain.slot_names = {"GPE", "WEA", "FAC"};
  chain.steps = {
      {"art", "GPE", "WEA", "find a weapon of {0}", "{0}; art; weapon", 1},
      {"part_whole", "WEA", "FAC", "find a facility near {3}", "{3}; part whole", 2},
  };
  auto diagnostics = validate_chain(chain, schema);
  bool forward = false;
  for (const auto& d : diagnostics) forward = forward || d.code == "forward-reference";
  CHECK(forward);

  RelationChain unknown;
  unknown.name = "unknown";
  unknown.slot_names = {"GPE", "WEA"};
  unknown.steps = {{"made_up", "GPE", "WEA", "find {0}", "{0}", 1}};
  auto d2 = validate_chain(unknown, schema);
  bool unknown_label = false;
  for (const auto& d : d2) unknown_label = unknown_label || d.code == "unknown-label";
  CHECK(unknown_label);

  RelationChain short_slots;
  short_slots.name = "short";
  short_slots.slot_names = {"GPE"};
  short_slots.steps = {{"art", "GPE", "WEA", "find {0}", "{0}", 1}};
  auto d3 = validate_chain(short_slots, schema);
  bool step_count = false;
  for (const auto& d : d3) step_count = step_count || d.code == "step-count";
  CHECK(step_count);
}

TEST_CASE("chain_links picks the latest slot matching each head type") {
  TemplateSet set = builtin_resume_templates();
  auto links = chain_links(*set.chain_named("work_history"));
  REQUIRE(links.size() == 3);
  CHECK(links[0].relation == "company_of");
  CHECK(links[0].head_slot == 0);
  CHECK(links[0].tail_slot == 1);
  CHECK(links[1].head_slot == 1);
  CHECK(links[2].head_slot == 2);
  CHECK(links[2].tail_slot == 3);
}

TEST_CASE("template files round-trip") {
  TemplateSet original = builtin_resume_templates();
  TemplateSet parsed = parse_templates(serialize_templates(original));
  REQUIRE(parsed.entity_questions.size() == original.entity_questions.size());
  REQUIRE(parsed.chains.size() == original.chains.size());
  CHECK(parsed.chains[0].slot_names == original.chains[0].slot_names);
  CHECK(parsed.chains[0].steps[2].natural_pattern == original.chains[0].steps[2].natural_pattern);
  CHECK(parsed.chains[0].steps[2].arity == 3);

  // single-step chains may omit the slots list
  TemplateSet flat = parse_templates(R"({
    "entity_questions": {"person": {"natural": "which person is mentioned", "pseudo": "entity : person"}},
    "chains": {"works_for": {"steps": [{"relation": "works_for", "head_type": "person",
      "tail_type": "company", "natural": "find the employer of {0}", "pseudo": "{0} ; employer"}]}}
  })");
  REQUIRE(flat.chains.size() == 1);
  CHECK(flat.chains[0].slot_names == std::vector<std::string>{"person", "company"});
}
