#pragma once

#include <string>
#include <vector>

#include "mtqa/corpus.hpp"

namespace mtqa {

enum class QuestionMode { kNatural, kPseudo };

QuestionMode parse_question_mode(const std::string& name);
std::string question_mode_name(QuestionMode mode);

struct EntityQuestionTemplate {
  std::string entity_type;
  std::string natural_text;
  std::string pseudo_text;
};

/// Relation-question template. Patterns carry numbered slot markers {0},
/// {1}, ... referring to the head entity and earlier answers; arity is the
/// number of fills the pattern may draw on (position in chain + 1).
struct RelationTemplate {
  std::string relation;
  std::string head_type;
  std::string tail_type;
  std::string natural_pattern;
  std::string pseudo_pattern;
  int arity = 1;
};

/// Ordered relation templates driving the turns after head extraction.
/// slot_names[0] is the head slot; step k answers slot_names[k+1].
struct RelationChain {
  std::string name;
  std::vector<std::string> slot_names;
  std::vector<RelationTemplate> steps;
};

struct Question {
  std::vector<std::string> text;
  int turn_index = 0;
  std::vector<std::string> filled_entities;

  bool operator==(const Question&) const = default;
  std::string joined() const;
};

struct TemplateSet {
  std::vector<EntityQuestionTemplate> entity_questions;
  std::vector<RelationChain> chains;

  const EntityQuestionTemplate* entity_question_for(const std::string& type) const;
  const RelationChain* chain_named(const std::string& name) const;
};

Question render_entity_question(const EntityQuestionTemplate& tmpl, QuestionMode mode);

/// Substitutes every marker {k} with filled_entities[k]. filled_entities
/// size must equal the template arity.
Question render_relation_question(const RelationTemplate& tmpl,
                                  const std::vector<std::string>& filled_entities,
                                  QuestionMode mode, int turn_index = 1);

struct Diagnostic {
  std::string code;
  std::string message;
};

/// Structural checks for one chain against a schema; returns an empty list
/// when the chain is well formed.
std::vector<Diagnostic> validate_chain(const RelationChain& chain, const Schema& schema);
std::vector<Diagnostic> validate_template_set(const TemplateSet& set, const Schema& schema);

/// Plain-data links (relation, head slot, tail slot) for flattening rows
/// into triples. The head slot of step k is the latest slot at or before k
/// whose entity type equals the step's declared head type.
std::vector<ChainStepLink> chain_links(const RelationChain& chain);

TemplateSet parse_templates(const std::string& json_text);
std::string serialize_templates(const TemplateSet& set);
TemplateSet load_template_file(const std::string& path);

/// Surface used to fill a later question slot when an optional step
/// answered NONE.
inline constexpr const char* kAbsentFill = "none";

/// Question sets matching the builtin synthetic tasks.
TemplateSet builtin_flat_templates();
TemplateSet builtin_resume_templates();
TemplateSet builtin_templates_for(const Schema& schema);

}  // namespace mtqa
