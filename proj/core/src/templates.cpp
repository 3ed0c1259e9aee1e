#include "mtqa/templates.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mtqa {

using ordered_json = nlohmann::ordered_json;

QuestionMode parse_question_mode(const std::string& name) {
  if (name == "natural") return QuestionMode::kNatural;
  if (name == "pseudo") return QuestionMode::kPseudo;
  throw ArgumentError("unknown question mode '" + name + "' (expected natural|pseudo)");
}

std::string question_mode_name(QuestionMode mode) {
  return mode == QuestionMode::kNatural ? "natural" : "pseudo";
}

std::string Question::joined() const {
  std::string out;
  for (size_t i = 0; i < text.size(); ++i) {
    if (i) out += ' ';
    out += text[i];
  }
  return out;
}

const EntityQuestionTemplate* TemplateSet::entity_question_for(const std::string& type) const {
  for (const auto& t : entity_questions)
    if (t.entity_type == type) return &t;
  return nullptr;
}

const RelationChain* TemplateSet::chain_named(const std::string& name) const {
  for (const auto& c : chains)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

/// Finds marker occurrences "{k}" and returns the distinct indices used.
std::vector<int> marker_indices(const std::string& pattern) {
  std::vector<int> found;
  for (size_t i = 0; i + 2 < pattern.size() + 1; ++i) {
    if (pattern[i] != '{') continue;
    size_t j = pattern.find('}', i);
    if (j == std::string::npos) break;
    std::string body = pattern.substr(i + 1, j - i - 1);
    if (!body.empty() && body.find_first_not_of("0123456789") == std::string::npos) {
      int idx = std::stoi(body);
      if (std::find(found.begin(), found.end(), idx) == found.end()) found.push_back(idx);
    }
    i = j;
  }
  return found;
}

std::string substitute(const std::string& pattern, const std::vector<std::string>& fills) {
  std::string out;
  for (size_t i = 0; i < pattern.size();) {
    if (pattern[i] == '{') {
      size_t j = pattern.find('}', i);
      if (j != std::string::npos) {
        std::string body = pattern.substr(i + 1, j - i - 1);
        if (!body.empty() && body.find_first_not_of("0123456789") == std::string::npos) {
          size_t idx = static_cast<size_t>(std::stoi(body));
          if (idx >= fills.size())
            throw TemplateError("slot marker {" + body + "} exceeds the provided fills");
          out += fills[idx];
          i = j + 1;
          continue;
        }
      }
    }
    out += pattern[i];
    ++i;
  }
  return out;
}

}  // namespace

Question render_entity_question(const EntityQuestionTemplate& tmpl, QuestionMode mode) {
  const std::string& text =
      mode == QuestionMode::kNatural ? tmpl.natural_text : tmpl.pseudo_text;
  if (text.empty()) throw TemplateError("entity question for '" + tmpl.entity_type + "' is empty");
  Question q;
  q.text = tokenize(text);
  q.turn_index = 0;
  return q;
}

Question render_relation_question(const RelationTemplate& tmpl,
                                  const std::vector<std::string>& filled_entities,
                                  QuestionMode mode, int turn_index) {
  if (static_cast<int>(filled_entities.size()) != tmpl.arity)
    throw TemplateError("relation '" + tmpl.relation + "': expected " +
                        std::to_string(tmpl.arity) + " fills, got " +
                        std::to_string(filled_entities.size()));
  for (const auto& f : filled_entities)
    if (f.empty()) throw TemplateError("relation '" + tmpl.relation + "': empty fill");
  const std::string& pattern =
      mode == QuestionMode::kNatural ? tmpl.natural_pattern : tmpl.pseudo_pattern;
  if (pattern.empty()) throw TemplateError("relation '" + tmpl.relation + "' has no pattern");
  Question q;
  q.text = tokenize(substitute(pattern, filled_entities));
  q.turn_index = turn_index;
  q.filled_entities = filled_entities;
  return q;
}

std::vector<Diagnostic> validate_chain(const RelationChain& chain, const Schema& schema) {
  std::vector<Diagnostic> out;
  auto flag = [&](const std::string& code, const std::string& message) {
    out.push_back(Diagnostic{code, "chain '" + chain.name + "': " + message});
  };

  if (chain.steps.empty()) {
    flag("empty-chain", "no steps");
    return out;
  }
  if (chain.slot_names.size() != chain.steps.size() + 1)
    flag("step-count", "has " + std::to_string(chain.steps.size()) + " steps but " +
                           std::to_string(chain.slot_names.size()) + " slots");
  if (schema.hierarchical() && chain.slot_names != schema.chain_slots)
    flag("chain-alignment", "slot names do not match the schema chain");
  for (const auto& slot : chain.slot_names)
    if (!schema.has_entity_type(slot))
      flag("unknown-label", "slot '" + slot + "' is not a schema entity type");

  for (size_t k = 0; k < chain.steps.size(); ++k) {
    const auto& step = chain.steps[k];
    const std::string where = "step " + std::to_string(k);
    if (!schema.has_relation_type(step.relation))
      flag("unknown-label", where + ": relation '" + step.relation + "' not in schema");
    if (!schema.has_entity_type(step.head_type))
      flag("unknown-label", where + ": head type '" + step.head_type + "' not in schema");
    if (!schema.has_entity_type(step.tail_type))
      flag("unknown-label", where + ": tail type '" + step.tail_type + "' not in schema");
    if (k + 1 < chain.slot_names.size() && step.tail_type != chain.slot_names[k + 1])
      flag("slot-type", where + ": tail type '" + step.tail_type + "' does not fill slot '" +
                            chain.slot_names[k + 1] + "'");
    // head type must name some slot at or before this step
    bool head_found = false;
    for (size_t j = 0; j <= k && j < chain.slot_names.size(); ++j)
      if (chain.slot_names[j] == step.head_type) head_found = true;
    if (!head_found)
      flag("head-slot", where + ": head type '" + step.head_type +
                            "' is not an earlier slot of this chain");
    for (const auto& pattern : {step.natural_pattern, step.pseudo_pattern}) {
      for (int idx : marker_indices(pattern)) {
        if (idx > static_cast<int>(k))
          flag("forward-reference", where + ": marker {" + std::to_string(idx) +
                                        "} refers to a later turn's answer");
        if (idx < 0 || idx >= step.arity)
          flag("marker-arity",
               where + ": marker {" + std::to_string(idx) + "} exceeds arity " +
                   std::to_string(step.arity));
      }
    }
  }
  return out;
}

std::vector<Diagnostic> validate_template_set(const TemplateSet& set, const Schema& schema) {
  std::vector<Diagnostic> out;
  for (const auto& eq : set.entity_questions) {
    if (!schema.has_entity_type(eq.entity_type))
      out.push_back(Diagnostic{"unknown-label", "entity question for unknown type '" +
                                                    eq.entity_type + "'"});
    if (eq.natural_text.empty() || eq.pseudo_text.empty())
      out.push_back(
          Diagnostic{"empty-question", "entity question for '" + eq.entity_type + "' is empty"});
  }
  for (const auto& chain : set.chains) {
    auto d = validate_chain(chain, schema);
    out.insert(out.end(), d.begin(), d.end());
    if (set.entity_question_for(chain.slot_names.empty() ? "" : chain.slot_names[0]) == nullptr)
      out.push_back(Diagnostic{"missing-head-question",
                               "chain '" + chain.name + "': no entity question for its head slot"});
  }
  return out;
}

std::vector<ChainStepLink> chain_links(const RelationChain& chain) {
  std::vector<ChainStepLink> links;
  for (size_t k = 0; k < chain.steps.size(); ++k) {
    const auto& step = chain.steps[k];
    int head_slot = -1;
    for (size_t j = 0; j <= k && j < chain.slot_names.size(); ++j)
      if (chain.slot_names[j] == step.head_type) head_slot = static_cast<int>(j);
    if (head_slot < 0)
      throw TemplateError("chain '" + chain.name + "': step " + std::to_string(k) +
                          " head type '" + step.head_type + "' has no earlier slot");
    links.push_back(ChainStepLink{step.relation, head_slot, static_cast<int>(k) + 1});
  }
  return links;
}

TemplateSet parse_templates(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("templates: ") + e.what());
  }
  TemplateSet set;
  try {
    if (j.contains("entity_questions")) {
      for (auto it = j["entity_questions"].begin(); it != j["entity_questions"].end(); ++it) {
        EntityQuestionTemplate t;
        t.entity_type = it.key();
        t.natural_text = it.value().at("natural").get<std::string>();
        t.pseudo_text = it.value().at("pseudo").get<std::string>();
        set.entity_questions.push_back(std::move(t));
      }
    }
    if (j.contains("chains")) {
      for (auto it = j["chains"].begin(); it != j["chains"].end(); ++it) {
        RelationChain chain;
        chain.name = it.key();
        const auto& jc = it.value();
        size_t k = 0;
        for (const auto& js : jc.at("steps")) {
          RelationTemplate step;
          step.relation = js.at("relation").get<std::string>();
          step.head_type = js.at("head_type").get<std::string>();
          step.tail_type = js.at("tail_type").get<std::string>();
          step.natural_pattern = js.at("natural").get<std::string>();
          step.pseudo_pattern = js.at("pseudo").get<std::string>();
          step.arity = static_cast<int>(k) + 1;
          chain.steps.push_back(std::move(step));
          ++k;
        }
        if (jc.contains("slots")) {
          chain.slot_names = jc["slots"].get<std::vector<std::string>>();
        } else if (chain.steps.size() == 1) {
          chain.slot_names = {chain.steps[0].head_type, chain.steps[0].tail_type};
        } else {
          throw ParseError("templates: chain '" + chain.name +
                           "' with multiple steps needs an explicit 'slots' list");
        }
        set.chains.push_back(std::move(chain));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("templates: ") + e.what());
  }
  return set;
}

std::string serialize_templates(const TemplateSet& set) {
  ordered_json j;
  ordered_json eq = ordered_json::object();
  for (const auto& t : set.entity_questions)
    eq[t.entity_type] = ordered_json{{"natural", t.natural_text}, {"pseudo", t.pseudo_text}};
  j["entity_questions"] = eq;
  ordered_json chains = ordered_json::object();
  for (const auto& c : set.chains) {
    ordered_json jc;
    jc["slots"] = c.slot_names;
    ordered_json steps = ordered_json::array();
    for (const auto& s : c.steps) {
      steps.push_back(ordered_json{{"relation", s.relation},
                                   {"head_type", s.head_type},
                                   {"tail_type", s.tail_type},
                                   {"natural", s.natural_pattern},
                                   {"pseudo", s.pseudo_pattern}});
    }
    jc["steps"] = steps;
    chains[c.name] = jc;
  }
  j["chains"] = chains;
  return j.dump(2) + "\n";
}

TemplateSet load_template_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open template file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_templates(buf.str());
}

TemplateSet builtin_flat_templates() {
  TemplateSet set;
  set.entity_questions = {
      {"person", "which person is mentioned in the text", "entity : person"},
      {"company", "which company is mentioned in the text", "entity : company"},
      {"place", "which place is mentioned in the text", "entity : place"},
  };
  RelationChain works;
  works.name = "works_for";
  works.slot_names = {"person", "company"};
  works.steps = {{"works_for", "person", "company", "find the employer of {0}",
                  "{0} ; employed by ; employer", 1}};
  RelationChain lives;
  lives.name = "lives_in";
  lives.slot_names = {"person", "place"};
  lives.steps = {{"lives_in", "person", "place", "find where {0} resides",
                  "{0} ; resides in ; residence", 1}};
  set.chains = {works, lives};
  return set;
}

TemplateSet builtin_resume_templates() {
  TemplateSet set;
  set.entity_questions = {
      {"Person", "who is mentioned in the text?", "entity : person"},
      {"Company", "which company is mentioned in the text", "entity : company"},
      {"Position", "which position is mentioned in the text", "entity : position"},
      {"Time", "which time period is mentioned in the text", "entity : time"},
  };
  RelationChain chain;
  chain.name = "work_history";
  chain.slot_names = {"Person", "Company", "Position", "Time"};
  chain.steps = {
      {"company_of", "Person", "Company", "which companies did {0} work for?",
       "{0} ; work for ; company", 1},
      {"position_of", "Company", "Position", "what was {0} 's position in {1} ?",
       "{0} ; {1} ; position", 2},
      {"time_of", "Position", "Time", "During which period did {0} work for {1} as {2}",
       "{0} ; {1} ; {2} ; time", 3},
  };
  set.chains = {chain};
  return set;
}

TemplateSet builtin_templates_for(const Schema& schema) {
  if (schema.hierarchical()) return builtin_resume_templates();
  return builtin_flat_templates();
}

}  // namespace mtqa
