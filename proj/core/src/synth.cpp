#include "mtqa/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtqa/rng.hpp"

namespace mtqa {

using ordered_json = nlohmann::ordered_json;

namespace {

struct PatternItem {
  std::string literal;  // empty when this is a placeholder
  std::string type;
  std::string name;  // binding, may be empty
};

std::vector<PatternItem> parse_pattern_text(const std::string& text) {
  std::vector<PatternItem> items;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) {
    if (tok.size() >= 2 && tok.front() == '{' && tok.back() == '}') {
      std::string body = tok.substr(1, tok.size() - 2);
      auto colon = body.find(':');
      PatternItem item;
      if (colon == std::string::npos) {
        item.type = body;
      } else {
        item.type = body.substr(0, colon);
        item.name = body.substr(colon + 1);
      }
      if (item.type.empty()) throw ConfigError("pattern placeholder with empty type: " + tok);
      items.push_back(std::move(item));
    } else {
      items.push_back(PatternItem{tok, "", ""});
    }
  }
  if (items.empty()) throw ConfigError("empty sentence pattern");
  return items;
}

std::vector<std::string> tokenize_surface(const std::string& surface) {
  std::vector<std::string> out;
  std::istringstream ss(surface);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

void GrammarConfig::validate(const Schema& schema) const {
  for (const auto& [type, surfaces] : lexicons) {
    if (surfaces.empty()) throw ConfigError("lexicon '" + type + "' is empty");
    for (const auto& s : surfaces)
      if (tokenize_surface(s).empty())
        throw ConfigError("lexicon '" + type + "' contains a blank surface");
  }
  if (patterns.empty()) throw ConfigError("grammar has no sentence patterns");
  for (const auto& p : patterns) {
    if (p.weight <= 0) throw ConfigError("pattern weight must be positive");
    auto items = parse_pattern_text(p.text);
    std::map<std::string, std::string> bound;  // name -> type
    std::map<std::string, int> per_type;
    for (const auto& it : items) {
      if (it.literal.empty()) {
        if (!schema.has_entity_type(it.type))
          throw ConfigError("pattern placeholder type '" + it.type + "' is not in the schema");
        auto lex = lexicons.find(it.type);
        if (lex == lexicons.end() || lex->second.empty())
          throw ConfigError("no lexicon for placeholder type '" + it.type + "'");
        per_type[it.type]++;
        if (static_cast<size_t>(per_type[it.type]) > lex->second.size())
          throw ConfigError("pattern needs more distinct '" + it.type +
                            "' surfaces than the lexicon holds");
        if (!it.name.empty()) {
          if (bound.count(it.name))
            throw ConfigError("duplicate placeholder name '" + it.name + "' in pattern");
          bound[it.name] = it.type;
        }
      }
    }
    for (const auto& t : p.triples) {
      if (t.size() != 3)
        throw ConfigError("pattern triple must be [relation, head, tail]");
      if (!schema.has_relation_type(t[0]))
        throw ConfigError("pattern triple relation '" + t[0] + "' is not in the schema");
      if (!bound.count(t[1]) || !bound.count(t[2]))
        throw ConfigError("pattern triple references unbound placeholder '" +
                          (bound.count(t[1]) ? t[2] : t[1]) + "'");
    }
    if (!p.records.empty() && !schema.hierarchical())
      throw ConfigError("pattern declares records but the schema has no chain slots");
    for (const auto& r : p.records) {
      if (r.size() != schema.chain_slots.size())
        throw ConfigError("pattern record width " + std::to_string(r.size()) +
                          " does not match the schema chain");
      if (r.empty() || r[0] == "-")
        throw ConfigError("pattern record is missing its first slot");
      for (size_t k = 0; k < r.size(); ++k) {
        if (r[k] == "-") continue;
        auto it = bound.find(r[k]);
        if (it == bound.end())
          throw ConfigError("pattern record references unbound placeholder '" + r[k] + "'");
        if (it->second != schema.chain_slots[k])
          throw ConfigError("record slot '" + schema.chain_slots[k] +
                            "' bound to a placeholder of type '" + it->second + "'");
      }
    }
  }
  for (const auto& link : chain_links) {
    if (link.size() != 3)
      throw ConfigError("chain link must be [relation, head_slot, tail_slot]");
    if (!schema.has_relation_type(link[0]))
      throw ConfigError("chain link relation '" + link[0] + "' is not in the schema");
    if (schema.slot_index(link[1]) < 0 || schema.slot_index(link[2]) < 0)
      throw ConfigError("chain link references unknown slot '" + link[1] + "' or '" + link[2] +
                        "'");
  }
}

GrammarConfig parse_grammar(const std::string& json_text, const Schema& schema) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("grammar: ") + e.what());
  }
  GrammarConfig g;
  try {
    for (auto it = j.at("lexicons").begin(); it != j.at("lexicons").end(); ++it)
      g.lexicons[it.key()] = it.value().get<std::vector<std::string>>();
    for (const auto& jp : j.at("patterns")) {
      SentencePattern p;
      p.text = jp.at("text").get<std::string>();
      if (jp.contains("triples"))
        p.triples = jp["triples"].get<std::vector<std::vector<std::string>>>();
      if (jp.contains("records"))
        p.records = jp["records"].get<std::vector<std::vector<std::string>>>();
      if (jp.contains("weight")) p.weight = jp["weight"].get<double>();
      g.patterns.push_back(std::move(p));
    }
    if (j.contains("chain_links"))
      g.chain_links = j["chain_links"].get<std::vector<std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("grammar: ") + e.what());
  }
  g.validate(schema);
  return g;
}

std::string serialize_grammar(const GrammarConfig& grammar) {
  ordered_json j;
  ordered_json lex = ordered_json::object();
  for (const auto& [type, surfaces] : grammar.lexicons) lex[type] = surfaces;
  j["lexicons"] = lex;
  ordered_json pats = ordered_json::array();
  for (const auto& p : grammar.patterns) {
    ordered_json jp;
    jp["text"] = p.text;
    if (!p.triples.empty()) jp["triples"] = p.triples;
    if (!p.records.empty()) jp["records"] = p.records;
    jp["weight"] = p.weight;
    pats.push_back(jp);
  }
  j["patterns"] = pats;
  j["chain_links"] = grammar.chain_links;
  return j.dump(2) + "\n";
}

GrammarConfig load_grammar_file(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open grammar file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_grammar(buf.str(), schema);
}

std::vector<ChainStepLink> grammar_chain_links(const GrammarConfig& grammar,
                                               const Schema& schema) {
  std::vector<ChainStepLink> links;
  for (const auto& l : grammar.chain_links)
    links.push_back(ChainStepLink{l[0], schema.slot_index(l[1]), schema.slot_index(l[2])});
  return links;
}

Corpus synthesize_corpus(const Schema& schema, const GrammarConfig& grammar, size_t n,
                         uint64_t seed) {
  schema.validate();
  grammar.validate(schema);
  const auto links = grammar_chain_links(grammar, schema);

  std::vector<double> weights;
  for (const auto& p : grammar.patterns) weights.push_back(p.weight);

  Rng rng(seed);
  Corpus corpus;
  corpus.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const auto& pattern = grammar.patterns[static_cast<size_t>(rng.categorical(weights))];
    const auto items = parse_pattern_text(pattern.text);

    AnnotatedSentence sentence;
    std::map<std::string, EntityMention> bound;
    std::map<std::string, std::vector<size_t>> remaining;  // per-type lexicon indices
    for (const auto& item : items) {
      if (!item.literal.empty()) {
        sentence.tokens.push_back(item.literal);
        continue;
      }
      auto& pool = remaining[item.type];
      if (pool.empty()) {
        const auto& lex = grammar.lexicons.at(item.type);
        pool.resize(lex.size());
        for (size_t k = 0; k < lex.size(); ++k) pool[k] = k;
      }
      size_t pick = static_cast<size_t>(rng.below(pool.size()));
      size_t lex_index = pool[pick];
      pool.erase(pool.begin() + static_cast<long>(pick));

      const auto surface_tokens = tokenize_surface(grammar.lexicons.at(item.type)[lex_index]);
      Span span{static_cast<int>(sentence.tokens.size()),
                static_cast<int>(sentence.tokens.size() + surface_tokens.size() - 1)};
      for (const auto& t : surface_tokens) sentence.tokens.push_back(t);
      EntityMention mention{span, item.type};
      sentence.mentions.push_back(mention);
      if (!item.name.empty()) bound[item.name] = mention;
    }

    for (const auto& t : pattern.triples)
      sentence.triples.push_back(RelationTriple{bound.at(t[1]), t[0], bound.at(t[2])});
    for (const auto& r : pattern.records) {
      HierRecord rec;
      for (const auto& name : r) {
        if (name == "-")
          rec.slots.emplace_back(std::nullopt);
        else
          rec.slots.emplace_back(bound.at(name));
      }
      sentence.records.push_back(std::move(rec));
    }
    if (!links.empty()) {
      for (const auto& rec : sentence.records) {
        for (auto&& triple : flatten_record(rec, links)) {
          if (std::find(sentence.triples.begin(), sentence.triples.end(), triple) ==
              sentence.triples.end())
            sentence.triples.push_back(std::move(triple));
        }
      }
    }
    validate_sentence(sentence, schema, corpus.size());
    corpus.push_back(std::move(sentence));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Builtin desk-scale grammars
// ---------------------------------------------------------------------------

Schema builtin_flat_schema() {
  Schema s;
  s.entity_types = {"person", "company", "place"};
  s.relation_types = {"works_for", "lives_in"};
  return s;
}

GrammarConfig builtin_flat_grammar() {
  GrammarConfig g;
  g.lexicons["person"] = {
      "mara",   "edwin",  "tanya",  "viktor", "ines",   "bruno",  "celia",  "dmitri",
      "elena",  "farid",  "greta",  "hassan", "irene",  "jonas",  "karla",  "leon",
      "mirela", "nadia",  "oscar",  "priya",  "quentin", "rosa",   "stefan", "talia",
      "umar",   "vera",   "walter", "ximena", "yusuf",  "zelda",  "anton",  "bianca",
      "carlos", "dora",   "emil",   "fran",   "gloria", "henrik", "ivana",  "jorge",
      "ruth bellamy", "omar lindqvist", "ada marsh", "piotr kowal", "sena adler",
      "liv toller"};
  g.lexicons["company"] = {
      "acme corp",      "vexatech labs",  "northwind group", "bluecrest inc",
      "solaris corp",   "camber labs",    "riverton group",  "halcyon inc",
      "triton corp",    "ardent labs",    "meridian group",  "quill inc",
      "ferrox corp",    "lumina labs",    "westgate group",  "pinnacle inc",
      "orchid corp",    "zephyr labs",    "granite group",   "summit inc",
      "copperline corp", "aurora labs",   "redwood group",   "atlas inc",
      "novira corp",    "tessel labs",    "harbor group",    "crescent inc"};
  g.lexicons["place"] = {"oslo",  "lima",   "quito", "dover",  "turin", "osaka",
                         "perth", "leeds",  "basel", "malmo",  "ghent", "porto",
                         "tunis", "dakar",  "hanoi", "quebec", "sofia", "riga",
                         "bergen", "seville"};

  auto add = [&](std::string text, std::vector<std::vector<std::string>> triples, double w) {
    SentencePattern p;
    p.text = std::move(text);
    p.triples = std::move(triples);
    p.weight = w;
    g.patterns.push_back(std::move(p));
  };
  add("{person:a} works for {company:b} .", {{"works_for", "a", "b"}}, 2.0);
  add("{person:a} lives in {place:b} .", {{"lives_in", "a", "b"}}, 2.0);
  add("{person:a} works for {company:b} and {person:c} works for {company:d} .",
      {{"works_for", "a", "b"}, {"works_for", "c", "d"}}, 1.5);
  add("{person:a} and {person:c} work for {company:b} and {company:d} respectively .",
      {{"works_for", "a", "b"}, {"works_for", "c", "d"}}, 1.0);
  add("{person:a} , who was profiled in the morning bulletin , works for {company:b} .",
      {{"works_for", "a", "b"}}, 1.0);
  add("{person:a} works for {company:b} and lives in {place:c} .",
      {{"works_for", "a", "b"}, {"lives_in", "a", "c"}}, 1.5);
  add("{person:a} lives in {place:b} while {person:c} lives in {place:d} .",
      {{"lives_in", "a", "b"}, {"lives_in", "c", "d"}}, 1.0);
  add("colleagues say {person:a} joined {company:b} last spring .", {{"works_for", "a", "b"}},
      1.0);
  add("{person:a} is based in {place:b} with {company:c} .",
      {{"lives_in", "a", "b"}, {"works_for", "a", "c"}}, 1.0);
  add("the report mentions {company:b} but not {person:a} .", {}, 1.0);
  add("{person:a} visited {place:b} before {person:c} settled in {place:d} .",
      {{"lives_in", "c", "d"}}, 0.5);
  return g;
}

Schema builtin_resume_schema() {
  Schema s;
  s.entity_types = {"Person", "Company", "Position", "Time"};
  s.relation_types = {"company_of", "position_of", "time_of"};
  s.chain_slots = {"Person", "Company", "Position", "Time"};
  s.optional_slots = {"Position"};
  return s;
}

GrammarConfig builtin_resume_grammar() {
  GrammarConfig g;
  g.lexicons["Person"] = {
      "marek", "sylvia", "arman",  "bea",    "casper", "delia",  "enzo",   "freya",
      "gaspar", "hilda", "ivo",    "jana",   "kiran",  "lotte",  "matteo", "nora",
      "otis",  "paloma", "ronan",  "saskia", "teodor", "una",    "vince",  "wanda",
      "xenia", "yannick", "zora",  "alvar",  "brita",  "cosmo",  "dagny",  "elio"};
  g.lexicons["Company"] = {
      "keystone partners", "violet holdings",  "marble works",    "cedar trust",
      "ember logistics",   "falcon freight",   "garnet mills",    "hollow pine studio",
      "ivory lane press",  "juniper telecom",  "kestrel energy",  "larkspur foods",
      "mosaic transit",    "nimbus analytics", "opal shipping",   "prairie bank",
      "quarry stoneworks", "rosette textiles", "sable motors",    "thistle farms",
      "umbra optics",      "verdant paper",    "willow clinic",   "yonder rail"};
  g.lexicons["Position"] = {
      "ceo",           "chairman",        "chief accountant", "deputy manager",
      "senior engineer", "project manager", "partner",        "lead designer",
      "treasurer",     "head of sales",   "site supervisor",  "general counsel",
      "archivist",     "product architect"};
  std::vector<std::string> times;
  for (int y = 1990; y <= 2016; y += 3) times.push_back(std::to_string(y));
  for (int y = 1991; y <= 2012; y += 2)
    times.push_back(std::to_string(y) + " to " + std::to_string(y + 1 + (y % 3)));
  g.lexicons["Time"] = times;

  auto add = [&](std::string text, std::vector<std::vector<std::string>> records, double w) {
    SentencePattern p;
    p.text = std::move(text);
    p.records = std::move(records);
    p.weight = w;
    g.patterns.push_back(std::move(p));
  };
  add("{Person:p} is a noted executive . in {Time:t1} , he joined {Company:c1} as "
      "{Position:r1} .",
      {{"p", "c1", "r1", "t1"}}, 2.0);
  add("{Person:p} chairs several boards . in {Time:t1} , she joined {Company:c1} as "
      "{Position:r1} . from {Time:t2} , she served at {Company:c2} as {Position:r2} .",
      {{"p", "c1", "r1", "t1"}, {"p", "c2", "r2", "t2"}}, 2.0);
  add("{Person:p} began early . in {Time:t1} , he joined {Company:c1} as {Position:r1} . "
      "from {Time:t2} , he served at {Company:c2} as {Position:r2} . during {Time:t3} , "
      "he led {Company:c3} as {Position:r3} .",
      {{"p", "c1", "r1", "t1"}, {"p", "c2", "r2", "t2"}, {"p", "c3", "r3", "t3"}}, 1.0);
  add("{Person:p} built a long career . during {Time:t1} , she worked for {Company:c1} .",
      {{"p", "c1", "-", "t1"}}, 1.0);
  add("{Person:p} , whose work drew wide notice across the sector , joined {Company:c1} as "
      "{Position:r1} in {Time:t1} . during {Time:t2} , he worked for {Company:c2} .",
      {{"p", "c1", "r1", "t1"}, {"p", "c2", "-", "t2"}}, 1.0);
  add("in {Time:t1} , {Person:p} was {Position:r1} at {Company:c1} and became {Position:r2} "
      "there in {Time:t2} .",
      {{"p", "c1", "r1", "t1"}, {"p", "c1", "r2", "t2"}}, 1.0);
  g.chain_links = {{"company_of", "Person", "Company"},
                   {"position_of", "Company", "Position"},
                   {"time_of", "Position", "Time"}};
  return g;
}

GrammarConfig builtin_grammar_for(const Schema& schema) {
  if (schema.hierarchical()) return builtin_resume_grammar();
  return builtin_flat_grammar();
}

}  // namespace mtqa
