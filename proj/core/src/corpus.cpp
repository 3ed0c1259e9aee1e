#include "mtqa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtqa/rng.hpp"

namespace mtqa {

using ordered_json = nlohmann::ordered_json;

std::string AnnotatedSentence::surface(const Span& s) const {
  std::string out;
  for (int i = s.start; i <= s.end; ++i) {
    if (i > s.start) out += ' ';
    out += tokens[static_cast<size_t>(i)];
  }
  return out;
}

bool Schema::has_entity_type(const std::string& t) const {
  return std::find(entity_types.begin(), entity_types.end(), t) != entity_types.end();
}

bool Schema::has_relation_type(const std::string& r) const {
  return std::find(relation_types.begin(), relation_types.end(), r) != relation_types.end();
}

bool Schema::slot_optional(const std::string& slot) const {
  return std::find(optional_slots.begin(), optional_slots.end(), slot) != optional_slots.end();
}

int Schema::slot_index(const std::string& slot) const {
  auto it = std::find(chain_slots.begin(), chain_slots.end(), slot);
  if (it == chain_slots.end()) return -1;
  return static_cast<int>(it - chain_slots.begin());
}

namespace {

void require_unique_nonempty(const std::vector<std::string>& labels, const char* what) {
  if (labels.empty()) throw SchemaError(std::string(what) + " must not be empty");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (l.empty()) throw SchemaError(std::string(what) + " contains an empty label");
    if (!seen.insert(l).second)
      throw SchemaError(std::string(what) + " contains duplicate label '" + l + "'");
  }
}

}  // namespace

void Schema::validate() const {
  require_unique_nonempty(entity_types, "entity_types");
  require_unique_nonempty(relation_types, "relation_types");
  std::set<std::string> slot_seen;
  for (const auto& slot : chain_slots) {
    if (!has_entity_type(slot))
      throw SchemaError("chain slot '" + slot + "' is not a declared entity type");
    if (!slot_seen.insert(slot).second)
      throw SchemaError("duplicate chain slot '" + slot + "'");
  }
  for (const auto& slot : optional_slots) {
    if (slot_index(slot) < 0)
      throw SchemaError("optional slot '" + slot + "' is not a chain slot");
    if (slot_index(slot) == 0) throw SchemaError("the first chain slot cannot be optional");
  }
}

Schema parse_schema(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
  Schema s;
  try {
    s.entity_types = j.at("entity_types").get<std::vector<std::string>>();
    s.relation_types = j.at("relation_types").get<std::vector<std::string>>();
    if (j.contains("chain_slots")) s.chain_slots = j["chain_slots"].get<std::vector<std::string>>();
    if (j.contains("optional_slots"))
      s.optional_slots = j["optional_slots"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
  s.validate();
  return s;
}

std::string serialize_schema(const Schema& schema) {
  ordered_json j;
  j["entity_types"] = schema.entity_types;
  j["relation_types"] = schema.relation_types;
  j["chain_slots"] = schema.chain_slots;
  j["optional_slots"] = schema.optional_slots;
  return j.dump(2) + "\n";
}

Schema load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open schema file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str());
}

std::vector<RelationTriple> flatten_record(const HierRecord& record,
                                           const std::vector<ChainStepLink>& links) {
  std::vector<RelationTriple> out;
  for (const auto& link : links) {
    if (link.head_slot < 0 || static_cast<size_t>(link.head_slot) >= record.slots.size() ||
        link.tail_slot < 0 || static_cast<size_t>(link.tail_slot) >= record.slots.size())
      throw ArgumentError("flatten_record: chain link slot out of range");
    const auto& head = record.slots[static_cast<size_t>(link.head_slot)];
    const auto& tail = record.slots[static_cast<size_t>(link.tail_slot)];
    if (!head || !tail) continue;
    out.push_back(RelationTriple{*head, link.relation, *tail});
  }
  return out;
}

namespace {

void check_span(const Span& s, size_t n_tokens, size_t sentence_index, const char* what) {
  if (s.start < 0 || s.end < s.start || static_cast<size_t>(s.end) >= n_tokens) {
    throw ValidationError("sentence " + std::to_string(sentence_index) + ": " + what + " span [" +
                          std::to_string(s.start) + "," + std::to_string(s.end) +
                          "] out of bounds for " + std::to_string(n_tokens) + " tokens");
  }
}

bool mention_listed(const std::vector<EntityMention>& mentions, const EntityMention& m) {
  return std::find(mentions.begin(), mentions.end(), m) != mentions.end();
}

}  // namespace

void validate_sentence(const AnnotatedSentence& sentence, const Schema& schema,
                       size_t sentence_index) {
  const size_t n = sentence.tokens.size();
  for (const auto& tok : sentence.tokens) {
    if (tok.empty())
      throw ValidationError("sentence " + std::to_string(sentence_index) + ": empty token");
  }
  for (const auto& m : sentence.mentions) {
    check_span(m.span, n, sentence_index, "mention");
    if (!schema.has_entity_type(m.type))
      throw SchemaError("sentence " + std::to_string(sentence_index) + ": unknown entity type '" +
                        m.type + "'");
  }
  for (const auto& t : sentence.triples) {
    check_span(t.head.span, n, sentence_index, "triple head");
    check_span(t.tail.span, n, sentence_index, "triple tail");
    if (!schema.has_relation_type(t.relation))
      throw SchemaError("sentence " + std::to_string(sentence_index) + ": unknown relation '" +
                        t.relation + "'");
    if (!mention_listed(sentence.mentions, t.head) || !mention_listed(sentence.mentions, t.tail))
      throw ValidationError("sentence " + std::to_string(sentence_index) +
                            ": triple references a mention not in the mention list");
  }
  for (const auto& r : sentence.records) {
    if (r.slots.size() != schema.chain_slots.size())
      throw SchemaError("sentence " + std::to_string(sentence_index) + ": record has " +
                        std::to_string(r.slots.size()) + " slots, schema declares " +
                        std::to_string(schema.chain_slots.size()));
    if (r.slots.empty() || !r.slots[0])
      throw SchemaError("sentence " + std::to_string(sentence_index) +
                        ": record is missing its first slot");
    bool tail_absent = false;
    for (size_t k = 0; k < r.slots.size(); ++k) {
      const auto& slot_name = schema.chain_slots[k];
      if (!r.slots[k]) {
        if (!schema.slot_optional(slot_name)) tail_absent = true;
        continue;
      }
      if (tail_absent)
        throw SchemaError("sentence " + std::to_string(sentence_index) + ": slot '" + slot_name +
                          "' present after an absent mandatory slot");
      check_span(r.slots[k]->span, n, sentence_index, "record slot");
      if (r.slots[k]->type != slot_name)
        throw SchemaError("sentence " + std::to_string(sentence_index) + ": slot '" + slot_name +
                          "' holds a mention of type '" + r.slots[k]->type + "'");
      if (!mention_listed(sentence.mentions, *r.slots[k]))
        throw ValidationError("sentence " + std::to_string(sentence_index) +
                              ": record references a mention not in the mention list");
    }
  }
}

void validate_corpus(const Corpus& corpus, const Schema& schema) {
  for (size_t i = 0; i < corpus.size(); ++i) validate_sentence(corpus[i], schema, i);
}

// ---------------------------------------------------------------------------
// Column format
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

int parse_int(const std::string& s, size_t line_no, const char* what) {
  try {
    size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
}

}  // namespace

Corpus parse_column_corpus(std::istream& in, const Schema& schema) {
  Corpus corpus;
  std::string line;
  size_t line_no = 0;
  AnnotatedSentence cur;
  bool in_block = false;
  size_t block_start_line = 0;

  auto flush = [&]() {
    if (!in_block) return;
    validate_sentence(cur, schema, corpus.size());
    corpus.push_back(std::move(cur));
    cur = AnnotatedSentence{};
    in_block = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    auto fields = split_ws(line);
    if (!in_block) {
      if (fields[0] == "ENT" || fields[0] == "REL")
        throw ParseError("line " + std::to_string(line_no) + ": " + fields[0] +
                         " before the token line of its block");
      cur.tokens = fields;
      in_block = true;
      block_start_line = line_no;
      continue;
    }
    if (fields[0] == "ENT") {
      if (fields.size() != 4)
        throw ParseError("line " + std::to_string(line_no) + ": ENT needs 3 fields");
      EntityMention m;
      m.span.start = parse_int(fields[1], line_no, "start index");
      m.span.end = parse_int(fields[2], line_no, "end index");
      m.type = fields[3];
      cur.mentions.push_back(std::move(m));
    } else if (fields[0] == "REL") {
      if (fields.size() != 4)
        throw ParseError("line " + std::to_string(line_no) + ": REL needs 3 fields");
      int hi = parse_int(fields[1], line_no, "head mention index");
      int ti = parse_int(fields[2], line_no, "tail mention index");
      if (hi < 0 || static_cast<size_t>(hi) >= cur.mentions.size() || ti < 0 ||
          static_cast<size_t>(ti) >= cur.mentions.size())
        throw ParseError("line " + std::to_string(line_no) + ": REL mention index out of range");
      cur.triples.push_back(
          RelationTriple{cur.mentions[static_cast<size_t>(hi)], fields[3],
                         cur.mentions[static_cast<size_t>(ti)]});
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": expected ENT or REL, got '" +
                       fields[0] + "' (block starting at line " +
                       std::to_string(block_start_line) + ")");
    }
  }
  flush();
  return corpus;
}

Corpus parse_column_corpus(const std::string& text, const Schema& schema) {
  std::istringstream ss(text);
  return parse_column_corpus(ss, schema);
}

std::string serialize_column_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus) {
    for (size_t i = 0; i < s.tokens.size(); ++i) {
      if (i) out += ' ';
      out += s.tokens[i];
    }
    out += '\n';
    for (const auto& m : s.mentions) {
      out += "ENT " + std::to_string(m.span.start) + ' ' + std::to_string(m.span.end) + ' ' +
             m.type + '\n';
    }
    for (const auto& t : s.triples) {
      auto idx_of = [&](const EntityMention& m) {
        auto it = std::find(s.mentions.begin(), s.mentions.end(), m);
        return static_cast<int>(it - s.mentions.begin());
      };
      out += "REL " + std::to_string(idx_of(t.head)) + ' ' + std::to_string(idx_of(t.tail)) + ' ' +
             t.relation + '\n';
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Record format (JSONL)
// ---------------------------------------------------------------------------

namespace {

Span span_from_json(const ordered_json& j, size_t line_no) {
  if (!j.is_object() || !j.contains("start") || !j.contains("end"))
    throw ParseError("line " + std::to_string(line_no) + ": span needs {start, end}");
  return Span{j["start"].get<int>(), j["end"].get<int>()};
}

ordered_json span_to_json(const Span& s) {
  return ordered_json{{"start", s.start}, {"end", s.end}};
}

}  // namespace

Corpus parse_record_corpus(std::istream& in, const Schema& schema) {
  Corpus corpus;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    AnnotatedSentence s;
    if (!j.contains("tokens"))
      throw ParseError("line " + std::to_string(line_no) + ": missing 'tokens'");
    s.tokens = j["tokens"].get<std::vector<std::string>>();

    if (j.contains("mentions")) {
      for (const auto& jm : j["mentions"]) {
        EntityMention m;
        m.span = span_from_json(jm, line_no);
        m.type = jm.at("type").get<std::string>();
        s.mentions.push_back(std::move(m));
      }
    }
    if (j.contains("records")) {
      for (const auto& jr : j["records"]) {
        if (!jr.is_object())
          throw ParseError("line " + std::to_string(line_no) + ": record must be an object");
        // slot order is normative: keys must match the schema chain exactly
        std::vector<std::string> keys;
        for (auto it = jr.begin(); it != jr.end(); ++it) keys.push_back(it.key());
        if (keys != schema.chain_slots)
          throw SchemaError("line " + std::to_string(line_no) +
                            ": record slot order disagrees with schema chain");
        HierRecord rec;
        for (size_t k = 0; k < keys.size(); ++k) {
          const auto& v = jr[keys[k]];
          if (v.is_null()) {
            rec.slots.emplace_back(std::nullopt);
          } else {
            rec.slots.emplace_back(EntityMention{span_from_json(v, line_no), keys[k]});
          }
        }
        s.records.push_back(std::move(rec));
      }
    }
    // materialize record mentions that were not listed explicitly
    for (const auto& rec : s.records) {
      for (const auto& slot : rec.slots) {
        if (slot && !mention_listed(s.mentions, *slot)) s.mentions.push_back(*slot);
      }
    }
    if (j.contains("triples")) {
      for (const auto& jt : j["triples"]) {
        int hi = jt.at("head").get<int>();
        int ti = jt.at("tail").get<int>();
        if (hi < 0 || static_cast<size_t>(hi) >= s.mentions.size() || ti < 0 ||
            static_cast<size_t>(ti) >= s.mentions.size())
          throw ParseError("line " + std::to_string(line_no) + ": triple mention index out of range");
        s.triples.push_back(RelationTriple{s.mentions[static_cast<size_t>(hi)],
                                           jt.at("relation").get<std::string>(),
                                           s.mentions[static_cast<size_t>(ti)]});
      }
    }
    validate_sentence(s, schema, corpus.size());
    corpus.push_back(std::move(s));
  }
  return corpus;
}

Corpus parse_record_corpus(const std::string& text, const Schema& schema) {
  std::istringstream ss(text);
  return parse_record_corpus(ss, schema);
}

std::string serialize_record_corpus(const Corpus& corpus, const Schema& schema) {
  std::string out;
  for (const auto& s : corpus) {
    ordered_json j;
    j["tokens"] = s.tokens;
    ordered_json jm = ordered_json::array();
    for (const auto& m : s.mentions) {
      ordered_json o = span_to_json(m.span);
      o["type"] = m.type;
      jm.push_back(o);
    }
    j["mentions"] = jm;
    ordered_json jr = ordered_json::array();
    for (const auto& rec : s.records) {
      ordered_json o = ordered_json::object();
      for (size_t k = 0; k < rec.slots.size(); ++k) {
        if (rec.slots[k])
          o[schema.chain_slots[k]] = span_to_json(rec.slots[k]->span);
        else
          o[schema.chain_slots[k]] = nullptr;
      }
      jr.push_back(o);
    }
    j["records"] = jr;
    ordered_json jt = ordered_json::array();
    for (const auto& t : s.triples) {
      auto idx_of = [&](const EntityMention& m) {
        auto it = std::find(s.mentions.begin(), s.mentions.end(), m);
        return static_cast<int>(it - s.mentions.begin());
      };
      jt.push_back(ordered_json{
          {"head", idx_of(t.head)}, {"relation", t.relation}, {"tail", idx_of(t.tail)}});
    }
    j["triples"] = jt;
    out += j.dump();
    out += '\n';
  }
  return out;
}

Corpus load_corpus_file(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open corpus file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  size_t pos = text.find_first_not_of(" \t\r\n");
  if (pos != std::string::npos && text[pos] == '{') return parse_record_corpus(text, schema);
  return parse_column_corpus(text, schema);
}

void save_corpus_file(const std::string& path, const Corpus& corpus, const Schema& schema,
                      const std::string& format) {
  std::string payload;
  if (format == "records")
    payload = serialize_record_corpus(corpus, schema);
  else if (format == "column")
    payload = serialize_column_corpus(corpus);
  else
    throw ArgumentError("unknown corpus format '" + format + "' (expected records|column)");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write corpus file: " + path);
  out << payload;
}

// ---------------------------------------------------------------------------
// Split and statistics
// ---------------------------------------------------------------------------

CorpusSplit split_corpus(const Corpus& corpus, const SplitRatios& ratios, uint64_t seed) {
  if (!(ratios.train > 0 && ratios.dev > 0 && ratios.test > 0))
    throw ArgumentError("split ratios must be positive");
  double sum = ratios.train + ratios.dev + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ArgumentError("split ratios must sum to 1, got " + std::to_string(sum));

  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const size_t n = corpus.size();
  size_t n_dev = static_cast<size_t>(std::floor(ratios.dev * static_cast<double>(n)));
  size_t n_test = static_cast<size_t>(std::floor(ratios.test * static_cast<double>(n)));
  size_t n_train = n - n_dev - n_test;

  CorpusSplit split;
  for (size_t i = 0; i < n; ++i) {
    const auto& s = corpus[order[i]];
    if (i < n_train)
      split.train.push_back(s);
    else if (i < n_train + n_dev)
      split.dev.push_back(s);
    else
      split.test.push_back(s);
  }
  return split;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.passages = corpus.size();
  for (const auto& s : corpus) {
    for (const auto& m : s.mentions) st.entity_totals[m.type]++;
    for (const auto& t : s.triples) st.relation_totals[t.relation]++;
  }
  for (const auto& [type, total] : st.entity_totals)
    st.entity_averages[type] =
        st.passages ? static_cast<double>(total) / static_cast<double>(st.passages) : 0.0;
  for (const auto& [rel, total] : st.relation_totals)
    st.relation_averages[rel] =
        st.passages ? static_cast<double>(total) / static_cast<double>(st.passages) : 0.0;
  return st;
}

std::string render_stats_table(const CorpusStats& stats) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-18s %10s %22s\n", "", "Total #", "Average # per passage");
  out += buf;
  auto row = [&](const std::string& name, size_t total, double avg) {
    std::snprintf(buf, sizeof buf, "%-18s %10zu %22.2f\n", name.c_str(), total, avg);
    out += buf;
  };
  for (const auto& [type, total] : stats.entity_totals)
    row(type, total, stats.entity_averages.at(type));
  for (const auto& [rel, total] : stats.relation_totals)
    row(rel, total, stats.relation_averages.at(rel));
  std::snprintf(buf, sizeof buf, "%-18s %10zu\n", "passages", stats.passages);
  out += buf;
  return out;
}

}  // namespace mtqa
