#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "mtqa/corpus.hpp"
#include "mtqa/synth.hpp"
#include "mtqa/templates.hpp"

namespace mtqa::fixtures {

inline std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

/// Five-row work-history passage: one person, five employers, one row with
/// no position. Gold triples come from the standard chain links.
inline AnnotatedSentence musk_sentence() {
  AnnotatedSentence s;
  s.tokens = split_tokens(
      "in 2002 musk founded spacex and served as ceo . "
      "in 2003 he funded tesla as ceo and product architect . "
      "in 2006 he created solarcity serving as chairman . "
      "in 2016 he cofounded neuralink as ceo . "
      "in 2016 he founded the boring company .");

  auto mention = [&](int start, int end, const std::string& type) {
    EntityMention m{{start, end}, type};
    s.mentions.push_back(m);
    return m;
  };
  EntityMention musk = mention(2, 2, "Person");
  EntityMention spacex = mention(4, 4, "Company");
  EntityMention tesla = mention(14, 14, "Company");
  EntityMention solarcity = mention(25, 25, "Company");
  EntityMention neuralink = mention(34, 34, "Company");
  EntityMention boring = mention(42, 44, "Company");
  EntityMention ceo1 = mention(8, 8, "Position");
  EntityMention cpa = mention(16, 19, "Position");  // "ceo and product architect"
  EntityMention chairman = mention(28, 28, "Position");
  EntityMention ceo2 = mention(36, 36, "Position");
  EntityMention t2002 = mention(1, 1, "Time");
  EntityMention t2003 = mention(11, 11, "Time");
  EntityMention t2006 = mention(22, 22, "Time");
  EntityMention t2016a = mention(31, 31, "Time");
  EntityMention t2016b = mention(39, 39, "Time");

  auto record = [&](const EntityMention& c, std::optional<EntityMention> r,
                    const EntityMention& t) {
    HierRecord rec;
    rec.slots = {musk, c, std::move(r), t};
    s.records.push_back(std::move(rec));
  };
  record(spacex, ceo1, t2002);
  record(tesla, cpa, t2003);
  record(solarcity, chairman, t2006);
  record(neuralink, ceo2, t2016a);
  record(boring, std::nullopt, t2016b);

  const std::vector<ChainStepLink> links = {
      {"company_of", 0, 1}, {"position_of", 1, 2}, {"time_of", 2, 3}};
  for (const auto& rec : s.records)
    for (auto&& t : flatten_record(rec, links)) s.triples.push_back(std::move(t));
  return s;
}

/// Pre-segmented biography passage with two work-history rows.
inline AnnotatedSentence zheng_sentence() {
  AnnotatedSentence s;
  s.tokens = {"郑强",          "先生", "，", "1995年至1998年", "就职于",
              "江苏常州公路运输有限公司", "任",   "主办会计",   "。",
              "1998年至2000年", "就职于", "越秀会计师事务所", "任", "项目经理", "。"};
  auto mention = [&](int start, int end, const std::string& type) {
    EntityMention m{{start, end}, type};
    s.mentions.push_back(m);
    return m;
  };
  EntityMention zheng = mention(0, 0, "Person");
  EntityMention company1 = mention(5, 5, "Company");
  EntityMention company2 = mention(11, 11, "Company");
  EntityMention position1 = mention(7, 7, "Position");
  EntityMention position2 = mention(13, 13, "Position");
  EntityMention time1 = mention(3, 3, "Time");
  EntityMention time2 = mention(9, 9, "Time");

  HierRecord r1;
  r1.slots = {zheng, company1, position1, time1};
  HierRecord r2;
  r2.slots = {zheng, company2, position2, time2};
  s.records = {r1, r2};

  const std::vector<ChainStepLink> links = {
      {"company_of", 0, 1}, {"position_of", 1, 2}, {"time_of", 2, 3}};
  for (const auto& rec : s.records)
    for (auto&& t : flatten_record(rec, links)) s.triples.push_back(std::move(t));
  return s;
}

inline Corpus work_history_corpus() { return {musk_sentence(), zheng_sentence()}; }

}  // namespace mtqa::fixtures
