#include "mtqa/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mtqa {

char tag_char(Tag t) {
  switch (t) {
    case Tag::kB: return 'B';
    case Tag::kM: return 'M';
    case Tag::kE: return 'E';
    case Tag::kS: return 'S';
    case Tag::kO: return 'O';
  }
  return '?';
}

Tag tag_from_char(char c) {
  switch (c) {
    case 'B': return Tag::kB;
    case 'M': return Tag::kM;
    case 'E': return Tag::kE;
    case 'S': return Tag::kS;
    case 'O': return Tag::kO;
  }
  throw ArgumentError(std::string("unknown tag '") + c + "'");
}

Vocabulary::Vocabulary() {
  id_to_token_ = {kClsToken, kSepToken, kUnkToken};
  for (size_t i = 0; i < id_to_token_.size(); ++i)
    token_to_id_[id_to_token_[i]] = static_cast<int>(i);
}

Vocabulary Vocabulary::build(const Corpus& corpus, const TemplateSet& templates) {
  std::set<std::string> seen;
  for (const auto& s : corpus)
    for (const auto& t : s.tokens) seen.insert(t);

  auto add_text = [&](const std::string& text) {
    std::string tok;
    for (char c : text + " ") {
      if (c == ' ') {
        // numbered slot markers never reach the encoder; fills come from
        // corpus tokens already collected above
        if (!tok.empty() && !(tok.front() == '{' && tok.back() == '}')) seen.insert(tok);
        tok.clear();
      } else {
        tok += c;
      }
    }
  };
  for (const auto& eq : templates.entity_questions) {
    add_text(eq.natural_text);
    add_text(eq.pseudo_text);
  }
  for (const auto& chain : templates.chains) {
    for (const auto& step : chain.steps) {
      add_text(step.natural_pattern);
      add_text(step.pseudo_pattern);
    }
  }
  seen.insert(kAbsentFill);

  Vocabulary v;
  for (const auto& tok : seen) {
    if (tok == kClsToken || tok == kSepToken || tok == kUnkToken) continue;
    v.token_to_id_[tok] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 3 || tokens[0] != kClsToken || tokens[1] != kSepToken ||
      tokens[2] != kUnkToken)
    throw ModelError("vocabulary must start with [CLS] [SEP] [UNK]");
  Vocabulary v;
  v.id_to_token_ = tokens;
  v.token_to_id_.clear();
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!v.token_to_id_.emplace(tokens[i], static_cast<int>(i)).second)
      throw ModelError("duplicate vocabulary token '" + tokens[i] + "'");
  }
  return v;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? unk_id() : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || static_cast<size_t>(id) >= id_to_token_.size())
    throw ArgumentError("token id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<size_t>(id)];
}

ModelInput build_input(const Question& question, const std::vector<std::string>& context_tokens,
                       const Vocabulary& vocab, int max_len) {
  if (question.text.empty()) throw ArgumentError("build_input: empty question");
  if (context_tokens.empty()) throw ArgumentError("build_input: empty context");
  for (const auto& t : question.text)
    if (t == kClsToken || t == kSepToken)
      throw ArgumentError("build_input: question contains reserved marker " + t);
  for (const auto& t : context_tokens)
    if (t == kClsToken || t == kSepToken)
      throw ArgumentError("build_input: context contains reserved marker " + t);

  const size_t total = 3 + question.text.size() + context_tokens.size();
  if (total > static_cast<size_t>(max_len))
    throw ArgumentError("build_input: length " + std::to_string(total) + " exceeds max " +
                        std::to_string(max_len) + " for context starting '" +
                        context_tokens.front() + "'");

  ModelInput input;
  input.tokens.reserve(total);
  input.tokens.push_back(kClsToken);
  for (const auto& t : question.text) input.tokens.push_back(t);
  input.tokens.push_back(kSepToken);
  input.context_offset = static_cast<int>(input.tokens.size());
  for (const auto& t : context_tokens) input.tokens.push_back(t);
  input.tokens.push_back(kSepToken);
  input.context_length = static_cast<int>(context_tokens.size());

  input.ids.reserve(total);
  for (const auto& t : input.tokens) input.ids.push_back(vocab.id_of(t));
  return input;
}

TagDistribution TagDistribution::from_logits(const Eigen::MatrixXd& logits) {
  TagDistribution d;
  d.log_probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    double lse = std::log((logits.row(r).array() - mx).exp().sum()) + mx;
    d.log_probs.row(r) = logits.row(r).array() - lse;
  }
  d.probs = d.log_probs.array().exp();
  return d;
}

TagDistribution TagDistribution::from_probs(const Eigen::MatrixXd& probs) {
  TagDistribution d;
  d.probs = probs;
  d.log_probs = probs.array().max(1e-300).log();
  return d;
}

std::vector<Tag> argmax_tags(const TagDistribution& dist) {
  std::vector<Tag> tags;
  tags.reserve(static_cast<size_t>(dist.length()));
  for (int t = 0; t < dist.length(); ++t) {
    int best = 0;
    for (int k = 1; k < kNumTags; ++k)
      if (dist.probs(t, k) > dist.probs(t, best)) best = k;
    tags.push_back(static_cast<Tag>(best));
  }
  return tags;
}

namespace {

std::vector<Span> segment_labels(const std::vector<Tag>& tags, bool strict) {
  std::vector<Span> spans;
  const int n = static_cast<int>(tags.size());
  int i = 0;
  while (i < n) {
    if (tags[static_cast<size_t>(i)] == Tag::kS) {
      spans.push_back(Span{i, i});
      ++i;
    } else if (tags[static_cast<size_t>(i)] == Tag::kB) {
      int j = i + 1;
      while (j < n && tags[static_cast<size_t>(j)] == Tag::kM) ++j;
      if (j < n && tags[static_cast<size_t>(j)] == Tag::kE) {
        spans.push_back(Span{i, j});
        i = j + 1;
      } else {
        if (!strict) spans.push_back(Span{i, i});  // dangling B as a single
        i = (j == i + 1) ? i + 1 : j;  // resume at the label that broke the run
      }
    } else {
      ++i;  // O, or dangling M/E
    }
  }
  return spans;
}

}  // namespace

std::vector<ScoredSpan> decode_spans(const TagDistribution& dist, const DecodingConfig& config) {
  auto tags = argmax_tags(dist);
  auto spans = segment_labels(tags, config.strict);
  std::vector<ScoredSpan> out;
  out.reserve(spans.size());
  for (const auto& s : spans) out.push_back(ScoredSpan{s, span_log_prob(dist, s)});
  return out;
}

double span_log_prob(const TagDistribution& dist, const Span& span) {
  if (span.start < 0 || span.end < span.start || span.end >= dist.length())
    throw ArgumentError("span_log_prob: span out of bounds");
  if (span.start == span.end) return dist.log_probs(span.start, static_cast<int>(Tag::kS));
  double lp = dist.log_probs(span.start, static_cast<int>(Tag::kB)) +
              dist.log_probs(span.end, static_cast<int>(Tag::kE));
  for (int t = span.start + 1; t < span.end; ++t)
    lp += dist.log_probs(t, static_cast<int>(Tag::kM));
  return lp;
}

std::vector<Tag> labels_from_spans(const std::vector<Span>& spans, int length) {
  std::vector<Tag> tags(static_cast<size_t>(length), Tag::kO);
  for (const auto& s : spans) {
    if (s.start < 0 || s.end < s.start || s.end >= length)
      throw ArgumentError("labels_from_spans: span out of bounds");
    if (s.start == s.end) {
      tags[static_cast<size_t>(s.start)] = Tag::kS;
    } else {
      tags[static_cast<size_t>(s.start)] = Tag::kB;
      for (int t = s.start + 1; t < s.end; ++t) tags[static_cast<size_t>(t)] = Tag::kM;
      tags[static_cast<size_t>(s.end)] = Tag::kE;
    }
  }
  return tags;
}

std::vector<Tag> gold_labels(const std::vector<Span>& spans, int length) {
  std::vector<Tag> tags(static_cast<size_t>(length), Tag::kO);
  auto sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& s : sorted) {
    bool clash = false;
    for (int t = s.start; t <= s.end; ++t)
      if (tags[static_cast<size_t>(t)] != Tag::kO) clash = true;
    if (clash) continue;
    if (s.start == s.end) {
      tags[static_cast<size_t>(s.start)] = Tag::kS;
    } else {
      tags[static_cast<size_t>(s.start)] = Tag::kB;
      for (int t = s.start + 1; t < s.end; ++t) tags[static_cast<size_t>(t)] = Tag::kM;
      tags[static_cast<size_t>(s.end)] = Tag::kE;
    }
  }
  return tags;
}

}  // namespace mtqa
