#include <doctest.h>

#include <cmath>

#include "mtqa/rng.hpp"
#include "mtqa/tagger.hpp"

using namespace mtqa;

namespace {

Question toy_question(int n_tokens) {
  Question q;
  for (int i = 0; i < n_tokens; ++i) q.text.push_back("q" + std::to_string(i));
  return q;
}

TagDistribution dist_from_tags(const std::vector<Tag>& tags, double peak = 0.96) {
  Eigen::MatrixXd probs(static_cast<int>(tags.size()), kNumTags);
  const double rest = (1.0 - peak) / (kNumTags - 1);
  probs.setConstant(rest);
  for (size_t t = 0; t < tags.size(); ++t)
    probs(static_cast<int>(t), static_cast<int>(tags[t])) = peak;
  return TagDistribution::from_probs(probs);
}

TagDistribution random_dist(int n, Rng& rng) {
  Eigen::MatrixXd logits(n, kNumTags);
  for (int t = 0; t < n; ++t)
    for (int k = 0; k < kNumTags; ++k) logits(t, k) = rng.normal(0, 2.0);
  return TagDistribution::from_logits(logits);
}

}  // namespace

TEST_CASE("build_input lays out [CLS] Q [SEP] C [SEP]") {
  Vocabulary vocab;
  std::vector<std::string> context{"c0", "c1", "c2", "c3", "c4", "c5", "c6"};
  ModelInput input = build_input(toy_question(5), context, vocab, 64);
  CHECK(input.total_length() == 15);
  CHECK(input.context_offset == 7);
  CHECK(input.context_length == 7);
  CHECK(input.tokens.front() == kClsToken);
  CHECK(input.tokens[6] == kSepToken);
  CHECK(input.tokens.back() == kSepToken);
  CHECK(std::count(input.tokens.begin(), input.tokens.end(), std::string(kSepToken)) == 2);
  CHECK(input.context_offset + input.context_length + 1 == input.total_length());
  // all these tokens are out of vocabulary for an empty vocab
  for (size_t i = 1; i < input.ids.size(); ++i)
    if (input.tokens[i] != kSepToken) CHECK(input.ids[i] == vocab.unk_id());
}

TEST_CASE("build_input rejects bad inputs instead of truncating") {
  Vocabulary vocab;
  CHECK_THROWS_AS(build_input(Question{}, {"a"}, vocab, 64), ArgumentError);
  CHECK_THROWS_AS(build_input(toy_question(3), {}, vocab, 64), ArgumentError);
  CHECK_THROWS_WITH_AS(build_input(toy_question(30), {"ctx0", "b"}, vocab, 32),
                       doctest::Contains("exceeds"), ArgumentError);
  CHECK_THROWS_AS(build_input(toy_question(2), {"a", kSepToken}, vocab, 64), ArgumentError);
}

TEST_CASE("vocabulary is deterministic and maps unknowns to [UNK]") {
  Corpus corpus(1);
  corpus[0].tokens = {"zeta", "alpha", "zeta"};
  TemplateSet templates;
  templates.entity_questions.push_back({"t", "which thing", "entity : thing"});
  Vocabulary v = Vocabulary::build(corpus, templates);
  CHECK(v.id_of("alpha") != v.unk_id());
  CHECK(v.id_of("zeta") != v.unk_id());
  CHECK(v.id_of("which") != v.unk_id());
  CHECK(v.id_of("missing") == v.unk_id());
  CHECK(v.id_of(kAbsentFill) != v.unk_id());
  Vocabulary w = Vocabulary::build(corpus, templates);
  CHECK(v.tokens() == w.tokens());
  CHECK(Vocabulary::from_tokens(v.tokens()).tokens() == v.tokens());
}

TEST_CASE("tag distributions normalize") {
  Rng rng(3);
  TagDistribution d = random_dist(9, rng);
  for (int t = 0; t < d.length(); ++t) {
    CHECK(d.probs.row(t).sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(d.probs.row(t).minCoeff() >= 0.0);
  }
  // equal logits give 0.2 per label
  TagDistribution uniform = TagDistribution::from_logits(Eigen::MatrixXd::Zero(4, kNumTags));
  CHECK(uniform.probs(2, 1) == doctest::Approx(0.2));
}

TEST_CASE("decode_spans handles the canonical label patterns") {
  DecodingConfig strict;
  auto spans_of = [&](const std::vector<Tag>& tags, const DecodingConfig& cfg) {
    auto scored = decode_spans(dist_from_tags(tags), cfg);
    std::vector<Span> spans;
    for (const auto& s : scored) spans.push_back(s.span);
    return spans;
  };
  using T = Tag;
  CHECK(spans_of({T::kB, T::kM, T::kE, T::kO, T::kO}, strict) == std::vector<Span>{{0, 2}});
  CHECK(spans_of({T::kO, T::kO, T::kO}, strict).empty());
  CHECK(spans_of({T::kS, T::kO, T::kB, T::kE}, strict) == std::vector<Span>{{0, 0}, {2, 3}});
  // dangling fragments drop under strict decoding
  CHECK(spans_of({T::kB, T::kM, T::kO}, strict).empty());
  CHECK(spans_of({T::kM, T::kE, T::kO}, strict).empty());
  CHECK(spans_of({T::kB, T::kM, T::kB, T::kE}, strict) == std::vector<Span>{{2, 3}});
  // lenient mode turns a dangling B into a single-token span
  DecodingConfig lenient{false};
  CHECK(spans_of({T::kB, T::kO, T::kO}, lenient) == std::vector<Span>{{0, 0}});
  CHECK(spans_of({T::kB, T::kM, T::kO}, lenient) == std::vector<Span>{{0, 0}});

  // argmax ties break toward the earlier label in (B, M, E, S, O)
  Eigen::MatrixXd probs(1, kNumTags);
  probs << 0.3, 0.05, 0.05, 0.3, 0.3;
  auto tags = argmax_tags(TagDistribution::from_probs(probs));
  CHECK(tags[0] == Tag::kB);
}

TEST_CASE("span_log_prob follows the span-pattern factorization") {
  // probability one on the span pattern gives log-probability zero
  TagDistribution peaked = dist_from_tags({Tag::kB, Tag::kM, Tag::kE}, 1.0);
  CHECK(span_log_prob(peaked, {0, 2}) == doctest::Approx(0.0));

  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, kNumTags, 0.2);
  TagDistribution u = TagDistribution::from_probs(uniform);
  CHECK(span_log_prob(u, {0, 2}) == doctest::Approx(3 * std::log(0.2)).epsilon(1e-12));
  CHECK(span_log_prob(u, {1, 1}) == doctest::Approx(std::log(0.2)).epsilon(1e-12));

  Eigen::MatrixXd half = Eigen::MatrixXd::Constant(1, kNumTags, 0.125);
  half(0, static_cast<int>(Tag::kS)) = 0.5;
  CHECK(span_log_prob(TagDistribution::from_probs(half), {0, 0}) ==
        doctest::Approx(std::log(0.5)));

  CHECK_THROWS_AS(span_log_prob(u, {2, 5}), ArgumentError);
}

TEST_CASE("factorization: exp(span_log_prob) equals the per-token product") {
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    int n = 1 + rng.index(12);
    TagDistribution d = random_dist(n, rng);
    int start = rng.index(n);
    int end = start + rng.index(n - start);
    double product;
    if (start == end) {
      product = d.probs(start, static_cast<int>(Tag::kS));
    } else {
      product = d.probs(start, static_cast<int>(Tag::kB)) *
                d.probs(end, static_cast<int>(Tag::kE));
      for (int t = start + 1; t < end; ++t) product *= d.probs(t, static_cast<int>(Tag::kM));
    }
    double via_log = std::exp(span_log_prob(d, {start, end}));
    CHECK(via_log == doctest::Approx(product).epsilon(1e-12));
  }
}

TEST_CASE("decode round-trip: relabel(decode) is a fixed point") {
  Rng rng(23);
  DecodingConfig strict;
  for (int trial = 0; trial < 2000; ++trial) {
    int n = 1 + rng.index(14);
    // random well-formed labeling from random non-overlapping spans
    std::vector<Span> spans;
    int at = 0;
    while (at < n) {
      if (rng.chance(0.4)) {
        int len = 1 + rng.index(std::min(4, n - at));
        spans.push_back({at, at + len - 1});
        at += len;
      } else {
        ++at;
      }
    }
    auto labels = labels_from_spans(spans, n);
    auto decoded = decode_spans(dist_from_tags(labels), strict);
    std::vector<Span> decoded_spans;
    for (const auto& s : decoded) decoded_spans.push_back(s.span);
    REQUIRE(decoded_spans == spans);
    // idempotence of relabel -> decode
    auto relabeled = labels_from_spans(decoded_spans, n);
    CHECK(relabeled == labels);
  }
}

TEST_CASE("decode soundness: no overlaps, every span matches its pattern") {
  Rng rng(29);
  DecodingConfig strict;
  for (int trial = 0; trial < 500; ++trial) {
    int n = 1 + rng.index(16);
    TagDistribution d = random_dist(n, rng);
    auto tags = argmax_tags(d);
    auto decoded = decode_spans(d, strict);
    int last_end = -1;
    for (const auto& s : decoded) {
      CHECK(s.span.start > last_end);
      last_end = s.span.end;
      if (s.span.start == s.span.end) {
        CHECK(tags[static_cast<size_t>(s.span.start)] == Tag::kS);
      } else {
        CHECK(tags[static_cast<size_t>(s.span.start)] == Tag::kB);
        CHECK(tags[static_cast<size_t>(s.span.end)] == Tag::kE);
        for (int t = s.span.start + 1; t < s.span.end; ++t)
          CHECK(tags[static_cast<size_t>(t)] == Tag::kM);
      }
      CHECK(s.log_prob == span_log_prob(d, s.span));
      CHECK(s.log_prob <= 0.0);
    }
  }
}

TEST_CASE("gold_labels skips overlapping mentions deterministically") {
  auto labels = gold_labels({{0, 2}, {2, 3}}, 5);
  CHECK(labels == std::vector<Tag>{Tag::kB, Tag::kM, Tag::kE, Tag::kO, Tag::kO});
}
