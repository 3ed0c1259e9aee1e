#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtqa/cli.hpp"
#include "mtqa/eval.hpp"
#include "mtqa/manifest.hpp"
#include "mtqa/synth.hpp"

using namespace mtqa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mtqa_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& payload) {
  std::ofstream out(path, std::ios::binary);
  out << payload;
}

}  // namespace

TEST_CASE("synth writes the corpus plus a verifiable manifest") {
  TempDir dir;
  REQUIRE(cli::dispatch({"init", "--task", "flat", "--schema-out", dir.file("s.json")}) == 0);
  REQUIRE(cli::dispatch({"synth", "--schema", dir.file("s.json"), "--n", "12", "--seed", "9",
                         "--out", dir.file("c.jsonl")}) == 0);
  CHECK(fs::exists(dir.file("c.jsonl")));

  RunManifest manifest = read_manifest(dir.file("c.jsonl") + ".manifest.json");
  CHECK(manifest.command == "synth");
  CHECK(manifest.seed == 9);
  std::string error;
  CHECK(verify_manifest(manifest, &error));

  // identical invocations produce byte-identical corpora
  REQUIRE(cli::dispatch({"synth", "--schema", dir.file("s.json"), "--n", "12", "--seed", "9",
                         "--out", dir.file("c2.jsonl")}) == 0);
  CHECK(slurp(dir.file("c.jsonl")) == slurp(dir.file("c2.jsonl")));

  // tampering with an input breaks verification
  spit(dir.file("s.json"), slurp(dir.file("s.json")) + " ");
  CHECK(!verify_manifest(manifest, &error));
  CHECK(!error.empty());
}

TEST_CASE("usage errors exit with code 2 and write nothing") {
  TempDir dir;
  REQUIRE(cli::dispatch({"init", "--task", "flat", "--schema-out", dir.file("s.json")}) == 0);
  REQUIRE(cli::dispatch({"synth", "--schema", dir.file("s.json"), "--n", "8", "--seed", "1",
                         "--out", dir.file("c.jsonl")}) == 0);

  CHECK(cli::dispatch({"no-such-command"}) == 2);
  CHECK(cli::dispatch({"synth", "--bogus-flag", "1"}) == 2);
  CHECK(cli::dispatch({"train", "--corpus", dir.file("c.jsonl"), "--schema", dir.file("s.json"),
                       "--out", dir.file("m.json"), "--lambda", "1.5"}) == 2);
  CHECK(!fs::exists(dir.file("m.json")));
  CHECK(cli::dispatch({"extract", "--corpus", dir.file("c.jsonl"), "--schema",
                       dir.file("s.json"), "--out", dir.file("p.jsonl")}) == 2);
}

TEST_CASE("oracle extraction and evaluation gate on metric floors") {
  TempDir dir;
  REQUIRE(cli::dispatch({"init", "--task", "resume", "--schema-out", dir.file("s.json"),
                         "--templates-out", dir.file("t.json")}) == 0);
  REQUIRE(cli::dispatch({"synth", "--schema", dir.file("s.json"), "--n", "10", "--seed", "2",
                         "--out", dir.file("c.jsonl")}) == 0);
  REQUIRE(cli::dispatch({"extract", "--corpus", dir.file("c.jsonl"), "--schema",
                         dir.file("s.json"), "--templates", dir.file("t.json"), "--oracle",
                         "--out", dir.file("p.jsonl")}) == 0);

  CHECK(cli::dispatch({"eval", "--pred", dir.file("p.jsonl"), "--gold", dir.file("c.jsonl"),
                       "--schema", dir.file("s.json"), "--min-entity-f1", "100",
                       "--min-relation-f1", "100", "--min-slot-f1", "100", "--report",
                       dir.file("r.json")}) == 0);
  EvalReport report = parse_report(slurp(dir.file("r.json")));
  CHECK(report.slot_all_prf.f == doctest::Approx(1.0));

  // a prediction below the floor fails the gate with exit code 1
  Schema schema = load_schema_file(dir.file("s.json"));
  Corpus gold = load_corpus_file(dir.file("c.jsonl"), schema);
  Corpus half = gold;
  for (size_t i = 0; i < half.size(); i += 2) {
    half[i].mentions.clear();
    half[i].triples.clear();
    half[i].records.clear();
  }
  spit(dir.file("half.jsonl"), serialize_record_corpus(half, schema));
  CHECK(cli::dispatch({"eval", "--pred", dir.file("half.jsonl"), "--gold", dir.file("c.jsonl"),
                       "--schema", dir.file("s.json"), "--min-relation-f1", "90"}) == 1);
}

TEST_CASE("templates check reports diagnostics and sets the exit code") {
  TempDir dir;
  REQUIRE(cli::dispatch({"init", "--task", "resume", "--schema-out", dir.file("s.json"),
                         "--templates-out", dir.file("t.json")}) == 0);
  CHECK(cli::dispatch({"templates", "check", "--templates", dir.file("t.json"), "--schema",
                       dir.file("s.json")}) == 0);

  // corrupt one relation label
  std::string text = slurp(dir.file("t.json"));
  auto pos = text.find("company_of");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, std::string("company_of").size(), "nonexistent");
  spit(dir.file("bad.json"), text);
  CHECK(cli::dispatch({"templates", "check", "--templates", dir.file("bad.json"), "--schema",
                       dir.file("s.json")}) == 1);
}

TEST_CASE("stats command prints the totals table") {
  TempDir dir;
  REQUIRE(cli::dispatch({"init", "--task", "flat", "--schema-out", dir.file("s.json")}) == 0);
  REQUIRE(cli::dispatch({"synth", "--schema", dir.file("s.json"), "--n", "6", "--seed", "4",
                         "--out", dir.file("c.jsonl")}) == 0);
  CHECK(cli::dispatch({"stats", "--corpus", dir.file("c.jsonl"), "--schema",
                       dir.file("s.json")}) == 0);
}

TEST_CASE("emit_report supports both formats and round-trips") {
  Schema schema = builtin_flat_schema();
  Corpus gold = synthesize_corpus(schema, builtin_flat_grammar(), 8, 5);
  EvalReport report = evaluate_predictions(predictions_from_gold(gold), gold, schema);

  std::string table = emit_report(report, "table");
  CHECK(table.find("micro") != std::string::npos);
  std::string structured = emit_report(report, "structured");
  EvalReport back = parse_report(structured);
  CHECK(back.entity_prf.f == report.entity_prf.f);
  CHECK_THROWS_AS(emit_report(report, "xml"), ArgumentError);
}

TEST_CASE("malformed corpora exit with code 1") {
  TempDir dir;
  REQUIRE(cli::dispatch({"init", "--task", "flat", "--schema-out", dir.file("s.json")}) == 0);
  spit(dir.file("bad.jsonl"), "{\"tokens\": [\"a\"], \"mentions\": [{\"start\": 0, \"end\": 9, "
                              "\"type\": \"person\"}]}\n");
  CHECK(cli::dispatch({"stats", "--corpus", dir.file("bad.jsonl"), "--schema",
                       dir.file("s.json")}) == 1);
}
