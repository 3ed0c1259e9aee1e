#include "mtqa/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mtqa/manifest.hpp"
#include "mtqa/synth.hpp"
#include "mtqa/training.hpp"
#include "mtqa/version.hpp"

namespace mtqa {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string emit_report(const EvalReport& report, const std::string& format) {
  if (format == "table") return render_report_table(report);
  if (format == "structured") return serialize_report(report);
  throw ArgumentError("unknown report format '" + format + "' (expected table|structured)");
}

namespace cli {
namespace {

void write_file(const std::string& path, const std::string& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write output file: " + path);
  out << payload;
}

SplitRatios parse_split(const std::string& text) {
  SplitRatios r;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &r.train, &r.dev, &r.test) != 3)
    throw ArgumentError("bad --split '" + text + "' (expected train,dev,test)");
  return r;
}

std::vector<CurriculumStage> parse_curriculum(const std::string& text) {
  std::vector<CurriculumStage> stages;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    CurriculumStage stage;
    if (std::sscanf(item.c_str(), "%dx%d", &stage.max_turns, &stage.epochs) != 2)
      throw ArgumentError("bad --curriculum item '" + item + "' (expected TURNSxEPOCHS)");
    stages.push_back(stage);
  }
  if (stages.empty()) throw ArgumentError("empty --curriculum");
  return stages;
}

std::vector<std::string> parse_values(const std::string& text) {
  std::vector<std::string> values;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) values.push_back(item);
  }
  return values;
}

TemplateSet resolve_templates(const std::string& path, const Schema& schema,
                              std::vector<std::string>& inputs) {
  if (path.empty()) return builtin_templates_for(schema);
  inputs.push_back(path);
  return load_template_file(path);
}

TrainConfig train_config_from_file(const std::string& path) {
  TrainConfig c;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config: " + std::string(e.what()));
  }
  c.lambda_weight = j.value("lambda", c.lambda_weight);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.optimizer = j.value("optimizer", c.optimizer);
  if (j.contains("question_mode")) c.mode = parse_question_mode(j["question_mode"]);
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    c.encoder.width = e.value("width", c.encoder.width);
    c.encoder.layers = e.value("layers", c.encoder.layers);
    c.encoder.heads = e.value("heads", c.encoder.heads);
    c.encoder.ffn = e.value("ffn", c.encoder.ffn);
    c.encoder.max_len = e.value("max_len", c.encoder.max_len);
    c.encoder.rel_clip = e.value("rel_clip", c.encoder.rel_clip);
  }
  if (j.contains("split")) {
    auto v = j["split"].get<std::vector<double>>();
    if (v.size() != 3) throw ArgumentError("config split must have three ratios");
    c.split = SplitRatios{v[0], v[1], v[2]};
  }
  c.mismatched_fill_negatives = j.value("mismatched_fill_negatives", c.mismatched_fill_negatives);
  return c;
}

ordered_json train_config_json(const TrainConfig& c) {
  return ordered_json{
      {"lambda", c.lambda_weight},
      {"learning_rate", c.learning_rate},
      {"momentum", c.momentum},
      {"clip_norm", c.clip_norm},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"optimizer", c.optimizer},
      {"question_mode", question_mode_name(c.mode)},
      {"encoder",
       ordered_json{{"width", c.encoder.width},
                    {"layers", c.encoder.layers},
                    {"heads", c.encoder.heads},
                    {"ffn", c.encoder.ffn},
                    {"max_len", c.encoder.max_len},
                    {"rel_clip", c.encoder.rel_clip}}},
      {"split", std::vector<double>{c.split.train, c.split.dev, c.split.test}},
      {"mismatched_fill_negatives", c.mismatched_fill_negatives}};
}

std::string train_log_jsonl(const std::vector<EpochLog>& log) {
  std::string out;
  for (const auto& e : log) {
    ordered_json j{{"epoch", e.epoch},
                   {"head_loss", e.head_loss},
                   {"tail_loss", e.tail_loss},
                   {"joint_loss", e.joint},
                   {"dev_entity_f1", e.dev_entity_f1},
                   {"dev_relation_f1", e.dev_relation_f1},
                   {"dev_slot_f1", e.dev_slot_f1},
                   {"best", e.best}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string rl_log_jsonl(const std::vector<RlEpochLog>& log, bool warned) {
  std::string out;
  for (const auto& e : log) {
    ordered_json j{{"epoch", e.epoch},
                   {"stage", e.stage},
                   {"max_turns", e.max_turns},
                   {"mean_reward", e.mean_reward},
                   {"baseline", e.baseline},
                   {"dev_reward", e.dev_reward},
                   {"dev_f1", e.dev_f1},
                   {"buffer_size", e.buffer_size},
                   {"max_observed_turns", e.max_observed_turns},
                   {"best", e.best}};
    if (e.epoch == 0 && warned) j["warning"] = "starting from an untrained checkpoint";
    out += j.dump();
    out += '\n';
  }
  return out;
}

struct CommonModelArgs {
  std::string corpus_path, schema_path, templates_path;
};

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"entity-relation extraction via multi-turn question answering"};
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  app.require_subcommand(1);

  // ---- init ----
  auto* cmd_init = app.add_subcommand("init", "write a builtin task's schema/templates/grammar");
  std::string init_task = "flat", init_schema, init_templates, init_grammar;
  cmd_init->add_option("--task", init_task)->check(CLI::IsMember({"flat", "resume"}));
  cmd_init->add_option("--schema-out", init_schema)->required();
  cmd_init->add_option("--templates-out", init_templates);
  cmd_init->add_option("--grammar-out", init_grammar);

  // ---- synth ----
  auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic gold corpus");
  std::string sy_schema, sy_grammar, sy_out, sy_format = "records";
  uint64_t sy_seed = 1;
  size_t sy_n = 0;
  cmd_synth->add_option("--schema", sy_schema)->required();
  cmd_synth->add_option("--n", sy_n)->required()->check(CLI::NonNegativeNumber);
  cmd_synth->add_option("--seed", sy_seed);
  cmd_synth->add_option("--out", sy_out)->required();
  cmd_synth->add_option("--grammar", sy_grammar);
  cmd_synth->add_option("--format", sy_format)->check(CLI::IsMember({"records", "column"}));

  // ---- stats ----
  auto* cmd_stats = app.add_subcommand("stats", "per-type totals and per-passage averages");
  std::string st_corpus, st_schema;
  cmd_stats->add_option("--corpus", st_corpus)->required();
  cmd_stats->add_option("--schema", st_schema)->required();

  // ---- templates ----
  auto* cmd_templates = app.add_subcommand("templates", "question template utilities");
  cmd_templates->require_subcommand(1);
  auto* cmd_tcheck = cmd_templates->add_subcommand("check", "validate a template file");
  std::string tc_templates, tc_schema;
  cmd_tcheck->add_option("--templates", tc_templates)->required();
  cmd_tcheck->add_option("--schema", tc_schema)->required();
  auto* cmd_tinit = cmd_templates->add_subcommand("init", "write builtin templates for a schema");
  std::string ti_schema, ti_out;
  cmd_tinit->add_option("--schema", ti_schema)->required();
  cmd_tinit->add_option("--out", ti_out)->required();

  // ---- train ----
  auto* cmd_train = app.add_subcommand("train", "supervised joint training");
  CommonModelArgs tr;
  std::string tr_out, tr_log, tr_config, tr_split;
  std::optional<double> tr_lambda, tr_lr, tr_momentum, tr_clip;
  std::optional<std::string> tr_opt;
  std::optional<int> tr_batch, tr_epochs, tr_width, tr_layers, tr_heads, tr_ffn, tr_maxlen;
  std::optional<uint64_t> tr_seed;
  std::optional<std::string> tr_mode;
  cmd_train->add_option("--corpus", tr.corpus_path)->required();
  cmd_train->add_option("--schema", tr.schema_path)->required();
  cmd_train->add_option("--templates", tr.templates_path);
  cmd_train->add_option("--out", tr_out)->required();
  cmd_train->add_option("--log", tr_log);
  cmd_train->add_option("--config", tr_config);
  cmd_train->add_option("--lambda", tr_lambda)->check(CLI::Range(0.0, 1.0));
  cmd_train->add_option("--lr", tr_lr)->check(CLI::PositiveNumber);
  cmd_train->add_option("--momentum", tr_momentum)->check(CLI::Range(0.0, 0.999));
  cmd_train->add_option("--clip", tr_clip)->check(CLI::PositiveNumber);
  cmd_train->add_option("--batch", tr_batch)->check(CLI::PositiveNumber);
  cmd_train->add_option("--epochs", tr_epochs)->check(CLI::PositiveNumber);
  cmd_train->add_option("--seed", tr_seed);
  cmd_train->add_option("--mode", tr_mode)->check(CLI::IsMember({"natural", "pseudo"}));
  cmd_train->add_option("--optimizer", tr_opt)->check(CLI::IsMember({"adam", "sgd"}));
  cmd_train->add_option("--width", tr_width)->check(CLI::PositiveNumber);
  cmd_train->add_option("--layers", tr_layers)->check(CLI::PositiveNumber);
  cmd_train->add_option("--heads", tr_heads)->check(CLI::PositiveNumber);
  cmd_train->add_option("--ffn", tr_ffn)->check(CLI::PositiveNumber);
  cmd_train->add_option("--max-len", tr_maxlen)->check(CLI::PositiveNumber);
  cmd_train->add_option("--split", tr_split);

  // ---- rl-finetune ----
  auto* cmd_rl = app.add_subcommand("rl-finetune", "REINFORCE fine-tuning of a trained model");
  CommonModelArgs rl;
  std::string rl_model, rl_out, rl_log, rl_split, rl_curriculum;
  std::optional<double> rl_lr, rl_momentum, rl_clip;
  std::optional<int> rl_batch;
  std::optional<uint64_t> rl_seed;
  std::optional<size_t> rl_capacity;
  bool rl_triple_reward = false;
  cmd_rl->add_option("--model", rl_model)->required();
  cmd_rl->add_option("--corpus", rl.corpus_path)->required();
  cmd_rl->add_option("--schema", rl.schema_path)->required();
  cmd_rl->add_option("--templates", rl.templates_path);
  cmd_rl->add_option("--out", rl_out)->required();
  cmd_rl->add_option("--log", rl_log);
  cmd_rl->add_option("--lr", rl_lr)->check(CLI::PositiveNumber);
  cmd_rl->add_option("--momentum", rl_momentum)->check(CLI::Range(0.0, 0.999));
  cmd_rl->add_option("--clip", rl_clip)->check(CLI::PositiveNumber);
  cmd_rl->add_option("--batch", rl_batch)->check(CLI::PositiveNumber);
  cmd_rl->add_option("--seed", rl_seed);
  cmd_rl->add_option("--replay-capacity", rl_capacity);
  cmd_rl->add_option("--curriculum", rl_curriculum);
  cmd_rl->add_option("--split", rl_split);
  cmd_rl->add_flag("--triple-reward", rl_triple_reward);

  // ---- extract ----
  auto* cmd_extract = app.add_subcommand("extract", "run the multi-turn QA pipeline");
  CommonModelArgs ex;
  std::string ex_model, ex_out, ex_mode;
  bool ex_oracle = false;
  int ex_jobs = 1;
  cmd_extract->add_option("--corpus", ex.corpus_path)->required();
  cmd_extract->add_option("--schema", ex.schema_path)->required();
  cmd_extract->add_option("--templates", ex.templates_path);
  cmd_extract->add_option("--model", ex_model);
  cmd_extract->add_flag("--oracle", ex_oracle,
                        "answer from the corpus gold annotations instead of a model");
  cmd_extract->add_option("--out", ex_out)->required();
  cmd_extract->add_option("--mode", ex_mode)->check(CLI::IsMember({"natural", "pseudo"}));
  cmd_extract->add_option("--jobs", ex_jobs)->check(CLI::PositiveNumber);

  // ---- eval ----
  auto* cmd_eval = app.add_subcommand("eval", "score predictions against gold");
  std::string ev_pred, ev_gold, ev_schema, ev_report, ev_format = "table";
  std::optional<double> ev_min_entity, ev_min_relation, ev_min_slot;
  bool ev_lenient = false, ev_span_only = false;
  cmd_eval->add_option("--pred", ev_pred)->required();
  cmd_eval->add_option("--gold", ev_gold)->required();
  cmd_eval->add_option("--schema", ev_schema)->required();
  cmd_eval->add_option("--report", ev_report);
  cmd_eval->add_option("--format", ev_format)->check(CLI::IsMember({"table", "structured"}));
  cmd_eval->add_option("--min-entity-f1", ev_min_entity)->check(CLI::Range(0.0, 100.0));
  cmd_eval->add_option("--min-relation-f1", ev_min_relation)->check(CLI::Range(0.0, 100.0));
  cmd_eval->add_option("--min-slot-f1", ev_min_slot)->check(CLI::Range(0.0, 100.0));
  cmd_eval->add_flag("--lenient-slots", ev_lenient, "span-only slot credit");
  cmd_eval->add_flag("--relation-span-only", ev_span_only,
                     "match relations without requiring entity types");

  // ---- sweep ----
  auto* cmd_sweep = app.add_subcommand("sweep", "train/evaluate across an axis of values");
  CommonModelArgs sw;
  std::string sw_axis, sw_values, sw_out, sw_config, sw_split;
  std::optional<double> sw_lambda, sw_lr;
  std::optional<int> sw_batch, sw_epochs, sw_width, sw_layers;
  std::optional<uint64_t> sw_seed;
  std::optional<std::string> sw_mode;
  cmd_sweep->add_option("--axis", sw_axis)->required()
      ->check(CLI::IsMember({"lambda", "question_mode"}));
  cmd_sweep->add_option("--values", sw_values)->required();
  cmd_sweep->add_option("--corpus", sw.corpus_path)->required();
  cmd_sweep->add_option("--schema", sw.schema_path)->required();
  cmd_sweep->add_option("--templates", sw.templates_path);
  cmd_sweep->add_option("--out", sw_out)->required();
  cmd_sweep->add_option("--config", sw_config);
  cmd_sweep->add_option("--lambda", sw_lambda)->check(CLI::Range(0.0, 1.0));
  cmd_sweep->add_option("--lr", sw_lr)->check(CLI::PositiveNumber);
  cmd_sweep->add_option("--batch", sw_batch)->check(CLI::PositiveNumber);
  cmd_sweep->add_option("--epochs", sw_epochs)->check(CLI::PositiveNumber);
  cmd_sweep->add_option("--width", sw_width)->check(CLI::PositiveNumber);
  cmd_sweep->add_option("--layers", sw_layers)->check(CLI::PositiveNumber);
  cmd_sweep->add_option("--seed", sw_seed);
  cmd_sweep->add_option("--mode", sw_mode)->check(CLI::IsMember({"natural", "pseudo"}));
  cmd_sweep->add_option("--split", sw_split);

  std::vector<const char*> argv;
  argv.push_back(kToolName);
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*cmd_init) {
      Schema schema = init_task == "resume" ? builtin_resume_schema() : builtin_flat_schema();
      TemplateSet templates = builtin_templates_for(schema);
      GrammarConfig grammar = builtin_grammar_for(schema);
      write_file(init_schema, serialize_schema(schema));
      if (!init_templates.empty()) write_file(init_templates, serialize_templates(templates));
      if (!init_grammar.empty()) write_file(init_grammar, serialize_grammar(grammar));
      return 0;
    }

    if (*cmd_synth) {
      Schema schema = load_schema_file(sy_schema);
      std::vector<std::string> inputs{sy_schema};
      GrammarConfig grammar;
      if (sy_grammar.empty()) {
        grammar = builtin_grammar_for(schema);
      } else {
        grammar = load_grammar_file(sy_grammar, schema);
        inputs.push_back(sy_grammar);
      }
      Corpus corpus = synthesize_corpus(schema, grammar, sy_n, sy_seed);
      save_corpus_file(sy_out, corpus, schema, sy_format);
      ordered_json cfg{{"n", sy_n}, {"format", sy_format},
                       {"grammar", sy_grammar.empty() ? "builtin" : sy_grammar}};
      write_manifest(manifest_path_for(sy_out),
                     make_manifest("synth", sy_seed, cfg.dump(), inputs, {sy_out}));
      return 0;
    }

    if (*cmd_stats) {
      Schema schema = load_schema_file(st_schema);
      Corpus corpus = load_corpus_file(st_corpus, schema);
      std::cout << render_stats_table(corpus_stats(corpus));
      return 0;
    }

    if (*cmd_tcheck) {
      Schema schema = load_schema_file(tc_schema);
      TemplateSet templates = load_template_file(tc_templates);
      auto diagnostics = validate_template_set(templates, schema);
      for (const auto& d : diagnostics)
        std::cout << d.code << ": " << d.message << "\n";
      if (diagnostics.empty()) std::cout << "templates ok\n";
      return diagnostics.empty() ? 0 : 1;
    }
    if (*cmd_tinit) {
      Schema schema = load_schema_file(ti_schema);
      write_file(ti_out, serialize_templates(builtin_templates_for(schema)));
      return 0;
    }

    if (*cmd_train) {
      TrainConfig config = train_config_from_file(tr_config);
      if (tr_lambda) config.lambda_weight = *tr_lambda;
      if (tr_lr) config.learning_rate = *tr_lr;
      if (tr_momentum) config.momentum = *tr_momentum;
      if (tr_clip) config.clip_norm = *tr_clip;
      if (tr_batch) config.batch_size = *tr_batch;
      if (tr_epochs) config.epochs = *tr_epochs;
      if (tr_seed) config.seed = *tr_seed;
      if (tr_mode) config.mode = parse_question_mode(*tr_mode);
      if (tr_opt) config.optimizer = *tr_opt;
      if (tr_width) config.encoder.width = *tr_width;
      if (tr_layers) config.encoder.layers = *tr_layers;
      if (tr_heads) config.encoder.heads = *tr_heads;
      if (tr_ffn) config.encoder.ffn = *tr_ffn;
      if (tr_maxlen) config.encoder.max_len = *tr_maxlen;
      if (!tr_split.empty()) config.split = parse_split(tr_split);
      config.validate();

      Schema schema = load_schema_file(tr.schema_path);
      std::vector<std::string> inputs{tr.corpus_path, tr.schema_path};
      if (!tr_config.empty()) inputs.push_back(tr_config);
      TemplateSet templates = resolve_templates(tr.templates_path, schema, inputs);
      Corpus corpus = load_corpus_file(tr.corpus_path, schema);

      TrainResult result = train_supervised(corpus, templates, schema, config);
      save_checkpoint(tr_out, result.checkpoint);
      const std::string log_path = tr_log.empty() ? tr_out + ".log.jsonl" : tr_log;
      write_file(log_path, train_log_jsonl(result.log));
      write_manifest(manifest_path_for(tr_out),
                     make_manifest("train", config.seed, train_config_json(config).dump(),
                                   inputs, {tr_out, log_path}));
      if (!result.log.empty()) {
        const auto& last = result.log.back();
        std::cout << "trained " << config.epochs << " epochs; final dev entity F1 "
                  << render_pct(last.dev_entity_f1) << ", relation F1 "
                  << render_pct(last.dev_relation_f1);
        if (schema.hierarchical())
          std::cout << ", slot F1 " << render_pct(last.dev_slot_f1);
        std::cout << "\n";
      }
      return 0;
    }

    if (*cmd_rl) {
      RlConfig config;
      if (rl_lr) config.learning_rate = *rl_lr;
      if (rl_momentum) config.momentum = *rl_momentum;
      if (rl_clip) config.clip_norm = *rl_clip;
      if (rl_batch) config.batch_size = *rl_batch;
      if (rl_seed) config.seed = *rl_seed;
      if (rl_capacity) config.replay_capacity = *rl_capacity;
      if (!rl_curriculum.empty()) config.curriculum = parse_curriculum(rl_curriculum);
      config.triple_level_reward = rl_triple_reward;
      config.validate();

      Schema schema = load_schema_file(rl.schema_path);
      std::vector<std::string> inputs{rl_model, rl.corpus_path, rl.schema_path};
      TemplateSet templates = resolve_templates(rl.templates_path, schema, inputs);
      Corpus corpus = load_corpus_file(rl.corpus_path, schema);
      Checkpoint start = load_checkpoint(rl_model, &schema);
      config.mode = parse_question_mode(start.question_mode);

      SplitRatios ratios = rl_split.empty() ? SplitRatios{} : parse_split(rl_split);
      CorpusSplit split = split_corpus(corpus, ratios, config.seed ^ 0x9e3779b97f4a7c15ull);
      RlResult result =
          rl_finetune(start, split.train, split.dev, templates, schema, config);
      if (result.warned_untrained)
        std::cerr << "warning: fine-tuning from an untrained checkpoint\n";
      save_checkpoint(rl_out, result.checkpoint);
      const std::string log_path = rl_log.empty() ? rl_out + ".log.jsonl" : rl_log;
      write_file(log_path, rl_log_jsonl(result.log, result.warned_untrained));
      ordered_json cfg{{"learning_rate", config.learning_rate},
                       {"batch_size", config.batch_size},
                       {"replay_capacity", config.replay_capacity},
                       {"triple_level_reward", config.triple_level_reward}};
      write_manifest(manifest_path_for(rl_out),
                     make_manifest("rl-finetune", config.seed, cfg.dump(), inputs,
                                   {rl_out, log_path}));
      std::cout << "fine-tuned; best dev reward " << result.log.back().dev_reward << "\n";
      return 0;
    }

    if (*cmd_extract) {
      if (ex_oracle && !ex_model.empty())
        throw ArgumentError("--model and --oracle are mutually exclusive");
      if (!ex_oracle && ex_model.empty())
        throw ArgumentError("extract needs --model or --oracle");
      Schema schema = load_schema_file(ex.schema_path);
      std::vector<std::string> inputs{ex.corpus_path, ex.schema_path};
      TemplateSet templates = resolve_templates(ex.templates_path, schema, inputs);
      Corpus corpus = load_corpus_file(ex.corpus_path, schema);

      std::vector<SentenceExtraction> extractions;
      QuestionMode mode = ex_mode.empty() ? QuestionMode::kNatural : parse_question_mode(ex_mode);
      uint64_t seed = 0;
      if (ex_oracle) {
        OracleExtractor oracle(&corpus, &schema, &templates);
        extractions = extract_corpus(oracle, templates, schema, corpus, mode, ex_jobs);
      } else {
        inputs.push_back(ex_model);
        Checkpoint ckpt = load_checkpoint(ex_model, &schema);
        if (ex_mode.empty()) mode = parse_question_mode(ckpt.question_mode);
        LearnedExtractor extractor(ckpt);
        extractions = extract_corpus(extractor, templates, schema, corpus, mode, ex_jobs);
      }
      write_file(ex_out, serialize_extractions(extractions, corpus, schema));
      ordered_json cfg{{"mode", question_mode_name(mode)},
                       {"oracle", ex_oracle},
                       {"jobs", ex_jobs}};
      write_manifest(manifest_path_for(ex_out),
                     make_manifest("extract", seed, cfg.dump(), inputs, {ex_out}));
      return 0;
    }

    if (*cmd_eval) {
      Schema schema = load_schema_file(ev_schema);
      Corpus gold = load_corpus_file(ev_gold, schema);
      auto pred = load_predictions_file(ev_pred, schema);
      EvalOptions options;
      options.dependency_aware_slots = !ev_lenient;
      options.relation_require_entity_types = !ev_span_only;
      EvalReport report = evaluate_predictions(pred, gold, schema, options);
      std::cout << emit_report(report, ev_format);
      if (!ev_report.empty()) {
        write_file(ev_report, serialize_report(report));
        ordered_json cfg{{"lenient_slots", ev_lenient}, {"relation_span_only", ev_span_only}};
        write_manifest(manifest_path_for(ev_report),
                       make_manifest("eval", 0, cfg.dump(), {ev_pred, ev_gold, ev_schema},
                                     {ev_report}));
      }
      bool ok = true;
      if (ev_min_entity && report.entity_prf.f * 100.0 < *ev_min_entity) ok = false;
      if (ev_min_relation && report.relation_prf.f * 100.0 < *ev_min_relation) ok = false;
      if (ev_min_slot && report.slot_all_prf.f * 100.0 < *ev_min_slot) ok = false;
      if (!ok) std::cerr << "metric floor not met\n";
      return ok ? 0 : 1;
    }

    if (*cmd_sweep) {
      TrainConfig config = train_config_from_file(sw_config);
      if (sw_lambda) config.lambda_weight = *sw_lambda;
      if (sw_lr) config.learning_rate = *sw_lr;
      if (sw_batch) config.batch_size = *sw_batch;
      if (sw_epochs) config.epochs = *sw_epochs;
      if (sw_width) config.encoder.width = *sw_width;
      if (sw_layers) config.encoder.layers = *sw_layers;
      if (sw_seed) config.seed = *sw_seed;
      if (sw_mode) config.mode = parse_question_mode(*sw_mode);
      if (!sw_split.empty()) config.split = parse_split(sw_split);
      config.validate();

      Schema schema = load_schema_file(sw.schema_path);
      std::vector<std::string> inputs{sw.corpus_path, sw.schema_path};
      if (!sw_config.empty()) inputs.push_back(sw_config);
      TemplateSet templates = resolve_templates(sw.templates_path, schema, inputs);
      Corpus corpus = load_corpus_file(sw.corpus_path, schema);

      auto values = parse_values(sw_values);
      auto cells = run_sweep(corpus, sw_axis, values, templates, schema, config);

      fs::create_directories(sw_out);
      std::vector<std::string> outputs;
      for (const auto& cell : cells) {
        std::string path = (fs::path(sw_out) / (sw_axis + "_" + cell.value + ".report.json"))
                               .string();
        write_file(path, serialize_report(cell.report));
        outputs.push_back(path);
      }
      std::string table = render_sweep_table(cells);
      std::string table_path = (fs::path(sw_out) / "sweep_table.txt").string();
      write_file(table_path, table);
      outputs.push_back(table_path);
      std::cout << table;
      ordered_json cfg = train_config_json(config);
      cfg["axis"] = sw_axis;
      cfg["values"] = values;
      write_manifest(manifest_path_for(table_path),
                     make_manifest("sweep", config.seed, cfg.dump(), inputs, outputs));
      return 0;
    }
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace cli
}  // namespace mtqa
