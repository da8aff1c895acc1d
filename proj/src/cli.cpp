#include "alignve/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "alignve/checkpoint.hpp"
#include "alignve/viz.hpp"

namespace alignve {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(AttentionScale scale) {
  return scale == AttentionScale::per_head ? "per_head" : "pre_projection";
}

AttentionScale parse_attention_scale(std::string_view name) {
  if (name == "per_head") return AttentionScale::per_head;
  if (name == "pre_projection") return AttentionScale::pre_projection;
  throw ConfigError("unknown attention_scale '" + std::string(name) + "' (expected per_head or pre_projection)");
}

std::size_t threads_from_env() {
  const char* raw = std::getenv("ALIGNVE_THREADS");
  if (!raw || !*raw) return 1;
  std::size_t n = 0;
  const std::string_view s(raw);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc() || ptr != s.data() + s.size() || n == 0 || n > 1024) {
    throw ConfigError("ALIGNVE_THREADS must be an integer in [1, 1024], got '" + std::string(s) + "'");
  }
  return n;
}

namespace {

// Strict field readers for config objects.
class Fields {
 public:
  Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& [key, value] : obj_.items()) {
      bool known = false;
      for (const char* k : keys) known = known || key == k;
      if (!known) throw ConfigError("unknown key '" + key + "' in " + where_);
    }
  }

  void size(const char* key, std::size_t& dst) const {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) bad(key, "a non-negative integer");
      dst = v->get<std::size_t>();
    }
  }
  void u64(const char* key, std::uint64_t& dst) const {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) bad(key, "a non-negative integer");
      dst = v->get<std::uint64_t>();
    }
  }
  void real(const char* key, double& dst) const {
    if (const json* v = find(key)) {
      if (!v->is_number()) bad(key, "a number");
      dst = v->get<double>();
    }
  }
  void boolean(const char* key, bool& dst) const {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) bad(key, "true or false");
      dst = v->get<bool>();
    }
  }
  std::optional<std::string> text(const char* key) const {
    if (const json* v = find(key)) {
      if (!v->is_string()) bad(key, "a string");
      return v->get<std::string>();
    }
    return std::nullopt;
  }
  void path(const char* key, fs::path& dst, const fs::path& base) const {
    if (auto s = text(key)) {
      fs::path p(*s);
      dst = p.is_absolute() || base.empty() ? p : base / p;
    }
  }
  const json* find(const char* key) const {
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

 private:
  [[noreturn]] void bad(const char* key, const char* expected) const {
    throw ConfigError(where_ + "." + key + " must be " + expected);
  }

  const json& obj_;
  std::string where_;
};

void read_model(const json& j, ModelConfig& m) {
  Fields f(j, "model");
  f.allow({"d", "heads", "layers", "layer_norm_eps", "attention_scale", "premise_dim", "embed_dim", "pool",
           "max_tokens"});
  f.size("d", m.encoder.d);
  f.size("heads", m.encoder.heads);
  f.size("layers", m.encoder.layers);
  f.real("layer_norm_eps", m.encoder.eps);
  if (auto s = f.text("attention_scale")) m.encoder.scale = parse_attention_scale(*s);
  f.size("premise_dim", m.premise_dim);
  f.size("embed_dim", m.embed_dim);
  if (auto s = f.text("pool")) m.pool = parse_pool_shape(*s);
  f.size("max_tokens", m.max_tokens);
}

void read_toy(const json& j, ToyConfig& t) {
  Fields f(j, "toy");
  f.allow({"per_class", "premise_dim", "embed_dim", "noise", "concepts", "synonyms", "regions", "min_concept_rows",
           "max_concept_rows", "max_hypothesis_tokens", "roi", "seed"});
  f.size("per_class", t.per_class);
  f.size("premise_dim", t.premise_dim);
  f.size("embed_dim", t.embed_dim);
  f.real("noise", t.noise);
  f.size("concepts", t.concepts);
  f.size("synonyms", t.synonyms);
  f.size("regions", t.regions);
  f.size("min_concept_rows", t.min_concept_rows);
  f.size("max_concept_rows", t.max_concept_rows);
  f.size("max_hypothesis_tokens", t.max_hypothesis_tokens);
  f.boolean("roi", t.roi);
  f.u64("seed", t.seed);
}

json model_json(const ModelConfig& m) {
  return {{"d", m.encoder.d},
          {"heads", m.encoder.heads},
          {"layers", m.encoder.layers},
          {"layer_norm_eps", m.encoder.eps},
          {"attention_scale", std::string(to_string(m.encoder.scale))},
          {"premise_dim", m.premise_dim},
          {"embed_dim", m.embed_dim},
          {"pool", to_string(m.pool)},
          {"max_tokens", m.max_tokens}};
}

json toy_json(const ToyConfig& t) {
  return {{"per_class", t.per_class},
          {"premise_dim", t.premise_dim},
          {"embed_dim", t.embed_dim},
          {"noise", t.noise},
          {"concepts", t.concepts},
          {"synonyms", t.synonyms},
          {"regions", t.regions},
          {"min_concept_rows", t.min_concept_rows},
          {"max_concept_rows", t.max_concept_rows},
          {"max_hypothesis_tokens", t.max_hypothesis_tokens},
          {"roi", t.roi},
          {"seed", t.seed}};
}

std::string abs_path(const fs::path& p) { return p.empty() ? std::string() : fs::absolute(p).lexically_normal().string(); }

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Fields f(j, "config");
  f.allow({"embeddings", "train", "val", "test", "out", "optimizer", "lr", "momentum", "adam_beta1", "adam_beta2",
           "adam_eps", "batch_size", "max_epochs", "plateau_patience", "decay_factor", "seed", "model", "toy"});
  f.path("embeddings", cfg.embeddings, base_dir);
  f.path("train", cfg.train_manifest, base_dir);
  f.path("val", cfg.val_manifest, base_dir);
  f.path("test", cfg.test_manifest, base_dir);
  f.path("out", cfg.out_dir, base_dir);
  auto& t = cfg.train;
  if (auto s = f.text("optimizer")) t.optimizer = parse_optimizer(*s);
  f.real("lr", t.lr);
  f.real("momentum", t.momentum);
  f.real("adam_beta1", t.adam_beta1);
  f.real("adam_beta2", t.adam_beta2);
  f.real("adam_eps", t.adam_eps);
  f.size("batch_size", t.batch_size);
  f.size("max_epochs", t.max_epochs);
  f.size("plateau_patience", t.plateau_patience);
  f.real("decay_factor", t.decay_factor);
  f.u64("seed", t.seed);
  if (const json* m = f.find("model")) read_model(*m, t.model);
  if (const json* toy = f.find("toy")) read_toy(*toy, cfg.toy);
  return cfg;
}

RunConfig read_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string dump_run_config(const RunConfig& cfg) {
  const auto& t = cfg.train;
  json j = {{"embeddings", abs_path(cfg.embeddings)},
            {"train", abs_path(cfg.train_manifest)},
            {"val", abs_path(cfg.val_manifest)},
            {"test", abs_path(cfg.test_manifest)},
            {"out", abs_path(cfg.out_dir)},
            {"optimizer", std::string(to_string(t.optimizer))},
            {"lr", t.lr},
            {"momentum", t.momentum},
            {"adam_beta1", t.adam_beta1},
            {"adam_beta2", t.adam_beta2},
            {"adam_eps", t.adam_eps},
            {"batch_size", t.batch_size},
            {"max_epochs", t.max_epochs},
            {"plateau_patience", t.plateau_patience},
            {"decay_factor", t.decay_factor},
            {"seed", t.seed},
            {"model", model_json(t.model)},
            {"toy", toy_json(cfg.toy)}};
  // Empty paths are left out so the file reads back unchanged.
  for (const char* key : {"embeddings", "train", "val", "test"}) {
    if (j[key].get<std::string>().empty()) j.erase(key);
  }
  return j.dump(2) + "\n";
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

json metrics_json(const EvalMetrics& m) {
  json per_class = json::object();
  json confusion = json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    per_class[std::string(label_name(c))] = m.per_class_accuracy[c];
    confusion.push_back(m.confusion[c]);
  }
  return {{"count", m.count},
          {"accuracy", m.accuracy},
          {"mean_loss", m.mean_loss},
          {"per_class_accuracy", per_class},
          {"confusion", confusion}};
}

json history_json(const std::vector<EpochRecord>& history, std::size_t best_epoch) {
  json epochs = json::array();
  for (const auto& r : history) {
    epochs.push_back({{"epoch", r.epoch},
                      {"train_loss", r.train_loss},
                      {"val_loss", r.val_loss},
                      {"val_accuracy", r.val_accuracy},
                      {"lr", r.lr}});
  }
  return {{"best_epoch", best_epoch}, {"epochs", epochs}};
}

void require(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("config does not name ") + what);
}

EmbeddingTable load_table(const RunConfig& cfg, std::ostream& err) {
  require(cfg.embeddings, "an embeddings file");
  auto loaded = load_embeddings(cfg.embeddings);
  for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";
  if (loaded.table.dim() != cfg.train.model.embed_dim) {
    throw ConfigError("embedding file has dimension " + std::to_string(loaded.table.dim()) + " but model.embed_dim is " +
                      std::to_string(cfg.train.model.embed_dim));
  }
  return std::move(loaded.table);
}

Dataset load_split(const fs::path& manifest, const ModelConfig& m, std::ostream& err) {
  Dataset d = load_dataset(manifest, m.premise_dim, m.max_tokens);
  for (const auto& w : d.warnings) err << "warning: " << w << "\n";
  return d;
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string example_id;
  std::string optimizer;
  std::optional<double> lr;
  std::string pool_shape;
};

RunConfig resolve(const Overrides& o, bool config_required) {
  if (config_required && o.config.empty()) throw ConfigError("--config is required");
  RunConfig cfg = o.config.empty() ? RunConfig{} : read_run_config(o.config);
  if (o.seed) cfg.train.seed = *o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.optimizer.empty()) cfg.train.optimizer = parse_optimizer(o.optimizer);
  if (o.lr) cfg.train.lr = *o.lr;
  if (!o.pool_shape.empty()) cfg.train.model.pool = parse_pool_shape(o.pool_shape);
  cfg.train.threads = threads_from_env();
  cfg.train.validate();
  return cfg;
}

int cmd_train(const Overrides& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve(o, true);
  require(cfg.train_manifest, "a training manifest");
  require(cfg.val_manifest, "a validation manifest");
  const EmbeddingTable table = load_table(cfg, err);
  const ModelConfig& m = cfg.train.model;
  const Dataset train_set = load_split(cfg.train_manifest, m, err);
  const Dataset val_set = load_split(cfg.val_manifest, m, err);

  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir / "checkpoints");
  write_text(dir / "config.json", dump_run_config(cfg));

  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_acc = -1.0;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r, const Checkpoint& ckpt) {
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03zu.avck", r.epoch);
    save_checkpoint(dir / "checkpoints" / name, ckpt, m);
    history.push_back(r);
    if (r.val_accuracy > best_acc) {
      best_acc = r.val_accuracy;
      best_epoch = r.epoch;
    }
    write_text(dir / "history.json", history_json(history, best_epoch).dump(2) + "\n");
    out << "epoch " << r.epoch << "  train_loss " << r.train_loss << "  val_loss " << r.val_loss << "  val_acc "
        << r.val_accuracy << "  lr " << r.lr << "\n";
  };
  const TrainResult result = train(cfg.train, train_set, val_set, table, hooks);
  save_checkpoint(dir / "best.avck", result.best, m);
  save_checkpoint(dir / "last.avck", result.last, m);
  write_text(dir / "history.json", history_json(result.history, result.best_epoch).dump(2) + "\n");
  out << "best epoch " << result.best_epoch << " (val_acc " << result.history[result.best_epoch - 1].val_accuracy
      << "), checkpoints in " << dir.string() << "\n";

  if (!cfg.test_manifest.empty()) {
    const Dataset test_set = load_split(cfg.test_manifest, m, err);
    if (!test_set.empty()) {
      const EvalMetrics metrics = evaluate(result.best.params, test_set, table, m, cfg.train.threads);
      write_text(dir / "test_metrics.json", metrics_json(metrics).dump(2) + "\n");
      out << "test accuracy " << metrics.accuracy << " on " << metrics.count << " examples\n";
    }
  }
  return 0;
}

int cmd_eval(const Overrides& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve(o, true);
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const fs::path manifest = cfg.test_manifest.empty() ? cfg.val_manifest : cfg.test_manifest;
  require(manifest, "a test or validation manifest");
  const ModelConfig& m = cfg.train.model;
  const Checkpoint ckpt = load_checkpoint(o.checkpoint, m);
  const EmbeddingTable table = load_table(cfg, err);
  const Dataset data = load_split(manifest, m, err);
  const EvalMetrics metrics = evaluate(ckpt.params, data, table, m, cfg.train.threads);
  out << metrics_json(metrics).dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(const Overrides& o, std::ostream& out, std::ostream&) {
  RunConfig cfg;
  if (o.config.empty()) {
    // Small enough to finish in well under a second.
    auto& m = cfg.train.model;
    m.encoder.d = 8;
    m.encoder.heads = 2;
    m.encoder.layers = 1;
    m.premise_dim = 12;
    m.embed_dim = 8;
    if (o.seed) cfg.train.seed = *o.seed;
    if (!o.pool_shape.empty()) m.pool = parse_pool_shape(o.pool_shape);
  } else {
    cfg = resolve(o, true);
  }
  constexpr std::size_t kTokens = 5;
  constexpr double kTolerance = 1e-4;
  const GradCheckReport r = model_gradient_check(cfg.train.model, kTokens, cfg.train.seed);
  out << std::setprecision(6) << "checked " << r.entries_checked << " parameters\n"
      << "max relative error " << r.max_relative_error << " at " << r.worst_parameter << "[" << r.worst_index
      << "] (analytic " << r.analytic << ", numeric " << r.numeric << ")\n";
  if (r.max_relative_error < kTolerance) {
    out << "gradient check passed\n";
    return 0;
  }
  out << "gradient check FAILED (tolerance " << kTolerance << ")\n";
  return 3;
}

int cmd_gen_toy(const Overrides& o, std::ostream& out, std::ostream&) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : read_run_config(o.config);
  if (o.seed) cfg.toy.seed = *o.seed;
  const fs::path dir = o.out.empty() ? fs::path("toy") : fs::path(o.out);
  const ToyDatasetFiles files = generate_toy_dataset(cfg.toy, dir);

  // A ready-to-train config next to the data, sized for the toy dimensions.
  RunConfig run;
  run.toy = cfg.toy;
  run.embeddings = files.embeddings;
  run.train_manifest = files.train;
  run.val_manifest = files.val;
  run.test_manifest = files.test;
  run.out_dir = dir / "run";
  run.train.lr = 1e-3;
  run.train.max_epochs = 50;
  auto& m = run.train.model;
  m.encoder.d = 16;
  m.encoder.heads = 2;
  m.encoder.layers = 1;
  m.premise_dim = cfg.toy.premise_dim;
  m.embed_dim = cfg.toy.embed_dim;
  write_text(dir / "config.json", dump_run_config(run));
  out << "wrote " << cfg.toy.per_class * kNumClasses << " examples to " << dir.string() << " (config "
      << (dir / "config.json").string() << ")\n";
  return 0;
}

int cmd_visualize(const Overrides& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve(o, true);
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (o.example_id.empty()) throw ConfigError("--example-id is required");
  const ModelConfig& m = cfg.train.model;
  const Checkpoint ckpt = load_checkpoint(o.checkpoint, m);
  const EmbeddingTable table = load_table(cfg, err);

  std::optional<ManifestEntry> entry;
  for (const fs::path* manifest : {&cfg.test_manifest, &cfg.val_manifest, &cfg.train_manifest}) {
    if (manifest->empty() || entry) continue;
    for (auto& e : read_manifest(*manifest).entries) {
      if (e.id == o.example_id) entry = std::move(e);
    }
  }
  if (!entry) throw DataError("example '" + o.example_id + "' not found in any manifest");

  const fs::path dir = o.out.empty() ? cfg.out_dir / "heatmaps" : fs::path(o.out);
  const HeatmapOutput result = render_heatmaps(read_feature_file(entry->feature_file), entry->id, entry->hypothesis,
                                               table, ckpt.params, m, dir);
  for (const auto& w : result.warnings) err << "warning: " << w << "\n";
  const auto& p = result.prediction.probabilities;
  out << entry->id << ": predicted " << label_name(result.prediction.label()) << " (entailment " << p[0]
      << ", neutral " << p[1] << ", contradiction " << p[2] << "), label " << label_name(entry->label) << "\n";
  for (const auto& img : result.images) out << img.string() << "\n";
  out << result.csv.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visual entailment by premise/hypothesis alignment", "alignve"};
  app.require_subcommand(1);
  Overrides o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--optimizer", o.optimizer, "sgd or adam");
    sub->add_option("--lr", o.lr, "initial learning rate");
    sub->add_option("--pool-shape", o.pool_shape, "adaptive pooling shape HxW");
  };
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoints");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test manifest");
  auto* grad_cmd = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");
  auto* toy_cmd = app.add_subcommand("gen-toy", "write a synthetic toy dataset");
  auto* viz_cmd = app.add_subcommand("visualize", "export per-token alignment heatmaps");
  for (auto* sub : {train_cmd, eval_cmd, grad_cmd, toy_cmd, viz_cmd}) add_common(sub);
  for (auto* sub : {eval_cmd, viz_cmd}) sub->add_option("--checkpoint", o.checkpoint, "checkpoint file");
  viz_cmd->add_option("--example-id", o.example_id, "manifest id of the example to render");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (argc > 1) err << "error: " << e.what() << "\n";
    err << app.help();
    return 1;
  }

  try {
    if (*train_cmd) return cmd_train(o, out, err);
    if (*eval_cmd) return cmd_eval(o, out, err);
    if (*grad_cmd) return cmd_gradcheck(o, out, err);
    if (*toy_cmd) return cmd_gen_toy(o, out, err);
    if (*viz_cmd) return cmd_visualize(o, out, err);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace alignve
