#include "fsdd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "fsdd/baselines.hpp"
#include "fsdd/checkpoint.hpp"
#include "fsdd/data.hpp"
#include "fsdd/error.hpp"
#include "fsdd/eval.hpp"
#include "fsdd/sampler.hpp"
#include "fsdd/text_format.hpp"
#include "fsdd/trainer.hpp"

namespace fsdd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in, const std::string& source) {
  ConfigFile cfg;
  cfg.source = source;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(source, line_no, "missing key before '='");
    if (value.empty()) throw ParseError(source, line_no, "missing value for '" + key + "'");
    if (cfg.values.contains(key)) {
      throw ParseError(source, line_no, "key '" + key + "' repeats line " + std::to_string(cfg.lines[key]));
    }
    cfg.values[key] = value;
    cfg.lines[key] = line_no;
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  return parse(in, path.string());
}

namespace {

// ---- option bundles ---------------------------------------------------------

struct SpecArgs {
  std::string kind = "two_point";
  int c = 0;
  int m = 0;
  double alpha = 1.0;
  double weight = 0.5;
  int classes = 2;

  void add_to(CLI::App& app) {
    app.add_option("--kind", kind, "two_point | dirichlet_multinomial | class_conditional_two_point");
    app.add_option("--C", c, "codebook size");
    app.add_option("--M", m, "tokens per set");
    app.add_option("--alpha", alpha, "Dirichlet concentration");
    app.add_option("--weight", weight, "probability of the first anchor of a pair");
    app.add_option("--classes", classes, "class count for class_conditional_two_point");
  }

  SyntheticSpec build(std::uint64_t seed) const {
    SyntheticSpec s;
    s.kind = parse_synthetic_kind(kind);
    s.codebook_size = c;
    s.target_sum = m;
    s.seed = seed;
    s.alpha = alpha;
    s.mixture_weight = weight;
    s.num_classes = classes;
    s.validate();
    return s;
  }
};

struct GenDataArgs {
  SpecArgs spec;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "counts";
};

struct TrainArgs {
  SpecArgs spec;
  std::string data;
  std::string data_format = "counts";
  std::size_t n = 4096;
  std::uint64_t seed = 0;
  TrainConfig train;
  int embed_dim = 64;
  int layers = 2;
  int heads = 4;
  double label_drop = 0.1;
  std::string method = "fsdd";
  std::string out;
  std::string log;
  std::string resume;
};

struct SampleArgs {
  std::string ckpt;
  std::size_t n = 1000;
  SampleConfig sample;
  std::string schedule = "linear";
  int class_label = -1;
  std::string method = "fsdd";
  bool ema = true;
  std::string out;
  std::string format = "counts";
  std::string meta;
};

struct EvalArgs {
  std::string samples;
  std::string spec;
  std::string against;
  std::string out;
  std::string csv;
};

struct RoundtripArgs {
  std::string in;
};

struct InspectArgs {
  std::string ckpt;
};

// ---- commands -----------------------------------------------------------------

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void write_dataset(const std::filesystem::path& path, const Dataset& d, const std::string& format) {
  if (format == "counts") {
    save_count_file(path, d.to_count_file());
  } else if (format == "tokens") {
    require(!d.labeled(), "--format tokens cannot carry class labels; use counts");
    std::vector<TokenMultiset> sets;
    sets.reserve(d.size());
    for (const auto& r : d.rows) sets.push_back(counts_to_set(r));
    save_token_file(path, d.codebook_size, d.target_sum, sets);
  } else {
    throw ValidationError("--format must be counts or tokens, got '" + format + "'");
  }
}

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  require(!a.out.empty(), "gen-data: --out is required");
  const auto spec = a.spec.build(a.seed);
  const auto data = sample_dataset(spec, a.n);
  write_dataset(a.out, data, a.format);
  out << "wrote " << data.size() << " " << to_string(spec.kind) << " rows (C=" << spec.codebook_size
      << ", M=" << spec.target_sum << ") to " << a.out << '\n';
  return kExitOk;
}

Dataset training_data(const TrainArgs& a) {
  if (!a.data.empty()) {
    if (a.data_format == "counts") return Dataset::from_count_file(load_count_file(a.data));
    if (a.data_format == "tokens") return Dataset::from_token_file(load_token_file(a.data));
    throw ValidationError("--data_format must be counts or tokens, got '" + a.data_format + "'");
  }
  return sample_dataset(a.spec.build(a.seed), a.n);
}

int cmd_train(TrainArgs a, std::ostream& out) {
  require(!a.out.empty(), "train: --out (checkpoint path) is required");
  const auto kind = parse_baseline_kind(a.method);
  const Dataset data = training_data(a);
  data.validate();
  DenoiserConfig mc = default_model_config(data);
  mc.embed_dim = a.embed_dim;
  mc.num_layers = a.layers;
  mc.num_heads = a.heads;
  mc.label_drop_prob = a.label_drop;
  mc.validate();
  a.train.seed = a.seed;
  a.train.checkpoint_path = a.out;
  a.train.log_path = a.log;
  a.train.fixed_sum = uses_fixed_sum(kind);
  a.train.validate();
  std::optional<Checkpoint> resume;
  if (!a.resume.empty()) resume = load_checkpoint(a.resume);
  double last_loss = 0.0;
  const auto ckpt = fit(data, mc, a.train, std::move(resume), [&](const StepRecord& r) { last_loss = r.loss; });
  out << "trained " << ckpt.step << " steps (" << to_string(kind) << ", " << data.size()
      << " rows); last loss " << last_loss << "; checkpoint " << a.out << '\n';
  return kExitOk;
}

int cmd_sample(SampleArgs a, std::ostream& out) {
  require(!a.ckpt.empty(), "sample: --ckpt is required");
  require(!a.out.empty(), "sample: --out is required");
  const auto kind = parse_baseline_kind(a.method);
  a.sample.schedule = parse_schedule(a.schedule);
  a.sample.fixed_sum = uses_fixed_sum(kind);
  if (a.class_label >= 0) a.sample.class_label = a.class_label;
  a.sample.validate();
  require(a.n >= 1, "sample: --n must be at least 1");
  require(a.format == "counts" || a.format == "tokens", "--format must be counts or tokens, got '" + a.format + "'");

  const auto ckpt = load_checkpoint(a.ckpt);
  const Denoiser model = a.ema ? ckpt.ema_model() : ckpt.live_model();
  const auto& mc = model.config();
  std::vector<std::optional<int>> labels(a.n);
  for (std::size_t i = 0; i < a.n; ++i) labels[i] = sample_label(model, a.sample, i);
  const auto samples = generate_batch(model, a.sample, a.n);

  if (a.format == "tokens") {
    std::vector<TokenMultiset> sets;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      require(satisfies_fixed_sum(samples[i], mc.target_sum),
              "sample " + std::to_string(i) + " breaks the fixed sum; token output needs --format counts");
      sets.push_back(counts_to_set(samples[i], mc.target_sum));
    }
    save_token_file(a.out, mc.codebook_size, mc.target_sum, sets);
  } else {
    CountFile f;
    f.codebook_size = mc.codebook_size;
    f.target_sum = mc.target_sum;
    f.rows = samples;
    const bool labeled = mc.num_classes > 0 && labels[0].has_value();
    if (labeled) {
      f.num_classes = mc.num_classes;
      for (const auto& l : labels) f.labels.push_back(*l);
    }
    save_count_file(a.out, f);
  }

  const std::string meta_path = a.meta.empty() ? a.out + ".meta.jsonl" : a.meta;
  std::ostringstream meta;
  for (std::size_t i = 0; i < a.n; ++i) {
    nlohmann::ordered_json j;
    j["index"] = i;
    j["seed"] = a.sample.seed;
    j["stream"] = i;
    j["class"] = labels[i] ? nlohmann::ordered_json(*labels[i]) : nlohmann::ordered_json(nullptr);
    j["steps"] = a.sample.num_steps;
    j["w"] = a.sample.guidance_scale;
    j["p"] = a.sample.top_p;
    j["schedule"] = to_string(a.sample.schedule);
    j["method"] = to_string(kind);
    j["ema"] = a.ema;
    j["sum"] = total(samples[i]);
    meta << j.dump() << '\n';
  }
  write_file_atomically(meta_path, meta.str());
  const auto viol = sum_violation(samples, mc.target_sum);
  out << "wrote " << a.n << " samples to " << a.out << " (metadata " << meta_path
      << "); sum violation rate " << viol.rate << '\n';
  return kExitOk;
}

// Spec keys read by `eval --spec`; other keys in the file are ignored.
SyntheticSpec spec_from_config(const ConfigFile& cfg) {
  SyntheticSpec s;
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = cfg.values.find(key);
    if (it == cfg.values.end()) return std::nullopt;
    return it->second;
  };
  auto number = [&](const std::string& key, auto& dst) {
    const auto v = get(key);
    if (!v) return;
    std::istringstream in(*v);
    in >> dst;
    if (!in || !(in >> std::ws).eof()) {
      throw ParseError(cfg.source, cfg.lines.at(key), "invalid value '" + *v + "' for '" + key + "'");
    }
  };
  if (auto k = get("kind")) s.kind = parse_synthetic_kind(*k);
  require(get("C") && get("M"), "spec '" + cfg.source + "' must set C and M");
  number("C", s.codebook_size);
  number("M", s.target_sum);
  number("seed", s.seed);
  number("alpha", s.alpha);
  number("weight", s.mixture_weight);
  number("classes", s.num_classes);
  s.validate();
  return s;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  require(!a.samples.empty(), "eval: --samples is required");
  require(a.spec.empty() != a.against.empty(), "eval: give exactly one of --spec or --against");
  const auto file = load_count_file(a.samples, SumCheck::raw);
  require(!file.rows.empty(), "eval: '" + a.samples + "' holds no samples");

  EvalReport report;
  if (!a.spec.empty()) {
    const auto spec = spec_from_config(ConfigFile::load(a.spec));
    require(spec.codebook_size == file.codebook_size && spec.target_sum == file.target_sum,
            "eval: samples have C=" + std::to_string(file.codebook_size) + " M=" +
                std::to_string(file.target_sum) + " but spec '" + a.spec + "' has C=" +
                std::to_string(spec.codebook_size) + " M=" + std::to_string(spec.target_sum));
    if (file.num_classes > 0) {
      require(spec.label_count() == file.num_classes,
              "eval: sample labels do not match the spec's class count");
      std::vector<Pmf> per_class;
      for (int k = 0; k < file.num_classes; ++k) per_class.push_back(reference_pmf(spec, k));
      // Mix the class references by the labels actually present.
      Pmf mixture;
      for (int label : file.labels) {
        for (const auto& [x, p] : per_class[static_cast<std::size_t>(label)]) {
          mixture[x] += p / static_cast<double>(file.labels.size());
        }
      }
      report = evaluate(file.rows, file.target_sum, mixture, file.labels, per_class);
    } else {
      report = evaluate(file.rows, file.target_sum, reference_pmf(spec));
    }
  } else {
    const auto other = load_count_file(a.against, SumCheck::raw);
    require(other.codebook_size == file.codebook_size && other.target_sum == file.target_sum,
            "eval: '" + a.against + "' does not share C and M with the samples");
    report = evaluate(file.rows, file.target_sum, empirical_pmf(other.rows));
  }

  const std::string text = report.to_text();
  out << text;
  if (!a.out.empty()) write_file_atomically(a.out, text);
  if (!a.csv.empty()) write_file_atomically(a.csv, EvalReport::csv_header() + "\n" + report.to_csv_row() + "\n");
  return kExitOk;
}

int cmd_roundtrip(const RoundtripArgs& a, std::ostream& out, std::ostream& err) {
  require(!a.in.empty(), "roundtrip: --in is required");
  const auto file = load_token_file(a.in);
  std::size_t failures = 0;
  for (std::size_t i = 0; i < file.sets.size(); ++i) {
    const auto back = counts_to_set(set_to_counts(file.sets[i]));
    if (!(back == file.sets[i])) {
      ++failures;
      err << a.in << ":" << file.lines[i] << ": set does not survive the count round trip\n";
    }
  }
  out << file.sets.size() << " sets, " << failures << " failures\n";
  return failures == 0 ? kExitOk : kExitValidation;
}

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  require(!a.ckpt.empty(), "inspect-checkpoint: --ckpt is required");
  const auto ckpt = load_checkpoint(a.ckpt);
  const auto& c = ckpt.config;
  out << "format_version " << kCheckpointVersion << '\n'
      << "C " << c.codebook_size << '\n'
      << "M " << c.target_sum << '\n'
      << "num_classes " << c.num_classes << '\n'
      << "embed_dim " << c.embed_dim << '\n'
      << "num_layers " << c.num_layers << '\n'
      << "num_heads " << c.num_heads << '\n'
      << "label_drop_prob " << c.label_drop_prob << '\n'
      << "step " << ckpt.step << '\n'
      << "parameters " << ckpt.params.scalar_count() << '\n';
  for (const auto& e : ckpt.params.entries()) {
    out << "  " << e.name << ' ' << e.value.rows() << 'x' << e.value.cols() << '\n';
  }
  return kExitOk;
}

// ---- config merging ---------------------------------------------------------

std::string option_key(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() ? std::string() : names.front();
}

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ValidationError("--config needs a file path");
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

// Flags generated from the config file for `command`. Plain keys come
// first and `command.key` entries after them, so scoped keys win; explicit
// flags follow both and win over either.
std::vector<std::string> config_flags(const CLI::App& app, const std::string& command, const ConfigFile& cfg) {
  const auto subs = app.get_subcommands([](const CLI::App*) { return true; });
  std::vector<std::string> plain;
  std::vector<std::string> scoped;
  for (const auto& [key, value] : cfg.values) {
    std::string scope;
    std::string name = key;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
      scope = key.substr(0, dot);
      name = key.substr(dot + 1);
    }
    bool known = false;
    bool applies = false;
    for (const auto* sub : subs) {
      if (!scope.empty() && sub->get_name() != scope) continue;
      for (const auto* opt : sub->get_options()) {
        if (name != "config" && option_key(opt) == name) {
          known = true;
          applies = applies || sub->get_name() == command;
        }
      }
    }
    if (!known) throw ParseError(cfg.source, cfg.lines.at(key), "unknown key '" + key + "'");
    if (!applies) continue;
    auto& dst = scope.empty() ? plain : scoped;
    dst.push_back("--" + name);
    dst.push_back(value);
  }
  plain.insert(plain.end(), scoped.begin(), scoped.end());
  return plain;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Fixed-sum discrete diffusion over token multisets", "fsdd");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value file; explicit flags win");
  };

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic fixed-sum dataset");
  gen.spec.add_to(*gen_cmd);
  gen_cmd->add_option("--n", gen.n, "number of rows");
  gen_cmd->add_option("--seed", gen.seed, "random seed");
  gen_cmd->add_option("--out", gen.out, "output path");
  gen_cmd->add_option("--format", gen.format, "counts | tokens");
  add_config(gen_cmd);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the denoiser");
  tr.spec.add_to(*train_cmd);
  train_cmd->add_option("--data", tr.data, "training file; when absent, data is drawn from the spec flags");
  train_cmd->add_option("--data_format", tr.data_format, "counts | tokens");
  train_cmd->add_option("--n", tr.n, "rows drawn from the spec when --data is absent");
  train_cmd->add_option("--seed", tr.seed, "random seed for data, initialization and training");
  train_cmd->add_option("--steps", tr.train.steps, "total optimizer steps");
  train_cmd->add_option("--batch", tr.train.batch_size, "batch size");
  train_cmd->add_option("--lr", tr.train.learning_rate, "learning rate");
  train_cmd->add_option("--weight_decay", tr.train.weight_decay, "decoupled weight decay");
  train_cmd->add_option("--ema_decay", tr.train.ema_decay, "EMA decay");
  train_cmd->add_option("--eval_every", tr.train.eval_every, "log interval in steps");
  train_cmd->add_option("--ckpt_every", tr.train.checkpoint_every, "checkpoint interval in steps (0: final only)");
  train_cmd->add_option("--threads", tr.train.threads, "worker threads (0: all cores)");
  train_cmd->add_option("--embed_dim", tr.embed_dim, "model width");
  train_cmd->add_option("--layers", tr.layers, "attention blocks");
  train_cmd->add_option("--heads", tr.heads, "attention heads");
  train_cmd->add_option("--label_drop", tr.label_drop, "label dropout for guidance");
  train_cmd->add_option("--method", tr.method, "fsdd | discrete_no_fixed_sum");
  train_cmd->add_option("--out", tr.out, "checkpoint path");
  train_cmd->add_option("--log", tr.log, "CSV training log");
  train_cmd->add_option("--resume", tr.resume, "checkpoint to continue from");
  add_config(train_cmd);

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "Generate count vectors from a checkpoint");
  sample_cmd->add_option("--ckpt", sa.ckpt, "checkpoint path");
  sample_cmd->add_option("--n", sa.n, "number of samples");
  sample_cmd->add_option("--steps", sa.sample.num_steps, "reverse steps");
  sample_cmd->add_option("--top_p", sa.sample.top_p, "nucleus mass for X_0 candidates");
  sample_cmd->add_option("--w", sa.sample.guidance_scale, "classifier-free guidance scale");
  sample_cmd->add_option("--schedule", sa.schedule, "linear | constant | none");
  sample_cmd->add_option("--class", sa.class_label, "class label (conditional models)");
  sample_cmd->add_option("--cycle_classes", sa.sample.cycle_classes, "label sample i with class i mod K");
  sample_cmd->add_option("--method", sa.method, "fsdd | discrete_no_fixed_sum");
  sample_cmd->add_option("--ema", sa.ema, "use EMA weights");
  sample_cmd->add_option("--seed", sa.sample.seed, "random seed");
  sample_cmd->add_option("--threads", sa.sample.threads, "worker threads (0: all cores)");
  sample_cmd->add_option("--out", sa.out, "output path");
  sample_cmd->add_option("--format", sa.format, "counts | tokens");
  sample_cmd->add_option("--meta", sa.meta, "JSON-lines metadata path (default: <out>.meta.jsonl)");
  add_config(sample_cmd);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score samples against a spec or another sample file");
  eval_cmd->add_option("--samples", ev.samples, "count-vector file");
  eval_cmd->add_option("--spec", ev.spec, "key = value file describing the ground truth");
  eval_cmd->add_option("--against", ev.against, "second count-vector file (empirical reference)");
  eval_cmd->add_option("--out", ev.out, "text report path");
  eval_cmd->add_option("--csv", ev.csv, "CSV report path");
  add_config(eval_cmd);

  RoundtripArgs rt;
  auto* rt_cmd = app.add_subcommand("roundtrip", "Check set -> counts -> set on a token file");
  rt_cmd->add_option("--in", rt.in, "token-set file");
  add_config(rt_cmd);

  InspectArgs ins;
  auto* ins_cmd = app.add_subcommand("inspect-checkpoint", "Print a checkpoint's header and tensors");
  ins_cmd->add_option("--ckpt", ins.ckpt, "checkpoint path");
  add_config(ins_cmd);

  try {
    std::vector<std::string> argv = args;
    if (argv.empty()) argv.push_back("fsdd");
    if (argv.size() >= 2) {
      if (const auto path = find_config_path(argv)) {
        const auto flags = config_flags(app, argv[1], ConfigFile::load(*path));
        argv.insert(argv.begin() + 2, flags.begin(), flags.end());
      }
    }
    std::vector<const char*> cargs;
    for (const auto& s : argv) cargs.push_back(s.c_str());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitValidation;
    }

    if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
    if (train_cmd->parsed()) return cmd_train(tr, out);
    if (sample_cmd->parsed()) return cmd_sample(sa, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (rt_cmd->parsed()) return cmd_roundtrip(rt, out, err);
    if (ins_cmd->parsed()) return cmd_inspect(ins, out);
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace fsdd
