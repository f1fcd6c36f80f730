// Command-line front end: training, scoring, selection, cost estimates, theory and attribution studies.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cld/attribution.hpp"
#include "cld/costmodel.hpp"
#include "cld/losslog.hpp"
#include "cld/scoring.hpp"
#include "cld/selection.hpp"
#include "cld/theory.hpp"
#include "cld/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace cld;

namespace {

std::uint64_t default_seed() {
  const char* env = std::getenv("CLD_SEED");
  if (!env || !*env) return 0;
  const auto v = csv::parse_int(env);
  if (!v || *v < 0) throw Error(ErrorKind::InvalidArgument, std::string("CLD_SEED must be a non-negative integer, got '") + env + "'");
  return static_cast<std::uint64_t>(*v);
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void emit(const std::string& format, const json& j, const std::string& table) {
  if (format == "json") std::cout << j.dump(2) << "\n";
  else std::cout << table;
}

struct Common {
  std::string format = "table";
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed = true) {
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"table", "json", "csv"}));
  cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  if (with_seed) cmd->add_option("--seed", c.seed, "Seed (default: $CLD_SEED or 0)");
}

// "stride=2", "prefix=16", "indices=0,2,4"
SubsamplePlan parse_subsample(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "subsample must look like stride=N, prefix=N or indices=a,b,...");
  const auto kind = text.substr(0, eq), value = text.substr(eq + 1);
  if (kind == "indices") {
    std::vector<std::int64_t> idx;
    for (auto f : csv::split(value)) {
      const auto v = csv::parse_int(f);
      if (!v) throw Error(ErrorKind::InvalidArgument, "bad checkpoint index '" + std::string(f) + "'");
      idx.push_back(*v);
    }
    return SubsamplePlan::explicit_indices(std::move(idx));
  }
  const auto n = csv::parse_int(value);
  if (!n || *n < 1) throw Error(ErrorKind::InvalidArgument, "subsample count must be a positive integer");
  if (kind == "stride") return SubsamplePlan::stride(static_cast<std::size_t>(*n));
  if (kind == "prefix") return SubsamplePlan::prefix(static_cast<std::size_t>(*n));
  throw Error(ErrorKind::InvalidArgument, "unknown subsample kind '" + kind + "'");
}

// "0=3,1=2"
Quotas parse_per_class(const std::string& text) {
  Quotas q;
  for (auto item : csv::split(text)) {
    const auto eq = item.find('=');
    const auto c = eq == std::string_view::npos ? std::nullopt : csv::parse_int(item.substr(0, eq));
    const auto k = eq == std::string_view::npos ? std::nullopt : csv::parse_int(item.substr(eq + 1));
    if (!c || !k || *k < 0) throw Error(ErrorKind::InvalidArgument, "per-class quota '" + std::string(item) + "' must be class=count");
    if (*k > 0) q[static_cast<int>(*c)] = static_cast<std::size_t>(*k);
  }
  return q;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  for (auto f : csv::split(text)) {
    const auto v = csv::parse_int(f);
    if (!v || *v < 0) throw Error(ErrorKind::InvalidArgument, "bad count '" + std::string(f) + "'");
    out.push_back(static_cast<std::size_t>(*v));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SynthOptions {
  SyntheticSpec spec;
  TrainConfig train;
  std::string config_file;

  void bind(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON file with dataset/training fields (flags override)");
    cmd->add_option("--classes", spec.num_classes);
    cmd->add_option("--dim", spec.input_dim);
    cmd->add_option("--n-train", spec.n_train);
    cmd->add_option("--n-validation", spec.n_validation);
    cmd->add_option("--n-query", spec.n_query);
    cmd->add_option("--n-reference", spec.n_reference);
    cmd->add_option("--label-noise", spec.label_noise_fraction);
    cmd->add_option("--mean-scale", spec.mean_scale);
    cmd->add_option("--noise-scale", spec.noise_scale);
    cmd->add_option("--epochs", train.epochs);
    cmd->add_option("--learning-rate", train.learning_rate);
    cmd->add_option("--batch-size", train.batch_size, "0 = full batch");
    cmd->add_option("--init-scale", train.init_scale, "0 = zero init");
  }

  // Config-file values apply only where the flag was not given.
  void apply_config(CLI::App* cmd) {
    if (config_file.empty()) return;
    json j;
    try {
      j = json::parse(csv::read_text(config_file));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::MalformedRow, config_file + ": " + e.what());
    }
    auto take = [&](const char* key, const char* flag, auto& field) {
      if (j.contains(key) && cmd->count(flag) == 0) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    take("num_classes", "--classes", spec.num_classes);
    take("input_dim", "--dim", spec.input_dim);
    take("n_train", "--n-train", spec.n_train);
    take("n_validation", "--n-validation", spec.n_validation);
    take("n_query", "--n-query", spec.n_query);
    take("n_reference", "--n-reference", spec.n_reference);
    take("label_noise_fraction", "--label-noise", spec.label_noise_fraction);
    take("mean_scale", "--mean-scale", spec.mean_scale);
    take("noise_scale", "--noise-scale", spec.noise_scale);
    take("epochs", "--epochs", train.epochs);
    take("learning_rate", "--learning-rate", train.learning_rate);
    take("batch_size", "--batch-size", train.batch_size);
    take("init_scale", "--init-scale", train.init_scale);
  }
};

int cmd_train_synth(CLI::App* cmd, SynthOptions& o, const Common& c, const std::string& out_dir, bool snapshots) {
  o.apply_config(cmd);
  o.spec.seed = c.seed;
  o.train.seed = c.seed;
  o.train.record_parameter_snapshots = snapshots;
  // both are checked before anything touches the output directory
  o.spec.validate();
  o.train.validate();

  const auto data = generate_dataset(o.spec);
  const auto run = train_and_log(data, o.train);
  LossLogBundle b;
  b.manifest.dataset_name = "synthetic-gaussian-mixture";
  b.manifest.num_classes = o.spec.num_classes;
  b.manifest.seed = c.seed;
  b.train = run.train_log;
  b.validation = run.validation_log;
  write_losslog(out_dir, b);

  if (snapshots) {
    std::string text = "checkpoint";
    for (std::size_t j = 0; j < run.final_params.size(); ++j) text += ",p" + std::to_string(j);
    text += '\n';
    for (std::size_t t = 0; t < run.snapshots.size(); ++t) {
      text += std::to_string(t);
      for (double v : run.snapshots[t]) text += ',' + format_real(v);
      text += '\n';
    }
    csv::write_text(fs::path(out_dir) / "snapshots.csv", text);
  }

  const auto ref = evaluate(run.final_params, data.reference);
  json j;
  j["out"] = out_dir;
  j["train_samples"] = data.train.size();
  j["validation_samples"] = data.validation.size();
  j["epochs"] = o.train.epochs;
  j["final_train_loss"] = run.epoch_mean_loss.back();
  j["reference_accuracy"] = ref.accuracy;
  j["snapshots"] = snapshots;
  std::ostringstream t;
  t << "wrote " << out_dir << " (" << data.train.size() << " train, " << data.validation.size()
    << " validation, " << o.train.epochs << " epochs)\n"
    << "final train loss " << fixed(run.epoch_mean_loss.back(), 6) << ", reference accuracy " << fixed(ref.accuracy, 4) << "\n";
  emit(c.format, j, t.str());
  return 0;
}

ScoreTable score_bundle(const LossLogBundle& b, ScoreMode mode, const std::string& subsample) {
  if (subsample.empty()) return score_losslogs(b.train, b.validation, mode);
  const auto plan = parse_subsample(subsample);
  return score_losslogs(subsample_checkpoints(b.train, plan), subsample_checkpoints(b.validation, plan), mode);
}

int cmd_score(const Common& c, const std::string& losslog, const std::string& mode_name, const std::string& subsample,
              const std::string& out) {
  const auto b = load_losslog(losslog);
  const auto mode = mode_name == "global" ? ScoreMode::global : ScoreMode::per_class;
  const auto table = score_bundle(b, mode, subsample);
  if (!out.empty()) write_score_table(out, table);

  std::size_t degenerate = 0;
  double lo = 1.0, hi = -1.0;
  for (const auto& r : table.rows) {
    degenerate += r.degenerate;
    lo = std::min(lo, r.score);
    hi = std::max(hi, r.score);
  }
  json j;
  j["samples"] = table.size();
  j["degenerate"] = degenerate;
  j["min_score"] = table.size() ? lo : 0.0;
  j["max_score"] = table.size() ? hi : 0.0;
  j["mode"] = mode_name;
  if (!subsample.empty()) j["subsample"] = subsample;
  if (!out.empty()) j["out"] = out;
  if (out.empty() && c.format != "json") {
    std::cout << score_table_to_csv(table);
    return 0;
  }
  std::ostringstream t;
  t << table.size() << " scores (" << degenerate << " degenerate), range [" << fixed(lo, 4) << ", " << fixed(hi, 4) << "]";
  if (!out.empty()) t << " -> " << out;
  t << "\n";
  emit(c.format, j, t.str());
  return 0;
}

int cmd_select(const Common& c, const std::string& scores_path, std::optional<double> fraction, std::optional<std::size_t> k,
               const std::string& per_class, const std::string& method, std::size_t bins, double prune, const std::string& out) {
  const auto table = read_score_table(scores_path);
  const int given = fraction.has_value() + k.has_value() + !per_class.empty();
  if (given != 1) throw Error(ErrorKind::InvalidArgument, "give exactly one of --fraction, --k, --per-class");
  Budget budget = fraction ? Budget::fraction(*fraction) : k ? Budget::total(*k) : Budget::per_class(parse_per_class(per_class));

  Coreset coreset;
  if (method == "ccs") {
    if (!per_class.empty()) throw Error(ErrorKind::InvalidArgument, "--method ccs takes --fraction or --k");
    coreset = ccs_stratified(table, total(budget.resolve(class_sizes(table))), bins, prune, c.seed);
  } else {
    const auto quotas = budget.resolve(class_sizes(table));
    if (method == "topk") coreset = select_topk(table, quotas);
    else if (method == "bottomk") coreset = select_bottomk(table, quotas);
    else coreset = select_random(table, quotas, c.seed);
  }
  if (!out.empty()) write_coreset(out, coreset, table);

  json j;
  j["method"] = method;
  j["provenance"] = to_string(coreset.provenance);
  j["size"] = coreset.size();
  json counts = json::object();
  for (const auto& [cls, n] : coreset.per_class) counts[std::to_string(cls)] = n;
  j["per_class"] = counts;
  if (coreset.seed) j["seed"] = *coreset.seed;
  if (!out.empty()) j["out"] = out;
  std::ostringstream t;
  t << method << ": " << coreset.size() << " samples";
  for (const auto& [cls, n] : coreset.per_class) t << "  c" << cls << "=" << n;
  if (!out.empty()) t << " -> " << out;
  t << "\n";
  if (out.empty() && c.format == "csv") {
    std::cout << "sample_id\n";
    for (auto id : coreset.sample_ids) std::cout << id << "\n";
    return 0;
  }
  emit(c.format, j, t.str());
  return 0;
}

int cmd_subsample(const Common& c, const std::string& losslog, const std::string& plan_text, const std::string& out_dir) {
  auto b = load_losslog(losslog);
  const auto plan = parse_subsample(plan_text);
  b.train = subsample_checkpoints(b.train, plan);
  b.validation = subsample_checkpoints(b.validation, plan);
  write_losslog(out_dir, b);
  json j;
  j["out"] = out_dir;
  j["grid"] = b.train.grid.indices;
  emit(c.format, j, "wrote " + out_dir + " with grid " + to_string(b.train.grid) + "\n");
  return 0;
}

int cmd_cost(const Common& c, const std::string& method_name, const std::string& preset, const std::vector<std::string>& overrides,
             const std::string& unit) {
  if (preset != "imagenet1k-10pct") throw Error(ErrorKind::InvalidArgument, "unknown preset '" + preset + "'");
  auto params = imagenet_scenario();
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto v = eq == std::string::npos ? std::nullopt : csv::parse_real(o.substr(eq + 1));
    if (!v || !std::isfinite(*v)) throw Error(ErrorKind::InvalidArgument, "--param expects name=value, got '" + o + "'");
    params.set(o.substr(0, eq), *v);
  }
  const double divisor = unit == "flops" ? 1.0 : unit == "1e18" ? 1e18 : 1e15;

  std::vector<Method> methods;
  if (method_name == "all") methods.assign(all_methods.begin(), all_methods.end());
  else if (const auto m = parse_method(method_name)) methods.push_back(*m);
  else throw Error(ErrorKind::InvalidArgument, "unknown method '" + method_name + "'");

  json arr = json::array();
  std::ostringstream t, csvout;
  csvout << "method,total,selection,storage_bytes\n";
  for (auto m : methods) {
    const auto r = cost_report(m, params);
    json j;
    j["method"] = to_string(m);
    j["unit_divisor"] = divisor;
    json terms = json::array();
    for (const auto& term : r.terms) {
      json tj;
      tj["label"] = term.label;
      tj["formula"] = term.formula;
      tj["flops"] = term.flops;
      tj["value"] = term.flops / divisor;
      tj["stage"] = term.selection ? "selection" : "coreset_training";
      tj["asymptotic_only"] = term.asymptotic;
      terms.push_back(tj);
    }
    j["terms"] = terms;
    j["total_flops"] = r.total_flops;
    j["total"] = r.total_flops / divisor;
    j["selection"] = r.selection_flops / divisor;
    json storage = json::array();
    for (const auto& s : r.storage) storage.push_back({{"label", s.label}, {"formula", s.formula}, {"bytes", s.bytes}, {"gb", s.bytes / 1e9}});
    j["storage"] = storage;
    j["notes"] = r.notes;
    arr.push_back(j);

    t << to_string(m) << "\n";
    for (const auto& term : r.terms) {
      t << "  " << term.label << " [" << term.formula << "]: " << (term.asymptotic ? "(not counted)" : fixed(term.flops / divisor)) << "\n";
    }
    t << "  total: " << fixed(r.total_flops / divisor) << "  (selection " << fixed(r.selection_flops / divisor) << ")\n";
    for (const auto& s : r.storage) t << "  storage " << s.label << ": " << s.bytes << " B = " << fixed(s.bytes / 1e9) << " GB\n";
    for (const auto& n : r.notes) t << "  note: " << n << "\n";
    csvout << to_string(m) << ',' << format_real(r.total_flops / divisor) << ',' << format_real(r.selection_flops / divisor) << ','
           << (r.storage.empty() ? 0 : r.storage.front().bytes) << "\n";
  }
  if (c.format == "csv") std::cout << csvout.str();
  else emit(c.format, methods.size() == 1 ? arr[0] : arr, t.str());
  return 0;
}

json alignment_json(const TheoryOutcome& o) {
  json cps = json::array();
  for (const auto& cp : o.alignment.checkpoints) {
    cps.push_back({{"checkpoint", cp.checkpoint}, {"flagged", cp.flagged}, {"kappa", cp.kappa}, {"E", cp.subset_error},
                   {"delta", cp.delta}, {"rhs", cp.gap_rhs}, {"holds", cp.gap_holds}});
  }
  return cps;
}

int cmd_theory_check(const Common& c, double fraction, const std::string& coreset_kind, int epochs) {
  SyntheticSpec spec;
  spec.seed = c.seed;
  const auto data = generate_dataset(spec);
  TrainConfig cfg;
  cfg.seed = c.seed;
  const auto run = train_and_log(data, cfg);
  const auto scores = score_losslogs(run.train_log, run.validation_log);
  const auto quotas = Budget::fraction(fraction).resolve(class_sizes(scores));
  const auto coreset = coreset_kind == "bottom" ? select_bottomk(scores, quotas)
                       : coreset_kind == "random" ? select_random(scores, quotas, c.seed)
                                                  : select_topk(scores, quotas);
  TheoryConfig tc;
  tc.epochs = epochs;
  const auto o = run_theory(data, coreset.sample_ids, tc);
  const auto& b = o.bound;

  auto verdict = [](bool ok) { return ok ? "PASS" : "FAIL"; };
  json j;
  j["seed"] = c.seed;
  j["coreset"] = coreset_kind;
  j["coreset_size"] = coreset.size();
  j["smoothness"] = b.smoothness;
  j["learning_rate"] = b.learning_rate;
  j["step_size_ok"] = b.step_size_ok;
  j["gradient_bound"] = o.alignment.gradient_bound;
  j["kappa_max"] = o.alignment.kappa_max;
  j["delta_max"] = o.alignment.delta_max;
  j["subset_gradient"] = {{"pass", o.alignment.gap_holds}, {"violations", o.alignment.violations}};
  j["descent"] = {{"pass", b.descent_holds}, {"violations", b.descent_violations}};
  j["bound"] = {{"pass", b.bound_holds}, {"value", b.bound}, {"measured", b.min_grad_norm_sq}, {"slack", b.slack},
                {"optimization_term", b.optimization_term}, {"noise_term", b.noise_term}, {"alignment_term", b.alignment_term}};
  j["checkpoints"] = alignment_json(o);
  j["pass"] = o.all_pass();

  std::ostringstream t;
  t << "coreset " << coreset_kind << " (" << coreset.size() << "), L=" << fixed(b.smoothness, 4) << " eta=" << fixed(b.learning_rate, 4)
    << " B=" << fixed(o.alignment.gradient_bound, 4) << " kappa=" << fixed(o.alignment.kappa_max, 4) << " delta="
    << fixed(o.alignment.delta_max, 4) << "\n";
  t << "check                          result\n";
  t << "subset-gradient approximation  " << verdict(o.alignment.gap_holds) << "\n";
  t << "per-step descent               " << verdict(b.descent_holds) << "\n";
  t << "convergence bound              " << verdict(b.bound_holds) << "  (bound " << fixed(b.bound, 4) << ", measured "
    << fixed(b.min_grad_norm_sq, 6) << ")\n";
  emit(c.format, j, t.str());
  return o.all_pass() ? 0 : 1;
}

int cmd_lds(const Common& c, std::size_t subsets, double alpha, std::size_t retrains, const std::string& out) {
  SyntheticSpec spec;
  spec.seed = c.seed;
  const auto data = generate_dataset(spec);
  auto cfg = attribution_train_config();
  cfg.seed = c.seed;
  const auto infl = cld_influence(data, cfg);
  SubsetPlan plan;
  plan.num_subsets = subsets;
  plan.alpha = alpha;
  plan.base_seed = c.seed;
  plan.retrain_seeds.clear();
  for (std::size_t r = 0; r < retrains; ++r) plan.retrain_seeds.push_back(derive_seed(c.seed, 500 + r));
  const auto r = lds_evaluate(data, infl, plan, cfg, c.threads);

  std::string text = "query_id,lds\n";
  json per = json::array();
  for (std::size_t q = 0; q < r.per_query.size(); ++q) {
    text += std::to_string(data.query.ids[q]) + ',' + (r.per_query[q] ? format_real(*r.per_query[q]) : std::string("undefined")) + '\n';
    if (r.per_query[q]) per.push_back(*r.per_query[q]);
    else per.push_back(nullptr);
  }
  if (!out.empty()) csv::write_text(out, text);
  json j;
  j["subsets"] = subsets;
  j["alpha"] = alpha;
  j["retrain_seeds"] = retrains;
  j["mean_lds"] = r.mean;
  j["defined_queries"] = r.defined;
  j["queries"] = r.per_query.size();
  j["per_query"] = per;
  if (c.format == "csv") {
    std::cout << text;
    return 0;
  }
  std::ostringstream t;
  t << "mean LDS " << fixed(r.mean, 4) << " over " << r.defined << "/" << r.per_query.size() << " queries";
  if (!out.empty()) t << " -> " << out;
  t << "\n";
  emit(c.format, j, t.str());
  return 0;
}

int cmd_brittleness(const Common& c, const std::string& ks_text, std::size_t num_seeds, const std::string& out) {
  SyntheticSpec spec;
  spec.seed = c.seed;
  const auto data = generate_dataset(spec);
  auto cfg = attribution_train_config();
  cfg.seed = c.seed;
  const auto infl = cld_influence(data, cfg);
  const auto ks = parse_sizes(ks_text);
  std::vector<std::uint64_t> seeds;
  for (std::size_t s = 0; s < num_seeds; ++s) seeds.push_back(derive_seed(c.seed, 900 + s));
  const std::vector<RemovalPolicy> policies = {RemovalPolicy::cld_topk, RemovalPolicy::random};
  const auto r = brittleness(data, infl, ks, policies, cfg, seeds, c.threads);

  std::string text = "policy,k,flip_fraction\n";
  json rows = json::array();
  for (const auto& row : r.rows) {
    text += std::string(to_string(row.policy)) + ',' + std::to_string(row.k) + ',' + format_real(row.flip_fraction) + '\n';
    rows.push_back({{"policy", to_string(row.policy)}, {"k", row.k}, {"flip_fraction", row.flip_fraction}, {"per_seed", row.per_seed}});
  }
  if (!out.empty()) csv::write_text(out, text);
  if (c.format == "csv") {
    std::cout << text;
    return 0;
  }
  std::ostringstream t;
  t << "policy     k      flips\n";
  for (const auto& row : r.rows) {
    char line[96];
    std::snprintf(line, sizeof line, "%-10s %-6zu %.4f\n", std::string(to_string(row.policy)).c_str(), row.k, row.flip_fraction);
    t << line;
  }
  emit(c.format, json{{"seeds", num_seeds}, {"rows", rows}}, t.str());
  return 0;
}

int cmd_score_mae(const Common& c, const std::string& a, const std::string& b) {
  const double mae = score_mae(read_score_table(a), read_score_table(b));
  emit(c.format, json{{"a", a}, {"b", b}, {"mae", mae}}, format_real(mae) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CLD coreset toolkit"};
  app.require_subcommand(1);
  Common common;
  try {
    common.seed = default_seed();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  auto* train = app.add_subcommand("train-synth", "Train on a synthetic mixture and write a loss-log directory");
  SynthOptions synth;
  std::string train_out;
  bool snapshots = false;
  add_common(train, common);
  synth.bind(train);
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_flag("--snapshots", snapshots, "Also write snapshots.csv with flattened parameters per checkpoint");

  auto* score = app.add_subcommand("score", "Compute CLD scores from a loss-log directory");
  std::string score_in, score_mode = "per-class", score_sub, score_out;
  add_common(score, common, false);
  score->add_option("--losslog", score_in, "Loss-log directory or manifest.json")->required();
  score->add_option("--mode", score_mode)->check(CLI::IsMember({"per-class", "global"}));
  score->add_option("--subsample", score_sub, "stride=N, prefix=N or indices=a,b,...");
  score->add_option("--out", score_out, "Score CSV path");

  auto* select = app.add_subcommand("select", "Select a coreset from a score table");
  std::string sel_scores, sel_per_class, sel_method = "topk", sel_out;
  std::optional<double> sel_fraction;
  std::optional<std::size_t> sel_k;
  std::size_t sel_bins = 50;
  double sel_prune = 0.1;
  add_common(select, common);
  select->add_option("--scores", sel_scores)->required();
  select->add_option("--fraction", sel_fraction);
  select->add_option("--k", sel_k);
  select->add_option("--per-class", sel_per_class, "class=count,...");
  select->add_option("--method", sel_method)->check(CLI::IsMember({"topk", "bottomk", "random", "ccs"}));
  select->add_option("--bins", sel_bins);
  select->add_option("--prune", sel_prune);
  select->add_option("--out", sel_out, "Coreset CSV path (sidecar written to <out>.json)");

  auto* sub = app.add_subcommand("subsample", "Keep a subset of checkpoints of a loss-log directory");
  std::string sub_in, sub_plan, sub_out;
  add_common(sub, common, false);
  sub->add_option("--losslog", sub_in)->required();
  sub->add_option("--plan", sub_plan, "stride=N, prefix=N or indices=a,b,...")->required();
  sub->add_option("--out", sub_out)->required();

  auto* cost = app.add_subcommand("cost", "Compute and storage estimates for selection pipelines");
  std::string cost_method = "CLD", cost_preset = "imagenet1k-10pct", cost_unit = "1e15";
  std::vector<std::string> cost_params;
  add_common(cost, common, false);
  cost->add_option("--method", cost_method, "Method name or 'all'");
  cost->add_option("--preset", cost_preset);
  cost->add_option("--param", cost_params, "name=value override")->take_all()->allow_extra_args(false);
  cost->add_option("--unit", cost_unit)->check(CLI::IsMember({"flops", "1e15", "1e18"}));

  auto* theory = app.add_subcommand("theory-check", "Check the convergence inequalities on a synthetic run");
  double th_fraction = 0.1;
  std::string th_coreset = "top";
  int th_epochs = 30;
  add_common(theory, common);
  theory->add_option("--fraction", th_fraction);
  theory->add_option("--coreset", th_coreset)->check(CLI::IsMember({"top", "bottom", "random"}));
  theory->add_option("--epochs", th_epochs);

  auto* lds = app.add_subcommand("lds", "Linear datamodeling score of CLD_infl");
  std::size_t lds_subsets = 20, lds_retrains = 3;
  double lds_alpha = 0.5;
  std::string lds_out;
  add_common(lds, common);
  lds->add_option("--subsets", lds_subsets);
  lds->add_option("--alpha", lds_alpha);
  lds->add_option("--retrain-seeds", lds_retrains);
  lds->add_option("--out", lds_out, "Per-query CSV");

  auto* brit = app.add_subcommand("brittleness", "Prediction flips after removing top-CLD_infl or random samples");
  std::string brit_ks = "0,200", brit_out;
  std::size_t brit_seeds = 5;
  add_common(brit, common);
  brit->add_option("--k", brit_ks, "Comma-separated removal counts");
  brit->add_option("--seeds", brit_seeds);
  brit->add_option("--out", brit_out, "CSV report");

  auto* mae = app.add_subcommand("score-mae", "Mean absolute difference between two score tables");
  std::string mae_a, mae_b;
  add_common(mae, common, false);
  mae->add_option("a", mae_a)->required();
  mae->add_option("b", mae_b)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train_synth(train, synth, common, train_out, snapshots);
    if (*score) return cmd_score(common, score_in, score_mode, score_sub, score_out);
    if (*select) return cmd_select(common, sel_scores, sel_fraction, sel_k, sel_per_class, sel_method, sel_bins, sel_prune, sel_out);
    if (*sub) return cmd_subsample(common, sub_in, sub_plan, sub_out);
    if (*cost) return cmd_cost(common, cost_method, cost_preset, cost_params, cost_unit);
    if (*theory) return cmd_theory_check(common, th_fraction, th_coreset, th_epochs);
    if (*lds) return cmd_lds(common, lds_subsets, lds_alpha, lds_retrains, lds_out);
    if (*brit) return cmd_brittleness(common, brit_ks, brit_seeds, brit_out);
    if (*mae) return cmd_score_mae(common, mae_a, mae_b);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
