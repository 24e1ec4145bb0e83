// rectidistill: experiment driver for bias-rectified knowledge distillation.
//
// Subcommands: gen-data, train-teacher, distill, ablate, prop-check.
// Exit codes: 0 success, 1 internal error, 2 usage/config error,
// 3 verification failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rectidistill/analysis.hpp"
#include "rectidistill/config.hpp"
#include "rectidistill/data.hpp"
#include "rectidistill/error.hpp"
#include "rectidistill/experiment.hpp"
#include "rectidistill/model.hpp"

namespace fs = std::filesystem;
using namespace rectidistill;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerification = 3;

// Raised for problems with inputs (flags, config, missing or malformed
// files) so main can map them to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
}

void persist_config(const fs::path& dir, const std::string& command, const KeyValues& kv) {
  std::ostringstream text;
  text << "# merged configuration for `rectidistill " << command << "`\n";
  write_key_values(kv, text);
  write_text(dir / (command + ".config"), text.str());
}

template <typename F>
auto input_stage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

Dataset load_dataset(const fs::path& path) {
  return input_stage([&] { return load_csv(path); });
}

// Flags shared by every training-style subcommand.
struct TrainFlags {
  double lr = 0.01;
  double momentum = 0.0;
  long epochs = 60;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double tau = 1.0;
  std::string reduction = "batch";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--lr", lr, "SGD learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--momentum", momentum, "SGD momentum in [0, 1)")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.999999999));
    cmd->add_option("--epochs", epochs, "number of epochs E")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", batch_size, "mini-batch size")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "64-bit seed")->capture_default_str();
  }

  void add_kd(CLI::App* cmd) {
    cmd->add_option("--tau", tau, "softmax temperature for the KD terms")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--kd-reduction", reduction, "divisor for the KD sums: batch|subset")
        ->capture_default_str()
        ->check(CLI::IsMember({"batch", "subset"}));
  }

  TrainConfig to_config() const {
    TrainConfig cfg;
    cfg.learning_rate = lr;
    cfg.momentum = momentum;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.tau = tau;
    cfg.reduction = parse_reduction(reduction);
    return cfg;
  }

  void append(KeyValues& kv, bool with_tau) const {
    kv.emplace_back("lr", num(lr));
    kv.emplace_back("momentum", num(momentum));
    kv.emplace_back("epochs", std::to_string(epochs));
    kv.emplace_back("batch-size", std::to_string(batch_size));
    kv.emplace_back("seed", std::to_string(seed));
    if (with_tau) {
      kv.emplace_back("tau", num(tau));
      kv.emplace_back("kd-reduction", reduction);
    }
  }
};

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::size_t classes = 4;
  std::size_t per_class = 200;
  std::size_t val_per_class = 200;
  std::size_t dim = 2;
  double spread = 1.2;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& a) {
  Dataset train;
  Dataset val;
  input_stage([&] {
    train = make_blobs(a.classes, a.per_class, a.dim, a.spread, a.seed, 0);
    val = make_blobs(a.classes, a.val_per_class, a.dim, a.spread, a.seed, 1);
    return 0;
  });
  const fs::path dir = a.out;
  ensure_dir(dir);
  save_csv(train, dir / "train.csv");
  save_csv(val, dir / "val.csv");

  nlohmann::ordered_json manifest;
  manifest["generator"] = "gaussian-blobs";
  manifest["prng"] = "xoshiro256**/splitmix64";
  manifest["seed"] = a.seed;
  manifest["classes"] = a.classes;
  manifest["per_class"] = a.per_class;
  manifest["val_per_class"] = a.val_per_class;
  manifest["dim"] = a.dim;
  manifest["spread"] = a.spread;
  manifest["train_rows"] = train.size();
  manifest["val_rows"] = val.size();
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  persist_config(dir, "gen-data",
                 {{"classes", std::to_string(a.classes)},
                  {"per-class", std::to_string(a.per_class)},
                  {"val-per-class", std::to_string(a.val_per_class)},
                  {"dim", std::to_string(a.dim)},
                  {"spread", num(a.spread)},
                  {"seed", std::to_string(a.seed)},
                  {"out", a.out}});
  std::cout << "wrote " << train.size() << " train rows and " << val.size() << " val rows to " << dir.string()
            << "\n";
  return kExitOk;
}

// ----------------------------------------------------------- train-teacher

struct TeacherArgs {
  std::string train;
  std::string val;
  std::string dims = "2,64,4";
  std::string out;
  TrainFlags flags;
};

int cmd_train_teacher(TeacherArgs a) {
  const fs::path dir = a.out;
  if (a.train.empty()) a.train = (dir / "train.csv").string();
  if (a.val.empty()) a.val = (dir / "val.csv").string();
  const Dataset train = load_dataset(a.train);
  const Dataset val = load_dataset(a.val);
  const auto dims = input_stage([&] { return parse_dims(a.dims); });
  const TrainConfig cfg = a.flags.to_config();
  input_stage([&] {
    cfg.validate();
    if (dims.front() != train.dim || dims.back() < train.n_classes) {
      fail(ErrorCode::config, "teacher dims " + a.dims + " do not fit the dataset");
    }
    return 0;
  });

  const TrainResult result = train_teacher(train, val, dims, cfg);

  ensure_dir(dir);
  save_checkpoint(result.params, dir / "teacher.ckpt");
  std::ostringstream csv;
  write_metrics_csv(result.metrics, csv);
  write_text(dir / "teacher_metrics.csv", csv.str());
  KeyValues kv{{"train", a.train}, {"val", a.val}, {"dims", format_dims(dims)}};
  a.flags.append(kv, false);
  kv.emplace_back("out", a.out);
  persist_config(dir, "train-teacher", kv);

  const auto& last = result.metrics.back();
  std::printf("teacher train_acc=%.4f val_acc=%.4f\n", last.train_acc, last.val_acc);
  return kExitOk;
}

// ------------------------------------------------------------------ distill

struct DistillArgs {
  std::string teacher;
  std::string train;
  std::string val;
  std::string dims = "2,8,4";
  std::string mode = "full";
  std::string out;
  TrainFlags flags;
};

struct DistillInputs {
  MlpParams teacher;
  Dataset train;
  Dataset val;
  std::vector<std::size_t> dims;
};

DistillInputs load_distill_inputs(DistillArgs& a) {
  const fs::path dir = a.out;
  if (a.teacher.empty()) a.teacher = (dir / "teacher.ckpt").string();
  if (a.train.empty()) a.train = (dir / "train.csv").string();
  if (a.val.empty()) a.val = (dir / "val.csv").string();
  DistillInputs in;
  in.train = load_dataset(a.train);
  in.val = load_dataset(a.val);
  in.teacher = input_stage([&] { return load_checkpoint(a.teacher); });
  in.dims = input_stage([&] { return parse_dims(a.dims); });
  input_stage([&] {
    if (in.teacher.output_width() != in.dims.back()) {
      fail(ErrorCode::config, "teacher has " + std::to_string(in.teacher.output_width()) +
                                  " classes but the student has " + std::to_string(in.dims.back()));
    }
    if (in.teacher.input_width() != in.train.dim || in.dims.front() != in.train.dim) {
      fail(ErrorCode::config, "model input width does not match the dataset");
    }
    return 0;
  });
  return in;
}

int cmd_distill(DistillArgs a) {
  DistillInputs in = load_distill_inputs(a);
  TrainConfig cfg = a.flags.to_config();
  input_stage([&] {
    cfg.mode = DistillMode::parse(a.mode);
    cfg.validate();
    return 0;
  });

  const TrainResult result = distill(in.teacher, in.train, in.val, in.dims, cfg);

  const fs::path dir = a.out;
  ensure_dir(dir);
  save_checkpoint(result.params, dir / "student.ckpt");
  std::ostringstream csv;
  write_metrics_csv(result.metrics, csv);
  write_text(dir / "metrics.csv", csv.str());
  std::cout << csv.str();

  const auto& last = result.metrics.back();
  nlohmann::ordered_json summary;
  summary["mode"] = cfg.mode.name();
  summary["seed"] = cfg.seed;
  summary["epochs"] = cfg.epochs;
  summary["final_train_acc"] = last.train_acc;
  summary["final_val_acc"] = last.val_acc;
  summary["final_loss_total"] = last.loss_total;
  summary["teacher_right_fraction"] = last.teacher_right_fraction;
  const std::string line = summary.dump();
  write_text(dir / "summary.json", line + "\n");

  KeyValues kv{{"teacher", a.teacher}, {"train", a.train}, {"val", a.val},
               {"dims", format_dims(in.dims)}, {"mode", cfg.mode.name()}};
  a.flags.append(kv, true);
  kv.emplace_back("out", a.out);
  persist_config(dir, "distill", kv);

  std::cout << line << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- ablate

struct AblateArgs {
  DistillArgs base;
  std::string modes = "step-b,full";
  std::size_t seeds = 5;
  long probe_epoch = 0;
};

int cmd_ablate(AblateArgs a) {
  DistillInputs in = load_distill_inputs(a.base);
  TrainConfig cfg = a.base.flags.to_config();
  std::vector<DistillMode> modes;
  long probe = a.probe_epoch;
  input_stage([&] {
    std::stringstream ss(a.modes);
    for (std::string item; std::getline(ss, item, ',');) modes.push_back(DistillMode::parse(item));
    if (modes.empty()) fail(ErrorCode::config, "no modes given");
    cfg.validate();
    if (probe == 0) probe = static_cast<long>(std::ceil(0.1 * static_cast<double>(cfg.epochs)));
    if (probe < 1 || probe > cfg.epochs) fail(ErrorCode::config, "probe-epoch must be in [1, epochs]");
    return 0;
  });

  const auto rows = run_ablation(in.teacher, in.train, in.val, in.dims, cfg, modes, a.seeds, probe);
  const auto summary = summarize_ablation(rows, modes);

  const fs::path dir = a.base.out;
  ensure_dir(dir);
  std::ostringstream per_seed;
  per_seed << "seed,mode,val_acc,val_acc_probe\n";
  for (const auto& r : rows) {
    per_seed << r.seed << ',' << r.mode << ',' << num(r.val_acc) << ',' << num(r.val_acc_probe) << '\n';
  }
  write_text(dir / "ablation.csv", per_seed.str());
  std::ostringstream med;
  med << "mode,median_val_acc,median_val_acc_probe\n";
  for (const auto& s : summary) {
    med << s.mode << ',' << num(s.median_val_acc) << ',' << num(s.median_val_acc_probe) << '\n';
  }
  write_text(dir / "ablation_summary.csv", med.str());

  KeyValues kv{{"teacher", a.base.teacher}, {"train", a.base.train}, {"val", a.base.val},
               {"dims", format_dims(in.dims)}, {"modes", a.modes}, {"seeds", std::to_string(a.seeds)},
               {"probe-epoch", std::to_string(probe)}};
  a.base.flags.append(kv, true);
  kv.emplace_back("out", a.base.out);
  persist_config(dir, "ablate", kv);

  std::printf("%-6s %-22s %10s %12s\n", "seed", "mode", "val_acc", "val@probe");
  for (const auto& r : rows) {
    std::printf("%-6llu %-22s %10.4f %12.4f\n", static_cast<unsigned long long>(r.seed), r.mode.c_str(), r.val_acc,
                r.val_acc_probe);
  }
  std::printf("\n%-29s %10s %12s\n", "median over seeds", "val_acc", "val@probe");
  for (const auto& s : summary) {
    std::printf("%-29s %10.4f %12.4f\n", s.mode.c_str(), s.median_val_acc, s.median_val_acc_probe);
  }
  return kExitOk;
}

// --------------------------------------------------------------- prop-check

struct PropArgs {
  std::vector<double> ta;
  double w_kl = 1.0;
  double w_ce = 1.0;
  double lr = 1.0;
  std::size_t steps = 20000;
  std::string out;
};

int cmd_prop_check(const PropArgs& a) {
  TwoClassSetup base;
  base.w_kl = a.w_kl;
  base.w_ce = a.w_ce;
  base.learning_rate = a.lr;
  base.steps = a.steps;
  const std::vector<double> grid = a.ta.empty() ? default_sweep_grid() : a.ta;
  input_stage([&] {
    for (double t : grid) {
      TwoClassSetup probe = base;
      probe.t_a = t;
      probe.validate();
    }
    return 0;
  });

  const auto rows = run_sweep(grid, base);
  const auto failures = check_sweep(rows);

  const fs::path dir = a.out;
  ensure_dir(dir);
  std::ostringstream csv;
  write_sweep_csv(rows, csv);
  write_text(dir / "prop_sweep.csv", csv.str());
  std::string ta_list;
  for (double t : a.ta) ta_list += (ta_list.empty() ? "" : ",") + num(t);
  KeyValues kv;
  if (!ta_list.empty()) kv.emplace_back("ta", ta_list);
  kv.insert(kv.end(), {{"w-kl", num(a.w_kl)},
                       {"w-ce", num(a.w_ce)},
                       {"lr", num(a.lr)},
                       {"steps", std::to_string(a.steps)},
                       {"out", a.out}});
  persist_config(dir, "prop-check", kv);

  for (const auto& r : rows) {
    std::printf("t_a=%.4g s*=%.6g s_rect=%.6g s_ce_only=%g verdict=%s\n", r.t_a, r.s_unrect, r.s_rect, r.s_ce_only,
                std::string(to_string(r.verdict)).c_str());
  }
  if (!failures.empty()) {
    std::printf("FAIL\n");
    for (const auto& f : failures) std::printf("  %s\n", f.c_str());
    return kExitVerification;
  }
  std::printf("PASS\n");
  return kExitOk;
}

// Splices `--key=value` pairs from a --config file in front of the user's
// own flags. Keys the user also passes are dropped so that repeatable
// options are not merged; TakeLast covers the rest.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty() || args.empty()) return args;
  KeyValues kv;
  try {
    kv = load_key_values(config_path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin() + 1, args.end(), [&](const std::string& arg) {
      return arg == flag || arg.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> expanded{args.front()};
  for (const auto& [key, value] : kv) {
    if (key == "config") throw UsageError("config files may not nest --config");
    if (!given(key)) expanded.push_back("--" + key + "=" + value);
  }
  expanded.insert(expanded.end(), args.begin() + 1, args.end());
  return expanded;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bias-rectified knowledge distillation experiments"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  const std::string default_out = default_output_root().string();

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value file; keys mirror long flag names");
  };

  GenDataArgs gen{.out = default_out};
  auto* gen_cmd = app.add_subcommand("gen-data", "generate train/val Gaussian-blob CSVs");
  add_config(gen_cmd);
  gen_cmd->add_option("--classes", gen.classes, "number of classes")->capture_default_str()->check(CLI::Range(2, 1000000));
  gen_cmd->add_option("--per-class", gen.per_class, "train rows per class")->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--val-per-class", gen.val_per_class, "val rows per class")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--dim", gen.dim, "feature dimension")->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--spread", gen.spread, "noise standard deviation")->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "64-bit seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->capture_default_str();

  TeacherArgs teacher{.out = default_out};
  teacher.flags.lr = 0.05;
  teacher.flags.momentum = 0.9;
  auto* teacher_cmd = app.add_subcommand("train-teacher", "train the teacher with plain cross-entropy");
  add_config(teacher_cmd);
  teacher_cmd->add_option("--train", teacher.train, "train CSV (default <out>/train.csv)");
  teacher_cmd->add_option("--val", teacher.val, "val CSV (default <out>/val.csv)");
  teacher_cmd->add_option("--dims", teacher.dims, "layer widths")->capture_default_str();
  teacher_cmd->add_option("--out", teacher.out, "output directory")->capture_default_str();
  teacher.flags.add_to(teacher_cmd);

  auto add_distill_flags = [&](CLI::App* cmd, DistillArgs& d) {
    add_config(cmd);
    cmd->add_option("--teacher", d.teacher, "teacher checkpoint (default <out>/teacher.ckpt)");
    cmd->add_option("--train", d.train, "train CSV (default <out>/train.csv)");
    cmd->add_option("--val", d.val, "val CSV (default <out>/val.csv)");
    cmd->add_option("--dims", d.dims, "student layer widths")->capture_default_str();
    cmd->add_option("--out", d.out, "output directory")->capture_default_str();
    d.flags.add_to(cmd);
    d.flags.add_kd(cmd);
  };

  DistillArgs distill_args{.out = default_out};
  auto* distill_cmd = app.add_subcommand("distill", "distil a student from a frozen teacher");
  add_distill_flags(distill_cmd, distill_args);
  distill_cmd->add_option("--mode", distill_args.mode, "full|eliminate|rectify|vanilla|step-b|fixed-gamma=G")
      ->capture_default_str();

  AblateArgs ablate{.base = {.out = default_out}};
  auto* ablate_cmd = app.add_subcommand("ablate", "compare distillation modes across seeds");
  add_distill_flags(ablate_cmd, ablate.base);
  ablate_cmd->add_option("--modes", ablate.modes, "comma-separated modes")->capture_default_str();
  ablate_cmd->add_option("--seeds", ablate.seeds, "number of seeds, starting at --seed")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--probe-epoch", ablate.probe_epoch, "completed epochs at the probe (0: ceil(0.1 E))")
      ->capture_default_str();

  PropArgs prop{.out = default_out};
  auto* prop_cmd = app.add_subcommand("prop-check", "two-class verification of the biased-teacher analysis");
  add_config(prop_cmd);
  const auto open_unit = CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        try {
          v = std::stod(s);
        } catch (...) {
          return "t_a must be a number";
        }
        return (v > 0.0 && v < 1.0) ? std::string() : "t_a must lie in (0, 1), got " + s;
      },
      "(0,1)");
  prop_cmd->add_option("--ta", prop.ta, "teacher probability of the true class (repeatable); default sweep 0.05..0.95")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->delimiter(',')
      ->check(open_unit);
  prop_cmd->add_option("--w-kl", prop.w_kl, "KL weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  prop_cmd->add_option("--w-ce", prop.w_ce, "CE weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  prop_cmd->add_option("--lr", prop.lr, "descent step size")->capture_default_str()->check(CLI::PositiveNumber);
  prop_cmd->add_option("--steps", prop.steps, "maximum descent steps")->capture_default_str()->check(CLI::PositiveNumber);
  prop_cmd->add_option("--out", prop.out, "output directory")->capture_default_str();

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*teacher_cmd) return cmd_train_teacher(teacher);
    if (*distill_cmd) return cmd_distill(distill_args);
    if (*ablate_cmd) return cmd_ablate(ablate);
    if (*prop_cmd) return cmd_prop_check(prop);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
