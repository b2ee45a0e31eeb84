#include "actevo/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "actevo/config.hpp"
#include "actevo/errors.hpp"
#include "actevo/numerics.hpp"
#include "actevo/presets.hpp"
#include "actevo/results_io.hpp"
#include "actevo/search.hpp"

namespace actevo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest round-trip formatting, same as the JSON output uses.
std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct SearchOptions {
  std::string config_path;
  std::string out_dir;
  bool resume = false;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  bool extended = false;
};

int cmd_search(const SearchOptions& opt, std::ostream& out, std::ostream& err) {
  search::SearchConfig cfg = config::load_file(opt.config_path);
  if (opt.seed) cfg.master_seed = *opt.seed;
  if (opt.extended) cfg.extended_alphabet = true;
  cfg.validate();
  const std::string digest = config::digest(cfg);

  fs::create_directories(opt.out_dir);
  const std::string results_path = (fs::path(opt.out_dir) / "results.jsonl").string();
  const std::string manifest_path = (fs::path(opt.out_dir) / "manifest.json").string();

  search::ResumeState state;
  const search::ResumeState* state_ptr = nullptr;
  if (opt.resume) {
    const io::Manifest manifest = io::read_manifest(manifest_path);
    if (manifest.config_digest != digest)
      throw ResumeMismatch("config digest " + digest +
                           " does not match the manifest's " +
                           manifest.config_digest);
    const io::LoadedResults persisted = io::load_results(results_path);
    state = io::make_resume_state(persisted, manifest.completed_generations,
                                  results_path, cfg);
    state_ptr = &state;
    err << "resuming after " << manifest.completed_generations
        << " completed generation(s)\n";
  } else if (fs::exists(results_path) && fs::file_size(results_path) > 0) {
    throw ConfigError("output directory already holds a run; pass --resume "
                      "or choose a fresh directory");
  }

  io::JsonlWriter writer(results_path, manifest_path, cfg, digest, opt.resume,
                         state.completed_generations);
  const search::SearchResult result = search::run_search(cfg, opt.jobs, &writer,
                                                         state_ptr);

  out << "run " << result.run_id << ": " << result.trainings << " trainings, "
      << result.cache_hits << " cache hits\n";
  for (const search::Candidate& c : result.top(3))
    out << "  " << c.id << "  val_acc=" << fmt_double(c.metrics.final_val_acc)
        << " val_loss=" << fmt_double(c.metrics.final_val_loss) << "\n";
  return kExitOk;
}

struct EvalOptions {
  std::string expr;
  std::optional<double> at;
  std::string range;  // "lo:hi:count"
  bool extended = false;
};

std::vector<double> eval_grid(const EvalOptions& opt) {
  if (opt.at) return {*opt.at};
  double lo = -5.0, hi = 5.0;
  int count = 101;
  if (!opt.range.empty()) {
    const auto a = opt.range.find(':');
    const auto b = opt.range.rfind(':');
    if (a == std::string::npos || b == a)
      throw ConfigError("--range wants LO:HI:COUNT");
    try {
      lo = std::stod(opt.range.substr(0, a));
      hi = std::stod(opt.range.substr(a + 1, b - a - 1));
      count = std::stoi(opt.range.substr(b + 1));
    } catch (const std::logic_error&) {
      throw ConfigError("--range wants LO:HI:COUNT");
    }
    if (count < 1 || !(hi > lo)) throw ConfigError("--range wants LO < HI, COUNT >= 1");
  }
  std::vector<double> xs(count);
  for (int i = 0; i < count; ++i)
    xs[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return xs;
}

int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const expr::Alphabet alphabet{opt.extended};
  const expr::ExprTree tree = presets::resolve(opt.expr, alphabet);
  const num::SafetyPolicy policy;
  const std::vector<double> xs = eval_grid(opt);

  const num::EvalReport values = num::eval(tree, xs, policy);
  const num::EvalReport derivs = num::deriv(tree, xs, policy);

  out << "# expr: " << expr::print_tree(tree) << "\n";
  out << "# extended_alphabet: " << (opt.extended ? "true" : "false") << "\n";
  out << "# x\tf(x)\tf'(x)\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const bool bad =
        !std::isfinite(values.values[i]) || !std::isfinite(derivs.values[i]);
    out << fmt_double(xs[i]) << "\t" << fmt_double(values.values[i]) << "\t"
        << fmt_double(derivs.values[i]) << (bad ? "\tnonfinite" : "") << "\n";
  }
  if (!values.finite || !derivs.finite)
    out << "# warning: non-finite rows present\n";
  return kExitOk;
}

struct GradcheckOptions {
  std::string target;
  int points = 100;
  double h = 1e-5;
  std::uint64_t seed = 20240101;
  bool extended = false;
  bool corrupt = false;  // self-test hook: bias the analytic derivative
};

// Rejection-samples points that clear both the per-operator sampling window
// and the grad_check admissibility margin.
std::vector<double> admissible_points(const expr::ExprTree& tree, int count,
                                      double lo, double hi, double h,
                                      double extra_margin,
                                      const num::SafetyPolicy& policy,
                                      Rng& rng) {
  std::vector<double> pts;
  int attempts = 0;
  while (static_cast<int>(pts.size()) < count) {
    if (++attempts > count * 1000)
      throw BadPoint("could not sample admissible gradient-check points");
    const double x = lo + (hi - lo) * rng.uniform();
    if (!num::is_admissible_point(tree, x, std::max(10.0 * h, extra_margin),
                                  policy))
      continue;
    pts.push_back(x);
  }
  return pts;
}

struct GradTarget {
  std::string label;
  expr::ExprTree tree;
  double lo, hi;
  double extra_margin;
};

std::vector<GradTarget> gradcheck_targets(const GradcheckOptions& opt) {
  const expr::Alphabet alphabet{opt.extended};
  std::vector<GradTarget> targets;
  if (opt.target == "all-operators") {
    for (int i = 0; i < alphabet.unary_count(); ++i) {
      const auto op = static_cast<expr::UnaryOp>(i);
      const std::string text =
          "add(" + std::string(expr::token(op)) + "(x), zero(x))";
      double lo = -3.0, hi = 3.0, margin = 1e-3;
      if (op == expr::UnaryOp::kAtanh) {
        lo = -0.9;
        hi = 0.9;
      }
      if (op == expr::UnaryOp::kLogEps) margin = 0.05;
      targets.push_back({std::string(expr::token(op)),
                         expr::parse_tree(text, alphabet), lo, hi, margin});
    }
    for (int i = 0; i < expr::kBinaryCount; ++i) {
      const auto op = static_cast<expr::BinaryOp>(i);
      const std::string text =
          std::string(expr::token(op)) + "(id(x), tanh(x))";
      targets.push_back({std::string(expr::token(op)),
                         expr::parse_tree(text, alphabet), -3.0, 3.0, 1e-3});
    }
  } else {
    targets.push_back({opt.target, presets::resolve(opt.target, alphabet),
                       -3.0, 3.0, 1e-2});
  }
  return targets;
}

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out) {
  const num::SafetyPolicy policy;
  constexpr double kTolerance = 1e-5;
  double worst = 0.0;
  Rng rng(opt.seed);
  for (const GradTarget& t : gradcheck_targets(opt)) {
    const std::vector<double> pts = admissible_points(
        t.tree, opt.points, t.lo, t.hi, opt.h, t.extra_margin, policy, rng);
    double err;
    if (!opt.corrupt) {
      err = num::grad_check(t.tree, pts, opt.h, policy);
    } else {
      // Negative control: a biased analytic derivative must be caught.
      err = 0.0;
      for (double x : pts) {
        bool clamped = false;
        const double analytic =
            num::eval_dual(t.tree.root, x, policy, clamped).deriv + 1e-3;
        const double fp = num::eval_value(t.tree.root, x + opt.h, policy, clamped);
        const double fm = num::eval_value(t.tree.root, x - opt.h, policy, clamped);
        const double numeric = (fp - fm) / (2.0 * opt.h);
        err = std::max(err, std::fabs(analytic - numeric) /
                                std::max(std::fabs(analytic), 1e-8));
      }
    }
    worst = std::max(worst, err);
    out << t.label << "\tmax_rel_err=" << fmt_double(err)
        << (err <= kTolerance ? "" : "\tFAIL") << "\n";
  }
  out << (worst <= kTolerance ? "OK" : "FAILED")
      << " max_rel_err=" << fmt_double(worst) << " tolerance=" << kTolerance
      << "\n";
  return worst <= kTolerance ? kExitOk : kExitVerifyFailed;
}

struct EnumerateOptions {
  int depth = 1;
  bool count = false;
  bool extended = false;
};

int cmd_enumerate(const EnumerateOptions& opt, std::ostream& out) {
  const expr::Alphabet alphabet{opt.extended};
  if (opt.depth < 1) throw ConfigError("--depth must be >= 1");
  if (opt.count) {
    if (opt.depth > 12)
      throw ConfigError("--count supports depth <= 12 (the value would have "
                        "more than ten thousand digits)");
    out << expr::count_space(opt.depth, alphabet) << "\n";
    return kExitOk;
  }
  if (opt.depth != 1)
    throw ConfigError("only S_1 can be printed exhaustively; use --count for "
                      "deeper spaces");
  for (const expr::ExprTree& t : expr::enumerate_s1(alphabet))
    out << expr::print_tree(t) << "\n";
  return kExitOk;
}

struct ReportOptions {
  std::string results_path;
  std::string out_dir;
  int top = 10;
};

int cmd_report(const ReportOptions& opt, std::ostream& out) {
  const io::LoadedResults results = io::load_results(opt.results_path);
  fs::create_directories(opt.out_dir);

  std::map<int, std::pair<double, double>> per_gen;  // gen -> (best acc, min loss)
  for (const auto& row : results.rows) {
    auto [it, fresh] = per_gen.emplace(row.generation,
                                       std::make_pair(row.val_acc, row.val_loss));
    if (!fresh) {
      it->second.first = std::max(it->second.first, row.val_acc);
      it->second.second = std::min(it->second.second, row.val_loss);
    }
  }

  {
    std::ofstream curve(fs::path(opt.out_dir) / "curve_best_per_gen.csv",
                        std::ios::trunc);
    curve << "generation,best_val_acc_in_gen,best_val_acc_so_far\n";
    double so_far = 0.0;
    for (const auto& [gen, stats] : per_gen) {
      so_far = std::max(so_far, stats.first);
      curve << gen << "," << fmt_double(stats.first) << ","
            << fmt_double(so_far) << "\n";
    }
  }

  struct Entry {
    std::string expr;
    double acc;
    double loss;
  };
  std::map<std::string, Entry> uniq;
  for (const auto& row : results.rows)
    uniq.emplace(row.expr, Entry{row.expr, row.val_acc, row.val_loss});
  std::vector<Entry> board;
  board.reserve(uniq.size());
  for (const auto& [k, e] : uniq) board.push_back(e);
  std::sort(board.begin(), board.end(), [](const Entry& a, const Entry& b) {
    if (a.acc != b.acc) return a.acc > b.acc;
    if (a.loss != b.loss) return a.loss < b.loss;
    return a.expr < b.expr;
  });
  if (static_cast<int>(board.size()) > opt.top) board.resize(opt.top);

  {
    std::ofstream lb(fs::path(opt.out_dir) / "leaderboard.csv", std::ios::trunc);
    lb << "expr,val_acc,val_loss\n";
    for (const Entry& e : board)
      lb << "\"" << e.expr << "\"," << fmt_double(e.acc) << ","
         << fmt_double(e.loss) << "\n";
  }

  out << "wrote curve_best_per_gen.csv and leaderboard.csv ("
      << per_gen.size() << " generations, " << board.size()
      << " leaderboard rows)\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"evolutionary search over activation-function trees", "actevo"};
  app.require_subcommand(1);

  SearchOptions search_opt;
  auto* search_cmd =
      app.add_subcommand("search", "run a configured search and persist JSONL");
  search_cmd->add_option("--config", search_opt.config_path, "config file")
      ->required();
  search_cmd->add_option("--out", search_opt.out_dir, "output directory")
      ->required();
  search_cmd->add_flag("--resume", search_opt.resume,
                       "continue an interrupted run in --out");
  search_cmd->add_option("--jobs", search_opt.jobs,
                         "parallel candidate evaluations");
  std::uint64_t seed_val = 0;
  auto* seed_opt = search_cmd->add_option("--seed", seed_val,
                                          "override [search] master_seed");
  search_cmd->add_flag("--extended-alphabet", search_opt.extended,
                       "enable the 25-operator unary alphabet");

  EvalOptions eval_opt;
  auto* eval_cmd = app.add_subcommand(
      "eval", "print x, f(x), f'(x) for an expression or preset");
  eval_cmd->add_option("expr", eval_opt.expr, "grammar text or preset name")
      ->required();
  double at_val = 0.0;
  auto* at_opt = eval_cmd->add_option("--at", at_val, "single evaluation point");
  eval_cmd->add_option("--range", eval_opt.range,
                       "LO:HI:COUNT grid (default -5:5:101)");
  eval_cmd->add_flag("--extended-alphabet", eval_opt.extended, "");

  GradcheckOptions grad_opt;
  auto* grad_cmd = app.add_subcommand(
      "gradcheck", "compare analytic derivatives against central differences");
  grad_cmd->add_option("target", grad_opt.target,
                       "expression, preset, or 'all-operators'")
      ->required();
  grad_cmd->add_option("--points", grad_opt.points, "points per target");
  grad_cmd->add_option("--step", grad_opt.h, "finite-difference step");
  grad_cmd->add_option("--seed", grad_opt.seed, "point-sampling seed");
  grad_cmd->add_flag("--extended-alphabet", grad_opt.extended, "");
  grad_cmd->add_flag("--selftest-corrupt", grad_opt.corrupt, "")->group("");

  EnumerateOptions enum_opt;
  auto* enum_cmd =
      app.add_subcommand("enumerate", "print S_1 or count S_d");
  enum_cmd->add_option("--depth", enum_opt.depth, "search-space depth");
  enum_cmd->add_flag("--count", enum_opt.count, "print |S_d| instead of strings");
  enum_cmd->add_flag("--extended-alphabet", enum_opt.extended, "");

  ReportOptions report_opt;
  auto* report_cmd =
      app.add_subcommand("report", "export plot-ready CSV curves from JSONL");
  report_cmd->add_option("results", report_opt.results_path, "results.jsonl path")
      ->required();
  report_cmd->add_option("--out", report_opt.out_dir, "output directory")
      ->required();
  report_cmd->add_option("--top", report_opt.top, "leaderboard size");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help and friends
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*search_cmd) {
      if (*seed_opt) search_opt.seed = seed_val;
      return cmd_search(search_opt, out, err);
    }
    if (*eval_cmd) {
      if (*at_opt) eval_opt.at = at_val;
      return cmd_eval(eval_opt, out);
    }
    if (*grad_cmd) return cmd_gradcheck(grad_opt, out);
    if (*enum_cmd) return cmd_enumerate(enum_opt, out);
    if (*report_cmd) return cmd_report(report_opt, out);
  } catch (const ResumeMismatch& e) {
    err << "resume error: " << e.what() << "\n";
    return kExitResume;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StructureError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "config error (byte " << e.byte_offset << "): " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerifyFailed;
  }
  return kExitConfig;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace actevo::cli
