// ultratree: command-line front end.
//
// Exit codes: 0 success, 1 domain violation (invalid ultrametric input,
// dimension mismatch, bad data), 2 usage, configuration or I/O error.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ultratree/ultratree.hpp"

namespace fs = std::filesystem;
using namespace ultratree;

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kChainStream = 0x636861696e;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool looks_like_newick(const std::string& text) {
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return c == '(';
  }
  return false;
}

// A tree from either a Newick file or a matrix CSV.
Tree load_tree(const std::string& path, double tol = kDefaultTol) {
  const std::string text = slurp(path);
  if (looks_like_newick(text)) return parse_newick(detail::trim(text));
  std::stringstream in(text);
  return matrix_to_tree(read_matrix_csv(in), tol);
}

void write_text(const std::string& path, const std::string& text) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write " + path);
  out << text;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// --- validate ---------------------------------------------------------------

int cmd_validate(const std::string& file, double tol) {
  const auto m = read_matrix_csv(file);
  const auto report = validate_ultrametric(m, tol);
  std::cout << validation_json(report).dump(2) << '\n';
  return report.valid() ? 0 : 1;
}

// --- convert ----------------------------------------------------------------

int cmd_convert(const std::string& file, const std::string& to, const std::string& out, double tol) {
  const std::string text = slurp(file);
  std::string result;
  if (to == "newick") {
    if (looks_like_newick(text)) {
      result = to_newick(parse_newick(detail::trim(text))) + '\n';
    } else {
      std::stringstream in(text);
      const auto m = read_matrix_csv(in);
      const auto report = validate_ultrametric(m, tol);
      if (!report.valid()) {
        std::cout << validation_json(report).dump(2) << '\n';
        return 1;
      }
      result = to_newick(matrix_to_tree(UltrametricMatrix::from_matrix(m, tol), tol)) + '\n';
    }
  } else {
    const Tree t = looks_like_newick(text) ? parse_newick(detail::trim(text)) : load_tree(file, tol);
    std::stringstream ss;
    write_matrix_csv(ss, tree_to_dense(t));
    result = ss.str();
  }
  if (out.empty()) {
    std::cout << result;
  } else {
    write_text(out, result);
  }
  return 0;
}

// --- distance ---------------------------------------------------------------

int cmd_distance(const std::string& a, const std::string& b, const std::string& combine, double tol) {
  const Tree ta = load_tree(a, tol), tb = load_tree(b, tol);
  if (ta.p() != tb.p()) throw DimensionError("distance: trees have different leaf counts");
  std::cout << distance_json(ta, tb, combine == "l2" ? Combine::l2 : Combine::sum).dump(2) << '\n';
  return 0;
}

// --- sample -----------------------------------------------------------------

int cmd_sample(const std::string& config_path, int chains, const std::string& inits_arg, int threads,
               const std::string& out_dir_arg) {
  const RunConfig cfg = read_run_config(config_path);
  if (cfg.io.data.empty()) throw ConfigError("io.data", "io.data is required for sample");
  DataSet data;
  data.x = read_data_csv(cfg.io.data);
  if (cfg.p != 0 && cfg.p != data.p()) {
    throw ConfigError("model.p", "model.p = " + std::to_string(cfg.p) + " but the data have " +
                                     std::to_string(data.p()) + " columns");
  }
  const int p = data.p();
  const auto stats = suff_stats(data);

  std::vector<Tree> inits;
  if (!inits_arg.empty()) {
    for (const auto& path : split_commas(inits_arg)) inits.push_back(load_tree(path));
    if (static_cast<int>(inits.size()) != chains) {
      std::cerr << "error: --inits lists " << inits.size() << " trees for " << chains << " chains\n";
      return 2;
    }
  } else if (!cfg.io.init.empty()) {
    inits.assign(static_cast<std::size_t>(chains), load_tree(cfg.io.init));
  } else {
    RngStream rng(cfg.seed, kInitStream);
    inits = disjoint_inits(p, chains, rng);
  }

  const std::string out_dir = !out_dir_arg.empty() ? out_dir_arg : !cfg.io.out_dir.empty() ? cfg.io.out_dir : ".";
  std::string archive_path = !cfg.io.archive.empty() ? cfg.io.archive : (fs::path(out_dir) / "archive.jsonl").string();
  std::string trace_path = !cfg.io.trace.empty() ? cfg.io.trace : (fs::path(out_dir) / "trace.csv").string();
  if (!out_dir_arg.empty()) {
    archive_path = (fs::path(out_dir) / fs::path(archive_path).filename()).string();
    trace_path = (fs::path(out_dir) / fs::path(trace_path).filename()).string();
  }

  std::vector<ChainResult> results(static_cast<std::size_t>(chains));
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < chains; ++k) seeds.push_back(RngStream(cfg.seed, kChainStream + k).engine()());
  auto run_one = [&](int k) {
    if (cfg.algo == Algo::mh) {
      MhConfig c = cfg.mh;
      c.seed = seeds[static_cast<std::size_t>(k)];
      results[static_cast<std::size_t>(k)] = run_chain(stats, inits[static_cast<std::size_t>(k)], c);
    } else {
      HmcConfig c = cfg.hmc;
      c.seed = seeds[static_cast<std::size_t>(k)];
      results[static_cast<std::size_t>(k)] = run_chain(stats, inits[static_cast<std::size_t>(k)], c);
    }
  };
  const int workers = std::max(1, std::min(chains, threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency())));
  if (workers == 1) {
    for (int k = 0; k < chains; ++k) run_one(k);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chains));
    for (int start = 0; start < chains; start += workers) {
      std::vector<std::thread> pool;
      for (int k = start; k < std::min(chains, start + workers); ++k) {
        pool.emplace_back([&, k] {
          try {
            run_one(k);
          } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  ojson out{{"p", p}, {"n", data.n()}, {"algo", algo_name(cfg.algo)}, {"config_hash", cfg.hash}};
  ojson chain_list = ojson::array();
  for (int k = 0; k < chains; ++k) {
    auto& r = results[static_cast<std::size_t>(k)];
    r.archive.provenance = {algo_name(cfg.algo), cfg.hash, seeds[static_cast<std::size_t>(k)]};
    const std::string suffix = chains > 1 ? "_chain" + std::to_string(k + 1) : "";
    const std::string ap = with_suffix(archive_path, suffix), tp = with_suffix(trace_path, suffix);
    if (const auto d = fs::path(ap).parent_path(); !d.empty()) fs::create_directories(d);
    if (const auto d = fs::path(tp).parent_path(); !d.empty()) fs::create_directories(d);
    write_archive(ap, r.archive);
    write_trace_csv(tp, r.trace);
    const auto& st = r.final_state;
    auto rate = [](long a, long b) { return b > 0 ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
    chain_list.push_back({{"archive", ap},
                          {"trace", tp},
                          {"seed", seeds[static_cast<std::size_t>(k)]},
                          {"init", to_newick(inits[static_cast<std::size_t>(k)])},
                          {"records", r.archive.size()},
                          {"topology_acceptance", rate(st.topology_accepted, st.topology_proposed)},
                          {"length_acceptance", rate(st.length_accepted, st.length_proposed)},
                          {"diverged", r.diverged},
                          {"log_lik", trace_stats_json(trace_stats(log_liks(r.archive)))}});
  }
  out["chains"] = std::move(chain_list);
  if (chains >= 2) {
    const auto c = compare_chains(log_liks(results[0].archive), log_liks(results[1].archive));
    out["two_chain"] = {{"difference", c.difference}, {"combined_se", c.combined_se}, {"agree", c.agree}};
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

// --- summarize --------------------------------------------------------------

int cmd_summarize(const std::string& archive_path, const std::string& truth_path, double level, long passes,
                  const std::string& out_dir) {
  const auto archive = read_archive(archive_path);
  if (archive.empty()) throw ParseError("summarize: archive has no records");
  std::optional<Tree> truth;
  if (!truth_path.empty()) {
    truth = load_tree(truth_path);
    if (truth->p() != archive.p) throw DimensionError("summarize: truth and archive have different leaf counts");
  }
  MeanConfig mc;
  mc.max_iterations = passes * static_cast<long>(archive.size());
  const auto rep = summarize(archive, level, mc, truth);
  const auto j = summary_json(rep);
  if (out_dir.empty()) {
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  const fs::path d(out_dir);
  fs::create_directories(d);
  write_text((d / "summary.json").string(), j.dump(2) + '\n');
  write_matrix_csv((d / "mean.csv").string(), rep.mean.matrix());
  write_text((d / "mean.nwk").string(), to_newick(rep.mean_tree) + '\n');
  write_text((d / "map.nwk").string(), to_newick(rep.map.tree) + '\n');
  write_matrix_csv((d / "lower.csv").string(), rep.bounds.lo);
  write_matrix_csv((d / "upper.csv").string(), rep.bounds.hi);
  std::ostringstream splits;
  splits << "split,frequency\n";
  for (const auto& [s, f] : rep.splits.table()) splits << '"' << s.key() << "\"," << format_length(f) << '\n';
  write_text((d / "splits.csv").string(), splits.str());
  if (truth) {
    std::ostringstream rec;
    rec << "split,frequency\n";
    for (const auto& r : rep.recovery) rec << '"' << r.split.key() << "\"," << format_length(r.frequency) << '\n';
    write_text((d / "recovery.csv").string(), rec.str());
  }
  std::cout << ojson{{"out_dir", out_dir}, {"records", rep.records}}.dump(2) << '\n';
  return 0;
}

// --- simulate ---------------------------------------------------------------

int cmd_simulate(const std::string& config_path, bool force, int threads, const std::string& out_dir_arg) {
  RunConfig cfg = read_run_config(config_path);
  if (force) cfg.scenario.force = true;
  if (threads > 0) cfg.scenario.threads = threads;
  validate_scenario(cfg);
  const std::string out_dir = !out_dir_arg.empty() ? out_dir_arg : !cfg.io.out_dir.empty() ? cfg.io.out_dir : ".";
  ScenarioReport rep;
  try {
    rep = run_scenario(cfg.scenario);
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  const fs::path d(out_dir);
  fs::create_directories(d);
  write_text((d / "scenario.json").string(), scenario_json(rep).dump(2) + '\n');
  std::ostringstream csv;
  write_scenario_csv(csv, rep);
  write_text((d / "scenario.csv").string(), csv.str());
  std::cerr << "simulate: " << rep.replicates.size() << " chains in " << rep.seconds << " s\n";
  std::cout << ojson{{"report", (d / "scenario.json").string()}, {"table", (d / "scenario.csv").string()}}.dump(2)
            << '\n';
  return 0;
}

// --- mean -------------------------------------------------------------------

int cmd_mean(const std::string& input, long passes, const std::string& prefix) {
  std::vector<Tree> trees;
  if (fs::exists(meta_path(input))) {
    trees = read_archive(input).trees();
  } else {
    trees = read_newick_list(input);
  }
  if (trees.empty()) throw ParseError("mean: no trees");
  for (const auto& t : trees) {
    if (t.p() != trees.front().p()) throw DimensionError("mean: trees have different leaf counts");
  }
  MeanConfig mc;
  mc.max_iterations = passes * static_cast<long>(trees.size());
  const Tree m = frechet_mean(trees, mc);
  if (prefix.empty()) {
    std::cout << to_newick(m) << '\n';
    write_matrix_csv(std::cout, tree_to_dense(m));
    return 0;
  }
  write_matrix_csv(prefix + ".csv", tree_to_dense(m));
  write_text(prefix + ".nwk", to_newick(m) + '\n');
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian inference for tree-structured (ultrametric) covariance matrices"};
  app.require_subcommand(1);
  double tol = kDefaultTol;

  std::string file, other, to, out, config, inits, truth, combine = "sum", out_dir;
  int chains = 1, threads = 0;
  long passes = 200;
  double level = 0.95;
  bool force = false;

  auto* validate = app.add_subcommand("validate", "check that a matrix CSV is strictly ultrametric");
  validate->add_option("matrix", file)->required();
  validate->add_option("--tol", tol)->check(CLI::PositiveNumber);

  auto* convert = app.add_subcommand("convert", "convert between matrix CSV and Newick");
  convert->add_option("input", file)->required();
  convert->add_option("--to", to)->required()->check(CLI::IsMember({"newick", "matrix"}));
  convert->add_option("-o,--out", out);
  convert->add_option("--tol", tol)->check(CLI::PositiveNumber);

  auto* distance = app.add_subcommand("distance", "BHV and tree distance between two trees or matrices");
  distance->add_option("a", file)->required();
  distance->add_option("b", other)->required();
  distance->add_option("--combine", combine)->check(CLI::IsMember({"sum", "l2"}));
  distance->add_option("--tol", tol)->check(CLI::PositiveNumber);

  auto* sample = app.add_subcommand("sample", "run MCMC chains from a run config");
  sample->add_option("config", config)->required();
  sample->add_option("--chains", chains)->check(CLI::Range(1, 64));
  sample->add_option("--inits", inits, "comma-separated starting trees, one per chain");
  sample->add_option("--threads", threads)->check(CLI::NonNegativeNumber);
  sample->add_option("--out-dir", out_dir);

  auto* summarize_cmd = app.add_subcommand("summarize", "posterior summaries of an archive");
  summarize_cmd->add_option("archive", file)->required();
  summarize_cmd->add_option("--truth", truth, "true tree (Newick or matrix CSV)");
  summarize_cmd->add_option("--level", level)->check(CLI::Range(0.0, 1.0));
  summarize_cmd->add_option("--mean-passes", passes)->check(CLI::PositiveNumber);
  summarize_cmd->add_option("--out-dir", out_dir);

  auto* simulate = app.add_subcommand("simulate", "run a simulation scenario from a run config");
  simulate->add_option("config", config)->required();
  simulate->add_flag("--force", force, "run even when the runtime estimate exceeds the cap");
  simulate->add_option("--threads", threads)->check(CLI::NonNegativeNumber);
  simulate->add_option("--out-dir", out_dir);

  auto* mean = app.add_subcommand("mean", "Frechet mean of an archive or a Newick list");
  mean->add_option("input", file)->required();
  mean->add_option("--passes", passes)->check(CLI::PositiveNumber);
  mean->add_option("-o,--out", out, "output prefix for .csv and .nwk");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) return cmd_validate(file, tol);
    if (*convert) return cmd_convert(file, to, out, tol);
    if (*distance) return cmd_distance(file, other, combine, tol);
    if (*sample) return cmd_sample(config, chains, inits, threads, out_dir);
    if (*summarize_cmd) return cmd_summarize(file, truth, level, passes, out_dir);
    if (*simulate) return cmd_simulate(config, force, threads, out_dir);
    if (*mean) return cmd_mean(file, passes, out);
  } catch (const ConfigError& e) {
    std::cerr << ojson{{"error", e.what()}, {"key", e.key()}}.dump() << '\n';
    return 2;
  } catch (const UltrametricViolation& e) {
    std::cout << validation_json(e.report()).dump(2) << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {  // includes DimensionError
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NotPositiveDefinite& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
