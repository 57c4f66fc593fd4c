#pragma once

// Run configuration: INI text with a top-level seed and the sections
// [model], [prior], [sampler], [io] and [scenario].
//
//   seed = 42
//   [model]
//   p = 10
//   [prior]
//   kind = beta_splitting
//   beta = -1.5
//   [sampler]
//   algo = mh
//   iterations = 10000
//   [io]
//   data = data.csv
//   archive = out/archive.jsonl

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "errors.hpp"
#include "io.hpp"
#include "priors.hpp"
#include "samplers.hpp"
#include "sim.hpp"

namespace ultratree {

struct IoPaths {
  std::string data;
  std::string init;
  std::string truth;
  std::string archive;
  std::string trace;
  std::string out_dir;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int p = 0;  // 0: taken from the data
  PriorSpec prior;
  Algo algo = Algo::mh;
  MhConfig mh;
  HmcConfig hmc;
  IoPaths io;
  Scenario scenario;
  std::string base_dir;
  std::string hash;  // of the parsed key/value pairs
};

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"", {"seed"}},
      {"model", {"p"}},
      {"prior", {"kind", "beta", "theta", "alpha_pd", "edge_mean"}},
      {"sampler",
       {"algo", "mode", "iterations", "burn_in", "thin", "sigma_L", "epsilon", "leapfrog_steps", "delta", "mass",
        "lambda"}},
      {"io", {"data", "init", "truth", "archive", "trace", "out_dir"}},
      {"scenario",
       {"sample_sizes", "distributions", "truth_mode", "drop", "drop_mode", "replicates", "fixed_truth",
        "reference_truth", "threads", "max_seconds", "mean_passes", "level"}},
  };
  return keys;
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw ConfigError(key, key + ": cannot parse '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key, key + ": expected true or false, got '" + text + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

// FNV-1a, 64 bit.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in, const std::string& base_dir = ".") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  std::map<std::string, std::string> kv;  // "section.key" or "key"
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (!detail::config_keys().at("").count(name)) throw ConfigError(name, "unknown key '" + name + "'");
      kv[name] = detail::trim(node.data());
      continue;
    }
    const auto sec = detail::config_keys().find(name);
    if (sec == detail::config_keys().end() || name.empty()) {
      throw ConfigError(name, "unknown section [" + name + "]");
    }
    for (const auto& [key, leaf] : node) {
      const std::string full = name + "." + key;
      if (!sec->second.count(key)) throw ConfigError(full, "unknown key '" + full + "'");
      kv[full] = detail::trim(leaf.data());
    }
  }

  RunConfig c;
  c.base_dir = base_dir;
  std::string canon;
  for (const auto& [k, v] : kv) canon += k + "=" + v + "\n";
  c.hash = detail::fnv1a_hex(canon);

  auto get = [&](const std::string& k) -> std::optional<std::string> {
    const auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  auto num = [&]<class T>(const std::string& k, T& out) {
    if (const auto v = get(k)) out = detail::parse_value<T>(k, *v);
  };

  num("seed", c.seed);
  num("model.p", c.p);
  if (c.p < 0 || c.p > kMaxLeaves) throw ConfigError("model.p", "model.p must lie in 1..64");

  if (const auto v = get("prior.kind")) {
    if (*v == "beta_splitting" || *v == "beta") {
      c.prior.kind = PriorKind::beta_splitting;
    } else if (*v == "poisson_dirichlet" || *v == "pd") {
      c.prior.kind = PriorKind::poisson_dirichlet;
    } else {
      throw ConfigError("prior.kind", "prior.kind must be beta_splitting or poisson_dirichlet");
    }
  }
  num("prior.beta", c.prior.beta);
  num("prior.theta", c.prior.theta);
  num("prior.alpha_pd", c.prior.alpha_pd);
  num("prior.edge_mean", c.prior.edge_mean);
  if (const auto v = get("sampler.lambda")) {
    if (get("prior.edge_mean")) throw ConfigError("sampler.lambda", "set either prior.edge_mean or sampler.lambda");
    const double lambda = detail::parse_value<double>("sampler.lambda", *v);
    if (!(lambda > 0.0)) throw ConfigError("sampler.lambda", "sampler.lambda must be positive");
    c.prior.edge_mean = 1.0 / lambda;
  }
  try {
    c.prior.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("prior", e.what());
  }

  if (const auto v = get("sampler.algo")) {
    if (*v == "mh") c.algo = Algo::mh;
    else if (*v == "hmc") c.algo = Algo::hmc;
    else throw ConfigError("sampler.algo", "sampler.algo must be mh or hmc");
  }
  if (const auto v = get("sampler.mode")) {
    if (*v == "binary") c.mh.mode = MhMode::binary;
    else if (*v == "multifurcating") c.mh.mode = MhMode::multifurcating;
    else throw ConfigError("sampler.mode", "sampler.mode must be binary or multifurcating");
  }
  // Iteration counts default per algorithm.
  long iterations = c.algo == Algo::mh ? c.mh.iterations : c.hmc.iterations;
  long burn_in = c.algo == Algo::mh ? c.mh.burn_in : c.hmc.burn_in;
  long thin = 1;
  num("sampler.iterations", iterations);
  num("sampler.burn_in", burn_in);
  num("sampler.thin", thin);
  c.mh.iterations = c.hmc.iterations = iterations;
  c.mh.burn_in = c.hmc.burn_in = burn_in;
  c.mh.thin = c.hmc.thin = thin;
  num("sampler.sigma_L", c.mh.sigma_l);
  num("sampler.epsilon", c.hmc.step_size);
  num("sampler.leapfrog_steps", c.hmc.leapfrog_steps);
  num("sampler.delta", c.hmc.delta);
  num("sampler.mass", c.hmc.mass);
  c.mh.prior = c.hmc.prior = c.prior;
  c.mh.seed = c.hmc.seed = c.seed;
  auto validate_sampler = [&] {
    try {
      if (c.algo == Algo::mh) c.mh.validate(); else c.hmc.validate();
    } catch (const ConfigError& e) {
      const std::string key = e.key() == "prior" ? "prior" : "sampler." + e.key();
      throw ConfigError(key, e.what());
    }
  };
  validate_sampler();

  auto path = [&](const std::string& k, std::string& out, bool must_exist) {
    const auto v = get(k);
    if (!v || v->empty()) return;
    std::filesystem::path pth(*v);
    if (pth.is_relative()) pth = std::filesystem::path(base_dir) / pth;
    out = pth.lexically_normal().string();
    if (must_exist && !std::filesystem::exists(out)) throw ConfigError(k, k + ": no such file " + out);
  };
  path("io.data", c.io.data, true);
  path("io.init", c.io.init, true);
  path("io.truth", c.io.truth, true);
  path("io.archive", c.io.archive, false);
  path("io.trace", c.io.trace, false);
  path("io.out_dir", c.io.out_dir, false);

  Scenario& s = c.scenario;
  s.p = c.p > 0 ? c.p : s.p;
  s.algo = c.algo;
  s.mh = c.mh;
  s.hmc = c.hmc;
  s.seed = c.seed;
  if (const auto v = get("scenario.sample_sizes")) {
    s.size_multiples.clear();
    for (const auto& x : detail::split_list(*v)) {
      s.size_multiples.push_back(detail::parse_value<int>("scenario.sample_sizes", x));
    }
  }
  if (const auto v = get("scenario.distributions")) {
    s.distributions.clear();
    for (const auto& x : detail::split_list(*v)) {
      try {
        s.distributions.push_back(GenDist::parse(x));
      } catch (const ConfigError& e) {
        throw ConfigError("scenario.distributions", e.what());
      }
    }
  }
  if (const auto v = get("scenario.truth_mode")) {
    if (*v == "resolved") s.truth_mode = TruthMode::resolved;
    else if (*v == "unresolved") s.truth_mode = TruthMode::unresolved;
    else if (*v == "equidistant") s.truth_mode = TruthMode::equidistant;
    else throw ConfigError("scenario.truth_mode", "scenario.truth_mode must be resolved, unresolved or equidistant");
  }
  num("scenario.drop", s.drop);
  if (const auto v = get("scenario.drop_mode")) {
    if (*v == "uniform") s.drop_mode = DropMode::uniform;
    else if (*v == "shortest") s.drop_mode = DropMode::shortest;
    else throw ConfigError("scenario.drop_mode", "scenario.drop_mode must be uniform or shortest");
  }
  num("scenario.replicates", s.replicates);
  if (const auto v = get("scenario.fixed_truth")) s.fixed_truth = detail::parse_bool("scenario.fixed_truth", *v);
  if (const auto v = get("scenario.reference_truth")) {
    if (detail::parse_bool("scenario.reference_truth", *v)) {
      if (c.p != 0 && c.p != 10) throw ConfigError("scenario.reference_truth", "the reference truth has p = 10");
      s.p = 10;
      s.truth = reference_truth();
    }
  }
  num("scenario.threads", s.threads);
  num("scenario.max_seconds", s.max_seconds);
  num("scenario.mean_passes", s.mean_passes);
  num("scenario.level", s.level);
  return c;
}

inline RunConfig read_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_run_config(in, dir.empty() ? "." : dir.string());
}

// Checks that need the whole scenario; keys are reported as scenario.<field>.
inline void validate_scenario(const RunConfig& c) {
  try {
    c.scenario.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.key() == "prior" ? "prior" : "scenario." + e.key(), e.what());
  }
}

}  // namespace ultratree
