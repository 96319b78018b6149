#include "mcrec/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mcrec/rng.hpp"

namespace mcrec {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || v.empty()) {
    throw ParseError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || v.empty()) {
    throw ParseError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || v.empty()) {
    throw ParseError("key '" + key + "': expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(to_double(key, trim(part)));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "interactions") interactions = value;
  else if (key == "kg") kg = value;
  else if (key == "out") out = value;
  else if (key == "separator") separator = value;
  else if (key == "rating_threshold") rating_threshold = to_double(key, value);
  else if (key == "train_ratio") train_ratio = to_double(key, value);
  else if (key == "dim") model.dim = to_int(key, value);
  else if (key == "manifolds") model.manifolds = to_int(key, value);
  else if (key == "depth") model.depth = to_int(key, value);
  else if (key == "sample_size") model.sample_size = to_int(key, value);
  else if (key == "aggregator") model.aggregator = parse_aggregator(value);
  else if (key == "margin") model.margin = parse_margin(value);
  else if (key == "margin_c") model.margin_c = to_double(key, value);
  else if (key == "leaky_slope") model.leaky_slope = to_double(key, value);
  else if (key == "taylor_eps") model.taylor_eps = to_double(key, value);
  else if (key == "init_std") model.init_std = to_double(key, value);
  else if (key == "kappa_init") model.kappa_init = to_double_list(key, value);
  else if (key == "lr") train.lr = to_double(key, value);
  else if (key == "lr_kappa") train.lr_kappa = to_double(key, value);
  else if (key == "batch") train.batch = to_int(key, value);
  else if (key == "max_epochs") train.max_epochs = to_int(key, value);
  else if (key == "patience") train.patience = to_int(key, value);
  else if (key == "seed") train.seed = to_u64(key, value);
  else if (key == "workers") train.workers = to_int(key, value);
  else if (key == "eval_negatives") train.eval_negatives = to_int(key, value);
  else throw ParseError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  model.validate();
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw ContractError("train_ratio must lie in (0, 1)");
  }
  if (train.lr < 0.0 || train.lr_kappa < 0.0) {
    throw ContractError("learning rates must be >= 0");
  }
  if (train.batch < 1) throw ContractError("batch must be positive");
  if (train.max_epochs < 1) throw ContractError("max_epochs must be positive");
  if (train.patience < 1) throw ContractError("patience must be positive");
  if (train.workers < 1) throw ContractError("workers must be positive");
  if (train.eval_negatives < 1) throw ContractError("eval_negatives must be positive");
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["interactions"] = interactions;
  kv["kg"] = kg;
  kv["out"] = out;
  kv["separator"] = separator;
  kv["rating_threshold"] = fmt(rating_threshold);
  kv["train_ratio"] = fmt(train_ratio);
  kv["dim"] = std::to_string(model.dim);
  kv["manifolds"] = std::to_string(model.manifolds);
  kv["depth"] = std::to_string(model.depth);
  kv["sample_size"] = std::to_string(model.sample_size);
  kv["aggregator"] = to_string(model.aggregator);
  kv["margin"] = to_string(model.margin);
  kv["margin_c"] = fmt(model.margin_c);
  kv["leaky_slope"] = fmt(model.leaky_slope);
  kv["taylor_eps"] = fmt(model.taylor_eps);
  kv["init_std"] = fmt(model.init_std);
  std::string kinit;
  for (std::size_t i = 0; i < model.kappa_init.size(); ++i) {
    if (i) kinit += ',';
    kinit += fmt(model.kappa_init[i]);
  }
  kv["kappa_init"] = kinit;
  kv["lr"] = fmt(train.lr);
  kv["lr_kappa"] = fmt(train.lr_kappa);
  kv["batch"] = std::to_string(train.batch);
  kv["max_epochs"] = std::to_string(train.max_epochs);
  kv["patience"] = std::to_string(train.patience);
  kv["seed"] = std::to_string(train.seed);
  kv["workers"] = std::to_string(train.workers);
  kv["eval_negatives"] = std::to_string(train.eval_negatives);

  std::string out_text;
  for (const auto& [k, v] : kv) {
    out_text += k;
    out_text += '=';
    out_text += v;
    out_text += '\n';
  }
  return out_text;
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical()); }

std::string RunConfig::hash_header() const {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "# config_hash=%016llx",
                static_cast<unsigned long long>(hash()));
  return buf;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path, line_no, "expected key=value");
    }
    try {
      cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      throw ParseError(path, line_no, e.what());
    }
  }
  return cfg;
}

}  // namespace mcrec
