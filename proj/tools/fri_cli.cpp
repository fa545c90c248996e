// Command-line front end over the C API.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "fri/fri.h"

namespace {

enum Exit {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kCache = 3,
  kSolve = 4,
  kBudget = 5,
  kNoBracket = 6,
  kIo = 7,
  kPadding = 8,
};

int exit_code(fri_status s) {
  switch (s) {
    case FRI_OK: return kOk;
    case FRI_ERR_INVALID:
    case FRI_ERR_DIMENSION:
    case FRI_ERR_UNKNOWN_COMMAND: return kUsage;
    case FRI_ERR_CACHE_MISSING: return kCache;
    case FRI_ERR_SOLVE: return kSolve;
    case FRI_ERR_BUDGET: return kBudget;
    case FRI_ERR_NO_BRACKET: return kNoBracket;
    case FRI_ERR_IO:
    case FRI_ERR_FORMAT: return kIo;
    case FRI_ERR_PADDING: return kPadding;
    case FRI_ERR_INTERNAL: return kInternal;
  }
  return kInternal;
}

std::string sha256_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, std::size_t(f.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Flat key = value file; sections are rejected.
std::map<std::string, std::string> read_config(const std::string& path) {
  boost::property_tree::ptree pt;
  boost::property_tree::ini_parser::read_ini(path, pt);
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : pt) {
    if (!v.empty()) throw std::invalid_argument("config sections are not supported ([" + k + "])");
    out[k] = v.data();
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finitary random interlacement experiments"};
  app.require_subcommand(0, 1);
  std::string config, out_dir = "out";
  std::uint64_t seed = 0;
  int workers = 1;
  bool mc_fallback = false;
  std::vector<std::string> sets;

  std::vector<std::string> names;
  for (const char* p = fri_command_names(); *p; p += std::strlen(p) + 1) names.emplace_back(p);
  std::map<std::string, CLI::App*> subs;
  for (const auto& n : names) {
    auto* s = app.add_subcommand(n);
    s->add_option("--config", config, "flat key = value parameter file");
    s->add_option("--seed", seed, "master seed (overrides the config)");
    s->add_option("--workers", workers, "parallel replicas")->check(CLI::PositiveNumber);
    s->add_option("--out", out_dir, "output directory");
    s->add_flag("--mc-fallback", mc_fallback, "build missing green tables in memory and allow MC capacity");
    s->add_option("--set", sets, "extra key=value parameter (repeatable)");
    subs[n] = s;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  std::string command;
  for (const auto& [n, s] : subs)
    if (s->parsed()) command = n;
  if (command.empty()) {
    std::cerr << app.help();
    return kUsage;
  }

  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  try {
    if (!config.empty()) {
      if (!std::filesystem::exists(config)) {
        std::cerr << "error: config file not found: " << config << '\n';
        return kUsage;
      }
      for (const auto& [k, v] : read_config(config)) params[k] = v;
    }
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      params[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  if (subs[command]->count("--seed")) params["seed"] = std::to_string(seed);

  fri_context_options opt{nullptr, workers, mc_fallback ? 1 : 0};
  std::string cache_dir;
  if (params.contains("cache_dir")) cache_dir = params["cache_dir"].get<std::string>();
  if (!cache_dir.empty()) opt.cache_dir = cache_dir.c_str();
  fri_context* ctx = nullptr;
  if (fri_context_new(&opt, &ctx) != FRI_OK) {
    std::cerr << "error: cannot create context\n";
    return kInternal;
  }
  const std::string started = utc_now();
  char* result = nullptr;
  const fri_status st = fri_run_command(ctx, command.c_str(), params.dump().c_str(), out_dir.c_str(), &result);
  if (st != FRI_OK) {
    std::cerr << "error (" << fri_status_name(st) << "): " << fri_last_error(ctx) << '\n';
    fri_context_free(ctx);
    return exit_code(st);
  }
  const auto res = nlohmann::ordered_json::parse(result);
  fri_string_free(result);
  fri_context_free(ctx);

  try {
    nlohmann::ordered_json m;
    m["command"] = command;
    m["run_id"] = res["run_id"];
    m["parameters"] = res["params"];
    m["seed"] = res["params"].value("seed", nlohmann::ordered_json());
    m["workers"] = workers;
    m["mc_fallback"] = mc_fallback;
    m["code_version"] = fri_version();
    m["rng"] = "philox4x32-10, key = seed, streams addressed by replicate index";
    m["started"] = started;
    m["finished"] = utc_now();
    auto& outs = m["outputs"] = nlohmann::ordered_json::array();
    for (const auto& f : res["outputs"]) {
      const std::string name = f.get<std::string>();
      outs.push_back({{"file", name}, {"sha256", sha256_file(std::filesystem::path(out_dir) / name)}});
    }
    m["summary"] = res["summary"];
    std::ofstream mf(std::filesystem::path(out_dir) / "manifest.json", std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write the manifest");
    mf << m.dump(2) << '\n';
    std::cout << res["summary"].dump() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
