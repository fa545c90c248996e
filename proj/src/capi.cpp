#include "fri/fri.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>

#include "commands.hpp"
#include "fri/capacity.hpp"
#include "fri/cluster.hpp"
#include "fri/critical.hpp"
#include "fri/errors.hpp"
#include "fri/sampler.hpp"
#include "fri/scaling.hpp"

struct fri_context {
  std::string cache_dir;
  int workers = 1;
  bool mc_fallback = false;
  fri::GreenCache cache;
  std::string error;
};

struct fri_sample {
  fri::FriSample s;
};

namespace {

fri_status classify() {
  try {
    throw;
  } catch (const fri::UnknownCommand&) {
    return FRI_ERR_UNKNOWN_COMMAND;
  } catch (const fri::ConfigError&) {
    return FRI_ERR_INVALID;
  } catch (const fri::PaddingError&) {
    return FRI_ERR_PADDING;
  } catch (const fri::DimensionError&) {
    return FRI_ERR_DIMENSION;
  } catch (const fri::CacheMissing&) {
    return FRI_ERR_CACHE_MISSING;
  } catch (const fri::SolveError&) {
    return FRI_ERR_SOLVE;
  } catch (const fri::BudgetError&) {
    return FRI_ERR_BUDGET;
  } catch (const fri::NoBracketError&) {
    return FRI_ERR_NO_BRACKET;
  } catch (const fri::IoError&) {
    return FRI_ERR_IO;
  } catch (const fri::FormatError&) {
    return FRI_ERR_FORMAT;
  } catch (const std::invalid_argument&) {
    return FRI_ERR_INVALID;
  } catch (...) {
    return FRI_ERR_INTERNAL;
  }
}

template <typename F>
fri_status guard(fri_context* ctx, F&& f) {
  if (!ctx) return FRI_ERR_INVALID;
  try {
    f();
    ctx->error.clear();
    return FRI_OK;
  } catch (const std::exception& e) {
    ctx->error = e.what();
    return classify();
  } catch (...) {
    ctx->error = "unknown failure";
    return FRI_ERR_INTERNAL;
  }
}

fri::KillMean kill_mean(double T) {
  if (std::isinf(T) && T > 0) return fri::KillMean::free_walk();
  if (!(T > 0)) throw std::invalid_argument("T must be positive or infinite");
  return fri::KillMean::killed(T);
}

void check_dim(int d) {
  if (d < 1 || d > fri::kMaxDim) throw fri::DimensionError("dimension out of range");
}

std::vector<fri::Point> read_points(int d, const int32_t* pts, size_t n) {
  check_dim(d);
  if (n > 0 && !pts) throw std::invalid_argument("null point buffer");
  std::vector<fri::Point> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(fri::Point::from(pts + i * size_t(d), d));
  return out;
}

// Missing tables are built in memory (never persisted) when the fallback is on.
std::shared_ptr<const fri::GreenTable> table(fri_context* ctx, int d, fri::KillMean km) {
  try {
    return ctx->cache.get(d, km);
  } catch (const fri::CacheMissing&) {
    if (!ctx->mc_fallback) throw;
  }
  auto t = std::make_shared<fri::GreenTable>(fri::build_green_quadrature(d, km, fri::default_green_radius(d)));
  ctx->cache.put(t);
  return t;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

}  // namespace

extern "C" {

const char* fri_version(void) { return "1.0.0"; }

const char* fri_status_name(fri_status s) {
  switch (s) {
    case FRI_OK: return "ok";
    case FRI_ERR_INVALID: return "invalid argument";
    case FRI_ERR_DIMENSION: return "dimension error";
    case FRI_ERR_CACHE_MISSING: return "cache missing";
    case FRI_ERR_SOLVE: return "solve failure";
    case FRI_ERR_BUDGET: return "budget exhausted";
    case FRI_ERR_NO_BRACKET: return "no bracket";
    case FRI_ERR_IO: return "i/o error";
    case FRI_ERR_FORMAT: return "format error";
    case FRI_ERR_PADDING: return "padding error";
    case FRI_ERR_UNKNOWN_COMMAND: return "unknown command";
    case FRI_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

fri_status fri_context_new(const fri_context_options* opt, fri_context** out) {
  if (!out) return FRI_ERR_INVALID;
  *out = nullptr;
  try {
    auto c = std::make_unique<fri_context>();
    c->cache_dir = opt && opt->cache_dir ? opt->cache_dir : "green-cache";
    c->workers = opt && opt->workers > 0 ? opt->workers : 1;
    c->mc_fallback = opt && opt->mc_fallback;
    c->cache.set_dir(c->cache_dir);
    c->cache.set_allow_build(false);
    *out = c.release();
    return FRI_OK;
  } catch (...) {
    return FRI_ERR_INTERNAL;
  }
}

void fri_context_free(fri_context* ctx) { delete ctx; }

const char* fri_last_error(const fri_context* ctx) { return ctx ? ctx->error.c_str() : "null context"; }

void fri_string_free(char* s) { std::free(s); }

fri_status fri_scaling(fri_context* ctx, int d, double a, double* out) {
  return guard(ctx, [&] {
    if (!out) throw std::invalid_argument("null output");
    *out = fri::f_d(d, a);
  });
}

fri_status fri_green(fri_context* ctx, int d, double T, const int32_t* x, double* value) {
  return guard(ctx, [&] {
    if (!x || !value) throw std::invalid_argument("null argument");
    check_dim(d);
    *value = table(ctx, d, kill_mean(T))->value(fri::Point::from(x, d));
  });
}

fri_status fri_escape(fri_context* ctx, int d, double T, const int32_t* pts, size_t n, double* out) {
  return guard(ctx, [&] {
    if (n > 0 && !out) throw std::invalid_argument("null output");
    const auto A = read_points(d, pts, n);
    if (A.empty()) return;
    const auto e = fri::escape_exact(A, *table(ctx, d, kill_mean(T)));
    for (size_t i = 0; i < n; ++i) out[i] = e.at(A[i]);
  });
}

fri_status fri_capacity(fri_context* ctx, int d, double T, const int32_t* pts, size_t n, uint64_t seed,
                        double* value, double* stderr_out) {
  return guard(ctx, [&] {
    if (!value) throw std::invalid_argument("null output");
    const auto A = read_points(d, pts, n);
    const auto km = kill_mean(T);
    fri::CapacityBudget b;
    b.allow_mc_fallback = ctx->mc_fallback;
    b.workers = ctx->workers;
    const auto g = table(ctx, d, km);
    const auto c = fri::capacity(A, km, fri::CapMethod::last_exit_solve, g.get(), b, fri::RngStream(seed));
    *value = c.value;
    if (stderr_out) *stderr_out = c.stderr_;
  });
}

fri_status fri_sample_window(fri_context* ctx, const fri_window_config* cfg, fri_sample** out) {
  return guard(ctx, [&] {
    if (!cfg || !out) throw std::invalid_argument("null argument");
    *out = nullptr;
    check_dim(cfg->d);
    fri::FriConfig c;
    c.d = cfg->d;
    c.u = cfg->u;
    c.T = cfg->T;
    fri::Point corner(cfg->d);
    for (int i = 0; i < cfg->d; ++i) corner[i] = cfg->window_lo;
    c.window = fri::plain_box(corner, cfg->window_side);
    c.padding_radius = cfg->padding;
    c.report_tol = cfg->report_tol > 0 ? cfg->report_tol : 1e-3;
    c.u_top = cfg->u_top;
    c.seed = cfg->seed;
    c.validate();
    auto s = std::make_unique<fri_sample>();
    s->s = fri::sample_window(c, ctx->workers);
    *out = s.release();
  });
}

void fri_sample_free(fri_sample* s) { delete s; }

fri_status fri_sample_count(const fri_sample* s, size_t* n) {
  if (!s || !n) return FRI_ERR_INVALID;
  *n = s->s.trajectories.size();
  return FRI_OK;
}

fri_status fri_sample_trajectory(const fri_sample* s, size_t i, int32_t* start, double* label, uint64_t* length) {
  if (!s || i >= s->s.trajectories.size()) return FRI_ERR_INVALID;
  const auto& t = s->s.trajectories[i];
  if (start)
    for (int k = 0; k < t.path.start.d; ++k) start[k] = t.path.start[k];
  if (label) *label = t.label;
  if (length) *length = t.path.length();
  return FRI_OK;
}

fri_status fri_sample_padding(const fri_sample* s, int* padding, double* bound) {
  if (!s) return FRI_ERR_INVALID;
  if (padding) *padding = s->s.report.padding;
  if (bound) *bound = s->s.report.bound;
  return FRI_OK;
}

fri_status fri_sample_crossing(fri_context* ctx, const fri_sample* s, int32_t N, int* out) {
  return guard(ctx, [&] {
    if (!s || !out) throw std::invalid_argument("null argument");
    *out = fri::crossing(s->s, N) ? 1 : 0;
  });
}

fri_status fri_sample_save(fri_context* ctx, const fri_sample* s, const char* path) {
  return guard(ctx, [&] {
    if (!s || !path) throw std::invalid_argument("null argument");
    fri::save_sample(s->s, std::string(path));
  });
}

fri_status fri_sample_load(fri_context* ctx, const char* path, fri_sample** out) {
  return guard(ctx, [&] {
    if (!path || !out) throw std::invalid_argument("null argument");
    *out = nullptr;
    auto s = std::make_unique<fri_sample>();
    s->s = fri::load_sample(std::string(path));
    *out = s.release();
  });
}

int fri_sample_equal(const fri_sample* a, const fri_sample* b) { return a && b && a->s == b->s; }

fri_status fri_crossing_probability(fri_context* ctx, int d, double u, double T, int32_t N, uint64_t reps,
                                    uint64_t seed, double* p, double* stderr_out) {
  return guard(ctx, [&] {
    if (!p) throw std::invalid_argument("null output");
    check_dim(d);
    fri::CrossingOptions o;
    o.workers = ctx->workers;
    const auto e = fri::crossing_probability(d, u, T, N, reps, fri::RngStream(seed), o);
    *p = e.value;
    if (stderr_out) *stderr_out = e.stderr_;
  });
}

fri_status fri_run_command(fri_context* ctx, const char* command, const char* params_json, const char* out_dir,
                           char** result_json) {
  return guard(ctx, [&] {
    if (!command || !out_dir || !result_json) throw std::invalid_argument("null argument");
    *result_json = nullptr;
    fri::RawParams raw;
    if (params_json && *params_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(params_json);
      } catch (const nlohmann::json::exception& e) {
        throw fri::ConfigError(std::string("parameters are not valid JSON: ") + e.what());
      }
      if (!j.is_object()) throw fri::ConfigError("parameters must be a JSON object");
      for (const auto& [k, v] : j.items()) raw[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    if (!raw.count("cache_dir")) raw["cache_dir"] = ctx->cache_dir;
    fri::CommandEnv env;
    env.out_dir = out_dir;
    env.workers = ctx->workers;
    env.mc_fallback = ctx->mc_fallback;
    const fri::CommandResult r = fri::run_command(command, raw, env);
    nlohmann::ordered_json j;
    j["command"] = r.command;
    j["run_id"] = r.run_id;
    j["params"] = r.params;
    j["outputs"] = r.outputs;
    j["summary"] = r.summary;
    *result_json = dup(j.dump());
  });
}

const char* fri_command_names(void) {
  static const std::string names = [] {
    std::string s;
    for (const auto& n : fri::command_names()) {
      s += n;
      s += '\0';
    }
    s += '\0';
    return s;
  }();
  return names.c_str();
}

}  // extern "C"
