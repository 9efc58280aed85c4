#pragma once

// Command-line front end. Each command merges defaults, an optional JSON
// config file and flags (flags win), runs the matching library operation and
// writes its outputs plus a manifest next to the primary output.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fppgeo/analysis.hpp"
#include "fppgeo/environment.hpp"
#include "fppgeo/error.hpp"
#include "fppgeo/geodesic_graph.hpp"
#include "fppgeo/geodesics.hpp"
#include "fppgeo/lattice.hpp"
#include "fppgeo/manifest.hpp"
#include "fppgeo/modification.hpp"
#include "fppgeo/parallel.hpp"
#include "fppgeo/report.hpp"

namespace fppgeo::cli {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- typed config access ---------------------------------------------------

namespace detail {

inline Error key_error(const std::string& key, const std::string& what) { return Error(ErrorCode::kConfig, key + ": " + what); }

inline std::int64_t get_int(const json& c, const std::string& key, std::int64_t min) {
  const json& v = c.at(key);
  if (!v.is_number_integer()) throw key_error(key, "expected an integer, got " + v.dump());
  const auto x = v.get<std::int64_t>();
  if (x < min) throw key_error(key, "must be >= " + std::to_string(min) + ", got " + std::to_string(x));
  return x;
}

inline double get_double(const json& c, const std::string& key) {
  const json& v = c.at(key);
  if (!v.is_number()) throw key_error(key, "expected a number, got " + v.dump());
  return v.get<double>();
}

inline bool get_bool(const json& c, const std::string& key) {
  const json& v = c.at(key);
  if (!v.is_boolean()) throw key_error(key, "expected true or false, got " + v.dump());
  return v.get<bool>();
}

inline std::string get_string(const json& c, const std::string& key) {
  const json& v = c.at(key);
  if (!v.is_string()) throw key_error(key, "expected a string, got " + v.dump());
  return v.get<std::string>();
}

inline std::vector<double> get_doubles(const json& c, const std::string& key) {
  const json& v = c.at(key);
  if (!v.is_array()) throw key_error(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw key_error(key, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::vector<Coord> get_ints(const json& c, const std::string& key) {
  const json& v = c.at(key);
  if (!v.is_array()) throw key_error(key, "expected an array of integers");
  std::vector<Coord> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) throw key_error(key, "expected an array of integers");
    out.push_back(x.get<Coord>());
  }
  return out;
}

/// "uniform:0,1" or {kind, params} -> canonical {kind, params}.
inline json canonical_dist(const json& v) {
  try {
    DistributionSpec d;
    if (v.is_string()) {
      d = DistributionSpec::parse(v.get<std::string>());
    } else if (v.is_object()) {
      d = DistributionSpec::from_kind(v.at("kind").get<std::string>(), v.at("params").get<std::vector<double>>());
    } else {
      throw key_error("dist", "expected a string like uniform:0,1 or an object {kind, params}");
    }
    return to_json(d);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw key_error("dist", e.what());
  } catch (const json::exception& e) {
    throw key_error("dist", e.what());
  }
}

inline DistributionSpec dist_of(const json& c) {
  const json& d = c.at("dist");
  return DistributionSpec::from_kind(d.at("kind").get<std::string>(), d.at("params").get<std::vector<double>>());
}

/// "1,0", [1,0], "e1" -> primitive integer array.
inline json canonical_theta(const json& v, int dim) {
  try {
    std::vector<double> comps;
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s.size() >= 2 && s[0] == 'e') {
        const int axis = std::stoi(s.substr(1));
        if (axis < 1 || axis > dim) throw key_error("theta", "axis out of range in '" + s + "'");
        comps.assign(dim, 0.0);
        comps[axis - 1] = 1.0;
      } else {
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) comps.push_back(std::stod(tok));
      }
    } else if (v.is_array()) {
      comps = v.get<std::vector<double>>();
    } else {
      throw key_error("theta", "expected a string like 1,0 or an array");
    }
    if (static_cast<int>(comps.size()) != dim)
      throw key_error("theta", "has " + std::to_string(comps.size()) + " components, dim is " + std::to_string(dim));
    const IntegerDirection t = normalize_direction(std::span<const double>(comps));
    std::vector<Coord> out(dim);
    for (int i = 0; i < dim; ++i) out[i] = t[i];
    return out;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw key_error("theta", e.what());
  } catch (const std::exception& e) {
    throw key_error("theta", std::string("cannot parse: ") + e.what());
  }
}

inline IntegerDirection theta_of(const json& c) {
  return IntegerDirection(Vertex::from_span(c.at("theta").get<std::vector<Coord>>()));
}

}  // namespace detail

// ---- commands ----------------------------------------------------------------

/// What a command produced.
struct CommandResult {
  std::vector<fs::path> outputs;  // primary output first
  std::vector<std::uint64_t> seeds;
};

struct Command {
  std::string name;
  std::string help;
  json defaults;
  std::function<json(json)> resolve;  // fills derived defaults, validates, returns canonical config
  std::function<CommandResult(const json&, int jobs)> run;
};

namespace detail {

inline std::vector<std::uint64_t> seed_list(const json& c) {
  const auto first = static_cast<std::uint64_t>(get_int(c, "seed", 0));
  const auto n = get_int(c, "seeds", 1);
  std::vector<std::uint64_t> s;
  for (std::int64_t k = 0; k < n; ++k) s.push_back(first + static_cast<std::uint64_t>(k));
  return s;
}

inline json base_defaults(std::int64_t box) {
  return {{"dim", 2},       {"box", box},           {"dist", "uniform:0,1"}, {"seed", 1},
          {"seeds", 1},     {"theta", "e1"},        {"alpha", nullptr},      {"format", "csv"},
          {"out", nullptr}};
}

/// Shared resolution: dist, theta, dim, box, seeds, format, out.
inline json resolve_common(json c, const std::string& command) {
  const auto dim = get_int(c, "dim", 1);
  if (dim > kMaxDim) throw key_error("dim", "must be <= " + std::to_string(kMaxDim));
  c["dist"] = canonical_dist(c.at("dist"));
  if (c.contains("theta")) c["theta"] = canonical_theta(c.at("theta"), static_cast<int>(dim));
  if (c.contains("box")) get_int(c, "box", 3);
  if (c.contains("seed")) get_int(c, "seed", 0);
  if (c.contains("seeds")) get_int(c, "seeds", 1);
  if (c.contains("format")) parse_format(get_string(c, "format"));
  if (c.at("out").is_null()) {
    const std::string ext = c.contains("format") ? get_string(c, "format") : "csv";
    c["out"] = command + "." + ext;
  }
  get_string(c, "out");
  return c;
}

inline void default_int(json& c, const std::string& key, std::int64_t value) {
  if (c.at(key).is_null()) c[key] = value;
}

inline Box box_of(const json& c) {
  return Box::from_side(static_cast<int>(get_int(c, "dim", 1)), get_int(c, "box", 3));
}

inline WeightEnvironment env_of(const json& c, std::uint64_t seed) {
  return WeightEnvironment(static_cast<int>(get_int(c, "dim", 1)), dist_of(c), seed);
}

inline void write_report(const json& c, const Report& r) {
  std::ostringstream os;
  export_report(os, r, get_string(c, "format"));
  write_file(get_string(c, "out"), os.str());
}

/// One report per seed, merged in seed order.
template <typename F>
CommandResult per_seed_report(const json& c, int jobs, F&& one) {
  CommandResult res;
  res.seeds = seed_list(c);
  std::vector<Report> parts(res.seeds.size());
  parallel_for(static_cast<std::int64_t>(res.seeds.size()), jobs, [&](std::int64_t k) { parts[k] = one(res.seeds[k]); });
  write_report(c, merge_reports(parts));
  res.outputs.push_back(get_string(c, "out"));
  return res;
}

inline DistanceField solve_plane(const json& c, std::uint64_t seed) {
  return solve(env_of(c, seed), box_of(c), TargetSpec::lattice_plane(theta_of(c), get_int(c, "alpha", INT64_MIN)),
               Topology::kOpen);
}

inline fs::path sibling(const fs::path& primary, const std::string& suffix) {
  return primary.parent_path() / (primary.stem().string() + suffix);
}

}  // namespace detail

inline std::vector<Command> commands() {
  using namespace detail;
  std::vector<Command> cmds;

  {
    json d = base_defaults(0);
    d.erase("box");
    d.erase("theta");
    d.erase("alpha");
    d["seeds"] = 10;
    d["radii"] = {25, 50};
    d["grid"] = 64;
    d["box_radius"] = nullptr;
    d["residual"] = false;
    cmds.push_back({"shape", "estimate the limit shape along a direction grid", d,
                    [](json c) {
                      c = resolve_common(std::move(c), "shape");
                      const auto radii = get_doubles(c, "radii");
                      if (radii.empty()) throw key_error("radii", "must not be empty");
                      get_int(c, "grid", 1);
                      if (!c.at("box_radius").is_null()) get_int(c, "box_radius", 1);
                      if (get_bool(c, "residual") && radii.size() < 3) throw key_error("residual", "needs at least three radii");
                      return c;
                    },
                    [](const json& c, int jobs) {
                      ShapeOptions opts;
                      opts.grid_size = static_cast<int>(get_int(c, "grid", 1));
                      if (!c.at("box_radius").is_null()) opts.box_radius = get_int(c, "box_radius", 1);
                      opts.jobs = jobs;
                      const auto seed = static_cast<std::uint64_t>(get_int(c, "seed", 0));
                      const auto n = get_int(c, "seeds", 1);
                      const auto env = env_of(c, seed);
                      const auto radii = get_doubles(c, "radii");
                      Report r = to_report(estimate_shape(env, radii, n, opts));
                      if (get_bool(c, "residual")) r = merge_reports({r, to_report(shape_residual(env, radii, n, opts), seed)});
                      write_report(c, r);
                      return CommandResult{{get_string(c, "out")}, seed_list(c)};
                    }});
  }

  {
    json d = base_defaults(201);
    d.erase("seeds");
    d.erase("format");
    cmds.push_back({"graph", "build the geodesic graph toward a lattice hyperplane", d,
                    [](json c) {
                      c = resolve_common(std::move(c), "graph");
                      default_int(c, "alpha", get_int(c, "box", 3) / 4);
                      get_int(c, "alpha", INT64_MIN);
                      return c;
                    },
                    [](const json& c, int) {
                      const auto seed = static_cast<std::uint64_t>(get_int(c, "seed", 0));
                      const GeodesicGraph g = build_graph(solve_plane(c, seed));
                      const fs::path out = get_string(c, "out");
                      std::ostringstream os;
                      write_graph_csv(os, g);
                      write_file(out, os.str());
                      const fs::path summary = sibling(out, ".summary.json");
                      write_file(summary, graph_summary_json(g).dump(2) + "\n");
                      return CommandResult{{out, summary}, {seed}};
                    }});
  }

  {
    json d = base_defaults(101);
    d["window"] = nullptr;
    d["pad"] = nullptr;
    cmds.push_back({"busemann", "fit the Busemann increment vector on a window", d,
                    [](json c) {
                      c = resolve_common(std::move(c), "busemann");
                      const auto side = get_int(c, "box", 3);
                      default_int(c, "alpha", side / 3);
                      default_int(c, "window", side / 5);
                      get_int(c, "alpha", INT64_MIN);
                      get_int(c, "window", 2);
                      if (!c.at("pad").is_null()) get_int(c, "pad", 0);
                      return c;
                    },
                    [](const json& c, int jobs) {
                      return per_seed_report(c, jobs, [&](std::uint64_t seed) {
                        const auto field = solve_plane(c, seed);
                        const Box window = Box::from_side(field.box().dim(), get_int(c, "window", 2));
                        std::optional<Coord> pad;
                        if (!c.at("pad").is_null()) pad = get_int(c, "pad", 0);
                        return to_report(estimate_busemann_vector(field, window, pad), static_cast<std::int64_t>(seed));
                      });
                    }});
  }

  {
    json d = base_defaults(301);
    d["window"] = nullptr;
    d["k_grid"] = nullptr;
    cmds.push_back({"backward", "backward-cluster size and depth tails", d,
                    [](json c) {
                      c = resolve_common(std::move(c), "backward");
                      const auto side = get_int(c, "box", 3);
                      default_int(c, "alpha", side / 3);
                      default_int(c, "window", side / 3);
                      get_int(c, "alpha", INT64_MIN);
                      get_int(c, "window", 1);
                      if (!c.at("k_grid").is_null()) get_ints(c, "k_grid");
                      return c;
                    },
                    [](const json& c, int jobs) {
                      return per_seed_report(c, jobs, [&](std::uint64_t seed) {
                        const GeodesicGraph g = build_graph(solve_plane(c, seed));
                        const Box window = Box::from_side(g.box().dim(), get_int(c, "window", 1));
                        std::vector<Index> k;
                        if (!c.at("k_grid").is_null()) k = get_ints(c, "k_grid");
                        return to_report(backward_tail(g, window, k), static_cast<std::int64_t>(seed));
                      });
                    }});
  }

  {
    json d = base_defaults(101);
    d["levels"] = {0};
    d["sample_level"] = nullptr;
    cmds.push_back({"crossings", "count returns of forward paths behind hyperplane levels", d,
                    [](json c) {
                      c = resolve_common(std::move(c), "crossings");
                      const auto side = get_int(c, "box", 3);
                      default_int(c, "alpha", side / 4);
                      default_int(c, "sample_level", -(side / 4));
                      get_int(c, "alpha", INT64_MIN);
                      get_int(c, "sample_level", INT64_MIN);
                      get_doubles(c, "levels");
                      return c;
                    },
                    [](const json& c, int jobs) {
                      return per_seed_report(c, jobs, [&](std::uint64_t seed) {
                        const GeodesicGraph g = build_graph(solve_plane(c, seed));
                        const Box region = Box::from_side(g.box().dim(), std::max<Coord>(1, get_int(c, "box", 3) / 2));
                        const auto samples = hyperplane_vertices(theta_of(c), get_int(c, "sample_level", INT64_MIN), region);
                        if (samples.empty()) throw key_error("sample_level", "no lattice points on that level near the centre");
                        return to_report(crossing_counts(g, theta_of(c), get_doubles(c, "levels"), samples),
                                         static_cast<std::int64_t>(seed));
                      });
                    }});
  }

  {
    json d = base_defaults(101);
    d["levels"] = {-5, 0, 5};
    d["window"] = nullptr;
    cmds.push_back({"radii", "l1 diameters of component intersections with hyperplanes", d,
                    [](json c) {
                      c = resolve_common(std::move(c), "radii");
                      const auto side = get_int(c, "box", 3);
                      default_int(c, "alpha", side / 3);
                      default_int(c, "window", side / 2);
                      get_int(c, "alpha", INT64_MIN);
                      get_int(c, "window", 1);
                      get_ints(c, "levels");
                      return c;
                    },
                    [](const json& c, int jobs) {
                      return per_seed_report(c, jobs, [&](std::uint64_t seed) {
                        const GeodesicGraph g = build_graph(solve_plane(c, seed));
                        const Box window = Box::from_side(g.box().dim(), get_int(c, "window", 1));
                        const auto lv = get_ints(c, "levels");
                        return to_report(intersection_radii(g, theta_of(c), std::vector<Coord>(lv.begin(), lv.end()), window),
                                         static_cast<std::int64_t>(seed));
                      });
                    }});
  }

  {
    json d = base_defaults(64);
    d["alpha"] = 0;
    cmds.push_back({"masstransport", "progenitor mass-transport balance on a torus", d,
                    [](json c) {
                      c = resolve_common(std::move(c), "masstransport");
                      get_int(c, "alpha", INT64_MIN);
                      return c;
                    },
                    [](const json& c, int jobs) {
                      return per_seed_report(c, jobs, [&](std::uint64_t seed) {
                        const int dim = static_cast<int>(get_int(c, "dim", 1));
                        const Coord L = get_int(c, "box", 3);
                        Vertex periods(dim), lo(dim), hi(dim);
                        for (int i = 0; i < dim; ++i) {
                          periods[i] = L;
                          hi[i] = L - 1;
                        }
                        const auto env = env_of(c, seed).with_torus(periods);
                        const auto field = solve(env, Box(lo, hi), TargetSpec::lattice_plane(theta_of(c), get_int(c, "alpha", INT64_MIN)),
                                                 Topology::kTorus);
                        return to_report(mass_transport_balance(build_graph(field), theta_of(c)), static_cast<std::int64_t>(seed));
                      });
                    }});
  }

  {
    json d = {{"dim", 2},        {"dist", "uniform:0,1"},
              {"seed_range", {1, 11}},
              {"theta", "e1"},   {"N_list", {8, 12}},
              {"M_rule", {{"scale", 0.25}, {"offset", 2.0}}},
              {"M_prime", 3},    {"epsilon", 0.25},
              {"delta", 0.1},    {"mode", "bounded"},
              {"pad", 0},        {"alpha_offset", 1},
              {"timing", false}, {"out", nullptr},
              {"seed", nullptr}, {"seeds", nullptr}};
    cmds.push_back({"modify", "strip modification scan over seeds and N", d,
                    [](json c) {
                      if (!c.at("seed").is_null()) {
                        const auto s = get_int(c, "seed", 0);
                        const auto n = c.at("seeds").is_null() ? 1 : get_int(c, "seeds", 1);
                        c["seed_range"] = {s, s + n};
                      } else if (!c.at("seeds").is_null()) {
                        const auto s = get_ints(c, "seed_range").at(0);
                        c["seed_range"] = {s, s + get_int(c, "seeds", 1)};
                      }
                      c.erase("seed");
                      c.erase("seeds");
                      c = resolve_common(std::move(c), "modify");
                      const auto range = get_ints(c, "seed_range");
                      if (range.size() != 2 || range[0] < 0 || range[1] <= range[0])
                        throw key_error("seed_range", "expected [first, end) with end > first >= 0");
                      const auto Ns = get_ints(c, "N_list");
                      if (Ns.empty()) throw key_error("N_list", "must not be empty");
                      for (Coord n : Ns)
                        if (n < 1) throw key_error("N_list", "entries must be >= 1");
                      const json& rule = c.at("M_rule");
                      if (rule.is_number()) {
                        c["M_rule"] = {{"scale", 0.0}, {"offset", rule.get<double>()}};
                      } else if (!rule.is_object() || !rule.contains("scale") || !rule.contains("offset") || rule.size() != 2) {
                        throw key_error("M_rule", "expected a number or {scale, offset}");
                      }
                      get_double(c.at("M_rule"), "scale");
                      get_double(c.at("M_rule"), "offset");
                      get_int(c, "M_prime", 1);
                      if (!(get_double(c, "epsilon") > 0)) throw key_error("epsilon", "must be > 0");
                      if (!(get_double(c, "delta") > 0)) throw key_error("delta", "must be > 0");
                      const json& mode = c.at("mode");
                      if (mode.is_string()) {
                        if (mode.get<std::string>() != "bounded") throw key_error("mode", "expected \"bounded\" or {lambda}");
                      } else if (mode.is_object() && mode.contains("lambda")) {
                        for (const auto& [k, v] : mode.items())
                          if (k != "lambda" && k != "detour_bound") throw key_error("mode", "unknown field '" + k + "'");
                        get_double(mode, "lambda");
                        if (mode.contains("detour_bound")) get_double(mode, "detour_bound");
                      } else {
                        throw key_error("mode", "expected \"bounded\" or {lambda}");
                      }
                      get_int(c, "pad", 0);
                      get_int(c, "alpha_offset", 0);
                      get_bool(c, "timing");
                      return c;
                    },
                    [](const json& c, int jobs) {
                      ScanConfig sc;
                      sc.dim = static_cast<int>(get_int(c, "dim", 1));
                      sc.dist = dist_of(c);
                      const auto range = get_ints(c, "seed_range");
                      sc.seed_begin = static_cast<std::uint64_t>(range[0]);
                      sc.seed_end = static_cast<std::uint64_t>(range[1]);
                      sc.theta = theta_of(c);
                      sc.N_list = get_ints(c, "N_list");
                      sc.M_rule = {get_double(c.at("M_rule"), "scale"), get_double(c.at("M_rule"), "offset")};
                      sc.M_prime = get_int(c, "M_prime", 1);
                      sc.epsilon = get_double(c, "epsilon");
                      sc.delta = get_double(c, "delta");
                      const json& mode = c.at("mode");
                      if (mode.is_object()) {
                        std::optional<double> bound;
                        if (mode.contains("detour_bound")) bound = get_double(mode, "detour_bound");
                        sc.mode = ModificationMode::unbounded(get_double(mode, "lambda"), bound);
                      }
                      sc.pad = get_int(c, "pad", 0);
                      sc.alpha_offset = get_int(c, "alpha_offset", 0);
                      sc.timing = get_bool(c, "timing");
                      const auto rows = run_scan(sc, jobs);
                      const fs::path out = get_string(c, "out");
                      std::ostringstream os;
                      write_scan_csv(os, rows);
                      write_file(out, os.str());
                      const ScanSummary s = summarize_scan(rows);
                      const json summary = {{"trials", s.trials},
                                            {"event_passes", s.event_passes},
                                            {"severed_given_event", s.severed_given_event},
                                            {"event_frequency", s.event_frequency},
                                            {"conditional_severing_rate",
                                             std::isnan(s.conditional_severing_rate) ? json(nullptr)
                                                                                     : json(s.conditional_severing_rate)}};
                      const fs::path sp = sibling(out, ".summary.json");
                      write_file(sp, summary.dump(2) + "\n");
                      CommandResult res{{out, sp}, {}};
                      for (auto s0 = sc.seed_begin; s0 < sc.seed_end; ++s0) res.seeds.push_back(s0);
                      return res;
                    }});
  }
  return cmds;
}

// ---- config merging ----------------------------------------------------------

inline json load_config_file(const fs::path& p) {
  json j;
  try {
    j = json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, "config file " + p.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config file " + p.string() + ": expected a JSON object");
  return j;
}

/// Defaults <- file <- flags; unknown keys are rejected by name.
inline json merge_config(const Command& cmd, const json& file, const json& flags) {
  json c = cmd.defaults;
  for (const json* layer : {&file, &flags})
    for (const auto& [k, v] : layer->items()) {
      if (!cmd.defaults.contains(k)) throw Error(ErrorCode::kConfig, k + ": unknown key for command '" + cmd.name + "'");
      // A lone number given for a list key is a one-element list.
      c[k] = cmd.defaults.at(k).is_array() && v.is_number() ? json::array({v}) : v;
    }
  return cmd.resolve(std::move(c));
}

/// Runs a resolved command and writes its manifest; returns the manifest path.
inline fs::path execute(const Command& cmd, const json& config, int jobs) {
  RunManifest m;
  m.command = cmd.name;
  m.config = config;
  m.started = utc_timestamp();
  const CommandResult res = cmd.run(config, jobs);
  m.finished = utc_timestamp();
  m.seeds = res.seeds;
  for (const auto& p : res.outputs) m.outputs.push_back(digest_file(p));
  const fs::path mp = manifest_path_for(res.outputs.front());
  write_manifest(mp, m);
  return mp;
}

namespace detail {

inline json flag_value(const std::string& key, const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
  }
  if (text.find(',') != std::string::npos) {
    try {
      return json::parse("[" + text + "]");
    } catch (const json::parse_error&) {
    }
  }
  throw Error(ErrorCode::kConfig, key + ": cannot parse '" + text + "'");
}

}  // namespace detail

inline int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::kConfig:
    case ErrorCode::kUnsupportedFormat: return 2;
    case ErrorCode::kIo: return 3;
    default: return 1;
  }
}

/// Entry point; returns the process exit status.
inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"first-passage percolation geodesics: simulation and analysis", "fppgeo"};
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  app.require_subcommand(1);

  // Keys whose flag value is taken verbatim; every other flag value is read as
  // JSON, and a bare comma list like 25,50 becomes an array.
  static const std::map<std::string, std::string> kHelp = {
      {"dim", "lattice dimension"},
      {"box", "box side (torus period for masstransport)"},
      {"dist", "weight law, e.g. uniform:0,1 or exp:1"},
      {"seed", "first seed"},
      {"seeds", "number of seeds"},
      {"theta", "direction, e.g. 1,0 or e1"},
      {"alpha", "target hyperplane level"},
      {"out", "primary output path"},
      {"format", "report format: csv or json"},
  };
  static const std::set<std::string> kRaw = {"dist", "theta", "out", "format"};

  const auto cmds = commands();
  std::string config_path, verify_path;
  std::vector<std::string> sets;
  int jobs = 0;
  bool timing = false;
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> opts;

  for (const auto& cmd : cmds) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    subs[cmd.name] = sub;
    sub->add_option("--config", config_path, "JSON config file (flags override it)");
    sub->add_option("--jobs", jobs, "worker threads (default: FPPGEO_JOBS or 1)")->check(CLI::PositiveNumber);
    sub->add_option("--set", sets, "extra key=value (value parsed as JSON when possible)");
    if (cmd.name == "modify") sub->add_flag("--timing", timing, "record wall-clock runtime per trial");
    for (const auto& [key, def] : cmd.defaults.items()) {
      if (key == "timing") continue;
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      std::transform(flag.begin(), flag.end(), flag.begin(), [](unsigned char ch) { return std::tolower(ch); });
      const auto h = kHelp.find(key);
      std::string text = h == kHelp.end() ? "config key " + key : h->second;
      text += def.is_null() ? " (default: derived)" : " (default: " + (def.is_string() ? def.get<std::string>() : def.dump()) + ")";
      opts[cmd.name].push_back({key, sub->add_option(flag, values[cmd.name][key], text)});
    }
  }
  CLI::App* verify = app.add_subcommand("verify", "recompute the output digests listed in a manifest");
  verify->add_option("manifest", verify_path, "manifest file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) {
      const auto bad = verify_manifest(verify_path);
      for (const auto& b : bad) err << "digest mismatch: " << b << '\n';
      if (bad.empty()) out << "ok\n";
      return bad.empty() ? 0 : 1;
    }
    for (const auto& cmd : cmds) {
      if (!subs[cmd.name]->parsed()) continue;
      json flags = json::object();
      for (const auto& [key, opt] : opts[cmd.name]) {
        if (opt->count() == 0) continue;
        const std::string& text = values[cmd.name][key];
        if (kRaw.count(key)) {
          flags[key] = text;
        } else {
          flags[key] = detail::flag_value(key, text);
        }
      }
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::kConfig, "--set expects key=value, got '" + s + "'");
        const std::string key = s.substr(0, eq), text = s.substr(eq + 1);
        try {
          flags[key] = json::parse(text);
        } catch (const json::parse_error&) {
          flags[key] = text;
        }
      }
      if (timing) flags["timing"] = true;
      const json file = config_path.empty() ? json::object() : load_config_file(config_path);
      const json config = merge_config(cmd, file, flags);
      const int j = jobs > 0 ? jobs : default_jobs();
      const fs::path mp = execute(cmd, config, j);
      out << "wrote " << config.at("out").get<std::string>() << " and " << mp.string() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "fppgeo: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "fppgeo: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace fppgeo::cli
