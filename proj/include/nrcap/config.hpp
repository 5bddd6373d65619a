#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrcap/common.hpp"
#include "nrcap/potential.hpp"
#include "nrcap/sde.hpp"
#include "nrcap/serialize.hpp"

namespace nrcap {

struct GridConfig {
  int nx = 161, ny = 121;
  double radius_a = 0.3, radius_b = 0.3;
};

struct ReportFormats {
  bool json_out = true, csv_out = true;
};

struct RunConfig {
  std::string potential_name = "quartic2d";
  PotentialSpec potential;
  Mat M = Mat::Identity(2, 2);
  std::vector<double> epsilon{0.1};
  GridConfig grid;
  SdeConfig sde;
  bool stream_paths = false;
  std::string out_dir = "out";
  ReportFormats formats;
  json resolved;  // the fully-resolved block embedded into every report
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    require(ok, errc::invalid_config, "unknown key \"" + it.key() + "\" in " + where);
  }
}

template <class T>
inline T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(errc::invalid_config, std::string("bad value for \"") + key + "\": " + e.what());
  }
}

}  // namespace detail

// Strict parse: unknown keys anywhere are configuration errors.
inline RunConfig parse_config(const json& j) {
  require(j.is_object(), errc::invalid_config, "config root must be an object");
  detail::check_keys(
      j, {"potential", "drift", "epsilon", "grid", "sde", "out_dir", "formats"}, "config");
  RunConfig cfg;

  json pj = j.contains("potential") ? j.at("potential") : json::object();
  detail::check_keys(pj, {"name", "params", "box", "seeds", "terms"}, "potential");
  cfg.potential_name = detail::get_or<std::string>(pj, "name", "quartic2d");
  std::map<std::string, double> params;
  if (pj.contains("params")) {
    require(pj.at("params").is_object(), errc::invalid_config,
            "potential.params must be an object");
    for (auto it = pj.at("params").begin(); it != pj.at("params").end(); ++it)
      params[it.key()] = it.value().get<double>();
  }
  if (cfg.potential_name == "quartic2d") {
    require(params.empty(), errc::invalid_config, "quartic2d takes no params");
    cfg.potential = make_quartic2d();
  } else if (cfg.potential_name == "tilted2d") {
    double tilt = 0.1;
    for (const auto& [k, v] : params) {
      require(k == "tilt", errc::invalid_config, "tilted2d takes only the \"tilt\" param");
      tilt = v;
    }
    cfg.potential = make_tilted(tilt);
  } else if (cfg.potential_name == "polynomial") {
    require(pj.contains("terms") && pj.at("terms").is_array(), errc::invalid_config,
            "polynomial potential needs a \"terms\" array");
    std::vector<PolyTerm> terms;
    for (const auto& tj : pj.at("terms")) {
      detail::check_keys(tj, {"coeff", "powers"}, "polynomial term");
      PolyTerm t;
      t.coeff = tj.at("coeff").get<double>();
      t.powers = tj.at("powers").get<std::vector<int>>();
      require(t.powers.size() == 2, errc::invalid_config, "term powers must have 2 entries");
      terms.push_back(t);
    }
    cfg.potential = make_polynomial(2, terms, "polynomial");
  } else {
    fail(errc::invalid_config, "unknown potential \"" + cfg.potential_name + "\"");
  }
  if (pj.contains("box")) {
    const auto box = pj.at("box").get<std::vector<double>>();
    require(box.size() == 4, errc::invalid_config, "potential.box must have 4 entries");
    cfg.potential.box = box;
  }
  if (pj.contains("seeds")) {
    cfg.potential.seeds.clear();
    for (const auto& sj : pj.at("seeds")) {
      const auto s = sj.get<std::vector<double>>();
      require(s.size() == 2, errc::invalid_config, "each seed must have 2 entries");
      Vec v(2);
      v << s[0], s[1];
      cfg.potential.seeds.push_back(v);
    }
  }

  if (j.contains("drift")) {
    const json& dj = j.at("drift");
    detail::check_keys(dj, {"M"}, "drift");
    require(dj.contains("M"), errc::invalid_config, "drift block needs \"M\"");
    const auto rows = dj.at("M").get<std::vector<std::vector<double>>>();
    require(rows.size() == 2 && rows[0].size() == 2 && rows[1].size() == 2,
            errc::invalid_config, "drift.M must be 2x2");
    cfg.M << rows[0][0], rows[0][1], rows[1][0], rows[1][1];
  }

  if (j.contains("epsilon")) {
    cfg.epsilon = j.at("epsilon").get<std::vector<double>>();
    for (double e : cfg.epsilon)
      require(e > 0.0, errc::invalid_config, "epsilon values must be positive");
  }

  if (j.contains("grid")) {
    const json& gj = j.at("grid");
    detail::check_keys(gj, {"nx", "ny", "radius_a", "radius_b"}, "grid");
    cfg.grid.nx = detail::get_or<int>(gj, "nx", cfg.grid.nx);
    cfg.grid.ny = detail::get_or<int>(gj, "ny", cfg.grid.ny);
    cfg.grid.radius_a = detail::get_or<double>(gj, "radius_a", cfg.grid.radius_a);
    cfg.grid.radius_b = detail::get_or<double>(gj, "radius_b", cfg.grid.radius_b);
  }

  if (j.contains("sde")) {
    const json& sj = j.at("sde");
    detail::check_keys(
        sj, {"dt", "max_time", "n_paths", "seed", "target_radius", "threads", "stream_paths"},
        "sde");
    cfg.sde.dt = detail::get_or<double>(sj, "dt", cfg.sde.dt);
    cfg.sde.max_time = detail::get_or<double>(sj, "max_time", cfg.sde.max_time);
    cfg.sde.n_paths = detail::get_or<int>(sj, "n_paths", cfg.sde.n_paths);
    cfg.sde.seed = detail::get_or<std::uint64_t>(sj, "seed", cfg.sde.seed);
    cfg.sde.target_radius = detail::get_or<double>(sj, "target_radius", cfg.sde.target_radius);
    cfg.sde.threads = detail::get_or<int>(sj, "threads", cfg.sde.threads);
    cfg.stream_paths = detail::get_or<bool>(sj, "stream_paths", false);
  }

  cfg.out_dir = detail::get_or<std::string>(j, "out_dir", cfg.out_dir);
  if (j.contains("formats")) {
    const json& fj = j.at("formats");
    detail::check_keys(fj, {"json", "csv"}, "formats");
    cfg.formats.json_out = detail::get_or<bool>(fj, "json", true);
    cfg.formats.csv_out = detail::get_or<bool>(fj, "csv", true);
  }

  // the resolved block: every effective value, in a fixed key order
  json seeds = json::array();
  for (const auto& s : cfg.potential.seeds) seeds.push_back(to_json(s));
  json terms = json::array();
  if (pj.contains("terms")) terms = pj.at("terms");
  json pot{{"name", cfg.potential_name},
           {"box", cfg.potential.box},
           {"seeds", seeds}};
  if (cfg.potential_name == "tilted2d")
    pot["params"] = json{{"tilt", cfg.potential.params.at("tilt")}};
  if (cfg.potential_name == "polynomial") pot["terms"] = terms;
  cfg.resolved =
      json{{"potential", pot},
           {"drift", json{{"M", to_json(cfg.M)}}},
           {"epsilon", cfg.epsilon},
           {"grid", json{{"nx", cfg.grid.nx},
                         {"ny", cfg.grid.ny},
                         {"radius_a", cfg.grid.radius_a},
                         {"radius_b", cfg.grid.radius_b}}},
           {"sde", json{{"dt", cfg.sde.dt},
                        {"max_time", cfg.sde.max_time},
                        {"n_paths", cfg.sde.n_paths},
                        {"seed", cfg.sde.seed},
                        {"target_radius", cfg.sde.target_radius},
                        {"threads", cfg.sde.threads},
                        {"stream_paths", cfg.stream_paths}}},
           {"out_dir", cfg.out_dir},
           {"formats", json{{"json", cfg.formats.json_out}, {"csv", cfg.formats.csv_out}}}};
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), errc::invalid_config, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(errc::invalid_config, std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace nrcap
