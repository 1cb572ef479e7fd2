// lapfield: fit, diagnose, simulate and assess spatial wind-gust extremes.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lapfield/inference.hpp"
#include "lapfield/io.hpp"
#include "lapfield/risk.hpp"
#include "lapfield/tail.hpp"

using namespace lapfield;
using io::json;

namespace {

constexpr int kExitSchema = 2;
constexpr int kExitNumeric = 3;

// Config sections; a value given on the command line wins over the file.
struct Config {
  json file = json::object();
  json section(const char* name) const { return file.contains(name) ? file.at(name) : json::object(); }
};

template <class T>
void resolve(T& var, const CLI::Option* opt, const json& section, const char* key) {
  if (opt->count() > 0 || !section.contains(key)) return;
  try {
    var = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw schema_error(std::string("config: field '") + key + "' has the wrong type");
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = io::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end != item.c_str() + item.size()) throw schema_error(std::string(what) + ": not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void log(const std::string& msg) { std::cerr << "lapfield: " << msg << '\n'; }

struct Loaded {
  Dataset data;
  SiteSet sites;  // aligned with data columns
};

Loaded load_data(const std::string& data_path, const std::string& sites_path) {
  if (data_path.empty()) throw schema_error("no data file given (--data)");
  if (sites_path.empty()) throw schema_error("no sites file given (--sites)");
  Loaded l;
  l.data = io::read_data_csv(data_path);
  l.sites = io::sites_for_columns(io::read_sites_csv(sites_path), l.data.site_ids);
  if (l.data.dropped_rows > 0) log("dropped " + std::to_string(l.data.dropped_rows) + " rows with missing values");
  if (l.data.rows() < 2) throw schema_error(data_path + ": fewer than two complete rows");
  return l;
}

double pooled_quantile(const Matrix& m, double p) {
  std::vector<double> all(m.data(), m.data() + m.size());
  std::sort(all.begin(), all.end());
  const double h = p * (all.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, all.size() - 1);
  return all[lo] + (h - lo) * (all[hi] - all[lo]);
}

// Standard-margin value -> m/s and back, through the uniform scale.
double to_wind(double x, DepType dep, const WeibullTail& w, double cov) {
  if (dep == DepType::laplace)
    return x > 0.0 ? w.quantile_survival(StdLaplace::survival(x), cov) : w.quantile(StdLaplace::cdf(x), cov);
  return x > 0.0 ? w.quantile_survival(normal_sf(x), cov) : w.quantile(normal_cdf(x), cov);
}

double to_standard(double v, DepType dep, const WeibullTail& w, double cov) {
  if (!(v > 0.0)) throw domain_error("wind speed must be positive");
  const double s = w.survival(v, cov);
  if (!(s > 0.0)) throw numeric_error("wind speed " + io::fmt(v) + " m/s is beyond the representable tail");
  if (s >= 0.5) {
    const double c = w.cdf(v, cov);
    return dep == DepType::laplace ? StdLaplace::quantile(c) : normal_quantile(c);
  }
  return dep == DepType::laplace ? StdLaplace::quantile_survival(s) : -normal_quantile(s);
}

io::ModelFile load_model(const std::string& path) {
  if (path.empty()) throw schema_error("no model file given (--model)");
  return io::model_from_json(io::read_json(path), path);
}

WeibullTail load_margins_file(const std::string& path) {
  const auto j = io::read_json(path);
  io::check_schema(j, path);
  if (!j.contains("margins")) throw schema_error(path + ": missing field 'margins'");
  return io::weibull_from_json(j.at("margins"));
}

std::string comment_line(const json& config, const std::string& model_hash = "") {
  json c;
  c["schema_version"] = io::kSchemaVersion;
  if (!model_hash.empty()) c["model_hash"] = model_hash;
  c["config"] = config;
  return c.dump();
}

// ---------------------------------------------------------------------------
// fit-margins
// ---------------------------------------------------------------------------

struct MarginsArgs {
  std::string data, sites, out = "margins.json";
  double threshold_prob = 0.975;
  double threshold = 0.0;
  bool no_delta1 = false;
  int bootstrap = 100;
  int block = 30;
  std::uint64_t seed = 1;
};

int cmd_fit_margins(const MarginsArgs& a, const json& config) {
  const auto l = load_data(a.data, a.sites);
  const double u = a.threshold > 0.0 ? a.threshold : pooled_quantile(l.data.obs, a.threshold_prob);
  if (!(u < l.data.obs.maxCoeff())) throw domain_error("no exceedances: threshold " + io::fmt(u) + " m/s is at or above the data maximum");
  WeibullFitOptions wo;
  wo.fit_delta1 = !a.no_delta1;
  const auto& cov = l.sites.covariate;
  const auto fit = fit_weibull_margins(l.data.obs, cov, u, wo);

  json out;
  out["schema_version"] = io::kSchemaVersion;
  out["kind"] = "margins";
  out["config"] = config;
  out["margins"] = io::to_json(fit.tail);
  out["loglik"] = fit.loglik;
  out["n_obs"] = l.data.rows();
  out["dropped_rows"] = l.data.dropped_rows;
  out["exceedances"] = fit.exceedances;
  out["censored"] = fit.censored;
  if (a.bootstrap >= 2) {
    const auto boot = block_bootstrap(
        l.data.obs,
        [&](const Matrix& m) {
          const auto f = fit_weibull_margins(m, cov, u, wo);
          Vector v(3);
          v << f.tail.gamma, f.tail.delta0, f.tail.delta1;
          return v;
        },
        static_cast<std::size_t>(std::min<int>(a.block, static_cast<int>(l.data.rows()))), a.bootstrap, a.seed);
    const char* names[] = {"gamma", "delta0", "delta1"};
    json b;
    b["replicates"] = a.bootstrap;
    b["block"] = a.block;
    b["failures"] = boot.failures;
    for (int k = 0; k < 3; ++k) {
      b["se"][names[k]] = boot.se[k];
      b["ci95"][names[k]] = {boot.lower[k], boot.upper[k]};
    }
    out["bootstrap"] = b;
  }
  io::write_json(a.out, out);
  log("wrote " + a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// fit-dependence
// ---------------------------------------------------------------------------

struct DependenceArgs {
  std::string data, sites, margins, out = "model.json", table = "dependence_table.csv";
  std::string families = "exponential,stable,matern";
  std::string types = "L,G";
  std::string anisotropy = "iso";
  double threshold_prob = 0.975;
  std::uint64_t seed = 20240601;
};

DepType parse_type_code(const std::string& s) {
  if (s == "L" || s == "laplace") return DepType::laplace;
  if (s == "G" || s == "gaussian") return DepType::gaussian;
  throw schema_error("unknown dependence type '" + s + "' (use L or G)");
}

Matrix uniforms_from_margins(const Matrix& obs, const SiteSet& sites, const WeibullTail& w) {
  Matrix u(obs.rows(), obs.cols());
  for (Eigen::Index i = 0; i < obs.rows(); ++i)
    for (Eigen::Index j = 0; j < obs.cols(); ++j)
      u(i, j) = std::clamp(w.cdf(std::max(obs(i, j), 0.0), sites.covariate[static_cast<std::size_t>(j)]), 1e-12, 1.0 - 1e-15);
  return u;
}

int cmd_fit_dependence(const DependenceArgs& a, const json& config) {
  const auto l = load_data(a.data, a.sites);
  std::optional<WeibullTail> margins;
  Matrix uni;
  if (!a.margins.empty()) {
    margins = load_margins_file(a.margins);
    uni = uniforms_from_margins(l.data.obs, l.sites, *margins);
  } else {
    uni = empirical_pit(l.data.obs);
  }
  std::vector<bool> aniso;
  if (a.anisotropy == "iso") aniso = {false};
  else if (a.anisotropy == "aniso") aniso = {true};
  else if (a.anisotropy == "both") aniso = {false, true};
  else throw schema_error("anisotropy must be iso, aniso or both");
  std::vector<CorrelationFamily> fams;
  for (const auto& f : split_list(a.families)) {
    try {
      fams.push_back(parse_family(f));
    } catch (const domain_error& e) {
      throw schema_error(e.what());
    }
  }
  std::vector<DepType> types;
  for (const auto& t : split_list(a.types)) types.push_back(parse_type_code(t));
  if (fams.empty() || types.empty()) throw schema_error("no family or type requested");

  struct Row {
    CorrelationFamily family;
    DepType dep;
    bool aniso;
    std::optional<FitResult> fit;
    std::string status;
  };
  std::vector<Row> rows;
  for (auto f : fams)
    for (auto t : types)
      for (bool an : aniso) {
        Row r{f, t, an, std::nullopt, "ok"};
        DependenceFitOptions o;
        o.threshold_prob = a.threshold_prob;
        o.anisotropic = an;
        o.seed = a.seed;
        try {
          r.fit = fit_dependence(uni, l.sites, f, t, o);
        } catch (const std::exception& e) {
          r.status = std::string("failed: ") + e.what();
        }
        log(to_string(f) + (t == DepType::laplace ? " L" : " G") + (an ? " aniso" : " iso") + ": " + r.status);
        rows.push_back(std::move(r));
      }
  int best = -1;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].fit && (best < 0 || rows[i].fit->aic > rows[best].fit->aic)) best = static_cast<int>(i);

  std::vector<std::vector<std::string>> table;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::vector<std::string> cells{to_string(r.family), r.dep == DepType::laplace ? "L" : "G", r.aniso ? "1" : "0"};
    if (r.fit) {
      const auto& s = r.fit->spec;
      const bool has_shape = r.family != CorrelationFamily::exponential;
      for (auto v : {r.aniso ? s.theta : NAN, r.aniso ? s.b : NAN, s.scale, has_shape ? s.shape : NAN, r.fit->loglik, r.fit->aic})
        cells.push_back(io::fmt(v));
      cells.push_back(std::to_string(r.fit->exceedances));
    } else {
      for (int k = 0; k < 7; ++k) cells.push_back("NA");
    }
    cells.push_back(static_cast<int>(i) == best ? "1" : "0");
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    cells.push_back(status);
    table.push_back(std::move(cells));
  }
  io::write_csv(a.table,
                {"family", "type", "anisotropic", "theta", "b", "scale", "shape", "loglik", "aic", "exceedances", "best", "status"},
                table, comment_line(config));
  log("wrote " + a.table);
  if (best < 0) throw numeric_error("every requested combination failed");

  const auto& bf = *rows[best].fit;
  io::ModelFile m;
  m.dep = bf.dep;
  m.spec = bf.spec;
  m.sites = l.sites;
  m.margins = margins;
  m.fit["loglik"] = bf.loglik;
  m.fit["aic"] = bf.aic;
  m.fit["dim"] = bf.dim;
  m.fit["threshold_prob"] = bf.threshold_prob;
  m.fit["threshold_standard"] = bf.threshold_u;
  m.fit["exceedances"] = bf.exceedances;
  m.fit["n_obs"] = bf.n_obs;
  m.fit["pit"] = margins ? "margins" : "rank";
  json grid = json::array();
  for (double v : default_matern_nu_grid()) grid.push_back(v);
  m.fit["matern_nu_grid"] = grid;
  m.fit["config"] = config;
  io::write_json(a.out, io::to_json(m));
  log("wrote " + a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

struct DiagnoseArgs {
  std::string data, sites, model, out_dir = ".";
  std::string thresholds = "0.9,0.95,0.98,0.99,0.995";
  int k = 40;
  double qq_min_prob = 0.0;
};

int cmd_diagnose(const DiagnoseArgs& a, const json& config) {
  const auto l = load_data(a.data, a.sites);
  const auto us = parse_doubles(a.thresholds, "thresholds");
  for (double u : us)
    if (!(u > 0.0 && u < 1.0)) throw schema_error("thresholds must lie in (0,1)");
  std::optional<io::ModelFile> model;
  Matrix corr;
  if (!a.model.empty()) {
    model = load_model(a.model);
    corr = build_corr_matrix(l.sites, model->spec);
  }
  const Matrix uni = empirical_pit(l.data.obs);
  const auto d = static_cast<Eigen::Index>(l.sites.size());
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) cols[j].assign(l.data.obs.col(j).data(), l.data.obs.col(j).data() + l.data.obs.rows());

  OrthantIntegralOptions oo;
  oo.nodes = 32;
  oo.max_panels = 4;
  std::vector<std::vector<std::string>> pair_rows, lambda_rows;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const auto& si = l.sites.coords[i];
      const auto& sj = l.sites.coords[j];
      const double dist = std::hypot(si[0] - sj[0], si[1] - sj[1]);
      std::string rho = "NA", flag = "0";
      try {
        rho = io::fmt(hill_rho(cols[i], cols[j], a.k));
      } catch (const std::exception&) {
        flag = "1";
      }
      std::string rho_model = "NA";
      Matrix c2(2, 2);
      if (model) {
        c2 << 1.0, corr(i, j), corr(j, i), 1.0;
        rho_model = io::fmt(model->dep == DepType::laplace ? residual_coef_biv(corr(i, j)) : residual_coef_biv_gauss(corr(i, j)));
      }
      pair_rows.push_back({l.sites.ids[i], l.sites.ids[j], io::fmt(dist), rho, rho_model, flag});
      for (double u : us) {
        const auto est = empirical_lambda(cols[i], cols[j], u);
        std::string lm = "NA";
        if (model) lm = io::fmt(model_lambda_u(c2, u, model->dep, oo));
        lambda_rows.push_back({l.sites.ids[i], l.sites.ids[j], io::fmt(dist), io::fmt(u), io::fmt(est.value),
                               std::to_string(est.joint), est.flagged ? "1" : "0", lm});
      }
    }
  namespace fs = std::filesystem;
  fs::create_directories(a.out_dir);
  const std::string note = comment_line(config, model ? io::model_hash([&] {
    json j = io::to_json(*model);
    j.erase("model_hash");
    return j;
  }()) : "");
  const auto pairs_path = (fs::path(a.out_dir) / "pairs.csv").string();
  const auto lambda_path = (fs::path(a.out_dir) / "lambda.csv").string();
  io::write_csv(pairs_path, {"site_i", "site_j", "distance", "rho_hill", "rho_model", "flagged"}, pair_rows, note);
  io::write_csv(lambda_path, {"site_i", "site_j", "distance", "u", "lambda_emp", "joint", "flagged", "lambda_model"},
                lambda_rows, note);
  log("wrote " + pairs_path + " and " + lambda_path);
  if (model) {
    const auto pts = qq_points(qq_sum_transform(uni, corr, model->dep), a.qq_min_prob);
    std::vector<std::vector<std::string>> qq;
    for (const auto& p : pts) qq.push_back({io::fmt(p.theoretical), io::fmt(p.empirical)});
    const auto qq_path = (fs::path(a.out_dir) / "qq.csv").string();
    io::write_csv(qq_path, {"theoretical", "empirical"}, qq, note);
    log("wrote " + qq_path);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate / condsim
// ---------------------------------------------------------------------------

struct SimArgs {
  std::string model, margins, out = "simulation.csv", scale = "standard";
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  // condsim only
  std::string condition, site;
  double level = 0.0;
  double return_period = 0.0;
};

struct SimContext {
  io::ModelFile file;
  LaplaceFieldModel model;
  std::optional<WeibullTail> margins;
  bool wind = false;
  std::string hash;
};

SimContext sim_context(const SimArgs& a) {
  SimContext c;
  c.file = load_model(a.model);
  c.hash = io::to_json(c.file).at("model_hash").get<std::string>();
  c.model = LaplaceFieldModel::build(c.file.sites, c.file.spec, c.file.dep);
  c.margins = a.margins.empty() ? c.file.margins : std::optional<WeibullTail>(load_margins_file(a.margins));
  if (a.scale == "wind") {
    if (!c.margins) throw schema_error("--scale wind needs Weibull margins in the model or via --margins");
    c.wind = true;
  } else if (a.scale != "standard") {
    throw schema_error("scale must be standard or wind");
  }
  if (a.n < 1) throw schema_error("n must be positive");
  return c;
}

void write_sample(const SimArgs& a, const SimContext& c, const Matrix& x, const json& config) {
  std::vector<std::string> header{"draw"};
  header.insert(header.end(), c.file.sites.ids.begin(), c.file.sites.ids.end());
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<std::string> r{std::to_string(i + 1)};
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double v = c.wind ? to_wind(x(i, j), c.file.dep, *c.margins, c.file.sites.covariate[j]) : x(i, j);
      r.push_back(io::fmt(v));
    }
    rows.push_back(std::move(r));
  }
  io::write_csv(a.out, header, rows, comment_line(config, c.hash));
  log("wrote " + a.out);
}

int cmd_simulate(const SimArgs& a, const json& config) {
  const auto c = sim_context(a);
  Rng rng(a.seed);
  write_sample(a, c, simulate(c.model, rng, a.n), config);
  return 0;
}

int cmd_condsim(const SimArgs& a, const json& config) {
  const auto c = sim_context(a);
  const auto& sites = c.file.sites;
  std::vector<int> idx;
  std::vector<double> val;  // standard scale
  auto add = [&](const std::string& id, double v, bool wind_units) {
    const auto k = sites.index_of(id);
    if (!k) throw schema_error("conditioning site '" + id + "' is not in the model");
    if (std::find(idx.begin(), idx.end(), *k) != idx.end()) throw schema_error("conditioning site '" + id + "' given twice");
    idx.push_back(*k);
    val.push_back(wind_units ? to_standard(v, c.file.dep, *c.margins, sites.covariate[*k]) : v);
  };
  if (!a.condition.empty()) {
    const auto t = io::read_csv(a.condition);
    const int cs = t.require("site"), cv = t.require("value");
    for (std::size_t r = 0; r < t.rows.size(); ++r) add(t.rows[r][cs], io::parse_number(t, r, cv), c.wind);
  } else if (!a.site.empty()) {
    if (!c.margins && (a.level > 0.0 || a.return_period > 0.0))
      throw schema_error("--level/--return-period need Weibull margins");
    double level = a.level;
    if (a.return_period > 0.0) {
      const auto k = sites.index_of(a.site);
      if (!k) throw schema_error("conditioning site '" + a.site + "' is not in the model");
      level = c.margins->quantile_survival(1.0 / (365.25 * a.return_period), sites.covariate[*k]);
      log("conditioning level " + io::fmt(level) + " m/s at " + a.site);
    }
    if (!(level > 0.0)) throw schema_error("give --level or --return-period with --site");
    add(a.site, level, true);
  } else {
    throw schema_error("condsim needs --condition FILE or --site ID with --level/--return-period");
  }
  const int d = c.model.dim();
  Matrix full(static_cast<Eigen::Index>(a.n), d);
  std::vector<int> free;
  for (int j = 0; j < d; ++j)
    if (std::find(idx.begin(), idx.end(), j) == idx.end()) free.push_back(j);
  for (std::size_t k = 0; k < idx.size(); ++k) full.col(idx[k]).setConstant(val[k]);
  if (!free.empty()) {
    Rng rng(a.seed);
    const Vector x1 = Eigen::Map<const Vector>(val.data(), static_cast<Eigen::Index>(val.size()));
    const Matrix s = simulate_conditional(c.model, idx, x1, rng, a.n);
    for (std::size_t k = 0; k < free.size(); ++k) full.col(free[k]) = s.col(static_cast<Eigen::Index>(k));
  }
  write_sample(a, c, full, config);
  return 0;
}

// ---------------------------------------------------------------------------
// return
// ---------------------------------------------------------------------------

struct ReturnArgs {
  std::string model, margins, grid, out = "risk.json";
  std::string periods;
  double level = 0.0;
  double cap = 1e12;
  std::string engine = "auto";
};

int cmd_return(const ReturnArgs& a, const json& config) {
  const auto m = load_model(a.model);
  const auto margins = a.margins.empty() ? m.margins : std::optional<WeibullTail>(load_margins_file(a.margins));
  if (!margins) throw schema_error("return needs Weibull margins in the model or via --margins");
  const SiteSet grid = a.grid.empty() ? m.sites : io::read_sites_csv(a.grid);
  const auto periods = parse_doubles(a.periods, "periods");
  if (periods.empty() && !(a.level > 0.0)) throw schema_error("give --periods and/or --level");
  RiskOptions ro;
  ro.period_cap = a.cap;
  if (a.engine == "lattice") ro.engine = RiskEngine::lattice;
  else if (a.engine == "union") ro.engine = RiskEngine::union_mc;
  else if (a.engine != "auto") throw schema_error("engine must be auto, lattice or union");
  const RiskEvaluator r(m.spec, m.dep, *margins, grid, ro);

  json out;
  out["schema_version"] = io::kSchemaVersion;
  out["kind"] = "risk";
  out["config"] = config;
  out["model_hash"] = io::to_json(m).at("model_hash");
  out["grid_size"] = grid.size();
  if (a.level > 0.0) {
    const auto rp = r.return_period(a.level);
    out["period"] = {{"level", a.level},
                     {"period_years", rp.years},
                     {"capped", rp.capped},
                     {"cap_years", ro.period_cap},
                     {"probability", rp.prob.p},
                     {"grid_size", rp.prob.grid_size},
                     {"quadrature_error", rp.prob.quad_error},
                     {"mvn_error", rp.prob.mvn_error},
                     {"method", rp.prob.method}};
  }
  json levels = json::array();
  for (double T : periods) {
    const auto lv = r.return_level(T);
    levels.push_back({{"period_years", T},
                      {"level", lv.level},
                      {"achieved_period_years", lv.years},
                      {"grid_size", lv.prob.grid_size},
                      {"quadrature_error", lv.prob.quad_error},
                      {"mvn_error", lv.prob.mvn_error},
                      {"iterations", lv.iterations}});
  }
  if (!periods.empty()) out["levels"] = levels;
  io::write_json(a.out, out);
  log("wrote " + a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial extremes of wind gusts with Laplace random fields"};
  app.require_subcommand(1);
  std::string config_path;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config with sections data, margins, dependence, diagnostics, simulate, risk");
  app.add_option("--threads", threads, "worker threads (default: LAPFIELD_THREADS or all cores)")->check(CLI::PositiveNumber);

  std::string data, sites;
  auto add_data = [&](CLI::App* sub) {
    return std::pair{sub->add_option("--data", data, "wide CSV: date,site_1,...,site_D"),
                     sub->add_option("--sites", sites, "CSV: id,x,y,covariate")};
  };

  MarginsArgs ma;
  auto* fm = app.add_subcommand("fit-margins", "censored Weibull margins with covariate-dependent scale");
  auto [fm_data, fm_sites] = add_data(fm);
  auto* fm_tp = fm->add_option("--threshold-prob", ma.threshold_prob, "pooled empirical quantile used as threshold");
  auto* fm_t = fm->add_option("--threshold", ma.threshold, "threshold in m/s (overrides --threshold-prob)");
  auto* fm_nd = fm->add_flag("--no-delta1", ma.no_delta1, "fix delta1 = 0");
  auto* fm_b = fm->add_option("--bootstrap", ma.bootstrap, "block-bootstrap replicates (0 disables)");
  auto* fm_bl = fm->add_option("--block", ma.block, "bootstrap block length in rows");
  auto* fm_s = fm->add_option("--seed", ma.seed);
  auto* fm_o = fm->add_option("--out", ma.out);

  DependenceArgs da;
  auto* fd = app.add_subcommand("fit-dependence", "censored likelihood fits of correlation family x type x anisotropy");
  auto [fd_data, fd_sites] = add_data(fd);
  auto* fd_m = fd->add_option("--margins", da.margins, "margins JSON; default uses rank PIT");
  auto* fd_f = fd->add_option("--families", da.families, "comma list of exponential, stable, matern");
  auto* fd_ty = fd->add_option("--types", da.types, "comma list of L, G");
  auto* fd_a = fd->add_option("--anisotropy", da.anisotropy, "iso, aniso or both");
  auto* fd_tp = fd->add_option("--threshold-prob", da.threshold_prob, "uniform-scale threshold of the exceedance set");
  auto* fd_s = fd->add_option("--seed", da.seed);
  auto* fd_o = fd->add_option("--out", da.out, "best model JSON");
  auto* fd_t = fd->add_option("--table", da.table, "comparison table CSV");

  DiagnoseArgs ga;
  auto* dg = app.add_subcommand("diagnose", "tail-dependence tables and QQ points");
  auto [dg_data, dg_sites] = add_data(dg);
  auto* dg_m = dg->add_option("--model", ga.model, "model JSON for model curves and QQ");
  auto* dg_u = dg->add_option("--thresholds", ga.thresholds, "comma list of probabilities");
  auto* dg_k = dg->add_option("--k", ga.k, "order statistics for the Hill estimate");
  auto* dg_q = dg->add_option("--qq-min-prob", ga.qq_min_prob, "keep QQ points at or above this plotting position");
  auto* dg_o = dg->add_option("--out-dir", ga.out_dir);

  SimArgs sa;
  auto* sm = app.add_subcommand("simulate", "unconditional field draws");
  auto* cs = app.add_subcommand("condsim", "draws conditional on observed values or a site level");
  std::map<std::string, CLI::Option*> sim_opts;
  for (auto* sub : {sm, cs}) {
    const std::string p = sub->get_name() + ".";
    sim_opts[p + "model"] = sub->add_option("--model", sa.model);
    sim_opts[p + "margins"] = sub->add_option("--margins", sa.margins, "margins JSON overriding the model's");
    sim_opts[p + "n"] = sub->add_option("--n", sa.n, "number of draws");
    sim_opts[p + "seed"] = sub->add_option("--seed", sa.seed);
    sim_opts[p + "scale"] = sub->add_option("--scale", sa.scale, "standard or wind (m/s)");
    sim_opts[p + "out"] = sub->add_option("--out", sa.out);
  }
  sim_opts["condsim.condition"] = cs->add_option("--condition", sa.condition, "CSV: site,value (units of --scale)");
  sim_opts["condsim.site"] = cs->add_option("--site", sa.site, "single conditioning site");
  sim_opts["condsim.level"] = cs->add_option("--level", sa.level, "level at --site in m/s");
  sim_opts["condsim.return_period"] = cs->add_option("--return-period", sa.return_period, "years; level from the site margin");

  ReturnArgs ra;
  auto* rt = app.add_subcommand("return", "grid return periods and levels");
  auto* rt_m = rt->add_option("--model", ra.model);
  auto* rt_mg = rt->add_option("--margins", ra.margins);
  auto* rt_g = rt->add_option("--grid", ra.grid, "prediction sites CSV; default the model sites");
  auto* rt_p = rt->add_option("--periods", ra.periods, "comma list of return periods in years");
  auto* rt_l = rt->add_option("--level", ra.level, "level in m/s for a return period");
  auto* rt_c = rt->add_option("--cap", ra.cap, "largest reported period in years");
  auto* rt_e = rt->add_option("--engine", ra.engine, "auto, lattice or union");
  auto* rt_o = rt->add_option("--out", ra.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitSchema;
  }

  try {
    Config cfg;
    if (!config_path.empty()) {
      cfg.file = io::read_json(config_path);
      if (!cfg.file.is_object()) throw schema_error(config_path + ": expected a JSON object");
      // Input paths in the file are relative to the file's directory.
      const auto base = std::filesystem::path(config_path).parent_path();
      for (auto& [name, sec] : cfg.file.items()) {
        if (!sec.is_object()) continue;
        for (const char* key : {"data", "sites", "margins", "model", "grid", "condition"})
          if (sec.contains(key) && sec.at(key).is_string()) {
            const std::filesystem::path v = sec.at(key).get<std::string>();
            if (!v.empty() && v.is_relative()) sec[key] = (base / v).string();
          }
      }
    }
    if (threads > 0) setenv("LAPFIELD_THREADS", std::to_string(threads).c_str(), 1);
    const json dsec = cfg.section("data");
    json resolved;
    resolved["threads"] = thread_count();
    auto data_paths = [&](CLI::Option* od, CLI::Option* os) {
      resolve(data, od, dsec, "data");
      resolve(sites, os, dsec, "sites");
      resolved["data"] = {{"data", data}, {"sites", sites}};
    };

    if (*fm) {
      data_paths(fm_data, fm_sites);
      const json s = cfg.section("margins");
      resolve(ma.threshold_prob, fm_tp, s, "threshold_prob");
      resolve(ma.threshold, fm_t, s, "threshold");
      resolve(ma.no_delta1, fm_nd, s, "no_delta1");
      resolve(ma.bootstrap, fm_b, s, "bootstrap");
      resolve(ma.block, fm_bl, s, "block");
      resolve(ma.seed, fm_s, s, "seed");
      resolve(ma.out, fm_o, s, "out");
      ma.data = data;
      ma.sites = sites;
      resolved["margins"] = {{"threshold_prob", ma.threshold_prob}, {"threshold", ma.threshold}, {"no_delta1", ma.no_delta1},
                             {"bootstrap", ma.bootstrap},           {"block", ma.block},         {"seed", ma.seed},
                             {"out", ma.out}};
      return cmd_fit_margins(ma, resolved);
    }
    if (*fd) {
      data_paths(fd_data, fd_sites);
      const json s = cfg.section("dependence");
      resolve(da.margins, fd_m, s, "margins");
      resolve(da.families, fd_f, s, "families");
      resolve(da.types, fd_ty, s, "types");
      resolve(da.anisotropy, fd_a, s, "anisotropy");
      resolve(da.threshold_prob, fd_tp, s, "threshold_prob");
      resolve(da.seed, fd_s, s, "seed");
      resolve(da.out, fd_o, s, "out");
      resolve(da.table, fd_t, s, "table");
      da.data = data;
      da.sites = sites;
      resolved["dependence"] = {{"margins", da.margins},       {"families", da.families}, {"types", da.types},
                                {"anisotropy", da.anisotropy}, {"threshold_prob", da.threshold_prob},
                                {"seed", da.seed},             {"out", da.out},           {"table", da.table}};
      return cmd_fit_dependence(da, resolved);
    }
    if (*dg) {
      data_paths(dg_data, dg_sites);
      const json s = cfg.section("diagnostics");
      resolve(ga.model, dg_m, s, "model");
      resolve(ga.thresholds, dg_u, s, "thresholds");
      resolve(ga.k, dg_k, s, "k");
      resolve(ga.qq_min_prob, dg_q, s, "qq_min_prob");
      resolve(ga.out_dir, dg_o, s, "out_dir");
      ga.data = data;
      ga.sites = sites;
      resolved["diagnostics"] = {{"model", ga.model}, {"thresholds", ga.thresholds}, {"k", ga.k},
                                 {"qq_min_prob", ga.qq_min_prob}, {"out_dir", ga.out_dir}};
      return cmd_diagnose(ga, resolved);
    }
    if (*sm || *cs) {
      const bool cond = static_cast<bool>(*cs);
      const std::string p = cond ? "condsim." : "simulate.";
      const json s = cfg.section("simulate");
      resolve(sa.model, sim_opts[p + "model"], s, "model");
      resolve(sa.margins, sim_opts[p + "margins"], s, "margins");
      resolve(sa.n, sim_opts[p + "n"], s, "n");
      resolve(sa.seed, sim_opts[p + "seed"], s, "seed");
      resolve(sa.scale, sim_opts[p + "scale"], s, "scale");
      resolve(sa.out, sim_opts[p + "out"], s, "out");
      json sec = {{"model", sa.model}, {"margins", sa.margins}, {"n", sa.n},
                  {"seed", sa.seed},   {"scale", sa.scale},     {"out", sa.out}};
      if (cond) {
        resolve(sa.condition, sim_opts["condsim.condition"], s, "condition");
        resolve(sa.site, sim_opts["condsim.site"], s, "site");
        resolve(sa.level, sim_opts["condsim.level"], s, "level");
        resolve(sa.return_period, sim_opts["condsim.return_period"], s, "return_period");
        sec["condition"] = sa.condition;
        sec["site"] = sa.site;
        sec["level"] = sa.level;
        sec["return_period"] = sa.return_period;
      }
      resolved.erase("threads");  // output must not depend on the thread count
      resolved["simulate"] = sec;
      return cond ? cmd_condsim(sa, resolved) : cmd_simulate(sa, resolved);
    }
    if (*rt) {
      const json s = cfg.section("risk");
      resolve(ra.model, rt_m, s, "model");
      resolve(ra.margins, rt_mg, s, "margins");
      resolve(ra.grid, rt_g, s, "grid");
      resolve(ra.periods, rt_p, s, "periods");
      resolve(ra.level, rt_l, s, "level");
      resolve(ra.cap, rt_c, s, "cap");
      resolve(ra.engine, rt_e, s, "engine");
      resolve(ra.out, rt_o, s, "out");
      resolved["risk"] = {{"model", ra.model},   {"margins", ra.margins}, {"grid", ra.grid},     {"periods", ra.periods},
                          {"level", ra.level},   {"cap", ra.cap},         {"engine", ra.engine}, {"out", ra.out}};
      return cmd_return(ra, resolved);
    }
  } catch (const schema_error& e) {
    std::cerr << "lapfield: error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const domain_error& e) {
    std::cerr << "lapfield: error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "lapfield: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
