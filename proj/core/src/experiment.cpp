#include "crowdsense/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "blocks.hpp"
#include "crowdsense/mechanisms.hpp"
#include "crowdsense/reuse_bounds.hpp"
#include "crowdsense/scenario_io.hpp"
#include "crowdsense/stats.hpp"
#include "crowdsense/welfare.hpp"
#include "json_detail.hpp"

namespace crowdsense {

namespace {

using detail::json;

std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

const std::vector<std::string> kStages = {"generate", "integer", "fractional", "vcg",
                                          "fvcg",     "rand",    "reserve"};

struct SweepInfo {
  SweepVariable v;
  const char* name;
};
const SweepInfo kSweeps[] = {{SweepVariable::kUsers, "users"},
                             {SweepVariable::kZipfMu, "zipf_mu"},
                             {SweepVariable::kReserve, "reserve"},
                             {SweepVariable::kItems, "items"},
                             {SweepVariable::kDemandProb, "demand_prob"}};

SweepVariable sweep_from(const std::string& s) {
  for (const auto& e : kSweeps) {
    if (s == e.name) return e.v;
  }
  throw ScenarioError("unknown sweep variable '" + s + "'");
}

int as_count(double x, const char* what) {
  if (x < 0 || x != std::floor(x)) throw ScenarioError(std::string(what) + " grid values must be whole numbers");
  return static_cast<int>(x);
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

double total(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

std::string clean(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
  }
  return s;
}

}  // namespace

const char* sweep_name(SweepVariable v) {
  for (const auto& e : kSweeps) {
    if (e.v == v) return e.name;
  }
  return "?";
}

void Campaign::validate() const {
  if (grid.empty()) throw ScenarioError("campaign grid is empty");
  if (replications < 1) throw ScenarioError("replications must be >= 1");
  if (workers < 1) throw ScenarioError("workers must be >= 1");
  if (sweep == SweepVariable::kDemandProb && model != MarketModel::kMultiItem) {
    throw ScenarioError("a demand_prob sweep needs the multi_item model");
  }
  if (sweep == SweepVariable::kReserve && !reserve) throw ScenarioError("a reserve sweep needs the reserve mechanism");
  for (double x : grid) {
    switch (sweep) {
      case SweepVariable::kUsers:
        as_count(x, "users");
        break;
      case SweepVariable::kItems:
        if (as_count(x, "items") < 1) throw ScenarioError("items grid values must be >= 1");
        break;
      case SweepVariable::kZipfMu:
      case SweepVariable::kReserve:
        if (!(x >= 0.0)) throw ScenarioError("grid values must be >= 0");
        break;
      case SweepVariable::kDemandProb:
        if (!(x >= 0.0 && x <= 1.0)) throw ScenarioError("demand_prob grid values must lie in [0,1]");
        break;
    }
  }
  if (!(sigma >= 0.0)) throw ScenarioError("sigma must be >= 0");
  if (!(demand_prob >= 0.0 && demand_prob <= 1.0)) throw ScenarioError("demand_prob must lie in [0,1]");
  if (supply_prob > 1.0) throw ScenarioError("supply_prob must lie in [0,1]");
  base.validate();
}

Campaign Campaign::paper_scale(Campaign c) {
  c.base.J = 50;
  c.base.K = 30;
  c.base.width = c.base.height = 1000.0;
  c.base.radius = 100.0;
  c.replications = 1000;
  c.vcg = false;
  c.integer_solves = false;
  c.grid.clear();
  switch (c.sweep) {
    case SweepVariable::kUsers:
      for (int i = 10; i <= 100; i += 10) c.grid.push_back(i);
      break;
    case SweepVariable::kZipfMu:
      c.base.I = 60;
      for (int t = 0; t <= 10; ++t) c.grid.push_back(0.3 * t);
      break;
    case SweepVariable::kItems:
      c.base.I = c.base.J = 50;
      for (int k = 1; k <= 7; ++k) c.grid.push_back(k);
      if (c.model == MarketModel::kMultiItem) c.integer_solves = true;  // the gain needs both optima
      break;
    case SweepVariable::kDemandProb:
      c.base.I = c.base.J = 50;
      for (int t = 1; t <= 9; ++t) c.grid.push_back(0.1 * t);
      c.integer_solves = true;
      break;
    case SweepVariable::kReserve:
      c.base.I = 60;
      for (int t = 0; t <= 12; ++t) c.grid.push_back(0.5 * t);
      break;
  }
  return c;
}

Campaign campaign_from_json(std::string_view text) {
  const json j = detail::parse(text, "campaign");
  if (!j.is_object()) throw ScenarioError("campaign must be an object");
  detail::reject_unknown_fields(j,
                                {"name", "sweep", "grid", "model", "base", "demand_prob", "supply_prob",
                                 "mechanisms", "integer_solves", "sigma", "replications", "seed", "workers",
                                 "output_dir"},
                                "campaign");
  Campaign c;
  try {
    if (j.contains("name")) c.name = j.at("name").get<std::string>();
    if (!j.contains("sweep") || !j.contains("grid")) throw ScenarioError("campaign needs sweep and grid");
    c.sweep = sweep_from(j.at("sweep").get<std::string>());
    c.grid = j.at("grid").get<std::vector<double>>();
    if (j.contains("model")) {
      const auto m = j.at("model").get<std::string>();
      if (m == "geometric") {
        c.model = MarketModel::kGeometric;
      } else if (m == "multi_item") {
        c.model = MarketModel::kMultiItem;
      } else {
        throw ScenarioError("unknown model '" + m + "'");
      }
    }
    if (j.contains("base")) c.base = gen_config_from_json(j.at("base").dump());
    if (j.contains("demand_prob")) c.demand_prob = j.at("demand_prob").get<double>();
    if (j.contains("supply_prob")) c.supply_prob = j.at("supply_prob").get<double>();
    if (j.contains("mechanisms")) {
      const json& m = j.at("mechanisms");
      c.vcg = c.fvcg = c.rand = c.reserve = false;
      std::vector<std::string> names;
      if (m.is_string()) {
        names.push_back(m.get<std::string>());
      } else {
        names = m.get<std::vector<std::string>>();
      }
      for (const auto& n : names) {
        if (n == "all") {
          c.vcg = c.fvcg = c.rand = c.reserve = true;
        } else if (n == "vcg") {
          c.vcg = true;
        } else if (n == "fvcg") {
          c.fvcg = true;
        } else if (n == "rand") {
          c.rand = true;
        } else if (n == "reserve") {
          c.reserve = true;
        } else {
          throw ScenarioError("unknown mechanism '" + n + "'");
        }
      }
    }
    if (j.contains("integer_solves")) c.integer_solves = j.at("integer_solves").get<bool>();
    if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
    if (j.contains("replications")) c.replications = j.at("replications").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("campaign: ") + e.what());
  }
  c.validate();
  return c;
}

std::string campaign_to_json(const Campaign& c) {
  json j;
  j["name"] = c.name;
  j["sweep"] = sweep_name(c.sweep);
  j["grid"] = c.grid;
  j["model"] = c.model == MarketModel::kGeometric ? "geometric" : "multi_item";
  json base = json::parse(gen_config_to_json(c.base));
  base.erase("seed");
  j["base"] = base;
  j["demand_prob"] = c.demand_prob;
  j["supply_prob"] = c.supply_prob;
  std::vector<std::string> mech;
  if (c.vcg) mech.push_back("vcg");
  if (c.fvcg) mech.push_back("fvcg");
  if (c.rand) mech.push_back("rand");
  if (c.reserve) mech.push_back("reserve");
  j["mechanisms"] = mech;
  j["integer_solves"] = c.integer_solves;
  j["sigma"] = c.sigma;
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["output_dir"] = c.output_dir;
  return j.dump(2);
}

std::uint64_t row_seed(std::uint64_t master, int rep) {
  return derive_seed(master, static_cast<std::uint64_t>(rep));
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "w_reuse",     "w_noreuse",   "gamma",          "w_frac",         "w_frac_noreuse", "gamma_frac",
      "w_vcg",       "pay_vcg",     "profit_vcg",     "w_fvcg",         "pay_fvcg",       "profit_fvcg",
      "w_rand",      "w_rand_exp",  "beta",           "pay_rand",       "profit_rand",    "profit_rand_exp",
      "gamma_rand",  "w_reserve",   "w_reserve_exp",  "pay_reserve",    "profit_reserve", "profit_reserve_exp",
      "withdrawn"};
  return names;
}

RowResult run_row(const Campaign& c, int point, int rep) {
  RowResult r;
  r.point = point;
  r.x = c.grid.at(point);
  r.rep = rep;
  r.seed = row_seed(c.seed, rep);
  auto& m = r.metrics;
  auto& t = r.seconds;
  Stopwatch clock;
  try {
    GenConfig g = c.base;
    g.seed = r.seed;
    double demand = c.demand_prob, sigma = c.sigma;
    switch (c.sweep) {
      case SweepVariable::kUsers:
        g.I = static_cast<int>(r.x);
        break;
      case SweepVariable::kZipfMu:
        g.zipf_mu = r.x;
        break;
      case SweepVariable::kReserve:
        sigma = r.x;
        break;
      case SweepVariable::kItems:
        g.K = static_cast<int>(r.x);
        break;
      case SweepVariable::kDemandProb:
        demand = r.x;
        break;
    }
    std::optional<Scenario> sc;
    if (c.model == MarketModel::kGeometric) {
      sc.emplace(generate(g));
    } else {
      Rng rng(r.seed);
      sc.emplace(multi_item_scenario(g.I, g.J, g.K, demand, c.supply_prob < 0 ? demand : c.supply_prob, rng));
    }
    const Bids truth = Bids::truthful(*sc);
    t["generate"] = clock.lap();

    if (c.integer_solves) {
      m["w_reuse"] = solve_integer(WelfareProblem::truthful(*sc, ReuseMode::kReuse)).objective;
      m["w_noreuse"] = solve_integer(WelfareProblem::truthful(*sc, ReuseMode::kNoReuse)).objective;
      if (m["w_noreuse"] > 1e-12) m["gamma"] = m["w_reuse"] / m["w_noreuse"];
      t["integer"] = clock.lap();
    }
    m["w_frac"] = solve_fractional(WelfareProblem::truthful(*sc, ReuseMode::kReuse)).objective;
    m["w_frac_noreuse"] = solve_fractional(WelfareProblem::truthful(*sc, ReuseMode::kNoReuse)).objective;
    if (m["w_frac_noreuse"] > 1e-12) m["gamma_frac"] = m["w_frac"] / m["w_frac_noreuse"];
    t["fractional"] = clock.lap();

    if (c.vcg) {
      const AuctionOutcome o = vcg(*sc, truth);
      m["w_vcg"] = o.welfare;
      m["pay_vcg"] = total(o.payments);
      m["profit_vcg"] = o.profit();
      t["vcg"] = clock.lap();
    }
    if (c.fvcg) {
      const AuctionOutcome o = fractional_vcg(*sc, truth);
      m["w_fvcg"] = o.welfare;
      m["pay_fvcg"] = total(o.payments);
      m["profit_fvcg"] = o.profit();
      t["fvcg"] = clock.lap();
    }
    const std::uint64_t mech_seed = derive_seed(r.seed, 101);
    if (c.rand) {
      const AuctionOutcome o = randomized_auction(*sc, truth, mech_seed);
      m["w_rand"] = o.welfare;
      m["w_rand_exp"] = o.expected_welfare;
      m["beta"] = o.beta;
      m["pay_rand"] = total(o.payments);
      m["profit_rand"] = o.profit();
      m["profit_rand_exp"] = o.expected_profit();
      const double base = c.integer_solves ? m["w_noreuse"] : m["w_frac_noreuse"];
      if (base > 1e-12) m["gamma_rand"] = o.expected_welfare / base;
      t["rand"] = clock.lap();
    }
    if (c.reserve) {
      const AuctionOutcome o =
          reserve_price_auction(*sc, truth, std::vector<double>(sc->num_items(), sigma), mech_seed);
      m["w_reserve"] = o.welfare;
      m["w_reserve_exp"] = o.expected_welfare;
      m["pay_reserve"] = total(o.payments);
      m["profit_reserve"] = o.profit();
      m["profit_reserve_exp"] = o.expected_profit();
      double w = 0;
      for (bool b : o.withdrawn) w += b;
      m["withdrawn"] = w;
      t["reserve"] = clock.lap();
    }
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
    m.clear();
  }
  return r;
}

std::vector<AggregateRow> aggregate(const Campaign& c, const std::vector<RowResult>& rows) {
  std::vector<AggregateRow> out(c.grid.size());
  std::vector<std::map<std::string, Moments>> acc(c.grid.size());
  for (std::size_t p = 0; p < c.grid.size(); ++p) {
    out[p].point = static_cast<int>(p);
    out[p].x = c.grid[p];
  }
  for (const auto& r : rows) {
    AggregateRow& a = out.at(r.point);
    if (!r.ok) {
      ++a.failed;
      continue;
    }
    ++a.ok;
    for (const auto& [k, v] : r.metrics) acc[r.point][k].add(v);
  }
  for (std::size_t p = 0; p < c.grid.size(); ++p) {
    for (const auto& [k, mo] : acc[p]) {
      const Estimate e = mo.estimate();
      out[p].metrics[k] = {e.mean, e.se};
      out[p].counts[k] = static_cast<int>(mo.n);
    }
  }
  return out;
}

CampaignResult run_campaign(const Campaign& c) {
  c.validate();
  const long points = static_cast<long>(c.grid.size());
  const long count = points * c.replications;
  CampaignResult res;
  res.rows = detail::run_indexed<RowResult>(count, c.workers, [&](long idx) {
    return run_row(c, static_cast<int>(idx / c.replications), static_cast<int>(idx % c.replications));
  });
  for (const auto& r : res.rows) res.failures += !r.ok;
  res.failed = res.failures > 0.05 * count;
  res.aggregated = aggregate(c, res.rows);
  return res;
}

std::string rows_csv(const Campaign& c, const std::vector<RowResult>& rows) {
  std::ostringstream os;
  os << "campaign,point," << sweep_name(c.sweep) << ",rep,seed,status,error";
  for (const auto& n : metric_names()) os << ',' << n;
  os << '\n';
  for (const auto& r : rows) {
    os << clean(c.name) << ',' << r.point << ',' << num(r.x) << ',' << r.rep << ',' << r.seed << ','
       << (r.ok ? "ok" : "failed") << ',' << clean(r.error);
    for (const auto& n : metric_names()) {
      os << ',';
      auto it = r.metrics.find(n);
      if (it != r.metrics.end()) os << num(it->second);
    }
    os << '\n';
  }
  return os.str();
}

std::string timings_csv(const std::vector<RowResult>& rows) {
  std::ostringstream os;
  os << "point,rep";
  for (const auto& s : kStages) os << ",t_" << s;
  os << ",t_total\n";
  for (const auto& r : rows) {
    os << r.point << ',' << r.rep;
    double sum = 0.0;
    for (const auto& s : kStages) {
      os << ',';
      auto it = r.seconds.find(s);
      if (it != r.seconds.end()) {
        os << num(it->second);
        sum += it->second;
      }
    }
    os << ',' << num(sum) << '\n';
  }
  return os.str();
}

std::string aggregated_csv(const Campaign& c, const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << "point," << sweep_name(c.sweep) << ",ok,failed";
  for (const auto& n : metric_names()) os << ',' << n << "_mean," << n << "_se," << n << "_n";
  os << '\n';
  for (const auto& a : rows) {
    os << a.point << ',' << num(a.x) << ',' << a.ok << ',' << a.failed;
    for (const auto& n : metric_names()) {
      auto it = a.metrics.find(n);
      if (it == a.metrics.end()) {
        os << ",,,0";
      } else {
        os << ',' << num(it->second.first) << ',' << num(it->second.second) << ',' << a.counts.at(n);
      }
    }
    os << '\n';
  }
  return os.str();
}

std::vector<std::string> write_campaign(const Campaign& c, const CampaignResult& r) {
  namespace fs = std::filesystem;
  fs::create_directories(c.output_dir);
  const fs::path dir(c.output_dir);
  const std::vector<std::string> files = {(dir / (c.name + "_rows.csv")).string(),
                                          (dir / (c.name + "_timings.csv")).string(),
                                          (dir / (c.name + "_aggregated.csv")).string(),
                                          (dir / (c.name + "_summary.json")).string()};
  write_file(files[0], rows_csv(c, r.rows));
  write_file(files[1], timings_csv(r.rows));
  write_file(files[2], aggregated_csv(c, r.aggregated));
  json s;
  s["name"] = c.name;
  s["status"] = r.failed ? "failed" : (r.failures ? "completed with failures" : "ok");
  s["rows"] = r.rows.size();
  s["failures"] = r.failures;
  s["campaign"] = json::parse(campaign_to_json(c));
  s["files"] = std::vector<std::string>(files.begin(), files.begin() + 3);
  write_file(files[3], s.dump(2) + "\n");
  return files;
}

Table read_csv(std::string_view text) {
  Table t;
  std::istringstream is{std::string(text)};
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      t.header = split(line);
      first = false;
    } else {
      t.rows.push_back(split(line));
    }
  }
  return t;
}

namespace {

struct Curve {
  const char* stem;
  const char* metric;
};

const std::map<std::string, std::vector<Curve>>& figures() {
  static const std::map<std::string, std::vector<Curve>> f = {
      {"fig5", {{"gamma", "gamma"}, {"gamma_frac", "gamma_frac"}}},
      {"fig6", {{"vcg", "w_vcg"}, {"fvcg", "w_fvcg"}, {"rand", "w_rand"}}},
      {"fig7",
       {{"fvcg_reuse", "w_fvcg"}, {"rand_reuse", "w_rand"}, {"opt_noreuse", "w_noreuse"},
        {"frac_noreuse", "w_frac_noreuse"}}},
      {"fig8",
       {{"fvcg_reuse", "w_fvcg"}, {"rand_reuse", "w_rand"}, {"opt_noreuse", "w_noreuse"},
        {"frac_noreuse", "w_frac_noreuse"}}},
      {"fig9", {{"gamma_fvcg", "gamma_frac"}, {"gamma_rand", "gamma_rand"}}},
      {"fig10", {{"welfare", "w_reserve"}, {"profit", "profit_reserve"}}},
  };
  return f;
}

}  // namespace

const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : figures()) n.push_back(k);
    return n;
  }();
  return names;
}

std::vector<CurveFile> plot_curves(const Table& table, const std::string& figure) {
  const auto it = figures().find(figure);
  if (it == figures().end()) throw std::invalid_argument("unknown figure '" + figure + "'");
  auto column = [&](const std::string& name) -> int {
    for (std::size_t k = 0; k < table.header.size(); ++k) {
      if (table.header[k] == name) return static_cast<int>(k);
    }
    return -1;
  };
  const int xcol = table.header.size() > 1 ? 1 : -1;
  std::vector<CurveFile> out;
  for (const Curve& cv : it->second) {
    CurveFile f;
    f.name = figure + "_" + cv.stem;
    f.contents = "# x mean stderr\n";
    const int mc = column(std::string(cv.metric) + "_mean");
    const int sc = column(std::string(cv.metric) + "_se");
    if (xcol >= 0 && mc >= 0 && sc >= 0) {
      for (const auto& row : table.rows) {
        if (static_cast<int>(row.size()) <= std::max(mc, sc) || row[mc].empty()) continue;
        f.contents += row[xcol] + " " + row[mc] + " " + row[sc] + "\n";
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace crowdsense
