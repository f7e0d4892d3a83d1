#include "crowdsense/scenario_gen.hpp"

#include <cmath>
#include <limits>

#include "crowdsense/rng.hpp"
#include "json_detail.hpp"

namespace crowdsense {

namespace {

enum Stream : std::uint64_t { kItemStream = 0, kUserStream = 1, kTaskStream = 2 };

}  // namespace

void GenConfig::validate() const {
  if (J < 0 || I < 0) throw ScenarioError("J and I must be nonnegative");
  if (K < 1) throw ScenarioError("K must be at least 1");
  if (!(width > 0.0) || !(height > 0.0)) throw ScenarioError("area must be positive");
  if (!(radius > 0.0)) throw ScenarioError("radius must be positive");
  if (!(unit_cost_lo >= 0.0 && unit_cost_hi >= unit_cost_lo)) throw ScenarioError("bad unit-cost range");
  if (!(unit_value_lo >= 0.0 && unit_value_hi >= unit_value_lo)) throw ScenarioError("bad unit-value range");
  if (!(zipf_mu >= 0.0) || !std::isfinite(zipf_mu)) throw ScenarioError("zipf mu must be >= 0");
}

std::vector<double> zipf_popularity(int K, double mu) {
  if (K < 1) throw ScenarioError("zipf_popularity needs K >= 1");
  if (!(mu >= 0.0)) throw ScenarioError("zipf_popularity needs mu >= 0");
  std::vector<double> p(K);
  double total = 0.0;
  for (int w = 1; w <= K; ++w) total += p[w - 1] = std::pow(1.0 / w, mu);
  for (double& x : p) x /= total;
  return p;
}

Scenario generate(const GenConfig& c, GenStats* stats) {
  c.validate();
  Rng item_rng(derive_seed(c.seed, kItemStream));
  Rng user_rng(derive_seed(c.seed, kUserStream));
  Rng task_rng(derive_seed(c.seed, kTaskStream));
  GenStats st;

  std::vector<DataItem> items(c.K);
  for (int k = 0; k < c.K; ++k) {
    items[k].id = k + 1;
    const double x = item_rng.uniform(0.0, c.width);
    items[k].location = Location{x, item_rng.uniform(0.0, c.height)};
  }

  const double r2 = c.radius * c.radius;
  std::vector<User> users(c.I);
  for (int i = 0; i < c.I; ++i) {
    users[i].id = i + 1;
    const double ux = user_rng.uniform(0.0, c.width);
    const double uy = user_rng.uniform(0.0, c.height);
    for (int k = 0; k < c.K; ++k) {
      const double dx = items[k].location->x - ux, dy = items[k].location->y - uy;
      if (dx * dx + dy * dy <= r2) users[i].capability.push_back(k);
    }
    const double rho = user_rng.uniform(c.unit_cost_lo, c.unit_cost_hi);
    users[i].cost = c.cost_model == GenConfig::CostModel::kAdditive
                        ? CostOracle::additive(rho)
                        : CostOracle::single_minded(rho * users[i].capability.size());
    if (users[i].capability.empty()) ++st.idle_users;
    st.mean_capability_size += users[i].capability.size();
  }

  const std::vector<double> pop = zipf_popularity(c.K, c.zipf_mu);
  std::vector<Task> tasks(c.J);
  for (int j = 0; j < c.J; ++j) {
    tasks[j].id = j + 1;
    for (;;) {
      tasks[j].requirements.clear();
      for (int k = 0; k < c.K; ++k) {
        if (task_rng.bernoulli(pop[k])) tasks[j].requirements.push_back(k);
      }
      if (!tasks[j].requirements.empty()) break;
      ++st.requirement_redraws;
    }
    tasks[j].value = task_rng.uniform(c.unit_value_lo, c.unit_value_hi) * tasks[j].requirements.size();
    st.mean_requirement_size += tasks[j].requirements.size();
  }
  if (c.J > 0) st.mean_requirement_size /= c.J;
  if (c.I > 0) st.mean_capability_size /= c.I;
  if (stats) *stats = st;
  return Scenario(std::move(items), std::move(tasks), std::move(users), c.seed);
}

std::string gen_config_to_json(const GenConfig& c) {
  detail::json j;
  j["J"] = c.J;
  j["I"] = c.I;
  j["K"] = c.K;
  j["area"] = {c.width, c.height};
  j["radius"] = c.radius;
  j["unit_cost"] = {c.unit_cost_lo, c.unit_cost_hi};
  j["unit_value"] = {c.unit_value_lo, c.unit_value_hi};
  j["zipf_mu"] = c.zipf_mu;
  j["seed"] = c.seed;
  j["cost_model"] = c.cost_model == GenConfig::CostModel::kAdditive ? "additive" : "single_minded";
  return j.dump(2);
}

GenConfig gen_config_from_json(std::string_view text) {
  const detail::json j = detail::parse(text, "generator config");
  if (!j.is_object()) throw ScenarioError("generator config must be an object");
  detail::reject_unknown_fields(
      j, {"J", "I", "K", "area", "radius", "unit_cost", "unit_value", "zipf_mu", "seed", "cost_model"},
      "generator config");
  GenConfig c;
  try {
    if (j.contains("J")) c.J = j.at("J").get<int>();
    if (j.contains("I")) c.I = j.at("I").get<int>();
    if (j.contains("K")) c.K = j.at("K").get<int>();
    auto pair = [&](const char* key, double& lo, double& hi) {
      if (!j.contains(key)) return;
      const auto& a = j.at(key);
      if (!a.is_array() || a.size() != 2) throw ScenarioError(std::string(key) + " must be [lo, hi]");
      lo = a[0].get<double>();
      hi = a[1].get<double>();
    };
    pair("area", c.width, c.height);
    pair("unit_cost", c.unit_cost_lo, c.unit_cost_hi);
    pair("unit_value", c.unit_value_lo, c.unit_value_hi);
    if (j.contains("radius")) c.radius = j.at("radius").get<double>();
    if (j.contains("zipf_mu")) c.zipf_mu = j.at("zipf_mu").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("cost_model")) {
      const std::string m = j.at("cost_model").get<std::string>();
      if (m == "additive") {
        c.cost_model = GenConfig::CostModel::kAdditive;
      } else if (m == "single_minded") {
        c.cost_model = GenConfig::CostModel::kSingleMinded;
      } else {
        throw ScenarioError("unknown cost_model '" + m + "'");
      }
    }
  } catch (const detail::json::exception& e) {
    throw ScenarioError(std::string("generator config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace crowdsense
