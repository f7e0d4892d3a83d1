#pragma once

// Random crowdsensing markets: items and users scattered over a rectangle,
// users sense the items within a radius, task requirements follow Zipf item
// popularity.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsense/market.hpp"

namespace crowdsense {

struct GenConfig {
  enum class CostModel { kAdditive, kSingleMinded };

  int J = 12;  // tasks
  int I = 8;   // users
  int K = 8;   // data items
  double width = 1000.0;
  double height = 1000.0;
  double radius = 100.0;
  double unit_cost_lo = 1.0;
  double unit_cost_hi = 5.0;
  double unit_value_lo = 1.0;
  double unit_value_hi = 5.0;
  double zipf_mu = 1.0;
  std::uint64_t seed = 1;
  // kSingleMinded charges rho_c * |S_i| for the whole capability or nothing.
  CostModel cost_model = CostModel::kAdditive;

  /// Throws ScenarioError on invalid values.
  void validate() const;
};

/// (1/w)^mu normalized over w = 1..K.
std::vector<double> zipf_popularity(int K, double mu);

struct GenStats {
  int idle_users = 0;       // users whose capability is empty
  long requirement_redraws = 0;
  double mean_requirement_size = 0.0;
  double mean_capability_size = 0.0;
};

/// Item k (0-based) has popularity rank k + 1. Separate random streams are
/// used for items, users and tasks, so changing I leaves the tasks intact.
Scenario generate(const GenConfig& config, GenStats* stats = nullptr);

std::string gen_config_to_json(const GenConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
GenConfig gen_config_from_json(std::string_view text);

}  // namespace crowdsense
