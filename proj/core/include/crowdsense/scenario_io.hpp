#pragma once

// JSON documents for scenarios, bids, allocations and reserve prices.
//
// Scenario:
//   {"data_items": [{"id": 1, "location": [x, y]}, ...],
//    "tasks":      [{"id": 1, "requirements": [1, 2], "value": 0.5}, ...],
//    "users":      [{"id": 1, "capability": [1], "cost": <oracle>}, ...],
//    "seed": 7}
// Oracle:
//   {"kind": "additive", "unit_cost": 0.1}
//   {"kind": "single_minded", "full_set_cost": 1.0}
//   {"kind": "table", "entries": [{"items": [1], "cost": 0.2}, ...]}
//     (every non-empty subset of the capability listed once; the empty set may
//      be omitted and otherwise must cost 0)
// Bids:
//   {"tasks": [{"id": 1, "bid": 0.5}, ...], "users": [{"id": 1, "cost": <oracle>}, ...]}
//   Omitted tasks or users bid truthfully.
// Reserve prices:
//   {"sigma": 0.3} (every item) or {"sigma": [0.3, 0.0, ...]} (one per item)
//
// Ids are 1-based. Unknown fields are rejected with ScenarioError.

#include <string>
#include <string_view>
#include <vector>

#include "crowdsense/market.hpp"

namespace crowdsense {

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(std::string_view text);

std::string oracle_to_json(const CostOracle& oracle);
CostOracle oracle_from_json(std::string_view text, const ItemSet& capability);

std::string bids_to_json(const Bids& bids);
Bids bids_from_json(std::string_view text, const Scenario& scenario);

std::string allocation_to_json(const Scenario& scenario, const Allocation& allocation);

std::vector<double> reserve_prices_from_json(std::string_view text, const Scenario& scenario);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace crowdsense
