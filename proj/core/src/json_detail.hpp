#pragma once

// nlohmann/json conversions shared by the serializers. Not installed.

#include <initializer_list>
#include <string>

#include "crowdsense/market.hpp"
#include "json.hpp"

namespace crowdsense::detail {

using nlohmann::json;

void reject_unknown_fields(const json& object, std::initializer_list<const char*> allowed,
                           const std::string& where);

json item_set_json(const ItemSet& items);  // 1-based ids
ItemSet item_set_from(const json& j, int num_items, const std::string& where);

json oracle_json(const CostOracle& oracle);
CostOracle oracle_from(const json& j, const ItemSet& capability, const std::string& where);

json allocation_json(const Scenario& scenario, const Allocation& allocation);

json parse(std::string_view text, const std::string& what);

}  // namespace crowdsense::detail
