#include "crowdsense/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_detail.hpp"

namespace crowdsense {
namespace detail {

void reject_unknown_fields(const json& object, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  if (!object.is_object()) throw ScenarioError(where + ": expected a JSON object");
  for (const auto& [key, _] : object.items()) {
    bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) throw ScenarioError(where + ": unknown field \"" + key + "\"");
  }
}

namespace {

const json& require(const json& object, const char* key, const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) throw ScenarioError(where + ": missing field \"" + key + "\"");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ScenarioError(where + ": expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ScenarioError(where + ": expected an integer");
  return j.get<int>();
}

}  // namespace

json item_set_json(const ItemSet& items) {
  json out = json::array();
  for (int k : items) out.push_back(k + 1);
  return out;
}

ItemSet item_set_from(const json& j, int num_items, const std::string& where) {
  if (!j.is_array()) throw ScenarioError(where + ": expected an array of item ids");
  std::vector<int> items;
  for (const json& e : j) {
    const int id = integer(e, where);
    if (id < 1 || id > num_items) {
      throw ScenarioError(where + ": item id " + std::to_string(id) + " out of range");
    }
    items.push_back(id - 1);
  }
  ItemSet set = make_item_set(items);
  if (set.size() != items.size()) throw ScenarioError(where + ": duplicate item ids");
  return set;
}

json oracle_json(const CostOracle& oracle) {
  switch (oracle.kind()) {
    case CostOracle::Kind::kAdditive:
      return {{"kind", "additive"}, {"unit_cost", oracle.unit_cost()}};
    case CostOracle::Kind::kSingleMinded:
      return {{"kind", "single_minded"}, {"full_set_cost", oracle.full_set_cost()}};
    case CostOracle::Kind::kTable: {
      const ItemSet& dom = oracle.table_domain();
      json entries = json::array();
      for (std::size_t mask = 1; mask < oracle.table_costs().size(); ++mask) {
        ItemSet s;
        for (std::size_t b = 0; b < dom.size(); ++b) {
          if (mask & (std::size_t{1} << b)) s.push_back(dom[b]);
        }
        entries.push_back({{"items", item_set_json(s)}, {"cost", oracle.table_costs()[mask]}});
      }
      return {{"kind", "table"}, {"entries", entries}};
    }
  }
  return {};
}

CostOracle oracle_from(const json& j, const ItemSet& capability, const std::string& where) {
  if (!j.is_object()) throw ScenarioError(where + ": cost oracle must be an object");
  const json& kind = require(j, "kind", where);
  if (!kind.is_string()) throw ScenarioError(where + ": oracle kind must be a string");
  const std::string k = kind.get<std::string>();
  if (k == "additive") {
    reject_unknown_fields(j, {"kind", "unit_cost"}, where);
    return CostOracle::additive(number(require(j, "unit_cost", where), where + ".unit_cost"));
  }
  if (k == "single_minded") {
    reject_unknown_fields(j, {"kind", "full_set_cost"}, where);
    return CostOracle::single_minded(
        number(require(j, "full_set_cost", where), where + ".full_set_cost"));
  }
  if (k == "table") {
    reject_unknown_fields(j, {"kind", "entries"}, where);
    if (capability.size() > static_cast<std::size_t>(kTableSubsetCap)) {
      throw ScenarioError(where + ": table oracle over " + std::to_string(capability.size()) +
                          " items exceeds the subset cap");
    }
    const json& entries = require(j, "entries", where);
    if (!entries.is_array()) throw ScenarioError(where + ".entries: expected an array");
    const std::size_t n = std::size_t{1} << capability.size();
    std::vector<double> costs(n, 0.0);
    std::vector<bool> seen(n, false);
    for (const json& e : entries) {
      reject_unknown_fields(e, {"items", "cost"}, where + ".entries");
      const ItemSet s = item_set_from(require(e, "items", where), 1 << 30, where + ".entries");
      std::size_t mask = 0;
      for (int item : s) {
        auto it = std::lower_bound(capability.begin(), capability.end(), item);
        if (it == capability.end() || *it != item) {
          throw ScenarioError(where + ": table entry uses item " + std::to_string(item + 1) +
                              " outside the capability");
        }
        mask |= std::size_t{1} << (it - capability.begin());
      }
      if (seen[mask]) throw ScenarioError(where + ": duplicate table entry");
      seen[mask] = true;
      costs[mask] = number(require(e, "cost", where), where + ".entries.cost");
    }
    for (std::size_t mask = 1; mask < n; ++mask) {
      if (!seen[mask]) throw ScenarioError(where + ": table oracle is missing a subset");
    }
    return CostOracle::table(capability, std::move(costs));
  }
  throw ScenarioError(where + ": unknown oracle kind \"" + k + "\"");
}

json allocation_json(const Scenario& scenario, const Allocation& a) {
  json users = json::array();
  for (int i = 0; i < scenario.num_users(); ++i) {
    const UserSchedule& s = a.x[i];
    json u = {{"id", i + 1}};
    if (s.independent) {
      json m = json::array();
      const ItemSet& cap = scenario.user(i).capability;
      for (std::size_t p = 0; p < cap.size(); ++p) {
        m.push_back({{"item", cap[p] + 1}, {"weight", s.item_marginals[p]}});
      }
      u["item_marginals"] = m;
    } else {
      json sched = json::array();
      for (const SubsetWeight& sw : s.subsets) {
        if (sw.weight == 0.0) continue;
        sched.push_back({{"items", item_set_json(sw.items)}, {"weight", sw.weight}});
      }
      u["schedule"] = sched;
    }
    users.push_back(u);
  }
  return {{"integral", a.integral}, {"z", a.z}, {"y", a.y}, {"users", users}};
}

json parse(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ScenarioError(what + ": malformed JSON: " + e.what());
  }
}

}  // namespace detail

using detail::json;

std::string scenario_to_json(const Scenario& scenario) {
  json items = json::array();
  for (const DataItem& d : scenario.items()) {
    json e = {{"id", d.id}};
    if (d.location) e["location"] = {d.location->x, d.location->y};
    items.push_back(e);
  }
  json tasks = json::array();
  for (const Task& t : scenario.tasks()) {
    tasks.push_back({{"id", t.id},
                     {"requirements", detail::item_set_json(t.requirements)},
                     {"value", t.value}});
  }
  json users = json::array();
  for (const User& u : scenario.users()) {
    users.push_back({{"id", u.id},
                     {"capability", detail::item_set_json(u.capability)},
                     {"cost", detail::oracle_json(u.cost)}});
  }
  json doc = {{"data_items", items}, {"tasks", tasks}, {"users", users}, {"seed", scenario.seed()}};
  return doc.dump(2);
}

Scenario scenario_from_json(std::string_view text) {
  const json doc = detail::parse(text, "scenario");
  detail::reject_unknown_fields(doc, {"data_items", "tasks", "users", "seed"}, "scenario");
  for (const char* key : {"data_items", "tasks", "users"}) {
    if (!doc.contains(key) || !doc[key].is_array()) {
      throw ScenarioError(std::string("scenario: \"") + key + "\" must be an array");
    }
  }
  // Entries may appear in any order; ids must be dense.
  auto by_id = [](const json& arr, const std::string& what) {
    std::vector<const json*> slots(arr.size(), nullptr);
    for (const json& e : arr) {
      if (!e.is_object() || !e.contains("id") || !e["id"].is_number_integer()) {
        throw ScenarioError(what + ": every entry needs an integer id");
      }
      const int id = e["id"].get<int>();
      if (id < 1 || id > static_cast<int>(arr.size()) || slots[id - 1] != nullptr) {
        throw ScenarioError(what + ": ids must be unique and dense in 1.." +
                            std::to_string(arr.size()));
      }
      slots[id - 1] = &e;
    }
    return slots;
  };

  std::vector<DataItem> items;
  for (const json* e : by_id(doc["data_items"], "data_items")) {
    detail::reject_unknown_fields(*e, {"id", "location"}, "data_items");
    DataItem d{(*e)["id"].get<int>(), std::nullopt};
    if (e->contains("location")) {
      const json& loc = (*e)["location"];
      if (!loc.is_array() || loc.size() != 2 || !loc[0].is_number() || !loc[1].is_number()) {
        throw ScenarioError("data_items: location must be [x, y]");
      }
      d.location = Location{loc[0].get<double>(), loc[1].get<double>()};
    }
    items.push_back(d);
  }
  const int K = static_cast<int>(items.size());

  std::vector<Task> tasks;
  for (const json* e : by_id(doc["tasks"], "tasks")) {
    const std::string where = "task " + std::to_string((*e)["id"].get<int>());
    detail::reject_unknown_fields(*e, {"id", "requirements", "value"}, where);
    Task t;
    t.id = (*e)["id"].get<int>();
    if (!e->contains("requirements")) throw ScenarioError(where + ": missing requirements");
    t.requirements = detail::item_set_from((*e)["requirements"], K, where);
    if (!e->contains("value") || !(*e)["value"].is_number()) {
      throw ScenarioError(where + ": value must be a number");
    }
    t.value = (*e)["value"].get<double>();
    tasks.push_back(std::move(t));
  }

  std::vector<User> users;
  for (const json* e : by_id(doc["users"], "users")) {
    const std::string where = "user " + std::to_string((*e)["id"].get<int>());
    detail::reject_unknown_fields(*e, {"id", "capability", "cost"}, where);
    User u;
    u.id = (*e)["id"].get<int>();
    if (!e->contains("capability") || !e->contains("cost")) {
      throw ScenarioError(where + ": capability and cost are required");
    }
    u.capability = detail::item_set_from((*e)["capability"], K, where);
    u.cost = detail::oracle_from((*e)["cost"], u.capability, where);
    users.push_back(std::move(u));
  }

  std::uint64_t seed = 0;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer()) {
      throw ScenarioError("scenario: seed must be a nonnegative integer");
    }
    seed = doc["seed"].get<std::uint64_t>();
  }
  return Scenario(std::move(items), std::move(tasks), std::move(users), seed);
}

std::string oracle_to_json(const CostOracle& oracle) { return detail::oracle_json(oracle).dump(); }

CostOracle oracle_from_json(std::string_view text, const ItemSet& capability) {
  return detail::oracle_from(detail::parse(text, "oracle"), capability, "oracle");
}

std::string bids_to_json(const Bids& bids) {
  json tasks = json::array();
  for (std::size_t j = 0; j < bids.values.size(); ++j) {
    tasks.push_back({{"id", j + 1}, {"bid", bids.values[j]}});
  }
  json users = json::array();
  for (std::size_t i = 0; i < bids.costs.size(); ++i) {
    users.push_back({{"id", i + 1}, {"cost", detail::oracle_json(bids.costs[i])}});
  }
  return json{{"tasks", tasks}, {"users", users}}.dump(2);
}

Bids bids_from_json(std::string_view text, const Scenario& scenario) {
  const json doc = detail::parse(text, "bids");
  detail::reject_unknown_fields(doc, {"tasks", "users"}, "bids");
  Bids bids = Bids::truthful(scenario);
  if (doc.contains("tasks")) {
    for (const json& e : doc["tasks"]) {
      detail::reject_unknown_fields(e, {"id", "bid"}, "bids.tasks");
      const int id = e.at("id").get<int>();
      if (id < 1 || id > scenario.num_tasks()) throw ScenarioError("bids: unknown task id");
      if (!e.contains("bid") || !e["bid"].is_number()) throw ScenarioError("bids: bid must be a number");
      bids.values[id - 1] = e["bid"].get<double>();
    }
  }
  if (doc.contains("users")) {
    for (const json& e : doc["users"]) {
      detail::reject_unknown_fields(e, {"id", "cost"}, "bids.users");
      const int id = e.at("id").get<int>();
      if (id < 1 || id > scenario.num_users()) throw ScenarioError("bids: unknown user id");
      bids.costs[id - 1] = detail::oracle_from(e.at("cost"), scenario.user(id - 1).capability,
                                               "bids.user " + std::to_string(id));
    }
  }
  check_bids(scenario, bids);
  return bids;
}

std::string allocation_to_json(const Scenario& scenario, const Allocation& allocation) {
  return detail::allocation_json(scenario, allocation).dump(2);
}

std::vector<double> reserve_prices_from_json(std::string_view text, const Scenario& scenario) {
  const json doc = detail::parse(text, "reserve prices");
  detail::reject_unknown_fields(doc, {"sigma"}, "reserve prices");
  if (!doc.contains("sigma")) throw ScenarioError("reserve prices: missing \"sigma\"");
  const json& s = doc["sigma"];
  std::vector<double> sigma;
  if (s.is_number()) {
    sigma.assign(scenario.num_items(), s.get<double>());
  } else if (s.is_array()) {
    for (const json& e : s) {
      if (!e.is_number()) throw ScenarioError("reserve prices: entries must be numbers");
      sigma.push_back(e.get<double>());
    }
    if (static_cast<int>(sigma.size()) != scenario.num_items()) {
      throw ScenarioError("reserve prices: need one price per data item");
    }
  } else {
    throw ScenarioError("reserve prices: sigma must be a number or an array");
  }
  for (double v : sigma) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ScenarioError("reserve prices must be >= 0");
  }
  return sigma;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

}  // namespace crowdsense
