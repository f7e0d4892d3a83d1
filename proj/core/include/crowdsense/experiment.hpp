#pragma once

// Batch campaigns: sweep one parameter, replicate, run the solvers and
// auctions, and write raw, timing and aggregated CSV tables.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsense/scenario_gen.hpp"

namespace crowdsense {

enum class SweepVariable { kUsers, kZipfMu, kReserve, kItems, kDemandProb };
enum class MarketModel { kGeometric, kMultiItem };

const char* sweep_name(SweepVariable v);

struct Campaign {
  std::string name = "campaign";
  SweepVariable sweep = SweepVariable::kUsers;
  std::vector<double> grid;
  MarketModel model = MarketModel::kGeometric;
  GenConfig base;  // seed is ignored; rows derive their own
  // kMultiItem markets
  double demand_prob = 0.5;
  double supply_prob = -1.0;  // negative: same as demand_prob
  bool vcg = true;
  bool fvcg = true;
  bool rand = true;
  bool reserve = false;
  bool integer_solves = true;  // integer optima with and without reuse
  double sigma = 0.0;          // reserve price per item when the sweep is not kReserve
  int replications = 10;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string output_dir = ".";

  void validate() const;
  /// Full-size campaign grid: J = 50, K = 30, I up to
  /// 100, 1000 replications, no integer VCG.
  static Campaign paper_scale(Campaign c);
};

Campaign campaign_from_json(std::string_view text);
std::string campaign_to_json(const Campaign& c);

/// Seed of replication `rep`. It does not depend on the grid point, so every
/// point of a sweep sees the same random markets apart from the swept value.
std::uint64_t row_seed(std::uint64_t master, int rep);

/// Metric names in column order.
const std::vector<std::string>& metric_names();

struct RowResult {
  int point = 0;
  double x = 0.0;
  int rep = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::map<std::string, double> metrics;  // absent key: not computed
  std::map<std::string, double> seconds;  // wall-clock per stage
};

struct AggregateRow {
  int point = 0;
  double x = 0.0;
  int ok = 0;
  int failed = 0;
  std::map<std::string, std::pair<double, double>> metrics;  // mean, stderr
  std::map<std::string, int> counts;
};

struct CampaignResult {
  std::vector<RowResult> rows;
  std::vector<AggregateRow> aggregated;
  int failures = 0;
  bool failed = false;  // more than 5% of rows failed
};

/// Solves one replication. Never throws for solver trouble; that ends up in
/// RowResult::error.
RowResult run_row(const Campaign& c, int point, int rep);

CampaignResult run_campaign(const Campaign& c);
std::vector<AggregateRow> aggregate(const Campaign& c, const std::vector<RowResult>& rows);

std::string rows_csv(const Campaign& c, const std::vector<RowResult>& rows);
std::string timings_csv(const std::vector<RowResult>& rows);
std::string aggregated_csv(const Campaign& c, const std::vector<AggregateRow>& rows);

/// Writes <name>_rows.csv, <name>_timings.csv, <name>_aggregated.csv and
/// <name>_summary.json into the output directory. Returns the paths.
std::vector<std::string> write_campaign(const Campaign& c, const CampaignResult& r);

/// Aggregated table as read back from CSV.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
Table read_csv(std::string_view text);

struct CurveFile {
  std::string name;      // file stem, e.g. "fig6_vcg"
  std::string contents;  // "# x mean stderr" then one line per point
};

/// Known figures: fig5 (gain vs item count), fig6 (auction welfare), fig7 and
/// fig8 (welfare with and without reuse vs users / zipf mu), fig9 (gain),
/// fig10 (reserve-price welfare and profit). Throws std::invalid_argument.
std::vector<CurveFile> plot_curves(const Table& aggregated, const std::string& figure);
const std::vector<std::string>& figure_names();

}  // namespace crowdsense
