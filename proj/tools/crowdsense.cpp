// crowdsense: command-line front end for the market library.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <crowdsense/experiment.hpp>
#include <crowdsense/mechanisms.hpp>
#include <crowdsense/reuse_bounds.hpp>
#include <crowdsense/scenario_gen.hpp>
#include <crowdsense/scenario_io.hpp>
#include <crowdsense/welfare.hpp>

namespace cs = crowdsense;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kInput = 2, kCampaignPartial = 3, kCampaignFailed = 4 };

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text << '\n';
  } else {
    cs::write_file(out, text + "\n");
  }
}

cs::Bids load_bids(const cs::Scenario& sc, const std::string& path) {
  return path.empty() ? cs::Bids::truthful(sc) : cs::bids_from_json(cs::read_file(path), sc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-reuse crowdsensing markets: welfare solvers, auctions and experiments"};
  app.require_subcommand(1);
  std::string out;

  // generate
  auto* gen = app.add_subcommand("generate", "Random scenario from a generator config");
  std::string gen_config;
  int J = 0, I = 0, K = 0;
  std::vector<double> area, unit_cost, unit_value;
  double radius = 0, mu = 0;
  std::uint64_t gen_seed = 0;
  std::string cost_model;
  bool show_stats = false;
  gen->add_option("--config", gen_config, "Generator config JSON file");
  gen->add_option("-J,--tasks", J, "Number of tasks");
  gen->add_option("-I,--users", I, "Number of users");
  gen->add_option("-K,--items", K, "Number of data items");
  gen->add_option("--area", area, "Width and height in meters")->expected(2);
  gen->add_option("--radius", radius, "Sensing radius in meters");
  gen->add_option("--unit-cost", unit_cost, "Unit-cost range")->expected(2);
  gen->add_option("--unit-value", unit_value, "Unit-value range")->expected(2);
  gen->add_option("--mu", mu, "Zipf exponent");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--cost-model", cost_model, "additive or single_minded")
      ->check(CLI::IsMember({"additive", "single_minded"}));
  gen->add_flag("--stats", show_stats, "Print generation statistics to stderr");
  gen->add_option("-o,--out", out, "Output file (default stdout)");

  // solve
  auto* solve = app.add_subcommand("solve", "Welfare optimum of a scenario");
  std::string scenario_path, bids_path, mode = "reuse";
  long max_nodes = 0;
  solve->add_option("scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  solve->add_option("--mode", mode, "reuse, noreuse or fractional")
      ->check(CLI::IsMember({"reuse", "noreuse", "fractional"}));
  solve->add_option("--bids", bids_path, "Bids JSON (default: truthful)")->check(CLI::ExistingFile);
  solve->add_option("--max-nodes", max_nodes, "Branch-and-bound node limit (0 = none)");
  solve->add_option("-o,--out", out, "Output file (default stdout)");

  // auction
  auto* auction = app.add_subcommand("auction", "Run one auction mechanism");
  std::string mechanism = "rand", sigma_path;
  std::uint64_t auction_seed = 0;
  long mc_samples = 100000;
  auction->add_option("scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  auction->add_option("--bids", bids_path, "Bids JSON (default: truthful)")->check(CLI::ExistingFile);
  auction->add_option("--mechanism", mechanism, "vcg, fvcg, rand or reserve")
      ->check(CLI::IsMember({"vcg", "fvcg", "rand", "reserve"}));
  auction->add_option("--sigma", sigma_path, "Reserve prices JSON (reserve only)")->check(CLI::ExistingFile);
  auction->add_option("--seed", auction_seed, "Sampling seed");
  auction->add_option("--mc-samples", mc_samples, "Monte Carlo samples for large coverage sets");
  auction->add_option("-o,--out", out, "Output file (default stdout)");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Monte Carlo welfare with and without reuse");
  std::string kind = "single", format = "json";
  int bI = 2, bJ = 2, bK = 1, workers = 1;
  double demand = 0.5, supply = -1.0;
  long reps = 100000;
  std::uint64_t bseed = 1;
  bounds->add_option("--kind", kind, "single or multi")->check(CLI::IsMember({"single", "multi"}));
  bounds->add_option("-I,--users", bI, "Number of users");
  bounds->add_option("-J,--tasks", bJ, "Number of tasks");
  bounds->add_option("-K,--items", bK, "Number of items (multi)");
  bounds->add_option("--demand-prob", demand, "Per-item demand probability (multi)");
  bounds->add_option("--supply-prob", supply, "Per-item supply probability (multi; default = demand)");
  bounds->add_option("--reps", reps, "Replications");
  bounds->add_option("--seed", bseed, "Master seed");
  bounds->add_option("--workers", workers, "Worker threads");
  bounds->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  bounds->add_option("-o,--out", out, "Output file (default stdout)");

  // campaign
  auto* campaign = app.add_subcommand("campaign", "Run a sweep campaign");
  std::string campaign_path, out_dir;
  bool paper_scale = false;
  int campaign_workers = 0;
  campaign->add_option("file", campaign_path, "Campaign JSON")->required()->check(CLI::ExistingFile);
  campaign->add_flag("--paper-scale", paper_scale, "Full-size grid (J=50, K=30) without integer VCG");
  campaign->add_option("--workers", campaign_workers, "Worker threads (overrides the file)");
  campaign->add_option("--output-dir", out_dir, "Output directory (overrides the file)");

  // plot
  auto* plot = app.add_subcommand("plot", "Curve files from an aggregated table");
  std::string table_path, figure;
  plot->add_option("table", table_path, "Aggregated CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("figure", figure, "fig5 .. fig10")->required();
  plot->add_option("--output-dir", out_dir, "Output directory (default: next to the table)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*gen) {
      cs::GenConfig c = gen_config.empty() ? cs::GenConfig{} : cs::gen_config_from_json(cs::read_file(gen_config));
      if (gen->count("--tasks")) c.J = J;
      if (gen->count("--users")) c.I = I;
      if (gen->count("--items")) c.K = K;
      if (gen->count("--area")) c.width = area[0], c.height = area[1];
      if (gen->count("--radius")) c.radius = radius;
      if (gen->count("--unit-cost")) c.unit_cost_lo = unit_cost[0], c.unit_cost_hi = unit_cost[1];
      if (gen->count("--unit-value")) c.unit_value_lo = unit_value[0], c.unit_value_hi = unit_value[1];
      if (gen->count("--mu")) c.zipf_mu = mu;
      if (gen->count("--seed")) c.seed = gen_seed;
      if (gen->count("--cost-model")) {
        c.cost_model = cost_model == "additive" ? cs::GenConfig::CostModel::kAdditive
                                                : cs::GenConfig::CostModel::kSingleMinded;
      }
      cs::GenStats st;
      const cs::Scenario sc = cs::generate(c, &st);
      emit(cs::scenario_to_json(sc), out);
      if (show_stats) {
        std::fprintf(stderr, "idle_users=%d requirement_redraws=%ld mean_requirement=%.4f mean_capability=%.4f\n",
                     st.idle_users, st.requirement_redraws, st.mean_requirement_size, st.mean_capability_size);
      }
    } else if (*solve) {
      const cs::Scenario sc = cs::scenario_from_json(cs::read_file(scenario_path));
      const cs::Bids bids = load_bids(sc, bids_path);
      cs::WelfareSolution sol;
      if (mode == "fractional") {
        sol = cs::solve_fractional(cs::WelfareProblem(sc, bids, cs::ReuseMode::kReuse));
      } else {
        cs::BranchOptions opt;
        opt.max_nodes = max_nodes;
        sol = cs::solve_integer(
            cs::WelfareProblem(sc, bids, mode == "reuse" ? cs::ReuseMode::kReuse : cs::ReuseMode::kNoReuse), opt);
      }
      emit(cs::solution_to_json(sc, sol, mode), out);
    } else if (*auction) {
      const cs::Scenario sc = cs::scenario_from_json(cs::read_file(scenario_path));
      const cs::Bids bids = load_bids(sc, bids_path);
      cs::PolicyOptions opt;
      opt.monte_carlo_samples = mc_samples;
      cs::AuctionOutcome o;
      if (mechanism == "vcg") {
        o = cs::vcg(sc, bids);
      } else if (mechanism == "fvcg") {
        o = cs::fractional_vcg(sc, bids);
      } else if (mechanism == "rand") {
        o = cs::randomized_auction(sc, bids, auction_seed, opt);
      } else {
        if (sigma_path.empty()) throw cs::ScenarioError("the reserve mechanism needs --sigma");
        const auto sigma = cs::reserve_prices_from_json(cs::read_file(sigma_path), sc);
        o = cs::reserve_price_auction(sc, bids, sigma, auction_seed, opt);
      }
      emit(cs::outcome_to_json(sc, o), out);
    } else if (*bounds) {
      cs::McOptions opt;
      opt.workers = workers;
      const cs::BoundReport r = kind == "single"
                                    ? cs::mc_gain_single_item(bI, bJ, reps, bseed, opt)
                                    : cs::mc_gain_multi_item(bI, bJ, bK, demand, reps, bseed, supply, opt);
      emit(format == "json" ? cs::bound_report_to_json(r) : cs::bound_csv_header() + "\n" + cs::bound_csv_row(r),
           out);
    } else if (*campaign) {
      cs::Campaign c = cs::campaign_from_json(cs::read_file(campaign_path));
      if (paper_scale) c = cs::Campaign::paper_scale(c);
      if (campaign_workers > 0) c.workers = campaign_workers;
      if (!out_dir.empty()) c.output_dir = out_dir;
      const cs::CampaignResult r = cs::run_campaign(c);
      for (const auto& f : cs::write_campaign(c, r)) std::cout << f << '\n';
      if (r.failures) {
        std::fprintf(stderr, "%d of %zu rows failed\n", r.failures, r.rows.size());
        return r.failed ? kCampaignFailed : kCampaignPartial;
      }
    } else if (*plot) {
      const cs::Table t = cs::read_csv(cs::read_file(table_path));
      std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(table_path).parent_path()
                                                  : std::filesystem::path(out_dir);
      if (!dir.empty()) std::filesystem::create_directories(dir);
      for (const auto& curve : cs::plot_curves(t, figure)) {
        const std::string path = (dir / (curve.name + ".dat")).string();
        cs::write_file(path, curve.contents);
        std::cout << path << '\n';
      }
    }
  } catch (const cs::ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
