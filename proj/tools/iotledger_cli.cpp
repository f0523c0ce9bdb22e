// Command-line front end: run scenarios, issue verified queries against a
// stored chain, and reproduce the timing curves as CSV.
//
// Exit codes: 0 ok, 1 usage, 2 validation error, 3 tamper detected.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iotledger/bench.hpp"
#include "iotledger/scenario_json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitTamper = 3;

std::vector<std::size_t> parse_size_list(const std::string& csv, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = std::stoull(item, &pos);
    if (pos != item.size()) throw CLI::ValidationError(std::string(what) + ": bad entry " + item);
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw CLI::ValidationError(std::string(what) + ": empty list");
  return out;
}

int run_simulate(const std::string& config_path, const std::string& out_dir) {
  iotledger::sim::ScenarioConfig cfg;
  try {
    cfg = iotledger::sim::load_scenario(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  iotledger::sim::Network net(cfg);
  net.run();

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string chain_path = (fs::path(out_dir) / "chain.bin").string();
  const std::string cloud_path = (fs::path(out_dir) / "cloud.bin").string();
  const std::string keys_path = (fs::path(out_dir) / "keys.json").string();
  const std::string events_path = (fs::path(out_dir) / "events.jsonl").string();

  iotledger::ledger::save_chain(net.chain(), chain_path);
  net.cloud().save(cloud_path);
  {
    std::ofstream out(keys_path, std::ios::trunc);
    out << iotledger::sim::keys_to_json(net).dump(2) << "\n";
  }
  iotledger::sim::write_events_jsonl(net.events(), events_path);

  std::size_t total_logs = 0;
  for (const auto& b : net.chain().blocks) total_logs += b.body.logs.size();
  nlohmann::json summary{{"blocks", net.chain().blocks.size()},
                         {"logs", total_logs},
                         {"devices", net.devices().size()},
                         {"events", net.events().size()},
                         {"chain", chain_path},
                         {"cloud", cloud_path},
                         {"keys", keys_path},
                         {"event_log", events_path}};
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int run_query(const std::string& chain_path, const std::string& query_path,
              const std::string& keys_path, std::string cloud_path, const std::string& out_path,
              std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (cloud_path.empty())
    cloud_path = (fs::path(chain_path).parent_path() / "cloud.bin").string();

  iotledger::search::KeyStore keys;
  iotledger::search::Query query;
  try {
    keys = iotledger::sim::load_keystore(keys_path);
    query = iotledger::sim::load_query(query_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  iotledger::ledger::Chain chain;
  iotledger::sim::CloudStore cloud;
  try {
    chain = iotledger::ledger::load_chain(chain_path);
    cloud = iotledger::sim::CloudStore::load(cloud_path);
  } catch (const iotledger::ParseError& e) {
    std::cerr << "tamper: chain or cloud store failed to parse: " << e.what() << "\n";
    return kExitTamper;
  } catch (const std::invalid_argument& e) {
    std::cerr << "tamper: chain or cloud store failed to parse: " << e.what() << "\n";
    return kExitTamper;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  iotledger::search::QueryResult result;
  try {
    result = iotledger::search::end_to_end_query(chain, cloud, keys, query, seed);
  } catch (const iotledger::search::TamperError& e) {
    std::cerr << "tamper: " << e.what() << "\n";
    return kExitTamper;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  std::ostream* records = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) {
      std::cerr << "error: cannot open " << out_path << " for writing\n";
      return kExitValidation;
    }
    records = &file;
  }
  for (const iotledger::search::Hit& h : result.hits)
    *records << iotledger::sim::hit_to_json(h).dump() << "\n";
  std::cout << iotledger::sim::result_summary(result).dump(2) << "\n";
  return kExitOk;
}

int run_bench(const std::string& suite, const std::string& dims_csv, const std::string& sizes_csv,
              std::size_t trials, std::uint64_t seed, const std::string& out_path) {
  static const std::vector<std::string> kSuites{"kdtree-build", "kdtree-encrypt", "imt-build",
                                                "trapdoor", "search"};
  if (std::find(kSuites.begin(), kSuites.end(), suite) == kSuites.end()) {
    std::cerr << "usage: unknown suite '" << suite
              << "' (expected kdtree-build, kdtree-encrypt, imt-build, trapdoor, search)\n";
    return kExitUsage;
  }
  std::vector<std::size_t> dims, sizes;
  try {
    dims = parse_size_list(dims_csv, "--dims");
    sizes = parse_size_list(sizes_csv, "--sizes");
  } catch (const std::exception& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return kExitUsage;
  }

  std::vector<iotledger::bench::Row> rows =
      iotledger::bench::run_suite(suite, dims, sizes, trials, seed);
  if (out_path.empty()) {
    iotledger::bench::write_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
      std::cerr << "error: cannot open " << out_path << " for writing\n";
      return kExitValidation;
    }
    iotledger::bench::write_csv(out, rows);
    std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blockchain-backed IoT communication-data manager"};
  app.require_subcommand(1);

  std::string config_path, sim_out = "out";
  CLI::App* simulate = app.add_subcommand("simulate", "Run a scenario and persist the chain");
  simulate->add_option("--config", config_path, "Scenario config (JSON)")->required();
  simulate->add_option("--out", sim_out, "Output directory");

  std::string chain_path, query_path, keys_path, cloud_path, query_out;
  std::uint64_t query_seed = 42;
  CLI::App* query = app.add_subcommand("query", "Run a verified range query over a chain");
  query->add_option("--chain", chain_path, "Chain file")->required();
  query->add_option("--query", query_path, "Query spec (JSON)")->required();
  query->add_option("--keys", keys_path, "Key bundle (JSON)")->required();
  query->add_option("--cloud", cloud_path, "Cloud store file (default: cloud.bin next to chain)");
  query->add_option("--out", query_out, "Write result records here instead of stdout");
  query->add_option("--seed", query_seed, "Trapdoor randomization seed");

  std::string suite, dims_csv = "2,4,8", sizes_csv = "1024,4096,16384", bench_out;
  std::size_t trials = 5;
  std::uint64_t bench_seed = 1;
  CLI::App* bench = app.add_subcommand("bench", "Emit timing curves as CSV");
  bench->add_option("--suite", suite, "kdtree-build|kdtree-encrypt|imt-build|trapdoor|search")
      ->required();
  bench->add_option("--dims", dims_csv, "Comma-separated dimensions");
  bench->add_option("--sizes", sizes_csv, "Comma-separated point counts");
  bench->add_option("--trials", trials, "Trials per parameter point");
  bench->add_option("--seed", bench_seed, "Data seed");
  bench->add_option("--out", bench_out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(config_path, sim_out);
    if (query->parsed()) return run_query(chain_path, query_path, keys_path, cloud_path,
                                          query_out, query_seed);
    if (bench->parsed()) return run_bench(suite, dims_csv, sizes_csv, trials, bench_seed,
                                          bench_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
