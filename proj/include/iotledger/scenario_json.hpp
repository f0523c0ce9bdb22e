#pragma once

// JSON forms of the external interfaces: scenario configs, the key bundle
// written next to a simulated chain, query specs, and line-delimited result
// and event records.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "iotledger/device_sim.hpp"
#include "iotledger/search.hpp"

namespace iotledger::sim {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("config: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad field '") + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad field '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline kdtree::AttributeSchema attribute_from_json(const json& j) {
  kdtree::AttributeSchema a;
  a.name = detail::require<std::string>(j, "name");
  if (j.contains("values")) {
    a.categories = detail::require<std::vector<std::string>>(j, "values");
    if (a.categories.empty())
      throw ConfigError("config: attribute '" + a.name + "' has an empty value list");
  } else {
    a.min = detail::require<double>(j, "min");
    a.max = detail::require<double>(j, "max");
  }
  return a;
}

inline json attribute_to_json(const kdtree::AttributeSchema& a) {
  json j;
  j["name"] = a.name;
  if (a.categorical()) {
    j["values"] = a.categories;
  } else {
    j["min"] = a.min;
    j["max"] = a.max;
  }
  return j;
}

inline ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig cfg;
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
  cfg.base_ts = detail::get_or<std::uint64_t>(j, "base_ts", 1700000000);
  cfg.steps = detail::require<std::size_t>(j, "steps");
  cfg.rate = detail::get_or<double>(j, "rate", 1.0);
  cfg.file_size = detail::get_or<std::size_t>(j, "file_size", 48);
  cfg.difficulty = static_cast<std::uint8_t>(detail::get_or<unsigned>(j, "difficulty", 4));

  if (!j.contains("attributes")) throw ConfigError("config: missing field 'attributes'");
  for (const json& a : j.at("attributes")) cfg.attributes.push_back(attribute_from_json(a));

  if (!j.contains("devices")) throw ConfigError("config: missing field 'devices'");
  const json& dev = j.at("devices");
  if (dev.is_array()) {
    for (const json& d : dev) {
      DeviceSpec spec;
      spec.storage_cap = detail::require<std::uint64_t>(d, "storage_cap");
      spec.chain_suffix = detail::get_or<std::size_t>(d, "chain_suffix", 0);
      cfg.devices.push_back(spec);
    }
  } else {
    std::size_t count = detail::require<std::size_t>(dev, "count");
    DeviceSpec spec;
    spec.storage_cap = detail::require<std::uint64_t>(dev, "storage_cap");
    spec.chain_suffix = detail::get_or<std::size_t>(dev, "chain_suffix", 0);
    cfg.devices.assign(count, spec);
  }

  for (const json& e : detail::get_or<json>(j, "topology", json::array())) {
    if (!e.is_array() || e.size() != 2) throw ConfigError("config: topology edges are [a, b]");
    cfg.topology.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
  }

  if (j.contains("faults")) {
    const json& f = j.at("faults");
    for (std::size_t o : detail::get_or<std::vector<std::size_t>>(f, "deny_receipt", {}))
      cfg.faults.deny_receipt_flushes.insert(o);
    for (const json& d : detail::get_or<json>(f, "drop", json::array()))
      cfg.faults.drops.emplace_back(detail::require<std::size_t>(d, "flush"),
                                    detail::require<std::size_t>(d, "file"));
    for (const json& c : detail::get_or<json>(f, "corrupt", json::array()))
      cfg.faults.corrupts.emplace_back(detail::require<std::size_t>(c, "flush"),
                                       detail::require<std::size_t>(c, "file"),
                                       detail::require<std::size_t>(c, "byte"));
  }

  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(e.what()) + " in " + path);
  }
}

// --- key bundle ---

inline json keys_to_json(const Network& net) {
  json j;
  j["difficulty"] = net.params().expected_difficulty;
  j["cloud"] = {{"id", to_hex(ByteView(net.params().cloud_id.data(), 16))},
                {"public_key", to_hex(ByteView(net.params().cloud_key.data(),
                                               net.params().cloud_key.size()))}};
  json devices = json::array();
  for (const Device& d : net.devices()) {
    json entry;
    entry["id"] = to_hex(ByteView(d.id.data(), d.id.size()));
    entry["public_key"] = to_hex(ByteView(d.keys.sign.pub.data(), d.keys.sign.pub.size()));
    entry["sym_key"] = to_hex(ByteView(d.keys.sym.data(), d.keys.sym.size()));
    entry["aspe_key"] = to_hex(d.keys.aspe_key.bytes());
    devices.push_back(std::move(entry));
  }
  j["devices"] = std::move(devices);
  json schema = json::array();
  for (const kdtree::AttributeSchema& a : net.config().attributes)
    schema.push_back(attribute_to_json(a));
  j["schema"] = std::move(schema);
  return j;
}

inline search::KeyStore keystore_from_json(const json& j) {
  search::KeyStore ks;
  ks.vparams.expected_difficulty =
      static_cast<std::uint8_t>(detail::require<unsigned>(j, "difficulty"));
  const json& cloud = j.at("cloud");
  ks.vparams.cloud_id = array_from_hex<16>(detail::require<std::string>(cloud, "id"));
  ks.vparams.cloud_key = array_from_hex<32>(detail::require<std::string>(cloud, "public_key"));
  for (const json& d : j.at("devices")) {
    DeviceId id = array_from_hex<16>(detail::require<std::string>(d, "id"));
    ks.vparams.device_keys[id] =
        array_from_hex<32>(detail::require<std::string>(d, "public_key"));
    search::DeviceQueryKeys keys;
    Bytes aspe_raw = from_hex(detail::require<std::string>(d, "aspe_key"));
    ByteReader r(aspe_raw);
    keys.aspe_key = aspe::AspeKey::parse(r);
    r.expect_done();
    keys.sym = array_from_hex<32>(detail::require<std::string>(d, "sym_key"));
    ks.devices.emplace(id, std::move(keys));
  }
  return ks;
}

inline search::KeyStore load_keystore(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open keys file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("keys parse error in " + path + ": " + e.what());
  }
  return keystore_from_json(j);
}

// The querier-side keystore for an in-process simulation.
inline search::KeyStore keystore_from_network(const Network& net) {
  search::KeyStore ks;
  ks.vparams = net.params();
  for (const Device& d : net.devices())
    ks.devices.emplace(d.id, search::DeviceQueryKeys{d.keys.aspe_key, d.keys.sym});
  return ks;
}

// --- query spec ---

inline search::Query query_from_json(const json& j) {
  search::Query q;
  const json& tr = j.at("time_range");
  if (!tr.is_array() || tr.size() != 2)
    throw ConfigError("query: time_range must be [lo, hi]");
  q.ts_lo = tr.at(0).get<std::uint64_t>();
  q.ts_hi = tr.at(1).get<std::uint64_t>();
  if (j.contains("participants")) {
    std::set<DeviceId> ids;
    for (const json& p : j.at("participants"))
      ids.insert(array_from_hex<16>(p.get<std::string>()));
    q.participants = std::move(ids);
  }
  geometry::Point lo, hi;
  for (const json& side : j.at("rect")) {
    if (!side.is_array() || side.size() != 2)
      throw ConfigError("query: rect entries must be [lo, hi]");
    lo.coords.push_back(side.at(0).get<double>());
    hi.coords.push_back(side.at(1).get<double>());
  }
  q.rect = geometry::HyperRect{std::move(lo), std::move(hi)};
  q.check();
  return q;
}

inline search::Query load_query(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open query file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("query parse error in " + path + ": " + e.what());
  }
  try {
    return query_from_json(j);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("query: ") + e.what());
  }
}

// --- result and event records ---

inline json hit_to_json(const search::Hit& h) {
  json j;
  j["block"] = h.block_index;
  j["leaf"] = to_hex(ByteView(h.leaf_id.data(), h.leaf_id.size()));
  j["log_index"] = h.log_index;
  j["ts"] = h.log.ts;
  j["file_digest"] = to_hex(ByteView(h.file_digest.data(), h.file_digest.size()));
  j["proof_steps"] = h.proof.path.size();
  if (h.status == search::FileStatus::kRecovered) {
    j["status"] = "recovered";
    j["sender"] = to_hex(ByteView(h.file->sender_id.data(), 16));
    j["receiver"] = to_hex(ByteView(h.file->receiver_id.data(), 16));
    j["body"] = to_hex(h.file->body);
  } else {
    j["status"] = "cloud_lost";
    j["peer_sig"] = to_hex(h.log.peer_sig.bytes());
    j["cloud_receipt"] = to_hex(h.cloud_receipt.bytes());
    j["batch_sig"] = to_hex(h.batch_sig.bytes());
  }
  return j;
}

inline json result_summary(const search::QueryResult& r) {
  std::size_t proof_steps = 0, max_proof = 0;
  for (const search::Hit& h : r.hits) {
    proof_steps += h.proof.path.size();
    max_proof = std::max(max_proof, h.proof.path.size());
  }
  return json{{"hits", r.hits.size()},
              {"blocks_searched", r.blocks_searched},
              {"index_nodes_visited", r.index_nodes_visited},
              {"tree_nodes_visited", r.tree_nodes_visited},
              {"proof_steps_total", proof_steps},
              {"proof_steps_max", max_proof}};
}

inline void write_events_jsonl(const std::vector<SimEvent>& events, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const SimEvent& e : events) {
    json j{{"event", e.event}, {"ts", e.ts}, {"actor", e.actor}, {"digest", e.digest}};
    out << j.dump() << "\n";
  }
}

}  // namespace iotledger::sim
