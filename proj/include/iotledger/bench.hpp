#pragma once

// Micro-benchmark harness behind the `bench` CLI command and the performance
// trend checks: index build, index encryption, Merkle overlay construction,
// trapdoor generation, and encrypted search, each swept over point count and
// dimension. Cheap operations run a fixed repetition block per trial so the
// wall times stay well above timer resolution.

#include <chrono>
#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "iotledger/aspe.hpp"
#include "iotledger/comm_log.hpp"
#include "iotledger/geometry.hpp"
#include "iotledger/imt.hpp"
#include "iotledger/kdtree.hpp"
#include "iotledger/rng.hpp"
#include "iotledger/search.hpp"

namespace iotledger::bench {

struct Row {
  std::string suite;
  std::size_t l = 0;
  std::size_t n = 0;
  std::size_t trial = 0;
  std::uint64_t wall_ns = 0;
};

constexpr const char* kCsvHeader = "suite,l,n,trial,wall_nanoseconds";

constexpr std::size_t kTrapdoorReps = 256;
constexpr std::size_t kSearchReps = 16;

inline void write_csv(std::ostream& out, const std::vector<Row>& rows) {
  out << kCsvHeader << "\n";
  for (const Row& r : rows)
    out << r.suite << "," << r.l << "," << r.n << "," << r.trial << "," << r.wall_ns << "\n";
}

namespace detail {

inline std::uint64_t now_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

inline std::vector<kdtree::PointRecord> uniform_records(std::size_t l, std::size_t n,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<kdtree::PointRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    geometry::Point p;
    p.coords.reserve(l);
    for (std::size_t j = 0; j < l; ++j) p.coords.push_back(rng.unit());
    kdtree::LeafPayload payload;
    for (auto& b : payload.cipher_ref) b = rng.byte();
    payload.log_index = i;
    records.push_back({std::move(p), payload});
  }
  return records;
}

// Structurally valid logs with pseudo-random contents; hashing cost is all
// the IMT build cares about.
inline std::vector<CommLog> synthetic_logs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CommLog> logs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& b : logs[i].cipher_ref) b = rng.byte();
    logs[i].enc_file_hash.resize(32 + crypto::kSymOverhead);
    for (auto& b : logs[i].enc_file_hash) b = rng.byte();
    for (auto& b : logs[i].peer_sig.sig) b = rng.byte();
    logs[i].ts = i;
  }
  return logs;
}

// Query rectangle centered in the unit cube whose volume is ~10% regardless
// of dimension, so search work varies with n and l rather than hit count.
inline geometry::HyperRect fractional_rect(std::size_t l) {
  double w = std::pow(0.1, 1.0 / static_cast<double>(l));
  geometry::Point lo, hi;
  for (std::size_t j = 0; j < l; ++j) {
    lo.coords.push_back(0.5 - w / 2.0);
    hi.coords.push_back(0.5 + w / 2.0);
  }
  return {std::move(lo), std::move(hi)};
}

}  // namespace detail

inline std::vector<Row> run_suite(const std::string& suite, const std::vector<std::size_t>& dims,
                                  const std::vector<std::size_t>& sizes, std::size_t trials,
                                  std::uint64_t seed) {
  std::vector<Row> rows;
  for (std::size_t l : dims) {
    for (std::size_t n : sizes) {
      const std::uint64_t case_seed = seed ^ (l * 0x9e3779b97f4a7c15ull) ^ n;
      auto records = detail::uniform_records(l, n, case_seed);

      if (suite == "kdtree-build") {
        for (std::size_t t = 0; t < trials; ++t) {
          std::uint64_t t0 = detail::now_ns();
          auto tree = kdtree::build(records, /*id_seed=*/case_seed);
          std::uint64_t t1 = detail::now_ns();
          if (!tree) throw std::logic_error("bench: empty tree");
          rows.push_back({suite, l, n, t, t1 - t0});
        }
        continue;
      }

      auto tree = kdtree::build(records, case_seed);
      aspe::AspeKey key = aspe::keygen(l, case_seed);

      if (suite == "kdtree-encrypt") {
        for (std::size_t t = 0; t < trials; ++t) {
          std::uint64_t t0 = detail::now_ns();
          auto enc = kdtree::encrypt_tree(tree.get(), key);
          std::uint64_t t1 = detail::now_ns();
          if (!enc) throw std::logic_error("bench: empty tree");
          rows.push_back({suite, l, n, t, t1 - t0});
        }
        continue;
      }

      auto enc = kdtree::encrypt_tree(tree.get(), key);
      auto logs = detail::synthetic_logs(n, case_seed);

      if (suite == "imt-build") {
        for (std::size_t t = 0; t < trials; ++t) {
          std::uint64_t t0 = detail::now_ns();
          auto index = imt::build(*enc, logs);
          std::uint64_t t1 = detail::now_ns();
          if (!index) throw std::logic_error("bench: empty index");
          rows.push_back({suite, l, n, t, t1 - t0});
        }
        continue;
      }

      geometry::AnchorQuery anchors = geometry::anchors_for_rect(detail::fractional_rect(l), 0.25);

      if (suite == "trapdoor") {
        for (std::size_t t = 0; t < trials; ++t) {
          std::uint64_t t0 = detail::now_ns();
          std::size_t pairs = 0;
          for (std::size_t r = 0; r < kTrapdoorReps; ++r)
            pairs += aspe::make_trapdoor(key, anchors, case_seed + r).pairs.size();
          std::uint64_t t1 = detail::now_ns();
          if (pairs != kTrapdoorReps * 2 * l) throw std::logic_error("bench: trapdoor size");
          rows.push_back({suite, l, n, t, t1 - t0});
        }
        continue;
      }

      if (suite == "search") {
        auto index = imt::build(*enc, logs);
        aspe::Trapdoor tr = aspe::make_trapdoor(key, anchors, case_seed);
        for (std::size_t t = 0; t < trials; ++t) {
          std::uint64_t t0 = detail::now_ns();
          std::size_t visited = 0;
          for (std::size_t r = 0; r < kSearchReps; ++r)
            visited += search::search_index(tr, *index).nodes_visited;
          std::uint64_t t1 = detail::now_ns();
          if (visited == 0) throw std::logic_error("bench: no nodes visited");
          rows.push_back({suite, l, n, t, t1 - t0});
        }
        continue;
      }

      throw std::invalid_argument("unknown bench suite: " + suite);
    }
  }
  return rows;
}

inline std::uint64_t median_ns(std::vector<std::uint64_t> xs) {
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2];
}

}  // namespace iotledger::bench
