#include "iotledger/ledger.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "iotledger/device_sim.hpp"
#include "iotledger/rng.hpp"
#include "test_util.hpp"

using namespace iotledger;
using namespace iotledger::ledger;

namespace {

// mine() never reads the body, so PoW statistics only need headers whose
// signature field varies per trial.
BlockHeader mine_with_noise(Rng& rng, std::uint8_t difficulty, std::uint64_t ts) {
  crypto::Signature sig;
  for (auto& b : sig.sig) b = rng.byte();
  for (auto& b : sig.signer_id) b = rng.byte();
  return mine(BlockBody{}, sig, Digest{}, difficulty, ts);
}

sim::Network three_block_network(std::uint8_t difficulty, std::uint64_t seed) {
  sim::Network net(testutil::unit_config(3, 2, difficulty, seed));
  Rng rng(seed + 1);
  testutil::publish_points(net, 0, 1, 2, rng);
  testutil::publish_points(net, 1, 2, 2, rng);
  testutil::publish_points(net, 2, 0, 2, rng);
  return net;
}

}  // namespace

TEST(LeadingZeroBits, CountsFromMsb) {
  Digest d{};
  EXPECT_EQ(leading_zero_bits(d), 256);
  d[0] = 0x80;
  EXPECT_EQ(leading_zero_bits(d), 0);
  d[0] = 0x01;
  EXPECT_EQ(leading_zero_bits(d), 7);
  d[0] = 0x00;
  d[1] = 0x10;
  EXPECT_EQ(leading_zero_bits(d), 11);
}

TEST(Mine, ZeroDifficultyAcceptsFirstNonce) {
  Rng rng(1);
  BlockHeader h = mine_with_noise(rng, 0, 5);
  EXPECT_EQ(h.nonce, 0u);
}

TEST(Mine, MinedHeaderMeetsTarget) {
  Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    BlockHeader h = mine_with_noise(rng, 8, 100 + i);
    EXPECT_TRUE(meets_target(header_hash(h), 8));
  }
}

TEST(Mine, Difficulty8MeanAttempts) {
  Rng rng(3);
  double attempts = 0;
  const int trials = 50;
  for (int i = 0; i < trials; ++i) attempts += static_cast<double>(mine_with_noise(rng, 8, i).nonce) + 1;
  double mean = attempts / trials;
  EXPECT_GE(mean, 128.0);
  EXPECT_LE(mean, 512.0);
}

TEST(Mine, DifficultyCapRejected) {
  Rng rng(4);
  EXPECT_THROW(mine(BlockBody{}, crypto::Signature{}, Digest{}, 33, 0), std::invalid_argument);
}

TEST(Validate, HonestBlocksPass) {
  sim::Network net = three_block_network(4, 10);
  ASSERT_EQ(net.chain().blocks.size(), 3u);
  EXPECT_TRUE(validate_chain(net.chain(), net.params()).ok);
}

TEST(Validate, NonceChangeFailsPow) {
  sim::Network net = three_block_network(6, 11);
  Block b = net.chain().blocks[0];
  Digest prev = header_hash(net.chain().genesis.header);
  ASSERT_TRUE(validate_block(b, prev, net.params()).ok);
  b.header.nonce -= 1;
  ValidationResult r = validate_block(b, prev, net.params());
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.reason, "pow");
}

TEST(Validate, DifficultyFieldPinnedToConsensusValue) {
  sim::Network net = three_block_network(0, 12);
  Block b = net.chain().blocks[0];
  Digest prev = header_hash(net.chain().genesis.header);
  ledger::ValidationParams params = net.params();
  params.expected_difficulty = 1;
  ValidationResult r = validate_block(b, prev, params);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.reason, "difficulty");
}

TEST(Validate, LogByteFlipDetected) {
  sim::Network net = three_block_network(4, 13);
  const Block& honest = net.chain().blocks[1];
  Digest prev = header_hash(net.chain().blocks[0].header);

  Bytes body_bytes = honest.body.serialize();
  // The log batch sits after device_id(16) + upload_ts(8) + count(4).
  const std::size_t logs_off = 28;
  const std::size_t logs_len = honest.body.logs.size() * CommLog::kWireSize;
  for (std::size_t pos = logs_off; pos < logs_off + logs_len; ++pos) {
    Bytes mutated = body_bytes;
    mutated[pos] ^= 0x01;
    Block b = honest;
    b.body = BlockBody::parse(mutated);
    ValidationResult r = validate_block(b, prev, net.params());
    EXPECT_FALSE(r.ok) << "byte " << pos;
    EXPECT_TRUE(r.reason == "imt_hash" || r.reason == "log_sig" || r.reason == "batch_sig" ||
                r.reason == "leaf_log_link" || r.reason == "cloud_sig" || r.reason == "imt_ids")
        << r.reason;
  }
}

TEST(Validate, WholeBodyMutationDetected) {
  sim::Network net = three_block_network(4, 14);
  const Block& honest = net.chain().blocks[0];
  Digest prev = header_hash(net.chain().genesis.header);
  Bytes body_bytes = honest.body.serialize();
  for (std::size_t pos = 0; pos < body_bytes.size(); ++pos) {
    Bytes mutated = body_bytes;
    mutated[pos] ^= 0x01;
    Block b = honest;
    bool detected;
    try {
      b.body = BlockBody::parse(mutated);
      detected = !validate_block(b, prev, net.params()).ok;
    } catch (const ParseError&) {
      detected = true;
    }
    EXPECT_TRUE(detected) << "body byte " << pos;
  }
}

TEST(Approve, StrictMajority) {
  sim::Network net = three_block_network(2, 15);
  Block extra = net.chain().blocks.back();

  auto fixed = [](bool verdict) {
    return Validator([verdict](const Block&) { return verdict; });
  };

  {
    // 10 honest validators on a valid re-appended block is exercised by the
    // sim itself; here: 10 approvals out of 10.
    Chain chain = Chain::create();
    Chain source = Chain::create();
    // rebuild an appendable copy of block 1
    Block b = net.chain().blocks[0];
    std::vector<Validator> vals(10, fixed(true));
    EXPECT_TRUE(approve_and_append(chain, b, vals));
    EXPECT_EQ(chain.blocks.size(), 1u);
    (void)source;
  }
  {
    Chain chain = Chain::create();
    Block b = net.chain().blocks[0];
    std::vector<Validator> vals(5, fixed(true));
    vals.insert(vals.end(), 5, fixed(false));
    EXPECT_FALSE(approve_and_append(chain, b, vals));  // 5 of 10 is not a majority
    EXPECT_TRUE(chain.blocks.empty());
  }
  {
    Chain chain = Chain::create();
    Block b = net.chain().blocks[0];
    std::vector<Validator> vals(4, fixed(true));
    vals.insert(vals.end(), 3, fixed(false));
    EXPECT_TRUE(approve_and_append(chain, b, vals));  // 4 of 7
  }
}

TEST(TimeIndex, SpineDepths) {
  TimeIndex ti;
  for (std::size_t i = 0; i < 7; ++i) ti.insert(i, 100 + i);
  EXPECT_EQ(ti.leaf_depth(6), 1u);
  EXPECT_EQ(ti.leaf_depth(0), 6u);
  EXPECT_EQ(ti.leaf_depth(1), 6u);
  EXPECT_EQ(ti.leaf_depth(5), 2u);
}

TEST(TimeIndex, LocateFullAndEmptyRanges) {
  TimeIndex ti;
  for (std::size_t i = 0; i < 7; ++i) ti.insert(i, 100 + i);
  auto all = ti.locate(0, 1000);
  EXPECT_EQ(all.blocks, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
  auto none = ti.locate(2000, 3000);
  EXPECT_TRUE(none.blocks.empty());
  EXPECT_EQ(none.visited, 1u);  // rejected at the root
  auto mid = ti.locate(102, 104);
  EXPECT_EQ(mid.blocks, (std::vector<std::size_t>{2, 3, 4}));
}

TEST(TimeIndex, OutOfOrderInsertThrows) {
  TimeIndex ti;
  ti.insert(0, 100);
  EXPECT_THROW(ti.insert(1, 99), std::invalid_argument);
  ti.insert(1, 100);  // equal timestamps are fine
}

TEST(TimeIndex, NewestBlockStaysCheap) {
  TimeIndex ti;
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i) ti.insert(i, 100 + i);
  auto newest = ti.locate(100 + n - 1, 100 + n - 1);
  EXPECT_EQ(newest.blocks, (std::vector<std::size_t>{n - 1}));
  EXPECT_LE(newest.visited, 2u);
}

TEST(Tamper, HeaderMutationBreaksNextLink) {
  sim::Network net = three_block_network(4, 16);
  Block b2 = net.chain().blocks[1];
  b2.header.timestamp += 1;
  // B2 itself fails outright or at the PoW check, and B3 no longer links.
  Digest prev1 = header_hash(net.chain().blocks[0].header);
  EXPECT_FALSE(validate_block(b2, prev1, net.params()).ok);
  ValidationResult r3 =
      validate_block(net.chain().blocks[2], header_hash(b2.header), net.params());
  EXPECT_FALSE(r3.ok);
  EXPECT_EQ(r3.reason, "prev_hash");
}

TEST(Tamper, ChainValidationPinpointsBlock) {
  sim::Network net = three_block_network(4, 17);
  Chain chain = parse_chain(serialize_chain(net.chain()));
  chain.blocks[1].body.logs[0].ts ^= 1;
  ValidationResult r = validate_chain(chain, net.params());
  EXPECT_FALSE(r.ok);
  EXPECT_NE(r.reason.find("block 2"), std::string::npos);
}

TEST(Tamper, GenesisIsPinned) {
  sim::Network net = three_block_network(4, 18);
  Chain chain = parse_chain(serialize_chain(net.chain()));
  chain.genesis.header.nonce = 1;
  EXPECT_FALSE(validate_chain(chain, net.params()).ok);
}

TEST(Suffix, TruncatedChainVerifies) {
  sim::Network net = three_block_network(4, 19);
  const auto& blocks = net.chain().blocks;
  std::span<const Block> suffix(blocks.data() + 1, 2);
  Digest trusted = header_hash(blocks[0].header);
  EXPECT_TRUE(validate_suffix(suffix, trusted, net.params()).ok);

  Digest wrong = trusted;
  wrong[0] ^= 1;
  ValidationResult r = validate_suffix(suffix, wrong, net.params());
  EXPECT_FALSE(r.ok);
}

TEST(Pow, AttemptCountWithinFactor2) {
  Rng rng(20);
  for (std::uint8_t d : {4, 8}) {
    double total = 0;
    const int trials = 60;
    for (int i = 0; i < trials; ++i)
      total += static_cast<double>(mine_with_noise(rng, d, i).nonce) + 1;
    double mean = total / trials;
    double expected = std::pow(2.0, d);
    EXPECT_GE(mean, expected / 2.0) << unsigned(d);
    EXPECT_LE(mean, expected * 2.0) << unsigned(d);
  }
}

TEST(Persistence, RoundTripAndRejects) {
  sim::Network net = three_block_network(4, 21);
  Bytes raw = serialize_chain(net.chain());
  Chain back = parse_chain(raw);
  EXPECT_EQ(serialize_chain(back), raw);
  EXPECT_TRUE(validate_chain(back, net.params()).ok);

  const std::string path = (std::filesystem::temp_directory_path() / "ledger_rt.bin").string();
  save_chain(net.chain(), path);
  Chain loaded = load_chain(path);
  EXPECT_EQ(serialize_chain(loaded), raw);
  std::filesystem::remove(path);

  Bytes bad_magic = raw;
  bad_magic[0] ^= 1;
  EXPECT_THROW(parse_chain(bad_magic), ParseError);
  Bytes truncated(raw.begin(), raw.end() - 3);
  EXPECT_THROW(parse_chain(truncated), ParseError);
}

TEST(Chain, AppendEnforcesLinkage) {
  sim::Network net = three_block_network(2, 22);
  Chain chain = Chain::create();
  Block b = net.chain().blocks[0];
  chain.append(b);  // genesis-linked block appends cleanly
  Block again = b;
  EXPECT_THROW(chain.append(again), std::invalid_argument);  // no longer links
}
