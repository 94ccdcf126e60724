// Copyright 2026 The Bracelet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bracelet/protocol.hpp"

#include <catch2/catch.hpp>
#include <set>
#include <vector>

#include "bracelet/hex.hpp"
#include "bracelet/rng.hpp"
#include "bracelet/sha256.hpp"

namespace bracelet {
namespace {

DeviceSeed test_seed(std::uint64_t salt = 0) {
  SplitMix64 rng(0x5eedu + salt);
  return DeviceSeed::from_rng(rng);
}

DeviceSeed counting_seed() {
  DeviceSeed seed;
  for (std::size_t i = 0; i < kSeedSize; ++i) {
    seed.bytes[i] = static_cast<std::uint8_t>(i);
  }
  return seed;
}

TEST_CASE("sha256 matches the FIPS 180-4 vectors") {
  auto hex_of = [](std::string_view msg) {
    return to_hex(sha256(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(msg.data()), msg.size())));
  };
  CHECK(hex_of("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(hex_of("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(hex_of("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("sha256 streaming equals one-shot across chunk sizes") {
  std::vector<std::uint8_t> data(1000);
  SplitMix64 rng(7);
  for (auto& b : data) b = static_cast<std::uint8_t>(rng.next());
  auto oneshot = sha256(data);
  for (std::size_t chunk : {1u, 3u, 63u, 64u, 65u, 500u}) {
    Sha256 h;
    for (std::size_t i = 0; i < data.size(); i += chunk) {
      auto n = std::min(chunk, data.size() - i);
      h.update(std::span<const std::uint8_t>(data.data() + i, n));
    }
    CHECK(h.finish() == oneshot);
  }
}

TEST_CASE("epoch_of floors timestamps into epoch windows") {
  CHECK(epoch_of(0.0, 900.0) == 0);
  CHECK(epoch_of(899.0, 900.0) == 0);
  CHECK(epoch_of(900.0, 900.0) == 1);
  CHECK(epoch_of(1799.999, 900.0) == 1);
  CHECK_THROWS_AS(epoch_of(10.0, 0.0), Error);
  CHECK_THROWS_AS(epoch_of(10.0, -900.0), Error);
  CHECK_THROWS_AS(epoch_of(-1.0, 900.0), Error);
}

TEST_CASE("derive_tag is deterministic and epoch-sensitive") {
  auto seed = test_seed();
  CHECK(derive_tag(seed, 7) == derive_tag(seed, 7));
  CHECK(derive_tag(seed, 7) != derive_tag(seed, 8));

  std::set<Tag> tags;
  for (EpochIndex epoch = 0; epoch < 10000; ++epoch) {
    tags.insert(derive_tag(seed, epoch));
  }
  CHECK(tags.size() == 10000);
}

// Frozen derivation vectors: the derivation scheme is an external contract
// (an independently implemented bracelet must produce the same identities).
TEST_CASE("derivation vectors stay pinned") {
  auto seed = counting_seed();
  CHECK(derive_tag(seed, 0).hex() == "5a0c131b201d91c5f15f23bd6ef8b2cd");
  CHECK(derive_tag(seed, 1).hex() == "ac15ef259b70e94fa458eb50b1f4d6be");
  CHECK(derive_address(seed, 0).hex() == "3278317210ea");
}

TEST_CASE("tag and address derivations are domain separated") {
  SplitMix64 rng(99);
  for (int i = 0; i < 10000; ++i) {
    DeviceSeed seed = DeviceSeed::from_rng(rng);
    EpochIndex epoch = rng.next() % 100000;
    auto tag = derive_tag(seed, epoch);
    auto addr = derive_address(seed, epoch);
    REQUIRE(!std::equal(addr.bytes.begin(), addr.bytes.end(), tag.bytes.begin()));
  }
}

TEST_CASE("addresses rotate with the epoch") {
  auto seed = test_seed(1);
  CHECK(derive_address(seed, 0) != derive_address(seed, 1));
  CHECK(derive_address(seed, 0) == derive_address(seed, 0));
}

TEST_CASE("tag within one epoch window is constant, changes at the boundary") {
  auto seed = test_seed(2);
  const double length = 900.0;
  auto tag_at = [&](double t) { return derive_tag(seed, epoch_of(t, length)); };
  CHECK(tag_at(0.0) == tag_at(899.999));
  CHECK(tag_at(900.0) != tag_at(899.999));
  CHECK(tag_at(900.0) == tag_at(1799.0));
}

TEST_CASE("mean pairwise tag bit distance sits at the random midpoint") {
  // O(bits * N) pair counting: per bit position, ones*(N-ones) differing pairs.
  const std::size_t kTagCount = 100000;
  SplitMix64 rng(1234);
  std::array<std::uint64_t, 128> ones{};
  std::set<Tag> seen;
  for (std::size_t i = 0; i < kTagCount; ++i) {
    DeviceSeed seed = DeviceSeed::from_rng(rng);
    Tag tag = derive_tag(seed, rng.next() % 1000);
    seen.insert(tag);
    for (int bit = 0; bit < 128; ++bit) {
      if (tag.bytes[bit / 8] & (1u << (bit % 8))) {
        ++ones[bit];
      }
    }
  }
  CHECK(seen.size() == kTagCount);  // pairwise distinct
  long double differing_pairs = 0.0L;
  for (int bit = 0; bit < 128; ++bit) {
    differing_pairs +=
        static_cast<long double>(ones[bit]) * (kTagCount - ones[bit]);
  }
  long double total_pairs = static_cast<long double>(kTagCount) * (kTagCount - 1) / 2.0L;
  double mean_distance = static_cast<double>(differing_pairs / total_pairs);
  CHECK(mean_distance == Approx(64.0).margin(1.0));
}

TEST_CASE("beacon frames round trip") {
  SplitMix64 rng(5);
  for (int i = 0; i < 200; ++i) {
    Beacon beacon;
    beacon.tag = Tag{rng.bytes<kTagSize>()};
    beacon.address = BeaconAddress{rng.bytes<kAddressSize>()};
    beacon.tx_power_dbm = static_cast<std::int8_t>(rng.next());
    auto frame = encode_beacon(beacon);
    REQUIRE(frame.size() == kBeaconFrameSize);
    CHECK(decode_beacon(frame) == beacon);
  }
}

TEST_CASE("tx_power -59 encodes as 0xC5 at offset 7") {
  Beacon beacon;
  beacon.tx_power_dbm = -59;
  auto frame = encode_beacon(beacon);
  CHECK(frame[7] == 0xC5);
  CHECK(decode_beacon(frame).tx_power_dbm == -59);
}

TEST_CASE("beacon decode rejects bad frames") {
  Beacon beacon;
  auto frame = encode_beacon(beacon);

  std::vector<std::uint8_t> short_frame(frame.begin(), frame.end() - 1);
  CHECK_THROWS_MATCHES(decode_beacon(short_frame), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::kMalformedFrame;
                       }));

  auto bad_version = frame;
  bad_version[0] = 2;
  CHECK_THROWS_MATCHES(decode_beacon(bad_version), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::kUnsupportedVersion;
                       }));
}

TEST_CASE("per-bit frequency of derived tags is balanced") {
  const std::size_t kTagCount = 10000;
  auto seed = test_seed(3);
  std::array<std::uint64_t, 128> ones{};
  for (std::size_t epoch = 0; epoch < kTagCount; ++epoch) {
    Tag tag = derive_tag(seed, epoch);
    for (int bit = 0; bit < 128; ++bit) {
      if (tag.bytes[bit / 8] & (1u << (bit % 8))) ++ones[bit];
    }
  }
  for (int bit = 0; bit < 128; ++bit) {
    double frequency = static_cast<double>(ones[bit]) / kTagCount;
    REQUIRE(frequency > 0.46);
    REQUIRE(frequency < 0.54);
  }
}

TEST_CASE("hex helpers round trip and validate") {
  CHECK(to_hex(std::array<std::uint8_t, 3>{0x00, 0xab, 0xff}) == "00abff");
  CHECK(from_hex("00abff") == std::vector<std::uint8_t>{0x00, 0xab, 0xff});
  CHECK_THROWS_AS(from_hex("abc"), Error);
  CHECK_THROWS_AS(from_hex("zz"), Error);
  CHECK_THROWS_AS(from_hex_array<16>("00"), Error);
}

}  // namespace
}  // namespace bracelet
