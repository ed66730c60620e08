#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <sstream>
#include <stdexcept>

#include "superbunch/errors.hpp"
#include "superbunch/parallel.hpp"
#include "superbunch/photon_io.hpp"
#include "superbunch/rng.hpp"

using namespace superbunch;

namespace {

PhotonStream sample_stream() {
  PhotonStream s;
  s.d1 = {3, 10, 10, 400};
  s.d2 = {0, 10, 4000000000ULL};
  s.duration = 5.0;
  return s;
}

}  // namespace

TEST(PhotonIo, TextRoundTrip) {
  std::stringstream buf;
  write_photons(buf, sample_stream(), PhotonFileFormat::Text);
  EXPECT_EQ(buf.str().substr(0, 8), "2,0\n1,3\n");
  const auto records = read_photons(buf, PhotonFileFormat::Text);
  EXPECT_EQ(records, sample_stream().records());
}

TEST(PhotonIo, BinaryRoundTrip) {
  std::stringstream buf;
  write_photons(buf, sample_stream(), PhotonFileFormat::Binary);
  const auto bytes = buf.str();
  ASSERT_EQ(bytes.size(), 7u * 9u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2u);  // first record: D2 at t = 0
  EXPECT_EQ(static_cast<unsigned char>(bytes[9]), 3u);  // little-endian low byte of 3
  EXPECT_EQ(read_photons(buf, PhotonFileFormat::Binary), sample_stream().records());
}

TEST(PhotonIo, TextErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) -> std::uint64_t {
    std::istringstream in(text);
    try {
      read_photons(in, PhotonFileFormat::Text);
    } catch (const ParseError& e) {
      return e.position();
    }
    return 0;
  };
  EXPECT_EQ(line_of("1,5\n3,7\n"), 2u);
  EXPECT_EQ(line_of("1,5\n2,x\n"), 2u);
  EXPECT_EQ(line_of("1,5\n2,6\n1,4\n"), 3u);
  EXPECT_EQ(line_of("1,5\n2\n"), 2u);
}

TEST(PhotonIo, BinaryErrorsCarryOffsets) {
  std::stringstream buf;
  write_photons(buf, sample_stream(), PhotonFileFormat::Binary);
  auto offset_of = [](const std::string& bytes) -> std::uint64_t {
    std::istringstream in(bytes);
    try {
      read_photons(in, PhotonFileFormat::Binary);
    } catch (const ParseError& e) {
      return e.position();
    }
    return 1;
  };
  const auto bytes = buf.str();
  EXPECT_EQ(offset_of(bytes.substr(0, 40)), 36u);  // 4 whole records, then 4 stray bytes
  std::string bad = bytes;
  bad[9 + 8] = 7;
  EXPECT_EQ(offset_of(bad), 17u);
  EXPECT_EQ(format_for_path("a/b.bin"), PhotonFileFormat::Binary);
  EXPECT_EQ(format_for_path("a/b.txt"), PhotonFileFormat::Text);
}

TEST(Rng, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    seen.insert(derive_seed(1, "signal", i));
    seen.insert(derive_seed(1, "speckle", i));
    seen.insert(derive_seed(2, "signal", i));
  }
  EXPECT_EQ(seen.size(), 3000u);
  static_assert(derive_seed(7, "x", 1) == derive_seed(7, "x", 1));
}

TEST(Rng, UniformRange) {
  Rng rng(5);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(Parallel, CoversAllIndicesAndRethrows) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(100, 3,
                            [](std::size_t i) {
                              if (i == 37) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
