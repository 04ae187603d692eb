#include <doctest.h>

#include "crowdsense/core/csv.hpp"
#include "crowdsense/core/error.hpp"
#include "crowdsense/core/hash128.hpp"
#include "crowdsense/core/random.hpp"
#include "crowdsense/core/symbol.hpp"
#include "crowdsense/core/time.hpp"

#include <array>
#include <cmath>
#include <thread>

using namespace crowdsense;

TEST_SUITE("core") {

TEST_CASE("controller timestamps are day-first and become UTC epoch seconds") {
  const TimeFormat fmt;
  const auto t = fmt.parse("02/07/2020 10:00:01");
  REQUIRE(t);
  // 2020-07-02 is 18445 days after the epoch.
  CHECK(*t == 18445LL * 86400 + 10 * 3600 + 1);
  CHECK(to_iso8601(*t) == "2020-07-02T10:00:01Z");
  CHECK(fmt.format(*t) == "02/07/2020 10:00:01");
  CHECK_FALSE(fmt.parse("31/02/2020 10:00:01"));
  CHECK_FALSE(fmt.parse("02/07/2020 10:00"));
  CHECK_FALSE(fmt.parse("02/07/2020 24:00:00"));
}

TEST_CASE("custom time formats") {
  const TimeFormat iso("%Y-%m-%d %H:%M:%S");
  CHECK(iso.parse("2020-03-23 00:00:00") == 1584921600);
  CHECK_THROWS_AS(TimeFormat("%Y-%q"), ValidationError);
  CHECK_THROWS_AS(TimeFormat("%Y %"), ValidationError);
}

TEST_CASE("iso8601 parsing accepts dates, times and epoch seconds") {
  CHECK(parse_iso8601("2020-03-23") == 1584921600);
  CHECK(parse_iso8601("2020-03-23T01:02") == 1584921600 + 3720);
  CHECK(parse_iso8601("2020-03-23T01:02:03Z") == 1584921600 + 3723);
  CHECK(parse_iso8601("1584921600") == 1584921600);
  CHECK_FALSE(parse_iso8601("yesterday"));
}

TEST_CASE("grid helpers") {
  CHECK(floor_to(125, 60) == 120);
  CHECK(ceil_to(121, 60) == 180);
  CHECK(ceil_to(120, 60) == 120);
  CHECK(floor_to(-1, 60) == -60);
  // 2020-03-23 was a Monday; 1970-01-01 a Thursday.
  CHECK(weekday(1584921600) == 0);
  CHECK(weekday(0) == 3);
  CHECK(week_start(1584921600 + 3 * kDay + 5) == 1584921600);
}

TEST_CASE("civil conversion round-trips over four centuries of days") {
  for (Timestamp day = -146097; day <= 146097; day += 97) {
    const Timestamp t = day * kDay + 12345;
    CHECK(from_civil(to_civil(t)) == t);
  }
}

TEST_CASE("csv split handles quotes and escapes round-trip") {
  const auto f = csv::split("a,\"b,c\",\"d\"\"e\",", ',');
  REQUIRE(f.size() == 4);
  CHECK(f[0] == "a");
  CHECK(f[1] == "b,c");
  CHECK(f[2] == "d\"e");
  CHECK(f[3] == "");
  for (const std::string s : {"plain", "with,comma", "quote\"inside", ""}) {
    CHECK(csv::split(csv::escape(s, ','), ',').at(0) == s);
  }
}

TEST_CASE("hash128 hex round-trip and ordering") {
  DeviceHash h;
  for (std::size_t i = 0; i < 16; ++i) h.bytes[i] = static_cast<std::uint8_t>(i * 17);
  const auto hex = h.hex();
  CHECK(hex.size() == 32);
  CHECK(hex == "00112233445566778899aabbccddeeff");
  CHECK(DeviceHash::from_hex(hex) == h);
  CHECK_FALSE(DeviceHash::from_hex("0011"));
  CHECK_FALSE(DeviceHash::from_hex(std::string(32, 'g')));
  CHECK_FALSE(DeviceHash::from_hex("00112233445566778899AABBCCDDEEFF"));
}

TEST_CASE("symbols intern to one instance across threads") {
  std::vector<Symbol> seen(8);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < seen.size(); ++i)
    threads.emplace_back([&, i] { seen[i] = Symbol::intern("AP-MB-073aca"); });
  for (auto &t : threads) t.join();
  for (const auto &s : seen) CHECK(s == seen.front());
  CHECK(seen.front().str() == "AP-MB-073aca");
  CHECK(Symbol::intern("a") != Symbol::intern("b"));
}

TEST_CASE("rng streams are reproducible and distributions sane") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  Rng r(7);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);

  for (const double mean : {3.0, 500.0}) {
    double total = 0;
    for (int i = 0; i < 20000; ++i) total += static_cast<double>(r.poisson(mean));
    CHECK(std::abs(total / 20000 - mean) < 0.05 * mean);
  }

  const std::vector<double> w{1, 0, 3};
  std::array<int, 3> counts{};
  for (int i = 0; i < 40000; ++i) ++counts[r.categorical(w)];
  CHECK(counts[1] == 0);
  CHECK(std::abs(counts[2] / 40000.0 - 0.75) < 0.01);
}

} // TEST_SUITE
