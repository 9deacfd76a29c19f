#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "d2dtoken/model.hpp"
#include "d2dtoken/mos.hpp"

using namespace d2dtoken;
using Catch::Approx;

TEST_CASE("video MOS", "[mos]") {
  const MosParams p;
  CHECK(mos_video(p, 5.0) == Approx(2.75));
  CHECK(mos_video(p, 10.0) == Approx(4.476575021765003).epsilon(1e-12));
  CHECK(mos_video(p, -1e3) == Approx(1.0));
  CHECK(mos_video(p, 1e3) == Approx(4.5));
}

TEST_CASE("video MOS is increasing and bounded", "[mos][property]") {
  const MosParams p;
  double prev = mos_video(p, -30.0);
  for (double x = -29.5; x <= 30.0; x += 0.5) {
    const double y = mos_video(p, x);
    CHECK(y > prev);
    CHECK(y > 1.0);
    CHECK(y < 4.5);
    prev = y;
  }
}

TEST_CASE("elastic MOS", "[mos]") {
  MosParams p;
  CHECK(mos_elastic(p, 1000.0) == Approx(8.50780043495744).epsilon(1e-12));
  CHECK(mos_elastic(p, 1500.0) == Approx(9.600488354798133).epsilon(1e-12));
  CHECK_THROWS_AS(mos_elastic(p, 1.0 / p.b4), NonPositiveMos);
  CHECK_THROWS_AS(mos_elastic(p, 10.0), NonPositiveMos);

  p.log_base = LogBase::base10;
  CHECK(mos_elastic(p, 1000.0) == Approx(3.694890782036102).epsilon(1e-12));
}

TEST_CASE("benefit_from_mos", "[mos]") {
  MosParams p;
  CHECK(benefit_from_mos(p, {10, 0}, {5, 0}, TrafficKind::video) == Approx(1.7265750217650027).epsilon(1e-12));
  CHECK(benefit_from_mos(p, {0, 1500}, {0, 1000}, TrafficKind::elastic) ==
        Approx(1.0926879198406922).epsilon(1e-12));
  CHECK(benefit_from_mos(p, {7, 800}, {7, 800}, TrafficKind::video) == 0.0);
  CHECK(benefit_from_mos(p, {7, 800}, {7, 800}, TrafficKind::elastic) == 0.0);
  CHECK_THROWS_AS(benefit_from_mos(p, {5, 0}, {10, 0}, TrafficKind::video), std::invalid_argument);

  p.log_base = LogBase::base10;
  const double elastic10 = benefit_from_mos(p, {0, 1500}, {0, 1000}, TrafficKind::elastic);
  CHECK(elastic10 == Approx(0.47454833402915536).epsilon(1e-12));
  CHECK(benefit_from_mos(p, {10, 0}, {5, 0}, TrafficKind::video) > elastic10);
}

TEST_CASE("elastic benefit depends only on the throughput ratio", "[mos][property]") {
  for (LogBase base : {LogBase::natural, LogBase::base10}) {
    MosParams p;
    p.log_base = base;
    for (double cell : {100.0, 250.0, 1000.0, 4000.0}) {
      for (double ratio : {1.0, 1.5, 2.0, 7.5}) {
        const double got = benefit_from_mos(p, {0, cell * ratio}, {0, cell}, TrafficKind::elastic);
        const double want = p.b3 * (base == LogBase::natural ? std::log(ratio) : std::log10(ratio));
        CHECK(got == Approx(want).margin(1e-12));
      }
    }
  }
}

TEST_CASE("MOS-derived benefits form a valid traffic model", "[mos]") {
  const MosParams p;
  const double elastic = benefit_from_mos(p, {0, 1500}, {0, 1000}, TrafficKind::elastic);
  const double video = benefit_from_mos(p, {10, 0}, {5, 0}, TrafficKind::video);
  MdpModel m;
  m.traffic = make_traffic({0.3, 0.5, 0.2}, {elastic, video});
  m.env = {0.8, 0.8};
  m.cost = 0.4;
  m.discount = 0.99;
  m.token_cap = 20;
  CHECK(validate(m).ok());
}

TEST_CASE("MOS parameter parsing", "[mos]") {
  CHECK(parse_log_base("natural") == LogBase::natural);
  CHECK(parse_log_base("base10") == LogBase::base10);
  CHECK_THROWS_AS(parse_log_base("base2"), std::invalid_argument);
  CHECK(parse_traffic_kind("video") == TrafficKind::video);
  CHECK_THROWS_AS(parse_traffic_kind("voice"), std::invalid_argument);
  MosParams bad;
  bad.b4 = 0.0;
  CHECK_THROWS_AS(validate_mos_params(bad), std::invalid_argument);
}
