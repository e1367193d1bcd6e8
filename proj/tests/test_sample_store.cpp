#include "lamcmc/sample_store.hpp"

#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "lamcmc/rng.hpp"

using namespace lamcmc;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Sample sample2(double a, double b, double f) {
  Sample s;
  s.location = vec2(a, b);
  s.values = Vector::Constant(1, f);
  return s;
}

}  // namespace

TEST_CASE("insert into empty set") {
  SampleSet set(2, 1);
  CHECK(set.insert(sample2(0, 0, 1)));
  CHECK(set.size() == 1);
}

TEST_CASE("duplicate insert is rejected") {
  SampleSet set(2, 1);
  CHECK(set.insert(sample2(0, 0, 1)));
  CHECK_FALSE(set.insert(sample2(0, 0, 2)));
  CHECK(set.size() == 1);
}

TEST_CASE("distinct inserts are counted") {
  SampleSet set(2, 1);
  set.insert(sample2(0, 0, 1));
  set.insert(sample2(1, 0, 1));
  set.insert(sample2(0, 1, 1));
  CHECK(set.size() == 3);
}

TEST_CASE("insert validates dimensions and finiteness") {
  SampleSet set(2, 1);
  Sample bad;
  bad.location = Vector::Zero(3);
  bad.values = Vector::Zero(1);
  CHECK_THROWS(set.insert(bad));
  Sample nan = sample2(0, 0, std::nan(""));
  CHECK_THROWS(set.insert(nan));
}

TEST_CASE("nearest distances and radius") {
  SampleSet set(2, 1);
  set.insert(sample2(0, 0, 1));
  set.insert(sample2(3, 0, 1));
  set.insert(sample2(0, 4, 1));
  double radius = 0;
  auto nn = set.nearest(vec2(0, 0), 2, &radius);
  REQUIRE(nn.size() == 2);
  CHECK(nn[0].distance == doctest::Approx(0));
  CHECK(nn[1].distance == doctest::Approx(3));
  CHECK(radius == doctest::Approx(3));
}

TEST_CASE("nearest with center on stored point") {
  SampleSet set(2, 1);
  set.insert(sample2(1, 2, 5));
  set.insert(sample2(4, 6, 5));
  double radius = -1;
  auto nn = set.nearest(vec2(1, 2), 1, &radius);
  CHECK(nn[0].index == 0);
  CHECK(radius == 0);
}

TEST_CASE("equidistant tie broken by insertion order") {
  SampleSet set(2, 1);
  set.insert(sample2(1, 0, 1));   // index 0
  set.insert(sample2(-1, 0, 1));  // index 1, same distance from origin
  auto nn = set.nearest(vec2(0, 0), 2);
  CHECK(nn[0].index == 0);
  CHECK(nn[1].index == 1);
}

TEST_CASE("nearest rejects k beyond set size") {
  SampleSet set(2, 1);
  set.insert(sample2(0, 0, 1));
  CHECK_THROWS(set.nearest(vec2(0, 0), 2));
}

TEST_CASE("within_ball radius zero includes boundary point") {
  SampleSet set(2, 1);
  set.insert(sample2(2, 2, 1));
  auto hits = set.within_ball(vec2(2, 2), 0.0);
  CHECK(hits.size() == 1);
}

TEST_CASE("within_ball empty result") {
  SampleSet set(2, 1);
  set.insert(sample2(5, 5, 1));
  CHECK(set.within_ball(vec2(0, 0), 1.0).empty());
}

TEST_CASE("within_ball matches brute-force filter on a hand-built set") {
  SampleSet set(2, 1);
  const double pts[5][2] = {{0, 0}, {1, 0}, {0, 2}, {3, 3}, {-2, 1}};
  for (auto& p : pts) set.insert(sample2(p[0], p[1], 1));
  const Vector c = vec2(0.5, 0.5);
  const double radius = 3.0;  // plays the role of 3R around a refinement center
  auto hits = set.within_ball(c, radius);
  std::vector<int> expected;
  for (int i = 0; i < set.size(); ++i)
    if ((set[i].location - c).norm() <= radius) expected.push_back(i);
  REQUIRE(hits.size() == expected.size());
  for (auto& h : hits) CHECK(std::count(expected.begin(), expected.end(), h.index) == 1);
}

TEST_CASE("nearest agrees with brute force and radius is monotone in k") {
  RngStream rng(1234);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.integer(4));
    const int count = 5 + static_cast<int>(rng.integer(195));
    SampleSet set(d, 1);
    for (int i = 0; i < count; ++i) {
      Sample s;
      s.location = Vector::NullaryExpr(d, [&](Eigen::Index) { return rng.uniform(-1, 1); });
      s.values = Vector::Constant(1, rng.normal());
      set.insert(s);
    }
    Vector center = Vector::NullaryExpr(d, [&](Eigen::Index) { return rng.uniform(-1, 1); });

    std::vector<std::pair<double, int>> brute;
    for (int i = 0; i < set.size(); ++i) brute.push_back({(set[i].location - center).norm(), i});
    std::stable_sort(brute.begin(), brute.end(),
                     [](auto& a, auto& b) { return a.first < b.first; });

    double prev_radius = -1;
    for (int k = 1; k <= set.size(); k += std::max(1, set.size() / 7)) {
      double radius = 0;
      auto nn = set.nearest(center, k, &radius);
      CHECK(radius >= prev_radius);
      prev_radius = radius;
      for (int i = 0; i < k; ++i) CHECK(nn[i].index == brute[i].second);
      // ball at the k-th radius covers the k nearest
      auto ball = set.within_ball(center, radius);
      CHECK(static_cast<int>(ball.size()) >= k);
    }
  }
}

TEST_CASE("csv round trip") {
  SampleSet set(2, 2);
  for (int i = 0; i < 4; ++i) {
    Sample s;
    s.location = vec2(i * 0.25, -i);
    s.values = vec2(i, i * i);
    set.insert(s);
  }
  std::stringstream ss;
  set.write_csv(ss);
  SampleSet back = SampleSet::read_csv(ss);
  REQUIRE(back.size() == set.size());
  for (int i = 0; i < set.size(); ++i) {
    CHECK((back[i].location - set[i].location).norm() == 0);
    CHECK((back[i].values - set[i].values).norm() == 0);
  }
}
