#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <random>
#include <vector>

#include "hybridloc/evalkit.hpp"
#include "hybridloc/rng.hpp"
#include "test_util.hpp"

using namespace hybridloc;

namespace {

Prediction ok_prediction(int id, const Vec3& object, const Vec3& displacement) {
  Prediction p;
  p.query_id = id;
  p.status = PredictionStatus::Ok;
  p.object_world = object;
  p.displacement = displacement;
  p.views_used = 1;
  return p;
}

// Loop-free-as-possible independent recount of the same definitions.
MetricsReport naive_metrics(const std::vector<QueryRecord>& records) {
  MetricsReport r;
  r.total = int(records.size());
  r.with_pose = int(std::count_if(records.begin(), records.end(),
                                  [](const QueryRecord& q) { return q.has_pose; }));
  r.with_prediction = int(std::count_if(records.begin(), records.end(),
                                        [](const QueryRecord& q) { return q.has_prediction; }));
  r.successes = int(std::count_if(records.begin(), records.end(),
                                  [](const QueryRecord& q) { return q.success; }));
  r.angle_undefined = int(std::count_if(records.begin(), records.end(),
                                        [](const QueryRecord& q) { return q.angle_undefined; }));
  r.qwp_pct = 100.0 * r.with_pose / r.total;
  r.succ_star_pct = r.with_pose > 0 ? 100.0 * r.successes / r.with_pose : 0.0;
  r.succ_pct = r.succ_star_pct * r.qwp_pct / 100.0;
  double l2 = 0.0, angle = 0.0;
  int nl = 0, na = 0;
  for (const QueryRecord& q : records) {
    if (q.l2_error_m) {
      l2 += *q.l2_error_m;
      ++nl;
    }
    if (q.angle_error_rad) {
      angle += *q.angle_error_rad;
      ++na;
    }
  }
  r.mean_l2_m = nl ? l2 / nl : 0.0;
  r.mean_angle_rad = na ? angle / na : 0.0;
  return r;
}

bool reports_equal(const MetricsReport& a, const MetricsReport& b) {
  return a.succ_pct == b.succ_pct && a.succ_star_pct == b.succ_star_pct &&
         a.qwp_pct == b.qwp_pct && a.mean_l2_m == b.mean_l2_m &&
         a.mean_angle_rad == b.mean_angle_rad && a.total == b.total &&
         a.with_pose == b.with_pose && a.with_prediction == b.with_prediction &&
         a.successes == b.successes && a.angle_undefined == b.angle_undefined;
}

std::vector<QueryRecord> random_records(std::uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<QueryRecord> records;
  for (int i = 0; i < n; ++i) {
    QueryRecord q;
    q.query_id = i;
    q.has_pose = rng.bernoulli(0.8);
    q.has_prediction = q.has_pose && rng.bernoulli(0.85);
    if (q.has_prediction) {
      q.l2_error_m = rng.uniform(0.0, 10.0);
      if (rng.bernoulli(0.95)) {
        q.angle_error_rad = rng.uniform(0.0, std::numbers::pi);
      } else {
        q.angle_undefined = true;
      }
      q.success = *q.l2_error_m <= 6.0 && q.angle_error_rad &&
                  *q.angle_error_rad <= std::numbers::pi / 6;
    }
    records.push_back(q);
  }
  return records;
}

}  // namespace

TEST_CASE("l2_error: fixed cases and symmetry") {
  CHECK(l2_error(Vec3(1, 2, 3), Vec3(1, 2, 3)) == 0.0);
  CHECK(l2_error(Vec3(0, 0, 0), Vec3(3, 4, 0)) == 5.0);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Vec3 a = testutil::random_vec3(rng, 5.0), b = testutil::random_vec3(rng, 5.0);
    CHECK(l2_error(a, b) == l2_error(b, a));
  }
}

TEST_CASE("angle_error: fixed cases") {
  CHECK(angle_error(Vec3(1, 2, 3), Vec3(2, 4, 6)) == 0.0);
  CHECK(angle_error(Vec3(1, 0, 0), Vec3(-2, 0, 0)) == doctest::Approx(std::numbers::pi));
  CHECK(angle_error(Vec3(1, 0, 0), Vec3(0, 3, 0)) == doctest::Approx(std::numbers::pi / 2));
  CHECK_THROWS_AS(angle_error(Vec3(0, 0, 0), Vec3(1, 0, 0)), UndefinedAngleError);
  CHECK_THROWS_AS(angle_error(Vec3(1, 0, 0), Vec3(0, 0, 0)), UndefinedAngleError);
}

TEST_CASE("evaluate_query: status handling") {
  QueryGroundTruth gt;
  gt.query_id = 4;
  gt.object = Vec3(1, 1, 1);
  gt.query_camera_center = Vec3(0, 0, 0);

  Prediction no_pose;
  no_pose.query_id = 4;
  no_pose.status = PredictionStatus::NoPose;
  const QueryRecord r1 = evaluate_query(no_pose, gt, Thresholds{});
  CHECK(!r1.has_pose);
  CHECK(!r1.has_prediction);
  CHECK(!r1.success);

  Prediction no_det;
  no_det.query_id = 4;
  no_det.status = PredictionStatus::NoDetection;
  const QueryRecord r2 = evaluate_query(no_det, gt, Thresholds{});
  CHECK(r2.has_pose);
  CHECK(!r2.has_prediction);
  CHECK(!r2.success);

  const QueryRecord r3 =
      evaluate_query(ok_prediction(4, gt.object, gt.object - gt.query_camera_center), gt,
                     Thresholds{});
  CHECK(r3.success);
  CHECK(*r3.l2_error_m == 0.0);
  CHECK(*r3.angle_error_rad == 0.0);
}

TEST_CASE("evaluate_query: thresholds are inclusive at the boundary") {
  QueryGroundTruth gt;
  gt.query_id = 0;
  gt.object = Vec3(0, 0, 5);
  gt.query_camera_center = Vec3(0, 0, 0);

  Thresholds thr;
  thr.tau_l2_m = 6.0;
  // Exactly 6 meters off, along the displacement direction so the angle is 0.
  const QueryRecord rec =
      evaluate_query(ok_prediction(0, Vec3(0, 0, 11), Vec3(0, 0, 11)), gt, thr);
  CHECK(*rec.l2_error_m == 6.0);
  CHECK(rec.success);

  const QueryRecord beyond =
      evaluate_query(ok_prediction(0, Vec3(0, 0, 11.0000001), Vec3(0, 0, 11.0000001)), gt, thr);
  CHECK(!beyond.success);
}

TEST_CASE("evaluate_query: zero-length predicted displacement is counted, not crashed") {
  QueryGroundTruth gt;
  gt.query_id = 1;
  gt.object = Vec3(1, 0, 0);
  gt.query_camera_center = Vec3(0, 0, 0);
  const QueryRecord rec =
      evaluate_query(ok_prediction(1, Vec3(1, 0, 0), Vec3(0, 0, 0)), gt, Thresholds{});
  CHECK(rec.angle_undefined);
  CHECK(!rec.angle_error_rad.has_value());
  CHECK(!rec.success);  // angle requirement cannot be met
  CHECK(*rec.l2_error_m == 0.0);
}

TEST_CASE("aggregate_metrics: worked example") {
  std::vector<QueryRecord> records;
  for (int i = 0; i < 10; ++i) {
    QueryRecord q;
    q.query_id = i;
    q.has_pose = i < 8;
    q.has_prediction = i < 7;
    q.success = i < 6;
    if (q.has_prediction) {
      q.l2_error_m = 1.0;
      q.angle_error_rad = 0.25;
    }
    records.push_back(q);
  }
  const MetricsReport r = aggregate_metrics(records);
  CHECK(r.succ_pct == 60.0);
  CHECK(r.qwp_pct == 80.0);
  CHECK(r.succ_star_pct == 75.0);
  CHECK(r.mean_l2_m == 1.0);
  CHECK(r.mean_angle_rad == 0.25);
}

TEST_CASE("aggregate_metrics: all NO_POSE collapses to zeros") {
  std::vector<QueryRecord> records(5);
  for (int i = 0; i < 5; ++i) records[i].query_id = i;
  const MetricsReport r = aggregate_metrics(records);
  CHECK(r.succ_pct == 0.0);
  CHECK(r.succ_star_pct == 0.0);
  CHECK(r.qwp_pct == 0.0);
  CHECK(r.mean_l2_m == 0.0);
  CHECK(r.mean_angle_rad == 0.0);
}

TEST_CASE("aggregate_metrics rejects empty input") {
  CHECK_THROWS_AS(aggregate_metrics({}), std::invalid_argument);
}

TEST_CASE("metric identity holds bit-exactly on every report") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto records = random_records(seed, 37);
    const MetricsReport r = aggregate_metrics(records);
    CHECK(r.succ_pct == r.succ_star_pct * r.qwp_pct / 100.0);
  }
}

TEST_CASE("published-style row satisfies the identity within rounding") {
  // Row values as they appear on a leaderboard, already rounded to 2 digits.
  const double succ = 88.64, succ_star = 96.15, qwp = 92.05;
  CHECK(std::abs(succ_star * qwp / 100.0 - succ) <= 0.2);
}

TEST_CASE("aggregate_metrics matches a naive recomputation exactly") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto records = random_records(seed, 53);
    CHECK(reports_equal(aggregate_metrics(records), naive_metrics(records)));
  }
}

TEST_CASE("aggregate_metrics is permutation invariant") {
  auto records = random_records(7, 41);
  const MetricsReport before = aggregate_metrics(records);
  std::mt19937 shuffle_rng(3);
  std::shuffle(records.begin(), records.end(), shuffle_rng);
  const MetricsReport after = aggregate_metrics(records);
  // Counting metrics are exactly order-free; the means reassociate the sum.
  CHECK(after.succ_pct == before.succ_pct);
  CHECK(after.succ_star_pct == before.succ_star_pct);
  CHECK(after.qwp_pct == before.qwp_pct);
  CHECK(after.successes == before.successes);
  CHECK(after.mean_l2_m == doctest::Approx(before.mean_l2_m).epsilon(1e-12));
  CHECK(after.mean_angle_rad == doctest::Approx(before.mean_angle_rad).epsilon(1e-12));
}

TEST_CASE("adding a NO_POSE record never raises Succ or QwP") {
  auto records = random_records(8, 29);
  const MetricsReport before = aggregate_metrics(records);
  records.push_back(QueryRecord{});
  const MetricsReport after = aggregate_metrics(records);
  CHECK(after.succ_pct <= before.succ_pct);
  CHECK(after.qwp_pct <= before.qwp_pct);
}

TEST_CASE("metrics table renders the five columns in order") {
  MetricsReport r;
  r.succ_pct = 88.64;
  r.succ_star_pct = 96.15;
  r.mean_l2_m = 1.86;
  r.mean_angle_rad = 1.24;
  r.qwp_pct = 92.05;
  const std::vector<std::pair<std::string, MetricsReport>> rows{{"hybrid", r}};
  const std::string table = format_metrics_table(rows);

  const auto col = [&](const std::string& s) { return table.find(s); };
  CHECK(col("Succ%") < col("Succ*%"));
  CHECK(col("Succ*%") < col("L2"));
  CHECK(col("L2") < col("Angle"));
  CHECK(col("Angle") < col("QwP%"));
  CHECK(col("88.64") != std::string::npos);
  CHECK(col("96.15") != std::string::npos);
  CHECK(col("1.86") != std::string::npos);
  CHECK(col("1.24") != std::string::npos);
  CHECK(col("92.05") != std::string::npos);
  CHECK(col("88.64") < col("96.15"));
  CHECK(col("96.15") < col("1.86"));
  CHECK(col("1.86") < col("1.24"));
  CHECK(col("1.24") < col("92.05"));
}
