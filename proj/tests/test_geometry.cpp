#include "lfcal/distortion.hpp"
#include "lfcal/projection.hpp"
#include "lfcal/rng.hpp"
#include "lfcal/rotation.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Geometry>

#include <cmath>

using namespace lfcal;

namespace {

Vec3 random_unit_axis(Rng& rng) {
  // Marsaglia-free: normalized Gaussian triple is uniform on the sphere.
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  while (v.norm() < 1e-6) v = Vec3(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

// RQ decomposition of a 3x3 matrix into upper-triangular * orthonormal,
// with the triangular factor forced to a positive diagonal. Serves as an
// independent oracle for projection-matrix round trips.
void rq_decompose(const Mat3& a, Mat3& upper, Mat3& ortho) {
  Mat3 flip;
  flip << 0, 0, 1, 0, 1, 0, 1, 0, 0;
  const Mat3 b = (flip * a).transpose();
  const Eigen::HouseholderQR<Mat3> qr(b);
  Mat3 q = qr.householderQ();
  Mat3 r = qr.matrixQR().triangularView<Eigen::Upper>();
  upper = flip * r.transpose() * flip;
  ortho = flip * q.transpose();
  for (int i = 0; i < 3; ++i) {
    if (upper(i, i) < 0.0) {
      upper.col(i) = -upper.col(i);
      ortho.row(i) = -ortho.row(i);
    }
  }
}

}  // namespace

TEST_CASE("rodrigues_to_matrix on axis-aligned inputs") {
  const Mat3 eye = rodrigues_to_matrix(Vec3::Zero());
  CHECK((eye - Mat3::Identity()).norm() == 0.0);

  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 rz = rodrigues_to_matrix(Vec3(0, 0, M_PI / 2));
  CHECK((rz - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("rodrigues_to_matrix trace identity and orthonormality") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double theta = rng.uniform(1e-6, M_PI - 1e-6);
    const Vec3 rvec = theta * random_unit_axis(rng);
    const Mat3 r = rodrigues_to_matrix(rvec);
    CHECK(r.trace() == Catch::Approx(1.0 + 2.0 * std::cos(theta)).margin(1e-12));
    CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(r.determinant() == Catch::Approx(1.0).margin(1e-13));
  }
}

TEST_CASE("matrix_to_rodrigues basic inversions") {
  CHECK(matrix_to_rodrigues(Mat3::Identity()).norm() == 0.0);

  Mat3 rz;
  rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Vec3 back = matrix_to_rodrigues(rz);
  CHECK(back.x() == Catch::Approx(0.0).margin(1e-12));
  CHECK(back.y() == Catch::Approx(0.0).margin(1e-12));
  CHECK(back.z() == Catch::Approx(M_PI / 2).margin(1e-12));
}

TEST_CASE("matrix_to_rodrigues rejects non-rotations") {
  Mat3 scaled = 1.5 * Mat3::Identity();
  CHECK_THROWS_MATCHES(matrix_to_rodrigues(scaled), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.kind() == "NotARotation"; }));

  Mat3 reflection = Mat3::Identity();
  reflection(2, 2) = -1.0;
  CHECK_THROWS_MATCHES(matrix_to_rodrigues(reflection), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.kind() == "NotARotation"; }));
}

TEST_CASE("rodrigues round-trip over random rotations") {
  Rng rng(12);
  for (int i = 0; i < 10000; ++i) {
    const double theta = rng.uniform(1e-12, M_PI - 1e-6);
    const Vec3 rvec = theta * random_unit_axis(rng);
    const Vec3 back = matrix_to_rodrigues(rodrigues_to_matrix(rvec));
    REQUIRE((back - rvec).norm() < 1e-9);
  }
}

TEST_CASE("matrix_to_rodrigues near pi agrees with quaternion oracle") {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const double theta = M_PI - 1e-8;
    const Vec3 axis = random_unit_axis(rng);
    const Mat3 r = Eigen::AngleAxisd(theta, axis).toRotationMatrix();

    const Vec3 mine = matrix_to_rodrigues(r);
    const Eigen::AngleAxisd oracle{Eigen::Quaterniond(r)};
    Vec3 expected = oracle.angle() * oracle.axis();
    if (expected.dot(mine) < 0.0) expected = -expected;  // antipodal at pi

    CHECK((mine - expected).norm() < 1e-6);
    CHECK((rodrigues_to_matrix(mine) - r).norm() < 1e-6);
    CHECK(mine.norm() <= M_PI + 1e-12);
  }
}

TEST_CASE("rotate_point_jacobian matches finite differences") {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    Vec3 rvec;
    if (trial % 3 == 0) {
      rvec = 1e-9 * random_unit_axis(rng);  // Taylor branch
    } else if (trial % 3 == 1) {
      rvec = (M_PI - 1e-3) * random_unit_axis(rng);
    } else {
      rvec = rng.uniform(0.1, 2.0) * random_unit_axis(rng);
    }
    const Vec3 point(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));

    const Mat3 analytic = rotate_point_jacobian(rvec, point);
    Mat3 numeric;
    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
      Vec3 plus = rvec, minus = rvec;
      plus(j) += h;
      minus(j) -= h;
      numeric.col(j) =
          (rodrigues_to_matrix(plus) * point - rodrigues_to_matrix(minus) * point) / (2.0 * h);
    }
    REQUIRE((analytic - numeric).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("apply_distortion closed form") {
  SECTION("identity coefficients leave points alone") {
    const RadialDistortion d{0.0, 0.0, 480.0, 480.0};
    const PixelPoint p{123.25, 71.5};
    const PixelPoint q = apply_distortion(d, p);
    CHECK(q.x == p.x);
    CHECK(q.y == p.y);
  }
  SECTION("distortion center is a fixed point") {
    const RadialDistortion d{1e-4, -1e-9, 480.0, 480.0};
    const PixelPoint q = apply_distortion(d, {480.0, 480.0});
    CHECK(q.x == 480.0);
    CHECK(q.y == 480.0);
  }
  SECTION("pure k1 at radius 10") {
    const RadialDistortion d{1e-4, 0.0, 480.0, 480.0};
    const PixelPoint q = apply_distortion(d, {490.0, 480.0});
    CHECK(q.x == Catch::Approx(480.0 + 10.1).margin(1e-12));
    CHECK(q.y == Catch::Approx(480.0).margin(1e-12));
  }
}

TEST_CASE("remove_distortion inverts apply_distortion") {
  SECTION("identity coefficients") {
    const RadialDistortion d{0.0, 0.0, 100.0, 100.0};
    const PixelPoint p{7.0, 900.0};
    const PixelPoint q = remove_distortion(d, p);
    CHECK(q.x == p.x);
    CHECK(q.y == p.y);
  }
  SECTION("center unchanged") {
    const RadialDistortion d{1e-5, 1e-12, 480.0, 470.0};
    const PixelPoint q = remove_distortion(d, {480.0, 470.0});
    CHECK(q.x == Catch::Approx(480.0).margin(1e-12));
    CHECK(q.y == Catch::Approx(470.0).margin(1e-12));
  }
  SECTION("round trip over the image domain") {
    // The inverse is only well-posed where the radial map r -> r(1+k1 r^2
    // +k2 r^4) stays injective (derivative 1+3k1r^2+5k2r^4 > 0); negative
    // coefficients at the extreme of the sampled box fold the 960x960
    // corners onto interior radii, where no algorithm can undo the map.
    // Restrict to a contraction margin that also guarantees the 50-step
    // iteration reaches 1e-9 px.
    Rng rng(15);
    int kept = 0;
    while (kept < 2000) {
      const RadialDistortion d{rng.uniform(-1e-6, 1e-6), rng.uniform(-1e-12, 1e-12), 480.0, 480.0};
      const PixelPoint ideal{rng.uniform(0.0, 960.0), rng.uniform(0.0, 960.0)};
      const double r2 = (ideal.x - 480.0) * (ideal.x - 480.0) + (ideal.y - 480.0) * (ideal.y - 480.0);
      if (2.6 * std::abs(d.k1) * r2 + 4.6 * std::abs(d.k2) * r2 * r2 >= 0.55) continue;
      ++kept;
      const PixelPoint distorted = apply_distortion(d, ideal);
      const PixelPoint back = remove_distortion(d, distorted);
      REQUIRE(distance(back, ideal) < 1e-6);
    }
  }
  SECTION("non-contracting map reports NoConvergence") {
    // gain(10) = 101 sends the iterate to ~0.1, whose gain ~1 sends it back
    // to ~10: a persistent 2-cycle that never meets the tolerance.
    const RadialDistortion d{1.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_MATCHES(remove_distortion(d, {10.0, 0.0}), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "NoConvergence"; }));
  }
}

TEST_CASE("projection_matrix composition") {
  SECTION("identity intrinsics, zero pose") {
    const IntrinsicMatrix k{1.0, 1.0, 0.0, 0.0, 0.0};
    const ProjectionMatrix p = projection_matrix(k, ViewPose{});
    ProjectionMatrix expected;
    expected << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0;
    CHECK((p - expected).norm() == 0.0);
  }
  SECTION("arbitrary K, zero pose gives [K|0]") {
    const IntrinsicMatrix k{850.0, 840.0, 480.0, 470.0, 0.0};
    const ProjectionMatrix p = projection_matrix(k, ViewPose{});
    CHECK((p.leftCols<3>() - k.matrix()).norm() == 0.0);
    CHECK(p.col(3).norm() == 0.0);
  }
  SECTION("RQ decomposition recovers K and pose") {
    Rng rng(16);
    for (int i = 0; i < 20; ++i) {
      const IntrinsicMatrix k{rng.uniform(500, 1200), rng.uniform(500, 1200),
                              rng.uniform(300, 700), rng.uniform(300, 700), 0.0};
      ViewPose pose;
      pose.rvec = rng.uniform(0.05, 1.5) * random_unit_axis(rng);
      pose.tvec = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 3));
      const ProjectionMatrix p = projection_matrix(k, pose);

      Mat3 upper, ortho;
      rq_decompose(p.leftCols<3>(), upper, ortho);
      upper /= upper(2, 2);
      CHECK(upper(0, 0) == Catch::Approx(k.fx).epsilon(1e-9));
      CHECK(upper(1, 1) == Catch::Approx(k.fy).epsilon(1e-9));
      CHECK(upper(0, 2) == Catch::Approx(k.cx).epsilon(1e-9));
      CHECK(upper(1, 2) == Catch::Approx(k.cy).epsilon(1e-9));
      CHECK((ortho - rodrigues_to_matrix(pose.rvec)).cwiseAbs().maxCoeff() < 1e-9);

      const Vec3 t = k.matrix().inverse() * p.col(3);
      CHECK((t - pose.tvec).norm() < 1e-9);
    }
  }
}

TEST_CASE("project_point against similar triangles") {
  const IntrinsicMatrix k{850.0, 850.0, 480.0, 480.0, 0.0};
  const ProjectionMatrix p = projection_matrix(k, ViewPose{});

  const PixelPoint on_axis = project_point(p, {0.0, 0.0, 2.0});
  CHECK(on_axis.x == Catch::Approx(480.0).margin(1e-12));
  CHECK(on_axis.y == Catch::Approx(480.0).margin(1e-12));

  const PixelPoint off_axis = project_point(p, {0.1, 0.0, 2.0});
  CHECK(off_axis.x == Catch::Approx(522.5).margin(1e-12));
  CHECK(off_axis.y == Catch::Approx(480.0).margin(1e-12));
}

TEST_CASE("project_point rejects zero depth") {
  const IntrinsicMatrix k{850.0, 850.0, 480.0, 480.0, 0.0};
  const ProjectionMatrix p = projection_matrix(k, ViewPose{});
  CHECK_THROWS_MATCHES(project_point(p, {0.3, -0.1, 0.0}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.kind() == "DegenerateDepth"; }));
}

TEST_CASE("project_point is invariant to homogeneous scaling") {
  Rng rng(17);
  const IntrinsicMatrix k{850.0, 850.0, 480.0, 480.0, 0.0};
  ViewPose pose;
  pose.rvec = Vec3(0.1, -0.2, 0.05);
  pose.tvec = Vec3(0.02, -0.01, 0.4);
  const ProjectionMatrix p = projection_matrix(k, pose);
  for (int i = 0; i < 100; ++i) {
    const WorldPoint m{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(1.0, 4.0)};
    const double s = rng.uniform(0.1, 10.0);
    const Eigen::Vector4d scaled(s * m.x, s * m.y, s * m.z, s);
    const Vec3 hom = p * scaled;
    const PixelPoint direct = project_point(p, m);
    CHECK(hom.x() / hom.z() == Catch::Approx(direct.x).margin(1e-9));
    CHECK(hom.y() / hom.z() == Catch::Approx(direct.y).margin(1e-9));
  }
}

TEST_CASE("project_with_distortion composes pinhole and radial model") {
  Rng rng(18);
  const IntrinsicMatrix k{850.0, 860.0, 480.0, 475.0, 0.0};
  const RadialDistortion d = RadialDistortion::centered(-2e-7, 3e-13, k);
  ViewPose pose;
  pose.rvec = Vec3(0.05, 0.1, -0.02);
  pose.tvec = Vec3(0.01, 0.02, 0.1);
  const ProjectionMatrix p = projection_matrix(k, pose);
  for (int i = 0; i < 100; ++i) {
    const WorldPoint m{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(1.0, 4.0)};
    const PixelPoint composed = project_with_distortion(k, pose, d, m);
    const PixelPoint oracle = apply_distortion(d, project_point(p, m));
    CHECK(distance(composed, oracle) == 0.0);
  }
}

TEST_CASE("reprojection_rms definition") {
  SECTION("identical lists give zero") {
    const std::vector<PixelPoint> pts{{1, 2}, {3, 4}, {5, 6}};
    CHECK(reprojection_rms(pts, pts) == 0.0);
  }
  SECTION("single 1 px offset among four points") {
    const std::vector<PixelPoint> obs{{0, 0}, {10, 0}, {0, 10}, {10, 10}};
    std::vector<PixelPoint> pred = obs;
    pred[2].x += 1.0;
    CHECK(reprojection_rms(obs, pred) == Catch::Approx(0.5).margin(1e-15));
  }
  SECTION("gaussian noise floor") {
    Rng rng(19);
    const double sigma = 0.2;
    std::vector<PixelPoint> obs, pred;
    for (int i = 0; i < 20000; ++i) {
      const PixelPoint p{rng.uniform(0, 960), rng.uniform(0, 960)};
      pred.push_back(p);
      obs.push_back({p.x + rng.normal(0.0, sigma), p.y + rng.normal(0.0, sigma)});
    }
    // E[dx^2 + dy^2] = 2 sigma^2, so the RMS concentrates at sigma * sqrt(2).
    CHECK(reprojection_rms(obs, pred) == Catch::Approx(sigma * std::sqrt(2.0)).epsilon(0.03));
  }
  SECTION("error kinds") {
    const std::vector<PixelPoint> a{{0, 0}};
    const std::vector<PixelPoint> empty;
    CHECK_THROWS_MATCHES(reprojection_rms(empty, empty), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "EmptyInput"; }));
    CHECK_THROWS_MATCHES(reprojection_rms(a, empty), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == "SizeMismatch"; }));
  }
}
