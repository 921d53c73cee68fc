#include <relit/camera.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace relit;

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
  return axis_angle(axis, std::uniform_real_distribution<double>(0, kPi)(rng));
}

}  // namespace

TEST(CameraProject, OpticalAxisHitsPrincipalPoint) {
  const Camera cam = Camera::from_intrinsics(120, 110, 64.5, 40.25, Mat3::Identity(), Vec3(0, 0, 1));
  const auto p = cam.project(Vec3(0, 0, 0));
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->x(), 64.5);
  EXPECT_DOUBLE_EQ(p->y(), 40.25);
}

TEST(CameraProject, HandValue) {
  const Camera cam = Camera::from_intrinsics(100, 100, 50, 30, Mat3::Identity(), Vec3::Zero());
  const auto p = cam.project(Vec3(1, 0, 2));
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->x(), 100.0);
  EXPECT_DOUBLE_EQ(p->y(), 30.0);
}

TEST(CameraProject, DistortionHandValue) {
  const Camera cam = Camera::from_intrinsics(100, 80, 50, 30, Mat3::Identity(), Vec3::Zero(), 0.1);
  const auto p = cam.project(Vec3(1, 1, 2));
  ASSERT_TRUE(p);
  // n = (0.5, 0.5), |n|^2 = 0.5, factor 1.05
  EXPECT_NEAR(p->x(), 100 * 0.525 + 50, 1e-12);
  EXPECT_NEAR(p->y(), 80 * 0.525 + 30, 1e-12);
}

TEST(CameraProject, BehindCamera) {
  const Camera cam = Camera::from_intrinsics(100, 100, 50, 50, Mat3::Identity(), Vec3::Zero());
  EXPECT_FALSE(cam.project(Vec3(0, 0, -1)));
  EXPECT_FALSE(cam.project(Vec3(0.3, 0, 0)));
  EXPECT_THROW(cam.project(Vec3(0, 0, std::nan(""))), ValidationError);
}

TEST(CameraRay, PrincipalPointLooksDownAxis) {
  std::mt19937_64 rng(1);
  const Mat3 r = random_rotation(rng);
  const Camera cam = Camera::from_intrinsics(90, 95, 33, 21, r, Vec3(0.2, -1, 3), -0.1);
  const Ray ray = cam.pixel_ray(Vec2(33, 21));
  EXPECT_LT((ray.dir - r.transpose() * Vec3(0, 0, 1)).norm(), 1e-12);
  EXPECT_LT((r * ray.origin + cam.t()).norm(), 1e-12);
}

TEST(CameraRay, CornerClosedForm) {
  const Camera cam = Camera::from_intrinsics(100, 120, 40, 30, Mat3::Identity(), Vec3::Zero());
  const Ray ray = cam.pixel_ray(Vec2(0, 0));
  const Vec3 expected = Vec3(-40.0 / 100, -30.0 / 120, 1).normalized();
  EXPECT_LT((ray.dir - expected).norm(), 1e-12);
}

TEST(CameraRay, ProjectInvertsPixelRay) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> k1d(-0.2, 0.2), px(0, 200), py(0, 150), depth(0.5, 10);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const Camera cam = Camera::from_intrinsics(150, 155, 100, 75, random_rotation(rng), Vec3(0.1, 0.2, 0.3), k1d(rng));
    const Vec2 p(px(rng), py(rng));
    const Ray ray = cam.pixel_ray(p);
    const auto back = cam.project(ray.origin + depth(rng) * ray.dir);
    ASSERT_TRUE(back);
    worst = std::max(worst, (*back - p).norm());
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(CameraRay, DivergentUndistortion) {
  const Camera cam = Camera::from_intrinsics(10, 10, 0, 0, Mat3::Identity(), Vec3::Zero(), -2.0);
  EXPECT_THROW(cam.pixel_ray(Vec2(30, 30)), ValidationError);
}

TEST(CameraCenter, MapsToOrigin) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Camera cam = Camera::from_intrinsics(100, 100, 50, 50, random_rotation(rng), Vec3(1.5, -2, 0.25));
    EXPECT_LT((cam.R() * cam.center() + cam.t()).norm(), 1e-12);
  }
}

TEST(CameraText, Roundtrip) {
  std::mt19937_64 rng(4);
  const Camera cam = Camera::from_intrinsics(123.456789, 98.7654321, 50.125, 40.0625, random_rotation(rng),
                                             Vec3(0.123456789012, -4.5, 2.0 / 3.0), 0.0123456789);
  const Camera back = parse_camera(serialize_camera(cam));
  EXPECT_LT((back.K() - cam.K()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((back.R() - cam.R()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((back.t() - cam.t()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(back.k1(), cam.k1(), 1e-12);
}

TEST(CameraText, WrongTokenCount) {
  std::string text = "100 0 50 0 100 50 0 0 1\n1 0 0 0 1 0 0 0 1\n0 0\n";
  try {
    parse_camera(text);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("20"), std::string::npos) << e.what();
  }
}

TEST(CameraText, SlightlyDriftedRotationAccepted) {
  Mat3 r = axis_angle(Vec3(0, 0, 1), 0.3);
  r(0, 1) += 1e-8;
  std::ostringstream text;
  text << std::setprecision(17) << "100 0 50 0 100 50 0 0 1\n";
  for (int i = 0; i < 9; ++i) text << r(i / 3, i % 3) << ' ';
  text << "\n0 0 1\n0\n";
  const Camera cam = parse_camera(text.str());
  EXPECT_TRUE(is_rotation(cam.R()));
  // nearest rotation in the Frobenius sense
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 nearest = svd.matrixU() * svd.matrixV().transpose();
  EXPECT_LT((cam.R() - nearest).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CameraText, RejectsBadRotationAndIntrinsics) {
  EXPECT_THROW(parse_camera("100 0 50 0 100 50 0 0 1\n1 0 0 0 1 0 0 0.1 1\n0 0 1\n0\n"), ValidationError);
  EXPECT_THROW(parse_camera("100 3 50 0 100 50 0 0 1\n1 0 0 0 1 0 0 0 1\n0 0 1\n0\n"), ValidationError);
  EXPECT_THROW(parse_camera("-100 0 50 0 100 50 0 0 1\n1 0 0 0 1 0 0 0 1\n0 0 1\n0\n"), ValidationError);
  EXPECT_THROW(parse_camera("100 0 50 0 100 50 0 0 1\n1 0 0 0 1 0 0 0 1\n0 0 x\n0\n"), ValidationError);
}

TEST(CameraLookAt, TargetProjectsToCenter) {
  const Camera cam = Camera::look_at(Vec3(3, 1, 2), Vec3(0, 0, 0.5), Vec3::UnitZ(), 80, 80, 40, 40, 0.01);
  const auto p = cam.project(Vec3(0, 0, 0.5));
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->x(), 40, 1e-9);
  EXPECT_NEAR(p->y(), 40, 1e-9);
  // world up appears above the target in the image
  const auto above = cam.project(Vec3(0, 0, 0.8));
  ASSERT_TRUE(above);
  EXPECT_LT(above->y(), 40);
}
