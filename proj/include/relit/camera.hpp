#pragma once

// Pinhole camera with a single radial distortion coefficient.
//
// World to camera: Xc = R X + t, camera looks along +z, image x right and y down.
// Distortion acts on normalized coordinates before the intrinsics are applied.
// Pixel (i, j) has its center at (i + 0.5, j + 0.5).

#include <relit/error.hpp>
#include <relit/math.hpp>

#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace relit {

struct Ray {
  Vec3 origin;
  Vec3 dir;
};

class Camera {
 public:
  Camera() = default;
  Camera(const Mat3& k, const Mat3& r, const Vec3& t, double k1) : K_(k), R_(r), t_(t), k1_(k1) {
    require(K_.allFinite() && R_.allFinite() && t_.allFinite() && std::isfinite(k1_),
            "camera has non-finite parameters");
    require(K_(0, 0) > 0 && K_(1, 1) > 0, "camera focal lengths must be positive");
    require(K_(1, 0) == 0 && K_(2, 0) == 0 && K_(2, 1) == 0 && K_(2, 2) == 1,
            "camera intrinsics must be upper triangular with K[2][2] = 1");
    require(K_(0, 1) == 0, "camera intrinsics must have zero skew");
    require(is_rotation(R_), "camera rotation is not orthonormal with det +1");
  }

  static Camera from_intrinsics(double fx, double fy, double cx, double cy, const Mat3& r,
                                const Vec3& t, double k1 = 0.0) {
    Mat3 k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return Camera(k, r, t, k1);
  }

  /// Camera at `eye` looking at `target`; `up` is the world direction that maps to image-up.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                        double cx, double cy, double k1 = 0.0) {
    const Vec3 z = (target - eye).normalized();
    const Vec3 x = z.cross(up).normalized();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.row(0) = x.transpose();
    r.row(1) = y.transpose();
    r.row(2) = z.transpose();
    return from_intrinsics(fx, fy, cx, cy, r, -r * eye, k1);
  }

  const Mat3& K() const { return K_; }
  const Mat3& R() const { return R_; }
  const Vec3& t() const { return t_; }
  double k1() const { return k1_; }
  double fx() const { return K_(0, 0); }
  double fy() const { return K_(1, 1); }
  double cx() const { return K_(0, 2); }
  double cy() const { return K_(1, 2); }

  Vec3 center() const { return -R_.transpose() * t_; }

  /// Pixel coordinates of a world point, or nullopt when it lies behind the camera.
  std::optional<Vec2> project(const Vec3& world) const {
    require(world.allFinite(), "project: non-finite point");
    const Vec3 xc = R_ * world + t_;
    if (xc.z() <= 0) return std::nullopt;
    const Vec2 n(xc.x() / xc.z(), xc.y() / xc.z());
    const Vec2 d = n * (1.0 + k1_ * n.squaredNorm());
    return Vec2(fx() * d.x() + cx(), fy() * d.y() + cy());
  }

  /// Undistorted normalized coordinates for a pixel position (fixed-point iteration).
  Vec2 undistort(const Vec2& pixel) const {
    const Vec2 d((pixel.x() - cx()) / fx(), (pixel.y() - cy()) / fy());
    Vec2 n = d;
    for (int i = 0; i < 20; ++i) n = d / (1.0 + k1_ * n.squaredNorm());
    if (std::abs(k1_) * n.squaredNorm() >= 1.0 || !n.allFinite())
      throw ValidationError("undistortion diverged (|k1|*|n|^2 >= 1)");
    return n;
  }

  /// World-space ray through a continuous pixel position.
  Ray pixel_ray(const Vec2& pixel) const {
    const Vec2 n = undistort(pixel);
    return {center(), (R_.transpose() * Vec3(n.x(), n.y(), 1.0)).normalized()};
  }

 private:
  Mat3 K_ = Mat3::Identity();
  Mat3 R_ = Mat3::Identity();
  Vec3 t_ = Vec3::Zero();
  double k1_ = 0.0;
};

/// Text layout: 9 values K row-major, 9 values R row-major, 3 values t, 1 value k1.
/// Lines starting with '#' are comments.
inline Camera parse_camera(const std::string& text) {
  std::vector<double> v;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ValidationError("camera: invalid number '" + tok + "'");
      }
    }
  }
  if (v.size() != 22)
    throw ValidationError("camera: expected 22 values, got " + std::to_string(v.size()));
  Mat3 k, r;
  for (int i = 0; i < 9; ++i) {
    k(i / 3, i % 3) = v[i];
    r(i / 3, i % 3) = v[9 + i];
  }
  if (!is_rotation(r)) {
    if (!is_rotation(r, 1e-6)) throw ValidationError("camera: R is not a rotation matrix");
    r = orthonormalize(r);
  }
  return Camera(k, r, Vec3(v[18], v[19], v[20]), v[21]);
}

inline std::string serialize_camera(const Camera& cam) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# K (row-major)\n";
  for (int i = 0; i < 3; ++i) out << cam.K()(i, 0) << ' ' << cam.K()(i, 1) << ' ' << cam.K()(i, 2) << '\n';
  out << "# R (row-major)\n";
  for (int i = 0; i < 3; ++i) out << cam.R()(i, 0) << ' ' << cam.R()(i, 1) << ' ' << cam.R()(i, 2) << '\n';
  out << "# t\n" << cam.t().x() << ' ' << cam.t().y() << ' ' << cam.t().z() << '\n';
  out << "# k1\n" << cam.k1() << '\n';
  return out.str();
}

}  // namespace relit
