#pragma once

// Binary BVH over a triangle mesh with binned SAH construction.

#include <relit/camera.hpp>
#include <relit/error.hpp>
#include <relit/mesh.hpp>

#include <limits>
#include <optional>
#include <vector>

namespace relit {

struct Hit {
  double t = 0;
  int triangle = -1;
  std::array<double, 3> bary{};  ///< weights of the triangle's vertices 0, 1, 2
  Vec3 position;
  Vec3 geometric_normal;  ///< unit, oriented by the triangle winding
  Vec3 shading_normal;    ///< interpolated vertex normal, unit
  Vec2 uv;
};

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  double area() const {
    const Vec3 d = (hi - lo).cwiseMax(0.0);
    return 2.0 * (d.x() * d.y() + d.y() * d.z() + d.z() * d.x());
  }
  Vec3 center() const { return 0.5 * (lo + hi); }

  bool intersect(const Vec3& origin, const Vec3& inv_dir, double t_min, double t_max) const {
    for (int a = 0; a < 3; ++a) {
      double t0 = (lo[a] - origin[a]) * inv_dir[a];
      double t1 = (hi[a] - origin[a]) * inv_dir[a];
      if (inv_dir[a] < 0) std::swap(t0, t1);
      // NaN from 0 * inf leaves the bounds untouched
      t_min = t0 > t_min ? t0 : t_min;
      t_max = t1 < t_max ? t1 : t_max;
      if (t_max < t_min) return false;
    }
    return true;
  }
};

/// Moller-Trumbore; returns (t, b1, b2) for hits with t in (t_min, t_max).
inline std::optional<std::array<double, 3>> intersect_triangle(const Vec3& p0, const Vec3& p1, const Vec3& p2,
                                                              const Ray& ray, double t_min, double t_max) {
  const Vec3 e1 = p1 - p0, e2 = p2 - p0;
  const Vec3 pv = ray.dir.cross(e2);
  const double det = e1.dot(pv);
  if (det == 0.0) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tv = ray.origin - p0;
  const double b1 = tv.dot(pv) * inv;
  if (b1 < 0.0 || b1 > 1.0) return std::nullopt;
  const Vec3 qv = tv.cross(e1);
  const double b2 = ray.dir.dot(qv) * inv;
  if (b2 < 0.0 || b1 + b2 > 1.0) return std::nullopt;
  const double t = e2.dot(qv) * inv;
  if (!(t > t_min && t < t_max)) return std::nullopt;
  return std::array<double, 3>{t, b1, b2};
}

class Bvh {
 public:
  Bvh() = default;

  explicit Bvh(Mesh mesh) : mesh_(std::move(mesh)) {
    require(!mesh_.triangles.empty(), "cannot build a BVH over an empty mesh");
    mesh_.validate();
    const std::size_t n = mesh_.triangles.size();
    order_.resize(n);
    boxes_.resize(n);
    centers_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      order_[i] = static_cast<int>(i);
      for (int v : mesh_.triangles[i]) boxes_[i].extend(mesh_.vertices[v]);
      centers_[i] = boxes_[i].center();
      bounds_.extend(boxes_[i]);
    }
    nodes_.reserve(2 * n);
    nodes_.push_back({});
    build(0, 0, static_cast<int>(n), 0);
    boxes_.clear();
    centers_.clear();
  }

  const Mesh& mesh() const { return mesh_; }
  const Aabb& bounds() const { return bounds_; }
  double scene_diagonal() const { return (bounds_.hi - bounds_.lo).norm(); }
  /// Offset applied to shadow rays: 1e-4 of the scene diagonal.
  double shadow_epsilon() const { return 1e-4 * scene_diagonal(); }

  /// Nearest hit with t in (t_min, t_max); ties go to the lower triangle index.
  std::optional<Hit> intersect(const Ray& ray, double t_min = 0.0,
                               double t_max = std::numeric_limits<double>::infinity()) const {
    int best = -1;
    std::array<double, 3> best_hit{};
    traverse(ray, t_min, t_max, [&](int tri, const std::array<double, 3>& h, double& limit) {
      if (h[0] < limit || (h[0] == limit && tri < best)) {
        best = tri;
        best_hit = h;
        limit = h[0];
      }
      return false;
    });
    if (best < 0) return std::nullopt;
    return make_hit(ray, best, best_hit);
  }

  /// True when anything blocks the segment (eps, max_t - eps) along `dir` from `origin`.
  bool occluded(const Vec3& origin, const Vec3& dir,
                double max_t = std::numeric_limits<double>::infinity()) const {
    const double eps = shadow_epsilon();
    bool blocked = false;
    traverse(Ray{origin, dir}, eps, max_t - eps, [&](int, const std::array<double, 3>&, double&) {
      blocked = true;
      return true;
    });
    return blocked;
  }

  /// Reference nearest-hit query that tests every triangle.
  std::optional<Hit> intersect_brute_force(const Ray& ray, double t_min = 0.0,
                                           double t_max = std::numeric_limits<double>::infinity()) const {
    int best = -1;
    std::array<double, 3> best_hit{};
    double limit = t_max;
    for (std::size_t i = 0; i < mesh_.triangles.size(); ++i) {
      const auto& t = mesh_.triangles[i];
      auto h = intersect_triangle(mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]], ray, t_min,
                                  std::nextafter(limit, std::numeric_limits<double>::infinity()));
      if (h && ((*h)[0] < limit || best < 0)) {
        best = static_cast<int>(i);
        best_hit = *h;
        limit = (*h)[0];
      }
    }
    if (best < 0) return std::nullopt;
    return make_hit(ray, best, best_hit);
  }

  Hit make_hit(const Ray& ray, int tri, const std::array<double, 3>& h) const {
    const auto& t = mesh_.triangles[tri];
    Hit hit;
    hit.t = h[0];
    hit.triangle = tri;
    hit.bary = {1.0 - h[1] - h[2], h[1], h[2]};
    hit.position = ray.origin + h[0] * ray.dir;
    const Vec3 &p0 = mesh_.vertices[t[0]], &p1 = mesh_.vertices[t[1]], &p2 = mesh_.vertices[t[2]];
    hit.geometric_normal = (p1 - p0).cross(p2 - p0).normalized();
    Vec3 ns = Vec3::Zero();
    Vec2 uv = Vec2::Zero();
    for (int k = 0; k < 3; ++k) {
      ns += hit.bary[k] * mesh_.normals[t[k]];
      uv += hit.bary[k] * mesh_.uvs[t[k]];
    }
    hit.shading_normal = ns.squaredNorm() > 0 ? ns.normalized() : hit.geometric_normal;
    hit.uv = uv;
    return hit;
  }

 private:
  struct Node {
    Aabb box;
    int first = 0;  // leaf: first index into order_; interior: right child
    int count = 0;  // leaf triangle count, 0 for interior nodes
  };

  static constexpr int kLeafSize = 4;
  static constexpr int kBins = 16;
  static constexpr int kMaxDepth = 60;

  void build(int node_index, int begin, int end, int depth) {
    Aabb box, centroid_box;
    for (int i = begin; i < end; ++i) {
      box.extend(boxes_[order_[i]]);
      centroid_box.extend(centers_[order_[i]]);
    }
    nodes_[node_index].box = box;
    const int count = end - begin;
    auto make_leaf = [&] {
      nodes_[node_index].first = begin;
      nodes_[node_index].count = count;
    };
    if (count <= kLeafSize || depth >= kMaxDepth) return make_leaf();

    const Vec3 extent = centroid_box.hi - centroid_box.lo;
    int axis = 0;
    if (extent.y() > extent[axis]) axis = 1;
    if (extent.z() > extent[axis]) axis = 2;
    if (extent[axis] <= 0) return make_leaf();

    std::array<Aabb, kBins> bin_box;
    std::array<int, kBins> bin_count{};
    auto bin_of = [&](int tri) {
      const int b = static_cast<int>(kBins * (centers_[tri][axis] - centroid_box.lo[axis]) / extent[axis]);
      return std::clamp(b, 0, kBins - 1);
    };
    for (int i = begin; i < end; ++i) {
      const int b = bin_of(order_[i]);
      bin_box[b].extend(boxes_[order_[i]]);
      ++bin_count[b];
    }
    double best_cost = std::numeric_limits<double>::infinity();
    int best_split = -1;
    for (int split = 1; split < kBins; ++split) {
      Aabb left, right;
      int nl = 0, nr = 0;
      for (int b = 0; b < split; ++b) {
        if (bin_count[b]) left.extend(bin_box[b]);
        nl += bin_count[b];
      }
      for (int b = split; b < kBins; ++b) {
        if (bin_count[b]) right.extend(bin_box[b]);
        nr += bin_count[b];
      }
      if (nl == 0 || nr == 0) continue;
      const double cost = nl * left.area() + nr * right.area();
      if (cost < best_cost) {
        best_cost = cost;
        best_split = split;
      }
    }
    int mid;
    if (best_split < 0) {
      mid = begin + count / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                       [&](int a, int b) { return centers_[a][axis] < centers_[b][axis]; });
    } else {
      mid = static_cast<int>(std::partition(order_.begin() + begin, order_.begin() + end,
                                            [&](int tri) { return bin_of(tri) < best_split; }) -
                             order_.begin());
    }
    const int left = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_.push_back({});
    nodes_[node_index].first = left;
    nodes_[node_index].count = 0;
    build(left, begin, mid, depth + 1);
    build(left + 1, mid, end, depth + 1);
  }

  // visit(tri, hit, limit&) returns true to stop early; it may shrink `limit`.
  template <typename Visit>
  void traverse(const Ray& ray, double t_min, double t_max, Visit&& visit) const {
    if (nodes_.empty() || !(t_max > t_min)) return;
    const Vec3 inv(1.0 / ray.dir.x(), 1.0 / ray.dir.y(), 1.0 / ray.dir.z());
    double limit = t_max;
    int stack[kMaxDepth + 4];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!node.box.intersect(ray.origin, inv, t_min, limit)) continue;
      if (node.count > 0) {
        for (int i = node.first; i < node.first + node.count; ++i) {
          const int tri = order_[i];
          const auto& t = mesh_.triangles[tri];
          // nextafter keeps equal-t hits so ties resolve by index
          auto h = intersect_triangle(mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]], ray, t_min,
                                      std::nextafter(limit, std::numeric_limits<double>::infinity()));
          if (h && visit(tri, *h, limit)) return;
        }
      } else {
        const int left = node.first;
        const bool flip = ray.dir[0] < 0;
        stack[top++] = flip ? left : left + 1;
        stack[top++] = flip ? left + 1 : left;
      }
    }
  }

  Mesh mesh_;
  Aabb bounds_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Aabb> boxes_;
  std::vector<Vec3> centers_;
};

}  // namespace relit
