#pragma once

// Reduced principled BRDF: albedo, roughness and metallic; every other parameter of
// the principled model stays at its default (specular 0.5, i.e. dielectric F0 = 0.04).
//
//   f = (1 - m) a (1 - E(mu_o)) / pi + D G F / (4 <n,wi> <n,wo>)
//
// with alpha = roughness^2, GGX D, height-correlated Smith G, Schlick F with
// F0 = 0.04 (1 - m) + a m. E(mu_o) is the directional albedo of the specular lobe,
// tabulated once; weighting the diffuse lobe by (1 - E) keeps the white-furnace
// reflectance at or below one.

#include <relit/math.hpp>

#include <array>
#include <memory>
#include <vector>

namespace relit {

inline constexpr double kMinRoughness = 0.03;
inline constexpr double kDielectricF0 = 0.04;

enum class BrdfModel { kPrincipled, kLambertian };

struct MaterialSample {
  Rgb albedo = Rgb::Constant(0.5);
  double roughness = 0.7;
  double metallic = 0.0;
};

/// Value and partial derivatives; albedo derivatives are per channel (the Jacobian is diagonal).
struct BrdfEval {
  Rgb value = Rgb::Zero();
  Rgb d_albedo = Rgb::Zero();
  Rgb d_roughness = Rgb::Zero();
  Rgb d_metallic = Rgb::Zero();
};

namespace detail {

struct GgxTerms {
  double d, g, dlog_d, dlog_g;  // derivatives w.r.t. alpha
};

inline double smith_lambda(double mu, double alpha) {
  const double tan2 = std::max(0.0, 1.0 - mu * mu) / (mu * mu);
  return 0.5 * (-1.0 + std::sqrt(1.0 + alpha * alpha * tan2));
}

inline double smith_lambda_dalpha(double mu, double alpha) {
  const double tan2 = std::max(0.0, 1.0 - mu * mu) / (mu * mu);
  return alpha * tan2 / (2.0 * std::sqrt(1.0 + alpha * alpha * tan2));
}

inline double ggx_d(double mu_h, double alpha) {
  const double a2 = alpha * alpha;
  const double denom = mu_h * mu_h * (a2 - 1.0) + 1.0;
  return a2 / (kPi * denom * denom);
}

inline GgxTerms ggx_terms(double mu_h, double mu_i, double mu_o, double alpha) {
  const double a2 = alpha * alpha;
  const double c2 = mu_h * mu_h;
  const double denom = c2 * (a2 - 1.0) + 1.0;
  GgxTerms t;
  t.d = a2 / (kPi * denom * denom);
  t.dlog_d = 2.0 / alpha - 4.0 * alpha * c2 / denom;
  const double li = smith_lambda(mu_i, alpha), lo = smith_lambda(mu_o, alpha);
  t.g = 1.0 / (1.0 + li + lo);
  t.dlog_g = -(smith_lambda_dalpha(mu_i, alpha) + smith_lambda_dalpha(mu_o, alpha)) * t.g;
  return t;
}

/// Specular directional albedo E = F0 * A(mu_o, r) + B(mu_o, r), bilinear in (mu_o, r).
class SpecularAlbedoTable {
 public:
  static constexpr int kMu = 64;
  static constexpr int kRough = 32;
  static constexpr int kQuad = 64;

  SpecularAlbedoTable() : a_(kMu * kRough), b_(kMu * kRough) {
    for (int j = 0; j < kRough; ++j)
      for (int i = 0; i < kMu; ++i) integrate(mu_node(i), rough_node(j), a_[j * kMu + i], b_[j * kMu + i]);
  }

  static const SpecularAlbedoTable& instance() {
    static const SpecularAlbedoTable table;
    return table;
  }

  static double mu_node(int i) { return std::max(static_cast<double>(i) / (kMu - 1), 1e-3); }
  static double rough_node(int j) { return kMinRoughness + (1.0 - kMinRoughness) * j / (kRough - 1); }

  /// Returns {A, B, dA/dr, dB/dr}.
  std::array<double, 4> lookup(double mu, double r) const {
    const double fi = std::clamp(mu, 0.0, 1.0) * (kMu - 1);
    const double fj = std::clamp((r - kMinRoughness) / (1.0 - kMinRoughness), 0.0, 1.0) * (kRough - 1);
    const int i0 = std::min(static_cast<int>(fi), kMu - 2);
    const int j0 = std::min(static_cast<int>(fj), kRough - 2);
    const double ti = fi - i0, tj = fj - j0;
    const double dr = (kRough - 1) / (1.0 - kMinRoughness);
    auto interp = [&](const std::vector<double>& t) {
      const double v00 = t[j0 * kMu + i0], v10 = t[j0 * kMu + i0 + 1];
      const double v01 = t[(j0 + 1) * kMu + i0], v11 = t[(j0 + 1) * kMu + i0 + 1];
      const double lo = v00 + ti * (v10 - v00), hi = v01 + ti * (v11 - v01);
      return std::pair{lo + tj * (hi - lo), (hi - lo) * dr};
    };
    const auto [a, da] = interp(a_);
    const auto [b, db] = interp(b_);
    return {a, b, da, db};
  }

 private:
  // GGX-distributed half vectors on a stratified grid.
  static void integrate(double mu_o, double r, double& a_out, double& b_out) {
    const double alpha = r * r;
    const Vec3 wo(std::sqrt(std::max(0.0, 1.0 - mu_o * mu_o)), 0.0, mu_o);
    double a = 0, b = 0;
    for (int p = 0; p < kQuad; ++p) {
      for (int q = 0; q < kQuad; ++q) {
        const double u1 = (p + 0.5) / kQuad, u2 = (q + 0.5) / kQuad;
        const double cos2 = (1.0 - u1) / (1.0 + (alpha * alpha - 1.0) * u1);
        const double ch = std::sqrt(cos2), sh = std::sqrt(std::max(0.0, 1.0 - cos2));
        const double phi = 2.0 * kPi * u2;
        const Vec3 h(sh * std::cos(phi), sh * std::sin(phi), ch);
        const double oh = wo.dot(h);
        if (oh <= 0) continue;
        const Vec3 wi = 2.0 * oh * h - wo;
        if (wi.z() <= 0) continue;
        const double g = 1.0 / (1.0 + smith_lambda(wi.z(), alpha) + smith_lambda(mu_o, alpha));
        const double w = std::pow(1.0 - oh, 5.0);
        const double common = g * oh / (mu_o * ch);
        a += common * (1.0 - w);
        b += common * w;
      }
    }
    a_out = a / (kQuad * kQuad);
    b_out = b / (kQuad * kQuad);
  }

  std::vector<double> a_, b_;
};

}  // namespace detail

/// BRDF value (per steradian) and derivatives; zero outside the upper hemisphere.
inline BrdfEval eval_brdf(const MaterialSample& mat, const Vec3& wi, const Vec3& wo, const Vec3& n,
                          BrdfModel model = BrdfModel::kPrincipled) {
  BrdfEval out;
  const double mu_i = n.dot(wi), mu_o = n.dot(wo);
  if (mu_i <= 0 || mu_o <= 0) return out;
  if (model == BrdfModel::kLambertian) {
    out.value = mat.albedo * kInvPi;
    out.d_albedo = Rgb::Constant(kInvPi);
    return out;
  }

  const double r = std::clamp(mat.roughness, kMinRoughness, 1.0);
  const double m = mat.metallic;
  const Rgb& a = mat.albedo;
  const double alpha = r * r;
  const Vec3 h = (wi + wo).normalized();
  const double mu_h = std::max(0.0, n.dot(h));
  const double oh = std::max(0.0, h.dot(wo));
  const double w = std::pow(1.0 - oh, 5.0);

  const auto ggx = detail::ggx_terms(mu_h, mu_i, mu_o, alpha);
  const double s = ggx.d * ggx.g / (4.0 * mu_i * mu_o);
  const double ds_dr = s * (ggx.dlog_d + ggx.dlog_g) * 2.0 * r;

  const auto tab = detail::SpecularAlbedoTable::instance().lookup(mu_o, r);
  const Rgb f0 = kDielectricF0 * (1.0 - m) + a * m;
  const Rgb fresnel = f0 + (1.0 - f0) * w;
  const Rgb e = f0 * tab[0] + tab[1];
  const Rgb de_dr = f0 * tab[2] + tab[3];

  out.value = (1.0 - m) * a * (1.0 - e) * kInvPi + s * fresnel;
  out.d_albedo = (1.0 - m) * (1.0 - e) * kInvPi - (1.0 - m) * a * tab[0] * m * kInvPi + s * (1.0 - w) * m;
  const Rgb df0_dm = a - kDielectricF0;
  out.d_metallic = -a * (1.0 - e) * kInvPi - (1.0 - m) * a * tab[0] * df0_dm * kInvPi + s * (1.0 - w) * df0_dm;
  out.d_roughness = -(1.0 - m) * a * de_dr * kInvPi + ds_dr * fresnel;
  if (mat.roughness < kMinRoughness || mat.roughness > 1.0) out.d_roughness = Rgb::Zero();
  return out;
}

/// Diffuse part of the BRDF alone.
inline Rgb diffuse_brdf(const MaterialSample& mat, const Vec3& wo, const Vec3& n,
                        BrdfModel model = BrdfModel::kPrincipled) {
  if (model == BrdfModel::kLambertian) return mat.albedo * kInvPi;
  const double r = std::clamp(mat.roughness, kMinRoughness, 1.0);
  const auto tab = detail::SpecularAlbedoTable::instance().lookup(n.dot(wo), r);
  const Rgb f0 = kDielectricF0 * (1.0 - mat.metallic) + mat.albedo * mat.metallic;
  return (1.0 - mat.metallic) * mat.albedo * (1.0 - (f0 * tab[0] + tab[1])) * kInvPi;
}

}  // namespace relit
