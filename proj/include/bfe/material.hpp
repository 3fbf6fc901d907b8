#pragma once

#include "bfe/core.hpp"

#include <array>
#include <sstream>
#include <string>
#include <vector>

namespace bfe {

/// Piezoelectric tensor e_{kij} with e_{kij} = e_{kji}, stored in 3x6 Voigt
/// layout. Voigt index order is (11, 22, 33, 23, 13, 12).
///
/// Engineering-shear convention: a symmetric matrix M maps to the Voigt
/// vector m = (M11, M22, M33, 2 M23, 2 M13, 2 M12), so (e M)_k = sum_a E(k, a) m_a.
/// The transpose map builds the symmetric matrix (e^T d)_{ij} = sum_k e_{kij} d_k,
/// whose Voigt components (without the factor 2) are E^T d.
class PiezoTensor {
public:
  using Voigt = Eigen::Matrix<double, 3, 6>;

  PiezoTensor() : voigt_(Voigt::Zero()) {}
  explicit PiezoTensor(const Voigt& v) : voigt_(v) {}

  const Voigt& voigt() const noexcept { return voigt_; }

  static constexpr int voigt_index(int i, int j) noexcept {
    if (i == j) return i;
    const int s = i + j;  // (1,2)->3, (0,2)->4, (0,1)->5
    return s == 3 ? 3 : (s == 2 ? 4 : 5);
  }

  double operator()(int k, int i, int j) const noexcept { return voigt_(k, voigt_index(i, j)); }

  /// (e M)_k = sum_ij e_kij M_ij
  template <typename Scalar>
  Eigen::Matrix<Scalar, 3, 1> apply(const Eigen::Matrix<Scalar, 3, 3>& m) const {
    Eigen::Matrix<Scalar, 6, 1> mv;
    mv << m(0, 0), m(1, 1), m(2, 2), m(1, 2) + m(2, 1), m(0, 2) + m(2, 0), m(0, 1) + m(1, 0);
    return voigt_.cast<Scalar>() * mv;
  }

  /// (e^T d)_ij = sum_k e_kij d_k
  template <typename Scalar>
  Eigen::Matrix<Scalar, 3, 3> apply_transpose(const Eigen::Matrix<Scalar, 3, 1>& d) const {
    const Eigen::Matrix<Scalar, 6, 1> v = voigt_.transpose().cast<Scalar>() * d;
    Eigen::Matrix<Scalar, 3, 3> m;
    m << v(0), v(5), v(4),
         v(5), v(1), v(3),
         v(4), v(3), v(2);
    return m;
  }

  double max_entry() const { return voigt_.cwiseAbs().maxCoeff(); }
  bool all_positive() const { return (voigt_.array() > 0.0).all(); }

private:
  Voigt voigt_;
};

/// Physical constants of the thermo-piezoelectric solid and the fluid.
struct MaterialParams {
  double rho_e = 1.0;
  double lame_lambda = 1.0;
  double lame_mu = 1.0;
  PiezoTensor piezo_e{};
  double zeta = 1.0;
  double c_eps = 1.0;
  Vec3 pyro_p = Vec3::Zero();
  double dielectric_eps = 1.0;
  double T0 = 1.0;
  double rho_f = 1.0;
  double sound_c = 1.0;

  double pyro_norm() const { return pyro_p.norm(); }

  /// Largest admissible Euclidean norm of the pyroelectric vector (exclusive).
  double pyro_limit() const { return std::min(dielectric_eps, c_eps / T0); }

  /// Coercivity constants (c_eps/T0 - |p|)/c_eps and eps - |p|.
  double coercivity_c1() const { return (c_eps / T0 - pyro_norm()) / c_eps; }
  double coercivity_c2() const { return dielectric_eps - pyro_norm(); }

  /// Throws ConstraintError when a sign condition or the pyroelectric bound fails.
  /// Returns human readable warnings for soft conditions.
  std::vector<std::string> validate() const {
    auto fail = [](const std::string& m) { throw ConstraintError(m); };
    if (!(rho_e > 0)) fail("rho_e must be positive");
    if (!(lame_mu > 0)) fail("lame_mu must be positive");
    if (!(3 * lame_lambda + 2 * lame_mu > 0)) fail("bulk modulus 3*lambda + 2*mu must be positive");
    if (!(zeta > 0)) fail("zeta must be positive");
    if (!(c_eps > 0)) fail("c_eps must be positive");
    if (!(T0 > 0)) fail("T0 must be positive");
    if (!(dielectric_eps > 0)) fail("dielectric_eps must be positive");
    if (!(rho_f > 0)) fail("rho_f must be positive");
    if (!(sound_c > 0)) fail("sound_c must be positive");
    const double pn = pyro_norm();
    if (!(pn < pyro_limit())) {
      std::ostringstream os;
      os.precision(15);
      os << "pyroelectric constraint violated: |p| = " << pn << " must be < min(eps = " << dielectric_eps
         << ", c_eps/T0 = " << c_eps / T0 << ")";
      fail(os.str());
    }
    std::vector<std::string> warnings;
    if (!piezo_e.all_positive())
      warnings.emplace_back("piezoelectric tensor has non-positive entries; sign condition e_kij > 0 not met");
    return warnings;
  }
};

}  // namespace bfe
