#pragma once

// Thermo-piezoelectric constitutive laws: generalized stress, entropy density
// and electric displacement for the isotropic model.

#include "bfe/material.hpp"

namespace bfe::constitutive {

/// Local state: symmetric strain, temperature deviation, electric field E = -grad(phi).
struct StateAtPoint {
  CMat3 strain = CMat3::Zero();
  Complex theta{0.0};
  CVec3 e_field = CVec3::Zero();

  static StateAtPoint from_gradients(const CMat3& grad_u, Complex theta, const CVec3& grad_phi) {
    return {0.5 * (grad_u + grad_u.transpose()), theta, -grad_phi};
  }
};

inline CMat3 elastic_stress(const CMat3& strain, const MaterialParams& m) {
  return m.lame_lambda * strain.trace() * CMat3::Identity() + 2.0 * m.lame_mu * strain;
}

/// sigma = sigma_e(u) - zeta theta I - e^T E
inline CMat3 stress(const StateAtPoint& st, const MaterialParams& m) {
  return elastic_stress(st.strain, m) - m.zeta * st.theta * CMat3::Identity() -
         m.piezo_e.apply_transpose<Complex>(st.e_field);
}

/// P = zeta tr(strain) + (c_eps / T0) theta + p . E
inline Complex entropy_density(const StateAtPoint& st, const MaterialParams& m) {
  return m.zeta * st.strain.trace() + (m.c_eps / m.T0) * st.theta +
         m.pyro_p.cast<Complex>().dot(st.e_field);
}

/// D = e strain + theta p + eps E
inline CVec3 electric_displacement(const StateAtPoint& st, const MaterialParams& m) {
  return m.piezo_e.apply<Complex>(st.strain) + st.theta * m.pyro_p.cast<Complex>() +
         m.dielectric_eps * st.e_field;
}

}  // namespace bfe::constitutive
