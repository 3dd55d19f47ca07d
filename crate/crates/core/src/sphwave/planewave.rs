//! Regular-wave expansion of a uniform plane wave.

use super::{j_pow, AngularTable, SphericalBasis};
use crate::vec3::CVec3;
use crate::{C64, Error, Result, Vec3};

/// Expansion coefficients `g` of the plane wave E0·e^{-jk k̂·r} under regular
/// vector spherical waves, so that E = k√η0 Σ_α g_α u_α^{(1)}(kr).
///
/// g_α = (4π/(k√η0))·[j^{-l}δ_{τ1} - j^{-(l+1)}δ_{τ2}]·A_{τα}(k̂)·E0.
/// The incoming-state vector is a = g/2.
pub fn plane_wave_coefficients(
    basis: &SphericalBasis,
    e0: CVec3,
    k_hat: Vec3,
) -> Result<Vec<C64>> {
    if (k_hat.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::argument("propagation direction must be a unit vector"));
    }
    let transversality = (e0.dot_real(k_hat)).norm();
    if transversality > 1e-9 * e0.norm().max(1e-300) {
        return Err(Error::argument(format!(
            "plane-wave amplitude must be transverse to k̂ (|E0·k̂| = {transversality:.3e})"
        )));
    }
    let (_, theta, phi) = k_hat.to_spherical();
    let ang = AngularTable::new(basis, theta, phi);
    let (_, that, phat) = super::spherical_frame(theta, phi);
    let scale = 4.0 * std::f64::consts::PI / (basis.k * crate::ETA0.sqrt());
    let mut g = Vec::with_capacity(basis.len());
    for mode in &basis.modes {
        let [at, ap] = if mode.tau == 1 { ang.a1[mode.alpha] } else { ang.a2[mode.alpha] };
        let a_dot_e0 = e0.dot_real(that) * at + e0.dot_real(phat) * ap;
        let phase = match mode.tau {
            1 => j_pow(-(mode.l as i64)),
            _ => -j_pow(-(mode.l as i64 + 1)),
        };
        g.push(phase * a_dot_e0 * scale);
    }
    Ok(g)
}
