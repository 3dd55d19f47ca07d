//! Real-valued vector spherical wavefunctions.
//!
//! Modes are indexed by (τ, σ, l, m): polarization τ ∈ {1 = TE, 2 = TM},
//! parity σ ∈ {even, odd} of the azimuthal harmonic, degree l ≥ 1 and order
//! 0 ≤ m ≤ l, with (odd, m = 0) excluded. The normalization is fixed so that
//! the free-space dyadic Green's function expands as
//! `G_e(r, r') = -jk Σ_α u_α^{(4)}(kr) u_α^{(1)}(kr')` for r > r', which is
//! the convention every downstream projection in this crate relies on.
//!
//! Radial dependence: regular waves use j_l, incoming waves h_l^{(1)} and
//! outgoing waves h_l^{(2)} (time convention e^{+jωt}).

mod planewave;
mod translation;

pub use planewave::plane_wave_coefficients;
pub use translation::{translation_operator, TranslationOperator};

use crate::special::{riccati_deriv_over_x, sph_h2n, sph_jn, LegendreTable};
use crate::vec3::CVec3;
use crate::{C64, Error, Result, Vec3};

/// Azimuthal parity of a real harmonic: even ↦ cos(mφ), odd ↦ sin(mφ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

/// Radial kind of a spherical wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveKind {
    /// j_l — finite everywhere.
    Regular,
    /// h_l^{(1)} — incoming under e^{+jωt}.
    Incoming,
    /// h_l^{(2)} — outgoing under e^{+jωt}.
    Outgoing,
}

/// One (τ, σ, l, m) mode together with its linear position α.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeIndex {
    /// 1 = TE, 2 = TM.
    pub tau: u8,
    pub sigma: Parity,
    pub l: usize,
    pub m: usize,
    /// Position in the basis ordering, 0..J-1.
    pub alpha: usize,
}

/// Ordered basis of vector spherical waves at a fixed wavenumber.
///
/// Ordering is lexicographic in (l, m, σ, τ) with σ: even before odd and τ
/// innermost, so the TE↔TM partner of a mode is always its direct neighbor.
#[derive(Debug, Clone)]
pub struct SphericalBasis {
    pub k: f64,
    pub l_max: usize,
    pub modes: Vec<ModeIndex>,
}

/// Truncation degree for an enclosing sphere of radius `r_min` at
/// wavenumber `k`: ⌈k·r_min + 7·(k·r_min)^{1/3} + 3⌉.
pub fn lmax_for_radius(k: f64, r_min: f64) -> Result<usize> {
    if k <= 0.0 || r_min <= 0.0 {
        return Err(Error::argument(format!(
            "lmax_for_radius requires k > 0 and r_min > 0 (got k = {k}, r_min = {r_min})"
        )));
    }
    let kr = k * r_min;
    // epsilon guard so values a hair above an integer do not bump the ceiling
    Ok((kr + 7.0 * kr.cbrt() + 3.0 - 1e-9).ceil() as usize)
}

impl SphericalBasis {
    pub fn new(k: f64, l_max: usize) -> Result<Self> {
        if k <= 0.0 {
            return Err(Error::argument("wavenumber must be positive"));
        }
        if l_max == 0 {
            return Err(Error::argument("l_max must be at least 1"));
        }
        let mut modes = Vec::with_capacity(2 * l_max * (l_max + 2));
        let mut alpha = 0;
        for l in 1..=l_max {
            for m in 0..=l {
                let parities: &[Parity] =
                    if m == 0 { &[Parity::Even] } else { &[Parity::Even, Parity::Odd] };
                for &sigma in parities {
                    for tau in [1u8, 2u8] {
                        modes.push(ModeIndex { tau, sigma, l, m, alpha });
                        alpha += 1;
                    }
                }
            }
        }
        debug_assert_eq!(modes.len(), 2 * l_max * (l_max + 2));
        Ok(SphericalBasis { k, l_max, modes })
    }

    /// Basis size J = 2·l_max·(l_max + 2).
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// α of the TE↔TM partner (τ̄ = 3 - τ); an involution on the basis.
    pub fn bar(&self, alpha: usize) -> usize {
        match self.modes[alpha].tau {
            1 => alpha + 1,
            _ => alpha - 1,
        }
    }
}

/// Tangential vector spherical harmonics of every mode at one direction.
///
/// Components are in the local (θ̂, φ̂) frame; `y` is the scalar harmonic
/// used by the radial part of TM waves. Entries are indexed by α but do not
/// depend on τ; the duplication keeps lookups branch-free.
pub struct AngularTable {
    /// A_1 = (π_lm d_σ, -τ_lm c_σ)/√(l(l+1)) in (θ̂, φ̂).
    pub a1: Vec<[f64; 2]>,
    /// A_2 = (τ_lm c_σ, π_lm d_σ)/√(l(l+1)) = r̂ × A_1.
    pub a2: Vec<[f64; 2]>,
    /// Real orthonormal scalar harmonic Y_{σlm}.
    pub y: Vec<f64>,
}

impl AngularTable {
    pub fn new(basis: &SphericalBasis, theta: f64, phi: f64) -> Self {
        let leg = LegendreTable::new(basis.l_max, theta);
        let mut cosm = Vec::with_capacity(basis.l_max + 1);
        let mut sinm = Vec::with_capacity(basis.l_max + 1);
        for m in 0..=basis.l_max {
            cosm.push((m as f64 * phi).cos());
            sinm.push((m as f64 * phi).sin());
        }
        let j = basis.len();
        let mut a1 = vec![[0.0; 2]; j];
        let mut a2 = vec![[0.0; 2]; j];
        let mut y = vec![0.0; j];
        for mode in &basis.modes {
            let (l, m) = (mode.l, mode.m);
            let i = leg.idx(l, m);
            let eps = if m == 0 { 1.0 } else { 2.0_f64 };
            let norm = eps.sqrt() / ((l * (l + 1)) as f64).sqrt();
            let (c, d) = match mode.sigma {
                Parity::Even => (cosm[m], -sinm[m]),
                Parity::Odd => (sinm[m], cosm[m]),
            };
            let tau_lm = leg.dp[i];
            let pi_lm = leg.pm[i];
            a1[mode.alpha] = [norm * pi_lm * d, -norm * tau_lm * c];
            a2[mode.alpha] = [norm * tau_lm * c, norm * pi_lm * d];
            y[mode.alpha] = eps.sqrt() * leg.p[i] * c;
        }
        AngularTable { a1, a2, y }
    }
}

/// Radial functions z_l and (ξ z_l)'/ξ for one kind at ξ = k·r.
pub struct RadialTable {
    pub z: Vec<C64>,
    pub dz: Vec<C64>,
    pub xi: f64,
}

impl RadialTable {
    pub fn new(l_max: usize, kind: WaveKind, xi: f64) -> Result<Self> {
        if xi <= 0.0 && kind != WaveKind::Regular {
            return Err(Error::argument(
                "singular wave kinds cannot be evaluated at the origin",
            ));
        }
        // nudge the origin for the regular kind; the ratios j_l/ξ and
        // (ξ j_l)'/ξ have finite limits reproduced to machine precision
        let xi = xi.max(1e-8);
        let z: Vec<C64> = match kind {
            WaveKind::Regular => sph_jn(l_max, xi).into_iter().map(C64::from).collect(),
            WaveKind::Outgoing => sph_h2n(l_max, xi),
            WaveKind::Incoming => sph_h2n(l_max, xi).into_iter().map(|h| h.conj()).collect(),
        };
        let dz = riccati_deriv_over_x(&z, xi);
        Ok(RadialTable { z, dz, xi })
    }
}

/// Local orthonormal spherical frame at a direction.
pub fn spherical_frame(theta: f64, phi: f64) -> (Vec3, Vec3, Vec3) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let rhat = Vec3::new(st * cp, st * sp, ct);
    let that = Vec3::new(ct * cp, ct * sp, -st);
    let phat = Vec3::new(-sp, cp, 0.0);
    (rhat, that, phat)
}

/// Evaluate every mode of the basis at one point (Cartesian components).
pub fn eval_all(basis: &SphericalBasis, kind: WaveKind, r: Vec3) -> Result<Vec<CVec3>> {
    let (rad, theta, phi) = r.to_spherical();
    let radial = RadialTable::new(basis.l_max, kind, basis.k * rad)?;
    let ang = AngularTable::new(basis, theta, phi);
    let (rhat, that, phat) = spherical_frame(theta, phi);
    let mut out = Vec::with_capacity(basis.len());
    for mode in &basis.modes {
        out.push(eval_mode(mode, &radial, &ang, rhat, that, phat));
    }
    Ok(out)
}

#[inline]
pub(crate) fn eval_mode(
    mode: &ModeIndex,
    radial: &RadialTable,
    ang: &AngularTable,
    rhat: Vec3,
    that: Vec3,
    phat: Vec3,
) -> CVec3 {
    let l = mode.l;
    let a = mode.alpha;
    if mode.tau == 1 {
        let z = radial.z[l];
        let [at, ap] = ang.a1[a];
        CVec3::from_real(that * at + phat * ap).scale(z)
    } else {
        let dz = radial.dz[l];
        let zr = radial.z[l] / radial.xi * ((l * (l + 1)) as f64).sqrt();
        let [at, ap] = ang.a2[a];
        CVec3::from_real(that * at + phat * ap).scale(dz)
            + CVec3::from_real(rhat * ang.y[a]).scale(zr)
    }
}

/// Evaluate u_α^{(p)}(k·r) for a single mode.
pub fn eval_wave(basis: &SphericalBasis, alpha: usize, kind: WaveKind, r: Vec3) -> Result<CVec3> {
    if alpha >= basis.len() {
        return Err(Error::argument(format!(
            "mode index {alpha} out of range (J = {})",
            basis.len()
        )));
    }
    if r.norm() == 0.0 && kind != WaveKind::Regular {
        return Err(Error::argument(
            "singular wave kinds cannot be evaluated at the origin",
        ));
    }
    let (rad, theta, phi) = r.to_spherical();
    let radial = RadialTable::new(basis.l_max, kind, basis.k * rad)?;
    let ang = AngularTable::new(basis, theta, phi);
    let (rhat, that, phat) = spherical_frame(theta, phi);
    Ok(eval_mode(&basis.modes[alpha], &radial, &ang, rhat, that, phat))
}

/// u_{ᾱ}^{(p)}(k·r), the TE↔TM partner, numerically equal to (1/k)∇×u_α^{(p)}.
pub fn eval_curl_partner(
    basis: &SphericalBasis,
    alpha: usize,
    kind: WaveKind,
    r: Vec3,
) -> Result<CVec3> {
    if alpha >= basis.len() {
        return Err(Error::argument(format!(
            "mode index {alpha} out of range (J = {})",
            basis.len()
        )));
    }
    eval_wave(basis, basis.bar(alpha), kind, r)
}

/// Far-field pattern of an outgoing-wave expansion.
///
/// Returns the radiated field with the e^{-jkr}/r factor stripped, i.e.
/// `E(r) ≈ F(θ,φ)·e^{-jkr}/r` with components (E_θ, E_φ) in V (pattern units).
pub struct FarField<'a> {
    basis: &'a SphericalBasis,
    h: Vec<C64>,
}

/// Build the far-field evaluator for outgoing coefficients `h`.
pub fn farfield_from_outgoing<'a>(basis: &'a SphericalBasis, h: &[C64]) -> Result<FarField<'a>> {
    if h.len() != basis.len() {
        return Err(Error::argument(format!(
            "coefficient vector length {} does not match J = {}",
            h.len(),
            basis.len()
        )));
    }
    Ok(FarField { basis, h: h.to_vec() })
}

impl FarField<'_> {
    /// (E_θ, E_φ) of the pattern at a direction.
    ///
    /// Uses the large-argument limit h_l^{(2)}(ξ) → j^{l+1} e^{-jξ}/ξ, so a
    /// τ = 1 mode contributes √η0·j^{l+1}·A_1 and a τ = 2 mode √η0·j^l·A_2.
    pub fn eval(&self, theta: f64, phi: f64) -> (C64, C64) {
        let ang = AngularTable::new(self.basis, theta, phi);
        let eta0_sqrt = crate::ETA0.sqrt();
        let mut e_theta = C64::default();
        let mut e_phi = C64::default();
        for mode in &self.basis.modes {
            let c = self.h[mode.alpha];
            if c == C64::default() {
                continue;
            }
            let jpow = match (mode.tau, mode.l % 4) {
                (1, r) => J_POW[(r + 1) % 4],
                (_, r) => J_POW[r],
            };
            let [at, ap] = if mode.tau == 1 { ang.a1[mode.alpha] } else { ang.a2[mode.alpha] };
            let w = c * jpow * eta0_sqrt;
            e_theta += w * at;
            e_phi += w * ap;
        }
        (e_theta, e_phi)
    }

    /// Total radiated power of the expansion, (1/2η0)∮|F|² dΩ = Σ|h_α|²/2.
    pub fn radiated_power(&self) -> f64 {
        0.5 * self.h.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Gain (dimensionless) relative to the radiated power.
    pub fn gain(&self, theta: f64, phi: f64) -> f64 {
        let (et, ep) = self.eval(theta, phi);
        let u = (et.norm_sqr() + ep.norm_sqr()) / (2.0 * crate::ETA0);
        4.0 * std::f64::consts::PI * u / self.radiated_power()
    }
}

const J_POW: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 1.0),
    C64::new(-1.0, 0.0),
    C64::new(0.0, -1.0),
];

/// j^n for signed n.
pub(crate) fn j_pow(n: i64) -> C64 {
    J_POW[n.rem_euclid(4) as usize]
}
