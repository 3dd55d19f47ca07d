//! Analytic modal bases for rectangular and coaxial waveguide ports.
//!
//! Transverse mode fields are normalized to unit L² norm over the port
//! cross-section, so the modal orthogonality matrix is the identity. Wave
//! impedances and propagation constants follow the e^{+jωt} convention:
//! propagating modes have real β and η, evanescent ones β = −j·attenuation
//! and reactive η.

use crate::{C64, Error, Result, Vec3, ETA0, J};
use std::fmt;

/// Cross-section geometry of a port, dimensions in meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum WaveguideKind {
    /// `a` along the local u axis, `b` along v; requires a > b > 0.
    Rectangular { a: f64, b: f64 },
    /// Coaxial line, r_outer > r_inner > 0, axis through the frame origin.
    Coaxial { r_inner: f64, r_outer: f64 },
}

/// Lossless homogeneous fill.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Fill {
    pub eps_r: f64,
    pub mu_r: f64,
}

impl Default for Fill {
    fn default() -> Self {
        Fill { eps_r: 1.0, mu_r: 1.0 }
    }
}

/// Placement of the port plane in space. The normal points outward, into the
/// exterior region the antenna radiates into; (u, v, n̂) is right-handed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PortFrame {
    pub origin: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    pub normal: Vec3,
}

impl PortFrame {
    /// In-plane coordinates of a point.
    pub fn local(&self, r: Vec3) -> (f64, f64) {
        let d = r - self.origin;
        (d.dot(self.u_axis), d.dot(self.v_axis))
    }

    fn validate(&self) -> Result<()> {
        let ortho = self.u_axis.dot(self.v_axis).abs()
            + self.u_axis.dot(self.normal).abs()
            + self.v_axis.dot(self.normal).abs();
        let unit = (self.u_axis.norm() - 1.0).abs()
            + (self.v_axis.norm() - 1.0).abs()
            + (self.normal.norm() - 1.0).abs();
        if ortho > 1e-9 || unit > 1e-9 {
            return Err(Error::argument("port frame axes must be orthonormal"));
        }
        if (self.u_axis.cross(self.v_axis) - self.normal).norm() > 1e-9 {
            return Err(Error::argument("port frame must be right-handed (û × v̂ = n̂)"));
        }
        Ok(())
    }
}

/// Full description of one waveguide port.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WaveguideSpec {
    pub kind: WaveguideKind,
    pub fill: Fill,
    pub frame: PortFrame,
}

impl WaveguideSpec {
    pub fn new(kind: WaveguideKind, fill: Fill, frame: PortFrame) -> Result<WaveguideSpec> {
        match kind {
            WaveguideKind::Rectangular { a, b } => {
                if !(a > b && b > 0.0) {
                    return Err(Error::argument(format!(
                        "rectangular guide requires a > b > 0 (got a = {a}, b = {b})"
                    )));
                }
            }
            WaveguideKind::Coaxial { r_inner, r_outer } => {
                if !(r_outer > r_inner && r_inner > 0.0) {
                    return Err(Error::argument(format!(
                        "coaxial guide requires r_outer > r_inner > 0 \
                         (got r_inner = {r_inner}, r_outer = {r_outer})"
                    )));
                }
            }
        }
        if !(fill.eps_r > 0.0 && fill.mu_r > 0.0) {
            return Err(Error::argument("fill must have positive real εr and μr"));
        }
        frame.validate()?;
        Ok(WaveguideSpec { kind, fill, frame })
    }

    /// Cross-section area in m².
    pub fn area(&self) -> f64 {
        match self.kind {
            WaveguideKind::Rectangular { a, b } => a * b,
            WaveguideKind::Coaxial { r_inner, r_outer } => {
                std::f64::consts::PI * (r_outer * r_outer - r_inner * r_inner)
            }
        }
    }
}

/// Mode family and indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeLabel {
    Te(u32, u32),
    Tm(u32, u32),
    Tem,
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::Te(m, n) => write!(f, "TE{m}{n}"),
            ModeLabel::Tm(m, n) => write!(f, "TM{m}{n}"),
            ModeLabel::Tem => write!(f, "TEM"),
        }
    }
}

/// One normalized waveguide mode at a fixed free-space wavenumber.
#[derive(Debug, Clone, Copy)]
pub struct WaveguideMode {
    pub label: ModeLabel,
    /// Cutoff wavenumber, rad/m (0 for TEM).
    pub k_c: f64,
    /// Propagation constant: real (propagating) or −j·attenuation.
    pub beta: C64,
    /// Wave impedance, Ω.
    pub eta: C64,
    pub propagating: bool,
    /// L² normalization of the transverse profile (1 when the closed-form
    /// field expression is already normalized).
    pub norm: f64,
}

/// Modes of a port at wavenumber `k`, sorted by cutoff.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub modes: Vec<WaveguideMode>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn propagating_count(&self) -> usize {
        self.modes.iter().filter(|m| m.propagating).count()
    }
}

fn mode_at(spec: &WaveguideSpec, k: f64, label: ModeLabel, k_c: f64) -> WaveguideMode {
    let kg = k * (spec.fill.eps_r * spec.fill.mu_r).sqrt();
    let propagating = kg > k_c;
    let beta = if propagating {
        C64::from((kg * kg - k_c * k_c).sqrt())
    } else {
        -J * (k_c * k_c - kg * kg).sqrt()
    };
    let eta = match label {
        ModeLabel::Te(..) => k * ETA0 * spec.fill.mu_r / beta,
        ModeLabel::Tm(..) => beta * ETA0 / (k * spec.fill.eps_r),
        ModeLabel::Tem => C64::from(ETA0 * (spec.fill.mu_r / spec.fill.eps_r).sqrt()),
    };
    let norm = match (spec.kind, label) {
        (WaveguideKind::Coaxial { r_inner, r_outer }, ModeLabel::Te(..)) => {
            coax_norm(true, k_c, r_inner, r_outer)
        }
        (WaveguideKind::Coaxial { r_inner, r_outer }, ModeLabel::Tm(..)) => {
            coax_norm(false, k_c, r_inner, r_outer)
        }
        _ => 1.0,
    };
    WaveguideMode { label, k_c, beta, eta, propagating, norm }
}

/// Radial profile of an azimuthally symmetric coax mode (unnormalized):
/// `e_φ` for TE_0n, `e_ρ` for TM_0n. Both vanish-or-match the conductor
/// boundary conditions by construction.
fn coax_profile(te: bool, k_c: f64, r_inner: f64, rho: f64) -> f64 {
    use puruspe::{Jn, Yn};
    let x = k_c * rho;
    let xi = k_c * r_inner;
    if te {
        Jn(1, x) * Yn(1, xi) - Yn(1, x) * Jn(1, xi)
    } else {
        Jn(1, x) * Yn(0, xi) - Yn(1, x) * Jn(0, xi)
    }
}

/// Unit-L² scaling of the coax radial profile over the annulus.
fn coax_norm(te: bool, k_c: f64, r_inner: f64, r_outer: f64) -> f64 {
    let (xs, ws) = crate::special::gauss_legendre(64);
    let half = 0.5 * (r_outer - r_inner);
    let mut s = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        let rho = r_inner + half * (x + 1.0);
        let v = coax_profile(te, k_c, r_inner, rho);
        s += w * half * 2.0 * std::f64::consts::PI * rho * v * v;
    }
    1.0 / s.sqrt()
}

/// Cutoff wavenumbers of the first `count` azimuthally symmetric higher
/// coax modes of one family, from the cross-product dispersion relation.
fn coax_cutoffs(te: bool, r_inner: f64, r_outer: f64, count: usize) -> Vec<f64> {
    use puruspe::{Jn, Yn};
    let lambda = r_outer / r_inner;
    let f = |x: f64| {
        if te {
            Jn(1, x) * Yn(1, lambda * x) - Yn(1, x) * Jn(1, lambda * x)
        } else {
            Jn(0, x) * Yn(0, lambda * x) - Yn(0, x) * Jn(0, lambda * x)
        }
    };
    // roots approach nπ/(λ−1) asymptotically; scan well below that spacing
    let step = 0.05 * std::f64::consts::PI / (lambda - 1.0);
    let mut roots = Vec::with_capacity(count);
    let mut x0 = step;
    let mut f0 = f(x0);
    while roots.len() < count {
        let x1 = x0 + step;
        let f1 = f(x1);
        if f0.signum() != f1.signum() {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                let fm = f(mid);
                if fm.signum() == fa.signum() {
                    (a, fa) = (mid, fm);
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        (x0, f0) = (x1, f1);
    }
    roots.into_iter().map(|x| x / r_inner).collect()
}

/// Enumerate the `count` lowest modes of the port at wavenumber `k`.
///
/// Modes are sorted by cutoff ascending (ties: TE before TM, then index
/// order). `count` must cover at least every propagating mode.
pub fn enumerate_modes(spec: &WaveguideSpec, k: f64, count: usize) -> Result<ModeSet> {
    // enumerate one extra mode: if the first omitted mode propagates, the
    // truncation does not cover the propagating set
    let mut set = enumerate_raw(spec, k, count + 1)?;
    if set.modes[count].propagating {
        return Err(Error::Config(format!(
            "mode count {count} does not cover all propagating modes \
             (the first omitted mode still propagates)"
        )));
    }
    set.modes.truncate(count);
    Ok(set)
}

fn enumerate_raw(spec: &WaveguideSpec, k: f64, count: usize) -> Result<ModeSet> {
    if k <= 0.0 {
        return Err(Error::argument("wavenumber must be positive"));
    }
    if count == 0 {
        return Err(Error::Config("mode count must be at least 1".into()));
    }
    let modes = match spec.kind {
        WaveguideKind::Coaxial { r_inner, r_outer } => {
            // TEM plus the azimuthally symmetric higher modes; azimuthal
            // orders (m ≥ 1) are out of scope for the supported feeds
            let per_family = count;
            let te = coax_cutoffs(true, r_inner, r_outer, per_family);
            let tm = coax_cutoffs(false, r_inner, r_outer, per_family);
            let mut cands: Vec<(f64, u8, u32)> = vec![(0.0, 2, 0)];
            cands.extend(te.iter().enumerate().map(|(i, &kc)| (kc, 0u8, i as u32 + 1)));
            cands.extend(tm.iter().enumerate().map(|(i, &kc)| (kc, 1u8, i as u32 + 1)));
            cands.sort_by(|x, y| {
                x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2))
            });
            cands
                .into_iter()
                .take(count)
                .map(|(k_c, fam, n)| {
                    let label = match fam {
                        0 => ModeLabel::Te(0, n),
                        1 => ModeLabel::Tm(0, n),
                        _ => ModeLabel::Tem,
                    };
                    mode_at(spec, k, label, k_c)
                })
                .collect()
        }
        WaveguideKind::Rectangular { a, b } => {
            // candidate indices well beyond anything `count` can select
            let range = 2 * (count as u32) + 4;
            let mut cands: Vec<(f64, u8, u32, u32)> = Vec::new();
            for m in 0..=range {
                for n in 0..=range {
                    let k_c = std::f64::consts::PI
                        * ((m as f64 / a).powi(2) + (n as f64 / b).powi(2)).sqrt();
                    if m + n > 0 {
                        cands.push((k_c, 0, m, n)); // TE
                    }
                    if m > 0 && n > 0 {
                        cands.push((k_c, 1, m, n)); // TM
                    }
                }
            }
            cands.sort_by(|x, y| {
                x.0.partial_cmp(&y.0)
                    .unwrap()
                    .then(x.1.cmp(&y.1))
                    .then((x.2, x.3).cmp(&(y.2, y.3)))
            });
            cands
                .into_iter()
                .take(count)
                .map(|(k_c, fam, m, n)| {
                    let label =
                        if fam == 0 { ModeLabel::Te(m, n) } else { ModeLabel::Tm(m, n) };
                    mode_at(spec, k, label, k_c)
                })
                .collect()
        }
    };
    Ok(ModeSet { modes })
}

/// Default truncation: every mode with k_c ≤ 2k, and at least three
/// evanescent modes beyond the propagating set.
pub fn default_mode_count(spec: &WaveguideSpec, k: f64) -> Result<usize> {
    let mut count = 64;
    loop {
        let set = enumerate_raw(spec, k, count)?;
        let last = set.modes.last().expect("count ≥ 1");
        if !last.propagating && last.k_c > 2.0 * k {
            let prop = set.propagating_count();
            let below_2k = set.modes.iter().filter(|m| m.k_c <= 2.0 * k).count();
            return Ok(below_2k.max(prop + 3));
        }
        count *= 2;
        if count > 8192 {
            return Err(Error::Config(
                "default mode count exceeded 8192; check the port dimensions".into(),
            ));
        }
    }
}

/// Transverse mode field at in-plane coordinates (u, v), as a local
/// (u, v) 2-vector. Errors when the point lies outside the cross-section.
pub fn mode_field(spec: &WaveguideSpec, mode: &WaveguideMode, u: f64, v: f64) -> Result<[f64; 2]> {
    use std::f64::consts::PI;
    match (spec.kind, mode.label) {
        (WaveguideKind::Rectangular { a, b }, label) => {
            let tol = 1e-9 * a;
            if u < -tol || u > a + tol || v < -tol || v > b + tol {
                return Err(Error::argument(format!(
                    "point ({u:.4e}, {v:.4e}) outside the {a:.4e} × {b:.4e} cross-section"
                )));
            }
            match label {
                ModeLabel::Te(m, n) => {
                    let (mf, nf) = (m as f64, n as f64);
                    let k_c = PI * ((mf / a).powi(2) + (nf / b).powi(2)).sqrt();
                    let em = if m == 0 { 1.0 } else { 2.0 };
                    let en = if n == 0 { 1.0 } else { 2.0 };
                    let norm = (em * en / (a * b)).sqrt() / k_c;
                    let (su, cu) = (PI * mf * u / a).sin_cos();
                    let (sv, cv) = (PI * nf * v / b).sin_cos();
                    Ok([
                        norm * (PI * nf / b) * cu * sv,
                        -norm * (PI * mf / a) * su * cv,
                    ])
                }
                ModeLabel::Tm(m, n) => {
                    let (mf, nf) = (m as f64, n as f64);
                    let k_c = PI * ((mf / a).powi(2) + (nf / b).powi(2)).sqrt();
                    let norm = 2.0 / (k_c * (a * b).sqrt());
                    let (su, cu) = (PI * mf * u / a).sin_cos();
                    let (sv, cv) = (PI * nf * v / b).sin_cos();
                    Ok([
                        -norm * (PI * mf / a) * cu * sv,
                        -norm * (PI * nf / b) * su * cv,
                    ])
                }
                ModeLabel::Tem => Err(Error::argument(
                    "rectangular guides carry no TEM mode",
                )),
            }
        }
        (WaveguideKind::Coaxial { r_inner, r_outer }, label) => {
            let rho = (u * u + v * v).sqrt();
            // a faceted annulus dips below r_inner (chord sagitta), so the
            // bounds are generous; the field itself is analytic off the axis
            if rho < 0.5 * r_inner || rho > 1.5 * r_outer {
                return Err(Error::argument(format!(
                    "radius {rho:.4e} outside the coax annulus [{r_inner:.4e}, {r_outer:.4e}]"
                )));
            }
            match label {
                ModeLabel::Tem => {
                    let norm = 1.0 / (2.0 * PI * (r_outer / r_inner).ln()).sqrt();
                    Ok([norm * u / (rho * rho), norm * v / (rho * rho)])
                }
                ModeLabel::Te(0, n) if n >= 1 => {
                    // e ∝ φ̂ for the symmetric TE family
                    let val = mode.norm * coax_profile(true, mode.k_c, r_inner, rho);
                    Ok([-v / rho * val, u / rho * val])
                }
                ModeLabel::Tm(0, n) if n >= 1 => {
                    // e ∝ ρ̂ for the symmetric TM family
                    let val = mode.norm * coax_profile(false, mode.k_c, r_inner, rho);
                    Ok([u / rho * val, v / rho * val])
                }
                _ => Err(Error::argument(format!(
                    "coaxial ports carry TEM and azimuthally symmetric \
                     TE0n/TM0n modes only, not {label}"
                ))),
            }
        }
    }
}

/// Mode field at a global point on the port plane, as a global 3-vector.
pub fn mode_field_global(
    spec: &WaveguideSpec,
    mode: &WaveguideMode,
    r: Vec3,
) -> Result<Vec3> {
    let (u, v) = spec.frame.local(r);
    let [eu, ev] = mode_field(spec, mode, u, v)?;
    Ok(spec.frame.u_axis * eu + spec.frame.v_axis * ev)
}

/// Characteristic impedance of the coax TEM line (Ω).
pub fn coax_characteristic_impedance(spec: &WaveguideSpec) -> Result<f64> {
    match spec.kind {
        WaveguideKind::Coaxial { r_inner, r_outer } => {
            let eta = ETA0 * (spec.fill.mu_r / spec.fill.eps_r).sqrt();
            Ok(eta / (2.0 * std::f64::consts::PI) * (r_outer / r_inner).ln())
        }
        _ => Err(Error::argument("characteristic impedance applies to coaxial ports")),
    }
}
