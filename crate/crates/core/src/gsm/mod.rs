//! Generalized scattering matrix assembly, post-processing and compression.
//!
//! The GSM stacks four blocks over the port-mode and spherical-wave state
//! spaces,
//!
//! ```text
//!        ┌           ┐
//!   S̃ =  │  Γ    R   │   Γ: port reflection      R: receive
//!        │  T    S   │   T: transmit              S: spherical scattering
//!        └           ┘
//! ```
//!
//! assembled from a factorized impedance system as `S̃ = −2·P̃·Z⁻¹·P̃ᵗ + 1̃`,
//! where `P̃` stacks the port-mode and spherical projections and `1̃` carries
//! `−1` on port rows for the magnetic formulation and `+1` everywhere for the
//! electric one. Only propagating port modes are kept in the stored blocks.
//!
//! Compression decomposes the shifted matrix `T̃ = (S̃ − 1)/2`: an eigenvalue
//! decomposition when `S̃` is unitary to tolerance (lossless), otherwise an
//! SVD, retaining modes above a relative modulus threshold `ι`.

pub mod io;

#[cfg(test)]
mod tests;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mom::{Formulation, ImpedanceSystem, PortCoupling, PortModeRef, ProjectionOperators};
use crate::sphwave::{farfield_from_outgoing, plane_wave_coefficients, FarField, SphericalBasis};
use crate::vec3::CVec3;
use crate::{Error, Result, Vec3, C0, C64, J};

/// Default compression threshold.
pub const DEFAULT_IOTA: f64 = 1.53e-5;

/// Unitarity defect above which eigen compression falls back to the SVD.
pub const LOSSY_DEFECT: f64 = 1e-3;

/// The four-block generalized scattering matrix of one antenna at one
/// frequency. Port rows/columns run over the retained *propagating* guide
/// modes; spherical rows/columns over the full basis of `spherical`.
#[derive(Debug, Clone)]
pub struct Gsm {
    /// Free-space wavenumber, rad/m.
    pub k: f64,
    /// Frequency in Hz (`k·c₀/2π`).
    pub frequency: f64,
    /// Formulation the GSM was assembled from (metadata only; both agree).
    pub formulation: Formulation,
    /// Labels of the propagating port modes, in row order.
    pub port_modes: Vec<PortModeRef>,
    pub spherical: SphericalBasis,
    /// Port reflection, `M_p × M_p`.
    pub gamma: Mat<C64>,
    /// Receive block, `M_p × J`.
    pub r: Mat<C64>,
    /// Transmit block, `J × M_p`.
    pub t: Mat<C64>,
    /// Spherical scattering block, `J × J`.
    pub s: Mat<C64>,
}

impl Gsm {
    /// Number of retained propagating port modes `M_p`.
    pub fn n_port_modes(&self) -> usize {
        self.port_modes.len()
    }

    /// Total state dimension `M_p + J`.
    pub fn dim(&self) -> usize {
        self.port_modes.len() + self.spherical.len()
    }

    /// Human-readable port mode labels, row order (`port:mode`).
    pub fn mode_labels(&self) -> Vec<String> {
        self.port_modes.iter().map(|m| format!("{}:{}", m.port, m.mode.label)).collect()
    }

    /// The stacked `(M_p+J) × (M_p+J)` matrix `[[Γ, R], [T, S]]`.
    pub fn stacked(&self) -> Mat<C64> {
        let m = self.n_port_modes();
        let dim = self.dim();
        Mat::from_fn(dim, dim, |i, j| match (i < m, j < m) {
            (true, true) => self.gamma[(i, j)],
            (true, false) => self.r[(i, j - m)],
            (false, true) => self.t[(i - m, j)],
            (false, false) => self.s[(i - m, j - m)],
        })
    }

    /// `‖S̃ᴴS̃ − 1‖_F / √dim`; zero for a lossless structure in the continuum.
    pub fn unitarity_defect(&self) -> f64 {
        let st = self.stacked();
        let g = st.adjoint() * &st;
        let dim = self.dim();
        let mut acc = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let d = g[(i, j)] - if i == j { C64::ONE } else { C64::ZERO };
                acc += d.norm_sqr();
            }
        }
        (acc / dim as f64).sqrt()
    }

    /// `max|R − Tᵗ|` scaled by `max|T|` (transmit/receive reciprocity).
    pub fn reciprocity_defect(&self) -> f64 {
        let m = self.n_port_modes();
        let jdim = self.spherical.len();
        let mut num = 0.0f64;
        let mut scale = 0.0f64;
        for a in 0..jdim {
            for p in 0..m {
                num = num.max((self.r[(p, a)] - self.t[(a, p)]).norm());
                scale = scale.max(self.t[(a, p)].norm());
            }
        }
        if scale > 0.0 {
            num / scale
        } else {
            num
        }
    }

    /// `max|B − Bᵗ|/max|B|` over the diagonal blocks `Γ` and `S`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for b in [&self.gamma, &self.s] {
            let n = b.nrows();
            let mut num = 0.0f64;
            let mut scale = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    num = num.max((b[(i, j)] - b[(j, i)]).norm());
                    scale = scale.max(b[(i, j)].norm());
                }
            }
            if scale > 0.0 {
                worst = worst.max(num / scale);
            }
        }
        worst
    }
}

/// Stack the port and spherical projection rows into the combined operator
/// `P̃`: port rows act on the block the formulation couples to, then spherical
/// rows `[P^e, −P^m]` act on the unknown layout `[I^e; jI^m]`.
fn stack_projections(
    sys: &ImpedanceSystem,
    coupling: &PortCoupling,
    proj: &ProjectionOperators,
) -> Result<Mat<C64>> {
    let (n_e, n_m) = (sys.n_e, sys.n_m);
    if coupling.q_e.ncols() != n_e
        || coupling.q_m.ncols() != n_m
        || proj.p_e.ncols() != n_e
        || proj.p_m.ncols() != n_m
    {
        return Err(Error::argument(
            "port coupling / projection dimensions do not match the system",
        ));
    }
    let m_all = coupling.n_modes();
    let jdim = proj.basis.len();
    let mut p_tilde = Mat::<C64>::zeros(m_all + jdim, sys.dim());
    match sys.formulation {
        Formulation::Magnetic => {
            for a in 0..m_all {
                for c in 0..n_m {
                    p_tilde[(a, n_e + c)] = coupling.q_m[(a, c)];
                }
            }
        }
        Formulation::Electric => {
            for a in 0..m_all {
                for c in 0..n_e {
                    p_tilde[(a, c)] = coupling.q_e[(a, c)];
                }
            }
        }
    }
    for alpha in 0..jdim {
        for c in 0..n_e {
            p_tilde[(m_all + alpha, c)] = proj.p_e[(alpha, c)];
        }
        for c in 0..n_m {
            p_tilde[(m_all + alpha, n_e + c)] = -proj.p_m[(alpha, c)];
        }
    }
    Ok(p_tilde)
}

/// Assemble the GSM from a factorized impedance system and the matching port
/// coupling and spherical projections: `S̃ = −2·P̃·Z⁻¹·P̃ᵗ + 1̃`, then drop
/// evanescent port rows/columns.
pub fn gsm_from_system(
    sys: &ImpedanceSystem,
    coupling: &PortCoupling,
    proj: &ProjectionOperators,
) -> Result<Gsm> {
    let m_all = coupling.n_modes();
    let jdim = proj.basis.len();
    let dim_state = m_all + jdim;
    let p_tilde = stack_projections(sys, coupling, proj)?;

    let x = sys.solve_mat(&p_tilde.transpose().to_owned())?;
    let mut s_full = &p_tilde * &x;
    let port_sign = match sys.formulation {
        Formulation::Magnetic => -1.0,
        Formulation::Electric => 1.0,
    };
    for i in 0..dim_state {
        for jx in 0..dim_state {
            s_full[(i, jx)] = -2.0 * s_full[(i, jx)];
        }
        s_full[(i, i)] += if i < m_all { port_sign } else { 1.0 };
    }

    // Keep propagating port modes only.
    let keep: Vec<usize> =
        (0..m_all).filter(|&a| coupling.modes[a].mode.propagating).collect();
    let m_p = keep.len();
    let gamma = Mat::from_fn(m_p, m_p, |i, jx| s_full[(keep[i], keep[jx])]);
    let r = Mat::from_fn(m_p, jdim, |i, jx| s_full[(keep[i], m_all + jx)]);
    let t = Mat::from_fn(jdim, m_p, |i, jx| s_full[(m_all + i, keep[jx])]);
    let s = Mat::from_fn(jdim, jdim, |i, jx| s_full[(m_all + i, m_all + jx)]);

    let k = sys.k;
    Ok(Gsm {
        k,
        frequency: k * C0 / (2.0 * std::f64::consts::PI),
        formulation: sys.formulation,
        port_modes: keep.into_iter().map(|a| coupling.modes[a].clone()).collect(),
        spherical: proj.basis.clone(),
        gamma,
        r,
        t,
        s,
    })
}

/// The port S-parameter block `Γ` with its mode labels.
pub fn sparams(gsm: &Gsm) -> (Vec<String>, Mat<C64>) {
    (gsm.mode_labels(), gsm.gamma.clone())
}

/// Far-field pattern radiated when the ports are driven with incident mode
/// amplitudes `v`: outgoing spherical coefficients `b = T·v`.
pub fn gain_pattern<'a>(gsm: &'a Gsm, v: &[C64]) -> Result<FarField<'a>> {
    let m = gsm.n_port_modes();
    if v.len() != m {
        return Err(Error::argument(format!(
            "drive vector length {} does not match port mode count {m}",
            v.len()
        )));
    }
    let jdim = gsm.spherical.len();
    let mut b = vec![C64::ZERO; jdim];
    for (alpha, b_a) in b.iter_mut().enumerate() {
        for p in 0..m {
            *b_a += gsm.t[(alpha, p)] * v[p];
        }
    }
    farfield_from_outgoing(&gsm.spherical, &b)
}

/// Bistatic radar cross-section of the structure under a unit-amplitude plane
/// wave from direction `k_hat` with (complex) polarization `e0 ⊥ k̂`.
pub struct BistaticRcs<'a> {
    far: FarField<'a>,
    e0_sq: f64,
}

impl BistaticRcs<'_> {
    /// `σ(θ, φ) = 4π·|F(θ,φ)|²/|E₀|²` in m².
    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        let (et, ep) = self.far.eval(theta, phi);
        4.0 * std::f64::consts::PI * (et.norm_sqr() + ep.norm_sqr()) / self.e0_sq
    }
}

/// Scattered-field spherical coefficients and RCS evaluator for a plane wave:
/// `a` from the plane-wave expansion, `h = (S − 1)·a`.
pub fn rcs_bistatic<'a>(gsm: &'a Gsm, e0: CVec3, k_hat: Vec3) -> Result<BistaticRcs<'a>> {
    let g = plane_wave_coefficients(&gsm.spherical, e0, k_hat)?;
    let a: Vec<C64> = g.iter().map(|&c| 0.5 * c).collect();
    let jdim = gsm.spherical.len();
    let mut h = vec![C64::ZERO; jdim];
    for (i, h_i) in h.iter_mut().enumerate() {
        let mut acc = C64::ZERO;
        for (jx, &a_j) in a.iter().enumerate() {
            acc += gsm.s[(i, jx)] * a_j;
        }
        *h_i = acc - a[i];
    }
    let e0_sq = e0.norm() * e0.norm();
    Ok(BistaticRcs { far: farfield_from_outgoing(&gsm.spherical, &h)?, e0_sq })
}

/// Which decomposition a compressed GSM stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// Eigen-decomposition of `T̃` (lossless / unitary `S̃`); one orthonormal
    /// vector family, complex values `t_n`.
    Eigen,
    /// SVD of `T̃`; separate left/right families, real values `σ_n`.
    Singular,
}

/// Spectrally compressed GSM: `T̃ ≈ F̃·diag(values)·G̃ᴴ` with `G̃ = F̃` for the
/// eigen kind, so `S̃ ≈ 2·F̃·diag(values)·G̃ᴴ + 1`.
#[derive(Debug, Clone)]
pub struct CompressedGsm {
    pub kind: SpectrumKind,
    /// Retained spectrum, sorted by descending modulus (`t_n` or `σ_n`).
    pub values: Vec<C64>,
    /// Left vectors `F̃`, `(M_p+J) × N`, orthonormal columns.
    pub left: Mat<C64>,
    /// Right vectors for the singular kind (`None` ⇒ reuse `left`).
    pub right: Option<Mat<C64>>,
    /// Threshold the retention was decided with.
    pub iota: f64,
    /// Parent state dimension `M_p + J`.
    pub dim: usize,
    /// Parent port-mode count `M_p`.
    pub m_p: usize,
    /// Parent wavenumber, rad/m.
    pub k: f64,
    /// Parent frequency, Hz.
    pub frequency: f64,
    /// Parent spherical truncation degree.
    pub l_max: usize,
    /// Parent port mode labels, row order.
    pub port_modes: Vec<PortModeRef>,
}

impl CompressedGsm {
    /// Retained mode count `N`.
    pub fn retained(&self) -> usize {
        self.values.len()
    }

    /// `T̃′·f` via the factored form.
    pub fn apply_shifted(&self, f: &[C64]) -> Result<Vec<C64>> {
        if f.len() != self.dim {
            return Err(Error::argument(format!(
                "state vector length {} does not match dimension {}",
                f.len(),
                self.dim
            )));
        }
        let right = self.right.as_ref().unwrap_or(&self.left);
        let n = self.retained();
        let mut inner = vec![C64::ZERO; n];
        for (c, y) in inner.iter_mut().enumerate() {
            let mut acc = C64::ZERO;
            for (i, &f_i) in f.iter().enumerate() {
                acc += right[(i, c)].conj() * f_i;
            }
            *y = self.values[c] * acc;
        }
        let mut out = vec![C64::ZERO; self.dim];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = C64::ZERO;
            for (c, &y) in inner.iter().enumerate() {
                acc += self.left[(i, c)] * y;
            }
            *o = acc;
        }
        Ok(out)
    }

    /// `S̃′·f = 2·T̃′·f + f`.
    pub fn apply(&self, f: &[C64]) -> Result<Vec<C64>> {
        let mut out = self.apply_shifted(f)?;
        for (o, &f_i) in out.iter_mut().zip(f) {
            *o = 2.0 * *o + f_i;
        }
        Ok(out)
    }

    /// Stored scalar count of the factored form (values + vectors).
    pub fn stored_elements(&self) -> usize {
        let fam = if self.right.is_some() { 2 } else { 1 };
        self.retained() * (fam * self.dim + 1)
    }

    /// Fraction of the dense `(M_p+J)²` storage saved by the factored form.
    pub fn memory_saving(&self) -> f64 {
        1.0 - self.stored_elements() as f64 / (self.dim * self.dim) as f64
    }
}

/// Compress a GSM by decomposing `T̃ = (S̃ − 1)/2`, retaining modes with
/// `|t_n| > ι·|t_1|` (always at least one).
///
/// `kind = Eigen` falls back to the SVD automatically when the unitarity
/// defect exceeds [`LOSSY_DEFECT`] (lossy ⇒ `T̃` not reliably normal) or the
/// eigensolver fails.
pub fn compress(gsm: &Gsm, iota: f64, kind: SpectrumKind) -> Result<CompressedGsm> {
    if !(iota > 0.0 && iota <= 1.0) {
        return Err(Error::argument(format!("threshold ι must lie in (0, 1] (got {iota})")));
    }
    let dim = gsm.dim();
    let mut t_shift = gsm.stacked();
    for i in 0..dim {
        for jx in 0..dim {
            t_shift[(i, jx)] *= 0.5;
        }
        t_shift[(i, i)] -= 0.5;
    }

    let kind = match kind {
        SpectrumKind::Eigen if gsm.unitarity_defect() > LOSSY_DEFECT => SpectrumKind::Singular,
        k => k,
    };

    if kind == SpectrumKind::Eigen {
        if let Ok(eig) = t_shift.eigen() {
            let u = eig.U();
            let s = eig.S();
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&a, &b| {
                s[b].norm()
                    .partial_cmp(&s[a].norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(
                        s[a].arg()
                            .partial_cmp(&s[b].arg())
                            .unwrap_or(std::cmp::Ordering::Equal),
                    )
            });
            let t1 = s[order[0]].norm();
            let n = order
                .iter()
                .take_while(|&&i| s[i].norm() > iota * t1)
                .count()
                .max(1);
            let mut left = Mat::from_fn(dim, n, |i, c| u[(i, order[c])]);
            orthonormalize_columns(&mut left);
            let values = order[..n].iter().map(|&i| s[i]).collect();
            return Ok(CompressedGsm {
                kind: SpectrumKind::Eigen,
                values,
                left,
                right: None,
                iota,
                dim,
                m_p: gsm.n_port_modes(),
                k: gsm.k,
                frequency: gsm.frequency,
                l_max: gsm.spherical.l_max,
                port_modes: gsm.port_modes.clone(),
            });
        }
        // non-convergence: fall through to the SVD
    }

    let svd = t_shift
        .svd()
        .map_err(|e| Error::Solver(format!("SVD of the shifted GSM failed: {e:?}")))?;
    let u = svd.U();
    let v = svd.V();
    let s = svd.S();
    let s1 = s[0].norm();
    let n = (0..dim).take_while(|&i| s[i].norm() > iota * s1).count().max(1);
    Ok(CompressedGsm {
        kind: SpectrumKind::Singular,
        values: (0..n).map(|i| s[i]).collect(),
        left: Mat::from_fn(dim, n, |i, c| u[(i, c)]),
        right: Some(Mat::from_fn(dim, n, |i, c| v[(i, c)])),
        iota,
        dim,
        m_p: gsm.n_port_modes(),
        k: gsm.k,
        frequency: gsm.frequency,
        l_max: gsm.spherical.l_max,
        port_modes: gsm.port_modes.clone(),
    })
}

/// Re-orthonormalize eigenvector columns in place (modified Gram–Schmidt).
///
/// For a normal `T̃` the exact eigenvectors are orthogonal, but a general
/// eigensolver returns arbitrary mixtures within (near-)degenerate clusters;
/// this restores the orthonormal family the factored reconstruction relies
/// on while preserving each leading subspace.
fn orthonormalize_columns(m: &mut Mat<C64>) {
    let (rows, cols) = (m.nrows(), m.ncols());
    for c in 0..cols {
        for p in 0..c {
            let mut dot = C64::ZERO;
            for i in 0..rows {
                dot += m[(i, p)].conj() * m[(i, c)];
            }
            for i in 0..rows {
                let sub = dot * m[(i, p)];
                m[(i, c)] -= sub;
            }
        }
        let norm: f64 = (0..rows).map(|i| m[(i, c)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..rows {
                m[(i, c)] /= norm;
            }
        }
    }
}

/// Average relative reconstruction error of a compressed GSM over `trials`
/// random in-state vectors (Eq.-style error metric):
/// `Err = (1/N)·Σ ‖S̃f − S̃′f‖₂/‖S̃f‖₂`, RNG seeded with `seed`.
pub fn reconstruction_error(
    gsm: &Gsm,
    compressed: &CompressedGsm,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let dim = gsm.dim();
    if compressed.dim != dim {
        return Err(Error::argument(format!(
            "compressed dimension {} does not match GSM dimension {dim}",
            compressed.dim
        )));
    }
    if trials == 0 {
        return Err(Error::argument("trial count must be positive"));
    }
    let st = gsm.stacked();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..trials {
        let f: Vec<C64> = (0..dim)
            .map(|_| {
                // standard complex Gaussian via Box–Muller
                let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.random();
                let r = (-2.0 * u1.ln()).sqrt();
                let ang = std::f64::consts::TAU * u2;
                C64::new(r * ang.cos(), r * ang.sin())
            })
            .collect();
        let mut exact = vec![C64::ZERO; dim];
        for (i, e) in exact.iter_mut().enumerate() {
            let mut s = C64::ZERO;
            for (jx, &f_j) in f.iter().enumerate() {
                s += st[(i, jx)] * f_j;
            }
            *e = s;
        }
        let approx = compressed.apply(&f)?;
        let num: f64 = exact
            .iter()
            .zip(&approx)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = exact.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if den > 0.0 {
            acc += num / den;
        }
    }
    Ok(acc / trials as f64)
}

/// Outcome of the characteristic-mode cross-check.
#[derive(Debug, Clone)]
pub struct CharacteristicReport {
    /// Characteristic eigenvalues λ_n of `X̃·I = λ·R̃·I`, by descending
    /// `|−1/(1+jλ)|`. Imaginary parts measure the discretization's loss
    /// defect; a lossless system gives real λ.
    pub lambda: Vec<C64>,
    /// `t_n` predicted from λ_n as `−1/(1+jλ_n)`.
    pub t_predicted: Vec<C64>,
    /// Leading eigenvalues of the actual shifted GSM `T̃`.
    pub t_actual: Vec<C64>,
    /// Worst relative mismatch over the compared leading pairs.
    pub max_rel_mismatch: f64,
    /// Worst deviation of the actual `t_n` from the circle `|t + ½| = ½`.
    pub circle_defect: f64,
    /// Number of pencil directions carrying no radiation (`β ≈ 0`); these
    /// map to `t = 0` and never enter the leading comparison.
    pub dropped_rank: usize,
    /// Number of leading pairs compared.
    pub compared: usize,
}

/// Cross-check the GSM spectrum against the characteristic modes of the
/// electric-formulation system: solves the generalized symmetric pencil
/// `X̃·I = λ·R̃·I` and compares `−1/(1+jλ_n)` against the leading eigenvalues
/// of the shifted scattering operator `T̃ = −P̃·Z⁻¹·P̃ᵗ`, paired greedily by
/// proximity.
///
/// `R̃ = P̃ᵗ·P̃` is the radiation quadratic form the scattering construction
/// itself sees (port power plus the spherical expansion of radiated power),
/// and `X̃ = (Z − R̃)/j` its reactive complement, so the eigenvalue relation
/// is exact at the discrete level: `Z·I = (1+jλ)·R̃·I` implies
/// `T̃·(P̃I) = −(1+jλ)⁻¹·(P̃I)`.
pub fn characteristic_check(
    sys: &ImpedanceSystem,
    coupling: &PortCoupling,
    proj: &ProjectionOperators,
    compare: usize,
) -> Result<CharacteristicReport> {
    if sys.formulation != Formulation::Electric {
        return Err(Error::argument(
            "characteristic modes are defined on the electric-formulation system",
        ));
    }
    let n = sys.dim();
    let p_tilde = stack_projections(sys, coupling, proj)?;
    let r_tilde = p_tilde.transpose() * &p_tilde;
    let x_tilde =
        Mat::<C64>::from_fn(n, n, |i, jx| -J * (sys.z[(i, jx)] - r_tilde[(i, jx)]));

    let gev = x_tilde
        .generalized_eigen(&r_tilde)
        .map_err(|e| Error::Solver(format!("pencil eigendecomposition failed: {e:?}")))?;
    let sa = gev.S_a();
    let sb = gev.S_b();
    let beta_max = (0..n).map(|i| sb[i].norm()).fold(0.0f64, f64::max);
    if beta_max == 0.0 {
        return Err(Error::Solver("radiation operator R̃ is identically zero".into()));
    }
    let mut dropped_rank = 0usize;
    // t = −β/(β + jα) stays finite through β → 0, where the direction is
    // radiationless and scatters nothing.
    let mut pairs: Vec<(C64, C64)> = (0..n)
        .map(|i| {
            let (a, b) = (sa[i], sb[i]);
            if b.norm() <= 1e-12 * beta_max {
                dropped_rank += 1;
                (C64::new(f64::INFINITY, 0.0), C64::ZERO)
            } else {
                (a / b, -b / (b + J * a))
            }
        })
        .collect();
    pairs.sort_by(|x, y| y.1.norm().partial_cmp(&x.1.norm()).unwrap());
    let lambda: Vec<C64> = pairs.iter().map(|p| p.0).collect();
    let t_predicted: Vec<C64> = pairs.iter().map(|p| p.1).collect();

    // Actual spectrum of the full shifted GSM (evanescent rows included, so
    // the algebra above applies verbatim): T̃ = −P̃·Z⁻¹·P̃ᵗ.
    let x = sys.solve_mat(&p_tilde.transpose().to_owned())?;
    let mut t_shift = &p_tilde * &x;
    for i in 0..t_shift.nrows() {
        for jx in 0..t_shift.ncols() {
            t_shift[(i, jx)] = -t_shift[(i, jx)];
        }
    }
    let mut t_actual: Vec<C64> = t_shift
        .eigenvalues()
        .map_err(|e| Error::Solver(format!("eigenvalues of T̃ failed: {e:?}")))?;
    t_actual.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());

    let compared = compare.min(t_actual.len()).min(t_predicted.len());
    let mut used = vec![false; t_predicted.len()];
    let mut max_rel = 0.0f64;
    let mut circle = 0.0f64;
    for t in t_actual.iter().take(compared) {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (i, p) in t_predicted.iter().enumerate() {
            if !used[i] {
                let d = (t - p).norm();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
        }
        used[best] = true;
        max_rel = max_rel.max(best_d / t.norm().max(1e-300));
        circle = circle.max(((t + 0.5).norm() - 0.5).abs());
    }
    Ok(CharacteristicReport {
        lambda,
        t_predicted,
        t_actual,
        max_rel_mismatch: max_rel,
        circle_defect: circle,
        dropped_rank,
        compared,
    })
}
