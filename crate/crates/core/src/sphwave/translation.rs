//! Inter-element translation of spherical-wave expansions.
//!
//! The operator re-expands outgoing waves about a source center as regular
//! waves about a target center displaced by `d`. It is assembled by
//! orthogonality projection: the source fields are evaluated on a sphere
//! around the target, projected onto the tangential (and, for TM modes,
//! radial) vector harmonics by spectrally exact angular quadrature, and the
//! known radial factors of the regular waves are divided out. The result is
//! the addition-theorem matrix 𝒴(k·d) up to quadrature roundoff; the stored
//! matrix is 𝒢 = 𝒴(k·d)/2, which maps outgoing coefficients directly to
//! incoming-state coefficients `a`.

use super::{eval_all, RadialTable, SphericalBasis, WaveKind};
use crate::special::gauss_legendre;
use crate::{C64, Error, Result, Vec3};
use faer::Mat;

/// Outgoing-to-regular translation operator between two bases at the same k.
#[derive(Debug, Clone)]
pub struct TranslationOperator {
    pub displacement: Vec3,
    /// J_t × J_s matrix 𝒢 = 𝒴(k·d)/2.
    pub matrix: Mat<C64>,
}

impl TranslationOperator {
    /// Incoming-state coefficients at the target: a = 𝒢·h.
    pub fn apply(&self, h: &[C64]) -> Vec<C64> {
        let (jt, js) = self.matrix.shape();
        assert_eq!(h.len(), js);
        let mut out = vec![C64::default(); jt];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = C64::default();
            for (j, hj) in h.iter().enumerate() {
                acc += self.matrix[(i, j)] * hj;
            }
            *o = acc;
        }
        out
    }

    /// Regular-wave coefficients of the translated field, g = 𝒴·h = 2𝒢·h.
    pub fn apply_regular(&self, h: &[C64]) -> Vec<C64> {
        self.apply(h).into_iter().map(|a| a * 2.0).collect()
    }
}

/// Assemble the translation operator for displacement `d` (source center to
/// target center). Requires |d| > 0 and matching wavenumbers; validity of the
/// enclosing-sphere separation is the caller's contract.
pub fn translation_operator(
    source: &SphericalBasis,
    target: &SphericalBasis,
    d: Vec3,
) -> Result<TranslationOperator> {
    let dist = d.norm();
    if dist == 0.0 {
        return Err(Error::argument(
            "translation displacement must be nonzero (the analytical re-expansion does not apply)",
        ));
    }
    if (source.k - target.k).abs() > 1e-9 * source.k.abs() {
        return Err(Error::argument(format!(
            "source and target bases must share the wavenumber ({} vs {})",
            source.k, target.k
        )));
    }

    // Primary projection sphere; the fallback radius handles degrees whose
    // regular radial factor sits near a zero of j_l at the primary radius.
    let rho1 = 0.45 * dist;
    let rho2 = 0.30 * dist;
    let mut y_mat = project_on_sphere(source, target, d, rho1)?;
    let flagged = flagged_rows(target, rho1);
    if !flagged.is_empty() {
        let y2 = project_on_sphere(source, target, d, rho2)?;
        for row in flagged {
            for j in 0..source.len() {
                y_mat[(row, j)] = y2[(row, j)];
            }
        }
    }

    let matrix = Mat::from_fn(target.len(), source.len(), |i, j| y_mat[(i, j)] * 0.5);
    Ok(TranslationOperator { displacement: d, matrix })
}

/// Degrees whose extraction channel is ill-conditioned at radius ρ: j_l has a
/// nearby zero in its oscillatory regime (l ≲ kρ). The exponentially small
/// regime l > kρ is fine: smallness there is the physical scale, not a zero.
fn flagged_rows(target: &SphericalBasis, rho: f64) -> Vec<usize> {
    let xi = target.k * rho;
    let reg = RadialTable::new(target.l_max, WaveKind::Regular, xi).expect("regular radial");
    let out = RadialTable::new(target.l_max, WaveKind::Outgoing, xi).expect("outgoing radial");
    let mut rows = Vec::new();
    for mode in &target.modes {
        let l = mode.l;
        if (l as f64) > xi {
            continue;
        }
        let bad = if mode.tau == 1 {
            reg.z[l].norm() < 0.05 * out.z[l].norm()
        } else {
            // TM uses the better of the tangential and radial channels
            reg.dz[l].norm() < 0.05 * out.dz[l].norm()
                && reg.z[l].norm() < 0.05 * out.z[l].norm()
        };
        if bad {
            rows.push(mode.alpha);
        }
    }
    rows
}

/// 𝒴 entries by projection on the sphere of radius ρ about the target.
fn project_on_sphere(
    source: &SphericalBasis,
    target: &SphericalBasis,
    d: Vec3,
    rho: f64,
) -> Result<Mat<C64>> {
    let n_theta = target.l_max + 24;
    let n_phi = 2 * n_theta + 1;
    let (cths, wths) = gauss_legendre(n_theta);
    let w_phi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let nq = n_theta * n_phi;

    let xi = target.k * rho;
    let reg = RadialTable::new(target.l_max, WaveKind::Regular, xi)?;

    // projection functional matrix: rows = target modes, cols = 3*nq
    let jt = target.len();
    let js = source.len();
    let mut b = Mat::<f64>::zeros(jt, 3 * nq);
    let mut e_re = Mat::<f64>::zeros(3 * nq, js);
    let mut e_im = Mat::<f64>::zeros(3 * nq, js);

    for (it, (&ct, &wt)) in cths.iter().zip(&wths).enumerate() {
        let theta = ct.acos();
        for ip in 0..n_phi {
            let phi = ip as f64 * 2.0 * std::f64::consts::PI / n_phi as f64;
            let q = it * n_phi + ip;
            let w = wt * w_phi;
            let (rhat, that, phat) = super::spherical_frame(theta, phi);
            let ang = super::AngularTable::new(target, theta, phi);
            for mode in &target.modes {
                let a = mode.alpha;
                let l = mode.l;
                // choose the extraction channel and fold weight / radial factor
                let (vt, vp, vr, factor) = if mode.tau == 1 {
                    let [at, ap] = ang.a1[a];
                    (at, ap, 0.0, reg.z[l].re)
                } else {
                    let tan_f = reg.dz[l].re;
                    let rad_f = reg.z[l].re / xi * ((l * (l + 1)) as f64).sqrt();
                    if tan_f.abs() >= rad_f.abs() {
                        let [at, ap] = ang.a2[a];
                        (at, ap, 0.0, tan_f)
                    } else {
                        (0.0, 0.0, ang.y[a], rad_f)
                    }
                };
                let scale = w / factor;
                let v = that * vt + phat * vp + rhat * vr;
                b[(a, 3 * q)] = scale * v.x;
                b[(a, 3 * q + 1)] = scale * v.y;
                b[(a, 3 * q + 2)] = scale * v.z;
            }
            // source outgoing fields at the same point (source frame)
            let p = d + rho * rhat;
            let fields = eval_all(source, WaveKind::Outgoing, p)?;
            for (j, f) in fields.iter().enumerate() {
                e_re[(3 * q, j)] = f.x.re;
                e_re[(3 * q + 1, j)] = f.y.re;
                e_re[(3 * q + 2, j)] = f.z.re;
                e_im[(3 * q, j)] = f.x.im;
                e_im[(3 * q + 1, j)] = f.y.im;
                e_im[(3 * q + 2, j)] = f.z.im;
            }
        }
    }

    let c_re = &b * &e_re;
    let c_im = &b * &e_im;
    Ok(Mat::from_fn(jt, js, |i, j| C64::new(c_re[(i, j)], c_im[(i, j)])))
}
