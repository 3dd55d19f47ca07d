//! Special functions: spherical Bessel functions, fully normalized
//! associated Legendre functions, and Gauss-Legendre quadrature nodes.

use crate::C64;

/// Spherical Bessel functions j_0..j_lmax at x.
///
/// Upward recurrence for x > lmax, downward (Miller) otherwise.
pub fn sph_jn(lmax: usize, x: f64) -> Vec<f64> {
    let n = lmax + 1;
    let mut j = vec![0.0; n];
    if x == 0.0 {
        j[0] = 1.0;
        return j;
    }
    if x > lmax as f64 + 1.0 {
        // upward recurrence is stable here
        j[0] = x.sin() / x;
        if n > 1 {
            j[1] = x.sin() / (x * x) - x.cos() / x;
        }
        for l in 2..n {
            j[l] = (2 * l - 1) as f64 / x * j[l - 1] - j[l - 2];
        }
    } else {
        // downward recurrence with normalization against j_0
        let start = lmax + (15.0 + 2.0 * (lmax as f64).sqrt()) as usize + (x as usize);
        let mut jp2 = 0.0_f64;
        let mut jp1 = 1e-280_f64;
        for l in (0..=start).rev() {
            let cur = (2 * l + 3) as f64 / x * jp1 - jp2;
            jp2 = jp1;
            jp1 = cur;
            if l <= lmax {
                j[l] = cur;
            }
            // rescale to avoid overflow
            if jp1.abs() > 1e250 {
                let s = 1e-250;
                jp1 *= s;
                jp2 *= s;
                for v in j.iter_mut() {
                    *v *= s;
                }
            }
        }
        let scale = (x.sin() / x) / j[0];
        for v in j.iter_mut() {
            *v *= scale;
        }
    }
    j
}

/// Spherical Neumann functions y_0..y_lmax at x > 0 (upward recurrence).
pub fn sph_yn(lmax: usize, x: f64) -> Vec<f64> {
    let n = lmax + 1;
    let mut y = vec![0.0; n];
    y[0] = -x.cos() / x;
    if n > 1 {
        y[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for l in 2..n {
        y[l] = (2 * l - 1) as f64 / x * y[l - 1] - y[l - 2];
    }
    y
}

/// Spherical Hankel functions of the second kind, h_l^{(2)} = j_l - i y_l.
pub fn sph_h2n(lmax: usize, x: f64) -> Vec<C64> {
    let j = sph_jn(lmax, x);
    let y = sph_yn(lmax, x);
    j.iter().zip(&y).map(|(&jj, &yy)| C64::new(jj, -yy)).collect()
}

/// Given z_0..z_lmax, return the Riccati ratios (x z_l)'/x = z_{l-1} - l z_l / x.
///
/// For l = 0: (x z_0)'/x = z_0/x + z_0'. Uses z_0' = -z_1 (valid for j, y, h).
pub fn riccati_deriv_over_x<T>(z: &[T], x: f64) -> Vec<T>
where
    T: Copy
        + std::ops::Sub<Output = T>
        + std::ops::Add<Output = T>
        + std::ops::Mul<f64, Output = T>,
{
    let mut out = Vec::with_capacity(z.len());
    for l in 0..z.len() {
        if l == 0 {
            out.push(z[0] * (1.0 / x) + (z[0] * 0.0 - z[1]));
        } else {
            out.push(z[l - 1] - z[l] * (l as f64 / x));
        }
    }
    out
}

/// Fully normalized associated Legendre functions and angular derivatives.
///
/// `p[idx(l,m)]` holds \bar{P}_l^m(cosθ) with
/// ∫ (\bar{P}_l^m)² cos²(mφ) dΩ = 1/(2-δ_{m0}),
/// i.e. the normalization under which the real spherical harmonics
/// Y = sqrt(2-δ_{m0}) \bar{P}_l^m trig(mφ) are orthonormal on the sphere.
/// `dp` holds d\bar{P}/dθ and `pm` holds m·\bar{P}/sinθ.
pub struct LegendreTable {
    pub lmax: usize,
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    pub pm: Vec<f64>,
}

impl LegendreTable {
    #[inline]
    pub fn idx(&self, l: usize, m: usize) -> usize {
        debug_assert!(m <= l && l <= self.lmax);
        l * (l + 1) / 2 + m
    }

    /// Evaluate at polar angle θ. Pole values are taken at a small nudge,
    /// adequate for quadrature-based use (nodes never sit on the poles).
    pub fn new(lmax: usize, theta: f64) -> Self {
        let eps = 1e-9;
        let th = theta.clamp(eps, std::f64::consts::PI - eps);
        let u = th.cos();
        let s = th.sin();
        let size = (lmax + 1) * (lmax + 2) / 2;
        let mut p = vec![0.0; size];
        let mut dp = vec![0.0; size];
        let mut pm = vec![0.0; size];
        let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;

        // seed: \bar{P}_0^0 = sqrt(1/4π)
        p[0] = (1.0 / (4.0 * std::f64::consts::PI)).sqrt();
        for m in 1..=lmax {
            // diagonal: \bar{P}_m^m = s sqrt((2m+1)/(2m)) \bar{P}_{m-1}^{m-1}
            p[idx(m, m)] = s * ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * p[idx(m - 1, m - 1)];
        }
        for m in 0..lmax {
            // first off-diagonal
            p[idx(m + 1, m)] = u * ((2 * m + 3) as f64).sqrt() * p[idx(m, m)];
        }
        for m in 0..=lmax {
            for l in (m + 2)..=lmax {
                let a = ((4 * l * l - 1) as f64 / (l * l - m * m) as f64).sqrt();
                let b = (((l - 1) * (l - 1) - m * m) as f64 / (4 * (l - 1) * (l - 1) - 1) as f64)
                    .sqrt();
                p[idx(l, m)] = a * (u * p[idx(l - 1, m)] - b * p[idx(l - 2, m)]);
            }
        }
        for m in 0..=lmax {
            for l in m..=lmax {
                let i = idx(l, m);
                pm[i] = m as f64 * p[i] / s;
                // dθ \bar{P}_l^m = [l u \bar{P}_l^m - c \bar{P}_{l-1}^m]/s
                let c = if l > m {
                    ((2 * l + 1) as f64 * (l * l - m * m) as f64 / (2 * l - 1) as f64).sqrt()
                } else {
                    0.0
                };
                let prev = if l > 0 && l - 1 >= m { p[idx(l - 1, m)] } else { 0.0 };
                dp[i] = (l as f64 * u * p[i] - c * prev) / s;
            }
        }
        LegendreTable { lmax, p, dp, pm }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on Legendre P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (pn, dpn) = legendre_pn(n, z);
            let dz = pn / dpn;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dpn) = legendre_pn(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dpn * dpn);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_pn(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
