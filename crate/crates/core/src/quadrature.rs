//! Triangle quadrature rules, analytic near-singular integrals and adaptive
//! subdivision.

use crate::vec3::CVec3;
use crate::{C64, Vec3};

/// Barycentric quadrature rule: (weight, [λ0, λ1, λ2]); weights sum to 1 and
/// multiply the triangle area.
pub type TriRule = &'static [(f64, [f64; 3])];

/// Centroid rule, exact for degree 1.
pub const TRI_1: TriRule = &[(1.0, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])];

/// Three-point rule, exact for degree 2.
pub const TRI_3: TriRule = &[
    (1.0 / 3.0, [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]),
    (1.0 / 3.0, [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]),
    (1.0 / 3.0, [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]),
];

/// Seven-point rule, exact for degree 5.
pub const TRI_7: TriRule = {
    const W0: f64 = 0.225;
    const W1: f64 = 0.125_939_180_544_827;
    const A1: f64 = 0.797_426_985_353_087;
    const B1: f64 = 0.101_286_507_323_456;
    const W2: f64 = 0.132_394_152_788_506;
    const A2: f64 = 0.059_715_871_789_770;
    const B2: f64 = 0.470_142_064_105_115;
    &[
        (W0, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
        (W1, [A1, B1, B1]),
        (W1, [B1, A1, B1]),
        (W1, [B1, B1, A1]),
        (W2, [A2, B2, B2]),
        (W2, [B2, A2, B2]),
        (W2, [B2, B2, A2]),
    ]
};

/// Map a barycentric point to Cartesian coordinates.
#[inline]
pub fn bary_point(tri: &[Vec3; 3], l: [f64; 3]) -> Vec3 {
    tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2]
}

pub fn tri_area(tri: &[Vec3; 3]) -> f64 {
    0.5 * (tri[1] - tri[0]).cross(tri[2] - tri[0]).norm()
}

/// Analytic integrals of the static kernel over a triangle:
/// `inv_r` = ∫ dS'/R and `inv_r_vec` = ∫ (r' − P0)/R dS', with `p0` the
/// projection of the observation point onto the triangle plane.
#[derive(Debug, Clone, Copy)]
pub struct StaticIntegrals {
    pub inv_r: f64,
    pub inv_r_vec: Vec3,
    pub p0: Vec3,
}

/// Edge-wise closed forms for the 1/R potential of a flat triangle.
pub fn static_integrals(obs: Vec3, tri: &[Vec3; 3]) -> StaticIntegrals {
    let n = (tri[1] - tri[0]).cross(tri[2] - tri[0]).normalized();
    let d = (obs - tri[0]).dot(n);
    let p0 = obs - n * d;
    let dabs = d.abs();
    let scale = (tri[1] - tri[0])
        .norm()
        .max((tri[2] - tri[1]).norm())
        .max((tri[0] - tri[2]).norm());

    let mut inv_r = 0.0;
    let mut inv_r_vec = Vec3::ZERO;
    for e in 0..3 {
        let (pa, pb) = (tri[e], tri[(e + 1) % 3]);
        let s_hat = (pb - pa).normalized();
        let m_hat = s_hat.cross(n);
        let t0 = (pa - p0).dot(m_hat);
        let s_minus = (pa - p0).dot(s_hat);
        let s_plus = (pb - p0).dot(s_hat);
        let r_minus = (obs - pa).norm();
        let r_plus = (obs - pb).norm();
        let r0_sq = t0 * t0 + d * d;

        // log term, in whichever form avoids catastrophic cancellation
        let f = if s_plus + s_minus >= 0.0 {
            ((r_plus + s_plus) / (r_minus + s_minus)).ln()
        } else {
            ((r_minus - s_minus) / (r_plus - s_plus)).ln()
        };
        // the observation point sits on the edge line: the edge contributes
        // nothing to the potential (t0 → 0 kills both terms)
        let on_edge_line = r0_sq < (1e-14 * scale) * (1e-14 * scale);
        if !on_edge_line {
            let beta = (t0 * s_plus).atan2(r0_sq + dabs * r_plus)
                - (t0 * s_minus).atan2(r0_sq + dabs * r_minus);
            inv_r += t0 * f - dabs * beta;
        }
        inv_r_vec += m_hat * (0.5 * (r0_sq * if on_edge_line { 0.0 } else { f }
            + s_plus * r_plus
            - s_minus * r_minus));
    }
    StaticIntegrals { inv_r, inv_r_vec, p0 }
}

/// Analytic `∫ ∇_r (1/R) dS'` over a flat triangle, valid for observation
/// points off the triangle plane. Edge terms are stable log forms; the normal
/// term is the signed solid angle (Van Oosterom–Strackee).
pub fn static_grad(obs: Vec3, tri: &[Vec3; 3]) -> Vec3 {
    let n = (tri[1] - tri[0]).cross(tri[2] - tri[0]).normalized();
    let mut edge_acc = Vec3::ZERO;
    for i in 0..3 {
        let p1 = tri[i];
        let p2 = tri[(i + 1) % 3];
        let s_hat = (p2 - p1).normalized();
        let m_hat = s_hat.cross(n);
        let r1 = (p1 - obs).norm();
        let r2 = (p2 - obs).norm();
        let s1 = (p1 - obs).dot(s_hat);
        let s2 = (p2 - obs).dot(s_hat);
        // ∫ dl/R: equivalent log forms; pick the one away from cancellation
        let li = if s1 + s2 >= 0.0 {
            ((r2 + s2) / (r1 + s1)).ln()
        } else {
            ((r1 - s1) / (r2 - s2)).ln()
        };
        edge_acc += m_hat * li;
    }
    let a = tri[0] - obs;
    let b = tri[1] - obs;
    let c = tri[2] - obs;
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(b.cross(c));
    let den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    let omega = 2.0 * num.atan2(den);
    -edge_acc + n * omega
}

/// Values an adaptive quadrature can accumulate.
pub trait QuadValue: Copy {
    const ZERO: Self;
    fn add(self, o: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for C64 {
    const ZERO: Self = C64::new(0.0, 0.0);
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

impl QuadValue for CVec3 {
    const ZERO: Self = CVec3::ZERO;
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

impl<A: QuadValue, B: QuadValue> QuadValue for (A, B) {
    const ZERO: Self = (A::ZERO, B::ZERO);
    fn add(self, o: Self) -> Self {
        (self.0.add(o.0), self.1.add(o.1))
    }
    fn scale(self, s: f64) -> Self {
        (self.0.scale(s), self.1.scale(s))
    }
    fn magnitude(self) -> f64 {
        self.0.magnitude().hypot(self.1.magnitude())
    }
}

/// Fixed-rule integral of `f` over a triangle (area-weighted).
pub fn tri_quad<V: QuadValue>(f: &mut impl FnMut(Vec3) -> V, tri: &[Vec3; 3], rule: TriRule) -> V {
    let area = tri_area(tri);
    let mut acc = V::ZERO;
    for &(w, l) in rule {
        acc = acc.add(f(bary_point(tri, l)).scale(w * area));
    }
    acc
}

/// Adaptive integral by 4-way subdivision; stops when the refined estimate
/// moves by less than `tol` relative to the accumulated magnitude or depth
/// runs out.
pub fn tri_quad_adaptive<V: QuadValue>(
    f: &mut impl FnMut(Vec3) -> V,
    tri: &[Vec3; 3],
    tol: f64,
    max_depth: usize,
) -> V {
    fn recurse<V: QuadValue>(
        f: &mut impl FnMut(Vec3) -> V,
        tri: &[Vec3; 3],
        coarse: V,
        tol: f64,
        depth: usize,
        scale: f64,
    ) -> V {
        let m01 = (tri[0] + tri[1]) * 0.5;
        let m12 = (tri[1] + tri[2]) * 0.5;
        let m20 = (tri[2] + tri[0]) * 0.5;
        let children = [
            [tri[0], m01, m20],
            [m01, tri[1], m12],
            [m20, m12, tri[2]],
            [m01, m12, m20],
        ];
        let fine: [V; 4] = children.map(|c| tri_quad(f, &c, TRI_7));
        let total = fine.iter().fold(V::ZERO, |a, &b| a.add(b));
        let err = total.add(coarse.scale(-1.0)).magnitude();
        if depth == 0 || err <= tol * scale.max(total.magnitude()) {
            return total;
        }
        let mut out = V::ZERO;
        for (c, est) in children.iter().zip(fine) {
            out = out.add(recurse(f, c, est, tol, depth - 1, scale));
        }
        out
    }
    let coarse = tri_quad(f, tri, TRI_7);
    recurse(f, tri, coarse, tol, max_depth, coarse.magnitude())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::J;

    fn unit_tri() -> [Vec3; 3] {
        [Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)]
    }

    /// ∫ λ0^p λ1^q λ2^r over a triangle = 2A · p!q!r!/(p+q+r+2)!
    fn bary_moment(p: u64, q: u64, r: u64, area: f64) -> f64 {
        let fact = |n: u64| (1..=n).product::<u64>() as f64;
        2.0 * area * fact(p) * fact(q) * fact(r) / fact(p + q + r + 2)
    }

    #[test]
    fn rules_integrate_barycentric_monomials() {
        let tri = [Vec3::new(0.2, 0.1, 0.0), Vec3::new(1.3, 0.4, 0.5), Vec3::new(0.1, 1.1, -0.3)];
        let area = tri_area(&tri);
        // invert the affine map to recover barycentrics from the point
        let bary = |r: Vec3| {
            let v0 = tri[1] - tri[0];
            let v1 = tri[2] - tri[0];
            let w = r - tri[0];
            let d00 = v0.dot(v0);
            let d01 = v0.dot(v1);
            let d11 = v1.dot(v1);
            let det = d00 * d11 - d01 * d01;
            let l1 = (d11 * w.dot(v0) - d01 * w.dot(v1)) / det;
            let l2 = (d00 * w.dot(v1) - d01 * w.dot(v0)) / det;
            [1.0 - l1 - l2, l1, l2]
        };
        let cases: &[(TriRule, u64)] = &[(TRI_1, 1), (TRI_3, 2), (TRI_7, 5)];
        for &(rule, degree) in cases {
            for p in 0..=degree {
                for q in 0..=(degree - p) {
                    let r_exp = degree - p - q;
                    let want = bary_moment(p, q, r_exp, area);
                    let got = tri_quad(
                        &mut |pt| {
                            let l = bary(pt);
                            C64::from(
                                l[0].powi(p as i32) * l[1].powi(q as i32) * l[2].powi(r_exp as i32),
                            )
                        },
                        &tri,
                        rule,
                    );
                    assert!(
                        (got.re - want).abs() < 1e-13 * area.max(1.0),
                        "rule deg {degree}: λ^({p},{q},{r_exp}) got {} want {want}",
                        got.re
                    );
                }
            }
        }
    }

    #[test]
    fn static_grad_matches_quadrature() {
        let tri = [Vec3::new(0.2, 0.1, 0.0), Vec3::new(1.3, 0.4, 0.5), Vec3::new(0.1, 1.1, -0.3)];
        // observation points at decreasing heights, including one close to an
        // edge where the fixed-rule reference needs deep adaptivity
        let obs_points = [
            Vec3::new(2.0, -1.0, 1.5),
            Vec3::new(0.5, 0.5, 0.4),
            Vec3::new(0.25, 0.2, -0.08),
            Vec3::new(0.7, 0.25, 0.28),
        ];
        for obs in obs_points {
            let want = tri_quad_adaptive(
                &mut |rp: Vec3| {
                    let d = obs - rp;
                    CVec3::from_real(d * (-1.0 / d.norm().powi(3)))
                },
                &tri,
                1e-11,
                14,
            );
            let got = static_grad(obs, &tri);
            let err = (CVec3::from_real(got) - want).norm();
            assert!(
                err < 1e-7 * want.norm().max(1.0),
                "static_grad mismatch at {obs:?}: {err:.3e} (got {got:?})"
            );
        }
    }

    #[test]
    fn static_integrals_match_quadrature_off_plane() {
        let tri = [Vec3::new(0.1, 0.0, 0.0), Vec3::new(1.0, 0.2, 0.0), Vec3::new(0.3, 0.9, 0.0)];
        for obs in [
            Vec3::new(0.4, 0.3, 0.5),
            Vec3::new(-0.5, 0.1, 0.2),
            Vec3::new(0.4, 0.3, -0.7),
            Vec3::new(2.0, 2.0, 1.0),
        ] {
            let a = static_integrals(obs, &tri);
            let num_scalar = tri_quad_adaptive(
                &mut |r| C64::from(1.0 / (obs - r).norm()),
                &tri,
                1e-12,
                8,
            );
            assert!(
                (a.inv_r - num_scalar.re).abs() < 1e-8 * num_scalar.re.abs(),
                "obs {obs:?}: {} vs {}",
                a.inv_r,
                num_scalar.re
            );
            let num_vec = tri_quad_adaptive(
                &mut |r| CVec3::from_real((r - a.p0) / (obs - r).norm()),
                &tri,
                1e-12,
                8,
            );
            let diff = (a.inv_r_vec.x - num_vec.x.re).abs()
                + (a.inv_r_vec.y - num_vec.y.re).abs()
                + (a.inv_r_vec.z - num_vec.z.re).abs();
            assert!(diff < 1e-8, "obs {obs:?}: vec diff {diff}");
        }
    }

    #[test]
    fn static_integrals_subdivision_additivity() {
        // exact identity, including the singular self case
        let tri = unit_tri();
        for obs in [
            Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0), // centroid, on-surface
            Vec3::new(0.5, 0.0, 0.0),             // on an edge
            Vec3::new(0.2, 0.3, 0.05),
        ] {
            let whole = static_integrals(obs, &tri);
            let m01 = (tri[0] + tri[1]) * 0.5;
            let m12 = (tri[1] + tri[2]) * 0.5;
            let m20 = (tri[2] + tri[0]) * 0.5;
            let children = [
                [tri[0], m01, m20],
                [m01, tri[1], m12],
                [m20, m12, tri[2]],
                [m01, m12, m20],
            ];
            let mut sum = 0.0;
            let mut sum_vec = Vec3::ZERO;
            for c in &children {
                let s = static_integrals(obs, c);
                sum += s.inv_r;
                sum_vec += s.inv_r_vec;
            }
            assert!(
                (whole.inv_r - sum).abs() < 1e-11 * whole.inv_r.abs().max(1.0),
                "obs {obs:?}: {} vs {}",
                whole.inv_r,
                sum
            );
            assert!((whole.inv_r_vec - sum_vec).norm() < 1e-11);
        }
    }

    #[test]
    fn static_integrals_equilateral_centroid_closed_form() {
        // pin ∫ dS/R at the centroid of an equilateral triangle against an
        // independent polar-coordinate evaluation: ∫∫ (1/r)·r dr dφ = ∫ r_max(φ) dφ
        let s = 1.3;
        let h = s * 3.0_f64.sqrt() / 2.0;
        let tri = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(s, 0.0, 0.0),
            Vec3::new(s / 2.0, h, 0.0),
        ];
        let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
        let got = static_integrals(centroid, &tri).inv_r;
        // polar oracle: I = Σ_edges ∫ dφ t0/cos-type; evaluate by 1-D quadrature
        // of r_max(φ) over the full angle: ∫∫ (1/r) r dr dφ = ∫ r_max(φ) dφ
        let n = 20000;
        let mut oracle = 0.0;
        for i in 0..n {
            let phi = (i as f64 + 0.5) / n as f64 * 2.0 * std::f64::consts::PI;
            let dir = Vec3::new(phi.cos(), phi.sin(), 0.0);
            // distance from centroid to the triangle boundary along dir
            let mut r_max = f64::INFINITY;
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let edge = b - a;
                let den = dir.x * (-edge.y) + dir.y * edge.x;
                if den.abs() < 1e-14 {
                    continue;
                }
                let w = a - centroid;
                let t = (w.x * (-edge.y) + w.y * edge.x) / den;
                let u = (dir.y * w.x - dir.x * w.y) / -den;
                if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
                    r_max = r_max.min(t);
                }
            }
            oracle += r_max * (2.0 * std::f64::consts::PI / n as f64);
        }
        assert!((got - oracle).abs() < 1e-6 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn adaptive_quadrature_handles_peaked_integrands() {
        // near-singular 1/R with the source just below the triangle
        let tri = unit_tri();
        let src = Vec3::new(0.3, 0.3, 0.01);
        let got = tri_quad_adaptive(&mut |r| C64::from(1.0 / (src - r).norm()), &tri, 1e-10, 12);
        let want = static_integrals(src, &tri).inv_r;
        assert!((got.re - want).abs() < 1e-6 * want, "{} vs {want}", got.re);
        // complex smooth kernel sanity: ∫ e^{-jkR}/R ≈ analytic static part
        // plus a bounded remainder
        let k = 2.0;
        let full = tri_quad_adaptive(
            &mut |r| {
                let rr = (src - r).norm();
                (-J * k * rr).exp() / rr
            },
            &tri,
            1e-10,
            12,
        );
        let remainder = tri_quad_adaptive(
            &mut |r| {
                let rr = (src - r).norm();
                ((-J * k * rr).exp() - 1.0) / rr
            },
            &tri,
            1e-10,
            12,
        );
        assert!(((full - remainder).re - want).abs() < 1e-6 * want);
    }
}
