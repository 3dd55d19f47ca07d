//! Galerkin assembly of the EFIE/MFIE operator blocks over an RWG basis.
//!
//! Produces the mixed-potential operator `L`, the principal-value part of the
//! magnetic-coupling operator `K`, and the identity (residue) Gram matrix `D`
//! restricted to the port surface. Quadrature order is banded by separation:
//! well-separated pairs use low-order rules, close pairs switch to analytic
//! extraction of the static kernel (for `L`) or adaptive refinement of the
//! inner integral (for `K`).

use std::f64::consts::PI;

use faer::Mat;
use rayon::prelude::*;

use crate::mesh::{RegionTag, RwgBasisSet, TriangleMesh};
use crate::quadrature::{
    bary_point, static_grad, static_integrals, tri_quad, tri_quad_adaptive, TriRule, TRI_3, TRI_7,
};
use crate::vec3::CVec3;
use crate::{Error, Result, C64, J, Vec3};

/// Frequency-domain operator blocks shared by both impedance formulations.
///
/// Row/column order follows the basis enumeration: `l_op` is over all `N`
/// RWG functions; `k_pv` and `d_gram` have `N` rows and one column per
/// magnetic (port-interior) basis function.
#[derive(Debug, Clone)]
pub struct OperatorBlocks {
    /// Free-space wavenumber the blocks were assembled at, rad/m.
    pub k: f64,
    /// Mixed-potential operator, symmetric `N×N`.
    pub l_op: Mat<C64>,
    /// Principal-value `K` tested with all functions against magnetic
    /// sources, `N×Nm`.
    pub k_pv: Mat<C64>,
    /// Port identity Gram `⟨ψ_i, n̂×ψ_j⟩_P`, `N×Nm`, real.
    pub d_gram: Mat<f64>,
}

impl OperatorBlocks {
    /// `K` evaluated from the side the residue adds `+D/2` (`N×Nm`).
    pub fn k_plus(&self) -> Mat<C64> {
        Mat::from_fn(self.k_pv.nrows(), self.k_pv.ncols(), |i, j| {
            self.k_pv[(i, j)] + 0.5 * self.d_gram[(i, j)]
        })
    }

    /// `K` evaluated from the side the residue subtracts `D/2` (`N×Nm`).
    pub fn k_minus(&self) -> Mat<C64> {
        Mat::from_fn(self.k_pv.nrows(), self.k_pv.ncols(), |i, j| {
            self.k_pv[(i, j)] - 0.5 * self.d_gram[(i, j)]
        })
    }
}

/// Basis functions with support on one triangle: `(basis id, signed
/// coefficient ±l/2A, free vertex)`. `ψ = c (r − v_free)`, `∇·ψ = 2c`.
pub(crate) fn triangle_basis_table(
    mesh: &TriangleMesh,
    rwg: &RwgBasisSet,
) -> Vec<Vec<(usize, f64, Vec3)>> {
    let mut table = vec![Vec::new(); mesh.triangles.len()];
    for (i, e) in rwg.edges.iter().enumerate() {
        let cp = e.length / (2.0 * mesh.tri_area(e.tri_plus));
        table[e.tri_plus].push((i, cp, mesh.vertices[e.free_plus]));
        let cm = e.length / (2.0 * mesh.tri_area(e.tri_minus));
        table[e.tri_minus].push((i, -cm, mesh.vertices[e.free_minus]));
    }
    table
}

/// Smooth remainder of the Helmholtz kernel, `(e^{-jkR} − 1)/(4πR)`, with
/// its analytic `R → 0` limit.
fn smooth_kernel(k: f64, rr: f64) -> C64 {
    let kr = k * rr;
    if kr < 1e-6 {
        // (e^{-jkR} − 1)/R = −jk − k²R/2 + jk³R²/6 + O(R³)
        (C64::new(-0.5 * k * k * rr, -k) + J * (k * k * k * rr * rr / 6.0)) / (4.0 * PI)
    } else {
        (C64::new(kr.cos() - 1.0, -kr.sin())) / (4.0 * PI * rr)
    }
}

/// Full Helmholtz kernel `e^{-jkR}/(4πR)`.
fn full_kernel(k: f64, rr: f64) -> C64 {
    let kr = k * rr;
    C64::new(kr.cos(), -kr.sin()) / (4.0 * PI * rr)
}

/// Inner integrals `∫ g dS'` and `∫ g r' dS'` over a source triangle.
fn inner_l(
    k: f64,
    obs: Vec3,
    tri: &[Vec3; 3],
    rule: TriRule,
    extract_static: bool,
) -> (C64, CVec3) {
    if extract_static {
        let s = static_integrals(obs, tri);
        let mut i0 = C64::new(s.inv_r / (4.0 * PI), 0.0);
        let mut iv = CVec3::from_real((s.inv_r_vec + s.p0 * s.inv_r) * (1.0 / (4.0 * PI)));
        let (r0, rv) = tri_quad(
            &mut |rp: Vec3| {
                let g = smooth_kernel(k, (obs - rp).norm());
                (g, CVec3::from_real(rp).scale(g))
            },
            tri,
            rule,
        );
        i0 += r0;
        iv += rv;
        (i0, iv)
    } else {
        tri_quad(
            &mut |rp: Vec3| {
                let g = full_kernel(k, (obs - rp).norm());
                (g, CVec3::from_real(rp).scale(g))
            },
            tri,
            rule,
        )
    }
}

/// `∫ ∇_r g (r − r') dS'` over a source triangle — the j-independent part of
/// the inner `K` integral (the source basis enters through a cross product
/// outside the integral).
fn inner_k(k: f64, obs: Vec3, tri: &[Vec3; 3], rule: TriRule, extract_static: bool) -> CVec3 {
    if extract_static {
        // static part −(r−r')/(4πR³) = ∇_r(1/4πR), analytic; the remainder
        // −[(1+jkR)e^{−jkR} − 1]/(4πR³)·(r−r') is bounded (~k²/8π near R = 0)
        let mut out = CVec3::from_real(static_grad(obs, tri) * (1.0 / (4.0 * PI)));
        out += tri_quad(
            &mut |rp: Vec3| {
                let d = obs - rp;
                let rr = d.norm();
                let kr = k * rr;
                let w = if kr < 1e-3 {
                    // (1+jkR)e^{−jkR} − 1 = k²R²/2 − jk³R³/3 + O((kR)⁴)
                    -C64::new(k * k / (2.0 * rr), -k * k * k / 3.0) / (4.0 * PI)
                } else {
                    let phase = C64::new(kr.cos(), -kr.sin());
                    -(phase * C64::new(1.0, kr) - 1.0) / (4.0 * PI * rr * rr * rr)
                };
                CVec3::from_real(d).scale(w)
            },
            tri,
            TRI_7,
        );
        out
    } else {
        tri_quad(
            &mut |rp: Vec3| {
                let d = obs - rp;
                let rr = d.norm();
                let kr = k * rr;
                let phase = C64::new(kr.cos(), -kr.sin());
                let w = -phase * C64::new(1.0, kr) / (4.0 * PI * rr * rr * rr);
                CVec3::from_real(d).scale(w)
            },
            tri,
            rule,
        )
    }
}

/// Per-pair `K` contributions for one triangle pair (each triangle carries at
/// most three bases), so the outer observation integral can adapt on the full
/// block at once.
#[derive(Clone, Copy)]
struct PairBlock([C64; 9]);

impl crate::quadrature::QuadValue for PairBlock {
    const ZERO: Self = PairBlock([C64::new(0.0, 0.0); 9]);
    fn add(self, o: Self) -> Self {
        let mut out = self.0;
        for (a, b) in out.iter_mut().zip(o.0) {
            *a += b;
        }
        PairBlock(out)
    }
    fn scale(self, s: f64) -> Self {
        let mut out = self.0;
        for a in &mut out {
            *a *= s;
        }
        PairBlock(out)
    }
    fn magnitude(self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn tri_diameter(tri: &[Vec3; 3]) -> f64 {
    (tri[1] - tri[0])
        .norm()
        .max((tri[2] - tri[1]).norm())
        .max((tri[0] - tri[2]).norm())
}

fn coplanar(c1: Vec3, n1: Vec3, c2: Vec3, n2: Vec3, scale: f64) -> bool {
    n1.cross(n2).norm() < 1e-10 && (c2 - c1).dot(n1).abs() < 1e-10 * scale
}

/// Assemble `L`, the principal-value `K` block and the port Gram `D` at
/// wavenumber `k`. Deterministic for a fixed mesh regardless of thread count.
pub fn assemble_operators(
    mesh: &TriangleMesh,
    rwg: &RwgBasisSet,
    k: f64,
) -> Result<OperatorBlocks> {
    if k <= 0.0 {
        return Err(Error::argument(format!("wavenumber must be positive (got {k})")));
    }
    let n = rwg.len();
    let nm = rwg.magnetic_index.len();
    let nt = mesh.triangles.len();
    let table = triangle_basis_table(mesh, rwg);

    // Magnetic column position of each basis id (usize::MAX when not magnetic).
    let mut mag_col = vec![usize::MAX; n];
    for (c, &i) in rwg.magnetic_index.iter().enumerate() {
        mag_col[i] = c;
    }

    let tris: Vec<[Vec3; 3]> = (0..nt).map(|t| mesh.tri_vertices(t)).collect();
    let cents: Vec<Vec3> = (0..nt).map(|t| mesh.tri_centroid(t)).collect();
    let norms: Vec<Vec3> = (0..nt).map(|t| mesh.tri_normal(t)).collect();
    let diams: Vec<f64> = tris.iter().map(tri_diameter).collect();
    let areas: Vec<f64> = (0..nt).map(|t| mesh.tri_area(t)).collect();
    let is_port: Vec<bool> = mesh
        .regions
        .iter()
        .map(|r| matches!(r, RegionTag::Port(_)))
        .collect();
    let (_, mesh_radius) = mesh.bounding_sphere();

    // One contribution list per observation triangle; folding them in index
    // order keeps the floating-point result independent of scheduling.
    type Contrib = (Vec<(usize, usize, C64)>, Vec<(usize, usize, C64)>);
    let per_obs: Vec<Contrib> = (0..nt)
        .into_par_iter()
        .map(|to| {
            let mut l_terms = Vec::new();
            let mut k_terms = Vec::new();
            let obs_basis = &table[to];
            for ts in 0..nt {
                let src_basis = &table[ts];
                if src_basis.is_empty() || obs_basis.is_empty() {
                    continue;
                }
                let dmax = diams[to].max(diams[ts]);
                let dc = (cents[to] - cents[ts]).norm();
                let (obs_rule, src_rule, extract) = if dc > 4.0 * dmax {
                    (TRI_3, TRI_3, false)
                } else if dc > 1.5 * dmax {
                    (TRI_7, TRI_7, false)
                } else {
                    (TRI_7, TRI_7, true)
                };

                // L block: loop observation points, reuse the inner integrals
                // for every basis pair on the triangle pair.
                for &(w, lam) in obs_rule {
                    let r = bary_point(&tris[to], lam);
                    let wo = w * areas[to];
                    let (i0, iv) = inner_l(k, r, &tris[ts], src_rule, extract);
                    for &(bi, ci, vi) in obs_basis {
                        let psi_i = (r - vi) * ci;
                        for &(bj, cj, vj) in src_basis {
                            let vector = (iv - CVec3::from_real(vj).scale(i0)).dot_real(psi_i) * cj;
                            let scalar = i0 * (4.0 * ci * cj / (k * k));
                            l_terms.push((bi, bj, (vector - scalar) * wo));
                        }
                    }
                }

                // K block: magnetic sources only, and the kernel vanishes for
                // coplanar pairs (in-plane triple product) and on the shared
                // triangle (principal value of an odd kernel).
                let src_mag: Vec<_> = src_basis
                    .iter()
                    .copied()
                    .filter(|&(bj, _, _)| mag_col[bj] != usize::MAX)
                    .collect();
                if src_mag.is_empty()
                    || !is_port[ts]
                    || to == ts
                    || coplanar(cents[to], norms[to], cents[ts], norms[ts], mesh_radius)
                {
                    continue;
                }
                if dc <= 2.0 * dmax {
                    // Near pair: the inner integral grows like log of the
                    // distance to the source rim, so both levels adapt — a
                    // fixed observation rule stalls on thin rim triangles.
                    let block = tri_quad_adaptive(
                        &mut |r: Vec3| {
                            let iw = inner_k(k, r, &tris[ts], src_rule, true);
                            let mut vals = [C64::default(); 9];
                            for (oi, &(_, ci, vi)) in obs_basis.iter().enumerate() {
                                for (sj, &(_, cj, vj)) in src_mag.iter().enumerate() {
                                    vals[3 * oi + sj] =
                                        iw.cross_real(r - vj).dot_real(r - vi) * (ci * cj);
                                }
                            }
                            PairBlock(vals)
                        },
                        &tris[to],
                        1e-6,
                        8,
                    );
                    for (oi, &(bi, _, _)) in obs_basis.iter().enumerate() {
                        for (sj, &(bj, _, _)) in src_mag.iter().enumerate() {
                            k_terms.push((bi, mag_col[bj], block.0[3 * oi + sj]));
                        }
                    }
                } else {
                    let k_obs_rule = if dc > 4.0 * dmax { TRI_3 } else { TRI_7 };
                    for &(w, lam) in k_obs_rule {
                        let r = bary_point(&tris[to], lam);
                        let wo = w * areas[to];
                        let iw = inner_k(k, r, &tris[ts], src_rule, false);
                        for &(bi, ci, vi) in obs_basis {
                            for &(bj, cj, vj) in &src_mag {
                                let val = iw.cross_real(r - vj).dot_real(r - vi) * (wo * ci * cj);
                                k_terms.push((bi, mag_col[bj], val));
                            }
                        }
                    }
                }
            }
            (l_terms, k_terms)
        })
        .collect();

    let mut l_op = Mat::<C64>::zeros(n, n);
    let mut k_pv = Mat::<C64>::zeros(n, nm);
    for (l_terms, k_terms) in &per_obs {
        for &(i, j, v) in l_terms {
            l_op[(i, j)] += v;
        }
        for &(i, j, v) in k_terms {
            k_pv[(i, j)] += v;
        }
    }

    // Galerkin symmetry holds analytically; enforce it exactly so downstream
    // transposes are free of quadrature asymmetry.
    let lt = l_op.transpose().to_owned();
    l_op = Mat::from_fn(n, n, |i, j| 0.5 * (l_op[(i, j)] + lt[(i, j)]));

    // Port identity Gram, degree-2 integrand: a 3-point rule is exact.
    let mut d_gram = Mat::<f64>::zeros(n, nm);
    for t in 0..nt {
        if !is_port[t] {
            continue;
        }
        let nh = norms[t];
        for &(bi, ci, vi) in &table[t] {
            for &(bj, cj, vj) in &table[t] {
                if mag_col[bj] == usize::MAX {
                    continue;
                }
                let val = tri_quad(
                    &mut |r: Vec3| {
                        let gi = ((r - vi) * ci).dot(nh.cross((r - vj) * cj));
                        (C64::new(gi, 0.0), CVec3::ZERO)
                    },
                    &tris[t],
                    TRI_3,
                )
                .0
                .re;
                d_gram[(bi, mag_col[bj])] += val;
            }
        }
    }

    Ok(OperatorBlocks { k, l_op, k_pv, d_gram })
}
