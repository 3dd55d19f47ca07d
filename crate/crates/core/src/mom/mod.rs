//! Method-of-moments systems for a waveguide-fed PEC antenna.
//!
//! Two equivalent impedance formulations are provided. The magnetic type
//! keeps an equivalent magnetic current on the port aperture and closes the
//! system with the negative port mode Gram `G^M`; the electric type shorts
//! the aperture and adds the positive Gram `G^E` on the electric block. Both
//! share the operator blocks of [`assembly`]; the unknown layout is
//! `x = [I^e; jI^m]` (electric RWG coefficients first, then scaled magnetic
//! ones).
//!
//! Projection operators map a surface current onto the outgoing spherical
//! wave spectrum (`P`) and port mode amplitudes (`Q̃`), providing both
//! excitation vectors and post-solution recovery of `w` (port outgoing) and
//! `h` (radiated spherical coefficients).

mod assembly;

#[cfg(test)]
mod tests;

use std::sync::OnceLock;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use rayon::prelude::*;

pub use assembly::{assemble_operators, OperatorBlocks};

use crate::mesh::{RegionTag, RwgBasisSet, TriangleMesh};
use crate::quadrature::{bary_point, TRI_7};
use crate::sphwave::{eval_all, SphericalBasis, WaveKind};
use crate::waveguide::{mode_field_global, ModeSet, WaveguideMode, WaveguideSpec};
use crate::{Error, Result, Vec3, C64, ETA0, J};

/// Which boundary condition closes the port aperture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Aperture left open; equivalent magnetic current unknowns on `P`.
    Magnetic,
    /// Aperture shorted; the port Gram acts on the electric unknowns.
    Electric,
}

/// One fed port: mesh region id, guide geometry and the retained mode set.
#[derive(Debug, Clone)]
pub struct PortDef {
    pub id: u32,
    pub spec: WaveguideSpec,
    pub modes: ModeSet,
}

/// A row of the port-side operators: which port and guide mode it belongs to.
#[derive(Debug, Clone)]
pub struct PortModeRef {
    pub port: u32,
    pub mode: WaveguideMode,
}

/// Port mode projection blocks `Q̃^M` (against magnetic unknowns) and `Q̃^E`
/// (against electric unknowns). Rows run over ports in ascending id, modes in
/// their enumeration order.
#[derive(Debug, Clone)]
pub struct PortCoupling {
    pub q_m: Mat<C64>,
    pub q_e: Mat<C64>,
    pub modes: Vec<PortModeRef>,
}

impl PortCoupling {
    /// Total number of retained guide modes across all ports.
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }
}

/// Build the port coupling blocks. `ports` must contain exactly one entry per
/// port region of the mesh, sorted by ascending id.
pub fn port_coupling(
    mesh: &TriangleMesh,
    rwg: &RwgBasisSet,
    ports: &[PortDef],
) -> Result<PortCoupling> {
    let mesh_ports = mesh.port_ids();
    let def_ids: Vec<u32> = ports.iter().map(|p| p.id).collect();
    if def_ids != mesh_ports {
        return Err(Error::Config(format!(
            "port definitions {def_ids:?} do not match mesh port regions {mesh_ports:?} \
             (one definition per port, ascending id)"
        )));
    }

    let n = rwg.len();
    let table = assembly::triangle_basis_table(mesh, rwg);
    let mut col_e = vec![usize::MAX; n];
    for (c, &i) in rwg.electric_index.iter().enumerate() {
        col_e[i] = c;
    }
    let mut col_m = vec![usize::MAX; n];
    for (c, &i) in rwg.magnetic_index.iter().enumerate() {
        col_m[i] = c;
    }

    let m_total: usize = ports.iter().map(|p| p.modes.len()).sum();
    let mut q_m = Mat::<C64>::zeros(m_total, rwg.magnetic_index.len());
    let mut q_e = Mat::<C64>::zeros(m_total, rwg.electric_index.len());
    let mut modes = Vec::with_capacity(m_total);

    let mut row0 = 0usize;
    for def in ports {
        let nhat = def.spec.frame.normal;
        let port_tris: Vec<usize> = (0..mesh.triangles.len())
            .filter(|&t| mesh.regions[t] == RegionTag::Port(def.id))
            .collect();
        let m_p = def.modes.len();

        // Unweighted overlaps ⟨e_α, ψ⟩ and ⟨n̂×e_α, ψ⟩ over the discrete port,
        // plus the modal Gram on the same surface.
        let mut u_mat = Mat::<f64>::zeros(m_p, rwg.electric_index.len());
        let mut w_mat = Mat::<f64>::zeros(m_p, rwg.magnetic_index.len());
        let mut gram = Mat::<f64>::zeros(m_p, m_p);
        for &t in &port_tris {
            let tri = mesh.tri_vertices(t);
            let area = mesh.tri_area(t);
            for &(w, lam) in TRI_7 {
                let r = bary_point(&tri, lam);
                let wv = w * area;
                let fields: Vec<Vec3> = def
                    .modes
                    .modes
                    .iter()
                    .map(|mode| mode_field_global(&def.spec, mode, r))
                    .collect::<Result<_>>()?;
                for (a, e) in fields.iter().enumerate() {
                    let ne = nhat.cross(*e);
                    for &(bi, ci, vi) in &table[t] {
                        let psi = (r - vi) * ci;
                        u_mat[(a, col_e[bi])] += e.dot(psi) * wv;
                        if col_m[bi] != usize::MAX {
                            w_mat[(a, col_m[bi])] += ne.dot(psi) * wv;
                        }
                    }
                    for (b, e2) in fields.iter().enumerate() {
                        gram[(a, b)] += e.dot(*e2) * wv;
                    }
                }
            }
        }

        // A faceted port surface breaks analytic modal orthonormality at
        // O(sagitta²); the wave-impedance weights of strongly evanescent
        // modes amplify any spurious overlap with the fundamental into O(1)
        // errors. Re-orthonormalize on the discrete surface in cutoff order
        // (triangular, Gram–Schmidt style): each mode is purged of overlaps
        // with *lower* modes only, so the fundamental keeps its exact
        // analytic profile and wave impedance.
        let c = gram_orthonormalizer(&gram)?;
        let u_mat = &c * &u_mat;
        let w_mat = &c * &w_mat;

        for (a, mode) in def.modes.modes.iter().enumerate() {
            let sqrt_eta = mode.eta.sqrt();
            let ce = -sqrt_eta;
            let cm = -J / sqrt_eta;
            for col in 0..u_mat.ncols() {
                q_e[(row0 + a, col)] = ce * u_mat[(a, col)];
            }
            for col in 0..w_mat.ncols() {
                q_m[(row0 + a, col)] = cm * w_mat[(a, col)];
            }
            modes.push(PortModeRef { port: def.id, mode: mode.clone() });
        }
        row0 += m_p;
    }
    Ok(PortCoupling { q_m, q_e, modes })
}

/// Lower-triangular `C = L⁻¹` with `G = L·Lᵗ` (Cholesky), so that the rows of
/// `C·U` are orthonormal with respect to the Gram `G`, each row modified only
/// by components of the rows before it.
fn gram_orthonormalizer(gram: &Mat<f64>) -> Result<Mat<f64>> {
    let m = gram.nrows();
    let mut l = Mat::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let mut acc = gram[(i, j)];
            for p in 0..j {
                acc -= l[(i, p)] * l[(j, p)];
            }
            if i == j {
                if acc <= 1e-10 {
                    return Err(Error::Solver(format!(
                        "port modal Gram is numerically singular (pivot {acc:.3e}); \
                         the port mesh cannot resolve the requested mode set"
                    )));
                }
                l[(i, i)] = acc.sqrt();
            } else {
                l[(i, j)] = acc / l[(j, j)];
            }
        }
    }
    // forward-substitute for the inverse, column by column
    let mut c = Mat::<f64>::zeros(m, m);
    for j in 0..m {
        for i in j..m {
            let mut acc = if i == j { 1.0 } else { 0.0 };
            for p in j..i {
                acc -= l[(i, p)] * c[(p, j)];
            }
            c[(i, j)] = acc / l[(i, i)];
        }
    }
    Ok(c)
}

/// Regular-wave projection blocks `P^e` (`J×N`) and `P^m` (`J×Nm`); the full
/// operator is `P = [P^e, −P^m]` acting on the layout `[I^e; jI^m]`.
#[derive(Debug, Clone)]
pub struct ProjectionOperators {
    pub basis: SphericalBasis,
    pub p_e: Mat<C64>,
    pub p_m: Mat<C64>,
}

impl ProjectionOperators {
    /// Radiated spherical coefficients of a solved current: `h = −P x`.
    pub fn outgoing_spherical(&self, x: &[C64]) -> Result<Vec<C64>> {
        let (n_e, n_m) = (self.p_e.ncols(), self.p_m.ncols());
        if x.len() != n_e + n_m {
            return Err(Error::argument(format!(
                "solution length {} does not match layout {}",
                x.len(),
                n_e + n_m
            )));
        }
        let jdim = self.basis.len();
        let mut h = vec![C64::default(); jdim];
        for (alpha, h_a) in h.iter_mut().enumerate() {
            let mut acc = C64::default();
            for i in 0..n_e {
                acc += self.p_e[(alpha, i)] * x[i];
            }
            for m in 0..n_m {
                acc -= self.p_m[(alpha, m)] * x[n_e + m];
            }
            *h_a = -acc;
        }
        Ok(h)
    }
}

/// Project the RWG basis onto regular spherical waves.
pub fn projection_operators(
    mesh: &TriangleMesh,
    rwg: &RwgBasisSet,
    basis: &SphericalBasis,
) -> Result<ProjectionOperators> {
    let n = rwg.len();
    let table = assembly::triangle_basis_table(mesh, rwg);
    let mut col_e = vec![usize::MAX; n];
    for (c, &i) in rwg.electric_index.iter().enumerate() {
        col_e[i] = c;
    }
    let mut col_m = vec![usize::MAX; n];
    for (c, &i) in rwg.magnetic_index.iter().enumerate() {
        col_m[i] = c;
    }
    let jdim = basis.len();
    let k = basis.k;
    let ce = k * ETA0.sqrt();
    let cm = k / ETA0.sqrt();

    // Contributions per triangle, folded in triangle order for determinism.
    let per_tri: Result<Vec<(Vec<(usize, usize, C64)>, Vec<(usize, usize, C64)>)>> = (0..mesh
        .triangles
        .len())
        .into_par_iter()
        .map(|t| {
            let mut e_terms = Vec::new();
            let mut m_terms = Vec::new();
            let tri = mesh.tri_vertices(t);
            let area = mesh.tri_area(t);
            for &(w, lam) in TRI_7 {
                let r = bary_point(&tri, lam);
                let u = eval_all(basis, WaveKind::Regular, r)?;
                for &(bi, ci, vi) in &table[t] {
                    let psi = (r - vi) * ci;
                    let wv = w * area;
                    for alpha in 0..jdim {
                        let proj = u[alpha].dot_real(psi) * wv;
                        e_terms.push((alpha, col_e[bi], proj * ce));
                        if col_m[bi] != usize::MAX {
                            m_terms.push((
                                alpha,
                                col_m[bi],
                                u[basis.bar(alpha)].dot_real(psi) * wv * cm,
                            ));
                        }
                    }
                }
            }
            Ok((e_terms, m_terms))
        })
        .collect();
    let per_tri = per_tri?;

    let mut p_e = Mat::<C64>::zeros(jdim, rwg.electric_index.len());
    let mut p_m = Mat::<C64>::zeros(jdim, rwg.magnetic_index.len());
    for (e_terms, m_terms) in &per_tri {
        for &(a, i, v) in e_terms {
            p_e[(a, i)] += v;
        }
        for &(a, i, v) in m_terms {
            p_m[(a, i)] += v;
        }
    }
    Ok(ProjectionOperators { basis: basis.clone(), p_e, p_m })
}

/// A fully assembled impedance system with a cached LU factorization.
pub struct ImpedanceSystem {
    pub formulation: Formulation,
    pub k: f64,
    /// Electric unknown count (all RWG functions).
    pub n_e: usize,
    /// Magnetic unknown count (port-interior RWG functions).
    pub n_m: usize,
    pub z: Mat<C64>,
    lu: OnceLock<PartialPivLu<C64>>,
}

impl ImpedanceSystem {
    pub fn dim(&self) -> usize {
        self.n_e + self.n_m
    }

    fn lu(&self) -> &PartialPivLu<C64> {
        self.lu.get_or_init(|| self.z.as_ref().partial_piv_lu())
    }

    /// Solve `Z x = rhs`. Fails if the normalized residual
    /// `‖Zx − b‖ / (‖Z‖_F ‖x‖ + ‖b‖)` exceeds `1e-10` (singular or
    /// numerically unusable system).
    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::argument(format!(
                "rhs length {} does not match system dimension {n}",
                rhs.len()
            )));
        }
        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let x = self.lu().solve(&b);
        let r = &self.z * &x - &b;
        let denom = self.z.norm_l2() * x.norm_l2() + b.norm_l2();
        let res = if denom > 0.0 { r.norm_l2() / denom } else { 0.0 };
        if !(res <= 1e-10) {
            return Err(Error::Solver(format!(
                "linear solve failed: normalized residual {res:.3e} exceeds 1e-10"
            )));
        }
        Ok((0..n).map(|i| x[(i, 0)]).collect())
    }

    /// Solve `Z X = B` for a multi-column right-hand side, with the same
    /// residual check as [`ImpedanceSystem::solve`].
    pub fn solve_mat(&self, b: &Mat<C64>) -> Result<Mat<C64>> {
        let n = self.dim();
        if b.nrows() != n {
            return Err(Error::argument(format!(
                "rhs row count {} does not match system dimension {n}",
                b.nrows()
            )));
        }
        let x = self.lu().solve(b);
        let r = &self.z * &x - b;
        let denom = self.z.norm_l2() * x.norm_l2() + b.norm_l2();
        let res = if denom > 0.0 { r.norm_l2() / denom } else { 0.0 };
        if !(res <= 1e-10) {
            return Err(Error::Solver(format!(
                "linear solve failed: normalized residual {res:.3e} exceeds 1e-10"
            )));
        }
        Ok(x)
    }
}

/// Build the impedance matrix of the requested formulation from the shared
/// operator blocks and the port coupling.
pub fn assemble_system(
    blocks: &OperatorBlocks,
    coupling: &PortCoupling,
    rwg: &RwgBasisSet,
    formulation: Formulation,
) -> Result<ImpedanceSystem> {
    let n_e = rwg.electric_index.len();
    let n_m = rwg.magnetic_index.len();
    if blocks.l_op.nrows() != n_e || blocks.k_pv.ncols() != n_m {
        return Err(Error::argument(
            "operator block dimensions do not match the basis set",
        ));
    }
    if coupling.q_m.ncols() != n_m || coupling.q_e.ncols() != n_e {
        return Err(Error::argument(
            "port coupling dimensions do not match the basis set",
        ));
    }

    // Row position (in electric enumeration) of each magnetic unknown, for
    // the L sub-block on the magnetic diagonal.
    let mut col_e = vec![usize::MAX; rwg.len()];
    for (c, &i) in rwg.electric_index.iter().enumerate() {
        col_e[i] = c;
    }
    let mag_rows: Vec<usize> = rwg.magnetic_index.iter().map(|&i| col_e[i]).collect();

    let k = blocks.k;
    let dim = n_e + n_m;
    let mut z = Mat::<C64>::zeros(dim, dim);

    let (k_off, gram): (Mat<C64>, Mat<C64>) = match formulation {
        Formulation::Magnetic => {
            let qt = coupling.q_m.transpose().to_owned();
            let g = &qt * &coupling.q_m;
            (blocks.k_plus(), Mat::from_fn(n_m, n_m, |i, j| -g[(i, j)]))
        }
        Formulation::Electric => {
            let qt = coupling.q_e.transpose().to_owned();
            (blocks.k_minus(), &qt * &coupling.q_e)
        }
    };

    for i in 0..n_e {
        for jx in 0..n_e {
            z[(i, jx)] = J * k * ETA0 * blocks.l_op[(i, jx)];
        }
        for m in 0..n_m {
            let v = -J * k_off[(i, m)];
            z[(i, n_e + m)] = v;
            z[(n_e + m, i)] = v;
        }
    }
    for mi in 0..n_m {
        for mj in 0..n_m {
            z[(n_e + mi, n_e + mj)] = J * (k / ETA0) * blocks.l_op[(mag_rows[mi], mag_rows[mj])];
        }
    }
    match formulation {
        Formulation::Magnetic => {
            for mi in 0..n_m {
                for mj in 0..n_m {
                    z[(n_e + mi, n_e + mj)] += gram[(mi, mj)];
                }
            }
        }
        Formulation::Electric => {
            for i in 0..n_e {
                for jx in 0..n_e {
                    z[(i, jx)] += gram[(i, jx)];
                }
            }
        }
    }

    Ok(ImpedanceSystem { formulation, k, n_e, n_m, z, lu: OnceLock::new() })
}

/// Excitation vector for incident guide modes of amplitude `v` (one entry per
/// retained mode, port ordering of the coupling): `V = 2 Q̃ᵗ v` placed on the
/// block the formulation couples to.
pub fn excitation_from_ports(
    sys: &ImpedanceSystem,
    coupling: &PortCoupling,
    v: &[C64],
) -> Result<Vec<C64>> {
    let m = coupling.n_modes();
    if v.len() != m {
        return Err(Error::argument(format!(
            "mode amplitude length {} does not match mode count {m}",
            v.len()
        )));
    }
    let mut rhs = vec![C64::default(); sys.dim()];
    match sys.formulation {
        Formulation::Magnetic => {
            for col in 0..sys.n_m {
                let mut acc = C64::default();
                for a in 0..m {
                    acc += coupling.q_m[(a, col)] * v[a];
                }
                rhs[sys.n_e + col] = 2.0 * acc;
            }
        }
        Formulation::Electric => {
            for col in 0..sys.n_e {
                let mut acc = C64::default();
                for a in 0..m {
                    acc += coupling.q_e[(a, col)] * v[a];
                }
                rhs[col] = 2.0 * acc;
            }
        }
    }
    Ok(rhs)
}

/// Excitation vector for an incoming spherical spectrum `a`:
/// `V = 2 Pᵗ a` with `P = [P^e, −P^m]`.
pub fn excitation_from_incident(proj: &ProjectionOperators, a: &[C64]) -> Result<Vec<C64>> {
    let jdim = proj.basis.len();
    if a.len() != jdim {
        return Err(Error::argument(format!(
            "incoming coefficient length {} does not match J = {jdim}",
            a.len()
        )));
    }
    let (n_e, n_m) = (proj.p_e.ncols(), proj.p_m.ncols());
    let mut rhs = vec![C64::default(); n_e + n_m];
    for i in 0..n_e {
        let mut acc = C64::default();
        for alpha in 0..jdim {
            acc += proj.p_e[(alpha, i)] * a[alpha];
        }
        rhs[i] = 2.0 * acc;
    }
    for mcol in 0..n_m {
        let mut acc = C64::default();
        for alpha in 0..jdim {
            acc += proj.p_m[(alpha, mcol)] * a[alpha];
        }
        rhs[n_e + mcol] = -2.0 * acc;
    }
    Ok(rhs)
}

/// Outgoing guide mode amplitudes after a solve.
///
/// Magnetic type: `w = −v − Q̃^M x_m`; electric type: `w = v − Q̃^E x_e`.
pub fn port_outgoing(
    sys: &ImpedanceSystem,
    coupling: &PortCoupling,
    x: &[C64],
    v: &[C64],
) -> Result<Vec<C64>> {
    let m = coupling.n_modes();
    if x.len() != sys.dim() || v.len() != m {
        return Err(Error::argument(
            "solution / amplitude lengths do not match the system",
        ));
    }
    let mut w = vec![C64::default(); m];
    match sys.formulation {
        Formulation::Magnetic => {
            for (a, w_a) in w.iter_mut().enumerate() {
                let mut acc = C64::default();
                for col in 0..sys.n_m {
                    acc += coupling.q_m[(a, col)] * x[sys.n_e + col];
                }
                *w_a = -v[a] - acc;
            }
        }
        Formulation::Electric => {
            for (a, w_a) in w.iter_mut().enumerate() {
                let mut acc = C64::default();
                for col in 0..sys.n_e {
                    acc += coupling.q_e[(a, col)] * x[col];
                }
                *w_a = v[a] - acc;
            }
        }
    }
    Ok(w)
}
