//! Array S-parameter composition from per-element GSMs.
//!
//! Elements couple only through their radiated fields: the outgoing spherical
//! spectrum `ĥ` of every element is translated to an incoming spectrum at
//! every other element by the operator blocks `Ĝ_pq = 𝒴(k·d_pq)/2`, with
//! `d_pq` pointing from element `q`'s center to element `p`'s center and
//! `Ĝ_pp = 0`. The self-consistent field equations
//!
//! ```text
//!   Γ̂·v + R̂·Ĝ·ĥ = w
//!   T̂·v + (Ŝ−1)·Ĝ·ĥ = ĥ
//! ```
//!
//! are solved either directly (dense factorization) or by the Neumann
//! iteration `ĥ(l+1) = (Ŝ−1)·Ĝ·ĥ(l)` started from `ĥ(0) = T̂·v`.
//!
//! Analytic translation requires disjoint enclosing spheres; overlap is a
//! hard layout error. Compressed element GSMs participate through their
//! factored form without densification in the iterative path.


use std::collections::HashMap;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::gsm::{CompressedGsm, Gsm};
use crate::mom::PortModeRef;
use crate::sphwave::{translation_operator, SphericalBasis};
use crate::{Error, Result, Vec3, C64};

/// One array element's scattering description, full or compressed.
#[derive(Debug, Clone)]
pub enum ElementGsm {
    Full(Gsm),
    Compressed(CompressedGsm),
}

impl ElementGsm {
    pub fn k(&self) -> f64 {
        match self {
            ElementGsm::Full(g) => g.k,
            ElementGsm::Compressed(c) => c.k,
        }
    }

    pub fn l_max(&self) -> usize {
        match self {
            ElementGsm::Full(g) => g.spherical.l_max,
            ElementGsm::Compressed(c) => c.l_max,
        }
    }

    pub fn m_p(&self) -> usize {
        match self {
            ElementGsm::Full(g) => g.n_port_modes(),
            ElementGsm::Compressed(c) => c.m_p,
        }
    }

    pub fn jdim(&self) -> usize {
        match self {
            ElementGsm::Full(g) => g.spherical.len(),
            ElementGsm::Compressed(c) => c.dim - c.m_p,
        }
    }

    pub fn port_modes(&self) -> &[PortModeRef] {
        match self {
            ElementGsm::Full(g) => &g.port_modes,
            ElementGsm::Compressed(c) => &c.port_modes,
        }
    }

    /// `2·F[rows]·diag(t)·G[cols]ᴴ` of a compressed element.
    fn factored_block(
        c: &CompressedGsm,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> Mat<C64> {
        let right = c.right.as_ref().unwrap_or(&c.left);
        let n = c.retained();
        Mat::from_fn(rows.len(), cols.len(), |i, j| {
            let mut acc = C64::ZERO;
            for r in 0..n {
                acc += c.left[(rows.start + i, r)]
                    * c.values[r]
                    * right[(cols.start + j, r)].conj();
            }
            2.0 * acc
        })
    }

    /// Port reflection block `Γ` (`m_p × m_p`).
    pub fn gamma(&self) -> Mat<C64> {
        match self {
            ElementGsm::Full(g) => g.gamma.clone(),
            ElementGsm::Compressed(c) => {
                let mut b = Self::factored_block(c, 0..c.m_p, 0..c.m_p);
                for i in 0..c.m_p {
                    b[(i, i)] += C64::ONE;
                }
                b
            }
        }
    }

    /// Receive block `R` (`m_p × J`).
    pub fn receive(&self) -> Mat<C64> {
        match self {
            ElementGsm::Full(g) => g.r.clone(),
            ElementGsm::Compressed(c) => Self::factored_block(c, 0..c.m_p, c.m_p..c.dim),
        }
    }

    /// Transmit block `T` (`J × m_p`).
    pub fn transmit(&self) -> Mat<C64> {
        match self {
            ElementGsm::Full(g) => g.t.clone(),
            ElementGsm::Compressed(c) => Self::factored_block(c, c.m_p..c.dim, 0..c.m_p),
        }
    }

    /// Dense `S − 1` (`J × J`), for the direct path.
    fn s_minus_one(&self) -> Mat<C64> {
        match self {
            ElementGsm::Full(g) => {
                let j = g.spherical.len();
                Mat::from_fn(j, j, |i, jx| {
                    g.s[(i, jx)] - if i == jx { C64::ONE } else { C64::ZERO }
                })
            }
            ElementGsm::Compressed(c) => Self::factored_block(c, c.m_p..c.dim, c.m_p..c.dim),
        }
    }

    /// `(S − 1)·a` without densifying a compressed element.
    fn apply_s_minus_one(&self, a: &[C64]) -> Vec<C64> {
        match self {
            ElementGsm::Full(g) => {
                let j = g.spherical.len();
                let mut out = vec![C64::ZERO; j];
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = -a[i];
                    for (jx, &a_j) in a.iter().enumerate() {
                        acc += g.s[(i, jx)] * a_j;
                    }
                    *o = acc;
                }
                out
            }
            ElementGsm::Compressed(c) => {
                let right = c.right.as_ref().unwrap_or(&c.left);
                let n = c.retained();
                let mut inner = vec![C64::ZERO; n];
                for (r, y) in inner.iter_mut().enumerate() {
                    let mut acc = C64::ZERO;
                    for (jx, &a_j) in a.iter().enumerate() {
                        acc += right[(c.m_p + jx, r)].conj() * a_j;
                    }
                    *y = c.values[r] * acc;
                }
                let jdim = c.dim - c.m_p;
                let mut out = vec![C64::ZERO; jdim];
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = C64::ZERO;
                    for (r, &y) in inner.iter().enumerate() {
                        acc += c.left[(c.m_p + i, r)] * y;
                    }
                    *o = 2.0 * acc;
                }
                out
            }
        }
    }
}

/// One placed element: shared scattering description, center, enclosing
/// sphere radius.
#[derive(Debug, Clone)]
pub struct ArrayElement {
    pub gsm: Arc<ElementGsm>,
    pub center: Vec3,
    pub r_min: f64,
}

/// Element placement list.
#[derive(Debug, Clone)]
pub struct ArrayLayout {
    pub elements: Vec<ArrayElement>,
}

impl ArrayLayout {
    /// Frequency consistency and pairwise sphere separation.
    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::Layout("layout contains no elements".into()));
        }
        let k0 = self.elements[0].gsm.k();
        for (p, e) in self.elements.iter().enumerate() {
            if !(e.r_min > 0.0) {
                return Err(Error::Layout(format!(
                    "element {p} has non-positive enclosing radius {}",
                    e.r_min
                )));
            }
            if (e.gsm.k() - k0).abs() > 1e-9 * k0.abs() {
                return Err(Error::Layout(format!(
                    "element {p} wavenumber {} differs from element 0 ({k0})",
                    e.gsm.k()
                )));
            }
        }
        for p in 0..self.elements.len() {
            for q in (p + 1)..self.elements.len() {
                let d = (self.elements[p].center - self.elements[q].center).norm();
                let need = self.elements[p].r_min + self.elements[q].r_min;
                if d <= need {
                    return Err(Error::Layout(format!(
                        "enclosing spheres of elements {p} and {q} overlap: \
                         separation {d:.6e} m ≤ r_{p} + r_{q} = {need:.6e} m \
                         (analytic translation does not apply)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Block operators of a composed array at one frequency.
pub struct BlockSystem {
    pub k: f64,
    elements: Vec<Arc<ElementGsm>>,
    centers: Vec<Vec3>,
    /// Prefix offsets of element port-mode rows (length `n+1`).
    pub port_offsets: Vec<usize>,
    /// Prefix offsets of element spherical rows (length `n+1`).
    pub sph_offsets: Vec<usize>,
    /// Row-major `n×n` translation blocks, `None` on the diagonal.
    g: Vec<Option<Arc<Mat<C64>>>>,
}

/// Assemble the translation blocks and bundle the element operators.
///
/// Translation matrices are cached by displacement: repeated displacements
/// (regular lattices) are computed once, and the reverse displacement is
/// derived through the parity relation
/// `𝒢(−d)_{αβ} = (−1)^{l_α+l_β+τ_α+τ_β}·𝒢(d)_{αβ}`.
pub fn build_system(layout: &ArrayLayout) -> Result<BlockSystem> {
    layout.validate()?;
    let n = layout.elements.len();
    let k = layout.elements[0].gsm.k();
    let bases: Vec<SphericalBasis> = layout
        .elements
        .iter()
        .map(|e| SphericalBasis::new(k, e.gsm.l_max()))
        .collect::<Result<_>>()?;

    let mut port_offsets = vec![0usize];
    let mut sph_offsets = vec![0usize];
    for e in &layout.elements {
        port_offsets.push(port_offsets.last().unwrap() + e.gsm.m_p());
        sph_offsets.push(sph_offsets.last().unwrap() + e.gsm.jdim());
    }

    let mut cache: HashMap<(u64, u64, u64, usize, usize), Arc<Mat<C64>>> = HashMap::new();
    let key = |d: Vec3, lt: usize, ls: usize| {
        (d.x.to_bits(), d.y.to_bits(), d.z.to_bits(), lt, ls)
    };
    let mut g: Vec<Option<Arc<Mat<C64>>>> = vec![None; n * n];
    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            let d = layout.elements[p].center - layout.elements[q].center;
            let (lt, ls) = (bases[p].l_max, bases[q].l_max);
            let mat = if let Some(m) = cache.get(&key(d, lt, ls)) {
                m.clone()
            } else if let Some(m) = cache.get(&key(-d, lt, ls)) {
                let flipped = Arc::new(parity_flip(&bases[p], &bases[q], m));
                cache.insert(key(d, lt, ls), flipped.clone());
                flipped
            } else {
                let m = Arc::new(translation_operator(&bases[q], &bases[p], d)?.matrix);
                cache.insert(key(d, lt, ls), m.clone());
                m
            };
            g[p * n + q] = Some(mat);
        }
    }

    Ok(BlockSystem {
        k,
        elements: layout.elements.iter().map(|e| e.gsm.clone()).collect(),
        centers: layout.elements.iter().map(|e| e.center).collect(),
        port_offsets,
        sph_offsets,
        g,
    })
}

/// `𝒢(−d)` from `𝒢(d)` by the inversion parity of the wave functions: the
/// co-polarized (equal-τ) blocks flip as `(−1)^{l+l'}`, the cross-polarized
/// blocks carry one extra sign.
fn parity_flip(target: &SphericalBasis, source: &SphericalBasis, m: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let (ti, sj) = (&target.modes[i], &source.modes[j]);
        let s = (ti.l + sj.l + ti.tau as usize + sj.tau as usize) % 2;
        if s == 0 {
            m[(i, j)]
        } else {
            -m[(i, j)]
        }
    })
}

impl BlockSystem {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Total retained port modes across elements.
    pub fn n_ports(&self) -> usize {
        *self.port_offsets.last().unwrap()
    }

    /// Total spherical unknowns across elements.
    pub fn n_spherical(&self) -> usize {
        *self.sph_offsets.last().unwrap()
    }

    /// The shared element operator blocks, for identity checks.
    pub fn element(&self, p: usize) -> &Arc<ElementGsm> {
        &self.elements[p]
    }

    /// Element centers in placement order.
    pub fn centers(&self) -> &[Vec3] {
        &self.centers
    }

    /// Port labels across all elements (`element/port:mode`).
    pub fn port_labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.n_ports());
        for (p, e) in self.elements.iter().enumerate() {
            for m in e.port_modes() {
                out.push(format!("e{p}/{}:{}", m.port, m.mode.label));
            }
        }
        out
    }

    /// One translation block `Ĝ_pq` (`None` when `p == q`).
    pub fn translation(&self, p: usize, q: usize) -> Option<&Mat<C64>> {
        self.g[p * self.n_elements() + q].as_deref()
    }

    /// Re-place the elements, rebuilding only the translation blocks; the
    /// element operators are reused by reference.
    pub fn with_centers(&self, centers: &[Vec3], r_min: &[f64]) -> Result<BlockSystem> {
        if centers.len() != self.n_elements() || r_min.len() != self.n_elements() {
            return Err(Error::argument(
                "center / radius counts do not match the element count",
            ));
        }
        let layout = ArrayLayout {
            elements: self
                .elements
                .iter()
                .zip(centers.iter().zip(r_min))
                .map(|(gsm, (&center, &r))| ArrayElement { gsm: gsm.clone(), center, r_min: r })
                .collect(),
        };
        build_system(&layout)
    }

    /// `Ĝ·ĥ` blockwise.
    fn apply_g(&self, h: &[C64]) -> Vec<C64> {
        let n = self.n_elements();
        let mut out = vec![C64::ZERO; self.n_spherical()];
        for p in 0..n {
            let rp = self.sph_offsets[p]..self.sph_offsets[p + 1];
            for q in 0..n {
                let Some(gpq) = self.translation(p, q) else { continue };
                let cq = self.sph_offsets[q]..self.sph_offsets[q + 1];
                for (i, oi) in out[rp.clone()].iter_mut().enumerate() {
                    let mut acc = C64::ZERO;
                    for (j, &h_j) in h[cq.clone()].iter().enumerate() {
                        acc += gpq[(i, j)] * h_j;
                    }
                    *oi += acc;
                }
            }
        }
        out
    }

    /// `T̂·v` blockwise.
    fn apply_t(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::ZERO; self.n_spherical()];
        for (p, e) in self.elements.iter().enumerate() {
            let t = e.transmit();
            let vp = &v[self.port_offsets[p]..self.port_offsets[p + 1]];
            let o = &mut out[self.sph_offsets[p]..self.sph_offsets[p + 1]];
            for (i, oi) in o.iter_mut().enumerate() {
                let mut acc = C64::ZERO;
                for (j, &v_j) in vp.iter().enumerate() {
                    acc += t[(i, j)] * v_j;
                }
                *oi = acc;
            }
        }
        out
    }

    /// `w = Γ̂·v + R̂·Ĝ·ĥ`.
    fn port_response(&self, v: &[C64], h: &[C64]) -> Vec<C64> {
        let a = self.apply_g(h);
        let mut w = vec![C64::ZERO; self.n_ports()];
        for (p, e) in self.elements.iter().enumerate() {
            let gamma = e.gamma();
            let r = e.receive();
            let vp = &v[self.port_offsets[p]..self.port_offsets[p + 1]];
            let ap = &a[self.sph_offsets[p]..self.sph_offsets[p + 1]];
            let o = &mut w[self.port_offsets[p]..self.port_offsets[p + 1]];
            for (i, oi) in o.iter_mut().enumerate() {
                let mut acc = C64::ZERO;
                for (j, &v_j) in vp.iter().enumerate() {
                    acc += gamma[(i, j)] * v_j;
                }
                for (j, &a_j) in ap.iter().enumerate() {
                    acc += r[(i, j)] * a_j;
                }
                *oi = acc;
            }
        }
        w
    }
}

/// Directly synthesized array S-parameters:
/// `Γ = Γ̂ + R̂·Ĝ·[1 − (Ŝ−1)·Ĝ]⁻¹·T̂`.
pub fn compose_direct(sys: &BlockSystem) -> Result<Mat<C64>> {
    let n = sys.n_elements();
    let jtot = sys.n_spherical();
    let mtot = sys.n_ports();

    // A = 1 − (Ŝ−1)·Ĝ over the stacked spherical space
    let mut a = Mat::<C64>::zeros(jtot, jtot);
    for i in 0..jtot {
        a[(i, i)] = C64::ONE;
    }
    for p in 0..n {
        let smo = sys.elements[p].s_minus_one();
        let rp = sys.sph_offsets[p];
        for q in 0..n {
            let Some(gpq) = sys.translation(p, q) else { continue };
            let cq = sys.sph_offsets[q];
            let prod = &smo * gpq;
            for i in 0..prod.nrows() {
                for j in 0..prod.ncols() {
                    a[(rp + i, cq + j)] -= prod[(i, j)];
                }
            }
        }
    }

    // H = A⁻¹·T̂
    let mut t_hat = Mat::<C64>::zeros(jtot, mtot);
    for (p, e) in sys.elements.iter().enumerate() {
        let t = e.transmit();
        for i in 0..t.nrows() {
            for j in 0..t.ncols() {
                t_hat[(sys.sph_offsets[p] + i, sys.port_offsets[p] + j)] = t[(i, j)];
            }
        }
    }
    let lu = a.partial_piv_lu();
    let h = lu.solve(&t_hat);
    let resid = (&a * &h - &t_hat).norm_l2();
    let denom = a.norm_l2() * h.norm_l2() + t_hat.norm_l2();
    if denom > 0.0 && resid / denom > 1e-9 {
        return Err(Error::Solver(format!(
            "array system is numerically singular: normalized residual {:.3e} \
             (elements too strongly coupled for the block model)",
            resid / denom
        )));
    }

    // Γ = Γ̂ + R̂·(Ĝ·H)
    let mut gamma = Mat::<C64>::zeros(mtot, mtot);
    for (p, e) in sys.elements.iter().enumerate() {
        let gb = e.gamma();
        for i in 0..gb.nrows() {
            for j in 0..gb.ncols() {
                gamma[(sys.port_offsets[p] + i, sys.port_offsets[p] + j)] = gb[(i, j)];
            }
        }
    }
    for p in 0..sys.n_elements() {
        let r = sys.elements[p].receive();
        // (Ĝ·H) rows of element p
        let jp = sys.sph_offsets[p + 1] - sys.sph_offsets[p];
        let mut gh = Mat::<C64>::zeros(jp, mtot);
        for q in 0..n {
            let Some(gpq) = sys.translation(p, q) else { continue };
            let cq = sys.sph_offsets[q];
            for i in 0..jp {
                for col in 0..mtot {
                    let mut acc = gh[(i, col)];
                    for j in 0..gpq.ncols() {
                        acc += gpq[(i, j)] * h[(cq + j, col)];
                    }
                    gh[(i, col)] = acc;
                }
            }
        }
        let add = &r * &gh;
        for i in 0..add.nrows() {
            for j in 0..mtot {
                gamma[(sys.port_offsets[p] + i, j)] += add[(i, j)];
            }
        }
    }
    Ok(gamma)
}

/// Neumann-series composition. Returns the port response `w`, the converged
/// outgoing spectrum `ĥ` and the number of terms taken.
pub fn compose_iterative(
    sys: &BlockSystem,
    v: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, Vec<C64>, usize)> {
    if v.len() != sys.n_ports() {
        return Err(Error::argument(format!(
            "excitation length {} does not match total port modes {}",
            v.len(),
            sys.n_ports()
        )));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::argument("tolerance must be positive and max_iter ≥ 1"));
    }
    let mut h = sys.apply_t(v);
    let n0: f64 = h.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if n0 == 0.0 {
        let w = sys.port_response(v, &h);
        return Ok((w, h, 1));
    }
    let mut cur = h.clone();
    let mut prev_norm = n0;
    for l in 1..=max_iter {
        let a = sys.apply_g(&cur);
        let mut next = vec![C64::ZERO; sys.n_spherical()];
        for (p, e) in sys.elements.iter().enumerate() {
            let rng = sys.sph_offsets[p]..sys.sph_offsets[p + 1];
            let out = e.apply_s_minus_one(&a[rng.clone()]);
            next[rng].copy_from_slice(&out);
        }
        let norm: f64 = next.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for (h_i, n_i) in h.iter_mut().zip(&next) {
            *h_i += n_i;
        }
        if norm / n0 < tol {
            let w = sys.port_response(v, &h);
            return Ok((w, h, l));
        }
        let ratio = norm / prev_norm;
        if l == max_iter {
            return Err(Error::Divergence { iterations: max_iter, ratio });
        }
        prev_norm = norm;
        cur = next;
    }
    unreachable!()
}

/// One column of the composed S-parameter matrix by a single iterative solve:
/// excite mode `alpha` of element `p` with unit amplitude.
pub fn compose_sparams_column(
    sys: &BlockSystem,
    p: usize,
    alpha: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<C64>> {
    if p >= sys.n_elements() || alpha >= sys.elements[p].m_p() {
        return Err(Error::argument(format!(
            "no port mode ({p}, {alpha}) in this layout"
        )));
    }
    let mut v = vec![C64::ZERO; sys.n_ports()];
    v[sys.port_offsets[p] + alpha] = C64::ONE;
    let (w, _, _) = compose_iterative(sys, &v, tol, max_iter)?;
    Ok(w)
}
