use super::io::{read_gsm_file, write_compressed, write_farfield_csv, write_gsm, write_touchstone, GsmFile};
use super::*;
use crate::geom::{coax_dipole, CoaxDipoleParams};
use crate::mesh::{build_rwg, RwgBasisSet, TriangleMesh};
use crate::mom::{
    assemble_operators, assemble_system, excitation_from_ports, port_coupling, port_outgoing,
    projection_operators, PortDef,
};
use crate::sphwave::lmax_for_radius;
use crate::waveguide::enumerate_modes;
use crate::{C64, Vec3};

struct Setup {
    mesh: TriangleMesh,
    rwg: RwgBasisSet,
    coupling: PortCoupling,
    proj: ProjectionOperators,
    sys_m: ImpedanceSystem,
    sys_e: ImpedanceSystem,
}

fn dipole_setup(mode_count: usize) -> Setup {
    let (mesh, spec) =
        coax_dipole(CoaxDipoleParams { n_phi: 6, n_z: 4, ..CoaxDipoleParams::default() });
    let rwg = build_rwg(&mesh).unwrap();
    let k = 2.0 * std::f64::consts::PI * 1.5e9 / crate::C0;
    let blocks = assemble_operators(&mesh, &rwg, k).unwrap();
    let modes = enumerate_modes(&spec, k, mode_count).unwrap();
    let ports = vec![PortDef { id: 0, spec, modes }];
    let coupling = port_coupling(&mesh, &rwg, &ports).unwrap();
    let r_max = mesh.vertices.iter().map(|p| p.norm()).fold(0.0f64, f64::max);
    let basis = SphericalBasis::new(k, lmax_for_radius(k, r_max).unwrap()).unwrap();
    let proj = projection_operators(&mesh, &rwg, &basis).unwrap();
    let sys_m = assemble_system(&blocks, &coupling, &rwg, Formulation::Magnetic).unwrap();
    let sys_e = assemble_system(&blocks, &coupling, &rwg, Formulation::Electric).unwrap();
    Setup { mesh, rwg, coupling, proj, sys_m, sys_e }
}

#[test]
fn blocks_satisfy_reciprocity_and_near_unitarity() {
    let su = dipole_setup(2);
    let gsm = gsm_from_system(&su.sys_m, &su.coupling, &su.proj).unwrap();

    // evanescent retention must not leak into the stored blocks
    assert_eq!(gsm.n_port_modes(), 1);
    assert!(gsm.port_modes[0].mode.propagating);

    assert!(
        gsm.reciprocity_defect() < 1e-12,
        "R ≠ Tᵗ: defect {:.3e}",
        gsm.reciprocity_defect()
    );
    assert!(
        gsm.symmetry_defect() < 1e-12,
        "Γ/S asymmetric: defect {:.3e}",
        gsm.symmetry_defect()
    );
    let u = gsm.unitarity_defect();
    assert!(u < 5e-2, "unitarity defect {u:.3e} too large for a lossless structure");
}

#[test]
fn gamma_matches_direct_port_solve() {
    let su = dipole_setup(1);
    for sys in [&su.sys_m, &su.sys_e] {
        let gsm = gsm_from_system(sys, &su.coupling, &su.proj).unwrap();
        let v = vec![C64::new(1.0, 0.0)];
        let rhs = excitation_from_ports(sys, &su.coupling, &v).unwrap();
        let x = sys.solve(&rhs).unwrap();
        let w = port_outgoing(sys, &su.coupling, &x, &v).unwrap();
        let diff = (gsm.gamma[(0, 0)] - w[0]).norm();
        assert!(diff < 1e-10, "Γ vs direct solve differ by {diff:.3e}");
    }
}

#[test]
fn formulations_produce_the_same_gsm() {
    let su = dipole_setup(2);
    let g_m = gsm_from_system(&su.sys_m, &su.coupling, &su.proj).unwrap();
    let g_e = gsm_from_system(&su.sys_e, &su.coupling, &su.proj).unwrap();
    let sm = g_m.stacked();
    let se = g_e.stacked();
    let scale = sm.norm_max();
    let mut worst = 0.0f64;
    for i in 0..g_m.dim() {
        for j in 0..g_m.dim() {
            worst = worst.max((sm[(i, j)] - se[(i, j)]).norm());
        }
    }
    assert!(
        worst / scale < 2e-2,
        "formulations disagree by {:.3e} relative at this mesh density",
        worst / scale
    );
}

#[test]
fn gain_pattern_behaves() {
    let su = dipole_setup(1);
    let gsm = gsm_from_system(&su.sys_m, &su.coupling, &su.proj).unwrap();

    // zero excitation → zero pattern
    let far = gain_pattern(&gsm, &[C64::ZERO]).unwrap();
    let (et, ep) = far.eval(1.0, 0.5);
    assert_eq!(et, C64::ZERO);
    assert_eq!(ep, C64::ZERO);

    // a driven z-directed dipole has a broadside-peaked, azimuth-independent
    // pattern with a null on axis
    let far = gain_pattern(&gsm, &[C64::new(1.0, 0.0)]).unwrap();
    let g_broad = far.gain(std::f64::consts::FRAC_PI_2, 0.0);
    let g_broad2 = far.gain(std::f64::consts::FRAC_PI_2, 2.1);
    let g_axis = far.gain(1e-3, 0.0);
    assert!((g_broad - g_broad2).abs() / g_broad < 1e-6);
    assert!(g_axis < 0.05 * g_broad, "no axial null: {g_axis} vs {g_broad}");
    assert!(g_broad > 1.0, "broadside gain {g_broad} below isotropic");
    let _ = (&su.mesh, &su.rwg);
}

#[test]
fn compression_reconstructs_and_truncates() {
    let su = dipole_setup(1);
    let gsm = gsm_from_system(&su.sys_m, &su.coupling, &su.proj).unwrap();

    // full SVD retention reproduces S̃ to machine precision; full eigen
    // retention is limited by the slight non-normality of the coarse-mesh S̃
    let full_svd = compress(&gsm, 1e-300, SpectrumKind::Singular).unwrap();
    assert_eq!(full_svd.retained(), gsm.dim());
    let err_svd = reconstruction_error(&gsm, &full_svd, 20, 7).unwrap();
    assert!(err_svd < 1e-12, "full SVD decomposition error {err_svd:.3e}");
    let full = compress(&gsm, 1e-300, SpectrumKind::Eigen).unwrap();
    assert_eq!(full.retained(), gsm.dim());
    let err_full = reconstruction_error(&gsm, &full, 20, 7).unwrap();
    assert!(err_full < 1e-8, "full decomposition error {err_full:.3e}");

    // ι = 1 keeps exactly the leading mode
    let coarse = compress(&gsm, 1.0, SpectrumKind::Eigen).unwrap();
    assert_eq!(coarse.retained(), 1);

    // default threshold: sharp truncation, small error, real memory saving
    let c = compress(&gsm, DEFAULT_IOTA, SpectrumKind::Eigen).unwrap();
    assert_eq!(c.kind, SpectrumKind::Eigen);
    assert!(c.retained() <= 12, "retained {} modes", c.retained());
    let err = reconstruction_error(&gsm, &c, 100, 7).unwrap();
    assert!(err < 1e-3, "reconstruction error {err:.3e}");
    assert!(c.memory_saving() > 0.9, "saving {:.3}", c.memory_saving());

    // values sorted by descending modulus, all on or inside the unit circle
    for w in c.values.windows(2) {
        assert!(w[0].norm() >= w[1].norm() - 1e-12);
    }
    assert!(c.values.iter().all(|t| t.norm() <= 1.0 + 1e-9));

    // Err monotone non-increasing as ι shrinks
    let mut last = f64::INFINITY;
    for p in [2, 4, 6, 8, 10, 12, 14, 16] {
        let ci = compress(&gsm, (2.0f64).powi(-p), SpectrumKind::Eigen).unwrap();
        let e = reconstruction_error(&gsm, &ci, 50, 11).unwrap();
        assert!(
            e <= last + 1e-12,
            "error not monotone: {e:.3e} after {last:.3e} at −log₂ι = {p}"
        );
        last = e;
    }

    // SVD path agrees with the eigen path on a lossless structure
    let s = compress(&gsm, DEFAULT_IOTA, SpectrumKind::Singular).unwrap();
    assert_eq!(s.kind, SpectrumKind::Singular);
    assert!(s.right.is_some());
    let err_s = reconstruction_error(&gsm, &s, 50, 7).unwrap();
    assert!(err_s < 1e-3, "SVD reconstruction error {err_s:.3e}");
    for t in &s.values {
        assert!(t.im == 0.0 && t.re <= 1.0 + 1e-9);
    }
}

#[test]
fn characteristic_spectrum_matches_scattering_spectrum() {
    let su = dipole_setup(1);
    let report = characteristic_check(&su.sys_e, &su.coupling, &su.proj, 10).unwrap();
    assert_eq!(report.compared, 10);
    // the pencil and the scattering operator are built from the same discrete
    // matrices, so the eigenvalue relation t = −1/(1+jλ) is exact
    assert!(
        report.max_rel_mismatch < 1e-8,
        "spectra mismatch {:.3e}",
        report.max_rel_mismatch
    );
    // the circle defect is bounded by the discretization's loss defect
    assert!(
        report.circle_defect < 5e-2,
        "eigenvalues off the lossless circle by {:.3e}",
        report.circle_defect
    );
    // leading characteristic eigenvalues are near-real for a lossless system
    for l in report.lambda.iter().take(3) {
        assert!(l.im.abs() < 0.3 * l.norm().max(1.0), "lossy λ {l:?}");
    }
    // resonance mapping: λ = 0 ⇔ t = −1
    let t0 = -(C64::ONE + J * 0.0).inv();
    assert!((t0 + C64::ONE).norm() < 1e-15);

    // the magnetic system is rejected
    assert!(characteristic_check(&su.sys_m, &su.coupling, &su.proj, 10).is_err());
}

#[test]
fn container_roundtrip_is_lossless_and_deterministic() {
    let su = dipole_setup(2);
    let gsm = gsm_from_system(&su.sys_m, &su.coupling, &su.proj).unwrap();
    let dir = std::env::temp_dir();
    let p1 = dir.join("emgsm_test_full_a.gsm");
    let p2 = dir.join("emgsm_test_full_b.gsm");
    write_gsm(&p1, &gsm).unwrap();
    write_gsm(&p2, &gsm).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

    let back = match read_gsm_file(&p1).unwrap() {
        GsmFile::Full(g) => g,
        _ => panic!("expected a full GSM"),
    };
    assert_eq!(back.k, gsm.k);
    assert_eq!(back.frequency, gsm.frequency);
    assert_eq!(back.formulation, gsm.formulation);
    assert_eq!(back.spherical.l_max, gsm.spherical.l_max);
    assert_eq!(back.mode_labels(), gsm.mode_labels());
    let (a, b) = (back.stacked(), gsm.stacked());
    for i in 0..gsm.dim() {
        for j in 0..gsm.dim() {
            assert_eq!(a[(i, j)], b[(i, j)]);
        }
    }

    let c = compress(&gsm, DEFAULT_IOTA, SpectrumKind::Eigen).unwrap();
    let p3 = dir.join("emgsm_test_comp.gsm");
    write_compressed(&p3, &c).unwrap();
    let cb = match read_gsm_file(&p3).unwrap() {
        GsmFile::Compressed(c) => c,
        _ => panic!("expected a compressed GSM"),
    };
    assert_eq!(cb.kind, c.kind);
    assert_eq!(cb.values, c.values);
    assert_eq!(cb.dim, c.dim);
    assert_eq!(cb.m_p, c.m_p);
    let f: Vec<C64> = (0..c.dim).map(|i| C64::new(i as f64, -1.0)).collect();
    assert_eq!(c.apply(&f).unwrap(), cb.apply(&f).unwrap());

    for p in [p1, p2, p3] {
        let _ = std::fs::remove_file(p);
    }
}

#[test]
fn touchstone_and_csv_outputs() {
    let su = dipole_setup(1);
    let gsm = gsm_from_system(&su.sys_m, &su.coupling, &su.proj).unwrap();
    let dir = std::env::temp_dir();

    let ts = dir.join("emgsm_test.s1p");
    write_touchstone(&ts, &gsm.mode_labels(), &[(gsm.frequency, gsm.gamma.clone())]).unwrap();
    let text = std::fs::read_to_string(&ts).unwrap();
    assert!(text.contains("# Hz S MA R 50"));
    let data_line = text.lines().find(|l| !l.starts_with(['!', '#'])).unwrap();
    let cols: Vec<f64> = data_line.split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert_eq!(cols.len(), 3);
    assert!((cols[0] - gsm.frequency).abs() < 1.0);
    assert!((cols[1] - gsm.gamma[(0, 0)].norm()).abs() < 1e-9);

    let csv = dir.join("emgsm_test_far.csv");
    let far = gain_pattern(&gsm, &[C64::new(1.0, 0.0)]).unwrap();
    write_farfield_csv(&csv, &far, 19, 4).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 19 * 4);
    assert!(text.lines().next().unwrap().starts_with("theta_deg,phi_deg"));

    let _ = std::fs::remove_file(ts);
    let _ = std::fs::remove_file(csv);
}

#[test]
fn plane_wave_scattering_is_reciprocal() {
    let su = dipole_setup(1);
    let gsm = gsm_from_system(&su.sys_m, &su.coupling, &su.proj).unwrap();
    // forward/backward RCS consistency of a reciprocal scatterer: σ(k̂→−k̂)
    // equals σ(−k̂→k̂) for matching polarizations
    let e0 = crate::vec3::CVec3::from_real(Vec3::new(1.0, 0.0, 0.0));
    let fwd = rcs_bistatic(&gsm, e0, Vec3::new(0.0, 0.0, 1.0)).unwrap();
    let bwd = rcs_bistatic(&gsm, e0, Vec3::new(0.0, 0.0, -1.0)).unwrap();
    let a = fwd.eval(std::f64::consts::PI, 0.0);
    let b = bwd.eval(0.0, 0.0);
    assert!(a > 0.0 && b > 0.0);
    assert!(
        (a - b).abs() / a.max(b) < 1e-4,
        "reciprocity violated: {a:.6e} vs {b:.6e}"
    );
}
