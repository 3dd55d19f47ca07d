//! Procedural test geometries: spheres and coax-fed dipoles.
//!
//! These builders produce validated, consistently wound closed PEC surfaces
//! used by solver tests and examples.

use crate::mesh::{RegionTag, TriangleMesh};
use crate::waveguide::{Fill, PortFrame, WaveguideKind, WaveguideSpec};
use crate::Vec3;
use std::collections::HashMap;

/// Icosphere: subdivided icosahedron projected onto a sphere of `radius`,
/// wound outward. `order` quadruples the triangle count each step
/// (20 · 4^order triangles).
pub fn icosphere(radius: f64, order: usize) -> TriangleMesh {
    assert!(radius > 0.0);
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..order {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let m = ((vertices[a] + vertices[b]) * 0.5).normalized();
                vertices.push(m);
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let vertices: Vec<Vec3> = vertices.into_iter().map(|v| v * radius).collect();
    let n = faces.len();
    TriangleMesh::new(vertices, faces, vec![RegionTag::Antenna; n])
        .expect("icosphere construction is always valid")
}

/// Geometry parameters of a coax-fed asymmetric dipole.
///
/// The lower arm is a closed tube of radius `r_outer` over z ∈ [−len_lower, 0];
/// the upper arm a tube of radius `r_inner` over z ∈ [0, len_upper]. The feed
/// is the flat annulus r_inner ≤ ρ ≤ r_outer at z = 0 (tagged `port0`,
/// outward normal +ẑ), matching a coaxial waveguide opening.
#[derive(Debug, Clone, Copy)]
pub struct CoaxDipoleParams {
    pub r_inner: f64,
    pub r_outer: f64,
    pub len_lower: f64,
    pub len_upper: f64,
    /// Azimuthal segments (≥ 6).
    pub n_phi: usize,
    /// Axial subdivisions per arm (≥ 2).
    pub n_z: usize,
    /// Radial subdivisions of the port annulus (≥ 1).
    pub n_r: usize,
}

impl Default for CoaxDipoleParams {
    fn default() -> Self {
        CoaxDipoleParams {
            r_inner: 0.25e-3,
            r_outer: 0.575e-3,
            len_lower: 25e-3,
            len_upper: 25e-3,
            n_phi: 8,
            n_z: 14,
            n_r: 1,
        }
    }
}

/// Build the coax-fed dipole mesh together with its port description.
pub fn coax_dipole(p: CoaxDipoleParams) -> (TriangleMesh, WaveguideSpec) {
    assert!(p.r_outer > p.r_inner && p.r_inner > 0.0);
    assert!(p.len_lower > 0.0 && p.len_upper > 0.0);
    assert!(p.n_phi >= 6 && p.n_z >= 2 && p.n_r >= 1);

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut regions: Vec<RegionTag> = Vec::new();
    let n_phi = p.n_phi;

    let ring = |radius: f64, z: f64, vertices: &mut Vec<Vec3>| -> Vec<usize> {
        let base = vertices.len();
        for i in 0..n_phi {
            let a = i as f64 / n_phi as f64 * std::f64::consts::TAU;
            vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
        (base..base + n_phi).collect()
    };
    // connect two rings with outward-wound quads; `outward` flips for the
    // upper tube which is traversed bottom-to-top as well but indexed the same
    let tube = |lower: &[usize],
                    upper: &[usize],
                    triangles: &mut Vec<[usize; 3]>,
                    regions: &mut Vec<RegionTag>,
                    tag: RegionTag| {
        for i in 0..n_phi {
            let j = (i + 1) % n_phi;
            // outward normal for a wall seen from outside: counter-clockwise
            // when viewed from outside the axis
            triangles.push([lower[i], lower[j], upper[j]]);
            triangles.push([lower[i], upper[j], upper[i]]);
            regions.push(tag);
            regions.push(tag);
        }
    };

    // ---- lower arm: cap at z = -len_lower, tube of radius r_outer up to 0
    let mut prev = ring(p.r_outer, -p.len_lower, &mut vertices);
    let bottom_center = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, -p.len_lower));
    for i in 0..n_phi {
        let j = (i + 1) % n_phi;
        // cap normal -ẑ: clockwise seen from +z
        triangles.push([bottom_center, prev[j], prev[i]]);
        regions.push(RegionTag::Antenna);
    }
    for s in 1..=p.n_z {
        let z = -p.len_lower + s as f64 / p.n_z as f64 * p.len_lower;
        let next = ring(p.r_outer, z, &mut vertices);
        tube(&prev, &next, &mut triangles, &mut regions, RegionTag::Antenna);
        prev = next;
    }
    let outer_rim = prev; // radius r_outer at z = 0

    // ---- port annulus at z = 0, from r_outer inward to r_inner (normal +ẑ)
    let mut outer = outer_rim.clone();
    for s in 1..=p.n_r {
        let rho = p.r_outer - s as f64 / p.n_r as f64 * (p.r_outer - p.r_inner);
        let inner = ring(rho, 0.0, &mut vertices);
        for i in 0..n_phi {
            let j = (i + 1) % n_phi;
            // +ẑ normal: counter-clockwise seen from above
            triangles.push([outer[i], outer[j], inner[j]]);
            triangles.push([outer[i], inner[j], inner[i]]);
            regions.push(RegionTag::Port(0));
            regions.push(RegionTag::Port(0));
        }
        outer = inner;
    }
    let inner_rim = outer; // radius r_inner at z = 0

    // ---- upper arm: tube of radius r_inner up to len_upper, cap at the top
    let mut prev = inner_rim;
    for s in 1..=p.n_z {
        let z = s as f64 / p.n_z as f64 * p.len_upper;
        let next = ring(p.r_inner, z, &mut vertices);
        tube(&prev, &next, &mut triangles, &mut regions, RegionTag::Antenna);
        prev = next;
    }
    let top_center = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, p.len_upper));
    for i in 0..n_phi {
        let j = (i + 1) % n_phi;
        // cap normal +ẑ: counter-clockwise seen from above
        triangles.push([top_center, prev[i], prev[j]]);
        regions.push(RegionTag::Antenna);
    }

    let mesh = TriangleMesh::new(vertices, triangles, regions)
        .expect("coax dipole construction is always valid");
    let spec = WaveguideSpec::new(
        WaveguideKind::Coaxial { r_inner: p.r_inner, r_outer: p.r_outer },
        Fill::default(),
        PortFrame {
            origin: Vec3::ZERO,
            u_axis: Vec3::new(1.0, 0.0, 0.0),
            v_axis: Vec3::new(0.0, 1.0, 0.0),
            normal: Vec3::new(0.0, 0.0, 1.0),
        },
    )
    .expect("coax port spec is always valid");
    (mesh, spec)
}

/// Geometry parameters of a shorted coaxial stub cavity.
///
/// The cavity is the annular volume r_inner ≤ ρ ≤ r_outer, 0 ≤ z ≤ len. Its
/// boundary is meshed with normals pointing into the cavity (the field
/// region): the feed annulus at z = 0 (tagged `port0`, normal +ẑ), the inner
/// and outer conductor walls, and the shorting annulus at z = len. A TEM wave
/// incident from the guide below sees the textbook shorted-line reflection
/// `Γ = −e^{−2jβ·len}`, which makes this geometry a sharp end-to-end check of
/// the port and operator sign conventions.
#[derive(Debug, Clone, Copy)]
pub struct CoaxStubParams {
    pub r_inner: f64,
    pub r_outer: f64,
    pub len: f64,
    pub n_phi: usize,
    pub n_z: usize,
    pub n_r: usize,
}

impl Default for CoaxStubParams {
    fn default() -> Self {
        CoaxStubParams {
            r_inner: 0.25e-3,
            r_outer: 0.575e-3,
            len: 10e-3,
            n_phi: 12,
            n_z: 30,
            n_r: 2,
        }
    }
}

/// Build the shorted coax stub mesh together with its port description.
pub fn coax_stub(p: CoaxStubParams) -> (TriangleMesh, WaveguideSpec) {
    assert!(p.r_outer > p.r_inner && p.r_inner > 0.0 && p.len > 0.0);
    assert!(p.n_phi >= 6 && p.n_z >= 2 && p.n_r >= 1);

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut regions: Vec<RegionTag> = Vec::new();
    let n_phi = p.n_phi;

    let ring = |radius: f64, z: f64, vertices: &mut Vec<Vec3>| -> Vec<usize> {
        let base = vertices.len();
        for i in 0..n_phi {
            let a = i as f64 / n_phi as f64 * std::f64::consts::TAU;
            vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
        (base..base + n_phi).collect()
    };
    // annulus between two same-z rings; `up` selects the +ẑ winding
    let annulus = |outer: &[usize],
                   inner: &[usize],
                   up: bool,
                   triangles: &mut Vec<[usize; 3]>,
                   regions: &mut Vec<RegionTag>,
                   tag: RegionTag| {
        for i in 0..n_phi {
            let j = (i + 1) % n_phi;
            if up {
                triangles.push([outer[i], outer[j], inner[j]]);
                triangles.push([outer[i], inner[j], inner[i]]);
            } else {
                triangles.push([outer[i], inner[j], outer[j]]);
                triangles.push([outer[i], inner[i], inner[j]]);
            }
            regions.push(tag);
            regions.push(tag);
        }
    };
    // wall between two rings of equal radius; `outward` selects the +ρ̂ winding
    let tube = |lower: &[usize],
                upper: &[usize],
                outward: bool,
                triangles: &mut Vec<[usize; 3]>,
                regions: &mut Vec<RegionTag>| {
        for i in 0..n_phi {
            let j = (i + 1) % n_phi;
            if outward {
                triangles.push([lower[i], lower[j], upper[j]]);
                triangles.push([lower[i], upper[j], upper[i]]);
            } else {
                triangles.push([lower[i], upper[j], lower[j]]);
                triangles.push([lower[i], upper[i], upper[j]]);
            }
            regions.push(RegionTag::Antenna);
            regions.push(RegionTag::Antenna);
        }
    };

    // ---- feed annulus at z = 0, r_outer inward to r_inner, normal +ẑ
    let bottom_outer = ring(p.r_outer, 0.0, &mut vertices);
    let mut outer = bottom_outer.clone();
    for s in 1..=p.n_r {
        let rho = p.r_outer - s as f64 / p.n_r as f64 * (p.r_outer - p.r_inner);
        let inner = ring(rho, 0.0, &mut vertices);
        annulus(&outer, &inner, true, &mut triangles, &mut regions, RegionTag::Port(0));
        outer = inner;
    }
    let bottom_inner = outer;

    // ---- inner conductor wall, normal +ρ̂ (into the cavity)
    let mut prev = bottom_inner;
    for s in 1..=p.n_z {
        let z = s as f64 / p.n_z as f64 * p.len;
        let next = ring(p.r_inner, z, &mut vertices);
        tube(&prev, &next, true, &mut triangles, &mut regions);
        prev = next;
    }
    let top_inner = prev;

    // ---- shorting annulus at z = len, r_inner outward to r_outer, normal −ẑ
    let mut inner = top_inner;
    for s in 1..=p.n_r {
        let rho = p.r_inner + s as f64 / p.n_r as f64 * (p.r_outer - p.r_inner);
        let next = ring(rho, p.len, &mut vertices);
        annulus(&next, &inner, false, &mut triangles, &mut regions, RegionTag::Antenna);
        inner = next;
    }
    let top_outer = inner;

    // ---- outer conductor wall, normal −ρ̂ (into the cavity)
    let mut prev = top_outer;
    for s in 1..=p.n_z {
        let z = p.len - s as f64 / p.n_z as f64 * p.len;
        let next = if s == p.n_z { bottom_outer.clone() } else { ring(p.r_outer, z, &mut vertices) };
        tube(&next, &prev, false, &mut triangles, &mut regions);
        prev = next;
    }

    let mesh = TriangleMesh::new(vertices, triangles, regions)
        .expect("coax stub construction is always valid");
    let spec = WaveguideSpec::new(
        WaveguideKind::Coaxial { r_inner: p.r_inner, r_outer: p.r_outer },
        Fill::default(),
        PortFrame {
            origin: Vec3::ZERO,
            u_axis: Vec3::new(1.0, 0.0, 0.0),
            v_axis: Vec3::new(0.0, 1.0, 0.0),
            normal: Vec3::new(0.0, 0.0, 1.0),
        },
    )
    .expect("coax port spec is always valid");
    (mesh, spec)
}

/// Translate every vertex of a mesh by `offset` (tags preserved).
pub fn translated(mesh: &TriangleMesh, offset: Vec3) -> TriangleMesh {
    TriangleMesh::new(
        mesh.vertices.iter().map(|v| *v + offset).collect(),
        mesh.triangles.clone(),
        mesh.regions.clone(),
    )
    .expect("translation preserves validity")
}

/// Merge several already-valid meshes into one, remapping port ids so the
/// `i`-th input's `portN` becomes `port(N + offsets[i])`.
pub fn merged(meshes: &[&TriangleMesh], port_id_offsets: &[u32]) -> TriangleMesh {
    assert_eq!(meshes.len(), port_id_offsets.len());
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    for (mesh, &off) in meshes.iter().zip(port_id_offsets) {
        let base = vertices.len();
        vertices.extend_from_slice(&mesh.vertices);
        triangles.extend(mesh.triangles.iter().map(|t| t.map(|v| v + base)));
        regions.extend(mesh.regions.iter().map(|r| match r {
            RegionTag::Antenna => RegionTag::Antenna,
            RegionTag::Port(id) => RegionTag::Port(id + off),
        }));
    }
    TriangleMesh::new(vertices, triangles, regions).expect("disjoint merge preserves validity")
}
