//! Triangle meshes, region tags and RWG basis construction.
//!
//! Two interchange formats are understood: OFF with a `.tags` sidecar (one
//! region name per triangle line) and a subset of gmsh v2 ASCII (`$Nodes`,
//! `$Elements` with triangle elements, `$PhysicalNames` for regions). Region
//! names are `antenna` or `portN` for a non-negative integer N.

use crate::{Error, Result, Vec3};
use std::collections::HashMap;
use std::fmt;
use std::path::Path;

/// Region a triangle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionTag {
    Antenna,
    Port(u32),
}

impl RegionTag {
    pub fn parse(name: &str) -> Option<RegionTag> {
        let name = name.trim();
        if name == "antenna" {
            return Some(RegionTag::Antenna);
        }
        name.strip_prefix("port")?.parse().ok().map(RegionTag::Port)
    }
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionTag::Antenna => write!(f, "antenna"),
            RegionTag::Port(id) => write!(f, "port{id}"),
        }
    }
}

/// Validated triangulated surface with per-triangle region tags.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<RegionTag>,
}

/// Mesh file format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    GmshV2,
}

impl MeshFormat {
    /// Guess from the file extension (`.off` / `.msh`).
    pub fn from_path(path: &Path) -> Result<MeshFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("off") => Ok(MeshFormat::Off),
            Some("msh") => Ok(MeshFormat::GmshV2),
            other => Err(Error::argument(format!(
                "cannot infer mesh format from extension {other:?} (expected .off or .msh)"
            ))),
        }
    }
}

impl TriangleMesh {
    /// Construct and validate a mesh from raw arrays.
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<RegionTag>,
    ) -> Result<TriangleMesh> {
        let mesh = TriangleMesh { vertices, triangles, regions };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn tri_vertices(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_vertices(t);
        0.5 * (b - a).cross(c - a).norm()
    }

    /// Unit normal following the winding (right-hand rule).
    pub fn tri_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.tri_vertices(t);
        (b - a).cross(c - a).normalized()
    }

    pub fn tri_centroid(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.tri_vertices(t);
        (a + b + c) / 3.0
    }

    /// Center and radius of the bounding sphere about the vertex centroid.
    pub fn bounding_sphere(&self) -> (Vec3, f64) {
        let mut c = Vec3::ZERO;
        for v in &self.vertices {
            c += *v;
        }
        let c = c / self.vertices.len() as f64;
        let r = self.vertices.iter().map(|v| (*v - c).norm()).fold(0.0, f64::max);
        (c, r)
    }

    /// Distinct port ids present, ascending.
    pub fn port_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .regions
            .iter()
            .filter_map(|r| match r {
                RegionTag::Port(id) => Some(*id),
                RegionTag::Antenna => None,
            })
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn validate(&self) -> Result<()> {
        if self.triangles.len() != self.regions.len() {
            return Err(Error::MeshInvalid(format!(
                "{} triangles but {} region tags",
                self.triangles.len(),
                self.regions.len()
            )));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= self.vertices.len() {
                    return Err(Error::MeshInvalid(format!(
                        "triangle {t} references vertex {v} but only {} vertices exist",
                        self.vertices.len()
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::MeshInvalid(format!("triangle {t} is degenerate: {tri:?}")));
            }
            if self.tri_area(t) <= 0.0 {
                return Err(Error::MeshInvalid(format!("triangle {t} has zero area")));
            }
        }
        // manifoldness and winding: every shared edge must be traversed in
        // opposite directions by its two triangles
        let mut edge_tris: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edge_tris.entry(key).or_default().push((t, a < b));
            }
        }
        for ((a, b), users) in &edge_tris {
            if users.len() > 2 {
                return Err(Error::MeshInvalid(format!(
                    "edge ({a},{b}) is shared by {} triangles (non-manifold)",
                    users.len()
                )));
            }
            if users.len() == 2 && users[0].1 == users[1].1 {
                return Err(Error::MeshInvalid(format!(
                    "triangles {} and {} traverse edge ({a},{b}) in the same direction \
                     (inconsistent winding)",
                    users[0].0, users[1].0
                )));
            }
        }
        self.validate_ports()
    }

    fn validate_ports(&self) -> Result<()> {
        for id in self.port_ids() {
            let tris: Vec<usize> = (0..self.triangles.len())
                .filter(|&t| self.regions[t] == RegionTag::Port(id))
                .collect();
            // planarity within 1e-6 of the port diameter
            let mut pts: Vec<Vec3> = Vec::new();
            for &t in &tris {
                pts.extend(self.tri_vertices(t));
            }
            let n = self.tri_normal(tris[0]);
            let p0 = pts[0];
            let diam = pts
                .iter()
                .flat_map(|a| pts.iter().map(move |b| (*a - *b).norm()))
                .fold(0.0, f64::max);
            for p in &pts {
                if (( *p - p0).dot(n)).abs() > 1e-6 * diam {
                    return Err(Error::MeshInvalid(format!(
                        "port{id} is not planar: vertex deviates by {:.3e} (diameter {:.3e})",
                        ((*p - p0).dot(n)).abs(),
                        diam
                    )));
                }
            }
            // connectivity by shared edges
            let in_port: HashMap<usize, usize> =
                tris.iter().enumerate().map(|(i, &t)| (t, i)).collect();
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); tris.len()];
            let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
            for (i, &t) in tris.iter().enumerate() {
                let tri = self.triangles[t];
                for e in 0..3 {
                    let (a, b) = (tri[e], tri[(e + 1) % 3]);
                    let key = (a.min(b), a.max(b));
                    if let Some(&o) = edge_owner.get(&key) {
                        adj[i].push(o);
                        adj[o].push(i);
                    } else {
                        edge_owner.insert(key, i);
                    }
                }
            }
            let _ = in_port;
            let mut seen = vec![false; tris.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for &o in &adj[i] {
                    if !seen[o] {
                        seen[o] = true;
                        stack.push(o);
                    }
                }
            }
            if !seen.iter().all(|&s| s) {
                return Err(Error::MeshInvalid(format!(
                    "port{id} is not edge-connected"
                )));
            }
        }
        Ok(())
    }
}

/// Load and validate a mesh file.
pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh> {
    let path = path.as_ref();
    match format {
        MeshFormat::Off => load_off(path),
        MeshFormat::GmshV2 => load_gmsh_v2(path),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::MeshParse { path: path.display().to_string(), line, msg: msg.into() }
}

fn load_off(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)?;
    // meaningful lines with their 1-based numbers; '#' starts a comment
    let mut lines = text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            None
        } else {
            Some((i + 1, l))
        }
    });
    let (ln, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    if header != "OFF" {
        return Err(parse_err(path, ln, format!("expected OFF header, got {header:?}")));
    }
    let (ln, counts) = lines.next().ok_or_else(|| parse_err(path, ln, "missing counts"))?;
    let c: Vec<&str> = counts.split_whitespace().collect();
    if c.len() < 2 {
        return Err(parse_err(path, ln, "count line needs vertex and face counts"));
    }
    let nv: usize = c[0].parse().map_err(|_| parse_err(path, ln, "bad vertex count"))?;
    let nf: usize = c[1].parse().map_err(|_| parse_err(path, ln, "bad face count"))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(path, ln, "unexpected EOF in vertices"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(path, ln, "vertex line needs 3 coordinates"));
        }
        let mut xyz = [0.0; 3];
        for (k, s) in f.iter().enumerate() {
            xyz[k] = s.parse().map_err(|_| parse_err(path, ln, format!("bad coordinate {s:?}")))?;
        }
        vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(path, ln, "unexpected EOF in faces"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.is_empty() || f[0] != "3" {
            return Err(parse_err(path, ln, "only triangular faces are supported"));
        }
        if f.len() != 4 {
            return Err(parse_err(path, ln, "face line needs 3 vertex indices"));
        }
        let mut tri = [0usize; 3];
        for (k, s) in f[1..].iter().enumerate() {
            let idx: i64 =
                s.parse().map_err(|_| parse_err(path, ln, format!("bad vertex index {s:?}")))?;
            if idx < 0 || idx as usize >= nv {
                return Err(parse_err(
                    path,
                    ln,
                    format!("vertex index {idx} out of range 0..{nv}"),
                ));
            }
            tri[k] = idx as usize;
        }
        triangles.push(tri);
    }

    // sidecar region tags; absent sidecar means everything is antenna
    let tags_path = path.with_extension("tags");
    let regions = if tags_path.exists() {
        let tag_text = std::fs::read_to_string(&tags_path)?;
        let names: Vec<(usize, &str)> = tag_text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("").trim();
                if l.is_empty() {
                    None
                } else {
                    Some((i + 1, l))
                }
            })
            .collect();
        if names.len() != triangles.len() {
            return Err(parse_err(
                &tags_path,
                names.len(),
                format!("{} tag lines for {} triangles", names.len(), triangles.len()),
            ));
        }
        let mut regions = Vec::with_capacity(names.len());
        for (ln, name) in names {
            regions.push(RegionTag::parse(name).ok_or_else(|| {
                parse_err(&tags_path, ln, format!("unknown region name {name:?}"))
            })?);
        }
        regions
    } else {
        vec![RegionTag::Antenna; triangles.len()]
    };

    TriangleMesh::new(vertices, triangles, regions)
}

fn load_gmsh_v2(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)?;
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).collect();

    let section = |name: &str| -> Result<(usize, usize)> {
        let open = format!("${name}");
        let close = format!("$End{name}");
        let s = lines
            .iter()
            .position(|(_, l)| *l == open)
            .ok_or_else(|| parse_err(path, 1, format!("missing {open} section")))?;
        let e = lines[s..]
            .iter()
            .position(|(_, l)| *l == close)
            .map(|o| s + o)
            .ok_or_else(|| parse_err(path, lines[s].0, format!("unterminated {open}")))?;
        Ok((s + 1, e))
    };

    // physical names give the region of each physical tag
    let mut names: HashMap<i64, RegionTag> = HashMap::new();
    if lines.iter().any(|(_, l)| *l == "$PhysicalNames") {
        let (s, e) = section("PhysicalNames")?;
        for (ln, l) in &lines[s + 1..e] {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() < 3 {
                return Err(parse_err(path, *ln, "physical name line needs dim, tag, name"));
            }
            let tag: i64 =
                f[1].parse().map_err(|_| parse_err(path, *ln, "bad physical tag"))?;
            let name = f[2..].join(" ");
            let name = name.trim_matches('"');
            let region = RegionTag::parse(name)
                .ok_or_else(|| parse_err(path, *ln, format!("unknown region name {name:?}")))?;
            names.insert(tag, region);
        }
    }

    let (s, e) = section("Nodes")?;
    let mut id_map: HashMap<i64, usize> = HashMap::new();
    let mut vertices = Vec::new();
    for (ln, l) in &lines[s + 1..e] {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 4 {
            return Err(parse_err(path, *ln, "node line needs id x y z"));
        }
        let id: i64 = f[0].parse().map_err(|_| parse_err(path, *ln, "bad node id"))?;
        let mut xyz = [0.0; 3];
        for k in 0..3 {
            xyz[k] = f[k + 1]
                .parse()
                .map_err(|_| parse_err(path, *ln, format!("bad coordinate {:?}", f[k + 1])))?;
        }
        id_map.insert(id, vertices.len());
        vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }

    let (s, e) = section("Elements")?;
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    for (ln, l) in &lines[s + 1..e] {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() < 2 {
            continue;
        }
        let etype: i64 = f[1].parse().map_err(|_| parse_err(path, *ln, "bad element type"))?;
        if etype != 2 {
            continue; // only surface triangles carry basis functions
        }
        let ntags: usize = f[2].parse().map_err(|_| parse_err(path, *ln, "bad tag count"))?;
        if f.len() != 3 + ntags + 3 {
            return Err(parse_err(path, *ln, "triangle element needs 3 node ids"));
        }
        let region = if ntags >= 1 {
            let phys: i64 =
                f[3].parse().map_err(|_| parse_err(path, *ln, "bad physical tag"))?;
            match names.get(&phys) {
                Some(r) => *r,
                None if names.is_empty() => RegionTag::Antenna,
                None => {
                    return Err(parse_err(
                        path,
                        *ln,
                        format!("element references unnamed physical tag {phys}"),
                    ))
                }
            }
        } else {
            RegionTag::Antenna
        };
        let mut tri = [0usize; 3];
        for k in 0..3 {
            let id: i64 =
                f[3 + ntags + k].parse().map_err(|_| parse_err(path, *ln, "bad node id"))?;
            tri[k] = *id_map
                .get(&id)
                .ok_or_else(|| parse_err(path, *ln, format!("unknown node id {id}")))?;
        }
        triangles.push(tri);
        regions.push(region);
    }
    TriangleMesh::new(vertices, triangles, regions)
}

/// One RWG function, anchored at an interior edge.
#[derive(Debug, Clone, Copy)]
pub struct RwgEdge {
    /// Edge endpoints, ascending vertex index.
    pub verts: [usize; 2],
    /// Triangle traversing the edge as verts[0] → verts[1].
    pub tri_plus: usize,
    pub tri_minus: usize,
    /// Free (opposite) vertex in each triangle.
    pub free_plus: usize,
    pub free_minus: usize,
    pub length: f64,
    /// Port id when both triangles lie in the same port region.
    pub port: Option<u32>,
}

/// Deterministically ordered RWG basis over a mesh.
#[derive(Debug, Clone)]
pub struct RwgBasisSet {
    pub edges: Vec<RwgEdge>,
    /// Ids of the electric-current basis (every interior edge, A ∪ P).
    pub electric_index: Vec<usize>,
    /// Ids of the magnetic-current basis (edges interior to a port).
    pub magnetic_index: Vec<usize>,
}

impl RwgBasisSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Magnetic ids belonging to one port, in enumeration order.
    pub fn magnetic_index_of_port(&self, port: u32) -> Vec<usize> {
        self.magnetic_index
            .iter()
            .copied()
            .filter(|&i| self.edges[i].port == Some(port))
            .collect()
    }

    /// ψ_i at a point lying in triangle `t` (caller guarantees membership);
    /// zero if `t` is not part of the function's support.
    pub fn eval(&self, mesh: &TriangleMesh, i: usize, t: usize, r: Vec3) -> Vec3 {
        let e = &self.edges[i];
        if t == e.tri_plus {
            (r - mesh.vertices[e.free_plus]) * (e.length / (2.0 * mesh.tri_area(t)))
        } else if t == e.tri_minus {
            (mesh.vertices[e.free_minus] - r) * (e.length / (2.0 * mesh.tri_area(t)))
        } else {
            Vec3::ZERO
        }
    }

    /// Surface divergence of ψ_i on triangle `t` (constant per triangle).
    pub fn div(&self, mesh: &TriangleMesh, i: usize, t: usize) -> f64 {
        let e = &self.edges[i];
        if t == e.tri_plus {
            e.length / mesh.tri_area(t)
        } else if t == e.tri_minus {
            -e.length / mesh.tri_area(t)
        } else {
            0.0
        }
    }
}

/// Enumerate interior edges and build the RWG index sets.
pub fn build_rwg(mesh: &TriangleMesh) -> Result<RwgBasisSet> {
    let mut edge_tris: HashMap<(usize, usize), Vec<(usize, bool, usize)>> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let free = tri[(e + 2) % 3];
            let key = (a.min(b), a.max(b));
            edge_tris.entry(key).or_default().push((t, a < b, free));
        }
    }
    let mut keys: Vec<(usize, usize)> =
        edge_tris.iter().filter(|(_, u)| u.len() == 2).map(|(k, _)| *k).collect();
    keys.sort_unstable();

    let mut edges = Vec::with_capacity(keys.len());
    for (a, b) in keys {
        let users = &edge_tris[&(a, b)];
        let (plus, minus) =
            if users[0].1 { (users[0], users[1]) } else { (users[1], users[0]) };
        let port = match (mesh.regions[plus.0], mesh.regions[minus.0]) {
            (RegionTag::Port(p), RegionTag::Port(q)) if p == q => Some(p),
            _ => None,
        };
        edges.push(RwgEdge {
            verts: [a, b],
            tri_plus: plus.0,
            tri_minus: minus.0,
            free_plus: plus.2,
            free_minus: minus.2,
            length: (mesh.vertices[b] - mesh.vertices[a]).norm(),
            port,
        });
    }

    let electric_index: Vec<usize> = (0..edges.len()).collect();
    let magnetic_index: Vec<usize> =
        (0..edges.len()).filter(|&i| edges[i].port.is_some()).collect();

    for id in mesh.port_ids() {
        if !magnetic_index.iter().any(|&i| edges[i].port == Some(id)) {
            return Err(Error::Config(format!(
                "port{id} has no interior edges; the port surface is too coarse \
                 to carry a magnetic current"
            )));
        }
    }
    Ok(RwgBasisSet { edges, electric_index, magnetic_index })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plate() -> TriangleMesh {
        // unit square split along the diagonal
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![RegionTag::Antenna; 2],
        )
        .unwrap()
    }

    fn cube() -> TriangleMesh {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
        ];
        // outward-oriented cube surface
        let t = vec![
            [0, 2, 1],
            [0, 3, 2], // bottom (z = 0, normal -z)
            [4, 5, 6],
            [4, 6, 7], // top
            [0, 1, 5],
            [0, 5, 4], // y = 0
            [1, 2, 6],
            [1, 6, 5], // x = 1
            [2, 3, 7],
            [2, 7, 6], // y = 1
            [3, 0, 4],
            [3, 4, 7], // x = 0
        ];
        let n = t.len();
        TriangleMesh::new(v, t, vec![RegionTag::Antenna; n]).unwrap()
    }

    #[test]
    fn plate_has_one_rwg_function() {
        let rwg = build_rwg(&plate()).unwrap();
        assert_eq!(rwg.len(), 1);
        assert_eq!(rwg.electric_index, vec![0]);
        assert!(rwg.magnetic_index.is_empty());
        let e = &rwg.edges[0];
        assert_eq!(e.verts, [0, 2]);
        assert!((e.length - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cube_has_eighteen_interior_edges() {
        let rwg = build_rwg(&cube()).unwrap();
        assert_eq!(rwg.len(), 18);
        // closed surface: E = 3F/2
        assert_eq!(rwg.len(), 3 * 12 / 2);
    }

    #[test]
    fn rwg_orientation_and_continuity() {
        let m = cube();
        let rwg = build_rwg(&m).unwrap();
        for (i, e) in rwg.edges.iter().enumerate() {
            // normal component continuous across the edge: evaluate at the
            // midpoint from both sides
            let mid = (m.vertices[e.verts[0]] + m.vertices[e.verts[1]]) * 0.5;
            let fp = rwg.eval(&m, i, e.tri_plus, mid);
            let fm = rwg.eval(&m, i, e.tri_minus, mid);
            let edge_dir = (m.vertices[e.verts[1]] - m.vertices[e.verts[0]]).normalized();
            // flow across the edge (perpendicular to it, in each face plane)
            let np = m.tri_normal(e.tri_plus).cross(edge_dir);
            let nm = m.tri_normal(e.tri_minus).cross(edge_dir);
            let flux_p = fp.dot(np);
            let flux_m = fm.dot(nm);
            assert!(
                (flux_p - flux_m).abs() < 1e-12,
                "edge {i}: {flux_p} vs {flux_m}"
            );
            assert!(flux_p.abs() > 0.1);
            // charge neutrality: ∫∇·ψ over the support vanishes
            let total = rwg.div(&m, i, e.tri_plus) * m.tri_area(e.tri_plus)
                + rwg.div(&m, i, e.tri_minus) * m.tri_area(e.tri_minus);
            assert!(total.abs() < 1e-12);
        }
    }

    #[test]
    fn port_tags_populate_magnetic_index() {
        // plate whose two triangles form port0: the diagonal is a port-interior edge
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![RegionTag::Port(0); 2],
        )
        .unwrap();
        let rwg = build_rwg(&mesh).unwrap();
        assert_eq!(rwg.magnetic_index, vec![0]);
        assert_eq!(rwg.edges[0].port, Some(0));
        assert_eq!(rwg.magnetic_index_of_port(0), vec![0]);
        assert!(rwg.magnetic_index_of_port(1).is_empty());
    }

    #[test]
    fn disjoint_ports_partition_magnetic_index() {
        // two separated two-triangle squares, each its own port, plus nothing else
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut regions = Vec::new();
        for (p, x0) in [(0u32, 0.0), (1u32, 5.0)] {
            let b = vertices.len();
            vertices.extend([
                Vec3::new(x0, 0.0, 0.0),
                Vec3::new(x0 + 1.0, 0.0, 0.0),
                Vec3::new(x0 + 1.0, 1.0, 0.0),
                Vec3::new(x0, 1.0, 0.0),
            ]);
            triangles.push([b, b + 1, b + 2]);
            triangles.push([b, b + 2, b + 3]);
            regions.extend([RegionTag::Port(p); 2]);
        }
        let mesh = TriangleMesh::new(vertices, triangles, regions).unwrap();
        let rwg = build_rwg(&mesh).unwrap();
        assert_eq!(rwg.magnetic_index.len(), 2);
        assert_eq!(rwg.magnetic_index_of_port(0).len(), 1);
        assert_eq!(rwg.magnetic_index_of_port(1).len(), 1);
    }

    #[test]
    fn single_triangle_port_is_too_coarse() {
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![RegionTag::Port(0), RegionTag::Antenna],
        )
        .unwrap();
        match build_rwg(&mesh) {
            Err(Error::Config(msg)) => assert!(msg.contains("port0")),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_bad_meshes() {
        // vertex index out of range
        let r = TriangleMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 5]],
            vec![RegionTag::Antenna],
        );
        assert!(matches!(r, Err(Error::MeshInvalid(_))));
        // degenerate triangle
        let r = TriangleMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 1]],
            vec![RegionTag::Antenna],
        );
        assert!(matches!(r, Err(Error::MeshInvalid(_))));
        // inconsistent winding: both triangles traverse the diagonal 0→2
        let r = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 2, 0]],
            vec![RegionTag::Antenna; 2],
        );
        match r {
            Err(Error::MeshInvalid(msg)) => assert!(msg.contains("winding")),
            other => panic!("expected winding error, got {other:?}"),
        }
    }

    #[test]
    fn off_round_trip_with_tags() {
        let dir = std::env::temp_dir().join("emgsm-mesh-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let off = dir.join("plate.off");
        std::fs::write(
            &off,
            "OFF\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n",
        )
        .unwrap();
        std::fs::write(dir.join("plate.tags"), "port0\nport0\n").unwrap();
        let mesh = load_mesh(&off, MeshFormat::Off).unwrap();
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.regions, vec![RegionTag::Port(0); 2]);
        let rwg = build_rwg(&mesh).unwrap();
        assert_eq!(rwg.magnetic_index.len(), 1);
    }

    #[test]
    fn off_negative_vertex_index_names_line() {
        let dir = std::env::temp_dir().join("emgsm-mesh-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let off = dir.join("bad.off");
        std::fs::write(
            &off,
            "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 -1\n",
        )
        .unwrap();
        match load_mesh(&off, MeshFormat::Off) {
            Err(Error::MeshParse { line, msg, .. }) => {
                assert_eq!(line, 6);
                assert!(msg.contains("-1"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn gmsh_subset_parses_with_physical_names() {
        let dir = std::env::temp_dir().join("emgsm-mesh-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let msh = dir.join("plate.msh");
        std::fs::write(
            &msh,
            "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
             $PhysicalNames\n2\n2 1 \"antenna\"\n2 2 \"port3\"\n$EndPhysicalNames\n\
             $Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n\
             $Elements\n3\n1 2 2 1 0 1 2 3\n2 2 2 1 0 1 3 4\n3 1 2 2 0 1 2\n$EndElements\n",
        )
        .unwrap();
        let mesh = load_mesh(&msh, MeshFormat::GmshV2).unwrap();
        assert_eq!(mesh.triangles.len(), 2); // the line element is skipped
        assert_eq!(mesh.regions, vec![RegionTag::Antenna; 2]);

        // unknown physical name is a parse error
        std::fs::write(
            dir.join("bad.msh"),
            "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
             $PhysicalNames\n1\n2 1 \"ground\"\n$EndPhysicalNames\n\
             $Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n\
             $Elements\n1\n1 2 2 1 0 1 2 3\n$EndElements\n",
        )
        .unwrap();
        assert!(matches!(
            load_mesh(dir.join("bad.msh"), MeshFormat::GmshV2),
            Err(Error::MeshParse { .. })
        ));
    }

    #[test]
    fn format_from_extension() {
        use std::path::PathBuf;
        assert_eq!(MeshFormat::from_path(&PathBuf::from("a.off")).unwrap(), MeshFormat::Off);
        assert_eq!(MeshFormat::from_path(&PathBuf::from("a.msh")).unwrap(), MeshFormat::GmshV2);
        assert!(MeshFormat::from_path(&PathBuf::from("a.stl")).is_err());
    }
}
