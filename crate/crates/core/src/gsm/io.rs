//! GSM container files, Touchstone export and far-field CSV tables.
//!
//! The container is self-describing and fully little-endian: a fixed header
//! (frequency, wavenumber, spherical truncation, formulation, port mode
//! labels) followed by the dense blocks `Γ, R, T, S` in column-major order
//! as `f64` (re, im) pairs, or by the factored spectrum of a compressed GSM.
//! All writes are deterministic: identical inputs produce identical bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use faer::Mat;

use super::{CompressedGsm, Gsm, SpectrumKind};
use crate::mom::{Formulation, PortModeRef};
use crate::sphwave::{FarField, SphericalBasis};
use crate::waveguide::{ModeLabel, WaveguideMode};
use crate::{Error, Result, C64};

const MAGIC: &[u8; 8] = b"EMGSM1\0\0";

/// Contents of a GSM container file.
pub enum GsmFile {
    Full(Gsm),
    Compressed(CompressedGsm),
}

fn err(path: &Path, msg: impl Into<String>) -> Error {
    Error::FileFormat { path: path.display().to_string(), msg: msg.into() }
}

fn write_c64<W: Write>(w: &mut W, c: C64) -> std::io::Result<()> {
    w.write_f64::<LittleEndian>(c.re)?;
    w.write_f64::<LittleEndian>(c.im)
}

fn read_c64<R: Read>(r: &mut R) -> std::io::Result<C64> {
    let re = r.read_f64::<LittleEndian>()?;
    let im = r.read_f64::<LittleEndian>()?;
    Ok(C64::new(re, im))
}

fn write_mat<W: Write>(w: &mut W, m: &Mat<C64>) -> std::io::Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            write_c64(w, m[(i, j)])?;
        }
    }
    Ok(())
}

fn read_mat<R: Read>(r: &mut R, rows: usize, cols: usize) -> std::io::Result<Mat<C64>> {
    let mut m = Mat::<C64>::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = read_c64(r)?;
        }
    }
    Ok(m)
}

fn write_port_mode<W: Write>(w: &mut W, m: &PortModeRef) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(m.port)?;
    let (fam, mi, ni) = match m.mode.label {
        ModeLabel::Tem => (0u8, 0u32, 0u32),
        ModeLabel::Te(a, b) => (1, a, b),
        ModeLabel::Tm(a, b) => (2, a, b),
    };
    w.write_u8(fam)?;
    w.write_u32::<LittleEndian>(mi)?;
    w.write_u32::<LittleEndian>(ni)?;
    w.write_f64::<LittleEndian>(m.mode.k_c)?;
    write_c64(w, m.mode.beta)?;
    write_c64(w, m.mode.eta)?;
    w.write_u8(m.mode.propagating as u8)?;
    w.write_f64::<LittleEndian>(m.mode.norm)
}

fn read_port_mode<R: Read>(r: &mut R, path: &Path) -> Result<PortModeRef> {
    let port = r.read_u32::<LittleEndian>()?;
    let fam = r.read_u8()?;
    let mi = r.read_u32::<LittleEndian>()?;
    let ni = r.read_u32::<LittleEndian>()?;
    let label = match fam {
        0 => ModeLabel::Tem,
        1 => ModeLabel::Te(mi, ni),
        2 => ModeLabel::Tm(mi, ni),
        x => return Err(err(path, format!("unknown mode family tag {x}"))),
    };
    let k_c = r.read_f64::<LittleEndian>()?;
    let beta = read_c64(r)?;
    let eta = read_c64(r)?;
    let propagating = r.read_u8()? != 0;
    let norm = r.read_f64::<LittleEndian>()?;
    Ok(PortModeRef {
        port,
        mode: WaveguideMode { label, k_c, beta, eta, propagating, norm },
    })
}

/// Write a full GSM container.
pub fn write_gsm(path: impl AsRef<Path>, gsm: &Gsm) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u8(0)?; // full
    w.write_u8(match gsm.formulation {
        Formulation::Magnetic => 0,
        Formulation::Electric => 1,
    })?;
    w.write_u16::<LittleEndian>(0)?;
    w.write_f64::<LittleEndian>(gsm.frequency)?;
    w.write_f64::<LittleEndian>(gsm.k)?;
    w.write_u32::<LittleEndian>(gsm.spherical.l_max as u32)?;
    w.write_u32::<LittleEndian>(gsm.spherical.len() as u32)?;
    w.write_u32::<LittleEndian>(gsm.n_port_modes() as u32)?;
    for m in &gsm.port_modes {
        write_port_mode(&mut w, m)?;
    }
    for block in [&gsm.gamma, &gsm.r, &gsm.t, &gsm.s] {
        write_mat(&mut w, block)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a compressed GSM container.
pub fn write_compressed(path: impl AsRef<Path>, c: &CompressedGsm) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u8(1)?; // compressed
    w.write_u8(match c.kind {
        SpectrumKind::Eigen => 0,
        SpectrumKind::Singular => 1,
    })?;
    w.write_u16::<LittleEndian>(0)?;
    w.write_f64::<LittleEndian>(c.frequency)?;
    w.write_f64::<LittleEndian>(c.k)?;
    w.write_u32::<LittleEndian>(c.l_max as u32)?;
    w.write_f64::<LittleEndian>(c.iota)?;
    w.write_u32::<LittleEndian>(c.dim as u32)?;
    w.write_u32::<LittleEndian>(c.m_p as u32)?;
    for m in &c.port_modes {
        write_port_mode(&mut w, m)?;
    }
    w.write_u32::<LittleEndian>(c.retained() as u32)?;
    for &v in &c.values {
        write_c64(&mut w, v)?;
    }
    write_mat(&mut w, &c.left)?;
    w.write_u8(c.right.is_some() as u8)?;
    if let Some(right) = &c.right {
        write_mat(&mut w, right)?;
    }
    w.flush()?;
    Ok(())
}

/// Read either container variant.
pub fn read_gsm_file(path: impl AsRef<Path>) -> Result<GsmFile> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(err(path, "not a GSM container (bad magic)"));
    }
    let variant = r.read_u8()?;
    match variant {
        0 => {
            let formulation = match r.read_u8()? {
                0 => Formulation::Magnetic,
                1 => Formulation::Electric,
                x => return Err(err(path, format!("unknown formulation tag {x}"))),
            };
            r.read_u16::<LittleEndian>()?;
            let frequency = r.read_f64::<LittleEndian>()?;
            let k = r.read_f64::<LittleEndian>()?;
            let l_max = r.read_u32::<LittleEndian>()? as usize;
            let jdim = r.read_u32::<LittleEndian>()? as usize;
            let m_p = r.read_u32::<LittleEndian>()? as usize;
            let spherical = SphericalBasis::new(k, l_max)
                .map_err(|e| err(path, format!("invalid basis parameters: {e}")))?;
            if spherical.len() != jdim {
                return Err(err(
                    path,
                    format!("basis size {} does not match header J = {jdim}", spherical.len()),
                ));
            }
            let mut port_modes = Vec::with_capacity(m_p);
            for _ in 0..m_p {
                port_modes.push(read_port_mode(&mut r, path)?);
            }
            let gamma = read_mat(&mut r, m_p, m_p)?;
            let rb = read_mat(&mut r, m_p, jdim)?;
            let t = read_mat(&mut r, jdim, m_p)?;
            let s = read_mat(&mut r, jdim, jdim)?;
            Ok(GsmFile::Full(Gsm {
                k,
                frequency,
                formulation,
                port_modes,
                spherical,
                gamma,
                r: rb,
                t,
                s,
            }))
        }
        1 => {
            let kind = match r.read_u8()? {
                0 => SpectrumKind::Eigen,
                1 => SpectrumKind::Singular,
                x => return Err(err(path, format!("unknown spectrum kind tag {x}"))),
            };
            r.read_u16::<LittleEndian>()?;
            let frequency = r.read_f64::<LittleEndian>()?;
            let k = r.read_f64::<LittleEndian>()?;
            let l_max = r.read_u32::<LittleEndian>()? as usize;
            let iota = r.read_f64::<LittleEndian>()?;
            let dim = r.read_u32::<LittleEndian>()? as usize;
            let m_p = r.read_u32::<LittleEndian>()? as usize;
            let mut port_modes = Vec::with_capacity(m_p);
            for _ in 0..m_p {
                port_modes.push(read_port_mode(&mut r, path)?);
            }
            let n = r.read_u32::<LittleEndian>()? as usize;
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                values.push(read_c64(&mut r)?);
            }
            let left = read_mat(&mut r, dim, n)?;
            let right = if r.read_u8()? != 0 {
                Some(read_mat(&mut r, dim, n)?)
            } else {
                None
            };
            Ok(GsmFile::Compressed(CompressedGsm {
                kind,
                values,
                left,
                right,
                iota,
                dim,
                m_p,
                k,
                frequency,
                l_max,
                port_modes,
            }))
        }
        x => Err(err(path, format!("unknown container variant {x}"))),
    }
}

/// Write the port S-parameter blocks of a frequency sweep as Touchstone v1
/// (`# Hz S MA R 50`), one frequency block per sweep point.
///
/// All matrices must share the port-mode layout of `labels`. The 2-port data
/// ordering follows the Touchstone v1 convention (S11 S21 S12 S22); larger
/// networks are written row by row, at most four entries per line.
pub fn write_touchstone(
    path: impl AsRef<Path>,
    labels: &[String],
    points: &[(f64, Mat<C64>)],
) -> Result<()> {
    let path = path.as_ref();
    let n = labels.len();
    if n == 0 {
        return Err(Error::argument("cannot write a Touchstone file with zero ports"));
    }
    for (f, g) in points {
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::argument(format!(
                "S-matrix at {f} Hz is {}×{}, expected {n}×{n}",
                g.nrows(),
                g.ncols()
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    for (i, l) in labels.iter().enumerate() {
        writeln!(w, "! port {} : {}", i + 1, l)?;
    }
    writeln!(w, "# Hz S MA R 50")?;
    let fmt = |c: C64| format!("{:.12e} {:.8}", c.norm(), c.arg().to_degrees());
    for (f, g) in points {
        if n == 2 {
            writeln!(
                w,
                "{:.6e} {} {} {} {}",
                f,
                fmt(g[(0, 0)]),
                fmt(g[(1, 0)]),
                fmt(g[(0, 1)]),
                fmt(g[(1, 1)])
            )?;
        } else {
            // row-major, one matrix row per line group, ≤ 4 entries per line
            let mut header = format!("{:.6e}", f);
            for i in 0..n {
                let mut line = std::mem::take(&mut header);
                for j in 0..n {
                    if j > 0 && j % 4 == 0 {
                        writeln!(w, "{line}")?;
                        line = String::new();
                    }
                    line += &format!(" {}", fmt(g[(i, j)]));
                }
                writeln!(w, "{line}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Tabulate a far-field pattern on a regular (θ, φ) grid as CSV with columns
/// `theta_deg, phi_deg, re_e_theta, im_e_theta, re_e_phi, im_e_phi, gain_dbi`.
pub fn write_farfield_csv(
    path: impl AsRef<Path>,
    far: &FarField<'_>,
    n_theta: usize,
    n_phi: usize,
) -> Result<()> {
    if n_theta < 2 || n_phi < 1 {
        return Err(Error::argument("far-field grid needs n_theta ≥ 2 and n_phi ≥ 1"));
    }
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "theta_deg,phi_deg,re_e_theta,im_e_theta,re_e_phi,im_e_phi,gain_dbi")?;
    for it in 0..n_theta {
        let theta = std::f64::consts::PI * it as f64 / (n_theta - 1) as f64;
        for ip in 0..n_phi {
            let phi = std::f64::consts::TAU * ip as f64 / n_phi as f64;
            let (et, ep) = far.eval(theta, phi);
            let gain_dbi = 10.0 * far.gain(theta, phi).max(1e-300).log10();
            writeln!(
                w,
                "{:.6},{:.6},{:.9e},{:.9e},{:.9e},{:.9e},{:.4}",
                theta.to_degrees(),
                phi.to_degrees(),
                et.re,
                et.im,
                ep.re,
                ep.im,
                gain_dbi
            )?;
        }
    }
    w.flush()?;
    Ok(())
}
