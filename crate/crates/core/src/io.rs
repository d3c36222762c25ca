//! Serialization: the coefficient container, JSON helpers, and simple
//! image/table exports.
//!
//! Container layout (all little-endian):
//!   magic "XAMP", version u8, scheme u8 (0 direct, 1 lowpass, 2 multiband),
//!   bands u32 (0 unless multiband), N u32, P u32, K u32, pri_tau f64,
//!   kappa as K x u32, H[kappa] as K x (f32 re, f32 im),
//!   coefficients column-major as K*P x (f32 re, f32 im).
//! Complex values are stored as f32 pairs, so a round trip preserves them to
//! about 1e-6 relative, not bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read as _, Write as _};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::xampling::{FrequencyIndexSet, Scheme, XampledData};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"XAMP";
const VERSION: u8 = 1;

/// Serde adapter storing `Vec<Complex64>` as `[[re, im], ...]`.
pub mod complex_pairs {
    use num_complex::Complex64;
    use serde::de::{Deserialize, Deserializer};
    use serde::ser::{SerializeSeq, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for z in v {
            seq.serialize_element(&[z.re, z.im])?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }
}

fn scheme_tag(scheme: Scheme) -> (u8, u32) {
    match scheme {
        Scheme::Direct => (0, 0),
        Scheme::Lowpass => (1, 0),
        Scheme::Multiband { bands } => (2, bands as u32),
    }
}

fn scheme_from_tag(tag: u8, bands: u32) -> Result<Scheme> {
    match tag {
        0 => Ok(Scheme::Direct),
        1 => Ok(Scheme::Lowpass),
        2 => Ok(Scheme::Multiband {
            bands: bands as usize,
        }),
        other => Err(Error::Container(format!("unknown scheme tag {other}"))),
    }
}

/// Write the binary container plus a JSON sidecar mirror at `<path>.json`.
pub fn write_xampled(path: &Path, data: &XampledData) -> Result<()> {
    let k = data.kappa.len();
    let p = data.pulses();
    if data.coeffs.nrows() != k || data.h_kappa.len() != k {
        return Err(Error::DimensionMismatch(
            "coefficient rows do not match kappa".into(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    let (tag, bands) = scheme_tag(data.kappa.scheme);
    w.write_all(&[tag])?;
    w.write_all(&bands.to_le_bytes())?;
    w.write_all(&(data.n_bins as u32).to_le_bytes())?;
    w.write_all(&(p as u32).to_le_bytes())?;
    w.write_all(&(k as u32).to_le_bytes())?;
    w.write_all(&data.pri_tau.to_le_bytes())?;
    for &idx in &data.kappa.indices {
        w.write_all(&(idx as u32).to_le_bytes())?;
    }
    for h in &data.h_kappa {
        w.write_all(&(h.re as f32).to_le_bytes())?;
        w.write_all(&(h.im as f32).to_le_bytes())?;
    }
    for col in 0..p {
        for row in 0..k {
            let z = data.coeffs[(row, col)];
            w.write_all(&(z.re as f32).to_le_bytes())?;
            w.write_all(&(z.im as f32).to_le_bytes())?;
        }
    }
    w.flush()?;

    let sidecar = serde_json::json!({
        "n_bins": data.n_bins,
        "pulses": p,
        "k": k,
        "scheme": data.kappa.scheme,
        "pri_tau": data.pri_tau,
        "kappa": data.kappa.indices,
        "h_kappa": data.h_kappa.iter().map(|z| vec![z.re, z.im]).collect::<Vec<_>>(),
        "coeffs": (0..p).map(|col| {
            (0..k).map(|row| {
                let z = data.coeffs[(row, col)];
                vec![z.re, z.im]
            }).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
    });
    let json_path = path.with_extension(match path.extension() {
        Some(e) => format!("{}.json", e.to_string_lossy()),
        None => "json".to_string(),
    });
    serde_json::to_writer_pretty(BufWriter::new(File::create(json_path)?), &sidecar)?;
    Ok(())
}

fn read_u32(r: &mut impl std::io::Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut impl std::io::Read) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

/// Read the binary container (the sidecar is ignored).
pub fn read_xampled(path: &Path) -> Result<XampledData> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    if head[0] != VERSION {
        return Err(Error::Container(format!("unsupported version {}", head[0])));
    }
    let bands = read_u32(&mut r)?;
    let scheme = scheme_from_tag(head[1], bands)?;
    let n = read_u32(&mut r)? as usize;
    let p = read_u32(&mut r)? as usize;
    let k = read_u32(&mut r)? as usize;
    let mut tau_b = [0u8; 8];
    r.read_exact(&mut tau_b)?;
    let pri_tau = f64::from_le_bytes(tau_b);
    if k == 0 || k > n || p == 0 {
        return Err(Error::Container(format!("bad dimensions N={n} P={p} K={k}")));
    }
    let mut indices = Vec::with_capacity(k);
    for _ in 0..k {
        indices.push(read_u32(&mut r)? as usize);
    }
    let kappa = FrequencyIndexSet { indices, scheme };
    kappa.validate_for(n)?;
    let mut h_kappa = Vec::with_capacity(k);
    for _ in 0..k {
        let re = read_f32(&mut r)? as f64;
        let im = read_f32(&mut r)? as f64;
        h_kappa.push(Complex64::new(re, im));
    }
    let mut coeffs = DMatrix::<Complex64>::zeros(k, p);
    for col in 0..p {
        for row in 0..k {
            let re = read_f32(&mut r)? as f64;
            let im = read_f32(&mut r)? as f64;
            coeffs[(row, col)] = Complex64::new(re, im);
        }
    }
    Ok(XampledData {
        coeffs,
        kappa,
        n_bins: n,
        pri_tau,
        h_kappa,
    })
}

/// 8-bit binary PGM of a real matrix, linearly mapped min..max -> 0..255.
pub fn write_pgm(path: &Path, image: &DMatrix<f64>) -> Result<()> {
    if image.is_empty() {
        return Err(Error::EmptyInput("image".into()));
    }
    let lo = image.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = image.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidInput("image contains non-finite values".into()));
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", image.ncols(), image.nrows())?;
    for row in 0..image.nrows() {
        for col in 0..image.ncols() {
            let v = ((image[(row, col)] - lo) / span * 255.0).round().clamp(0.0, 255.0);
            w.write_all(&[v as u8])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plain CSV of a real matrix, one row per line.
pub fn write_csv(path: &Path, table: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in 0..table.nrows() {
        let line: Vec<String> = (0..table.ncols())
            .map(|col| format!("{:.12e}", table[(row, col)]))
            .collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
