//! Field files, CSV tables and atomic writes.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! b"TWFIELD1"
//! u64 n, u64 grid, u64 rows, u64 cols
//! f64 periods[n]
//! i64 row_charges[rows], i64 col_charges[cols]
//! f64 (re, im) pairs: grid points row-major (x1, y1[, x2, y2]), last axis
//!     fastest, each point a row-major rows×cols matrix
//! ```

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::TwistedField;
use crate::flow::Diagnostics;
use crate::geometry::TorusGeometry;

pub const MAGIC: &[u8; 8] = b"TWFIELD1";

/// Writes through a sibling temp file and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("not a file path")))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn field_to_bytes(f: &TwistedField) -> Vec<u8> {
    let g = f.geometry();
    let mut out = Vec::with_capacity(48 + 16 * f.data().len());
    out.extend_from_slice(MAGIC);
    for x in [g.n(), g.grid(), f.rows(), f.cols()] {
        out.extend_from_slice(&(x as u64).to_le_bytes());
    }
    for p in g.periods() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for q in f.row_charges().iter().chain(f.col_charges()) {
        out.extend_from_slice(&q.to_le_bytes());
    }
    for z in f.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self) -> Result<[u8; 8]> {
        let end = self.at + 8;
        let chunk = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| Error::Format(format!("file truncated at byte {}", self.at)))?;
        self.at = end;
        Ok(chunk.try_into().expect("8 bytes"))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<TwistedField> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(Error::Format("missing TWFIELD1 header".into()));
    }
    let mut r = Reader { bytes, at: 8 };
    let n = r.u64()? as usize;
    let grid = r.u64()? as usize;
    let rows = r.u64()? as usize;
    let cols = r.u64()? as usize;
    if !(1..=2).contains(&n) || rows == 0 || cols == 0 || rows > 64 || cols > 64 {
        return Err(Error::Format(format!("implausible header n={n} rows={rows} cols={cols}")));
    }
    let periods = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let geom = TorusGeometry::new(n, &periods, grid).map_err(|e| Error::Format(e.to_string()))?;
    let row_q = (0..rows).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
    let col_q = (0..cols).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
    let len = geom.npoints() * rows * cols;
    if bytes.len() - r.at != 16 * len {
        return Err(Error::Format(format!(
            "payload has {} bytes, header implies {}",
            bytes.len() - r.at,
            16 * len
        )));
    }
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        let re = r.f64()?;
        data.push(C64::new(re, r.f64()?));
    }
    TwistedField::from_data(&geom, &row_q, &col_q, data)
}

pub fn write_field(path: &Path, f: &TwistedField) -> Result<()> {
    atomic_write(path, &field_to_bytes(f))
}

pub fn read_field(path: &Path) -> Result<TwistedField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    field_from_bytes(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// One row per grid point and entry: `point, x1, y1[, x2, y2], i, j, re, im`.
pub fn field_to_csv(f: &TwistedField) -> String {
    let g = f.geometry();
    let mut s = String::from("point");
    let names = ["x1", "y1", "x2", "y2"];
    for name in &names[..g.axes()] {
        s.push(',');
        s.push_str(name);
    }
    s.push_str(",i,j,re,im\n");
    for p in 0..g.npoints() {
        let c = g.coords(p);
        let m = f.at(p);
        for i in 0..f.rows() {
            for j in 0..f.cols() {
                let _ = write!(s, "{p}");
                for x in &c[..g.axes()] {
                    let _ = write!(s, ",{x}");
                }
                let z = m[i * f.cols() + j];
                let _ = writeln!(s, ",{i},{j},{},{}", z.re, z.im);
            }
        }
    }
    s
}

pub fn diagnostics_csv(d: &Diagnostics) -> String {
    let mut s = String::from("t,residual,sup_h,trace_integral,dissipation,det_defect,dt\n");
    for i in 0..d.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            d.t[i], d.residual[i], d.sup_h[i], d.trace_integral[i], d.dissipation[i], d.det_defect[i], d.dt[i]
        );
    }
    s
}

/// `k, cells` for the pointwise count of small eigenvalues.
pub fn histogram_csv(histogram: &[usize]) -> String {
    let mut s = String::from("k,cells\n");
    for (k, c) in histogram.iter().enumerate() {
        let _ = writeln!(s, "{k},{c}");
    }
    s
}

/// `point, lambda_0, …` with ascending eigenvalues.
pub fn spectrum_csv(spectrum: &[Vec<f64>]) -> String {
    let r = spectrum.first().map_or(0, Vec::len);
    let mut s = String::from("point");
    for i in 0..r {
        let _ = write!(s, ",lambda_{i}");
    }
    s.push('\n');
    for (p, ev) in spectrum.iter().enumerate() {
        let _ = write!(s, "{p}");
        for x in ev {
            let _ = write!(s, ",{x}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn binary_round_trip() {
        for n in [1, 2] {
            let g = TorusGeometry::new(n, &vec![2.5; n], 16).unwrap();
            let spec = presets::build("unstable_extension_r2", &g, None, 3, None).unwrap();
            let f = &spec.a()[0];
            let back = field_from_bytes(&field_to_bytes(f)).unwrap();
            assert_eq!(&back, f);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let f = TwistedField::identity(&g, &[1, -1]);
        let bytes = field_to_bytes(&f);
        assert!(field_from_bytes(&bytes[..bytes.len() - 8]).is_err());
        assert!(field_from_bytes(b"NOTAFIELD").is_err());
        let mut bad = bytes.clone();
        bad[16] = 7; // grid 7
        assert!(field_from_bytes(&bad).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn csv_shapes() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let f = TwistedField::identity(&g, &[0, 1]);
        let csv = field_to_csv(&f);
        assert_eq!(csv.lines().count(), 1 + 256 * 4);
        assert!(csv.starts_with("point,x1,y1,i,j,re,im\n"));
        assert_eq!(histogram_csv(&[1, 2]), "k,cells\n0,1\n1,2\n");
    }
}
