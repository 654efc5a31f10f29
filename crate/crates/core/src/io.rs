use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::process::PathEnsemble;

pub const MAGIC: &[u8; 4] = b"LSE1";
const HEADER_LEN: usize = 16;
pub const CSV_HEADER: &str = "replicate,index,value";

/// Sibling file holding the coupled copy: `paths.csv` becomes `paths.star.csv`.
pub fn star_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.star.{}", ext.to_string_lossy()),
        None => format!("{stem}.star"),
    };
    path.with_file_name(name)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Write `replicate,index,value` rows; `index` is 1-based.
pub fn write_matrix_csv(path: &Path, values: &Array2<f64>) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::with_capacity(values.len() * 24 + 32);
    body.push_str(CSV_HEADER);
    body.push('\n');
    for (r, row) in values.rows().into_iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            body.push_str(&format!("{r},{},{v}\n", i + 1));
        }
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Little-endian row-major `f64` matrix behind a 16-byte header:
/// magic, rows (u32), cols (u32), four reserved zero bytes.
pub fn write_matrix_bin(path: &Path, values: &Array2<f64>) -> Result<()> {
    let (rows, cols) = values.dim();
    let to_u32 = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("{what} {n} exceeds the binary format limit")))
    };
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&to_u32(rows, "row count")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(cols, "column count")?.to_le_bytes());
    buf.extend_from_slice(&[0u8; 4]);
    for v in values.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Export an ensemble; the coupled copy, if any, goes to [`star_path`].
pub fn write_paths(path: &Path, ens: &PathEnsemble, binary: bool) -> Result<()> {
    let write = |p: &Path, m: &Array2<f64>| {
        if binary {
            write_matrix_bin(p, m)
        } else {
            write_matrix_csv(p, m)
        }
    };
    write(path, &ens.values)?;
    if let Some(c) = &ens.coupled {
        write(&star_path(path), c)?;
    }
    Ok(())
}

fn parse_bin(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header".into()));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| bad(format!("dimensions {rows}x{cols} overflow")))?;
    if bytes.len() != expected {
        return Err(bad(format!(
            "{rows}x{cols} matrix needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("checked length"))
}

fn parse_csv(path: &Path, text: &str) -> Result<Array2<f64>> {
    let bad = |line: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((i, h)) => return Err(bad(i + 1, format!("expected header `{CSV_HEADER}`, found `{h}`"))),
        None => return Err(bad(1, "empty file".into())),
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(bad(i + 1, format!("expected 3 fields, found {}", fields.len())));
        }
        let r: usize = fields[0]
            .parse()
            .map_err(|_| bad(i + 1, format!("bad replicate `{}`", fields[0])))?;
        let idx: usize = fields[1]
            .parse()
            .map_err(|_| bad(i + 1, format!("bad index `{}`", fields[1])))?;
        let v: f64 = fields[2]
            .parse()
            .map_err(|_| bad(i + 1, format!("bad value `{}`", fields[2])))?;
        if r == rows.len() {
            rows.push(Vec::new());
        } else if r + 1 != rows.len() {
            return Err(bad(i + 1, format!("replicate {r} out of order")));
        }
        let row = rows.last_mut().expect("pushed above");
        if idx != row.len() + 1 {
            return Err(bad(i + 1, format!("index {idx} out of order in replicate {r}")));
        }
        row.push(v);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 {
        return Err(bad(2, "no observations".into()));
    }
    if let Some(r) = rows.iter().position(|row| row.len() != cols) {
        return Err(bad(0, format!("replicate {r} has {} values, replicate 0 has {cols}", rows[r].len())));
    }
    let nrows = rows.len();
    Ok(Array2::from_shape_vec((nrows, cols), rows.concat()).expect("rectangular"))
}

/// Read a path matrix in either format, detected by the magic bytes.
pub fn read_paths(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        return parse_bin(path, &bytes);
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::Format {
        path: path.to_path_buf(),
        reason: "neither LSE1 binary nor UTF-8 text".into(),
    })?;
    parse_csv(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{simulate_coupled_pair, ProcessModel, ProcessSpec};

    fn sample() -> Array2<f64> {
        Array2::from_shape_fn((3, 5), |(r, i)| (r as f64 + 1.0) * 0.1f64.powi(i as i32) - 0.3)
    }

    #[test]
    fn binary_round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = sample();
        write_matrix_bin(&p, &m).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"LSE1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 5);
        assert_eq!(&bytes[12..16], &[0, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 8 * 15);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), m[[0, 0]]);
        assert_eq!(read_paths(&p).unwrap(), m);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = sample();
        write_matrix_csv(&p, &m).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("replicate,index,value\n0,1,"));
        assert_eq!(text.lines().count(), 16);
        assert_eq!(read_paths(&p).unwrap(), m);
    }

    #[test]
    fn coupled_copy_goes_to_star_file() {
        let dir = tempfile::tempdir().unwrap();
        let model = ProcessModel::new(ProcessSpec::iid_gaussian()).unwrap();
        let ens = simulate_coupled_pair(&model, 6, 2, 2, 3, None).unwrap();
        let p = dir.path().join("pair.csv");
        write_paths(&p, &ens, false).unwrap();
        assert_eq!(star_path(&p), dir.path().join("pair.star.csv"));
        assert_eq!(read_paths(&p).unwrap(), ens.values);
        assert_eq!(&read_paths(&star_path(&p)).unwrap(), ens.coupled.as_ref().unwrap());
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        fs::write(&p, b"LSE1\x02\0\0\0\x02\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(read_paths(&p), Err(Error::Format { .. })));
        fs::write(&p, "a,b\n").unwrap();
        assert!(matches!(read_paths(&p), Err(Error::Format { .. })));
        fs::write(&p, "replicate,index,value\n0,2,1.0\n").unwrap();
        assert!(matches!(read_paths(&p), Err(Error::Format { .. })));
        fs::write(&p, "replicate,index,value\n0,1,1.0\n0,2,2\n1,1,3\n").unwrap();
        assert!(matches!(read_paths(&p), Err(Error::Format { .. })));
        let missing = dir.path().join("missing.csv");
        match read_paths(&missing) {
            Err(Error::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("{other:?}"),
        }
    }
}
