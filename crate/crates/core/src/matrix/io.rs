//! SPCM binary container and a CSV text form for small fixtures.
//!
//! Binary layout: `b"SPCM"`, version `u32`, rows `u64`, cols `u64`, then
//! `rows * cols` little-endian `f64` values in row-major order.

use std::io::{Read, Write};

use super::DenseMatrix;
use crate::error::{Result, SpectraError};

pub const SPCM_MAGIC: [u8; 4] = *b"SPCM";
pub const SPCM_VERSION: u32 = 1;
const HEADER_LEN: u64 = 4 + 4 + 8 + 8;

pub fn write_spcm<W: Write>(w: &mut W, m: &DenseMatrix) -> Result<()> {
    w.write_all(&SPCM_MAGIC)?;
    w.write_all(&SPCM_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(m.len() * 8);
    for x in m.data() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn spcm_bytes(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN as usize + m.len() * 8);
    write_spcm(&mut out, m).expect("writing to a Vec cannot fail");
    out
}

/// Tracks the absolute byte offset so truncation errors can report it.
pub(crate) struct OffsetReader<R> {
    inner: R,
    pub(crate) offset: u64,
}

impl<R: Read> OffsetReader<R> {
    pub(crate) fn new(inner: R, offset: u64) -> Self {
        Self { inner, offset }
    }

    pub(crate) fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(SpectraError::Truncated {
                        offset: self.offset + filled as u64,
                        expected: (buf.len() - filled) as u64,
                    })
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub(crate) fn read_u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub(crate) fn read_u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub(crate) fn read_spcm(&mut self) -> Result<DenseMatrix> {
        let start = self.offset;
        let mut magic = [0u8; 4];
        self.read_exact(&mut magic)?;
        if magic != SPCM_MAGIC {
            return Err(SpectraError::Format(format!("bad matrix magic {magic:?} at byte offset {start}")));
        }
        let version = self.read_u32()?;
        if version != SPCM_VERSION {
            return Err(SpectraError::Format(format!(
                "unsupported matrix version {version} (expected {SPCM_VERSION})"
            )));
        }
        let rows = self.read_u64()?;
        let cols = self.read_u64()?;
        let len = rows
            .checked_mul(cols)
            .filter(|&l| l > 0 && l <= (1 << 34))
            .ok_or_else(|| SpectraError::Format(format!("implausible matrix shape {rows}x{cols}")))?;
        let mut raw = vec![0u8; (len * 8) as usize];
        self.read_exact(&mut raw)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        DenseMatrix::new(rows as usize, cols as usize, data)
    }
}

pub fn read_spcm<R: Read>(r: &mut R) -> Result<DenseMatrix> {
    OffsetReader::new(r, 0).read_spcm()
}

pub fn save_spcm(path: impl AsRef<std::path::Path>, m: &DenseMatrix) -> Result<()> {
    std::fs::write(path, spcm_bytes(m))?;
    Ok(())
}

pub fn load_spcm(path: impl AsRef<std::path::Path>) -> Result<DenseMatrix> {
    let bytes = std::fs::read(path)?;
    read_spcm(&mut bytes.as_slice())
}

/// Comma-separated rows, shortest round-trip float formatting.
pub fn to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn from_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| SpectraError::Format(format!("line {}: cannot parse {t:?}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(SpectraError::Format(format!(
                    "line {}: expected {} values, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SpectraError::Format("empty matrix CSV".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    DenseMatrix::new(r, c, rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::random_gaussian;

    #[test]
    fn binary_round_trip_is_bitwise() {
        let m = random_gaussian(5, 3, 7);
        let bytes = spcm_bytes(&m);
        assert_eq!(bytes.len(), 24 + 15 * 8);
        assert_eq!(&bytes[..4], b"SPCM");
        let back = read_spcm(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn wrong_magic_and_version() {
        let mut bytes = spcm_bytes(&DenseMatrix::identity(2));
        bytes[0] = b'X';
        assert!(matches!(read_spcm(&mut bytes.as_slice()), Err(SpectraError::Format(_))));
        let mut bytes = spcm_bytes(&DenseMatrix::identity(2));
        bytes[4] = 9;
        assert!(matches!(read_spcm(&mut bytes.as_slice()), Err(SpectraError::Format(_))));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = spcm_bytes(&DenseMatrix::identity(2));
        let cut = &bytes[..30];
        match read_spcm(&mut &cut[..]) {
            Err(SpectraError::Truncated { offset, expected }) => {
                assert_eq!(offset, 30);
                assert_eq!(expected, 32 - 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let m = random_gaussian(3, 4, 1);
        assert_eq!(from_csv(&to_csv(&m)).unwrap(), m);
        assert!(from_csv("1,2\n3\n").is_err());
        assert!(from_csv("").is_err());
    }
}
