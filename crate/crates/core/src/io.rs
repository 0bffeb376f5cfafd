//! File formats: plain-text streams, a binary matrix container and CSV records.
//!
//! Streams hold one decimal real per line; blank lines are skipped. Reals are
//! written in shortest round-trip form, so a write/read cycle is exact.
//!
//! The matrix container is little-endian:
//!
//! ```text
//! b"RCSM" | u32 version | u64 m | u64 n | u8 kind | u64 seed | m*n f64 row-major
//! ```

use std::io::{BufRead, Read, Write};

use crate::decoder::Emission;
use crate::error::{Error, Result};
use crate::numkernel::DenseMatrix;
use crate::sensing::{Ensemble, SensingMatrix};

const MAGIC: &[u8; 4] = b"RCSM";
const VERSION: u32 = 1;

pub fn write_stream<W: Write>(mut w: W, values: &[f64]) -> Result<()> {
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stream<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|e| Error::Parse {
            line: k + 1,
            message: format!("{e}: {t:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: k + 1,
                message: format!("non-finite value {t:?}"),
            });
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_matrix<W: Write>(mut w: W, a: &SensingMatrix) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(a.m() as u64).to_le_bytes())?;
    w.write_all(&(a.n() as u64).to_le_bytes())?;
    w.write_all(&[a.kind().tag()])?;
    w.write_all(&a.seed().to_le_bytes())?;
    for v in a.base().as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn header_err(message: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        message: message.into(),
    }
}

fn read_array<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<SensingMatrix> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(header_err("not a matrix container"));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(header_err(format!("unsupported container version {version}")));
    }
    let m = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let [tag] = read_array::<1, _>(&mut r)?;
    let kind = Ensemble::from_tag(tag).ok_or_else(|| header_err(format!("unknown ensemble tag {tag}")))?;
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let cells = m
        .checked_mul(n)
        .filter(|&c| c as u64 <= 1 << 32)
        .ok_or_else(|| header_err(format!("implausible shape {m} x {n}")))?;
    let mut data = Vec::with_capacity(cells);
    for _ in 0..cells {
        data.push(f64::from_le_bytes(read_array(&mut r)?));
    }
    SensingMatrix::from_parts(DenseMatrix::from_vec(m, n, data)?, kind, seed)
}

pub const EMISSION_HEADER: &str = "global_index,x_bar,votes,recoveries,finalized_at_window";

pub fn write_emissions<W: Write>(mut w: W, emissions: &[Emission]) -> Result<()> {
    writeln!(w, "{EMISSION_HEADER}")?;
    for e in emissions {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.global_index, e.x_bar, e.votes, e.recoveries, e.finalized_at_window
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the experiment summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment_id: String,
    pub n: usize,
    pub tau: usize,
    pub m: usize,
    pub sigma: f64,
    pub seed: u64,
    pub metric_name: String,
    pub value: f64,
}

pub const SUMMARY_HEADER: &str = "experiment_id,n,tau,m,sigma,seed,metric_name,value";

pub fn write_summary<W: Write>(mut w: W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.experiment_id, r.n, r.tau, r.m, r.sigma, r.seed, r.metric_name, r.value
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Measurement trace: one row per window, `window_index,y0,...,y{m-1}`.
pub fn write_trace<W: Write>(mut w: W, m: usize, rows: &[(usize, Vec<f64>)]) -> Result<()> {
    write!(w, "window_index")?;
    for k in 0..m {
        write!(w, ",y{k}")?;
    }
    writeln!(w)?;
    for (i, y) in rows {
        write!(w, "{i}")?;
        for v in y {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::gen_achlioptas;
    use proptest::prelude::*;

    #[test]
    fn matrix_round_trip() {
        let a = gen_achlioptas(5, 9, 31).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &a).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 1 + 8 + 45 * 8);
        let b = read_matrix(buf.as_slice()).unwrap();
        assert_eq!(a, b);

        buf[0] = b'X';
        assert!(read_matrix(buf.as_slice()).is_err());
    }

    #[test]
    fn stream_parse_errors_carry_line() {
        let err = read_stream("1.0\n\nabc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert_eq!(read_stream("".as_bytes()).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_emissions(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{EMISSION_HEADER}\n"));
        let mut buf = Vec::new();
        write_trace(&mut buf, 2, &[(0, vec![1.5, -2.0])]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "window_index,y0,y1\n0,1.5,-2\n");
    }

    proptest! {
        #[test]
        fn stream_text_round_trip(values in prop::collection::vec(-1e6f64..1e6, 0..50)) {
            let mut buf = Vec::new();
            write_stream(&mut buf, &values).unwrap();
            prop_assert_eq!(read_stream(buf.as_slice()).unwrap(), values);
        }
    }
}
