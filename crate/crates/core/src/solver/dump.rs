//! Plain-text field dump.
//!
//! ```text
//! # starcap field dump v1
//! # m 64
//! # k 32
//! # ring outer=circle(r=2) inner=circle(r=1) factor=euclidean(lambda=1)
//! # q 2
//! # factor euclidean(lambda=1)
//! # columns j i x1 x2 U
//! 0 0 1.0000000000000000e0 0.0000000000000000e0 1.0000000000000000e0
//! ...
//! ```
//!
//! Rows are θ-major (`j` outer, `i` inner) and values use 17 significant digits.

use super::grid::ScalarField;
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

const MAGIC: &str = "# starcap field dump v1";

#[derive(Debug, Clone, PartialEq)]
pub struct DumpHeader {
    pub m: usize,
    pub k: usize,
    pub ring: String,
    pub q: Option<f64>,
    pub factor: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpRow {
    pub j: usize,
    pub i: usize,
    pub x: [f64; 2],
    pub value: f64,
}

pub fn write_dump<W: Write>(field: &ScalarField, out: &mut W) -> Result<()> {
    let g = field.grid();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "# m {}", g.m())?;
    writeln!(out, "# k {}", g.k())?;
    writeln!(out, "# ring {}", g.ring())?;
    match field.exponent() {
        Some(q) => writeln!(out, "# q {q}")?,
        None => writeln!(out, "# q none")?,
    }
    writeln!(out, "# factor {}", g.ring().factor())?;
    writeln!(out, "# columns j i x1 x2 U")?;
    for j in 0..g.m() {
        for i in 0..g.k() {
            let x = g.node(j, i);
            writeln!(out, "{j} {i} {:.16e} {:.16e} {:.16e}", x[0], x[1], field.get(j, i))?;
        }
    }
    Ok(())
}

pub fn read_dump<R: BufRead>(input: R) -> Result<(DumpHeader, Vec<DumpRow>)> {
    let bad = |msg: String| Error::Config(format!("field dump: {msg}"));
    let mut lines = input.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim() != MAGIC {
        return Err(bad(format!("unexpected first line {first:?}")));
    }
    let (mut m, mut k, mut ring, mut q, mut factor) = (None, None, String::new(), None, String::new());
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
            match key {
                "m" => m = value.parse().ok(),
                "k" => k = value.parse().ok(),
                "ring" => ring = value.to_string(),
                "q" => q = value.parse().ok(),
                "factor" => factor = value.to_string(),
                _ => {}
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 5 {
            return Err(bad(format!("line {}: expected 5 columns", lineno + 2)));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("line {}: {e}", lineno + 2)));
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", lineno + 2)));
        rows.push(DumpRow {
            j: int(cols[0])?,
            i: int(cols[1])?,
            x: [num(cols[2])?, num(cols[3])?],
            value: num(cols[4])?,
        });
    }
    let (m, k) = match (m, k) {
        (Some(m), Some(k)) => (m, k),
        _ => return Err(bad("missing grid size".into())),
    };
    if rows.len() != m * k {
        return Err(bad(format!("expected {} rows, found {}", m * k, rows.len())));
    }
    Ok((DumpHeader { m, k, ring, q, factor }, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::StarshapedRing;
    use crate::geometry::RadialConformalFactor;
    use crate::solver::RingGrid;

    #[test]
    fn dump_round_trips_values_exactly() {
        let ring = StarshapedRing::annulus(1.0, 2.0, RadialConformalFactor::sphere(1.0).unwrap()).unwrap();
        let g = RingGrid::new(&ring, 8, 4).unwrap();
        let field = ScalarField::from_fn(&g, |x| (x[0] * 3.1).sin() / 7.0).unwrap().with_exponent(3.0);
        let mut buf = Vec::new();
        write_dump(&field, &mut buf).unwrap();
        let (header, rows) = read_dump(buf.as_slice()).unwrap();
        assert_eq!((header.m, header.k, header.q), (8, 4, Some(3.0)));
        assert_eq!(header.factor, "sphere(r=1)");
        assert_eq!(rows.len(), 32);
        for (n, row) in rows.iter().enumerate() {
            assert_eq!((row.j, row.i), (n / 4, n % 4));
            assert_eq!(row.value, field.values()[n]);
            assert_eq!(row.x, g.nodes()[n]);
        }
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let text = format!("{MAGIC}\n# m 8\n# k 4\n0 0 1 0 1\n");
        assert!(read_dump(text.as_bytes()).is_err());
        assert!(read_dump("garbage\n".as_bytes()).is_err());
    }
}
