//! Portable text serializations: run-length-encoded cell masks and the
//! decimal operator format used by report artifacts.

use ndarray::{Array1, Array2};

use crate::grid::{Axis, Boundary, OpenSet};
use crate::operator::AxisOperator;
use crate::{Error, Result};

/// Run-length encoding of an open set: `n1 n2 : v0xc0 v1xc1 ...` in
/// row-major order, `v` in `{0,1}`.
pub fn openset_to_rle(set: &OpenSet) -> String {
    let (n1, n2) = set.mask.dim();
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &b in set.mask.iter() {
        match runs.last_mut() {
            Some((v, c)) if *v == b => *c += 1,
            _ => runs.push((b, 1)),
        }
    }
    let body: Vec<String> = runs
        .iter()
        .map(|(v, c)| format!("{}x{}", if *v { 1 } else { 0 }, c))
        .collect();
    format!("{} {} : {}", n1, n2, body.join(" "))
}

pub fn openset_from_rle(s: &str, axis1: Axis, axis2: Axis) -> Result<OpenSet> {
    let (head, body) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse("missing ':' in RLE".into()))?;
    let dims: Vec<usize> = head
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad dimension {t}"))))
        .collect::<Result<_>>()?;
    if dims.len() != 2 || dims[0] != axis1.n_cells || dims[1] != axis2.n_cells {
        return Err(Error::Parse("RLE dimensions do not match axes".into()));
    }
    let mut flat = Vec::with_capacity(dims[0] * dims[1]);
    for tok in body.split_whitespace() {
        let (v, c) = tok
            .split_once('x')
            .ok_or_else(|| Error::Parse(format!("bad run {tok}")))?;
        let val = match v {
            "0" => false,
            "1" => true,
            _ => return Err(Error::Parse(format!("bad run value {v}"))),
        };
        let count: usize = c.parse().map_err(|_| Error::Parse(format!("bad run count {c}")))?;
        flat.extend(std::iter::repeat(val).take(count));
    }
    if flat.len() != dims[0] * dims[1] {
        return Err(Error::Parse("RLE length mismatch".into()));
    }
    let mask = Array2::from_shape_vec((dims[0], dims[1]), flat)
        .map_err(|e| Error::Parse(e.to_string()))?;
    OpenSet::new(axis1, axis2, mask)
}

/// Decimal text format for an operator: axis metadata, eigenvalues, then
/// the eigenvector matrix row-major, 17 significant digits.
pub fn operator_to_text(op: &AxisOperator) -> String {
    let mut out = String::new();
    let b = match op.axis.boundary {
        Boundary::Dirichlet => "dirichlet",
        Boundary::Periodic => "periodic",
    };
    out.push_str(&format!(
        "axis {} {:.16e} {:.16e} {}\n",
        op.axis.n_cells, op.axis.h, op.axis.origin, b
    ));
    out.push_str("eigenvalues");
    for v in op.eigenvalues.iter() {
        out.push_str(&format!(" {:.16e}", v));
    }
    out.push('\n');
    out.push_str("eigenvectors\n");
    for i in 0..op.n() {
        let row: Vec<String> = (0..op.n())
            .map(|j| format!("{:.16e}", op.eigenvectors[[i, j]]))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn operator_from_text(s: &str) -> Result<AxisOperator> {
    let mut lines = s.lines();
    let head = lines.next().ok_or_else(|| Error::Parse("empty operator text".into()))?;
    let toks: Vec<&str> = head.split_whitespace().collect();
    if toks.len() != 5 || toks[0] != "axis" {
        return Err(Error::Parse("bad axis header".into()));
    }
    let n: usize = toks[1].parse().map_err(|_| Error::Parse("bad n".into()))?;
    let h: f64 = toks[2].parse().map_err(|_| Error::Parse("bad h".into()))?;
    let origin: f64 = toks[3].parse().map_err(|_| Error::Parse("bad origin".into()))?;
    let boundary = match toks[4] {
        "dirichlet" => Boundary::Dirichlet,
        "periodic" => Boundary::Periodic,
        other => return Err(Error::Parse(format!("bad boundary {other}"))),
    };
    let axis = Axis::new(n, h, origin, boundary)?;
    let ev_line = lines.next().ok_or_else(|| Error::Parse("missing eigenvalues".into()))?;
    let mut ev_tok = ev_line.split_whitespace();
    if ev_tok.next() != Some("eigenvalues") {
        return Err(Error::Parse("missing eigenvalues header".into()));
    }
    let eigenvalues: Array1<f64> = ev_tok
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad eigenvalue {t}"))))
        .collect::<Result<Vec<_>>>()?
        .into();
    if eigenvalues.len() != n {
        return Err(Error::Parse("eigenvalue count mismatch".into()));
    }
    if lines.next() != Some("eigenvectors") {
        return Err(Error::Parse("missing eigenvector header".into()));
    }
    let mut eigenvectors = Array2::zeros((n, n));
    for i in 0..n {
        let line = lines.next().ok_or_else(|| Error::Parse("truncated matrix".into()))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad entry {t}"))))
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(Error::Parse("row length mismatch".into()));
        }
        for j in 0..n {
            eigenvectors[[i, j]] = row[j];
        }
    }
    // rebuild the matrix from the decomposition
    let matrix = eigenvectors
        .dot(&Array2::from_diag(&eigenvalues))
        .dot(&eigenvectors.t());
    Ok(AxisOperator { axis, matrix, eigenvalues, eigenvectors })
}
