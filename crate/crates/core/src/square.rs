//! The product area integral `S`, the Hardy norm, and tent-space
//! functionals on the discretized product upper half-space.
//!
//! Scale variables run over geometric grids with `dt/t` weights; the cone
//! at `x` collects scale cells `(y, t)` with `|x_i - y_i| < aperture *
//! t_i` per axis, clipped at the boundary.  All exponents are fixed at
//! `n1 = n2 = 1`, so the cone measure is `dy dt / (t1^2 t2^2)`.

use ndarray::{Array2, Array4};

use crate::grid::{Axis, GridFunction, OpenSet, ScaleGrid};
use crate::product::{heat_band, ProductOperatorPair};
use crate::util::Prefix2;
use crate::{Error, Result};

/// A function on (product grid) x (two geometric scale grids), indexed
/// `[y1, y2, it1, it2]`.
#[derive(Debug, Clone)]
pub struct TentFunction {
    pub axis1: Axis,
    pub axis2: Axis,
    pub scale1: ScaleGrid,
    pub scale2: ScaleGrid,
    pub values: Array4<f64>,
}

impl TentFunction {
    pub fn zeros(axis1: Axis, axis2: Axis, scale1: ScaleGrid, scale2: ScaleGrid) -> Self {
        let values = Array4::zeros((axis1.n_cells, axis2.n_cells, scale1.len(), scale2.len()));
        TentFunction { axis1, axis2, scale1, scale2, values }
    }

    /// Weight of one scale cell in the `dy dt/(t1 t2)` measure.
    pub fn cell_weight(&self) -> f64 {
        self.axis1.h * self.axis2.h * self.scale1.dlog() * self.scale2.dlog()
    }

    /// `|F|_{L^2(dy dt/(t1 t2))}`.
    pub fn l2_dydtt(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.cell_weight()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Cone aperture; 1 reproduces `|x - y| < t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeAperture(pub f64);

impl Default for ConeAperture {
    fn default() -> Self {
        ConeAperture(1.0)
    }
}

/// Exact one-axis cone quadrature: for each center cell `i`, the window
/// covers the interval `(c_i - r, c_i + r)` clipped to the domain, and
/// cells contribute the exact overlap length of their interval with the
/// window (fractional end weights).  `r` is in the same units as `h`.
///
/// Using exact overlap instead of a center-membership count removes the
/// half-cell wobble of the discrete cone width, so the interior shadow
/// is exactly `2r` and the `T^{2,2}` Fubini factor is exactly the cone
/// volume.
struct AxisWindow {
    /// per center: (first cell, weights over the covered range)
    lo: Vec<usize>,
    hi: Vec<usize>,
    w_lo: Vec<f64>,
    w_hi: Vec<f64>,
}

impl AxisWindow {
    fn new(n: usize, h: f64, r: f64) -> Self {
        let mut lo = vec![0usize; n];
        let mut hi = vec![0usize; n];
        let mut w_lo = vec![0.0f64; n];
        let mut w_hi = vec![0.0f64; n];
        let r_units = r / h;
        for i in 0..n {
            let c = i as f64 + 0.5;
            let a = (c - r_units).max(0.0);
            let b = (c + r_units).min(n as f64);
            let ja = a.floor() as usize;
            let jb_excl = (b.ceil() as usize).min(n).max(ja + 1);
            lo[i] = ja.min(n - 1);
            hi[i] = jb_excl;
            // overlap of cell j with (a, b) is min(j+1, b) - max(j, a)
            w_lo[i] = ((lo[i] as f64 + 1.0).min(b) - a.max(lo[i] as f64)).max(0.0);
            let last = jb_excl - 1;
            w_hi[i] = ((last as f64 + 1.0).min(b) - a.max(last as f64)).max(0.0);
        }
        AxisWindow { lo, hi, w_lo, w_hi }
    }

    /// Weighted window sums of one row of length `n` via prefix sums.
    fn apply(&self, row: &[f64], out: &mut [f64], prefix: &mut Vec<f64>) {
        let n = row.len();
        prefix.clear();
        prefix.push(0.0);
        for &v in row {
            prefix.push(prefix.last().unwrap() + v);
        }
        for i in 0..n {
            let (lo, hi) = (self.lo[i], self.hi[i]);
            if hi <= lo {
                out[i] = 0.0;
                continue;
            }
            if hi == lo + 1 {
                // single cell carries the whole (possibly sub-cell) overlap
                out[i] = row[lo] * self.w_lo[i];
                continue;
            }
            let full = prefix[hi] - prefix[lo];
            let deficit_lo = (1.0 - self.w_lo[i]) * row[lo];
            let deficit_hi = (1.0 - self.w_hi[i]) * row[hi - 1];
            out[i] = full - deficit_lo - deficit_hi;
        }
    }

    /// Total window length at center `i` (the exact cone shadow).
    #[cfg(test)]
    fn shadow(&self, i: usize) -> f64 {
        if self.hi[i] <= self.lo[i] {
            return 0.0;
        }
        if self.hi[i] == self.lo[i] + 1 {
            return self.w_lo[i];
        }
        (self.hi[i] - self.lo[i]) as f64 - (1.0 - self.w_lo[i]) - (1.0 - self.w_hi[i])
    }
}

/// Weighted cone sums along both axes with exact fractional overlap;
/// `r1`, `r2` are cone radii in axis units.
fn box_filter(m: &Array2<f64>, h1: f64, h2: f64, r1: f64, r2: f64) -> Array2<f64> {
    let (n1, n2) = m.dim();
    let win1 = AxisWindow::new(n1, h1, r1);
    let win2 = AxisWindow::new(n2, h2, r2);
    let mut rowpass = Array2::<f64>::zeros((n1, n2));
    let mut prefix = Vec::with_capacity(n2 + 1);
    let mut buf = vec![0.0f64; n2];
    for i in 0..n1 {
        let row: Vec<f64> = m.row(i).to_vec();
        win2.apply(&row, &mut buf, &mut prefix);
        rowpass.row_mut(i).assign(&ndarray::ArrayView1::from(&buf[..]));
    }
    let mut out = Array2::<f64>::zeros((n1, n2));
    let mut prefix1 = Vec::with_capacity(n1 + 1);
    let mut col_in = vec![0.0f64; n1];
    let mut col_out = vec![0.0f64; n1];
    for j in 0..n2 {
        for i in 0..n1 {
            col_in[i] = rowpass[[i, j]];
        }
        win1.apply(&col_in, &mut col_out, &mut prefix1);
        for i in 0..n1 {
            out[[i, j]] = col_out[i];
        }
    }
    out
}

/// The tent-space functional
/// `A F(x) = (cone integral of |F|^2 dy dt / (t1^2 t2^2))^{1/2}`.
pub fn tent_a_functional(f: &TentFunction, aperture: ConeAperture) -> Result<GridFunction> {
    if !(aperture.0 > 0.0) {
        return Err(Error::InvalidParameter("aperture must be positive".into()));
    }
    if f.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    let (n1, n2) = (f.axis1.n_cells, f.axis2.n_cells);
    let mut acc = Array2::<f64>::zeros((n1, n2));
    let base_w = f.axis1.h * f.axis2.h * f.scale1.dlog() * f.scale2.dlog();
    for (it1, &t1) in f.scale1.values.iter().enumerate() {
        for (it2, &t2) in f.scale2.values.iter().enumerate() {
            let slice = f.values.slice(ndarray::s![.., .., it1, it2]);
            let sq = slice.map(|v| v * v);
            let filtered = box_filter(&sq, f.axis1.h, f.axis2.h, aperture.0 * t1, aperture.0 * t2);
            let weight = base_w / (t1 * t2);
            acc.zip_mut_with(&filtered, |a, &b| *a += b * weight);
        }
    }
    let values = acc.mapv(f64::sqrt);
    Ok(GridFunction { axis1: f.axis1, axis2: f.axis2, values })
}

/// Tent-space norm `|F|_{T^{p,2}} = |A F|_p`.
pub fn tent_norm(f: &TentFunction, p: f64, aperture: ConeAperture) -> Result<f64> {
    let a = tent_a_functional(f, aperture)?;
    crate::grid::lp_norm(&a, p)
}

/// Product area integral `S f` built from `t^2 L e^{-t^2 L}` on each
/// axis; computed scale slice by scale slice so the 4-D field is never
/// materialized.
pub fn area_integral(
    f: &GridFunction,
    pair: &ProductOperatorPair,
    sg1: &ScaleGrid,
    sg2: &ScaleGrid,
    aperture: ConeAperture,
) -> Result<GridFunction> {
    if f.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    if !(aperture.0 > 0.0) {
        return Err(Error::InvalidParameter("aperture must be positive".into()));
    }
    let coef = pair.to_eigenbasis(f)?;
    let (n1, n2) = coef.dim();
    let mut acc = Array2::<f64>::zeros((n1, n2));
    let base_w = f.axis1.h * f.axis2.h * sg1.dlog() * sg2.dlog();
    for &t1 in sg1.values.iter() {
        let mut scaled = coef.clone();
        for (j, mut row) in scaled.rows_mut().into_iter().enumerate() {
            let w = heat_band(t1 * t1 * pair.l1.eigenvalues[j]);
            row.mapv_inplace(|x| x * w);
        }
        let b = pair.l1.eigenvectors.dot(&scaled);
        for &t2 in sg2.values.iter() {
            let mut bc = b.clone();
            for (k, mut col) in bc.columns_mut().into_iter().enumerate() {
                let w = heat_band(t2 * t2 * pair.l2.eigenvalues[k]);
                col.mapv_inplace(|x| x * w);
            }
            let slice = bc.dot(&pair.l2.eigenvectors.t());
            let sq = slice.map(|v| v * v);
            let filtered = box_filter(&sq, f.axis1.h, f.axis2.h, aperture.0 * t1, aperture.0 * t2);
            let weight = base_w / (t1 * t2);
            acc.zip_mut_with(&filtered, |a, &b| *a += b * weight);
        }
    }
    let values = acc.mapv(f64::sqrt);
    Ok(GridFunction { axis1: f.axis1, axis2: f.axis2, values })
}

/// `|S f|_1`, the square-function Hardy norm.
pub fn hardy_norm(
    f: &GridFunction,
    pair: &ProductOperatorPair,
    sg1: &ScaleGrid,
    sg2: &ScaleGrid,
) -> Result<f64> {
    let s = area_integral(f, pair, sg1, sg2, ConeAperture::default())?;
    crate::grid::lp_norm(&s, 1.0)
}

/// O(1) tent-membership queries for a fixed open set: `(y, t)` is in the
/// tent when the rectangle centered at the cell center of `y` with
/// half-sides `(t1, t2)` is covered by cells of `Omega` and fits in the
/// domain.
pub struct TentGeometry {
    false_counts: Prefix2,
    axis1: Axis,
    axis2: Axis,
}

impl TentGeometry {
    pub fn new(omega: &OpenSet) -> Self {
        let inverted = omega.mask.map(|&b| !b);
        TentGeometry {
            false_counts: Prefix2::from_mask(&inverted),
            axis1: omega.axis1,
            axis2: omega.axis2,
        }
    }

    /// Cells of one axis overlapping the open interval of half-width `t`
    /// around the center of cell `iy`, or `None` if the interval leaves
    /// the domain.
    fn axis_range(axis: &Axis, iy: usize, t: f64) -> Option<std::ops::Range<usize>> {
        let tau = 2.0 * t / axis.h; // half-width in half-cell units
        let c = 2.0 * iy as f64 + 1.0;
        let lo = c - tau;
        let hi = c + tau;
        let n2 = 2.0 * axis.n_cells as f64;
        if lo < -1e-9 || hi > n2 + 1e-9 {
            return None;
        }
        // cell j covers [2j, 2j+2]; open overlap means 2j < hi and 2j+2 > lo
        let j_lo = ((lo / 2.0 - 1.0).floor() as isize + 1).max(0) as usize;
        let mut j_hi = (hi / 2.0).ceil() as usize; // exclusive
        // boundary-touching cells do not overlap the open interval
        if (hi / 2.0 - (hi / 2.0).floor()).abs() < 1e-12 {
            j_hi = (hi / 2.0).round() as usize;
        }
        let j_hi = j_hi.min(axis.n_cells);
        if j_lo >= j_hi {
            return None;
        }
        Some(j_lo..j_hi)
    }

    pub fn rect_in_tent(&self, iy1: usize, iy2: usize, t1: f64, t2: f64) -> bool {
        let r1 = match Self::axis_range(&self.axis1, iy1, t1) {
            Some(r) => r,
            None => return false,
        };
        let r2 = match Self::axis_range(&self.axis2, iy2, t2) {
            Some(r) => r,
            None => return false,
        };
        self.false_counts.sum(r1, r2) < 0.5
    }
}

/// The tent over an open set as an explicit 4-D mask.
pub fn tent_over(omega: &OpenSet, sg1: &ScaleGrid, sg2: &ScaleGrid) -> Result<Array4<bool>> {
    if omega.is_empty() {
        return Err(Error::EmptyOpenSet);
    }
    let geo = TentGeometry::new(omega);
    let (n1, n2) = omega.mask.dim();
    let mut mask = Array4::from_elem((n1, n2, sg1.len(), sg2.len()), false);
    for iy1 in 0..n1 {
        for iy2 in 0..n2 {
            for (it1, &t1) in sg1.values.iter().enumerate() {
                for (it2, &t2) in sg2.values.iter().enumerate() {
                    mask[[iy1, iy2, it1, it2]] = geo.rect_in_tent(iy1, iy2, t1, t2);
                }
            }
        }
    }
    Ok(mask)
}
