//! Constructive atomic decompositions: tent-space atoms via the
//! stopping-time construction, the `pi_{L1,L2,M}` lift to Hardy atoms,
//! atom validation, and the full `f = sum lambda_j a_j` pipeline with
//! reconstruction diagnostics.
//!
//! The stopping regions are `S_j = T(Omega*_j) \ T(Omega*_{j+1})` with
//! `Omega_j = {A F > 2^j}` and `Omega*_j` its strong-maximal
//! enlargement; tents here are taken with the rectangle clipped to the
//! domain, which makes the regions a complete partition of the support
//! of `F` (the positivity shadow of a scale cell is exactly its clipped
//! rectangle).  Pieces collect cells by membership in the tent of the
//! dilated maximal rectangles, lexicographically first among the
//! smallest sufficient dilate.

use ndarray::Array2;

use crate::grid::{
    enlarge, maximal_dyadic_subrectangles, DyadicRectangle, GridFunction, OpenSet, ScaleGrid,
};
use crate::operator::SpectralWindow;
use crate::product::{heat_band, ProductOperatorPair};
use crate::square::{tent_a_functional, ConeAperture, TentFunction};
use crate::util::Prefix2;
use crate::{Error, Result};

/// One scale cell of a sparse tent-space element.
#[derive(Debug, Clone, Copy)]
pub struct TentCell {
    pub iy1: u32,
    pub iy2: u32,
    pub it1: u32,
    pub it2: u32,
    pub value: f64,
}

/// A piece of a tent atom, supported in the (clipped) tent of `dilate *
/// rect`.
#[derive(Debug, Clone)]
pub struct TentPiece {
    pub rect: DyadicRectangle,
    /// smallest odd dilate whose tent holds every cell; 3 nominally
    pub dilate: usize,
    pub cells: Vec<TentCell>,
}

/// A `T^{1,2}`-atom: normalized cells partitioned into tent-supported
/// pieces over the maximal dyadic subrectangles of its open set.
#[derive(Debug, Clone)]
pub struct TentAtom {
    pub omega: OpenSet,
    pub scale1: ScaleGrid,
    pub scale2: ScaleGrid,
    pub pieces: Vec<TentPiece>,
}

impl TentAtom {
    fn cell_weight(&self) -> f64 {
        self.omega.axis1.h * self.omega.axis2.h * self.scale1.dlog() * self.scale2.dlog()
    }

    /// `|a|_{L^2(dy dt/(t1 t2))}` over all pieces (disjoint cells).
    pub fn l2_dydtt(&self) -> f64 {
        let w = self.cell_weight();
        let s: f64 = self
            .pieces
            .iter()
            .flat_map(|p| p.cells.iter())
            .map(|c| c.value * c.value)
            .sum();
        (s * w).sqrt()
    }

    /// `sum_R |a_R|^2_{L^2(dy dt/(t1 t2))}`.
    pub fn pieces_l2_sq(&self) -> f64 {
        let w = self.cell_weight();
        self.pieces
            .iter()
            .map(|p| p.cells.iter().map(|c| c.value * c.value).sum::<f64>() * w)
            .sum()
    }

    pub fn max_piece_dilate(&self) -> usize {
        self.pieces.iter().map(|p| p.dilate).max().unwrap_or(1)
    }

    pub fn cell_count(&self) -> usize {
        self.pieces.iter().map(|p| p.cells.len()).sum()
    }

    /// Densify into a [`TentFunction`] (tests and harnesses).
    pub fn to_tent_function(&self) -> TentFunction {
        let mut f = TentFunction::zeros(
            self.omega.axis1,
            self.omega.axis2,
            self.scale1.clone(),
            self.scale2.clone(),
        );
        for p in &self.pieces {
            for c in &p.cells {
                f.values[[c.iy1 as usize, c.iy2 as usize, c.it1 as usize, c.it2 as usize]] +=
                    c.value;
            }
        }
        f
    }
}

/// Clipped-tent membership against a fixed mask: every cell meeting the
/// open rectangle `(c_y - t, c_y + t)` (per axis, clipped to the domain)
/// must belong to the set.
struct ClippedTent {
    false_counts: Prefix2,
    n1: usize,
    n2: usize,
    h1: f64,
    h2: f64,
}

impl ClippedTent {
    fn new(omega: &OpenSet) -> Self {
        let inverted = omega.mask.map(|&b| !b);
        ClippedTent {
            false_counts: Prefix2::from_mask(&inverted),
            n1: omega.axis1.n_cells,
            n2: omega.axis2.n_cells,
            h1: omega.axis1.h,
            h2: omega.axis2.h,
        }
    }

    /// Cells overlapping the open interval of half-width `t` around the
    /// center of cell `iy`, clipped to `[0, n)`.
    fn axis_range(n: usize, h: f64, iy: usize, t: f64) -> std::ops::Range<usize> {
        let r = t / h;
        let c = iy as f64 + 0.5;
        let lo = (c - r).max(0.0);
        let hi = (c + r).min(n as f64);
        let mut j_lo = lo.floor() as usize;
        if (lo - lo.ceil()).abs() < 1e-12 && lo.ceil() > lo.floor() {
            j_lo = lo.ceil() as usize; // touching only at the cell edge
        }
        if (lo.floor() - lo).abs() < 1e-12 {
            j_lo = lo.round() as usize;
        }
        let mut j_hi = hi.ceil() as usize;
        if (hi - hi.floor()).abs() < 1e-12 {
            j_hi = hi.round() as usize;
        }
        j_lo.min(n)..j_hi.min(n)
    }

    fn contains(&self, iy1: usize, iy2: usize, t1: f64, t2: f64) -> bool {
        let r1 = Self::axis_range(self.n1, self.h1, iy1, t1);
        let r2 = Self::axis_range(self.n2, self.h2, iy2, t2);
        if r1.is_empty() || r2.is_empty() {
            return false;
        }
        self.false_counts.sum(r1, r2) < 0.5
    }
}

/// Clipped tent of a dilated rectangle: interval arithmetic only.
fn in_dilated_rect_tent(
    rect: &DyadicRectangle,
    dilate: usize,
    omega: &OpenSet,
    iy1: usize,
    iy2: usize,
    t1: f64,
    t2: f64,
) -> bool {
    let (d1, d2) = rect.dilate_cells(&omega.axis1, &omega.axis2, dilate);
    let r1 = ClippedTent::axis_range(omega.axis1.n_cells, omega.axis1.h, iy1, t1);
    let r2 = ClippedTent::axis_range(omega.axis2.n_cells, omega.axis2.h, iy2, t2);
    !r1.is_empty()
        && !r2.is_empty()
        && d1.start <= r1.start
        && r1.end <= d1.end
        && d2.start <= r2.start
        && r2.end <= d2.end
}

/// Smallest odd dilate of `rect` whose clipped tent holds the cell.
fn needed_dilate(
    rect: &DyadicRectangle,
    omega: &OpenSet,
    iy1: usize,
    iy2: usize,
    t1: f64,
    t2: f64,
) -> usize {
    let r1 = ClippedTent::axis_range(omega.axis1.n_cells, omega.axis1.h, iy1, t1);
    let r2 = ClippedTent::axis_range(omega.axis2.n_cells, omega.axis2.h, iy2, t2);
    let axis_need = |cells: std::ops::Range<usize>, want: &std::ops::Range<usize>, len: usize| {
        let below = cells.start.saturating_sub(want.start);
        let above = want.end.saturating_sub(cells.end);
        let ext = below.max(above);
        1 + 2 * ext.div_ceil(len)
    };
    let c1 = rect.i1.cells(&omega.axis1);
    let c2 = rect.i2.cells(&omega.axis2);
    let k1 = axis_need(c1.clone(), &r1, c1.end - c1.start);
    let k2 = axis_need(c2.clone(), &r2, c2.end - c2.start);
    let k = k1.max(k2);
    if k % 2 == 0 {
        k + 1
    } else {
        k
    }
}

/// Tent-space atomic decomposition: level sets of `A F` at thresholds
/// `2^j`, stopping regions between consecutive enlarged tents, exact
/// pointwise reconstruction `sum lambda_j A_j = F`.
pub fn tent_decompose(f: &TentFunction) -> Result<Vec<(f64, TentAtom)>> {
    if f.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    let af = tent_a_functional(f, ConeAperture::default())?;
    let max_af = af.values.iter().fold(0.0f64, |m, &v| m.max(v));
    if max_af == 0.0 {
        return Ok(Vec::new());
    }
    let min_pos = af
        .values
        .iter()
        .filter(|&&v| v > 0.0)
        .fold(f64::INFINITY, |m, &v| m.min(v));
    let j_hi = max_af.log2().floor() as i64;
    let j_lo = min_pos.log2().floor() as i64 - 1;
    let n_levels = (j_hi - j_lo + 1) as usize;

    // enlarged level sets and their clipped-tent geometries, built once
    let axis1 = f.axis1;
    let axis2 = f.axis2;
    let mut omegas: Vec<Option<OpenSet>> = Vec::with_capacity(n_levels);
    let mut tents: Vec<Option<ClippedTent>> = Vec::with_capacity(n_levels);
    for lev in 0..n_levels {
        let threshold = 2f64.powi((j_lo + lev as i64) as i32);
        let mask = af.values.map(|&v| v > threshold);
        if !mask.iter().any(|&b| b) {
            omegas.push(None);
            tents.push(None);
            continue;
        }
        let omega = OpenSet::new(axis1, axis2, mask)?;
        let star = enlarge(&omega, 0.5)?;
        tents.push(Some(ClippedTent::new(&star)));
        omegas.push(Some(star));
    }

    // level of a cell: largest j with (y,t) in T(Omega*_j)
    let (n1, n2) = (axis1.n_cells, axis2.n_cells);
    let s1 = f.scale1.len();
    let s2 = f.scale2.len();
    let mut cells_by_level: Vec<Vec<TentCell>> = vec![Vec::new(); n_levels];
    let mut leftovers = 0usize;
    for iy1 in 0..n1 {
        for iy2 in 0..n2 {
            for it1 in 0..s1 {
                let t1 = f.scale1.values[it1];
                for it2 in 0..s2 {
                    let v = f.values[[iy1, iy2, it1, it2]];
                    if v == 0.0 {
                        continue;
                    }
                    let t2 = f.scale2.values[it2];
                    let member = |lev: usize| -> bool {
                        match &tents[lev] {
                            Some(t) => t.contains(iy1, iy2, t1, t2),
                            None => false,
                        }
                    };
                    // membership is monotone decreasing in the level
                    let lev = if !member(0) {
                        leftovers += 1;
                        0
                    } else {
                        let mut lo = 0usize; // member
                        let mut hi = n_levels; // non-member sentinel
                        while hi - lo > 1 {
                            let mid = (lo + hi) / 2;
                            if member(mid) {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        lo
                    };
                    cells_by_level[lev].push(TentCell {
                        iy1: iy1 as u32,
                        iy2: iy2 as u32,
                        it1: it1 as u32,
                        it2: it2 as u32,
                        value: v,
                    });
                }
            }
        }
    }
    debug_assert_eq!(leftovers, 0, "clipped tents must cover the support");

    let weight = f.axis1.h * f.axis2.h * f.scale1.dlog() * f.scale2.dlog();
    let mut out = Vec::new();
    for (lev, cells) in cells_by_level.into_iter().enumerate() {
        if cells.is_empty() {
            continue;
        }
        let omega = omegas[lev].clone().expect("level with cells has a set");
        let rects = maximal_dyadic_subrectangles(&omega)?;
        // group cells into pieces: smallest sufficient dilate, then
        // lexicographically first rectangle
        let mut piece_cells: Vec<Vec<TentCell>> = vec![Vec::new(); rects.len()];
        let mut piece_dilate: Vec<usize> = vec![1; rects.len()];
        for c in &cells {
            let t1 = f.scale1.values[c.it1 as usize];
            let t2 = f.scale2.values[c.it2 as usize];
            let mut chosen: Option<(usize, usize)> = None; // (dilate, rect idx)
            for (ri, r) in rects.iter().enumerate() {
                if in_dilated_rect_tent(r, 3, &omega, c.iy1 as usize, c.iy2 as usize, t1, t2) {
                    chosen = Some((3, ri));
                    break;
                }
            }
            if chosen.is_none() {
                let mut best: Option<(usize, usize)> = None;
                for (ri, r) in rects.iter().enumerate() {
                    let k = needed_dilate(r, &omega, c.iy1 as usize, c.iy2 as usize, t1, t2);
                    if best.map_or(true, |(bk, _)| k < bk) {
                        best = Some((k, ri));
                    }
                }
                chosen = best;
            }
            let (k, ri) = chosen.expect("maximal rectangles exist for a nonempty set");
            piece_cells[ri].push(*c);
            piece_dilate[ri] = piece_dilate[ri].max(k);
        }
        // normalization: with lambda = |F 1_S| |Omega|^{1/2} both atom
        // size conditions hold with equality
        let sq: f64 = cells.iter().map(|c| c.value * c.value).sum::<f64>() * weight;
        let lambda = sq.sqrt() * omega.measure().sqrt();
        if lambda == 0.0 {
            continue;
        }
        let inv = 1.0 / lambda;
        let pieces: Vec<TentPiece> = rects
            .iter()
            .zip(piece_cells.into_iter())
            .zip(piece_dilate.into_iter())
            .filter(|((_, cells), _)| !cells.is_empty())
            .map(|((rect, cells), dilate)| TentPiece {
                rect: *rect,
                dilate: dilate.max(3),
                cells: cells
                    .into_iter()
                    .map(|mut c| {
                        c.value *= inv;
                        c
                    })
                    .collect(),
            })
            .collect();
        out.push((
            lambda,
            TentAtom { omega, scale1: f.scale1.clone(), scale2: f.scale2.clone(), pieces },
        ));
    }
    Ok(out)
}

/// Per-axis table of `psi_M(t sqrt(lambda))` with `psi(x) = x^{2M}
/// Phi(x)`, cached for one (operator, scale grid, M) triple.
fn psi_table(
    eigenvalues: &ndarray::Array1<f64>,
    sg: &ScaleGrid,
    window: &SpectralWindow,
    m: u32,
) -> Array2<f64> {
    let mut t = Array2::zeros((sg.len(), eigenvalues.len()));
    for (it, &tv) in sg.values.iter().enumerate() {
        for (k, &lam) in eigenvalues.iter().enumerate() {
            t[[it, k]] = window.psi(m, tv * lam.max(0.0).sqrt());
        }
    }
    t
}

/// `pi_{L1,L2,M}(F)` for a dense tent function: the scale integral of
/// `psi(t1 sqrt(L1)) psi(t2 sqrt(L2)) F(., t) dt1/t1 dt2/t2`.
pub fn pi_operator(
    f: &TentFunction,
    m: u32,
    pair: &ProductOperatorPair,
    window: &SpectralWindow,
) -> Result<GridFunction> {
    if m < 1 {
        return Err(Error::InvalidParameter("M must be >= 1".into()));
    }
    let psi1 = psi_table(&pair.l1.eigenvalues, &f.scale1, window, m);
    let psi2 = psi_table(&pair.l2.eigenvalues, &f.scale2, window, m);
    let dlog = f.scale1.dlog() * f.scale2.dlog();
    let (n1, n2) = (pair.l1.n(), pair.l2.n());
    let mut acc = Array2::<f64>::zeros((n1, n2));
    for it1 in 0..f.scale1.len() {
        for it2 in 0..f.scale2.len() {
            let slice = f.values.slice(ndarray::s![.., .., it1, it2]).to_owned();
            let mut coef = pair.l1.eigenvectors.t().dot(&slice).dot(&pair.l2.eigenvectors);
            for j in 0..n1 {
                for k in 0..n2 {
                    coef[[j, k]] *= psi1[[it1, j]] * psi2[[it2, k]] * dlog;
                }
            }
            acc += &coef;
        }
    }
    Ok(pair.from_eigenbasis(&acc))
}

/// A Hardy atom: pieces `b_R` stored as joint-eigenbasis coefficients;
/// `a_R = (L1^M ⊗ L2^M) b_R` and `a = sum_R a_R` are derived from them.
#[derive(Debug, Clone)]
pub struct HardyAtom {
    pub omega: OpenSet,
    pub m: u32,
    pub pieces: Vec<HardyPiece>,
    pub pair: ProductOperatorPair,
}

/// One piece of a Hardy atom.
#[derive(Debug, Clone)]
pub struct HardyPiece {
    pub rect: DyadicRectangle,
    /// `b_R` in the joint eigenbasis.
    pub coef: Array2<f64>,
}

impl HardyAtom {
    /// `b_R` on the grid.
    pub fn b_r(&self, piece: usize) -> GridFunction {
        self.pair.from_eigenbasis(&self.pieces[piece].coef)
    }

    /// `(L1^{k1} ⊗ L2^{k2}) b_R` on the grid.
    pub fn lk_b_r(&self, piece: usize, k1: u32, k2: u32) -> GridFunction {
        let mut coef = self.pieces[piece].coef.clone();
        for (j, mut row) in coef.rows_mut().into_iter().enumerate() {
            let lj = self.pair.l1.eigenvalues[j].powi(k1 as i32);
            row.mapv_inplace(|x| x * lj);
        }
        for (k, mut col) in coef.columns_mut().into_iter().enumerate() {
            let mk = self.pair.l2.eigenvalues[k].powi(k2 as i32);
            col.mapv_inplace(|x| x * mk);
        }
        self.pair.from_eigenbasis(&coef)
    }

    /// `a_R = (L1^M ⊗ L2^M) b_R`.
    pub fn a_r(&self, piece: usize) -> GridFunction {
        self.lk_b_r(piece, self.m, self.m)
    }

    /// The atom itself, `a = sum_R a_R`.
    pub fn a(&self) -> GridFunction {
        let (n1, n2) = (self.pair.l1.n(), self.pair.l2.n());
        let mut coef = Array2::<f64>::zeros((n1, n2));
        for p in &self.pieces {
            coef += &p.coef;
        }
        for j in 0..n1 {
            let lj = self.pair.l1.eigenvalues[j].powi(self.m as i32);
            for k in 0..n2 {
                let mk = self.pair.l2.eigenvalues[k].powi(self.m as i32);
                coef[[j, k]] *= lj * mk;
            }
        }
        self.pair.from_eigenbasis(&coef)
    }
}

/// Lift a tent atom through `pi_{L1,L2,M}` piece by piece, dividing by
/// `normalization` (the family constant `C_M`).
pub fn pi_operator_atom(
    atom: &TentAtom,
    m: u32,
    pair: &ProductOperatorPair,
    window: &SpectralWindow,
    normalization: f64,
) -> Result<HardyAtom> {
    if m < 1 {
        return Err(Error::InvalidParameter("M must be >= 1".into()));
    }
    if !(normalization > 0.0) {
        return Err(Error::InvalidParameter("normalization must be positive".into()));
    }
    let (n1, n2) = (pair.l1.n(), pair.l2.n());
    if atom.omega.axis1 != pair.l1.axis || atom.omega.axis2 != pair.l2.axis {
        return Err(Error::InvalidParameter("atom axes do not match operators".into()));
    }
    // b_R weights: t^{2M} Phi(t sqrt(lambda)); applying L^M later gives psi
    let mut w1 = Array2::zeros((atom.scale1.len(), n1));
    for (it, &t) in atom.scale1.values.iter().enumerate() {
        for j in 0..n1 {
            let lam = pair.l1.eigenvalues[j];
            w1[[it, j]] = t.powi(2 * m as i32) * window.phi_hat(t * lam.max(0.0).sqrt());
        }
    }
    let mut w2 = Array2::zeros((atom.scale2.len(), n2));
    for (it, &t) in atom.scale2.values.iter().enumerate() {
        for k in 0..n2 {
            let mu = pair.l2.eigenvalues[k];
            w2[[it, k]] = t.powi(2 * m as i32) * window.phi_hat(t * mu.max(0.0).sqrt());
        }
    }
    let dlog = atom.scale1.dlog() * atom.scale2.dlog() / normalization;
    let mut pieces = Vec::with_capacity(atom.pieces.len());
    for p in &atom.pieces {
        let mut coef = Array2::<f64>::zeros((n1, n2));
        // group the piece cells by scale slice; dense slices go through
        // two matmuls, sparse ones through rank-1 updates
        let mut by_slice: std::collections::BTreeMap<(u32, u32), Vec<&TentCell>> =
            std::collections::BTreeMap::new();
        for c in &p.cells {
            by_slice.entry((c.it1, c.it2)).or_default().push(c);
        }
        for ((it1, it2), cells) in by_slice {
            let wt1 = w1.row(it1 as usize);
            let wt2 = w2.row(it2 as usize);
            if cells.len() > 2 * n1.max(n2) {
                let mut slice = Array2::<f64>::zeros((n1, n2));
                for c in &cells {
                    slice[[c.iy1 as usize, c.iy2 as usize]] += c.value * dlog;
                }
                let t = pair.l1.eigenvectors.t().dot(&slice).dot(&pair.l2.eigenvectors);
                for j in 0..n1 {
                    for k in 0..n2 {
                        coef[[j, k]] += wt1[j] * wt2[k] * t[[j, k]];
                    }
                }
            } else {
                for c in &cells {
                    let a = pair.l1.eigenvectors.row(c.iy1 as usize);
                    let b = pair.l2.eigenvectors.row(c.iy2 as usize);
                    let v = c.value * dlog;
                    for j in 0..n1 {
                        let lhs = v * a[j] * wt1[j];
                        if lhs == 0.0 {
                            continue;
                        }
                        for k in 0..n2 {
                            coef[[j, k]] += lhs * b[k] * wt2[k];
                        }
                    }
                }
            }
        }
        pieces.push(HardyPiece { rect: p.rect, coef });
    }
    Ok(HardyAtom { omega: atom.omega.clone(), m, pieces, pair: pair.clone() })
}

/// Per-condition measurements of one Hardy atom.
#[derive(Debug, Clone)]
pub struct HardyAtomReport {
    /// `|a|_2 |Omega|^{1/2}`, must be <= 1.
    pub l2_ratio: f64,
    /// max over `k1, k2 <= M` of the weighted piece sum times `|Omega|`.
    pub weighted_sum_ratio: f64,
    /// max |a| outside the dilated support set over max |a|.
    pub support_violation_a: f64,
    /// worst piece-support violation over all `(k1,k2)` and pieces.
    pub support_violation_pieces: f64,
    /// `|a - sum_R (L^M ⊗ L^M) b_R|_2 / |a|_2`.
    pub factorization_err: f64,
}

impl HardyAtomReport {
    pub fn pass(&self, tol: f64) -> bool {
        self.l2_ratio <= 1.0 + tol
            && self.weighted_sum_ratio <= 1.0 + tol
            && self.support_violation_a <= tol
            && self.support_violation_pieces <= tol
            && self.factorization_err <= tol
    }
}

/// Options for atom validation.
#[derive(Debug, Clone)]
pub struct ValidateOptions {
    /// rectangle dilate for supports (the paper's 10R, clipped)
    pub atom_dilate: usize,
    /// extra support margin in cells, covering propagation leakage
    pub support_buffer_cells: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { atom_dilate: 3, support_buffer_cells: 4 }
    }
}

fn support_violation(
    g: &GridFunction,
    allowed: &Array2<bool>,
) -> f64 {
    let peak = g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for (v, &ok) in g.values.iter().zip(allowed.iter()) {
        if !ok {
            worst = worst.max(v.abs());
        }
    }
    worst / peak
}

fn dilated_mask(
    rect: &DyadicRectangle,
    omega: &OpenSet,
    dilate: usize,
    buffer: usize,
) -> Array2<bool> {
    let (d1, d2) = rect.dilate_cells(&omega.axis1, &omega.axis2, dilate);
    let (n1, n2) = omega.mask.dim();
    let r1 = d1.start.saturating_sub(buffer)..(d1.end + buffer).min(n1);
    let r2 = d2.start.saturating_sub(buffer)..(d2.end + buffer).min(n2);
    let mut m = Array2::from_elem((n1, n2), false);
    for i in r1 {
        for j in r2.clone() {
            m[[i, j]] = true;
        }
    }
    m
}

/// Check every Hardy-atom condition; failures come back as measured
/// slacks, never as errors.
pub fn hardy_atom_validate(atom: &HardyAtom, opts: &ValidateOptions) -> HardyAtomReport {
    let omega_measure = atom.omega.measure();
    let a = atom.a();
    let l2_ratio = a.l2_norm() * omega_measure.sqrt();

    // factorization: recompute a from the pieces on the grid
    let mut sum = GridFunction::zeros(a.axis1, a.axis2);
    for pi in 0..atom.pieces.len() {
        let ar = atom.a_r(pi);
        sum.values += &ar.values;
    }
    let mut diff = sum.values.clone();
    diff -= &a.values;
    let factorization_err = {
        let num = (diff.iter().map(|v| v * v).sum::<f64>() * a.cell_area()).sqrt();
        let den = a.l2_norm().max(1e-300);
        num / den
    };

    // condition (iii): weighted sums per (k1, k2)
    let h12 = atom.omega.axis1.h * atom.omega.axis2.h;
    let mut weighted_sum_ratio = 0.0f64;
    for k1 in 0..=atom.m {
        for k2 in 0..=atom.m {
            let mut s = 0.0;
            for p in &atom.pieces {
                let li = p.rect.i1.side_length(&atom.omega.axis1);
                let lj = p.rect.i2.side_length(&atom.omega.axis2);
                // Parseval in the joint eigenbasis
                let mut nrm2 = 0.0;
                for (j, row) in p.coef.rows().into_iter().enumerate() {
                    let lam = atom.pair.l1.eigenvalues[j];
                    let wj = (li * li * lam).powi(k1 as i32);
                    for (k, &c) in row.iter().enumerate() {
                        let mu = atom.pair.l2.eigenvalues[k];
                        let wk = (lj * lj * mu).powi(k2 as i32);
                        let v = wj * wk * c;
                        nrm2 += v * v;
                    }
                }
                nrm2 *= h12;
                s += li.powi(-4 * atom.m as i32) * lj.powi(-4 * atom.m as i32) * nrm2;
            }
            weighted_sum_ratio = weighted_sum_ratio.max(s * omega_measure);
        }
    }

    // supports: a within the union of dilates, pieces within their own
    let (n1, n2) = atom.omega.mask.dim();
    let mut union_mask = Array2::from_elem((n1, n2), false);
    for p in &atom.pieces {
        let m = dilated_mask(&p.rect, &atom.omega, opts.atom_dilate, opts.support_buffer_cells);
        union_mask.zip_mut_with(&m, |u, &v| *u = *u || v);
    }
    let support_violation_a = support_violation(&a, &union_mask);
    let mut support_violation_pieces = 0.0f64;
    for (pi, p) in atom.pieces.iter().enumerate() {
        let allowed = dilated_mask(&p.rect, &atom.omega, opts.atom_dilate, opts.support_buffer_cells);
        for k1 in 0..=atom.m {
            for k2 in 0..=atom.m {
                let g = atom.lk_b_r(pi, k1, k2);
                support_violation_pieces =
                    support_violation_pieces.max(support_violation(&g, &allowed));
            }
        }
    }

    HardyAtomReport {
        l2_ratio,
        weighted_sum_ratio,
        support_violation_a,
        support_violation_pieces,
        factorization_err,
    }
}

/// Per-axis Calderón calibration of the reproducing constant for
/// `psi(x) = x^{2M} Phi(x)` against the heat band `u e^{-u}`.
#[derive(Debug, Clone)]
pub struct CalderonCalibration {
    pub c1: f64,
    pub c2: f64,
    /// resolved eigenvalue windows per axis
    pub lambda_range1: (f64, f64),
    pub lambda_range2: (f64, f64),
}

impl CalderonCalibration {
    pub fn c_psi(&self) -> f64 {
        self.c1 * self.c2
    }
}

fn axis_reproducing_sum(sg: &ScaleGrid, window: &SpectralWindow, m: u32, lam: f64) -> f64 {
    let mut s = 0.0;
    for &t in &sg.values {
        let u = t * lam.max(0.0).sqrt();
        s += window.psi(m, u) * heat_band(u * u) * sg.dlog();
    }
    s
}

/// Resolved-lambda window of a scale grid, from the frozen coverage
/// constants.
pub fn resolved_lambda_range(sg: &ScaleGrid) -> (f64, f64) {
    let lo = (crate::constants::RESOLVED_U_HIGH / sg.t_max).powi(2);
    let hi = (crate::constants::RESOLVED_U_LOW / sg.t_min).powi(2);
    (lo, hi)
}

/// Calibrate `c_psi` per axis so that the reproducing sum equals 1 at
/// the mid-resolved eigenvalue, and verify it stays within 1e-3 over the
/// whole resolved window.
pub fn calibrate_calderon(
    sg1: &ScaleGrid,
    sg2: &ScaleGrid,
    window: &SpectralWindow,
    m: u32,
) -> Result<CalderonCalibration> {
    let mut one_axis = |sg: &ScaleGrid| -> Result<(f64, (f64, f64))> {
        let (lo, hi) = resolved_lambda_range(sg);
        if !(lo < hi) {
            return Err(Error::CalderonCalibration);
        }
        let mid = (lo * hi).sqrt();
        let base = axis_reproducing_sum(sg, window, m, mid);
        if !(base > 0.0) {
            return Err(Error::CalderonCalibration);
        }
        let c = 1.0 / base;
        // sweep the window on a log grid
        let steps = 64;
        for i in 0..=steps {
            let lam = lo * (hi / lo).powf(i as f64 / steps as f64);
            let v = c * axis_reproducing_sum(sg, window, m, lam);
            if (v - 1.0).abs() > 1e-3 {
                return Err(Error::CalderonCalibration);
            }
        }
        Ok((c, (lo, hi)))
    };
    let (c1, lambda_range1) = one_axis(sg1)?;
    let (c2, lambda_range2) = one_axis(sg2)?;
    Ok(CalderonCalibration { c1, c2, lambda_range1, lambda_range2 })
}

/// A full atomic representation `f ~ sum lambda_j a_j` with residual
/// diagnostics.
#[derive(Debug)]
pub struct AtomicRepresentation {
    pub terms: Vec<(f64, HardyAtom)>,
    pub residual: GridFunction,
    pub coefficient_l1: f64,
}

/// Residual and coefficient diagnostics without materializing the atoms
/// (the reconstruction `c_psi pi(F)` equals `sum lambda_j' a_j` exactly
/// by linearity over the disjoint stopping regions).
#[derive(Debug, Clone)]
pub struct DecompositionDiagnostics {
    pub residual_l2: f64,
    pub coefficient_l1: f64,
    pub n_atoms: usize,
    pub max_piece_dilate: usize,
}

fn decompose_parts(
    f: &GridFunction,
    m: u32,
    pair: &ProductOperatorPair,
    sg1: &ScaleGrid,
    sg2: &ScaleGrid,
    window: &SpectralWindow,
    c_m: f64,
) -> Result<(Vec<(f64, TentAtom)>, GridFunction, f64, f64)> {
    let cal = calibrate_calderon(sg1, sg2, window, m)?;
    let c_psi = cal.c_psi();
    let tent = crate::product::q_tent(pair, f, sg1, sg2)?;
    let atoms = tent_decompose(&tent)?;
    let recon = {
        let mut g = pi_operator(&tent, m, pair, window)?;
        g.values.mapv_inplace(|v| v * c_psi);
        g
    };
    let mut residual = f.clone();
    residual.values -= &recon.values;
    let coefficient_l1: f64 = atoms.iter().map(|(l, _)| l.abs()).sum::<f64>() * c_psi * c_m;
    Ok((atoms, residual, coefficient_l1, c_psi))
}

/// The full pipeline: `F = Q f`, tent decomposition, pi-lift of every
/// atom with the Calderón constant, residual `f - c_psi pi(F)`.
pub fn hardy_decompose(
    f: &GridFunction,
    m: u32,
    pair: &ProductOperatorPair,
    sg1: &ScaleGrid,
    sg2: &ScaleGrid,
    window: &SpectralWindow,
    c_m: f64,
) -> Result<AtomicRepresentation> {
    let (atoms, residual, coefficient_l1, c_psi) =
        decompose_parts(f, m, pair, sg1, sg2, window, c_m)?;
    let mut terms = Vec::with_capacity(atoms.len());
    for (lambda, tent_atom) in &atoms {
        let hardy = pi_operator_atom(tent_atom, m, pair, window, c_m)?;
        terms.push((lambda * c_psi * c_m, hardy));
    }
    Ok(AtomicRepresentation { terms, residual, coefficient_l1 })
}

/// Diagnostics-only variant of [`hardy_decompose`].
pub fn hardy_decompose_diagnostics(
    f: &GridFunction,
    m: u32,
    pair: &ProductOperatorPair,
    sg1: &ScaleGrid,
    sg2: &ScaleGrid,
    window: &SpectralWindow,
    c_m: f64,
) -> Result<DecompositionDiagnostics> {
    let (atoms, residual, coefficient_l1, _) =
        decompose_parts(f, m, pair, sg1, sg2, window, c_m)?;
    Ok(DecompositionDiagnostics {
        residual_l2: residual.l2_norm(),
        coefficient_l1,
        n_atoms: atoms.len(),
        max_piece_dilate: atoms.iter().map(|(_, a)| a.max_piece_dilate()).max().unwrap_or(1),
    })
}

/// Empirical `|pi(F)|_2 / |F|_{T^{2,2}}` maximized over random dense
/// tent functions; the recorded operator-norm estimate behind `C_M`.
pub fn measure_pi_norm(
    pair: &ProductOperatorPair,
    sg1: &ScaleGrid,
    sg2: &ScaleGrid,
    window: &SpectralWindow,
    m: u32,
    rng: &mut impl rand::Rng,
    samples: usize,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let mut f = TentFunction::zeros(pair.l1.axis, pair.l2.axis, sg1.clone(), sg2.clone());
        for v in f.values.iter_mut() {
            *v = rng.gen::<f64>() - 0.5;
        }
        let t22 = crate::square::tent_norm(&f, 2.0, ConeAperture::default())?;
        if t22 == 0.0 {
            continue;
        }
        let g = pi_operator(&f, m, pair, window)?;
        worst = worst.max(g.l2_norm() / t22);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use crate::operator::AxisOperator;
    use crate::product::q_tent;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(n: usize) -> ProductOperatorPair {
        let a = Axis::dirichlet(n, 1.0).unwrap();
        ProductOperatorPair::new(
            AxisOperator::laplacian(a).unwrap(),
            AxisOperator::laplacian(a).unwrap(),
        )
    }

    fn scale_grid(n: usize, ppo: usize) -> ScaleGrid {
        ScaleGrid::new(0.25, 2.0 * n as f64, ppo).unwrap()
    }

    #[test]
    fn tent_decompose_zero_and_reconstruction() {
        let p = pair(16);
        let sg = scale_grid(16, 2);
        let zero = TentFunction::zeros(p.l1.axis, p.l2.axis, sg.clone(), sg.clone());
        assert!(tent_decompose(&zero).unwrap().is_empty());

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = GridFunction::from_fn(p.l1.axis, p.l2.axis, |_, _| rng.gen::<f64>() - 0.5);
        let tent = q_tent(&p, &f, &sg, &sg).unwrap();
        let atoms = tent_decompose(&tent).unwrap();
        assert!(!atoms.is_empty());
        // exact pointwise reconstruction
        let mut recon = TentFunction::zeros(p.l1.axis, p.l2.axis, sg.clone(), sg.clone());
        for (lambda, atom) in &atoms {
            for piece in &atom.pieces {
                for c in &piece.cells {
                    recon.values[[
                        c.iy1 as usize,
                        c.iy2 as usize,
                        c.it1 as usize,
                        c.it2 as usize,
                    ]] += lambda * c.value;
                }
            }
        }
        let maxv = tent.max_abs();
        for (a, b) in recon.values.iter().zip(tent.values.iter()) {
            assert!((a - b).abs() <= 1e-12 * maxv, "reconstruction off: {a} vs {b}");
        }
        // atom size conditions hold with equality by construction
        for (_, atom) in &atoms {
            let bound = atom.omega.measure().powf(-0.5);
            assert!(atom.l2_dydtt() <= bound * (1.0 + 1e-9));
            assert!(atom.pieces_l2_sq() <= bound * bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn tent_decompose_single_tent_support() {
        // F concentrated in one small tent yields a single atom and an
        // exact one-term reconstruction.
        let p = pair(16);
        let sg = scale_grid(16, 2);
        let mut f = TentFunction::zeros(p.l1.axis, p.l2.axis, sg.clone(), sg.clone());
        f.values[[8, 8, 1, 1]] = 2.0;
        let atoms = tent_decompose(&f).unwrap();
        assert_eq!(atoms.len(), 1);
        let (lambda, atom) = &atoms[0];
        assert_eq!(atom.cell_count(), 1);
        let c = &atom.pieces[0].cells[0];
        assert!((lambda * c.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tent_t22_tail_monotone() {
        let p = pair(16);
        let sg = scale_grid(16, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let f = GridFunction::from_fn(p.l1.axis, p.l2.axis, |_, _| rng.gen::<f64>() - 0.5);
        let tent = q_tent(&p, &f, &sg, &sg).unwrap();
        let atoms = tent_decompose(&tent).unwrap();
        // tail of the T^{2,2} norms over disjoint supports
        let weight = tent.cell_weight();
        let tails: Vec<f64> = (0..=atoms.len())
            .map(|n| {
                atoms[n..]
                    .iter()
                    .map(|(l, a)| {
                        a.pieces
                            .iter()
                            .flat_map(|p| p.cells.iter())
                            .map(|c| (l * c.value).powi(2))
                            .sum::<f64>()
                            * weight
                    })
                    .sum::<f64>()
            })
            .collect();
        for w in tails.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(tails[atoms.len()] == 0.0);
    }

    #[test]
    fn calderon_calibration_flat_over_resolved_window() {
        let w = SpectralWindow::default_window();
        let sg = ScaleGrid::new(0.25, 64.0, 8).unwrap();
        let cal = calibrate_calderon(&sg, &sg, &w, 1).unwrap();
        let (lo, hi) = cal.lambda_range1;
        for i in 0..=32 {
            let lam = lo * (hi / lo).powf(i as f64 / 32.0);
            let v = cal.c1 * axis_reproducing_sum(&sg, &w, 1, lam);
            assert!((v - 1.0).abs() <= 1e-3, "reproducing sum {v} at lambda {lam}");
        }
        // coarse grids fail loudly
        let coarse = ScaleGrid::new(0.25, 1.0, 1);
        assert!(coarse.is_err() || calibrate_calderon(&coarse.unwrap(), &sg, &w, 1).is_err());
    }

    #[test]
    fn pi_of_tent_atom_validates_after_normalization() {
        let p = pair(16);
        let sg = scale_grid(16, 2);
        let w = SpectralWindow::default_window();
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let f = GridFunction::from_fn(p.l1.axis, p.l2.axis, |_, _| rng.gen::<f64>() - 0.5);
        let tent = q_tent(&p, &f, &sg, &sg).unwrap();
        let atoms = tent_decompose(&tent).unwrap();
        let c_m = crate::constants::PI_ATOM_NORMALIZATION[1];
        for (_, atom) in atoms.iter().take(6) {
            let hardy = pi_operator_atom(atom, 1, &p, &w, c_m).unwrap();
            let report = hardy_atom_validate(&hardy, &ValidateOptions::default());
            assert!(
                report.pass(1e-6),
                "atom failed: {report:?} (dilate {})",
                atom.max_piece_dilate()
            );
        }
    }

    #[test]
    fn smeared_piece_fails_support_check() {
        let p = pair(16);
        let sg = scale_grid(16, 2);
        let w = SpectralWindow::default_window();
        let mut f = TentFunction::zeros(p.l1.axis, p.l2.axis, sg.clone(), sg.clone());
        f.values[[8, 8, 1, 1]] = 1.0;
        let atoms = tent_decompose(&f).unwrap();
        let c_m = crate::constants::PI_ATOM_NORMALIZATION[1];
        let mut hardy = pi_operator_atom(&atoms[0].1, 1, &p, &w, c_m).unwrap();
        // smear b_R far outside its rectangle: add a far-away delta
        let mut delta = GridFunction::zeros(p.l1.axis, p.l2.axis);
        let peak = hardy.b_r(0).values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        delta.values[[15, 15]] = peak;
        let extra = p.to_eigenbasis(&delta).unwrap();
        hardy.pieces[0].coef += &extra;
        let report = hardy_atom_validate(&hardy, &ValidateOptions::default());
        assert!(!report.pass(1e-6), "constructed violation must fail: {report:?}");
        assert!(report.support_violation_pieces > 1e-3);
    }

    #[test]
    fn zero_atom_passes_trivially() {
        let p = pair(16);
        let atom = HardyAtom {
            omega: OpenSet::full(p.l1.axis, p.l2.axis),
            m: 1,
            pieces: vec![HardyPiece {
                rect: DyadicRectangle {
                    i1: crate::grid::DyadicInterval { level: 0, index: 0 },
                    i2: crate::grid::DyadicInterval { level: 0, index: 0 },
                },
                coef: Array2::zeros((16, 16)),
            }],
            pair: p.clone(),
        };
        let report = hardy_atom_validate(&atom, &ValidateOptions::default());
        assert!(report.pass(1e-6));
    }

    #[test]
    fn pi_linear_and_bounded() {
        let p = pair(16);
        let sg = scale_grid(16, 2);
        let w = SpectralWindow::default_window();
        let zero = TentFunction::zeros(p.l1.axis, p.l2.axis, sg.clone(), sg.clone());
        let out = pi_operator(&zero, 1, &p, &w).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let norm = measure_pi_norm(&p, &sg, &sg, &w, 1, &mut rng, 10).unwrap();
        assert!(norm.is_finite() && norm > 0.0);
    }

    #[test]
    fn hardy_decompose_reproduces_resolved_eigenvector() {
        let p = pair(32);
        let w = SpectralWindow::default_window();
        let sg = ScaleGrid::new(0.25, 64.0, 8).unwrap();
        let cal = calibrate_calderon(&sg, &sg, &w, 1).unwrap();
        // pick mid-resolved eigenvalues on both axes
        let pick = |op: &AxisOperator, range: (f64, f64)| -> usize {
            let mid = (range.0 * range.1).sqrt();
            (0..op.n())
                .min_by(|&a, &b| {
                    let da = (op.eigenvalues[a].ln() - mid.ln()).abs();
                    let db = (op.eigenvalues[b].ln() - mid.ln()).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap()
        };
        let j = pick(&p.l1, cal.lambda_range1);
        let k = pick(&p.l2, cal.lambda_range2);
        let mut f = GridFunction::zeros(p.l1.axis, p.l2.axis);
        for a in 0..32 {
            for b in 0..32 {
                f.values[[a, b]] = p.l1.eigenvectors[[a, j]] * p.l2.eigenvectors[[b, k]];
            }
        }
        let d = hardy_decompose_diagnostics(
            &f,
            1,
            &p,
            &sg,
            &sg,
            &w,
            crate::constants::PI_ATOM_NORMALIZATION[1],
        )
        .unwrap();
        assert!(
            d.residual_l2 <= 1e-3 * f.l2_norm(),
            "residual {} vs norm {}",
            d.residual_l2,
            f.l2_norm()
        );
    }

    #[test]
    fn diagnostics_match_full_representation() {
        let p = pair(16);
        let sg = scale_grid(16, 2);
        let w = SpectralWindow::default_window();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let f = GridFunction::from_fn(p.l1.axis, p.l2.axis, |_, _| rng.gen::<f64>() - 0.5);
        let c_m = crate::constants::PI_ATOM_NORMALIZATION[1];
        let full = hardy_decompose(&f, 1, &p, &sg, &sg, &w, c_m).unwrap();
        let diag = hardy_decompose_diagnostics(&f, 1, &p, &sg, &sg, &w, c_m).unwrap();
        assert!((full.residual.l2_norm() - diag.residual_l2).abs() < 1e-12);
        assert!((full.coefficient_l1 - diag.coefficient_l1).abs() < 1e-12);
        // residual identity: c_psi pi(F) equals the weighted atom sum
        let cal = calibrate_calderon(&sg, &sg, &w, 1).unwrap();
        let tent = q_tent(&p, &f, &sg, &sg).unwrap();
        let mut direct = pi_operator(&tent, 1, &p, &w).unwrap();
        direct.values.mapv_inplace(|v| v * cal.c_psi());
        let mut from_atoms = GridFunction::zeros(p.l1.axis, p.l2.axis);
        for (lambda, hardy) in &full.terms {
            let a = hardy.a();
            from_atoms.values.scaled_add(*lambda, &a.values);
        }
        let scale = direct.l2_norm().max(1e-300);
        let mut diff = direct.values.clone();
        diff -= &from_atoms.values;
        let err = (diff.iter().map(|v| v * v).sum::<f64>() * f.cell_area()).sqrt() / scale;
        assert!(err < 1e-10, "atom sum disagrees with dense pi: {err}");
    }
}
