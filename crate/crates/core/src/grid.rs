//! Finite grids, quadrature and the dyadic product geometry behind tents,
//! Journé's lemma and atom supports.
//!
//! Axes are uniform cell grids with `n = 2^k` cells so that every dyadic
//! level exists.  Open sets are arbitrary cell masks; the strong maximal
//! operator and everything built on it is restricted to dyadic
//! axis-aligned rectangles, which changes constants but nothing else.

use ndarray::Array2;

use crate::util::Prefix2;
use crate::{Error, Result};

/// Boundary condition of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// One uniform axis of the product grid. Cell `i` covers
/// `[origin + i*h, origin + (i+1)*h)`; samples live at cell centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub n_cells: usize,
    pub h: f64,
    pub origin: f64,
    pub boundary: Boundary,
}

impl Axis {
    pub fn new(n_cells: usize, h: f64, origin: f64, boundary: Boundary) -> Result<Self> {
        if n_cells < 4 {
            return Err(Error::GridTooSmall);
        }
        if !n_cells.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "n_cells must be a power of two, got {n_cells}"
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter("spacing must be positive".into()));
        }
        Ok(Axis { n_cells, h, origin, boundary })
    }

    /// Dirichlet axis centered on `[0, n*h)`.
    pub fn dirichlet(n_cells: usize, h: f64) -> Result<Self> {
        Axis::new(n_cells, h, 0.0, Boundary::Dirichlet)
    }

    pub fn periodic(n_cells: usize, h: f64) -> Result<Self> {
        Axis::new(n_cells, h, 0.0, Boundary::Periodic)
    }

    /// Number of dyadic levels: level 0 is the whole axis, level `k` the
    /// single cells.
    pub fn levels(&self) -> u32 {
        self.n_cells.trailing_zeros()
    }

    pub fn domain_len(&self) -> f64 {
        self.n_cells as f64 * self.h
    }

    pub fn center(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.h
    }
}

/// A scalar function sampled on the product grid with `h1*h2` quadrature.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub axis1: Axis,
    pub axis2: Axis,
    pub values: Array2<f64>,
}

impl GridFunction {
    pub fn new(axis1: Axis, axis2: Axis, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (axis1.n_cells, axis2.n_cells) {
            return Err(Error::InvalidParameter(format!(
                "value array is {:?}, grid is {:?}",
                values.dim(),
                (axis1.n_cells, axis2.n_cells)
            )));
        }
        Ok(GridFunction { axis1, axis2, values })
    }

    pub fn zeros(axis1: Axis, axis2: Axis) -> Self {
        let values = Array2::zeros((axis1.n_cells, axis2.n_cells));
        GridFunction { axis1, axis2, values }
    }

    pub fn from_fn(axis1: Axis, axis2: Axis, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((axis1.n_cells, axis2.n_cells), |(i, j)| {
            f(axis1.center(i), axis2.center(j))
        });
        GridFunction { axis1, axis2, values }
    }

    pub fn cell_area(&self) -> f64 {
        self.axis1.h * self.axis2.h
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.cell_area()).sqrt()
    }

    pub fn inner(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.cell_area()
    }
}

/// `(sum |f|^p h1 h2)^(1/p)`; `p = infinity` gives the max norm.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if f.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let s: f64 = f.values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((s * f.cell_area()).powf(1.0 / p))
}

/// Dyadic interval at `level` (0 = whole axis); covers cells
/// `[index * n/2^level, (index+1) * n/2^level)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicInterval {
    pub level: u32,
    pub index: usize,
}

impl DyadicInterval {
    pub fn cells(&self, axis: &Axis) -> std::ops::Range<usize> {
        let len = axis.n_cells >> self.level;
        self.index * len..(self.index + 1) * len
    }

    pub fn len_cells(&self, axis: &Axis) -> usize {
        axis.n_cells >> self.level
    }

    pub fn side_length(&self, axis: &Axis) -> f64 {
        self.len_cells(axis) as f64 * axis.h
    }

    pub fn parent(&self) -> Option<DyadicInterval> {
        (self.level > 0).then(|| DyadicInterval { level: self.level - 1, index: self.index / 2 })
    }

    /// Dyadic containment: `self` contains `other`.
    pub fn contains(&self, other: &DyadicInterval) -> bool {
        other.level >= self.level && (other.index >> (other.level - self.level)) == self.index
    }

    /// Ancestor `shift` levels up.
    pub fn ancestor(&self, shift: u32) -> DyadicInterval {
        DyadicInterval { level: self.level - shift, index: self.index >> shift }
    }
}

/// Dyadic product rectangle `R = I x J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicRectangle {
    pub i1: DyadicInterval,
    pub i2: DyadicInterval,
}

impl DyadicRectangle {
    pub fn area(&self, axis1: &Axis, axis2: &Axis) -> f64 {
        self.i1.side_length(axis1) * self.i2.side_length(axis2)
    }

    pub fn contains(&self, other: &DyadicRectangle) -> bool {
        self.i1.contains(&other.i1) && self.i2.contains(&other.i2)
    }

    /// Cell ranges of the `factor`-fold dilate, clipped to the domain.
    /// The extension is `(factor-1)/2` side lengths on each side.
    pub fn dilate_cells(
        &self,
        axis1: &Axis,
        axis2: &Axis,
        factor: usize,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let one = |iv: &DyadicInterval, axis: &Axis| {
            let cells = iv.cells(axis);
            let len = cells.end - cells.start;
            let ext = (factor - 1) * len / 2;
            let lo = cells.start.saturating_sub(ext);
            let hi = (cells.end + ext).min(axis.n_cells);
            lo..hi
        };
        (one(&self.i1, axis1), one(&self.i2, axis2))
    }
}

/// An open set of the product grid as a plain cell mask.
#[derive(Debug, Clone)]
pub struct OpenSet {
    pub axis1: Axis,
    pub axis2: Axis,
    pub mask: Array2<bool>,
}

impl OpenSet {
    pub fn new(axis1: Axis, axis2: Axis, mask: Array2<bool>) -> Result<Self> {
        if mask.dim() != (axis1.n_cells, axis2.n_cells) {
            return Err(Error::InvalidParameter("mask does not match grid".into()));
        }
        Ok(OpenSet { axis1, axis2, mask })
    }

    pub fn full(axis1: Axis, axis2: Axis) -> Self {
        let mask = Array2::from_elem((axis1.n_cells, axis2.n_cells), true);
        OpenSet { axis1, axis2, mask }
    }

    pub fn from_rect(axis1: Axis, axis2: Axis, rect: &DyadicRectangle) -> Self {
        let mut mask = Array2::from_elem((axis1.n_cells, axis2.n_cells), false);
        for i in rect.i1.cells(&axis1) {
            for j in rect.i2.cells(&axis2) {
                mask[[i, j]] = true;
            }
        }
        OpenSet { axis1, axis2, mask }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    /// Lebesgue measure `count * h1 * h2`.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.axis1.h * self.axis2.h
    }

    pub fn indicator(&self) -> GridFunction {
        let values = self.mask.map(|&b| if b { 1.0 } else { 0.0 });
        GridFunction { axis1: self.axis1, axis2: self.axis2, values }
    }

    pub fn subset_of(&self, other: &OpenSet) -> bool {
        self.mask
            .iter()
            .zip(other.mask.iter())
            .all(|(&a, &b)| !a || b)
    }
}

/// O(1) dyadic-rectangle containment queries against a fixed mask.
pub(crate) struct SetCounts {
    prefix: Prefix2,
}

impl SetCounts {
    pub fn new(set: &OpenSet) -> Self {
        SetCounts { prefix: Prefix2::from_mask(&set.mask) }
    }

    pub fn rect_inside(&self, set: &OpenSet, r: &DyadicRectangle) -> bool {
        let c1 = r.i1.cells(&set.axis1);
        let c2 = r.i2.cells(&set.axis2);
        let want = ((c1.end - c1.start) * (c2.end - c2.start)) as f64;
        self.prefix.sum(c1, c2) >= want - 0.5
    }
}

fn for_each_dyadic_rect(axis1: &Axis, axis2: &Axis, mut visit: impl FnMut(DyadicRectangle)) {
    for l1 in 0..=axis1.levels() {
        for i1 in 0..(1usize << l1) {
            for l2 in 0..=axis2.levels() {
                for i2 in 0..(1usize << l2) {
                    visit(DyadicRectangle {
                        i1: DyadicInterval { level: l1, index: i1 },
                        i2: DyadicInterval { level: l2, index: i2 },
                    });
                }
            }
        }
    }
}

/// All maximal dyadic subrectangles `m(Omega)`: rectangles inside `Omega`
/// whose dyadic parent in either direction leaves `Omega`.
pub fn maximal_dyadic_subrectangles(omega: &OpenSet) -> Result<Vec<DyadicRectangle>> {
    if omega.is_empty() {
        return Err(Error::EmptyOpenSet);
    }
    let counts = SetCounts::new(omega);
    let mut out = Vec::new();
    for_each_dyadic_rect(&omega.axis1, &omega.axis2, |r| {
        if !counts.rect_inside(omega, &r) {
            return;
        }
        let grow1 = r.i1.parent().map_or(false, |p| {
            counts.rect_inside(omega, &DyadicRectangle { i1: p, i2: r.i2 })
        });
        let grow2 = r.i2.parent().map_or(false, |p| {
            counts.rect_inside(omega, &DyadicRectangle { i1: r.i1, i2: p })
        });
        if !grow1 && !grow2 {
            out.push(r);
        }
    });
    out.sort();
    out.dedup();
    Ok(out)
}

/// `m_1(Omega)` / `m_2(Omega)`: dyadic subrectangles maximal in one
/// direction only.
pub fn maximal_in_direction(omega: &OpenSet, direction: u8) -> Result<Vec<DyadicRectangle>> {
    if omega.is_empty() {
        return Err(Error::EmptyOpenSet);
    }
    if direction != 1 && direction != 2 {
        return Err(Error::InvalidParameter("direction must be 1 or 2".into()));
    }
    let counts = SetCounts::new(omega);
    let mut out = Vec::new();
    for_each_dyadic_rect(&omega.axis1, &omega.axis2, |r| {
        if !counts.rect_inside(omega, &r) {
            return;
        }
        let grow = if direction == 1 {
            r.i1.parent().map_or(false, |p| {
                counts.rect_inside(omega, &DyadicRectangle { i1: p, i2: r.i2 })
            })
        } else {
            r.i2.parent().map_or(false, |p| {
                counts.rect_inside(omega, &DyadicRectangle { i1: r.i1, i2: p })
            })
        };
        if !grow {
            out.push(r);
        }
    });
    out.sort();
    out.dedup();
    Ok(out)
}

/// Strong maximal function restricted to dyadic axis-aligned rectangles:
/// at each cell, the largest average of `g` over a dyadic rectangle
/// containing it.
pub fn strong_maximal(g: &GridFunction) -> Result<GridFunction> {
    if g.values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::NegativeInput);
    }
    let (n1, n2) = g.values.dim();
    let prefix = Prefix2::new(&g.values);
    let mut out = Array2::<f64>::zeros((n1, n2));
    let k1 = g.axis1.levels();
    let k2 = g.axis2.levels();
    for l1 in 0..=k1 {
        let len1 = n1 >> l1;
        for l2 in 0..=k2 {
            let len2 = n2 >> l2;
            let inv_area = 1.0 / (len1 * len2) as f64;
            for b1 in 0..(1usize << l1) {
                for b2 in 0..(1usize << l2) {
                    let r1 = b1 * len1..(b1 + 1) * len1;
                    let r2 = b2 * len2..(b2 + 1) * len2;
                    let avg = prefix.sum(r1.clone(), r2.clone()) * inv_area;
                    for i in r1.clone() {
                        for j in r2.clone() {
                            if avg > out[[i, j]] {
                                out[[i, j]] = avg;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(GridFunction { axis1: g.axis1, axis2: g.axis2, values: out })
}

/// `{ M_s(1_Omega) > threshold }`; with `threshold = 1/2` this is the
/// enlargement `Omega~` of the covering-lemma machinery.
pub fn enlarge(omega: &OpenSet, threshold: f64) -> Result<OpenSet> {
    if omega.is_empty() {
        return Err(Error::EmptyOpenSet);
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter("threshold must be in (0,1)".into()));
    }
    let ms = strong_maximal(&omega.indicator())?;
    let mask = ms.values.map(|&v| v > threshold);
    Ok(OpenSet { axis1: omega.axis1, axis2: omega.axis2, mask })
}

/// The Journé stretch factor of `R` inside the enlargement of `Omega`,
/// measured as a ratio of interval side lengths.
///
/// For `direction = 1` this is `sup l(l)/l(I)` over dyadic `l` containing
/// `I` with `l x J` inside `enlarge(Omega, 1/2)`; always `>= 1`.
pub fn journe_gamma(r: &DyadicRectangle, omega: &OpenSet, direction: u8) -> Result<f64> {
    let enlarged = enlarge(omega, 0.5)?;
    let counts = SetCounts::new(&enlarged);
    let own = SetCounts::new(omega);
    if !own.rect_inside(omega, r) {
        return Err(Error::RectangleOutsideSet);
    }
    gamma_against(r, &enlarged, &counts, direction)
}

pub(crate) fn gamma_against(
    r: &DyadicRectangle,
    enlarged: &OpenSet,
    counts: &SetCounts,
    direction: u8,
) -> Result<f64> {
    if direction != 1 && direction != 2 {
        return Err(Error::InvalidParameter("direction must be 1 or 2".into()));
    }
    let base = if direction == 1 { r.i1 } else { r.i2 };
    let mut best_shift = 0u32;
    for shift in 0..=base.level {
        let l = base.ancestor(shift);
        let cand = if direction == 1 {
            DyadicRectangle { i1: l, i2: r.i2 }
        } else {
            DyadicRectangle { i1: r.i1, i2: l }
        };
        if counts.rect_inside(enlarged, &cand) {
            best_shift = best_shift.max(shift);
        }
    }
    Ok((1u64 << best_shift) as f64)
}

/// The two Journé sums
/// `(sum_{R in m2} |R| gamma1(R)^-delta, sum_{R in m1} |R| gamma2(R)^-delta)`;
/// the caller compares them against `c_delta * |Omega|`.
pub fn journe_sum(omega: &OpenSet, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    let enlarged = enlarge(omega, 0.5)?;
    let counts = SetCounts::new(&enlarged);
    let m1 = maximal_in_direction(omega, 1)?;
    let m2 = maximal_in_direction(omega, 2)?;
    let mut s1 = 0.0;
    for r in &m2 {
        let g = gamma_against(r, &enlarged, &counts, 1)?;
        s1 += r.area(&omega.axis1, &omega.axis2) * g.powf(-delta);
    }
    let mut s2 = 0.0;
    for r in &m1 {
        let g = gamma_against(r, &enlarged, &counts, 2)?;
        s2 += r.area(&omega.axis1, &omega.axis2) * g.powf(-delta);
    }
    Ok((s1, s2))
}

/// Geometric scale grid with constant ratio between points; carries the
/// `dt/t` weight `ln 2 / points_per_octave` per point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_octave: usize,
    pub values: Vec<f64>,
}

impl ScaleGrid {
    pub fn new(t_min: f64, t_max: f64, points_per_octave: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min) || points_per_octave == 0 {
            return Err(Error::InvalidParameter("bad scale grid parameters".into()));
        }
        let octaves = (t_max / t_min).log2();
        let count = (octaves * points_per_octave as f64 + 1e-9).floor() as usize + 1;
        let values: Vec<f64> = (0..count)
            .map(|i| t_min * 2f64.powf(i as f64 / points_per_octave as f64))
            .collect();
        Ok(ScaleGrid { t_min, t_max, points_per_octave, values })
    }

    /// Default grid for an axis: `h/2` up to the domain length.
    pub fn for_axis(axis: &Axis, points_per_octave: usize) -> Result<Self> {
        ScaleGrid::new(axis.h / 2.0, axis.domain_len(), points_per_octave)
    }

    /// The `dt/t` quadrature weight per grid point.
    pub fn dlog(&self) -> f64 {
        std::f64::consts::LN_2 / self.points_per_octave as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(n: usize) -> Axis {
        Axis::dirichlet(n, 1.0).unwrap()
    }

    fn set_from(rows: &[&str]) -> OpenSet {
        let n1 = rows.len();
        let n2 = rows[0].len();
        let a1 = axis(n1);
        let a2 = axis(n2);
        let mut mask = Array2::from_elem((n1, n2), false);
        for (i, row) in rows.iter().enumerate() {
            for (j, c) in row.chars().enumerate() {
                mask[[i, j]] = c == '#';
            }
        }
        OpenSet::new(a1, a2, mask).unwrap()
    }

    /// Brute-force oracle: enumerate every dyadic rectangle, test cell-wise
    /// containment, and filter out rectangles strictly contained in another.
    fn maximal_oracle(omega: &OpenSet) -> Vec<DyadicRectangle> {
        let mut inside = Vec::new();
        for_each_dyadic_rect(&omega.axis1, &omega.axis2, |r| {
            let c1 = r.i1.cells(&omega.axis1);
            let c2 = r.i2.cells(&omega.axis2);
            let ok = c1
                .clone()
                .all(|i| c2.clone().all(|j| omega.mask[[i, j]]));
            if ok {
                inside.push(r);
            }
        });
        let mut out: Vec<DyadicRectangle> = inside
            .iter()
            .filter(|r| {
                !inside
                    .iter()
                    .any(|s| s != *r && s.contains(r))
            })
            .copied()
            .collect();
        out.sort();
        out
    }

    #[test]
    fn lp_norm_examples() {
        let a = axis(4);
        let zero = GridFunction::zeros(a, a);
        assert_eq!(lp_norm(&zero, 1.0).unwrap(), 0.0);

        let one = GridFunction::from_fn(a, a, |_, _| 1.0);
        assert!((lp_norm(&one, 2.0).unwrap() - 4.0).abs() < 1e-14);

        let ah = Axis::dirichlet(4, 0.5).unwrap();
        let mut ind = GridFunction::zeros(ah, ah);
        ind.values[[1, 2]] = 1.0;
        assert!((lp_norm(&ind, 1.0).unwrap() - 0.25).abs() < 1e-15);

        let mut bad = GridFunction::zeros(a, a);
        bad.values[[0, 0]] = f64::NAN;
        assert!(matches!(lp_norm(&bad, 1.0), Err(Error::NonFiniteSample)));

        assert!((lp_norm(&one, f64::INFINITY).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn maximal_rectangles_trivial_cases() {
        let a = axis(4);
        let rect = DyadicRectangle {
            i1: DyadicInterval { level: 1, index: 0 },
            i2: DyadicInterval { level: 1, index: 1 },
        };
        let omega = OpenSet::from_rect(a, a, &rect);
        assert_eq!(maximal_dyadic_subrectangles(&omega).unwrap(), vec![rect]);

        let full = OpenSet::full(a, a);
        let whole = DyadicRectangle {
            i1: DyadicInterval { level: 0, index: 0 },
            i2: DyadicInterval { level: 0, index: 0 },
        };
        assert_eq!(maximal_dyadic_subrectangles(&full).unwrap(), vec![whole]);

        let empty = OpenSet::new(a, a, Array2::from_elem((4, 4), false)).unwrap();
        assert!(matches!(
            maximal_dyadic_subrectangles(&empty),
            Err(Error::EmptyOpenSet)
        ));
    }

    #[test]
    fn l_shape_matches_oracle() {
        // three of the four quadrant cells of a 2x2 dyadic square: the
        // exhaustive enumeration gives the two dominoes (adjacent cell
        // pairs are themselves dyadic rectangles and absorb the corner).
        let omega = set_from(&["##..", "#...", "....", "...."]);
        let fast = maximal_dyadic_subrectangles(&omega).unwrap();
        let oracle = maximal_oracle(&omega);
        assert_eq!(fast, oracle);
        let horizontal = DyadicRectangle {
            i1: DyadicInterval { level: 2, index: 0 },
            i2: DyadicInterval { level: 1, index: 0 },
        };
        let vertical = DyadicRectangle {
            i1: DyadicInterval { level: 1, index: 0 },
            i2: DyadicInterval { level: 2, index: 0 },
        };
        assert_eq!(fast, vec![vertical, horizontal]);
    }

    #[test]
    fn random_masks_match_oracle() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let a = axis(8);
            let mut mask = Array2::from_elem((8, 8), false);
            for v in mask.iter_mut() {
                *v = rng.gen_bool(0.55);
            }
            if !mask.iter().any(|&b| b) {
                continue;
            }
            let omega = OpenSet::new(a, a, mask).unwrap();
            assert_eq!(
                maximal_dyadic_subrectangles(&omega).unwrap(),
                maximal_oracle(&omega)
            );
        }
    }

    #[test]
    fn maximal_union_covers_omega_dyadic_part() {
        // union of m(Omega) equals union of all dyadic rectangles in Omega,
        // which on a cell grid is Omega itself.
        let omega = set_from(&["##..", "....", "..##", "..##"]);
        let m = maximal_dyadic_subrectangles(&omega).unwrap();
        let mut covered = Array2::from_elem((4, 4), false);
        for r in &m {
            for i in r.i1.cells(&omega.axis1) {
                for j in r.i2.cells(&omega.axis2) {
                    covered[[i, j]] = true;
                }
            }
        }
        assert_eq!(covered, omega.mask);
    }

    #[test]
    fn direction_maximal_strip() {
        // horizontal strip: full axis1 x one dyadic J
        let a = axis(4);
        let strip = DyadicRectangle {
            i1: DyadicInterval { level: 0, index: 0 },
            i2: DyadicInterval { level: 2, index: 1 },
        };
        let omega = OpenSet::from_rect(a, a, &strip);
        let m1 = maximal_in_direction(&omega, 1).unwrap();
        assert!(m1.contains(&strip));
        // every element of m1 spans the full axis1
        assert!(m1.iter().all(|r| r.i1.level == 0));

        let single = OpenSet::from_rect(a, a, &strip);
        let m2 = maximal_in_direction(&single, 2).unwrap();
        assert!(m2.iter().all(|r| r.i2 == strip.i2));
    }

    #[test]
    fn direction_maximal_l_shape_oracle() {
        let omega = set_from(&["##..", "#...", "....", "...."]);
        let counts = SetCounts::new(&omega);
        let m1 = maximal_in_direction(&omega, 1).unwrap();
        for r in &m1 {
            assert!(counts.rect_inside(&omega, r));
            if let Some(p) = r.i1.parent() {
                assert!(!counts.rect_inside(&omega, &DyadicRectangle { i1: p, i2: r.i2 }));
            }
        }
        // oracle: every dyadic rect inside omega that cannot grow in x1
        let oracle: Vec<_> = {
            let mut v = Vec::new();
            for_each_dyadic_rect(&omega.axis1, &omega.axis2, |r| {
                if counts.rect_inside(&omega, &r) {
                    let grow = r.i1.parent().map_or(false, |p| {
                        counts.rect_inside(&omega, &DyadicRectangle { i1: p, i2: r.i2 })
                    });
                    if !grow {
                        v.push(r);
                    }
                }
            });
            v.sort();
            v
        };
        assert_eq!(m1, oracle);
    }

    #[test]
    fn strong_maximal_constants_and_zero() {
        let a = axis(8);
        let c = GridFunction::from_fn(a, a, |_, _| 3.25);
        let m = strong_maximal(&c).unwrap();
        assert!(m.values.iter().all(|&v| (v - 3.25).abs() < 1e-12));

        let z = GridFunction::zeros(a, a);
        assert!(strong_maximal(&z).unwrap().values.iter().all(|&v| v == 0.0));

        let mut neg = GridFunction::zeros(a, a);
        neg.values[[0, 0]] = -1.0;
        assert!(matches!(strong_maximal(&neg), Err(Error::NegativeInput)));
    }

    #[test]
    fn strong_maximal_single_cell_vs_brute_force() {
        let a = axis(8);
        let mut g = GridFunction::zeros(a, a);
        g.values[[3, 5]] = 1.0;
        let fast = strong_maximal(&g).unwrap();
        // brute force over all dyadic rectangles at every point
        for i in 0..8 {
            for j in 0..8 {
                let mut best = 0.0f64;
                for_each_dyadic_rect(&a, &a, |r| {
                    let c1 = r.i1.cells(&a);
                    let c2 = r.i2.cells(&a);
                    if c1.contains(&i) && c2.contains(&j) && c1.contains(&3) && c2.contains(&5) {
                        let area = (c1.end - c1.start) * (c2.end - c2.start);
                        best = best.max(1.0 / area as f64);
                    }
                });
                assert!(
                    (fast.values[[i, j]] - best).abs() < 1e-12,
                    "cell ({i},{j}): {} vs {}",
                    fast.values[[i, j]],
                    best
                );
            }
        }
    }

    #[test]
    fn strong_maximal_monotone() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = axis(8);
        let g = GridFunction::from_fn(a, a, |_, _| rng.gen::<f64>());
        let mut g2 = g.clone();
        g2.values.mapv_inplace(|v| v + 0.3);
        let m1 = strong_maximal(&g).unwrap();
        let m2 = strong_maximal(&g2).unwrap();
        assert!(m1
            .values
            .iter()
            .zip(m2.values.iter())
            .all(|(a, b)| a <= b));
    }

    #[test]
    fn enlarge_contains_omega_and_full_is_fixed() {
        let a = axis(8);
        let full = OpenSet::full(a, a);
        let e = enlarge(&full, 0.5).unwrap();
        assert_eq!(e.count(), 64);

        let omega = set_from(&["........", "..##....", "..##....", "........",
                               "........", "......#.", "........", "........"]);
        let e = enlarge(&omega, 0.5).unwrap();
        assert!(omega.subset_of(&e));
    }

    #[test]
    fn journe_gamma_single_rectangle_is_one() {
        let a = axis(8);
        let rect = DyadicRectangle {
            i1: DyadicInterval { level: 2, index: 1 },
            i2: DyadicInterval { level: 2, index: 2 },
        };
        let omega = OpenSet::from_rect(a, a, &rect);
        // enumeration oracle: check every ancestor l of I directly
        let enlarged = enlarge(&omega, 0.5).unwrap();
        let counts = SetCounts::new(&enlarged);
        let mut oracle = 1.0f64;
        for shift in 0..=rect.i1.level {
            let l = rect.i1.ancestor(shift);
            if counts.rect_inside(&enlarged, &DyadicRectangle { i1: l, i2: rect.i2 }) {
                oracle = oracle.max((1u64 << shift) as f64);
            }
        }
        let g = journe_gamma(&rect, &omega, 1).unwrap();
        assert_eq!(g, oracle);
        assert_eq!(g, 1.0);
    }

    #[test]
    fn journe_gamma_strip() {
        // thin wide strip: gamma1 of a small square inside equals the ratio
        // of strip width to the square side.
        let a = axis(8);
        let strip = DyadicRectangle {
            i1: DyadicInterval { level: 0, index: 0 },
            i2: DyadicInterval { level: 3, index: 4 },
        };
        let omega = OpenSet::from_rect(a, a, &strip);
        let small = DyadicRectangle {
            i1: DyadicInterval { level: 3, index: 2 },
            i2: DyadicInterval { level: 3, index: 4 },
        };
        let g = journe_gamma(&small, &omega, 1).unwrap();
        // the strip spans the whole axis: ratio 8h / 1h
        assert_eq!(g, 8.0);

        let outside = DyadicRectangle {
            i1: DyadicInterval { level: 3, index: 2 },
            i2: DyadicInterval { level: 3, index: 0 },
        };
        assert!(matches!(
            journe_gamma(&outside, &omega, 1),
            Err(Error::RectangleOutsideSet)
        ));
    }

    #[test]
    fn journe_sum_single_rectangle() {
        // For Omega a single dyadic rectangle the direction-maximal family
        // contains one rectangle per dyadic refinement of the free side,
        // with gamma equal to the refinement depth; the sums telescope to
        // |Omega| * sum_k 2^-k over the levels present.  Enumerate it.
        let a = axis(8);
        let rect = DyadicRectangle {
            i1: DyadicInterval { level: 1, index: 0 },
            i2: DyadicInterval { level: 1, index: 1 },
        };
        let omega = OpenSet::from_rect(a, a, &rect);
        let (s1, s2) = journe_sum(&omega, 1.0).unwrap();
        let enlarged = enlarge(&omega, 0.5).unwrap();
        let counts = SetCounts::new(&enlarged);
        let mut want1 = 0.0;
        for r in maximal_in_direction(&omega, 2).unwrap() {
            let g = gamma_against(&r, &enlarged, &counts, 1).unwrap();
            want1 += r.area(&a, &a) / g;
        }
        let mut want2 = 0.0;
        for r in maximal_in_direction(&omega, 1).unwrap() {
            let g = gamma_against(&r, &enlarged, &counts, 2).unwrap();
            want2 += r.area(&a, &a) / g;
        }
        assert!((s1 - want1).abs() < 1e-12);
        assert!((s2 - want2).abs() < 1e-12);
        // the telescoping bound: both components within 2 |Omega|
        let area = omega.measure();
        assert!(s1 <= 2.0 * area && s2 <= 2.0 * area);
        assert!(s1 >= area && s2 >= area);
    }

    #[test]
    fn journe_sum_monotone_in_delta() {
        let omega = set_from(&["####....", "##......", "##......", "........",
                               "....####", "....####", "........", "........"]);
        let (a1, a2) = journe_sum(&omega, 0.5).unwrap();
        let (b1, b2) = journe_sum(&omega, 2.0).unwrap();
        assert!(b1 <= a1 + 1e-12);
        assert!(b2 <= a2 + 1e-12);
    }

    #[test]
    fn maximal_parent_invariant_and_m1_compatibility() {
        let omega = set_from(&["###.....", "###.....", "##......", "........",
                               "....###.", "....###.", "........", "........"]);
        let counts = SetCounts::new(&omega);
        let m = maximal_dyadic_subrectangles(&omega).unwrap();
        for r in &m {
            assert!(counts.rect_inside(&omega, r));
            if let Some(p) = r.i1.parent() {
                assert!(!counts.rect_inside(&omega, &DyadicRectangle { i1: p, i2: r.i2 }));
            }
            if let Some(p) = r.i2.parent() {
                assert!(!counts.rect_inside(&omega, &DyadicRectangle { i1: r.i1, i2: p }));
            }
        }
        // R -> R' = l x J lands in m1(enlarge(Omega, 1/2))
        let enlarged = enlarge(&omega, 0.5).unwrap();
        let ecounts = SetCounts::new(&enlarged);
        let m1e = maximal_in_direction(&enlarged, 1).unwrap();
        for r in &m {
            let mut best = r.i1;
            for shift in 0..=r.i1.level {
                let l = r.i1.ancestor(shift);
                if ecounts.rect_inside(&enlarged, &DyadicRectangle { i1: l, i2: r.i2 }) {
                    best = l;
                }
            }
            let rp = DyadicRectangle { i1: best, i2: r.i2 };
            assert!(
                m1e.contains(&rp),
                "stretched rectangle {rp:?} missing from m1 of the enlargement"
            );
        }
    }

    #[test]
    fn scale_grid_geometry() {
        let g = ScaleGrid::new(0.5, 8.0, 4).unwrap();
        assert_eq!(g.len(), 17);
        let r = g.values[1] / g.values[0];
        for w in g.values.windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
        assert!((g.dlog() - std::f64::consts::LN_2 / 4.0).abs() < 1e-15);
        assert!(g.values.last().unwrap() <= &8.0000001);
    }

    #[test]
    fn axis_validation() {
        assert!(matches!(Axis::dirichlet(3, 1.0), Err(Error::GridTooSmall)));
        assert!(Axis::dirichlet(6, 1.0).is_err());
        assert!(Axis::dirichlet(8, 1.0).is_ok());
    }
}
