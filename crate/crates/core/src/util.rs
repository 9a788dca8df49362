//! Small numeric helpers shared across modules.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Inclusive 2-D prefix sums over `f64` values; `sum(r1, r2)` returns the
/// sum over the half-open cell ranges `r1 x r2` in O(1).
pub struct Prefix2 {
    acc: Array2<f64>,
}

impl Prefix2 {
    pub fn new(values: &Array2<f64>) -> Self {
        let (n1, n2) = values.dim();
        let mut acc = Array2::<f64>::zeros((n1 + 1, n2 + 1));
        for i in 0..n1 {
            let mut row = 0.0;
            for j in 0..n2 {
                row += values[[i, j]];
                acc[[i + 1, j + 1]] = acc[[i, j + 1]] + row;
            }
        }
        Prefix2 { acc }
    }

    pub fn from_mask(mask: &Array2<bool>) -> Self {
        let vals = mask.map(|&b| if b { 1.0 } else { 0.0 });
        Self::new(&vals)
    }

    #[inline]
    pub fn sum(&self, r1: std::ops::Range<usize>, r2: std::ops::Range<usize>) -> f64 {
        let (a, b) = (r1.start, r1.end);
        let (c, d) = (r2.start, r2.end);
        self.acc[[b, d]] - self.acc[[a, d]] - self.acc[[b, c]] + self.acc[[a, c]]
    }
}

/// Dense symmetric eigendecomposition by cyclic Jacobi rotations,
/// eigenvalues ascending, eigenvectors as columns of an orthonormal
/// matrix.  Jacobi is slower than tridiagonalization but delivers
/// reconstruction and orthogonality at a few ulps, which the operator
/// invariants demand.
///
/// The matrix is kept symmetric throughout, so a rotation only needs the
/// two affected rows (contiguous) plus a mirror pass; eigenvectors are
/// accumulated row-wise and transposed at the end.
pub fn symmetric_eigen(mat: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = mat.nrows();
    let mut a: Vec<f64> = mat.iter().cloned().collect(); // row-major
    let mut vt = vec![0.0f64; n * n]; // row k = k-th eigenvector
    for k in 0..n {
        vt[k * n + k] = 1.0;
    }
    let scale = mat.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);

    let rotate_rows = |buf: &mut [f64], p: usize, q: usize, c: f64, s: f64| {
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        let (head, tail) = buf.split_at_mut(hi * n);
        let row_lo = &mut head[lo * n..lo * n + n];
        let row_hi = &mut tail[..n];
        let (rp, rq) = if p < q { (row_lo, row_hi) } else { (row_hi, row_lo) };
        for k in 0..n {
            let x = rp[k];
            let y = rq[k];
            rp[k] = c * x - s * y;
            rq[k] = s * x + c * y;
        }
    };

    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A' = J^T A J on the symmetric matrix: rotate rows, fix
                // the 2x2 block, then mirror the two columns.
                rotate_rows(&mut a, p, q, c, s);
                let new_pp = app - t * apq;
                let new_qq = aqq + t * apq;
                a[p * n + p] = new_pp;
                a[q * n + q] = new_qq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[p * n + k];
                        let akq = a[q * n + k];
                        a[k * n + p] = akp;
                        a[k * n + q] = akq;
                    }
                }
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].partial_cmp(&a[y * n + y]).unwrap());
    let mut vals = Array1::<f64>::zeros(n);
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (k, &src) in order.iter().enumerate() {
        vals[k] = a[src * n + src];
        for i in 0..n {
            vecs[[i, k]] = vt[src * n + i];
        }
    }
    (vals, vecs)
}

/// Deterministic pseudo-random unit vector used to seed power iterations.
pub fn seed_vector(n: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Array1::<f64>::zeros(n);
    for x in v.iter_mut() {
        *x = rng.gen::<f64>() - 0.5;
    }
    let norm = v.dot(&v).sqrt();
    v.mapv_into(|x| x / norm)
}

/// Largest singular value of the linear map `apply`, estimated by power
/// iteration on `A^T A`. `apply_t` must be the transpose map.
pub fn top_singular_value<F, G>(
    n_in: usize,
    apply: F,
    apply_t: G,
    tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
    G: Fn(&Array1<f64>) -> Array1<f64>,
{
    let mut v = seed_vector(n_in, 0x5eed);
    let mut sigma = 0.0f64;
    for _ in 0..max_iter {
        let w = apply(&v);
        let mut u = apply_t(&w);
        let norm = u.dot(&u).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        u.mapv_inplace(|x| x / norm);
        let new_sigma = norm.sqrt();
        if (new_sigma - sigma).abs() <= tol * new_sigma.max(1e-300) {
            return Ok(new_sigma);
        }
        sigma = new_sigma;
        v = u;
    }
    Err(Error::PowerIterationStalled(max_iter))
}

/// Spectral radius of a self-adjoint map by plain power iteration.
/// Every iterate satisfies `|Av|/|v| <= |A|`, so on slow convergence the
/// last estimate is still a valid lower bound; this returns it instead of
/// failing.
pub fn self_adjoint_norm<F>(n: usize, apply: F, tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
{
    let mut v = seed_vector(n, 0xacc0);
    let mut lam = 0.0f64;
    for _ in 0..max_iter {
        let mut w = apply(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        w.mapv_inplace(|x| x / norm);
        if (norm - lam).abs() <= tol * norm.max(1e-300) {
            return Ok(norm);
        }
        lam = norm;
        v = w;
    }
    Ok(lam)
}
