//! Tensor actions of the two axis operators on product-grid functions:
//! separate-variable functional calculus and the joint calculus
//! `F(L1, L2)`.
//!
//! Everything is evaluated coefficientwise in the tensor eigenbasis via
//! two dense basis changes; the `n1*n2 x n1*n2` operator is never
//! materialized.

use std::sync::Arc;

use ndarray::Array2;

use crate::grid::{GridFunction, ScaleGrid};
use crate::operator::AxisOperator;
use crate::{Error, Result};

/// The commuting pair `(L1 ⊗ 1, 1 ⊗ L2)`.
#[derive(Debug, Clone)]
pub struct ProductOperatorPair {
    pub l1: Arc<AxisOperator>,
    pub l2: Arc<AxisOperator>,
}

impl ProductOperatorPair {
    pub fn new(l1: AxisOperator, l2: AxisOperator) -> Self {
        ProductOperatorPair { l1: Arc::new(l1), l2: Arc::new(l2) }
    }

    fn check_axes(&self, f: &GridFunction) -> Result<()> {
        if f.axis1 != self.l1.axis || f.axis2 != self.l2.axis {
            return Err(Error::InvalidParameter("grid does not match operator axes".into()));
        }
        Ok(())
    }

    /// Apply `F(L_which)` along one index, identity on the other.
    pub fn apply_axis(
        &self,
        f: impl Fn(f64) -> f64,
        which: u8,
        g: &GridFunction,
    ) -> Result<GridFunction> {
        self.check_axes(g)?;
        let values = match which {
            1 => {
                let m = self.l1.func_matrix(f)?;
                m.dot(&g.values)
            }
            2 => {
                let m = self.l2.func_matrix(f)?;
                g.values.dot(&m.t())
            }
            _ => return Err(Error::InvalidParameter("axis must be 1 or 2".into())),
        };
        Ok(GridFunction { axis1: g.axis1, axis2: g.axis2, values })
    }

    /// `(e^{-t1 L1} ⊗ e^{-t2 L2}) f`; `t = 0` acts as the identity.
    pub fn product_heat(&self, f: &GridFunction, t1: f64, t2: f64) -> Result<GridFunction> {
        if t1 < 0.0 || t2 < 0.0 {
            return Err(Error::InvalidParameter("negative time".into()));
        }
        let g = self.apply_axis(|lam| (-t1 * lam).exp(), 1, f)?;
        self.apply_axis(|lam| (-t2 * lam).exp(), 2, &g)
    }

    /// The square-function integrand operator
    /// `psi(t1 sqrt(L1)) ⊗ psi(t2 sqrt(L2))` with `psi(s) = s^2 e^{-s^2}`,
    /// i.e. `t^2 L e^{-t^2 L}` per axis.
    pub fn q_operator(&self, f: &GridFunction, t1: f64, t2: f64) -> Result<GridFunction> {
        if !(t1 > 0.0 && t2 > 0.0) {
            return Err(Error::InvalidParameter("scales must be positive".into()));
        }
        let g = self.apply_axis(|lam| heat_band(t1 * t1 * lam), 1, f)?;
        self.apply_axis(|lam| heat_band(t2 * t2 * lam), 2, &g)
    }

    /// Coefficients of `g` in the joint eigenbasis: `U1^T g U2`.
    pub fn to_eigenbasis(&self, g: &GridFunction) -> Result<Array2<f64>> {
        self.check_axes(g)?;
        Ok(self.l1.eigenvectors.t().dot(&g.values).dot(&self.l2.eigenvectors))
    }

    pub fn from_eigenbasis(&self, coef: &Array2<f64>) -> GridFunction {
        let values = self
            .l1
            .eigenvectors
            .dot(coef)
            .dot(&self.l2.eigenvectors.t());
        GridFunction { axis1: self.l1.axis, axis2: self.l2.axis, values }
    }
}

/// `u e^{-u}` band profile evaluated at `u = t^2 lambda`.
#[inline]
pub fn heat_band(u: f64) -> f64 {
    u * (-u).exp()
}

/// A bivariate symbol cached on the joint spectrum of one operator pair.
///
/// Construction samples `F(lambda_j, mu_k)` once; applications are two
/// matrix products each.
#[derive(Debug, Clone)]
pub struct JointSymbol {
    pub name: String,
    pub table: Array2<f64>,
}

impl JointSymbol {
    pub fn new(
        pair: &ProductOperatorPair,
        name: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let n1 = pair.l1.n();
        let n2 = pair.l2.n();
        let mut table = Array2::zeros((n1, n2));
        for j in 0..n1 {
            for k in 0..n2 {
                let lam = pair.l1.eigenvalues[j];
                let mu = pair.l2.eigenvalues[k];
                let v = f(lam, mu);
                if !v.is_finite() {
                    return Err(Error::NonFiniteJointSymbol(lam, mu));
                }
                table[[j, k]] = v;
            }
        }
        Ok(JointSymbol { name: name.to_string(), table })
    }

    pub fn sup_abs(&self) -> f64 {
        self.table.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn apply(&self, pair: &ProductOperatorPair, g: &GridFunction) -> Result<GridFunction> {
        let mut coef = pair.to_eigenbasis(g)?;
        coef *= &self.table;
        Ok(pair.from_eigenbasis(&coef))
    }
}

/// `F(L1, L2) f` for a one-off symbol.
pub fn joint_spectral_apply(
    pair: &ProductOperatorPair,
    f: impl Fn(f64, f64) -> f64,
    g: &GridFunction,
) -> Result<GridFunction> {
    JointSymbol::new(pair, "", f)?.apply(pair, g)
}

/// Dense 4-D field `F(y, t) = Q_{t1, t2} f(y)` over a pair of scale
/// grids, the raw material of the tent modules.
pub fn q_tent(
    pair: &ProductOperatorPair,
    f: &GridFunction,
    sg1: &ScaleGrid,
    sg2: &ScaleGrid,
) -> Result<crate::square::TentFunction> {
    pair.check_axes(f)?;
    let coef = pair.to_eigenbasis(f)?;
    let (n1, n2) = coef.dim();
    let s1 = sg1.len();
    let s2 = sg2.len();
    let mut values = ndarray::Array4::<f64>::zeros((n1, n2, s1, s2));
    // per t1: B = U1 D1 coef, then per t2 one more matmul
    for (it1, &t1) in sg1.values.iter().enumerate() {
        let mut scaled = coef.clone();
        for (j, mut row) in scaled.rows_mut().into_iter().enumerate() {
            let w = heat_band(t1 * t1 * pair.l1.eigenvalues[j]);
            row.mapv_inplace(|x| x * w);
        }
        let b = pair.l1.eigenvectors.dot(&scaled);
        for (it2, &t2) in sg2.values.iter().enumerate() {
            let mut bc = b.clone();
            for (k, mut col) in bc.columns_mut().into_iter().enumerate() {
                let w = heat_band(t2 * t2 * pair.l2.eigenvalues[k]);
                col.mapv_inplace(|x| x * w);
            }
            let slice = bc.dot(&pair.l2.eigenvectors.t());
            values
                .slice_mut(ndarray::s![.., .., it1, it2])
                .assign(&slice);
        }
    }
    Ok(crate::square::TentFunction {
        axis1: f.axis1,
        axis2: f.axis2,
        scale1: sg1.clone(),
        scale2: sg2.clone(),
        values,
    })
}
