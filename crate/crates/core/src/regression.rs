//! Polynomial least-squares reconstruction of the root tables, kept as a
//! diagnostic counterpart to piecewise-linear interpolation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::database::{ComponentTable, RootMap};
use crate::error::{Error, Result};
use crate::model::{HalfOrderRational, C64};

/// How sample columns are lined up before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootOrdering {
    /// Columns follow the tracked loci stored in the table.
    Tracked,
    /// Each sample's roots sorted by (real, imaginary), as a root solver
    /// emits them with no continuity tracking.
    #[default]
    Sorted,
}

/// Degree-`d` polynomial in `x = 2 eps - 1` for the real and imaginary part
/// of every zero and pole column.
#[derive(Debug, Clone)]
pub struct PolynomialFit {
    degree: usize,
    zeros: Vec<(Vec<f64>, Vec<f64>)>,
    poles: Vec<(Vec<f64>, Vec<f64>)>,
}

fn sorted(values: &[C64]) -> Vec<C64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

impl PolynomialFit {
    pub fn fit(table: &ComponentTable, degree: usize, ordering: RootOrdering) -> Result<Self> {
        let n = table.samples.len();
        if degree + 1 > n {
            return Err(Error::Domain(format!("degree {degree} needs more than {n} samples")));
        }
        let vander = DMatrix::from_fn(n, degree + 1, |i, j| (2.0 * table.samples[i].eps - 1.0).powi(j as i32));
        let svd = vander.svd(true, true);
        let column_fit = |column: Vec<f64>| -> Result<Vec<f64>> {
            let rhs = DVector::from_vec(column);
            let sol = svd
                .solve(&rhs, 1e-13)
                .map_err(|e| Error::Domain(format!("least squares failed: {e}")))?;
            Ok(sol.iter().copied().collect())
        };
        let columns = |pick: &dyn Fn(&HalfOrderRational) -> Vec<C64>| -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
            let rows: Vec<Vec<C64>> = table.samples.iter().map(|s| pick(&s.rational)).collect();
            (0..rows[0].len())
                .map(|j| {
                    let re = column_fit(rows.iter().map(|r| r[j].re).collect())?;
                    let im = column_fit(rows.iter().map(|r| r[j].im).collect())?;
                    Ok((re, im))
                })
                .collect()
        };
        let (zeros, poles) = match ordering {
            RootOrdering::Tracked => (columns(&|r| r.zeros.clone())?, columns(&|r| r.poles.clone())?),
            RootOrdering::Sorted => (columns(&|r| sorted(&r.zeros))?, columns(&|r| sorted(&r.poles))?),
        };
        Ok(Self { degree, zeros, poles })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

impl RootMap for PolynomialFit {
    fn rational_at(&self, eps: f64) -> HalfOrderRational {
        let x = 2.0 * eps - 1.0;
        let eval = |cols: &[(Vec<f64>, Vec<f64>)]| -> Vec<C64> {
            cols.iter()
                .map(|(re, im)| C64::new(horner(re, x), horner(im, x)))
                .collect()
        };
        HalfOrderRational {
            zeros: eval(&self.zeros),
            poles: eval(&self.poles),
        }
    }
}

/// Interior points strictly below both neighbours.
pub fn strict_local_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] < values[i - 1] && values[i] < values[i + 1])
        .collect()
}
