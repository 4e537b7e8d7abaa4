//! Simultaneous polynomial root finding (Aberth-Ehrlich iteration).

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::{PolyW, C64};

const MAX_ITERATIONS: usize = 500;
/// Backward error a root must reach to be accepted.
const ACCEPT: f64 = 1e-10;
/// Backward error at which a root stops being updated.
const STOP: f64 = 4.0 * f64::EPSILON;

/// `|p(x)| / sum |a_k| |x|^k`: the relative coefficient perturbation that
/// makes `x` an exact root.
pub fn backward_error(p: &PolyW, x: C64) -> f64 {
    let ax = x.norm();
    let mut scale = 0.0;
    for c in p.coeffs().iter().rev() {
        scale = scale * ax + c.norm();
    }
    let v = p.eval(x).norm();
    if scale == 0.0 {
        v
    } else {
        v / scale
    }
}

/// `|p(x)| / (|lead| max(1, |x|)^deg)`.
pub fn scaled_residual(p: &PolyW, x: C64) -> f64 {
    p.eval(x).norm() / (p.leading().norm() * x.norm().max(1.0).powi(p.degree() as i32))
}

/// All complex roots of `p` from a cold start.
pub fn poly_roots(p: &PolyW) -> Result<Vec<C64>> {
    poly_roots_from(p, None)
}

/// All complex roots of `p`, starting from `guess` when it has the right
/// length. A failed warm start falls back to a cold start.
pub fn poly_roots_from(p: &PolyW, guess: Option<&[C64]>) -> Result<Vec<C64>> {
    let n = p.degree();
    if n == 0 {
        return Err(Error::Contract("cannot find roots of a constant".into()));
    }
    let lead = p.leading();
    let monic: Vec<C64> = p.coeffs().iter().map(|c| c / lead).collect();
    if n == 1 {
        return Ok(vec![-monic[0]]);
    }
    if let Some(g) = guess.filter(|g| g.len() == n) {
        let mut start = g.to_vec();
        separate(&mut start);
        if let Ok(roots) = aberth(p, &monic, start) {
            return Ok(roots);
        }
    }
    aberth(p, &monic, cold_start(&monic))
}

/// Points on a circle whose radius is the geometric mean of the root
/// moduli, rotated off the real axis.
fn cold_start(monic: &[C64]) -> Vec<C64> {
    let n = monic.len() - 1;
    let a0 = monic[0].norm();
    let radius = if a0 > 0.0 {
        a0.powf(1.0 / n as f64)
    } else {
        monic.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0)
    };
    (0..n)
        .map(|k| C64::from_polar(radius, TAU * k as f64 / n as f64 + 0.4))
        .collect()
}

/// Nudges a warm start off any exact symmetry: a conjugate-symmetric start
/// for a real polynomial keeps real iterates on the real axis forever.
fn separate(start: &mut [C64]) {
    for (i, z) in start.iter_mut().enumerate() {
        let scale = z.norm().max(1e-8);
        *z += C64::new(0.0, scale * 1e-7 * (1.0 + i as f64 * 0.1));
    }
}

fn eval_with_derivative(monic: &[C64], x: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in monic.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

fn aberth(p: &PolyW, monic: &[C64], mut z: Vec<C64>) -> Result<Vec<C64>> {
    let n = z.len();
    let mut done = vec![false; n];
    for _ in 0..MAX_ITERATIONS {
        let mut all_done = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            if backward_error(p, z[i]) <= STOP {
                done[i] = true;
                continue;
            }
            all_done = false;
            let (val, der) = eval_with_derivative(monic, z[i]);
            let newton = val / der;
            let repulsion: C64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let step = newton / (1.0 - newton * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                continue;
            }
            z[i] -= step;
            if step.norm() <= 1e-15 * z[i].norm() {
                done[i] = true;
            }
        }
        if all_done {
            break;
        }
    }
    let residuals: Vec<f64> = z.iter().map(|&x| backward_error(p, x)).collect();
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if !(worst <= ACCEPT) || z.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::RootsNotConverged {
            iterations: MAX_ITERATIONS,
            worst,
            residuals,
        });
    }
    Ok(z)
}

/// Pairs each root with its nearest conjugate partner and replaces both by
/// an exactly conjugate pair; roots paired with themselves become real.
/// Only meaningful for polynomials with real coefficients.
pub fn conjugate_symmetrize(roots: &mut [C64]) {
    let n = roots.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] {
            continue;
        }
        used[i] = true;
        let target = roots[i].conj();
        let self_dist = (roots[i] - target).norm();
        let partner = (0..n)
            .filter(|&j| !used[j])
            .map(|j| (j, (roots[j] - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match partner {
            Some((j, d)) if d < self_dist => {
                used[j] = true;
                let avg = (roots[i] + roots[j].conj()) * 0.5;
                // keep the upper-half member first
                let upper = if avg.im >= 0.0 { avg } else { avg.conj() };
                roots[i] = upper;
                roots[j] = upper.conj();
            }
            _ => roots[i].im = 0.0,
        }
    }
}

/// First value whose conjugate has no partner within `tol * max(1, |x|)`.
pub fn conjugate_defect(set: &[C64], tol: f64) -> Option<C64> {
    set.iter().copied().find(|x| {
        let target = x.conj();
        let best = set.iter().map(|y| (y - target).norm()).fold(f64::INFINITY, f64::min);
        best > tol * x.norm().max(1.0)
    })
}
