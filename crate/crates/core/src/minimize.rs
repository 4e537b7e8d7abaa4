//! Bounded scalar minimization: downhill bracketing from a start point
//! followed by Brent's golden-section/parabolic search.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSearch {
    pub lower: f64,
    pub upper: f64,
    /// First bracketing step.
    pub step: f64,
    /// Absolute tolerance on `x`.
    pub xtol: f64,
    /// Iteration cap for the Brent phase.
    pub max_iter: usize,
}

const GOLDEN: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;

/// Brent's method on `[a, b]` without derivatives.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Minimum {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut x = a + CGOLD * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut evaluations = 1;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = 1e-10 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Minimum {
                x,
                fx,
                evaluations,
                converged: true,
            };
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        evaluations += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum {
        x,
        fx,
        evaluations,
        converged: false,
    }
}

/// Walks downhill from `x0` with growing steps until the function rises or
/// a bound is reached, then refines inside the bracket with [`brent`].
pub fn local_minimize<F: FnMut(f64) -> f64>(mut f: F, x0: f64, search: &LocalSearch) -> Minimum {
    let (lo, hi) = (search.lower, search.upper);
    let clamp = |x: f64| x.clamp(lo, hi);
    let x0 = clamp(x0);
    let f0 = f(x0);
    let mut evaluations = 1;
    let mut best = (x0, f0);

    let mut step = search.step;
    let mut xr = clamp(x0 + step);
    let mut fr = f(xr);
    evaluations += 1;
    if fr < best.1 {
        best = (xr, fr);
    }
    if fr > f0 || xr == x0 {
        step = -step;
        xr = clamp(x0 + step);
        fr = f(xr);
        evaluations += 1;
        if fr < best.1 {
            best = (xr, fr);
        }
        if fr >= f0 {
            // x0 already lies in a valley of width 2 |step|
            let bracket = (clamp(x0 - search.step.abs()), clamp(x0 + search.step.abs()));
            return refine(&mut f, bracket, best, evaluations, search);
        }
    }
    let (mut prev, mut cur, mut fcur) = (x0, xr, fr);
    loop {
        let at_bound = cur == lo || cur == hi;
        if at_bound {
            return refine(&mut f, (prev, cur), best, evaluations, search);
        }
        step *= GOLDEN;
        let next = clamp(cur + step);
        let fnext = f(next);
        evaluations += 1;
        if fnext < best.1 {
            best = (next, fnext);
        }
        if fnext >= fcur {
            return refine(&mut f, (prev, next), best, evaluations, search);
        }
        prev = cur;
        cur = next;
        fcur = fnext;
    }
}

fn refine<F: FnMut(f64) -> f64>(
    f: &mut F,
    bracket: (f64, f64),
    best: (f64, f64),
    evaluations: usize,
    search: &LocalSearch,
) -> Minimum {
    let m = brent(&mut *f, bracket.0, bracket.1, search.xtol, search.max_iter);
    let evaluations = evaluations + m.evaluations;
    if m.fx <= best.1 {
        Minimum { evaluations, ..m }
    } else {
        Minimum {
            x: best.0,
            fx: best.1,
            evaluations,
            converged: m.converged,
        }
    }
}
