//! Exact forward model of the infinite spring-damper tree with a single
//! damaged component.
//!
//! The compliance of a damaged tree factors as `G(s) = G_inf(s) * Delta(s)`
//! where `G_inf(s) = 1/sqrt(k b s)` and `Delta` is a monic ratio of
//! polynomials in the half-order variable `w = s^(1/2)`. Both polynomials
//! have degree `2g` for a damaged component at generation `g`.
//!
//! `Delta` is obtained by starting from the closed form for a damaged
//! first-generation component and wrapping it once per generation with the
//! series/parallel recursion of the tree, choosing the upper or lower
//! sub-tree according to the component's branch path.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots;

pub type C64 = Complex64;

/// Spring and damper constants shared by every undamaged component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    k: f64,
    b: f64,
}

impl TreeParams {
    pub fn new(k: f64, b: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Domain(format!("spring constant must be positive, got {k}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Domain(format!("damper constant must be positive, got {b}")));
        }
        Ok(Self { k, b })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `sqrt(k/b)`, the natural scale of the half-order roots (units s^-1/2).
    pub fn r(&self) -> f64 {
        (self.k / self.b).sqrt()
    }

    /// `1/sqrt(k b)`, so that `G_inf(s) = c / w`.
    pub fn c(&self) -> f64 {
        1.0 / (self.k * self.b).sqrt()
    }
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { k: 1.0, b: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    Spring,
    Damper,
}

impl Kind {
    pub fn symbol(self) -> char {
        match self {
            Kind::Spring => 'k',
            Kind::Damper => 'b',
        }
    }
}

/// Which sub-tree of the first-generation pair a deeper component lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Upper,
    Lower,
}

/// One spring `k_{g,m}` or damper `b_{g,m}` of the tree.
///
/// Ordering follows the candidate list used for identification:
/// generation first, then index, then spring before damper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentId {
    generation: u32,
    index: u32,
    kind: Kind,
}

/// Deepest generation addressable without overflowing the index arithmetic.
pub const MAX_GENERATION: u32 = 30;

impl ComponentId {
    pub fn new(kind: Kind, generation: u32, index: u32) -> Result<Self> {
        if generation == 0 || generation > MAX_GENERATION {
            return Err(Error::Domain(format!(
                "generation must be in 1..={MAX_GENERATION}, got {generation}"
            )));
        }
        let width = 1u32 << (generation - 1);
        if index == 0 || index > width {
            return Err(Error::Domain(format!(
                "index for generation {generation} must be in 1..={width}, got {index}"
            )));
        }
        Ok(Self {
            generation,
            index,
            kind,
        })
    }

    pub fn spring(generation: u32, index: u32) -> Result<Self> {
        Self::new(Kind::Spring, generation, index)
    }

    pub fn damper(generation: u32, index: u32) -> Result<Self> {
        Self::new(Kind::Damper, generation, index)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    /// The component one generation closer to the root that plays the same
    /// role inside the sub-tree, and the sub-tree it sits in.
    pub fn parent(&self) -> Result<(ComponentId, Branch)> {
        if self.generation == 1 {
            return Err(Error::Domain(format!("{self} is a root component and has no parent")));
        }
        let half = 1u32 << (self.generation - 2);
        let (index, branch) = if self.index <= half {
            (self.index, Branch::Upper)
        } else {
            (self.index - half, Branch::Lower)
        };
        Ok((
            ComponentId {
                generation: self.generation - 1,
                index,
                kind: self.kind,
            },
            branch,
        ))
    }

    /// The two components of the next generation that map onto `self`.
    pub fn children(&self) -> [(ComponentId, Branch); 2] {
        let width = 1u32 << (self.generation - 1);
        let child = |index| ComponentId {
            generation: self.generation + 1,
            index,
            kind: self.kind,
        };
        [
            (child(self.index), Branch::Upper),
            (child(self.index + width), Branch::Lower),
        ]
    }

    /// Branches to apply, innermost first, when building `Delta` outward
    /// from the generation-1 closed form.
    pub fn wrap_path(&self) -> Vec<Branch> {
        let mut path = Vec::with_capacity(self.generation as usize - 1);
        let mut cur = *self;
        while cur.generation > 1 {
            let (parent, branch) = cur.parent().expect("generation > 1");
            path.push(branch);
            cur = parent;
        }
        path.reverse();
        path
    }

    /// 1-based position in the candidate list (`k1,1 -> 1`, `b1,1 -> 2`, ...).
    pub fn position(&self) -> usize {
        let before = component_count(self.generation - 1);
        let kind = match self.kind {
            Kind::Spring => 1,
            Kind::Damper => 2,
        };
        before + 2 * (self.index as usize - 1) + kind
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{},{}", self.kind.symbol(), self.generation, self.index)
    }
}

impl FromStr for ComponentId {
    type Err = Error;

    /// Parses `k3,2` or `b1,1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("cannot parse component '{s}' (expected e.g. k3,2)"));
        let s = s.trim();
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('k') | Some('K') => Kind::Spring,
            Some('b') | Some('B') => Kind::Damper,
            _ => return Err(bad()),
        };
        let (g, m) = chars.as_str().split_once(',').ok_or_else(bad)?;
        let g = g.trim().parse().map_err(|_| bad())?;
        let m = m.trim().parse().map_err(|_| bad())?;
        ComponentId::new(kind, g, m)
    }
}

/// Number of components in generations `1..=n`, `2^(n+1) - 2`.
pub fn component_count(max_generation: u32) -> usize {
    (1usize << (max_generation + 1)) - 2
}

/// All components through `max_generation` in candidate order.
pub fn candidates(max_generation: u32) -> Vec<ComponentId> {
    let mut out = Vec::with_capacity(component_count(max_generation));
    for g in 1..=max_generation {
        for m in 1..=(1u32 << (g - 1)) {
            out.push(ComponentId {
                generation: g,
                index: m,
                kind: Kind::Spring,
            });
            out.push(ComponentId {
                generation: g,
                index: m,
                kind: Kind::Damper,
            });
        }
    }
    out
}

/// A damaged component together with its damage amount `eps` in (0, 1):
/// the component's constant becomes `eps` times its undamaged value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageCase {
    pub component: ComponentId,
    pub eps: f64,
}

impl DamageCase {
    pub fn new(component: ComponentId, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(Self { component, eps })
    }
}

impl fmt::Display for DamageCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.component, self.eps)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("damage amount must lie in (0, 1), got {eps}")))
    }
}

/// Polynomial in `w = s^(1/2)` with complex coefficients, ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyW {
    coeffs: Vec<C64>,
}

impl PolyW {
    /// Trailing zero coefficients are trimmed so the leading one is nonzero.
    pub fn new(mut coeffs: Vec<C64>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        if coeffs.is_empty() || coeffs[coeffs.len() - 1] == C64::new(0.0, 0.0) {
            return Err(Error::Contract("polynomial has no nonzero coefficient".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    /// Monic polynomial `prod (w - root)`.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut coeffs = vec![C64::new(1.0, 0.0)];
        for &root in roots {
            let mut next = vec![C64::new(0.0, 0.0); coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * root;
            }
            coeffs = next;
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> C64 {
        self.coeffs[self.degree()]
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == C64::new(1.0, 0.0)
    }

    pub fn eval(&self, w: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * w + c)
    }

    /// Largest imaginary part relative to the coefficient norm.
    pub fn imaginary_residue(&self) -> f64 {
        let norm = self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let imag = self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        if norm == 0.0 {
            0.0
        } else {
            imag / norm
        }
    }
}

/// Numerator/denominator pair of `Delta` before root extraction.
pub type PolyPair = (PolyW, PolyW);

/// `Delta = prod (w + z_j) / prod (w + p_j)` stored as the values `z_j`, `p_j`
/// (the half-order zeros and poles are `-z_j` and `-p_j`).
#[derive(Debug, Clone, PartialEq)]
pub struct HalfOrderRational {
    pub zeros: Vec<C64>,
    pub poles: Vec<C64>,
}

impl HalfOrderRational {
    pub fn new(zeros: Vec<C64>, poles: Vec<C64>) -> Result<Self> {
        if zeros.len() != poles.len() {
            return Err(Error::Invariant(format!(
                "{} zeros but {} poles",
                zeros.len(),
                poles.len()
            )));
        }
        if zeros.is_empty() || !zeros.len().is_multiple_of(2) {
            return Err(Error::Invariant(format!(
                "expected 2g zeros and poles, got {}",
                zeros.len()
            )));
        }
        Ok(Self { zeros, poles })
    }

    pub fn generation(&self) -> u32 {
        (self.zeros.len() / 2) as u32
    }

    /// Value at the half-order variable `w`. Returns an infinite value when
    /// `w` sits exactly on a pole.
    pub fn evaluate_w(&self, w: C64) -> C64 {
        let mut num = C64::new(1.0, 0.0);
        let mut den = C64::new(1.0, 0.0);
        for (z, p) in self.zeros.iter().zip(&self.poles) {
            num *= w + z;
            den *= w + p;
        }
        if den == C64::new(0.0, 0.0) {
            return C64::new(f64::INFINITY, 0.0);
        }
        num / den
    }

    /// Value at `s`, using the principal branch of `s^(1/2)`.
    pub fn evaluate(&self, s: C64) -> C64 {
        self.evaluate_w(s.sqrt())
    }

    pub fn numerator(&self) -> PolyW {
        PolyW::from_roots(&self.zeros.iter().map(|z| -z).collect::<Vec<_>>())
    }

    pub fn denominator(&self) -> PolyW {
        PolyW::from_roots(&self.poles.iter().map(|p| -p).collect::<Vec<_>>())
    }

    /// Checks conjugate closure (to `tol` relative to root size) and
    /// `Delta(0) = 1` through `prod z = prod p` (relative `1e-9`).
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        for (name, set) in [("zeros", &self.zeros), ("poles", &self.poles)] {
            if let Some(bad) = roots::conjugate_defect(set, tol) {
                return Err(Error::Invariant(format!(
                    "{name} not closed under conjugation near {bad}"
                )));
            }
        }
        // compare in log space; products of deep-generation damper roots get large
        let log_prod = |v: &[C64]| v.iter().map(|x| x.ln()).sum::<C64>();
        let diff = log_prod(&self.zeros) - log_prod(&self.poles);
        let rel = (diff.exp() - 1.0).norm();
        if !(rel <= 1e-9) {
            return Err(Error::Invariant(format!("Delta(0) != 1 (relative defect {rel:e})")));
        }
        Ok(())
    }
}

/// Undamaged tree compliance `1/sqrt(k b s)`.
pub fn undamaged_response(params: &TreeParams, s: C64) -> Result<C64> {
    if s == C64::new(0.0, 0.0) {
        return Err(Error::Domain("undamaged compliance is infinite at s = 0".into()));
    }
    Ok(params.c() / s.sqrt())
}

/// Closed-form `Delta` for damage of a first-generation component.
pub fn base_delta(kind: Kind, eps: f64, params: &TreeParams) -> Result<HalfOrderRational> {
    check_eps(eps)?;
    let r = params.r();
    let re = |x: f64| C64::new(x, 0.0);
    let (zeros, poles) = match kind {
        Kind::Spring => {
            let im = r * (eps - eps * eps).sqrt();
            (
                vec![re(r), re(eps * r)],
                vec![C64::new(eps * r, im), C64::new(eps * r, -im)],
            )
        }
        Kind::Damper => {
            let im = r * (1.0 / eps - 1.0).sqrt();
            (vec![re(r), re(r / eps)], vec![C64::new(r, im), C64::new(r, -im)])
        }
    };
    HalfOrderRational::new(zeros, poles)
}

/// Expanded numerator and denominator of the generation-1 closed form.
pub fn base_polys(kind: Kind, eps: f64, params: &TreeParams) -> Result<PolyPair> {
    check_eps(eps)?;
    let r = params.r();
    let (n, d) = match kind {
        Kind::Spring => ([eps * r * r, (1.0 + eps) * r, 1.0], [eps * r * r, 2.0 * eps * r, 1.0]),
        Kind::Damper => ([r * r / eps, r * (1.0 + 1.0 / eps), 1.0], [r * r / eps, 2.0 * r, 1.0]),
    };
    Ok((PolyW::from_real(&n)?, PolyW::from_real(&d)?))
}

fn check_child(n: &PolyW, d: &PolyW) -> Result<()> {
    if n.degree() != d.degree() {
        return Err(Error::Contract(format!(
            "numerator degree {} differs from denominator degree {}",
            n.degree(),
            d.degree()
        )));
    }
    if !n.is_monic() || !d.is_monic() {
        return Err(Error::Contract("child polynomials must be monic".into()));
    }
    Ok(())
}

/// `w^2 A + r w (N + D) + r^2 B`, the common shape of every wrap.
fn wrap_combination(a: &PolyW, sum_n: &PolyW, sum_d: &PolyW, b: &PolyW, r: f64) -> PolyW {
    let deg = a.degree() + 2;
    let mut out = vec![C64::new(0.0, 0.0); deg + 1];
    for (i, &c) in a.coeffs().iter().enumerate() {
        out[i + 2] += c;
    }
    for (i, (&x, &y)) in sum_n.coeffs().iter().zip(sum_d.coeffs()).enumerate() {
        out[i + 1] += (x + y) * r;
    }
    for (i, &c) in b.coeffs().iter().enumerate() {
        out[i] += c * (r * r);
    }
    PolyW { coeffs: out }
}

/// One more generation with the damaged sub-tree on the spring (upper) side:
/// `N' = w^2 D + r w (N + D) + r^2 N`, `D' = w^2 D + r w (N + D) + r^2 D`.
pub fn wrap_upper(child: &PolyPair, params: &TreeParams) -> Result<PolyPair> {
    let (n, d) = child;
    check_child(n, d)?;
    let r = params.r();
    Ok((wrap_combination(d, n, d, n, r), wrap_combination(d, n, d, d, r)))
}

/// One more generation with the damaged sub-tree on the damper (lower) side:
/// `N' = w^2 N + r w (N + D) + r^2 D`, `D' = w^2 D + r w (N + D) + r^2 D`.
pub fn wrap_lower(child: &PolyPair, params: &TreeParams) -> Result<PolyPair> {
    let (n, d) = child;
    check_child(n, d)?;
    let r = params.r();
    Ok((wrap_combination(n, n, d, d, r), wrap_combination(d, n, d, d, r)))
}

/// Numerator and denominator of `Delta` for `case`, before root extraction.
pub fn delta_polys(case: &DamageCase, params: &TreeParams) -> Result<PolyPair> {
    let mut pair = base_polys(case.component.kind(), case.eps, params)?;
    for branch in case.component.wrap_path() {
        pair = match branch {
            Branch::Upper => wrap_upper(&pair, params)?,
            Branch::Lower => wrap_lower(&pair, params)?,
        };
    }
    Ok(pair)
}

/// Half-order zeros and poles for a single-damage case.
pub fn delta_for_case(case: &DamageCase, params: &TreeParams) -> Result<HalfOrderRational> {
    delta_for_case_from(case, params, None)
}

/// As [`delta_for_case`], warm-starting the root solves from `guess`
/// (typically the same component at a nearby damage amount).
pub fn delta_for_case_from(
    case: &DamageCase,
    params: &TreeParams,
    guess: Option<&HalfOrderRational>,
) -> Result<HalfOrderRational> {
    if case.component.generation() == 1 {
        return base_delta(case.component.kind(), case.eps, params);
    }
    let (n, d) = delta_polys(case, params)?;
    for p in [&n, &d] {
        let residue = p.imaginary_residue();
        if residue > 1e-9 {
            log::warn!("{case}: polynomial coefficients carry imaginary residue {residue:e}");
        }
    }
    let negate = |v: &[C64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    let guess = guess.filter(|g| g.zeros.len() == n.degree());
    let zero_guess = guess.map(|g| negate(&g.zeros));
    let pole_guess = guess.map(|g| negate(&g.poles));
    let mut zeros = roots::poly_roots_from(&n, zero_guess.as_deref())?;
    let mut poles = roots::poly_roots_from(&d, pole_guess.as_deref())?;
    roots::conjugate_symmetrize(&mut zeros);
    roots::conjugate_symmetrize(&mut poles);
    HalfOrderRational::new(negate(&zeros), negate(&poles))
}
