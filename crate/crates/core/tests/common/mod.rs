#![allow(dead_code)]

use fractree::{Branch, ComponentId, Kind, TreeParams, C64};

/// Direct evaluation of the nested series/parallel formula for the tree
/// response with one damaged component, normalized by the undamaged tree.
pub fn nested_delta(component: ComponentId, eps: f64, s: C64, p: &TreeParams) -> C64 {
    let g_inf = p.c() / s.sqrt();
    nested(component, eps, s, p, g_inf) / g_inf
}

fn cell(k: f64, b: f64, s: C64, upper: C64, lower: C64) -> C64 {
    let spring_arm = 1.0 / k + upper;
    let damper_arm = 1.0 / (b * s) + lower;
    1.0 / (1.0 / spring_arm + 1.0 / damper_arm)
}

fn nested(component: ComponentId, eps: f64, s: C64, p: &TreeParams, g_inf: C64) -> C64 {
    if component.generation() == 1 {
        return match component.kind() {
            Kind::Spring => cell(p.k() * eps, p.b(), s, g_inf, g_inf),
            Kind::Damper => cell(p.k(), p.b() * eps, s, g_inf, g_inf),
        };
    }
    let (parent, branch) = component.parent().unwrap();
    let inner = nested(parent, eps, s, p, g_inf);
    match branch {
        Branch::Upper => cell(p.k(), p.b(), s, inner, g_inf),
        Branch::Lower => cell(p.k(), p.b(), s, g_inf, inner),
    }
}

pub fn rel_err(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Worst matched root distance between two root sets, scaled by
/// `max(r, |root|)`.
pub fn scaled_root_gap(approx: &[C64], exact: &[C64], r: f64) -> f64 {
    let perm = fractree::database::match_roots(exact, approx);
    exact
        .iter()
        .zip(perm)
        .map(|(e, j)| (approx[j] - e).norm() / r.max(e.norm()))
        .fold(0.0, f64::max)
}
