//! Single-damage identification: for every candidate component, minimize
//! the identification error
//!
//! `J(l, eps) = sum_omega |Delta_(l,eps)(i omega) - D(i omega)| / |D(i omega)|`
//!
//! over `eps` from nine starts `0.1, ..., 0.9`, then keep the globally
//! smallest `J`. Ties go to the earlier candidate.

use std::io::Write;
use std::path::Path;

use crate::database::{ComponentTable, PoleZeroDatabase, RootMap};
use crate::error::{Error, Result};
use crate::measurement::FrequencyResponse;
use crate::minimize::{local_minimize, LocalSearch};
use crate::model::{ComponentId, HalfOrderRational, C64};

/// Measured response with `w = (i omega)^(1/2)` and `1/|D|` precomputed.
#[derive(Debug, Clone)]
pub struct Objective {
    w: Vec<C64>,
    measured: Vec<C64>,
    inv_abs: Vec<f64>,
}

impl Objective {
    pub fn new(measured: &FrequencyResponse) -> Result<Self> {
        let mut inv_abs = Vec::with_capacity(measured.values.len());
        for (omega, v) in measured.grid.omegas().iter().zip(&measured.values) {
            let a = v.norm();
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::ZeroMeasurement(*omega));
            }
            inv_abs.push(1.0 / a);
        }
        Ok(Self {
            w: measured
                .grid
                .omegas()
                .iter()
                .map(|&omega| C64::new(0.0, omega).sqrt())
                .collect(),
            measured: measured.values.clone(),
            inv_abs,
        })
    }

    pub fn error(&self, candidate: &HalfOrderRational) -> f64 {
        self.w
            .iter()
            .zip(&self.measured)
            .zip(&self.inv_abs)
            .map(|((&w, &m), &inv)| (candidate.evaluate_w(w) - m).norm() * inv)
            .sum()
    }

    /// `J` along the damage amount, reconstructing roots with `map`.
    pub fn curve<M: RootMap + ?Sized>(&self, map: &M, eps: &[f64]) -> Vec<f64> {
        eps.iter().map(|&e| self.error(&map.rational_at(e))).collect()
    }
}

pub fn identification_error(candidate: &HalfOrderRational, measured: &FrequencyResponse) -> Result<f64> {
    Ok(Objective::new(measured)?.error(candidate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub starts: Vec<f64>,
    pub xtol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            starts: (1..=9).map(|i| i as f64 / 10.0).collect(),
            xtol: 1e-8,
            max_iter: 200,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalResult {
    pub component: ComponentId,
    pub eps_star: f64,
    pub j: f64,
    pub starts_tried: usize,
    pub converged: bool,
    /// The minimizer sits on the edge of the sampled damage range.
    pub at_boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    pub best: LocalResult,
    /// Every candidate once, ascending by `J` (stable in candidate order).
    pub table: Vec<LocalResult>,
}

impl IdentificationResult {
    pub fn second_best(&self) -> Option<&LocalResult> {
        self.table.get(1)
    }

    pub fn second_best_j(&self) -> Option<f64> {
        self.second_best().map(|r| r.j)
    }
}

pub fn optimize_table(table: &ComponentTable, objective: &Objective, settings: &SolverSettings) -> LocalResult {
    let (lo, hi) = table.eps_range();
    let search = LocalSearch {
        lower: lo,
        upper: hi,
        step: settings.initial_step,
        xtol: settings.xtol,
        max_iter: settings.max_iter,
    };
    let j_of = |eps: f64| objective.error(&table.interpolate(eps).rational);
    let mut best: Option<(f64, f64, bool)> = None;
    let mut any_converged = false;
    for &start in &settings.starts {
        let m = local_minimize(j_of, start, &search);
        any_converged |= m.converged;
        // strict improvement keeps the earliest start on ties
        if best.is_none_or(|(_, j, _)| m.fx < j) {
            best = Some((m.x, m.fx, m.converged));
        }
    }
    let (eps_star, j, _) = best.unwrap_or_else(|| {
        let mid = 0.5 * (lo + hi);
        (mid, j_of(mid), false)
    });
    let edge = 10.0 * settings.xtol;
    LocalResult {
        component: table.component,
        eps_star,
        j,
        starts_tried: settings.starts.len(),
        converged: any_converged,
        at_boundary: eps_star - lo <= edge || hi - eps_star <= edge,
    }
}

pub fn optimize_component(
    component: &ComponentId,
    measured: &FrequencyResponse,
    db: &PoleZeroDatabase,
    settings: &SolverSettings,
) -> Result<LocalResult> {
    let objective = Objective::new(measured)?;
    Ok(optimize_table(db.table(component)?, &objective, settings))
}

/// Runs every candidate in `candidates` and reduces to the global best.
pub fn identify(
    measured: &FrequencyResponse,
    db: &PoleZeroDatabase,
    candidates: &[ComponentId],
    settings: &SolverSettings,
) -> Result<IdentificationResult> {
    if candidates.is_empty() {
        return Err(Error::Domain("candidate set is empty".into()));
    }
    let objective = Objective::new(measured)?;
    let tables = candidates.iter().map(|c| db.table(c)).collect::<Result<Vec<_>>>()?;
    #[cfg(feature = "parallel")]
    let locals: Vec<LocalResult> = {
        use rayon::prelude::*;
        tables
            .par_iter()
            .map(|t| optimize_table(t, &objective, settings))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let locals: Vec<LocalResult> = tables.iter().map(|t| optimize_table(t, &objective, settings)).collect();
    Ok(reduce(locals))
}

/// Sequential reference used to check the parallel path.
pub fn identify_sequential(
    measured: &FrequencyResponse,
    db: &PoleZeroDatabase,
    candidates: &[ComponentId],
    settings: &SolverSettings,
) -> Result<IdentificationResult> {
    if candidates.is_empty() {
        return Err(Error::Domain("candidate set is empty".into()));
    }
    let objective = Objective::new(measured)?;
    let mut locals = Vec::with_capacity(candidates.len());
    for c in candidates {
        locals.push(optimize_table(db.table(c)?, &objective, settings));
    }
    Ok(reduce(locals))
}

fn reduce(locals: Vec<LocalResult>) -> IdentificationResult {
    let mut table = locals;
    // stable: equal J keeps candidate order
    table.sort_by(|a, b| a.j.total_cmp(&b.j));
    IdentificationResult { best: table[0], table }
}

pub fn write_report(result: &IdentificationResult, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_report_to(result, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_report_to<W: Write>(result: &IdentificationResult, out: &mut W) -> Result<()> {
    {
        let mut csv = csv::Writer::from_writer(&mut *out);
        csv.write_record(["component", "eps_star", "J", "converged"])?;
        for r in &result.table {
            csv.write_record([
                r.component.to_string(),
                format!("{:.10}", r.eps_star),
                format!("{:.10e}", r.j),
                r.converged.to_string(),
            ])?;
        }
        csv.flush()?;
    }
    writeln!(out)?;
    writeln!(out, "# l_star={}", result.best.component)?;
    writeln!(out, "# eps_star={:.10}", result.best.eps_star)?;
    writeln!(out, "# J_min={:.10e}", result.best.j)?;
    match result.second_best() {
        Some(s) => {
            writeln!(out, "# second_best_J={:.10e}", s.j)?;
            writeln!(out, "# second_best_component={}", s.component)?;
        }
        None => {
            writeln!(out, "# second_best_J=none")?;
            writeln!(out, "# second_best_component=none")?;
        }
    }
    Ok(())
}
