//! Seeded experiment harness: noise sweeps, per-generation and
//! per-damage-amount misidentification statistics, second-best error
//! surfaces, deep-damage responses and the interpolation comparison.
//!
//! Every trial seed is derived from the master seed and the
//! `(noise level, run, case)` key, so results do not depend on the order in
//! which trials execute.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::database::{is_inner_third_generation, PoleZeroDatabase};
use crate::error::{Error, Result};
use crate::identify::{identify, Objective, SolverSettings};
use crate::measurement::{make_grid, simulate_measurement, FrequencyGrid, NoiseMode, NoiseSpec};
use crate::model::{candidates, delta_for_case, ComponentId, DamageCase, TreeParams, C64};
use crate::regression::{strict_local_minima, PolynomialFit, RootOrdering};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            min: 1e-4,
            max: 1e4,
            count: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: f64,
    pub b: f64,
    pub grid: GridConfig,
    /// Depth of the candidate set and of the database.
    pub max_generation: u32,
    /// Noise amplitudes in percent.
    pub noise_levels: Vec<f64>,
    pub runs: usize,
    pub master_seed: u64,
    pub noise_mode: NoiseMode,
    /// Noise level for the breakdown and second-best experiments.
    pub breakdown_noise: f64,
    /// Run used for the second-best surface.
    pub surface_run: usize,
    /// Damage amounts of the test matrix.
    pub eps_values: Vec<f64>,
    pub regression_degree: usize,
    pub regression_ordering: RootOrdering,
    /// Interior points of the damage-amount grid for the comparison curves.
    pub comparison_points: usize,
    pub deep_generations: u32,
    /// Prebuilt database; built in memory when absent.
    pub database: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            b: 1.0,
            grid: GridConfig::default(),
            max_generation: 3,
            noise_levels: vec![0.0, 25.0, 50.0, 75.0, 100.0],
            runs: 10,
            master_seed: 2020,
            noise_mode: NoiseMode::Shared,
            breakdown_noise: 50.0,
            surface_run: 0,
            eps_values: (0..10).map(|i| (2 * i + 1) as f64 / 20.0).collect(),
            regression_degree: 10,
            regression_ordering: RootOrdering::Sorted,
            comparison_points: 4000,
            deep_generations: 7,
            database: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let config: Self = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.grid()?;
        if self.max_generation < 3 {
            return Err(Error::Config(format!(
                "experiments need candidates through generation 3, got {}",
                self.max_generation
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.surface_run >= self.runs {
            return Err(Error::Config("surface_run must be below runs".into()));
        }
        if let Some(n) = self
            .noise_levels
            .iter()
            .chain([&self.breakdown_noise])
            .find(|n| !(**n >= 0.0))
        {
            return Err(Error::Config(format!("noise level must be non-negative, got {n}")));
        }
        if let Some(e) = self.eps_values.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::Config(format!("damage amount must lie in (0, 1), got {e}")));
        }
        if self.comparison_points < 3 {
            return Err(Error::Config("comparison_points must be at least 3".into()));
        }
        if self.deep_generations == 0 {
            return Err(Error::Config("deep_generations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<TreeParams> {
        TreeParams::new(self.k, self.b)
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        make_grid(self.grid.min, self.grid.max, self.grid.count)
    }

    /// The 14 generation-1..3 components crossed with `eps_values`,
    /// component-major.
    pub fn test_matrix(&self) -> Result<Vec<DamageCase>> {
        let mut out = Vec::new();
        for c in candidates(3) {
            for &eps in &self.eps_values {
                out.push(DamageCase::new(c, eps)?);
            }
        }
        Ok(out)
    }

    /// Loads `database` if configured, otherwise builds one.
    pub fn database(&self) -> Result<PoleZeroDatabase> {
        let db = match &self.database {
            Some(path) => PoleZeroDatabase::load(path)?,
            None => PoleZeroDatabase::build(self.max_generation, &self.params()?)?,
        };
        Ok(db)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for one trial, keyed by the noise level's bit pattern so the same
/// level reuses the same noise in every experiment.
pub fn trial_seed(master: u64, noise_pct: f64, run: usize, case_index: usize) -> u64 {
    let mut h = splitmix64(master);
    for part in [noise_pct.to_bits(), run as u64, case_index as u64] {
        h = splitmix64(h ^ part);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub case: DamageCase,
    pub case_index: usize,
    pub noise_pct: f64,
    pub run: usize,
    pub seed: u64,
    pub identified: ComponentId,
    pub eps_star: f64,
    pub j_min: f64,
    pub second_best: Option<(ComponentId, f64)>,
}

impl TrialRecord {
    pub fn misidentified(&self) -> bool {
        self.identified != self.case.component
    }
}

/// Shared state for running trials against one database.
pub struct Harness<'a> {
    pub config: &'a ExperimentConfig,
    db: &'a PoleZeroDatabase,
    params: TreeParams,
    grid: FrequencyGrid,
    candidates: Vec<ComponentId>,
    cases: Vec<DamageCase>,
    pub settings: SolverSettings,
}

impl<'a> Harness<'a> {
    pub fn new(config: &'a ExperimentConfig, db: &'a PoleZeroDatabase) -> Result<Self> {
        config.validate()?;
        if db.max_generation() < 3 || db.max_generation() < config.max_generation {
            return Err(Error::Config(format!(
                "database covers generation {} but experiments need {}",
                db.max_generation(),
                config.max_generation.max(3)
            )));
        }
        let params = config.params()?;
        if *db.params() != params {
            return Err(Error::Config("database was built with different k/b".into()));
        }
        Ok(Self {
            config,
            db,
            params,
            grid: config.grid()?,
            candidates: candidates(config.max_generation),
            cases: config.test_matrix()?,
            settings: SolverSettings::default(),
        })
    }

    pub fn cases(&self) -> &[DamageCase] {
        &self.cases
    }

    pub fn trial(&self, case_index: usize, noise_pct: f64, run: usize) -> Result<TrialRecord> {
        let case = self.cases[case_index];
        let seed = trial_seed(self.config.master_seed, noise_pct, run, case_index);
        let noise = NoiseSpec::new(noise_pct, seed)?.with_mode(self.config.noise_mode);
        let measured = simulate_measurement(&case, &self.params, &self.grid, &noise)?;
        let result = identify(&measured, self.db, &self.candidates, &self.settings)?;
        Ok(TrialRecord {
            case,
            case_index,
            noise_pct,
            run,
            seed,
            identified: result.best.component,
            eps_star: result.best.eps_star,
            j_min: result.best.j,
            second_best: result.second_best().map(|s| (s.component, s.j)),
        })
    }

    /// All test-matrix cases for one `(noise, run)`, in case order.
    pub fn run(&self, noise_pct: f64, run: usize) -> Result<Vec<TrialRecord>> {
        let indices: Vec<usize> = (0..self.cases.len()).collect();
        #[cfg(feature = "parallel")]
        let records: Vec<Result<TrialRecord>> = {
            use rayon::prelude::*;
            indices.par_iter().map(|&i| self.trial(i, noise_pct, run)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let records: Vec<Result<TrialRecord>> = indices.iter().map(|&i| self.trial(i, noise_pct, run)).collect();
        records.into_iter().collect()
    }

    /// `runs` repetitions at one noise level, ordered by `(run, case)`.
    pub fn runs(&self, noise_pct: f64) -> Result<Vec<TrialRecord>> {
        let mut out = Vec::with_capacity(self.config.runs * self.cases.len());
        for run in 0..self.config.runs {
            out.extend(self.run(noise_pct, run)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRow<K> {
    pub key: K,
    pub misidentified: usize,
    pub total: usize,
}

impl<K> CountRow<K> {
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.misidentified as f64 / self.total as f64
        }
    }
}

fn tally<K: PartialEq + Clone>(records: &[TrialRecord], key: impl Fn(&TrialRecord) -> Option<K>) -> Vec<CountRow<K>> {
    let mut rows: Vec<CountRow<K>> = Vec::new();
    for r in records {
        let Some(k) = key(r) else { continue };
        let row = match rows.iter_mut().find(|row| row.key == k) {
            Some(row) => row,
            None => {
                rows.push(CountRow {
                    key: k,
                    misidentified: 0,
                    total: 0,
                });
                rows.last_mut().unwrap()
            }
        };
        row.total += 1;
        row.misidentified += r.misidentified() as usize;
    }
    rows
}

/// Misidentification count per `(noise level, run)`.
pub fn noise_sweep_table(records: &[TrialRecord]) -> Vec<CountRow<(f64, usize)>> {
    tally(records, |r| Some((r.noise_pct, r.run)))
}

/// Misidentification count per `(run, generation of the true component)`.
pub fn generation_table(records: &[TrialRecord]) -> Vec<CountRow<(usize, u32)>> {
    let mut rows = tally(records, |r| Some((r.run, r.case.component.generation())));
    rows.sort_by_key(|r| r.key);
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ThirdGenGroup {
    /// `k3,1`, `b3,1`
    OuterUpper,
    /// `k3,2`, `b3,2`, `k3,3`, `b3,3`
    Inner,
    /// `k3,4`, `b3,4`
    OuterLower,
}

impl ThirdGenGroup {
    pub fn of(c: &ComponentId) -> Option<Self> {
        if c.generation() != 3 {
            return None;
        }
        Some(match c.index() {
            1 => Self::OuterUpper,
            4 => Self::OuterLower,
            _ => Self::Inner,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::OuterUpper => "outer-3,1",
            Self::Inner => "inner-3,2-3,3",
            Self::OuterLower => "outer-3,4",
        }
    }
}

/// Misidentification count per generation-3 group, pooled over runs.
pub fn third_generation_groups(records: &[TrialRecord]) -> Vec<CountRow<ThirdGenGroup>> {
    let mut rows = tally(records, |r| ThirdGenGroup::of(&r.case.component));
    rows.sort_by_key(|r| r.key);
    rows
}

/// For inner generation-3 components: runs in which each `(component, eps)`
/// was misidentified.
pub fn damage_amount_table(records: &[TrialRecord]) -> Vec<CountRow<(ComponentId, u64)>> {
    let mut rows = tally(records, |r| {
        is_inner_third_generation(&r.case.component).then_some((r.case.component, r.case.eps.to_bits()))
    });
    rows.sort_by(|a, b| {
        a.key
            .0
            .cmp(&b.key.0)
            .then(f64::from_bits(a.key.1).total_cmp(&f64::from_bits(b.key.1)))
    });
    rows
}

/// Shortest round-trip decimal form.
fn num(x: f64) -> String {
    format!("{x}")
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

pub fn write_noise_sweep<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["noise_pct", "run", "misidentified", "total", "percent"])?;
    for row in noise_sweep_table(records) {
        w.write_record([
            row.key.0.to_string(),
            row.key.1.to_string(),
            row.misidentified.to_string(),
            row.total.to_string(),
            num(row.percent()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_generation_breakdown<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["run", "generation", "misidentified", "total", "percent"])?;
    for row in generation_table(records) {
        w.write_record([
            row.key.0.to_string(),
            row.key.1.to_string(),
            row.misidentified.to_string(),
            row.total.to_string(),
            num(row.percent()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_third_generation_groups<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["group", "misidentified", "total", "percent"])?;
    for row in third_generation_groups(records) {
        w.write_record([
            row.key.label().to_string(),
            row.misidentified.to_string(),
            row.total.to_string(),
            num(row.percent()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_damage_amount_breakdown<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["component", "eps", "misidentified_runs", "runs"])?;
    for row in damage_amount_table(records) {
        w.write_record([
            row.key.0.to_string(),
            num(f64::from_bits(row.key.1)),
            row.misidentified.to_string(),
            row.total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(index, component, eps, second-best J, second-best component, identified)`
/// for one run, with `index` the 1-based candidate position (`k1,1 -> 1`).
pub fn write_second_best_surface<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "index",
        "component",
        "eps",
        "second_best_J",
        "second_best_component",
        "identified",
    ])?;
    for r in records {
        let (sc, sj) = match r.second_best {
            Some((c, j)) => (c.to_string(), num(j)),
            None => ("none".into(), "nan".into()),
        };
        w.write_record([
            r.case.component.position().to_string(),
            r.case.component.to_string(),
            num(r.case.eps),
            sj,
            sc,
            r.identified.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepDamageCurve {
    pub case: DamageCase,
    pub pairs: usize,
    pub omegas: Vec<f64>,
    pub values: Vec<C64>,
}

impl DeepDamageCurve {
    /// `max_omega | |Delta| - 1 |`.
    pub fn max_deviation(&self) -> f64 {
        self.values.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Responses of `(k_{g,1}, 0.5)` for `g = 1..=generations`.
pub fn deep_damage_responses(
    params: &TreeParams,
    grid: &FrequencyGrid,
    generations: u32,
) -> Result<Vec<DeepDamageCurve>> {
    (1..=generations)
        .map(|g| {
            let case = DamageCase::new(ComponentId::spring(g, 1)?, 0.5)?;
            let rat = delta_for_case(&case, params)?;
            Ok(DeepDamageCurve {
                case,
                pairs: rat.zeros.len(),
                omegas: grid.omegas().to_vec(),
                values: grid.omegas().iter().map(|&w| rat.evaluate(C64::new(0.0, w))).collect(),
            })
        })
        .collect()
}

pub fn write_deep_damage<W: Write>(curves: &[DeepDamageCurve], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["generation", "omega", "magnitude", "magnitude_db", "phase_rad"])?;
    for c in curves {
        for (omega, v) in c.omegas.iter().zip(&c.values) {
            w.write_record([
                c.case.component.generation().to_string(),
                num(*omega),
                num(v.norm()),
                num(20.0 * v.norm().log10()),
                num(v.arg()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationComparison {
    pub target: DamageCase,
    pub eps: Vec<f64>,
    pub j_linear: Vec<f64>,
    pub j_regression: Vec<f64>,
    pub degree: usize,
    pub ordering: RootOrdering,
}

impl InterpolationComparison {
    pub fn linear_minima(&self) -> Vec<f64> {
        strict_local_minima(&self.j_linear)
            .into_iter()
            .map(|i| self.eps[i])
            .collect()
    }

    pub fn regression_minima(&self) -> Vec<f64> {
        strict_local_minima(&self.j_regression)
            .into_iter()
            .map(|i| self.eps[i])
            .collect()
    }
}

/// `J(l, eps)` against the noise-free response of `target`, once with
/// piecewise-linear interpolation and once with polynomial regression of
/// the same table, on `points` evenly spaced interior damage amounts.
pub fn interpolation_comparison(
    db: &PoleZeroDatabase,
    target: &DamageCase,
    grid: &FrequencyGrid,
    degree: usize,
    ordering: RootOrdering,
    points: usize,
) -> Result<InterpolationComparison> {
    let table = db.table(&target.component)?;
    let measured = simulate_measurement(target, db.params(), grid, &NoiseSpec::none())?;
    let objective = Objective::new(&measured)?;
    let fit = PolynomialFit::fit(table, degree, ordering)?;
    let (lo, hi) = table.eps_range();
    let eps: Vec<f64> = (1..=points)
        .map(|i| lo + (hi - lo) * i as f64 / (points + 1) as f64)
        .collect();
    Ok(InterpolationComparison {
        target: *target,
        j_linear: objective.curve(table, &eps),
        j_regression: objective.curve(&fit, &eps),
        eps,
        degree,
        ordering,
    })
}

pub fn write_interpolation_comparison<W: Write>(cmp: &InterpolationComparison, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["eps", "J_linear", "J_regression"])?;
    for ((e, a), b) in cmp.eps.iter().zip(&cmp.j_linear).zip(&cmp.j_regression) {
        w.write_record([num(*e), num(*a), num(*b)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_interpolation_summary<W: Write>(cmp: &InterpolationComparison, mut out: W) -> Result<()> {
    let list = |v: &[f64]| v.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>().join(" ");
    let lin = cmp.linear_minima();
    let reg = cmp.regression_minima();
    writeln!(out, "target={}", cmp.target)?;
    writeln!(out, "regression_degree={}", cmp.degree)?;
    writeln!(out, "regression_ordering={:?}", cmp.ordering)?;
    writeln!(out, "linear_local_minima={}", lin.len())?;
    writeln!(out, "linear_minima_eps={}", list(&lin))?;
    writeln!(out, "regression_local_minima={}", reg.len())?;
    writeln!(out, "regression_minima_eps={}", list(&reg))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    NoiseSweep,
    GenBreakdown,
    EpsBreakdown,
    SecondBest,
    DeepDamage,
    InterpCompare,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "noise-sweep" => Self::NoiseSweep,
            "gen-breakdown" => Self::GenBreakdown,
            "eps-breakdown" => Self::EpsBreakdown,
            "second-best" => Self::SecondBest,
            "deep-damage" => Self::DeepDamage,
            "interp-compare" => Self::InterpCompare,
            _ => return Err(Error::Domain(format!("unknown experiment '{s}'"))),
        })
    }
}

fn create(dir: &Path, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
}

/// Runs one experiment and writes its CSV files into `dir`; returns the
/// paths written.
pub fn run_experiment(kind: ExperimentKind, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &mut dyn FnMut(&mut dyn Write) -> Result<()>| -> Result<()> {
        let mut out = create(dir, name)?;
        f(&mut out)?;
        out.flush()?;
        written.push(dir.join(name));
        Ok(())
    };
    match kind {
        ExperimentKind::DeepDamage => {
            let curves = deep_damage_responses(&config.params()?, &config.grid()?, config.deep_generations)?;
            emit("deep_damage.csv", &mut |w| write_deep_damage(&curves, w))?;
            emit("deep_damage_summary.csv", &mut |w| {
                let mut csv = csv_writer(w);
                csv.write_record(["generation", "pairs", "max_abs_magnitude_deviation"])?;
                for c in &curves {
                    csv.write_record([
                        c.case.component.generation().to_string(),
                        c.pairs.to_string(),
                        num(c.max_deviation()),
                    ])?;
                }
                csv.flush()?;
                Ok(())
            })?;
        }
        ExperimentKind::InterpCompare => {
            let db = config.database()?;
            let target = DamageCase::new(ComponentId::spring(2, 1)?, 0.5)?;
            let cmp = interpolation_comparison(
                &db,
                &target,
                &config.grid()?,
                config.regression_degree,
                config.regression_ordering,
                config.comparison_points,
            )?;
            emit("interp_compare.csv", &mut |w| write_interpolation_comparison(&cmp, w))?;
            emit("interp_compare_summary.txt", &mut |w| {
                write_interpolation_summary(&cmp, w)
            })?;
        }
        _ => {
            let db = config.database()?;
            let harness = Harness::new(config, &db)?;
            match kind {
                ExperimentKind::NoiseSweep => {
                    let mut records = Vec::new();
                    for &level in &config.noise_levels {
                        records.extend(harness.runs(level)?);
                    }
                    emit("noise_sweep.csv", &mut |w| write_noise_sweep(&records, w))?;
                }
                ExperimentKind::GenBreakdown => {
                    let records = harness.runs(config.breakdown_noise)?;
                    emit("gen_breakdown.csv", &mut |w| write_generation_breakdown(&records, w))?;
                    emit("gen3_groups.csv", &mut |w| write_third_generation_groups(&records, w))?;
                }
                ExperimentKind::EpsBreakdown => {
                    let records = harness.runs(config.breakdown_noise)?;
                    emit("eps_breakdown.csv", &mut |w| write_damage_amount_breakdown(&records, w))?;
                }
                ExperimentKind::SecondBest => {
                    let records = harness.run(config.breakdown_noise, config.surface_run)?;
                    emit("second_best.csv", &mut |w| write_second_best_surface(&records, w))?;
                }
                ExperimentKind::DeepDamage | ExperimentKind::InterpCompare => unreachable!(),
            }
        }
    }
    Ok(written)
}
