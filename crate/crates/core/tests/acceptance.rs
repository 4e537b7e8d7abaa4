//! One PASS/FAIL line per acceptance criterion.
//!
//! Failing criteria are reported but do not fail the target unless
//! `FRACTREE_ACCEPTANCE_STRICT` is set.

mod common;

use std::time::Instant;

use common::{nested_delta, rel_err, scaled_root_gap};
use fractree::database::{match_roots, SAMPLE_COUNT};
use fractree::experiments::{
    deep_damage_responses, interpolation_comparison, noise_sweep_table, run_experiment, third_generation_groups,
    ExperimentConfig, ExperimentKind, Harness, ThirdGenGroup, TrialRecord,
};
use fractree::identify::write_report_to;
use fractree::measurement::{read_measurement, write_measurement};
use fractree::regression::RootOrdering;
use fractree::roots::poly_roots;
use fractree::{
    candidates, delta_for_case, identify, make_grid, simulate_measurement, ComponentId, DamageCase, NoiseSpec,
    PoleZeroDatabase, SolverSettings, TreeParams, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const C1_ROOT_TOL: f64 = 1e-12;
const C1_SECONDS: f64 = 1.0;
const C2_REL_TOL: f64 = 1e-8;
const C2_SECONDS: f64 = 10.0;
const C3_LIMIT_TOL: f64 = 1e-6;
const C3_S_SMALL: f64 = 1e-12;
const C3_S_LARGE: f64 = 1e12;
const C4_EPS_TOL: f64 = 1e-3;
const C5_BAND: (f64, f64) = (5.0, 25.0);
const C7_ROOT_TOL: f64 = 1e-3;
const C7_EPS_RANGE: (f64, f64) = (0.05, 0.95);

struct Report {
    passed: usize,
    failed: Vec<String>,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(id.to_string());
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn closed_form(report: &mut Report) {
    let t = Instant::now();
    let p = TreeParams::default();
    let r = p.r();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let eps = (2 * i + 1) as f64 / 20.0;
        let got = delta_for_case(&DamageCase::new(ComponentId::spring(1, 1).unwrap(), eps).unwrap(), &p).unwrap();
        let im = r * (eps - eps * eps).sqrt();
        let zeros = [C64::new(r, 0.0), C64::new(eps * r, 0.0)];
        let poles = [C64::new(eps * r, im), C64::new(eps * r, -im)];
        worst = worst.max(scaled_root_gap(&got.zeros, &zeros, 1.0));
        worst = worst.max(scaled_root_gap(&got.poles, &poles, 1.0));
        // the generic solver on the expanded polynomials agrees too
        let solved = poly_roots(&got.numerator()).unwrap();
        let negated: Vec<C64> = solved.iter().map(|z| -z).collect();
        worst = worst.max(scaled_root_gap(&negated, &zeros, 1.0));
    }
    let secs = t.elapsed().as_secs_f64();
    report.line(
        "C1 closed-form equivalence",
        worst <= C1_ROOT_TOL && secs < C1_SECONDS,
        format!("max root error {worst:.2e} (tol {C1_ROOT_TOL:e}), {secs:.3} s (limit {C1_SECONDS} s)"),
    );
}

fn nested_oracle(report: &mut Report) {
    let t = Instant::now();
    let p = TreeParams::default();
    let pool = candidates(4);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c = pool[rng.random_range(0..pool.len())];
        let eps = rng.random_range(0.01..0.99);
        let rat = delta_for_case(&DamageCase::new(c, eps).unwrap(), &p).unwrap();
        for _ in 0..10 {
            let s = C64::new(0.0, 10f64.powf(rng.random_range(-4.0..4.0)));
            worst = worst.max(rel_err(rat.evaluate(s), nested_delta(c, eps, s, &p)));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    report.line(
        "C2 nested-formula oracle",
        worst <= C2_REL_TOL && secs < C2_SECONDS,
        format!("100 cases x 10 frequencies, max relative error {worst:.2e} (tol {C2_REL_TOL:e}), {secs:.3} s"),
    );
}

fn invariant_suite(report: &mut Report) {
    let p = TreeParams::default();
    let mut structural = true;
    let mut worst_low: (f64, String) = (0.0, String::new());
    let mut worst_high: (f64, String) = (0.0, String::new());
    let mut count = 0;
    for c in candidates(5) {
        for j in 1..=20 {
            let eps = j as f64 / 21.0;
            let rat = delta_for_case(&DamageCase::new(c, eps).unwrap(), &p).unwrap();
            let g = c.generation() as usize;
            structural &= rat.zeros.len() == 2 * g && rat.poles.len() == 2 * g;
            structural &= rat.check_invariants(1e-8).is_ok();
            let low = (rat.evaluate(C64::new(0.0, C3_S_SMALL)) - 1.0).norm();
            let high = (rat.evaluate(C64::new(0.0, C3_S_LARGE)) - 1.0).norm();
            if low > worst_low.0 {
                worst_low = (low, format!("{c} eps={eps:.3}"));
            }
            if high > worst_high.0 {
                worst_high = (high, format!("{c} eps={eps:.3}"));
            }
            count += 1;
        }
    }
    let k21 = ComponentId::spring(2, 1).unwrap();
    let fixed = (1..=20).all(|j| {
        let rat = delta_for_case(&DamageCase::new(k21, j as f64 / 21.0).unwrap(), &p).unwrap();
        rat.zeros.iter().any(|z| (z - C64::new(p.r(), 0.0)).norm() < 1e-9)
    });
    let limits = worst_low.0 <= C3_LIMIT_TOL && worst_high.0 <= C3_LIMIT_TOL;
    report.line(
        "C3 invariant suite",
        structural && fixed && limits,
        format!(
            "{count} cases; degree/closure/product {}; k2,1 fixed zero {}; |Delta-1| at |s|={C3_S_SMALL:e} max {:.2e} ({}), at |s|={C3_S_LARGE:e} max {:.2e} ({}) (tol {C3_LIMIT_TOL:e})",
            if structural { "ok" } else { "broken" },
            if fixed { "ok" } else { "missing" },
            worst_low.0,
            worst_low.1,
            worst_high.0,
            worst_high.1
        ),
    );
}

fn noise_free(report: &mut Report, harness: &Harness) {
    let t = Instant::now();
    let records = harness.run(0.0, 0).unwrap();
    let wrong = records.iter().filter(|r| r.misidentified()).count();
    let worst = records
        .iter()
        .map(|r| (r.eps_star - r.case.eps).abs())
        .fold(0.0, f64::max);
    report.line(
        "C4 noise-free identification",
        wrong == 0 && worst <= C4_EPS_TOL && records.len() == 140,
        format!(
            "{} cases, {wrong} misidentified, max |eps - eps*| {worst:.2e} (tol {C4_EPS_TOL:e}), {:.1} s",
            records.len(),
            t.elapsed().as_secs_f64()
        ),
    );
}

fn run_means(records: &[TrialRecord]) -> Vec<f64> {
    noise_sweep_table(records).iter().map(|r| r.percent()).collect()
}

fn noise_bands(report: &mut Report, at100: &[TrialRecord], at50: &[TrialRecord], at25: &[TrialRecord]) {
    let m100 = mean(&run_means(at100));
    let groups = third_generation_groups(at50);
    let pct = |g: ThirdGenGroup| groups.iter().find(|r| r.key == g).map(|r| r.percent()).unwrap();
    let (inner, upper, lower) = (
        pct(ThirdGenGroup::Inner),
        pct(ThirdGenGroup::OuterUpper),
        pct(ThirdGenGroup::OuterLower),
    );
    report.line(
        "C5 noise robustness band",
        m100 >= C5_BAND.0 && m100 <= C5_BAND.1 && inner > upper && inner > lower,
        format!(
            "100% noise mean {m100:.2}% over {} runs (band [{}, {}]%); 50% noise gen-3 inner {inner:.2}% vs outer {upper:.2}% / {lower:.2}%",
            run_means(at100).len(),
            C5_BAND.0,
            C5_BAND.1
        ),
    );
    let m25 = mean(&run_means(at25));
    report.line(
        "C6 monotone noise trend",
        m100 > m25,
        format!("mean misidentification {m25:.2}% at 25% noise, {m100:.2}% at 100% noise"),
    );
}

fn interpolation_fidelity(report: &mut Report, db: &PoleZeroDatabase) {
    let p = TreeParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: (f64, String) = (0.0, String::new());
    let mut worst_rel: f64 = 0.0;
    for c in candidates(3) {
        let table = db.table(&c).unwrap();
        for _ in 0..50 {
            let eps = rng.random_range(C7_EPS_RANGE.0..C7_EPS_RANGE.1);
            let approx = table.interpolate(eps).rational;
            let exact = delta_for_case(&DamageCase::new(c, eps).unwrap(), &p).unwrap();
            for (a, e) in [(&approx.zeros, &exact.zeros), (&approx.poles, &exact.poles)] {
                let perm = match_roots(e, a);
                for (x, j) in e.iter().zip(perm) {
                    let d = (a[j] - x).norm();
                    if d / p.r() > worst.0 {
                        worst = (d / p.r(), format!("{c} eps={eps:.4}"));
                    }
                    worst_rel = worst_rel.max(d / p.r().max(x.norm()));
                }
            }
        }
    }
    report.line(
        "C7 interpolation fidelity",
        worst.0 <= C7_ROOT_TOL,
        format!(
            "14 components x 50 eps in [{}, {}]: max |root error|/r {:.2e} ({}), max relative {worst_rel:.2e} (tol {C7_ROOT_TOL:e})",
            C7_EPS_RANGE.0, C7_EPS_RANGE.1, worst.0, worst.1
        ),
    );
}

fn deep_damage(report: &mut Report) {
    let grid = make_grid(1e-4, 1e4, 200).unwrap();
    let curves = deep_damage_responses(&TreeParams::default(), &grid, 7).unwrap();
    let dev: Vec<f64> = curves.iter().map(|c| c.max_deviation()).collect();
    let ok = dev.windows(2).all(|w| w[1] < w[0]) && curves[6].pairs == 14;
    let list: Vec<String> = dev.iter().map(|d| format!("{d:.4}")).collect();
    report.line(
        "C8 deep-damage decay",
        ok,
        format!("max | |Delta| - 1 | for g=1..7: {}", list.join(" ")),
    );
}

fn interpolation_comparison_check(report: &mut Report, db: &PoleZeroDatabase) {
    let grid = make_grid(1e-4, 1e4, 200).unwrap();
    let target = DamageCase::new(ComponentId::spring(2, 1).unwrap(), 0.5).unwrap();
    let sorted = interpolation_comparison(db, &target, &grid, 10, RootOrdering::Sorted, 4000).unwrap();
    let tracked = interpolation_comparison(db, &target, &grid, 10, RootOrdering::Tracked, 4000).unwrap();
    let lin = sorted.linear_minima();
    let reg = sorted.regression_minima();
    let ok = lin.len() == 1 && (lin[0] - 0.5).abs() < 0.01 && reg.len() > 1;
    report.line(
        "C9 interpolation comparison",
        ok,
        format!(
            "linear: {} minimum at eps {:?}; degree-10 regression on solver-ordered roots: {} minima (on tracked loci: {})",
            lin.len(),
            lin.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>(),
            reg.len(),
            tracked.regression_minima().len()
        ),
    );
}

fn determinism(report: &mut Report, db: &PoleZeroDatabase) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    db.save(d.join("db.txt")).unwrap();
    let db_ok = PoleZeroDatabase::load(d.join("db.txt")).unwrap() == *db;

    let case = DamageCase::new(ComponentId::damper(3, 3).unwrap(), 0.25).unwrap();
    let grid = make_grid(1e-4, 1e4, 200).unwrap();
    let fr = simulate_measurement(&case, db.params(), &grid, &NoiseSpec::new(75.0, 3).unwrap()).unwrap();
    write_measurement(&fr, d.join("m.csv")).unwrap();
    let meas_ok = read_measurement(d.join("m.csv")).unwrap() == fr;

    let report_bytes = |fr| {
        let r = identify(fr, db, &candidates(3), &SolverSettings::default()).unwrap();
        let mut buf = Vec::new();
        write_report_to(&r, &mut buf).unwrap();
        buf
    };
    let ident_ok = report_bytes(&fr) == report_bytes(&read_measurement(d.join("m.csv")).unwrap());

    let config = ExperimentConfig {
        runs: 2,
        noise_levels: vec![0.0, 50.0],
        database: Some(d.join("db.txt")),
        ..ExperimentConfig::default()
    };
    let mut exp_ok = true;
    for kind in [ExperimentKind::NoiseSweep, ExperimentKind::SecondBest] {
        let a = run_experiment(kind, &config, &d.join("a")).unwrap();
        let b = run_experiment(kind, &config, &d.join("b")).unwrap();
        for (x, y) in a.iter().zip(&b) {
            exp_ok &= std::fs::read(x).unwrap() == std::fs::read(y).unwrap();
        }
    }
    report.line(
        "C10 determinism and round trips",
        db_ok && meas_ok && ident_ok && exp_ok,
        format!("database {db_ok}, measurement {meas_ok}, identify report {ident_ok}, experiment CSVs {exp_ok}"),
    );
}

fn main() {
    let mut report = Report {
        passed: 0,
        failed: Vec::new(),
    };
    closed_form(&mut report);
    nested_oracle(&mut report);
    invariant_suite(&mut report);

    let config = ExperimentConfig::default();
    let db = config.database().unwrap();
    assert_eq!(
        db.table(&ComponentId::spring(1, 1).unwrap()).unwrap().samples.len(),
        SAMPLE_COUNT
    );
    let harness = Harness::new(&config, &db).unwrap();
    noise_free(&mut report, &harness);
    let at100 = harness.runs(100.0).unwrap();
    let at50 = harness.runs(50.0).unwrap();
    let at25 = harness.runs(25.0).unwrap();
    noise_bands(&mut report, &at100, &at50, &at25);
    interpolation_fidelity(&mut report, &db);
    deep_damage(&mut report);
    interpolation_comparison_check(&mut report, &db);
    determinism(&mut report, &db);

    println!(
        "{} passed, {} failed {:?}",
        report.passed,
        report.failed.len(),
        report.failed
    );
    if std::env::var_os("FRACTREE_ACCEPTANCE_STRICT").is_some() && !report.failed.is_empty() {
        std::process::exit(1);
    }
}
