//! Browser bindings: Bode curves, root loci and a small identification
//! round trip. Every export returns a JSON string.

use std::cell::OnceCell;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fractree::{
    candidates, delta_for_case, identify, make_grid, simulate_measurement, ComponentId, DamageCase, NoiseSpec,
    PoleZeroDatabase, SolverSettings, TreeParams, C64,
};

const DEMO_GENERATION: u32 = 3;

thread_local! {
    static DEMO_DB: OnceCell<PoleZeroDatabase> = const { OnceCell::new() };
}

#[derive(Serialize)]
struct Bode {
    omega: Vec<f64>,
    magnitude_db: Vec<f64>,
    phase_deg: Vec<f64>,
}

#[derive(Serialize)]
struct Locus {
    eps: Vec<f64>,
    /// `zeros[i][j]` is `[re, im]` of root `j` at `eps[i]`, in the `s^(1/2)`
    /// plane.
    zeros: Vec<Vec<[f64; 2]>>,
    poles: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct Candidate {
    component: String,
    eps_star: f64,
    j: f64,
}

#[derive(Serialize)]
struct Identification {
    truth: String,
    true_eps: f64,
    identified: String,
    eps_star: f64,
    j_min: f64,
    correct: bool,
    measured: Bode,
    fitted: Bode,
    ranking: Vec<Candidate>,
}

fn bode_of(omega: &[f64], values: &[C64]) -> Bode {
    Bode {
        omega: omega.to_vec(),
        magnitude_db: values.iter().map(|v| 20.0 * v.norm().log10()).collect(),
        phase_deg: values.iter().map(|v| v.arg().to_degrees()).collect(),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

fn parse_case(component: &str, eps: f64) -> fractree::Result<DamageCase> {
    DamageCase::new(component.trim().parse::<ComponentId>()?, eps)
}

pub fn bode_json(component: &str, eps: f64, k: f64, b: f64, points: usize) -> fractree::Result<String> {
    let params = TreeParams::new(k, b)?;
    let rat = delta_for_case(&parse_case(component, eps)?, &params)?;
    let grid = make_grid(1e-4, 1e4, points)?;
    let values: Vec<C64> = grid.omegas().iter().map(|&w| rat.evaluate(C64::new(0.0, w))).collect();
    Ok(json(&bode_of(grid.omegas(), &values)))
}

pub fn locus_json(component: &str, k: f64, b: f64, steps: usize) -> fractree::Result<String> {
    let params = TreeParams::new(k, b)?;
    let c: ComponentId = component.trim().parse()?;
    let steps = steps.clamp(2, 400);
    let mut locus = Locus {
        eps: Vec::new(),
        zeros: Vec::new(),
        poles: Vec::new(),
    };
    let pairs = |roots: &[C64]| roots.iter().map(|z| [-z.re, -z.im]).collect::<Vec<_>>();
    for i in 0..steps {
        let eps = 0.02 + 0.96 * i as f64 / (steps - 1) as f64;
        let rat = delta_for_case(&DamageCase::new(c, eps)?, &params)?;
        locus.eps.push(eps);
        locus.zeros.push(pairs(&rat.zeros));
        locus.poles.push(pairs(&rat.poles));
    }
    Ok(json(&locus))
}

pub fn identify_json(component: &str, eps: f64, noise: f64, seed: u64) -> fractree::Result<String> {
    let case = parse_case(component, eps)?;
    if case.component.generation() > DEMO_GENERATION {
        return Err(fractree::Error::Domain(format!(
            "the demo database stops at generation {DEMO_GENERATION}"
        )));
    }
    let params = TreeParams::default();
    let grid = make_grid(1e-4, 1e4, 200)?;
    let measured = simulate_measurement(&case, &params, &grid, &NoiseSpec::new(noise, seed)?)?;
    DEMO_DB.with(|cell| {
        if cell.get().is_none() {
            let _ = cell.set(PoleZeroDatabase::build(DEMO_GENERATION, &params)?);
        }
        let db = cell.get().expect("initialized above");
        let result = identify(&measured, db, &candidates(DEMO_GENERATION), &SolverSettings::default())?;
        let best = result.best;
        let rat = db.table(&best.component)?.interpolate(best.eps_star).rational;
        let fitted: Vec<C64> = grid.omegas().iter().map(|&w| rat.evaluate(C64::new(0.0, w))).collect();
        Ok(json(&Identification {
            truth: case.component.to_string(),
            true_eps: case.eps,
            identified: best.component.to_string(),
            eps_star: best.eps_star,
            j_min: best.j,
            correct: best.component == case.component,
            measured: bode_of(grid.omegas(), &measured.values),
            fitted: bode_of(grid.omegas(), &fitted),
            ranking: result
                .table
                .iter()
                .map(|r| Candidate {
                    component: r.component.to_string(),
                    eps_star: r.eps_star,
                    j: r.j,
                })
                .collect(),
        }))
    })
}

fn to_js(e: fractree::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn bode(component: &str, eps: f64, k: f64, b: f64, points: usize) -> Result<String, JsError> {
    bode_json(component, eps, k, b, points).map_err(to_js)
}

#[wasm_bindgen]
pub fn root_locus(component: &str, k: f64, b: f64, steps: usize) -> Result<String, JsError> {
    locus_json(component, k, b, steps).map_err(to_js)
}

#[wasm_bindgen]
pub fn identify_demo(component: &str, eps: f64, noise: f64, seed: u32) -> Result<String, JsError> {
    identify_json(component, eps, noise, u64::from(seed)).map_err(to_js)
}
