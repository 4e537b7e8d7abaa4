//! Synthetic measured responses and the measurement CSV format.
//!
//! Noise is multiplicative in log-magnitude and phase: with `Delta = A + iB`
//! and `n` uniform on `[-n_max, n_max]` percent,
//! `|D| = 10^((1 + n/100) log10 |Delta|)` and `arg D = (1 + n/100) atan2(B, A)`.

use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::database::fmt_real;
use crate::error::{Error, Result};
use crate::model::{delta_for_case, ComponentId, DamageCase, TreeParams, C64};

pub const FORMAT_HEADER: &str = "# fractree-meas v1";

/// Strictly increasing positive angular frequencies (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::Domain("frequency grid is empty".into()));
        }
        if let Some(w) = omegas.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Domain(format!("angular frequency must be positive, got {w}")));
        }
        if let Some(i) = omegas.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!(
                "frequencies must be strictly increasing ({} then {})",
                omegas[i],
                omegas[i + 1]
            )));
        }
        Ok(Self { omegas })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

impl Default for FrequencyGrid {
    /// 200 log-spaced points over `[1e-4, 1e4]` rad/s.
    fn default() -> Self {
        make_grid(1e-4, 1e4, 200).expect("valid default grid")
    }
}

/// `count` log-spaced frequencies with both endpoints included exactly.
pub fn make_grid(min_omega: f64, max_omega: f64, count: usize) -> Result<FrequencyGrid> {
    if !(min_omega > 0.0 && max_omega > min_omega && max_omega.is_finite()) {
        return Err(Error::Domain(format!(
            "grid bounds must satisfy 0 < min < max, got {min_omega}..{max_omega}"
        )));
    }
    if count < 2 {
        return Err(Error::Domain(format!("grid needs at least 2 points, got {count}")));
    }
    let (lo, hi) = (min_omega.log10(), max_omega.log10());
    let step = (hi - lo) / (count - 1) as f64;
    let mut omegas: Vec<f64> = (0..count).map(|i| 10f64.powf(lo + step * i as f64)).collect();
    omegas[0] = min_omega;
    omegas[count - 1] = max_omega;
    FrequencyGrid::new(omegas)
}

/// Parses `MIN:MAX:N`.
pub fn parse_grid(spec: &str) -> Result<FrequencyGrid> {
    let bad = || Error::Domain(format!("grid must look like MIN:MAX:N, got '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let min = parts[0].trim().parse().map_err(|_| bad())?;
    let max = parts[1].trim().parse().map_err(|_| bad())?;
    let n = parts[2].trim().parse().map_err(|_| bad())?;
    make_grid(min, max, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// One draw per frequency, shared by magnitude and phase.
    #[default]
    Shared,
    /// Separate draws for magnitude and phase at every frequency.
    Independent,
    /// A single draw for the whole response.
    PerResponse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Amplitude of the uniform noise, in percent.
    pub n_max: f64,
    pub seed: u64,
    pub mode: NoiseMode,
}

impl NoiseSpec {
    pub fn new(n_max: f64, seed: u64) -> Result<Self> {
        if !(n_max >= 0.0 && n_max.is_finite()) {
            return Err(Error::Domain(format!("noise level must be non-negative, got {n_max}")));
        }
        Ok(Self {
            n_max,
            seed,
            mode: NoiseMode::Shared,
        })
    }

    pub fn none() -> Self {
        Self {
            n_max: 0.0,
            seed: 0,
            mode: NoiseMode::Shared,
        }
    }

    pub fn with_mode(mut self, mode: NoiseMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub true_case: Option<DamageCase>,
    pub noise_pct: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub grid: FrequencyGrid,
    pub values: Vec<C64>,
    pub provenance: Provenance,
}

impl FrequencyResponse {
    pub fn new(grid: FrequencyGrid, values: Vec<C64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Contract(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            provenance: Provenance::default(),
        })
    }
}

/// Applies the log-magnitude/phase perturbation for draws `n_mag`, `n_phase`
/// (percent). Zero draws return `value` untouched.
pub fn apply_noise(value: C64, n_mag: f64, n_phase: f64) -> C64 {
    if n_mag == 0.0 && n_phase == 0.0 {
        return value;
    }
    let magnitude = 10f64.powf((1.0 + n_mag / 100.0) * value.norm().log10());
    let phase = (1.0 + n_phase / 100.0) * value.im.atan2(value.re);
    C64::from_polar(magnitude, phase)
}

/// Analytic `Delta(i omega)` for `case` on `grid`, perturbed by `noise`.
/// Draws are taken in grid order from a ChaCha8 stream seeded by `noise.seed`.
pub fn simulate_measurement(
    case: &DamageCase,
    params: &TreeParams,
    grid: &FrequencyGrid,
    noise: &NoiseSpec,
) -> Result<FrequencyResponse> {
    let rational = delta_for_case(case, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        if noise.n_max == 0.0 {
            0.0
        } else {
            noise.n_max * (2.0 * rng.random::<f64>() - 1.0)
        }
    };
    let global = if noise.mode == NoiseMode::PerResponse {
        draw(&mut rng)
    } else {
        0.0
    };
    let values = grid
        .omegas()
        .iter()
        .map(|&omega| {
            let exact = rational.evaluate(C64::new(0.0, omega));
            let (n_mag, n_phase) = match noise.mode {
                NoiseMode::Shared => {
                    let n = draw(&mut rng);
                    (n, n)
                }
                NoiseMode::Independent => (draw(&mut rng), draw(&mut rng)),
                NoiseMode::PerResponse => (global, global),
            };
            apply_noise(exact, n_mag, n_phase)
        })
        .collect();
    Ok(FrequencyResponse {
        grid: grid.clone(),
        values,
        provenance: Provenance {
            true_case: Some(*case),
            noise_pct: Some(noise.n_max),
            seed: Some(noise.seed),
        },
    })
}

pub fn write_measurement(fr: &FrequencyResponse, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_measurement_to(fr, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_measurement_to<W: Write>(fr: &FrequencyResponse, out: &mut W) -> Result<()> {
    let p = &fr.provenance;
    writeln!(out, "{FORMAT_HEADER}")?;
    match &p.true_case {
        Some(c) => writeln!(out, "# true_case={} eps={}", c.component, fmt_real(c.eps))?,
        None => writeln!(out, "# true_case=none")?,
    }
    match p.noise_pct {
        Some(n) => writeln!(out, "# noise_pct={n}")?,
        None => writeln!(out, "# noise_pct=none")?,
    }
    match p.seed {
        Some(s) => writeln!(out, "# seed={s}")?,
        None => writeln!(out, "# seed=none")?,
    }
    let mut csv = csv::WriterBuilder::new().from_writer(out);
    csv.write_record(["omega", "re", "im"])?;
    for (w, v) in fr.grid.omegas().iter().zip(&fr.values) {
        csv.write_record([fmt_real(*w), fmt_real(v.re), fmt_real(v.im)])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_measurement(path: impl AsRef<Path>) -> Result<FrequencyResponse> {
    let path = path.as_ref();
    read_measurement_from(std::fs::File::open(path)?, path)
}

pub fn read_measurement_from<R: Read>(input: R, origin: impl AsRef<Path>) -> Result<FrequencyResponse> {
    let origin = origin.as_ref();
    let mut text = String::new();
    BufReader::new(input).read_to_string(&mut text)?;

    let mut provenance = Provenance::default();
    for (i, line) in text.lines().enumerate() {
        let Some(meta) = line.trim().strip_prefix('#') else {
            continue;
        };
        let meta = meta.trim();
        let err = |msg: String| Error::format(origin, i + 1, msg);
        if let Some(v) = meta.strip_prefix("true_case=") {
            if v != "none" {
                let (comp, eps) = v
                    .split_once(" eps=")
                    .ok_or_else(|| err(format!("bad true_case '{v}'")))?;
                let component: ComponentId = comp.parse().map_err(|e: Error| err(e.to_string()))?;
                let eps: f64 = eps.trim().parse().map_err(|_| err(format!("bad eps '{eps}'")))?;
                provenance.true_case = Some(DamageCase::new(component, eps).map_err(|e| err(e.to_string()))?);
            }
        } else if let Some(v) = meta.strip_prefix("noise_pct=") {
            if v != "none" {
                provenance.noise_pct = Some(v.parse().map_err(|_| err(format!("bad noise_pct '{v}'")))?);
            }
        } else if let Some(v) = meta.strip_prefix("seed=") {
            if v != "none" {
                provenance.seed = Some(v.parse().map_err(|_| err(format!("bad seed '{v}'")))?);
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut omegas = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.get(0) == Some("omega") {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::format(
                origin,
                line,
                format!("expected 3 columns, found {}", record.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| Error::format(origin, line, format!("bad number '{}'", &record[i])))
        };
        let omega = num(0)?;
        if let Some(&prev) = omegas.last() {
            if !(omega > prev) {
                return Err(Error::format(
                    origin,
                    line,
                    format!("omega {omega} does not increase (previous {prev})"),
                ));
            }
        }
        omegas.push(omega);
        values.push(C64::new(num(1)?, num(2)?));
    }
    let grid = FrequencyGrid::new(omegas).map_err(|e| Error::format(origin, 0, e.to_string()))?;
    let mut fr = FrequencyResponse::new(grid, values)?;
    fr.provenance = provenance;
    Ok(fr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(c: &str, eps: f64) -> DamageCase {
        DamageCase::new(c.parse().unwrap(), eps).unwrap()
    }

    #[test]
    fn grid_examples() {
        let g = make_grid(1e-4, 1e4, 200).unwrap();
        assert_eq!(g.omegas()[0], 1e-4);
        assert_eq!(g.omegas()[199], 1e4);
        let g = make_grid(1.0, 100.0, 3).unwrap();
        assert!((g.omegas()[1] - 10.0).abs() < 1e-12);
        let g = make_grid(1e-2, 1e2, 5).unwrap();
        for w in g.omegas().windows(2) {
            assert!((w[1] / w[0] - 10.0).abs() < 1e-12);
        }
        assert!(make_grid(0.0, 1.0, 10).is_err());
        assert!(make_grid(2.0, 1.0, 10).is_err());
        assert!(make_grid(1.0, 2.0, 1).is_err());
        assert_eq!(parse_grid("1e-2:1e2:5").unwrap(), g);
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn noise_formula_examples() {
        let one = C64::new(1.0, 0.0);
        for n in [-100.0, -37.0, 0.0, 50.0, 100.0] {
            assert_eq!(apply_noise(one, n, n), one);
        }
        let v = C64::new(0.1, 0.0);
        assert!((apply_noise(v, 50.0, 50.0).norm() - 10f64.powf(-1.5)).abs() < 1e-15);
        assert!((apply_noise(v, 50.0, 50.0).norm() - 0.031_623).abs() < 1e-6);
        // phase scales too
        let v = C64::from_polar(0.5, 0.4);
        assert!((apply_noise(v, 0.0, 25.0).arg() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_is_exact() {
        let c = case("k3,2", 0.5);
        let grid = make_grid(1e-3, 1e3, 40).unwrap();
        let fr = simulate_measurement(&c, &TreeParams::default(), &grid, &NoiseSpec::new(0.0, 9).unwrap()).unwrap();
        let rat = delta_for_case(&c, &TreeParams::default()).unwrap();
        for (w, v) in grid.omegas().iter().zip(&fr.values) {
            assert_eq!(*v, rat.evaluate(C64::new(0.0, *w)));
        }
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let c = case("b2,2", 0.3);
        let grid = FrequencyGrid::default();
        let p = TreeParams::default();
        for mode in [NoiseMode::Shared, NoiseMode::Independent, NoiseMode::PerResponse] {
            let noise = NoiseSpec::new(50.0, 42).unwrap().with_mode(mode);
            let a = simulate_measurement(&c, &p, &grid, &noise).unwrap();
            let b = simulate_measurement(&c, &p, &grid, &noise).unwrap();
            assert_eq!(a, b);
            let other =
                simulate_measurement(&c, &p, &grid, &NoiseSpec::new(50.0, 43).unwrap().with_mode(mode)).unwrap();
            assert_ne!(a.values, other.values);
        }
    }

    #[test]
    fn per_response_noise_is_one_factor() {
        let c = case("k1,1", 0.4);
        let grid = make_grid(1e-2, 1e2, 20).unwrap();
        let p = TreeParams::default();
        let noise = NoiseSpec::new(80.0, 5).unwrap().with_mode(NoiseMode::PerResponse);
        let fr = simulate_measurement(&c, &p, &grid, &noise).unwrap();
        let clean = simulate_measurement(&c, &p, &grid, &NoiseSpec::none()).unwrap();
        let factors: Vec<f64> = fr
            .values
            .iter()
            .zip(&clean.values)
            .map(|(a, b)| a.arg() / b.arg())
            .collect();
        assert!(factors.iter().all(|f| (f - factors[0]).abs() < 1e-9));
        assert!((factors[0] - 1.0).abs() > 1e-6);
    }

    #[test]
    fn csv_round_trip() {
        let c = case("k2,1", 0.25);
        let fr = simulate_measurement(
            &c,
            &TreeParams::default(),
            &FrequencyGrid::default(),
            &NoiseSpec::new(25.0, 7).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_measurement_to(&fr, &mut buf).unwrap();
        let back = read_measurement_from(&buf[..], "mem").unwrap();
        assert_eq!(back, fr);
    }

    #[test]
    fn hand_written_file() {
        let text = "# fractree-meas v1\nomega,re,im\n0.1,1.0,0.0\n1.0,0.9,-0.1\n10.0,0.95,-0.02\n";
        let fr = read_measurement_from(text.as_bytes(), "mem").unwrap();
        assert_eq!(fr.grid.len(), 3);
        assert_eq!(fr.values[1], C64::new(0.9, -0.1));
        assert_eq!(fr.provenance, Provenance::default());
    }

    #[test]
    fn rejects_duplicate_and_malformed_rows() {
        let dup = "omega,re,im\n1.0,1,0\n1.0,1,0\n";
        assert!(matches!(
            read_measurement_from(dup.as_bytes(), "mem"),
            Err(Error::Format { .. })
        ));
        let short = "omega,re,im\n1.0,1\n";
        assert!(read_measurement_from(short.as_bytes(), "mem").is_err());
        let junk = "omega,re,im\n1.0,abc,0\n";
        assert!(matches!(
            read_measurement_from(junk.as_bytes(), "mem"),
            Err(Error::Format { .. })
        ));
    }
}
