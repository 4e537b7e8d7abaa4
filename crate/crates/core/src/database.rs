//! Offline tables of half-order zeros and poles sampled over the damage
//! amount, and their piecewise-linear reconstruction.
//!
//! Samples sit at Chebyshev nodes `eps_a = (cos((2a-1) pi / 1000) + 1) / 2`,
//! `a = 1..=500`, which cluster near 0 and 1 where the loci move fastest.
//! Each sample is solved warm-started from the previous one and its roots
//! are permuted onto the previous sample's order by an optimal assignment,
//! so index `j` follows one continuous locus across the whole table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::assign::optimal_assignment;
use crate::error::{Error, Result};
use crate::model::{
    candidates, component_count, delta_for_case_from, ComponentId, DamageCase, HalfOrderRational, TreeParams, C64,
};

pub const SAMPLE_COUNT: usize = 500;
pub const FORMAT_HEADER: &str = "fractree-pzdb v1";

/// Damage amount of the `a`-th Chebyshev sample, `a` in `1..=500`.
pub fn chebyshev_eps(a: usize) -> Result<f64> {
    if a == 0 || a > SAMPLE_COUNT {
        return Err(Error::Domain(format!(
            "sample index must be in 1..={SAMPLE_COUNT}, got {a}"
        )));
    }
    let theta = (2 * a - 1) as f64 * std::f64::consts::PI / (2 * SAMPLE_COUNT) as f64;
    Ok(0.5 * (theta.cos() + 1.0))
}

/// Permutation `perm` such that `next[perm[i]]` continues `prev[i]`.
pub fn match_roots(prev: &[C64], next: &[C64]) -> Vec<usize> {
    let cost: Vec<Vec<f64>> = prev
        .iter()
        .map(|a| next.iter().map(|b| (a - b).norm()).collect())
        .collect();
    optimal_assignment(&cost)
}

fn permuted(values: &[C64], perm: &[usize]) -> Vec<C64> {
    perm.iter().map(|&j| values[j]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub a: usize,
    pub eps: f64,
    pub rational: HalfOrderRational,
}

/// Result of reconstructing roots at an arbitrary damage amount.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolated {
    pub rational: HalfOrderRational,
    /// Set when `eps` fell outside the sampled range and was clamped.
    pub clamped: bool,
}

/// Something that can produce half-order zeros and poles for any damage
/// amount of one component.
pub trait RootMap {
    fn rational_at(&self, eps: f64) -> HalfOrderRational;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTable {
    pub component: ComponentId,
    pub params: TreeParams,
    /// Ordered by `a`, so `eps` strictly decreasing.
    pub samples: Vec<Sample>,
}

impl ComponentTable {
    pub fn build(component: ComponentId, params: &TreeParams) -> Result<Self> {
        let mut samples: Vec<Sample> = Vec::with_capacity(SAMPLE_COUNT);
        for a in 1..=SAMPLE_COUNT {
            let eps = chebyshev_eps(a)?;
            let case = DamageCase::new(component, eps)?;
            let prev = samples.last().map(|s| &s.rational);
            let wrap = |e: Error| Error::TableBuild {
                component,
                sample: a,
                source: Box::new(e),
            };
            let mut rational = delta_for_case_from(&case, params, prev).map_err(wrap)?;
            if let Some(prev) = prev {
                let zp = match_roots(&prev.zeros, &rational.zeros);
                let pp = match_roots(&prev.poles, &rational.poles);
                rational = HalfOrderRational {
                    zeros: permuted(&rational.zeros, &zp),
                    poles: permuted(&rational.poles, &pp),
                };
            }
            if let Some(p) = rational.poles.iter().find(|p| !(p.re > 0.0)) {
                return Err(wrap(Error::Invariant(format!(
                    "half-order pole {} is not in the open left half-plane",
                    -p
                ))));
            }
            samples.push(Sample { a, eps, rational });
        }
        Ok(Self {
            component,
            params: *params,
            samples,
        })
    }

    /// Sampled damage range `(eps_500, eps_1)`.
    pub fn eps_range(&self) -> (f64, f64) {
        (self.samples[self.samples.len() - 1].eps, self.samples[0].eps)
    }

    /// Piecewise-linear reconstruction between the two bracketing samples.
    pub fn interpolate(&self, eps: f64) -> Interpolated {
        let (lo, hi) = self.eps_range();
        let clamped = !(eps >= lo && eps <= hi);
        if clamped {
            log::debug!("{}: eps {eps} outside sampled range, clamping", self.component);
        }
        let eps = if eps.is_nan() { hi } else { eps.clamp(lo, hi) };
        // first sample with eps_a < eps; the bracket is [a-1, a]
        let upper = self.samples.partition_point(|s| s.eps >= eps);
        let (i, j) = if upper == 0 {
            (0, 1)
        } else if upper >= self.samples.len() {
            (self.samples.len() - 2, self.samples.len() - 1)
        } else {
            (upper - 1, upper)
        };
        let (a, b) = (&self.samples[i], &self.samples[j]);
        let t = (eps - a.eps) / (b.eps - a.eps);
        let mix = |x: &[C64], y: &[C64]| -> Vec<C64> { x.iter().zip(y).map(|(x, y)| x * (1.0 - t) + y * t).collect() };
        Interpolated {
            rational: HalfOrderRational {
                zeros: mix(&a.rational.zeros, &b.rational.zeros),
                poles: mix(&a.rational.poles, &b.rational.poles),
            },
            clamped,
        }
    }

    fn validate(&self) -> Result<()> {
        let g = self.component.generation() as usize;
        if self.samples.len() != SAMPLE_COUNT {
            return Err(Error::Invariant(format!(
                "{}: expected {SAMPLE_COUNT} samples, found {}",
                self.component,
                self.samples.len()
            )));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.a != i + 1 {
                return Err(Error::Invariant(format!(
                    "{}: sample {} out of order",
                    self.component, s.a
                )));
            }
            if i > 0 && !(s.eps < self.samples[i - 1].eps) {
                return Err(Error::Invariant(format!(
                    "{}: eps not strictly decreasing at a={}",
                    self.component, s.a
                )));
            }
            if s.rational.zeros.len() != 2 * g || s.rational.poles.len() != 2 * g {
                return Err(Error::Invariant(format!(
                    "{}: sample a={} has {} zeros and {} poles, expected {}",
                    self.component,
                    s.a,
                    s.rational.zeros.len(),
                    s.rational.poles.len(),
                    2 * g
                )));
            }
        }
        Ok(())
    }
}

impl RootMap for ComponentTable {
    fn rational_at(&self, eps: f64) -> HalfOrderRational {
        self.interpolate(eps).rational
    }
}

/// Tables for every component through `max_generation`, sharing one set of
/// tree constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleZeroDatabase {
    params: TreeParams,
    max_generation: u32,
    tables: BTreeMap<ComponentId, ComponentTable>,
}

impl PoleZeroDatabase {
    pub fn build(max_generation: u32, params: &TreeParams) -> Result<Self> {
        if max_generation == 0 {
            return Err(Error::Domain("database needs at least one generation".into()));
        }
        let list = candidates(max_generation);
        #[cfg(feature = "parallel")]
        let built: Vec<Result<ComponentTable>> = {
            use rayon::prelude::*;
            list.par_iter().map(|&c| ComponentTable::build(c, params)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let built: Vec<Result<ComponentTable>> = list.iter().map(|&c| ComponentTable::build(c, params)).collect();
        let mut tables = BTreeMap::new();
        for table in built {
            let table = table?;
            tables.insert(table.component, table);
        }
        Ok(Self {
            params: *params,
            max_generation,
            tables,
        })
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn max_generation(&self) -> u32 {
        self.max_generation
    }

    pub fn table(&self, component: &ComponentId) -> Result<&ComponentTable> {
        self.tables.get(component).ok_or(Error::MissingTable(*component))
    }

    pub fn tables(&self) -> impl Iterator<Item = &ComponentTable> {
        self.tables.values()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        let mut out = std::io::BufWriter::new(file);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{FORMAT_HEADER}")?;
        writeln!(out, "k={} b={}", fmt_real(self.params.k()), fmt_real(self.params.b()))?;
        let mut line = String::new();
        for table in self.tables.values() {
            writeln!(out, "component={}", table.component)?;
            writeln!(out, "samples={}", table.samples.len())?;
            for s in &table.samples {
                line.clear();
                write!(line, "{} {}", s.a, fmt_real(s.eps)).unwrap();
                for v in s.rational.zeros.iter().chain(&s.rational.poles) {
                    write!(line, " {} {}", fmt_real(v.re), fmt_real(v.im)).unwrap();
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_from(file, path)
    }

    /// Parses the text format; `origin` only labels error messages.
    pub fn read_from<R: Read>(input: R, origin: impl Into<PathBuf>) -> Result<Self> {
        let origin = origin.into();
        let mut lines = BufReader::new(input).lines().enumerate();
        let mut next_line = |what: &str| -> Result<Option<(usize, String)>> {
            match lines.next() {
                None => Ok(None),
                Some((i, Ok(l))) => Ok(Some((i + 1, l))),
                Some((i, Err(e))) => Err(Error::format(&origin, i + 1, format!("reading {what}: {e}"))),
            }
        };
        let err = |line: usize, msg: String| Error::format(&origin, line, msg);

        let (n, header) = next_line("header")?.ok_or_else(|| err(1, "empty file".into()))?;
        if header.trim() != FORMAT_HEADER {
            return Err(err(
                n,
                format!("unsupported header '{}', expected '{FORMAT_HEADER}'", header.trim()),
            ));
        }
        let (n, consts) = next_line("constants")?.ok_or_else(|| err(2, "missing k/b line".into()))?;
        let mut k = None;
        let mut b = None;
        for field in consts.split_whitespace() {
            match field.split_once('=') {
                Some(("k", v)) => k = v.parse::<f64>().ok(),
                Some(("b", v)) => b = v.parse::<f64>().ok(),
                _ => return Err(err(n, format!("unexpected field '{field}'"))),
            }
        }
        let params = match (k, b) {
            (Some(k), Some(b)) => TreeParams::new(k, b).map_err(|e| err(n, e.to_string()))?,
            _ => return Err(err(n, "expected 'k=<value> b=<value>'".into())),
        };

        let mut tables = BTreeMap::new();
        while let Some((n, line)) = next_line("component")? {
            if line.trim().is_empty() {
                continue;
            }
            let component: ComponentId = line
                .trim()
                .strip_prefix("component=")
                .ok_or_else(|| err(n, format!("expected 'component=...', found '{line}'")))?
                .parse()
                .map_err(|e: Error| err(n, e.to_string()))?;
            let (n, line) = next_line("sample count")?.ok_or_else(|| err(n + 1, "truncated file".into()))?;
            let count: usize = line
                .trim()
                .strip_prefix("samples=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(n, format!("expected 'samples=<count>', found '{line}'")))?;
            if count != SAMPLE_COUNT {
                return Err(Error::Invariant(format!(
                    "{component}: expected {SAMPLE_COUNT} samples, header says {count}"
                )));
            }
            let width = 2 * component.generation() as usize;
            let mut samples = Vec::with_capacity(count);
            let mut last = n;
            for _ in 0..count {
                let (n, line) = next_line("sample")?
                    .ok_or_else(|| err(last + 1, format!("{component}: truncated sample block")))?;
                last = n;
                let mut fields = line.split_whitespace();
                let a: usize = fields
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| err(n, "bad sample index".into()))?;
                let values = fields
                    .map(|v| v.parse::<f64>().map_err(|_| err(n, format!("bad number '{v}'"))))
                    .collect::<Result<Vec<f64>>>()?;
                if values.len() % 2 != 1 {
                    return Err(err(n, "sample line has an odd number of root components".into()));
                }
                let roots: Vec<C64> = values[1..].chunks(2).map(|c| C64::new(c[0], c[1])).collect();
                if roots.len() != 2 * width {
                    return Err(Error::Invariant(format!(
                        "{component} sample a={a}: {} roots stored, expected {} zeros and {} poles",
                        roots.len(),
                        width,
                        width
                    )));
                }
                let (zeros, poles) = roots.split_at(width);
                samples.push(Sample {
                    a,
                    eps: values[0],
                    rational: HalfOrderRational {
                        zeros: zeros.to_vec(),
                        poles: poles.to_vec(),
                    },
                });
            }
            let table = ComponentTable {
                component,
                params,
                samples,
            };
            table.validate()?;
            if tables.insert(component, table).is_some() {
                return Err(Error::Invariant(format!("duplicate table for {component}")));
            }
        }
        let max_generation = tables.keys().map(|c| c.generation()).max().unwrap_or(0);
        if max_generation == 0 {
            return Err(Error::Invariant("database contains no tables".into()));
        }
        if let Some(missing) = candidates(max_generation).into_iter().find(|c| !tables.contains_key(c)) {
            return Err(Error::Invariant(format!(
                "incomplete database: {missing} missing (expected {} tables through generation {max_generation})",
                component_count(max_generation)
            )));
        }
        Ok(Self {
            params,
            max_generation,
            tables,
        })
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub(crate) fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Components whose damage is routed through the inner sub-trees of
/// generation 3 (`k/b_{3,2}`, `k/b_{3,3}`).
pub fn is_inner_third_generation(c: &ComponentId) -> bool {
    c.generation() == 3 && matches!(c.index(), 2 | 3)
}

/// `true` for the generation-3 outer components with index 1 or 4.
pub fn is_outer_third_generation(c: &ComponentId) -> bool {
    c.generation() == 3 && matches!(c.index(), 1 | 4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{base_delta, delta_for_case, Kind};

    fn unit() -> TreeParams {
        TreeParams::default()
    }

    #[test]
    fn chebyshev_examples() {
        // (cos x + 1) / 2 = cos^2(x / 2)
        let edge = (std::f64::consts::PI / 2000.0).sin().powi(2);
        assert!((chebyshev_eps(1).unwrap() - (1.0 - edge)).abs() < 1e-15);
        assert!((chebyshev_eps(500).unwrap() - edge).abs() < 1e-12 * edge + 1e-16);
        assert!((chebyshev_eps(1).unwrap() - 0.999_997_53).abs() < 1e-8);
        assert!((chebyshev_eps(500).unwrap() - 2.4674e-6).abs() < 1e-9);
        let eps: Vec<f64> = (1..=SAMPLE_COUNT).map(|a| chebyshev_eps(a).unwrap()).collect();
        assert!(eps.windows(2).all(|w| w[0] > w[1]));
        assert!(chebyshev_eps(0).is_err());
        assert!(chebyshev_eps(501).is_err());
    }

    #[test]
    fn match_roots_examples() {
        let prev = vec![
            C64::new(1.0, 2.0),
            C64::new(1.0, -2.0),
            C64::new(-3.0, 0.0),
            C64::new(0.5, 0.0),
        ];
        assert_eq!(match_roots(&prev, &prev), vec![0, 1, 2, 3]);
        let mut swapped = prev.clone();
        swapped.swap(0, 2);
        assert_eq!(match_roots(&prev, &swapped), vec![2, 1, 0, 3]);
        let nudged: Vec<C64> = prev.iter().map(|z| z + C64::new(1e-3, 1e-3)).collect();
        assert_eq!(match_roots(&prev, &nudged), vec![0, 1, 2, 3]);
    }

    #[test]
    fn k11_table_reproduces_closed_form() {
        let c = ComponentId::spring(1, 1).unwrap();
        let table = ComponentTable::build(c, &unit()).unwrap();
        for s in &table.samples {
            let exact = base_delta(Kind::Spring, s.eps, &unit()).unwrap();
            // same values, possibly permuted
            for (got, want) in [(&s.rational.zeros, &exact.zeros), (&s.rational.poles, &exact.poles)] {
                let perm = match_roots(want, got);
                for (i, &j) in perm.iter().enumerate() {
                    assert!((got[j] - want[i]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn k21_table_keeps_fixed_zero_on_one_index() {
        let c = ComponentId::spring(2, 1).unwrap();
        let table = ComponentTable::build(c, &unit()).unwrap();
        let j = table.samples[0]
            .rational
            .zeros
            .iter()
            .position(|z| (z - 1.0).norm() < 1e-9)
            .expect("zero at r");
        for s in &table.samples {
            assert!((s.rational.zeros[j] - 1.0).norm() < 1e-9, "a={}", s.a);
        }
    }

    #[test]
    fn built_tables_have_continuous_loci() {
        for c in candidates(2) {
            let table = ComponentTable::build(c, &unit()).unwrap();
            for pair in table.samples.windows(2) {
                let (x, y) = (&pair[0].rational, &pair[1].rational);
                for (prev, next) in [(&x.zeros, &y.zeros), (&x.poles, &y.poles)] {
                    let perm = match_roots(prev, next);
                    let identity: f64 = prev.iter().zip(next.iter()).map(|(a, b)| (a - b).norm()).sum();
                    let best: f64 = perm.iter().enumerate().map(|(i, &j)| (prev[i] - next[j]).norm()).sum();
                    assert!(identity <= best * (1.0 + 1e-12) + 1e-15, "{c} a={}", pair[1].a);
                }
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let c = ComponentId::spring(2, 1).unwrap();
        let table = ComponentTable::build(c, &unit()).unwrap();
        let s = &table.samples[137];
        let at = table.interpolate(s.eps);
        assert!(!at.clamped);
        assert_eq!(at.rational, s.rational);

        let t = &table.samples[138];
        let mid = table.interpolate(0.5 * (s.eps + t.eps)).rational;
        for (m, (x, y)) in mid.zeros.iter().zip(s.rational.zeros.iter().zip(&t.rational.zeros)) {
            assert!((m - (x + y) * 0.5).norm() < 1e-14);
        }

        let direct = delta_for_case(&DamageCase::new(c, 0.537).unwrap(), &unit()).unwrap();
        let interp = table.interpolate(0.537).rational;
        for (got, want) in [(&interp.zeros, &direct.zeros), (&interp.poles, &direct.poles)] {
            let perm = match_roots(want, got);
            for (i, &j) in perm.iter().enumerate() {
                assert!((got[j] - want[i]).norm() < 1e-4);
            }
        }
    }

    #[test]
    fn interpolation_clamps_out_of_range() {
        let table = ComponentTable::build(ComponentId::damper(1, 1).unwrap(), &unit()).unwrap();
        let low = table.interpolate(1e-9);
        assert!(low.clamped);
        assert_eq!(low.rational, table.samples[SAMPLE_COUNT - 1].rational);
        let high = table.interpolate(0.999_999_9);
        assert!(high.clamped);
        assert_eq!(high.rational, table.samples[0].rational);
    }

    #[test]
    fn text_round_trip_and_corruption() {
        let db = PoleZeroDatabase::build(2, &unit()).unwrap();
        assert_eq!(db.len(), 6);
        let mut buf = Vec::new();
        db.write_to(&mut buf).unwrap();
        let back = PoleZeroDatabase::read_from(&buf[..], "mem").unwrap();
        assert_eq!(back, db);

        let text = String::from_utf8(buf).unwrap();
        // drop the last root of one sample line of a generation-2 table
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let at = lines.iter().position(|l| l == "component=k2,1").unwrap() + 5;
        let mut fields: Vec<&str> = lines[at].split(' ').collect();
        fields.truncate(fields.len() - 2);
        lines[at] = fields.join(" ");
        let bad = lines.join("\n");
        assert!(matches!(
            PoleZeroDatabase::read_from(bad.as_bytes(), "mem"),
            Err(Error::Invariant(_))
        ));

        let wrong_version = text.replacen("v1", "v9", 1);
        assert!(matches!(
            PoleZeroDatabase::read_from(wrong_version.as_bytes(), "mem"),
            Err(Error::Format { .. })
        ));

        let truncated = &text[..text.len() / 2];
        assert!(PoleZeroDatabase::read_from(truncated.as_bytes(), "mem").is_err());
    }
}
