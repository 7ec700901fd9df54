//! Seeded synthetic sources of labeled examples.
//!
//! Three families, each tied to a target [`TargetIntersection`]:
//! - `sphere`: uniform on `S^{n-1}` with every example pushed out of the
//!   `ρ`-band around each hyperplane (hard margin);
//! - `cube`: uniform on `{±1}^n` with low integer weights and half-integer
//!   thresholds;
//! - `pancake`: two thin Gaussian slabs either side of a hidden hyperplane,
//!   giving a soft margin with a closed-form band mass.
//!
//! A source with a given spec and seed always emits the same sequence. The
//! target normals and the example stream use separate ChaCha streams under the
//! seed, so regenerating the target never perturbs the examples.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Halfspace, Label, TargetIntersection};
use crate::linalg::{dot, gaussian, norm, random_unit};
use crate::record::fmt_f64;
use crate::rng::{self, StreamRng};

/// Consecutive rejections tolerated before a conditioned draw reports starvation.
pub const DEFAULT_REJECTION_BUDGET: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub label: Label,
}

/// Sample access to a labeled distribution.
pub trait ExampleSource {
    fn dim(&self) -> usize;

    /// Bound on `‖x‖` over the support.
    fn radius(&self) -> f64;

    fn draw(&mut self) -> Result<Example>;

    /// Draws taken from the underlying generator so far.
    fn consumed(&self) -> u64;

    fn rejection_budget(&self) -> u64 {
        DEFAULT_REJECTION_BUDGET
    }

    /// Ground truth, when the source knows it.
    fn target(&self) -> Option<&TargetIntersection> {
        None
    }

    /// One point from the distribution conditioned on `label`, by rejection.
    fn draw_with_label(&mut self, label: Label) -> Result<Vec<f64>> {
        let budget = self.rejection_budget();
        for _ in 0..budget {
            let e = self.draw()?;
            if e.label == label {
                return Ok(e.x);
            }
        }
        Err(Error::starved(format!("label {label}"), budget))
    }
}

impl<S: ExampleSource + ?Sized> ExampleSource for &mut S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn radius(&self) -> f64 {
        (**self).radius()
    }
    fn draw(&mut self) -> Result<Example> {
        (**self).draw()
    }
    fn consumed(&self) -> u64 {
        (**self).consumed()
    }
    fn rejection_budget(&self) -> u64 {
        (**self).rejection_budget()
    }
    fn target(&self) -> Option<&TargetIntersection> {
        (**self).target()
    }
    fn draw_with_label(&mut self, label: Label) -> Result<Vec<f64>> {
        (**self).draw_with_label(label)
    }
}

/// Serializable description of a generator; `seed` is kept separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    Sphere {
        n: usize,
        k: usize,
        rho: f64,
        #[serde(default = "default_balance")]
        balance: f64,
        /// Only negatives are pushed out of the band (the bare margin definition).
        #[serde(default)]
        one_sided: bool,
        #[serde(default = "default_retry_budget")]
        retry_budget: usize,
    },
    Cube {
        n: usize,
        k: usize,
        weight_bound: i64,
    },
    Pancake {
        n: usize,
        gap: f64,
        sigma: f64,
        #[serde(default = "default_spread")]
        spread: f64,
    },
}

fn default_balance() -> f64 {
    0.5
}

fn default_retry_budget() -> usize {
    20_000
}

fn default_spread() -> f64 {
    1.0
}

impl SourceSpec {
    pub fn sphere(n: usize, k: usize, rho: f64, balance: f64) -> Self {
        SourceSpec::Sphere {
            n,
            k,
            rho,
            balance,
            one_sided: false,
            retry_budget: default_retry_budget(),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            SourceSpec::Sphere { n, .. } | SourceSpec::Cube { n, .. } | SourceSpec::Pancake { n, .. } => n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceSpec::Sphere { n, k, rho, balance, retry_budget, .. } => {
                if n < 2 || k < 1 {
                    return Err(Error::domain("sphere source needs n >= 2 and k >= 1"));
                }
                if !(rho > 0.0 && rho < 1.0 / 3.0) {
                    return Err(Error::domain(format!("rho must lie in (0, 1/3), got {rho}")));
                }
                if !(balance > 0.0 && balance < 1.0) {
                    return Err(Error::domain(format!("balance must lie in (0, 1), got {balance}")));
                }
                if retry_budget == 0 {
                    return Err(Error::domain("retry budget must be positive"));
                }
            }
            SourceSpec::Cube { n, k, weight_bound } => {
                if n < 2 || k < 1 {
                    return Err(Error::domain("cube source needs n >= 2 and k >= 1"));
                }
                if weight_bound < 1 {
                    return Err(Error::domain(format!("weight bound must be >= 1, got {weight_bound}")));
                }
            }
            SourceSpec::Pancake { n, gap, sigma, spread } => {
                if n < 2 {
                    return Err(Error::domain("pancake source needs n >= 2"));
                }
                if !(gap > 0.0 && gap.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::domain("pancake gap and sigma must be positive"));
                }
                if !(spread > 0.0 && spread.is_finite()) {
                    return Err(Error::domain("pancake spread must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn build(&self, seed: u64) -> Result<LabeledSource> {
        self.validate()?;
        match *self {
            SourceSpec::Sphere { n, k, rho, balance, one_sided, retry_budget } => {
                build_sphere(self.clone(), n, k, rho, balance, one_sided, retry_budget, seed)
            }
            SourceSpec::Cube { n, k, weight_bound } => build_cube(n, k, weight_bound, seed),
            SourceSpec::Pancake { n, gap, sigma, spread } => build_pancake(n, gap, sigma, spread, seed),
        }
    }
}

#[derive(Clone, Debug)]
enum Generator {
    Sphere { rho: f64, one_sided: bool },
    Cube { weights: Vec<Vec<i64>> },
    Pancake { direction: Vec<f64>, gap: f64, sigma: f64, spread: f64 },
}

/// A seeded stream of labeled examples with ground-truth access.
#[derive(Clone, Debug)]
pub struct LabeledSource {
    spec: SourceSpec,
    seed: u64,
    target: TargetIntersection,
    generator: Generator,
    rng: StreamRng,
    consumed: u64,
    rejection_budget: u64,
}

pub fn make_sphere_margin_source(n: usize, k: usize, rho: f64, seed: u64, balance: f64) -> Result<LabeledSource> {
    SourceSpec::sphere(n, k, rho, balance).build(seed)
}

pub fn make_cube_source(n: usize, k: usize, weight_bound: i64, seed: u64) -> Result<LabeledSource> {
    SourceSpec::Cube { n, k, weight_bound }.build(seed)
}

pub fn make_pancake_source(n: usize, gap: f64, sigma: f64, seed: u64) -> Result<LabeledSource> {
    SourceSpec::Pancake { n, gap, sigma, spread: default_spread() }.build(seed)
}

const STREAM_TARGET: u64 = 0;
const STREAM_EXAMPLES: u64 = 1;
const STREAM_PILOT: u64 = 2;
const STREAM_FORK: u64 = 0xF0F0_0000_0000;

#[allow(clippy::too_many_arguments)]
fn build_sphere(
    spec: SourceSpec,
    n: usize,
    k: usize,
    rho: f64,
    balance: f64,
    one_sided: bool,
    retry_budget: usize,
    seed: u64,
) -> Result<LabeledSource> {
    let mut target_rng = rng::split(seed, STREAM_TARGET);
    // Staged pilot: a cheap screen, then a tighter check. The tight tolerance
    // leaves room for a 10^4-draw measurement to land within ±0.05.
    const STAGES: [(usize, f64); 2] = [(400, 0.10), (4000, 0.02)];
    for attempt in 0..retry_budget {
        let halfspaces = (0..k)
            .map(|_| Halfspace::new(random_unit(&mut target_rng, n), 0.0))
            .collect::<Result<Vec<_>>>()?;
        let target = TargetIntersection::new(halfspaces, 1.0)?;
        let mut candidate = LabeledSource {
            spec: spec.clone(),
            seed,
            target,
            generator: Generator::Sphere { rho, one_sided },
            rng: rng::split(seed, STREAM_PILOT + attempt as u64),
            consumed: 0,
            rejection_budget: DEFAULT_REJECTION_BUDGET,
        };
        let mut ok = true;
        for (m, tol) in STAGES {
            let (p_plus, _) = estimate_bias(&mut candidate, m)?;
            if (p_plus - balance).abs() > tol {
                ok = false;
                break;
            }
        }
        if ok {
            candidate.rng = rng::split(seed, STREAM_EXAMPLES);
            candidate.consumed = 0;
            return Ok(candidate);
        }
    }
    Err(Error::Generation(format!(
        "positive fraction {balance} not reached with n={n}, k={k}, rho={rho} after {retry_budget} target draws"
    )))
}

fn build_cube(n: usize, k: usize, weight_bound: i64, seed: u64) -> Result<LabeledSource> {
    let mut target_rng = rng::split(seed, STREAM_TARGET);
    let mut weights = Vec::with_capacity(k);
    let mut thresholds = Vec::with_capacity(k);
    while weights.len() < k {
        let w: Vec<i64> = (0..n).map(|_| target_rng.random_range(-weight_bound..=weight_bound)).collect();
        let l1: i64 = w.iter().map(|v| v.abs()).sum();
        if l1 == 0 {
            continue;
        }
        // half-integer threshold strictly inside (-|w|_1, |w|_1)
        let j = target_rng.random_range(-l1..l1);
        thresholds.push(j as f64 + 0.5);
        weights.push(w);
    }
    cube_from_parts(n, weight_bound, weights, thresholds, seed)
}

/// Cube source with an explicit integer target. Thresholds must be half-integers.
pub fn make_cube_source_with_target(
    weights: Vec<Vec<i64>>,
    thresholds: Vec<f64>,
    seed: u64,
) -> Result<LabeledSource> {
    let n = weights.first().map_or(0, Vec::len);
    if weights.len() != thresholds.len() || weights.is_empty() {
        return Err(Error::invalid("need one threshold per weight row"));
    }
    if thresholds.iter().any(|t| (t - t.floor() - 0.5).abs() > 0.0) {
        return Err(Error::invalid("cube thresholds must be half-integers"));
    }
    let weight_bound = weights.iter().flatten().map(|v| v.abs()).max().unwrap_or(0).max(1);
    cube_from_parts(n, weight_bound, weights, thresholds, seed)
}

fn cube_from_parts(
    n: usize,
    weight_bound: i64,
    weights: Vec<Vec<i64>>,
    thresholds: Vec<f64>,
    seed: u64,
) -> Result<LabeledSource> {
    let mut halfspaces = Vec::with_capacity(weights.len());
    for (w, t) in weights.iter().zip(&thresholds) {
        if w.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w.len() });
        }
        let wf: Vec<f64> = w.iter().map(|&v| v as f64).collect();
        let nw = norm(&wf);
        if nw == 0.0 {
            return Err(Error::invalid("all-zero weight row"));
        }
        halfspaces.push(Halfspace::new(wf.iter().map(|v| v / nw).collect(), t / nw)?);
    }
    let target = TargetIntersection::new(halfspaces, (n as f64).sqrt())?;
    Ok(LabeledSource {
        spec: SourceSpec::Cube { n, k: weights.len(), weight_bound },
        seed,
        target,
        generator: Generator::Cube { weights },
        rng: rng::split(seed, STREAM_EXAMPLES),
        consumed: 0,
        rejection_budget: DEFAULT_REJECTION_BUDGET,
    })
}

/// Pilot size used to fix the pancake radius.
const PANCAKE_PILOT: usize = 100_000;
const PANCAKE_PILOT_SEED: u64 = 0x70A2_CA4E;

/// Radius bound for the pancake mixture: mean + 6 sd of `‖x‖`.
///
/// Estimated from a fixed pilot (independent of the caller's seed) with common
/// random numbers, so it is a deterministic, continuous function of the geometry.
pub fn pancake_radius(n: usize, gap: f64, sigma: f64, spread: f64) -> f64 {
    let mut rng = rng::seeded(PANCAKE_PILOT_SEED);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..PANCAKE_PILOT {
        let g = gaussian(&mut rng, n);
        let c = if i % 2 == 0 { 0.5 * gap } else { -0.5 * gap };
        let along = c + sigma * g[0];
        let perp_sq: f64 = g[1..].iter().map(|v| v * v).sum::<f64>() * spread * spread;
        let r = (along * along + perp_sq).sqrt();
        sum += r;
        sum_sq += r * r;
    }
    let m = PANCAKE_PILOT as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0);
    mean + 6.0 * var.sqrt()
}

/// Closed-form `P[u·x / R ∈ [-ρ, 0]]` under the (untruncated) mixture.
pub fn pancake_band_mass(gap: f64, sigma: f64, radius: f64, rho: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let band = |mu: f64| normal.cdf((0.0 - mu) / sigma) - normal.cdf((-rho * radius - mu) / sigma);
    0.5 * (band(0.5 * gap) + band(-0.5 * gap))
}

/// Slab width `sigma` giving band mass `eta` at `rho`, by bisection.
pub fn pancake_sigma_for_band_mass(n: usize, gap: f64, spread: f64, rho: f64, eta: f64) -> Result<f64> {
    let mass = |s: f64| pancake_band_mass(gap, s, pancake_radius(n, gap, s, spread), rho);
    // band mass goes from ~0 (tiny sigma, band empty) upward as sigma grows
    let (mut lo, mut hi) = (1e-4 * gap, gap);
    if !(mass(lo) < eta && mass(hi) > eta) {
        return Err(Error::domain(format!("band mass {eta} not bracketed for gap {gap}, rho {rho}")));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn build_pancake(n: usize, gap: f64, sigma: f64, spread: f64, seed: u64) -> Result<LabeledSource> {
    let mut target_rng = rng::split(seed, STREAM_TARGET);
    let direction = random_unit(&mut target_rng, n);
    let radius = pancake_radius(n, gap, sigma, spread);
    if 0.5 * gap >= radius {
        return Err(Error::domain("pancake gap too large for its own radius"));
    }
    let target = TargetIntersection::new(vec![Halfspace::new(direction.clone(), 0.0)?], radius)?;
    Ok(LabeledSource {
        spec: SourceSpec::Pancake { n, gap, sigma, spread },
        seed,
        target,
        generator: Generator::Pancake { direction, gap, sigma, spread },
        rng: rng::split(seed, STREAM_EXAMPLES),
        consumed: 0,
        rejection_budget: DEFAULT_REJECTION_BUDGET,
    })
}

impl LabeledSource {
    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn target_function(&self) -> &TargetIntersection {
        &self.target
    }

    /// Same target, independent example stream. Used for held-out evaluation.
    pub fn fork(&self, tag: u64) -> LabeledSource {
        let mut out = self.clone();
        out.rng = rng::split(rng::derive_seed(self.seed, STREAM_FORK ^ tag), STREAM_EXAMPLES);
        out.consumed = 0;
        out
    }

    pub fn with_rejection_budget(mut self, budget: u64) -> Self {
        self.rejection_budget = budget.max(1);
        self
    }

    /// Integer weight rows for a cube source.
    pub fn integer_weights(&self) -> Option<&[Vec<i64>]> {
        match &self.generator {
            Generator::Cube { weights } => Some(weights),
            _ => None,
        }
    }

    /// Hidden slab direction for a pancake source.
    pub fn pancake_direction(&self) -> Option<&[f64]> {
        match &self.generator {
            Generator::Pancake { direction, .. } => Some(direction),
            _ => None,
        }
    }

    /// Analytic `η(ρ)` for a pancake source; `None` otherwise.
    pub fn band_mass(&self, rho: f64) -> Option<f64> {
        match &self.generator {
            Generator::Pancake { gap, sigma, .. } => Some(pancake_band_mass(*gap, *sigma, self.target.radius(), rho)),
            _ => None,
        }
    }

    /// `1/(2·W·n)`, the guaranteed normalised margin of a cube target.
    pub fn cube_margin_bound(&self) -> Option<f64> {
        match &self.spec {
            SourceSpec::Cube { n, weight_bound, .. } => Some(1.0 / (2.0 * *weight_bound as f64 * *n as f64)),
            _ => None,
        }
    }

    fn draw_point(&mut self) -> Result<Vec<f64>> {
        let n = self.target.dim();
        match &self.generator {
            Generator::Sphere { rho, one_sided } => {
                for _ in 0..self.rejection_budget {
                    self.consumed += 1;
                    let x = random_unit(&mut self.rng, n);
                    let keep = if *one_sided {
                        // negatives need some slack <= -rho; positives are unrestricted
                        let min = self.target.halfspaces().iter().map(|h| h.slack(&x)).fold(f64::INFINITY, f64::min);
                        min > 0.0 || min <= -rho
                    } else {
                        self.target.halfspaces().iter().all(|h| h.slack(&x).abs() >= *rho)
                    };
                    if keep {
                        return Ok(x);
                    }
                }
                Err(Error::starved("a point outside the margin band", self.rejection_budget))
            }
            Generator::Cube { .. } => {
                self.consumed += 1;
                Ok((0..n).map(|_| if self.rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
            }
            Generator::Pancake { direction, gap, sigma, spread } => {
                let radius = self.target.radius();
                for _ in 0..self.rejection_budget {
                    self.consumed += 1;
                    let positive_side = self.rng.random::<bool>();
                    let g = gaussian(&mut self.rng, n);
                    let a = dot(&g, direction);
                    let centre = if positive_side { 0.5 * gap } else { -0.5 * gap };
                    let along = centre + sigma * a;
                    let x: Vec<f64> = g
                        .iter()
                        .zip(direction)
                        .map(|(gi, ui)| spread * (gi - a * ui) + along * ui)
                        .collect();
                    if norm(&x) <= radius {
                        return Ok(x);
                    }
                }
                Err(Error::starved("a pancake point inside the radius", self.rejection_budget))
            }
        }
    }
}

impl ExampleSource for LabeledSource {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn radius(&self) -> f64 {
        self.target.radius()
    }

    fn draw(&mut self) -> Result<Example> {
        let x = self.draw_point()?;
        let label = self.target.evaluate(&x)?;
        Ok(Example { x, label })
    }

    fn consumed(&self) -> u64 {
        self.consumed
    }

    fn rejection_budget(&self) -> u64 {
        self.rejection_budget
    }

    fn target(&self) -> Option<&TargetIntersection> {
        Some(&self.target)
    }
}

/// Rejection-filtered view of a source conditioned on one label.
pub struct ConditionedStream<'a, S: ExampleSource + ?Sized> {
    src: &'a mut S,
    label: Label,
    budget: u64,
    attempts: u64,
    accepted: u64,
}

pub fn conditioned_stream<S: ExampleSource + ?Sized>(src: &mut S, label: Label) -> ConditionedStream<'_, S> {
    let budget = src.rejection_budget();
    ConditionedStream { src, label, budget, attempts: 0, accepted: 0 }
}

impl<S: ExampleSource + ?Sized> ConditionedStream<'_, S> {
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget.max(1);
        self
    }

    pub fn next_point(&mut self) -> Result<Vec<f64>> {
        for _ in 0..self.budget {
            self.attempts += 1;
            let e = self.src.draw()?;
            if e.label == self.label {
                self.accepted += 1;
                return Ok(e.x);
            }
        }
        Err(Error::starved(format!("label {}", self.label), self.budget))
    }

    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

impl<S: ExampleSource + ?Sized> Iterator for ConditionedStream<'_, S> {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_point())
    }
}

/// Empirical `(P[f = +1], P[f = -1])` over `m` fresh draws.
pub fn estimate_bias<S: ExampleSource + ?Sized>(src: &mut S, m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::domain("bias estimate needs m >= 1"));
    }
    let mut pos = 0usize;
    for _ in 0..m {
        if src.draw()?.label == Label::Positive {
            pos += 1;
        }
    }
    let p_plus = pos as f64 / m as f64;
    Ok((p_plus, (m - pos) as f64 / m as f64))
}

pub fn draw_many<S: ExampleSource + ?Sized>(src: &mut S, m: usize) -> Result<Vec<Example>> {
    (0..m).map(|_| src.draw()).collect()
}

/// Uniform draws from a fixed multiset of examples.
#[derive(Clone, Debug)]
pub struct EmpiricalSource {
    examples: Vec<Example>,
    by_label: [Vec<usize>; 2],
    radius: f64,
    dim: usize,
    rng: StreamRng,
    consumed: u64,
}

impl EmpiricalSource {
    pub fn new(examples: Vec<Example>, radius: f64, seed: u64) -> Result<Self> {
        let dim = examples.first().map(|e| e.x.len()).ok_or_else(|| Error::invalid("empty sample"))?;
        let mut by_label = [Vec::new(), Vec::new()];
        for (i, e) in examples.iter().enumerate() {
            crate::error::check_dim(dim, e.x.len())?;
            by_label[label_slot(e.label)].push(i);
        }
        Ok(EmpiricalSource { examples, by_label, radius, dim, rng: rng::seeded(seed), consumed: 0 })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }
}

fn label_slot(label: Label) -> usize {
    match label {
        Label::Negative => 0,
        Label::Positive => 1,
    }
}

impl ExampleSource for EmpiricalSource {
    fn dim(&self) -> usize {
        self.dim
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn draw(&mut self) -> Result<Example> {
        self.consumed += 1;
        let i = self.rng.random_range(0..self.examples.len());
        Ok(self.examples[i].clone())
    }

    fn consumed(&self) -> u64 {
        self.consumed
    }

    fn draw_with_label(&mut self, label: Label) -> Result<Vec<f64>> {
        let idx = &self.by_label[label_slot(label)];
        if idx.is_empty() {
            return Err(Error::starved(format!("label {label} in an empirical sample"), 0));
        }
        self.consumed += 1;
        let i = idx[self.rng.random_range(0..idx.len())];
        Ok(self.examples[i].x.clone())
    }
}

/// Writes `x0..x{n-1},label` rows; floats carry 17 significant digits.
/// `comments` become leading `# ` lines.
pub fn write_csv<W: Write>(mut out: W, examples: &[Example], comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let n = examples.first().map_or(0, |e| e.x.len());
    let header: Vec<String> = (0..n).map(|i| format!("x{i}")).chain(std::iter::once("label".to_string())).collect();
    writeln!(out, "{}", header.join(","))?;
    for e in examples {
        let mut row: Vec<String> = e.x.iter().map(|v| fmt_f64(*v)).collect();
        row.push(e.label.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads the format written by [`write_csv`]. Extra trailing columns (e.g. a
/// `prediction` column) are ignored.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<Example>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::Parse("missing label column".into()))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let x = (0..label_col)
            .map(|i| rec[i].parse::<f64>().map_err(|_| Error::Parse(format!("bad float {:?}", &rec[i]))))
            .collect::<Result<Vec<f64>>>()?;
        let label = Label::parse(&rec[label_col])?;
        out.push(Example { x, label });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::soft_margin_estimate;

    #[test]
    fn sphere_source_excludes_band() {
        let mut src = make_sphere_margin_source(3, 1, 0.2, 11, 0.5).unwrap();
        let w = src.target_function().halfspaces()[0].normal().to_vec();
        for _ in 0..5000 {
            let e = src.draw().unwrap();
            assert!(dot(&w, &e.x).abs() >= 0.2);
            assert!((norm(&e.x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_band_is_empty_at_half_rho() {
        let mut src = make_sphere_margin_source(3, 2, 0.2, 5, 0.5).unwrap();
        let xs: Vec<Vec<f64>> = draw_many(&mut src, 10_000).unwrap().into_iter().map(|e| e.x).collect();
        assert_eq!(soft_margin_estimate(src.target_function(), &xs, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn sphere_balance_is_met() {
        let mut src = make_sphere_margin_source(3, 2, 0.2, 9, 0.5).unwrap();
        let (p, q) = estimate_bias(&mut src, 10_000).unwrap();
        assert!((0.45..=0.55).contains(&p), "p_plus = {p}");
        assert!((p + q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unreachable_balance_is_a_generation_error() {
        let spec = SourceSpec::Sphere { n: 3, k: 3, rho: 0.2, balance: 0.97, one_sided: false, retry_budget: 20 };
        assert!(matches!(spec.build(1), Err(Error::Generation(_))));
    }

    #[test]
    fn sphere_domain_checks() {
        assert!(make_sphere_margin_source(1, 1, 0.1, 0, 0.5).is_err());
        assert!(make_sphere_margin_source(3, 1, 0.34, 0, 0.5).is_err());
        assert!(make_sphere_margin_source(3, 0, 0.1, 0, 0.5).is_err());
    }

    #[test]
    fn one_sided_lets_positives_into_the_band() {
        let spec = SourceSpec::Sphere { n: 2, k: 1, rho: 0.3, balance: 0.55, one_sided: true, retry_budget: 1000 };
        let mut src = spec.build(3).unwrap();
        let f = src.target_function().clone();
        let mut band_pos = 0;
        for _ in 0..5000 {
            let e = src.draw().unwrap();
            let s = f.min_slack(&e.x).unwrap();
            match e.label {
                Label::Negative => assert!(s <= -0.3),
                Label::Positive => band_pos += (s < 0.3) as usize,
            }
        }
        assert!(band_pos > 0);
    }

    #[test]
    fn cube_example_arithmetic() {
        let mut src = make_cube_source_with_target(vec![vec![1, 1]], vec![0.5], 0).unwrap();
        let f = src.target_function().clone();
        assert_eq!(f.evaluate(&[1.0, 1.0]).unwrap(), Label::Positive);
        let slack = f.min_slack(&[1.0, 1.0]).unwrap();
        assert!((slack - 1.5 / 2f64.sqrt()).abs() < 1e-15);
        assert!(make_cube_source_with_target(vec![vec![1, 1]], vec![0.4], 0).is_err());
        let e = src.draw().unwrap();
        assert!(e.x.iter().all(|v| v.abs() == 1.0));
    }

    #[test]
    fn cube_integer_slack_is_at_least_half() {
        for seed in 0..20 {
            let mut src = make_cube_source(5, 3, 4, seed).unwrap();
            let weights = src.integer_weights().unwrap().to_vec();
            let f = src.target_function().clone();
            for w in &weights {
                assert!(w.iter().all(|v| v.abs() <= 4));
                assert!(w.iter().any(|&v| v != 0));
            }
            for _ in 0..200 {
                let e = src.draw().unwrap();
                assert!(e.x.iter().all(|v| *v == 1.0 || *v == -1.0));
                for (w, h) in weights.iter().zip(f.halfspaces()) {
                    let wf: Vec<f64> = w.iter().map(|&v| v as f64).collect();
                    let theta_int = h.theta() * norm(&wf);
                    assert!((dot(&wf, &e.x) - theta_int).abs() >= 0.5 - 1e-9);
                }
            }
        }
    }

    #[test]
    fn pancake_small_sigma_has_empty_band() {
        let gap = 1.0;
        let sigma = 1e-3;
        let r = pancake_radius(3, gap, sigma, 1.0);
        let rho = 0.9 * gap / (2.0 * r);
        assert!(pancake_band_mass(gap, sigma, r, rho) < 1e-12);
    }

    #[test]
    fn pancake_labels_match_target() {
        let mut src = make_pancake_source(3, 1.0, 0.3, 4).unwrap();
        let f = src.target_function().clone();
        for _ in 0..2000 {
            let e = src.draw().unwrap();
            assert_eq!(f.evaluate(&e.x).unwrap(), e.label);
            assert!(norm(&e.x) <= f.radius());
        }
    }

    #[test]
    fn pancake_band_mass_matches_sample() {
        let mut src = make_pancake_source(3, 1.0, 0.25, 8).unwrap();
        let rho = 0.05;
        let eta = src.band_mass(rho).unwrap();
        let m = 100_000;
        let xs: Vec<Vec<f64>> = draw_many(&mut src, m).unwrap().into_iter().map(|e| e.x).collect();
        let est = soft_margin_estimate(src.target_function(), &xs, rho).unwrap();
        let sd = (eta * (1.0 - eta) / m as f64).sqrt();
        assert!((est - eta).abs() <= 3.0 * sd, "est {est} eta {eta} sd {sd}");
    }

    #[test]
    fn cube_reported_margin_meets_bound() {
        for seed in 0..100u64 {
            let n = 2 + (seed % 4) as usize;
            let w_bound = 1 + (seed % 3) as i64;
            let mut src = make_cube_source(n, 2, w_bound, seed).unwrap();
            let f = src.target_function().clone();
            let bound = src.cube_margin_bound().unwrap();
            let mut min = f64::INFINITY;
            for _ in 0..64 {
                let x = src.draw().unwrap().x;
                for h in f.halfspaces() {
                    min = min.min(h.slack(&x).abs() / f.radius());
                }
            }
            assert!(min >= bound - 1e-12, "seed {seed}: {min} < {bound}");
        }
    }

    #[test]
    fn hard_margin_holds_on_both_labels() {
        let rho = 0.15;
        let mut src = make_sphere_margin_source(3, 2, rho, 21, 0.4).unwrap();
        let f = src.target_function().clone();
        for _ in 0..20_000 {
            let e = src.draw().unwrap();
            match e.label {
                Label::Negative => assert!(f.point_margin(&e.x).unwrap() >= rho - 1e-12),
                Label::Positive => assert!(f.min_slack(&e.x).unwrap() >= rho),
            }
        }
    }

    #[test]
    fn conditioned_streams_reproduce_base_frequencies() {
        let mut base = make_sphere_margin_source(3, 2, 0.1, 6, 0.45).unwrap();
        let (p, _) = estimate_bias(&mut base, 10_000).unwrap();
        let mut src = make_sphere_margin_source(3, 2, 0.1, 6, 0.45).unwrap();
        let mut pos = conditioned_stream(&mut src, Label::Positive);
        for _ in 0..2000 {
            pos.next_point().unwrap();
        }
        let rate = pos.acceptance_rate();
        let sd = (p * (1.0 - p) / 10_000.0).sqrt() + (rate * (1.0 - rate) / pos.attempts() as f64).sqrt();
        assert!((rate - p).abs() <= 4.0 * sd, "rate {rate} vs {p}");
    }

    #[test]
    fn sigma_solver_hits_requested_mass() {
        let s = pancake_sigma_for_band_mass(3, 1.0, 1.0, 0.1, 0.08).unwrap();
        let r = pancake_radius(3, 1.0, s, 1.0);
        assert!((pancake_band_mass(1.0, s, r, 0.1) - 0.08).abs() < 1e-9);
    }

    #[test]
    fn conditioned_stream_filters_and_starves() {
        let mut src = make_sphere_margin_source(3, 1, 0.1, 2, 0.5).unwrap();
        let f = src.target_function().clone();
        let mut s = conditioned_stream(&mut src, Label::Negative);
        for _ in 0..1000 {
            let x = s.next_point().unwrap();
            assert_eq!(f.evaluate(&x).unwrap(), Label::Negative);
        }
        let rate = s.acceptance_rate();
        assert!((0.4..=0.6).contains(&rate), "rate {rate}");

        // a cube target whose threshold exceeds every dot product is never positive
        let mut never = make_cube_source_with_target(vec![vec![1, 0, 0, 0]], vec![1.5], 0).unwrap().with_rejection_budget(1000);
        let mut s = conditioned_stream(&mut never, Label::Positive);
        assert!(matches!(s.next_point(), Err(Error::Starvation { .. })));
    }

    #[test]
    fn bias_edge_cases() {
        let mut never = make_cube_source_with_target(vec![vec![1, 0, 0, 0]], vec![1.5], 0).unwrap();
        assert_eq!(estimate_bias(&mut never, 100).unwrap(), (0.0, 1.0));
        let mut src = make_sphere_margin_source(3, 1, 0.1, 2, 0.5).unwrap();
        let (p, q) = estimate_bias(&mut src, 1).unwrap();
        assert!((p, q) == (1.0, 0.0) || (p, q) == (0.0, 1.0));
        assert!(estimate_bias(&mut src, 0).is_err());
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = make_pancake_source(4, 0.5, 0.2, 77).unwrap();
        let mut b = make_pancake_source(4, 0.5, 0.2, 77).unwrap();
        let xa = draw_many(&mut a, 1000).unwrap();
        let xb = draw_many(&mut b, 1000).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        write_csv(&mut ba, &xa, &[]).unwrap();
        write_csv(&mut bb, &xb, &[]).unwrap();
        assert_eq!(ba, bb);
        assert_eq!(read_csv(&ba[..]).unwrap(), xa);
    }

    #[test]
    fn empirical_source_conditioned_draws() {
        let ex = vec![
            Example { x: vec![1.0], label: Label::Positive },
            Example { x: vec![-1.0], label: Label::Negative },
        ];
        let mut e = EmpiricalSource::new(ex, 1.0, 0).unwrap();
        for _ in 0..10 {
            assert_eq!(e.draw_with_label(Label::Negative).unwrap(), vec![-1.0]);
        }
        let only_pos = vec![Example { x: vec![1.0], label: Label::Positive }];
        let mut e = EmpiricalSource::new(only_pos, 1.0, 0).unwrap();
        assert!(e.draw_with_label(Label::Negative).is_err());
    }
}
