//! Hit-and-run sampling from a ball cut by homogeneous halfspaces.
//!
//! The body is `{w : ‖w‖ ≤ 1, w·x ≥ 0 for x ∈ P, w·x ≤ 0 for x ∈ N}`. Every
//! constraint passes through the origin, which makes interior-point search a
//! max-margin problem (see [`find_interior`]).

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm, norm_sq, random_unit};
use crate::rng::{self, StreamRng};

/// Chords shorter than this are treated as degenerate.
pub const MIN_CHORD: f64 = 1e-12;

/// Consecutive degenerate chords before a walk gives up.
pub const MAX_DEGENERATE: usize = 100;

/// Steps between exact recomputations of the cached slacks.
const REFRESH_EVERY: usize = 32;

#[derive(Clone, Debug)]
pub struct ConsistencyPolytope {
    dim: usize,
    /// Row-major constraint vectors, unnormalised.
    rows: Vec<f64>,
    /// `+1` for `w·x ≥ 0`, `-1` for `w·x ≤ 0`.
    sense: Vec<f64>,
    inv_norm: Vec<f64>,
}

impl ConsistencyPolytope {
    pub fn new(dim: usize) -> Self {
        ConsistencyPolytope { dim, rows: Vec::new(), sense: Vec::new(), inv_norm: Vec::new() }
    }

    pub fn from_constraints(dim: usize, pos: &[Vec<f64>], neg: &[Vec<f64>]) -> Result<Self> {
        let mut h = Self::new(dim);
        for x in pos {
            h.add_positive(x)?;
        }
        for x in neg {
            h.add_negative(x)?;
        }
        Ok(h)
    }

    fn push(&mut self, x: &[f64], sense: f64) -> Result<()> {
        check_dim(self.dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite constraint"));
        }
        let nx = norm(x);
        // a zero row constrains nothing
        if nx == 0.0 {
            return Ok(());
        }
        self.rows.extend_from_slice(x);
        self.sense.push(sense);
        self.inv_norm.push(1.0 / nx);
        Ok(())
    }

    /// Adds `w·x ≥ 0`.
    pub fn add_positive(&mut self, x: &[f64]) -> Result<()> {
        self.push(x, 1.0)
    }

    /// Adds `w·x ≤ 0`.
    pub fn add_negative(&mut self, x: &[f64]) -> Result<()> {
        self.push(x, -1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_constraints(&self) -> usize {
        self.sense.len()
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.dim..(j + 1) * self.dim]
    }

    /// `sense · (row · w)`, the raw signed constraint value.
    fn raw_slack(&self, j: usize, w: &[f64]) -> f64 {
        self.sense[j] * dot(self.row(j), w)
    }

    /// Exact membership; the boundary counts as inside.
    pub fn membership(&self, w: &[f64]) -> Result<bool> {
        check_dim(self.dim, w.len())?;
        Ok(self.contains(w))
    }

    fn contains(&self, w: &[f64]) -> bool {
        norm_sq(w) <= 1.0 && (0..self.num_constraints()).all(|j| self.raw_slack(j, w) >= 0.0)
    }

    /// Smallest Euclidean distance from `w` to a linear constraint boundary,
    /// signed (negative when violated). `+∞` with no constraints.
    pub fn min_linear_slack(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim, w.len())?;
        Ok((0..self.num_constraints())
            .map(|j| self.raw_slack(j, w) * self.inv_norm[j])
            .fold(f64::INFINITY, f64::min))
    }

    /// `min(1 − ‖w‖, min linear slack)`.
    pub fn min_slack(&self, w: &[f64]) -> Result<f64> {
        Ok(self.min_linear_slack(w)?.min(1.0 - norm(w)))
    }

    /// Maximal interval `[t_lo, t_hi]` with `p + t·d` in the body.
    pub fn chord(&self, p: &[f64], d: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.dim, p.len())?;
        check_dim(self.dim, d.len())?;
        let (mut lo, mut hi) = ball_chord(p, d);
        for j in 0..self.num_constraints() {
            let s = self.raw_slack(j, p);
            let r = self.raw_slack(j, d);
            clip(s, r, &mut lo, &mut hi);
        }
        if !(hi - lo >= MIN_CHORD) {
            return Err(Error::DegenerateChord { length: (hi - lo).max(0.0) });
        }
        Ok((lo, hi))
    }
}

/// Ball part of the chord; `(0, 0)` when `p` is outside the ball.
fn ball_chord(p: &[f64], d: &[f64]) -> (f64, f64) {
    let b = dot(p, d);
    let disc = b * b - norm_sq(p) + 1.0;
    if disc < 0.0 {
        return (0.0, 0.0);
    }
    let root = disc.sqrt();
    (-b - root, -b + root)
}

/// Intersects `[lo, hi]` with `{t : s + t·r ≥ 0}`.
fn clip(s: f64, r: f64, lo: &mut f64, hi: &mut f64) {
    if r > 0.0 {
        *lo = lo.max(-s / r);
    } else if r < 0.0 {
        *hi = hi.min(-s / r);
    } else if s < 0.0 {
        *hi = *lo;
    }
}

/// A point with linear slack and ball slack at least `slack_target`.
///
/// The constraints are homogeneous, so it suffices to find a unit direction
/// `u` whose normalised slack is at least `τ' = τ/(1−τ)` and return `(1−τ)u`.
/// That direction is the max-margin problem `min ‖v‖² s.t. aⱼ·v ≥ 1`, solved
/// by Hildreth's dual coordinate ascent. The dual objective lower-bounds
/// `1/(2s*²)`, where `s*` is the best achievable margin, so the search also
/// stops with a certificate once it proves `s* < τ'`.
pub fn find_interior(h: &ConsistencyPolytope, slack_target: f64) -> Result<Vec<f64>> {
    find_interior_with_budget(h, slack_target, 10_000 * h.dim.max(1))
}

pub fn find_interior_with_budget(h: &ConsistencyPolytope, slack_target: f64, sweeps: usize) -> Result<Vec<f64>> {
    if !(slack_target > 0.0 && slack_target < 1.0) {
        return Err(Error::domain(format!("slack target must lie in (0, 1), got {slack_target}")));
    }
    let m = h.num_constraints();
    if m == 0 {
        return Ok(vec![0.0; h.dim]);
    }
    let goal = slack_target / (1.0 - slack_target);
    let mut search = MarginSearch::new(h);
    let mut best = f64::NEG_INFINITY;
    for sweep in 0..sweeps {
        search.sweep();
        let (margin, dual) = search.status();
        best = best.max(margin);
        if margin >= goal {
            if let Some(w) = search.point(slack_target) {
                return Ok(w);
            }
        }
        // dual ≤ 1/(2 s*²): once it passes 1/(2 goal²) the target is unreachable
        if dual > 0.5 / (goal * goal) {
            return Err(Error::InfeasibleOrThin { target: slack_target, best: slack_of(best), iterations: sweep + 1 });
        }
    }
    Err(Error::InfeasibleOrThin { target: slack_target, best: slack_of(best), iterations: sweeps })
}

/// Largest slack achievable in `h`, to within the search tolerance.
pub fn max_slack(h: &ConsistencyPolytope, sweeps: usize) -> f64 {
    if h.num_constraints() == 0 {
        return 1.0;
    }
    let mut search = MarginSearch::new(h);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..sweeps {
        search.sweep();
        best = best.max(search.status().0);
    }
    slack_of(best)
}

/// Slack of `(1−τ)u` for a direction with normalised margin `s`: `τ = s/(1+s)`.
/// The origin always has slack 0, so nothing below that is reported.
fn slack_of(margin: f64) -> f64 {
    if margin > 0.0 {
        margin / (1.0 + margin)
    } else {
        0.0
    }
}

struct MarginSearch<'a> {
    h: &'a ConsistencyPolytope,
    lambda: Vec<f64>,
    v: Vec<f64>,
}

impl<'a> MarginSearch<'a> {
    fn new(h: &'a ConsistencyPolytope) -> Self {
        MarginSearch { h, lambda: vec![0.0; h.num_constraints()], v: vec![0.0; h.dim] }
    }

    /// One Hildreth pass over the unit-normalised constraints `aⱼ·v ≥ 1`.
    fn sweep(&mut self) {
        for j in 0..self.h.num_constraints() {
            let c = self.h.sense[j] * self.h.inv_norm[j];
            let row = self.h.row(j);
            let av = c * dot(row, &self.v);
            let next = (self.lambda[j] + 1.0 - av).max(0.0);
            let delta = next - self.lambda[j];
            if delta != 0.0 {
                self.lambda[j] = next;
                for (vi, ri) in self.v.iter_mut().zip(row) {
                    *vi += delta * c * ri;
                }
            }
        }
    }

    /// (normalised margin of `v`, dual objective).
    fn status(&self) -> (f64, f64) {
        let nv = norm(&self.v);
        if nv == 0.0 {
            return (f64::NEG_INFINITY, 0.0);
        }
        let min = (0..self.h.num_constraints())
            .map(|j| self.h.raw_slack(j, &self.v) * self.h.inv_norm[j])
            .fold(f64::INFINITY, f64::min);
        let dual = self.lambda.iter().sum::<f64>() - 0.5 * nv * nv;
        (min / nv, dual)
    }

    fn point(&self, slack_target: f64) -> Option<Vec<f64>> {
        let s = (1.0 - slack_target) / norm(&self.v);
        let w: Vec<f64> = self.v.iter().map(|v| v * s).collect();
        // rounding can land a hair short of the target; the caller keeps sweeping
        let ok = norm(&w) <= 1.0 - slack_target
            && self.h.min_linear_slack(&w).map(|m| m >= slack_target).unwrap_or(false);
        ok.then_some(w)
    }
}

/// `⌈50 · dim · ln(1/(0.01ρ))⌉`.
pub fn default_steps_per_sample(dim: usize, rho: f64) -> Result<usize> {
    if !(rho > 0.0 && rho < 100.0) {
        return Err(Error::domain(format!("rho must lie in (0, 100), got {rho}")));
    }
    Ok((50.0 * dim as f64 * (1.0 / (0.01 * rho)).ln()).ceil() as usize)
}

#[derive(Clone, Debug)]
pub struct WalkConfig {
    pub steps_per_sample: usize,
    pub warm_start: Vec<f64>,
    pub rng_seed: u64,
}

/// A running hit-and-run chain.
pub struct Walker<'a> {
    h: &'a ConsistencyPolytope,
    p: Vec<f64>,
    /// Cached `sense · (row · p)`.
    slack: Vec<f64>,
    dir_dot: Vec<f64>,
    steps_per_sample: usize,
    since_refresh: usize,
    rng: StreamRng,
}

impl<'a> Walker<'a> {
    pub fn new(h: &'a ConsistencyPolytope, cfg: &WalkConfig) -> Result<Self> {
        if cfg.steps_per_sample == 0 {
            return Err(Error::Config("steps_per_sample must be at least 1".into()));
        }
        if !h.membership(&cfg.warm_start)? {
            return Err(Error::invalid("warm start lies outside the body"));
        }
        let mut walker = Walker {
            h,
            p: cfg.warm_start.clone(),
            slack: vec![0.0; h.num_constraints()],
            dir_dot: vec![0.0; h.num_constraints()],
            steps_per_sample: cfg.steps_per_sample,
            since_refresh: 0,
            rng: rng::seeded(cfg.rng_seed),
        };
        walker.refresh();
        Ok(walker)
    }

    fn refresh(&mut self) {
        for j in 0..self.h.num_constraints() {
            self.slack[j] = self.h.raw_slack(j, &self.p);
        }
        self.since_refresh = 0;
    }

    pub fn position(&self) -> &[f64] {
        &self.p
    }

    /// One hit-and-run move; retries degenerate chords with fresh directions.
    pub fn step(&mut self) -> Result<()> {
        for _ in 0..=MAX_DEGENERATE {
            let d = random_unit(&mut self.rng, self.h.dim);
            let (mut lo, mut hi) = ball_chord(&self.p, &d);
            for j in 0..self.h.num_constraints() {
                let r = self.h.raw_slack(j, &d);
                self.dir_dot[j] = r;
                clip(self.slack[j], r, &mut lo, &mut hi);
            }
            if !(hi - lo >= MIN_CHORD) {
                continue;
            }
            let t = self.rng.random_range(lo..hi);
            for (pi, di) in self.p.iter_mut().zip(&d) {
                *pi += t * di;
            }
            for (s, r) in self.slack.iter_mut().zip(&self.dir_dot) {
                *s += t * r;
            }
            self.since_refresh += 1;
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh();
            }
            return Ok(());
        }
        Err(Error::ThinBody(format!("{} consecutive degenerate chords", MAX_DEGENERATE + 1)))
    }

    /// Runs `steps_per_sample` steps and returns the current point, which is
    /// guaranteed to pass exact membership.
    pub fn sample(&mut self) -> Result<Vec<f64>> {
        for _ in 0..self.steps_per_sample {
            self.step()?;
        }
        // cached slacks can drift by an ulp; a fresh chord from exact slacks
        // lands back inside
        let mut extra = 0;
        while !self.h.contains(&self.p) {
            self.refresh();
            self.step()?;
            extra += 1;
            if extra > 1000 {
                return Err(Error::ThinBody("walk cannot re-enter the body".into()));
            }
        }
        Ok(self.p.clone())
    }
}

pub fn sample_uniform(h: &ConsistencyPolytope, cfg: &WalkConfig) -> Result<Vec<f64>> {
    Walker::new(h, cfg)?.sample()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeFraction {
    pub fraction: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Fraction of `m` successive walk samples from `h_outer` satisfying `predicate`.
pub fn estimate_volume_fraction<F>(
    h_outer: &ConsistencyPolytope,
    mut predicate: F,
    m: usize,
    cfg: &WalkConfig,
) -> Result<VolumeFraction>
where
    F: FnMut(&[f64]) -> bool,
{
    if m == 0 {
        return Err(Error::domain("volume estimate needs m >= 1"));
    }
    let mut walker = Walker::new(h_outer, cfg)?;
    let mut hits = 0usize;
    for _ in 0..m {
        if predicate(&walker.sample()?) {
            hits += 1;
        }
    }
    let p = hits as f64 / m as f64;
    Ok(VolumeFraction { fraction: p, std_error: (p * (1.0 - p) / m as f64).sqrt(), samples: m })
}

/// Pearson statistic of 2-D samples binned into equal angular sectors.
pub fn angular_chi_square(samples: &[Vec<f64>], sectors: usize) -> f64 {
    let mut counts = vec![0usize; sectors];
    for s in samples {
        let a = s[1].atan2(s[0]).rem_euclid(std::f64::consts::TAU);
        let i = ((a / std::f64::consts::TAU) * sectors as f64) as usize;
        counts[i.min(sectors - 1)] += 1;
    }
    let expected = samples.len() as f64 / sectors as f64;
    chi_square_statistic(&counts, &vec![expected; sectors])
}

pub fn chi_square_statistic(observed: &[usize], expected: &[f64]) -> f64 {
    observed.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum()
}

/// `p`-quantile of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_quantile(df: usize, p: f64) -> Result<f64> {
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::domain(e.to_string()))?;
    Ok(dist.inverse_cdf(p))
}
