//! Halfspaces, intersections of halfspaces, the lifting to origin-centred
//! halfspaces on the unit sphere, and hard/soft margins.
//!
//! Sign conventions are fixed:
//! - a [`TargetIntersection`] labels `+1` only when every slack `w·x - θ` is
//!   strictly positive, so a point on a boundary is negative;
//! - learned origin-centred hypotheses label `+1` when `w·x' >= 0`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm, norm_sq};

/// Unit-norm tolerance for normals and lifted vectors.
pub const UNIT_TOL: f64 = 1e-9;

/// Relative slack allowed when checking `‖x‖ <= R`.
pub const RADIUS_SLACK: f64 = 1e-9;

/// Binary label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "-1")]
    Negative,
    #[serde(rename = "1")]
    Positive,
}

impl Label {
    pub fn from_sign(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.as_i8() as f64
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "+1" => Ok(Label::Positive),
            "-1" => Ok(Label::Negative),
            other => Err(Error::Parse(format!("label must be 1 or -1, got {other:?}"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

/// Anything that labels points of the ambient space.
pub trait Classifier {
    fn dim(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<Label>;
}

/// `sign(w·x - θ)` with a unit normal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Halfspace {
    w: Vec<f64>,
    theta: f64,
}

impl Halfspace {
    /// Normals off the unit sphere by more than [`UNIT_TOL`] are rescaled,
    /// together with the threshold, so the geometric halfspace is unchanged.
    pub fn new(w: Vec<f64>, theta: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("halfspace normal must be nonempty"));
        }
        if !theta.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("halfspace entries must be finite"));
        }
        let n = norm(&w);
        if n == 0.0 {
            return Err(Error::invalid("halfspace normal must be nonzero"));
        }
        if (n - 1.0).abs() > UNIT_TOL {
            log::warn!("renormalizing halfspace normal with norm {n}");
            let w = w.into_iter().map(|v| v / n).collect();
            return Ok(Halfspace { w, theta: theta / n });
        }
        Ok(Halfspace { w, theta })
    }

    pub fn normal(&self) -> &[f64] {
        &self.w
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `w·x - θ`
    #[inline]
    pub fn slack(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) - self.theta
    }
}

/// `f(x) = +1` iff `w_i·x > θ_i` for every `i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TargetIntersection {
    halfspaces: Vec<Halfspace>,
    radius: f64,
}

impl TargetIntersection {
    pub fn new(halfspaces: Vec<Halfspace>, radius: f64) -> Result<Self> {
        if halfspaces.is_empty() {
            return Err(Error::invalid("an intersection needs at least one halfspace"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("ambient radius must be positive, got {radius}")));
        }
        let n = halfspaces[0].dim();
        for h in &halfspaces {
            check_dim(n, h.dim())?;
            if h.theta.abs() > radius * (1.0 + RADIUS_SLACK) {
                return Err(Error::invalid(format!(
                    "|theta| = {} exceeds the ambient radius {radius}",
                    h.theta.abs()
                )));
            }
        }
        Ok(TargetIntersection { halfspaces, radius })
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn k(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn dim(&self) -> usize {
        self.halfspaces[0].dim()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `min_i (w_i·x - θ_i)`, unnormalised.
    pub fn min_slack(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self
            .halfspaces
            .iter()
            .map(|h| h.slack(x))
            .fold(f64::INFINITY, f64::min))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_sign(self.min_slack(x)? > 0.0))
    }

    /// `-min_i (w_i·x - θ_i) / R`. A negative point has margin `ρ` when this is `>= ρ`.
    pub fn point_margin(&self, x: &[f64]) -> Result<f64> {
        Ok(-self.min_slack(x)? / self.radius)
    }
}

impl Classifier for TargetIntersection {
    fn dim(&self) -> usize {
        TargetIntersection::dim(self)
    }

    fn predict(&self, x: &[f64]) -> Result<Label> {
        self.evaluate(x)
    }
}

/// Free-function form of [`TargetIntersection::evaluate`].
pub fn evaluate_target(f: &TargetIntersection, x: &[f64]) -> Result<Label> {
    f.evaluate(x)
}

/// Free-function form of [`TargetIntersection::point_margin`].
pub fn point_margin(f: &TargetIntersection, x: &[f64]) -> Result<f64> {
    f.point_margin(x)
}

/// A point mapped to the unit sphere in dimension `n + 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPoint(Vec<f64>);

impl LiftedPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

/// An origin-centred halfspace in the lifted space.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedHalfspace(Vec<f64>);

impl LiftedHalfspace {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

/// `x ↦ (x/(√2 R), √(R² - ‖x‖²)/(√2 R), 1/√2)`.
pub fn lift_point(x: &[f64], radius: f64) -> Result<LiftedPoint> {
    let mut out = Vec::with_capacity(x.len() + 2);
    lift_point_into(x, radius, &mut out)?;
    Ok(LiftedPoint(out))
}

/// Allocation-free variant of [`lift_point`]; `out` is cleared first.
pub fn lift_point_into(x: &[f64], radius: f64, out: &mut Vec<f64>) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    let r2 = radius * radius;
    let nx2 = norm_sq(x);
    if nx2.sqrt() > radius * (1.0 + RADIUS_SLACK) {
        return Err(Error::invalid(format!(
            "point norm {} exceeds radius {radius}",
            nx2.sqrt()
        )));
    }
    let s = 1.0 / (std::f64::consts::SQRT_2 * radius);
    out.clear();
    out.extend(x.iter().map(|v| v * s));
    out.push((r2 - nx2).max(0.0).sqrt() * s);
    out.push(std::f64::consts::FRAC_1_SQRT_2);
    Ok(())
}

/// `w' = (w, 0, -θ/R) / √(1 + θ²/R²)`.
pub fn lift_halfspace(h: &Halfspace, radius: f64) -> Result<LiftedHalfspace> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    if h.theta.abs() > radius * (1.0 + RADIUS_SLACK) {
        return Err(Error::invalid(format!(
            "|theta| = {} exceeds radius {radius}",
            h.theta.abs()
        )));
    }
    let t = h.theta / radius;
    let c = 1.0 / (1.0 + t * t).sqrt();
    let mut out: Vec<f64> = h.w.iter().map(|v| v * c).collect();
    out.push(0.0);
    out.push(-t * c);
    Ok(LiftedHalfspace(out))
}

/// Fraction of `sample` whose normalised worst slack lies in `[-rho, 0]`.
pub fn soft_margin_estimate(f: &TargetIntersection, sample: &[Vec<f64>], rho: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::invalid("soft margin estimate needs a nonempty sample"));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("rho must lie in [0, 1], got {rho}")));
    }
    let mut hits = 0usize;
    for x in sample {
        let s = f.min_slack(x)? / f.radius;
        if (-rho..=0.0).contains(&s) {
            hits += 1;
        }
    }
    Ok(hits as f64 / sample.len() as f64)
}

/// Outcome of checking the `½ρ²` hard margin implied by `ρ`-robustness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginWitness {
    pub required_margin: f64,
    pub negatives_checked: usize,
    /// Indices into the support of negatives whose margin falls short.
    pub violators: Vec<usize>,
    /// Smallest `point_margin` over negative support points (`+inf` if none).
    pub min_negative_margin: f64,
}

impl MarginWitness {
    pub fn holds(&self) -> bool {
        self.violators.is_empty()
    }
}

/// Checks that every negative support point has `point_margin >= ½ρ²`.
pub fn robust_margin_witness(
    f: &TargetIntersection,
    support: &[Vec<f64>],
    rho: f64,
) -> Result<MarginWitness> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("rho must be positive, got {rho}")));
    }
    let mut any_positive = false;
    let required = 0.5 * rho * rho;
    let mut violators = Vec::new();
    let mut negatives = 0;
    let mut min_margin = f64::INFINITY;
    for (i, x) in support.iter().enumerate() {
        match f.evaluate(x)? {
            Label::Positive => any_positive = true,
            Label::Negative => {
                negatives += 1;
                let m = f.point_margin(x)?;
                min_margin = min_margin.min(m);
                if m < required {
                    violators.push(i);
                }
            }
        }
    }
    if !any_positive {
        return Err(Error::invalid(
            "support has no positive point; the robust-to-margin implication needs one",
        ));
    }
    Ok(MarginWitness {
        required_margin: required,
        negatives_checked: negatives,
        violators,
        min_negative_margin: min_margin,
    })
}

/// Euclidean distance from `x` to the closed polyhedron `{y : w_i·y >= θ_i ∀i}`.
///
/// Exact: the projection lies on some face, so every subset of constraints is
/// tried as an active set and the nearest feasible candidate wins. Cost is
/// `2^k` small solves, fine for the `k <= 6` used when building robust
/// instances. Returns `None` when the polyhedron is empty.
pub fn distance_to_polyhedron(f: &TargetIntersection, x: &[f64]) -> Result<Option<f64>> {
    check_dim(f.dim(), x.len())?;
    let k = f.k();
    if k > 16 {
        return Err(Error::invalid("active-set enumeration supports at most 16 halfspaces"));
    }
    let hs = &f.halfspaces;
    let feasible = |y: &[f64]| hs.iter().all(|h| h.slack(y) >= -1e-10);
    if feasible(x) {
        return Ok(Some(0.0));
    }
    let mut best: Option<f64> = None;
    for mask in 1u32..(1u32 << k) {
        let active: Vec<&Halfspace> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| &hs[i]).collect();
        if active.len() > x.len() {
            continue;
        }
        let m = active.len();
        // G λ = W_S x - θ_S, y = x - W_Sᵀ λ
        let mut g = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for (i, hi) in active.iter().enumerate() {
            rhs[i] = hi.slack(x);
            for (j, hj) in active.iter().enumerate() {
                g[i * m + j] = dot(&hi.w, &hj.w);
            }
        }
        let Some(lambda) = solve_small(&mut g, &mut rhs, m) else {
            continue;
        };
        let mut y = x.to_vec();
        for (l, h) in lambda.iter().zip(&active) {
            crate::linalg::axpy(-l, &h.w, &mut y);
        }
        if feasible(&y) {
            let d = crate::linalg::distance(x, &y);
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    Ok(best)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_small(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs()))?;
        if a[piv * m + col].abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for c in 0..m {
                a.swap(piv * m + c, col * m + c);
            }
            b.swap(piv, col);
        }
        for r in col + 1..m {
            let factor = a[r * m + col] / a[col * m + col];
            for c in col..m {
                a[r * m + c] -= factor * a[col * m + c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let mut s = b[r];
        for c in r + 1..m {
            s -= a[r * m + c] * x[c];
        }
        x[r] = s / a[r * m + r];
    }
    Some(x)
}
