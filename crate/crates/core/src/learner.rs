//! Weak learning of a single good halfspace, and the region learner built on it.
//!
//! One attempt draws a few negatives and many positives, forms the set of
//! lifted normals consistent with all of them, and returns a uniform sample
//! from that set. Most attempts fail when `k > 1` (the negatives rarely all
//! sit behind one face); [`region_learner`] retries and keeps the first
//! hypothesis whose negative region is both large and pure.

use serde::Serialize;

use crate::distributions::ExampleSource;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{lift_point, lift_point_into, Classifier, Label};
use crate::linalg::{dot, norm};
use crate::rng::derive_seed;
use crate::sampler::{default_steps_per_sample, find_interior, ConsistencyPolytope, WalkConfig, Walker};

/// Sample-size overrides; `None` keeps the formula value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ParamOverrides {
    pub m_minus: Option<usize>,
    pub m_plus: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakParams {
    pub n: usize,
    pub k: usize,
    pub rho: f64,
    pub epsilon: f64,
    /// `√(n·log₂(9/ρ)/log₂(2k/ε))` before rounding.
    pub m_minus_real: f64,
    /// Ceiling of `m_minus_real`, at least 1.
    pub m_minus_formula: usize,
    /// `√(n·log₂(9/ρ)·log₂(2k/ε))`.
    pub exponent: f64,
    /// `log₂ M₊` for the formula value of `M₊`.
    pub log2_m_plus: f64,
    /// Formula `M₊` as a float; `inf` once it leaves the f64 range.
    pub m_plus_formula: f64,
    /// `(100n/ε²)·log₂(M₊)/M₊` for the formula `M₊`.
    pub good_threshold: f64,
    /// Sizes actually used.
    pub m_minus: usize,
    pub m_plus: usize,
    pub overrides: ParamOverrides,
}

/// Parameter schedule for one weak-learning attempt. Logs are base 2.
///
/// Defined for `ρ ∈ (0, 9)`, `ε > 0` and `2k/ε > 1`, the range on which both
/// logarithms are positive.
pub fn compute_params(n: usize, k: usize, rho: f64, epsilon: f64) -> Result<WeakParams> {
    compute_params_with(n, k, rho, epsilon, ParamOverrides::default())
}

pub fn compute_params_with(n: usize, k: usize, rho: f64, epsilon: f64, overrides: ParamOverrides) -> Result<WeakParams> {
    if n < 1 || k < 1 {
        return Err(Error::domain("n and k must be at least 1"));
    }
    if !(rho > 0.0 && rho < 9.0) {
        return Err(Error::domain(format!("rho must lie in (0, 9), got {rho}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let lk = (2.0 * k as f64 / epsilon).log2();
    if !(lk > 0.0) {
        return Err(Error::domain(format!("need 2k/epsilon > 1, got {}", 2.0 * k as f64 / epsilon)));
    }
    if overrides.m_minus == Some(0) || overrides.m_plus == Some(0) {
        return Err(Error::domain("sample-size overrides must be at least 1"));
    }
    let nf = n as f64;
    let lr = (9.0 / rho).log2();
    let m_minus_real = (nf * lr / lk).sqrt();
    let m_minus_formula = (m_minus_real.ceil() as usize).max(1);
    let exponent = (nf * lr * lk).sqrt();
    // the exact real M₋ keeps M₊ monotone in its arguments
    let base = 200.0 * k as f64 * nf * nf * m_minus_real / epsilon.powi(4);
    let log2_m_plus = 2.0 * base.log2() + exponent;
    let direct = base * base * exponent.exp2();
    let m_plus_formula = if direct.is_finite() { direct.ceil() } else { f64::INFINITY };
    let good_threshold = good_threshold_from_log2(n, epsilon, log2_m_plus);
    let m_plus_default = if m_plus_formula < usize::MAX as f64 { m_plus_formula as usize } else { usize::MAX };
    Ok(WeakParams {
        n,
        k,
        rho,
        epsilon,
        m_minus_real,
        m_minus_formula,
        exponent,
        log2_m_plus,
        m_plus_formula,
        good_threshold,
        m_minus: overrides.m_minus.unwrap_or(m_minus_formula),
        m_plus: overrides.m_plus.unwrap_or(m_plus_default),
        overrides,
    })
}

/// `(100n/ε²)·log₂(M)/M`, evaluated through `log₂ M` so huge `M` stays finite.
pub fn good_threshold_from_log2(n: usize, epsilon: f64, log2_m: f64) -> f64 {
    100.0 * n as f64 / (epsilon * epsilon) * log2_m * (-log2_m).exp2()
}

/// `⌈(32/ε)·d·log₂(1/ε)⌉` for `d ≥ 1`, `ε ∈ (0, 1/2)`.
pub fn hitting_set_size(vc_dim: usize, epsilon: f64) -> Result<u64> {
    if vc_dim < 1 {
        return Err(Error::domain("VC dimension must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    Ok((32.0 / epsilon * vc_dim as f64 * (1.0 / epsilon).log2()).ceil() as u64)
}

/// Origin-centred halfspace in the lifted space; `+1` iff `w·x' ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HalfspaceHypothesis {
    w: Vec<f64>,
    radius: f64,
}

impl HalfspaceHypothesis {
    pub fn new(w: Vec<f64>, radius: f64) -> Result<Self> {
        if w.len() < 3 {
            return Err(Error::invalid("lifted normal needs at least 3 components"));
        }
        if w.iter().any(|v| !v.is_finite()) || norm(&w) > 1.0 + 1e-12 {
            return Err(Error::invalid("lifted normal must be finite with norm at most 1"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        Ok(HalfspaceHypothesis { w, radius })
    }

    pub fn normal(&self) -> &[f64] {
        &self.w
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `w·x'` for the lifted `x`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.w.len() - 2, x.len())?;
        let lx = lift_point(x, self.radius)?;
        Ok(dot(&self.w, lx.coords()))
    }

    /// Reuses `buf` for the lifted point.
    pub fn predict_with(&self, x: &[f64], buf: &mut Vec<f64>) -> Result<Label> {
        check_dim(self.w.len() - 2, x.len())?;
        lift_point_into(x, self.radius, buf)?;
        Ok(Label::from_sign(dot(&self.w, buf) >= 0.0))
    }
}

impl Classifier for HalfspaceHypothesis {
    fn dim(&self) -> usize {
        self.w.len() - 2
    }

    fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_sign(self.score(x)? >= 0.0))
    }
}

/// Walk settings shared by all attempts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WalkSettings {
    /// `None`: `⌈50·dim·ln(1/(0.01ρ))⌉`.
    pub steps_per_sample: Option<usize>,
    /// Interior slack demanded for the warm start. `None`: `0.01ρ`.
    pub slack_target: Option<f64>,
}

impl Default for WalkSettings {
    fn default() -> Self {
        WalkSettings { steps_per_sample: None, slack_target: None }
    }
}

impl WalkSettings {
    pub fn resolve(&self, dim: usize, rho: f64) -> Result<(usize, f64)> {
        let steps = match self.steps_per_sample {
            Some(0) => return Err(Error::Config("steps_per_sample must be at least 1".into())),
            Some(s) => s,
            None => default_steps_per_sample(dim, rho)?,
        };
        Ok((steps, self.slack_target.unwrap_or(0.01 * rho)))
    }
}

/// Result of one weak-learning attempt, with its training sample.
#[derive(Clone, Debug)]
pub struct Attempt {
    pub hypothesis: Option<HalfspaceHypothesis>,
    /// Why no hypothesis came back (infeasible or thin body).
    pub failure: Option<String>,
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

/// One attempt: draw `N` and `P`, build the consistency body, return a
/// near-uniform member.
pub fn find_good_halfspace<S: ExampleSource + ?Sized>(
    src: &mut S,
    params: &WeakParams,
    walk: &WalkSettings,
    seed: u64,
) -> Result<Attempt> {
    let n = src.dim();
    check_dim(params.n, n)?;
    let radius = src.radius();
    let dim = n + 2;
    let (steps, slack_target) = walk.resolve(dim, params.rho)?;

    let negatives = (0..params.m_minus).map(|_| src.draw_with_label(Label::Negative)).collect::<Result<Vec<_>>>()?;
    let positives = (0..params.m_plus).map(|_| src.draw_with_label(Label::Positive)).collect::<Result<Vec<_>>>()?;

    let mut h = ConsistencyPolytope::new(dim);
    let mut buf = Vec::with_capacity(dim);
    for x in &positives {
        lift_point_into(x, radius, &mut buf)?;
        h.add_positive(&buf)?;
    }
    for x in &negatives {
        lift_point_into(x, radius, &mut buf)?;
        h.add_negative(&buf)?;
    }

    let fail = |msg: String, positives, negatives| Ok(Attempt { hypothesis: None, failure: Some(msg), positives, negatives });
    let start = match find_interior(&h, slack_target) {
        Ok(w) => w,
        Err(e @ Error::InfeasibleOrThin { .. }) => return fail(e.to_string(), positives, negatives),
        Err(e) => return Err(e),
    };
    let cfg = WalkConfig { steps_per_sample: steps, warm_start: start, rng_seed: derive_seed(seed, 0x5A) };
    let w = match Walker::new(&h, &cfg).and_then(|mut walker| walker.sample()) {
        Ok(w) => w,
        Err(e @ (Error::ThinBody(_) | Error::DegenerateChord { .. })) => return fail(e.to_string(), positives, negatives),
        Err(e) => return Err(e),
    };
    Ok(Attempt { hypothesis: Some(HalfspaceHypothesis::new(w, radius)?), failure: None, positives, negatives })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodnessReport {
    /// Estimated `Pr[h(x) = -1]`.
    pub p_neg_region: f64,
    /// Estimated `Pr[f(x) = -1 | h(x) = -1]`; 0 when the region was never hit.
    pub p_correct_given_region: f64,
    pub region_samples: usize,
    pub samples_used: usize,
    pub pass: bool,
}

/// Smallest admissible `m_check`: `⌈50/(γ·ε²)⌉`.
pub fn min_check_samples(epsilon: f64, gamma: f64) -> usize {
    (50.0 / (gamma * epsilon * epsilon)).ceil() as usize
}

/// Estimates the region's mass and purity from `m_check` fresh draws.
///
/// Draws landing in `{h = -1}` are the rejection-conditioned sample for the
/// purity estimate; with `p_region ≥ γ` there are at least `50/ε²` of them.
/// Pass iff `p̂_region ≥ γ` and `p̂_correct ≥ 1 − ε + ε/3`.
pub fn check_good<S, C>(h: &C, src: &mut S, epsilon: f64, gamma: f64, m_check: usize) -> Result<GoodnessReport>
where
    S: ExampleSource + ?Sized,
    C: RegionPredicate + ?Sized,
{
    if !(epsilon > 0.0 && epsilon < 1.0) || !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain("check_good needs epsilon in (0,1) and gamma in (0,1]"));
    }
    let need = min_check_samples(epsilon, gamma);
    if m_check < need {
        return Err(Error::domain(format!("m_check = {m_check} is below the required {need}")));
    }
    let mut buf = Vec::new();
    let mut in_region = 0usize;
    let mut correct = 0usize;
    for _ in 0..m_check {
        let e = src.draw()?;
        if h.in_region(&e.x, &mut buf)? {
            in_region += 1;
            if e.label == Label::Negative {
                correct += 1;
            }
        }
    }
    let p_region = in_region as f64 / m_check as f64;
    let p_correct = if in_region == 0 { 0.0 } else { correct as f64 / in_region as f64 };
    Ok(GoodnessReport {
        p_neg_region: p_region,
        p_correct_given_region: p_correct,
        region_samples: in_region,
        samples_used: m_check,
        pass: p_region >= gamma && p_correct >= 1.0 - epsilon + epsilon / 3.0,
    })
}

/// Membership in a candidate negative region.
pub trait RegionPredicate {
    fn in_region(&self, x: &[f64], buf: &mut Vec<f64>) -> Result<bool>;
}

impl RegionPredicate for HalfspaceHypothesis {
    fn in_region(&self, x: &[f64], buf: &mut Vec<f64>) -> Result<bool> {
        Ok(self.predict_with(x, buf)? == Label::Negative)
    }
}

/// Settings for [`region_learner`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionSettings {
    pub epsilon: f64,
    pub gamma: f64,
    pub attempt_budget: usize,
    /// `None`: [`min_check_samples`].
    pub m_check: Option<usize>,
    pub walk: WalkSettings,
}

impl RegionSettings {
    pub fn m_check(&self) -> usize {
        self.m_check.unwrap_or_else(|| min_check_samples(self.epsilon, self.gamma))
    }
}

/// One line of the attempt log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<GoodnessReport>,
}

#[derive(Clone, Debug)]
pub enum RegionOutcome {
    Found { hypothesis: HalfspaceHypothesis, report: GoodnessReport, attempts: Vec<AttemptRecord> },
    Exhausted { attempts: Vec<AttemptRecord> },
}

impl RegionOutcome {
    pub fn attempts(&self) -> &[AttemptRecord] {
        match self {
            RegionOutcome::Found { attempts, .. } | RegionOutcome::Exhausted { attempts } => attempts,
        }
    }
}

/// Up to `attempt_budget` weak-learning attempts, each checked on fresh draws;
/// the first passing hypothesis wins.
pub fn region_learner<S: ExampleSource + ?Sized>(
    src: &mut S,
    params: &WeakParams,
    settings: &RegionSettings,
    seed: u64,
) -> Result<RegionOutcome> {
    if settings.attempt_budget == 0 {
        return Err(Error::domain("attempt budget must be at least 1"));
    }
    let m_check = settings.m_check();
    let mut attempts = Vec::new();
    for i in 0..settings.attempt_budget {
        let attempt = find_good_halfspace(src, params, &settings.walk, derive_seed(seed, i as u64))?;
        let Some(hyp) = attempt.hypothesis else {
            attempts.push(AttemptRecord { attempt: i, feasible: false, failure: attempt.failure, report: None });
            continue;
        };
        let report = check_good(&hyp, src, settings.epsilon, settings.gamma, m_check)?;
        let pass = report.pass;
        attempts.push(AttemptRecord { attempt: i, feasible: true, failure: None, report: Some(report.clone()) });
        log::debug!("attempt {i}: region {:.4} purity {:.4} pass {pass}", report.p_neg_region, report.p_correct_given_region);
        if pass {
            return Ok(RegionOutcome::Found { hypothesis: hyp, report, attempts });
        }
    }
    Ok(RegionOutcome::Exhausted { attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{make_cube_source_with_target, make_sphere_margin_source};
    use crate::geometry::{lift_halfspace, Halfspace};

    #[test]
    fn params_worked_instance() {
        let p = compute_params(72, 8, 9.0 / 256.0, 1.0).unwrap();
        assert_eq!(p.m_minus_real, 12.0);
        assert_eq!(p.m_minus_formula, 12);
        assert_eq!(p.exponent, 48.0);
        // M₊ = (200·8·72²·12)²·2⁴⁸
        let base: f64 = 200.0 * 8.0 * 72.0 * 72.0 * 12.0;
        let expect = 2.0 * base.log2() + 48.0;
        assert!((p.log2_m_plus - expect).abs() < 1e-12);
        assert_eq!(p.m_plus_formula, base * base * 2f64.powi(48));
    }

    #[test]
    fn params_domain() {
        assert!(compute_params(3, 2, 4.5, 0.1).is_ok());
        assert!(compute_params(3, 2, 9.0, 0.1).is_err());
        assert!(compute_params(3, 2, 0.0, 0.1).is_err());
        assert!(compute_params(3, 1, 0.1, 2.0).is_err());
        assert!(compute_params(0, 1, 0.1, 0.1).is_err());
        let o = ParamOverrides { m_minus: Some(8), m_plus: Some(2000) };
        let p = compute_params_with(3, 2, 0.2, 0.1, o).unwrap();
        assert_eq!((p.m_minus, p.m_plus), (8, 2000));
        assert_ne!(p.m_minus_formula, 0);
    }

    #[test]
    fn m_minus_clamped_to_one() {
        // tiny n against a large log₂(2k/ε): the real value is below 1
        let p = compute_params(1, 1000, 8.9, 1e-6).unwrap();
        assert!(p.m_minus_real < 1.0);
        assert_eq!(p.m_minus_formula, 1);
    }

    #[test]
    fn threshold_identity() {
        for (n, k, rho, eps) in [(3, 2, 0.2, 0.1), (10, 4, 0.05, 0.01), (2, 1, 0.3, 0.4)] {
            let p = compute_params(n, k, rho, eps).unwrap();
            let lhs = p.good_threshold * p.log2_m_plus.exp2();
            let rhs = 100.0 * n as f64 / (eps * eps) * p.log2_m_plus;
            assert!((lhs / rhs - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hitting_set_examples() {
        assert_eq!(hitting_set_size(10, 0.1).unwrap(), 10631);
        // just inside the open interval at 1/2 the value tends to 64
        let near = hitting_set_size(1, 0.5 - 1e-12).unwrap();
        assert!((64..=65).contains(&near));
        assert!(hitting_set_size(1, 0.5).is_err());
        assert!(hitting_set_size(0, 0.1).is_err());
    }

    fn lifted_target_hypothesis(h: &Halfspace, radius: f64) -> HalfspaceHypothesis {
        HalfspaceHypothesis::new(lift_halfspace(h, radius).unwrap().into_coords(), radius).unwrap()
    }

    #[test]
    fn check_good_examples() {
        let mut src = make_sphere_margin_source(3, 1, 0.2, 4, 0.5).unwrap();
        let f = src.target_function().clone();
        let (eps, gamma) = (0.1, 0.1);
        let m = min_check_samples(eps, gamma);
        assert!(check_good(&lifted_target_hypothesis(&f.halfspaces()[0], 1.0), &mut src, eps, gamma, m - 1).is_err());

        let own = lifted_target_hypothesis(&f.halfspaces()[0], 1.0);
        let r = check_good(&own, &mut src, eps, gamma, m).unwrap();
        assert!(r.pass);
        assert_eq!(r.p_correct_given_region, 1.0);
        assert!((r.p_neg_region - 0.5).abs() < 0.05);

        // w = pure lift offset: w·x' = 1/√2 > 0 everywhere, so h ≡ +1
        let all_pos = HalfspaceHypothesis::new(vec![0.0, 0.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        let r = check_good(&all_pos, &mut src, eps, gamma, m).unwrap();
        assert!(!r.pass);
        assert_eq!(r.p_neg_region, 0.0);

        // orthogonal to the target normal: half the region is positive
        let w = f.halfspaces()[0].normal();
        let mut o = vec![w[1], -w[0], 0.0];
        let no = norm(&o);
        o.iter_mut().for_each(|v| *v /= no);
        let junk = lifted_target_hypothesis(&Halfspace::new(o, 0.0).unwrap(), 1.0);
        let r = check_good(&junk, &mut src, eps, gamma, m).unwrap();
        assert!(!r.pass);
        assert!((r.p_correct_given_region - 0.5).abs() < 0.1);
    }

    #[test]
    fn check_good_is_deterministic() {
        let run = || {
            let mut src = make_sphere_margin_source(3, 2, 0.2, 4, 0.5).unwrap();
            let own = lifted_target_hypothesis(&src.target_function().halfspaces()[0].clone(), 1.0);
            check_good(&own, &mut src, 0.1, 0.05, 100_000).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn planted_halfspace_passes_when_negatives_are_common() {
        for seed in 0..5 {
            let mut src = make_sphere_margin_source(4, 1, 0.15, seed, 0.5).unwrap();
            let own = lifted_target_hypothesis(&src.target_function().halfspaces()[0].clone(), 1.0);
            assert!(check_good(&own, &mut src, 0.1, 0.2, min_check_samples(0.1, 0.2)).unwrap().pass);
        }
    }

    #[test]
    fn weak_attempt_is_consistent_with_its_sample() {
        let mut src = make_sphere_margin_source(3, 1, 0.2, 1, 0.5).unwrap();
        let o = ParamOverrides { m_minus: Some(8), m_plus: Some(2000) };
        let params = compute_params_with(3, 1, 0.2, 0.1, o).unwrap();
        let a = find_good_halfspace(&mut src, &params, &WalkSettings::default(), 3).unwrap();
        let h = a.hypothesis.expect("single halfspace bodies are always feasible");
        assert_eq!(a.positives.len() + a.negatives.len(), 2008);
        for x in &a.positives {
            assert_eq!(h.predict(x).unwrap(), Label::Positive);
        }
        for x in &a.negatives {
            assert_eq!(h.predict(x).unwrap(), Label::Negative);
        }
    }

    #[test]
    fn weak_attempt_starves_without_negatives() {
        // x₁ ≤ 1 < 1.5 on the cube: never positive, so flip the request
        let mut src = make_cube_source_with_target(vec![vec![1, 0, 0, 0]], vec![1.5], 0).unwrap().with_rejection_budget(10_000);
        let params = compute_params_with(4, 1, 0.1, 0.1, ParamOverrides { m_minus: Some(2), m_plus: Some(2) }).unwrap();
        assert!(matches!(
            find_good_halfspace(&mut src, &params, &WalkSettings::default(), 0),
            Err(Error::Starvation { .. })
        ));
    }

    #[test]
    fn region_learner_budget_checks() {
        let mut src = make_sphere_margin_source(3, 1, 0.2, 1, 0.5).unwrap();
        let params = compute_params_with(3, 1, 0.2, 0.1, ParamOverrides { m_minus: Some(8), m_plus: Some(500) }).unwrap();
        let mut s = RegionSettings { epsilon: 0.1, gamma: 0.1, attempt_budget: 0, m_check: None, walk: WalkSettings::default() };
        assert!(region_learner(&mut src, &params, &s, 0).is_err());
        s.attempt_budget = 20;
        match region_learner(&mut src, &params, &s, 0).unwrap() {
            RegionOutcome::Found { report, .. } => assert!(report.pass),
            RegionOutcome::Exhausted { attempts } => panic!("exhausted after {}", attempts.len()),
        }
    }
}
