//! Strong learners built from the region learner.
//!
//! [`cover_learner`] peels off pure negative regions one at a time and
//! conditions the distribution on what is left; the output is the
//! intersection of the accepted regions. [`weighted_boost`] is the reweighting
//! alternative: each weak region becomes a voter that says −1 inside the
//! region and abstains outside.

use serde::Serialize;

use crate::distributions::{EmpiricalSource, Example, ExampleSource};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{Classifier, Label, TargetIntersection};
use crate::learner::{check_good, GoodnessReport, HalfspaceHypothesis, RegionOutcome, RegionPredicate};
use crate::record::{HalfspaceRecord, RecordKind, RecordRow};
use crate::rng::{self, derive_seed};

/// One factor of a cover hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverRegion {
    /// `g ≡ 1`.
    All,
    /// `g ≡ −1`.
    None,
    Halfspace(HalfspaceHypothesis),
}

/// Predicts +1 iff every region does.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverHypothesis {
    n: usize,
    radius: f64,
    regions: Vec<CoverRegion>,
}

impl CoverHypothesis {
    /// Starts from the single region `g₀ ≡ 1`.
    pub fn new(n: usize, radius: f64) -> Self {
        CoverHypothesis { n, radius, regions: vec![CoverRegion::All] }
    }

    pub fn constant(n: usize, radius: f64, label: Label) -> Self {
        let region = match label {
            Label::Positive => CoverRegion::All,
            Label::Negative => CoverRegion::None,
        };
        CoverHypothesis { n, radius, regions: vec![region] }
    }

    pub fn push(&mut self, h: HalfspaceHypothesis) -> Result<()> {
        check_dim(self.n, h.dim())?;
        self.regions.push(CoverRegion::Halfspace(h));
        Ok(())
    }

    pub fn regions(&self) -> &[CoverRegion] {
        &self.regions
    }

    /// Accepted halfspace regions, sentinels excluded.
    pub fn halfspaces(&self) -> Vec<HalfspaceHypothesis> {
        self.regions
            .iter()
            .filter_map(|r| match r {
                CoverRegion::Halfspace(h) => Some(h.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn predict_with(&self, x: &[f64], buf: &mut Vec<f64>) -> Result<Label> {
        check_dim(self.n, x.len())?;
        for r in &self.regions {
            match r {
                CoverRegion::All => {}
                CoverRegion::None => return Ok(Label::Negative),
                CoverRegion::Halfspace(h) => {
                    if h.predict_with(x, buf)? == Label::Negative {
                        return Ok(Label::Negative);
                    }
                }
            }
        }
        Ok(Label::Positive)
    }

    pub fn to_record(&self, comments: Vec<String>) -> HalfspaceRecord {
        let rows = self
            .regions
            .iter()
            .map(|r| match r {
                CoverRegion::All => RecordRow::All,
                CoverRegion::None => RecordRow::None,
                CoverRegion::Halfspace(h) => RecordRow::Halfspace { normal: h.normal().to_vec(), theta: 0.0 },
            })
            .collect();
        HalfspaceRecord { kind: RecordKind::Cover, n: self.n, radius: self.radius, rows, comments }
    }

    pub fn from_record(rec: &HalfspaceRecord) -> Result<Self> {
        if rec.kind != RecordKind::Cover {
            return Err(Error::Parse("expected a cover record".into()));
        }
        let mut regions = Vec::with_capacity(rec.rows.len());
        for row in &rec.rows {
            regions.push(match row {
                RecordRow::All => CoverRegion::All,
                RecordRow::None => CoverRegion::None,
                RecordRow::Halfspace { normal, theta } => {
                    if *theta != 0.0 {
                        return Err(Error::Parse("cover rows must have threshold 0".into()));
                    }
                    CoverRegion::Halfspace(HalfspaceHypothesis::new(normal.clone(), rec.radius)?)
                }
            });
        }
        Ok(CoverHypothesis { n: rec.n, radius: rec.radius, regions })
    }
}

impl Classifier for CoverHypothesis {
    fn dim(&self) -> usize {
        self.n
    }

    fn predict(&self, x: &[f64]) -> Result<Label> {
        self.predict_with(x, &mut Vec::new())
    }
}

pub fn evaluate_cover(h: &CoverHypothesis, x: &[f64]) -> Result<Label> {
    h.predict(x)
}

/// Base source restricted to points outside every accepted region.
pub struct RegionConditioned<'a, S: ExampleSource + ?Sized> {
    base: &'a mut S,
    regions: &'a [HalfspaceHypothesis],
    buf: Vec<f64>,
}

impl<'a, S: ExampleSource + ?Sized> RegionConditioned<'a, S> {
    pub fn new(base: &'a mut S, regions: &'a [HalfspaceHypothesis]) -> Self {
        RegionConditioned { base, regions, buf: Vec::new() }
    }
}

fn outside_all(regions: &[HalfspaceHypothesis], x: &[f64], buf: &mut Vec<f64>) -> Result<bool> {
    for r in regions {
        if r.predict_with(x, buf)? == Label::Negative {
            return Ok(false);
        }
    }
    Ok(true)
}

impl<S: ExampleSource + ?Sized> ExampleSource for RegionConditioned<'_, S> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn radius(&self) -> f64 {
        self.base.radius()
    }

    fn draw(&mut self) -> Result<Example> {
        let budget = self.base.rejection_budget();
        for _ in 0..budget {
            let e = self.base.draw()?;
            if outside_all(self.regions, &e.x, &mut self.buf)? {
                return Ok(e);
            }
        }
        Err(Error::starved("a point outside the accepted regions", budget))
    }

    fn consumed(&self) -> u64 {
        self.base.consumed()
    }

    fn rejection_budget(&self) -> u64 {
        self.base.rejection_budget()
    }

    fn target(&self) -> Option<&TargetIntersection> {
        self.base.target()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationTag {
    Constant,
    RetBad,
    RetGood,
}

impl std::fmt::Display for TerminationTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TerminationTag::Constant => "constant",
            TerminationTag::RetBad => "ret-bad",
            TerminationTag::RetGood => "ret-good",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverSettings {
    pub epsilon: f64,
    pub gamma: f64,
    /// Draws for the recheck of each returned region.
    pub m_check: usize,
}

impl CoverSettings {
    /// `γ⁻¹·log₂(1/ε)`.
    pub fn round_limit(&self) -> f64 {
        (1.0 / self.epsilon).log2() / self.gamma
    }

    /// `⌈γ⁻¹·log₂(1/ε)⌉`.
    pub fn max_regions(&self) -> usize {
        self.round_limit().ceil() as usize
    }

    /// Estimates made with accuracy ε/3; the union over every check fails
    /// with probability at most 0.01.
    pub fn guard_samples(&self) -> usize {
        let checks = self.max_regions() as f64 + 2.0;
        let delta = 0.01 / checks;
        let acc = self.epsilon / 3.0;
        ((4.0 / delta).ln() / (2.0 * acc * acc)).ceil() as usize
    }
}

/// Joint masses `Pr[f = b ∧ h = +1]` under the base distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JointMass {
    pub positive: f64,
    pub negative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverRound {
    pub round: usize,
    pub guard: JointMass,
    pub attempts: usize,
    pub outcome: RoundOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learner_report: Option<GoodnessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recheck: Option<GoodnessReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundOutcome {
    Accepted,
    Exhausted,
    RecheckFailed,
    /// Conditioning starved; the remaining region has vanishing mass.
    Starved,
}

#[derive(Clone, Debug)]
pub struct CoverResult {
    pub hypothesis: CoverHypothesis,
    pub tag: TerminationTag,
    /// Base-distribution label frequencies from the balance check.
    pub bias: JointMass,
    /// Guard estimate at exit, when the loop ran.
    pub final_guard: Option<JointMass>,
    pub rounds: Vec<CoverRound>,
    pub region_calls: usize,
    pub attempts: usize,
}

fn estimate_joint<S: ExampleSource + ?Sized>(src: &mut S, h: &CoverHypothesis, m: usize) -> Result<JointMass> {
    let mut buf = Vec::new();
    let (mut pos, mut neg) = (0usize, 0usize);
    for _ in 0..m {
        let e = src.draw()?;
        if h.predict_with(&e.x, &mut buf)? == Label::Positive {
            match e.label {
                Label::Positive => pos += 1,
                Label::Negative => neg += 1,
            }
        }
    }
    Ok(JointMass { positive: pos as f64 / m as f64, negative: neg as f64 / m as f64 })
}

impl RegionPredicate for CoverHypothesis {
    fn in_region(&self, x: &[f64], buf: &mut Vec<f64>) -> Result<bool> {
        Ok(self.predict_with(x, buf)? == Label::Negative)
    }
}

/// Boosting by covering.
///
/// `region_fn` is called on the current conditioned source with the round
/// index. Starvation while conditioning ends the loop as if the guard had
/// fired.
pub fn cover_learner<S, F>(src: &mut S, mut region_fn: F, settings: &CoverSettings) -> Result<CoverResult>
where
    S: ExampleSource + ?Sized,
    F: FnMut(&mut dyn ExampleSource, usize) -> Result<RegionOutcome>,
{
    let eps = settings.epsilon;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1/2), got {eps}")));
    }
    if !(settings.gamma > 0.0 && settings.gamma <= 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1], got {}", settings.gamma)));
    }
    let n = src.dim();
    let radius = src.radius();
    let m_guard = settings.guard_samples();

    let all = CoverHypothesis::new(n, radius);
    let bias = estimate_joint(src, &all, m_guard)?;
    for (mass, b) in [(bias.positive, Label::Positive), (bias.negative, Label::Negative)] {
        if mass <= 5.0 * eps {
            return Ok(CoverResult {
                hypothesis: CoverHypothesis::constant(n, radius, b.flip()),
                tag: TerminationTag::Constant,
                bias,
                final_guard: None,
                rounds: Vec::new(),
                region_calls: 0,
                attempts: 0,
            });
        }
    }

    let mut h = all;
    let mut accepted: Vec<HalfspaceHypothesis> = Vec::new();
    let mut rounds = Vec::new();
    let mut region_calls = 0;
    let mut attempts = 0;
    let limit = settings.round_limit();
    let mut guard = bias;
    let mut t = 0usize;
    let tag = loop {
        if !((t as f64) < limit && guard.positive.min(guard.negative) >= eps) {
            break TerminationTag::RetGood;
        }
        let mut cond = RegionConditioned::new(src, &accepted);
        region_calls += 1;
        let outcome = match region_fn(&mut cond, t) {
            Ok(o) => o,
            Err(Error::Starvation { .. }) => {
                rounds.push(CoverRound {
                    round: t,
                    guard,
                    attempts: 0,
                    outcome: RoundOutcome::Starved,
                    learner_report: None,
                    recheck: None,
                });
                break TerminationTag::RetGood;
            }
            Err(e) => return Err(e),
        };
        attempts += outcome.attempts().len();
        let n_attempts = outcome.attempts().len();
        let (g, report) = match outcome {
            RegionOutcome::Exhausted { .. } => {
                rounds.push(CoverRound {
                    round: t,
                    guard,
                    attempts: n_attempts,
                    outcome: RoundOutcome::Exhausted,
                    learner_report: None,
                    recheck: None,
                });
                break TerminationTag::RetBad;
            }
            RegionOutcome::Found { hypothesis, report, .. } => (hypothesis, report),
        };
        let recheck = match check_good(&g, &mut cond, eps, settings.gamma, settings.m_check) {
            Ok(r) => r,
            Err(Error::Starvation { .. }) => {
                rounds.push(CoverRound {
                    round: t,
                    guard,
                    attempts: n_attempts,
                    outcome: RoundOutcome::Starved,
                    learner_report: Some(report),
                    recheck: None,
                });
                break TerminationTag::RetGood;
            }
            Err(e) => return Err(e),
        };
        let pass = recheck.pass;
        rounds.push(CoverRound {
            round: t,
            guard,
            attempts: n_attempts,
            outcome: if pass { RoundOutcome::Accepted } else { RoundOutcome::RecheckFailed },
            learner_report: Some(report),
            recheck: Some(recheck),
        });
        if !pass {
            break TerminationTag::RetBad;
        }
        h.push(g.clone())?;
        accepted.push(g);
        t += 1;
        guard = estimate_joint(src, &h, m_guard)?;
        log::info!("round {t}: joint masses +{:.4} / -{:.4}", guard.positive, guard.negative);
    };
    Ok(CoverResult { hypothesis: h, tag, bias, final_guard: Some(guard), rounds, region_calls, attempts })
}

/// Empirical joint error rates over `m` fresh draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorRates {
    /// `Pr[f = −1 ∧ h = +1]`.
    pub false_pos: f64,
    /// `Pr[f = +1 ∧ h = −1]`.
    pub false_neg: f64,
    pub total: f64,
    pub samples: usize,
}

pub fn error_decomposition<C, S>(h: &C, src: &mut S, m: usize) -> Result<ErrorRates>
where
    C: Classifier + ?Sized,
    S: ExampleSource + ?Sized,
{
    if m == 0 {
        return Err(Error::domain("error decomposition needs m >= 1"));
    }
    let sample = (0..m).map(|_| src.draw()).collect::<Result<Vec<_>>>()?;
    error_on(h, &sample)
}

/// Error rates of `h` on a fixed labeled sample.
pub fn error_on<C: Classifier + ?Sized>(h: &C, sample: &[Example]) -> Result<ErrorRates> {
    if sample.is_empty() {
        return Err(Error::domain("empty evaluation sample"));
    }
    let (mut fp, mut fneg) = (0usize, 0usize);
    for e in sample {
        match (e.label, h.predict(&e.x)?) {
            (Label::Negative, Label::Positive) => fp += 1,
            (Label::Positive, Label::Negative) => fneg += 1,
            _ => {}
        }
    }
    let m = sample.len() as f64;
    Ok(ErrorRates {
        false_pos: fp as f64 / m,
        false_neg: fneg as f64 / m,
        total: (fp + fneg) as f64 / m,
        samples: sample.len(),
    })
}

/// A weak hypothesis as a voter.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Voter {
    /// Votes the label everywhere.
    Constant(Label),
    /// Votes −1 inside `{h = −1}`, abstains elsewhere.
    Region(WeakRegion),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeakRegion {
    Lifted(HalfspaceHypothesis),
    Intersection(TargetIntersection),
}

impl WeakRegion {
    fn inside(&self, x: &[f64]) -> Result<bool> {
        let label = match self {
            WeakRegion::Lifted(h) => h.predict(x)?,
            WeakRegion::Intersection(f) => f.evaluate(x)?,
        };
        Ok(label == Label::Negative)
    }
}

impl Voter {
    /// `+1`, `−1` or `0` (abstain).
    pub fn vote(&self, x: &[f64]) -> Result<f64> {
        match self {
            Voter::Constant(l) => Ok(l.as_f64()),
            Voter::Region(r) => Ok(if r.inside(x)? { -1.0 } else { 0.0 }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedBoostHypothesis {
    n: usize,
    rounds: Vec<(Voter, f64)>,
}

impl WeightedBoostHypothesis {
    pub fn rounds(&self) -> &[(Voter, f64)] {
        &self.rounds
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n, x.len())?;
        let mut s = 0.0;
        for (v, a) in &self.rounds {
            s += a * v.vote(x)?;
        }
        Ok(s)
    }
}

impl Classifier for WeightedBoostHypothesis {
    fn dim(&self) -> usize {
        self.n
    }

    fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_sign(self.score(x)? >= 0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoostSettings {
    pub epsilon: f64,
    pub rounds_budget: usize,
    /// Weak-learner calls per round before stalling.
    pub attempts_per_round: usize,
    /// Weighted training pool drawn once from the source.
    pub pool_size: usize,
    /// Size of each resampled training multiset.
    pub multiset_size: usize,
    pub holdout_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoostRound {
    pub round: usize,
    pub fallback: bool,
    pub attempts: usize,
    pub edge: f64,
    pub alpha: f64,
    /// Normaliser of the weight update; the exponential loss shrinks by this factor.
    pub z: f64,
    pub potential: f64,
    pub train_error: f64,
    pub holdout_error: f64,
}

#[derive(Clone, Debug)]
pub struct BoostResult {
    pub hypothesis: WeightedBoostHypothesis,
    pub rounds: Vec<BoostRound>,
    pub holdout: ErrorRates,
    pub converged: bool,
}

/// Boosting by resampling with abstaining voters.
///
/// The weak learner sees a uniform source over a resampled multiset and
/// returns a region or `None`. When one label carries ≥ 2/3 of the weight the
/// round uses a constant voter instead.
pub fn weighted_boost<S, F>(src: &mut S, mut weak_fn: F, settings: &BoostSettings, seed: u64) -> Result<BoostResult>
where
    S: ExampleSource + ?Sized,
    F: FnMut(&mut EmpiricalSource, usize, u64) -> Result<Option<WeakRegion>>,
{
    if settings.rounds_budget == 0 || settings.attempts_per_round == 0 {
        return Err(Error::domain("boosting needs a positive round and attempt budget"));
    }
    if settings.pool_size == 0 || settings.multiset_size == 0 || settings.holdout_size == 0 {
        return Err(Error::domain("boosting sample sizes must be positive"));
    }
    let n = src.dim();
    let radius = src.radius();
    let pool = (0..settings.pool_size).map(|_| src.draw()).collect::<Result<Vec<_>>>()?;
    let holdout = (0..settings.holdout_size).map(|_| src.draw()).collect::<Result<Vec<_>>>()?;
    let m = pool.len();
    let smooth = 1.0 / (2.0 * m as f64);
    let mut weights = vec![1.0 / m as f64; m];
    let mut pool_score = vec![0.0; m];
    let mut hold_score = vec![0.0; holdout.len()];
    let mut resample_rng = rng::split(seed, 0xB0);
    let mut hyp = WeightedBoostHypothesis { n, rounds: Vec::new() };
    let mut records = Vec::new();
    let mut potential = 1.0;
    let dist_err = |scores: &[f64], sample: &[Example]| {
        let wrong = scores.iter().zip(sample).filter(|(s, e)| Label::from_sign(**s >= 0.0) != e.label).count();
        wrong as f64 / sample.len() as f64
    };

    for round in 0..settings.rounds_budget {
        let w_pos: f64 = pool.iter().zip(&weights).filter(|(e, _)| e.label == Label::Positive).map(|(_, w)| w).sum();
        let fallback = if w_pos >= 2.0 / 3.0 {
            Some(Label::Positive)
        } else if 1.0 - w_pos >= 2.0 / 3.0 {
            Some(Label::Negative)
        } else {
            None
        };
        let mut chosen = None;
        let mut tries = 0;
        if let Some(b) = fallback {
            let votes: Vec<f64> = vec![b.as_f64(); m];
            chosen = Some((Voter::Constant(b), votes));
        } else {
            while tries < settings.attempts_per_round {
                let idx = resample(&weights, settings.multiset_size, &mut resample_rng);
                let multiset: Vec<Example> = idx.iter().map(|&i| pool[i].clone()).collect();
                let mut emp = EmpiricalSource::new(multiset, radius, derive_seed(seed, (round * 1000 + tries) as u64))?;
                let call_seed = derive_seed(seed ^ 0xC411, (round * 1000 + tries) as u64);
                tries += 1;
                let Some(region) = (match weak_fn(&mut emp, round, call_seed) {
                    Ok(r) => r,
                    Err(Error::Starvation { .. }) => None,
                    Err(e) => return Err(e),
                }) else {
                    continue;
                };
                let voter = Voter::Region(region);
                let votes = pool.iter().map(|e| voter.vote(&e.x)).collect::<Result<Vec<_>>>()?;
                let (wp, wm) = signed_mass(&pool, &weights, &votes);
                if wp > wm {
                    chosen = Some((voter, votes));
                    break;
                }
            }
        }
        let Some((voter, votes)) = chosen else {
            return Err(Error::BoostStall {
                round,
                reason: format!("no positive-edge weak hypothesis in {tries} attempts"),
            });
        };
        let (wp, wm) = signed_mass(&pool, &weights, &votes);
        let edge = 0.5 * (wp - wm);
        let alpha = 0.5 * ((wp + smooth) / (wm + smooth)).ln();
        let mut z = 0.0;
        for ((w, e), c) in weights.iter_mut().zip(&pool).zip(&votes) {
            *w *= (-alpha * e.label.as_f64() * c).exp();
            z += *w;
        }
        for w in weights.iter_mut() {
            *w /= z;
        }
        potential *= z;
        for (s, c) in pool_score.iter_mut().zip(&votes) {
            *s += alpha * c;
        }
        for (s, e) in hold_score.iter_mut().zip(&holdout) {
            *s += alpha * voter.vote(&e.x)?;
        }
        hyp.rounds.push((voter, alpha));
        let train_error = dist_err(&pool_score, &pool);
        let holdout_error = dist_err(&hold_score, &holdout);
        log::info!("boost round {round}: edge {edge:.4} alpha {alpha:.4} holdout {holdout_error:.4}");
        records.push(BoostRound {
            round,
            fallback: fallback.is_some(),
            attempts: tries,
            edge,
            alpha,
            z,
            potential,
            train_error,
            holdout_error,
        });
        if holdout_error <= settings.epsilon {
            let rates = error_on(&hyp, &holdout)?;
            return Ok(BoostResult { hypothesis: hyp, rounds: records, holdout: rates, converged: true });
        }
    }
    let rates = error_on(&hyp, &holdout)?;
    Ok(BoostResult { hypothesis: hyp, rounds: records, holdout: rates, converged: false })
}

/// Weighted mass voted correctly and incorrectly; abstentions count for neither.
fn signed_mass(pool: &[Example], weights: &[f64], votes: &[f64]) -> (f64, f64) {
    let (mut wp, mut wm) = (0.0, 0.0);
    for ((e, w), c) in pool.iter().zip(weights).zip(votes) {
        let m = e.label.as_f64() * c;
        if m > 0.0 {
            wp += w;
        } else if m < 0.0 {
            wm += w;
        }
    }
    (wp, wm)
}

/// `count` indices drawn with probability proportional to `weights`.
fn resample<R: rand::Rng>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    (0..count)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{make_sphere_margin_source, SourceSpec};
    use crate::geometry::{lift_halfspace, Halfspace};
    use crate::learner::{AttemptRecord, RegionOutcome};

    fn lifted(h: &Halfspace, r: f64) -> HalfspaceHypothesis {
        HalfspaceHypothesis::new(lift_halfspace(h, r).unwrap().into_coords(), r).unwrap()
    }

    #[test]
    fn cover_evaluation_examples() {
        let h = CoverHypothesis::new(2, 1.0);
        assert_eq!(evaluate_cover(&h, &[0.3, -0.2]).unwrap(), Label::Positive);
        let mut h = CoverHypothesis::new(2, 1.0);
        h.push(lifted(&Halfspace::new(vec![1.0, 0.0], 0.0).unwrap(), 1.0)).unwrap();
        h.push(lifted(&Halfspace::new(vec![0.0, 1.0], 0.0).unwrap(), 1.0)).unwrap();
        assert_eq!(evaluate_cover(&h, &[0.5, 0.5]).unwrap(), Label::Positive);
        assert_eq!(evaluate_cover(&h, &[0.5, -0.5]).unwrap(), Label::Negative);
        assert_eq!(evaluate_cover(&h, &[-0.5, 0.5]).unwrap(), Label::Negative);
        assert!(evaluate_cover(&h, &[0.5]).is_err());
        let none = CoverHypothesis::constant(2, 1.0, Label::Negative);
        assert_eq!(evaluate_cover(&none, &[0.5, 0.5]).unwrap(), Label::Negative);
    }

    #[test]
    fn single_region_matches_target() {
        let mut src = make_sphere_margin_source(3, 1, 0.1, 2, 0.5).unwrap();
        let f = src.target_function().clone();
        let mut h = CoverHypothesis::new(3, 1.0);
        h.push(lifted(&f.halfspaces()[0], 1.0)).unwrap();
        let r = error_decomposition(&h, &mut src, 10_000).unwrap();
        assert_eq!(r.total, 0.0);
        let r = error_decomposition(&f, &mut src, 1000).unwrap();
        assert_eq!((r.false_pos, r.false_neg, r.total), (0.0, 0.0, 0.0));
        let neg = CoverHypothesis::constant(3, 1.0, Label::Negative);
        let r = error_decomposition(&neg, &mut src, 10_000).unwrap();
        assert_eq!(r.false_pos, 0.0);
        assert!((r.false_neg - 0.5).abs() < 0.03 && r.total == r.false_neg);
    }

    #[test]
    fn cover_record_round_trip() {
        let mut h = CoverHypothesis::new(2, 1.5);
        h.push(HalfspaceHypothesis::new(vec![0.1, -0.2, 0.3, 0.4], 1.5).unwrap()).unwrap();
        let text = h.to_record(vec!["seed 1".into()]).to_text();
        let back = CoverHypothesis::from_record(&HalfspaceRecord::parse(&text).unwrap()).unwrap();
        assert_eq!(back, h);
    }

    fn planted_region_fn(f: TargetIntersection) -> impl FnMut(&mut dyn ExampleSource, usize) -> Result<RegionOutcome> {
        // hands out the target's faces in order
        move |_src, round| {
            let hs = &f.halfspaces()[round % f.k()];
            let hypothesis = lifted(hs, f.radius());
            let report = GoodnessReport {
                p_neg_region: 0.0,
                p_correct_given_region: 1.0,
                region_samples: 0,
                samples_used: 0,
                pass: true,
            };
            let attempts = vec![AttemptRecord { attempt: 0, feasible: true, failure: None, report: Some(report.clone()) }];
            Ok(RegionOutcome::Found { hypothesis, report, attempts })
        }
    }

    #[test]
    fn cover_with_perfect_regions_reaches_zero_error() {
        let mut src = make_sphere_margin_source(3, 2, 0.2, 5, 0.4).unwrap();
        let f = src.target_function().clone();
        let s = CoverSettings { epsilon: 0.05, gamma: 0.1, m_check: crate::learner::min_check_samples(0.05, 0.1) };
        let res = cover_learner(&mut src, planted_region_fn(f), &s).unwrap();
        assert_eq!(res.tag, TerminationTag::RetGood);
        assert_eq!(res.hypothesis.halfspaces().len(), 2);
        assert!(res.region_calls <= s.max_regions());
        let r = error_decomposition(&res.hypothesis, &mut src, 10_000).unwrap();
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn cover_constant_shortcut() {
        let spec = SourceSpec::sphere(3, 3, 0.1, 0.15);
        let mut src = spec.build(2).unwrap();
        let s = CoverSettings { epsilon: 0.05, gamma: 0.1, m_check: 20_000 };
        let res = cover_learner(
            &mut src,
            |_: &mut dyn ExampleSource, _| panic!("the region learner must not run"),
            &s,
        )
        .unwrap();
        assert_eq!(res.tag, TerminationTag::Constant);
        let r = error_decomposition(&res.hypothesis, &mut src, 10_000).unwrap();
        assert!(r.total <= 6.0 * 0.05);
    }

    #[test]
    fn exhausted_learner_gives_ret_bad() {
        let mut src = make_sphere_margin_source(3, 2, 0.2, 5, 0.5).unwrap();
        let s = CoverSettings { epsilon: 0.05, gamma: 0.1, m_check: 20_000 };
        let res = cover_learner(&mut src, |_: &mut dyn ExampleSource, _| Ok(RegionOutcome::Exhausted { attempts: vec![] }), &s)
            .unwrap();
        assert_eq!(res.tag, TerminationTag::RetBad);
        assert_eq!(res.hypothesis.regions(), &[CoverRegion::All]);
    }

    #[test]
    fn guard_sample_size() {
        let s = CoverSettings { epsilon: 0.05, gamma: 0.02, m_check: 1 };
        assert_eq!(s.max_regions(), (50.0 * 20f64.log2()).ceil() as usize);
        let delta = 0.01 / (s.max_regions() as f64 + 2.0);
        let expect = ((4.0 / delta).ln() / (2.0 * (0.05f64 / 3.0).powi(2))).ceil() as usize;
        assert_eq!(s.guard_samples(), expect);
    }

    #[test]
    fn boost_with_target_converges_in_one_round() {
        let mut src = make_sphere_margin_source(2, 2, 0.2, 3, 0.4).unwrap();
        let f = src.target_function().clone();
        let s = BoostSettings {
            epsilon: 0.05,
            rounds_budget: 5,
            attempts_per_round: 1,
            pool_size: 2000,
            multiset_size: 2000,
            holdout_size: 5000,
        };
        let res = weighted_boost(&mut src, |_, _, _| Ok(Some(WeakRegion::Intersection(f.clone()))), &s, 0).unwrap();
        assert!(res.converged);
        assert_eq!(res.rounds.len(), 1);
        assert_eq!(res.holdout.total, 0.0);
    }

    #[test]
    fn boost_fallback_on_biased_source() {
        let mut src = SourceSpec::sphere(3, 3, 0.1, 0.1).build(4).unwrap();
        let s = BoostSettings {
            epsilon: 0.01,
            rounds_budget: 1,
            attempts_per_round: 1,
            pool_size: 4000,
            multiset_size: 100,
            holdout_size: 100,
        };
        let res = weighted_boost(&mut src, |_, _, _| panic!("fallback expected"), &s, 0).unwrap();
        let r = &res.rounds[0];
        assert!(r.fallback);
        assert!(r.edge >= 0.35, "edge {}", r.edge);
        assert_eq!(res.hypothesis.rounds()[0].0, Voter::Constant(Label::Negative));
    }

    #[test]
    fn boost_stalls_without_edge() {
        let mut src = make_sphere_margin_source(2, 1, 0.2, 3, 0.5).unwrap();
        let s = BoostSettings {
            epsilon: 0.01,
            rounds_budget: 3,
            attempts_per_round: 2,
            pool_size: 500,
            multiset_size: 500,
            holdout_size: 100,
        };
        let err = weighted_boost(&mut src, |_, _, _| Ok(None), &s, 0).unwrap_err();
        assert!(matches!(err, Error::BoostStall { round: 0, .. }));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn resample_respects_weights() {
        let mut r = rng::seeded(1);
        let idx = resample(&[0.0, 1.0, 0.0], 50, &mut r);
        assert!(idx.iter().all(|&i| i == 1));
    }
}
