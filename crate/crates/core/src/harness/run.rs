//! Subcommand implementations. Each writes its artifacts into the output
//! directory (created if missing) and returns the metrics it wrote.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;

use crate::booster::{
    cover_learner, error_on, weighted_boost, BoostResult, CoverHypothesis, CoverResult, ErrorRates, WeakRegion,
    WeightedBoostHypothesis,
};
use crate::distributions::{draw_many, read_csv, write_csv, Example, ExampleSource, LabeledSource};
use crate::error::{Error, Result};
use crate::geometry::{lift_point_into, soft_margin_estimate, Classifier, Label, TargetIntersection};
use crate::learner::{compute_params_with, region_learner, RegionOutcome, WeakParams};
use crate::record::{fmt_f64, HalfspaceRecord, RecordKind};
use crate::rng::derive_seed;
use crate::sampler::{find_interior, ConsistencyPolytope, WalkConfig, Walker};

use super::config::{ExperimentKind, RunConfig};
use super::metrics::{config_comments, write_json, write_json_lines, MetricsRecord};

/// Stream tag of the held-out evaluation sample.
const HOLDOUT_STREAM: u64 = 1;
/// Stream tag for `eval` without a data file.
const EVAL_STREAM: u64 = 2;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}

/// `x0..,label,prediction` rows.
pub fn write_predictions<W: Write>(mut out: W, sample: &[Example], predictions: &[Label], comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let n = sample.first().map_or(0, |e| e.x.len());
    let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    header.push("prediction".into());
    writeln!(out, "{}", header.join(","))?;
    for (e, p) in sample.iter().zip(predictions) {
        let mut row: Vec<String> = e.x.iter().map(|v| fmt_f64(*v)).collect();
        row.push(e.label.to_string());
        row.push(p.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a predictions CSV back as `(label, prediction)` pairs.
pub fn read_predictions(path: &Path) -> Result<Vec<(Label, Label)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse(format!("missing {name} column")))
    };
    let (lc, pc) = (col("label")?, col("prediction")?);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        out.push((Label::parse(&rec[lc])?, Label::parse(&rec[pc])?));
    }
    Ok(out)
}

/// Error rates from `(label, prediction)` pairs, counted the same way as [`error_on`].
pub fn rates_from_pairs(pairs: &[(Label, Label)]) -> Result<ErrorRates> {
    if pairs.is_empty() {
        return Err(Error::domain("no predictions"));
    }
    let fp = pairs.iter().filter(|p| **p == (Label::Negative, Label::Positive)).count();
    let fneg = pairs.iter().filter(|p| **p == (Label::Positive, Label::Negative)).count();
    let m = pairs.len() as f64;
    Ok(ErrorRates { false_pos: fp as f64 / m, false_neg: fneg as f64 / m, total: (fp + fneg) as f64 / m, samples: pairs.len() })
}

fn predict_all<C: Classifier + ?Sized>(h: &C, sample: &[Example]) -> Result<Vec<Label>> {
    sample.iter().map(|e| h.predict(&e.x)).collect()
}

fn weak_params(cfg: &RunConfig, src: &LabeledSource, epsilon: f64) -> Result<(WeakParams, f64)> {
    let rho = cfg.learner.resolve_rho(src)?;
    let k = cfg.learner.resolve_k(src);
    let params = compute_params_with(src.dim(), k, rho, epsilon, cfg.learner.overrides())?;
    Ok((params, rho))
}

/// Everything a learn-cover run produces, before it is written anywhere.
pub struct CoverExperiment {
    pub source: LabeledSource,
    pub params: WeakParams,
    pub result: CoverResult,
    /// Every repetition's validation error, when there was more than one.
    pub validation_errors: Vec<f64>,
    pub holdout: Vec<Example>,
    pub predictions: Vec<Label>,
    pub rates: ErrorRates,
    pub rho: f64,
    pub eta_hat: f64,
    pub eta_analytic: Option<f64>,
    pub samples_consumed: u64,
}

pub fn cover_experiment(cfg: &RunConfig) -> Result<CoverExperiment> {
    let seed = cfg.run.seed;
    let mut src = cfg.source.build(seed)?;
    let (params, rho) = weak_params(cfg, &src, cfg.learner.epsilon)?;
    let rs = cfg.learner.region_settings();
    let cs = cfg.learner.cover_settings();
    let reps = cfg.cover.repetitions;
    let mut best: Option<(f64, CoverResult)> = None;
    let mut validation_errors = Vec::new();
    for rep in 0..reps {
        let rep_seed = derive_seed(seed, rep as u64);
        let res = cover_learner(
            &mut src,
            |s, round| region_learner(s, &params, &rs, derive_seed(rep_seed, round as u64)),
            &cs,
        )?;
        info!("repetition {rep}: tag {} with {} regions", res.tag, res.hypothesis.halfspaces().len());
        if reps == 1 {
            best = Some((0.0, res));
            break;
        }
        let val = draw_many(&mut src, cfg.cover.validation_size)?;
        let err = error_on(&res.hypothesis, &val)?.total;
        validation_errors.push(err);
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, res));
        }
    }
    let (_, result) = best.expect("at least one repetition");
    let samples_consumed = src.consumed();
    let holdout = draw_many(&mut src.fork(HOLDOUT_STREAM), cfg.eval.holdout)?;
    let predictions = predict_all(&result.hypothesis, &holdout)?;
    let rates = error_on(&result.hypothesis, &holdout)?;
    let points: Vec<Vec<f64>> = holdout.iter().map(|e| e.x.clone()).collect();
    let eta_hat = soft_margin_estimate(src.target_function(), &points, rho.min(1.0))?;
    let eta_analytic = src.band_mass(rho);
    Ok(CoverExperiment {
        source: src,
        params,
        result,
        validation_errors,
        holdout,
        predictions,
        rates,
        rho,
        eta_hat,
        eta_analytic,
        samples_consumed,
    })
}

pub struct BoostExperiment {
    pub source: LabeledSource,
    pub params: WeakParams,
    pub result: BoostResult,
    pub holdout: Vec<Example>,
    pub predictions: Vec<Label>,
    pub rates: ErrorRates,
    pub samples_consumed: u64,
}

pub fn boost_experiment(cfg: &RunConfig) -> Result<BoostExperiment> {
    let seed = cfg.run.seed;
    let mut src = cfg.source.build(seed)?;
    let (params, _) = weak_params(cfg, &src, cfg.boost.region_epsilon)?;
    let rs = cfg.boost.region_settings(&cfg.learner);
    let result = weighted_boost(
        &mut src,
        |emp, _round, s| match region_learner(emp, &params, &rs, s)? {
            RegionOutcome::Found { hypothesis, .. } => Ok(Some(WeakRegion::Lifted(hypothesis))),
            RegionOutcome::Exhausted { .. } => Ok(None),
        },
        &cfg.boost.settings(),
        seed,
    )?;
    let samples_consumed = src.consumed();
    let holdout = draw_many(&mut src.fork(HOLDOUT_STREAM), cfg.eval.holdout)?;
    let predictions = predict_all(&result.hypothesis, &holdout)?;
    let rates = error_on(&result.hypothesis, &holdout)?;
    Ok(BoostExperiment { source: src, params, result, holdout, predictions, rates, samples_consumed })
}

fn write_target(dir: &Path, target: &TargetIntersection, comments: &[String]) -> Result<()> {
    fs::write(dir.join("target.txt"), target.to_record(comments.to_vec()).to_text())?;
    Ok(())
}

fn write_prediction_file(dir: &Path, sample: &[Example], predictions: &[Label], comments: &[String]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(dir.join("predictions.csv"))?);
    write_predictions(&mut out, sample, predictions, comments)?;
    out.flush()?;
    Ok(())
}

/// `gen`: `data.csv` and the target record.
pub fn run_gen(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = &cfg.run.output_dir;
    ensure_dir(dir)?;
    let mut src = cfg.source.build(cfg.run.seed)?;
    let sample = draw_many(&mut src, cfg.gen.samples)?;
    let comments = config_comments(cfg);
    let path = dir.join("data.csv");
    let mut out = BufWriter::new(fs::File::create(&path)?);
    write_csv(&mut out, &sample, &comments)?;
    out.flush()?;
    write_target(dir, src.target_function(), &comments)?;
    Ok(path)
}

pub fn run_learn_cover(cfg: &RunConfig) -> Result<MetricsRecord> {
    let dir = &cfg.run.output_dir;
    ensure_dir(dir)?;
    let t0 = Instant::now();
    let exp = cover_experiment(cfg)?;
    let wall = t0.elapsed().as_secs_f64();
    let comments = config_comments(cfg);
    let mut m = MetricsRecord::new(cfg, &exp.rates);
    m.eta_hat = Some(exp.eta_hat);
    m.eta_analytic = exp.eta_analytic;
    m.eta_plus_epsilon = Some(exp.eta_hat + cfg.learner.epsilon);
    m.termination_tag = Some(exp.result.tag);
    m.region_count = exp.result.hypothesis.halfspaces().len();
    m.rounds = exp.result.rounds.len();
    m.attempts = exp.result.attempts;
    m.samples_consumed = exp.samples_consumed;
    m.wall_time_s = wall;
    m.validate()?;
    write_json(&dir.join("metrics.json"), &m)?;
    write_json_lines(&dir.join("rounds.jsonl"), cfg, &exp.result.rounds)?;
    fs::write(dir.join("hypothesis.txt"), exp.result.hypothesis.to_record(comments.clone()).to_text())?;
    write_target(dir, exp.source.target_function(), &comments)?;
    write_prediction_file(dir, &exp.holdout, &exp.predictions, &comments)?;
    Ok(m)
}

#[derive(Serialize)]
struct BoostArtifact<'a> {
    config: &'a RunConfig,
    hypothesis: &'a WeightedBoostHypothesis,
}

pub fn run_learn_boost(cfg: &RunConfig) -> Result<MetricsRecord> {
    let dir = &cfg.run.output_dir;
    ensure_dir(dir)?;
    let t0 = Instant::now();
    let exp = boost_experiment(cfg)?;
    let wall = t0.elapsed().as_secs_f64();
    let comments = config_comments(cfg);
    let mut m = MetricsRecord::new(cfg, &exp.rates);
    m.epsilon = cfg.boost.epsilon;
    m.rounds = exp.result.rounds.len();
    m.attempts = exp.result.rounds.iter().map(|r| r.attempts).sum();
    m.region_count = exp.result.hypothesis.rounds().iter().filter(|(v, _)| matches!(v, crate::booster::Voter::Region(_))).count();
    m.converged = Some(exp.result.converged);
    m.samples_consumed = exp.samples_consumed;
    m.wall_time_s = wall;
    m.validate()?;
    write_json(&dir.join("metrics.json"), &m)?;
    write_json_lines(&dir.join("rounds.jsonl"), cfg, &exp.result.rounds)?;
    write_json(&dir.join("hypothesis.json"), &BoostArtifact { config: cfg, hypothesis: &exp.result.hypothesis })?;
    write_target(dir, exp.source.target_function(), &comments)?;
    write_prediction_file(dir, &exp.holdout, &exp.predictions, &comments)?;
    Ok(m)
}

/// One row of the walk trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagRow {
    pub index: usize,
    pub w: Vec<f64>,
    pub min_slack: f64,
}

/// Draws one weak-learning sample, builds its consistency body and records
/// successive hit-and-run samples with their slack.
pub fn sample_diag(cfg: &RunConfig) -> Result<Vec<DiagRow>> {
    let seed = cfg.run.seed;
    let mut src = cfg.source.build(seed)?;
    let (params, rho) = weak_params(cfg, &src, cfg.learner.epsilon)?;
    let n = src.dim();
    let radius = src.radius();
    let dim = n + 2;
    let (steps, slack_target) = cfg.learner.walk().resolve(dim, rho)?;
    let mut body = ConsistencyPolytope::new(dim);
    let mut buf = Vec::with_capacity(dim);
    for _ in 0..params.m_minus {
        lift_point_into(&src.draw_with_label(Label::Negative)?, radius, &mut buf)?;
        body.add_negative(&buf)?;
    }
    for _ in 0..params.m_plus {
        lift_point_into(&src.draw_with_label(Label::Positive)?, radius, &mut buf)?;
        body.add_positive(&buf)?;
    }
    let start = find_interior(&body, slack_target)?;
    let wc = WalkConfig { steps_per_sample: steps, warm_start: start, rng_seed: derive_seed(seed, 0xD1) };
    let mut walker = Walker::new(&body, &wc)?;
    (0..cfg.diag.samples)
        .map(|index| {
            let w = walker.sample()?;
            let min_slack = body.min_slack(&w)?;
            Ok(DiagRow { index, w, min_slack })
        })
        .collect()
}

pub fn run_sample_diag(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = &cfg.run.output_dir;
    ensure_dir(dir)?;
    let rows = sample_diag(cfg)?;
    let path = dir.join("walk.csv");
    let mut out = BufWriter::new(fs::File::create(&path)?);
    for c in config_comments(cfg) {
        writeln!(out, "# {c}")?;
    }
    let dim = rows.first().map_or(0, |r| r.w.len());
    let mut header = vec!["index".to_string()];
    header.extend((0..dim).map(|i| format!("w{i}")));
    header.push("min_slack".into());
    writeln!(out, "{}", header.join(","))?;
    for r in &rows {
        let mut row = vec![r.index.to_string()];
        row.extend(r.w.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(r.min_slack));
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(path)
}

/// A reloaded hypothesis of either record kind.
pub enum LoadedHypothesis {
    Target(TargetIntersection),
    Cover(CoverHypothesis),
}

impl Classifier for LoadedHypothesis {
    fn dim(&self) -> usize {
        match self {
            LoadedHypothesis::Target(t) => t.dim(),
            LoadedHypothesis::Cover(c) => c.dim(),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<Label> {
        match self {
            LoadedHypothesis::Target(t) => t.predict(x),
            LoadedHypothesis::Cover(c) => c.predict(x),
        }
    }
}

pub fn load_hypothesis(path: &Path) -> Result<LoadedHypothesis> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let rec = HalfspaceRecord::parse(&text)?;
    Ok(match rec.kind {
        RecordKind::Target => LoadedHypothesis::Target(TargetIntersection::from_record(&rec)?),
        RecordKind::Cover => LoadedHypothesis::Cover(CoverHypothesis::from_record(&rec)?),
    })
}

/// `eval`: error rates of a stored hypothesis on a CSV or on fresh draws.
pub fn run_eval(cfg: &RunConfig) -> Result<MetricsRecord> {
    let dir = &cfg.run.output_dir;
    ensure_dir(dir)?;
    let t0 = Instant::now();
    let hyp_path = cfg
        .eval
        .hypothesis
        .as_deref()
        .ok_or_else(|| Error::Config("eval needs eval.hypothesis (or --hypothesis)".into()))?;
    let h = load_hypothesis(hyp_path)?;
    let sample = match &cfg.eval.data {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))?;
            read_csv(std::io::BufReader::new(f))?
        }
        None => draw_many(&mut cfg.source.build(cfg.run.seed)?.fork(EVAL_STREAM), cfg.eval.holdout)?,
    };
    let predictions = predict_all(&h, &sample)?;
    let rates = error_on(&h, &sample)?;
    let mut m = MetricsRecord::new(cfg, &rates);
    m.region_count = match &h {
        LoadedHypothesis::Target(t) => t.k(),
        LoadedHypothesis::Cover(c) => c.halfspaces().len(),
    };
    m.wall_time_s = t0.elapsed().as_secs_f64();
    m.validate()?;
    write_json(&dir.join("metrics.json"), &m)?;
    write_prediction_file(dir, &sample, &predictions, &config_comments(cfg))?;
    Ok(m)
}

/// Dispatches on `cfg.run.kind`. `paper-check` goes through
/// [`super::acceptance::paper_check`] instead.
pub fn run_experiment(cfg: &RunConfig) -> Result<()> {
    match cfg.run.kind {
        ExperimentKind::Gen => run_gen(cfg).map(drop),
        ExperimentKind::LearnCover => run_learn_cover(cfg).map(drop),
        ExperimentKind::LearnBoost => run_learn_boost(cfg).map(drop),
        ExperimentKind::SampleDiag => run_sample_diag(cfg).map(drop),
        ExperimentKind::Eval => run_eval(cfg).map(drop),
        ExperimentKind::PaperCheck => Err(Error::Config("paper-check is not a single experiment".into())),
    }
}
