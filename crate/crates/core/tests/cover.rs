use intersect_core::booster::{cover_learner, error_decomposition, RoundOutcome, TerminationTag};
use intersect_core::distributions::SourceSpec;
use intersect_core::harness::acceptance::hard_margin_config;
use intersect_core::harness::run::cover_experiment;
use intersect_core::learner::{compute_params_with, region_learner, ParamOverrides, RegionSettings, WalkSettings};
use intersect_core::rng::derive_seed;
use intersect_core::Label;

/// A pancake whose slab is far thinner than the slack the walk demands:
/// every attempt is infeasible, the learner exhausts, and the booster
/// returns its current (all-positive) hypothesis.
#[test]
fn thin_pancake_ends_ret_bad_with_few_false_negatives() {
    let eps = 0.05;
    let spec = SourceSpec::Pancake { n: 3, gap: 0.002, sigma: 0.0002, spread: 1.0 };
    let mut src = spec.build(11).unwrap();
    // nearly all negatives sit within 0.1 of the boundary
    assert!(src.band_mass(0.1).unwrap() > 0.45);
    let params = compute_params_with(3, 1, 0.1, eps, ParamOverrides { m_minus: Some(8), m_plus: Some(500) }).unwrap();
    let rs = RegionSettings { epsilon: eps, gamma: 0.05, attempt_budget: 5, m_check: None, walk: WalkSettings::default() };
    let cs = intersect_core::booster::CoverSettings { epsilon: eps, gamma: 0.05, m_check: rs.m_check() };
    let res = cover_learner(&mut src, |s, round| region_learner(s, &params, &rs, derive_seed(5, round as u64)), &cs).unwrap();
    assert_eq!(res.tag, TerminationTag::RetBad);
    assert_eq!(res.rounds.last().unwrap().outcome, RoundOutcome::Exhausted);
    let guard = res.final_guard.unwrap();
    assert!(guard.positive.min(guard.negative) >= eps / 2.0, "{guard:?}");

    let mut held_out = src.fork(1);
    let rates = error_decomposition(&res.hypothesis, &mut held_out, 10_000).unwrap();
    let sigma = (eps * (1.0 - eps) / 10_000.0f64).sqrt();
    assert!(rates.false_neg <= eps + 3.0 * sigma, "{rates:?}");
}

#[test]
fn biased_source_takes_the_constant_shortcut() {
    let mut cfg = hard_margin_config(21);
    cfg.source = SourceSpec::sphere(3, 2, 0.2, 0.1);
    let exp = cover_experiment(&cfg).unwrap();
    assert_eq!(exp.result.tag, TerminationTag::Constant);
    assert_eq!(exp.result.region_calls, 0);
    assert!(exp.holdout.iter().zip(&exp.predictions).all(|(_, p)| *p == Label::Negative));
    assert!(exp.rates.total <= 6.0 * cfg.learner.epsilon);
}

/// Each accepted region removes at least about a γ fraction of what is left.
#[test]
fn accepted_rounds_shrink_the_positive_region() {
    let cfg = hard_margin_config(204);
    let gamma = cfg.learner.gamma;
    let exp = cover_experiment(&cfg).unwrap();
    let rounds = &exp.result.rounds;
    let fin = exp.result.final_guard.unwrap();
    let mut masses: Vec<f64> = rounds.iter().map(|r| r.guard.positive + r.guard.negative).collect();
    masses.push(fin.positive + fin.negative);
    let mut checked = 0;
    for (i, r) in rounds.iter().enumerate() {
        if r.outcome == RoundOutcome::Accepted {
            assert!(masses[i + 1] <= (1.0 - gamma) * masses[i] + 0.03, "round {i}: {} -> {}", masses[i], masses[i + 1]);
            checked += 1;
        }
    }
    let regions = exp.result.hypothesis.halfspaces().len();
    assert_eq!(checked, regions);
    assert!(regions >= 1);
    assert!(regions <= cfg.learner.cover_settings().max_regions());
    assert!(exp.result.region_calls <= cfg.learner.cover_settings().max_regions());
}
