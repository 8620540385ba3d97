use mixmu::config::RunConfig;
use mixmu::pipeline::Study;
use mixmu::synthesis::{bandpass_tf, SynthesisObjective};
use mixmu::uncertainty::Variant;

fn m11_study(seed: u64) -> Study {
    let cfg = RunConfig {
        seed,
        variant: Variant::M11,
        ..RunConfig::default()
    };
    Study::synthetic(&cfg).unwrap()
}

#[test]
fn seeds_agree_within_five_percent() {
    let a = m11_study(1);
    let b = m11_study(2);
    let ra = a.synthesize(&a.plant(&Variant::M11).unwrap()).unwrap();
    let rb = b.synthesize(&b.plant(&Variant::M11).unwrap()).unwrap();
    let rel = (ra.mu_peak - rb.mu_peak).abs() / ra.mu_peak.min(rb.mu_peak);
    assert!(rel <= 0.05, "{} vs {}", ra.mu_peak, rb.mu_peak);
}

#[test]
fn history_is_monotone_and_reported_peak_is_cold() {
    let mut cfg = RunConfig {
        variant: Variant::M01,
        ..RunConfig::default()
    };
    cfg.synthesis.options.restarts = 3;
    cfg.synthesis.options.max_evals_per_restart = 40;
    let study = Study::synthetic(&cfg).unwrap();
    let plant = study.plant(&Variant::M01).unwrap();
    let res = study.synthesize(&plant).unwrap();
    assert!(!res.history.is_empty());
    for w in res.history.windows(2) {
        assert!(w[1] <= w[0], "{} after {}", w[1], w[0]);
    }
    assert_eq!(res.restart_best.len(), 3);
    let best = res.restart_best.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(*res.history.last().unwrap(), best);
    assert!(res.evaluations <= 3 * 40 + 3 * 5);

    let c = bandpass_tf(&res.params).unwrap();
    let profile = study.mu_profile(&plant, &c).unwrap();
    assert!((profile.peak_upper - res.mu_peak).abs() <= 1e-9 * res.mu_peak);
    let bounds = study.bounds().unwrap();
    let mut objective = SynthesisObjective::new(&plant, &study.weight().unwrap(), &study.grid, &bounds).unwrap();
    assert!((objective.value(&res.params) - res.mu_peak).abs() <= 1e-3 * res.mu_peak);
}
