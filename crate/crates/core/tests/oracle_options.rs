use harmtrace::manifest::InputManifest;
use harmtrace::stats::DedupMode;
use harmtrace::synth::{generate, SynthConfig};
use harmtrace::verify::verify_run;

fn check(seed: u64, tweak: impl Fn(&mut harmtrace::manifest::RunConfig)) {
    let dir = tempfile::tempdir().unwrap();
    let dataset = generate(&SynthConfig {
        seed,
        n_papers: 400,
        ..SynthConfig::default()
    })
    .unwrap();
    let data = dir.path().join("data");
    let manifest = dataset.write_to(&data).unwrap();
    let mut cfg = InputManifest::load(&manifest).unwrap().resolve(&data);
    cfg.output = dir.path().join("out");
    tweak(&mut cfg);
    let report = verify_run(&cfg, Some(&dataset.truth), format!("seed {seed}")).unwrap();
    assert!(report.passed, "{:#?}", report.failures());
}

#[test]
fn repeats_only() {
    check(21, |c| c.dedup = DedupMode::RepeatsOnly);
}

#[test]
fn dedup_only_short_horizon() {
    check(22, |c| {
        c.dedup = DedupMode::DedupOnly;
        c.max_distance = 2;
    });
}

#[test]
fn self_included_in_cohort() {
    check(23, |c| c.self_exclude = false);
}

#[test]
fn year_only_dates_excluded_from_timing() {
    check(24, |c| c.exclude_year_only = true);
}

#[test]
fn single_hop() {
    check(25, |c| c.max_distance = 1);
}
