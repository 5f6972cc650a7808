use pairspec::config::parse_suite_config;
use pairspec::testbed::{run_suite, ApproximationConfig, SuiteConfig, CHECK_NAMES};
use pairspec::Error;

#[test]
fn hundred_trials_pass_at_default_tolerances() {
    let cfg = SuiteConfig {
        trials: 100,
        sizes: vec![4, 8, 16],
        dims: vec![2],
        approximation: ApproximationConfig { enabled: false, ..Default::default() },
        ..Default::default()
    };
    let report = run_suite(&cfg).unwrap();
    let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
    assert!(failed.is_empty(), "{}", serde_json::to_string_pretty(&failed).unwrap());
    let cases = 100 * 3 * cfg.specs.len();
    assert!(report.checks.iter().all(|c| c.context["cases"] == cases));
}

#[test]
fn default_report_names_every_check() {
    let report = run_suite(&SuiteConfig::default()).unwrap();
    let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, CHECK_NAMES);
    assert!(report.all_passed());
    assert_eq!(report.summary.total, CHECK_NAMES.len());
    assert_eq!(report.config_echo, SuiteConfig::default());
}

#[test]
fn reports_are_reproducible_and_seed_dependent() {
    let cfg = parse_suite_config("trials = 2\nsizes = 5\napprox.enabled = false\njitter_gamma = true").unwrap();
    let a = serde_json::to_string(&run_suite(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_suite(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = SuiteConfig { master_seed: cfg.master_seed + 1, ..cfg };
    assert_ne!(a, serde_json::to_string(&run_suite(&other).unwrap()).unwrap());
}

#[test]
fn corrupted_gram_entry_is_caught() {
    let cfg = parse_suite_config("trials = 1\nsizes = 4\nfault.gram_delta = 1e-3\napprox.enabled = false").unwrap();
    let report = run_suite(&cfg).unwrap();
    let gram = report.check("gram_identity").unwrap();
    assert!(!gram.passed);
    assert!((gram.margin + 1e-3).abs() < 1e-9, "{gram:?}");
    assert_eq!(report.summary.failed, 1);
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(matches!(parse_suite_config("trials = 0"), Err(Error::Config(_))));
    assert!(matches!(parse_suite_config("reg_grid = 1, -1"), Err(Error::Config(_))));
    assert!(matches!(parse_suite_config("sizes = 0"), Err(Error::Config(_))));
}
