//! Acceptance gate. Each test runs one criterion at its stated tolerance
//! against the reference configuration and prints a single pass/fail line
//! (visible with `--nocapture`; `cargo test --test acceptance` runs all).

use std::process::Command;

use zerochain::harness::{self, CheckResult, RunConfig};
use zerochain::InstanceParams;

fn reference() -> RunConfig {
    RunConfig::default()
}

fn params() -> InstanceParams {
    reference().params().expect("reference configuration is valid")
}

fn gate(c: CheckResult) {
    let verdict = if c.pass { "PASS" } else { "FAIL" };
    println!("{verdict} {:<24} ({:6.2}s)  {}", c.id, c.seconds, c.detail);
    assert!(c.pass, "{}: {}", c.id, c.detail);
}

#[test]
fn criterion_01_spectrum_and_conditioning() {
    gate(harness::check_spectrum(&params()));
}

#[test]
fn criterion_02_gradients_and_lipschitz() {
    gate(harness::check_gradients(&params(), reference().seed));
}

#[test]
fn criterion_03_prox_closed_forms() {
    gate(harness::check_prox(&params(), reference().seed));
}

#[test]
fn criterion_04_support_locality() {
    gate(harness::check_support(&params(), reference().seed));
}

#[test]
fn criterion_05_certificate_order() {
    gate(harness::check_certificate(&params(), reference().seed));
}

#[test]
fn criterion_06_class1_front_rate() {
    gate(harness::check_class1_rate(&params(), reference().seed));
}

#[test]
fn criterion_07_class2_front_rate() {
    gate(harness::check_class2_rate(&params(), reference().seed));
}

#[test]
fn criterion_08_front_scaling_slope() {
    gate(harness::check_scaling(&reference()));
}

#[test]
fn criterion_09_residual_transfer() {
    gate(harness::check_transfer(&params()));
}

#[test]
fn criterion_10_condition_ratio() {
    gate(harness::check_ratio(&reference()));
}

#[test]
fn criterion_11_cli_contract() {
    let started = std::time::Instant::now();
    let exe = env!("CARGO_BIN_EXE_harness");
    let out = std::env::temp_dir().join(format!("zc-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&out).unwrap();

    let verify = Command::new(exe)
        .args(["verify", "--out"])
        .arg(&out)
        .output()
        .expect("spawn harness verify");
    let tail = String::from_utf8_lossy(&verify.stdout);
    assert!(
        verify.status.success(),
        "verify must exit 0 when all checks pass; output:\n{tail}"
    );

    let bounds1 = Command::new(exe).arg("bounds").output().unwrap();
    let bounds2 = Command::new(exe).arg("bounds").output().unwrap();
    assert!(bounds1.status.success());
    assert_eq!(
        bounds1.stdout, bounds2.stdout,
        "bounds output must be byte-identical across invocations"
    );

    // rejected configuration (even block width) must not exit 0
    let bad = Command::new(exe)
        .args(["verify", "--dbar", "4"])
        .output()
        .unwrap();
    assert!(!bad.status.success(), "invalid config must fail verify");

    std::fs::remove_dir_all(&out).ok();
    println!(
        "PASS {:<24} ({:6.2}s)  verify exit 0, bounds deterministic ({} bytes), bad config rejected",
        "cli-contract",
        started.elapsed().as_secs_f64(),
        bounds1.stdout.len()
    );
}
