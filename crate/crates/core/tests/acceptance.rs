//! Acceptance criteria. Runs every criterion and prints one
//! `criterion N: PASS|FAIL` line each; exits nonzero if any fails.

use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use corona::instance::monomial_row_instance;
use corona::potential::laplacian_phi;
use corona::suite::{self, CheckRow, SuiteConfig, RIESZ_BAND};
use corona::{generate_instance, CMat, Complex64, CoronaInstance, GenerateSpec, MatPoly, MultiIndex};

/// Prints the verdict line and panics on failure.
fn verdict(n: usize, label: &str, rows: &[CheckRow], extra: &[(&str, bool)]) {
    let failed: Vec<&CheckRow> = rows.iter().filter(|r| r.passed == Some(false)).collect();
    let checked = rows.iter().filter(|r| r.passed.is_some()).count();
    let extra_failed: Vec<&str> = extra.iter().filter(|(_, ok)| !ok).map(|(s, _)| *s).collect();
    let ok = failed.is_empty() && extra_failed.is_empty();
    println!(
        "criterion {n}: {} {label} ({checked} rows, {} failed; {} named checks, {} failed)",
        if ok { "PASS" } else { "FAIL" },
        failed.len(),
        extra.len(),
        extra_failed.len()
    );
    for r in failed.iter().take(12) {
        println!("    failed row {} {} value={:.6e} bound={:?}", r.instance, r.check, r.value, r.bound);
    }
    for s in &extra_failed {
        println!("    failed check {s}");
    }
    assert!(ok, "criterion {n} failed");
}

fn disk_suite(count: u64) -> Vec<CoronaInstance> {
    (0..count)
        .map(|s| {
            let r = 1 + (s % 3) as usize;
            let m = r + 1 + (s / 3) as usize % (5 - r);
            let spec = GenerateSpec::new(r, m, 1, (s % 4) as usize, 0.3 + 0.1 * (s % 5) as f64, 1000 + s);
            generate_instance(&spec).unwrap()
        })
        .collect()
}

fn bidisk_suite(count: u64) -> Vec<CoronaInstance> {
    (0..count)
        .map(|s| {
            let r = 1 + (s % 2) as usize;
            generate_instance(&GenerateSpec::new(r, r + 2, 2, 1, 0.5, 2000 + s)).unwrap()
        })
        .collect()
}

fn constant_instance() -> CoronaInstance {
    let spec = GenerateSpec { coupling: 0.0, ..GenerateSpec::new(1, 3, 1, 0, 0.5, 77) };
    generate_instance(&spec).unwrap()
}

fn run(insts: &[CoronaInstance], cfg: &SuiteConfig, f: fn(&CoronaInstance, &SuiteConfig) -> corona::Result<Vec<CheckRow>>) -> Vec<CheckRow> {
    insts.iter().flat_map(|i| f(i, cfg).unwrap()).collect()
}

fn rows_with<'a>(rows: &'a [CheckRow], prefix: &str) -> Vec<&'a CheckRow> {
    rows.iter().filter(|r| r.check.starts_with(prefix)).collect()
}

fn criterion_1_identities() {
    let start = Instant::now();
    let cfg = SuiteConfig { grid: Some(32), tol: 1e-6, fd_step: 1e-5, ..SuiteConfig::default() };
    let rows = run(&disk_suite(100), &cfg, suite::identity_checks);
    let secs = start.elapsed().as_secs_f64();
    verdict(1, &format!("identities on 100 instances, grid 32x32, {secs:.1}s"), &rows, &[("runtime < 60 s", secs < 60.0)]);
}

fn criterion_2_quadrature() {
    let cfg = SuiteConfig::default();
    let q = cfg.disk_quadrature().unwrap();
    let rows: Vec<CheckRow> = suite::quadrature_checks(&q, &cfg).unwrap().into_iter().filter(|r| r.check != "embedding.carleson_witness").collect();
    verdict(2, "mass, moments, Green and Littlewood-Paley at 128x256", &rows, &[]);
}

fn criterion_3_carleson_and_xi_embedding() {
    let cfg = SuiteConfig { trials: 2, ..SuiteConfig::default() };
    let mut insts = disk_suite(24);
    insts.push(constant_instance());
    let rows = run(&insts, &cfg, suite::embedding_checks);
    let q = cfg.disk_quadrature().unwrap();
    let witness = suite::carleson_witness(&q).unwrap();
    let pairs = rows_with(&rows, "embedding.xi_gradient").len();
    let constant: Vec<&CheckRow> = rows.iter().filter(|r| r.instance == insts[24].name).collect();
    let const_ok = constant
        .iter()
        .filter(|r| r.check.starts_with("embedding.xi_potential") || r.check.starts_with("embedding.xi_gradient"))
        .all(|r| if r.check.contains("potential") { r.value.abs() < 1e-9 } else { (r.value - 1.0).abs() < 1e-9 });
    let mut all = rows.clone();
    all.push(witness);
    verdict(
        3,
        &format!("Carleson ratios and xi embeddings on {pairs} pairs"),
        &all,
        &[("50 (instance, h) pairs", pairs == 50), ("constant F gives equality", const_ok)],
    );
}

fn criterion_4_potentials() {
    let cfg = SuiteConfig::default();
    let mut insts = disk_suite(30);
    insts.extend(bidisk_suite(4));
    let rows = run(&insts, &cfg, suite::potential_checks);
    let s = 0.5f64.sqrt();
    let mut f = MatPoly::zeros(1, 2, 1);
    f.add_term(MultiIndex::zero(1), CMat::from_row_slice(1, 2, &[Complex64::new(s, 0.0), Complex64::new(0.0, 0.0)])).unwrap();
    f.add_term(MultiIndex::new(vec![1]), CMat::from_row_slice(1, 2, &[Complex64::new(0.0, 0.0), Complex64::new(s, 0.0)])).unwrap();
    let fs = laplacian_phi(&f, &[Complex64::new(0.0, 0.0)], 0).unwrap();
    verdict(4, &format!("potential gaps, ranges and Laplacians; Fubini-Study value {fs:.12}"), &rows, &[("Fubini-Study at 0", (fs - 1.0).abs() < 1e-6)]);
}

fn criterion_5_dual_functional() {
    let cfg = SuiteConfig { trials: 2, ..SuiteConfig::default() };
    let rows = run(&disk_suite(25), &cfg, suite::functional_checks);
    let pairs = rows_with(&rows, "functional.bound").len();
    let beats = rows.iter().any(|r| r.check == "functional.constant_vs_trent" && r.passed == Some(true));
    verdict(5, &format!("three-term split and bound on {pairs} pairs"), &rows, &[("50 pairs", pairs == 50), ("constant beats Trent", beats)]);
}

fn criterion_6_disk_solver() {
    let hand = monomial_row_instance(0.5, 1).unwrap();
    let cfg = SuiteConfig { truncation: Some(16), p: Some(2.0), ..SuiteConfig::default() };
    let hand_rows = suite::solve_checks(&hand, &cfg).unwrap();
    let norm = hand_rows.iter().find(|r| r.check == "solve.norm_p2").unwrap();
    let residual = hand_rows.iter().find(|r| r.check == "solve.residual").unwrap();
    let bound = norm.bound.unwrap();
    let mut rows = hand_rows.clone();
    let mut insts = disk_suite(20);
    for (k, inst) in insts.iter_mut().enumerate() {
        inst.p = [2.0, 4.0 / 3.0, 4.0, 2.0][k % 4];
    }
    rows.extend(run(&insts, &SuiteConfig::default(), suite::solve_checks));
    verdict(
        6,
        &format!("hand norm {:.10}, bound {bound:.5}; minimal norms on 20 instances", norm.value),
        &rows,
        &[
            ("hand norm 2.2360679", (norm.value - 2.2360679).abs() < 1e-7 && (norm.value - 5f64.sqrt()).abs() < 1e-9),
            ("hand residual < 1e-10", residual.value < 1e-10),
            ("hand bound 69.745", (bound - 69.745).abs() < 5e-3 && norm.value <= bound),
        ],
    );
}

fn criterion_7_bidisk() {
    let insts = bidisk_suite(10);
    let cfg = SuiteConfig { trials: 2, ..SuiteConfig::default() };
    let mut rows = run(&insts[..5], &SuiteConfig { trials: 2, band: 32, max_iter: 500, projection_tol: 1e-6, ..SuiteConfig::default() }, suite::decompose_checks);
    rows.retain(|r| !r.check.starts_with("decompose.lq"));
    rows.extend(run(&insts, &SuiteConfig { truncation: Some(6), ..SuiteConfig::default() }, suite::solve_checks));
    rows.extend(run(&insts, &cfg, suite::functional_checks));
    let witnesses = rows_with(&rows, "functional.l_agreement").len();
    verdict(7, &format!("bidisk splittings, solver and {witnesses} L1/L2 witnesses"), &rows, &[("20 witnesses", witnesses == 20)]);
}

fn criterion_8_riesz() {
    let cfg = SuiteConfig { trials: 20, ..SuiteConfig::default() };
    let mut rows = suite::riesz_checks(2.0, RIESZ_BAND, &cfg).unwrap();
    let p4 = suite::riesz_checks(4.0, RIESZ_BAND, &cfg).unwrap();
    let v4 = p4[0].value;
    rows.extend(p4);
    let mut insts = disk_suite(3);
    insts.extend(bidisk_suite(3));
    let dec = run(&insts, &SuiteConfig { trials: 2, ..SuiteConfig::default() }, suite::decompose_checks);
    rows.extend(dec.into_iter().filter(|r| r.check.starts_with("decompose.lq")));
    verdict(8, &format!("Riesz norms (p=4 value {v4:.6}) and L^q bounds"), &rows, &[("p=4 at least 1.2", v4 >= 1.2)]);
}

fn criterion_9_outer_functions() {
    let rows = suite::outer_checks(&SuiteConfig::default()).unwrap();
    verdict(9, "moduli at N = 4096 and multiplier identities", &rows, &[]);
}

fn main() -> ExitCode {
    let criteria: [fn(); 9] = [
        criterion_1_identities,
        criterion_2_quadrature,
        criterion_3_carleson_and_xi_embedding,
        criterion_4_potentials,
        criterion_5_dual_functional,
        criterion_6_disk_solver,
        criterion_7_bidisk,
        criterion_8_riesz,
        criterion_9_outer_functions,
    ];
    let failed = criteria.iter().filter(|c| panic::catch_unwind(**c).is_err()).count();
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
