//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use carleson::certify::ReferenceTruncation;
use carleson::continuous::{decay_integral, EnergyOptions};
use carleson::exponents::{dyadic_grid, gamma_const, theta_sup_check, DensityGrids};
use carleson::{
    analysis_apply, degenerate_check, discrete_sandwich_check, extension_induction, frame_bounds,
    frame_bounds_converged, log_block_density, null_vector, perturbation_j, reconstruct,
    reference_geometric, riemann_energy, synthesis_matrix, verify_chps_chain, CarlesonSpectrum,
    Complex64, DiskPoint, ExponentSet, ExtensionConfig, Quadrature,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(budget: Duration, start: Instant) -> (bool, String) {
    let t = start.elapsed();
    (
        t < budget,
        format!(
            "{:.2} s of {:.0} s budget",
            t.as_secs_f64(),
            budget.as_secs_f64()
        ),
    )
}

/// Frame-bound sandwich on 12 rows and 400 columns of `Lambda = N_0`.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let spec = reference_geometric(12).map_err(|e| e.to_string())?;
    let r = discrete_sandwich_check(&spec, 12, 400, 0.0).map_err(|e| e.to_string())?;
    let (fast, time) = within(Duration::from_secs(5), start);
    let converged = discrete_sandwich_check(&spec, 12, 16384, 0.0).map_err(|e| e.to_string())?;
    check(
        r.contained && fast,
        format!(
            "K=400: A_hat={:.4e} B_hat={:.4e} window=[{:.4e}, {:.4e}] contained={} ({time}); \
             for reference K=16384: A_hat={:.4e} contained={}",
            r.a_hat,
            r.b_hat,
            r.window_lo,
            r.window_hi,
            r.contained,
            converged.a_hat,
            converged.contained
        ),
    )
}

/// Random jitters in `[0, N)` for `N in {2, 3}` give converged frames.
fn criterion_2() -> Outcome {
    let start = Instant::now();
    let spec = reference_geometric(12).map_err(|e| e.to_string())?;
    let mut worst: Option<(u32, u64, f64, f64, bool)> = None;
    let mut all = true;
    for n_step in [2u32, 3] {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lam = ExponentSet::jittered_random(n_step, 1 << 15, &mut rng)
                .map_err(|e| e.to_string())?;
            let e = frame_bounds_converged(&spec, &lam, 0, 12, 256, 2.0, 0.05)
                .map_err(|e| e.to_string())?;
            let h = &e.history;
            let drift = (h[h.len() - 1].1 - h[h.len() - 2].1).abs() / h[h.len() - 2].1;
            let ok = e.converged && e.a_hat > 0.0 && drift < 0.05;
            all &= ok;
            if worst.is_none_or(|w| e.a_hat < w.2) {
                worst = Some((n_step, seed, e.a_hat, drift, ok));
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(30), start);
    let (n, s, a, d, _) = worst.expect("20 runs");
    check(
        all && fast,
        format!("20 runs converged={all}; smallest A_hat={a:.4e} (N={n}, seed={s}, drift {d:.3}) ({time})"),
    )
}

/// `z_1 = -z_0` with `N = 2`: analytic null vector and vanishing lower bound.
fn criterion_3() -> Outcome {
    let spec = CarlesonSpectrum::from_points(
        vec![
            DiskPoint::from_polar(0.5, 0.0).map_err(|e| e.to_string())?,
            DiskPoint::from_polar(0.5, std::f64::consts::PI).map_err(|e| e.to_string())?,
        ],
        "antipodal",
    )
    .map_err(|e| e.to_string())?;
    let pairs = degenerate_check(&spec, 2);
    let even = ExponentSet::arithmetic(2, 400).map_err(|e| e.to_string())?;
    let f = null_vector(&spec, 0, 1, 2).map_err(|e| e.to_string())?;
    let s = analysis_apply(&spec, &even, &f, 400).map_err(|e| e.to_string())?;
    let energy: f64 = s.iter().map(|x| x.norm_sqr()).sum();
    let nf: f64 = f.iter().map(|x| x.norm_sqr()).sum();
    let a = frame_bounds(&synthesis_matrix(&spec, &even, 0, 2, 400).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?
        .a_hat;
    check(
        pairs == vec![(0, 1)] && energy < 1e-20 * nf && a < 1e-12,
        format!(
            "pairs={pairs:?} energy/||f||^2={:.3e} A_hat={a:.3e}",
            energy / nf
        ),
    )
}

/// Perturbation cutoff against the `2^{1-J}` tail oracle, plus the estimate
/// chain on 20 seeded jitter draws.
fn criterion_4() -> Outcome {
    let spec = reference_geometric(40).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    let mut certs = Vec::new();
    for n_step in [1u32, 2, 3] {
        let cert = perturbation_j(&spec, n_step, 40, &ReferenceTruncation::default())
            .map_err(|e| e.to_string())?;
        let oracle = 2f64.powi(1 - cert.j as i32);
        ok &= cert.satisfied && oracle < cert.a_reference;
        lines.push(format!(
            "N={n_step}: J={} 2^(1-J)={oracle:.3e} A_hat={:.3e}",
            cert.j, cert.a_reference
        ));
        certs.push(cert);
    }
    let mut violations = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..20 {
        let cert = &certs[trial % 3];
        let nn = f64::from(cert.n_step);
        let jitters: Vec<f64> = (0..4096).map(|_| rng.random::<f64>() * nn).collect();
        let r = verify_chps_chain(&spec, cert.n_step, &jitters, cert.j, 40, 1e-15)
            .map_err(|e| e.to_string())?;
        violations += usize::from(!r.holds);
    }
    ok &= violations == 0;
    check(
        ok,
        format!("{}; chain violations {violations}/20", lines.join(", ")),
    )
}

/// Row-by-row extension from the cutoff down to the first row.
fn criterion_5() -> Outcome {
    let spec = reference_geometric(40).map_err(|e| e.to_string())?;
    let cert =
        perturbation_j(&spec, 2, 40, &ReferenceTruncation::default()).map_err(|e| e.to_string())?;
    let rows = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lam = ExponentSet::jittered_random(2, 1 << 15, &mut rng).map_err(|e| e.to_string())?;
    let conv =
        frame_bounds_converged(&spec, &lam, 0, rows, 256, 2.0, 0.01).map_err(|e| e.to_string())?;
    if !conv.converged {
        return Err(format!("truncation did not converge by K={}", conv.k_cols));
    }
    let cfg = ExtensionConfig::new(rows, conv.k_cols);
    let ind = extension_induction(&spec, &lam, cert.j, &cfg).map_err(|e| e.to_string())?;
    let mut ok = ind.all_succeeded && !ind.steps.is_empty();
    let mut min_margin = f64::INFINITY;
    for s in &ind.steps {
        ok &= s.lower_bound_check > 0.0
            && s.rho.norm() >= s.lower_bound_check - 1e-9
            && s.c_norm <= s.c_norm_bound;
        min_margin = min_margin.min(s.rho.norm() - s.lower_bound_check);
    }
    let independent = frame_bounds(
        &synthesis_matrix(&spec, &lam, 0, rows, conv.k_cols).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    ok &= independent.a_hat > 0.0 && independent.a_hat == ind.final_bounds.a_hat;
    check(
        ok,
        format!(
            "cutoff J={} clamped to {} on {rows} rows, K={}; steps={} all ok={}; min |rho|-bound={min_margin:.3e}; final A_hat={:.4e}",
            cert.j,
            ind.j_start,
            conv.k_cols,
            ind.steps.len(),
            ind.all_succeeded,
            independent.a_hat
        ),
    )
}

/// Block density of arithmetic and dyadic sets, and `gamma <= 1` for integer
/// exponent subsets.
fn criterion_6() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n_step in [1u32, 2, 3, 5] {
        let lam = ExponentSet::arithmetic(n_step, 200_000 / n_step as usize)
            .map_err(|e| e.to_string())?;
        let r =
            log_block_density(&lam, &DensityGrids::default_for(&lam)).map_err(|e| e.to_string())?;
        let target = 1.0 / f64::from(n_step);
        ok &= (r.l_estimate - target).abs() < 0.1 * target;
        parts.push(format!("L(N={n_step})={:.4}", r.l_estimate));
    }
    let dy = ExponentSet::dyadic(64).map_err(|e| e.to_string())?;
    let r = log_block_density(&dy, &DensityGrids::default_for(&dy)).map_err(|e| e.to_string())?;
    ok &= r.l_estimate < 0.05;
    parts.push(format!("L(dyadic)={:.4}", r.l_estimate));

    let spec = reference_geometric(12).map_err(|e| e.to_string())?;
    let grid = dyadic_grid(12);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut gamma_max = 0f64;
    let mut sup_max = 0f64;
    for _ in 0..50 {
        let p = rng.random_range(0.05..0.95);
        let picks: Vec<f64> = (0..20_000u32)
            .filter(|_| rng.random_bool(p))
            .map(f64::from)
            .collect();
        let lam = ExponentSet::explicit(picks).map_err(|e| e.to_string())?;
        for j in 1..=12 {
            gamma_max =
                gamma_max.max(gamma_const(&spec, &lam, j, lam.len()).map_err(|e| e.to_string())?);
        }
        sup_max = sup_max.max(theta_sup_check(&lam, &grid).map_err(|e| e.to_string())?);
    }
    ok &= gamma_max <= 1.0 + 1e-10;
    parts.push(format!(
        "max gamma over 50 subsets={gamma_max:.12}, max (1-z)theta={sup_max:.6}"
    ));
    check(ok, parts.join(", "))
}

/// Continuous frame: dimension-1 closed form and the sandwich on 50 vectors.
fn criterion_7() -> Outcome {
    let one = CarlesonSpectrum::from_points(
        vec![DiskPoint::real(0.5).map_err(|e| e.to_string())?],
        "single",
    )
    .map_err(|e| e.to_string())?;
    let f = [Complex64::new(1.0, 0.0)];
    let t = carleson::continuous::default_cutoff(&one, &f).map_err(|e| e.to_string())?;
    let e = riemann_energy(&one, &f, 1e-3, t, Quadrature::Trapezoid).map_err(|e| e.to_string())?;
    let closed = decay_integral(0.5);
    let mut ok = (e.value - closed).abs() < 1e-6;
    let first = format!("dim-1 value={:.10} closed form={closed:.10}", e.value);

    let spec = reference_geometric(12).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vectors: Vec<(String, Vec<Complex64>)> = (0..50)
        .map(|i| {
            let len = rng.random_range(1..=4);
            let f = (0..len)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            (format!("random-{i}"), f)
        })
        .collect();
    // cutoff 40 / (-ln r_max) leaves a tail factor exp(-80), folded into the tolerance
    let opts = EnergyOptions {
        t_scale: 40.0,
        ..EnergyOptions::default()
    };
    let r = carleson::continuous::continuous_report(&spec, 12, &vectors, &opts)
        .map_err(|e| e.to_string())?;
    ok &= r.holds;
    let ratios: Vec<f64> = r
        .per_vector_energies
        .iter()
        .map(|v| v.riemann_value / v.norm_sqr)
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    check(
        ok,
        format!(
            "{first}; 50 vectors: energy/||f||^2 in [{lo:.4}, {hi:.4}] within [{:.4e}, {:.4}] holds={}",
            r.lower_const, r.upper_const, r.holds
        ),
    )
}

/// Round trip through samples over a jittered exponent set.
fn criterion_8() -> Outcome {
    let spec = reference_geometric(12).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let lam = ExponentSet::jittered_random(2, 1 << 15, &mut rng).map_err(|e| e.to_string())?;
    let conv =
        frame_bounds_converged(&spec, &lam, 0, 12, 256, 2.0, 0.01).map_err(|e| e.to_string())?;
    let m = synthesis_matrix(&spec, &lam, 0, 12, conv.k_cols).map_err(|e| e.to_string())?;
    let mut worst = 0f64;
    for _ in 0..20 {
        let f: Vec<Complex64> = (0..12)
            .map(|_| {
                if rng.random_bool(0.6) {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let s = analysis_apply(&spec, &lam, &f, conv.k_cols).map_err(|e| e.to_string())?;
        let fh = reconstruct(&s, &m).map_err(|e| e.to_string())?;
        let err: f64 = f
            .iter()
            .zip(&fh)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let nf: f64 = f.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(if nf > 0.0 { err / nf } else { err });
    }
    check(
        conv.converged && worst < 1e-8,
        format!(
            "K={} converged={}; worst relative error {worst:.3e}",
            conv.k_cols, conv.converged
        ),
    )
}

fn run_cli(args: &[&str], out: &Path) -> Result<(i32, Vec<u8>), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_carleson"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CARLESON_DEFAULT_TOL")
        .output()
        .map_err(|e| e.to_string())?;
    let code = status.status.code().unwrap_or(-1);
    let bytes = std::fs::read(out).map_err(|e| {
        format!(
            "{args:?}: no report ({e}); stderr: {}",
            String::from_utf8_lossy(&status.stderr)
        )
    })?;
    Ok((code, bytes))
}

/// Every CLI command, run twice with the same configuration and seed.
fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec_path = dir.path().join("spectrum.json");
    let spec_arg = spec_path.to_str().expect("utf-8 temp path");
    let commands: Vec<Vec<&str>> = vec![
        vec!["gen-spectrum", "--count", "16"],
        vec!["check-carleson", "--spectrum", spec_arg, "--rows", "12"],
        vec![
            "frame-bounds",
            "--spectrum",
            spec_arg,
            "--rows",
            "8",
            "--cols",
            "400",
        ],
        vec!["subsample-check", "--N", "3", "--seed", "7", "--rows", "8"],
        vec![
            "perturbation",
            "--N",
            "2",
            "--seed",
            "3",
            "--rows",
            "6",
            "--trials",
            "3",
        ],
        vec!["extension", "--rows", "6", "--seed", "4"],
        vec!["degenerate", "--N", "2", "--spectrum", spec_arg],
        vec![
            "density",
            "--lambda",
            "arith:N=3,jitter=random,count=20000",
            "--seed",
            "9",
        ],
        vec![
            "continuous",
            "--rows",
            "12",
            "--trials",
            "3",
            "--seed",
            "11",
            "--T",
            "300",
        ],
        vec![
            "reconstruct",
            "--rows",
            "8",
            "--trials",
            "3",
            "--seed",
            "12",
        ],
    ];
    // the spectrum file used by later commands
    let (code, _) = run_cli(&["gen-spectrum", "--count", "16"], &spec_path)?;
    if code != 0 {
        return Err(format!("gen-spectrum exited {code}"));
    }
    let mut mismatched = Vec::new();
    let mut codes = Vec::new();
    for (i, args) in commands.iter().enumerate() {
        let a = dir.path().join(format!("run{i}a.json"));
        let b = dir.path().join(format!("run{i}b.json"));
        let (ca, ba) = run_cli(args, &a)?;
        let (cb, bb) = run_cli(args, &b)?;
        if ba != bb || ca != cb {
            mismatched.push(args[0]);
        }
        codes.push(format!("{}={ca}", args[0]));
    }
    check(
        mismatched.is_empty(),
        format!(
            "{} commands, byte-identical reruns; mismatches {mismatched:?}; exit codes [{}]",
            commands.len(),
            codes.join(" ")
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("frame-bound sandwich", criterion_1),
        ("subsampled frames", criterion_2),
        ("degenerate failure", criterion_3),
        ("perturbation cutoff", criterion_4),
        ("constructive extension", criterion_5),
        ("density", criterion_6),
        ("continuous frame", criterion_7),
        ("reconstruction", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {} {name} [{secs:.2} s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} {name} [{secs:.2} s]: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
