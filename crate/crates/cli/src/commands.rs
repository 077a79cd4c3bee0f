//! One function per subcommand. Each fills the report inputs and
//! tolerances in [`Context`] as it goes, so a failing run still reports
//! what it was working on.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use carleson::certify::{DEGENERACY_TOL, KERNEL_TOL};
use carleson::continuous::{write_energy_samples, EnergyOptions};
use carleson::exponents::{dyadic_grid, DensityGrids};
use carleson::frame_ops::row_space_projection;
use carleson::{
    analysis_apply, block_count_check, carleson_delta, continuous_report, degenerate_check,
    delta_frame_bound, discrete_sandwich_check_with, extension_induction, frame_bounds,
    frame_bounds_converged, log_block_density, make_geometric_real, make_sector, ms_sum,
    null_vector, perturbation_j, reconstruct, reference_geometric, synthesis_matrix, tail_defect,
    theta_sup_check, verify_chps_chain, zero_set_guard, AngleRule, CarlesonSpectrum, Complex64,
    DiskPoint, Error, ExponentSet, ExtensionConfig, FrameBoundEstimate, ReferenceTruncation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::lambda::{parse_lambda, JitterRule, LambdaDefaults};
use crate::{AngleRuleArg, Command, Common, SpectrumKind};

/// Starting `K` for convergence runs.
const K_START: usize = 256;

pub enum Failure {
    /// Bad flags or unreadable input; exit 2.
    Input(String),
    /// A numeric step failed; exit 1 with a partial report.
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::RankDeficient { .. }
            | Error::NotOuterFrame { .. }
            | Error::FitFailed { .. }
            | Error::NoCutoff { .. }
            | Error::NotConverged { .. }
            | Error::EmptyBlock { .. } => Failure::Numeric(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

pub struct Outcome {
    pub certified: bool,
    pub result: Value,
}

pub struct Context {
    pub inputs: Map<String, Value>,
    pub tolerances: Map<String, Value>,
    rng: ChaCha8Rng,
    env_tol: Option<f64>,
}

impl Context {
    pub fn new(common: &Common) -> Self {
        Context {
            inputs: Map::new(),
            tolerances: Map::new(),
            rng: ChaCha8Rng::seed_from_u64(common.seed),
            env_tol: common.tol,
        }
    }

    /// `--tol` (or the environment override) if given, else `default`.
    fn tol(&mut self, name: &str, default: f64) -> f64 {
        let t = self.env_tol.unwrap_or(default);
        self.tolerances.insert(name.into(), json!(t));
        t
    }

    /// A tolerance `--tol` does not touch.
    fn fixed(&mut self, name: &str, value: f64) -> f64 {
        self.tolerances.insert(name.into(), json!(value));
        value
    }

    fn note(&mut self, name: &str, value: impl Serialize) {
        self.inputs.insert(name.into(), to_value(value));
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

/// Reads a raw spectrum or the `result` of a `gen-spectrum` report.
fn load_spectrum(path: &Path) -> Result<CarlesonSpectrum, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| input(format!("{}: malformed JSON: {e}", path.display())))?;
    let parsed = if value.get("command").is_some() {
        match value.get("result") {
            Some(r) if !r.is_null() => serde_json::from_value(r.clone()),
            _ => {
                return Err(input(format!(
                    "{}: report has no spectrum under `result`",
                    path.display()
                )))
            }
        }
    } else {
        serde_json::from_str(&text)
    };
    parsed.map_err(|e| input(format!("{}: invalid spectrum: {e}", path.display())))
}

/// `--spectrum` if given, else the reference geometric spectrum with
/// `default_count` points.
fn spectrum(
    common: &Common,
    ctx: &mut Context,
    default_count: usize,
) -> Result<CarlesonSpectrum, Failure> {
    let spec = match &common.spectrum {
        Some(p) => load_spectrum(p)?,
        None => reference_geometric(default_count)?,
    };
    ctx.note(
        "spectrum",
        json!({ "generator_tag": spec.generator_tag(), "points": spec.len() }),
    );
    Ok(spec)
}

/// Rows to use: `--rows` or all materialized points, never more than exist.
fn rows(common: &Common, spec: &CarlesonSpectrum) -> Result<usize, Failure> {
    let n = common.rows.unwrap_or(spec.len());
    if n == 0 || n > spec.len() {
        return Err(input(format!("--rows {n} not in 1..={}", spec.len())));
    }
    Ok(n)
}

/// `--lambda` if given, else `default_rule` (overridden by `--jitter`) on
/// `N N_0` with `count` exponents.
fn exponents(
    common: &Common,
    ctx: &mut Context,
    n_step: u32,
    count: usize,
    default_rule: JitterRule,
) -> Result<ExponentSet, Failure> {
    let defaults = LambdaDefaults { n_step, count };
    let lam = match &common.lambda {
        Some(text) => parse_lambda(text, defaults, &mut ctx.rng).map_err(Failure::Input)?,
        None => {
            let rule = match &common.jitter {
                Some(j) => JitterRule::parse(j).map_err(Failure::Input)?,
                None => default_rule,
            };
            rule.build(n_step, count, &mut ctx.rng)
                .map_err(Failure::Input)?
        }
    };
    ctx.note(
        "lambda",
        json!({ "descriptor": lam.descriptor(), "count": lam.len() }),
    );
    Ok(lam)
}

fn n_step(common: &Common, default: u32) -> Result<u32, Failure> {
    match common.n_step.unwrap_or(default) {
        0 => Err(input("--N must be positive")),
        n => Ok(n),
    }
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| {
            Complex64::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            )
        })
        .collect()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

/// Converged lower bound on `rows` rows, or the fixed `--cols` truncation.
fn truncation_bounds(
    common: &Common,
    spec: &CarlesonSpectrum,
    lam: &ExponentSet,
    n: usize,
    rel_tol: f64,
) -> Result<FrameBoundEstimate, Failure> {
    Ok(match common.cols {
        Some(k) => frame_bounds(&synthesis_matrix(spec, lam, 0, n, k)?)?,
        None => frame_bounds_converged(spec, lam, 0, n, K_START.min(lam.len()), 2.0, rel_tol)?,
    })
}

pub fn run(common: &Common, command: &Command, ctx: &mut Context) -> Result<Outcome, Failure> {
    match command {
        Command::GenSpectrum {
            kind,
            base,
            ratio,
            count,
            c,
            angle_rule,
        } => gen_spectrum(*kind, *base, *ratio, *count, *c, *angle_rule),
        Command::CheckCarleson => check_carleson(common, ctx),
        Command::FrameBounds {
            converge,
            k_max,
            csv,
        } => frame_bounds_cmd(common, ctx, *converge, *k_max, csv.as_deref()),
        Command::SubsampleCheck {
            k_max,
            rel_tol,
            max_count,
        } => subsample_check(common, ctx, *k_max, *rel_tol, *max_count),
        Command::Perturbation {
            trials,
            jitter_count,
            k_max,
        } => perturbation(common, ctx, *trials, *jitter_count, *k_max),
        Command::Extension { j_start, k_max } => extension(common, ctx, *j_start, *k_max),
        Command::Degenerate => degenerate(common, ctx),
        Command::Density { count } => density(common, ctx, *count),
        Command::Continuous {
            trials,
            support,
            samples_csv,
            stride,
        } => continuous(
            common,
            ctx,
            *trials,
            *support,
            samples_csv.as_deref(),
            *stride,
        ),
        Command::Reconstruct { trials, k_max } => reconstruct_cmd(common, ctx, *trials, *k_max),
    }
}

fn gen_spectrum(
    kind: SpectrumKind,
    base: f64,
    ratio: f64,
    count: usize,
    c: f64,
    angle_rule: AngleRuleArg,
) -> Result<Outcome, Failure> {
    let geo = make_geometric_real(base, ratio, count)?;
    let moduli: Vec<f64> = geo.points().iter().map(DiskPoint::r).collect();
    let mut spec = match kind {
        SpectrumKind::Geometric => geo,
        SpectrumKind::Sector => {
            let rule = match angle_rule {
                AngleRuleArg::Zero => AngleRule::Zero,
                AngleRuleArg::Alternating => AngleRule::Alternating,
                AngleRuleArg::Sweep => AngleRule::Sweep,
            };
            make_sector(&moduli, c, &rule)?
        }
        SpectrumKind::Antipodal => {
            if count < 2 {
                return Err(input("antipodal spectra need --count >= 2"));
            }
            let mut points = vec![
                DiskPoint::real(moduli[0])?,
                DiskPoint::from_polar(moduli[0], PI)?,
            ];
            for &r in &moduli[1..count - 1] {
                points.push(DiskPoint::real(r)?);
            }
            CarlesonSpectrum::from_points(
                points,
                format!("antipodal(base={base},ratio={ratio},count={count})"),
            )?
        }
    };
    let n = spec.len();
    spec.attach_delta(n)?;
    Ok(Outcome {
        certified: true,
        result: to_value(&spec),
    })
}

fn check_carleson(common: &Common, ctx: &mut Context) -> Result<Outcome, Failure> {
    let spec = spectrum(common, ctx, 12)?;
    let n = rows(common, &spec)?;
    let est = carleson_delta(&spec, n)?;
    let big_delta = delta_frame_bound(est.delta_n)?;
    let g_norm_sqr = tail_defect(&spec, 0, n)?;
    let argmin = est
        .per_k_products
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k);
    Ok(Outcome {
        certified: est.delta_n > 0.0,
        result: json!({
            "n": n,
            "delta_n": est.delta_n,
            "attained_at": argmin,
            "Delta": big_delta,
            "g_norm_sqr": g_norm_sqr,
            "estimate": est,
        }),
    })
}

fn frame_bounds_cmd(
    common: &Common,
    ctx: &mut Context,
    converge: bool,
    k_max: usize,
    csv: Option<&Path>,
) -> Result<Outcome, Failure> {
    let spec = spectrum(common, ctx, 12)?;
    let n = rows(common, &spec)?;
    let tol = ctx.tol("window", 0.0);
    let k_fixed = common.cols.unwrap_or(400);
    let count = if converge {
        k_max.max(k_fixed)
    } else {
        k_fixed
    };
    let lam = exponents(common, ctx, n_step(common, 1)?, count, JitterRule::Zero)?;
    let mut converged = None;
    let k = if converge {
        let rel_tol = ctx.fixed("convergence_rel", 0.01);
        let est = frame_bounds_converged(&spec, &lam, 0, n, K_START.min(lam.len()), 2.0, rel_tol)?;
        let k = est.k_cols;
        converged = Some(est);
        k
    } else {
        k_fixed
    };
    if k > lam.len() {
        return Err(input(format!(
            "--cols {k} exceeds the {} materialized exponents",
            lam.len()
        )));
    }
    let sandwich = discrete_sandwich_check_with(&spec, &lam, n, k, tol)?;
    if let Some(path) = csv {
        let m = synthesis_matrix(&spec, &lam, 0, n, k)?;
        let file = fs::File::create(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
        m.write_csv(file)?;
    }
    let converged_ok = converged.as_ref().is_none_or(|e| e.converged);
    Ok(Outcome {
        certified: sandwich.contained && converged_ok,
        result: json!({ "sandwich": sandwich, "convergence": converged }),
    })
}

fn subsample_check(
    common: &Common,
    ctx: &mut Context,
    k_max: usize,
    rel_tol: f64,
    max_count: usize,
) -> Result<Outcome, Failure> {
    let spec = spectrum(common, ctx, 12)?;
    let n = rows(common, &spec)?;
    let nn = n_step(common, 2)?;
    let lam = exponents(common, ctx, nn, k_max, JitterRule::Random)?;
    ctx.fixed("convergence_rel", rel_tol);
    let last = *lam.values().last().expect("nonempty");
    let k_blocks = ((last / f64::from(nn)).floor() as usize).saturating_sub(1);
    let blocks_ok = block_count_check(&lam, nn, max_count, k_blocks)?;
    let est = frame_bounds_converged(&spec, &lam, 0, n, K_START.min(lam.len()), 2.0, rel_tol)?;
    Ok(Outcome {
        certified: blocks_ok && est.converged && est.a_hat > 0.0,
        result: json!({
            "N": nn,
            "max_count": max_count,
            "blocks_checked": k_blocks + 1,
            "block_count_ok": blocks_ok,
            "estimate": est,
        }),
    })
}

fn perturbation(
    common: &Common,
    ctx: &mut Context,
    trials: usize,
    jitter_count: usize,
    k_max: usize,
) -> Result<Outcome, Failure> {
    let spec = spectrum(common, ctx, 40)?;
    let nn = n_step(common, 1)?;
    let trunc = ReferenceTruncation {
        rows: common.rows.unwrap_or(12).min(spec.len()),
        k_start: common.cols.unwrap_or(K_START),
        k_max,
        ..ReferenceTruncation::default()
    };
    ctx.fixed("convergence_rel", trunc.rel_tol);
    ctx.note("reference_truncation", &trunc);
    let tol = ctx.tol("chain", 1e-15);
    let rule = match &common.jitter {
        Some(j) => JitterRule::parse(j).map_err(Failure::Input)?,
        None => JitterRule::Random,
    };
    let cert = perturbation_j(&spec, nn, spec.len(), &trunc)?;
    let mut chains = Vec::with_capacity(trials);
    for trial in 0..trials {
        let lam = rule
            .build(nn, jitter_count, &mut ctx.rng)
            .map_err(Failure::Input)?;
        let jitters = match lam.kind() {
            carleson::ExponentKind::JitteredArithmetic { jitters, .. } => jitters.clone(),
            carleson::ExponentKind::Explicit => unreachable!("jitter rules build jittered sets"),
        };
        let r = verify_chps_chain(&spec, nn, &jitters, cert.j, spec.len(), tol)?;
        chains.push(json!({ "trial": trial, "report": r }));
    }
    let all_hold = chains.iter().all(|c| c["report"]["holds"] == json!(true));
    Ok(Outcome {
        certified: cert.satisfied && all_hold,
        result: json!({ "certificate": cert, "chains_hold": all_hold, "chains": chains }),
    })
}

fn extension(
    common: &Common,
    ctx: &mut Context,
    j_start: Option<usize>,
    k_max: usize,
) -> Result<Outcome, Failure> {
    let spec = spectrum(common, ctx, 40)?;
    let n = common.rows.unwrap_or(12);
    if n < 2 || n > spec.len() {
        return Err(input(format!("--rows {n} not in 2..={}", spec.len())));
    }
    let nn = n_step(common, 2)?;
    let lam = exponents(common, ctx, nn, k_max, JitterRule::Random)?;
    let rel_tol = ctx.fixed("convergence_rel", 0.01);
    let cert = match j_start {
        Some(j) => {
            ctx.note("J_source", "flag");
            json!({ "J": j })
        }
        None => {
            ctx.note("J_source", "perturbation cutoff on N N_0");
            let trunc = ReferenceTruncation {
                rows: n,
                k_max,
                rel_tol,
                ..ReferenceTruncation::default()
            };
            to_value(perturbation_j(&spec, nn, spec.len(), &trunc)?)
        }
    };
    let j = cert["J"].as_u64().expect("J is an integer") as usize;
    let est = truncation_bounds(common, &spec, &lam, n, rel_tol)?;
    let cfg = ExtensionConfig::new(n, est.k_cols);
    ctx.fixed("residual", cfg.residual_tol);
    ctx.fixed("kernel", KERNEL_TOL);
    let induction = extension_induction(&spec, &lam, j, &cfg)?;
    let mut guards = Vec::with_capacity(induction.steps.len());
    for step in &induction.steps {
        guards.push(zero_set_guard(
            &spec,
            &lam,
            step.j,
            n,
            n - step.j + 1,
            KERNEL_TOL,
        )?);
    }
    let guards_safe = guards.iter().all(|g| g.safe);
    Ok(Outcome {
        certified: induction.all_succeeded && est.a_hat > 0.0,
        result: json!({
            "cutoff": cert,
            "truncation": est,
            "config": cfg,
            "induction": induction,
            "zero_set_guards_safe": guards_safe,
            "zero_set_guards": guards,
        }),
    })
}

fn degenerate(common: &Common, ctx: &mut Context) -> Result<Outcome, Failure> {
    let spec = spectrum(common, ctx, 12)?;
    let n = rows(common, &spec)?;
    let nn = n_step(common, 1)?;
    ctx.fixed("degeneracy", DEGENERACY_TOL);
    let truncated = spec.truncated(n)?;
    let pairs = degenerate_check(&truncated, nn);
    let k = common.cols.unwrap_or(400);
    let lam = ExponentSet::arithmetic(nn, k)?;
    ctx.note(
        "lambda",
        json!({ "descriptor": lam.descriptor(), "count": lam.len() }),
    );
    let mut witnesses = Vec::with_capacity(pairs.len());
    for &(a, b) in &pairs {
        let f = null_vector(&spec, a, b, n)?;
        let samples = analysis_apply(&spec, &lam, &f, k)?;
        let energy: f64 = samples.iter().map(Complex64::norm_sqr).sum();
        witnesses.push(json!({ "pair": [a, b], "null_vector": f, "sample_energy": energy }));
    }
    let a_hat = if pairs.is_empty() {
        None
    } else {
        Some(frame_bounds(&synthesis_matrix(&spec, &lam, 0, n, k)?)?.a_hat)
    };
    Ok(Outcome {
        certified: pairs.is_empty(),
        result: json!({ "N": nn, "n": n, "pairs": pairs, "witnesses": witnesses, "a_hat": a_hat }),
    })
}

fn density(common: &Common, ctx: &mut Context, count: Option<usize>) -> Result<Outcome, Failure> {
    let nn = n_step(common, 1)?;
    let count = count.unwrap_or(200_000usize.div_ceil(nn as usize));
    let lam = exponents(common, ctx, nn, count, JitterRule::Zero)?;
    let grids = DensityGrids::default_for(&lam);
    let report = log_block_density(&lam, &grids)?;
    let ms = ms_sum(&lam, lam.len(), grids.ms_threshold)?;
    let theta_sup = if lam.is_integer_valued() {
        Some(theta_sup_check(&lam, &dyadic_grid(12))?)
    } else {
        None
    };
    let block = match lam.step() {
        Some(step) => {
            let k_blocks = lam.len().saturating_sub(1);
            Some(json!({ "N": step, "one_per_block": block_count_check(&lam, step, 2, k_blocks)? }))
        }
        None => None,
    };
    Ok(Outcome {
        certified: true,
        result: json!({ "density": report, "ms_sum": ms, "theta_sup": theta_sup, "blocks": block }),
    })
}

fn continuous(
    common: &Common,
    ctx: &mut Context,
    trials: usize,
    support: usize,
    samples_csv: Option<&Path>,
    stride: usize,
) -> Result<Outcome, Failure> {
    let spec = spectrum(common, ctx, 12)?;
    let n = rows(common, &spec)?;
    if support == 0 || support > n {
        return Err(input(format!("--support {support} not in 1..={n}")));
    }
    let opts = EnergyOptions {
        dt: common.dt.unwrap_or(carleson::continuous::DEFAULT_DT),
        t_cut: common.t_cut,
        tol: ctx.tol("energy", 1e-6),
        ..EnergyOptions::default()
    };
    ctx.note("energy_options", opts);
    let vectors: Vec<(String, Vec<Complex64>)> = (0..trials)
        .map(|i| (format!("random_{i}"), random_vector(&mut ctx.rng, support)))
        .collect();
    let report = continuous_report(&spec, n, &vectors, &opts)?;
    if let (Some(path), Some((_, f))) = (samples_csv, vectors.first()) {
        let t_cut = report.per_vector_energies[0].t_cut;
        let file = fs::File::create(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
        write_energy_samples(&spec, f, opts.dt, t_cut, stride, file)?;
    }
    Ok(Outcome {
        certified: report.holds,
        result: json!({ "report": report, "vectors": vectors }),
    })
}

fn reconstruct_cmd(
    common: &Common,
    ctx: &mut Context,
    trials: usize,
    k_max: usize,
) -> Result<Outcome, Failure> {
    let spec = spectrum(common, ctx, 12)?;
    let n = rows(common, &spec)?;
    let nn = n_step(common, 2)?;
    let lam = exponents(common, ctx, nn, k_max, JitterRule::Random)?;
    let rel_tol = ctx.fixed("convergence_rel", 0.01);
    let tol = ctx.tol("relative_error", 1e-8);
    let est = truncation_bounds(common, &spec, &lam, n, rel_tol)?;
    let m = synthesis_matrix(&spec, &lam, 0, n, est.k_cols)?;
    let mut runs = Vec::with_capacity(trials);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let f = random_vector(&mut ctx.rng, n);
        let samples = analysis_apply(&spec, &lam, &f, est.k_cols)?;
        let back = reconstruct(&samples, &m)?;
        let diff: Vec<Complex64> = back.iter().zip(&f).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&f);
        // the samples must lie in the range of the analysis map
        let proj = row_space_projection(&samples, &m)?;
        let off: Vec<Complex64> = proj.iter().zip(&samples).map(|(a, b)| a - b).collect();
        worst = worst.max(rel);
        runs.push(json!({
            "trial": trial,
            "relative_error": rel,
            "sample_norm": norm(&samples),
            "off_range_residual": norm(&off),
        }));
    }
    Ok(Outcome {
        certified: est.a_hat > 0.0 && worst < tol,
        result: json!({ "truncation": est, "worst_relative_error": worst, "trials": runs }),
    })
}
