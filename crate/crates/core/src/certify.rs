//! Numerical certificates for the outer-frame perturbation bound, the
//! row-by-row extension of an outer frame, degenerate spectra and the
//! zero-set guard.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carleson::{check_prefix, tail_defect, CarlesonSpectrum, DiskPoint};
use crate::error::{invalid, Error, Result};
use crate::exponents::{gamma_const, real_pow, ExponentSet};
use crate::frame_ops::{
    frame_bounds, frame_bounds_converged, power, row_space_projection,
    smallest_right_singular_vector, synthesis_matrix, FrameBoundEstimate,
};

/// `|z_k^N - z_l^N|` below this marks a degenerate pair.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Default kernel residual tolerance, relative to `||c||`.
pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCertificate {
    #[serde(rename = "J")]
    pub j: usize,
    pub tail_value: f64,
    pub a_reference: f64,
    #[serde(rename = "N")]
    pub n_step: u32,
    /// Rows summed in the tail, `J <= j < n`.
    pub n: usize,
    pub satisfied: bool,
    /// Frame-bound estimate behind `a_reference`, when computed here.
    pub reference_bounds: Option<FrameBoundEstimate>,
}

/// Truncation used to estimate the frame bound of `{D^{Nk} g}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTruncation {
    pub rows: usize,
    pub k_start: usize,
    pub k_max: usize,
    pub growth_factor: f64,
    pub rel_tol: f64,
}

impl Default for ReferenceTruncation {
    fn default() -> Self {
        ReferenceTruncation {
            rows: 12,
            k_start: 256,
            k_max: 1 << 15,
            growth_factor: 2.0,
            rel_tol: 0.01,
        }
    }
}

/// Least `J` with `tail_defect(spec, J, n) < A`, with `A` the converged
/// lower frame bound of `{D^{Nk} g}` on the first `trunc.rows` rows.
pub fn perturbation_j(
    spec: &CarlesonSpectrum,
    n_step: u32,
    n: usize,
    trunc: &ReferenceTruncation,
) -> Result<PerturbationCertificate> {
    if n_step == 0 {
        return Err(invalid("N", "must be positive"));
    }
    let lam = ExponentSet::arithmetic(n_step, trunc.k_max)?;
    let est = frame_bounds_converged(
        spec,
        &lam,
        0,
        trunc.rows,
        trunc.k_start,
        trunc.growth_factor,
        trunc.rel_tol,
    )?;
    if !est.converged {
        return Err(Error::NotConverged {
            k_cols: est.k_cols,
            a_hat: est.a_hat,
        });
    }
    let mut cert = perturbation_j_with_reference(spec, n_step, n, est.a_hat)?;
    cert.reference_bounds = Some(est);
    Ok(cert)
}

/// As [`perturbation_j`] with a caller-supplied `A`.
///
/// Errors when only `J = n` works, since then the certificate would rest
/// entirely on points that were never materialized.
pub fn perturbation_j_with_reference(
    spec: &CarlesonSpectrum,
    n_step: u32,
    n: usize,
    a_reference: f64,
) -> Result<PerturbationCertificate> {
    spec.require_real_positive("perturbation_j")?;
    spec.require_increasing("perturbation_j")?;
    check_prefix(spec, n)?;
    if !(a_reference > 0.0) {
        return Err(invalid("A", "must be positive"));
    }
    // tails[j] = sum_{j <= i < n} (1 - z_i^2)
    let mut tails = vec![0.0; n + 1];
    for j in (0..n).rev() {
        tails[j] = tails[j + 1] + spec.point(j).defect();
    }
    let j = tails
        .iter()
        .position(|&t| t < a_reference)
        .expect("tails[n] = 0");
    if j == n {
        return Err(Error::NoCutoff { n, a_reference });
    }
    debug_assert_eq!(tails[j], tail_defect(spec, j, n)?);
    Ok(PerturbationCertificate {
        j,
        tail_value: tails[j],
        a_reference,
        n_step,
        n,
        satisfied: tails[j] < a_reference,
        reference_bounds: None,
    })
}

/// Per-row terms of the estimate comparing `{D^{Nk} g}` with
/// `{D^{Nk + j_k} g}` on rows `J <= j < n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChpsRow {
    pub j: usize,
    /// `|sum_k z^{Nk} g (1 - z^{j_k})|^2` over the materialized `k`.
    pub norm_of_sum: f64,
    /// `norm_of_sum` with the omitted `k >= K` terms bounded.
    pub norm_of_sum_upper: f64,
    /// `(1 - z^2) sum_k z^{2Nk} (1 - z^{j_k})^2`.
    pub sum_of_squares: f64,
    pub sum_of_squares_upper: f64,
    /// `(1 - z^2)(1 - z^N)^2 / (1 - z^{2N})`.
    pub geometric: f64,
    /// `1 - z^2`.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChpsChainReport {
    #[serde(rename = "J")]
    pub j: usize,
    pub n: usize,
    #[serde(rename = "N")]
    pub n_step: u32,
    pub k_terms: usize,
    pub lhs: f64,
    pub lhs_upper: f64,
    pub sum_of_squares: f64,
    pub geometric: f64,
    pub tail_defect: f64,
    pub tolerance: f64,
    /// Rows where `norm_of_sum_upper > defect + tol`.
    pub end_to_end_violations: Vec<usize>,
    /// Rows where `sum_of_squares_upper > geometric + tol`.
    pub jitter_step_violations: Vec<usize>,
    /// Rows where `geometric > defect + tol`.
    pub tail_step_violations: Vec<usize>,
    pub holds: bool,
    pub rows: Vec<ChpsRow>,
}

/// `1 - z^p` for `z in (0, 1)`, accurate when `z^p` is close to 1.
fn one_minus_pow(z: f64, p: f64) -> f64 {
    -(p * z.ln()).exp_m1()
}

/// Compares `{D^{Nk} g}` with the jittered system `{D^{Nk + j_k} g}` row by
/// row against the tail defect, checking every step of the estimate.
pub fn verify_chps_chain(
    spec: &CarlesonSpectrum,
    n_step: u32,
    jitters: &[f64],
    j: usize,
    n: usize,
    tol: f64,
) -> Result<ChpsChainReport> {
    spec.require_real_positive("verify_chps_chain")?;
    check_prefix(spec, n)?;
    if j > n {
        return Err(Error::Truncation(format!("J = {j} > n = {n}")));
    }
    // validates the jitter range
    ExponentSet::jittered(n_step, jitters.to_vec())?;
    let nn = f64::from(n_step);
    let kk = jitters.len() as f64;
    let mut rows = Vec::with_capacity(n - j);
    for i in j..n {
        let p = spec.point(i);
        let z = p.r();
        let defect = p.defect();
        let mut s = 0.0;
        let mut sq = 0.0;
        for (k, &jk) in jitters.iter().enumerate() {
            let zk = real_pow(z, nn * k as f64);
            let d = if jk == 0.0 { 0.0 } else { one_minus_pow(z, jk) };
            s += zk * d;
            sq += zk * zk * d * d;
        }
        // omitted terms: (1 - z^{j_k}) <= (1 - z^N)
        let one_m_zn = one_minus_pow(z, nn);
        let zk_tail = real_pow(z, nn * kk);
        let s_upper = s + zk_tail;
        let sq_tail = one_m_zn * one_m_zn * zk_tail * zk_tail / one_minus_pow(z, 2.0 * nn);
        let geometric = defect * one_m_zn * one_m_zn / one_minus_pow(z, 2.0 * nn);
        rows.push(ChpsRow {
            j: i,
            norm_of_sum: defect * s * s,
            norm_of_sum_upper: defect * s_upper * s_upper,
            sum_of_squares: defect * sq,
            sum_of_squares_upper: defect * (sq + sq_tail),
            geometric,
            defect,
        });
    }
    let pick = |f: &dyn Fn(&ChpsRow) -> bool| {
        rows.iter()
            .filter(|r| f(r))
            .map(|r| r.j)
            .collect::<Vec<_>>()
    };
    let end_to_end_violations = pick(&|r| r.norm_of_sum_upper > r.defect + tol);
    let jitter_step_violations = pick(&|r| r.sum_of_squares_upper > r.geometric + tol);
    let tail_step_violations = pick(&|r| r.geometric > r.defect + tol);
    let total = |f: fn(&ChpsRow) -> f64| rows.iter().map(f).sum::<f64>();
    let lhs = total(|r| r.norm_of_sum);
    let lhs_upper = total(|r| r.norm_of_sum_upper);
    let tail = tail_defect(spec, j, n)?;
    let holds = end_to_end_violations.is_empty()
        && jitter_step_violations.is_empty()
        && tail_step_violations.is_empty()
        && lhs_upper <= tail + tol;
    Ok(ChpsChainReport {
        j,
        n,
        n_step,
        k_terms: jitters.len(),
        lhs,
        lhs_upper,
        sum_of_squares: total(|r| r.sum_of_squares),
        geometric: total(|r| r.geometric),
        tail_defect: tail,
        tolerance: tol,
        end_to_end_violations,
        jitter_step_violations,
        tail_step_violations,
        holds,
        rows,
    })
}

/// Truncation and fitting parameters for [`extension_step`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionConfig {
    /// Spectrum rows `0..n_rows`.
    pub n_rows: usize,
    /// Exponents `lambda_0..lambda_{k_cols - 1}`.
    pub k_cols: usize,
    /// Largest prefix of exponents tried for `b`; support doubles up to this.
    pub max_support: usize,
    /// Fraction of the strict upper bound used for epsilon.
    pub epsilon_fraction: f64,
    /// Bound on the norm of `Phi_{Z_{J-1}}(b - c)` off row `J - 1`, relative
    /// to `||b|| sqrt(B)`. The fitted `b` can reach `1e11` while its image is
    /// tiny, so only a relative bound separates rounding from a real defect.
    pub residual_tol: f64,
}

impl ExtensionConfig {
    pub fn new(n_rows: usize, k_cols: usize) -> Self {
        ExtensionConfig {
            n_rows,
            k_cols,
            max_support: 256.min(k_cols),
            epsilon_fraction: 0.9,
            residual_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionStepReport {
    #[serde(rename = "J")]
    pub j: usize,
    pub n_rows: usize,
    pub k_cols: usize,
    pub a_hat: f64,
    pub b_hat: f64,
    pub gamma: f64,
    /// `||g||` over the truncation.
    pub m_norm: f64,
    pub epsilon: f64,
    /// `(index, coefficient)` of `b` on a prefix of the exponents.
    pub b_support: Vec<(usize, f64)>,
    /// `|g_{J-1} theta_b(z_{J-1}) - 1|`.
    pub fit_target_error: f64,
    /// `max_{J <= j < n} |theta_b(z_j)|`.
    pub fit_zero_error: f64,
    pub c_norm: f64,
    /// `(sqrt(B) / A) epsilon M`.
    pub c_norm_bound: f64,
    pub rho: Complex64,
    pub off_target_residual: f64,
    /// `||b|| sqrt(B)`, the scale `off_target_residual` is judged against.
    pub residual_scale: f64,
    /// `1 - epsilon - gamma epsilon M sqrt(B) / A`.
    pub lower_bound_check: f64,
    pub success: bool,
}

fn fit_b(points: &[f64], lambdas: &[f64], target: f64) -> Option<Vec<f64>> {
    let w = DMatrix::from_fn(points.len(), lambdas.len(), |i, k| {
        real_pow(points[i], lambdas[k])
    });
    let mut t = DVector::zeros(points.len());
    t[0] = target;
    let svd = w.svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(&t, smax * 1e-15)
        .ok()
        .map(|b| b.as_slice().to_vec())
}

fn theta_real(b: &[f64], lambdas: &[f64], z: f64) -> f64 {
    b.iter()
        .zip(lambdas)
        .map(|(c, &l)| c * real_pow(z, l))
        .sum()
}

/// One step of the row-by-row extension: shows `delta_{J-1}` lies in the
/// range of the synthesis map on rows `>= J - 1`, given an outer frame on
/// rows `>= J`.
pub fn extension_step(
    spec: &CarlesonSpectrum,
    lam: &ExponentSet,
    j: usize,
    cfg: &ExtensionConfig,
) -> Result<ExtensionStepReport> {
    spec.require_real_positive("extension_step")?;
    check_prefix(spec, cfg.n_rows)?;
    if j == 0 || j >= cfg.n_rows {
        return Err(Error::Truncation(format!(
            "J = {j} outside 1..{} for the row truncation",
            cfg.n_rows
        )));
    }
    if !(cfg.epsilon_fraction > 0.0 && cfg.epsilon_fraction < 1.0) {
        return Err(invalid("epsilon_fraction", "must lie in (0, 1)"));
    }
    let n = cfg.n_rows;
    let outer = synthesis_matrix(spec, lam, j, n - j, cfg.k_cols)?;
    let est = frame_bounds(&outer)?;
    if !(est.a_hat > 0.0) {
        return Err(Error::NotOuterFrame {
            row_offset: j,
            a_hat: est.a_hat,
        });
    }
    let (a, b_bound) = (est.a_hat, est.b_hat);
    let m_norm = tail_defect(spec, 0, n)?.sqrt();
    let gamma = gamma_const(spec, lam, j, cfg.k_cols)?;
    let k_ratio = gamma * m_norm * b_bound.sqrt() / a;
    let epsilon = cfg.epsilon_fraction * 0.5 / (1.0 + k_ratio);

    let g_prev = spec.point(j - 1).weight();
    let points: Vec<f64> = (j - 1..n).map(|i| spec.point(i).r()).collect();
    let max_support = cfg.max_support.min(cfg.k_cols);
    let mut support = points.len().min(max_support);
    let (mut b, mut target_err, mut zero_err);
    loop {
        let lambdas = &lam.values()[..support];
        let fitted = fit_b(&points, lambdas, 1.0 / g_prev);
        (target_err, zero_err) = match &fitted {
            Some(bv) => (
                (g_prev * theta_real(bv, lambdas, points[0]) - 1.0).abs(),
                points[1..]
                    .iter()
                    .map(|&z| theta_real(bv, lambdas, z).abs())
                    .fold(0.0, f64::max),
            ),
            None => (f64::INFINITY, f64::INFINITY),
        };
        b = fitted.unwrap_or_default();
        if target_err < epsilon && zero_err < epsilon {
            break;
        }
        if support >= max_support {
            return Err(Error::FitFailed {
                j,
                epsilon,
                support,
                target_error: target_err,
                zero_error: zero_err,
            });
        }
        support = (support * 2).min(max_support);
    }

    let mut b_full = vec![Complex64::new(0.0, 0.0); cfg.k_cols];
    for (dst, &src) in b_full.iter_mut().zip(&b) {
        *dst = Complex64::new(src, 0.0);
    }
    let c = row_space_projection(&b_full, &outer)?;
    let c_norm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let diff: Vec<Complex64> = b_full.iter().zip(&c).map(|(x, y)| x - y).collect();
    let extended = synthesis_matrix(spec, lam, j - 1, n - j + 1, cfg.k_cols)?;
    let image = extended.apply(&diff)?;
    let rho = image[0];
    let off_target_residual = image[1..].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let residual_scale = b.iter().map(|x| x * x).sum::<f64>().sqrt() * b_bound.sqrt();
    let lower_bound_check = 1.0 - epsilon - epsilon * k_ratio;
    let c_norm_bound = b_bound.sqrt() / a * epsilon * m_norm;
    let success = lower_bound_check > 0.0
        && rho.norm() >= lower_bound_check - 1e-9
        && c_norm <= c_norm_bound
        && off_target_residual <= cfg.residual_tol * residual_scale;
    Ok(ExtensionStepReport {
        j,
        n_rows: n,
        k_cols: cfg.k_cols,
        a_hat: a,
        b_hat: b_bound,
        gamma,
        m_norm,
        epsilon,
        b_support: b.into_iter().enumerate().collect(),
        fit_target_error: target_err,
        fit_zero_error: zero_err,
        c_norm,
        c_norm_bound,
        rho,
        off_target_residual,
        residual_scale,
        lower_bound_check,
        success,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionInduction {
    pub j_start: usize,
    pub steps: Vec<ExtensionStepReport>,
    /// Frame bounds on all rows `0..n_rows`, computed independently.
    pub final_bounds: FrameBoundEstimate,
    pub all_succeeded: bool,
}

/// Runs [`extension_step`] for `J = j_start, j_start - 1, ..., 1`, clamping
/// `j_start` to the last row of the truncation, then re-estimates the frame
/// bounds on every row.
pub fn extension_induction(
    spec: &CarlesonSpectrum,
    lam: &ExponentSet,
    j_start: usize,
    cfg: &ExtensionConfig,
) -> Result<ExtensionInduction> {
    let j_start = j_start.min(cfg.n_rows.saturating_sub(1));
    let mut steps = Vec::with_capacity(j_start);
    for j in (1..=j_start).rev() {
        steps.push(extension_step(spec, lam, j, cfg)?);
    }
    let final_bounds = frame_bounds(&synthesis_matrix(spec, lam, 0, cfg.n_rows, cfg.k_cols)?)?;
    let all_succeeded = steps.iter().all(|s| s.success) && final_bounds.a_hat > 0.0;
    Ok(ExtensionInduction {
        j_start,
        steps,
        final_bounds,
        all_succeeded,
    })
}

/// Pairs `(k, l)`, `k < l`, among the first `n` points with
/// `|z_k^N - z_l^N| < 1e-12`. A pair makes two columns of `{D^{Nk} g}`
/// proportional, so `N N_0` cannot give a frame.
pub fn degenerate_check(spec: &CarlesonSpectrum, n_step: u32) -> Vec<(usize, usize)> {
    let nn = f64::from(n_step);
    let pw: Vec<Complex64> = spec.points().iter().map(|p| power(p, nn)).collect();
    let mut out = Vec::new();
    for k in 0..pw.len() {
        for l in k + 1..pw.len() {
            if (pw[k] - pw[l]).norm() < DEGENERACY_TOL {
                out.push((k, l));
            }
        }
    }
    out
}

/// `f = g_l delta_k - g_k delta_l` over the first `n` coordinates. For a
/// degenerate pair every sample `<f, D^{Nm} g>` cancels.
pub fn null_vector(
    spec: &CarlesonSpectrum,
    k: usize,
    l: usize,
    n: usize,
) -> Result<Vec<Complex64>> {
    check_prefix(spec, n)?;
    if k >= n || l >= n || k == l {
        return Err(invalid("pair", format!("({k}, {l}) invalid for n = {n}")));
    }
    let mut f = vec![Complex64::new(0.0, 0.0); n];
    f[k] = Complex64::new(spec.point(l).weight(), 0.0);
    f[l] = Complex64::new(-spec.point(k).weight(), 0.0);
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSetGuard {
    #[serde(rename = "J")]
    pub j: usize,
    pub n_rows: usize,
    pub kernel_cols: usize,
    /// Unit kernel vector of the synthesis map on rows `J..n_rows`.
    pub kernel: Vec<Complex64>,
    pub kernel_residual: f64,
    pub theta_c_value: Complex64,
    pub tolerance: f64,
    pub safe: bool,
}

/// `theta_c(z) = sum_k c_k z^{lambda_k}`.
pub fn theta_c(c: &[Complex64], lam: &ExponentSet, z: &DiskPoint) -> Complex64 {
    c.iter()
        .zip(lam.values())
        .map(|(ck, &l)| ck * power(z, l))
        .sum()
}

/// Picks the unit kernel vector `c` of the synthesis map on rows
/// `J..n_rows` and first `kernel_cols` exponents (smallest right singular
/// vector), then tests `|theta_c(z_{J-1})| > tol`.
pub fn zero_set_guard(
    spec: &CarlesonSpectrum,
    lam: &ExponentSet,
    j: usize,
    n_rows: usize,
    kernel_cols: usize,
    tol: f64,
) -> Result<ZeroSetGuard> {
    check_prefix(spec, n_rows)?;
    if j == 0 || j >= n_rows {
        return Err(Error::Truncation(format!("J = {j} outside 1..{n_rows}")));
    }
    if kernel_cols <= n_rows - j {
        return Err(invalid(
            "kernel_cols",
            format!(
                "{kernel_cols} columns leave no kernel for {} rows",
                n_rows - j
            ),
        ));
    }
    let m = synthesis_matrix(spec, lam, j, n_rows - j, kernel_cols)?;
    let (v, _) = smallest_right_singular_vector(m.entries()).ok_or(Error::EmptyMatrix)?;
    let kernel: Vec<Complex64> = v.as_slice().to_vec();
    let kernel_residual = m
        .apply(&kernel)?
        .iter()
        .map(|x| x.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let theta_c_value = theta_c(&kernel, lam, spec.point(j - 1));
    Ok(ZeroSetGuard {
        j,
        n_rows,
        kernel_cols,
        kernel,
        kernel_residual,
        theta_c_value,
        tolerance: tol,
        safe: theta_c_value.norm() > tol,
    })
}
