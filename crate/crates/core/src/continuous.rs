//! Discrete frame-bound window from the separation constant and the
//! continuous family `{D^t g}_{t >= 0}`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carleson::{carleson_delta, check_prefix, CarlesonSpectrum};
use crate::error::{invalid, Error, Result};
use crate::exponents::ExponentSet;
use crate::frame_ops::{frame_bounds, power, synthesis_matrix};

/// Quadrature steps summed per parallel chunk. Fixed so sums are reproducible.
const CHUNK: usize = 4096;
/// Default step for [`riemann_energy`].
pub const DEFAULT_DT: f64 = 1e-3;
/// Default cutoff is `DEFAULT_T_SCALE / (-ln r_max)`.
pub const DEFAULT_T_SCALE: f64 = 200.0;

/// `2 (1 - 2 ln delta) / delta^4`.
pub fn delta_frame_bound(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid("delta", format!("{delta} not in (0, 1]")));
    }
    Ok(2.0 * (1.0 - 2.0 * delta.ln()) / delta.powi(4))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub n: usize,
    pub k_cols: usize,
    pub lambda: String,
    pub delta_n: f64,
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub tolerance: f64,
    pub contained: bool,
}

/// Whether `[A_hat, B_hat]` of the `n x K` truncation with `Lambda = N_0`
/// lies in `[1/Delta - tol, Delta + tol]`, `Delta` computed from `delta_n`.
pub fn discrete_sandwich_check(
    spec: &CarlesonSpectrum,
    n: usize,
    k: usize,
    tol: f64,
) -> Result<SandwichReport> {
    discrete_sandwich_check_with(spec, &ExponentSet::naturals(k)?, n, k, tol)
}

/// [`discrete_sandwich_check`] for an arbitrary exponent set.
pub fn discrete_sandwich_check_with(
    spec: &CarlesonSpectrum,
    lam: &ExponentSet,
    n: usize,
    k: usize,
    tol: f64,
) -> Result<SandwichReport> {
    let delta_n = carleson_delta(spec, n)?.delta_n;
    let big_delta = delta_frame_bound(delta_n)?;
    let est = frame_bounds(&synthesis_matrix(spec, lam, 0, n, k)?)?;
    let (lo, hi) = (1.0 / big_delta, big_delta);
    Ok(SandwichReport {
        n,
        k_cols: k,
        lambda: lam.descriptor().to_string(),
        delta_n,
        big_delta,
        window_lo: lo,
        window_hi: hi,
        a_hat: est.a_hat,
        b_hat: est.b_hat,
        tolerance: tol,
        contained: est.a_hat >= lo - tol && est.b_hat <= hi + tol,
    })
}

/// `(1 - z^2) / (-2 ln z)`, the integral of `z^{2t} (1 - z^2)` over `t >= 0`.
pub fn decay_integral(z: f64) -> f64 {
    (1.0 - z) * (1.0 + z) / (-2.0 * z.ln())
}

/// `(lower, upper)` constants of the continuous frame over `t in [0, inf)`:
/// `lower = Delta^{-1} (1 - z0^2) / (-2 ln z0)`, `upper = Delta`.
pub fn continuous_bounds(spec: &CarlesonSpectrum, n: usize) -> Result<(f64, f64)> {
    spec.require_real_positive("continuous_bounds")?;
    check_prefix(spec, n)?;
    let z0 = spec.points()[..n]
        .iter()
        .map(|p| p.r())
        .fold(f64::INFINITY, f64::min);
    let big_delta = delta_frame_bound(carleson_delta(spec, n)?.delta_n)?;
    Ok((decay_integral(z0) / big_delta, big_delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    LeftEndpoint,
    #[default]
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiemannEnergy {
    pub value: f64,
    pub tail_bound: f64,
    pub dt: f64,
    /// Upper end of the integrated range, a whole number of steps.
    pub t_cut: f64,
    pub steps: usize,
    pub quadrature: Quadrature,
    pub warning: Option<String>,
}

struct Support {
    coords: Vec<(Complex64, crate::carleson::DiskPoint)>,
    f_norm_sqr: f64,
    g_norm_sqr: f64,
    r_max: f64,
}

fn support(spec: &CarlesonSpectrum, f: &[Complex64]) -> Result<Support> {
    if f.len() > spec.len() {
        return Err(Error::Truncation(format!(
            "f has {} coordinates, spectrum only {}",
            f.len(),
            spec.len()
        )));
    }
    let coords: Vec<_> = f
        .iter()
        .zip(spec.points())
        .filter(|(fj, _)| fj.norm_sqr() > 0.0)
        .map(|(fj, p)| (*fj, *p))
        .collect();
    Ok(Support {
        f_norm_sqr: coords.iter().map(|(fj, _)| fj.norm_sqr()).sum(),
        g_norm_sqr: coords.iter().map(|(_, p)| p.defect()).sum(),
        r_max: coords.iter().map(|(_, p)| p.r()).fold(0.0, f64::max),
        coords,
    })
}

fn energy_at(s: &Support, t: f64) -> f64 {
    s.coords
        .iter()
        .map(|(fj, p)| fj * power(p, t).conj() * p.weight())
        .sum::<Complex64>()
        .norm_sqr()
}

/// Default cutoff `200 / (-ln r_max)` over the support of `f`.
pub fn default_cutoff(spec: &CarlesonSpectrum, f: &[Complex64]) -> Result<f64> {
    scaled_cutoff(spec, f, DEFAULT_T_SCALE)
}

/// `scale / (-ln r_max)`; the tail bound then carries a factor `exp(-2 scale)`.
pub fn scaled_cutoff(spec: &CarlesonSpectrum, f: &[Complex64], scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("t_scale", "must be positive"));
    }
    let s = support(spec, f)?;
    if s.coords.is_empty() {
        return Ok(0.0);
    }
    Ok(scale / -s.r_max.ln())
}

/// Quadrature of `int_0^T |<f, D^t g>|^2 dt` plus the bound
/// `||f||^2 ||g_supp||^2 r_max^{2T} / (-2 ln r_max)` on the rest.
pub fn riemann_energy(
    spec: &CarlesonSpectrum,
    f: &[Complex64],
    dt: f64,
    t_cut: f64,
    quadrature: Quadrature,
) -> Result<RiemannEnergy> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", "must be positive"));
    }
    if !(t_cut > 0.0 && t_cut.is_finite()) {
        return Err(invalid("T", "must be positive"));
    }
    let s = support(spec, f)?;
    let steps = (t_cut / dt).ceil() as usize;
    let t_end = steps as f64 * dt;
    if s.coords.is_empty() {
        return Ok(RiemannEnergy {
            value: 0.0,
            tail_bound: 0.0,
            dt,
            t_cut: t_end,
            steps,
            quadrature,
            warning: None,
        });
    }
    let n_chunks = steps.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let hi = ((c + 1) * CHUNK).min(steps);
            (c * CHUNK..hi)
                .map(|m| energy_at(&s, m as f64 * dt))
                .sum::<f64>()
        })
        .collect();
    let left: f64 = partial.iter().sum();
    let value = match quadrature {
        Quadrature::LeftEndpoint => dt * left,
        Quadrature::Trapezoid => {
            dt * (left - 0.5 * energy_at(&s, 0.0) + 0.5 * energy_at(&s, t_end))
        }
    };
    let tail_bound =
        s.f_norm_sqr * s.g_norm_sqr * s.r_max.powf(2.0 * t_end) / (-2.0 * s.r_max.ln());
    let warning = (tail_bound > 1e-6 * value)
        .then(|| format!("tail bound {tail_bound:e} exceeds 1e-6 of the value {value:e}; raise T"));
    Ok(RiemannEnergy {
        value,
        tail_bound,
        dt,
        t_cut: t_end,
        steps,
        quadrature,
        warning,
    })
}

/// Writes `t, |<f, D^t g>|^2` every `stride` quadrature steps.
pub fn write_energy_samples<W: Write>(
    spec: &CarlesonSpectrum,
    f: &[Complex64],
    dt: f64,
    t_cut: f64,
    stride: usize,
    writer: W,
) -> Result<()> {
    if stride == 0 || !(dt > 0.0) || !(t_cut > 0.0) {
        return Err(invalid("stride", "stride, dt and T must be positive"));
    }
    let s = support(spec, f)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "energy"])?;
    let steps = (t_cut / dt).ceil() as usize;
    for m in (0..=steps).step_by(stride) {
        let t = m as f64 * dt;
        w.write_record(&[format!("{t:e}"), format!("{:e}", energy_at(&s, t))])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEnergy {
    pub f_tag: String,
    pub norm_sqr: f64,
    pub riemann_value: f64,
    #[serde(rename = "T_cut")]
    pub t_cut: f64,
    pub dt: f64,
    pub tail_bound: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousBoundReport {
    pub n: usize,
    pub delta_used: f64,
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    pub lower_const: f64,
    pub upper_const: f64,
    pub z0: f64,
    pub tolerance: f64,
    pub per_vector_energies: Vec<VectorEnergy>,
    pub holds: bool,
}

/// Options for [`continuous_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyOptions {
    pub dt: f64,
    /// Fixed cutoff; `None` uses `t_scale / (-ln r_max)` per vector.
    pub t_cut: Option<f64>,
    pub t_scale: f64,
    pub quadrature: Quadrature,
    /// Added to each vector's tail bound to form its tolerance.
    pub tol: f64,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        EnergyOptions {
            dt: DEFAULT_DT,
            t_cut: None,
            t_scale: DEFAULT_T_SCALE,
            quadrature: Quadrature::Trapezoid,
            tol: 1e-6,
        }
    }
}

/// Checks `lower ||f||^2 <= int_0^inf |<f, D^t g>|^2 dt <= upper ||f||^2`
/// for each vector, with tolerance `tol + tail_bound`.
pub fn continuous_report(
    spec: &CarlesonSpectrum,
    n: usize,
    vectors: &[(String, Vec<Complex64>)],
    opts: &EnergyOptions,
) -> Result<ContinuousBoundReport> {
    let (lower, upper) = continuous_bounds(spec, n)?;
    let delta_used = carleson_delta(spec, n)?.delta_n;
    let z0 = spec.points()[..n]
        .iter()
        .map(|p| p.r())
        .fold(f64::INFINITY, f64::min);
    let mut per = Vec::with_capacity(vectors.len());
    for (tag, f) in vectors {
        if f.len() > n {
            return Err(Error::Truncation(format!(
                "vector `{tag}` exceeds n = {n} coordinates"
            )));
        }
        let t_cut = match opts.t_cut {
            Some(t) => t,
            None => scaled_cutoff(spec, f, opts.t_scale)?.max(opts.dt),
        };
        let e = riemann_energy(spec, f, opts.dt, t_cut, opts.quadrature)?;
        let norm_sqr: f64 = f.iter().map(|x| x.norm_sqr()).sum();
        let tol = opts.tol + e.tail_bound;
        per.push(VectorEnergy {
            f_tag: tag.clone(),
            norm_sqr,
            riemann_value: e.value,
            t_cut: e.t_cut,
            dt: e.dt,
            tail_bound: e.tail_bound,
            lower_ok: e.value >= lower * norm_sqr - tol,
            upper_ok: e.value <= upper * norm_sqr + tol,
            warning: e.warning,
        });
    }
    let holds = per.iter().all(|v| v.lower_ok && v.upper_ok);
    Ok(ContinuousBoundReport {
        n,
        delta_used,
        big_delta: upper,
        lower_const: lower,
        upper_const: upper,
        z0,
        tolerance: opts.tol,
        per_vector_energies: per,
        holds,
    })
}
