//! Truncated synthesis and analysis maps of `{D^lambda g}` and frame-bound
//! estimates from their singular values.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carleson::{CarlesonSpectrum, DiskPoint};
use crate::error::{invalid, Error, Result};
use crate::exponents::{check_count, ExponentSet};

/// Below this `sigma_min / sigma_max` a matrix is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// `exp(lambda (ln r + i theta))` with the stored `theta` in `[-pi, pi)`.
pub fn power(z: &DiskPoint, lambda: f64) -> Complex64 {
    if lambda == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    Complex64::from_polar(z.r().powf(lambda), lambda * z.theta())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixProvenance {
    pub spectrum: String,
    pub lambda: String,
    pub row_offset: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Rows `j in [row_offset, row_offset + rows)`, columns `lambda_0..lambda_{K-1}`,
/// entries `z_j^{lambda_k} g_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisMatrix {
    entries: DMatrix<Complex64>,
    provenance: MatrixProvenance,
}

impl SynthesisMatrix {
    /// Wraps an arbitrary matrix, mainly for testing the estimators.
    pub fn from_matrix(entries: DMatrix<Complex64>, row_offset: usize) -> Self {
        let provenance = MatrixProvenance {
            spectrum: "explicit".into(),
            lambda: "explicit".into(),
            row_offset,
            rows: entries.nrows(),
            cols: entries.ncols(),
        };
        SynthesisMatrix {
            entries,
            provenance,
        }
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn provenance(&self) -> &MatrixProvenance {
        &self.provenance
    }

    pub fn row_offset(&self) -> usize {
        self.provenance.row_offset
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// `Phi c`.
    pub fn apply(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        if c.len() != self.cols() {
            return Err(invalid(
                "c",
                format!("length {} != {} columns", c.len(), self.cols()),
            ));
        }
        let v = &self.entries * DVector::from_column_slice(c);
        Ok(v.as_slice().to_vec())
    }

    /// `Phi^* f`.
    pub fn apply_adjoint(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        if f.len() != self.rows() {
            return Err(invalid(
                "f",
                format!("length {} != {} rows", f.len(), self.rows()),
            ));
        }
        let v = self.entries.ad_mul(&DVector::from_column_slice(f));
        Ok(v.as_slice().to_vec())
    }

    /// One line per spectrum index: `j, re_0, im_0, re_1, im_1, ...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["j".to_string()];
        for k in 0..self.cols() {
            header.push(format!("re_{k}"));
            header.push(format!("im_{k}"));
        }
        w.write_record(&header)?;
        for i in 0..self.rows() {
            let mut rec = Vec::with_capacity(1 + 2 * self.cols());
            rec.push((self.row_offset() + i).to_string());
            for k in 0..self.cols() {
                let e = self.entries[(i, k)];
                rec.push(format!("{:e}", e.re));
                rec.push(format!("{:e}", e.im));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar describing a CSV export.
    pub fn header_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.provenance)?)
    }
}

pub fn synthesis_matrix(
    spec: &CarlesonSpectrum,
    lam: &ExponentSet,
    row_offset: usize,
    rows: usize,
    cols: usize,
) -> Result<SynthesisMatrix> {
    if rows == 0 || row_offset + rows > spec.len() {
        return Err(Error::Truncation(format!(
            "rows [{row_offset}, {}) outside {} materialized points",
            row_offset + rows,
            spec.len()
        )));
    }
    check_count(lam, cols)?;
    let pts = &spec.points()[row_offset..row_offset + rows];
    let lambdas = &lam.values()[..cols];
    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
    data.par_chunks_mut(rows)
        .zip(lambdas.par_iter())
        .for_each(|(col, &l)| {
            for (e, p) in col.iter_mut().zip(pts) {
                *e = power(p, l) * p.weight();
            }
        });
    Ok(SynthesisMatrix {
        entries: DMatrix::from_vec(rows, cols, data),
        provenance: MatrixProvenance {
            spectrum: spec.generator_tag().to_string(),
            lambda: lam.descriptor().to_string(),
            row_offset,
            rows,
            cols,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBoundEstimate {
    pub a_hat: f64,
    pub b_hat: f64,
    pub row_offset: usize,
    pub j_rows: usize,
    pub k_cols: usize,
    /// True only when a convergence harness saw the drift criterion met.
    pub converged: bool,
    /// `(K, A_hat)` for every truncation evaluated.
    pub history: Vec<(usize, f64)>,
}

/// Singular values of `m` in decreasing order. Wide matrices go through a
/// thin QR of the adjoint first.
fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    let sv = if m.ncols() > m.nrows() {
        m.adjoint().qr().r().singular_values()
    } else {
        m.singular_values()
    };
    let mut out: Vec<f64> = sv.iter().copied().collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

pub fn frame_bounds(m: &SynthesisMatrix) -> Result<FrameBoundEstimate> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let sv = singular_values(&m.entries);
    let smax = sv[0];
    // more rows than columns: the analysis map has a kernel
    let smin = if m.rows() > m.cols() {
        0.0
    } else {
        *sv.last().expect("nonempty")
    };
    let a_hat = smin * smin;
    Ok(FrameBoundEstimate {
        a_hat,
        b_hat: smax * smax,
        row_offset: m.row_offset(),
        j_rows: m.rows(),
        k_cols: m.cols(),
        converged: false,
        history: vec![(m.cols(), a_hat)],
    })
}

/// Grows `K` from `k_start` by `growth_factor` until `A_hat` drifts by less
/// than `rel_tol` across one step. Stops unconverged at the materialized
/// exponent count.
#[allow(clippy::too_many_arguments)]
pub fn frame_bounds_converged(
    spec: &CarlesonSpectrum,
    lam: &ExponentSet,
    row_offset: usize,
    j_rows: usize,
    k_start: usize,
    growth_factor: f64,
    rel_tol: f64,
) -> Result<FrameBoundEstimate> {
    if !(rel_tol > 0.0) {
        return Err(invalid("rel_tol", "must be positive"));
    }
    if !(growth_factor > 1.0 && growth_factor.is_finite()) {
        return Err(invalid("growth_factor", "must be finite and > 1"));
    }
    let cap = lam.len();
    let mut k = k_start;
    let mut est = frame_bounds(&synthesis_matrix(spec, lam, row_offset, j_rows, k)?)?;
    let mut history = est.history.clone();
    loop {
        let next = ((k as f64 * growth_factor).ceil() as usize).min(cap);
        if next <= k {
            est.history = history;
            est.converged = false;
            return Ok(est);
        }
        let prev = est.a_hat;
        est = frame_bounds(&synthesis_matrix(spec, lam, row_offset, j_rows, next)?)?;
        history.push((next, est.a_hat));
        k = next;
        if prev > 0.0 && ((est.a_hat - prev) / prev).abs() < rel_tol {
            est.history = history;
            est.converged = true;
            return Ok(est);
        }
    }
}

/// `sample_k = <f, D^{lambda_k} g> = sum_j f_j conj(z_j^{lambda_k}) g_j`.
pub fn analysis_apply(
    spec: &CarlesonSpectrum,
    lam: &ExponentSet,
    f: &[Complex64],
    k: usize,
) -> Result<Vec<Complex64>> {
    if f.len() > spec.len() {
        return Err(Error::Truncation(format!(
            "f has {} coordinates, spectrum only {}",
            f.len(),
            spec.len()
        )));
    }
    check_count(lam, k)?;
    let pts = &spec.points()[..f.len()];
    Ok(lam.values()[..k]
        .par_iter()
        .map(|&l| {
            f.iter()
                .zip(pts)
                .map(|(fj, p)| fj * power(p, l).conj() * p.weight())
                .sum()
        })
        .collect())
}

/// Thin QR of `Phi^*` with a rank check on `R`.
struct AdjointQr {
    q: DMatrix<Complex64>,
    r: DMatrix<Complex64>,
}

fn adjoint_qr(m: &SynthesisMatrix) -> Result<AdjointQr> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if m.rows() > m.cols() {
        return Err(Error::RankDeficient {
            sigma_min: 0.0,
            sigma_max: singular_values(&m.entries)[0],
        });
    }
    let qr = m.entries.adjoint().qr();
    let (q, r) = qr.unpack();
    let sv = singular_values(&r);
    let (smax, smin) = (sv[0], *sv.last().expect("nonempty"));
    if !(smin > RANK_TOL * smax) {
        return Err(Error::RankDeficient {
            sigma_min: smin,
            sigma_max: smax,
        });
    }
    Ok(AdjointQr { q, r })
}

/// Least-squares `f_hat` with `Phi^* f_hat` closest to `samples`.
pub fn reconstruct(samples: &[Complex64], m: &SynthesisMatrix) -> Result<Vec<Complex64>> {
    if samples.len() != m.cols() {
        return Err(invalid(
            "samples",
            format!("length {} != {} columns", samples.len(), m.cols()),
        ));
    }
    let AdjointQr { q, r } = adjoint_qr(m)?;
    let rhs = q.ad_mul(&DVector::from_column_slice(samples));
    let f = r.solve_upper_triangular(&rhs).ok_or(Error::RankDeficient {
        sigma_min: 0.0,
        sigma_max: f64::NAN,
    })?;
    Ok(f.as_slice().to_vec())
}

/// Minimal-norm `c` with `Phi c = a`.
pub fn interpolate(a: &[Complex64], m: &SynthesisMatrix) -> Result<Vec<Complex64>> {
    if a.len() != m.rows() {
        return Err(invalid(
            "a",
            format!("length {} != {} rows", a.len(), m.rows()),
        ));
    }
    let AdjointQr { q, r } = adjoint_qr(m)?;
    let y = r
        .adjoint()
        .solve_lower_triangular(&DVector::from_column_slice(a))
        .ok_or(Error::RankDeficient {
            sigma_min: 0.0,
            sigma_max: f64::NAN,
        })?;
    Ok((q * y).as_slice().to_vec())
}

/// Orthogonal projection of `b` onto the row space of `m`, i.e.
/// `Phi^* (Phi Phi^*)^{-1} Phi b`.
pub fn row_space_projection(b: &[Complex64], m: &SynthesisMatrix) -> Result<Vec<Complex64>> {
    if b.len() != m.cols() {
        return Err(invalid(
            "b",
            format!("length {} != {} columns", b.len(), m.cols()),
        ));
    }
    let AdjointQr { q, .. } = adjoint_qr(m)?;
    let bv = DVector::from_column_slice(b);
    Ok((&q * q.ad_mul(&bv)).as_slice().to_vec())
}

/// Right singular vector for the smallest singular value of `m` restricted to
/// its first `cols` columns, normalized to unit length. Needs `cols > rows`
/// for a nontrivial kernel.
pub(crate) fn smallest_right_singular_vector(
    m: &DMatrix<Complex64>,
) -> Option<(DVector<Complex64>, f64)> {
    // pad to square so the thin SVD exposes the full right singular basis
    let (r, c) = m.shape();
    let mut sq = DMatrix::zeros(c.max(r), c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t?;
    let (idx, &s) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let v = vt.row(idx).adjoint();
    // fix the phase so the largest entry is real and positive
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
    let scale = pivot.conj() / (pivot.norm() * v.norm());
    Some((v * scale, s))
}
