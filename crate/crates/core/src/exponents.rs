//! Exponent sets and the scalar functionals attached to them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::carleson::CarlesonSpectrum;
use crate::error::{invalid, Error, Result};

/// Structure of an exponent set beyond its materialized values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ExponentKind {
    /// `lambda_k = step * k + jitters[k]` with `0 <= jitters[k] < step`.
    JitteredArithmetic {
        step: u32,
        jitters: Vec<f64>,
    },
    Explicit,
}

/// Sorted finite prefix of a countable `Lambda` in `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExponentSet")]
pub struct ExponentSet {
    values: Vec<f64>,
    kind: ExponentKind,
    descriptor: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExponentSet {
    values: Vec<f64>,
    kind: ExponentKind,
    descriptor: String,
}

impl TryFrom<RawExponentSet> for ExponentSet {
    type Error = Error;

    /// Rebuilds through the constructors so a file cannot skip validation.
    fn try_from(raw: RawExponentSet) -> Result<Self> {
        let set = match raw.kind {
            ExponentKind::JitteredArithmetic { step, jitters } => {
                let set = ExponentSet::jittered(step, jitters)?;
                if set.values != raw.values {
                    return Err(Error::InvalidExponents(
                        "values disagree with step and jitters".into(),
                    ));
                }
                set
            }
            ExponentKind::Explicit => ExponentSet::explicit(raw.values)?,
        };
        Ok(set.with_descriptor(raw.descriptor))
    }
}

impl ExponentSet {
    /// `lambda_k = step * k + jitters[k]`.
    pub fn jittered(step: u32, jitters: Vec<f64>) -> Result<Self> {
        if step == 0 {
            return Err(invalid("N", "must be positive"));
        }
        if jitters.is_empty() {
            return Err(Error::InvalidExponents("no exponents materialized".into()));
        }
        let n = f64::from(step);
        if let Some(k) = jitters.iter().position(|j| !(*j >= 0.0 && *j < n)) {
            return Err(Error::InvalidExponents(format!(
                "jitter j_{k} = {} outside [0, {step})",
                jitters[k]
            )));
        }
        let values = jitters
            .iter()
            .enumerate()
            .map(|(k, j)| n * k as f64 + j)
            .collect();
        let zero = jitters.iter().all(|&j| j == 0.0);
        let descriptor = match (step, zero) {
            (1, true) => format!("naturals(count={})", jitters.len()),
            (_, true) => format!("arith(N={step},count={})", jitters.len()),
            _ => format!("jittered(N={step},count={})", jitters.len()),
        };
        Ok(ExponentSet {
            values,
            kind: ExponentKind::JitteredArithmetic { step, jitters },
            descriptor,
        })
    }

    /// `{0, N, 2N, ...}` with `count` elements.
    pub fn arithmetic(step: u32, count: usize) -> Result<Self> {
        Self::jittered(step, vec![0.0; count])
    }

    /// `{0, 1, 2, ...}` with `count` elements.
    pub fn naturals(count: usize) -> Result<Self> {
        Self::arithmetic(1, count)
    }

    /// Jitters drawn uniformly from `[0, step)`.
    pub fn jittered_random<R: Rng + ?Sized>(step: u32, count: usize, rng: &mut R) -> Result<Self> {
        let n = f64::from(step);
        let jitters = (0..count).map(|_| rng.random::<f64>() * n).collect();
        Self::jittered(step, jitters)
    }

    /// Integer jitters drawn uniformly from `{0, ..., step - 1}`.
    pub fn jittered_random_integer<R: Rng + ?Sized>(
        step: u32,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let jitters = (0..count)
            .map(|_| f64::from(rng.random_range(0..step)))
            .collect();
        Self::jittered(step, jitters)
    }

    /// `{1, 2, 4, 8, ...}` with `count` elements.
    pub fn dyadic(count: usize) -> Result<Self> {
        if count == 0 || count > 1000 {
            return Err(invalid("count", format!("{count} not in 1..=1000")));
        }
        let values = (0..count).map(|k| 2f64.powi(k as i32)).collect();
        let mut out = Self::explicit(values)?;
        out.descriptor = format!("dyadic(count={count})");
        Ok(out)
    }

    /// Arbitrary strictly increasing nonnegative values.
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidExponents("no exponents materialized".into()));
        }
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidExponents(format!(
                "lambda_{k} = {} is not a finite nonnegative real",
                values[k]
            )));
        }
        if let Some(k) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidExponents(format!(
                "values not strictly increasing at index {}",
                k + 1
            )));
        }
        let descriptor = format!("explicit(count={})", values.len());
        Ok(ExponentSet {
            values,
            kind: ExponentKind::Explicit,
            descriptor,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> &ExponentKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn with_descriptor(mut self, descriptor: impl Into<String>) -> Self {
        self.descriptor = descriptor.into();
        self
    }

    /// Step `N` for jittered-arithmetic sets.
    pub fn step(&self) -> Option<u32> {
        match self.kind {
            ExponentKind::JitteredArithmetic { step, .. } => Some(step),
            ExponentKind::Explicit => None,
        }
    }

    pub fn is_integer_valued(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0)
    }

    /// First `k` exponents as a set of the same kind.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        check_count(self, k)?;
        let mut out = match &self.kind {
            ExponentKind::JitteredArithmetic { step, jitters } => {
                Self::jittered(*step, jitters[..k].to_vec())?
            }
            ExponentKind::Explicit => Self::explicit(self.values[..k].to_vec())?,
        };
        out.descriptor = format!("{}[..{k}]", self.descriptor);
        Ok(out)
    }

    /// Every value strictly below this bound is materialized.
    fn known_below(&self) -> f64 {
        match &self.kind {
            ExponentKind::JitteredArithmetic { step, jitters } => {
                f64::from(*step) * jitters.len() as f64
            }
            ExponentKind::Explicit => {
                let last = *self.values.last().expect("nonempty");
                // everything <= last is known
                last + f64::EPSILON * last.max(1.0)
            }
        }
    }
}

pub(crate) fn check_count(lam: &ExponentSet, k: usize) -> Result<()> {
    if k == 0 || k > lam.len() {
        return Err(Error::Truncation(format!(
            "K = {k} outside 1..={} materialized exponents",
            lam.len()
        )));
    }
    Ok(())
}

/// `z^lambda` on `[0, 1)` with `0^0 = 1`.
pub(crate) fn real_pow(z: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else if z == 0.0 {
        0.0
    } else {
        (lambda * z.ln()).exp()
    }
}

/// Outcome of a Muntz-Szasz partial sum. Convergence is never claimed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsVerdict {
    DivergentAnalytic,
    DivergentNumericThreshold,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsSum {
    pub partial_sum: f64,
    pub verdict: MsVerdict,
}

/// `lambda / (lambda^2 + 1)`.
pub fn ms_summand(lambda: f64) -> f64 {
    lambda / (lambda * lambda + 1.0)
}

/// Partial Muntz-Szasz sum over the first `k` exponents.
pub fn ms_sum(lam: &ExponentSet, k: usize, threshold: f64) -> Result<MsSum> {
    check_count(lam, k)?;
    let partial_sum: f64 = lam.values[..k]
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| ms_summand(l))
        .sum();
    // jittered-arithmetic sets dominate a multiple of the harmonic series
    let verdict = if lam.step().is_some() {
        MsVerdict::DivergentAnalytic
    } else if partial_sum > threshold {
        MsVerdict::DivergentNumericThreshold
    } else {
        MsVerdict::Inconclusive
    };
    Ok(MsSum {
        partial_sum,
        verdict,
    })
}

/// Truncated `sum_k z^{lambda_k}` and, for jittered-arithmetic sets, a bound
/// on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaValue {
    pub partial: f64,
    pub tail_bound: Option<f64>,
}

impl ThetaValue {
    pub fn upper(&self) -> Option<f64> {
        self.tail_bound.map(|t| self.partial + t)
    }
}

pub fn theta(lam: &ExponentSet, z: f64, k: usize) -> Result<ThetaValue> {
    check_count(lam, k)?;
    if !(0.0..1.0).contains(&z) {
        return Err(invalid("z", format!("{z} not in [0, 1)")));
    }
    let partial = lam.values[..k].iter().map(|&l| real_pow(z, l)).sum();
    // lambda_k >= N k, so the tail is dominated by sum_{k >= K} z^{N k}
    let tail_bound = lam.step().map(|step| {
        let n = f64::from(step);
        real_pow(z, n * k as f64) / (1.0 - real_pow(z, n))
    });
    Ok(ThetaValue {
        partial,
        tail_bound,
    })
}

/// `max_z (1 - z) theta(z)` over `grid`, using every materialized exponent.
pub fn theta_sup_check(lam: &ExponentSet, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(invalid("grid", "empty"));
    }
    let mut sup = f64::NEG_INFINITY;
    for &z in grid {
        let t = theta(lam, z, lam.len())?;
        sup = sup.max((1.0 - z) * t.partial);
    }
    Ok(sup)
}

/// Grid `1 - 2^{-i}` for `i = 0..count`.
pub fn dyadic_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| 1.0 - 0.5f64.powi(i as i32)).collect()
}

/// `sqrt((1 - z^2) theta(z^2))` at `z = z_{j-1}`.
pub fn gamma_const(spec: &CarlesonSpectrum, lam: &ExponentSet, j: usize, k: usize) -> Result<f64> {
    spec.require_real_positive("gamma_const")?;
    if j == 0 || j > spec.len() {
        return Err(Error::Truncation(format!(
            "J = {j} outside 1..={}",
            spec.len()
        )));
    }
    let p = spec.point(j - 1);
    let z = p.r();
    let t = theta(lam, z * z, k)?;
    Ok((p.defect() * t.partial).sqrt())
}

/// One `(mu, t)` cell of the block-density table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSum {
    pub mu: f64,
    pub t: f64,
    pub block_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub lambda: String,
    /// `(K, partial sum)` at `K = 1, 2, 4, ...` and at the full length.
    pub ms_partial_sums: Vec<(usize, f64)>,
    pub ms_verdict: MsVerdict,
    pub l_estimate: f64,
    pub mu_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub t_max: f64,
    pub per_mu_sup: Vec<f64>,
    pub table: Vec<BlockSum>,
    pub warnings: Vec<String>,
}

/// Grids for [`log_block_density`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrids {
    pub mu_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub ms_threshold: f64,
}

impl DensityGrids {
    /// `mu in {2, 4, ..., 32}` and 64 log-spaced `t` in `[t_hi / 16, t_hi]`
    /// with `t_hi = lambda_max / 32`.
    pub fn default_for(lam: &ExponentSet) -> Self {
        let mu_grid = vec![2.0, 4.0, 8.0, 16.0, 32.0];
        let lmax = *lam.values.last().expect("nonempty");
        let t_hi = (lmax / 32.0).max(1.0);
        let t_lo = t_hi / 16.0;
        let steps = 64;
        let t_grid = (0..steps)
            .map(|i| t_lo * (t_hi / t_lo).powf(i as f64 / (steps - 1) as f64))
            .collect();
        DensityGrids {
            mu_grid,
            t_grid,
            ms_threshold: 10.0,
        }
    }
}

/// Estimates `L(Lambda)` by a max over `t_grid` (for the limsup) and a min
/// over `mu_grid` (for the infimum).
pub fn log_block_density(lam: &ExponentSet, grids: &DensityGrids) -> Result<DensityReport> {
    let DensityGrids {
        mu_grid,
        t_grid,
        ms_threshold,
    } = grids;
    if mu_grid.is_empty() || mu_grid.iter().any(|m| !(*m > 1.0 && m.is_finite())) {
        return Err(invalid("mu_grid", "values must be finite and > 1"));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(invalid("t_grid", "values must be finite and > 0"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("t_grid", "must be increasing"));
    }

    let values = &lam.values;
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &l in values {
        if l > 0.0 {
            acc += 1.0 / l;
        }
        prefix.push(acc);
    }
    let block = |lo: f64, hi: f64| {
        let a = values.partition_point(|&l| l < lo);
        let b = values.partition_point(|&l| l <= hi);
        prefix[b] - prefix[a]
    };

    let known = lam.known_below();
    let t_max = *t_grid.last().expect("nonempty");
    let mut warnings = Vec::new();
    let mut table = Vec::with_capacity(mu_grid.len() * t_grid.len());
    let mut per_mu_sup = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        if mu * t_max > known {
            warnings.push(format!(
                "materialized exponents end near {known}, below mu * t_max = {}",
                mu * t_max
            ));
        }
        let mut sup = 0.0f64;
        for &t in t_grid {
            let s = block(t, mu * t);
            sup = sup.max(s);
            table.push(BlockSum {
                mu,
                t,
                block_sum: s,
            });
        }
        per_mu_sup.push(sup);
    }
    let l_estimate = mu_grid
        .iter()
        .zip(&per_mu_sup)
        .map(|(mu, s)| s / mu.ln())
        .fold(f64::INFINITY, f64::min);

    let mut ms_partial_sums = Vec::new();
    let mut k = 1;
    while k < lam.len() {
        ms_partial_sums.push((k, ms_sum(lam, k, *ms_threshold)?.partial_sum));
        k *= 2;
    }
    let full = ms_sum(lam, lam.len(), *ms_threshold)?;
    ms_partial_sums.push((lam.len(), full.partial_sum));

    Ok(DensityReport {
        lambda: lam.descriptor.clone(),
        ms_partial_sums,
        ms_verdict: full.verdict,
        l_estimate,
        mu_grid: mu_grid.clone(),
        t_grid: t_grid.clone(),
        t_max,
        per_mu_sup,
        table,
        warnings,
    })
}

fn require_known_blocks(lam: &ExponentSet, block: u32, k_max: usize) -> Result<()> {
    let end = f64::from(block) * (k_max + 1) as f64;
    let known = lam.known_below();
    if known < end {
        return Err(Error::Truncation(format!(
            "exponents known below {known}, blocks need {end}"
        )));
    }
    Ok(())
}

fn block_members(lam: &ExponentSet, block: u32, k: usize) -> &[f64] {
    let n = f64::from(block);
    let lo = n * k as f64;
    let hi = n * (k + 1) as f64;
    let a = lam.values.partition_point(|&l| l < lo);
    let b = lam.values.partition_point(|&l| l < hi);
    &lam.values[a..b]
}

/// Every block `[N k, N (k + 1))`, `k <= k_max`, holds at least one and
/// fewer than `max_count` exponents.
pub fn block_count_check(
    lam: &ExponentSet,
    block: u32,
    max_count: usize,
    k_max: usize,
) -> Result<bool> {
    if block == 0 {
        return Err(invalid("N", "must be positive"));
    }
    require_known_blocks(lam, block, k_max)?;
    Ok((0..=k_max).all(|k| {
        let c = block_members(lam, block, k).len();
        c >= 1 && c < max_count
    }))
}

/// Smallest exponent of each block `[N k, N (k + 1))`, `k <= k_max`, as a
/// jittered-arithmetic set.
pub fn select_subsequence(lam: &ExponentSet, block: u32, k_max: usize) -> Result<ExponentSet> {
    if block == 0 {
        return Err(invalid("N", "must be positive"));
    }
    require_known_blocks(lam, block, k_max)?;
    let n = f64::from(block);
    let mut jitters = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let first = *block_members(lam, block, k)
            .first()
            .ok_or(Error::EmptyBlock {
                lo: n * k as f64,
                hi: n * (k + 1) as f64,
            })?;
        jitters.push(first - n * k as f64);
    }
    let out = ExponentSet::jittered(block, jitters)?;
    let descriptor = format!("select({}, N={block})", lam.descriptor);
    Ok(out.with_descriptor(descriptor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleson::{make_geometric_real, DiskPoint};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deserialization_revalidates() {
        let set = ExponentSet::jittered(2, vec![0.5, 1.0])
            .unwrap()
            .with_descriptor("mine");
        let back: ExponentSet =
            serde_json::from_str(&serde_json::to_string(&set).unwrap()).unwrap();
        assert_eq!(back, set);
        let bad_jitter = r#"{"values":[3.0],"kind":{"kind":"jittered_arithmetic","step":2,"jitters":[3.0]},"descriptor":"x"}"#;
        assert!(serde_json::from_str::<ExponentSet>(bad_jitter).is_err());
        let stale = r#"{"values":[0.0],"kind":{"kind":"jittered_arithmetic","step":2,"jitters":[1.0]},"descriptor":"x"}"#;
        assert!(serde_json::from_str::<ExponentSet>(stale).is_err());
        let unsorted = r#"{"values":[2.0,1.0],"kind":{"kind":"explicit"},"descriptor":"x"}"#;
        assert!(serde_json::from_str::<ExponentSet>(unsorted).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(ExponentSet::jittered(2, vec![0.0, 2.0]).is_err());
        assert!(ExponentSet::jittered(0, vec![0.0]).is_err());
        assert!(ExponentSet::explicit(vec![0.0, 0.0]).is_err());
        assert!(ExponentSet::explicit(vec![-1.0]).is_err());
        let j = ExponentSet::jittered(3, vec![2.5, 0.0, 1.0]).unwrap();
        assert_eq!(j.values(), &[2.5, 3.0, 7.0]);
    }

    #[test]
    fn ms_sum_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let jit = ExponentSet::jittered_random(3, 50, &mut rng).unwrap();
        assert_eq!(
            ms_sum(&jit, 50, 1e9).unwrap().verdict,
            MsVerdict::DivergentAnalytic
        );

        let dy = ExponentSet::dyadic(60).unwrap();
        let s = ms_sum(&dy, 60, 2.0).unwrap();
        // geometric-decay oracle: sum_k 2^k / (4^k + 1) < sum_k 2^{-k} + 1/2 tail-free
        let oracle: f64 = (0..60).map(|k| 2f64.powi(k) / (4f64.powi(k) + 1.0)).sum();
        assert_relative_eq!(s.partial_sum, oracle, max_relative = 1e-14);
        assert!(s.partial_sum < 2.0);
        assert_eq!(s.verdict, MsVerdict::Inconclusive);

        let zero = ExponentSet::explicit(vec![0.0]).unwrap();
        let z = ms_sum(&zero, 1, 2.0).unwrap();
        assert_eq!((z.partial_sum, z.verdict), (0.0, MsVerdict::Inconclusive));

        let long = ExponentSet::explicit((1..2000).map(f64::from).collect()).unwrap();
        assert_eq!(
            ms_sum(&long, 1999, 5.0).unwrap().verdict,
            MsVerdict::DivergentNumericThreshold
        );
    }

    #[test]
    fn ms_summand_bounds() {
        assert_eq!(ms_summand(1.0), 0.5);
        for i in 0..1000 {
            let l = i as f64 * 0.01;
            let s = ms_summand(l);
            assert!((0.0..=0.5).contains(&s));
        }
    }

    #[test]
    fn theta_examples() {
        let nat = ExponentSet::naturals(200).unwrap();
        assert_eq!(theta(&nat, 0.0, 200).unwrap().partial, 1.0);
        let t = theta(&nat, 0.5, 200).unwrap();
        assert_relative_eq!(t.partial, 2.0, max_relative = 1e-15);
        assert_relative_eq!(t.upper().unwrap(), 2.0, max_relative = 1e-15);

        let even = ExponentSet::arithmetic(2, 200).unwrap();
        assert_relative_eq!(
            theta(&even, 0.5, 200).unwrap().partial,
            4.0 / 3.0,
            max_relative = 1e-15
        );

        assert!(theta(&nat, 1.0, 10).is_err());
    }

    #[test]
    fn theta_tail_bound_covers_the_omitted_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lam = ExponentSet::jittered_random(3, 4000, &mut rng).unwrap();
        for &z in &[0.3, 0.9, 0.99] {
            let short = theta(&lam, z, 40).unwrap();
            let long = theta(&lam, z, 4000).unwrap();
            assert!(long.partial <= short.upper().unwrap() * (1.0 + 1e-14));
        }
    }

    #[test]
    fn theta_sup_examples() {
        let grid = dyadic_grid(14);
        let nat = ExponentSet::naturals(1 << 18).unwrap();
        let s = theta_sup_check(&nat, &grid).unwrap();
        assert!(s <= 1.0 + 1e-12 && s > 0.99, "{s}");

        let even = ExponentSet::arithmetic(2, 1 << 17).unwrap();
        assert!(theta_sup_check(&even, &grid).unwrap() <= 1.0 + 1e-12);

        let zero = ExponentSet::explicit(vec![0.0]).unwrap();
        assert_eq!(theta_sup_check(&zero, &grid).unwrap(), 1.0);
    }

    #[test]
    fn gamma_examples() {
        let spec = make_geometric_real(0.5, 0.5, 5).unwrap();
        let nat = ExponentSet::naturals(400).unwrap();
        // z_0 = 0.5: sqrt(0.75 / 0.75)
        assert_relative_eq!(
            gamma_const(&spec, &nat, 1, 400).unwrap(),
            1.0,
            max_relative = 1e-14
        );

        let zero = ExponentSet::explicit(vec![0.0]).unwrap();
        let small =
            CarlesonSpectrum::from_points(vec![DiskPoint::real(1e-9).unwrap()], "t").unwrap();
        assert_relative_eq!(
            gamma_const(&small, &zero, 1, 1).unwrap(),
            1.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn density_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lam = ExponentSet::jittered_random(3, 60_000, &mut rng).unwrap();
        let r = log_block_density(&lam, &DensityGrids::default_for(&lam)).unwrap();
        assert!(
            (r.l_estimate - 1.0 / 3.0).abs() < 0.1 / 3.0,
            "{}",
            r.l_estimate
        );
        assert!(r.warnings.is_empty());
        assert_eq!(r.table.len(), r.mu_grid.len() * r.t_grid.len());

        let nat = ExponentSet::naturals(200_000).unwrap();
        let r = log_block_density(&nat, &DensityGrids::default_for(&nat)).unwrap();
        assert!((r.l_estimate - 1.0).abs() < 0.1, "{}", r.l_estimate);

        let dy = ExponentSet::dyadic(64).unwrap();
        let r = log_block_density(&dy, &DensityGrids::default_for(&dy)).unwrap();
        assert!(r.l_estimate < 0.05);
        // oracle: a block [t, mu t] holds at most log2(mu) + 1 dyadic points, each <= 1/t
        for cell in &r.table {
            assert!(cell.block_sum <= (cell.mu.log2() + 1.0) / cell.t);
        }
    }

    #[test]
    fn density_warns_on_short_materialization() {
        let nat = ExponentSet::naturals(100).unwrap();
        let grids = DensityGrids {
            mu_grid: vec![2.0],
            t_grid: vec![10.0, 80.0],
            ms_threshold: 10.0,
        };
        let r = log_block_density(&nat, &grids).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn density_ignores_finite_deletions() {
        let nat = ExponentSet::naturals(100_000).unwrap();
        let grids = DensityGrids::default_for(&nat);
        let trimmed = ExponentSet::explicit(
            nat.values()
                .iter()
                .copied()
                .filter(|v| !(3.0..50.0).contains(v))
                .collect(),
        )
        .unwrap();
        let a = log_block_density(&nat, &grids).unwrap().l_estimate;
        let b = log_block_density(&trimmed, &grids).unwrap().l_estimate;
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn block_count_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let jit = ExponentSet::jittered_random(4, 100, &mut rng).unwrap();
        assert!(block_count_check(&jit, 4, 2, 99).unwrap());

        let dy = ExponentSet::dyadic(20).unwrap();
        // oracle: block [2, 3) is empty
        assert!(!block_count_check(&dy, 1, 100, 10).unwrap());

        let nat = ExponentSet::naturals(50).unwrap();
        assert!(block_count_check(&nat, 1, 2, 49).unwrap());
        assert!(!block_count_check(&nat, 2, 2, 10).unwrap());
        assert!(block_count_check(&nat, 1, 2, 50).is_err());
    }

    #[test]
    fn subsequence_examples() {
        let nat = ExponentSet::naturals(40).unwrap();
        let sel = select_subsequence(&nat, 2, 19).unwrap();
        assert_eq!(
            sel.values(),
            (0..20)
                .map(|k| 2.0 * k as f64)
                .collect::<Vec<_>>()
                .as_slice()
        );

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let jit = ExponentSet::jittered_random(3, 30, &mut rng).unwrap();
        assert_eq!(
            select_subsequence(&jit, 3, 29).unwrap().values(),
            jit.values()
        );

        let a = ExponentSet::jittered_random(2, 30, &mut rng).unwrap();
        let b = ExponentSet::jittered_random(2, 30, &mut rng).unwrap();
        let mut union: Vec<f64> = a.values().iter().chain(b.values()).copied().collect();
        union.sort_by(f64::total_cmp);
        union.dedup();
        let u = ExponentSet::explicit(union).unwrap();
        let sel = select_subsequence(&u, 2, 28).unwrap();
        for (k, l) in sel.values().iter().enumerate() {
            let j = l - 2.0 * k as f64;
            assert!((0.0..2.0).contains(&j));
            assert!(u.values().contains(l));
        }

        let dy = ExponentSet::dyadic(20).unwrap();
        assert!(matches!(
            select_subsequence(&dy, 1, 10),
            Err(Error::EmptyBlock { .. })
        ));
    }
}
