//! Points of the unit disk, Carleson spectra, and the quantities attached to
//! them: the separation constant, tail defects, Blaschke products and the
//! canonical frame vector `g_j = sqrt(1 - |z_j|^2)`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tolerance for `re = r cos(theta)` style consistency checks.
const POLAR_TOL: f64 = 1e-14;

/// A nonzero point of the open unit disk in polar form.
///
/// `theta` is always the representative in `[-pi, pi)`; fractional powers
/// use exactly this representative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct DiskPoint {
    re: f64,
    im: f64,
    r: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    r: f64,
    theta: f64,
}

impl TryFrom<RawPoint> for DiskPoint {
    type Error = Error;

    fn try_from(raw: RawPoint) -> Result<Self> {
        if !(-PI..PI).contains(&raw.theta) {
            return Err(Error::InvalidPoint(format!(
                "theta = {} outside [-pi, pi)",
                raw.theta
            )));
        }
        DiskPoint::from_polar(raw.r, raw.theta)
    }
}

impl From<DiskPoint> for RawPoint {
    fn from(p: DiskPoint) -> Self {
        RawPoint {
            r: p.r,
            theta: p.theta,
        }
    }
}

/// Maps an angle to its representative in `[-pi, pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return exactly 2*pi after rounding
    if t >= PI {
        t - 2.0 * PI
    } else {
        t
    }
}

impl DiskPoint {
    pub fn from_polar(r: f64, theta: f64) -> Result<Self> {
        if !r.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidPoint(format!(
                "non-finite polar pair ({r}, {theta})"
            )));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidPoint(format!("modulus {r} not in (0, 1)")));
        }
        let theta = normalize_angle(theta);
        let (s, c) = theta.sin_cos();
        Ok(DiskPoint {
            re: r * c,
            im: r * s,
            r,
            theta,
        })
    }

    /// A point on the positive real axis.
    pub fn real(r: f64) -> Result<Self> {
        Self::from_polar(r, 0.0)
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::from_polar(z.norm(), z.arg())
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// `1 - r^2`, computed as `(1 - r)(1 + r)` to keep precision near the circle.
    pub fn defect(&self) -> f64 {
        (1.0 - self.r) * (1.0 + self.r)
    }

    /// `sqrt(1 - r^2)`.
    pub fn weight(&self) -> f64 {
        self.defect().sqrt()
    }

    fn polar_consistent(&self) -> bool {
        let scale = self.r.max(f64::MIN_POSITIVE);
        (self.re - self.r * self.theta.cos()).abs() <= POLAR_TOL * scale * 4.0
            && (self.im - self.r * self.theta.sin()).abs() <= POLAR_TOL * scale * 4.0
    }
}

/// Structural flags carried with a spectrum and validated on construction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumFlags {
    pub real_positive: bool,
    pub strictly_increasing_modulus: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_half_angle_c: Option<f64>,
}

/// Minimum over `k < n` of `prod_{j != k} rho(z_k, z_j)`, with the per-`k` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlesonDeltaEstimate {
    pub delta_n: f64,
    pub truncation_n: usize,
    pub per_k_products: Vec<f64>,
}

/// Ordered prefix of a Carleson sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpectrum")]
pub struct CarlesonSpectrum {
    points: Vec<DiskPoint>,
    flags: SpectrumFlags,
    generator_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta_estimate: Option<CarlesonDeltaEstimate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    points: Vec<DiskPoint>,
    flags: SpectrumFlags,
    generator_tag: String,
    #[serde(default)]
    delta_estimate: Option<CarlesonDeltaEstimate>,
}

impl TryFrom<RawSpectrum> for CarlesonSpectrum {
    type Error = Error;

    fn try_from(raw: RawSpectrum) -> Result<Self> {
        let mut spec = CarlesonSpectrum::new(raw.points, raw.flags, raw.generator_tag)?;
        if let Some(est) = raw.delta_estimate {
            if est.truncation_n > spec.len() || est.per_k_products.len() != est.truncation_n {
                return Err(Error::InvalidSpectrum(
                    "delta_estimate does not match the materialized points".into(),
                ));
            }
            spec.delta_estimate = Some(est);
        }
        Ok(spec)
    }
}

impl CarlesonSpectrum {
    /// Builds a spectrum and checks every flag against the points.
    pub fn new(
        points: Vec<DiskPoint>,
        flags: SpectrumFlags,
        generator_tag: impl Into<String>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSpectrum("no points".into()));
        }
        for (j, p) in points.iter().enumerate() {
            if !(p.r > 0.0 && p.r < 1.0) || !(-PI..PI).contains(&p.theta) || !p.polar_consistent() {
                return Err(Error::InvalidSpectrum(format!(
                    "point {j} violates disk invariants"
                )));
            }
        }
        if flags.real_positive {
            if let Some(j) = points.iter().position(|p| p.theta != 0.0) {
                return Err(Error::InvalidSpectrum(format!(
                    "real_positive set but point {j} has theta = {}",
                    points[j].theta
                )));
            }
        }
        if flags.strictly_increasing_modulus {
            if let Some(j) = points.windows(2).position(|w| w[1].r <= w[0].r) {
                return Err(Error::InvalidSpectrum(format!(
                    "strictly_increasing_modulus set but r_{} <= r_{}",
                    j + 1,
                    j
                )));
            }
        }
        if let Some(c) = flags.sector_half_angle_c {
            if !(0.0..PI).contains(&c) {
                return Err(Error::InvalidSpectrum(format!(
                    "sector half-angle {c} not in [0, pi)"
                )));
            }
            if let Some(j) = points.iter().position(|p| p.theta.abs() > c) {
                return Err(Error::InvalidSpectrum(format!(
                    "point {j} has |theta| = {} > c = {c}",
                    points[j].theta.abs()
                )));
            }
        }
        Ok(CarlesonSpectrum {
            points,
            flags,
            generator_tag: generator_tag.into(),
            delta_estimate: None,
        })
    }

    /// Builds a spectrum with flags inferred from the points (no sector flag).
    pub fn from_points(points: Vec<DiskPoint>, generator_tag: impl Into<String>) -> Result<Self> {
        let flags = SpectrumFlags {
            real_positive: points.iter().all(|p| p.theta == 0.0),
            strictly_increasing_modulus: points.windows(2).all(|w| w[1].r > w[0].r),
            sector_half_angle_c: None,
        };
        Self::new(points, flags, generator_tag)
    }

    pub fn points(&self) -> &[DiskPoint] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &DiskPoint {
        &self.points[j]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn flags(&self) -> &SpectrumFlags {
        &self.flags
    }

    pub fn generator_tag(&self) -> &str {
        &self.generator_tag
    }

    pub fn delta_estimate(&self) -> Option<&CarlesonDeltaEstimate> {
        self.delta_estimate.as_ref()
    }

    /// Keeps the first `n` points.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        check_prefix(self, n)?;
        let mut out = CarlesonSpectrum::new(
            self.points[..n].to_vec(),
            self.flags.clone(),
            format!("{}[..{n}]", self.generator_tag),
        )?;
        out.delta_estimate = None;
        Ok(out)
    }

    pub fn attach_delta(&mut self, n: usize) -> Result<&CarlesonDeltaEstimate> {
        let est = carleson_delta(self, n)?;
        Ok(self.delta_estimate.insert(est))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub(crate) fn require_real_positive(&self, op: &str) -> Result<()> {
        if !self.flags.real_positive {
            return Err(Error::InvalidSpectrum(format!(
                "{op} requires a real positive spectrum"
            )));
        }
        Ok(())
    }

    pub(crate) fn require_increasing(&self, op: &str) -> Result<()> {
        if !self.flags.strictly_increasing_modulus {
            return Err(Error::InvalidSpectrum(format!(
                "{op} requires strictly increasing moduli"
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_prefix(spec: &CarlesonSpectrum, n: usize) -> Result<()> {
    if n == 0 || n > spec.len() {
        return Err(Error::Truncation(format!(
            "n = {n} outside 1..={} materialized points",
            spec.len()
        )));
    }
    Ok(())
}

/// `|z - w| / |1 - conj(w) z|`.
pub fn pseudo_hyperbolic(z: &DiskPoint, w: &DiskPoint) -> f64 {
    pseudo_hyperbolic_c(z.to_complex(), w.to_complex())
}

pub(crate) fn pseudo_hyperbolic_c(z: Complex64, w: Complex64) -> f64 {
    (z - w).norm() / (Complex64::new(1.0, 0.0) - w.conj() * z).norm()
}

/// Separation constant of the first `n` points.
///
/// Returns [`Error::CoincidentPoints`] when two points agree, since every
/// downstream result presumes a positive constant.
pub fn carleson_delta(spec: &CarlesonSpectrum, n: usize) -> Result<CarlesonDeltaEstimate> {
    check_prefix(spec, n)?;
    let pts = &spec.points[..n];
    let mut per_k = Vec::with_capacity(n);
    for (k, zk) in pts.iter().enumerate() {
        let mut prod = 1.0;
        for (j, zj) in pts.iter().enumerate() {
            if j == k {
                continue;
            }
            let rho = pseudo_hyperbolic(zk, zj);
            if rho == 0.0 {
                return Err(Error::CoincidentPoints {
                    first: k.min(j),
                    second: k.max(j),
                });
            }
            prod *= rho;
        }
        per_k.push(prod);
    }
    let delta_n = per_k.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CarlesonDeltaEstimate {
        delta_n,
        truncation_n: n,
        per_k_products: per_k,
    })
}

/// `sum_{first <= j < n} (1 - r_j^2)`.
pub fn tail_defect(spec: &CarlesonSpectrum, first: usize, n: usize) -> Result<f64> {
    if n > spec.len() || first > n {
        return Err(Error::Truncation(format!(
            "tail range [{first}, {n}) invalid for {} points",
            spec.len()
        )));
    }
    Ok(spec.points[first..n].iter().map(DiskPoint::defect).sum())
}

/// Finite Blaschke product over the first `n` points, evaluated at `z`.
pub fn blaschke_product(spec: &CarlesonSpectrum, z: Complex64, n: usize) -> Result<Complex64> {
    check_prefix(spec, n)?;
    if !(z.norm() < 1.0) {
        return Err(invalid(
            "z",
            format!("|z| = {} is not inside the disk", z.norm()),
        ));
    }
    let one = Complex64::new(1.0, 0.0);
    Ok(spec.points[..n].iter().fold(one, |acc, p| {
        let zj = p.to_complex();
        let phase = Complex64::from_polar(1.0, p.theta);
        acc * phase * (z - zj) / (one - zj.conj() * z)
    }))
}

/// Canonical vector `g_j = sqrt(1 - r_j^2)` over the first `n` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameVector {
    pub entries: Vec<f64>,
    pub truncation_n: usize,
}

impl FrameVector {
    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|g| g * g).sum()
    }
}

pub fn canonical_vector(spec: &CarlesonSpectrum, n: usize) -> Result<FrameVector> {
    check_prefix(spec, n)?;
    Ok(FrameVector {
        entries: spec.points[..n].iter().map(DiskPoint::weight).collect(),
        truncation_n: n,
    })
}

/// Real spectrum `z_j = 1 - base * ratio^j`, `j < count`, with its separation
/// estimate attached.
pub fn make_geometric_real(base: f64, ratio: f64, count: usize) -> Result<CarlesonSpectrum> {
    if !(base > 0.0 && base < 1.0) {
        return Err(invalid("base", format!("{base} not in (0, 1)")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid("ratio", format!("{ratio} not in (0, 1)")));
    }
    if count == 0 {
        return Err(invalid("count", "must be positive"));
    }
    let mut points = Vec::with_capacity(count);
    for j in 0..count {
        let z = 1.0 - base * ratio.powi(j as i32);
        if z <= 0.0 || z >= 1.0 {
            return Err(invalid(
                "count",
                format!("z_{j} = {z} leaves (0, 1) in double precision"),
            ));
        }
        if let Some(prev) = points.last().map(|p: &DiskPoint| p.r()) {
            if z <= prev {
                return Err(invalid("count", format!("z_{j} is not above z_{}", j - 1)));
            }
        }
        points.push(DiskPoint::real(z)?);
    }
    let flags = SpectrumFlags {
        real_positive: true,
        strictly_increasing_modulus: true,
        sector_half_angle_c: None,
    };
    let mut spec = CarlesonSpectrum::new(
        points,
        flags,
        format!("geometric(base={base},ratio={ratio},count={count})"),
    )?;
    spec.attach_delta(count)?;
    Ok(spec)
}

/// The reference spectrum `z_j = 1 - 2^{-j-1}`.
pub fn reference_geometric(count: usize) -> Result<CarlesonSpectrum> {
    make_geometric_real(0.5, 0.5, count)
}

/// Deterministic angle assignment for sector spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleRule {
    /// Every angle is zero.
    Zero,
    /// `theta_j = +c` for even `j`, `-c` for odd `j`.
    Alternating,
    /// `theta_j = c cos(j)`, a non-periodic sweep through the sector.
    Sweep,
    /// Caller-supplied angles; each must satisfy `|theta_j| <= c`.
    Explicit(Vec<f64>),
}

impl AngleRule {
    fn angle(&self, j: usize, c: f64) -> Result<f64> {
        Ok(match self {
            AngleRule::Zero => 0.0,
            AngleRule::Alternating if c == 0.0 => 0.0,
            AngleRule::Alternating if j.is_multiple_of(2) => c,
            AngleRule::Alternating => -c,
            AngleRule::Sweep => c * (j as f64).cos(),
            AngleRule::Explicit(v) => *v
                .get(j)
                .ok_or_else(|| invalid("angle_rule", format!("no angle for index {j}")))?,
        })
    }

    fn id(&self) -> &'static str {
        match self {
            AngleRule::Zero => "zero",
            AngleRule::Alternating => "alternating",
            AngleRule::Sweep => "sweep",
            AngleRule::Explicit(_) => "explicit",
        }
    }
}

/// Spectrum in the sector `|theta| <= c` with the given strictly increasing moduli.
pub fn make_sector(
    moduli: &[f64],
    half_angle_c: f64,
    rule: &AngleRule,
) -> Result<CarlesonSpectrum> {
    if !(0.0..PI).contains(&half_angle_c) {
        return Err(invalid(
            "half_angle_c",
            format!("{half_angle_c} not in [0, pi)"),
        ));
    }
    if moduli.is_empty() {
        return Err(invalid("moduli", "empty"));
    }
    if moduli.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("moduli", "not strictly increasing"));
    }
    let mut points = Vec::with_capacity(moduli.len());
    for (j, &r) in moduli.iter().enumerate() {
        let theta = rule.angle(j, half_angle_c)?;
        if theta.abs() > half_angle_c {
            return Err(invalid(
                "angle_rule",
                format!("theta_{j} = {theta} outside the sector of half-angle {half_angle_c}"),
            ));
        }
        points.push(DiskPoint::from_polar(r, theta)?);
    }
    let flags = SpectrumFlags {
        real_positive: points.iter().all(|p| p.theta() == 0.0),
        strictly_increasing_modulus: true,
        sector_half_angle_c: Some(half_angle_c),
    };
    CarlesonSpectrum::new(
        points,
        flags,
        format!(
            "sector(c={half_angle_c},rule={},count={})",
            rule.id(),
            moduli.len()
        ),
    )
}
