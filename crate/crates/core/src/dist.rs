//! The renewable output distribution on `[0, w_max]`.
//!
//! Three families are supported: uniform, a normal truncated to the support,
//! and a continuous piecewise-linear density. Every density is continuous and
//! strictly positive on the whole support, so the cdf is a bijection onto
//! `[0, 1]` and the quantile is its inverse.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance for integrals without a polynomial antiderivative.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Width at which the truncated-normal quantile bisection stops.
const QUANTILE_BISECTION_TOL: f64 = 1e-12;

/// Serialized form of a distribution, as it appears in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    Uniform {
        w_max: f64,
    },
    TruncatedNormal {
        w_max: f64,
        location: f64,
        scale: f64,
    },
    /// Breakpoints `[w, f]`; `w` must run from 0 to the support maximum.
    /// Densities are rescaled so the trapezoid area is one.
    PiecewiseLinearPdf {
        breakpoints: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Uniform,
    TruncatedNormal {
        location: f64,
        scale: f64,
        /// Standard normal cdf at the lower edge of the support.
        lower_mass: f64,
        /// Probability mass of the untruncated normal inside the support.
        mass: f64,
    },
    PiecewiseLinear {
        points: Vec<(f64, f64)>,
        /// cdf at each breakpoint.
        cumulative: Vec<f64>,
    },
}

/// Distribution of the renewable output `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub struct RenewableDistribution {
    w_max: f64,
    kind: Kind,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn check_w_max(w_max: f64) -> Result<()> {
    if !(w_max.is_finite() && w_max > 0.0) {
        return Err(Error::validation("distribution.w_max", "w_max must be finite and > 0"));
    }
    Ok(())
}

impl RenewableDistribution {
    pub fn uniform(w_max: f64) -> Result<Self> {
        check_w_max(w_max)?;
        Ok(Self {
            w_max,
            kind: Kind::Uniform,
        })
    }

    pub fn truncated_normal(w_max: f64, location: f64, scale: f64) -> Result<Self> {
        check_w_max(w_max)?;
        if !location.is_finite() {
            return Err(Error::validation("distribution.location", "location must be finite"));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::validation("distribution.scale", "scale must be finite and > 0"));
        }
        let lower_mass = std_normal_cdf(-location / scale);
        let mass = std_normal_cdf((w_max - location) / scale) - lower_mass;
        // The density is unimodal, so its minimum on the support is at an edge.
        let edge_density = std_normal_pdf(location / scale).min(std_normal_pdf((w_max - location) / scale));
        if !(mass > 1e-12 && edge_density > 1e-300) {
            return Err(Error::validation(
                "distribution",
                "truncated normal has numerically zero density on part of [0, w_max]",
            ));
        }
        Ok(Self {
            w_max,
            kind: Kind::TruncatedNormal {
                location,
                scale,
                lower_mass,
                mass,
            },
        })
    }

    /// Builds a piecewise-linear density through `(w, f)` breakpoints.
    ///
    /// The first breakpoint must sit at 0 and the last one defines `w_max`;
    /// the densities are rescaled to unit area.
    pub fn piecewise_linear(breakpoints: &[(f64, f64)]) -> Result<Self> {
        let path = "distribution.breakpoints";
        if breakpoints.len() < 2 {
            return Err(Error::validation(path, "at least two breakpoints required"));
        }
        if breakpoints.iter().any(|&(w, f)| !w.is_finite() || !f.is_finite()) {
            return Err(Error::validation(path, "breakpoints must be finite"));
        }
        if breakpoints[0].0 != 0.0 {
            return Err(Error::validation(path, "first breakpoint must be at w = 0"));
        }
        if breakpoints.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(Error::validation(path, "breakpoints must be strictly increasing"));
        }
        if breakpoints.iter().any(|&(_, f)| f <= 0.0) {
            return Err(Error::validation(path, "densities must be > 0 (pdf positive on support)"));
        }
        let area: f64 = breakpoints
            .windows(2)
            .map(|p| 0.5 * (p[0].1 + p[1].1) * (p[1].0 - p[0].0))
            .sum();
        let points: Vec<(f64, f64)> = breakpoints.iter().map(|&(w, f)| (w, f / area)).collect();
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for p in points.windows(2) {
            acc += 0.5 * (p[0].1 + p[1].1) * (p[1].0 - p[0].0);
            cumulative.push(acc);
        }
        // Pin the last knot so cdf(w_max) is exactly one.
        *cumulative.last_mut().unwrap() = 1.0;
        let w_max = points.last().unwrap().0;
        check_w_max(w_max)?;
        Ok(Self {
            w_max,
            kind: Kind::PiecewiseLinear { points, cumulative },
        })
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    /// Points where the density is not smooth (interior breakpoints only).
    pub fn density_breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            Kind::PiecewiseLinear { points, .. } => points[1..points.len() - 1].iter().map(|p| p.0).collect(),
            _ => Vec::new(),
        }
    }

    fn check_support(&self, w: f64) -> Result<()> {
        if !(0.0..=self.w_max).contains(&w) {
            return Err(Error::domain(format!("w = {w} outside support [0, {}]", self.w_max)));
        }
        Ok(())
    }

    // Index of the segment containing `w`, assuming `w` is in the support.
    fn segment(points: &[(f64, f64)], w: f64) -> usize {
        let idx = points.partition_point(|p| p.0 <= w);
        idx.clamp(1, points.len() - 1) - 1
    }

    fn pdf_unchecked(&self, w: f64) -> f64 {
        match &self.kind {
            Kind::Uniform => 1.0 / self.w_max,
            Kind::TruncatedNormal {
                location, scale, mass, ..
            } => std_normal_pdf((w - location) / scale) / (scale * mass),
            Kind::PiecewiseLinear { points, .. } => {
                let j = Self::segment(points, w);
                let (w0, f0) = points[j];
                let (w1, f1) = points[j + 1];
                f0 + (f1 - f0) * (w - w0) / (w1 - w0)
            }
        }
    }

    /// Density at `w`; errors outside `[0, w_max]`.
    pub fn pdf(&self, w: f64) -> Result<f64> {
        self.check_support(w)?;
        Ok(self.pdf_unchecked(w))
    }

    /// Cumulative distribution; saturates to 0 below and 1 above the support.
    pub fn cdf(&self, w: f64) -> f64 {
        if w.is_nan() {
            return f64::NAN;
        }
        if w <= 0.0 {
            return 0.0;
        }
        if w >= self.w_max {
            return 1.0;
        }
        match &self.kind {
            Kind::Uniform => w / self.w_max,
            Kind::TruncatedNormal {
                location,
                scale,
                lower_mass,
                mass,
            } => ((std_normal_cdf((w - location) / scale) - lower_mass) / mass).clamp(0.0, 1.0),
            Kind::PiecewiseLinear { points, cumulative } => {
                let j = Self::segment(points, w);
                let (w0, f0) = points[j];
                let (w1, f1) = points[j + 1];
                let slope = (f1 - f0) / (w1 - w0);
                let t = w - w0;
                (cumulative[j] + f0 * t + 0.5 * slope * t * t).min(1.0)
            }
        }
    }

    /// Smallest `w` with `cdf(w) >= p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return self.w_max;
        }
        match &self.kind {
            Kind::Uniform => p * self.w_max,
            Kind::TruncatedNormal { .. } => {
                let (mut lo, mut hi) = (0.0, self.w_max);
                while hi - lo > QUANTILE_BISECTION_TOL {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.cdf(mid) >= p {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
            Kind::PiecewiseLinear { points, cumulative } => {
                let j = cumulative.partition_point(|&c| c < p).clamp(1, points.len() - 1) - 1;
                let (w0, f0) = points[j];
                let (w1, f1) = points[j + 1];
                let slope = (f1 - f0) / (w1 - w0);
                let r = p - cumulative[j];
                // Root of slope/2 t^2 + f0 t - r = 0, in the cancellation-free form.
                let t = 2.0 * r / (f0 + (f0 * f0 + 2.0 * slope * r).max(0.0).sqrt());
                (w0 + t).clamp(w0, w1)
            }
        }
    }

    /// Draws `n` values by inverse transform of uniforms from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| self.quantile_unchecked(rng.random::<f64>()))
            .collect()
    }

    /// `∫₀^θ (y − w)^k f(w) dw` for `k` in {1, 2}.
    ///
    /// `θ` beyond `w_max` is clipped to the support. Uniform and
    /// piecewise-linear densities use exact antiderivatives; the truncated
    /// normal uses adaptive quadrature to [`QUADRATURE_TOL`].
    pub fn partial_power_integral(&self, y: f64, theta: f64, k: u32) -> Result<f64> {
        if theta.is_nan() || theta < 0.0 {
            return Err(Error::domain(format!("upper limit theta = {theta} must be >= 0")));
        }
        if !(k == 1 || k == 2) {
            return Err(Error::domain(format!("exponent k = {k} must be 1 or 2")));
        }
        let theta = theta.min(self.w_max);
        if theta == 0.0 {
            return Ok(0.0);
        }
        let kf = f64::from(k);
        let value = match &self.kind {
            Kind::Uniform => {
                (y.powi(k as i32 + 1) - (y - theta).powi(k as i32 + 1)) / ((kf + 1.0) * self.w_max)
            }
            Kind::PiecewiseLinear { points, .. } => {
                let mut total = 0.0;
                for seg in points.windows(2) {
                    let (w0, f0) = seg[0];
                    let (w1, f1) = seg[1];
                    if w0 >= theta {
                        break;
                    }
                    let slope = (f1 - f0) / (w1 - w0);
                    let hi = w1.min(theta);
                    // f(w) = b - slope * v with v = y - w.
                    let b = f0 + slope * (y - w0);
                    let anti = |v: f64| b * v.powi(k as i32 + 1) / (kf + 1.0) - slope * v.powi(k as i32 + 2) / (kf + 2.0);
                    total += anti(y - w0) - anti(y - hi);
                }
                total
            }
            Kind::TruncatedNormal { .. } => quadrature::integrate(
                |w| (y - w).powi(k as i32) * self.pdf_unchecked(w),
                0.0,
                theta,
                QUADRATURE_TOL,
            ),
        };
        Ok(value)
    }
}

impl TryFrom<DistributionSpec> for RenewableDistribution {
    type Error = Error;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Uniform { w_max } => Self::uniform(w_max),
            DistributionSpec::TruncatedNormal { w_max, location, scale } => {
                Self::truncated_normal(w_max, location, scale)
            }
            DistributionSpec::PiecewiseLinearPdf { breakpoints } => {
                let pts: Vec<(f64, f64)> = breakpoints.iter().map(|p| (p[0], p[1])).collect();
                Self::piecewise_linear(&pts)
            }
        }
    }
}

impl From<RenewableDistribution> for DistributionSpec {
    fn from(d: RenewableDistribution) -> Self {
        match d.kind {
            Kind::Uniform => DistributionSpec::Uniform { w_max: d.w_max },
            Kind::TruncatedNormal { location, scale, .. } => DistributionSpec::TruncatedNormal {
                w_max: d.w_max,
                location,
                scale,
            },
            Kind::PiecewiseLinear { points, .. } => DistributionSpec::PiecewiseLinearPdf {
                breakpoints: points.iter().map(|&(w, f)| [w, f]).collect(),
            },
        }
    }
}
