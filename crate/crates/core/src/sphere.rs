//! Angular kernels on the unit circle and their degree-zero extension to the plane.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{MzError, Result};
use crate::parallel::pairwise_sum;

/// Default number of angular samples for bank kernels.
pub const DEFAULT_SAMPLES: usize = 4096;

/// Samples of `Omega` at the uniform angles `2 pi m / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularKernel {
    name: String,
    samples: Vec<f64>,
    q_class: f64,
}

impl AngularKernel {
    pub fn new(name: impl Into<String>, samples: Vec<f64>, q_class: f64) -> Result<Self> {
        let m = samples.len();
        if m < 64 || !m.is_multiple_of(2) {
            return Err(MzError::InvalidArgument(format!(
                "angular sample count must be even and >= 64, got {m}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(MzError::InvalidArgument("angular samples must be finite".into()));
        }
        if q_class.is_nan() || q_class <= 1.0 {
            return Err(MzError::InvalidExponent(format!(
                "integrability class must exceed 1, got {q_class}"
            )));
        }
        Ok(Self {
            name: name.into(),
            samples,
            q_class,
        })
    }

    /// Samples `profile(theta)` at `m` uniform angles.
    pub fn from_fn(name: &str, m: usize, q_class: f64, profile: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = (0..m).map(|k| profile(2.0 * PI * k as f64 / m as f64)).collect();
        Self::new(name, samples, q_class)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn q_class(&self) -> f64 {
        self.q_class
    }

    pub fn quad_weight(&self) -> f64 {
        2.0 * PI / self.samples.len() as f64
    }

    pub fn angle(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.samples.len() as f64
    }

    /// Quadrature integral of `Omega` over the circle.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.samples) * self.quad_weight()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            name: self.name.clone(),
            samples: self.samples.iter().map(|v| c * v).collect(),
            q_class: self.q_class,
        }
    }

    /// Rescales so that the `L^q` norm at the declared class equals one.
    pub fn normalized(&self) -> Result<Self> {
        let norm = lq_sphere_norm(self, self.q_class)?;
        if norm == 0.0 {
            return Ok(self.clone());
        }
        Ok(self.scaled(1.0 / norm))
    }

    pub fn abs(&self) -> Self {
        Self {
            name: format!("|{}|", self.name),
            samples: self.samples.iter().map(|v| v.abs()).collect(),
            q_class: self.q_class,
        }
    }

    /// Value at angle `theta`, linearly interpolated between samples.
    #[inline]
    pub fn at_angle(&self, theta: f64) -> f64 {
        let m = self.samples.len();
        let pos = theta.rem_euclid(2.0 * PI) * (m as f64 / (2.0 * PI));
        let k = pos.floor();
        let frac = pos - k;
        let k = (k as usize) % m;
        let k1 = (k + 1) % m;
        self.samples[k] * (1.0 - frac) + self.samples[k1] * frac
    }

    /// `Omega(x / |x|)`; `x` must be nonzero.
    #[inline]
    pub fn eval_unchecked(&self, x: [f64; 2]) -> f64 {
        self.at_angle(x[1].atan2(x[0]))
    }

    pub fn to_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "theta,omega")?;
        for (m, v) in self.samples.iter().enumerate() {
            writeln!(out, "{},{}", self.angle(m), v)?;
        }
        Ok(())
    }
}

/// Subtracts the quadrature mean so the kernel has mean value zero.
pub fn mean_zero_project(raw: &AngularKernel) -> AngularKernel {
    let mean = pairwise_sum(&raw.samples) / raw.samples.len() as f64;
    let mut samples: Vec<f64> = raw.samples.iter().map(|v| v - mean).collect();
    // one correction pass absorbs the rounding left by the first subtraction
    let residual = pairwise_sum(&samples) / samples.len() as f64;
    for v in &mut samples {
        *v -= residual;
    }
    AngularKernel {
        name: raw.name.clone(),
        samples,
        q_class: raw.q_class,
    }
}

/// `(sum_m |Omega_m|^q 2 pi / M)^{1/q}`, or the max for `q = inf`.
pub fn lq_sphere_norm(omega: &AngularKernel, q: f64) -> Result<f64> {
    if q.is_nan() || q <= 1.0 {
        return Err(MzError::InvalidExponent(format!("q must exceed 1, got {q}")));
    }
    if q.is_infinite() {
        return Ok(omega.samples.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let terms: Vec<f64> = omega.samples.iter().map(|v| v.abs().powf(q)).collect();
    Ok((pairwise_sum(&terms) * omega.quad_weight()).powf(1.0 / q))
}

/// `L^1` norm on the circle.
pub fn l1_sphere_norm(omega: &AngularKernel) -> f64 {
    let terms: Vec<f64> = omega.samples.iter().map(|v| v.abs()).collect();
    pairwise_sum(&terms) * omega.quad_weight()
}

/// Degree-zero extension `Omega(x / |x|)`.
pub fn evaluate_homogeneous(omega: &AngularKernel, x: [f64; 2]) -> Result<f64> {
    if x[0] == 0.0 && x[1] == 0.0 {
        return Err(MzError::InvalidArgument(
            "homogeneous kernel is undefined at the origin".into(),
        ));
    }
    Ok(omega.eval_unchecked(x))
}

/// Names accepted by [`bank_kernel`].
pub const BANK_NAMES: [&str; 5] = ["cos", "sin3", "step", "sing-q2", "sing-q4"];

/// The standard bank: two smooth kernels, a rough step and two singular
/// kernels in `L^q` but not `L^{2q}` for `q = 2, 4`.
pub fn kernel_bank() -> Vec<AngularKernel> {
    BANK_NAMES
        .iter()
        .map(|n| bank_kernel_with(n, DEFAULT_SAMPLES).expect("bank names are valid"))
        .collect()
}

pub fn bank_kernel(name: &str) -> Result<AngularKernel> {
    bank_kernel_with(name, DEFAULT_SAMPLES)
}

pub fn bank_kernel_with(name: &str, m: usize) -> Result<AngularKernel> {
    let raw = match name {
        "cos" => AngularKernel::from_fn(name, m, f64::INFINITY, f64::cos)?,
        "sin3" => AngularKernel::from_fn(name, m, f64::INFINITY, |t| (3.0 * t).sin())?,
        "step" => AngularKernel::from_fn(name, m, f64::INFINITY, |t| {
            let c = t.cos();
            if c >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })?,
        "sing-q2" => singular(name, m, 2.0)?,
        "sing-q4" => singular(name, m, 4.0)?,
        other => return Err(MzError::UnknownName(format!("kernel '{other}'"))),
    };
    Ok(mean_zero_project(&raw))
}

/// `|theta - pi|^{-1/(2q)}`, clipped at `|theta - pi| < 2 pi / M`.
fn singular(name: &str, m: usize, q: f64) -> Result<AngularKernel> {
    let clip = 2.0 * PI / m as f64;
    AngularKernel::from_fn(name, m, q, |t| (t - PI).abs().max(clip).powf(-1.0 / (2.0 * q)))
}
