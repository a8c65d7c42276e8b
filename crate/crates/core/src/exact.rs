//! Closed-form solutions and kernels: single peakons on the line and the
//! circle, the Helmholtz Green kernels, and smoothed initial profiles.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::params::{periodic_peakon_admissible, Params};
use crate::spectral::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Line,
    Circle,
}

/// A single peakon of amplitude `gamma`. Negative amplitudes are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakonSpec {
    gamma: f64,
    params: Params,
    domain: Domain,
}

impl PeakonSpec {
    pub fn new(gamma: f64, params: Params, domain: Domain) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("peakon amplitude must be finite, got {gamma}")));
        }
        if domain == Domain::Circle && !periodic_peakon_admissible(&params) {
            return Err(Error::InvalidParams(format!(
                "circle peakon needs 6a + b + 2c = 3k, got {} for {params}",
                6.0 * params.a() + params.b() + 2.0 * params.c()
            )));
        }
        let spec = PeakonSpec { gamma, params, domain };
        if !spec.speed().is_finite() {
            return Err(Error::InvalidArgument("peakon speed overflows".into()));
        }
        Ok(spec)
    }

    pub fn line(gamma: f64, params: Params) -> Result<Self> {
        PeakonSpec::new(gamma, params, Domain::Line)
    }

    pub fn circle(gamma: f64, params: Params) -> Result<Self> {
        PeakonSpec::new(gamma, params, Domain::Circle)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `(1 - a) γ^k`, the wave speed on the line.
    pub fn line_speed(&self) -> f64 {
        (1.0 - self.params.a()) * self.gamma.powi(self.params.k() as i32)
    }

    /// `[1 + (1 - a) sinh²π] cosh^{k-2}(π) γ^k`, the wave speed on the circle.
    pub fn circle_speed(&self) -> f64 {
        let k = self.params.k() as i32;
        (1.0 + (1.0 - self.params.a()) * PI.sinh().powi(2)) * PI.cosh().powi(k - 2) * self.gamma.powi(k)
    }

    pub fn speed(&self) -> f64 {
        match self.domain {
            Domain::Line => self.line_speed(),
            Domain::Circle => self.circle_speed(),
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self.domain {
            Domain::Line => self.gamma * (-(x - self.line_speed() * t).abs()).exp(),
            Domain::Circle => self.gamma * (wrap_2pi(x - self.circle_speed() * t) - PI).cosh(),
        }
    }
}

/// `[x]_p = x - 2π ⌊x / 2π⌋`.
pub fn wrap_2pi(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = x - two_pi * (x / two_pi).floor();
    // guard the rounding case where r lands exactly on 2π
    if r >= two_pi {
        0.0
    } else {
        r
    }
}

pub fn peakon_line_eval(spec: &PeakonSpec, x: f64, t: f64) -> Result<f64> {
    if spec.domain != Domain::Line {
        return Err(Error::InvalidArgument("peakon spec is not on the line".into()));
    }
    Ok(spec.eval(x, t))
}

pub fn peakon_circle_eval(spec: &PeakonSpec, x: f64, t: f64) -> Result<f64> {
    if spec.domain != Domain::Circle {
        return Err(Error::InvalidArgument("peakon spec is not on the circle".into()));
    }
    Ok(spec.eval(x, t))
}

/// `G(x) = ½ e^{-|x|}`, the kernel of `(1 - ∂²)^{-1}` on the line.
pub fn green_line(x: f64) -> f64 {
    0.5 * (-x.abs()).exp()
}

/// The Green kernel on a circle of circumference `c`,
/// `cosh(d - c/2) / (2 sinh(c/2))` with `d = x mod c`, evaluated as the
/// image sum `(e^{-d} + e^{d-c}) / (2 (1 - e^{-c}))` so that large boxes
/// neither overflow nor lose digits.
pub fn green_periodic(x: f64, circumference: f64) -> f64 {
    let d = x.rem_euclid(circumference);
    0.5 * ((-d).exp() + (d - circumference).exp()) / -(-circumference).exp_m1()
}

/// Initial data shapes, centred in the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `γ e^{-|x|}`
    Peakon { gamma: f64 },
    /// `e^{-θ|x|}`
    ExpTail { theta: f64 },
    /// `exp(-1 / (1 - (x/w)²))` on `|x| < w`, zero outside. Not mollified.
    Bump { width: f64 },
}

/// Smooth compactly supported bump of half-width `width`.
pub fn bump(x: f64, width: f64) -> f64 {
    let r = x / width;
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

/// `(e^{-θ|·|} * φ_σ)(x)` for the unit-mass Gaussian `φ_σ`.
pub fn mollified_exp(x: f64, theta: f64, sigma: f64) -> f64 {
    let x = x.abs();
    let s2 = sigma * SQRT_2;
    let ts = theta * sigma * sigma;
    let pref = 0.5 * (0.5 * theta * theta * sigma * sigma).exp();
    let right = (-theta * x).exp() * erfc((ts - x) / s2);
    let left_erfc = erfc((ts + x) / s2);
    let left = if left_erfc == 0.0 { 0.0 } else { (theta * x).exp() * left_erfc };
    pref * (right + left)
}

/// Sample `shape` on `grid`, convolved with a Gaussian of standard
/// deviation `moll_width` (peakon and exp_tail only).
pub fn mollified_profile(shape: Shape, moll_width: f64, grid: &Grid) -> Result<Field> {
    let quarter = grid.length() / 4.0;
    let center = grid.center();
    let values: Vec<f64> = match shape {
        Shape::Bump { width } => {
            if !(width.is_finite() && width > 0.0) {
                return Err(Error::InvalidArgument(format!("bump width must be positive, got {width}")));
            }
            if width > quarter {
                return Err(Error::InvalidArgument(format!(
                    "bump width {width} exceeds a quarter of the box ({quarter})"
                )));
            }
            grid.nodes().into_iter().map(|x| bump(x - center, width)).collect()
        }
        Shape::Peakon { .. } | Shape::ExpTail { .. } => {
            if !(moll_width.is_finite() && moll_width > 0.0) {
                return Err(Error::InvalidArgument(format!("mollifier width must be positive, got {moll_width}")));
            }
            if moll_width > quarter {
                return Err(Error::InvalidArgument(format!(
                    "mollifier width {moll_width} exceeds a quarter of the box ({quarter})"
                )));
            }
            let (amp, theta) = match shape {
                Shape::Peakon { gamma } => (gamma, 1.0),
                Shape::ExpTail { theta } => (1.0, theta),
                Shape::Bump { .. } => unreachable!(),
            };
            if !(theta.is_finite() && theta > 0.0) || !amp.is_finite() {
                return Err(Error::InvalidArgument("profile parameters must be finite and θ > 0".into()));
            }
            grid.nodes().into_iter().map(|x| amp * mollified_exp(x - center, theta, moll_width)).collect()
        }
    };
    Field::new(*grid, values)
}

/// Default mollifier width, three grid spacings.
pub fn default_moll_width(grid: &Grid) -> f64 {
    3.0 * grid.dx()
}
