//! The four-parameter family `(k, a, b, c)`, its named reductions and the
//! admissibility predicates that gate the rest of the crate.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Absolute tolerance for parameter identities such as `6a + b + 2c = 3k`.
pub const PARAM_TOL: f64 = 1e-12;

/// A validated parameter quadruple.
///
/// `k >= 1`; `a != 0` requires `k >= 2`. For `k = 1` the `u^{k-2} u_x^3`
/// coefficient must vanish as well, which restricts `k = 1` to the b-family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    k: u32,
    a: f64,
    b: f64,
    c: f64,
}

impl Params {
    pub fn new(k: i64, a: f64, b: f64, c: f64) -> Result<Self> {
        validate(k, a, b, c)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn coefficients(&self) -> CoefficientSet {
        coefficients(self)
    }

    /// True when the parameters lie in the g-kbCH subfamily `a = 0`,
    /// `c = (3k - b)/2`.
    pub fn is_gkbch(&self) -> bool {
        self.a.abs() <= PARAM_TOL && (self.c - (3.0 * self.k as f64 - self.b) / 2.0).abs() <= PARAM_TOL
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k={}, a={}, b={}, c={})", self.k, self.a, self.b, self.c)
    }
}

/// Check a raw quadruple and build [`Params`].
pub fn validate(k: i64, a: f64, b: f64, c: f64) -> Result<Params> {
    if k <= 0 {
        return Err(Error::InvalidParams(format!("k must be a positive integer, got {k}")));
    }
    if k > u32::MAX as i64 {
        return Err(Error::InvalidParams(format!("k = {k} is out of range")));
    }
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        if !v.is_finite() {
            return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
        }
    }
    if k == 1 && a != 0.0 {
        return Err(Error::InvalidParams(format!(
            "a = {a} is nonzero, which requires k >= 2 (well-posedness needs a != 0 and k >= 2)"
        )));
    }
    if k == 1 {
        // k(k+2) - 8a - b - c(k+1) multiplies u^{-1} u_x^3 when k = 1.
        let cub = 3.0 - b - 2.0 * c;
        if cub.abs() > PARAM_TOL {
            return Err(Error::InvalidParams(format!(
                "k = 1 requires b + 2c = 3 (b-family); otherwise u^(k-2) u_x^3 is singular (got b + 2c = {})",
                b + 2.0 * c
            )));
        }
    }
    Ok(Params { k: k as u32, a, b, c })
}

/// Named members of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Ch,
    Dp,
    Novikov,
    Forq,
    Ab { a: f64, b: f64 },
    Gkbch { k: i64, b: f64 },
    Bfam { b: f64 },
}

/// Preset names without their free sub-parameters, as accepted in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Ch,
    Dp,
    Novikov,
    Forq,
    Ab,
    Gkbch,
    Bfam,
}

impl PresetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Ch => "ch",
            PresetName::Dp => "dp",
            PresetName::Novikov => "novikov",
            PresetName::Forq => "forq",
            PresetName::Ab => "ab",
            PresetName::Gkbch => "gkbch",
            PresetName::Bfam => "bfam",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ch" => Ok(PresetName::Ch),
            "dp" => Ok(PresetName::Dp),
            "novikov" => Ok(PresetName::Novikov),
            "forq" => Ok(PresetName::Forq),
            "ab" => Ok(PresetName::Ab),
            "gkbch" => Ok(PresetName::Gkbch),
            "bfam" => Ok(PresetName::Bfam),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl Preset {
    pub fn name(&self) -> PresetName {
        match self {
            Preset::Ch => PresetName::Ch,
            Preset::Dp => PresetName::Dp,
            Preset::Novikov => PresetName::Novikov,
            Preset::Forq => PresetName::Forq,
            Preset::Ab { .. } => PresetName::Ab,
            Preset::Gkbch { .. } => PresetName::Gkbch,
            Preset::Bfam { .. } => PresetName::Bfam,
        }
    }

    pub fn params(&self) -> Result<Params> {
        match *self {
            Preset::Ch => validate(1, 0.0, 2.0, 0.5),
            Preset::Dp => validate(1, 0.0, 3.0, 0.0),
            Preset::Novikov => validate(2, 0.0, 3.0, 1.5),
            Preset::Forq => validate(2, 1.0 / 3.0, 2.0, 1.0),
            Preset::Ab { a, b } => validate(2, a, b, (6.0 - 6.0 * a - b) / 2.0),
            Preset::Gkbch { k, b } => validate(k, 0.0, b, (3.0 * k as f64 - b) / 2.0),
            Preset::Bfam { b } => Preset::Gkbch { k: 1, b }.params(),
        }
    }
}

/// Resolve a preset by name; the four fixed presets ignore the sub-parameters.
pub fn preset(p: Preset) -> Result<Params> {
    p.params()
}

/// The coefficients of every term in the nonlocal form, precomputed once.
///
/// `F1 = c_f1_1 u^{k+1} + c_f1_2 u^{k-1} u_x^2 + c_f1_3 u^{k-3} u_x^4` and
/// `F2 = c_f2_1 u^{k-2} u_x^3 + c_f2_2 u^{k-3} u_x^3 u_xx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub c_adv: f64,
    pub c_cub: f64,
    pub c_f1_1: f64,
    pub c_f1_2: f64,
    pub c_f1_3: f64,
    pub c_f2_1: f64,
    pub c_f2_2: f64,
}

pub fn coefficients(p: &Params) -> CoefficientSet {
    let k = p.k as f64;
    let (a, b, c) = (p.a, p.b, p.c);
    // (k - 2) is an exact small integer, so these are exactly zero when k = 2.
    let km2 = k - 2.0;
    CoefficientSet {
        c_adv: 1.0,
        c_cub: a,
        c_f1_1: b / (k + 1.0),
        c_f1_2: c,
        c_f1_3: -a * km2,
        c_f2_1: k * (k + 2.0) - 8.0 * a - b - c * (k + 1.0),
        c_f2_2: -3.0 * a * km2,
    }
}

/// Outcome of the H^1 conservation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct H1Conservation {
    pub conserved: bool,
    /// Set for `k = 1`, where the `k >= 3` condition is evaluated outside
    /// the range it was stated for.
    pub extrapolated: bool,
}

pub fn h1_conservation(p: &Params) -> H1Conservation {
    let k = p.k as f64;
    let (a, b, c) = (p.a, p.b, p.c);
    let general = |a: f64| {
        a.abs() <= PARAM_TOL && (2.0 * c + 2.0 / k * (b + 2.0 * c - 3.0 * k) + 1.0 - 2.0 * k).abs() <= PARAM_TOL
    };
    match p.k {
        1 => H1Conservation { conserved: general(a), extrapolated: true },
        2 => H1Conservation { conserved: (9.0 * a + b + 4.0 * c - 9.0).abs() <= PARAM_TOL, extrapolated: false },
        _ => H1Conservation { conserved: general(a), extrapolated: false },
    }
}

/// Whether the squared H^1 norm `∫ u^2 + u_x^2` is an invariant.
pub fn h1_conserved(p: &Params) -> bool {
    h1_conservation(p).conserved
}

/// Whether the circle peakon exists: `6a + b + 2c = 3k`.
pub fn periodic_peakon_admissible(p: &Params) -> bool {
    (6.0 * p.a + p.b + 2.0 * p.c - 3.0 * p.k as f64).abs() <= PARAM_TOL
}
