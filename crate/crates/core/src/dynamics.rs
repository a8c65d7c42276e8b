//! The nonlocal right-hand side
//!
//! `u_t = -u^k u_x + a u^{k-2} u_x^3 - ∂_x G * F1(u) - G * F2(u) + g(x, t)`
//!
//! discretized with alias-free products on a padded grid, plus the local
//! (third-order) form used to cross-check it, CFL-limited RK4 stepping, and
//! manufactured-solution forcing.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::diagnostics::sobolev_norm;
use crate::error::{Error, Result};
use crate::params::{CoefficientSet, Params};
use crate::spectral::{
    check_same_grid, derivative, derivative_symbol, forward, inverse_real, pad_spectrum, padded_size,
    truncate_spectrum, Field, Grid, SpectralFilter,
};

/// Default Sobolev index for the well-posedness diagnostics (`s > 5/2`).
pub const DEFAULT_SOBOLEV_ORDER: f64 = 3.0;

/// Floor on the transport speed in the CFL estimate.
const SPEED_FLOOR: f64 = 1e-12;

#[inline]
fn ipow(v: f64, e: i32) -> f64 {
    debug_assert!(e >= 0, "negative power {e} reached the evaluator");
    v.powi(e)
}

/// A smooth space-time function used as a manufactured solution.
pub trait ManufacturedSolution: Send + Sync {
    fn value(&self, x: f64, t: f64) -> f64;

    /// `∂_t u*`. Defaults to a fourth-order central difference with step 1e-6.
    fn time_derivative(&self, x: f64, t: f64) -> f64 {
        let h = 1e-6;
        (-self.value(x, t + 2.0 * h) + 8.0 * self.value(x, t + h) - 8.0 * self.value(x, t - h)
            + self.value(x, t - 2.0 * h))
            / (12.0 * h)
    }
}

/// `A sin(κ (x - s t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelingSine {
    pub amplitude: f64,
    pub wavenumber: f64,
    pub speed: f64,
}

impl ManufacturedSolution for TravelingSine {
    fn value(&self, x: f64, t: f64) -> f64 {
        self.amplitude * (self.wavenumber * (x - self.speed * t)).sin()
    }

    fn time_derivative(&self, x: f64, t: f64) -> f64 {
        -self.amplitude * self.wavenumber * self.speed * (self.wavenumber * (x - self.speed * t)).cos()
    }
}

/// Wraps a closure; the time derivative is taken by finite differences.
pub struct FnSolution<F>(pub F);

impl<F> ManufacturedSolution for FnSolution<F>
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn value(&self, x: f64, t: f64) -> f64 {
        (self.0)(x, t)
    }
}

/// Source term `g = ∂_t u* + N(u*)` that makes `u*` an exact solution of the
/// semi-discrete system.
#[derive(Clone)]
pub struct Forcing {
    solution: Arc<dyn ManufacturedSolution>,
    params: Params,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing").field("params", &self.params).finish_non_exhaustive()
    }
}

pub fn mms_forcing(u_star: Arc<dyn ManufacturedSolution>, p: &Params) -> Forcing {
    Forcing { solution: u_star, params: *p }
}

impl Forcing {
    pub fn solution(&self) -> &dyn ManufacturedSolution {
        self.solution.as_ref()
    }

    pub fn sample(&self, grid: &Grid, t: f64) -> Field {
        Field::from_fn(*grid, |x| self.solution.value(x, t))
    }

    pub fn eval(&self, grid: &Grid, t: f64) -> Field {
        let op = Operator::new(self.params, *grid);
        let star = self.sample(grid, t);
        let n = op.spatial(&star);
        let dt = Field::from_fn(*grid, |x| self.solution.time_derivative(x, t));
        Field::from_vec(*grid, dt.values().iter().zip(n.values()).map(|(a, b)| a + b).collect())
    }
}

/// The spatial operator for one parameter set on one grid.
#[derive(Debug, Clone)]
pub struct Operator {
    params: Params,
    coeffs: CoefficientSet,
    grid: Grid,
    padded: usize,
    forcing: Option<Forcing>,
}

/// Padded-grid samples of `u`, `u_x`, `u_xx`.
struct Padded {
    u: Vec<f64>,
    ux: Vec<f64>,
    uxx: Vec<f64>,
}

impl Operator {
    pub fn new(params: Params, grid: Grid) -> Self {
        let padded = padded_size(grid.n(), params.k() as usize + 1);
        Operator { params, coeffs: params.coefficients(), grid, padded, forcing: None }
    }

    pub fn with_forcing(mut self, forcing: Option<Forcing>) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn padded_size(&self) -> usize {
        self.padded
    }

    fn padded_samples(&self, u: &Field) -> Padded {
        let spec = u.spectrum();
        let deriv = |order: u32| -> Vec<Complex64> {
            spec.iter()
                .enumerate()
                .map(|(i, z)| z * derivative_symbol(&self.grid, i, order))
                .collect()
        };
        let m = self.padded;
        Padded {
            u: inverse_real(pad_spectrum(&spec, m)),
            ux: inverse_real(pad_spectrum(&deriv(1), m)),
            uxx: inverse_real(pad_spectrum(&deriv(2), m)),
        }
    }

    fn project(&self, samples: &[f64]) -> Vec<Complex64> {
        truncate_spectrum(&forward(samples), self.grid.n())
    }

    /// Pointwise `F1` on padded samples; zero-coefficient terms are skipped.
    fn f1_samples(&self, p: &Padded) -> Vec<f64> {
        let k = self.params.k() as i32;
        let co = &self.coeffs;
        (0..p.u.len())
            .map(|j| {
                let (u, ux) = (p.u[j], p.ux[j]);
                let mut s = 0.0;
                if co.c_f1_1 != 0.0 {
                    s += co.c_f1_1 * ipow(u, k + 1);
                }
                if co.c_f1_2 != 0.0 {
                    s += co.c_f1_2 * ipow(u, k - 1) * ux * ux;
                }
                if co.c_f1_3 != 0.0 {
                    s += co.c_f1_3 * ipow(u, k - 3) * ipow(ux, 4);
                }
                s
            })
            .collect()
    }

    fn f2_samples(&self, p: &Padded) -> Vec<f64> {
        let k = self.params.k() as i32;
        let co = &self.coeffs;
        (0..p.u.len())
            .map(|j| {
                let (u, ux, uxx) = (p.u[j], p.ux[j], p.uxx[j]);
                let mut s = 0.0;
                if co.c_f2_1 != 0.0 {
                    s += co.c_f2_1 * ipow(u, k - 2) * ux * ux * ux;
                }
                if co.c_f2_2 != 0.0 {
                    s += co.c_f2_2 * ipow(u, k - 3) * ux * ux * ux * uxx;
                }
                s
            })
            .collect()
    }

    /// `u^k u_x - a u^{k-2} u_x^3`.
    fn transport_samples(&self, p: &Padded) -> Vec<f64> {
        let k = self.params.k() as i32;
        let co = &self.coeffs;
        (0..p.u.len())
            .map(|j| {
                let (u, ux) = (p.u[j], p.ux[j]);
                let mut s = co.c_adv * ipow(u, k) * ux;
                if co.c_cub != 0.0 {
                    s -= co.c_cub * ipow(u, k - 2) * ux * ux * ux;
                }
                s
            })
            .collect()
    }

    pub fn f1(&self, u: &Field) -> Field {
        let p = self.padded_samples(u);
        Field::from_spectrum(self.grid, self.project(&self.f1_samples(&p)))
    }

    pub fn f2(&self, u: &Field) -> Field {
        let p = self.padded_samples(u);
        Field::from_spectrum(self.grid, self.project(&self.f2_samples(&p)))
    }

    /// `N(u) = u^k u_x - a u^{k-2} u_x^3 + ∂_x G * F1 + G * F2`, so that the
    /// unforced equation reads `u_t = -N(u)`.
    pub fn spatial(&self, u: &Field) -> Field {
        let p = self.padded_samples(u);
        let tr = self.project(&self.transport_samples(&p));
        let f1 = self.project(&self.f1_samples(&p));
        let f2 = self.project(&self.f2_samples(&p));
        let spec: Vec<Complex64> = (0..self.grid.n())
            .map(|i| {
                let xi = self.grid.wavenumber(i);
                let h = 1.0 / (1.0 + xi * xi);
                // f1 carries no Nyquist content after truncation
                tr[i] + Complex64::new(0.0, xi * h) * f1[i] + f2[i] * h
            })
            .collect();
        Field::from_spectrum(self.grid, spec)
    }

    /// `u_t` isolated: `-N(u) + g(t)`.
    pub fn rhs(&self, u: &Field, t: f64) -> Result<Field> {
        check_same_grid(&self.grid, u.grid())?;
        let mut out = self.spatial(u).map(|v| -v);
        if let Some(forcing) = &self.forcing {
            let g = forcing.eval(&self.grid, t);
            out = out.zip_with(&g, |a, b| a + b)?;
        }
        if !out.is_finite() {
            return Err(Error::NonFinite { time: t });
        }
        Ok(out)
    }

    pub fn step_rk4(&self, u: &Field, t: f64, dt: f64) -> Result<Field> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let grid = *u.grid();
        let out = rk4_step(u.values(), t, dt, |v, s| Ok(self.rhs(&Field::from_vec(grid, v.to_vec()), s)?.into_values()))?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: t + dt });
        }
        Ok(Field::from_vec(grid, out))
    }

    /// CFL step from the transport speed `u^k - a u^{k-2} u_x^2`.
    pub fn cfl_dt(&self, u: &Field, safety: f64, dt_max: f64) -> f64 {
        let k = self.params.k() as i32;
        let a = self.params.a();
        let ux = if a != 0.0 { Some(derivative(u, 1).expect("order 1")) } else { None };
        let speed = u.values().iter().enumerate().fold(0.0f64, |m, (j, &v)| {
            let mut s = ipow(v, k);
            if let Some(ux) = &ux {
                s -= a * ipow(v, k - 2) * ux.values()[j] * ux.values()[j];
            }
            m.max(s.abs())
        });
        cfl_from_speed(speed, u.grid().dx(), safety, dt_max)
    }
}

fn cfl_from_speed(speed: f64, dx: f64, safety: f64, dt_max: f64) -> f64 {
    dt_max.min(safety * dx / speed.max(SPEED_FLOOR))
}

pub fn f1(u: &Field, p: &Params) -> Field {
    Operator::new(*p, *u.grid()).f1(u)
}

pub fn f2(u: &Field, p: &Params) -> Field {
    Operator::new(*p, *u.grid()).f2(u)
}

/// Unforced right-hand side.
pub fn rhs(u: &Field, p: &Params, t: f64) -> Result<Field> {
    Operator::new(*p, *u.grid()).rhs(u, t)
}

pub fn cfl_dt(u: &Field, p: &Params, safety: f64, dt_max: f64) -> f64 {
    Operator::new(*p, *u.grid()).cfl_dt(u, safety, dt_max)
}

pub fn step_rk4(u: &Field, t: f64, dt: f64, p: &Params) -> Result<Field> {
    Operator::new(*p, *u.grid()).step_rk4(u, t, dt)
}

/// One classical RK4 step for `y' = f(y, t)`.
pub fn rk4_step<F>(y: &[f64], t: f64, dt: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    let axpy = |a: f64, x: &[f64]| -> Vec<f64> { y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect() };
    let k1 = f(y, t)?;
    let k2 = f(&axpy(0.5 * dt, &k1), t + 0.5 * dt)?;
    let k3 = f(&axpy(0.5 * dt, &k2), t + 0.5 * dt)?;
    let k4 = f(&axpy(dt, &k3), t + dt)?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Left side of the local form
///
/// `u_t - u_xxt + (b+1) u^k u_x + (2c-3k) u^{k-1} u_x u_xx - u^k u_xxx
///  + (3k-9a-b-2c) u^{k-2} u_x^3 + 6a u^{k-2} u_x u_xx^2 + 3a u^{k-2} u_x^2 u_xxx`.
pub fn local_form_residual(u: &Field, ut: &Field, p: &Params) -> Result<Field> {
    check_same_grid(u.grid(), ut.grid())?;
    let (a, b, c) = (p.a(), p.b(), p.c());
    let k = p.k() as i32;
    let kf = k as f64;
    let ux = derivative(u, 1)?;
    let uxx = derivative(u, 2)?;
    let uxxx = derivative(u, 3)?;
    let utxx = derivative(ut, 2)?;
    let c_conv = 2.0 * c - 3.0 * kf;
    let c_cub = 3.0 * kf - 9.0 * a - b - 2.0 * c;
    let values = (0..u.grid().n())
        .map(|j| {
            let (v, vx, vxx, vxxx) = (u.values()[j], ux.values()[j], uxx.values()[j], uxxx.values()[j]);
            let mut r = ut.values()[j] - utxx.values()[j];
            r += (b + 1.0) * ipow(v, k) * vx;
            if c_conv != 0.0 {
                r += c_conv * ipow(v, k - 1) * vx * vxx;
            }
            r -= ipow(v, k) * vxxx;
            if c_cub != 0.0 {
                r += c_cub * ipow(v, k - 2) * vx * vx * vx;
            }
            if a != 0.0 {
                let vk2 = ipow(v, k - 2);
                r += 6.0 * a * vk2 * vx * vxx * vxx + 3.0 * a * vk2 * vx * vx * vxxx;
            }
            r
        })
        .collect();
    Ok(Field::from_vec(*u.grid(), values))
}

/// Run configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: Params,
    pub grid: Grid,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub output_stride: usize,
    pub forcing: Option<Forcing>,
    /// Applied to the state after every accepted step.
    pub filter: Option<SpectralFilter>,
    /// Index `s` of the tracked `H^s` norm.
    pub sobolev_order: f64,
}

impl SimConfig {
    pub fn new(params: Params, grid: Grid, t_end: f64) -> Self {
        SimConfig {
            params,
            grid,
            t_end,
            cfl_safety: 0.4,
            dt_max: 1e-2,
            output_stride: 1,
            forcing: None,
            filter: None,
            sobolev_order: DEFAULT_SOBOLEV_ORDER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidArgument(format!("t_end must be positive and finite, got {}", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidArgument(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidArgument("output_stride must be at least 1".into()));
        }
        if !(self.sobolev_order >= 0.0) {
            return Err(Error::InvalidArgument("sobolev_order must be non-negative".into()));
        }
        Ok(())
    }

    /// `2^{1 + 1/k}`, the growth factor in the well-posedness estimate.
    pub fn growth_bound_factor(&self) -> f64 {
        2f64.powf(1.0 + 1.0 / self.params.k() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// Step that produced this state; zero for the initial record.
    pub dt: f64,
    pub hs_norm: f64,
    pub h1_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: Params,
    pub grid: Grid,
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    /// One record per accepted step, starting with `t = 0`.
    pub steps: Vec<StepRecord>,
    pub sobolev_order: f64,
    /// `2^{1+1/k} ‖u0‖_{H^s}`.
    pub hs_bound: f64,
    /// First time the `H^s` norm exceeded `hs_bound`, if it did.
    pub hs_bound_exceeded_at: Option<f64>,
}

impl Trajectory {
    pub fn hs_sup(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.hs_norm))
    }

    pub fn final_snapshot(&self) -> &Field {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Config(#[from] Error),
    #[error("blow-up at t = {time} (last good state at t = {last_good_time})")]
    BlowUp { time: f64, last_good_time: f64, partial: Box<Trajectory> },
}

fn record(u: &Field, t: f64, dt: f64, s: f64) -> StepRecord {
    let hs = sobolev_norm(u, s);
    let h1 = sobolev_norm(u, 1.0);
    StepRecord { t, dt, hs_norm: hs, h1_sq: h1 * h1 }
}

/// Advance `u0` to `cfg.t_end` with CFL-limited RK4 steps.
pub fn simulate(cfg: &SimConfig, u0: &Field) -> std::result::Result<Trajectory, SimulationError> {
    cfg.validate()?;
    check_same_grid(&cfg.grid, u0.grid())?;
    if !u0.is_finite() {
        return Err(Error::InvalidArgument("initial data is not finite".into()).into());
    }
    let op = Operator::new(cfg.params, cfg.grid).with_forcing(cfg.forcing.clone());
    let first = record(u0, 0.0, 0.0, cfg.sobolev_order);
    let hs_bound = cfg.growth_bound_factor() * first.hs_norm;
    let mut traj = Trajectory {
        params: cfg.params,
        grid: cfg.grid,
        times: vec![0.0],
        snapshots: vec![u0.clone()],
        steps: vec![first],
        sobolev_order: cfg.sobolev_order,
        hs_bound,
        hs_bound_exceeded_at: None,
    };
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut step = 0usize;
    let finish_tol = 1e-12 * cfg.t_end.max(1.0);
    while t < cfg.t_end - finish_tol {
        let mut dt = op.cfl_dt(&u, cfg.cfl_safety, cfg.dt_max);
        if t + dt >= cfg.t_end - finish_tol {
            dt = cfg.t_end - t;
        }
        let next = match op.step_rk4(&u, t, dt) {
            Ok(v) => v,
            Err(Error::NonFinite { time }) => {
                return Err(SimulationError::BlowUp { time, last_good_time: t, partial: Box::new(traj) });
            }
            Err(e) => return Err(e.into()),
        };
        u = match &cfg.filter {
            Some(f) => f.apply(&next),
            None => next,
        };
        t = if t + dt >= cfg.t_end - finish_tol { cfg.t_end } else { t + dt };
        step += 1;
        let rec = record(&u, t, dt, cfg.sobolev_order);
        if !(rec.hs_norm.is_finite() && u.is_finite()) {
            return Err(SimulationError::BlowUp { time: t, last_good_time: t - dt, partial: Box::new(traj) });
        }
        if traj.hs_bound_exceeded_at.is_none() && rec.hs_norm > hs_bound {
            traj.hs_bound_exceeded_at = Some(t);
        }
        traj.steps.push(rec);
        let last = t >= cfg.t_end;
        if step % cfg.output_stride == 0 || last {
            traj.times.push(t);
            traj.snapshots.push(u.clone());
        }
    }
    Ok(traj)
}
