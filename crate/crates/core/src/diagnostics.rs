//! Norms, conservation drift, tail-decay fits, weighted sup-norms and crest
//! tracking.

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::spectral::{derivative, Field, Grid};

/// Samples at or below this magnitude are excluded from log fits.
pub const DECAY_FLOOR: f64 = 1e-13;

/// Minimum coefficient of determination for a tail to count as exponential.
pub const R2_THRESHOLD: f64 = 0.995;

/// Minimum number of grid nodes a fit window must contain.
pub const MIN_WINDOW_NODES: usize = 16;

/// `‖f‖_{H^s} = (Σ (1 + ξ²)^s |f̂|² L / n²)^{1/2}`; at `s = 1` the square is
/// the discrete `∫ u² + u_x²`.
pub fn sobolev_norm(f: &Field, s: f64) -> f64 {
    let grid = f.grid();
    let spec = f.spectrum();
    let n = grid.n() as f64;
    let sum: f64 = spec
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let xi = grid.wavenumber(i);
            (1.0 + xi * xi).powf(s) * z.norm_sqr()
        })
        .sum();
    (sum * grid.length() / (n * n)).sqrt()
}

/// Squared `H^1` norm.
pub fn h1_squared(f: &Field) -> f64 {
    sobolev_norm(f, 1.0).powi(2)
}

/// `max_t |E(t) - E(0)| / E(0)` over every accepted step.
pub fn h1_drift(traj: &Trajectory) -> Result<f64> {
    let first = traj.steps.first().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let e0 = first.h1_sq;
    if e0 == 0.0 {
        return Err(Error::Degenerate("initial H^1 norm is zero".into()));
    }
    Ok(traj.steps.iter().fold(0.0, |m, s| m.max((s.h1_sq - e0).abs() / e0)))
}

/// `φ_N(x) = e^{θ|x|}` for `|x| < N`, `e^{θN}` beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    theta: f64,
    cap_radius: f64,
}

impl WeightSpec {
    pub fn new(theta: f64, cap_radius: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidArgument(format!("θ must lie in (0, 1), got {theta}")));
        }
        if !(cap_radius > 0.0 && cap_radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("cap radius must be positive, got {cap_radius}")));
        }
        Ok(WeightSpec { theta, cap_radius })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn cap_radius(&self) -> f64 {
        self.cap_radius
    }

    pub fn weight(&self, x: f64) -> f64 {
        (self.theta * x.abs().min(self.cap_radius)).exp()
    }
}

/// `max_j |f(x_j)| φ_N(x_j - L/2)`.
pub fn weighted_sup(f: &Field, w: &WeightSpec) -> f64 {
    let grid = f.grid();
    let c = grid.center();
    f.values()
        .iter()
        .enumerate()
        .fold(0.0, |m, (j, v)| m.max(v.abs() * w.weight(grid.node(j) - c)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Least-squares fit of `log|f| ≈ log A - θ |x - L/2|` over a tail window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub theta_hat: Option<f64>,
    /// Window in distance from the box centre.
    pub window: (f64, f64),
    pub r2: Option<f64>,
    pub floor_hit: bool,
    /// Fitted prefactor `A`.
    pub amplitude: Option<f64>,
    pub samples: usize,
}

impl DecayFit {
    /// Fit defined, no floor hit, and `r² >= R2_THRESHOLD`.
    pub fn is_exponential(&self) -> bool {
        !self.floor_hit && self.theta_hat.is_some() && self.r2.is_some_and(|r| r >= R2_THRESHOLD)
    }
}

/// `[L/8, L/4]` from the centre, clear of both the data core and the seam.
pub fn default_window(grid: &Grid) -> (f64, f64) {
    (grid.length() / 8.0, grid.length() / 4.0)
}

pub fn decay_fit(f: &Field, window: (f64, f64), side: Side) -> Result<DecayFit> {
    let grid = f.grid();
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
        return Err(Error::InvalidArgument(format!("bad fit window [{lo}, {hi}]")));
    }
    let half = grid.length() / 2.0;
    if hi > half - grid.length() / 8.0 {
        return Err(Error::InvalidArgument(format!(
            "window end {hi} is within L/8 of the periodic seam at distance {half}"
        )));
    }
    let c = grid.center();
    let mut nodes = 0usize;
    let mut pts = Vec::new();
    let mut floor_hit = false;
    for (j, &v) in f.values().iter().enumerate() {
        let d = grid.node(j) - c;
        let r = match side {
            Side::Right => d,
            Side::Left => -d,
        };
        if r < lo || r > hi {
            continue;
        }
        nodes += 1;
        if v.abs() > DECAY_FLOOR {
            pts.push((r, v.abs().ln()));
        } else {
            floor_hit = true;
        }
    }
    if nodes < MIN_WINDOW_NODES {
        return Err(Error::InvalidArgument(format!(
            "fit window [{lo}, {hi}] holds {nodes} nodes, need at least {MIN_WINDOW_NODES}"
        )));
    }
    let mut fit = DecayFit { theta_hat: None, window, r2: None, floor_hit, amplitude: None, samples: pts.len() };
    if pts.len() < 2 {
        return Ok(fit);
    }
    let m = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    fit.theta_hat = Some(-slope);
    fit.amplitude = Some(intercept.exp());
    fit.r2 = Some(if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 });
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceEntry {
    pub t: f64,
    pub u: DecayFit,
    pub ux: DecayFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceReport {
    pub theta: f64,
    pub side: Side,
    pub entries: Vec<PersistenceEntry>,
}

impl PersistenceReport {
    fn min_over(&self, pick: impl Fn(&PersistenceEntry) -> &DecayFit) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| pick(e).theta_hat)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
    }

    pub fn min_theta_u(&self) -> Option<f64> {
        self.min_over(|e| &e.u)
    }

    pub fn min_theta_ux(&self) -> Option<f64> {
        self.min_over(|e| &e.ux)
    }

    pub fn min_r2(&self) -> Option<f64> {
        self.entries
            .iter()
            .flat_map(|e| [e.u.r2, e.ux.r2])
            .flatten()
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
    }

    pub fn any_floor_hit(&self) -> bool {
        self.entries.iter().any(|e| e.u.floor_hit || e.ux.floor_hit)
    }

    /// Every fitted exponent stays at or above `θ - 0.05` with no floor hit.
    pub fn persists(&self) -> bool {
        let bound = self.theta - 0.05;
        !self.any_floor_hit()
            && matches!((self.min_theta_u(), self.min_theta_ux()), (Some(a), Some(b)) if a >= bound && b >= bound)
    }
}

/// Decay fits of every snapshot and its derivative; `window` defaults to
/// [`default_window`].
pub fn persistence_report(traj: &Trajectory, theta: f64, window: Option<(f64, f64)>, side: Side) -> Result<PersistenceReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("θ must lie in (0, 1), got {theta}")));
    }
    let window = window.unwrap_or_else(|| default_window(&traj.grid));
    let entries = traj
        .times
        .iter()
        .zip(&traj.snapshots)
        .map(|(&t, u)| {
            let ux = derivative(u, 1)?;
            Ok(PersistenceEntry { t, u: decay_fit(u, window, side)?, ux: decay_fit(&ux, window, side)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PersistenceReport { theta, side, entries })
}

/// Location of the dominant extremum, refined by a parabola through the
/// three nodes around it. `use_max` picks the maximum, otherwise the minimum.
pub fn crest_position(f: &Field, use_max: bool) -> Option<f64> {
    let grid = f.grid();
    let n = grid.n();
    let sgn = if use_max { 1.0 } else { -1.0 };
    let v = |j: usize| sgn * f.values()[j % n];
    let (jmax, vmax) = (0..n).map(|j| (j, v(j))).fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let vmin = (0..n).map(v).fold(f64::INFINITY, f64::min);
    let scale = vmax.abs().max(vmin.abs()).max(f64::MIN_POSITIVE);
    if vmax - vmin <= 1e-12 * scale {
        return None;
    }
    // a second node at the same height away from the peak makes it ambiguous
    let tie = (0..n).any(|j| {
        let dist = (j as isize - jmax as isize).rem_euclid(n as isize).min((jmax as isize - j as isize).rem_euclid(n as isize));
        dist > 1 && vmax - v(j) <= 1e-14 * scale
    });
    if tie {
        return None;
    }
    let (l, c, r) = (v(jmax + n - 1), vmax, v(jmax + 1));
    let denom = l - 2.0 * c + r;
    let offset = if denom != 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    Some((grid.node(jmax) + offset * grid.dx()).rem_euclid(grid.length()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrestTrack {
    pub times: Vec<f64>,
    /// Unwrapped crest positions.
    pub positions: Vec<f64>,
    pub speed: f64,
}

/// Track the dominant extremum (the maximum unless the field is mostly
/// negative) and fit its speed by least squares.
pub fn crest_track(traj: &Trajectory) -> Result<CrestTrack> {
    let first = traj.snapshots.first().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let max = first.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = first.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let use_max = max.abs() >= min.abs();
    let length = traj.grid.length();
    let mut positions: Vec<f64> = Vec::with_capacity(traj.snapshots.len());
    for (&t, u) in traj.times.iter().zip(&traj.snapshots) {
        let x = crest_position(u, use_max).ok_or(Error::AmbiguousCrest { time: t })?;
        let unwrapped = match positions.last() {
            Some(&prev) => {
                let mut d = (x - prev).rem_euclid(length);
                if d > 0.5 * length {
                    d -= length;
                }
                prev + d
            }
            None => x,
        };
        positions.push(unwrapped);
    }
    let speed = if positions.len() < 2 { 0.0 } else { ls_slope(&traj.times, &positions) };
    Ok(CrestTrack { times: traj.times.clone(), positions, speed })
}

pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let xm = x.iter().sum::<f64>() / m;
    let ym = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StepRecord;
    use crate::exact::PeakonSpec;
    use crate::params::Preset;
    use std::f64::consts::PI;

    fn traj_from(grid: Grid, times: Vec<f64>, snaps: Vec<Field>) -> Trajectory {
        let steps = times
            .iter()
            .zip(&snaps)
            .map(|(&t, s)| StepRecord { t, dt: 0.0, hs_norm: sobolev_norm(s, 3.0), h1_sq: h1_squared(s) })
            .collect();
        Trajectory {
            params: Preset::Ch.params().unwrap(),
            grid,
            times,
            snapshots: snaps,
            steps,
            sobolev_order: 3.0,
            hs_bound: 0.0,
            hs_bound_exceeded_at: None,
        }
    }

    #[test]
    fn sobolev_examples() {
        let g = Grid::circle(64).unwrap();
        assert_eq!(sobolev_norm(&Field::zeros(g), 2.0), 0.0);
        let s = Field::from_fn(g, f64::sin);
        assert!((sobolev_norm(&s, 1.0) - (2.0 * PI).sqrt()).abs() < 1e-13);
        assert!((sobolev_norm(&s, 0.0) - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn sobolev_is_monotone_in_s() {
        let g = Grid::circle(64).unwrap();
        let f = Field::from_fn(g, |x| (x.cos()).exp() + 0.1 * (5.0 * x).sin());
        let norms: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 3.5].iter().map(|&s| sobolev_norm(&f, s)).collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn drift_needs_nonzero_energy() {
        let g = Grid::circle(16).unwrap();
        let t = traj_from(g, vec![0.0, 1.0], vec![Field::zeros(g), Field::zeros(g)]);
        assert!(matches!(h1_drift(&t), Err(Error::Degenerate(_))));
        let s = Field::from_fn(g, f64::sin);
        let t = traj_from(g, vec![0.0, 1.0], vec![s.clone(), s.map(|v| 1.1 * v)]);
        assert!((h1_drift(&t).unwrap() - 0.21).abs() < 1e-12);
    }

    #[test]
    fn weight_spec_bounds() {
        assert!(WeightSpec::new(1.0, 5.0).is_err());
        assert!(WeightSpec::new(0.0, 5.0).is_err());
        assert!(WeightSpec::new(0.5, 0.0).is_err());
    }

    #[test]
    fn weighted_sup_examples() {
        let g = Grid::line(4096).unwrap();
        let c = g.center();
        let w = WeightSpec::new(0.5, 10.0).unwrap();
        assert_eq!(weighted_sup(&Field::zeros(g), &w), 0.0);
        let same = Field::from_fn(g, |x| (-0.5 * (x - c).abs()).exp());
        assert!((weighted_sup(&same, &w) - 1.0).abs() < 1e-12);
        let slower = Field::from_fn(g, |x| (-0.3 * (x - c).abs()).exp());
        // max at |x| = N, within one grid cell
        let got = weighted_sup(&slower, &w);
        assert!((got - 2f64.exp()).abs() < 0.3 * g.dx() * 2f64.exp());
        assert!(got <= (0.5f64 * 10.0).exp() * slower.max_abs());
    }

    #[test]
    fn decay_fit_examples() {
        let g = Grid::line(2048).unwrap();
        let c = g.center();
        let f = Field::from_fn(g, |x| (-0.5 * (x - c).abs()).exp());
        let fit = decay_fit(&f, default_window(&g), Side::Right).unwrap();
        assert!((fit.theta_hat.unwrap() - 0.5).abs() < 1e-10);
        assert!(fit.is_exponential());
        let left = decay_fit(&f, default_window(&g), Side::Left).unwrap();
        assert!((left.theta_hat.unwrap() - 0.5).abs() < 1e-10);
        let pk = PeakonSpec::line(1.0, Preset::Ch.params().unwrap()).unwrap();
        let p = Field::from_fn(g, |x| pk.eval(x - c, 0.0));
        let fit = decay_fit(&p, (5.0, 25.0), Side::Right).unwrap();
        assert!((fit.theta_hat.unwrap() - 1.0).abs() < 0.01);
        assert!((fit.amplitude.unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn decay_fit_flags_gaussian() {
        let g = Grid::line(2048).unwrap();
        let c = g.center();
        let f = Field::from_fn(g, |x| (-(x - c).powi(2)).exp());
        let fit = decay_fit(&f, (5.0, 10.0), Side::Right).unwrap();
        assert!(fit.floor_hit);
        assert!(fit.theta_hat.unwrap() >= 5.0);
        assert!(!fit.is_exponential());
        // above the floor the log-slope 2x̄ bends the fit below the gate
        let fit = decay_fit(&f, (1.0, 5.0), Side::Right).unwrap();
        assert!(!fit.floor_hit);
        assert!(fit.theta_hat.unwrap() >= 5.0);
        assert!(fit.r2.unwrap() < R2_THRESHOLD);
    }

    #[test]
    fn decay_fit_errors() {
        let g = Grid::line(256).unwrap();
        let z = Field::zeros(g);
        assert!(decay_fit(&z, (3.0, 1.0), Side::Right).is_err());
        // too close to the seam
        assert!(decay_fit(&z, (10.0, 60.0), Side::Right).is_err());
        // fewer than 16 nodes
        assert!(decay_fit(&z, (10.0, 11.0), Side::Right).is_err());
        let fit = decay_fit(&z, default_window(&g), Side::Right).unwrap();
        assert!(fit.floor_hit && fit.theta_hat.is_none() && fit.r2.is_none());
    }

    #[test]
    fn persistence_on_zero_trajectory() {
        let g = Grid::line(256).unwrap();
        let t = traj_from(g, vec![0.0, 0.5], vec![Field::zeros(g), Field::zeros(g)]);
        let rep = persistence_report(&t, 0.5, None, Side::Right).unwrap();
        assert!(rep.entries.iter().all(|e| e.u.floor_hit && e.ux.floor_hit));
        assert!(rep.min_theta_u().is_none());
        assert!(!rep.persists());
        assert!(persistence_report(&t, 1.0, None, Side::Right).is_err());
    }

    #[test]
    fn crest_track_exact_peakon() {
        let g = Grid::line(2048).unwrap();
        let c = g.center();
        for preset in [Preset::Ch, Preset::Dp, Preset::Novikov, Preset::Forq] {
            let p = preset.params().unwrap();
            let gamma = if preset == Preset::Novikov { 2f64.sqrt() } else { 1.0 };
            let pk = PeakonSpec::line(gamma, p).unwrap();
            let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
            let snaps = times.iter().map(|&t| Field::from_fn(g, |x| pk.eval(x - c, t))).collect();
            let track = crest_track(&traj_from(g, times, snaps)).unwrap();
            assert!((track.speed - pk.speed()).abs() < 1e-3 * pk.speed(), "{preset:?}: {}", track.speed);
        }
    }

    #[test]
    fn crest_track_unwraps_the_seam() {
        let g = Grid::circle(256).unwrap();
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let snaps = times.iter().map(|&t| Field::from_fn(g, |x| (x - 5.0 - 2.0 * t).cos().exp())).collect();
        let track = crest_track(&traj_from(g, times, snaps)).unwrap();
        assert!((track.speed - 2.0).abs() < 1e-6);
        assert!(track.positions.last().unwrap() > &(2.0 * PI));
    }

    #[test]
    fn crest_track_rejects_flat_field() {
        let g = Grid::circle(32).unwrap();
        let t = traj_from(g, vec![0.0], vec![Field::constant(g, 1.0)]);
        assert!(matches!(crest_track(&t), Err(Error::AmbiguousCrest { .. })));
    }
}
