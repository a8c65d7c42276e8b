//! Particle paths `η_t = u^k(η, t)`, the momentum `m = u - u_xx`, and the
//! g-kbCH invariant `m(η, t) η_x^{b/k} = m_0`.

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::params::Params;
use crate::spectral::{derivative, Field, Grid};

/// `m = u - u_xx`.
pub fn momentum(u: &Field) -> Field {
    let uxx = derivative(u, 2).expect("order 2");
    Field::from_vec(*u.grid(), u.values().iter().zip(uxx.values()).map(|(a, b)| a - b).collect())
}

/// Four-point Lagrange interpolation on the periodic grid.
pub fn interpolate_cubic(f: &Field, x: f64) -> f64 {
    interp_values(f.grid(), f.values(), x)
}

fn interp_values(grid: &Grid, v: &[f64], x: f64) -> f64 {
    let n = grid.n();
    let s = x.rem_euclid(grid.length()) / grid.dx();
    let j = s.floor();
    let t = s - j;
    let j = j as isize;
    let at = |o: isize| v[(j + o).rem_euclid(n as isize) as usize];
    let wm = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
    wm * at(-1) + w0 * at(0) + w1 * at(1) + w2 * at(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub seeds: Vec<f64>,
    /// Index of the first trajectory snapshot the paths start from.
    pub start_index: usize,
    pub times: Vec<f64>,
    /// `paths[s][i]` is `η(seed_s, times[i])`, unwrapped.
    pub paths: Vec<Vec<f64>>,
    /// `stretch[s][i]` is `η_x(seed_s, times[i])`.
    pub stretch: Vec<Vec<f64>>,
    /// Set when a particle came within `L/8` of the periodic seam.
    pub left_core: Vec<bool>,
}

pub fn advect(traj: &Trajectory, seeds: &[f64]) -> Result<ParticleSet> {
    advect_from(traj, seeds, 0)
}

/// Integrate particles from snapshot `start` to the end of the trajectory.
/// `u` is interpolated cubically in space and linearly in time between
/// snapshots; one RK4 step is taken per snapshot interval.
pub fn advect_from(traj: &Trajectory, seeds: &[f64], start: usize) -> Result<ParticleSet> {
    if start >= traj.snapshots.len() {
        return Err(Error::InvalidArgument(format!(
            "start index {start} beyond {} snapshots",
            traj.snapshots.len()
        )));
    }
    let grid = traj.grid;
    let k = traj.params.k() as i32;
    let kf = k as f64;
    let fields: Vec<(Vec<f64>, Vec<f64>)> = traj.snapshots[start..]
        .iter()
        .map(|u| Ok((u.values().to_vec(), derivative(u, 1)?.into_values())))
        .collect::<Result<_>>()?;
    let times = traj.times[start..].to_vec();
    let (lo, hi) = (grid.length() / 8.0, grid.length() * 7.0 / 8.0);

    let mut paths = Vec::with_capacity(seeds.len());
    let mut stretch = Vec::with_capacity(seeds.len());
    let mut left_core = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut eta = seed;
        let mut s = 1.0;
        let mut path = vec![eta];
        let mut st = vec![s];
        let mut flagged = false;
        for i in 0..times.len() - 1 {
            let h = times[i + 1] - times[i];
            let (u0, ux0) = (&fields[i].0, &fields[i].1);
            let (u1, ux1) = (&fields[i + 1].0, &fields[i + 1].1);
            let vel = |x: f64, st: f64, tau: f64| -> (f64, f64) {
                let u = (1.0 - tau) * interp_values(&grid, u0, x) + tau * interp_values(&grid, u1, x);
                let ux = (1.0 - tau) * interp_values(&grid, ux0, x) + tau * interp_values(&grid, ux1, x);
                (u.powi(k), kf * u.powi(k - 1) * ux * st)
            };
            let (a1, b1) = vel(eta, s, 0.0);
            let (a2, b2) = vel(eta + 0.5 * h * a1, s + 0.5 * h * b1, 0.5);
            let (a3, b3) = vel(eta + 0.5 * h * a2, s + 0.5 * h * b2, 0.5);
            let (a4, b4) = vel(eta + h * a3, s + h * b3, 1.0);
            eta += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            s += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            if !(s > 0.0) || !eta.is_finite() {
                return Err(Error::WaveBreaking { seed, time: times[i + 1] });
            }
            let wrapped = eta.rem_euclid(grid.length());
            flagged |= wrapped < lo || wrapped > hi;
            path.push(eta);
            st.push(s);
        }
        paths.push(path);
        stretch.push(st);
        left_core.push(flagged);
    }
    Ok(ParticleSet { seeds: seeds.to_vec(), start_index: start, times, paths, stretch, left_core })
}

/// One row of the particle CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleRecord {
    pub seed: f64,
    pub t: f64,
    pub eta: f64,
    pub eta_x: f64,
    pub m_along: f64,
    pub invariant_residual: f64,
}

/// Relative residual of `m(η) η_x^{b/k} = m_0` at every seed and time.
pub fn conservation_records(traj: &Trajectory, ps: &ParticleSet, p: &Params) -> Result<Vec<ParticleRecord>> {
    if !p.is_gkbch() {
        return Err(Error::NotGkbch);
    }
    let expo = p.b() / p.k() as f64;
    let moms: Vec<Field> = traj.snapshots[ps.start_index..].iter().map(momentum).collect();
    if moms.len() != ps.times.len() {
        return Err(Error::InvalidArgument("particle set does not match the trajectory".into()));
    }
    let mut out = Vec::with_capacity(ps.seeds.len() * ps.times.len());
    for (s, &seed) in ps.seeds.iter().enumerate() {
        let m0 = interpolate_cubic(&moms[0], seed);
        for (i, &t) in ps.times.iter().enumerate() {
            let eta = ps.paths[s][i];
            let eta_x = ps.stretch[s][i];
            let m = interpolate_cubic(&moms[i], eta);
            let residual = (m * eta_x.powf(expo) - m0).abs() / (m0.abs() + 1e-12);
            out.push(ParticleRecord { seed, t, eta, eta_x, m_along: m, invariant_residual: residual });
        }
    }
    Ok(out)
}

/// Maximum relative residual of the g-kbCH invariant.
pub fn conservation_check(traj: &Trajectory, ps: &ParticleSet, p: &Params) -> Result<f64> {
    Ok(conservation_records(traj, ps, p)?.iter().fold(0.0, |m, r| m.max(r.invariant_residual)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, SimConfig};
    use crate::params::{validate, Preset};

    #[test]
    fn momentum_examples() {
        let g = Grid::circle(64).unwrap();
        let s = Field::from_fn(g, f64::sin);
        let m = momentum(&s);
        assert!(m.values().iter().zip(s.values()).all(|(a, b)| (a - 2.0 * b).abs() < 1e-12));
        let c = momentum(&Field::constant(g, 0.3));
        assert!(c.values().iter().all(|v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn cubic_interpolation_is_fourth_order_accurate() {
        let g = Grid::circle(64).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * x).sin());
        for x in [0.01, 1.234, 3.3, 6.2, -0.5, 7.0] {
            let err = (interpolate_cubic(&f, x) - (2.0 * x).sin()).abs();
            // |f''''| h^4 / 24 with h = 2π/64
            assert!(err < 16.0 * g.dx().powi(4) / 24.0, "x={x} err={err}");
        }
        // nodes reproduce samples
        assert!((interpolate_cubic(&f, g.node(5)) - f.values()[5]).abs() < 1e-15);
    }

    #[test]
    fn zero_solution_has_fixed_particles() {
        let g = Grid::circle(32).unwrap();
        let p = Preset::Novikov.params().unwrap();
        let traj = simulate(&SimConfig::new(p, g, 0.1), &Field::zeros(g)).unwrap();
        let ps = advect(&traj, &[0.5, 3.0]).unwrap();
        for s in 0..2 {
            assert!(ps.paths[s].iter().all(|&e| e == ps.seeds[s]));
            assert!(ps.stretch[s].iter().all(|&e| e == 1.0));
        }
        assert_eq!(conservation_check(&traj, &ps, &p).unwrap(), 0.0);
    }

    #[test]
    fn constant_state_translates() {
        let g = Grid::circle(32).unwrap();
        let p = Preset::Novikov.params().unwrap();
        let kappa = 0.8;
        let traj = simulate(&SimConfig::new(p, g, 0.5), &Field::constant(g, kappa)).unwrap();
        let ps = advect(&traj, &[1.0]).unwrap();
        let t_end = traj.final_time();
        assert!((ps.paths[0].last().unwrap() - (1.0 + kappa * kappa * t_end)).abs() < 1e-12);
        assert!((ps.stretch[0].last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_transport_when_b_is_zero() {
        // k = 1, b = 0 gives exponent b/k = 0: m is carried unchanged
        let p = Preset::Bfam { b: 0.0 }.params().unwrap();
        let g = Grid::circle(128).unwrap();
        let u0 = Field::from_fn(g, |x| 1.0 + 0.1 * x.cos());
        let traj = simulate(&SimConfig::new(p, g, 0.3), &u0).unwrap();
        let seeds: Vec<f64> = (0..8).map(|i| 0.4 + 0.7 * i as f64).collect();
        let ps = advect(&traj, &seeds).unwrap();
        let rec = conservation_records(&traj, &ps, &p).unwrap();
        let worst = rec.iter().fold(0.0f64, |m, r| m.max(r.invariant_residual));
        assert!(worst < 1e-5, "worst residual {worst}");
    }

    #[test]
    fn conservation_needs_gkbch() {
        let g = Grid::circle(32).unwrap();
        let forq = Preset::Forq.params().unwrap();
        let traj = simulate(&SimConfig::new(forq, g, 0.05), &Field::zeros(g)).unwrap();
        let ps = advect(&traj, &[1.0]).unwrap();
        assert_eq!(conservation_check(&traj, &ps, &forq), Err(Error::NotGkbch));
        let off = validate(2, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(conservation_check(&traj, &ps, &off), Err(Error::NotGkbch));
    }

    #[test]
    fn seam_proximity_is_flagged() {
        let g = Grid::circle(32).unwrap();
        let p = Preset::Ch.params().unwrap();
        let traj = simulate(&SimConfig::new(p, g, 0.5), &Field::constant(g, 1.0)).unwrap();
        let ps = advect(&traj, &[3.0, 5.3]).unwrap();
        assert_eq!(ps.left_core, vec![false, true]);
    }
}
