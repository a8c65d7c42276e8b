//! Uniform periodic grids and Fourier-multiplier operators on them.
//!
//! Forward transforms are unnormalized (`f̂_m = Σ_j f_j e^{-i ξ_m x_j}`), the
//! inverse carries the `1/n`. Spectra are stored in FFT order: index `i`
//! holds mode `i` for `i < n/2`, the Nyquist mode at `i = n/2`, and mode
//! `i - n` above it.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Default box length used to emulate the real line.
pub const LINE_LENGTH: f64 = 40.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n must be even and at least 8, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive and finite, got {length}")));
        }
        Ok(Grid { n, length })
    }

    /// Circle of circumference 2π.
    pub fn circle(n: usize) -> Result<Self> {
        Grid::new(n, 2.0 * PI)
    }

    /// Periodic box of length 40π standing in for the real line.
    pub fn line(n: usize) -> Result<Self> {
        Grid::new(n, LINE_LENGTH)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Centre of the box; line-emulation profiles are placed here.
    pub fn center(&self) -> f64 {
        0.5 * self.length
    }

    /// Signed integer mode number for FFT index `i`. The Nyquist index maps
    /// to `-n/2`.
    pub fn mode(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Angular wavenumber `2π m / L` for FFT index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI * self.mode(i) as f64 / self.length
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.wavenumber(i)).collect()
    }
}

thread_local! {
    static PLANNER: RefCell<(FftPlanner<f64>, HashMap<usize, FftPair>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

#[derive(Clone)]
struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> FftPair {
    PLANNER.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        if let Some(p) = cache.get(&n) {
            return p.clone();
        }
        let pair = FftPair { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) };
        cache.insert(n, pair.clone());
        pair
    })
}

/// Unnormalized forward DFT of real samples.
pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plans(buf.len()).forward.process(&mut buf);
    buf
}

/// Inverse DFT (with the `1/n`), keeping the real part.
pub fn inverse_real(mut spec: Vec<Complex64>) -> Vec<f64> {
    let n = spec.len();
    plans(n).inverse.process(&mut spec);
    let scale = 1.0 / n as f64;
    spec.into_iter().map(|z| z.re * scale).collect()
}

/// Real samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch { expected: grid.n(), found: values.len() });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at index {j}")));
        }
        Ok(Field { grid, values })
    }

    /// Skips the finiteness scan. Callers check finiteness where it matters.
    pub(crate) fn from_vec(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Field { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Field { grid, values: vec![0.0; grid.n()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field { grid, values: vec![value; grid.n()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Field { grid, values: (0..grid.n()).map(|j| f(grid.node(j))).collect() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        forward(&self.values)
    }

    pub fn from_spectrum(grid: Grid, spec: Vec<Complex64>) -> Self {
        assert_eq!(spec.len(), grid.n(), "spectrum length must match grid");
        Field::from_vec(grid, inverse_real(spec))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(Field::from_vec(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    /// Discrete `L^2` inner product `dx Σ f_j g_j`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(self.grid.dx() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

pub(crate) fn check_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::GridMismatch { expected: a.n(), found: b.n() });
    }
    if a.length() != b.length() {
        return Err(Error::InvalidGrid(format!("box lengths differ: {} vs {}", a.length(), b.length())));
    }
    Ok(())
}

/// Multiply the spectrum of `f` by `mult(i, ξ_i)`.
pub fn apply_multiplier(f: &Field, mult: impl Fn(usize, f64) -> Complex64) -> Field {
    let grid = *f.grid();
    let mut spec = f.spectrum();
    for (i, z) in spec.iter_mut().enumerate() {
        *z *= mult(i, grid.wavenumber(i));
    }
    Field::from_spectrum(grid, spec)
}

/// Multiplier of the `order`-th derivative, `(iξ)^order`, with the Nyquist
/// mode dropped for odd orders.
pub(crate) fn derivative_symbol(grid: &Grid, i: usize, order: u32) -> Complex64 {
    if order % 2 == 1 && grid.is_nyquist(i) {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(0.0, grid.wavenumber(i)).powu(order)
}

pub fn transform_roundtrip(f: &Field) -> Field {
    Field::from_spectrum(*f.grid(), f.spectrum())
}

/// Spectral derivative of order `order >= 1`.
pub fn derivative(f: &Field, order: u32) -> Result<Field> {
    if order == 0 {
        return Err(Error::InvalidArgument("derivative order must be at least 1".into()));
    }
    let grid = *f.grid();
    Ok(apply_multiplier(f, |i, _| derivative_symbol(&grid, i, order)))
}

/// `(1 - ∂²)^{-1} f`, i.e. convolution with the periodic Green kernel.
pub fn helmholtz_inverse(f: &Field) -> Field {
    apply_multiplier(f, |_, xi| Complex64::new(1.0 / (1.0 + xi * xi), 0.0))
}

/// `(1 - ∂²) f`.
pub fn helmholtz(f: &Field) -> Field {
    apply_multiplier(f, |_, xi| Complex64::new(1.0 + xi * xi, 0.0))
}

/// `∂_x G * f` with multiplier `iξ / (1 + ξ²)`.
pub fn green_dx_convolve(f: &Field) -> Field {
    let grid = *f.grid();
    apply_multiplier(f, |i, xi| {
        if grid.is_nyquist(i) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, xi / (1.0 + xi * xi))
        }
    })
}

/// Smallest even `M >= (p + 1) n / 2`, the alias-free padded size for a
/// `p`-fold product of fields resolved on `n` points.
pub fn padded_size(n: usize, factors: usize) -> usize {
    let m = ((factors + 1) * n).div_ceil(2);
    m + m % 2
}

/// Embed an `n`-point spectrum into `m >= n` points, rescaled so the inverse
/// transform on `m` points samples the same trigonometric polynomial. The
/// Nyquist coefficient is split evenly between `±n/2`.
pub fn pad_spectrum(spec: &[Complex64], m: usize) -> Vec<Complex64> {
    let n = spec.len();
    assert!(m >= n && n % 2 == 0);
    let scale = m as f64 / n as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    for i in 0..half {
        out[i] = spec[i] * scale;
    }
    for i in half + 1..n {
        out[m - (n - i)] = spec[i] * scale;
    }
    if m > n {
        let nyq = spec[half] * (0.5 * scale);
        out[half] = nyq;
        out[m - half] = nyq;
    } else {
        out[half] = spec[half];
    }
    out
}

/// Project an `m`-point spectrum onto the modes `|mode| < n/2` of an
/// `n`-point grid. The Nyquist coefficient of the result is zero.
pub fn truncate_spectrum(spec: &[Complex64], n: usize) -> Vec<Complex64> {
    let m = spec.len();
    assert!(m >= n && n % 2 == 0);
    let scale = n as f64 / m as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    for i in 0..half {
        out[i] = spec[i] * scale;
    }
    for i in half + 1..n {
        out[i] = spec[m - (n - i)] * scale;
    }
    out
}

/// Alias-free pointwise product of the given fields.
pub fn dealiased_product(factors: &[&Field]) -> Result<Field> {
    let first = factors
        .first()
        .ok_or_else(|| Error::InvalidArgument("dealiased_product needs at least one factor".into()))?;
    let grid = *first.grid();
    for f in &factors[1..] {
        check_same_grid(&grid, f.grid())?;
    }
    let n = grid.n();
    let m = padded_size(n, factors.len());
    let mut acc = vec![1.0; m];
    for f in factors {
        let padded = inverse_real(pad_spectrum(&f.spectrum(), m));
        for (a, v) in acc.iter_mut().zip(padded) {
            *a *= v;
        }
    }
    Ok(Field::from_spectrum(grid, truncate_spectrum(&forward(&acc), n)))
}

/// Exponential filter `exp(-alpha ((|m| - m_c) / (n/2 - m_c))^order)` acting
/// on modes above `m_c = (1 - fraction) n / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFilter {
    pub fraction: f64,
    pub alpha: f64,
    pub order: i32,
}

impl Default for SpectralFilter {
    fn default() -> Self {
        SpectralFilter { fraction: 1.0 / 6.0, alpha: 36.0, order: 8 }
    }
}

impl SpectralFilter {
    pub fn weight(&self, grid: &Grid, i: usize) -> f64 {
        let half = (grid.n() / 2) as f64;
        let cut = (1.0 - self.fraction) * half;
        let m = grid.mode(i).unsigned_abs() as f64;
        if m <= cut {
            1.0
        } else {
            (-self.alpha * ((m - cut) / (half - cut)).powi(self.order)).exp()
        }
    }

    pub fn apply(&self, f: &Field) -> Field {
        let grid = *f.grid();
        apply_multiplier(f, |i, _| Complex64::new(self.weight(&grid, i), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(7, 1.0).is_err());
        assert!(Grid::new(6, 1.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(Grid::new(8, f64::NAN).is_err());
        let g = Grid::new(16, 2.0 * PI).unwrap();
        assert_eq!(g.mode(8), -8);
        assert_eq!(g.mode(9), -7);
        assert_eq!(g.mode(7), 7);
        assert_eq!(g.dx() * 16.0, 2.0 * PI);
    }

    #[test]
    fn field_rejects_bad_samples() {
        let g = Grid::circle(8).unwrap();
        assert!(matches!(Field::new(g, vec![0.0; 7]), Err(Error::GridMismatch { .. })));
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(Field::new(g, v).is_err());
    }

    #[test]
    fn roundtrip_examples() {
        let g = Grid::circle(64).unwrap();
        let f = Field::from_fn(g, f64::sin);
        assert!(max_diff(&transform_roundtrip(&f), &f) < 1e-12);
        let c = Field::constant(g, 3.0);
        assert!(max_diff(&transform_roundtrip(&c), &c) < 1e-12 * 3.0);
    }

    #[test]
    fn derivative_examples() {
        let g = Grid::circle(64).unwrap();
        let f = Field::from_fn(g, f64::sin);
        assert!(max_diff(&derivative(&f, 1).unwrap(), &Field::from_fn(g, f64::cos)) < 1e-12);
        assert!(max_diff(&derivative(&f, 2).unwrap(), &Field::from_fn(g, |x| -x.sin())) < 1e-12);
        let g = Grid::circle(128).unwrap();
        let e = Field::from_fn(g, |x| x.cos().exp());
        let de = Field::from_fn(g, |x| -x.sin() * x.cos().exp());
        assert!(max_diff(&derivative(&e, 1).unwrap(), &de) < 1e-10);
        assert!(derivative(&e, 0).is_err());
    }

    #[test]
    fn odd_derivative_kills_nyquist() {
        let g = Grid::circle(16).unwrap();
        // (-1)^j is the pure Nyquist mode
        let f = Field::new(g, (0..16).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect()).unwrap();
        assert!(derivative(&f, 1).unwrap().max_abs() < 1e-14);
        assert!(derivative(&f, 2).unwrap().max_abs() > 1.0);
    }

    #[test]
    fn helmholtz_examples() {
        let g = Grid::circle(64).unwrap();
        let one = Field::constant(g, 1.0);
        assert!(max_diff(&helmholtz_inverse(&one), &one) < 1e-14);
        let s = Field::from_fn(g, f64::sin);
        assert!(max_diff(&helmholtz_inverse(&s), &s.map(|v| v / 2.0)) < 1e-14);
    }

    #[test]
    fn green_dx_examples() {
        let g = Grid::circle(64).unwrap();
        assert!(green_dx_convolve(&Field::constant(g, 2.5)).max_abs() < 1e-14);
        let s = Field::from_fn(g, f64::sin);
        assert!(max_diff(&green_dx_convolve(&s), &Field::from_fn(g, |x| x.cos() / 2.0)) < 1e-14);
    }

    #[test]
    fn padded_sizes() {
        assert_eq!(padded_size(32, 3), 64);
        assert_eq!(padded_size(32, 2), 48);
        assert_eq!(padded_size(10, 2), 16);
        // (k + 2) n / 2 for k = 1
        assert_eq!(padded_size(64, 2), 96);
        assert_eq!(padded_size(64, 1), 64);
    }

    #[test]
    fn product_examples() {
        let g = Grid::circle(64).unwrap();
        let s = Field::from_fn(g, f64::sin);
        let p = dealiased_product(&[&s, &s]).unwrap();
        assert!(max_diff(&p, &Field::from_fn(g, |x| (1.0 - (2.0 * x).cos()) / 2.0)) < 1e-12);
        let one = dealiased_product(&[&s]).unwrap();
        assert!(max_diff(&one, &s) < 1e-14);
        assert!(dealiased_product(&[]).is_err());
        let other = Field::zeros(Grid::circle(32).unwrap());
        assert!(matches!(dealiased_product(&[&s, &other]), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn filter_leaves_low_modes() {
        let g = Grid::circle(64).unwrap();
        let s = Field::from_fn(g, |x| (3.0 * x).sin());
        let filt = SpectralFilter::default();
        assert!(max_diff(&filt.apply(&s), &s) < 1e-15);
        assert!(filt.weight(&g, 32) < 1e-15);
    }
}
