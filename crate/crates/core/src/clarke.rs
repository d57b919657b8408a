//! Dual-action variational principle on truncated Fourier loop space.
//!
//! Zero-mean loop derivatives are expanded in the rotation-equivariant basis
//! e^{2 pi k t J} v, k != 0. In that basis the symplectic action is the exact
//! diagonal sum A = sum_k |v_k|^2 / (4 pi k), while the dual energy
//! G = int H*(-J gamma') is evaluated by uniform-grid quadrature. The systole
//! of the body is the minimum of the scale-invariant quotient G / A over
//! loops with positive action; a minimizer integrates to a closed Reeb orbit
//! of period c = G / A after normalizing G = 1.

use crate::reeb_flow;
use crate::symplectic_index::{self, CrossingConfig, IndexResult};
use crate::{fft, linalg, ConvexBody, Error, Point, Result};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Critical-point residual above which orbit recovery is rejected.
const RECOVERY_RESIDUAL_TOL: f64 = 1e-6;
/// Pointwise level-set tolerance for recovered orbits.
const RECOVERY_LEVEL_TOL: f64 = 1e-7;
/// Quadrature nodes per mode (rounded up to a power of two).
const QUAD_FACTOR: usize = 8;

/// Truncated Fourier coefficients of a zero-mean loop derivative.
///
/// Mode k of a loop with block dimension n is a vector of R^2n; the loop has
/// no k = 0 component by construction. Coefficients are stored flat, positive
/// modes 1..=N first, then negative modes -1..=-N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopCoefficients {
    n: usize,
    n_modes: usize,
    data: DVector<f64>,
}

impl LoopCoefficients {
    pub fn zeros(n: usize, n_modes: usize) -> Self {
        assert!(n >= 1 && n_modes >= 1);
        Self {
            n,
            n_modes,
            data: DVector::zeros(4 * n * n_modes),
        }
    }

    pub fn from_flat(n: usize, n_modes: usize, data: DVector<f64>) -> Self {
        assert_eq!(data.len(), 4 * n * n_modes);
        Self { n, n_modes, data }
    }

    pub fn block_dim(&self) -> usize {
        self.n
    }

    pub fn mode_cutoff(&self) -> usize {
        self.n_modes
    }

    pub fn flat(&self) -> &DVector<f64> {
        &self.data
    }

    fn offset(&self, k: i64) -> usize {
        debug_assert!(k != 0 && k.unsigned_abs() as usize <= self.n_modes);
        let slot = if k > 0 {
            k as usize - 1
        } else {
            self.n_modes + (-k) as usize - 1
        };
        slot * 2 * self.n
    }

    pub fn mode(&self, k: i64) -> Point {
        let off = self.offset(k);
        self.data.rows(off, 2 * self.n).into_owned()
    }

    pub fn set_mode(&mut self, k: i64, v: &Point) {
        assert_eq!(v.len(), 2 * self.n);
        let off = self.offset(k);
        self.data.rows_mut(off, 2 * self.n).copy_from(v);
    }

    /// Signed mode indices carrying a nonzero coefficient.
    pub fn active_modes(&self) -> Vec<i64> {
        let mut out = Vec::new();
        for k in (1..=self.n_modes as i64).chain(-(self.n_modes as i64)..=-1) {
            if self.mode(k).norm() > 0.0 {
                out.push(k);
            }
        }
        out
    }

    /// Loop derivative sampled on the uniform grid of m points (m a power of
    /// two, m > 2N), via one inverse FFT per block.
    pub fn to_samples(&self, m: usize) -> Vec<Point> {
        assert!(m.is_power_of_two() && m > 2 * self.n_modes);
        let mut out = vec![Point::zeros(2 * self.n); m];
        let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
        for b in 0..self.n {
            spectrum.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for k in 1..=self.n_modes as i64 {
                for (slot, kk) in [(k as usize, k), (m - k as usize, -k)] {
                    let off = self.offset(kk) + 2 * b;
                    spectrum[slot] = Complex64::new(self.data[off], self.data[off + 1]);
                }
            }
            fft::ifft(&mut spectrum);
            for (j, c) in spectrum.iter().enumerate() {
                out[j][2 * b] = c.re;
                out[j][2 * b + 1] = c.im;
            }
        }
        out
    }

    /// Projects uniform-grid samples onto the first `n_modes` modes.
    pub fn from_samples(n: usize, n_modes: usize, samples: &[Point]) -> Self {
        let m = samples.len();
        assert!(m.is_power_of_two() && m > 2 * n_modes);
        let mut coeffs = Self::zeros(n, n_modes);
        let mut data = vec![Complex64::new(0.0, 0.0); m];
        for b in 0..n {
            for (j, s) in samples.iter().enumerate() {
                data[j] = Complex64::new(s[2 * b], s[2 * b + 1]);
            }
            fft::fft(&mut data);
            for k in 1..=n_modes as i64 {
                for (slot, kk) in [(k as usize, k), (m - k as usize, -k)] {
                    let off = coeffs.offset(kk) + 2 * b;
                    coeffs.data[off] = data[slot].re / m as f64;
                    coeffs.data[off + 1] = data[slot].im / m as f64;
                }
            }
        }
        coeffs
    }

    /// Pointwise evaluation sum_k e^{2 pi k t J} v_k.
    pub fn evaluate(&self, t: f64) -> Point {
        let mut out = Point::zeros(2 * self.n);
        for k in (1..=self.n_modes as i64).chain(-(self.n_modes as i64)..=-1) {
            let off = self.offset(k);
            let (s, c) = (2.0 * PI * k as f64 * t).sin_cos();
            for b in 0..self.n {
                let x = self.data[off + 2 * b];
                let y = self.data[off + 2 * b + 1];
                out[2 * b] += c * x - s * y;
                out[2 * b + 1] += s * x + c * y;
            }
        }
        out
    }

    /// Coefficients of the zero-mean primitive: mode k of the primitive is
    /// -J v_k / (2 pi k).
    pub fn primitive(&self) -> Self {
        let mut prim = Self::zeros(self.n, self.n_modes);
        for k in (1..=self.n_modes as i64).chain(-(self.n_modes as i64)..=-1) {
            let v = self.mode(k);
            let p = linalg::apply_j_inv(&v) / (2.0 * PI * k as f64);
            prim.set_mode(k, &p);
        }
        prim
    }

    /// The m-th iterate t -> gamma'(m t): mode k moves to mode m k.
    pub fn iterate(&self, m: usize) -> Self {
        assert!(m >= 1);
        let mut out = Self::zeros(self.n, self.n_modes * m);
        for k in (1..=self.n_modes as i64).chain(-(self.n_modes as i64)..=-1) {
            out.set_mode(k * m as i64, &self.mode(k));
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        self.data *= factor;
    }

    /// Time translation gamma'(theta + t): mode k picks up e^{2 pi k theta J}.
    pub fn rotate_time(&mut self, theta: f64) {
        for k in (1..=self.n_modes as i64).chain(-(self.n_modes as i64)..=-1) {
            let v = self.mode(k);
            let (s, c) = (2.0 * PI * k as f64 * theta).sin_cos();
            let mut w = Point::zeros(2 * self.n);
            for b in 0..self.n {
                w[2 * b] = c * v[2 * b] - s * v[2 * b + 1];
                w[2 * b + 1] = s * v[2 * b] + c * v[2 * b + 1];
            }
            self.set_mode(k, &w);
        }
    }

    /// Fixes the time-translation gauge: the first component of the lowest
    /// active mode is rotated to be real-positive.
    pub fn phase_normalize(&mut self) {
        let Some(&k) = self.active_modes().first() else {
            return;
        };
        let v = self.mode(k);
        let b = (0..self.n)
            .find(|&b| v[2 * b].hypot(v[2 * b + 1]) > 1e-14 * v.norm())
            .unwrap_or(0);
        let angle = v[2 * b + 1].atan2(v[2 * b]);
        self.rotate_time(-angle / (2.0 * PI * k as f64));
    }
}

/// Quadrature grid size for a given mode cutoff.
pub fn quadrature_len(n_modes: usize) -> usize {
    fft::next_pow2(QUAD_FACTOR * n_modes)
}

/// Symplectic action: the exact mode sum A = sum_k |v_k|^2 / (4 pi k).
pub fn action(loop_coeffs: &LoopCoefficients) -> f64 {
    let mut total = 0.0;
    for k in (1..=loop_coeffs.n_modes as i64).chain(-(loop_coeffs.n_modes as i64)..=-1) {
        let v = loop_coeffs.mode(k);
        total += v.norm_squared() / (4.0 * PI * k as f64);
    }
    total
}

fn action_gradient(loop_coeffs: &LoopCoefficients) -> DVector<f64> {
    let n = loop_coeffs.n;
    let mut grad = DVector::zeros(loop_coeffs.data.len());
    for k in (1..=loop_coeffs.n_modes as i64).chain(-(loop_coeffs.n_modes as i64)..=-1) {
        let off = loop_coeffs.offset(k);
        for i in 0..2 * n {
            grad[off + i] = loop_coeffs.data[off + i] / (2.0 * PI * k as f64);
        }
    }
    grad
}

/// Dual energy G = int H*(-J gamma'(t)) dt by uniform-grid quadrature.
pub fn dual_energy(body: &ConvexBody, loop_coeffs: &LoopCoefficients) -> f64 {
    let m = quadrature_len(loop_coeffs.n_modes);
    let samples = loop_coeffs.to_samples(m);
    samples
        .iter()
        .map(|g| body.dual_value(&linalg::apply_j_inv(g)))
        .sum::<f64>()
        / m as f64
}

/// Gradient of the discretized dual energy in coefficient space: the Fourier
/// projection of the pointwise gradient J grad H*(-J gamma').
fn dual_energy_gradient(body: &ConvexBody, loop_coeffs: &LoopCoefficients) -> DVector<f64> {
    let m = quadrature_len(loop_coeffs.n_modes);
    let samples = loop_coeffs.to_samples(m);
    let pointwise: Vec<Point> = samples
        .iter()
        .map(|g| linalg::apply_j(&body.dual_grad(&linalg::apply_j_inv(g))))
        .collect();
    LoopCoefficients::from_samples(loop_coeffs.n, loop_coeffs.n_modes, &pointwise)
        .data
        .clone()
}

/// L2 residual of the critical-point equation grad H*(-J gamma') = c gamma.
pub fn critical_residual(body: &ConvexBody, loop_coeffs: &LoopCoefficients, c: f64) -> f64 {
    let m = quadrature_len(loop_coeffs.n_modes);
    let samples = loop_coeffs.to_samples(m);
    let grads: Vec<Point> = samples
        .iter()
        .map(|g| body.dual_grad(&linalg::apply_j_inv(g)))
        .collect();
    let mean = grads
        .iter()
        .fold(Point::zeros(2 * loop_coeffs.n), |acc, g| acc + g)
        / m as f64;
    let primitive = loop_coeffs.primitive().to_samples(m);
    let mut sq = 0.0;
    for (g, p) in grads.iter().zip(&primitive) {
        // gamma = zero-mean primitive + reconstructed mean / c
        sq += (g - (p * c + &mean)).norm_squared();
    }
    (sq / m as f64).sqrt()
}

/// Closed Reeb orbit produced by the variational pipeline or by shooting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub period: f64,
    pub initial_point: Point,
    pub loop_coeffs: LoopCoefficients,
    /// Orbit samples (physical time, point on Y).
    pub samples: Vec<(f64, Point)>,
    pub residual: f64,
    pub index: Option<usize>,
    pub nullity: Option<usize>,
}

/// Rebuilds the closed orbit of period c behind a critical loop: the
/// primitive is shifted by the reconstructed mean, rescaled by c, and
/// projected onto the unit level set.
pub fn recover_orbit(
    body: &ConvexBody,
    loop_coeffs: &LoopCoefficients,
    c: f64,
) -> Result<OrbitRecord> {
    assert!(c > 0.0);
    let m = quadrature_len(loop_coeffs.n_modes);
    let samples = loop_coeffs.to_samples(m);
    let grads: Vec<Point> = samples
        .iter()
        .map(|g| body.dual_grad(&linalg::apply_j_inv(g)))
        .collect();
    let mean = grads
        .iter()
        .fold(Point::zeros(2 * loop_coeffs.n), |acc, g| acc + g)
        / m as f64;
    let primitive = loop_coeffs.primitive().to_samples(m);
    let gamma: Vec<Point> = primitive.iter().map(|p| p + &mean / c).collect();
    let mut sq = 0.0;
    for (g, p) in grads.iter().zip(&gamma) {
        sq += (g - p * c).norm_squared();
    }
    let residual = (sq / m as f64).sqrt();
    if residual > RECOVERY_RESIDUAL_TOL {
        return Err(Error::ResidualTooLarge { residual });
    }

    let mut orbit_samples = Vec::with_capacity(m + 1);
    let mut level_defect = 0.0f64;
    for (j, p) in gamma.iter().enumerate() {
        let point = p * c;
        let h = body.primal_value(&point)?;
        level_defect = level_defect.max((h - 1.0).abs());
        orbit_samples.push((c * j as f64 / m as f64, body.project_to_unit_level(&point)?));
    }
    if level_defect > RECOVERY_LEVEL_TOL {
        return Err(Error::ResidualTooLarge {
            residual: level_defect,
        });
    }
    let initial_point = orbit_samples[0].1.clone();
    Ok(OrbitRecord {
        period: c,
        initial_point,
        loop_coeffs: loop_coeffs.clone(),
        samples: orbit_samples,
        residual,
        index: None,
        nullity: None,
    })
}

/// Morse index and nullity of an orbit: the linearized flow over one period
/// is swept for crossings with the eigenvalue-1 locus.
pub fn orbit_index(body: &ConvexBody, orbit: &OrbitRecord) -> Result<IndexResult> {
    let traj = reeb_flow::reeb_flow(body, &orbit.initial_point, orbit.period, 16)?;
    let path = reeb_flow::linearized_flow(body, &traj, orbit.period)?;
    symplectic_index::morse_index_nullity(&path, &CrossingConfig::default())
}

#[derive(Debug, Clone)]
pub struct SystoleOptions {
    /// Fourier mode cutoff N.
    pub n_modes: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Target gradient norm of the quotient.
    pub grad_tol: f64,
    /// Gradient norm below which a restart counts as converged.
    pub accept_tol: f64,
    pub max_iters: usize,
}

impl Default for SystoleOptions {
    fn default() -> Self {
        Self {
            n_modes: 64,
            restarts: 16,
            seed: 0,
            grad_tol: 1e-10,
            accept_tol: 1e-8,
            max_iters: 5000,
        }
    }
}

/// Outcome of one restart of the quotient minimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SystoleResult {
    /// Minimal period found: the systole estimate.
    pub c0: f64,
    pub orbit: OrbitRecord,
    pub outcomes: Vec<RestartOutcome>,
    pub seed: u64,
}

/// Minimizes the 0-homogeneous quotient G / A over loops with positive
/// action, over several random low-mode restarts, and recovers the orbit of
/// the best minimizer. Identical options produce identical results.
pub fn minimize_systole(body: &ConvexBody, opts: &SystoleOptions) -> Result<SystoleResult> {
    assert!(opts.n_modes >= 8 && opts.restarts >= 1);
    let n = body.dim_n();
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let mut outcomes = Vec::with_capacity(opts.restarts);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut any_start = false;

    for _ in 0..opts.restarts {
        let Some(x0) = random_start(body, opts.n_modes, &mut rng) else {
            outcomes.push(RestartOutcome {
                value: f64::INFINITY,
                grad_norm: f64::INFINITY,
                iterations: 0,
                converged: false,
            });
            continue;
        };
        any_start = true;
        let objective = |x: &DVector<f64>| quotient_objective(body, n, opts.n_modes, x);
        let run = lbfgs(&objective, x0, opts.max_iters, opts.grad_tol);
        let converged = run.grad_norm <= opts.accept_tol && run.value.is_finite();
        outcomes.push(RestartOutcome {
            value: run.value,
            grad_norm: run.grad_norm,
            iterations: run.iterations,
            converged,
        });
        if converged && best.as_ref().is_none_or(|(v, _)| run.value < *v) {
            best = Some((run.value, run.x));
        }
    }
    if !any_start {
        return Err(Error::NoPositiveActionStart);
    }
    let Some((c0, x)) = best else {
        let best_outcome = outcomes
            .iter()
            .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
            .unwrap();
        return Err(Error::NonConvergence {
            grad_norm: best_outcome.grad_norm,
            iters: best_outcome.iterations,
            best: best_outcome.value,
        });
    };

    let mut loop_coeffs = LoopCoefficients::from_flat(n, opts.n_modes, x);
    let g = dual_energy(body, &loop_coeffs);
    loop_coeffs.scale(1.0 / g.sqrt());
    loop_coeffs.phase_normalize();
    let mut orbit = recover_orbit(body, &loop_coeffs, c0)?;
    let index = orbit_index(body, &orbit)?;
    orbit.index = Some(index.index);
    orbit.nullity = Some(index.nullity);
    Ok(SystoleResult {
        c0,
        orbit,
        outcomes,
        seed: opts.seed,
    })
}

/// Random loop supported on modes |k| <= 2, adjusted to positive action.
fn random_start(body: &ConvexBody, n_modes: usize, rng: &mut StdRng) -> Option<DVector<f64>> {
    let n = body.dim_n();
    for _ in 0..50 {
        let mut start = LoopCoefficients::zeros(n, n_modes);
        for k in [1i64, 2, -1, -2] {
            let v = Point::from_iterator(2 * n, (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)));
            start.set_mode(k, &v);
        }
        if action(&start) < 0.0 {
            // swapping k and -k coefficients flips the action sign
            for k in [1i64, 2] {
                let (a, b) = (start.mode(k), start.mode(-k));
                start.set_mode(k, &b);
                start.set_mode(-k, &a);
            }
        }
        if action(&start) > 1e-12 {
            return Some(start.data);
        }
    }
    None
}

fn quotient_objective(
    body: &ConvexBody,
    n: usize,
    n_modes: usize,
    x: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let loop_coeffs = LoopCoefficients::from_flat(n, n_modes, x.clone());
    let a = action(&loop_coeffs);
    if a <= 0.0 {
        return (f64::INFINITY, DVector::zeros(x.len()));
    }
    let g = dual_energy(body, &loop_coeffs);
    let ga = action_gradient(&loop_coeffs);
    let gg = dual_energy_gradient(body, &loop_coeffs);
    let q = g / a;
    let grad = (gg - ga * q) / a;
    (q, grad)
}

struct LbfgsRun {
    x: DVector<f64>,
    value: f64,
    grad_norm: f64,
    iterations: usize,
}

/// Limited-memory BFGS with Armijo backtracking.
fn lbfgs<F>(objective: &F, x0: DVector<f64>, max_iters: usize, grad_tol: f64) -> LbfgsRun
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    const MEMORY: usize = 10;
    const C1: f64 = 1e-4;
    let mut x = x0;
    let (mut f, mut g) = objective(&x);
    let mut s_hist: Vec<DVector<f64>> = Vec::new();
    let mut y_hist: Vec<DVector<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut iterations = 0;

    for iter in 0..max_iters {
        iterations = iter;
        if g.norm() <= grad_tol {
            break;
        }
        // two-loop recursion
        let mut d = -g.clone();
        let mut alphas = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            alphas[i] = rho_hist[i] * s_hist[i].dot(&d);
            d -= &y_hist[i] * alphas[i];
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            d *= s.dot(y) / y.dot(y);
        }
        for i in 0..s_hist.len() {
            let beta = rho_hist[i] * y_hist[i].dot(&d);
            d += &s_hist[i] * (alphas[i] - beta);
        }
        let mut descent = g.dot(&d);
        if descent >= -1e-14 * g.norm() * d.norm() {
            d = -g.clone();
            descent = g.dot(&d);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let x_try = &x + &d * alpha;
            let (f_try, g_try) = objective(&x_try);
            if f_try <= f + C1 * alpha * descent {
                accepted = Some((x_try, f_try, g_try));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    LbfgsRun {
        value: f,
        grad_norm: g.norm(),
        iterations,
        x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mode_loop(n: usize, k: i64, v: &[f64]) -> LoopCoefficients {
        let mut lc = LoopCoefficients::zeros(n, 8);
        lc.set_mode(k, &Point::from_vec(v.to_vec()));
        lc
    }

    #[test]
    fn sample_round_trip() {
        let mut lc = LoopCoefficients::zeros(2, 6);
        let mut rng = StdRng::seed_from_u64(11);
        for k in (1..=6i64).chain(-6..=-1) {
            let v = Point::from_iterator(4, (0..4).map(|_| rng.gen_range(-1.0..1.0)));
            lc.set_mode(k, &v);
        }
        let m = quadrature_len(6);
        let back = LoopCoefficients::from_samples(2, 6, &lc.to_samples(m));
        assert!((&back.data - &lc.data).norm() < 1e-12);
    }

    #[test]
    fn evaluate_matches_samples() {
        let lc = unit_mode_loop(1, 2, &[0.7, -0.3]);
        let m = 64;
        let samples = lc.to_samples(m);
        for j in [0, 5, 17] {
            let t = j as f64 / m as f64;
            assert!((lc.evaluate(t) - &samples[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn action_mode_values() {
        // A single unit mode has action 1 / (4 pi k); the quadrature of the
        // defining integral (1/2) int <J gamma, gamma'> agrees with the sum.
        let lc = unit_mode_loop(1, 1, &[1.0, 0.0]);
        assert!((action(&lc) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let neg = unit_mode_loop(1, -1, &[1.0, 0.0]);
        assert!((action(&neg) + 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert_eq!(action(&LoopCoefficients::zeros(2, 8)), 0.0);

        let mut lc = LoopCoefficients::zeros(2, 4);
        let mut rng = StdRng::seed_from_u64(3);
        for k in [1i64, 3, -2] {
            let v = Point::from_iterator(4, (0..4).map(|_| rng.gen_range(-1.0..1.0)));
            lc.set_mode(k, &v);
        }
        let m = 256;
        let deriv = lc.to_samples(m);
        let prim = lc.primitive().to_samples(m);
        let quad: f64 = deriv
            .iter()
            .zip(&prim)
            .map(|(d, p)| linalg::apply_j(p).dot(d))
            .sum::<f64>()
            / (2.0 * m as f64);
        assert!((action(&lc) - quad).abs() < 1e-12);
    }

    #[test]
    fn dual_energy_values() {
        let round = ConvexBody::ellipsoid(vec![1.0, 1.0]).unwrap();
        assert_eq!(dual_energy(&round, &LoopCoefficients::zeros(2, 8)), 0.0);
        // |gamma'| = 1 pointwise, so H* = 1 / (4 pi) everywhere
        let lc = unit_mode_loop(2, 1, &[1.0, 0.0, 0.0, 0.0]);
        assert!((dual_energy(&round, &lc) - 1.0 / (4.0 * PI)).abs() < 1e-14);
        // 2-homogeneity
        let mut scaled = lc.clone();
        scaled.scale(1.7);
        assert!((dual_energy(&round, &scaled) - 1.7f64.powi(2) / (4.0 * PI)).abs() < 1e-13);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let body = ConvexBody::dual_power(vec![1.0, 2.0], 2.0).unwrap();
        let n_modes = 4;
        let mut rng = StdRng::seed_from_u64(5);
        let mut lc = LoopCoefficients::zeros(2, n_modes);
        for k in [1i64, 2, -1] {
            let v = Point::from_iterator(4, (0..4).map(|_| rng.gen_range(-1.0..1.0)));
            lc.set_mode(k, &v);
        }
        let x = lc.data.clone();
        let (_, grad) = quotient_objective(&body, 2, n_modes, &x);
        let objective = |x: &DVector<f64>| quotient_objective(&body, 2, n_modes, x).0;
        let h = 1e-6;
        for i in (0..x.len()).step_by(5) {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (objective(&xp) - objective(&xm)) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() < 1e-5 * grad.norm().max(1.0),
                "component {i}: fd {fd} vs grad {}",
                grad[i]
            );
        }
    }

    #[test]
    fn systole_of_e12_is_the_short_axis() {
        let body = ConvexBody::ellipsoid(vec![1.0, 2.0]).unwrap();
        let opts = SystoleOptions {
            n_modes: 16,
            restarts: 4,
            seed: 1,
            ..Default::default()
        };
        let result = minimize_systole(&body, &opts).unwrap();
        assert!((result.c0 - 1.0).abs() < 1e-6, "c0 = {}", result.c0);
        assert!((result.orbit.period - 1.0).abs() < 1e-6);
        assert_eq!(result.orbit.index, Some(0));
        assert_eq!(result.orbit.nullity, Some(1));
        // at the normalized minimizer the quotient value is 1 / action
        assert!((action(&result.orbit.loop_coeffs) * result.c0 - 1.0).abs() < 1e-12);
        // the minimizer is the planar circle of the short axis
        for (_, z) in &result.orbit.samples {
            assert!(z[2].abs() < 1e-5 && z[3].abs() < 1e-5);
            assert!((z.norm() - 1.0 / PI.sqrt()).abs() < 1e-5);
        }
    }

    #[test]
    fn recovered_orbit_scaling_invariance() {
        let body = ConvexBody::ellipsoid(vec![1.0, 2.0]).unwrap();
        let opts = SystoleOptions {
            n_modes: 16,
            restarts: 2,
            seed: 7,
            ..Default::default()
        };
        let result = minimize_systole(&body, &opts).unwrap();
        let mut rescaled = result.orbit.loop_coeffs.clone();
        rescaled.scale(3.21);
        let g = dual_energy(&body, &rescaled);
        rescaled.scale(1.0 / g.sqrt());
        let orbit2 = recover_orbit(&body, &rescaled, result.c0).unwrap();
        assert!((orbit2.initial_point - result.orbit.initial_point.clone()).norm() < 1e-8);
    }

    #[test]
    fn round_sphere_minimizer_is_a_great_circle() {
        let body = ConvexBody::ellipsoid(vec![1.0, 1.0]).unwrap();
        let opts = SystoleOptions {
            n_modes: 8,
            restarts: 2,
            seed: 3,
            ..Default::default()
        };
        let result = minimize_systole(&body, &opts).unwrap();
        assert!((result.c0 - 1.0).abs() < 1e-7);
        assert_eq!(result.orbit.nullity, Some(3));
        let orbit = recover_orbit(&body, &result.orbit.loop_coeffs, result.c0).unwrap();
        let m = orbit.samples.len().min(256);
        for (_, z) in orbit.samples.iter().take(m) {
            assert!((body.primal_value(z).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn dual_power_systole_closed_form() {
        // The shortest orbit winds once in every block. Blocks rotate at
        // speed v_i^{p-1} 2 pi / a_i with sum v_i^p = 1, so a simultaneous
        // closing time T solves sum_i (T / a_i)^r = 1 with r = q / (q - 1),
        // giving T = (sum_i a_i^{-r})^{-1/r}.
        let body = ConvexBody::dual_power(vec![1.0, 2.0], 2.0).unwrap();
        let opts = SystoleOptions {
            n_modes: 32,
            restarts: 4,
            seed: 42,
            ..Default::default()
        };
        let result = minimize_systole(&body, &opts).unwrap();
        let expect = (1.0f64 + 0.25).powf(-0.5);
        assert!(
            (result.c0 - expect).abs() < 1e-9,
            "c0 = {}, expected 2/sqrt(5) = {expect}",
            result.c0
        );
        // both blocks are active on the resonant orbit
        let z = &result.orbit.initial_point;
        assert!(z[0].hypot(z[1]) > 0.1 && z[2].hypot(z[3]) > 0.1);

        // the same closed form holds across exponents
        for q in [1.25, 3.0] {
            let body = ConvexBody::dual_power(vec![1.0, 2.0], q).unwrap();
            let result = minimize_systole(
                &body,
                &SystoleOptions {
                    n_modes: 32,
                    restarts: 4,
                    seed: 8,
                    ..Default::default()
                },
            )
            .unwrap();
            let r = q / (q - 1.0);
            let expect = (1.0 + 2.0f64.powf(-r)).powf(-1.0 / r);
            assert!(
                (result.c0 - expect).abs() < 1e-8,
                "q = {q}: c0 = {}, expected {expect}",
                result.c0
            );
        }
    }

    #[test]
    fn iterates_remain_critical() {
        let body = ConvexBody::ellipsoid(vec![1.0, 2.0]).unwrap();
        let opts = SystoleOptions {
            n_modes: 8,
            restarts: 2,
            seed: 5,
            ..Default::default()
        };
        let result = minimize_systole(&body, &opts).unwrap();
        for m in [2usize, 3] {
            let iter = result.orbit.loop_coeffs.iterate(m);
            let c = m as f64 * result.c0;
            assert!(
                (action(&iter) - 1.0 / c).abs() < 1e-8,
                "iterate action should be A / m"
            );
            assert!((dual_energy(&body, &iter) - 1.0).abs() < 1e-8);
            assert!(critical_residual(&body, &iter, c) <= 1e-6);
        }
    }

    #[test]
    fn orbit_indices_of_iterates() {
        let body = ConvexBody::ellipsoid(vec![1.0, 2.0]).unwrap();
        let opts = SystoleOptions {
            n_modes: 8,
            restarts: 2,
            seed: 2,
            ..Default::default()
        };
        let result = minimize_systole(&body, &opts).unwrap();
        let expectations = [(2usize, 2usize, 3usize), (3, 6, 1)];
        for (m, ind, nul) in expectations {
            let iter = result.orbit.loop_coeffs.iterate(m);
            let c = m as f64 * result.c0;
            let orbit = recover_orbit(&body, &iter, c).unwrap();
            let res = orbit_index(&body, &orbit).unwrap();
            assert_eq!((res.index, res.nullity), (ind, nul), "iterate {m}");
        }
    }
}
