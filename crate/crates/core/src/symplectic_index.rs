//! Morse index and nullity of closed orbits via symplectic paths.
//!
//! A path of positive-definite symmetric matrices A(t) generates the linear
//! symplectic path Gamma' = J A(t)^{-1} Gamma, Gamma(0) = I. The Morse index
//! of the associated index form equals the total kernel dimension of
//! Gamma(t) - I over interior times, and its nullity is the endpoint kernel
//! dimension; both are computed here by sweeping the smallest singular value
//! of Gamma(t) - I and refining each dip. Independently, the index form is
//! assembled in the Fourier basis of zero-mean loops and its negative
//! eigenvalues are counted by a dense symmetric eigensolve. The two routes
//! must agree, and the tests hold them to that.

use crate::clarke::OrbitRecord;
use crate::ode::{self, OdeOptions};
use crate::reeb_flow::SymplecticPath;
use crate::{linalg, ConvexBody, Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

/// Sweep density and tolerances for crossing detection.
#[derive(Debug, Clone, Copy)]
pub struct CrossingConfig {
    /// Sweep grid points per unit of time.
    pub grid_per_unit: usize,
    /// Singular values below `rank_tol * max(sigma_max, 1)` count as zero.
    pub rank_tol: f64,
    /// Width to which a crossing time is refined.
    pub refine_tol: f64,
    /// Times this close to the endpoint belong to the endpoint.
    pub endpoint_window: f64,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        Self {
            grid_per_unit: 2048,
            rank_tol: 1e-6,
            refine_tol: 1e-10,
            endpoint_window: 1e-7,
        }
    }
}

/// A time where the path meets the eigenvalue-1 locus.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingRecord {
    pub t: f64,
    pub kernel_dim: usize,
    /// False when several dips closer than the sweep step were merged.
    pub refined: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexResult {
    pub index: usize,
    pub nullity: usize,
    pub crossings: Vec<CrossingRecord>,
}

/// Time-dependent symmetric positive-definite matrix A(t) on [0, 1].
#[derive(Clone)]
pub struct PathGenerator {
    matrix: Arc<dyn Fn(f64) -> Result<DMatrix<f64>> + Send + Sync>,
    dim: usize,
    pub description: String,
}

impl std::fmt::Debug for PathGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PathGenerator({}, dim {})", self.description, self.dim)
    }
}

impl PathGenerator {
    pub fn new(
        dim: usize,
        description: impl Into<String>,
        matrix: impl Fn(f64) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        assert!(dim >= 2 && dim.is_multiple_of(2));
        Self {
            matrix: Arc::new(matrix),
            dim,
            description: description.into(),
        }
    }

    pub fn constant(mat: DMatrix<f64>, description: impl Into<String>) -> Self {
        let dim = mat.nrows();
        Self::new(dim, description, move |_| Ok(mat.clone()))
    }

    /// The generator A(t) - lambda I; positive definite for lambda <= 0.
    pub fn shifted(&self, lambda: f64) -> Self {
        let inner = self.matrix.clone();
        let dim = self.dim;
        Self::new(
            dim,
            format!("{} shifted by {lambda}", self.description),
            move |t| {
                let mut a = inner(t)?;
                for i in 0..dim {
                    a[(i, i)] -= lambda;
                }
                Ok(a)
            },
        )
    }

    /// Hessian-path generator of an orbit of period c: in rescaled time the
    /// linearized flow over one period is generated by
    /// A(t) = c^{-1} Hess H*(-J gamma'(t)), using that the dual Hessian is
    /// 0-homogeneous.
    pub fn from_orbit(body: &ConvexBody, orbit: &OrbitRecord) -> Self {
        let body = body.clone();
        let loop_coeffs = orbit.loop_coeffs.clone();
        let c = orbit.period;
        Self::new(
            body.dim(),
            format!("orbit Hessian path, period {c}"),
            move |t| {
                let velocity = loop_coeffs.evaluate(t);
                let w = linalg::apply_j_inv(&velocity);
                Ok(body.dual_hess(&w)? / c)
            },
        )
    }

    /// Deterministic smooth random generator for randomized checks: a
    /// constant base `scale * I` plus two trigonometric harmonics with
    /// symmetric coefficients small enough to keep the path positive
    /// definite.
    pub fn random_trig(n: usize, scale: f64, seed: u64) -> Self {
        let dim = 2 * n;
        let mut rng = StdRng::seed_from_u64(seed);
        let mut harmonics = Vec::new();
        for _ in 0..2 {
            let mut pair = Vec::new();
            for _ in 0..2 {
                let raw = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
                let sym = (&raw + raw.transpose()) * 0.5;
                let norm = sym
                    .clone()
                    .symmetric_eigen()
                    .eigenvalues
                    .amax();
                let target = scale * rng.gen_range(0.05..0.15);
                pair.push(sym * (target / norm));
            }
            harmonics.push(pair);
        }
        Self::new(dim, format!("random trig path, seed {seed}"), move |t| {
            let mut a = DMatrix::identity(dim, dim) * scale;
            for (j, pair) in harmonics.iter().enumerate() {
                let freq = 2.0 * PI * (j + 1) as f64 * t;
                a += &pair[0] * freq.cos() + &pair[1] * freq.sin();
            }
            Ok(a)
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// A(t), verified symmetric positive definite.
    pub fn sample(&self, t: f64) -> Result<DMatrix<f64>> {
        let a = (self.matrix)(t)?;
        if nalgebra::Cholesky::new(a.clone()).is_none() {
            return Err(Error::NonPositiveDefinite { t });
        }
        Ok(a)
    }
}

/// Integrates Gamma' = J A(t)^{-1} Gamma on [0, tau], sampled densely enough
/// for crossing sweeps.
pub fn path_from_generator(gen: &PathGenerator, tau: f64) -> Result<SymplecticPath> {
    let samples = ((tau * CrossingConfig::default().grid_per_unit as f64).ceil() as usize).max(64);
    path_from_generator_sampled(gen, tau, samples)
}

/// Same as [`path_from_generator`] with an explicit sample count.
pub fn path_from_generator_sampled(
    gen: &PathGenerator,
    tau: f64,
    samples: usize,
) -> Result<SymplecticPath> {
    assert!(tau > 0.0 && tau <= 1.0 + 1e-12, "tau must lie in (0, 1]");
    let dim = gen.dim();
    gen.sample(0.0)?;
    let times = ode::uniform_times(0.0, tau, samples);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let rhs = |t: f64, y: &DVector<f64>| match generator_rhs(gen, t, y, dim) {
        Ok(dy) => dy,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            DVector::zeros(y.len())
        }
    };
    let y0 = DVector::from_column_slice(DMatrix::<f64>::identity(dim, dim).as_slice());
    let states = ode::integrate_samples(&rhs, 0.0, &y0, &times, &OdeOptions::default(), |_, y| y)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mats: Vec<DMatrix<f64>> = states
        .iter()
        .map(|y| DMatrix::from_column_slice(dim, dim, y.as_slice()))
        .collect();
    let gen_clone = gen.clone();
    let propagate = Arc::new(move |t0: f64, gamma0: &DMatrix<f64>, t1: f64| {
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let rhs = |t: f64, y: &DVector<f64>| match generator_rhs(&gen_clone, t, y, gen_clone.dim())
        {
            Ok(dy) => dy,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                DVector::zeros(y.len())
            }
        };
        let y0 = DVector::from_column_slice(gamma0.as_slice());
        let y1 = ode::integrate(&rhs, t0, &y0, t1, &OdeOptions::default())?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(DMatrix::from_column_slice(
            gen_clone.dim(),
            gen_clone.dim(),
            y1.as_slice(),
        ))
    });
    Ok(SymplecticPath::new(
        times,
        mats,
        propagate,
        gen.description.clone(),
    ))
}

fn generator_rhs(gen: &PathGenerator, t: f64, y: &DVector<f64>, dim: usize) -> Result<DVector<f64>> {
    let a = gen.sample(t)?;
    let chol = nalgebra::Cholesky::new(a).ok_or(Error::NonPositiveDefinite { t })?;
    let gamma = DMatrix::from_column_slice(dim, dim, y.as_slice());
    let solved = chol.solve(&gamma);
    let dgamma = linalg::j_times(&solved);
    Ok(DVector::from_column_slice(dgamma.as_slice()))
}

fn smin_smax(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = linalg::singular_values(m);
    (sv[sv.len() - 1], sv[0])
}

fn kernel_data(path: &SymplecticPath, t: f64, cfg: &CrossingConfig) -> Result<(f64, usize)> {
    let gamma = path.eval(t)?;
    let m = &gamma - DMatrix::<f64>::identity(gamma.nrows(), gamma.ncols());
    let sv = linalg::singular_values(&m);
    let scale = sv[0].max(1.0);
    let dim = sv.iter().filter(|&&s| s < cfg.rank_tol * scale).count();
    Ok((sv[sv.len() - 1], dim))
}

fn dip_value(path: &SymplecticPath, t: f64) -> Result<f64> {
    let gamma = path.eval(t)?;
    let m = &gamma - DMatrix::<f64>::identity(gamma.nrows(), gamma.ncols());
    Ok(smin_smax(&m).0)
}

/// Golden-section minimization of sigma_min(Gamma(t) - I) on [a, b].
fn refine_dip(
    path: &SymplecticPath,
    mut a: f64,
    mut b: f64,
    cfg: &CrossingConfig,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = dip_value(path, c)?;
    let mut fd = dip_value(path, d)?;
    while b - a > cfg.refine_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = dip_value(path, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = dip_value(path, d)?;
        }
    }
    let t = 0.5 * (a + b);
    Ok((t, dip_value(path, t)?))
}

/// Enumerates the zeros of sigma_min(Gamma(t) - I) inside [lo, hi] by
/// rescanning at geometrically finer resolutions. Nearby zeros shadow each
/// other in a single coarse dip; splitting the bracket a few times isolates
/// every zero wider apart than the refinement width.
fn collect_zeros(
    path: &SymplecticPath,
    lo: f64,
    hi: f64,
    depth: usize,
    scale: f64,
    cfg: &CrossingConfig,
    out: &mut Vec<(f64, f64)>,
) -> Result<()> {
    const POINTS: usize = 64;
    const MAX_DEPTH: usize = 4;
    if depth == MAX_DEPTH || hi - lo <= 8.0 * cfg.refine_tol {
        let (t, smin) = refine_dip(path, lo, hi, cfg)?;
        if smin < cfg.rank_tol * scale {
            out.push((t, smin));
        }
        return Ok(());
    }
    let delta = (hi - lo) / POINTS as f64;
    let mut ts = Vec::with_capacity(POINTS + 1);
    let mut vals = Vec::with_capacity(POINTS + 1);
    for i in 0..=POINTS {
        let t = lo + delta * i as f64;
        ts.push(t);
        vals.push(dip_value(path, t)?);
    }
    let slope = vals
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / delta)
        .fold(0.0f64, f64::max);
    let threshold = (4.0 * slope * delta).max(8.0 * cfg.rank_tol * scale);
    for i in 0..=POINTS {
        let left_ok = i == 0 || vals[i] <= vals[i - 1];
        let right_ok = i == POINTS || vals[i] <= vals[i + 1];
        if left_ok && right_ok && vals[i] <= threshold {
            // two cells of margin: a zero whose basin is shadowed by a deeper
            // neighboring dip stays inside the rescanned bracket
            let a = ts[i.saturating_sub(2)];
            let b = ts[(i + 2).min(POINTS)];
            collect_zeros(path, a, b, depth + 1, scale, cfg, out)?;
        }
    }
    Ok(())
}

/// All times in (0, c] where ker(Gamma(t) - I) is nontrivial, with kernel
/// dimensions. Dips of the smallest singular value are located on a uniform
/// sweep grid and refined; dips closer than the sweep step are merged and
/// flagged unrefined.
pub fn count_crossings(path: &SymplecticPath, cfg: &CrossingConfig) -> Result<Vec<CrossingRecord>> {
    let end = path.end_time();
    let dim = path.dim();
    let ident = DMatrix::<f64>::identity(dim, dim);

    // sweep values, densifying between stored samples if necessary
    let target_h = 1.0 / cfg.grid_per_unit as f64;
    let mut ts: Vec<f64> = Vec::new();
    let mut smins: Vec<f64> = Vec::new();
    let mut scale = 1.0f64;
    let stored_times = path.times();
    let stored = path.sample_matrices();
    for i in 0..stored_times.len() {
        let (smin, smax) = smin_smax(&(&stored[i] - &ident));
        ts.push(stored_times[i]);
        smins.push(smin);
        scale = scale.max(smax);
        if i + 1 < stored_times.len() {
            let gap = stored_times[i + 1] - stored_times[i];
            let extra = (gap / target_h).round() as usize;
            for e in 1..extra {
                let t = stored_times[i] + gap * e as f64 / extra as f64;
                let gamma = path.eval(t)?;
                let (smin, smax) = smin_smax(&(gamma - &ident));
                ts.push(t);
                smins.push(smin);
                scale = scale.max(smax);
            }
        }
    }
    let h = ts
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    let max_slope = smins
        .windows(2)
        .zip(ts.windows(2))
        .map(|(s, t)| (s[1] - s[0]).abs() / (t[1] - t[0]))
        .fold(0.0f64, f64::max);
    let threshold = (4.0 * max_slope * h).max(8.0 * cfg.rank_tol * scale);

    // regions of the sweep that can hide zeros: every dip of the smallest
    // singular value dips below `threshold` over at least a few grid cells
    let mut regions: Vec<(usize, usize)> = Vec::new();
    for (i, &s) in smins.iter().enumerate() {
        if s > threshold {
            continue;
        }
        let (lo, hi) = (i.saturating_sub(2), (i + 2).min(ts.len() - 1));
        match regions.last_mut() {
            Some(r) if lo <= r.1 => r.1 = hi,
            _ => regions.push((lo, hi)),
        }
    }

    let mut found: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in regions {
        collect_zeros(path, ts[lo], ts[hi], 0, scale, cfg, &mut found)?;
    }
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    found.retain(|&(t, _)| t >= cfg.endpoint_window && t <= end - cfg.endpoint_window);

    // duplicates of one zero land within the golden-section width
    found.dedup_by(|b, a| {
        if b.0 - a.0 <= 3.0 * cfg.refine_tol {
            if b.1 < a.1 {
                *a = *b;
            }
            true
        } else {
            false
        }
    });

    // distinct zeros below the zoom resolution stay one flagged record
    let unresolved_width = 50.0 * cfg.refine_tol;
    let mut records: Vec<CrossingRecord> = Vec::new();
    let mut i = 0;
    while i < found.len() {
        let mut j = i + 1;
        while j < found.len() && found[j].0 - found[j - 1].0 <= unresolved_width {
            j += 1;
        }
        let (t, _) = found[i..j]
            .iter()
            .copied()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let (_, kernel_dim) = kernel_data(path, t, cfg)?;
        if kernel_dim == 0 {
            return Err(Error::UnresolvedCrossing { t });
        }
        records.push(CrossingRecord {
            t,
            kernel_dim,
            refined: j == i + 1,
        });
        i = j;
    }

    // endpoint kernel, always evaluated directly
    let (_, end_kernel) = kernel_data(path, end, cfg)?;
    if end_kernel > 0 {
        records.push(CrossingRecord {
            t: end,
            kernel_dim: end_kernel,
            refined: true,
        });
    }
    Ok(records)
}

/// Morse index (total interior kernel dimension) and nullity (endpoint
/// kernel dimension minus one) of a path over [0, c].
pub fn morse_index_nullity(path: &SymplecticPath, cfg: &CrossingConfig) -> Result<IndexResult> {
    let end = path.end_time();
    let crossings = count_crossings(path, cfg)?;
    let endpoint = crossings
        .last()
        .filter(|r| (r.t - end).abs() <= cfg.endpoint_window)
        .ok_or(Error::NotClosedOrbit)?;
    let nullity = endpoint.kernel_dim - 1;
    let index = crossings[..crossings.len() - 1]
        .iter()
        .map(|r| r.kernel_dim)
        .sum();
    Ok(IndexResult {
        index,
        nullity,
        crossings,
    })
}

/// Matrix of the index form restricted to Fourier modes 0 < |k| <= n_modes
/// of zero-mean loops on [0, tau].
///
/// In the basis e^{2 pi k t J / tau} e_j the primitive term contributes the
/// mode-diagonal -tau^2 / (2 pi k), and the A-term reduces to cosine and sine
/// moments of J^T A(t) J at frequencies k - l and k + l, integrated by the
/// trapezoid rule on 8 n_modes nodes.
pub fn hessian_form_matrix(
    gen: &PathGenerator,
    tau: f64,
    n_modes: usize,
) -> Result<DMatrix<f64>> {
    assert!(n_modes >= 1);
    assert!(tau > 0.0 && tau <= 1.0 + 1e-12);
    let dim = gen.dim();
    let nodes = 8 * n_modes;
    let h = tau / nodes as f64;
    let beta = 2.0 * PI / tau;

    // cosine and sine moments of B = J^T A J up to frequency 2 n_modes
    let mut p = vec![DMatrix::<f64>::zeros(dim, dim); 2 * n_modes + 1];
    let mut q = vec![DMatrix::<f64>::zeros(dim, dim); 2 * n_modes + 1];
    for s in 0..=nodes {
        let t = tau * s as f64 / nodes as f64;
        let w = if s == 0 || s == nodes { 0.5 * h } else { h };
        let a = gen.sample(t)?;
        // B = J^T A J = -J (A J)
        let b = -linalg::j_times(&linalg::times_j(&a));
        for (m, (pm, qm)) in p.iter_mut().zip(q.iter_mut()).enumerate() {
            let ang = beta * m as f64 * t;
            *pm += &b * (w * ang.cos());
            *qm += &b * (w * ang.sin());
        }
    }
    let fetch_p = |m: i64| p[m.unsigned_abs() as usize].clone();
    let fetch_q = |m: i64| {
        let mat = q[m.unsigned_abs() as usize].clone();
        if m < 0 {
            -mat
        } else {
            mat
        }
    };

    let total = 2 * n_modes * dim;
    let mut form = DMatrix::<f64>::zeros(total, total);
    let mode_of = |idx: usize| -> i64 {
        if idx < n_modes {
            idx as i64 + 1
        } else {
            -((idx - n_modes) as i64 + 1)
        }
    };
    for ki in 0..2 * n_modes {
        let k = mode_of(ki);
        for li in 0..2 * n_modes {
            let l = mode_of(li);
            let m = k - l;
            let pl = k + l;
            let qp = fetch_q(pl);
            let qm = fetch_q(m);
            let pm = fetch_p(m);
            let pp = fetch_p(pl);
            let mut block = (&pm + &pp) * 0.5;
            block += linalg::times_j(&((&qp - &qm) * 0.5));
            block -= linalg::j_times(&((&qp + &qm) * 0.5));
            block -= linalg::j_times(&linalg::times_j(&((&pm - &pp) * 0.5)));
            if k == l {
                let diag = -tau * tau / (2.0 * PI * k as f64);
                for i in 0..dim {
                    block[(i, i)] += diag;
                }
            }
            form.view_mut((ki * dim, li * dim), (dim, dim)).copy_from(&block);
        }
    }
    let sym = (&form + form.transpose()) * 0.5;
    Ok(sym)
}

/// Eigenvalues of the discretized index form, as operator eigenvalues
/// (the plain Fourier basis has constant Gram tau), sorted ascending.
pub fn hessian_form_eigenvalues(
    gen: &PathGenerator,
    tau: f64,
    n_modes: usize,
) -> Result<Vec<f64>> {
    let form = hessian_form_matrix(gen, tau, n_modes)?;
    let mut eig: Vec<f64> = form
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|l| l / tau)
        .collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eig)
}

/// Number of negative eigenvalues of the discretized index form; converges
/// to the Morse index of the form as the mode cutoff grows.
pub fn hessian_form_negative_count(
    gen: &PathGenerator,
    tau: f64,
    n_modes: usize,
) -> Result<usize> {
    let eig = hessian_form_eigenvalues(gen, tau, n_modes)?;
    let scale = eig.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    Ok(eig.iter().filter(|&&l| l < -1e-9 * scale).count())
}

/// sigma_min(Gamma_{A - lambda}(tau) - I): vanishes exactly when lambda is an
/// eigenvalue of the index-form operator on [0, tau].
pub fn eigenvalue_residual(gen: &PathGenerator, tau: f64, lambda: f64) -> Result<f64> {
    assert!(lambda <= 0.0, "the shooting characterization needs lambda <= 0");
    let shifted = gen.shifted(lambda);
    let path = path_from_generator_sampled(&shifted, tau, 8)?;
    let gamma = path.eval(tau)?;
    let dim = gamma.nrows();
    Ok(smin_smax(&(gamma - DMatrix::<f64>::identity(dim, dim))).0)
}

/// Shooting test for lambda <= 0 being an eigenvalue of the index form.
pub fn eigenspace_shooting_check(gen: &PathGenerator, tau: f64, lambda: f64) -> Result<bool> {
    Ok(eigenvalue_residual(gen, tau, lambda)? < 1e-6)
}
