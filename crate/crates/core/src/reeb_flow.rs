//! Hamiltonian/Reeb flow integration and its linearization.
//!
//! The flow of the 2-homogeneous Hamiltonian extends the Reeb flow of the
//! unit level set Y; trajectories are integrated with an adaptive embedded
//! Runge-Kutta scheme and renormalized radially after every sample step,
//! which homogeneity permits. The linearization is integrated jointly with
//! the base point so the Hessian is always evaluated on the exact
//! trajectory, never interpolated.

use crate::clarke::{LoopCoefficients, OrbitRecord};
use crate::ode::{self, OdeOptions};
use crate::{linalg, ConvexBody, Error, Point, Result};
use nalgebra::{DMatrix, DVector};
use std::cell::RefCell;
use std::sync::Arc;

/// Relative energy-conservation tolerance over one period.
pub const ENERGY_TOL: f64 = 1e-8;
/// Frobenius tolerance for Gamma^T J Gamma - J along a path.
pub const SYMPLECTICITY_TOL: f64 = 1e-8;
/// Sample density of linearized-flow paths, per unit of time.
const PATH_SAMPLES_PER_UNIT: usize = 2048;
const SHOOTING_MAX_ITERS: usize = 40;
const SHOOTING_TOL: f64 = 1e-11;
/// Residual level above which a shooting result is rejected.
const SHOOTING_ACCEPT: f64 = 1e-9;

/// Sampled solution of z' = J grad H(z).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub body: ConvexBody,
    pub samples: Vec<(f64, Point)>,
    /// Value of H along the trajectory.
    pub energy: f64,
    /// Largest relative energy defect observed before renormalization.
    pub drift: f64,
}

impl Trajectory {
    pub fn initial(&self) -> &Point {
        &self.samples[0].1
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().unwrap().0
    }

    pub fn end_point(&self) -> &Point {
        &self.samples.last().unwrap().1
    }
}

/// Re-integrates a path matrix from a stored sample time to a nearby time.
pub type Propagator = Arc<dyn Fn(f64, &DMatrix<f64>, f64) -> Result<DMatrix<f64>> + Send + Sync>;

/// Sampled symplectic path with a re-integration hook for dense evaluation.
#[derive(Clone)]
pub struct SymplecticPath {
    times: Vec<f64>,
    mats: Vec<DMatrix<f64>>,
    propagate: Propagator,
    pub generator: String,
}

impl std::fmt::Debug for SymplecticPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymplecticPath")
            .field("samples", &self.times.len())
            .field("end_time", &self.end_time())
            .field("generator", &self.generator)
            .finish()
    }
}

impl SymplecticPath {
    pub fn new(
        times: Vec<f64>,
        mats: Vec<DMatrix<f64>>,
        propagate: Propagator,
        generator: String,
    ) -> Self {
        assert_eq!(times.len(), mats.len());
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self {
            times,
            mats,
            propagate,
            generator,
        }
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sample_matrices(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    /// Evaluates Gamma(t) by re-integrating from the nearest stored sample.
    pub fn eval(&self, t: f64) -> Result<DMatrix<f64>> {
        assert!(
            t >= 0.0 && t <= self.end_time() + 1e-12,
            "evaluation outside the path domain"
        );
        let idx = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => return Ok(self.mats[i].clone()),
            Err(i) => i.saturating_sub(1),
        };
        (self.propagate)(self.times[idx], &self.mats[idx], t)
    }

    /// Largest symplecticity defect over the stored samples.
    pub fn max_symplectic_defect(&self) -> f64 {
        self.mats
            .iter()
            .map(linalg::symplectic_defect)
            .fold(0.0, f64::max)
    }
}

/// The velocity field J grad H, with a warm-started dual inversion shared
/// across evaluations. Errors raised inside an integration callback are
/// parked in `failure` and rechecked afterwards.
struct FlowField<'a> {
    body: &'a ConvexBody,
    warm: RefCell<Option<Point>>,
    failure: RefCell<Option<Error>>,
}

impl<'a> FlowField<'a> {
    fn new(body: &'a ConvexBody) -> Self {
        Self {
            body,
            warm: RefCell::new(None),
            failure: RefCell::new(None),
        }
    }

    /// grad H(z), or zero after a recorded failure.
    fn gradient(&self, z: &Point) -> Point {
        let warm = self.warm.borrow().clone();
        match self.body.dual_invert(z, warm.as_ref()) {
            Ok(w) => {
                *self.warm.borrow_mut() = Some(w.clone());
                w
            }
            Err(e) => {
                self.failure.borrow_mut().get_or_insert(e);
                Point::zeros(z.len())
            }
        }
    }

    fn check(&self) -> Result<()> {
        match self.failure.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Integrates the extended Hamiltonian flow from an arbitrary point,
/// conserving whatever energy level the point sits on.
pub fn hamiltonian_flow(
    body: &ConvexBody,
    z0: &Point,
    time: f64,
    steps: usize,
) -> Result<Trajectory> {
    assert!(time >= 0.0 && steps >= 1);
    let h0 = body.primal_value(z0)?;
    if h0 <= 0.0 {
        return Err(Error::ZeroArgument);
    }
    let field = FlowField::new(body);
    let rhs = |_t: f64, z: &DVector<f64>| linalg::apply_j(&field.gradient(z));
    let times = ode::uniform_times(0.0, time, steps);
    let drift = RefCell::new(0.0f64);
    let states = ode::integrate_samples(&rhs, 0.0, z0, &times, &OdeOptions::default(), |_t, z| {
        match body.primal_value(&z) {
            Ok(h) if h > 0.0 => {
                let d = (h - h0).abs() / h0;
                if d > *drift.borrow() {
                    *drift.borrow_mut() = d;
                }
                z * (h0 / h).sqrt()
            }
            _ => z,
        }
    })?;
    field.check()?;
    let drift = drift.into_inner();
    if drift > ENERGY_TOL {
        return Err(Error::EnergyDrift {
            drift,
            tol: ENERGY_TOL,
        });
    }
    Ok(Trajectory {
        body: body.clone(),
        samples: times.into_iter().zip(states).collect(),
        energy: h0,
        drift,
    })
}

/// Reeb trajectory of a point on the unit level set Y.
pub fn reeb_flow(body: &ConvexBody, z0: &Point, time: f64, steps: usize) -> Result<Trajectory> {
    let defect = (body.primal_value(z0)? - 1.0).abs();
    if defect > ENERGY_TOL {
        return Err(Error::OffHypersurface { defect });
    }
    hamiltonian_flow(body, z0, time, steps)
}

/// Joint state layout: [z, vec(Gamma)] with Gamma stored column-major.
fn pack(z: &Point, gamma: &DMatrix<f64>) -> DVector<f64> {
    let dim = z.len();
    let mut y = DVector::zeros(dim + dim * dim);
    y.rows_mut(0, dim).copy_from(z);
    y.rows_mut(dim, dim * dim)
        .copy_from(&DVector::from_column_slice(gamma.as_slice()));
    y
}

fn unpack(y: &DVector<f64>, dim: usize) -> (Point, DMatrix<f64>) {
    let z = y.rows(0, dim).into_owned();
    let gamma = DMatrix::from_column_slice(dim, dim, y.rows(dim, dim * dim).as_slice());
    (z, gamma)
}

/// Right-hand side of the variational system: z' = J grad H(z),
/// Gamma' = J Hess H(z) Gamma, with Hess H recovered as the inverse of the
/// dual Hessian at w = grad H(z).
fn variational_rhs(body: &ConvexBody, field: &FlowField, y: &DVector<f64>) -> DVector<f64> {
    let dim = body.dim();
    let (z, gamma) = unpack(y, dim);
    let w = field.gradient(&z);
    let hess = if body.is_ellipsoid() {
        body.primal_hess(&z)
    } else {
        body.dual_hess(&w).and_then(|hd| {
            nalgebra::Cholesky::new(hd)
                .map(|c| c.inverse())
                .ok_or(Error::DegenerateHessian)
        })
    };
    let hess = match hess {
        Ok(h) => h,
        Err(e) => {
            field.failure.borrow_mut().get_or_insert(e);
            DMatrix::zeros(dim, dim)
        }
    };
    let dz = linalg::apply_j(&w);
    let dgamma = linalg::j_times(&(hess * gamma));
    pack(&dz, &dgamma)
}

/// Linearized flow d phi^t along the trajectory's orbit, over [0, time].
/// Returns the path Gamma(t) sampled densely enough for crossing sweeps.
pub fn linearized_flow(body: &ConvexBody, traj: &Trajectory, time: f64) -> Result<SymplecticPath> {
    let z0 = traj.initial().clone();
    let dim = body.dim();
    let samples = ((time * PATH_SAMPLES_PER_UNIT as f64).ceil() as usize).max(64);
    let times = ode::uniform_times(0.0, time, samples);
    let field = FlowField::new(body);
    let h0 = traj.energy;
    let rhs = |_t: f64, y: &DVector<f64>| variational_rhs(body, &field, y);
    let y0 = pack(&z0, &DMatrix::identity(dim, dim));
    let states = ode::integrate_samples(&rhs, 0.0, &y0, &times, &OdeOptions::default(), |_t, mut y| {
        // renormalize only the base point; the fiber stays untouched
        let z = y.rows(0, dim).into_owned();
        if let Ok(h) = body.primal_value(&z) {
            if h > 0.0 {
                let scale = (h0 / h).sqrt();
                y.rows_mut(0, dim).copy_from(&(z * scale));
            }
        }
        y
    })?;
    field.check()?;
    let mut mats = Vec::with_capacity(states.len());
    let mut zs = Vec::with_capacity(states.len());
    for y in &states {
        let (z, gamma) = unpack(y, dim);
        mats.push(gamma);
        zs.push(z);
    }
    let path = SymplecticPath::new(
        times.clone(),
        mats,
        make_orbit_propagator(body.clone(), times, zs),
        format!("linearized flow, T = {time}"),
    );
    let defect = path.max_symplectic_defect();
    if defect > SYMPLECTICITY_TOL {
        return Err(Error::SymplecticityLoss {
            defect,
            tol: SYMPLECTICITY_TOL,
        });
    }
    Ok(path)
}

fn make_orbit_propagator(body: ConvexBody, times: Vec<f64>, zs: Vec<Point>) -> Propagator {
    Arc::new(move |t0, gamma0, t1| {
        let idx = times
            .binary_search_by(|probe| probe.partial_cmp(&t0).unwrap())
            .map_err(|_| Error::Unsupported("propagation must start at a stored sample".into()))?;
        let field = FlowField::new(&body);
        let rhs = |_t: f64, y: &DVector<f64>| variational_rhs(&body, &field, y);
        let y0 = pack(&zs[idx], gamma0);
        let y1 = ode::integrate(&rhs, t0, &y0, t1, &OdeOptions::default())?;
        field.check()?;
        Ok(unpack(&y1, body.dim()).1)
    })
}

/// One evaluation of the shooting map: endpoint, monodromy and velocity.
fn shoot(body: &ConvexBody, z: &Point, t: f64) -> Result<(Point, DMatrix<f64>, Point)> {
    let dim = body.dim();
    let field = FlowField::new(body);
    let rhs = |_t: f64, y: &DVector<f64>| variational_rhs(body, &field, y);
    let y0 = pack(z, &DMatrix::identity(dim, dim));
    let y1 = ode::integrate(&rhs, 0.0, &y0, t, &OdeOptions::default())?;
    field.check()?;
    let (z_end, gamma) = unpack(&y1, dim);
    let v_end = linalg::apply_j(&body.primal_grad(&z_end)?);
    Ok((z_end, gamma, v_end))
}

/// Newton shooting for a closed orbit near `seed` with period near
/// `period_guess`. The phase is pinned to the hyperplane through the seed
/// orthogonal to the Reeb direction there; the linear systems are solved in
/// the least-squares sense because closed orbits come in families.
pub fn find_closed_orbit(
    body: &ConvexBody,
    seed: &Point,
    period_guess: f64,
) -> Result<OrbitRecord> {
    assert!(period_guess > 0.0);
    let mut z = body.project_to_unit_level(seed)?;
    let mut t = period_guess;
    let anchor = z.clone();
    let anchor_dir = linalg::apply_j(&body.primal_grad(&anchor)?);
    let dim = body.dim();

    let eval_residual = |z: &Point, t: f64| -> Result<(DVector<f64>, Point, DMatrix<f64>, Point)> {
        let (z_end, gamma, v_end) = shoot(body, z, t)?;
        let mut f = DVector::zeros(dim + 2);
        for i in 0..dim {
            f[i] = z_end[i] - z[i];
        }
        f[dim] = body.primal_value(z)? - 1.0;
        f[dim + 1] = (z - &anchor).dot(&anchor_dir);
        Ok((f, z_end, gamma, v_end))
    };

    let (mut f, mut z_end, mut gamma, mut v_end) = eval_residual(&z, t)?;
    let mut iters = 0;
    loop {
        let closure_res = (&z_end - &z).norm();
        if closure_res <= SHOOTING_TOL && f[dim].abs() <= SHOOTING_TOL {
            break;
        }
        if iters >= SHOOTING_MAX_ITERS {
            return Err(Error::ShootingDivergence {
                residual: closure_res,
                iters,
            });
        }
        iters += 1;
        let mut jac = DMatrix::zeros(dim + 2, dim + 1);
        let grad_h = body.primal_grad(&z)?;
        for r in 0..dim {
            for c in 0..dim {
                jac[(r, c)] = gamma[(r, c)] - if r == c { 1.0 } else { 0.0 };
            }
            jac[(r, dim)] = v_end[r];
            jac[(dim, r)] = grad_h[r];
            jac[(dim + 1, r)] = anchor_dir[r];
        }
        // closed orbits come in families, so the Jacobian is rank-deficient;
        // the cutoff keeps the step out of noise-dominated null directions
        let svd = jac.svd(true, true);
        let step = svd
            .solve(&(-&f), 1e-6)
            .map_err(|_| Error::ShootingDivergence {
                residual: closure_res,
                iters,
            })?;
        let mut alpha = 1.0;
        let mut advanced = false;
        for _ in 0..8 {
            let z_try = &z + step.rows(0, dim) * alpha;
            let t_try = (t + alpha * step[dim]).max(0.1 * t);
            if let Ok((f_try, ze, ga, ve)) = eval_residual(&z_try, t_try) {
                if f_try.norm() < f.norm() {
                    z = z_try;
                    t = t_try;
                    f = f_try;
                    z_end = ze;
                    gamma = ga;
                    v_end = ve;
                    advanced = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !advanced {
            // stalled at the integration noise floor; the acceptance check
            // below decides whether the point is good enough
            break;
        }
    }
    let residual = (&z_end - &z).norm();
    if residual > SHOOTING_ACCEPT {
        return Err(Error::ShootingDivergence { residual, iters });
    }

    // Loop representation: the derivative of gamma(s) = y(Ts)/T is the
    // velocity field along the orbit, sampled on a uniform grid.
    let m = 256usize;
    let traj = hamiltonian_flow(body, &z, t, m)?;
    let velocity_samples: Vec<Point> = traj
        .samples
        .iter()
        .take(m)
        .map(|(_, p)| Ok(linalg::apply_j(&body.primal_grad(p)?)))
        .collect::<Result<_>>()?;
    let loop_coeffs = LoopCoefficients::from_samples(body.dim_n(), m / 4, &velocity_samples);
    let samples = traj.samples.clone();
    Ok(OrbitRecord {
        period: t,
        initial_point: z,
        loop_coeffs,
        samples,
        residual,
        index: None,
        nullity: None,
    })
}
