//! Convex bodies given dual-side.
//!
//! A body is the unit level set Y of a positively 2-homogeneous convex
//! Hamiltonian H on R^2n. All dynamics in this crate only ever needs the
//! Legendre dual H* (value, gradient, Hessian), which is analytic for the
//! supported families; the primal side is recovered by inverting the dual
//! gradient with a damped Newton iteration.
//!
//! Supported families:
//! * `Ellipsoid`: H(z) = pi sum |z_i|^2 / a_i, dual H*(w) = sum a_i |w_i|^2 / (4 pi).
//! * `DualPower`: H*(w) = (sum u_i^q)^{1/q} with u_i = a_i |w_i|^2 / (4 pi),
//!   a smooth strictly convex 2-homogeneous deformation of the ellipsoid dual
//!   (q = 1 reproduces it exactly).

use crate::besse_spectra::{parse_rational, rational_from_f64};
use crate::{Error, Point, Result};
use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 50;
/// Convexity of the dual-power family degrades for large exponents.
const MAX_DUAL_POWER: f64 = 8.0;

#[derive(Debug, Clone)]
enum BodyKind {
    Ellipsoid { exact: Option<Vec<BigRational>> },
    DualPower { power: f64 },
}

/// Immutable convex body; all operations are pure.
#[derive(Debug, Clone)]
pub struct ConvexBody {
    axes: Vec<f64>,
    kind: BodyKind,
}

impl ConvexBody {
    pub fn ellipsoid(axes: Vec<f64>) -> Result<Self> {
        check_axes(&axes)?;
        let mut axes = axes;
        axes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            axes,
            kind: BodyKind::Ellipsoid { exact: None },
        })
    }

    /// Ellipsoid with exact rational axes, retained for the spectrum modules.
    pub fn ellipsoid_exact(axes: Vec<BigRational>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| !a.is_positive()) {
            return Err(Error::InvalidBody("axes must be positive".into()));
        }
        let mut axes = axes;
        axes.sort();
        let float_axes = axes
            .iter()
            .map(|a| a.to_f64().ok_or_else(|| Error::InvalidBody("axis overflows f64".into())))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            axes: float_axes,
            kind: BodyKind::Ellipsoid { exact: Some(axes) },
        })
    }

    pub fn dual_power(axes: Vec<f64>, power: f64) -> Result<Self> {
        check_axes(&axes)?;
        if !(1.0..=MAX_DUAL_POWER).contains(&power) {
            return Err(Error::InvalidBody(format!(
                "dual power exponent must lie in [1, {MAX_DUAL_POWER}], got {power}"
            )));
        }
        let mut axes = axes;
        axes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            axes,
            kind: BodyKind::DualPower { power },
        })
    }

    pub fn dim_n(&self) -> usize {
        self.axes.len()
    }

    /// Ambient dimension 2n.
    pub fn dim(&self) -> usize {
        2 * self.axes.len()
    }

    pub fn axes(&self) -> &[f64] {
        &self.axes
    }

    pub fn exact_axes(&self) -> Option<&[BigRational]> {
        match &self.kind {
            BodyKind::Ellipsoid { exact } => exact.as_deref(),
            BodyKind::DualPower { .. } => None,
        }
    }

    pub fn is_ellipsoid(&self) -> bool {
        matches!(self.kind, BodyKind::Ellipsoid { .. })
    }

    /// Dual Hamiltonian H*(w).
    pub fn dual_value(&self, w: &Point) -> f64 {
        self.check_dim(w);
        match &self.kind {
            BodyKind::Ellipsoid { .. } => self
                .blocks(w)
                .map(|(a, ww)| a * ww / (4.0 * PI))
                .sum(),
            BodyKind::DualPower { power } => {
                let s: f64 = self
                    .blocks(w)
                    .map(|(a, ww)| (a * ww / (4.0 * PI)).powf(*power))
                    .sum();
                s.powf(1.0 / power)
            }
        }
    }

    /// Gradient of the dual Hamiltonian; vanishes at the origin.
    pub fn dual_grad(&self, w: &Point) -> Point {
        self.check_dim(w);
        let mut out = Point::zeros(w.len());
        match &self.kind {
            BodyKind::Ellipsoid { .. } => {
                for (i, a) in self.axes.iter().enumerate() {
                    let c = a / (2.0 * PI);
                    out[2 * i] = c * w[2 * i];
                    out[2 * i + 1] = c * w[2 * i + 1];
                }
            }
            BodyKind::DualPower { power } => {
                let q = *power;
                let u: Vec<f64> = self.blocks(w).map(|(a, ww)| a * ww / (4.0 * PI)).collect();
                let s: f64 = u.iter().map(|ui| ui.powf(q)).sum();
                if s == 0.0 {
                    return out;
                }
                let front = s.powf(1.0 / q - 1.0);
                for (i, a) in self.axes.iter().enumerate() {
                    if u[i] == 0.0 && q > 1.0 {
                        continue;
                    }
                    let c = front * u[i].powf(q - 1.0) * a / (2.0 * PI);
                    out[2 * i] = c * w[2 * i];
                    out[2 * i + 1] = c * w[2 * i + 1];
                }
            }
        }
        out
    }

    /// Hessian of the dual Hamiltonian, 0-homogeneous in w.
    pub fn dual_hess(&self, w: &Point) -> Result<DMatrix<f64>> {
        self.check_dim(w);
        if w.norm() == 0.0 {
            return Err(Error::ZeroArgument);
        }
        let dim = self.dim();
        match &self.kind {
            BodyKind::Ellipsoid { .. } => {
                let mut h = DMatrix::zeros(dim, dim);
                for (i, a) in self.axes.iter().enumerate() {
                    let c = a / (2.0 * PI);
                    h[(2 * i, 2 * i)] = c;
                    h[(2 * i + 1, 2 * i + 1)] = c;
                }
                Ok(h)
            }
            BodyKind::DualPower { power } => {
                let q = *power;
                let u: Vec<f64> = self.blocks(w).map(|(a, ww)| a * ww / (4.0 * PI)).collect();
                let s: f64 = u.iter().map(|ui| ui.powf(q)).sum();
                // g = gradient of S / q in block form: block i is u_i^{q-1} (a_i / 2 pi) w_i
                let mut g = Point::zeros(dim);
                for (i, a) in self.axes.iter().enumerate() {
                    if u[i] == 0.0 {
                        continue;
                    }
                    let c = u[i].powf(q - 1.0) * a / (2.0 * PI);
                    g[2 * i] = c * w[2 * i];
                    g[2 * i + 1] = c * w[2 * i + 1];
                }
                let mut h = &g * g.transpose() * ((1.0 - q) * s.powf(1.0 / q - 2.0));
                let front = s.powf(1.0 / q - 1.0);
                for (i, a) in self.axes.iter().enumerate() {
                    let ai2pi = a / (2.0 * PI);
                    if u[i] > 0.0 && q != 1.0 {
                        let c = front * (q - 1.0) * u[i].powf(q - 2.0) * ai2pi * ai2pi;
                        for r in 0..2 {
                            for cidx in 0..2 {
                                h[(2 * i + r, 2 * i + cidx)] +=
                                    c * w[2 * i + r] * w[2 * i + cidx];
                            }
                        }
                    }
                    let diag = front * u[i].powf(q - 1.0) * ai2pi;
                    if diag.is_finite() {
                        h[(2 * i, 2 * i)] += diag;
                        h[(2 * i + 1, 2 * i + 1)] += diag;
                    }
                }
                Ok(h)
            }
        }
    }

    /// Primal Hamiltonian H(z).
    pub fn primal_value(&self, z: &Point) -> Result<f64> {
        self.check_dim(z);
        match &self.kind {
            BodyKind::Ellipsoid { .. } => Ok(self
                .blocks(z)
                .map(|(a, zz)| PI * zz / a)
                .sum()),
            BodyKind::DualPower { .. } => {
                if z.norm() == 0.0 {
                    return Ok(0.0);
                }
                // Fenchel identity for 2-homogeneous pairs: H(grad H*(w)) = H*(w).
                let w = self.dual_invert(z, None)?;
                Ok(self.dual_value(&w))
            }
        }
    }

    /// Gradient of the primal Hamiltonian at z != 0.
    pub fn primal_grad(&self, z: &Point) -> Result<Point> {
        self.check_dim(z);
        if z.norm() == 0.0 {
            return Err(Error::ZeroArgument);
        }
        match &self.kind {
            BodyKind::Ellipsoid { .. } => {
                let mut out = Point::zeros(z.len());
                for (i, a) in self.axes.iter().enumerate() {
                    let c = 2.0 * PI / a;
                    out[2 * i] = c * z[2 * i];
                    out[2 * i + 1] = c * z[2 * i + 1];
                }
                Ok(out)
            }
            BodyKind::DualPower { .. } => self.dual_invert(z, None),
        }
    }

    /// Hessian of the primal Hamiltonian at z != 0: the inverse of the dual
    /// Hessian at w = grad H(z).
    pub fn primal_hess(&self, z: &Point) -> Result<DMatrix<f64>> {
        self.check_dim(z);
        if z.norm() == 0.0 {
            return Err(Error::ZeroArgument);
        }
        match &self.kind {
            BodyKind::Ellipsoid { .. } => {
                let dim = self.dim();
                let mut h = DMatrix::zeros(dim, dim);
                for (i, a) in self.axes.iter().enumerate() {
                    let c = 2.0 * PI / a;
                    h[(2 * i, 2 * i)] = c;
                    h[(2 * i + 1, 2 * i + 1)] = c;
                }
                Ok(h)
            }
            BodyKind::DualPower { .. } => {
                let w = self.dual_invert(z, None)?;
                let dual = self.dual_hess(&w)?;
                nalgebra::Cholesky::new(dual.clone())
                    .map(|c| c.inverse())
                    .ok_or(Error::DegenerateHessian)
            }
        }
    }

    /// Solves grad H*(w) = z for w. Blocks where z vanishes stay zero; the
    /// iteration runs on the remaining coordinates, warm-started when a
    /// previous solution is supplied.
    pub fn dual_invert(&self, z: &Point, warm: Option<&Point>) -> Result<Point> {
        self.check_dim(z);
        if z.norm() == 0.0 {
            return Ok(Point::zeros(z.len()));
        }
        if let BodyKind::Ellipsoid { .. } = self.kind {
            let mut w = Point::zeros(z.len());
            for (i, a) in self.axes.iter().enumerate() {
                let c = 2.0 * PI / a;
                w[2 * i] = c * z[2 * i];
                w[2 * i + 1] = c * z[2 * i + 1];
            }
            return Ok(w);
        }
        let scale = z.norm();
        let active: Vec<usize> = (0..self.dim_n())
            .filter(|&i| z[2 * i].hypot(z[2 * i + 1]) > 0.0)
            .flat_map(|i| [2 * i, 2 * i + 1])
            .collect();
        let mut w = Point::zeros(z.len());
        let warm_usable = warm.is_some_and(|g| {
            g.len() == z.len() && active.iter().all(|&c| {
                let b = c / 2 * 2;
                g[b].hypot(g[b + 1]) > 0.0
            })
        });
        if warm_usable {
            w.copy_from(warm.unwrap());
            for i in 0..self.dim_n() {
                if z[2 * i].hypot(z[2 * i + 1]) == 0.0 {
                    w[2 * i] = 0.0;
                    w[2 * i + 1] = 0.0;
                }
            }
        } else {
            for (i, a) in self.axes.iter().enumerate() {
                w[2 * i] = 2.0 * PI / a * z[2 * i];
                w[2 * i + 1] = 2.0 * PI / a * z[2 * i + 1];
            }
        }
        let residual = |w: &Point| -> Point {
            let g = self.dual_grad(w);
            Point::from_iterator(active.len(), active.iter().map(|&c| g[c] - z[c]))
        };
        let mut r = residual(&w);
        for _ in 0..NEWTON_MAX_ITERS {
            if r.norm() <= NEWTON_TOL * scale.max(1.0) {
                return Ok(w);
            }
            let h_full = self.dual_hess(&w)?;
            let mut h = DMatrix::zeros(active.len(), active.len());
            for (ri, &rc) in active.iter().enumerate() {
                for (ci, &cc) in active.iter().enumerate() {
                    h[(ri, ci)] = h_full[(rc, cc)];
                }
            }
            let step = match nalgebra::Cholesky::new(h.clone()) {
                Some(chol) => chol.solve(&r),
                None => h
                    .lu()
                    .solve(&r)
                    .ok_or(Error::DegenerateHessian)?,
            };
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let mut w_try = w.clone();
                for (si, &c) in active.iter().enumerate() {
                    w_try[c] -= alpha * step[si];
                }
                let r_try = residual(&w_try);
                if r_try.norm() < r.norm() * (1.0 - 0.25 * alpha) {
                    w = w_try;
                    r = r_try;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if r.norm() <= NEWTON_TOL * scale.max(1.0) {
            Ok(w)
        } else {
            Err(Error::NewtonDivergence {
                residual: r.norm(),
                iters: NEWTON_MAX_ITERS,
            })
        }
    }

    /// Radial projection z -> z / sqrt(H(z)) onto the unit level set.
    pub fn project_to_unit_level(&self, z: &Point) -> Result<Point> {
        let h = self.primal_value(z)?;
        if h <= 0.0 {
            return Err(Error::ZeroArgument);
        }
        Ok(z / h.sqrt())
    }

    /// The point (sqrt(a_i / pi), 0) of the i-th coordinate plane, which lies
    /// on the unit level set and starts the planar circle orbit of period a_i.
    pub fn planar_point(&self, i: usize) -> Point {
        assert!(i < self.dim_n());
        let mut z = Point::zeros(self.dim());
        z[2 * i] = (self.axes[i] / PI).sqrt();
        z
    }

    fn check_dim(&self, v: &Point) {
        assert_eq!(v.len(), self.dim(), "point dimension mismatch");
    }

    /// Iterator over (a_i, |v_i|^2).
    fn blocks<'a>(&'a self, v: &'a Point) -> impl Iterator<Item = (f64, f64)> + 'a {
        self.axes
            .iter()
            .enumerate()
            .map(move |(i, &a)| (a, v[2 * i] * v[2 * i] + v[2 * i + 1] * v[2 * i + 1]))
    }
}

fn check_axes(axes: &[f64]) -> Result<()> {
    if axes.is_empty() {
        return Err(Error::InvalidBody("body needs at least one axis".into()));
    }
    if axes.iter().any(|a| !a.is_finite() || *a <= 0.0) {
        return Err(Error::InvalidBody("axes must be positive finite reals".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON body specification.
// ---------------------------------------------------------------------------

/// One axis entry: "p/q" or decimal strings parse exactly, numbers parse
/// through their shortest decimal form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Text(String),
    Number(f64),
}

/// On-disk body description:
/// `{"kind": "ellipsoid" | "dual_power", "a": [...], "q": <real>, "rational": <bool>}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BodySpec {
    pub kind: String,
    pub a: Vec<AxisValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rational: Option<bool>,
}

impl BodySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidBody(e.to_string()))
    }

    pub fn build(&self) -> Result<ConvexBody> {
        let rational_axes = || -> Result<Vec<BigRational>> {
            self.a
                .iter()
                .map(|v| match v {
                    AxisValue::Text(s) => parse_rational(s),
                    AxisValue::Number(x) => rational_from_f64(*x),
                })
                .collect()
        };
        let float_axes = || -> Result<Vec<f64>> {
            self.a
                .iter()
                .map(|v| match v {
                    AxisValue::Text(s) => parse_rational(s)?
                        .to_f64()
                        .ok_or_else(|| Error::InvalidBody("axis overflows f64".into())),
                    AxisValue::Number(x) => Ok(*x),
                })
                .collect()
        };
        match self.kind.as_str() {
            "ellipsoid" => {
                if self.rational == Some(false) {
                    ConvexBody::ellipsoid(float_axes()?)
                } else {
                    ConvexBody::ellipsoid_exact(rational_axes()?)
                }
            }
            "dual_power" => {
                let q = self
                    .q
                    .ok_or_else(|| Error::InvalidBody("dual_power body needs q".into()))?;
                ConvexBody::dual_power(float_axes()?, q)
            }
            other => Err(Error::InvalidBody(format!("unknown body kind {other:?}"))),
        }
    }

    /// Canonical echo of a parsed body, used to stamp outputs.
    pub fn describe(body: &ConvexBody) -> Self {
        match &body.kind {
            BodyKind::Ellipsoid { exact: Some(axes) } => Self {
                kind: "ellipsoid".into(),
                a: axes.iter().map(|a| AxisValue::Text(a.to_string())).collect(),
                q: None,
                rational: None,
            },
            BodyKind::Ellipsoid { exact: None } => Self {
                kind: "ellipsoid".into(),
                a: body.axes.iter().map(|&a| AxisValue::Number(a)).collect(),
                q: None,
                rational: Some(false),
            },
            BodyKind::DualPower { power } => Self {
                kind: "dual_power".into(),
                a: body.axes.iter().map(|&a| AxisValue::Number(a)).collect(),
                q: Some(*power),
                rational: None,
            },
        }
    }
}
