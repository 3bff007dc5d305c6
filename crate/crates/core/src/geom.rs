//! Separation geometry for pairs of aircraft flying straight lines.
//!
//! A pair with relative initial position `p` and relative velocity `v` stays
//! separated by `d` for all `t >= 0` iff it is diverging (`p·v >= 0`) or the
//! velocity lies outside the collision cone, i.e. `g(v) >= 0` where
//!
//! ```text
//! g(v) = |v|^2 (|p|^2 - d^2) - (p·v)^2
//! ```
//!
//! The feasible set is nonconvex but splits along the plane `N(v) = p × v = 0`
//! into two convex wedges, each bounded by one edge of the collision cone.
//! [`tangent_halfplanes`] derives those edges.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ControlDecision;

/// Absolute tolerance applied to unit-scaled boundary comparisons.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product `self × other`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Initial state of one aircraft: position (NM), speed (NM/h), heading (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub position: Vec2,
    pub speed: f64,
    pub heading: f64,
}

impl AircraftState {
    pub fn new(position: Vec2, speed: f64, heading: f64) -> Result<Self> {
        if !position.is_finite() {
            return Err(Error::InvalidState("position must be finite".into()));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::InvalidState(format!("speed must be positive, got {speed}")));
        }
        if !heading.is_finite() {
            return Err(Error::InvalidState("heading must be finite".into()));
        }
        Ok(Self {
            position,
            speed,
            heading: wrap_angle(heading),
        })
    }

    /// Initial velocity vector, the complex constant `V̂ = v̂ e^{iθ̂}`.
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_polar(self.speed, self.heading)
    }

    /// Velocity after applying a control, `V · V̂` as a complex product.
    pub fn controlled_velocity(&self, control: ControlDecision) -> Vec2 {
        let base = self.velocity();
        Vec2::new(
            control.dx * base.x - control.dy * base.y,
            control.dx * base.y + control.dy * base.x,
        )
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// `f(t) = a t² + b t + c`, the squared distance minus `d²` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationPolynomial {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SeparationPolynomial {
    pub fn new(p_hat: Vec2, d: f64, v: Vec2) -> Self {
        Self {
            a: v.norm_sq(),
            b: 2.0 * p_hat.dot(v),
            c: p_hat.norm_sq() - d * d,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.a * t + self.b) * t + self.c
    }
}

/// Relative velocity `v_i - v_j` of two controlled aircraft.
pub fn relative_velocity(
    si: &AircraftState,
    sj: &AircraftState,
    ci: ControlDecision,
    cj: ControlDecision,
) -> Vec2 {
    si.controlled_velocity(ci) - sj.controlled_velocity(cj)
}

/// Time at which the pair is closest; negative when diverging.
pub fn time_of_min_separation(p_hat: Vec2, v: Vec2) -> Result<f64> {
    let vv = v.norm_sq();
    if vv < 1e-12 {
        return Err(Error::ZeroRelativeVelocity);
    }
    Ok(-p_hat.dot(v) / vv)
}

/// `g(v) = vx²(ŷ²-d²) + vy²(x̂²-d²) - 2x̂ŷ vx vy`.
pub fn g_value(p_hat: Vec2, d: f64, v: Vec2) -> f64 {
    let (x, y) = (p_hat.x, p_hat.y);
    let d2 = d * d;
    v.x * v.x * (y * y - d2) + v.y * v.y * (x * x - d2) - 2.0 * x * y * v.x * v.y
}

/// Exact separation oracle: the pair keeps distance `>= d` for every `t >= 0`.
///
/// Assumes the pair starts separated. Comparisons are made on unit-scaled
/// quantities with [`BOUNDARY_TOL`] slack.
pub fn is_pair_conflict_free(p_hat: Vec2, d: f64, v: Vec2) -> bool {
    let pn = p_hat.norm();
    let vn = v.norm();
    if vn <= 1e-12 * (1.0 + pn) || pn == 0.0 {
        return pn >= d;
    }
    let cos = p_hat.dot(v) / (pn * vn);
    if cos >= -BOUNDARY_TOL {
        return true;
    }
    g_value(p_hat, d, v) / (pn * pn * vn * vn) >= -BOUNDARY_TOL
}

/// Minimum over `t >= 0` of the pair distance, minus `d`.
pub fn separation_margin(p_hat: Vec2, d: f64, v: Vec2) -> f64 {
    let vv = v.norm_sq();
    let dot = p_hat.dot(v);
    if vv <= 0.0 || dot >= 0.0 {
        return p_hat.norm() - d;
    }
    let closest_sq = (p_hat.norm_sq() - dot * dot / vv).max(0.0);
    closest_sq.sqrt() - d
}

/// Which side of plane `N` the relative velocity is pinned to.
///
/// `Lower` is the `z = 1` branch (`N(v) <= 0`), `Upper` the `z = 0` branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingOrder {
    Lower,
    Upper,
}

impl CrossingOrder {
    pub fn z(self) -> u8 {
        match self {
            CrossingOrder::Lower => 1,
            CrossingOrder::Upper => 0,
        }
    }

    pub fn from_z(z: u8) -> Self {
        if z == 1 {
            CrossingOrder::Lower
        } else {
            CrossingOrder::Upper
        }
    }
}

/// Collision cone of one pair and the two half-planes bounding the feasible wedges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionCone {
    pub p_hat: Vec2,
    pub d: f64,
    /// `sqrt(x̂² + ŷ² - d²)`.
    pub e: f64,
    /// Half-angle of the cone, `asin(d / |p̂|)`.
    pub phi: f64,
    pub alpha_l: f64,
    pub beta_l: f64,
    pub alpha_u: f64,
    pub beta_u: f64,
}

impl CollisionCone {
    pub fn lower(&self) -> Vec2 {
        Vec2::new(self.alpha_l, self.beta_l)
    }

    pub fn upper(&self) -> Vec2 {
        Vec2::new(self.alpha_u, self.beta_u)
    }

    /// `N(v) = x̂ vy - ŷ vx`.
    pub fn n_value(&self, v: Vec2) -> f64 {
        self.p_hat.cross(v)
    }

    /// `Lˡ(v) = αˡ vy - βˡ vx`.
    pub fn lower_value(&self, v: Vec2) -> f64 {
        self.lower().cross(v)
    }

    /// `Lᵘ(v) = αᵘ vy - βᵘ vx`.
    pub fn upper_value(&self, v: Vec2) -> f64 {
        self.upper().cross(v)
    }

    /// Whether `v` lies in the convex wedge selected by `order`.
    pub fn satisfies(&self, v: Vec2, order: CrossingOrder) -> bool {
        let rho = self.p_hat.norm();
        let vn = v.norm();
        if vn == 0.0 {
            return true;
        }
        let n = self.n_value(v) / (rho * vn);
        match order {
            CrossingOrder::Lower => {
                n <= BOUNDARY_TOL && self.lower_value(v) / (rho * rho * vn) <= BOUNDARY_TOL
            }
            CrossingOrder::Upper => {
                n >= -BOUNDARY_TOL && self.upper_value(v) / (rho * rho * vn) >= -BOUNDARY_TOL
            }
        }
    }

    /// The crossing order whose wedge contains `v`, preferring the side of `N` it sits on.
    pub fn feasible_order(&self, v: Vec2) -> Option<CrossingOrder> {
        let first = if self.n_value(v) <= 0.0 {
            CrossingOrder::Lower
        } else {
            CrossingOrder::Upper
        };
        let second = match first {
            CrossingOrder::Lower => CrossingOrder::Upper,
            CrossingOrder::Upper => CrossingOrder::Lower,
        };
        [first, second].into_iter().find(|&o| self.satisfies(v, o))
    }

    pub fn in_disjunctive_region(&self, v: Vec2) -> bool {
        self.feasible_order(v).is_some()
    }
}

/// Preprocessed constants of the ordered pair `(i, j)`, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    pub i: usize,
    pub j: usize,
    pub cone: CollisionCone,
}

impl PairGeometry {
    pub fn new(i: usize, j: usize, states: &[AircraftState], d: f64) -> Result<Self> {
        let p_hat = states[i].position - states[j].position;
        let cone = tangent_halfplanes(p_hat, d).map_err(|e| match e {
            Error::InitialLoss { distance, d, .. } => Error::InitialLoss { i, j, distance, d },
            other => other,
        })?;
        Ok(Self { i, j, cone })
    }

    pub fn p_hat(&self) -> Vec2 {
        self.cone.p_hat
    }
}

/// Edges of the collision cone of `p_hat` as the half-plane normals of the two wedges.
///
/// The lower edge (paired with `N <= 0`) is `p̂` rotated by `+φ`, the upper
/// edge (paired with `N >= 0`) is `p̂` rotated by `-φ`, both scaled to length
/// `|p̂|²`. In closed form:
///
/// ```text
/// (αˡ, βˡ) = (x̂E - ŷd, x̂d + ŷE)
/// (αᵘ, βᵘ) = (x̂E + ŷd, ŷE - x̂d)
/// ```
pub fn tangent_halfplanes(p_hat: Vec2, d: f64) -> Result<CollisionCone> {
    let rho2 = p_hat.norm_sq();
    let rho = rho2.sqrt();
    if !(d >= 0.0) || rho < d {
        return Err(Error::InitialLoss {
            i: 0,
            j: 1,
            distance: rho,
            d,
        });
    }
    let e = (rho2 - d * d).max(0.0).sqrt();
    let phi = if rho == 0.0 { FRAC_PI_2 } else { (d / rho).min(1.0).asin() };
    let (x, y) = (p_hat.x, p_hat.y);
    Ok(CollisionCone {
        p_hat,
        d,
        e,
        phi,
        alpha_l: x * e - y * d,
        beta_l: x * d + y * e,
        alpha_u: x * e + y * d,
        beta_u: y * e - x * d,
    })
}

/// Number of pairs in conflict when every aircraft keeps its initial velocity.
pub fn count_conflicts(states: &[AircraftState], d: f64) -> Result<usize> {
    let mut count = 0;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let p_hat = states[i].position - states[j].position;
            let dist = p_hat.norm();
            if dist < d {
                return Err(Error::InitialLoss { i, j, distance: dist, d });
            }
            let v = states[i].velocity() - states[j].velocity();
            if !is_pair_conflict_free(p_hat, d, v) {
                count += 1;
            }
        }
    }
    Ok(count)
}
