//! SL(2,R) arithmetic, the Iwasawa factorization `A = P_alpha H_r E_theta`,
//! and the action of 2x2 matrices on the real projective line.
//!
//! The three factors are
//!
//! ```text
//! P_alpha = [[1, alpha], [0, 1]]         (shear)
//! H_r     = [[r, 0], [0, 1/r]],  r > 0   (dilation)
//! E_theta = [[cos, -sin], [sin, cos]]    (rotation)
//! ```
//!
//! A point of RP^1 is stored as the angle `arg(v2 + i v1)` of any
//! representative `v = (v1, v2)`, reduced to `[0, pi)`. With this convention
//! the class of a solution vector `(u, u')` has the same angle as its Pruefer
//! angle modulo pi, and `(sin psi, cos psi)` is a representative of angle `psi`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on `|det - 1|` for values accepted as SL(2,R) elements.
pub const DET_TOLERANCE: f64 = 1e-9;

/// Default tolerance for equality of projective classes in pure algebra.
pub const ANGLE_TOLERANCE: f64 = 1e-9;

/// Real 2x2 matrix `[[a, b], [c, d]]`.
///
/// Serialized as the row-major array `[a, b, c, d]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl From<[f64; 4]> for Mat2 {
    fn from([a, b, c, d]: [f64; 4]) -> Self {
        Mat2 { a, b, c, d }
    }
}

impl From<Mat2> for [f64; 4] {
    fn from(m: Mat2) -> Self {
        [m.a, m.b, m.c, m.d]
    }
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// SL(2,R) element; fails unless `|det - 1| <= DET_TOLERANCE`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::with_tolerance(a, b, c, d, DET_TOLERANCE)
    }

    pub fn with_tolerance(a: f64, b: f64, c: f64, d: f64, tolerance: f64) -> Result<Self> {
        let m = Mat2 { a, b, c, d };
        m.check_unimodular(tolerance)?;
        Ok(m)
    }

    /// Any GL(2,R) matrix, no determinant check.
    pub const fn general(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn shear(alpha: f64) -> Self {
        Mat2::general(1.0, alpha, 0.0, 1.0)
    }

    pub fn dilation(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidDilation(r));
        }
        Ok(Mat2::general(r, 0.0, 0.0, 1.0 / r))
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::general(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn is_unimodular(&self, tolerance: f64) -> bool {
        (self.det() - 1.0).abs() <= tolerance
    }

    pub fn check_unimodular(&self, tolerance: f64) -> Result<()> {
        let det = self.det();
        if !det.is_finite() || (det - 1.0).abs() > tolerance {
            return Err(Error::NonUnimodular { det, tolerance });
        }
        Ok(())
    }

    /// Inverse via the adjugate; exact for det = 1 up to rounding.
    pub fn inverse(&self) -> Self {
        let det = self.det();
        Mat2::general(self.d / det, -self.b / det, -self.c / det, self.a / det)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a * v[0] + self.b * v[1],
            self.c * v[0] + self.d * v[1],
        ]
    }

    pub fn scale(&self, s: f64) -> Self {
        Mat2::general(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    /// Rescale by `det^{-1/2}` so the determinant becomes 1. Requires det > 0.
    pub fn project_to_sl2(&self) -> Self {
        self.scale(self.det().sqrt().recip())
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// Projective action without a determinant check (any invertible matrix).
    pub fn act(&self, p: ProjPoint) -> ProjPoint {
        let [v1, v2] = self.apply(p.representative());
        // invertible matrices never send a unit vector to zero
        ProjPoint::from_angle(v1.atan2(v2))
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        Mat2::general(
            self.a * rhs.a + self.b * rhs.c,
            self.a * rhs.b + self.b * rhs.d,
            self.c * rhs.a + self.d * rhs.c,
            self.c * rhs.b + self.d * rhs.d,
        )
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Reduce an angle to `[0, period)`, mapping the rounding edge case `period` to 0.
pub(crate) fn reduce_angle(angle: f64, period: f64) -> f64 {
    let r = angle.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Wrap an angle difference into `(-pi/2, pi/2]`.
pub fn wrap_half_pi(delta: f64) -> f64 {
    let w = (delta + PI / 2.0).rem_euclid(PI) - PI / 2.0;
    if w <= -PI / 2.0 {
        w + PI
    } else {
        w
    }
}

/// Parameters `(alpha, r, theta)` of `A = P_alpha H_r E_theta`.
///
/// `r > 0` is enforced at construction and `theta` is stored in `[0, 2 pi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIwasawa", into = "RawIwasawa")]
pub struct IwasawaParams {
    alpha: f64,
    r: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIwasawa {
    alpha: f64,
    r: f64,
    theta: f64,
}

impl TryFrom<RawIwasawa> for IwasawaParams {
    type Error = Error;

    fn try_from(raw: RawIwasawa) -> Result<Self> {
        IwasawaParams::new(raw.alpha, raw.r, raw.theta)
    }
}

impl From<IwasawaParams> for RawIwasawa {
    fn from(p: IwasawaParams) -> Self {
        RawIwasawa {
            alpha: p.alpha,
            r: p.r,
            theta: p.theta,
        }
    }
}

impl IwasawaParams {
    pub fn new(alpha: f64, r: f64, theta: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidDilation(r));
        }
        if !alpha.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite Iwasawa parameter (alpha = {alpha}, theta = {theta})"
            )));
        }
        Ok(IwasawaParams {
            alpha,
            r,
            theta: reduce_angle(theta, TAU),
        })
    }

    pub const IDENTITY: IwasawaParams = IwasawaParams {
        alpha: 0.0,
        r: 1.0,
        theta: 0.0,
    };

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        IwasawaParams::new(alpha, self.r, self.theta)
    }

    pub fn with_r(self, r: f64) -> Result<Self> {
        IwasawaParams::new(self.alpha, r, self.theta)
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        IwasawaParams::new(self.alpha, self.r, theta)
    }

    /// The product `P_alpha H_r E_theta`.
    pub fn matrix(&self) -> Mat2 {
        let (s, c) = self.theta.sin_cos();
        let (alpha, r) = (self.alpha, self.r);
        // P_alpha H_r = [[r, alpha / r], [0, 1 / r]]
        Mat2::general(
            r * c + alpha * s / r,
            -r * s + alpha * c / r,
            s / r,
            c / r,
        )
    }
}

/// Factor an SL(2,R) matrix as `P_alpha H_r E_theta`.
///
/// `alpha + i r^2` is the image of `i` under the Moebius action of `A`; the
/// rotation is read off the second row of `H_r^{-1} P_alpha^{-1} A`, which is
/// `(r c, r d) = (sin theta, cos theta)`.
pub fn iwasawa_decompose(m: &Mat2) -> Result<IwasawaParams> {
    iwasawa_decompose_with_tolerance(m, DET_TOLERANCE)
}

pub fn iwasawa_decompose_with_tolerance(m: &Mat2, tolerance: f64) -> Result<IwasawaParams> {
    m.check_unimodular(tolerance)?;
    let (re, im) = moebius_at_i(m);
    IwasawaParams::new(re, im.sqrt(), m.c.atan2(m.d))
}

/// `A . i = (a i + b) / (c i + d)` as (real, imaginary) parts.
fn moebius_at_i(m: &Mat2) -> (f64, f64) {
    let denom = m.c * m.c + m.d * m.d;
    ((m.a * m.c + m.b * m.d) / denom, m.det() / denom)
}

pub fn iwasawa_compose(p: &IwasawaParams) -> Mat2 {
    p.matrix()
}

/// A point of the real projective line, stored as an angle in `[0, pi)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct ProjPoint {
    angle: f64,
}

impl From<f64> for ProjPoint {
    fn from(angle: f64) -> Self {
        ProjPoint::from_angle(angle)
    }
}

impl From<ProjPoint> for f64 {
    fn from(p: ProjPoint) -> Self {
        p.angle
    }
}

impl ProjPoint {
    pub fn from_angle(angle: f64) -> Self {
        ProjPoint {
            angle: reduce_angle(angle, PI),
        }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Unit representative `(sin psi, cos psi)`.
    pub fn representative(&self) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [s, c]
    }

    /// Angular distance on RP^1, in `[0, pi/2]`.
    pub fn distance(&self, other: &ProjPoint) -> f64 {
        let d = (self.angle - other.angle).abs();
        d.min(PI - d)
    }

    /// `self - other` wrapped into `(-pi/2, pi/2]`.
    pub fn signed_difference(&self, other: &ProjPoint) -> f64 {
        wrap_half_pi(self.angle - other.angle)
    }

    pub fn approx_eq(&self, other: &ProjPoint, tolerance: f64) -> bool {
        self.distance(other) <= tolerance
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.angle)
    }
}

pub fn proj_class(v: [f64; 2]) -> Result<ProjPoint> {
    if !(v[0].is_finite() && v[1].is_finite()) || (v[0] == 0.0 && v[1] == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(ProjPoint::from_angle(v[0].atan2(v[1])))
}

/// The induced map `[v] -> [M v]` for unimodular `M`.
pub fn proj_apply(m: &Mat2, p: ProjPoint) -> Result<ProjPoint> {
    m.check_unimodular(DET_TOLERANCE)?;
    Ok(m.act(p))
}

/// Whether `A(alpha, r, theta) v` and `A(alpha, r, theta_alt) v` lie in different classes.
///
/// Equivalent to `theta_alt - theta` not being a multiple of pi.
pub fn theta_dichotomy(v: ProjPoint, params: &IwasawaParams, theta_alt: f64) -> bool {
    let alt = IwasawaParams {
        theta: reduce_angle(theta_alt, TAU),
        ..*params
    };
    let lhs = params.matrix().act(v);
    let rhs = alt.matrix().act(v);
    !lhs.approx_eq(&rhs, ANGLE_TOLERANCE)
}

/// The two classes on which `[A v]` does not depend on the dilation `r`:
/// `[(sin theta, cos theta)]` and `[(cos theta, -sin theta)]`.
pub fn r_fixed_classes(params: &IwasawaParams) -> (ProjPoint, ProjPoint) {
    let t = params.theta;
    // angle of (sin t, cos t) is t; (cos t, -sin t) is a quarter turn further
    (ProjPoint::from_angle(t), ProjPoint::from_angle(t + PI / 2.0))
}

/// The class `[(cos theta, -sin theta)]` on which `[A v]` does not depend on `alpha`.
pub fn alpha_fixed_class(params: &IwasawaParams) -> ProjPoint {
    ProjPoint::from_angle(params.theta + PI / 2.0)
}
