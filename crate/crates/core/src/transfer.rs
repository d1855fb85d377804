//! Transfer matrices `M(x, y; E)` of `-u'' + V u = E u`.
//!
//! Constant pieces of a potential are propagated with the closed-form
//! trigonometric/hyperbolic solutions; linearly interpolated grid cells use a
//! fixed-step RK4 scheme refined by step halving. Propagation towards smaller
//! `x` integrates with negative steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sl2::Mat2;

/// Integration controls shared by every propagation routine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    /// Requested accuracy of each RK4-propagated piece (relative to its scale).
    pub tolerance: f64,
    /// Maximum number of step halvings before giving up.
    pub max_halvings: u32,
    /// Rescale transfer matrices by `det^{-1/2}`.
    pub project_to_sl2: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            tolerance: 1e-10,
            max_halvings: 16,
            project_to_sl2: false,
        }
    }
}

impl StepControl {
    pub fn with_tolerance(tolerance: f64) -> Self {
        StepControl {
            tolerance,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Solution data `(u(x), u'(x))` at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionState {
    pub x: f64,
    pub u: f64,
    pub du: f64,
}

impl SolutionState {
    pub fn new(x: f64, u: f64, du: f64) -> Self {
        SolutionState { x, u, du }
    }

    pub fn vector(&self) -> [f64; 2] {
        [self.u, self.du]
    }

    pub fn norm(&self) -> f64 {
        self.u.hypot(self.du)
    }

    /// Pruefer angle `arg(u' + i u)` in `(-pi, pi]`.
    pub fn prufer_angle(&self) -> f64 {
        self.u.atan2(self.du)
    }
}

/// Real potential on an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialSpec", into = "PotentialSpec")]
pub struct Potential {
    repr: Repr,
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Constant(f64),
    /// `values[i]` holds on `[breakpoints[i], breakpoints[i + 1])`.
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// Linear interpolation between samples.
    Grid { x: Vec<f64>, v: Vec<f64> },
}

/// JSON layout of a potential.
///
/// ```json
/// {"kind": "constant", "value": 0.0}
/// {"kind": "piecewise", "breakpoints": [0.0, 1.0, 2.5], "values": [0.0, -3.0]}
/// {"kind": "grid", "x": [0.0, 0.5, 1.0], "v": [1.0, 0.0, 1.0]}
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant { value: f64 },
    Piecewise { breakpoints: Vec<f64>, values: Vec<f64> },
    Grid { x: Vec<f64>, v: Vec<f64> },
}

impl TryFrom<PotentialSpec> for Potential {
    type Error = Error;

    fn try_from(spec: PotentialSpec) -> Result<Self> {
        match spec {
            PotentialSpec::Constant { value } => Potential::constant(value),
            PotentialSpec::Piecewise {
                breakpoints,
                values,
            } => Potential::piecewise(breakpoints, values),
            PotentialSpec::Grid { x, v } => Potential::grid(x, v),
        }
    }
}

impl From<Potential> for PotentialSpec {
    fn from(p: Potential) -> Self {
        match p.repr {
            Repr::Constant(value) => PotentialSpec::Constant { value },
            Repr::Piecewise {
                breakpoints,
                values,
            } => PotentialSpec::Piecewise {
                breakpoints,
                values,
            },
            Repr::Grid { x, v } => PotentialSpec::Grid { x, v },
        }
    }
}

fn check_increasing(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidPotential(format!("{what} must be finite")));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidPotential(format!(
            "{what} must be strictly increasing"
        )));
    }
    Ok(())
}

fn check_finite(vs: &[f64]) -> Result<()> {
    if vs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPotential("values must be finite".into()));
    }
    Ok(())
}

/// One stretch of the potential between consecutive nodes, oriented from
/// `start` to `end` (either direction).
#[derive(Clone, Copy, Debug)]
struct Piece {
    start: f64,
    end: f64,
    shape: Shape,
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    Constant(f64),
    Linear { x0: f64, v0: f64, x1: f64, v1: f64 },
}

impl Shape {
    fn value(&self, x: f64) -> f64 {
        match *self {
            Shape::Constant(v) => v,
            Shape::Linear { x0, v0, x1, v1 } => v0 + (v1 - v0) * (x - x0) / (x1 - x0),
        }
    }

    fn max_abs_shift(&self, energy: f64) -> f64 {
        match *self {
            Shape::Constant(v) => (energy - v).abs(),
            Shape::Linear { v0, v1, .. } => (energy - v0).abs().max((energy - v1).abs()),
        }
    }
}

impl Potential {
    pub fn constant(value: f64) -> Result<Self> {
        check_finite(&[value])?;
        Ok(Potential {
            repr: Repr::Constant(value),
        })
    }

    pub fn zero() -> Self {
        Potential {
            repr: Repr::Constant(0.0),
        }
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidPotential(format!(
                "piecewise potential needs n + 1 breakpoints for n values (got {} and {})",
                breakpoints.len(),
                values.len()
            )));
        }
        check_increasing(&breakpoints, "breakpoints")?;
        check_finite(&values)?;
        Ok(Potential {
            repr: Repr::Piecewise {
                breakpoints,
                values,
            },
        })
    }

    pub fn grid(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != v.len() {
            return Err(Error::InvalidPotential(format!(
                "grid potential needs matching x and v with at least two samples (got {} and {})",
                x.len(),
                v.len()
            )));
        }
        check_increasing(&x, "grid nodes")?;
        check_finite(&v)?;
        Ok(Potential {
            repr: Repr::Grid { x, v },
        })
    }

    /// Closed domain `[lo, hi]`; unbounded for constant potentials.
    pub fn domain(&self) -> (f64, f64) {
        match &self.repr {
            Repr::Constant(_) => (f64::NEG_INFINITY, f64::INFINITY),
            Repr::Piecewise { breakpoints, .. } => {
                (breakpoints[0], breakpoints[breakpoints.len() - 1])
            }
            Repr::Grid { x, .. } => (x[0], x[x.len() - 1]),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.domain();
        x >= lo && x <= hi
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::DomainError { x, lo, hi });
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match &self.repr {
            Repr::Constant(v) => *v,
            Repr::Piecewise {
                breakpoints,
                values,
            } => {
                let i = breakpoints.partition_point(|&b| b <= x);
                values[i.saturating_sub(1).min(values.len() - 1)]
            }
            Repr::Grid { x: xs, v } => {
                let i = xs.partition_point(|&b| b <= x).clamp(1, xs.len() - 1);
                Shape::Linear {
                    x0: xs[i - 1],
                    v0: v[i - 1],
                    x1: xs[i],
                    v1: v[i],
                }
                .value(x)
            }
        })
    }

    /// Largest `|E - V|` over `[lo, hi]`.
    pub fn max_abs_shift(&self, energy: f64, lo: f64, hi: f64) -> f64 {
        self.pieces(lo, hi)
            .iter()
            .map(|p| p.shape.max_abs_shift(energy))
            .fold(0.0, f64::max)
    }

    /// True when every piece is constant, so propagation is exact.
    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self.repr, Repr::Grid { .. })
    }

    /// Nodes of the representation strictly inside `(lo, hi)`.
    fn interior_nodes(&self, lo: f64, hi: f64) -> &[f64] {
        let nodes: &[f64] = match &self.repr {
            Repr::Constant(_) => &[],
            Repr::Piecewise { breakpoints, .. } => breakpoints,
            Repr::Grid { x, .. } => x,
        };
        let first = nodes.partition_point(|&b| b <= lo);
        let last = nodes.partition_point(|&b| b < hi);
        &nodes[first..last.max(first)]
    }

    fn shape_on(&self, lo: f64, hi: f64) -> Shape {
        let mid = 0.5 * (lo + hi);
        match &self.repr {
            Repr::Constant(v) => Shape::Constant(*v),
            Repr::Piecewise {
                breakpoints,
                values,
            } => {
                let i = breakpoints.partition_point(|&b| b <= mid);
                Shape::Constant(values[i.saturating_sub(1).min(values.len() - 1)])
            }
            Repr::Grid { x, v } => {
                let i = x.partition_point(|&b| b <= mid).clamp(1, x.len() - 1);
                Shape::Linear {
                    x0: x[i - 1],
                    v0: v[i - 1],
                    x1: x[i],
                    v1: v[i],
                }
            }
        }
    }

    /// Pieces covering the path from `from` to `to`, in travel order.
    fn pieces(&self, from: f64, to: f64) -> Vec<Piece> {
        let (lo, hi) = if from <= to { (from, to) } else { (to, from) };
        if lo == hi {
            return Vec::new();
        }
        let mut cuts = Vec::with_capacity(8);
        cuts.push(lo);
        cuts.extend_from_slice(self.interior_nodes(lo, hi));
        cuts.push(hi);
        let mut pieces: Vec<Piece> = cuts
            .windows(2)
            .map(|w| Piece {
                start: w[0],
                end: w[1],
                shape: self.shape_on(w[0], w[1]),
            })
            .collect();
        if from > to {
            pieces.reverse();
            for p in &mut pieces {
                std::mem::swap(&mut p.start, &mut p.end);
            }
        }
        pieces
    }
}

/// Exact transfer matrix across `delta` for constant `E - V = q`:
/// `[[c, s], [-q s, c]]` with `c = cos(k delta)`, `s = sin(k delta) / k`
/// (hyperbolic functions for `q < 0`).
pub fn constant_transfer(q: f64, delta: f64) -> Mat2 {
    let (c, s) = if q > 0.0 {
        let k = q.sqrt();
        let (sn, cs) = (k * delta).sin_cos();
        (cs, sn / k)
    } else if q < 0.0 {
        let kappa = (-q).sqrt();
        let t = kappa * delta;
        (t.cosh(), t.sinh() / kappa)
    } else {
        (1.0, delta)
    };
    Mat2::general(c, s, -q * s, c)
}

fn rk4_rhs(shape: &Shape, energy: f64, x: f64, y: [f64; 2]) -> [f64; 2] {
    [y[1], (shape.value(x) - energy) * y[0]]
}

fn rk4_sweep(piece: &Piece, energy: f64, steps: usize, vectors: &mut [[f64; 2]]) {
    let h = (piece.end - piece.start) / steps as f64;
    for y in vectors.iter_mut() {
        let mut x = piece.start;
        for i in 0..steps {
            let k1 = rk4_rhs(&piece.shape, energy, x, *y);
            let y2 = [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]];
            let k2 = rk4_rhs(&piece.shape, energy, x + 0.5 * h, y2);
            let y3 = [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]];
            let k3 = rk4_rhs(&piece.shape, energy, x + 0.5 * h, y3);
            let y4 = [y[0] + h * k3[0], y[1] + h * k3[1]];
            let k4 = rk4_rhs(&piece.shape, energy, x + h, y4);
            y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            x = piece.start + (i + 1) as f64 * h;
        }
    }
}

/// RK4 across one piece, halving the step until two successive resolutions agree.
fn rk4_piece(
    piece: &Piece,
    energy: f64,
    control: &StepControl,
    vectors: &mut [[f64; 2]],
) -> Result<()> {
    let len = (piece.end - piece.start).abs();
    let stiffness = piece.shape.max_abs_shift(energy).max(1.0).sqrt();
    let h0 = control.tolerance.powf(0.25).min(0.5 / stiffness);
    let mut steps = (len / h0).ceil().max(1.0) as usize;

    let mut coarse = vectors.to_vec();
    rk4_sweep(piece, energy, steps, &mut coarse);
    for _ in 0..=control.max_halvings {
        steps *= 2;
        let mut fine = vectors.to_vec();
        rk4_sweep(piece, energy, steps, &mut fine);
        let scale = fine
            .iter()
            .flat_map(|v| v.iter())
            .fold(1.0f64, |m, c| m.max(c.abs()));
        let diff = fine
            .iter()
            .zip(&coarse)
            .flat_map(|(f, c)| [(f[0] - c[0]).abs(), (f[1] - c[1]).abs()])
            .fold(0.0f64, f64::max);
        if !diff.is_finite() {
            break;
        }
        if diff <= control.tolerance * scale {
            vectors.copy_from_slice(&fine);
            return Ok(());
        }
        coarse = fine;
    }
    Err(Error::IntegrationFailure {
        x: piece.end,
        reason: format!(
            "step halving did not reach tolerance {:e} after {} refinements",
            control.tolerance, control.max_halvings
        ),
    })
}

fn propagate_vectors(
    potential: &Potential,
    from: f64,
    to: f64,
    energy: f64,
    control: &StepControl,
    vectors: &mut [[f64; 2]],
) -> Result<()> {
    for piece in potential.pieces(from, to) {
        match piece.shape {
            Shape::Constant(v) => {
                let m = constant_transfer(energy - v, piece.end - piece.start);
                for y in vectors.iter_mut() {
                    *y = m.apply(*y);
                }
            }
            Shape::Linear { .. } => rk4_piece(&piece, energy, control, vectors)?,
        }
        if vectors.iter().any(|y| !(y[0].is_finite() && y[1].is_finite())) {
            return Err(Error::IntegrationFailure {
                x: piece.end,
                reason: "solution overflowed".into(),
            });
        }
    }
    Ok(())
}

/// Transfer matrix together with its determinant drift `|det - 1|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub matrix: Mat2,
    pub det_drift: f64,
}

/// `M(x, y; E)` with columns `(u_N, u_N')(x)` and `(u_D, u_D')(x)`, the
/// solutions with data `(1, 0)` and `(0, 1)` at `y`.
pub fn transfer(
    potential: &Potential,
    x: f64,
    y: f64,
    energy: f64,
    control: &StepControl,
) -> Result<Transfer> {
    control.validate()?;
    potential.check_domain(x)?;
    potential.check_domain(y)?;
    let mut cols = [[1.0, 0.0], [0.0, 1.0]];
    propagate_vectors(potential, y, x, energy, control, &mut cols)?;
    let mut matrix = Mat2::general(cols[0][0], cols[1][0], cols[0][1], cols[1][1]);
    let det_drift = (matrix.det() - 1.0).abs();
    if control.project_to_sl2 && matrix.det() > 0.0 {
        matrix = matrix.project_to_sl2();
    }
    Ok(Transfer { matrix, det_drift })
}

pub fn transfer_matrix(
    potential: &Potential,
    x: f64,
    y: f64,
    energy: f64,
    control: &StepControl,
) -> Result<Mat2> {
    transfer(potential, x, y, energy, control).map(|t| t.matrix)
}

/// Carry one solution from `state.x` to `x_target`.
pub fn propagate_state(
    potential: &Potential,
    state: SolutionState,
    x_target: f64,
    energy: f64,
    control: &StepControl,
) -> Result<SolutionState> {
    control.validate()?;
    potential.check_domain(state.x)?;
    potential.check_domain(x_target)?;
    let mut v = [state.vector()];
    propagate_vectors(potential, state.x, x_target, energy, control, &mut v)?;
    Ok(SolutionState::new(x_target, v[0][0], v[0][1]))
}
