//! A full operator: interval, potential, point interactions and separated
//! boundary conditions.
//!
//! Boundary conditions use the convention `f(a) cos d - f'(a) sin d = 0`, so
//! the admissible data at `a` is `(sin d, cos d)` and its projective angle is
//! `d` itself. The opposite sign convention corresponds to `d -> -d mod pi`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sl2::{IwasawaParams, Mat2, ProjPoint};
use crate::transfer::{propagate_state, Potential, SolutionState, StepControl};

/// Jump `(f, f')(x+) = A (f, f')(x-)` at an interior point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InteractionSpec", into = "InteractionSpec")]
pub struct PointInteraction {
    pub x: f64,
    pub params: IwasawaParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InteractionSpec {
    x: f64,
    alpha: f64,
    r: f64,
    theta: f64,
}

impl TryFrom<InteractionSpec> for PointInteraction {
    type Error = Error;

    fn try_from(s: InteractionSpec) -> Result<Self> {
        Ok(PointInteraction {
            x: s.x,
            params: IwasawaParams::new(s.alpha, s.r, s.theta)?,
        })
    }
}

impl From<PointInteraction> for InteractionSpec {
    fn from(p: PointInteraction) -> Self {
        InteractionSpec {
            x: p.x,
            alpha: p.params.alpha(),
            r: p.params.r(),
            theta: p.params.theta(),
        }
    }
}

impl PointInteraction {
    pub fn new(x: f64, params: IwasawaParams) -> Self {
        PointInteraction { x, params }
    }

    pub fn matrix(&self) -> Mat2 {
        self.params.matrix()
    }
}

/// `-u'' + V u` on `[a, b]` with jumps at the interaction points and boundary
/// angles `bc_left`, `bc_right`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemSpec", into = "ProblemSpec")]
pub struct Problem {
    a: f64,
    b: f64,
    potential: Potential,
    interactions: Vec<PointInteraction>,
    bc_left: ProjPoint,
    bc_right: ProjPoint,
}

/// JSON layout of a problem; angles in radians.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub a: f64,
    pub b: f64,
    pub potential: Potential,
    #[serde(default)]
    pub interactions: Vec<PointInteraction>,
    pub bc_left: f64,
    pub bc_right: f64,
}

impl TryFrom<ProblemSpec> for Problem {
    type Error = Error;

    fn try_from(s: ProblemSpec) -> Result<Self> {
        Problem::new(
            s.a,
            s.b,
            s.potential,
            s.interactions,
            ProjPoint::from_angle(s.bc_left),
            ProjPoint::from_angle(s.bc_right),
        )
    }
}

impl From<Problem> for ProblemSpec {
    fn from(p: Problem) -> Self {
        ProblemSpec {
            a: p.a,
            b: p.b,
            potential: p.potential,
            interactions: p.interactions,
            bc_left: p.bc_left.angle(),
            bc_right: p.bc_right.angle(),
        }
    }
}

/// Solution data on both sides of one interaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpRecord {
    pub site: usize,
    pub left: SolutionState,
    pub right: SolutionState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    /// Unit-norm state at `b`.
    pub final_state: SolutionState,
    /// Natural log of the norm removed by renormalization; the unscaled state
    /// is `exp(log_scale) * final_state`.
    pub log_scale: f64,
    pub jumps: Vec<JumpRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PruferSample {
    pub x: f64,
    /// Continuous lift of `arg(u' + i u)`.
    pub phi: f64,
    /// Unit-norm solution data at `x`, oriented consistently with `phi`.
    pub state: SolutionState,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PruferJump {
    pub site: usize,
    pub x: f64,
    pub phi_left: f64,
    pub phi_right: f64,
}

/// Pruefer lift sampled over every smooth piece, with the jumps between them.
#[derive(Clone, Debug, PartialEq)]
pub struct PruferTrace {
    pub pieces: Vec<Vec<PruferSample>>,
    pub jumps: Vec<PruferJump>,
}

impl PruferTrace {
    pub fn samples(&self) -> impl Iterator<Item = &PruferSample> {
        self.pieces.iter().flatten()
    }

    pub fn last(&self) -> &PruferSample {
        self.pieces
            .last()
            .and_then(|p| p.last())
            .expect("trace has at least one sample")
    }

    /// Consecutive sample pairs inside smooth pieces where the lift passes a
    /// multiple of pi upwards, with that multiple `k` (the zero is at `phi = k pi`).
    pub fn zero_brackets(&self) -> Vec<(PruferSample, PruferSample, i64)> {
        let mut out = Vec::new();
        for piece in &self.pieces {
            for w in piece.windows(2) {
                let k0 = (w[0].phi / PI).floor() as i64;
                let k1 = (w[1].phi / PI).floor() as i64;
                if k1 > k0 {
                    out.push((w[0], w[1], k1));
                }
            }
        }
        out
    }
}

/// Wrap into `(-pi, pi]`.
fn wrap_pi(delta: f64) -> f64 {
    let w = (delta + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Advance a lifted angle to the direction of `state`, assuming the true
/// change is less than pi in magnitude.
pub(crate) fn advance_lift(phi: f64, state: &SolutionState) -> f64 {
    phi + wrap_pi(state.prufer_angle() - phi)
}

fn normalized(s: SolutionState) -> (SolutionState, f64) {
    let n = s.norm();
    (SolutionState::new(s.x, s.u / n, s.du / n), n)
}

/// Lift of `v -> A v` through the Iwasawa factors: `E_theta` turns the
/// vector angle by exactly `-theta`, while `H_r` and `P_alpha` each move it by
/// less than pi/2 and are lifted by the short displacement. The result is a
/// continuous increasing lift of the circle map, and the returned unit state
/// has vector angle equal to the new lift mod 2 pi.
pub fn jump_lift(params: &IwasawaParams, phi: f64, state: SolutionState) -> (f64, SolutionState) {
    let v0 = Mat2::rotation(params.theta()).apply(state.vector());
    let mut phi = phi - params.theta();
    let mut prev = v0[0].atan2(v0[1]);
    let v1 = Mat2::general(params.r(), 0.0, 0.0, 1.0 / params.r()).apply(v0);
    let v2 = Mat2::shear(params.alpha()).apply(v1);
    for v in [v1, v2] {
        let a = v[0].atan2(v[1]);
        phi += wrap_pi(a - prev);
        prev = a;
    }
    let (right, _) = normalized(SolutionState::new(state.x, v2[0], v2[1]));
    (phi, right)
}

impl Problem {
    pub fn new(
        a: f64,
        b: f64,
        potential: Potential,
        mut interactions: Vec<PointInteraction>,
        bc_left: ProjPoint,
        bc_right: ProjPoint,
    ) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidProblem(
                "endpoints must be finite (regular endpoints only)".into(),
            ));
        }
        if a >= b {
            return Err(Error::InvalidProblem(format!(
                "need a < b, got [{a}, {b}]"
            )));
        }
        potential.check_domain(a)?;
        potential.check_domain(b)?;
        interactions.sort_by(|p, q| p.x.total_cmp(&q.x));
        for p in &interactions {
            if !(p.x > a && p.x < b) {
                return Err(Error::InvalidProblem(format!(
                    "interaction at x = {} is not inside ({a}, {b})",
                    p.x
                )));
            }
        }
        if interactions.windows(2).any(|w| w[0].x >= w[1].x) {
            return Err(Error::InvalidProblem(
                "interaction locations must be distinct".into(),
            ));
        }
        Ok(Problem {
            a,
            b,
            potential,
            interactions,
            bc_left,
            bc_right,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn interactions(&self) -> &[PointInteraction] {
        &self.interactions
    }

    pub fn bc_left(&self) -> ProjPoint {
        self.bc_left
    }

    pub fn bc_right(&self) -> ProjPoint {
        self.bc_right
    }

    pub fn with_bc_right(&self, bc_right: ProjPoint) -> Problem {
        Problem {
            bc_right,
            ..self.clone()
        }
    }

    pub fn with_interactions(&self, interactions: Vec<PointInteraction>) -> Result<Problem> {
        Problem::new(
            self.a,
            self.b,
            self.potential.clone(),
            interactions,
            self.bc_left,
            self.bc_right,
        )
    }

    pub fn without_interactions(&self) -> Problem {
        Problem {
            interactions: Vec::new(),
            ..self.clone()
        }
    }

    /// Replace the parameters of one site, keeping its location.
    pub fn with_site_params(&self, site: usize, params: IwasawaParams) -> Result<Problem> {
        let mut out = self.clone();
        out.site_mut(site)?.params = params;
        Ok(out)
    }

    /// Overwrite the parameters of every site in place.
    pub(crate) fn set_all_params(&mut self, params: impl IntoIterator<Item = IwasawaParams>) {
        for (site, p) in self.interactions.iter_mut().zip(params) {
            site.params = p;
        }
    }

    fn site_mut(&mut self, site: usize) -> Result<&mut PointInteraction> {
        let n = self.interactions.len();
        self.interactions.get_mut(site).ok_or_else(|| {
            Error::InvalidArgument(format!("site index {site} out of range ({n} sites)"))
        })
    }

    /// Unit data `(sin d, cos d)` at `a` satisfying the left boundary condition.
    pub fn initial_state(&self) -> SolutionState {
        let [u, du] = self.bc_left.representative();
        SolutionState::new(self.a, u, du)
    }

    /// Smooth stretches `[x_{n-1}, x_n]` between interactions, with the index of
    /// the interaction that closes each stretch (`None` for the last).
    fn stretches(&self) -> Vec<(f64, f64, Option<usize>)> {
        let mut out = Vec::with_capacity(self.interactions.len() + 1);
        let mut start = self.a;
        for (i, p) in self.interactions.iter().enumerate() {
            out.push((start, p.x, Some(i)));
            start = p.x;
        }
        out.push((start, self.b, None));
        out
    }

    fn check_initial(&self, initial: &SolutionState) -> Result<()> {
        if initial.x != self.a {
            return Err(Error::InvalidArgument(format!(
                "initial state must sit at a = {}, got x = {}",
                self.a, initial.x
            )));
        }
        if initial.norm() == 0.0 || !initial.norm().is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(())
    }

    /// Propagate from `a` to `b`, applying each jump matrix at its site.
    /// The state is rescaled to unit norm after every smooth stretch.
    pub fn propagate_through(
        &self,
        energy: f64,
        initial: SolutionState,
        control: &StepControl,
    ) -> Result<Propagation> {
        self.check_initial(&initial)?;
        let mut log_scale = 0.0;
        let mut jumps = Vec::with_capacity(self.interactions.len());
        let (mut state, n0) = normalized(initial);
        log_scale += n0.ln();
        for (_, end, site) in self.stretches() {
            let s = propagate_state(&self.potential, state, end, energy, control)?;
            let (s, n) = normalized(s);
            log_scale += n.ln();
            state = s;
            if let Some(site) = site {
                let [u, du] = self.interactions[site].matrix().apply(state.vector());
                let right = SolutionState::new(end, u, du);
                jumps.push(JumpRecord {
                    site,
                    left: state,
                    right,
                });
                state = right;
            }
        }
        Ok(Propagation {
            final_state: state,
            log_scale,
            jumps,
        })
    }

    /// Lifted Pruefer angle at `b` of the solution leaving `a` in `bc_left`.
    /// Strictly increasing in `energy`.
    pub fn arrival_lift(&self, energy: f64, control: &StepControl) -> Result<f64> {
        let trace = self.prufer_trace(energy, self.initial_state(), self.b - self.a, control)?;
        Ok(trace.last().phi)
    }

    /// Sample the lifted Pruefer angle at spacing at most `resolution`.
    ///
    /// Sub-steps are additionally capped at `0.5 / max(1, |E - V|)` so the
    /// angle moves by less than half a radian between samples and the lift is
    /// unambiguous. Jumps are lifted factor by factor, see [`jump_lift`], so
    /// the lift at `b` is continuous and increasing in `E`.
    pub fn prufer_trace(
        &self,
        energy: f64,
        initial: SolutionState,
        resolution: f64,
        control: &StepControl,
    ) -> Result<PruferTrace> {
        self.check_initial(&initial)?;
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        let (mut state, _) = normalized(initial);
        let mut phi = state.prufer_angle();
        let mut pieces = Vec::with_capacity(self.interactions.len() + 1);
        let mut jumps = Vec::with_capacity(self.interactions.len());

        for (start, end, site) in self.stretches() {
            let rate = self
                .potential
                .max_abs_shift(energy, start, end)
                .max(1.0);
            let h_max = resolution.min(0.5 / rate);
            let steps = ((end - start) / h_max).ceil().max(1.0) as usize;
            let mut samples = Vec::with_capacity(steps + 1);
            samples.push(PruferSample { x: start, phi, state });
            for i in 1..=steps {
                let x = if i == steps {
                    end
                } else {
                    start + (end - start) * i as f64 / steps as f64
                };
                let next = propagate_state(&self.potential, state, x, energy, control)?;
                let (next, _) = normalized(next);
                phi = advance_lift(phi, &next);
                state = next;
                samples.push(PruferSample { x, phi, state });
            }
            pieces.push(samples);

            if let Some(site) = site {
                let (phi_right, right) = jump_lift(&self.interactions[site].params, phi, state);
                jumps.push(PruferJump {
                    site,
                    x: end,
                    phi_left: phi,
                    phi_right,
                });
                phi = phi_right;
                state = right;
            }
        }
        Ok(PruferTrace { pieces, jumps })
    }
}
