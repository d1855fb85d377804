//! Oscillation of solutions and the construction of interaction sites at which
//! the shear parameter is invisible.
//!
//! Between two consecutive zeros of a solution the Pruefer lift climbs by
//! exactly pi, so every class of RP^1 is visited there. Placing a site where
//! the solution sits in the class `[(cos theta, -sin theta)]` makes the jump
//! `A(alpha, r, theta)` send it to `r (1, 0)` whatever `alpha` is.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{advance_lift, PointInteraction, Problem, PruferSample, PruferTrace};
use crate::sl2::{proj_class, wrap_half_pi, IwasawaParams, ProjPoint};
use crate::spectra::{eigen_test, EIGEN_TOLERANCE};
use crate::transfer::{propagate_state, StepControl};

/// Zeros are refined by bisection to this width.
pub const ZERO_TOLERANCE: f64 = 1e-10;

/// Samples per unit trace; the lift caps the step further where `|E - V|` is large.
const TRACE_SAMPLES: f64 = 1000.0;

/// Lifted Pruefer angle with random access inside the sampled range.
struct Lift<'a> {
    problem: &'a Problem,
    energy: f64,
    control: &'a StepControl,
    trace: PruferTrace,
}

impl<'a> Lift<'a> {
    fn new(problem: &'a Problem, energy: f64, control: &'a StepControl) -> Result<Self> {
        let resolution = (problem.b() - problem.a()) / TRACE_SAMPLES;
        let trace = problem.prufer_trace(energy, problem.initial_state(), resolution, control)?;
        Ok(Lift {
            problem,
            energy,
            control,
            trace,
        })
    }

    /// Lift value carried forward from sample `from` to `x` in the same piece.
    fn phi_from(&self, from: &PruferSample, x: f64) -> Result<f64> {
        if x == from.x {
            return Ok(from.phi);
        }
        let s = propagate_state(self.problem.potential(), from.state, x, self.energy, self.control)?;
        Ok(advance_lift(from.phi, &s))
    }

    /// The sample at or just before `x` within its smooth piece (right limit at sites).
    fn sample_before(&self, x: f64) -> &PruferSample {
        let piece = self
            .trace
            .pieces
            .iter()
            .rev()
            .find(|p| p[0].x <= x)
            .unwrap_or(&self.trace.pieces[0]);
        let i = piece.partition_point(|s| s.x <= x).max(1) - 1;
        &piece[i]
    }

    fn at(&self, x: f64) -> Result<f64> {
        let s = *self.sample_before(x);
        self.phi_from(&s, x)
    }

    /// Zeros strictly inside `(a, b)`.
    fn interior_zeros(&self) -> Result<Vec<f64>> {
        let (a, b) = (self.problem.a(), self.problem.b());
        let edge = 1e-9 * (b - a);
        let mut zeros = Vec::new();
        for (s0, s1, k) in self.trace.zero_brackets() {
            let level = k as f64 * PI;
            let z = if s1.phi == level {
                s1.x
            } else {
                self.bisect(&s0, s1.x, level)?
            };
            if z > a + edge && z < b - edge {
                zeros.push(z);
            }
        }
        Ok(zeros)
    }

    /// Smallest `x` in `[from.x, hi]` (to bisection accuracy) with lift `level`,
    /// given lift(from) < level <= lift(hi).
    fn bisect(&self, from: &PruferSample, hi: f64, level: f64) -> Result<f64> {
        let (mut lo, mut hi) = (from.x, hi);
        while hi - lo > ZERO_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.phi_from(from, mid)? < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn vanishes_at_b(&self) -> bool {
        wrap_half_pi(self.trace.last().phi).abs() <= 1e-8
    }
}

/// Interior zeros of the solution launched from the left boundary condition,
/// in increasing order, each refined to `ZERO_TOLERANCE`.
pub fn zeros_of_eigenfunction(
    problem: &Problem,
    energy: f64,
    control: &StepControl,
) -> Result<Vec<f64>> {
    Lift::new(problem, energy, control)?.interior_zeros()
}

/// A point `x0` in `[t1, t2)` where the solution lies in the class `target`.
///
/// `t1 < t2` must be consecutive zeros of the propagated solution with no
/// interaction between them. The lift rises from `k pi` to `(k + 1) pi` over
/// the gap; `x0` is located by bisection on the lift against `k pi + angle`.
pub fn find_class_point(
    problem: &Problem,
    energy: f64,
    t1: f64,
    t2: f64,
    target: ProjPoint,
    control: &StepControl,
) -> Result<f64> {
    if !(t1 < t2 && t1 >= problem.a() && t2 <= problem.b()) {
        return Err(Error::InvalidArgument(format!(
            "need a <= t1 < t2 <= b, got t1 = {t1}, t2 = {t2}"
        )));
    }
    if problem.interactions().iter().any(|s| s.x > t1 && s.x < t2) {
        return Err(Error::InvalidArgument(format!(
            "an interaction lies inside the zero gap [{t1}, {t2}]"
        )));
    }
    let lift = Lift::new(problem, energy, control)?;
    let phi1 = lift.at(t1)?;
    let k = (phi1 / PI).round();
    if (phi1 - k * PI).abs() > 1e-6 {
        return Err(Error::TargetNotBracketed { t1, t2 });
    }
    if target.angle() == 0.0 {
        return Ok(t1);
    }
    let level = k * PI + target.angle();
    let phi2 = lift.at(t2)?;
    if phi2 < level {
        return Err(Error::TargetNotBracketed { t1, t2 });
    }
    // bisection on the lift, walking samples so each step stays within one sample gap
    let (mut lo, mut hi) = (t1, t2);
    let tol = 1e-13 * t2.abs().max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lift.at(mid)? < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x0 = 0.5 * (lo + hi);
    Ok(if x0 >= t2 { lo } else { x0 })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegenerateOptions {
    /// Build even when `E` is not an eigenvalue of the problem without
    /// interactions; the result then need not have `E` as an eigenvalue at all.
    pub allow_non_eigenvalue: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegenerateConstruction {
    pub problem: Problem,
    /// Zero gap `[t_{i-1}, t_i)` used for each site.
    pub gaps: Vec<(f64, f64)>,
    /// Mismatch of `E` for the problem without interactions.
    pub unperturbed_mismatch: f64,
    /// Mismatch of `E` for the constructed problem with template `alpha = 0`.
    pub residual_mismatch: f64,
}

/// Gap endpoints usable after `cursor`: interior zeros, plus `b` when the
/// solution vanishes there.
fn gap_points(lift: &Lift<'_>) -> Result<Vec<f64>> {
    let mut z = lift.interior_zeros()?;
    if lift.vanishes_at_b() {
        z.push(lift.problem.b());
    }
    Ok(z)
}

/// Place one interaction per consecutive zero gap so that the solution enters
/// site `i` in the class `[(cos theta_i, -sin theta_i)]`.
///
/// Sites get `alpha = 0`, `r = rs[i]`, `theta = thetas[i]`. Whatever alphas are
/// later substituted, the solution after each site is the same, so the
/// mismatch of `E` does not depend on them. When every `theta_i` is a multiple
/// of pi the jumps also preserve the class, and an eigenvalue of the problem
/// without interactions stays one for every alpha sequence.
///
/// Gaps run between consecutive zeros in `(a, b]` (the right endpoint counts
/// when the solution vanishes there), so each site lies strictly inside the
/// interval. Sites are placed left to right on the solution already carrying
/// the earlier jumps.
pub fn construct_degenerate(
    template: &Problem,
    energy: f64,
    thetas: &[f64],
    rs: &[f64],
    options: &DegenerateOptions,
    control: &StepControl,
) -> Result<DegenerateConstruction> {
    if thetas.is_empty() || thetas.len() != rs.len() {
        return Err(Error::InvalidArgument(format!(
            "need matching non-empty thetas and rs (got {} and {})",
            thetas.len(),
            rs.len()
        )));
    }
    let params = thetas
        .iter()
        .zip(rs)
        .map(|(&t, &r)| IwasawaParams::new(0.0, r, t))
        .collect::<Result<Vec<_>>>()?;
    let needed = thetas.len() + 1;
    let base = template.without_interactions();

    let available = gap_points(&Lift::new(&base, energy, control)?)?.len();
    if available < needed {
        return Err(Error::InsufficientOscillation {
            found: available,
            needed,
        });
    }
    let unperturbed_mismatch = eigen_test(&base, energy, control)?.mismatch;
    if unperturbed_mismatch > EIGEN_TOLERANCE && !options.allow_non_eigenvalue {
        return Err(Error::NotUnperturbedEigenvalue {
            energy,
            mismatch: unperturbed_mismatch,
        });
    }

    let mut placed: Vec<PointInteraction> = Vec::with_capacity(params.len());
    let mut gaps = Vec::with_capacity(params.len());
    let mut cursor = base.a();
    for (i, p) in params.iter().enumerate() {
        let current = base.with_interactions(placed.clone())?;
        let lift = Lift::new(&current, energy, control)?;
        let ahead: Vec<f64> = gap_points(&lift)?
            .into_iter()
            .filter(|&z| z > cursor)
            .collect();
        if ahead.len() < 2 {
            return Err(Error::InsufficientOscillation {
                found: i + ahead.len(),
                needed,
            });
        }
        let (t1, t2) = (ahead[0], ahead[1]);
        let (s, c) = p.theta().sin_cos();
        let target = proj_class([c, -s])?;
        let x = find_class_point(&current, energy, t1, t2, target, control)?;
        placed.push(PointInteraction::new(x, *p));
        gaps.push((t1, t2));
        cursor = x;
    }

    let problem = base.with_interactions(placed)?;
    let residual_mismatch = eigen_test(&problem, energy, control)?.mismatch;
    Ok(DegenerateConstruction {
        problem,
        gaps,
        unperturbed_mismatch,
        residual_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::Potential;
    use std::f64::consts::FRAC_PI_2;

    fn ctl() -> StepControl {
        StepControl::default()
    }

    fn free(b: f64) -> Problem {
        let z = ProjPoint::from_angle(0.0);
        Problem::new(0.0, b, Potential::zero(), vec![], z, z).unwrap()
    }

    #[test]
    fn sine_zeros() {
        let z = zeros_of_eigenfunction(&free(4.0 * PI), 1.0, &ctl()).unwrap();
        assert_eq!(z.len(), 3);
        for (zi, k) in z.iter().zip(1..) {
            assert!((zi - k as f64 * PI).abs() < 1e-9);
        }
    }

    #[test]
    fn non_oscillatory_below_zero() {
        assert!(zeros_of_eigenfunction(&free(10.0), -1.0, &ctl()).unwrap().is_empty());
        assert!(zeros_of_eigenfunction(&free(10.0), 0.0, &ctl()).unwrap().is_empty());
    }

    #[test]
    fn class_points_on_sine() {
        let p = free(PI + 0.5);
        let x = find_class_point(&p, 1.0, 0.0, PI, proj_class([1.0, 0.0]).unwrap(), &ctl()).unwrap();
        assert!((x - FRAC_PI_2).abs() < 1e-11);
        let x = find_class_point(&p, 1.0, 0.0, PI, proj_class([0.0, 1.0]).unwrap(), &ctl()).unwrap();
        assert_eq!(x, 0.0);
    }

    #[test]
    fn single_site_on_sine() {
        let c = construct_degenerate(&free(4.0 * PI), 1.0, &[0.0], &[1.0], &DegenerateOptions::default(), &ctl())
            .unwrap();
        let x = c.problem.interactions()[0].x;
        assert!((x - 1.5 * PI).abs() < 1e-9, "{x}");
        assert!((c.gaps[0].0 - PI).abs() < 1e-9 && (c.gaps[0].1 - 2.0 * PI).abs() < 1e-9);
        for &alpha in &[-5.0, -1.0, 0.0, 1.0, 5.0] {
            let params = c.problem.interactions()[0].params.with_alpha(alpha).unwrap();
            let q = c.problem.with_site_params(0, params).unwrap();
            assert!(eigen_test(&q, 1.0, &ctl()).unwrap().mismatch <= 1e-7);
        }
    }

    #[test]
    fn one_site_per_gap() {
        let c = construct_degenerate(
            &free(4.0 * PI),
            1.0,
            &[0.0, 0.0, 0.0],
            &[1.0, 2.0, 0.5],
            &DegenerateOptions::default(),
            &ctl(),
        )
        .unwrap();
        let xs: Vec<f64> = c.problem.interactions().iter().map(|s| s.x).collect();
        for (x, want) in xs.iter().zip([1.5, 2.5, 3.5]) {
            assert!((x - want * PI).abs() < 1e-9, "{xs:?}");
        }
        assert!(c.residual_mismatch < 1e-9);
    }

    #[test]
    fn failure_modes() {
        let opts = DegenerateOptions::default();
        assert!(matches!(
            construct_degenerate(&free(4.0 * PI), 1.1, &[0.0], &[1.0], &opts, &ctl()),
            Err(Error::NotUnperturbedEigenvalue { .. })
        ));
        assert!(matches!(
            construct_degenerate(&free(1.0), 0.01, &[0.0], &[1.0], &opts, &ctl()),
            Err(Error::InsufficientOscillation { found: 0, needed: 2 })
        ));
        assert!(matches!(
            construct_degenerate(&free(4.0 * PI), 1.0, &[0.0; 4], &[1.0; 4], &opts, &ctl()),
            Err(Error::InsufficientOscillation { found: 4, needed: 5 })
        ));
        assert!(construct_degenerate(&free(4.0 * PI), 1.0, &[0.0], &[], &opts, &ctl()).is_err());
    }

    #[test]
    fn nonzero_theta_is_alpha_blind() {
        let opts = DegenerateOptions {
            allow_non_eigenvalue: true,
        };
        let c = construct_degenerate(&free(4.0 * PI), 1.0, &[0.7, 2.0], &[1.3, 0.4], &opts, &ctl()).unwrap();
        let base = c.residual_mismatch;
        for &a in &[-3.0, 0.5, 8.0] {
            let mut q = c.problem.clone();
            for i in 0..2 {
                let p = q.interactions()[i].params.with_alpha(a).unwrap();
                q = q.with_site_params(i, p).unwrap();
            }
            let m = eigen_test(&q, 1.0, &ctl()).unwrap().mismatch;
            assert!((m - base).abs() < 1e-8, "{m} vs {base}");
        }
    }
}
