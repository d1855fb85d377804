//! Eigenvalue detection by projective shooting and the stability dichotomies
//! for varying one Iwasawa parameter of one interaction.
//!
//! `E` is an eigenvalue when the class of the solution launched from the left
//! boundary condition arrives at `b` in the class `bc_right`. Exact membership
//! cannot be observed in floating point, so every report carries the raw
//! angular mismatch and callers pick the threshold.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::problem::Problem;
use crate::sl2::{alpha_fixed_class, r_fixed_classes, IwasawaParams, ProjPoint};
use crate::transfer::StepControl;

/// Default angular threshold for declaring an eigenvalue.
pub const EIGEN_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenReport {
    pub energy: f64,
    /// Angular distance on RP^1 between the arriving class and `bc_right`, in `[0, pi/2]`.
    pub mismatch: f64,
    /// Same difference, signed and wrapped into `(-pi/2, pi/2]`.
    pub signed_mismatch: f64,
    /// Class of the solution just left of each interaction.
    pub left_limit_classes: Vec<ProjPoint>,
}

impl EigenReport {
    pub fn is_eigenvalue(&self, tolerance: f64) -> bool {
        self.mismatch <= tolerance
    }
}

fn arriving_class(
    problem: &Problem,
    energy: f64,
    control: &StepControl,
) -> Result<(ProjPoint, Vec<ProjPoint>)> {
    let prop = problem.propagate_through(energy, problem.initial_state(), control)?;
    let arriving = ProjPoint::from_angle(prop.final_state.prufer_angle());
    let left = prop
        .jumps
        .iter()
        .map(|j| ProjPoint::from_angle(j.left.prufer_angle()))
        .collect();
    Ok((arriving, left))
}

pub fn eigen_test(problem: &Problem, energy: f64, control: &StepControl) -> Result<EigenReport> {
    let (arriving, left_limit_classes) = arriving_class(problem, energy, control)?;
    let target = problem.bc_right();
    Ok(EigenReport {
        energy,
        mismatch: arriving.distance(&target),
        signed_mismatch: arriving.signed_difference(&target),
        left_limit_classes,
    })
}

/// The unique right boundary angle for which `E` is an eigenvalue.
/// `bc_right` of `problem` is ignored.
pub fn matching_gamma(problem: &Problem, energy: f64, control: &StepControl) -> Result<ProjPoint> {
    arriving_class(problem, energy, control).map(|(c, _)| c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    /// Bisection stops once the bracket is narrower than this.
    pub energy_tolerance: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            energy_tolerance: 1e-10,
        }
    }
}

/// Eigenvalues in `[e_lo, e_hi]`, sorted, each refined to `energy_tolerance`.
///
/// The lifted arrival angle is sampled on `grid` evenly spaced energies; each
/// crossing of a level `bc_right + k pi` between neighbours brackets one
/// eigenvalue, so none is lost between grid points.
pub fn eigenvalues_in_range(
    problem: &Problem,
    e_lo: f64,
    e_hi: f64,
    grid: usize,
    options: &SearchOptions,
    control: &StepControl,
    exec: Execution,
) -> Result<Vec<EigenReport>> {
    if !(e_lo < e_hi) || !e_lo.is_finite() || !e_hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "energy range must satisfy E_lo < E_hi, got [{e_lo}, {e_hi}]"
        )));
    }
    if grid < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid must have at least 2 points, got {grid}"
        )));
    }
    if !(options.energy_tolerance > 0.0) {
        return Err(Error::InvalidArgument(
            "energy tolerance must be positive".into(),
        ));
    }
    let energy_at = |i: usize| {
        if i + 1 == grid {
            e_hi
        } else {
            e_lo + (e_hi - e_lo) * i as f64 / (grid - 1) as f64
        }
    };
    // the lifted arrival angle is continuous and increasing in E, and E is an
    // eigenvalue iff it equals beta + k pi; every crossing inside a cell is seen
    let beta = problem.bc_right().angle();
    let lifts: Vec<f64> = exec
        .map_indexed(grid, |i| problem.arrival_lift(energy_at(i), control))
        .into_iter()
        .collect::<Result<_>>()?;

    let mut brackets = Vec::new();
    for i in 0..grid - 1 {
        let (l0, l1) = (lifts[i], lifts[i + 1]);
        let first = ((l0 - beta) / PI).floor() as i64 + 1;
        let first = if i == 0 && l0 == beta + (first - 1) as f64 * PI {
            first - 1
        } else {
            first
        };
        let mut k = first;
        while beta + k as f64 * PI <= l1 {
            brackets.push((energy_at(i), energy_at(i + 1), beta + k as f64 * PI));
            k += 1;
        }
    }

    exec.map_indexed(brackets.len(), |j| {
        let (lo, hi, level) = brackets[j];
        bisect(problem, lo, hi, level, options.energy_tolerance, control)
    })
    .into_iter()
    .collect()
}

/// Narrow `[lo, hi]` around the energy where the arrival lift reaches `level`.
fn bisect(
    problem: &Problem,
    mut lo: f64,
    mut hi: f64,
    level: f64,
    tolerance: f64,
    control: &StepControl,
) -> Result<EigenReport> {
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if problem.arrival_lift(mid, control)? < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    eigen_test(problem, 0.5 * (lo + hi), control)
}

/// Which Iwasawa parameter of a site is varied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Theta,
    R,
    Alpha,
}

impl Parameter {
    pub const ALL: [Parameter; 3] = [Parameter::Theta, Parameter::R, Parameter::Alpha];

    pub fn name(&self) -> &'static str {
        match self {
            Parameter::Theta => "theta",
            Parameter::R => "r",
            Parameter::Alpha => "alpha",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The eigenvalue survives every value of the parameter.
    AllValues,
    /// The eigenvalue is lost for every other value.
    OnlyOriginal,
    /// The eigenvalue survives exactly the shifts `theta + k pi`.
    PeriodicInTheta,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::AllValues => "all_values",
            Verdict::OnlyOriginal => "only_original",
            Verdict::PeriodicInTheta => "periodic_in_theta",
        }
    }
}

/// Which fixed class the eigenfunction's left limit matched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedClass {
    /// `[(sin theta, cos theta)]`, sent by `E_theta` to `[(0, 1)]`.
    SinCos,
    /// `[(cos theta, -sin theta)]`, sent by `E_theta` to `[(1, 0)]`.
    CosMinusSin,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Retest {
    pub value: f64,
    pub mismatch: f64,
    pub retained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DichotomyVerdict {
    pub site: usize,
    pub energy: f64,
    pub parameter: Parameter,
    pub verdict: Verdict,
    pub left_limit_class: ProjPoint,
    pub matched_class: Option<FixedClass>,
    /// Re-tests at perturbed parameter values.
    pub retests: Vec<Retest>,
    /// For theta: the re-test at `theta + pi`.
    pub period_retest: Option<Retest>,
    /// Whether every re-test agreed with the verdict.
    pub consistent: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DichotomyOptions {
    /// Mismatch threshold for "is an eigenvalue", also used by the re-tests.
    pub eigen_tolerance: f64,
    /// Angular tolerance when comparing the left-limit class to fixed classes.
    pub class_tolerance: f64,
}

impl Default for DichotomyOptions {
    fn default() -> Self {
        DichotomyOptions {
            eigen_tolerance: EIGEN_TOLERANCE,
            class_tolerance: 1e-6,
        }
    }
}

const ALPHA_SHIFTS: [f64; 8] = [-4.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 4.0];
const THETA_SHIFTS: [f64; 8] = [
    -2.0 * FRAC_PI_3,
    -FRAC_PI_2,
    -FRAC_PI_3,
    -FRAC_PI_6,
    FRAC_PI_6,
    FRAC_PI_3,
    FRAC_PI_2,
    2.0 * FRAC_PI_3,
];
const R_FACTORS: [f64; 4] = [0.25, 0.5, 2.0, 4.0];

/// Eight perturbed values of `parameter`: additive for alpha and theta,
/// geometric for r (four fixed factors plus four draws from `[0.1, 10]` kept
/// at least a factor 1.25 away from the original).
pub fn perturbations(params: &IwasawaParams, parameter: Parameter, site: usize) -> Vec<f64> {
    match parameter {
        Parameter::Alpha => ALPHA_SHIFTS.iter().map(|d| params.alpha() + d).collect(),
        Parameter::Theta => THETA_SHIFTS.iter().map(|d| params.theta() + d).collect(),
        Parameter::R => {
            let r = params.r();
            let mut out: Vec<f64> = R_FACTORS.iter().map(|f| r * f).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(0x0d1c_0700 ^ site as u64);
            while out.len() < 8 {
                let cand = rng.random_range(0.1..10.0);
                let ratio = cand / r;
                if !(0.8..=1.25).contains(&ratio) {
                    out.push(cand);
                }
            }
            out
        }
    }
}

fn with_parameter(params: &IwasawaParams, parameter: Parameter, value: f64) -> Result<IwasawaParams> {
    match parameter {
        Parameter::Alpha => params.with_alpha(value),
        Parameter::R => params.with_r(value),
        Parameter::Theta => params.with_theta(value),
    }
}

fn retest(
    problem: &Problem,
    energy: f64,
    site: usize,
    parameter: Parameter,
    value: f64,
    options: &DichotomyOptions,
    control: &StepControl,
) -> Result<Retest> {
    let params = with_parameter(&problem.interactions()[site].params, parameter, value)?;
    let mismatch = eigen_test(&problem.with_site_params(site, params)?, energy, control)?.mismatch;
    Ok(Retest {
        value,
        mismatch,
        retained: mismatch <= options.eigen_tolerance,
    })
}

/// Decide whether the eigenvalue `energy` survives varying `parameter` at `site`.
///
/// The verdict comes from the left-limit class of the eigenfunction at the
/// site: varying alpha keeps the eigenvalue iff that class is
/// `[(cos theta, -sin theta)]`; varying r keeps it iff the class is that one or
/// `[(sin theta, cos theta)]`; theta always gives a pi-periodic answer.
/// The verdict is then cross-checked by direct re-tests at eight perturbed values.
pub fn classify_dichotomy(
    problem: &Problem,
    energy: f64,
    site: usize,
    parameter: Parameter,
    options: &DichotomyOptions,
    control: &StepControl,
) -> Result<DichotomyVerdict> {
    let n = problem.interactions().len();
    if site >= n {
        return Err(Error::InvalidArgument(format!(
            "site index {site} out of range ({n} sites)"
        )));
    }
    let report = eigen_test(problem, energy, control)?;
    if !report.is_eigenvalue(options.eigen_tolerance) {
        return Err(Error::NotAnEigenvalue {
            energy,
            mismatch: report.mismatch,
            tolerance: options.eigen_tolerance,
        });
    }
    let params = problem.interactions()[site].params;
    let class = report.left_limit_classes[site];
    let tol = options.class_tolerance;

    let (sin_cos, cos_minus_sin) = r_fixed_classes(&params);
    let matched_class = if class.approx_eq(&cos_minus_sin, tol) {
        Some(FixedClass::CosMinusSin)
    } else if class.approx_eq(&sin_cos, tol) {
        Some(FixedClass::SinCos)
    } else {
        None
    };

    let verdict = match parameter {
        Parameter::Theta => Verdict::PeriodicInTheta,
        Parameter::R if matched_class.is_some() => Verdict::AllValues,
        Parameter::Alpha if class.approx_eq(&alpha_fixed_class(&params), tol) => Verdict::AllValues,
        _ => Verdict::OnlyOriginal,
    };
    let matched_class = match parameter {
        Parameter::Alpha => matched_class.filter(|c| *c == FixedClass::CosMinusSin),
        _ => matched_class,
    };

    let retests = perturbations(&params, parameter, site)
        .into_iter()
        .map(|v| retest(problem, energy, site, parameter, v, options, control))
        .collect::<Result<Vec<_>>>()?;
    let period_retest = match parameter {
        Parameter::Theta => Some(retest(
            problem,
            energy,
            site,
            parameter,
            params.theta() + PI,
            options,
            control,
        )?),
        _ => None,
    };
    let consistent = match verdict {
        Verdict::AllValues => retests.iter().all(|t| t.retained),
        Verdict::OnlyOriginal => retests.iter().all(|t| !t.retained),
        Verdict::PeriodicInTheta => {
            retests.iter().all(|t| !t.retained) && period_retest.is_some_and(|t| t.retained)
        }
    };

    Ok(DichotomyVerdict {
        site,
        energy,
        parameter,
        verdict,
        left_limit_class: class,
        matched_class,
        retests,
        period_retest,
        consistent,
    })
}

/// Verdicts for theta, r and alpha at one site.
pub fn classify_all(
    problem: &Problem,
    energy: f64,
    site: usize,
    options: &DichotomyOptions,
    control: &StepControl,
) -> Result<Vec<DichotomyVerdict>> {
    Parameter::ALL
        .iter()
        .map(|&p| classify_dichotomy(problem, energy, site, p, options, control))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::PointInteraction;
    use crate::sl2::{iwasawa_decompose, Mat2};
    use crate::transfer::Potential;

    fn ctl() -> StepControl {
        StepControl::default()
    }

    fn dirichlet_box(len: f64) -> Problem {
        let z = ProjPoint::from_angle(0.0);
        Problem::new(0.0, len, Potential::zero(), vec![], z, z).unwrap()
    }

    fn delta(alpha: f64) -> IwasawaParams {
        iwasawa_decompose(&Mat2::general(1.0, 0.0, alpha, 1.0)).unwrap()
    }

    #[test]
    fn sine_is_an_eigenfunction() {
        let p = dirichlet_box(PI);
        assert!(eigen_test(&p, 1.0, &ctl()).unwrap().mismatch <= 1e-8);
        // u = sin(sqrt2 x)/sqrt2, class at pi has angle atan2(sin(sqrt2 pi)/sqrt2, cos(sqrt2 pi))
        let k = 2f64.sqrt();
        let expected = ProjPoint::from_angle(((k * PI).sin() / k).atan2((k * PI).cos()));
        let r = eigen_test(&p, 2.0, &ctl()).unwrap();
        assert!((r.mismatch - expected.distance(&ProjPoint::from_angle(0.0))).abs() < 1e-12);
        assert!(r.mismatch > 0.1);
    }

    #[test]
    fn node_at_the_site_keeps_e4() {
        for &a in &[-5.0, -1.0, 0.0, 1.0, 5.0] {
            let p = dirichlet_box(PI)
                .with_interactions(vec![PointInteraction::new(FRAC_PI_2, delta(a))])
                .unwrap();
            assert!(eigen_test(&p, 4.0, &ctl()).unwrap().mismatch <= 1e-8, "alpha {a}");
        }
    }

    #[test]
    fn matching_gamma_examples() {
        let p = dirichlet_box(FRAC_PI_2);
        let g = matching_gamma(&p, 1.0, &ctl()).unwrap();
        assert!((g.angle() - FRAC_PI_2).abs() < 1e-12);

        let left = ProjPoint::from_angle(0.9);
        let tiny = Problem::new(0.0, 1e-13, Potential::zero(), vec![], left, left).unwrap();
        assert!(matching_gamma(&tiny, 3.0, &ctl()).unwrap().approx_eq(&left, 1e-12));

        let v = Potential::piecewise(vec![0.0, 0.7, 2.0], vec![1.5, -2.0]).unwrap();
        let q = Problem::new(
            0.0,
            2.0,
            v,
            vec![PointInteraction::new(1.1, IwasawaParams::new(0.3, 0.6, 2.0).unwrap())],
            left,
            left,
        )
        .unwrap();
        let g = matching_gamma(&q, 2.7, &ctl()).unwrap();
        assert!(eigen_test(&q.with_bc_right(g), 2.7, &ctl()).unwrap().mismatch <= 1e-12);
    }

    #[test]
    fn particle_in_a_box() {
        let p = dirichlet_box(PI);
        let eigs = eigenvalues_in_range(&p, 0.5, 20.0, 200, &SearchOptions::default(), &ctl(), Execution::Sequential)
            .unwrap();
        let found: Vec<f64> = eigs.iter().map(|r| r.energy).collect();
        assert_eq!(found.len(), 4, "{found:?}");
        for (e, n) in found.iter().zip(1..) {
            assert!((e - (n * n) as f64).abs() < 1e-6);
        }
        let l: f64 = 2.5;
        let q = dirichlet_box(l);
        let eigs = eigenvalues_in_range(&q, 0.1, 30.0, 300, &SearchOptions::default(), &ctl(), Execution::Parallel)
            .unwrap();
        for (r, n) in eigs.iter().zip(1..) {
            let exact = (n as f64 * PI / l).powi(2);
            assert!((r.energy - exact).abs() <= 1e-6 * exact);
        }
    }

    #[test]
    fn search_argument_errors() {
        let p = dirichlet_box(PI);
        let s = SearchOptions::default();
        assert!(eigenvalues_in_range(&p, 2.0, 1.0, 10, &s, &ctl(), Execution::Sequential).is_err());
        assert!(eigenvalues_in_range(&p, 1.0, 2.0, 1, &s, &ctl(), Execution::Sequential).is_err());
    }

    #[test]
    fn not_an_eigenvalue() {
        let p = dirichlet_box(PI)
            .with_interactions(vec![PointInteraction::new(1.0, IwasawaParams::IDENTITY)])
            .unwrap();
        let err = classify_dichotomy(&p, 2.0, 0, Parameter::Alpha, &DichotomyOptions::default(), &ctl());
        assert!(matches!(err, Err(Error::NotAnEigenvalue { .. })));
        let err = classify_dichotomy(&p, 1.0, 3, Parameter::Alpha, &DichotomyOptions::default(), &ctl());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn node_at_delta_site_in_iwasawa_terms() {
        // u(p-) = 0 has class (0, 1); the delta matrix has theta* = atan(a), so
        // neither Iwasawa fixed class contains (0, 1) and varying the Iwasawa
        // alpha (not the delta strength) moves the eigenvalue.
        let p = dirichlet_box(PI)
            .with_interactions(vec![PointInteraction::new(FRAC_PI_2, delta(1.0))])
            .unwrap();
        let opts = DichotomyOptions::default();
        let v = classify_dichotomy(&p, 4.0, 0, Parameter::Alpha, &opts, &ctl()).unwrap();
        assert!(v.left_limit_class.approx_eq(&ProjPoint::from_angle(0.0), 1e-10));
        assert_eq!(v.verdict, Verdict::OnlyOriginal);
        assert!(v.consistent);
    }

    #[test]
    fn identity_site_on_sine() {
        // theta = 0: alpha-fixed class is (1, 0); sin has (u, u') ~ (1, 0) at pi/2.
        let p = dirichlet_box(PI)
            .with_interactions(vec![PointInteraction::new(FRAC_PI_2, IwasawaParams::IDENTITY)])
            .unwrap();
        let opts = DichotomyOptions::default();
        let all = classify_all(&p, 1.0, 0, &opts, &ctl()).unwrap();
        assert_eq!(all[0].verdict, Verdict::PeriodicInTheta);
        assert_eq!(all[1].verdict, Verdict::AllValues);
        assert_eq!(all[1].matched_class, Some(FixedClass::CosMinusSin));
        assert_eq!(all[2].verdict, Verdict::AllValues);
        assert!(all.iter().all(|v| v.consistent), "{all:#?}");

        // off the fixed classes: both r and alpha are rigid
        let q = dirichlet_box(PI)
            .with_interactions(vec![PointInteraction::new(1.0, IwasawaParams::IDENTITY)])
            .unwrap();
        let all = classify_all(&q, 1.0, 0, &opts, &ctl()).unwrap();
        assert_eq!(all[1].verdict, Verdict::OnlyOriginal);
        assert_eq!(all[2].verdict, Verdict::OnlyOriginal);
        assert!(all.iter().all(|v| v.consistent), "{all:#?}");
    }

    #[test]
    fn r_perturbations_are_spread() {
        let p = IwasawaParams::new(0.0, 1.0, 0.0).unwrap();
        let rs = perturbations(&p, Parameter::R, 0);
        assert_eq!(rs.len(), 8);
        assert!(rs.iter().all(|&r| (0.1..=10.0).contains(&r) && !(0.8..=1.25).contains(&r)));
        assert_eq!(rs, perturbations(&p, Parameter::R, 0));
    }
}
