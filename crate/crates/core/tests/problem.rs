use std::f64::consts::{FRAC_PI_2, PI, TAU};

use pointspec::random::zeros_of_eigenfunction;
use pointspec::{
    eigenvalues_in_range, Execution, IwasawaParams, PointInteraction, Potential, Problem, ProjPoint,
    SearchOptions, StepControl,
};
use proptest::prelude::*;

fn piecewise(len: f64, values: &[f64]) -> Potential {
    let n = values.len();
    let mut edges: Vec<f64> = (0..=n).map(|i| len * i as f64 / n as f64).collect();
    edges[n] = len;
    Potential::piecewise(edges, values.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    /// Sturm oscillation: the n-th eigenfunction has n - 1 interior zeros.
    #[test]
    fn oscillation_count(len in 1.5..4.0f64, values in prop::collection::vec(-2.0..2.0f64, 1..5), bc in 0.0..FRAC_PI_2) {
        let ctl = StepControl::default();
        // u'/u >= 0 at a, Dirichlet at b: no boundary-bound state below the scan
        let p = Problem::new(0.0, len, piecewise(len, &values), vec![], ProjPoint::from_angle(bc), ProjPoint::from_angle(0.0)).unwrap();
        let eigs = eigenvalues_in_range(&p, -30.0, 60.0, 600, &SearchOptions::default(), &ctl, Execution::Sequential).unwrap();
        prop_assume!(!eigs.is_empty());
        for (n, r) in eigs.iter().enumerate() {
            prop_assert!(r.mismatch <= 1e-8);
            let zeros = zeros_of_eigenfunction(&p, r.energy, &ctl).unwrap();
            prop_assert_eq!(zeros.len(), n, "E = {}", r.energy);
        }
    }

    /// Above the potential the Pruefer lift only moves forward inside each piece.
    #[test]
    fn lift_is_monotone(len in 1.0..4.0f64, values in prop::collection::vec(-2.0..2.0f64, 1..5),
                        e in 2.5..40.0f64, x in 0.2..0.8f64, alpha in -3.0..3.0f64, theta in 0.0..PI) {
        let ctl = StepControl::default();
        let site = PointInteraction::new(x * len, IwasawaParams::new(alpha, 1.0, theta).unwrap());
        let p = Problem::new(0.0, len, piecewise(len, &values), vec![site], ProjPoint::from_angle(0.3), ProjPoint::from_angle(0.0)).unwrap();
        let trace = p.prufer_trace(e, p.initial_state(), len / 200.0, &ctl).unwrap();
        for piece in &trace.pieces {
            for w in piece.windows(2) {
                prop_assert!(w[1].phi > w[0].phi);
            }
        }
        prop_assert_eq!(trace.jumps.len(), 1);
    }

    #[test]
    fn json_roundtrip(len in 1.0..4.0f64, values in prop::collection::vec(-2.0..2.0f64, 1..5),
                      x in 0.1..0.9f64, alpha in -3.0..3.0f64, r in 0.1..5.0f64, theta in 0.0..TAU, bc in 0.0..PI) {
        let site = PointInteraction::new(x * len, IwasawaParams::new(alpha, r, theta).unwrap());
        let p = Problem::new(0.0, len, piecewise(len, &values), vec![site], ProjPoint::from_angle(bc), ProjPoint::from_angle(0.0)).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: Problem = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Jumps are lifted continuously, so the arrival angle increases with E.
    #[test]
    fn arrival_lift_increases_with_energy(len in 1.0..4.0f64, values in prop::collection::vec(-2.0..2.0f64, 1..4),
                                          sites in prop::collection::vec((0.05..0.95f64, -4.0..4.0f64, 0.1..6.0f64, 0.0..TAU), 0..4)) {
        let ctl = StepControl::default();
        let mut xs: Vec<f64> = sites.iter().map(|s| s.0 * len).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let inter = xs.iter().zip(&sites)
            .map(|(&x, s)| PointInteraction::new(x, IwasawaParams::new(s.1, s.2, s.3).unwrap()))
            .collect();
        let p = Problem::new(0.0, len, piecewise(len, &values), inter, ProjPoint::from_angle(0.4), ProjPoint::from_angle(0.0)).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..200 {
            let lift = p.arrival_lift(-10.0 + 0.25 * k as f64, &ctl).unwrap();
            prop_assert!(lift > prev);
            prev = lift;
        }
    }
}

/// A Robin end with a surface state far below the rest of the spectrum: the
/// mismatch sweeps through a full turn within a tiny energy window there.
#[test]
fn steep_surface_state_is_found() {
    let ctl = StepControl::default();
    let bc = ProjPoint::from_angle(2.9234037999276197);
    let p = Problem::new(0.0, 1.5, Potential::zero(), vec![], bc, bc).unwrap();
    let eigs = eigenvalues_in_range(&p, -30.0, 60.0, 100, &SearchOptions::default(), &ctl, Execution::Sequential).unwrap();
    let kappa = -1.0 / bc.angle().tan();
    assert!(eigs[0].energy < -19.0, "{:?}", eigs[0]);
    assert!((eigs[0].energy + kappa * kappa).abs() < 1e-3);
    // the surface state is ill-conditioned in the angle, not in the energy
    assert!(eigs[1..].iter().all(|r| r.mismatch <= 1e-8), "{eigs:?}");
}
