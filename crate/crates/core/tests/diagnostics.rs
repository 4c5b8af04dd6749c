use kirchhoff::diagnostics::*;
use kirchhoff::ground_state::{build_ground_state, KirchhoffParams};
use kirchhoff::perturbed::grid::{partial, Field3D};
use kirchhoff::perturbed::sphere::AngularRule;
use kirchhoff::perturbed::{Box3D, EpsilonFrame, NewtonOptions, PerturbedSetup};
use kirchhoff::potential::PotentialModel;
use std::sync::OnceLock;

fn params() -> KirchhoffParams {
    KirchhoffParams::new(1.0, 0.01, 3.0).unwrap()
}

fn setup() -> &'static PerturbedSetup {
    static SETUP: OnceLock<PerturbedSetup> = OnceLock::new();
    SETUP.get_or_init(|| {
        let gs = build_ground_state(params()).unwrap();
        PerturbedSetup::new(gs, Box3D::new(8.0, 65).unwrap(), NewtonOptions::default()).unwrap()
    })
}

#[test]
fn moment_vanishes_at_the_origin_and_is_linear_for_m2() {
    let gs = &setup().gs;
    for m in [1.5, 2.0, 3.0, 4.0] {
        for i in 1..=3 {
            assert!(moment_functional(gs, 0.1, [0.0; 3], m, i).unwrap().abs() < 1e-12);
        }
    }
    let y = [0.03, -0.02, 0.01];
    for i in 1..=3 {
        let got = moment_functional(gs, 0.1, y, 2.0, i).unwrap();
        let expected = y[i - 1] * gs.m_u;
        assert!((got - expected).abs() < 1e-9 * gs.m_u, "{got} vs {expected}");
    }
    for m in [1.5, 3.0, 4.0] {
        assert!(moment_functional(gs, 0.1, [0.01, 0.0, 0.0], m, 1).unwrap() > 0.0);
        assert!(moment_functional(gs, 0.1, [-0.01, 0.0, 0.0], m, 1).unwrap() < 0.0);
    }
    assert!(moment_functional(gs, 0.1, y, 1.0, 1).is_err());
}

#[test]
fn pohozaev_is_trivial_for_constant_potential() {
    let frame = EpsilonFrame::new(0.1, [0.0; 3], PotentialModel::constant()).unwrap();
    let (sol, _) = setup().newton(&frame, None).unwrap();
    for i in 1..=3 {
        let r = pohozaev_check(&params(), &sol, None, i, &AngularRule::lebedev26()).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.discrepancy < 1e-6, "{r:?}");
    }
}

#[test]
fn pohozaev_vanishes_by_parity_in_a_symmetric_well() {
    let frame = EpsilonFrame::new(0.2, [0.0; 3], PotentialModel::power_well(2.0, [1.0, 1.0, 1.0])).unwrap();
    let (sol, _) = setup().newton(&frame, None).unwrap();
    let r = pohozaev_check(&params(), &sol, Some(1.2), 1, &AngularRule::product(12)).unwrap();
    assert!(r.lhs.abs() < 1e-10 * r.scale, "{r:?}");
    assert!(r.rhs.abs() < 1e-10 * r.scale, "{r:?}");
    assert!((r.blown_up_radius - 6.0).abs() < 1e-12);
}

#[test]
fn pohozaev_rejects_spheres_outside_the_box() {
    let frame = EpsilonFrame::new(0.2, [0.0; 3], PotentialModel::constant()).unwrap();
    let (sol, _) = setup().newton(&frame, None).unwrap();
    let err = pohozaev_check(&params(), &sol, Some(1.9), 1, &AngularRule::lebedev26()).unwrap_err();
    assert!(matches!(err, DiagnosticsError::SphereOutsideDomain { .. }));
    assert!(pohozaev_check(&params(), &sol, Some(1.0), 4, &AngularRule::lebedev26()).is_err());
}

#[test]
fn default_radius_is_one_of_the_candidates() {
    let frame = EpsilonFrame::new(0.2, [0.0; 3], PotentialModel::power_well(2.0, [1.0, 2.0, 3.0])).unwrap();
    let (sol, _) = setup().newton(&frame, None).unwrap();
    let r = pohozaev_check(&params(), &sol, None, 3, &AngularRule::lebedev26()).unwrap();
    let cands = pohozaev_candidates(&sol);
    assert_eq!(cands.len(), POHOZAEV_CANDIDATES);
    assert!(cands.iter().any(|c| (c - r.blown_up_radius).abs() < 1e-12));
    assert!(cands.iter().all(|&c| c <= max_sphere_radius(&sol)));
}

#[test]
fn identical_solutions_are_detected() {
    let frame = EpsilonFrame::new(0.2, [0.0; 3], PotentialModel::power_well(2.0, [1.0, 1.0, 1.0])).unwrap();
    let (sol, _) = setup().newton(&frame, None).unwrap();
    let err = compare_solutions(&sol, &sol, 1e-14).unwrap_err();
    assert!(matches!(err, DiagnosticsError::IdenticalSolutions { .. }));
}

#[test]
fn one_cell_shift_resembles_a_derivative() {
    let frame = EpsilonFrame::new(0.2, [0.0; 3], PotentialModel::constant()).unwrap();
    let (sol, _) = setup().newton(&frame, None).unwrap();
    let grid = sol.field.grid;
    let h = grid.h();
    let shifted = Field3D::from_fn(grid, |z| sol.field.interpolate([z[0] - h, z[1], z[2]]));
    let other = kirchhoff::perturbed::ReducedSolution { field: shifted, ..sol.clone() };
    let c = compare_solutions(&sol, &other, 1e-14).unwrap();
    let d = partial(&sol.field, 0);
    let cosine = c.xi.dot(&d) / (c.xi.dot(&c.xi) * d.dot(&d)).sqrt();
    assert!(cosine.abs() > 0.95, "cosine {cosine}");
    assert!(c.decays);
    assert!(c.sup_location[0].abs() < 3.0);
}

#[test]
fn symmetric_sweep_stays_centered_and_records_failures() {
    let template = EpsilonFrame::new(0.2, [0.0; 3], PotentialModel::power_well(2.0, [1.0, 1.0, 1.0])).unwrap();
    let (trace, sols) = concentration_sweep(setup(), &template, &[0.2, 0.15], 3).unwrap();
    assert_eq!(sols.len(), 2);
    for row in &trace.rows {
        assert!(row.error.is_none());
        assert!(row.center_ratio.unwrap() < 1e-10);
    }
    assert!(trace.fitted_exponent.is_some());
    assert_eq!(trace.beta_sweep.len(), BETA_SWEEP.len());
    let csv = trace.to_csv();
    assert_eq!(csv.lines().count(), 3);

    let (trace, _) = concentration_sweep(setup(), &template, &[0.7, 0.2], 3).unwrap();
    assert!(trace.rows[0].error.is_some());
    assert!(trace.rows[1].error.is_none());

    assert!(concentration_sweep(setup(), &template, &[0.1, 0.2], 3).is_err());
}
