use nodalquad_core::analysis::{
    run_convergence_study, scalar_interpolation_rates, BrinkmanRow, ScalarCase, ScalarRow, StudyConfig, StudyRows,
};
use nodalquad_core::assembly::{BrinkmanParams, FourthOrderParams};
use nodalquad_core::exec::{NoClock, Sequential};
use nodalquad_core::mesh::MeshFamily;

fn config(rows: StudyRows, ns: Vec<usize>) -> StudyConfig {
    StudyConfig { rows, family: MeshFamily::Rectangular, ns, quad_order: 4, error_quad_order: 6, frequency: 1.0 }
}

#[test]
fn coarse_scalar_errors_match_reference_values() {
    let rows = StudyRows::Scalar(vec![ScalarRow { label: "1".into(), params: FourthOrderParams::perturbation(1.0) }]);
    let report = run_convergence_study(&config(rows, vec![4, 8]), &Sequential, &NoClock).unwrap();
    let e = report.rows[0].errors(0);
    for (got, want) in e.iter().zip([2.913, 1.315]) {
        assert!((got - want).abs() / want < 0.02, "{got} vs {want}");
    }
}

#[test]
fn coarse_darcy_pressure_halves() {
    let rows = StudyRows::Brinkman(vec![BrinkmanRow {
        label: "darcy".into(),
        params: BrinkmanParams { nu: 0.0, alpha: 1.0 },
    }]);
    let report = run_convergence_study(&config(rows, vec![4, 8, 16]), &Sequential, &NoClock).unwrap();
    let p = report.rows[0].errors(1);
    for (got, want) in p.iter().zip([1.586e-1, 7.995e-2, 4.005e-2]) {
        assert!((got - want).abs() / want < 0.02, "{got} vs {want}");
    }
    assert!((report.rows[0].orders[1].last - 1.0).abs() < 0.02);
}

#[test]
fn interpolation_error_decays() {
    let ns = [4, 8, 16];
    let e = scalar_interpolation_rates(MeshFamily::Rectangular, &ns, &ScalarCase::new(1.0), 6, &Sequential).unwrap();
    for w in e.windows(2) {
        assert!(w[1].h2 < 0.6 * w[0].h2 && w[1].h1 < 0.35 * w[0].h1);
    }
}

#[test]
fn invalid_configurations_are_reported() {
    let rows = StudyRows::Scalar(vec![]);
    assert!(run_convergence_study(&config(rows, vec![4]), &Sequential, &NoClock).is_err());
    let rows = StudyRows::Scalar(vec![ScalarRow { label: "x".into(), params: FourthOrderParams { hess: 0.0, grad: 0.0 } }]);
    assert!(run_convergence_study(&config(rows, vec![4]), &Sequential, &NoClock).is_err());
    let rows = StudyRows::Scalar(vec![ScalarRow { label: "x".into(), params: FourthOrderParams::biharmonic() }]);
    assert!(run_convergence_study(&config(rows, vec![1]), &Sequential, &NoClock).is_err());
}
