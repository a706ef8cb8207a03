use wtstab_core::analysis::config::Config;
use wtstab_core::analysis::experiment::build_wavetrain;
use wtstab_core::bloch::compute_dispersion;
use wtstab_core::field::Grid2D;
use wtstab_core::model::lambda_omega_default;
use wtstab_core::wavetrain::{closed_form_lambda_omega, profile_residual, GridProfile};

#[test]
fn configured_wave_trains_solve_the_profile_equation() {
    for q2 in [0.05f64, 0.2, 0.3, 0.6] {
        let cfg = Config::from_toml_str("", &[format!("wavetrain.q2={q2}")]).unwrap();
        let sys = cfg.system().unwrap();
        let wt = build_wavetrain(&cfg, &sys).unwrap();
        assert!(profile_residual(&wt, &sys) < 1e-9, "q²={q2}");
        let mut u = [0.0; 2];
        wt.eval(0.3, 0, &mut u);
        assert!((u[0].hypot(u[1]) - (1.0 - q2).sqrt()).abs() < 1e-9);
    }
}

#[test]
fn lambda_omega_config_builds_rotating_train() {
    let cfg = Config::from_toml_str(
        "[model]\nname = \"lambda_omega\"\n[wavetrain]\nq2 = 0.09\nn_modes = 32\n",
        &[],
    )
    .unwrap();
    let sys = cfg.system().unwrap();
    let wt = build_wavetrain(&cfg, &sys).unwrap();
    let closed = closed_form_lambda_omega(&lambda_omega_default(), 0.3, 32).unwrap();
    assert!((wt.omega - closed.omega).abs() < 1e-9);
    assert!(wt.omega.abs() > 1e-3);
}

#[test]
fn grids_must_be_fft_friendly() {
    assert!(Grid2D::new(4.0, 8.0, 64, 8).is_err());
    assert!(Grid2D::new(4.0, 8.0, 48, 16).is_err());
    assert!(Grid2D::new(0.0, 8.0, 64, 16).is_err());
    let g = Grid2D::new(4.0, 8.0, 64, 16).unwrap();
    assert_eq!(g.points_per_period(), 16);
    let sys = wtstab_core::model::real_ginzburg_landau();
    let wt = closed_form_lambda_omega(&sys, 0.2f64.sqrt(), 32).unwrap();
    let prof = GridProfile::new(&wt, &g);
    // one period later the samples repeat
    assert!((prof.u(3)[0] - prof.u(19)[0]).abs() < 1e-12);
}

#[test]
fn dispersion_is_converged_in_modes() {
    let sys = wtstab_core::model::real_ginzburg_landau();
    let wt = closed_form_lambda_omega(&sys, 0.2f64.sqrt(), 32).unwrap();
    let a = compute_dispersion(&sys, &wt, 16, 1e-3).unwrap();
    let b = compute_dispersion(&sys, &wt, 32, 1e-3).unwrap();
    assert!((a.theta - b.theta).abs() < 1e-10 && (a.d_perp - b.d_perp).abs() < 1e-10);
}
