#![allow(dead_code)]

use wtstab_core::field::{Field2D, Grid2D};
use wtstab_core::model::{real_ginzburg_landau, ReactionDiffusionSystem};
use wtstab_core::sim2d::{make_perturbation, PerturbationSpec};
use wtstab_core::wavetrain::{closed_form_lambda_omega, solve_profile, ProfileGuess, WaveTrain};

/// Real GL at q² = 0.2, Newton-polished.
pub fn gl_train() -> (ReactionDiffusionSystem, WaveTrain) {
    let sys = real_ginzburg_landau();
    let closed = closed_form_lambda_omega(&sys, 0.2f64.sqrt(), 32).unwrap();
    let guess = ProfileGuess {
        profile: closed.profile.clone(),
        omega: closed.omega,
    };
    let wt = solve_profile(&sys, closed.k, &guess, 32, 1e-12).unwrap();
    (sys, wt)
}

pub fn small_grid() -> Grid2D {
    Grid2D::new(4.0, 32.0, 64, 64).unwrap()
}

pub fn bump(grid: Grid2D, wt: &WaveTrain, e0: f64) -> Field2D {
    let spec = PerturbationSpec {
        e0,
        m0: 0.05,
        m0_y: Some(2.0),
        ..Default::default()
    };
    make_perturbation(&spec, grid, wt, None).unwrap().field
}

/// `out(ζ, y) = f(ζ, y − s·Δy)`.
pub fn roll_y(f: &Field2D, s: usize) -> Field2D {
    let g = f.grid;
    let mut out = f.clone();
    for i in 0..g.nx {
        for j in 0..g.ny {
            let src = (j + g.ny - s % g.ny) % g.ny;
            out.at_mut(i, j).copy_from_slice(f.at(i, src));
        }
    }
    out
}
