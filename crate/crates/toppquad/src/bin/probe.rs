// Scratch driver for solver experiments; not part of the public surface.
use std::sync::Arc;

use nalgebra::Vector3;
use toppquad::nlp::SolverOptions;
use toppquad::path::{build_grid, fit_min_derivative, to_geometric, MinimizeOrder, WaypointSet};
use toppquad::quad::QuadParams;
use toppquad::reparam::initial_guess_from_seed;
use toppquad::topp::{solve_on_grid, validate_solution, ToppOptions};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(80);
    let verbosity: u8 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let params = QuadParams::crazyflie();
    let wps = WaypointSet::new(vec![Vector3::zeros(), Vector3::new(5.0, 0.0, 0.0)]).unwrap();
    let path = Arc::new(to_geometric(
        fit_min_derivative(&wps, MinimizeOrder::Snap, 1.0).unwrap(),
    ));
    let opts = ToppOptions {
        n_grid: n,
        v_max: Some(5.0),
        solver: SolverOptions {
            max_iterations: 40_000,
            max_inner: 1500,
            verbosity,
            ..SolverOptions::default()
        },
        ..ToppOptions::default()
    };
    let grid = build_grid(path.clone(), opts.n_grid);
    let guess = initial_guess_from_seed(&grid, &params).unwrap();
    let t0 = std::time::Instant::now();
    match solve_on_grid(grid, &params, &opts, &guess) {
        Ok(sol) => {
            let report = validate_solution(&sol, &params, &opts);
            println!(
                "OK time {:.4} s  (seed {:.1})  iters {}  wall {:.2?}  pass {}  max_u {:.4}",
                sol.total_time,
                sol.grid.s_end(),
                sol.report.iterations,
                t0.elapsed(),
                report.pass,
                sol.max_motor_thrust()
            );
            for f in &report.families {
                println!("  {:>14}: {:.3e}", f.family, f.max_residual);
            }
        }
        Err(e) => println!("FAIL after {:.2?}: {e}", t0.elapsed()),
    }
}
