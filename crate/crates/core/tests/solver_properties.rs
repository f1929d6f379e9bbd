use bsde_chaos::brownian::BrownianPath;
use bsde_chaos::chaos::{conditional_expectation_grid, malliavin_derivative_grid};
use bsde_chaos::oracle::linear_bsde_closed_form;
use bsde_chaos::problems::{BarrierCall, BasketPut, CosSup, LinearTest, MartingaleTest};
use bsde_chaos::solver::{
    picard_step, initial_state, solve, solve_with_setup, BsdeProblem, FnProblem, PicardSetup, Quadrature,
    SampleMode, SolverConfig,
};

fn config(samples: usize, order: usize, iterations: usize) -> SolverConfig {
    SolverConfig { samples, order, iterations, seed: 77, ..Default::default() }
}

#[test]
fn martingale_representation() {
    let cfg = config(100_000, 1, 2);
    let setup = PicardSetup::new(&MartingaleTest, &cfg).unwrap();
    let s = solve_with_setup(&MartingaleTest, &cfg, &setup).unwrap();
    // the driver vanishes, so the first iterate is already the fixed point
    assert_eq!(s.trace[0].y0, s.trace[1].y0);
    assert_eq!(s.trace[0].z0, s.trace[1].z0);
    let mut path = BrownianPath::default();
    let (mut ey, mut ez) = (0.0, 0.0);
    for m in 0..s.samples() {
        setup.panel.path_into(m, &mut path);
        for j in 0..=s.steps() {
            ey += (s.y_path(m)[j] - path.at(j, 0)).abs();
            ez += (s.z_at(m, j)[0] - 1.0).abs();
        }
    }
    let n = (s.samples() * (s.steps() + 1)) as f64;
    assert!(ey / n <= 0.05 && ez / n <= 0.05, "{} {}", ey / n, ez / n);
}

#[test]
fn linear_driver() {
    let p = LinearTest { rate: 0.05, terminal_value: 1.0 };
    let s = solve(&p, &config(100_000, 1, 8)).unwrap();
    let exact = linear_bsde_closed_form(0.05, 1.0, 1.0).value;
    assert!((s.y0() - exact).abs() <= 0.01);
    // the right-endpoint scheme's own fixed point
    let discrete = (1.0f64 - 0.05 / 20.0).powi(20);
    assert!((s.y0() - discrete).abs() <= 1e-4, "{} vs {discrete}", s.y0());

    let trap = solve(&p, &SolverConfig { quadrature: Quadrature::Trapezoidal, ..config(100_000, 1, 8) }).unwrap();
    assert!((trap.y0() - exact).abs() < (s.y0() - exact).abs());
}

#[test]
fn zero_driver_step_is_projection_of_terminal() {
    let p = FnProblem::new("sup", 1, |_, _, _| 0.0, |b: &BrownianPath, _| b.component(0).fold(f64::MIN, f64::max));
    let cfg = config(3000, 2, 1);
    let setup = PicardSetup::new(&p, &cfg).unwrap();
    let s = solve_with_setup(&p, &cfg, &setup).unwrap();
    let c = s.coefficients.as_ref().unwrap();
    for m in [0, 1, 1234, 2999] {
        for j in 0..=20 {
            assert_eq!(s.y_path(m)[j], conditional_expectation_grid(c, &setup.panel, m, j).unwrap());
            assert_eq!(s.z_at(m, j)[0], malliavin_derivative_grid(c, &setup.panel, m, j, 0).unwrap());
        }
    }
}

#[test]
fn row_zero_is_the_grid_operator_at_origin() {
    let p = CosSup::default();
    let cfg = config(5000, 2, 4);
    let setup = PicardSetup::new(&p, &cfg).unwrap();
    let s = solve_with_setup(&p, &cfg, &setup).unwrap();
    let c = s.coefficients.as_ref().unwrap();
    for m in [0, 4999] {
        assert_eq!(s.y_path(m)[0], conditional_expectation_grid(c, &setup.panel, m, 0).unwrap());
        assert_eq!(s.z_at(m, 0)[0], malliavin_derivative_grid(c, &setup.panel, m, 0, 0).unwrap());
    }
}

#[test]
fn stepping_by_hand_equals_solve() {
    let p = BarrierCall::benchmark();
    let cfg = config(20_000, 2, 5);
    let setup = PicardSetup::new(&p, &cfg).unwrap();
    let mut state = initial_state(&setup);
    for _ in 0..5 {
        picard_step(&mut state, &p, &setup, &cfg).unwrap();
    }
    let whole = solve(&p, &cfg).unwrap();
    assert_eq!(state.y_values(), whole.y_values());
    assert_eq!(state.z_values(), whole.z_values());
    assert_eq!(state.trace.len(), whole.trace.len());
}

fn assert_stabilizes(name: &str, problem: &dyn BsdeProblem, cfg: &SolverConfig) {
    let s = solve(problem, cfg).unwrap();
    let y: Vec<f64> = s.trace.iter().map(|r| r.y0).collect();
    let diffs: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    // diffs[k] compares iterates k + 1 and k + 2; start from q = 3
    for w in diffs[2..].windows(2) {
        assert!(w[1] <= 1.1 * w[0] + 1e-12, "{name}: Y0 trace {y:?}");
    }
}

#[test]
fn picard_iterates_stabilize() {
    assert_stabilizes("cos_sup", &CosSup::default(), &config(100_000, 2, 6));
    assert_stabilizes("barrier_call", &BarrierCall::benchmark(), &config(100_000, 2, 6));
    assert_stabilizes("basket_put", &BasketPut::benchmark(), &config(20_000, 2, 6));
}

#[test]
fn thread_count_does_not_change_results() {
    let p = BasketPut::benchmark();
    let cfg = config(9000, 2, 3);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| solve(&p, &cfg).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.y_values(), four.y_values());
    assert_eq!(one.z_values(), four.z_values());
    assert_eq!(one.trace.iter().map(|r| r.y0).collect::<Vec<_>>(), four.trace.iter().map(|r| r.y0).collect::<Vec<_>>());
}

#[test]
fn fresh_samples_agree_with_same_samples() {
    let p = CosSup::default();
    let same = solve(&p, &config(100_000, 2, 6)).unwrap();
    let fresh = solve(&p, &SolverConfig { sample_mode: SampleMode::Fresh, ..config(100_000, 2, 6) }).unwrap();
    assert!((same.y0() - fresh.y0()).abs() < 0.03, "{} vs {}", same.y0(), fresh.y0());
}
