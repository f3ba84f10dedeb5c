use proptest::prelude::*;
use robust_term::gheat::{gexpectation_terminal, solve_gheat, solve_gheat_with, Grid1D, GridHints, SolveOptions};
use robust_term::VolBand;

fn band() -> VolBand {
    VolBand::new(0.005, 0.02).unwrap()
}

fn small_grid() -> Grid1D {
    Grid1D::new(-0.1, 0.1, 41, 1.0, 1, &band()).unwrap()
}

fn payoff(c: &[f64; 4]) -> impl Fn(f64) -> f64 + '_ {
    move |x: f64| c[0] * x.max(0.0) + c[1] * (x - 0.02).abs() - c[2] * x * x + c[3] * (x * 40.0).sin() * 0.01
}

#[test]
fn positively_homogeneous_payoff_scales_with_sqrt_t() {
    let h = GridHints::default();
    let one = gexpectation_terminal(|x: f64| x.max(0.0), &band(), 1.0, h).unwrap();
    let four = gexpectation_terminal(|x: f64| x.max(0.0), &band(), 4.0, h).unwrap();
    assert!((four - 2.0 * one).abs() <= 0.01 * four, "{four} vs 2 * {one}");
}

#[test]
fn concave_payoff_uses_the_low_volatility() {
    let v = gexpectation_terminal(|x: f64| -x.abs(), &band(), 1.0, GridHints::default()).unwrap();
    let want = -band().lo() * (2.0 / std::f64::consts::PI).sqrt();
    assert!((v - want).abs() <= 0.01 * want.abs(), "{v} vs {want}");
}

#[test]
fn parallel_and_sequential_steps_agree() {
    let b = band();
    let g = Grid1D::new(-0.2, 0.2, 9001, 0.01, 1, &b).unwrap();
    let phi = g.sample(|x| (x * 30.0).sin() + x.abs());
    let run = |execution| {
        solve_gheat_with(&phi, &b, &g, SolveOptions { save_every: 0, execution })
            .unwrap()
            .final_level()
            .u
            .clone()
    };
    assert_eq!(
        run(robust_term::Execution::Sequential),
        run(robust_term::Execution::Parallel)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn comparison_principle(c in prop::array::uniform4(-1.0f64..1.0), bump in prop::collection::vec(0.0f64..0.01, 41)) {
        let g = small_grid();
        let low = g.sample(payoff(&c));
        let high: Vec<f64> = low.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let opts = SolveOptions { save_every: 1, ..Default::default() };
        let u_low = solve_gheat_with(&low, &band(), &g, opts).unwrap();
        let u_high = solve_gheat_with(&high, &band(), &g, opts).unwrap();
        for (a, b) in u_low.levels.iter().zip(&u_high.levels) {
            for (x, y) in a.u.iter().zip(&b.u) {
                prop_assert!(x <= y);
            }
        }
    }

    #[test]
    fn sub_additive_in_initial_data(c1 in prop::array::uniform4(-1.0f64..1.0), c2 in prop::array::uniform4(-1.0f64..1.0)) {
        let g = small_grid();
        let p1 = g.sample(payoff(&c1));
        let p2 = g.sample(payoff(&c2));
        let sum: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
        let u1 = solve_gheat(&p1, &band(), &g).unwrap();
        let u2 = solve_gheat(&p2, &band(), &g).unwrap();
        let us = solve_gheat(&sum, &band(), &g).unwrap();
        let (a, b, s) = (&u1.final_level().u, &u2.final_level().u, &us.final_level().u);
        for i in 0..s.len() {
            prop_assert!(s[i] <= a[i] + b[i] + 1e-13);
        }
    }
}
