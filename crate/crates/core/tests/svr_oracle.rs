mod common;

use propkern::numerics::SeededRng;
use propkern::svr::{svr_fit, svr_predict, SvrConfig, WorkingSet};

use common::{exhaustive_dual, gram, random_problem};

fn tight(c: f64, eps: f64) -> SvrConfig {
    SvrConfig {
        tol: 1e-8,
        ..SvrConfig::new(c, eps)
    }
}

#[test]
fn smo_matches_exhaustive_solution() {
    let mut rng = SeededRng::new(2024);
    for trial in 0..20 {
        let m = 3 + trial % 6;
        let (k, y) = random_problem(&mut rng, m);
        let c = [0.5, 1.0, 5.0][trial % 3];
        let eps = [0.0, 0.1, 0.3][trial % 3];
        let (_, best) = exhaustive_dual(&k, &y, c, eps);
        let g = gram(&k);
        for ws in [WorkingSet::MaxViolatingPair, WorkingSet::SecondOrder] {
            let cfg = SvrConfig {
                working_set: ws,
                ..tight(c, eps)
            };
            let model = svr_fit(&g, &y, &cfg).unwrap();
            assert!(model.converged);
            assert!(model.is_dual_feasible());
            let got = model.dual_objective(&g, &y);
            let rel = (got - best).abs() / best.abs().max(1e-12);
            assert!(rel <= 1e-4, "trial {trial} {ws:?}: smo {got} oracle {best}");
        }
    }
}

#[test]
fn collinear_fit_matches_oracle_and_tube() {
    let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let y: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
    // linear kernel plus a tiny ridge so the oracle's systems are regular
    let k: Vec<Vec<f64>> = xs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            xs.iter()
                .enumerate()
                .map(|(j, b)| a * b + if i == j { 1e-9 } else { 0.0 })
                .collect()
        })
        .collect();
    let g = gram(&k);
    let model = svr_fit(&g, &y, &tight(100.0, 0.01)).unwrap();
    let (_, best) = exhaustive_dual(&k, &y, 100.0, 0.01);
    let got = model.dual_objective(&g, &y);
    assert!((got - best).abs() <= 1e-4 * best.abs());
    let cross = propkern::numerics::Matrix::from_rows(&k).unwrap();
    for (p, t) in svr_predict(&model, &cross).unwrap().iter().zip(&y) {
        assert!((p - t).abs() <= 0.01 + 1e-6);
    }
}

#[test]
fn wider_tube_never_increases_support() {
    let mut rng = SeededRng::new(5);
    let (k, y) = random_problem(&mut rng, 8);
    let g = gram(&k);
    let mut prev = usize::MAX;
    for eps in [0.0, 0.2, 0.5, 1.0, 3.0] {
        let n = svr_fit(&g, &y, &tight(1.0, eps)).unwrap().support_vectors();
        assert!(n <= prev, "eps {eps}: {n} > {prev}");
        prev = n;
    }
    assert_eq!(prev, 0);
}

#[test]
fn shrinking_reaches_the_same_optimum() {
    let mut rng = SeededRng::new(77);
    for (m, c, eps) in [(400, 1.0, 0.1), (600, 10.0, 0.01), (800, 0.1, 0.05)] {
        let (k, y) = random_problem(&mut rng, m);
        let g = gram(&k);
        let full = svr_fit(
            &g,
            &y,
            &SvrConfig {
                shrinking: false,
                ..tight(c, eps)
            },
        )
        .unwrap();
        let shrunk = svr_fit(
            &g,
            &y,
            &SvrConfig {
                shrinking: true,
                ..tight(c, eps)
            },
        )
        .unwrap();
        assert!(full.converged && shrunk.converged);
        assert!(shrunk.is_dual_feasible());
        let (a, b) = (full.dual_objective(&g, &y), shrunk.dual_objective(&g, &y));
        assert!(
            (a - b).abs() <= 1e-6 * a.abs().max(1.0),
            "m={m}: {a} vs {b}"
        );
        assert!(
            (full.bias - shrunk.bias).abs() <= 1e-3,
            "m={m}: bias {} vs {}",
            full.bias,
            shrunk.bias
        );
    }
}
