//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use propkern::harness::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport};
use propkern::numerics::{eig_tridiag, Complex64, Matrix, SeededRng, SymMatrix};
use propkern::physics::{
    anharmonic_levels, quasicrystal_transmission, tmm_response, Layer, LayerStack,
    OscillatorParams, RefractiveIndex, ScatterChain, HC_EV_UM,
};
use propkern::spectral::{chebyshev_all, enforce_psd, jackson_coefficients, PsdMode};
use propkern::svr::{svr_fit, SvrConfig};

use common::{exhaustive_dual, gram, random_problem};

struct Run {
    report: ExperimentReport,
    seconds: f64,
}

fn run(kind: ExperimentKind, seed: u64) -> Run {
    let start = Instant::now();
    let (report, _) = run_experiment(&ExperimentConfig::new(kind, seed))
        .unwrap_or_else(|e| panic!("{kind} seed {seed}: {e}"));
    Run {
        report,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn r2(run: &Run, kernel: &str) -> f64 {
    run.report
        .result(kernel)
        .and_then(|r| r.r2)
        .unwrap_or(f64::NEG_INFINITY)
}

fn mse(run: &Run, kernel: &str) -> f64 {
    run.report
        .result(kernel)
        .and_then(|r| r.mse)
        .unwrap_or(f64::INFINITY)
}

struct Verdicts(Vec<bool>);

impl Verdicts {
    fn record(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {detail}");
        self.0.push(pass);
    }
}

fn quasicrystal_headline(v: &mut Verdicts, qc: &Run) {
    let (r, m) = (r2(qc, "custom"), mse(qc, "custom"));
    v.record(
        1,
        "quasicrystal headline",
        r >= 0.85 && m <= 0.012 && qc.seconds <= 60.0,
        format!(
            "custom R2={r:.4} (>= 0.85), MSE={m:.5} (<= 0.012), {:.1} s (<= 60 s)",
            qc.seconds
        ),
    );
}

fn quasicrystal_ordering(v: &mut Verdicts, qc: &Run) {
    let custom = r2(qc, "custom");
    let others = ["rbf", "linear", "poly3", "sigmoid"].map(|k| (k, r2(qc, k)));
    let beats = others.iter().all(|&(_, r)| custom > r);
    let rbf = r2(qc, "rbf");
    let listing: Vec<String> = others.iter().map(|(k, r)| format!("{k}={r:.4}")).collect();
    v.record(
        2,
        "quasicrystal ordering",
        beats && rbf <= 0.5,
        format!(
            "custom R2={custom:.4} vs {}; RBF R2 <= 0.5 required",
            listing.join(", ")
        ),
    );
}

fn anharmonic_ordering(v: &mut Verdicts, runs: &[Run]) {
    let mut wins = 0;
    let mut lines = Vec::new();
    for (seed, run) in runs.iter().enumerate() {
        let low = mse(run, "poly2").min(mse(run, "poly3"));
        let high = ["poly4", "poly5", "poly6"]
            .iter()
            .map(|k| mse(run, k))
            .fold(f64::INFINITY, f64::min);
        if low <= high {
            wins += 1;
        }
        lines.push(format!("seed {}: {low:.2e} vs {high:.2e}", seed + 1));
    }
    let total: f64 = runs.iter().map(|r| r.seconds).sum();
    v.record(
        3,
        "anharmonic degree ordering",
        wins >= 4 && total <= 120.0,
        format!(
            "min MSE deg 2,3 <= deg 4,5,6 in {wins}/5 runs (>= 4) [{}], {total:.1} s (<= 120 s)",
            lines.join("; ")
        ),
    );
}

fn graphene(v: &mut Verdicts, g: &Run) {
    let (lin, quad) = (r2(g, "linear"), r2(g, "poly2"));
    v.record(
        4,
        "graphene surrogate",
        lin >= 0.95 && quad - lin <= 0.01 && g.seconds <= 30.0,
        format!(
            "linear R2={lin:.5} (>= 0.95), poly2 - linear = {:.5} (<= 0.01), {:.1} s (<= 30 s)",
            quad - lin,
            g.seconds
        ),
    );
}

fn conductivity(v: &mut Verdicts, c: &Run) {
    let (rbf, sig) = (mse(c, "rbf"), mse(c, "sigmoid"));
    let r = r2(c, "rbf");
    v.record(
        5,
        "conductivity surrogate",
        rbf < sig && r > 0.8 && c.seconds <= 60.0,
        format!(
            "RBF MSE={rbf:.5} < sigmoid MSE={sig:.5}, RBF R2={r:.4} (> 0.8), {:.1} s (<= 60 s)",
            c.seconds
        ),
    );
}

fn photonic(v: &mut Verdicts, p: &Run) {
    let (custom, rbf) = (r2(p, "custom"), r2(p, "rbf"));
    let rest = ["linear", "poly3", "sigmoid"].map(|k| (k, r2(p, k)));
    let best_rest = rest
        .iter()
        .map(|&(_, r)| r)
        .fold(f64::NEG_INFINITY, f64::max);
    let listing: Vec<String> = rest.iter().map(|(k, r)| format!("{k}={r:.4}")).collect();
    v.record(
        6,
        "photonic crystal",
        custom >= rbf && rbf > best_rest && p.seconds <= 120.0,
        format!(
            "custom R2={custom:.4} >= RBF R2={rbf:.4} > {}, {:.1} s (<= 120 s)",
            listing.join(", "),
            p.seconds
        ),
    );
}

fn step_overshoot(deg: usize, weights: &dyn Fn(usize) -> f64) -> f64 {
    let mut t = vec![0.0; deg + 1];
    let mut worst = f64::NEG_INFINITY;
    for i in 0..=4000 {
        let x = -1.0 + 2.0 * i as f64 / 4000.0;
        chebyshev_all(x, &mut t);
        // sign(x) = Σ_n 4 sin(nπ/2) / (nπ) T_n(x)
        let s: f64 = (1..=deg)
            .map(|n| weights(n) * 4.0 * (n as f64 * FRAC_PI_2).sin() / (n as f64 * PI) * t[n])
            .sum();
        worst = worst.max(s - 1.0);
    }
    worst
}

fn random_psd(rng: &mut SeededRng, n: usize, rank: usize) -> SymMatrix {
    Matrix::from_fn(n, rank, |_, _| rng.normal(0.0, 1.0)).gram()
}

fn spectral_properties(v: &mut Verdicts, runs: &[&Run]) {
    let mut fails = Vec::new();
    let g0 = (1..=512)
        .map(|n| (jackson_coefficients(n).unwrap().as_slice()[0] - 1.0).abs())
        .fold(0.0, f64::max);
    if g0 > 1e-12 {
        fails.push(format!("max |g_0 - 1| = {g0:e}"));
    }
    for deg in [16, 32, 64] {
        let g = jackson_coefficients(deg).unwrap();
        let damped = step_overshoot(deg, &|n| g.as_slice()[n]);
        let plain = step_overshoot(deg, &|_| 1.0);
        if damped >= plain {
            fails.push(format!("N={deg} damped overshoot {damped} >= {plain}"));
        }
    }
    let mut min_post = f64::INFINITY;
    for run in runs {
        for r in run.report.results.iter().filter(|r| r.psd_report.is_some()) {
            let after = r.psd_report.as_ref().unwrap().min_eigenvalue_after;
            min_post = min_post
                .min(after)
                .min(r.min_gram_eigenvalue.unwrap_or(f64::INFINITY));
        }
    }
    if min_post.is_nan() || min_post < -1e-8 {
        fails.push(format!("post-clip min eigenvalue {min_post:e}"));
    }
    let mut rng = SeededRng::new(7);
    let mut idem = 0.0f64;
    let mut lanczos = 0.0f64;
    for trial in 0..5 {
        let n = 20 + 5 * trial;
        let data: Vec<f64> = (0..n * n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let k = SymMatrix::from_row_major(n, data).unwrap();
        let (once, _) = enforce_psd(&k, PsdMode::FullClip, &mut SeededRng::new(0)).unwrap();
        let (twice, _) = enforce_psd(&once, PsdMode::FullClip, &mut SeededRng::new(0)).unwrap();
        idem = idem.max(once.max_abs_diff(&twice));

        let p = random_psd(&mut rng, n, 1 + trial * 4);
        let (full, _) = enforce_psd(&p, PsdMode::FullClip, &mut SeededRng::new(0)).unwrap();
        let (lz, _) =
            enforce_psd(&p, PsdMode::Lanczos { k: Some(n) }, &mut SeededRng::new(1)).unwrap();
        lanczos = lanczos.max(lz.max_abs_diff(&full));
    }
    if idem > 1e-10 {
        fails.push(format!("FullClip idempotence error {idem:e}"));
    }
    if lanczos > 1e-6 {
        fails.push(format!("Lanczos(k=N) vs FullClip {lanczos:e}"));
    }
    let detail = format!(
        "max|g0-1|={g0:.1e}, overshoot damped<plain at N=16,32,64, post-clip min eig={min_post:.2e}, \
         clip idempotence={idem:.1e}, Lanczos-vs-clip={lanczos:.1e}{}",
        if fails.is_empty() { String::new() } else { format!("; failures: {}", fails.join("; ")) }
    );
    v.record(7, "spectral kernel properties", fails.is_empty(), detail);
}

fn physics_oracles(v: &mut Verdicts) {
    let levels = anharmonic_levels(&OscillatorParams::new(1.0, 0.0), 11).unwrap();
    let harmonic = levels
        .iter()
        .enumerate()
        .map(|(n, e)| (e - (n as f64 + 0.5)).abs())
        .fold(0.0, f64::max);

    let mut delta = 0.0f64;
    for &(vb, e) in &[(1.5, 0.3), (-2.0, 1.7), (0.4, 3.9), (5.0, 0.1), (1.0, 1.0)] {
        let chain = ScatterChain {
            potentials: vec![vb],
            spacing: 1.0,
        };
        let t = quasicrystal_transmission(&chain, e).unwrap().transmission;
        delta = delta.max((t - 1.0 / (1.0 + vb * vb / (4.0 * e))).abs());
    }

    let (nh, nl, e0) = (3.2f64, 1.45f64, 1.75);
    let lambda = HC_EV_UM / e0;
    let mut quarter = 0.0f64;
    for p in 1..=8 {
        let layer = |n: f64| Layer {
            index: RefractiveIndex::Constant { n },
            thickness: lambda / (4.0 * n),
        };
        let layers = (0..p).flat_map(|_| [layer(nh), layer(nl)]).collect();
        let (_, r) = tmm_response(&LayerStack::vacuum(layers), e0).unwrap();
        let (a, b) = (nh.powi(2 * p), nl.powi(2 * p));
        quarter = quarter.max((r - ((a - b) / (a + b)).powi(2)).abs());
    }

    let mut rng = SeededRng::new(2718);
    let (mut flux, mut det) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = 1 + (rng.next_u64() % 21) as usize;
        let chain = ScatterChain {
            potentials: (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            spacing: 1.0,
        };
        let r = quasicrystal_transmission(&chain, rng.uniform(0.5, 4.0)).unwrap();
        flux = flux.max((r.transmission + r.reflection - 1.0).abs());
        det = det.max((r.determinant - Complex64::new(1.0, 0.0)).norm());
    }

    let n = 200;
    let ed = eig_tridiag(&vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
    let laplacian = ed
        .values()
        .iter()
        .enumerate()
        .map(|(m, l)| (l - (2.0 - 2.0 * ((m + 1) as f64 * PI / (n as f64 + 1.0)).cos())).abs())
        .fold(0.0, f64::max);

    v.record(
        8,
        "physics oracles",
        harmonic <= 1e-3 && delta <= 1e-10 && quarter <= 1e-8 && flux <= 1e-10 && det <= 1e-10
            && laplacian <= 1e-10,
        format!(
            "harmonic {harmonic:.1e} (1e-3), delta {delta:.1e} (1e-10), quarter-wave {quarter:.1e} (1e-8), \
             T+R {flux:.1e} / det {det:.1e} over 1000 chains (1e-10), laplacian {laplacian:.1e} (1e-10)"
        ),
    );
}

fn svr_oracle(v: &mut Verdicts, runs: &[&Run]) {
    let mut rng = SeededRng::new(31337);
    let mut worst = 0.0f64;
    let mut infeasible = 0;
    for trial in 0..20 {
        let m = 3 + trial % 6;
        let (k, y) = random_problem(&mut rng, m);
        let c = [0.5, 1.0, 5.0, 20.0][trial % 4];
        let eps = [0.0, 0.05, 0.2][trial % 3];
        let (_, best) = exhaustive_dual(&k, &y, c, eps);
        let g = gram(&k);
        let model = svr_fit(
            &g,
            &y,
            &SvrConfig {
                tol: 1e-8,
                ..SvrConfig::new(c, eps)
            },
        )
        .unwrap();
        if !model.is_dual_feasible() {
            infeasible += 1;
        }
        let got = model.dual_objective(&g, &y);
        worst = worst.max((got - best).abs() / best.abs().max(1e-12));
    }
    let fits: Vec<_> = runs.iter().flat_map(|r| &r.report.results).collect();
    let bad: Vec<&str> = fits
        .iter()
        .filter(|r| r.error.is_some() || !r.dual_feasible)
        .map(|r| r.kernel.as_str())
        .collect();
    v.record(
        9,
        "SVR oracle",
        worst <= 1e-4 && infeasible == 0 && bad.is_empty(),
        format!(
            "max relative objective gap {worst:.1e} (1e-4) over 20 problems, {infeasible} infeasible; \
             {} experiment kernels dual-feasible across all folds{}",
            fits.len() - bad.len(),
            if bad.is_empty() { String::new() } else { format!(", infeasible: {bad:?}") }
        ),
    );
}

fn determinism(v: &mut Verdicts, first: &[(&'static str, &Run)]) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let mut diffs = Vec::new();
    for (name, run) in first {
        let kind = run.report.config.experiment;
        let again = pool.install(|| self::run(kind, run.report.config.seed));
        if again.report.metrics_csv() != run.report.metrics_csv() {
            diffs.push(*name);
        }
    }
    v.record(
        10,
        "determinism",
        diffs.is_empty(),
        format!(
            "metrics.csv byte-equal on rerun with a 3-thread pool for {} experiments{}",
            first.len(),
            if diffs.is_empty() {
                String::new()
            } else {
                format!("; differs: {diffs:?}")
            }
        ),
    );
}

fn main() -> ExitCode {
    let qc = run(ExperimentKind::Quasicrystal, 1);
    let anh: Vec<Run> = (1..=5)
        .map(|s| run(ExperimentKind::Anharmonic, s))
        .collect();
    let gr = run(ExperimentKind::Graphene, 1);
    let co = run(ExperimentKind::Conductivity, 1);
    let ph = run(ExperimentKind::Photonic, 1);

    let mut v = Verdicts(Vec::new());
    quasicrystal_headline(&mut v, &qc);
    quasicrystal_ordering(&mut v, &qc);
    anharmonic_ordering(&mut v, &anh);
    graphene(&mut v, &gr);
    conductivity(&mut v, &co);
    photonic(&mut v, &ph);
    spectral_properties(&mut v, &[&qc, &ph]);
    physics_oracles(&mut v);
    let mut all: Vec<&Run> = vec![&qc, &gr, &co, &ph];
    all.extend(anh.iter());
    svr_oracle(&mut v, &all);
    determinism(
        &mut v,
        &[
            ("quasicrystal", &qc),
            ("anharmonic", &anh[0]),
            ("graphene", &gr),
            ("conductivity", &co),
            ("photonic", &ph),
        ],
    );

    let passed = v.0.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", v.0.len());
    if passed == v.0.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
