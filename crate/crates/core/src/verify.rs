//! Self-checks against independent oracles, run by `fedsim verify`.

use rand::Rng;

use crate::baselines::{geomed_objective, weiszfeld_geomed};
use crate::drag::{closed_form_reference, dod, modify_br, modify_drag, reference_step};
use crate::engine::{run_experiment, AggregatorKind, FedConfig, ObjectiveKind, RunOptions};
use crate::error::Result;
use crate::rng::{stream, Purpose, SERVER};
use crate::tasks::objective::{finite_difference_grad, random_point};
use crate::tasks::{
    make_quadratic_samples, make_synthetic_classification, sample_batch, HeterogeneousQuadratic,
    MultinomialLogistic, Objective, TinyMlp,
};
use crate::vecmath::{cosine, dot, norm2, ParamVector, ZERO_NORM_EPS};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn rand_vec<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ParamVector {
    ParamVector::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// DoD range, scale invariance, alignment gain and the robust norm bound.
pub fn check_dod_algebra(seed: u64, draws: usize) -> Result<(bool, String)> {
    let mut rng = stream(seed, Purpose::Init, SERVER, 1);
    let mut worst_gain = 0.0f64;
    let mut worst_scale = 0.0f64;
    let mut violations = 0usize;
    for _ in 0..draws {
        let d = rng.random_range(2..12);
        let g = rand_vec(&mut rng, d).scaled(rng.random_range(0.01..10.0));
        let r = rand_vec(&mut rng, d).scaled(rng.random_range(0.01..10.0));
        let c = rng.random_range(0.0..1.0);
        let lambda = dod(&g, &r, c)?;
        if !(0.0..=2.0 * c).contains(&lambda) {
            violations += 1;
        }
        let k = rng.random_range(0.01..100.0);
        worst_scale = worst_scale.max((dod(&g.scaled(k), &r, c)? - lambda).abs());
        worst_scale = worst_scale.max((dod(&g, &r.scaled(k), c)? - lambda).abs());

        let v = modify_drag(&g, &r, lambda)?;
        let r_hat = r.scaled(1.0 / norm2(&r));
        let cos = cosine(&g, &r, ZERO_NORM_EPS)?;
        let gain = dot(&v.sub(&g)?, &r_hat)?;
        let expected = c * (1.0 - cos).powi(2) * norm2(&g);
        worst_gain = worst_gain.max((gain - expected).abs());

        let lb = rng.random_range(0.0..2.0);
        let vb = modify_br(&g, &r, lb)?;
        let nr = norm2(&r);
        if norm2(&vb) > ((1.0 - lb).abs() + lb) * nr * (1.0 + 1e-12) || (lb <= 1.0 && norm2(&vb) > nr * (1.0 + 1e-12)) {
            violations += 1;
        }
    }
    let ok = violations == 0 && worst_scale <= 1e-12 && worst_gain <= 1e-10;
    Ok((
        ok,
        format!("{draws} draws, {violations} bound violations, scale dev {worst_scale:.1e}, gain dev {worst_gain:.1e}"),
    ))
}

/// Unrolled reference against the iterated recursion.
pub fn check_closed_form(seed: u64, rounds: usize, dim: usize) -> Result<(bool, String)> {
    let mut rng = stream(seed, Purpose::Init, SERVER, 2);
    let mut worst = 0.0f64;
    for alpha in [0.01, 0.25, 0.75] {
        let g0 = rand_vec(&mut rng, dim);
        let deltas: Vec<ParamVector> = (0..rounds).map(|_| rand_vec(&mut rng, dim)).collect();
        let mut r = g0.clone();
        for t in 1..=rounds {
            r = reference_step(&r, &deltas[t - 1], alpha)?;
            let closed = closed_form_reference(&g0, &deltas[..t], alpha, t)?;
            worst = worst.max(r.iter().zip(closed.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
    }
    Ok((worst <= 1e-9, format!("max deviation {worst:.1e} over {rounds} rounds")))
}

/// Minimum of `Σ‖x_i - y‖` over a grid refined around the best cell.
fn grid_geomed_2d(points: &[ParamVector]) -> Result<f64> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let n = 200;
    let mut best = (f64::INFINITY, [0.0; 2]);
    for _ in 0..6 {
        let step = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
        for i in 0..=n {
            for j in 0..=n {
                let y = ParamVector::new(vec![lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]]);
                let f = geomed_objective(points, &y)?;
                if f < best.0 {
                    best = (f, [y[0], y[1]]);
                }
            }
        }
        lo = [best.1[0] - 2.0 * step[0], best.1[1] - 2.0 * step[1]];
        hi = [best.1[0] + 2.0 * step[0], best.1[1] + 2.0 * step[1]];
    }
    Ok(best.0)
}

/// Weiszfeld against a brute-force grid on random planar point sets.
pub fn check_weiszfeld(seed: u64, sets: usize, points: usize) -> Result<(bool, String)> {
    let mut rng = stream(seed, Purpose::Init, SERVER, 3);
    let mut worst = 0.0f64;
    let mut monotone = true;
    for _ in 0..sets {
        let pts: Vec<ParamVector> = (0..points).map(|_| rand_vec(&mut rng, 2).scaled(5.0)).collect();
        let gm = weiszfeld_geomed(&pts, 1e-10, 1000)?;
        monotone &= gm.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let found = geomed_objective(&pts, &gm.point)?;
        worst = worst.max((found - grid_geomed_2d(&pts)?).abs());
    }
    Ok((
        worst <= 1e-3 && monotone,
        format!("max objective gap {worst:.1e}, monotone {monotone}"),
    ))
}

fn relative_error(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    Ok(norm2(&a.sub(b)?) / norm2(a).max(norm2(b)).max(1e-12))
}

/// Analytic gradients of every objective against central differences.
pub fn check_gradients(seed: u64, points: usize) -> Result<(bool, String)> {
    let mut rng = stream(seed, Purpose::Init, SERVER, 4);
    let cls = make_synthetic_classification(200, 4, 3, 2.0, seed)?;
    let quad_data = make_quadratic_samples(5, 40, 0.5, &mut rng)?;
    let quad = HeterogeneousQuadratic::new(vec![0.5, 1.0, 1.5, 2.0, 3.0], random_point(5, 1.0, &mut rng))?;
    let logistic = MultinomialLogistic {
        input_dim: 4,
        classes: 3,
    };
    let mlp = TinyMlp {
        input_dim: 4,
        hidden: 6,
        classes: 3,
    };
    let cases: [(&str, &dyn Objective, &crate::tasks::LabeledDataset); 3] =
        [("quadratic", &quad, &quad_data), ("logistic", &logistic, &cls), ("mlp", &mlp, &cls)];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, obj, ds) in cases {
        let mut local = 0.0f64;
        for _ in 0..points {
            let theta = random_point(obj.dim(), 1.0, &mut rng);
            let batch = sample_batch(ds, 10, &mut rng)?;
            let g = obj.grad(&theta, ds, batch.indices())?;
            let fd = finite_difference_grad(obj, &theta, ds, batch.indices(), 1e-5)?;
            local = local.max(relative_error(&g, &fd)?);
        }
        parts.push(format!("{name} {local:.1e}"));
        worst = worst.max(local);
    }
    Ok((worst <= 1e-5, format!("max relative error: {}", parts.join(", "))))
}

/// Momentum aggregation with `c = 0` must retrace plain averaging.
pub fn check_zero_c_reduction(seed: u64, rounds: usize) -> Result<(bool, String)> {
    let mut cfg = FedConfig::default();
    cfg.seeds = crate::rng::Seeds::from_master(seed);
    cfg.data.objective = ObjectiveKind::Quadratic;
    cfg.federation.workers = 10;
    cfg.federation.selected = 4;
    cfg.federation.rounds = rounds;
    cfg.aggregator.kind = AggregatorKind::Fedavg;
    let mut avg = crate::engine::Simulation::new(cfg.clone(), RunOptions::default())?;
    cfg.aggregator.kind = AggregatorKind::Drag;
    cfg.aggregator.c = 0.0;
    let mut drag = crate::engine::Simulation::new(cfg, RunOptions::default())?;
    let mut worst = 0.0f64;
    for _ in 0..rounds {
        avg.run_round()?;
        drag.run_round()?;
        let gap = avg.theta().iter().zip(drag.theta().iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
    }
    Ok((worst <= 1e-12, format!("max coordinate gap {worst:.1e} over {rounds} rounds")))
}

/// Two runs with the same config must agree exactly.
pub fn check_determinism(seed: u64) -> Result<(bool, String)> {
    let mut cfg = FedConfig::default();
    cfg.seeds = crate::rng::Seeds::from_master(seed);
    cfg.federation.rounds = 5;
    cfg.data.samples = 600;
    let serial = run_experiment(&cfg, RunOptions { threads: Some(1) })?;
    let parallel = run_experiment(&cfg, RunOptions { threads: None })?;
    let same = serial.len() == parallel.len()
        && serial.iter().zip(&parallel).all(|(a, b)| {
            let mut a = a.clone();
            a.wall_ms = b.wall_ms;
            a == *b
        });
    Ok((same, format!("{} rounds serial vs parallel", serial.len())))
}

/// Run every oracle check.
pub fn run_all(seed: u64) -> VerifyReport {
    VerifyReport {
        checks: vec![
            check("dod-algebra", check_dod_algebra(seed, 1000)),
            check("closed-form-reference", check_closed_form(seed, 100, 10)),
            check("weiszfeld-grid", check_weiszfeld(seed, 5, 7)),
            check("finite-differences", check_gradients(seed, 20)),
            check("zero-c-reduction", check_zero_c_reduction(seed, 50)),
            check("determinism", check_determinism(seed)),
        ],
    }
}
