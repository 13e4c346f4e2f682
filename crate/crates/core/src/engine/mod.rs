//! Round loop: selection, local training, attacks, aggregation, metrics.

mod config;
mod record;

pub use config::{
    AggregatorConfig, AggregatorKind, AttackConfig, DataConfig, FedConfig, FederationConfig,
    ObjectiveKind,
};
pub use record::RoundRecord;

use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::attacks::AttackPlan;
use crate::baselines::{
    fedacg_local_step, fedexp_step, fedprox_local_step, fltrust_modify, raga_aggregate,
    rfa_aggregate, scaffold_local_step, FedAcgState, ScaffoldControls,
};
use crate::drag::{
    aggregate_modified, dod, dod_entry, modify_br, BrDragState, DodReport, DragState, RootSet,
};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, StreamRng, SERVER};
use crate::tasks::{
    class_balanced_sample, dirichlet_partition, load_csv, make_quadratic_samples,
    make_synthetic_classification, sample_batch, train_test_split, HeterogeneousQuadratic,
    LabeledDataset, MultinomialLogistic, Objective, TinyMlp,
};
use crate::vecmath::{mean, norm2, ParamVector};

/// Upper bound on the default root dataset size.
pub const ROOT_SIZE_CAP: usize = 3000;

/// `selected` distinct worker ids, uniform over subsets, ascending.
pub fn select_workers<R: Rng + ?Sized>(workers: usize, selected: usize, rng: &mut R) -> Result<Vec<usize>> {
    if selected > workers {
        return Err(Error::config("selected", format!("{selected} selected exceeds {workers} workers")));
    }
    let mut ids = sample(rng, workers, selected).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

#[derive(Debug, Clone)]
pub struct Worker {
    pub id: usize,
    /// Training data (poisoned for label-flip attackers).
    pub data: Arc<LabeledDataset>,
    /// Original data when `data` was poisoned.
    pub clean: Option<Arc<LabeledDataset>>,
    pub objective: Arc<dyn Objective>,
    pub malicious: bool,
}

impl Worker {
    pub fn clean_data(&self) -> &LabeledDataset {
        self.clean.as_deref().unwrap_or(&self.data)
    }
}

/// Local update rule; `Plain` is the SGD step `θ ← θ - η ∇F(θ; z)`.
#[derive(Debug, Clone, Copy)]
pub enum LocalRule<'a> {
    Plain,
    Prox { anchor: &'a ParamVector, mu: f64 },
    Scaffold { h_local: &'a ParamVector, h_global: &'a ParamVector },
    Acg { anchor: &'a ParamVector, beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    /// `θ^{U} - θ^{0}`
    pub update: ParamVector,
    /// Raw stochastic gradient at the starting point on the first batch.
    pub first_grad: ParamVector,
}

/// `U` local steps from `start` on batches of the worker's data.
pub fn local_train<R: Rng + ?Sized>(
    worker: &Worker,
    start: &ParamVector,
    fed: &FederationConfig,
    rule: LocalRule<'_>,
    rng: &mut R,
) -> Result<LocalOutcome> {
    let mut theta = start.clone();
    let mut first_grad = None;
    for _ in 0..fed.local_steps {
        let batch = sample_batch(&worker.data, fed.batch_size, rng)?;
        let grad = worker.objective.grad(&theta, &worker.data, batch.indices())?;
        theta = match rule {
            LocalRule::Plain => {
                let mut next = theta;
                next.axpy(-fed.stepsize, &grad)?;
                next
            }
            LocalRule::Prox { anchor, mu } => fedprox_local_step(&theta, anchor, &grad, fed.stepsize, mu)?,
            LocalRule::Scaffold { h_local, h_global } => {
                scaffold_local_step(&theta, &grad, h_local, h_global, fed.stepsize)?
            }
            LocalRule::Acg { anchor, beta } => fedacg_local_step(&theta, anchor, &grad, fed.stepsize, beta)?,
        };
        first_grad.get_or_insert(grad);
    }
    if !theta.is_finite() {
        return Err(Error::Protocol(format!("worker {} diverged to a non-finite model", worker.id)));
    }
    Ok(LocalOutcome {
        update: theta.sub(start)?,
        first_grad: first_grad.expect("local_steps >= 1"),
    })
}

#[derive(Debug, Clone)]
enum AggregatorState {
    Fedavg,
    Fedprox,
    Scaffold(ScaffoldControls),
    Fedexp,
    Fedacg(FedAcgState),
    Drag(DragState),
    BrDrag(BrDragState),
    Fltrust(BrDragState),
    Rfa,
    Raga,
}

/// The per-worker quadratics of the synthetic convex workload and the
/// exact minimizer of their average.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSuite {
    pub parts: Vec<HeterogeneousQuadratic>,
    pub optimum: ParamVector,
    pub f_star: f64,
}

/// Execution options that must not change results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads for local training; `None` uses all cores, `Some(1)`
    /// runs serially.
    pub threads: Option<usize>,
}

/// One configured experiment: global model, workers, and server state.
pub struct Simulation {
    cfg: FedConfig,
    theta: ParamVector,
    round: usize,
    workers: Vec<Worker>,
    test: Option<LabeledDataset>,
    /// Objective for held-out evaluation.
    eval_objective: Arc<dyn Objective>,
    attack: Option<AttackPlan>,
    state: AggregatorState,
    quadratic: Option<QuadraticSuite>,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

struct Workload {
    workers: Vec<(Arc<LabeledDataset>, Arc<dyn Objective>)>,
    test: Option<LabeledDataset>,
    eval_objective: Arc<dyn Objective>,
    root: RootSet,
    theta0: ParamVector,
    quadratic: Option<QuadraticSuite>,
}

fn build_classification(cfg: &FedConfig) -> Result<Workload> {
    let d = &cfg.data;
    let fed = &cfg.federation;
    let seed = cfg.seeds.partition;
    let full = match &d.csv {
        Some(path) => load_csv(path, d.csv_classes)?,
        None => make_synthetic_classification(d.samples, d.features, d.classes, d.separation, seed)?,
    };
    let (train, test) = train_test_split(&full, d.test_fraction, &mut stream(seed, Purpose::Split, SERVER, 0))?;
    let objective: Arc<dyn Objective> = match d.objective {
        ObjectiveKind::Mlp => Arc::new(TinyMlp {
            input_dim: full.input_dim(),
            hidden: d.hidden,
            classes: full.classes(),
        }),
        _ => Arc::new(MultinomialLogistic {
            input_dim: full.input_dim(),
            classes: full.classes(),
        }),
    };
    let parts = dirichlet_partition(&train, fed.workers, d.beta, seed)?;
    let root_size = cfg
        .aggregator
        .root_size
        .unwrap_or_else(|| (train.len() / 10).clamp(1, ROOT_SIZE_CAP));
    let root_data = class_balanced_sample(&train, root_size, &mut stream(seed, Purpose::RootSample, SERVER, 0))?;
    let theta0 = objective.init_params(&mut stream(seed, Purpose::Init, SERVER, 0));
    Ok(Workload {
        workers: parts.into_iter().map(|p| (Arc::new(p), objective.clone())).collect(),
        test: Some(test),
        eval_objective: objective.clone(),
        root: RootSet {
            data: Arc::new(root_data),
            objective,
        },
        theta0,
        quadratic: None,
    })
}

fn build_quadratic(cfg: &FedConfig) -> Result<Workload> {
    let d = &cfg.data;
    let seed = cfg.seeds.partition;
    let curvature = Uniform::new_inclusive(d.curvature_min, d.curvature_max)
        .map_err(|e| Error::config("curvature_min", e.to_string()))?;
    let spread = Normal::new(d.optimum_offset, d.optimum_spread).map_err(|e| Error::config("optimum_spread", e.to_string()))?;
    let mut quads = Vec::with_capacity(cfg.federation.workers);
    let mut workers: Vec<(Arc<LabeledDataset>, Arc<dyn Objective>)> = Vec::new();
    for m in 0..cfg.federation.workers {
        let mut rng = stream(seed, Purpose::Data, m as u64, 0);
        let a: Vec<f64> = (0..d.dim).map(|_| curvature.sample(&mut rng)).collect();
        let opt: Vec<f64> = (0..d.dim).map(|_| spread.sample(&mut rng)).collect();
        let q = HeterogeneousQuadratic::new(a, ParamVector::new(opt))?;
        let data = make_quadratic_samples(d.dim, d.samples_per_worker, d.noise_std, &mut rng)?;
        quads.push(q.clone());
        workers.push((Arc::new(data), Arc::new(q)));
    }
    let (opt, f_star) = HeterogeneousQuadratic::average_optimum(&quads)?;
    let m = quads.len() as f64;
    let avg_curv: Vec<f64> = (0..d.dim)
        .map(|j| quads.iter().map(|q| q.curvature[j]).sum::<f64>() / m)
        .collect();
    // Same gradient as the average objective; the value differs by f*.
    let root_objective: Arc<dyn Objective> = Arc::new(HeterogeneousQuadratic::new(avg_curv, opt.clone())?);
    let root_size = cfg.aggregator.root_size.unwrap_or(d.samples_per_worker);
    let root_data = make_quadratic_samples(
        d.dim,
        root_size,
        d.noise_std,
        &mut stream(seed, Purpose::RootSample, SERVER, 0),
    )?;
    Ok(Workload {
        workers,
        test: None,
        eval_objective: root_objective.clone(),
        root: RootSet {
            data: Arc::new(root_data),
            objective: root_objective,
        },
        theta0: ParamVector::zeros(d.dim),
        quadratic: Some(QuadraticSuite {
            parts: quads,
            optimum: opt,
            f_star,
        }),
    })
}

impl Simulation {
    pub fn new(cfg: FedConfig, opts: RunOptions) -> Result<Self> {
        cfg.validate()?;
        let workload = match cfg.data.objective {
            ObjectiveKind::Quadratic => build_quadratic(&cfg)?,
            ObjectiveKind::Logistic | ObjectiveKind::Mlp => build_classification(&cfg)?,
        };
        let fed = &cfg.federation;
        let attack = cfg
            .attack
            .as_ref()
            .map(|a| AttackPlan::new(fed.workers, a.kind, a.ratio, a.noise(), a.label_flip_fraction, cfg.seeds.attack))
            .transpose()?;

        let mut workers = Vec::with_capacity(fed.workers);
        for (id, (data, objective)) in workload.workers.into_iter().enumerate() {
            let malicious = attack.as_ref().is_some_and(|p| p.is_malicious(id));
            let poisoned = match &attack {
                Some(plan) => plan.poison_dataset(id, &data)?,
                None => None,
            };
            let (data, clean) = match poisoned {
                Some(p) => (Arc::new(p), Some(data)),
                None => (data, None),
            };
            workers.push(Worker {
                id,
                data,
                clean,
                objective,
                malicious,
            });
        }

        let dim = workload.theta0.dim();
        let a = &cfg.aggregator;
        let root_batch = match a.root_batch_size {
            Some(0) => None,
            Some(b) => Some(b),
            None => Some(fed.batch_size),
        };
        let state = match a.kind {
            AggregatorKind::Fedavg => AggregatorState::Fedavg,
            AggregatorKind::Fedprox => AggregatorState::Fedprox,
            AggregatorKind::Scaffold => AggregatorState::Scaffold(ScaffoldControls::new(fed.workers, dim)),
            AggregatorKind::Fedexp => AggregatorState::Fedexp,
            AggregatorKind::Fedacg => AggregatorState::Fedacg(FedAcgState::new(dim, a.acg_beta, a.acg_lambda)?),
            AggregatorKind::Drag => AggregatorState::Drag(DragState::new(a.alpha, a.c, a.keep_reference_history)?),
            AggregatorKind::BrDrag | AggregatorKind::Fltrust => {
                let st = BrDragState::new(workload.root, a.c_t_schedule(), fed.stepsize, fed.local_steps, root_batch)?;
                if a.kind == AggregatorKind::BrDrag {
                    AggregatorState::BrDrag(st)
                } else {
                    AggregatorState::Fltrust(st)
                }
            }
            AggregatorKind::Rfa => AggregatorState::Rfa,
            AggregatorKind::Raga => AggregatorState::Raga,
        };

        #[cfg(feature = "parallel")]
        let pool = match opts.threads {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::config("threads", e.to_string()))?,
            ),
            None => None,
        };
        #[cfg(not(feature = "parallel"))]
        let _ = opts;

        Ok(Simulation {
            theta: workload.theta0,
            round: 0,
            workers,
            test: workload.test,
            eval_objective: workload.eval_objective,
            attack,
            state,
            quadratic: workload.quadratic,
            cfg,
            #[cfg(feature = "parallel")]
            pool,
        })
    }

    pub fn config(&self) -> &FedConfig {
        &self.cfg
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn workers(&self) -> &[Worker] {
        &self.workers
    }

    pub fn attack(&self) -> Option<&AttackPlan> {
        self.attack.as_ref()
    }

    /// The convex workload's components, when it is the one running.
    pub fn quadratic(&self) -> Option<&QuadraticSuite> {
        self.quadratic.as_ref()
    }

    /// Reference direction the momentum rule will use next, if seeded.
    pub fn drag_state(&self) -> Option<&DragState> {
        match &self.state {
            AggregatorState::Drag(s) => Some(s),
            _ => None,
        }
    }

    fn map_workers<T, F>(&self, ids: &[usize], f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&Worker) -> Result<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let run = || ids.par_iter().map(|&id| f(&self.workers[id])).collect::<Result<Vec<T>>>();
            match &self.pool {
                Some(pool) => pool.install(run),
                None => run(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            ids.iter().map(|&id| f(&self.workers[id])).collect()
        }
    }

    fn batch_rng(&self, worker: usize, purpose: Purpose) -> StreamRng {
        stream(self.cfg.seeds.batches, purpose, worker as u64, self.round as u64)
    }

    /// Local training of `ids` from a common start, then attack transforms.
    fn train_and_upload<'r>(
        &self,
        ids: &[usize],
        start: &ParamVector,
        purpose: Purpose,
        rule: &(dyn Fn(usize) -> LocalRule<'r> + Sync),
    ) -> Result<Vec<LocalOutcome>> {
        let fed = &self.cfg.federation;
        let round = self.round;
        self.map_workers(ids, |w| {
            let mut rng = self.batch_rng(w.id, purpose);
            let mut out = local_train(w, start, fed, rule(w.id), &mut rng)?;
            if let Some(plan) = &self.attack {
                out.update = plan.transform_upload(w.id, round, out.update);
            }
            Ok(out)
        })
    }

    fn is_malicious(&self, id: usize) -> bool {
        self.workers[id].malicious
    }

    /// Global training objective `(1/M) Σ_m F_m(θ)` on clean data.
    pub fn global_loss(&self) -> Result<f64> {
        let ids: Vec<usize> = (0..self.workers.len()).collect();
        let theta = &self.theta;
        let losses = self.map_workers(&ids, |w| {
            let data = w.clean_data();
            let all: Vec<usize> = (0..data.len()).collect();
            w.objective.loss(theta, data, &all)
        })?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// Held-out accuracy of the global model, for classifiers.
    pub fn test_accuracy(&self) -> Result<Option<f64>> {
        match &self.test {
            Some(test) => Ok(crate::tasks::evaluate(self.eval_objective.as_ref(), &self.theta, test)?.accuracy),
            None => Ok(None),
        }
    }

    /// Execute one round and return its metrics.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let round = self.round;
        self.step().map_err(|e| e.in_round(round))
    }

    fn step(&mut self) -> Result<RoundRecord> {
        #[cfg(not(target_arch = "wasm32"))]
        let started = std::time::Instant::now();
        let fed = self.cfg.federation.clone();
        let t = self.round;
        let selected = select_workers(
            fed.workers,
            fed.selected,
            &mut stream(self.cfg.seeds.selection, Purpose::Select, SERVER, t as u64),
        )?;
        let theta = self.theta.clone();
        let plain = |_: usize| LocalRule::Plain;
        let mut report: Option<DodReport> = None;

        let next_theta = match &self.state {
            AggregatorState::Fedavg => {
                let ups = self.uploads(&selected, &theta, &plain)?;
                theta.add(&mean(&ups)?)?
            }
            AggregatorState::Fedprox => {
                let mu = self.cfg.aggregator.mu;
                let anchor = &theta;
                let ups = self.uploads(&selected, &theta, &|_| LocalRule::Prox { anchor, mu })?;
                theta.add(&mean(&ups)?)?
            }
            AggregatorState::Scaffold(controls) => {
                let outs = self.train_and_upload(&selected, &theta, Purpose::Train, &|id| LocalRule::Scaffold {
                    h_local: &controls.local[id],
                    h_global: &controls.global,
                })?;
                let ups: Vec<ParamVector> = outs.iter().map(|o| o.update.clone()).collect();
                let refreshed: Vec<(usize, ParamVector)> =
                    selected.iter().copied().zip(outs.into_iter().map(|o| o.first_grad)).collect();
                let next = theta.add(&mean(&ups)?)?;
                if let AggregatorState::Scaffold(c) = &mut self.state {
                    c.update(&refreshed)?;
                }
                next
            }
            AggregatorState::Fedexp => {
                let ups = self.uploads(&selected, &theta, &plain)?;
                theta.add(&fedexp_step(&ups, self.cfg.aggregator.epsilon)?.1)?
            }
            AggregatorState::Fedacg(acg) => {
                let anchor = acg.lookahead(&theta)?;
                let beta = acg.beta;
                let anchor_ref = &anchor;
                let ups = self.uploads(&selected, &anchor, &|_| LocalRule::Acg { anchor: anchor_ref, beta })?;
                let AggregatorState::Fedacg(acg) = &mut self.state else { unreachable!() };
                acg.finish_round(&theta, &ups)?
            }
            AggregatorState::Drag(_) => {
                let (next, rep) = self.drag_round(&selected, &theta)?;
                report = Some(rep);
                next
            }
            AggregatorState::BrDrag(st) | AggregatorState::Fltrust(st) => {
                let robust = matches!(self.state, AggregatorState::BrDrag(_));
                let mut rng = stream(self.cfg.seeds.batches, Purpose::RootBatch, SERVER, t as u64);
                let r = st.root_reference(&theta, &mut rng)?;
                let c_t = st.c_t.at(t)?;
                let ups = self.uploads(&selected, &theta, &plain)?;
                let mut vs = Vec::with_capacity(ups.len());
                let mut entries = Vec::with_capacity(ups.len());
                for (&id, g) in selected.iter().zip(&ups) {
                    if robust {
                        let lambda = dod(g, &r, c_t)?;
                        vs.push(modify_br(g, &r, lambda)?);
                        entries.push(dod_entry(id, self.is_malicious(id), g, &r, Some(lambda))?);
                    } else {
                        vs.push(fltrust_modify(g, &r)?);
                        entries.push(dod_entry(id, self.is_malicious(id), g, &r, None)?);
                    }
                }
                report = Some(DodReport::from_entries(entries));
                theta.add(&aggregate_modified(&vs)?)?
            }
            AggregatorState::Rfa => {
                let ups = self.uploads(&selected, &theta, &plain)?;
                let models = ups.iter().map(|g| theta.add(g)).collect::<Result<Vec<_>>>()?;
                let a = &self.cfg.aggregator;
                rfa_aggregate(&models, a.geomed_tol, a.geomed_max_iter)?.point
            }
            AggregatorState::Raga => {
                let ups = self.uploads(&selected, &theta, &plain)?;
                let a = &self.cfg.aggregator;
                theta.add(&raga_aggregate(&ups, a.geomed_tol, a.geomed_max_iter)?.point)?
            }
        };

        if !next_theta.is_finite() {
            return Err(Error::Protocol("global model became non-finite".into()));
        }
        let delta_norm = norm2(&next_theta.sub(&theta)?);
        self.theta = next_theta;

        let evaluate = t.is_multiple_of(fed.eval_every) || t + 1 == fed.rounds;
        let (loss, accuracy) = if evaluate {
            (Some(self.global_loss()?), self.test_accuracy()?)
        } else {
            (None, None)
        };
        let attackers = selected.iter().filter(|&&id| self.is_malicious(id)).count();
        self.round += 1;

        #[cfg(not(target_arch = "wasm32"))]
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        #[cfg(target_arch = "wasm32")]
        let wall_ms = 0.0;

        Ok(RoundRecord {
            round: t,
            loss,
            accuracy,
            delta_norm,
            lambda_mean: report.as_ref().and_then(DodReport::lambda_mean),
            lambda_max: report.as_ref().and_then(DodReport::lambda_max),
            x: report.as_ref().map(|r| r.x),
            y: report.as_ref().map(|r| r.y),
            rho: report.as_ref().map(|r| r.rho),
            w: attackers as f64 / selected.len() as f64,
            selected,
            wall_ms,
        })
    }

    fn uploads<'r>(
        &self,
        ids: &[usize],
        start: &ParamVector,
        rule: &(dyn Fn(usize) -> LocalRule<'r> + Sync),
    ) -> Result<Vec<ParamVector>> {
        Ok(self
            .train_and_upload(ids, start, Purpose::Train, rule)?
            .into_iter()
            .map(|o| o.update)
            .collect())
    }

    fn drag_round(&mut self, selected: &[usize], theta: &ParamVector) -> Result<(ParamVector, DodReport)> {
        let plain = |_: usize| LocalRule::Plain;
        let needs_seed = matches!(&self.state, AggregatorState::Drag(s) if s.needs_seed());
        // Round 0 runs a separate pass whose uploads only seed the reference.
        let seed_uploads = if needs_seed {
            Some(
                self.train_and_upload(selected, theta, Purpose::ReferenceSeed, &plain)?
                    .into_iter()
                    .map(|o| o.update)
                    .collect::<Vec<_>>(),
            )
        } else {
            None
        };
        let ups = self.uploads(selected, theta, &plain)?;
        let malicious: Vec<bool> = selected.iter().map(|&id| self.is_malicious(id)).collect();
        let AggregatorState::Drag(st) = &mut self.state else {
            unreachable!("drag_round called for another rule")
        };
        match seed_uploads {
            Some(seed) => {
                st.seed(&seed)?;
            }
            None => {
                st.advance()?;
            }
        }
        let r = st.reference().expect("seeded above").clone();
        let mut vs = Vec::with_capacity(ups.len());
        let mut entries = Vec::with_capacity(ups.len());
        for ((&id, g), &bad) in selected.iter().zip(&ups).zip(&malicious) {
            let (lambda, v) = st.calibrate(g)?;
            vs.push(v);
            entries.push(dod_entry(id, bad, g, &r, Some(lambda))?);
        }
        let delta = aggregate_modified(&vs)?;
        st.record_delta(delta.clone());
        Ok((theta.add(&delta)?, DodReport::from_entries(entries)))
    }

    /// Run the remaining rounds up to the configured count.
    pub fn run(&mut self) -> Result<Vec<RoundRecord>> {
        let total = self.cfg.federation.rounds;
        let mut out = Vec::with_capacity(total.saturating_sub(self.round));
        while self.round < total {
            out.push(self.run_round()?);
        }
        Ok(out)
    }
}

/// Build and run a whole experiment.
pub fn run_experiment(cfg: &FedConfig, opts: RunOptions) -> Result<Vec<RoundRecord>> {
    Simulation::new(cfg.clone(), opts)?.run()
}
