//! Divergence-based adaptive aggregation.
//!
//! Two calibration rules share one misalignment score, the degree of
//! divergence `λ = c (1 - cos(g, r))`:
//!
//! * [`modify_drag`] pulls an update toward the reference while keeping the
//!   update's own norm. The reference is a momentum average of past
//!   aggregates ([`DragState`]).
//! * [`modify_br`] rescales the update to the reference norm before
//!   mixing, which caps what a single inflated upload can contribute. The
//!   reference comes from SGD on a trusted root dataset ([`BrDragState`]).

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tasks::{sample_batch, LabeledDataset, Objective};
use crate::vecmath::{cosine, linear_combine, mean, norm2, ParamVector, ZERO_NORM_EPS};

fn check_coefficient(c: f64, field: &str) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::config(field, format!("{c} outside [0, 1]")))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=2.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::config("lambda", format!("{lambda} outside [0, 2]")))
    }
}

/// Degree of divergence of `g` from `r`, in `[0, 2c]`.
pub fn dod(g: &ParamVector, r: &ParamVector, c: f64) -> Result<f64> {
    check_coefficient(c, "c")?;
    let cos = cosine(g, r, ZERO_NORM_EPS)?;
    Ok((c * (1.0 - cos)).clamp(0.0, 2.0 * c))
}

/// `v = (1-λ) g + λ (‖g‖/‖r‖) r`; returns `g` when either norm vanishes.
pub fn modify_drag(g: &ParamVector, r: &ParamVector, lambda: f64) -> Result<ParamVector> {
    check_lambda(lambda)?;
    r.ensure_dim(g.dim())?;
    let (ng, nr) = (norm2(g), norm2(r));
    if ng <= ZERO_NORM_EPS || nr <= ZERO_NORM_EPS {
        return Ok(g.clone());
    }
    linear_combine(&[1.0 - lambda, lambda * ng / nr], &[g, r])
}

/// `v = (1-λ) (‖r‖/‖g‖) g + λ r`; `λ r` when `g` vanishes, zero when `r` does.
pub fn modify_br(g: &ParamVector, r: &ParamVector, lambda: f64) -> Result<ParamVector> {
    check_lambda(lambda)?;
    r.ensure_dim(g.dim())?;
    let (ng, nr) = (norm2(g), norm2(r));
    if nr <= ZERO_NORM_EPS {
        return Ok(ParamVector::zeros(g.dim()));
    }
    if ng <= ZERO_NORM_EPS {
        return Ok(r.scaled(lambda));
    }
    linear_combine(&[(1.0 - lambda) * nr / ng, lambda], &[g, r])
}

/// Round-0 reference: the mean of the raw uploads.
pub fn reference_init(uploads: &[ParamVector]) -> Result<ParamVector> {
    mean(uploads)
}

/// `(1-α) r_prev + α Δ_prev`.
pub fn reference_step(r_prev: &ParamVector, delta_prev: &ParamVector, alpha: f64) -> Result<ParamVector> {
    linear_combine(&[1.0 - alpha, alpha], &[r_prev, delta_prev])
}

/// Unrolled momentum reference after `t` rounds:
/// `(1-α)^t g0 + Σ_i α (1-α)^(t-i-1) Δ_i`.
pub fn closed_form_reference(
    g0_mean: &ParamVector,
    deltas: &[ParamVector],
    alpha: f64,
    t: usize,
) -> Result<ParamVector> {
    if t == 0 || deltas.len() != t {
        return Err(Error::Protocol(format!(
            "closed form needs t >= 1 and exactly t aggregates (t={t}, got {})",
            deltas.len()
        )));
    }
    let keep = 1.0 - alpha;
    let mut coeffs = Vec::with_capacity(t + 1);
    let mut vecs = Vec::with_capacity(t + 1);
    coeffs.push(keep.powi(t as i32));
    vecs.push(g0_mean);
    for (i, d) in deltas.iter().enumerate() {
        coeffs.push(alpha * keep.powi((t - i - 1) as i32));
        vecs.push(d);
    }
    linear_combine(&coeffs, &vecs)
}

/// Mean of the calibrated uploads; the global step is `θ ← θ + Δ`.
pub fn aggregate_modified(vs: &[ParamVector]) -> Result<ParamVector> {
    mean(vs)
}

#[derive(Debug, Clone, PartialEq)]
struct ReferenceHistory {
    g0_mean: ParamVector,
    deltas: Vec<ParamVector>,
}

/// Server state for momentum-referenced aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct DragState {
    alpha: f64,
    c: f64,
    reference: Option<ParamVector>,
    last_delta: Option<ParamVector>,
    history: Option<ReferenceHistory>,
    keep_history: bool,
}

impl DragState {
    pub fn new(alpha: f64, c: f64, keep_history: bool) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::config("alpha", format!("{alpha} outside (0, 1)")));
        }
        check_coefficient(c, "c")?;
        Ok(DragState {
            alpha,
            c,
            reference: None,
            last_delta: None,
            history: None,
            keep_history,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn reference(&self) -> Option<&ParamVector> {
        self.reference.as_ref()
    }

    /// True until the first reference has been seeded.
    pub fn needs_seed(&self) -> bool {
        self.reference.is_none()
    }

    /// Seed the reference from the round-0 uploads.
    pub fn seed(&mut self, uploads: &[ParamVector]) -> Result<&ParamVector> {
        let r = reference_init(uploads)?;
        if self.keep_history {
            self.history = Some(ReferenceHistory {
                g0_mean: r.clone(),
                deltas: Vec::new(),
            });
        }
        Ok(self.reference.insert(r))
    }

    /// Move the reference one momentum step toward the last aggregate.
    pub fn advance(&mut self) -> Result<&ParamVector> {
        let (Some(r), Some(delta)) = (&self.reference, &self.last_delta) else {
            return Err(Error::Protocol("reference advanced before any aggregate was recorded".into()));
        };
        let next = reference_step(r, delta, self.alpha)?;
        Ok(self.reference.insert(next))
    }

    pub fn record_delta(&mut self, delta: ParamVector) {
        if let Some(h) = &mut self.history {
            h.deltas.push(delta.clone());
        }
        self.last_delta = Some(delta);
    }

    /// Closed-form reference for the next round, when history is kept.
    pub fn closed_form_next(&self) -> Option<Result<ParamVector>> {
        let h = self.history.as_ref()?;
        Some(closed_form_reference(&h.g0_mean, &h.deltas, self.alpha, h.deltas.len()))
    }

    pub fn calibrate(&self, g: &ParamVector) -> Result<(f64, ParamVector)> {
        let r = self
            .reference
            .as_ref()
            .ok_or_else(|| Error::Protocol("calibration before the reference was seeded".into()))?;
        let lambda = dod(g, r, self.c)?;
        Ok((lambda, modify_drag(g, r, lambda)?))
    }
}

/// Per-round BR coefficient `c^t`.
#[derive(Clone)]
pub enum CtSchedule {
    Constant(f64),
    /// Value for round `t` is `values[min(t, len-1)]`.
    PerRound(Vec<f64>),
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl CtSchedule {
    pub fn at(&self, round: usize) -> Result<f64> {
        let c = match self {
            CtSchedule::Constant(c) => *c,
            CtSchedule::PerRound(v) => *v
                .get(round.min(v.len().saturating_sub(1)))
                .ok_or_else(|| Error::config("c_t_schedule", "schedule is empty"))?,
            CtSchedule::Custom(f) => f(round),
        };
        check_coefficient(c, "c_t")?;
        Ok(c)
    }
}

impl fmt::Debug for CtSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CtSchedule::Constant(c) => write!(f, "Constant({c})"),
            CtSchedule::PerRound(v) => write!(f, "PerRound({v:?})"),
            CtSchedule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Trusted dataset held by the server, with the objective evaluated on it.
#[derive(Debug, Clone)]
pub struct RootSet {
    pub data: Arc<LabeledDataset>,
    pub objective: Arc<dyn Objective>,
}

/// Server state for root-referenced (Byzantine-resilient) aggregation.
#[derive(Debug, Clone)]
pub struct BrDragState {
    pub root: RootSet,
    pub c_t: CtSchedule,
    pub eta: f64,
    pub local_steps: usize,
    /// `None` uses the full root dataset at every step.
    pub batch_size: Option<usize>,
}

impl BrDragState {
    pub fn new(root: RootSet, c_t: CtSchedule, eta: f64, local_steps: usize, batch_size: Option<usize>) -> Result<Self> {
        if root.data.is_empty() {
            return Err(Error::config("root_size", "root dataset is empty"));
        }
        if !(eta > 0.0) {
            return Err(Error::config("stepsize", "must be positive"));
        }
        if local_steps == 0 {
            return Err(Error::config("local_steps", "must be at least 1"));
        }
        Ok(BrDragState {
            root,
            c_t,
            eta,
            local_steps,
            batch_size,
        })
    }

    /// `U` SGD steps on the root dataset from `theta`; returns the
    /// displacement `θ^{t,U} - θ^t`.
    pub fn root_reference<R: Rng + ?Sized>(&self, theta: &ParamVector, rng: &mut R) -> Result<ParamVector> {
        root_reference(theta, self, rng)
    }
}

pub fn root_reference<R: Rng + ?Sized>(theta: &ParamVector, st: &BrDragState, rng: &mut R) -> Result<ParamVector> {
    let data = &st.root.data;
    if data.is_empty() {
        return Err(Error::config("root_size", "root dataset is empty"));
    }
    let full: Vec<usize> = (0..data.len()).collect();
    let mut local = theta.clone();
    for _ in 0..st.local_steps {
        let grad = match st.batch_size {
            Some(b) => {
                let batch = sample_batch(data, b, rng)?;
                st.root.objective.grad(&local, data, batch.indices())?
            }
            None => st.root.objective.grad(&local, data, &full)?,
        };
        local.axpy(-st.eta, &grad)?;
    }
    local.sub(theta)
}

/// Calibration of one upload against the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct DodEntry {
    pub worker: usize,
    pub malicious: bool,
    pub cosine: f64,
    /// Absent for rules that do not compute a DoD.
    pub lambda: Option<f64>,
    /// `‖r‖/‖g‖`; absent when `g` vanishes.
    pub norm_ratio: Option<f64>,
}

/// Per-round alignment diagnostics. Never fed back into the update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DodReport {
    pub entries: Vec<DodEntry>,
    /// `(1/S) Σ_{malicious} cos`
    pub x: f64,
    /// `(1/S) Σ_{benign} cos`
    pub y: f64,
    /// `(1/S) Σ_{benign} cos · ‖r‖/‖g‖`
    pub rho: f64,
    /// Number of benign uploads.
    pub benign: usize,
}

impl DodReport {
    pub fn from_entries(entries: Vec<DodEntry>) -> Self {
        let s = entries.len().max(1) as f64;
        let mut report = DodReport::default();
        for e in &entries {
            if e.malicious {
                report.x += e.cosine / s;
            } else {
                report.benign += 1;
                report.y += e.cosine / s;
                if let Some(ratio) = e.norm_ratio {
                    report.rho += e.cosine * ratio / s;
                }
            }
        }
        report.entries = entries;
        report
    }

    pub fn lambda_mean(&self) -> Option<f64> {
        let ls: Vec<f64> = self.entries.iter().filter_map(|e| e.lambda).collect();
        (!ls.is_empty()).then(|| ls.iter().sum::<f64>() / ls.len() as f64)
    }

    pub fn lambda_max(&self) -> Option<f64> {
        self.entries.iter().filter_map(|e| e.lambda).reduce(f64::max)
    }
}

/// Alignment entry for upload `g` of `worker` against `r`.
pub fn dod_entry(worker: usize, malicious: bool, g: &ParamVector, r: &ParamVector, lambda: Option<f64>) -> Result<DodEntry> {
    let ng = norm2(g);
    Ok(DodEntry {
        worker,
        malicious,
        cosine: cosine(g, r, ZERO_NORM_EPS)?,
        lambda,
        norm_ratio: (ng > ZERO_NORM_EPS).then(|| norm2(r) / ng),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::tasks::{make_quadratic_samples, HeterogeneousQuadratic};
    use crate::vecmath::dot;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec())
    }

    fn rand_vec<R: rand::Rng>(rng: &mut R, d: usize) -> ParamVector {
        ParamVector::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    fn close(a: &ParamVector, b: &ParamVector, tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn dod_examples() {
        let r = pv(&[0.4, -1.0, 2.0]);
        assert_eq!(dod(&r, &r, 0.7).unwrap(), 0.0);
        assert!((dod(&r.neg(), &r, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let l = dod(&pv(&[1.0, 0.0]), &pv(&[1.0, 1.0]), 0.5).unwrap();
        assert!((l - 0.1464466).abs() < 1e-7);
        assert!(dod(&r, &r, 1.5).is_err());
        assert!(matches!(dod(&pv(&[1.0]), &r, 0.5), Err(Error::Dimension { .. })));
    }

    #[test]
    fn modify_drag_examples() {
        let g = pv(&[1.0, 0.0]);
        let r = pv(&[0.0, 2.0]);
        assert_eq!(modify_drag(&g, &r, 0.0).unwrap(), g);
        let v = modify_drag(&g, &r, 0.5).unwrap();
        assert!(close(&v, &pv(&[0.5, 0.5]), 1e-15));
        // Gain along r̂ for c = 0.5, cos = 0: c (1 - cos)² ‖g‖ = 0.5.
        let r_hat = r.scaled(1.0 / norm2(&r));
        let gain = dot(&v, &r_hat).unwrap() - dot(&g, &r_hat).unwrap();
        assert!((gain - 0.5).abs() < 1e-15);
        assert_eq!(modify_drag(&g, &ParamVector::zeros(2), 0.7).unwrap(), g);
        assert!(modify_drag(&g, &r, 2.5).is_err());
    }

    #[test]
    fn modify_br_examples() {
        let r = pv(&[0.3, -0.4]);
        let v = modify_br(&r, &r, 0.0).unwrap();
        assert!(close(&v, &r, 1e-15));
        let v = modify_br(&pv(&[2.0, 0.0]), &pv(&[0.0, 1.0]), 0.5).unwrap();
        assert!(close(&v, &pv(&[0.5, 0.5]), 1e-15));
        let lambda = dod(&r.neg(), &r, 0.5).unwrap();
        assert_eq!(lambda, 1.0);
        assert!(close(&modify_br(&r.neg(), &r, lambda).unwrap(), &r, 1e-15));
        assert!(close(&modify_br(&ParamVector::zeros(2), &r, 0.4).unwrap(), &r.scaled(0.4), 0.0));
        assert_eq!(modify_br(&r, &ParamVector::zeros(2), 0.4).unwrap(), ParamVector::zeros(2));
    }

    #[test]
    fn reference_init_examples() {
        let a = pv(&[1.0, 2.0]);
        assert_eq!(reference_init(std::slice::from_ref(&a)).unwrap(), a);
        assert_eq!(reference_init(&[pv(&[2.0, 0.0]), pv(&[0.0, 2.0])]).unwrap(), pv(&[1.0, 1.0]));
        assert!(matches!(reference_init(&[]), Err(Error::Protocol(_))));
    }

    #[test]
    fn reference_step_examples() {
        let r = pv(&[1.0, -1.0]);
        let d = pv(&[3.0, 5.0]);
        let near = reference_step(&r, &d, 1.0 - 1e-9).unwrap();
        assert!(close(&near, &d, 1e-8));
        assert!(close(&reference_step(&r, &r, 0.3).unwrap(), &r, 1e-15));
    }

    #[test]
    fn closed_form_examples() {
        let g0 = pv(&[1.0, 0.0]);
        let d0 = pv(&[0.0, 4.0]);
        let a = 0.25;
        let one = closed_form_reference(&g0, std::slice::from_ref(&d0), a, 1).unwrap();
        assert!(close(&one, &pv(&[0.75, 1.0]), 1e-15));
        for t in 1..30 {
            for &alpha in &[0.01f64, 0.25, 0.75] {
                let w: f64 = (1.0 - alpha).powi(t) + (0..t).map(|i| alpha * (1.0 - alpha).powi(t - i - 1)).sum::<f64>();
                assert!((w - 1.0).abs() < 1e-12);
            }
        }
        assert!(closed_form_reference(&g0, &[], a, 1).is_err());
        assert!(closed_form_reference(&g0, &[], a, 0).is_err());
    }

    #[test]
    fn drag_state_tracks_closed_form() {
        let mut rng = stream(2, Purpose::Init, 0, 0);
        let mut st = DragState::new(0.25, 0.1, true).unwrap();
        st.seed(&[rand_vec(&mut rng, 4)]).unwrap();
        for _ in 0..50 {
            st.record_delta(rand_vec(&mut rng, 4));
            let cf = st.closed_form_next().unwrap().unwrap();
            let r = st.advance().unwrap().clone();
            assert!(close(&r, &cf, 1e-9));
        }
    }

    #[test]
    fn drag_state_rejects_bad_hyperparameters() {
        assert!(DragState::new(0.0, 0.1, false).is_err());
        assert!(DragState::new(1.0, 0.1, false).is_err());
        assert!(DragState::new(0.5, 1.1, false).is_err());
        let mut st = DragState::new(0.5, 0.1, false).unwrap();
        assert!(st.advance().is_err());
    }

    fn quadratic_root(batch: Option<usize>, steps: usize) -> (BrDragState, HeterogeneousQuadratic) {
        let q = HeterogeneousQuadratic::new(vec![0.5, 2.0], pv(&[1.0, -1.0])).unwrap();
        let mut rng = stream(1, Purpose::Data, 0, 0);
        let data = make_quadratic_samples(2, 40, 0.5, &mut rng).unwrap();
        let root = RootSet {
            data: Arc::new(data),
            objective: Arc::new(q.clone()),
        };
        (BrDragState::new(root, CtSchedule::Constant(0.5), 0.1, steps, batch).unwrap(), q)
    }

    #[test]
    fn root_reference_single_full_step_is_scaled_gradient() {
        let (st, q) = quadratic_root(None, 1);
        let theta = pv(&[3.0, 2.0]);
        let mut rng = stream(1, Purpose::RootBatch, 0, 0);
        let r = st.root_reference(&theta, &mut rng).unwrap();
        let expected = q.exact_grad(&theta).scaled(-0.1);
        assert!(close(&r, &expected, 1e-12));
        let at_opt = st.root_reference(&q.optimum, &mut rng).unwrap();
        assert!(norm2(&at_opt) < 1e-12);
    }

    #[test]
    fn root_reference_is_reproducible() {
        let (st, _) = quadratic_root(Some(4), 5);
        let theta = pv(&[0.0, 0.0]);
        let a = st.root_reference(&theta, &mut stream(9, Purpose::RootBatch, 0, 3)).unwrap();
        let b = st.root_reference(&theta, &mut stream(9, Purpose::RootBatch, 0, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn aggregate_examples() {
        let a = pv(&[0.5, 0.25]);
        assert_eq!(aggregate_modified(&[a.clone(), a.clone(), a.clone()]).unwrap(), a);
        assert_eq!(aggregate_modified(&[pv(&[1.0, 0.0]), pv(&[0.0, 1.0])]).unwrap(), pv(&[0.5, 0.5]));
        assert!(aggregate_modified(&[]).is_err());
    }

    #[test]
    fn ct_schedule_lookup() {
        let s = CtSchedule::PerRound(vec![0.2, 0.4]);
        assert_eq!(s.at(0).unwrap(), 0.2);
        assert_eq!(s.at(7).unwrap(), 0.4);
        assert!(CtSchedule::Constant(1.5).at(0).is_err());
        let f = CtSchedule::Custom(Arc::new(|t| if t < 2 { 0.9 } else { 0.5 }));
        assert_eq!(f.at(3).unwrap(), 0.5);
    }

    #[test]
    fn report_aggregates() {
        let r = pv(&[1.0, 0.0]);
        let entries = vec![
            dod_entry(0, false, &pv(&[2.0, 0.0]), &r, Some(0.0)).unwrap(),
            dod_entry(1, true, &pv(&[-1.0, 0.0]), &r, Some(1.0)).unwrap(),
        ];
        let rep = DodReport::from_entries(entries);
        assert!((rep.x + 0.5).abs() < 1e-15);
        assert!((rep.y - 0.5).abs() < 1e-15);
        assert!((rep.rho - 0.25).abs() < 1e-15);
        assert_eq!(rep.benign, 1);
        assert_eq!(rep.lambda_mean(), Some(0.5));
        assert_eq!(rep.lambda_max(), Some(1.0));
    }

    fn vecs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..8).prop_flat_map(|d| {
            (
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn dod_in_range_and_scale_invariant((g, r) in vecs(), c in 0.0f64..=1.0, k in 0.01f64..100.0, m in 0.01f64..100.0) {
            let g = ParamVector::new(g);
            let r = ParamVector::new(r);
            let l = dod(&g, &r, c).unwrap();
            prop_assert!((0.0..=2.0 * c).contains(&l));
            if norm2(&g) > 1e-6 && norm2(&r) > 1e-6 {
                let ls = dod(&g.scaled(k), &r.scaled(m), c).unwrap();
                prop_assert!((l - ls).abs() <= 1e-12);
            }
        }

        #[test]
        fn drag_alignment_gain((g, r) in vecs(), c in 0.0f64..=1.0) {
            let g = ParamVector::new(g);
            let r = ParamVector::new(r);
            prop_assume!(norm2(&g) > 1e-3 && norm2(&r) > 1e-3);
            let cos = cosine(&g, &r, ZERO_NORM_EPS).unwrap();
            let l = dod(&g, &r, c).unwrap();
            let v = modify_drag(&g, &r, l).unwrap();
            let r_hat = r.scaled(1.0 / norm2(&r));
            let gain = dot(&v, &r_hat).unwrap() - dot(&g, &r_hat).unwrap();
            let expected = c * (1.0 - cos).powi(2) * norm2(&g);
            prop_assert!((gain - expected).abs() <= 1e-10 * (1.0 + norm2(&g)));
            prop_assert!(gain >= -1e-12);
        }

        #[test]
        fn br_norm_bound((g, r) in vecs(), c in 0.0f64..=1.0) {
            let g = ParamVector::new(g);
            let r = ParamVector::new(r);
            let l = dod(&g, &r, c).unwrap();
            let v = modify_br(&g, &r, l).unwrap();
            let nr = norm2(&r);
            prop_assert!(norm2(&v) <= ((1.0 - l).abs() + l) * nr * (1.0 + 1e-12) + 1e-15);
            if l <= 1.0 {
                prop_assert!(norm2(&v) <= nr * (1.0 + 1e-12) + 1e-15);
            }
        }

        #[test]
        fn reference_step_is_convex(r in -5.0f64..5.0, d in -5.0f64..5.0, alpha in 0.001f64..0.999) {
            let out = reference_step(&pv(&[r]), &pv(&[d]), alpha).unwrap()[0];
            let (lo, hi) = if r <= d { (r, d) } else { (d, r) };
            prop_assert!(out >= lo - 1e-12 && out <= hi + 1e-12);
        }
    }
}
