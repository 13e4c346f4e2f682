//! Comparison aggregators: drift-mitigation baselines (FedAvg, FedProx,
//! SCAFFOLD, FedExP, FedACG) and robust ones (FLTrust, RFA, RAGA).

use crate::error::{Error, Result};
use crate::vecmath::{cosine, mean, norm2, ParamVector, ZERO_NORM_EPS};

/// Distance floor in the Weiszfeld weights.
pub const GEOMED_DISTANCE_FLOOR: f64 = 1e-12;

pub fn fedavg_aggregate(uploads: &[ParamVector]) -> Result<ParamVector> {
    mean(uploads)
}

/// `θ_local - η (∇F + μ (θ_local - θ_global))`
pub fn fedprox_local_step(
    theta_local: &ParamVector,
    theta_global: &ParamVector,
    grad: &ParamVector,
    eta: f64,
    mu: f64,
) -> Result<ParamVector> {
    grad.ensure_dim(theta_local.dim())?;
    theta_global.ensure_dim(theta_local.dim())?;
    Ok(ParamVector::new(
        theta_local
            .iter()
            .zip(theta_global.iter())
            .zip(grad.iter())
            .map(|((l, g0), d)| l - eta * (d + mu * (l - g0)))
            .collect(),
    ))
}

/// `θ - η (∇F - h_m + h)`
pub fn scaffold_local_step(
    theta: &ParamVector,
    grad: &ParamVector,
    h_local: &ParamVector,
    h_global: &ParamVector,
    eta: f64,
) -> Result<ParamVector> {
    grad.ensure_dim(theta.dim())?;
    h_local.ensure_dim(theta.dim())?;
    h_global.ensure_dim(theta.dim())?;
    Ok(ParamVector::new(
        (0..theta.dim())
            .map(|j| theta[j] - eta * (grad[j] - h_local[j] + h_global[j]))
            .collect(),
    ))
}

/// Control variates: one per worker plus the server copy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaffoldControls {
    pub global: ParamVector,
    pub local: Vec<ParamVector>,
}

impl ScaffoldControls {
    pub fn new(workers: usize, dim: usize) -> Self {
        ScaffoldControls {
            global: ParamVector::zeros(dim),
            local: vec![ParamVector::zeros(dim); workers],
        }
    }

    /// Refresh with each selected worker's gradient at the round's global
    /// model on its first batch:
    /// `h_m ← ∇F_m`, `h ← h + (1/M) Σ_selected (∇F_m - h_m_old)`.
    pub fn update(&mut self, refreshed: &[(usize, ParamVector)]) -> Result<()> {
        let m = self.local.len() as f64;
        for (worker, fresh) in refreshed {
            let old = self
                .local
                .get(*worker)
                .ok_or_else(|| Error::Protocol(format!("unknown worker {worker}")))?;
            let diff = fresh.sub(old)?;
            self.global.axpy(1.0 / m, &diff)?;
            self.local[*worker] = fresh.clone();
        }
        Ok(())
    }

    /// Mean of all local controls; equals `global` when every update went
    /// through [`ScaffoldControls::update`] from zero.
    pub fn local_mean(&self) -> Result<ParamVector> {
        mean(&self.local)
    }
}

/// Server extrapolation: returns `(η_g, η_g · mean(uploads))` with
/// `η_g = max(1, Σ‖g‖² / (2S(‖mean‖² + ε)))`.
pub fn fedexp_step(uploads: &[ParamVector], epsilon: f64) -> Result<(f64, ParamVector)> {
    if !(epsilon > 0.0) {
        return Err(Error::config("epsilon", "must be positive"));
    }
    let avg = mean(uploads)?;
    let s = uploads.len() as f64;
    let sq: f64 = uploads.iter().map(|g| norm2(g).powi(2)).sum();
    let eta_g = (sq / (2.0 * s * (norm2(&avg).powi(2) + epsilon))).max(1.0);
    Ok((eta_g, avg.scaled(eta_g)))
}

/// Lookahead momentum for FedACG.
#[derive(Debug, Clone, PartialEq)]
pub struct FedAcgState {
    pub momentum: ParamVector,
    pub beta: f64,
    pub lambda: f64,
}

impl FedAcgState {
    pub const DEFAULT_BETA: f64 = 0.2;
    pub const DEFAULT_LAMBDA: f64 = 0.85;

    pub fn new(dim: usize, beta: f64, lambda: f64) -> Result<Self> {
        if beta < 0.0 {
            return Err(Error::config("acg_beta", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::config("acg_lambda", "must lie in [0, 1)"));
        }
        Ok(FedAcgState {
            momentum: ParamVector::zeros(dim),
            beta,
            lambda,
        })
    }

    /// Lookahead point broadcast to workers: `θ + λ m`.
    pub fn lookahead(&self, theta: &ParamVector) -> Result<ParamVector> {
        let mut a = theta.clone();
        a.axpy(self.lambda, &self.momentum)?;
        Ok(a)
    }

    /// `m ← λ m + mean(uploads)`, `θ ← θ + m`.
    pub fn finish_round(&mut self, theta: &ParamVector, uploads: &[ParamVector]) -> Result<ParamVector> {
        let avg = mean(uploads)?;
        let mut m = self.momentum.scaled(self.lambda);
        m.axpy(1.0, &avg)?;
        self.momentum = m;
        theta.add(&self.momentum)
    }
}

/// `θ_local - η (∇F + β (θ_local - anchor))`
pub fn fedacg_local_step(
    theta_local: &ParamVector,
    anchor: &ParamVector,
    grad: &ParamVector,
    eta: f64,
    beta: f64,
) -> Result<ParamVector> {
    fedprox_local_step(theta_local, anchor, grad, eta, beta)
}

/// `max(0, cos(g, r)) · ‖g‖ · r/‖r‖`
pub fn fltrust_modify(g: &ParamVector, r: &ParamVector) -> Result<ParamVector> {
    let nr = norm2(r);
    let cos = cosine(g, r, ZERO_NORM_EPS)?;
    if nr <= ZERO_NORM_EPS || cos <= 0.0 {
        return Ok(ParamVector::zeros(g.dim()));
    }
    Ok(r.scaled(cos * norm2(g) / nr))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoMedian {
    /// Lowest-objective iterate seen.
    pub point: ParamVector,
    pub iterations: usize,
    /// False when `max_iter` ran out before the step fell below `tol`.
    pub converged: bool,
    /// `Σ‖x_i - y_k‖` for every iterate, starting from the mean.
    pub objective_trace: Vec<f64>,
}

/// Sum of Euclidean distances from `y` to `points`.
pub fn geomed_objective(points: &[ParamVector], y: &ParamVector) -> Result<f64> {
    points.iter().map(|x| Ok(norm2(&x.sub(y)?))).sum()
}

/// Weiszfeld fixed-point iteration for the geometric median, started at
/// the mean.
pub fn weiszfeld_geomed(points: &[ParamVector], tol: f64, max_iter: usize) -> Result<GeoMedian> {
    if !(tol > 0.0) {
        return Err(Error::config("geomed_tol", "must be positive"));
    }
    let mut y = mean(points)?;
    let d = y.dim();
    let mut trace = Vec::new();
    let mut best = (f64::INFINITY, y.clone());
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let mut num = ParamVector::zeros(d);
        let mut den = 0.0;
        let mut obj = 0.0;
        for x in points {
            let dist = norm2(&x.sub(&y)?);
            obj += dist;
            let w = 1.0 / dist.max(GEOMED_DISTANCE_FLOOR);
            num.axpy(w, x)?;
            den += w;
        }
        trace.push(obj);
        if obj < best.0 {
            best = (obj, y.clone());
        }
        let next = num.scaled(1.0 / den);
        let step = norm2(&next.sub(&y)?);
        y = next;
        iterations += 1;
        if step < tol {
            converged = true;
            break;
        }
    }
    let obj = geomed_objective(points, &y)?;
    trace.push(obj);
    if obj < best.0 {
        best = (obj, y);
    }
    Ok(GeoMedian {
        point: best.1,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Geometric median of local models: the next global model directly.
pub fn rfa_aggregate(local_models: &[ParamVector], tol: f64, max_iter: usize) -> Result<GeoMedian> {
    weiszfeld_geomed(local_models, tol, max_iter)
}

/// Geometric median of local updates, added to the global model.
pub fn raga_aggregate(local_updates: &[ParamVector], tol: f64, max_iter: usize) -> Result<GeoMedian> {
    weiszfeld_geomed(local_updates, tol, max_iter)
}
