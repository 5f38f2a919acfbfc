//! Full-summation fidelity training of an ansatz toward an exact target.
//!
//! The loss is `-ln F` with `F = (psi.phi)^2 / ((psi.psi)(phi.phi))`, whose
//! gradient for real amplitudes is
//! `2 [ J^T phi / (psi.phi) - J^T psi / (psi.psi) ]`, `J = d psi / d theta`.
//! Every sum runs over the whole basis; there is no sampling.

use std::io::Write;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, FlatParameters, InputBatch};
use crate::basis::states_for;
use crate::error::{Error, Result};
use crate::exact::GroundState;
use crate::models::HamiltonianOperator;
use crate::scalar::Scalar;
use crate::seed::split_seed;

/// Guard below which a ground energy is too small for a relative error.
pub const ENERGY_GUARD: f64 = 1e-8;

/// Optimizer and stopping-rule settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_steps: usize,
    pub learning_rate: f64,
    /// When set, the step size decays geometrically from `learning_rate` at
    /// step 0 to this value at `max_steps`.
    pub final_learning_rate: Option<f64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub target_infidelity: f64,
    /// Steps without a new best infidelity before a descent is abandoned.
    pub patience: usize,
    /// Independent initializations; a sign-blocked start uses one up.
    pub restarts: usize,
    /// Multiplier of the `1/sqrt(fan_in)` initialization width.
    pub init_scale: f64,
    /// A trace sample is recorded every `trace_stride` steps.
    pub trace_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_steps: 50_000,
            learning_rate: 1e-2,
            final_learning_rate: None,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            target_infidelity: 1e-3,
            patience: 2_000,
            restarts: 3,
            init_scale: 1.0,
            trace_stride: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Domain(format!("invalid training config: {what}")));
        if !(self.learning_rate > 0.0) || self.final_learning_rate.is_some_and(|lr| !(lr > 0.0)) {
            return bad("learning rates must be positive");
        }
        if !(self.target_infidelity > 0.0 && self.target_infidelity < 1.0) {
            return bad("target_infidelity must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) || !(self.init_scale > 0.0) {
            return bad("adam_eps and init_scale must be positive");
        }
        if self.restarts == 0 || self.trace_stride == 0 || self.patience == 0 {
            return bad("restarts, trace_stride and patience must be at least 1");
        }
        Ok(())
    }
}

/// Adam moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub first: Vec<T>,
    pub second: Vec<T>,
    pub step: u64,
}

impl TrainConfig {
    /// Step size used for update number `step` (0-based).
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        match self.final_learning_rate {
            Some(last) if self.max_steps > 0 => {
                let t = (step as f64 / self.max_steps as f64).min(1.0);
                self.learning_rate * (last / self.learning_rate).powf(t)
            }
            _ => self.learning_rate,
        }
    }
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self { first: vec![T::zero(); len], second: vec![T::zero(); len], step: 0 }
    }

    /// One descent step on `params` along the loss gradient `grad`.
    pub fn update(&mut self, params: &mut [T], grad: &[T], config: &TrainConfig) {
        let lr = config.learning_rate_at(self.step as usize);
        self.update_with_rate(params, grad, config, lr);
    }

    /// [`AdamState::update`] with an explicit step size.
    pub fn update_with_rate(&mut self, params: &mut [T], grad: &[T], config: &TrainConfig, learning_rate: f64) {
        debug_assert_eq!(params.len(), self.first.len());
        debug_assert_eq!(grad.len(), self.first.len());
        self.step += 1;
        let b1 = T::of(config.adam_beta1);
        let b2 = T::of(config.adam_beta2);
        let lr = T::of(learning_rate);
        let eps = T::of(config.adam_eps);
        let t = self.step as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.first).zip(&mut self.second) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// One recorded sample of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub infidelity: f64,
    pub best_infidelity: f64,
    pub rel_energy_error: f64,
}

/// Outcome of [`train_fidelity`]: the best of the independent descents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainResult<T> {
    pub final_infidelity: f64,
    pub final_energy: f64,
    pub ground_energy: f64,
    pub relative_energy_error: f64,
    pub steps_used: usize,
    /// Index of the winning descent among those run.
    pub best_restart: usize,
    pub restarts_run: usize,
    pub sign_blocked_starts: usize,
    pub seed: u64,
    pub parameters: FlatParameters<T>,
    pub trace: Vec<TracePoint>,
}

impl<T: Scalar> TrainResult<T> {
    /// Writes the trace as CSV with columns `step,infidelity,rel_energy_error`.
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["step", "infidelity", "rel_energy_error"])?;
        for p in &self.trace {
            csv.write_record([
                p.step.to_string(),
                format!("{:e}", p.infidelity),
                format!("{:e}", p.rel_energy_error),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// `psi(s)` for every configuration of the batch, in batch order.
pub fn batch_amplitudes<T: Scalar>(ansatz: &Ansatz<T>, params: &FlatParameters<T>, batch: &InputBatch<T>) -> Result<Array1<T>> {
    ansatz.amplitudes(params, batch)
}

fn nonzero_norm<T: Scalar>(v: ArrayView1<T>, what: &str) -> Result<T> {
    let n = v.dot(&v);
    if n == T::zero() || !n.is_finite() {
        return Err(Error::DegenerateInput(format!("{what} has zero or non-finite norm")));
    }
    Ok(n)
}

/// Squared normalized overlap of two real vectors, in `[0, 1]`.
pub fn fidelity<T: Scalar>(psi: ArrayView1<T>, phi: ArrayView1<T>) -> Result<T> {
    if psi.len() != phi.len() {
        return Err(Error::ContractViolation(format!("vector lengths {} and {}", psi.len(), phi.len())));
    }
    let pp = nonzero_norm(psi, "psi")?;
    let ff = nonzero_norm(phi, "phi")?;
    let pf = psi.dot(&phi);
    Ok(((pf / pp) * (pf / ff)).min(T::one()).max(T::zero()))
}

/// Gradient of `ln F(psi_theta, phi)` with respect to the parameters.
pub fn log_fidelity_gradient<T: Scalar>(
    ansatz: &Ansatz<T>,
    params: &FlatParameters<T>,
    phi: ArrayView1<T>,
    batch: &InputBatch<T>,
) -> Result<FlatParameters<T>> {
    let pass = ansatz.forward(params, batch)?;
    let weights = log_fidelity_weights(pass.amplitudes().view(), phi)?;
    ansatz.backward(params, batch, &pass, weights.view())
}

/// `2 (phi / (psi.phi) - psi / (psi.psi))`: contracting these weights with
/// `d psi / d theta` gives the gradient of `ln F`.
fn log_fidelity_weights<T: Scalar>(psi: ArrayView1<T>, phi: ArrayView1<T>) -> Result<Array1<T>> {
    if psi.len() != phi.len() {
        return Err(Error::ContractViolation(format!("vector lengths {} and {}", psi.len(), phi.len())));
    }
    let pp = nonzero_norm(psi, "psi")?;
    nonzero_norm(phi, "phi")?;
    let pf = psi.dot(&phi);
    if pf == T::zero() {
        return Err(Error::SignBlocked);
    }
    let two = T::of(2.0);
    Ok(ndarray::Zip::from(&psi).and(&phi).map_collect(|&p, &f| two * (f / pf - p / pp)))
}

/// Rayleigh quotient `psi^T H psi / psi^T psi`.
pub fn variational_energy<T: Scalar>(psi: ArrayView1<T>, h: &HamiltonianOperator<T>) -> Result<T> {
    let norm = nonzero_norm(psi, "psi")?;
    Ok(h.expectation(psi)? / norm)
}

/// `|E - E0| / |E0|`, refusing ground energies within the guard of zero.
pub fn relative_energy_error<T: Scalar>(energy: T, ground: T) -> Result<T> {
    if ground.abs() <= T::of(ENERGY_GUARD) {
        return Err(Error::ExcludedRealization(ground.as_f64()));
    }
    Ok((energy - ground).abs() / ground.abs())
}

struct Descent<T> {
    best_infidelity: f64,
    best_params: FlatParameters<T>,
    steps: usize,
    blocked: bool,
    trace: Vec<TracePoint>,
}

/// Runs Adam on `-ln F` from a fresh initialization. A start with exactly
/// zero overlap stops at step 0 with `blocked` set.
fn descend<T: Scalar>(
    ansatz: &Ansatz<T>,
    target: &GroundState<T>,
    h: &HamiltonianOperator<T>,
    batch: &InputBatch<T>,
    config: &TrainConfig,
    seed: u64,
) -> Result<Descent<T>> {
    let phi = target.amplitudes.view();
    let ground = target.energy;
    let mut params = ansatz.init_parameters(seed, config.init_scale)?;
    let mut adam = AdamState::new(params.len());
    let mut best: Option<(f64, FlatParameters<T>)> = None;
    let mut trace = Vec::new();
    let mut last_improvement = 0;
    let mut step = 0;
    let mut blocked = false;
    loop {
        let pass = ansatz.forward(&params, batch)?;
        let psi = pass.amplitudes().view();
        let weights = match log_fidelity_weights(psi, phi) {
            Ok(w) => Some(w),
            Err(Error::SignBlocked) | Err(Error::DegenerateInput(_)) => None,
            Err(e) => return Err(e),
        };
        blocked |= step == 0 && weights.is_none();
        let infidelity = match &weights {
            Some(_) => 1.0 - fidelity(psi, phi)?.as_f64(),
            None => 1.0,
        };
        let best_so_far = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if infidelity < best_so_far {
            best = Some((infidelity, params.clone()));
            last_improvement = step;
        }
        let best_infidelity = best.as_ref().map_or(1.0, |b| b.0);
        let done = weights.is_none()
            || best_infidelity < config.target_infidelity
            || step - last_improvement >= config.patience
            || step >= config.max_steps;
        if step % config.trace_stride == 0 || done {
            let rel = match variational_energy(psi, h) {
                Ok(e) => relative_energy_error(e, ground)?.as_f64(),
                Err(_) => f64::NAN,
            };
            trace.push(TracePoint { step, infidelity, best_infidelity, rel_energy_error: rel });
        }
        if done {
            break;
        }
        let mut grad = ansatz.backward(&params, batch, &pass, weights.as_ref().unwrap().view())?;
        // Descend on -ln F.
        grad.values.iter_mut().for_each(|g| *g = -*g);
        adam.update(&mut params.values, &grad.values, config);
        step += 1;
    }
    let (best_infidelity, best_params) = best.expect("at least one evaluated step");
    Ok(Descent { best_infidelity, best_params, steps: step, blocked, trace })
}

/// Fidelity optimization of `ansatz` toward `target`.
///
/// Runs up to `config.restarts` independent descents seeded from
/// `split_seed(seed, k)`, stopping early once one of them reaches the target
/// infidelity, and returns the best one.
pub fn train_fidelity<T: Scalar>(
    ansatz: &Ansatz<T>,
    target: &GroundState<T>,
    h: &HamiltonianOperator<T>,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainResult<T>> {
    config.validate()?;
    if h.dim() != target.dim() || h.basis() != target.basis {
        return Err(Error::ContractViolation("target and Hamiltonian live on different bases".into()));
    }
    if target.basis.sites() != ansatz.sites() {
        return Err(Error::ContractViolation(format!(
            "{}-site ansatz for a {}-site target",
            ansatz.sites(),
            target.basis.sites()
        )));
    }
    // Refuse excluded realizations before spending any steps on them.
    relative_energy_error(target.energy, target.energy)?;
    let batch = InputBatch::new(&states_for(target.basis)?)?;

    let mut winner: Option<(usize, Descent<T>)> = None;
    let mut blocked = 0;
    let mut run = 0;
    while run < config.restarts {
        let attempt = ansatz_seed(seed, run);
        run += 1;
        let descent = descend(ansatz, target, h, &batch, config, attempt)?;
        blocked += usize::from(descent.blocked);
        let reached = descent.best_infidelity < config.target_infidelity;
        if winner.as_ref().is_none_or(|(_, w)| descent.best_infidelity < w.best_infidelity) {
            winner = Some((run - 1, descent));
        }
        if reached {
            break;
        }
    }
    let (best_restart, descent) = winner.expect("restarts >= 1");
    let psi = ansatz.amplitudes(&descent.best_params, &batch)?;
    let energy = variational_energy(psi.view(), h)?;
    Ok(TrainResult {
        final_infidelity: descent.best_infidelity.clamp(0.0, 1.0),
        final_energy: energy.as_f64(),
        ground_energy: target.energy.as_f64(),
        relative_energy_error: relative_energy_error(energy, target.energy)?.as_f64(),
        steps_used: descent.steps,
        best_restart,
        restarts_run: run,
        sign_blocked_starts: blocked,
        seed,
        parameters: descent.best_params,
        trace: descent.trace,
    })
}

/// Initialization seed of descent `run`.
pub fn ansatz_seed(seed: u64, run: usize) -> u64 {
    split_seed(seed, run as u64)
}
