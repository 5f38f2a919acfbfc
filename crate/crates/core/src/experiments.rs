//! Disorder-ensemble drivers: learnability sweeps, parameter scaling with
//! fit discrimination, entropy scans and the non-interacting control.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::{Ansatz, BackflowSpec, MlpSpec};
use crate::basis::{enumerate_sector, enumerate_spin_basis};
use crate::error::{Error, Result};
use crate::exact::{embed_sector_vector, ground_state, max_bipartition, renyi2_entropy, GroundState};
use crate::models::{
    build_df, build_qsk, default_sigma, hopping_orbitals, sample_disorder, DisorderRealization, HamiltonianOperator,
    QskParameters,
};
use crate::optimize::{relative_energy_error, train_fidelity, TrainConfig};
use crate::scalar::Scalar;
use crate::seed::split_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Qsk,
    Df,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzFamily {
    Mlp,
    Backflow,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Qsk => "qsk",
            Model::Df => "df",
        })
    }
}

impl fmt::Display for AnsatzFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnsatzFamily::Mlp => "mlp",
            AnsatzFamily::Backflow => "backflow",
        })
    }
}

/// Hidden-layer size, either as a density `alpha = m / L` or directly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Width {
    #[serde(rename = "alpha")]
    Density(f64),
    #[serde(rename = "hidden")]
    Hidden(usize),
}

impl Width {
    /// `max(1, round(alpha L))` for a density, the value itself otherwise.
    pub fn hidden(self, sites: usize) -> Result<usize> {
        match self {
            Width::Density(alpha) if alpha > 0.0 && alpha.is_finite() => {
                Ok(((alpha * sites as f64).round() as usize).max(1))
            }
            Width::Density(alpha) => Err(Error::Domain(format!("hidden-unit density must be positive, got {alpha}"))),
            Width::Hidden(0) => Err(Error::Domain("hidden width must be at least 1".into())),
            Width::Hidden(m) => Ok(m),
        }
    }
}

/// Model parameters shared by every realization of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Transverse field of the QSK model.
    pub field: f64,
    /// Disorder standard deviation; `1/sqrt(L)` when absent.
    pub sigma: Option<f64>,
    /// DF particle number; half filling when absent.
    pub particles: Option<usize>,
    /// Forces `V = 0`.
    pub interactions_off: bool,
    /// Forces `J = 0`.
    pub couplings_off: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { field: 1.0, sigma: None, particles: None, interactions_off: false, couplings_off: false }
    }
}

impl ModelConfig {
    pub fn particles_for(&self, sites: usize) -> usize {
        self.particles.unwrap_or(sites / 2)
    }

    pub fn sigma_for(&self, sites: usize) -> f64 {
        self.sigma.unwrap_or_else(|| default_sigma(sites))
    }
}

/// One disorder realization together with its Hamiltonian and exact ground state.
#[derive(Clone, Debug)]
pub struct Instance<T> {
    pub model: Model,
    pub disorder: DisorderRealization<T>,
    pub particles: Option<usize>,
    pub hamiltonian: HamiltonianOperator<T>,
    pub ground: GroundState<T>,
}

impl<T: Scalar> Instance<T> {
    /// Samples the disorder for `seed` and diagonalizes.
    pub fn sample(model: Model, sites: usize, config: &ModelConfig, seed: u64) -> Result<Self> {
        let disorder = sample_disorder(sites, seed, T::of(config.sigma_for(sites)))?;
        Self::from_disorder(model, disorder, config)
    }

    /// Builds the instance for explicit couplings, honoring the on/off switches.
    pub fn from_disorder(model: Model, disorder: DisorderRealization<T>, config: &ModelConfig) -> Result<Self> {
        let mut disorder = disorder;
        if config.interactions_off {
            disorder = disorder.without_interactions();
        }
        if config.couplings_off {
            disorder = disorder.without_couplings();
        }
        let sites = disorder.sites();
        let (hamiltonian, particles) = match model {
            Model::Qsk => {
                let params = QskParameters::from_disorder(&disorder, T::of(config.field))?;
                (build_qsk(&params, &enumerate_spin_basis(sites)?)?, None)
            }
            Model::Df => {
                let n = config.particles_for(sites);
                (build_df(&disorder, &enumerate_sector(sites, n)?)?, Some(n))
            }
        };
        let ground = ground_state(&hamiltonian)?;
        Ok(Self { model, disorder, particles, hamiltonian, ground })
    }

    pub fn sites(&self) -> usize {
        self.disorder.sites()
    }

    /// Ground state on the full `2^L` space, for entanglement measures.
    pub fn full_ground_vector(&self) -> Result<ndarray::Array1<T>> {
        match self.particles {
            None => Ok(self.ground.amplitudes.clone()),
            Some(n) => embed_sector_vector(self.ground.amplitudes.view(), &enumerate_sector(self.sites(), n)?),
        }
    }

    /// Ansatz of the given family and hidden width for this instance. The
    /// backflow reference orbitals are the lowest single-particle orbitals of
    /// the hopping matrix.
    pub fn ansatz(&self, family: AnsatzFamily, hidden: usize) -> Result<Ansatz<T>> {
        match (family, self.particles) {
            (AnsatzFamily::Mlp, _) => Ok(Ansatz::Mlp(MlpSpec::with_hidden(self.sites(), hidden)?)),
            (AnsatzFamily::Backflow, Some(n)) => {
                let (_, orbitals) = hopping_orbitals(&self.disorder, n)?;
                Ok(Ansatz::Backflow(BackflowSpec::new(self.sites(), n, hidden, orbitals)?))
            }
            (AnsatzFamily::Backflow, None) => {
                Err(Error::Domain("the backflow ansatz needs a fermionic particle sector".into()))
            }
        }
    }
}

/// Parameter count of `family` at hidden width `hidden`.
pub fn parameter_count(family: AnsatzFamily, sites: usize, particles: usize, hidden: usize) -> usize {
    match family {
        AnsatzFamily::Mlp => hidden * (sites + 2) + 1,
        AnsatzFamily::Backflow => hidden * (sites + 1) + (hidden + 1) * particles * sites,
    }
}

/// Smallest MLP width with at least `parameters` parameters.
pub fn matched_mlp_width(sites: usize, parameters: usize) -> usize {
    parameters.saturating_sub(1).div_ceil(sites + 2).max(1)
}

/// Everything that defines an ensemble run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub model: Model,
    pub ansatz: AnsatzFamily,
    #[serde(rename = "L")]
    pub sites: usize,
    pub width: Width,
    pub realizations: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub model_config: ModelConfig,
}

/// Per-realization outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub seed: u64,
    pub training_seed: u64,
    pub ground_energy: f64,
    pub final_infidelity: f64,
    pub rel_energy_error: f64,
    pub steps_used: usize,
    pub restarts_run: usize,
}

/// A realization left out of the statistics because `|E0|` is within the guard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRealization {
    pub index: usize,
    pub seed: u64,
    pub ground_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub model: Model,
    pub ansatz: AnsatzFamily,
    #[serde(rename = "L")]
    pub sites: usize,
    pub hidden: usize,
    pub alpha: f64,
    pub parameter_count: usize,
    pub n_realizations: usize,
    pub mean_infidelity: f64,
    pub sem_infidelity: f64,
    pub mean_rel_err: f64,
    pub sem_rel_err: f64,
    /// Set when only one realization entered the statistics (sem is then 0).
    pub single_sample: bool,
    pub master_seed: u64,
    pub config_hash: String,
    pub realizations: Vec<RealizationRecord>,
    pub excluded: Vec<ExcludedRealization>,
}

impl EnsembleSummary {
    /// Realizations individually below `threshold` infidelity.
    pub fn count_below(&self, threshold: f64) -> usize {
        self.realizations.iter().filter(|r| r.final_infidelity < threshold).count()
    }
}

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanAccumulator {
    count: usize,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 { f64::NAN } else { self.mean }
    }

    /// Sample standard deviation (n - 1 denominator); 0 for a single sample.
    pub fn std(&self) -> f64 {
        if self.count < 2 { 0.0 } else { (self.m2 / (self.count - 1) as f64).sqrt() }
    }

    pub fn sem(&self) -> f64 {
        if self.count < 2 { 0.0 } else { self.std() / (self.count as f64).sqrt() }
    }
}

impl FromIterator<f64> for MeanAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        iter.into_iter().for_each(|x| acc.push(x));
        acc
    }
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON serialization of a configuration.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(config)?))
}

/// Seed of realization `index` under `master_seed`.
pub fn realization_seed(master_seed: u64, index: usize) -> u64 {
    split_seed(master_seed, index as u64)
}

/// Seed of the training run of a realization.
pub fn training_seed(realization_seed: u64) -> u64 {
    split_seed(realization_seed, 1)
}

enum Outcome {
    Trained(RealizationRecord),
    Excluded(ExcludedRealization),
}

fn run_realization<T: Scalar>(spec: &EnsembleSpec, hidden: usize, train: &TrainConfig, index: usize) -> Result<Outcome> {
    let seed = realization_seed(spec.master_seed, index);
    let instance = Instance::<T>::sample(spec.model, spec.sites, &spec.model_config, seed)?;
    let ground_energy = instance.ground.energy.as_f64();
    if let Err(Error::ExcludedRealization(_)) = relative_energy_error(ground_energy, ground_energy) {
        return Ok(Outcome::Excluded(ExcludedRealization { index, seed, ground_energy }));
    }
    let ansatz = instance.ansatz(spec.ansatz, hidden)?;
    let tseed = training_seed(seed);
    let result = train_fidelity(&ansatz, &instance.ground, &instance.hamiltonian, train, tseed)?;
    Ok(Outcome::Trained(RealizationRecord {
        index,
        seed,
        training_seed: tseed,
        ground_energy,
        final_infidelity: result.final_infidelity,
        rel_energy_error: result.relative_energy_error,
        steps_used: result.steps_used,
        restarts_run: result.restarts_run,
    }))
}

/// Sample disorder, diagonalize and train for every realization, then
/// aggregate. Realizations run on the current rayon pool; the summary does
/// not depend on the number of workers.
pub fn run_ensemble<T: Scalar>(spec: &EnsembleSpec, train: &TrainConfig) -> Result<EnsembleSummary> {
    if spec.realizations == 0 {
        return Err(Error::Domain("an ensemble needs at least one realization".into()));
    }
    train.validate()?;
    let hidden = spec.width.hidden(spec.sites)?;
    let particles = match spec.model {
        Model::Qsk => 0,
        Model::Df => spec.model_config.particles_for(spec.sites),
    };
    let outcomes: Vec<Result<Outcome>> = (0..spec.realizations)
        .into_par_iter()
        .map(|index| run_realization::<T>(spec, hidden, train, index))
        .collect();
    let mut realizations = Vec::new();
    let mut excluded = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Outcome::Trained(r) => realizations.push(r),
            Outcome::Excluded(e) => excluded.push(e),
        }
    }
    let infidelity: MeanAccumulator = realizations.iter().map(|r| r.final_infidelity).collect();
    let rel_err: MeanAccumulator = realizations.iter().map(|r| r.rel_energy_error).collect();
    Ok(EnsembleSummary {
        model: spec.model,
        ansatz: spec.ansatz,
        sites: spec.sites,
        hidden,
        alpha: hidden as f64 / spec.sites as f64,
        parameter_count: parameter_count(spec.ansatz, spec.sites, particles, hidden),
        n_realizations: realizations.len(),
        mean_infidelity: infidelity.mean(),
        sem_infidelity: infidelity.sem(),
        mean_rel_err: rel_err.mean(),
        sem_rel_err: rel_err.sem(),
        single_sample: realizations.len() == 1,
        master_seed: spec.master_seed,
        config_hash: config_hash(&(spec, train))?,
        realizations,
        excluded,
    })
}

/// The non-interacting control: the same pipeline on DF with `V = 0`.
pub fn v_zero_control<T: Scalar>(
    sites: usize,
    realizations: usize,
    master_seed: u64,
    family: AnsatzFamily,
    width: Width,
    model_config: &ModelConfig,
    train: &TrainConfig,
) -> Result<EnsembleSummary> {
    let spec = EnsembleSpec {
        model: Model::Df,
        ansatz: family,
        sites,
        width,
        realizations,
        master_seed,
        model_config: ModelConfig { interactions_off: true, ..model_config.clone() },
    };
    run_ensemble::<T>(&spec, train)
}

/// Result of a monotone width search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WidthSearch {
    /// Smallest width meeting the target, with its error.
    Found { width: usize, error: f64 },
    /// Even the upper bound misses the target.
    Unbounded { width: usize, error: f64 },
}

/// Bisection for the smallest width in `[lo, hi]` with `error(width) <= target`,
/// assuming the error is non-increasing in width.
pub fn bisect_min_width<F>(lo: usize, hi: usize, target: f64, mut error: F) -> Result<WidthSearch>
where
    F: FnMut(usize) -> Result<f64>,
{
    if lo == 0 || lo > hi {
        return Err(Error::Domain(format!("invalid width bracket [{lo}, {hi}]")));
    }
    if !(target > 0.0) {
        return Err(Error::Domain(format!("target error must be positive, got {target}")));
    }
    let mut memo = BTreeMap::new();
    let mut eval = |m: usize| -> Result<f64> {
        if let Some(&e) = memo.get(&m) {
            return Ok(e);
        }
        let e = error(m)?;
        memo.insert(m, e);
        Ok(e)
    };
    let e_lo = eval(lo)?;
    if e_lo <= target {
        return Ok(WidthSearch::Found { width: lo, error: e_lo });
    }
    let e_hi = eval(hi)?;
    if !(e_hi <= target) {
        return Ok(WidthSearch::Unbounded { width: hi, error: e_hi });
    }
    let (mut fail, mut pass, mut pass_err) = (lo, hi, e_hi);
    while pass - fail > 1 {
        let mid = fail + (pass - fail) / 2;
        let e = eval(mid)?;
        if e <= target {
            pass = mid;
            pass_err = e;
        } else {
            fail = mid;
        }
    }
    Ok(WidthSearch::Found { width: pass, error: pass_err })
}

/// One point of a parameters-versus-size curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    #[serde(rename = "L")]
    pub sites: usize,
    /// For an unbounded point this is the count at the width cap, a lower bound.
    pub min_parameters: usize,
    pub hidden: Option<usize>,
    /// Ensemble-mean relative energy error at `hidden`; absent when extrapolated.
    pub achieved_error: Option<f64>,
    pub extrapolated: bool,
    pub unbounded: bool,
}

/// Settings for [`min_params_for_error`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSearch {
    pub model: Model,
    pub ansatz: AnsatzFamily,
    pub target_error: f64,
    pub min_width: usize,
    pub max_width: usize,
    pub realizations: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub model_config: ModelConfig,
}

/// Smallest hidden width whose ensemble-mean relative energy error is within
/// the target, converted to a parameter count.
pub fn min_params_for_error<T: Scalar>(search: &ScalingSearch, sites: usize, train: &TrainConfig) -> Result<ScalingPoint> {
    let particles = match search.model {
        Model::Qsk => 0,
        Model::Df => search.model_config.particles_for(sites),
    };
    let outcome = bisect_min_width(search.min_width, search.max_width, search.target_error, |m| {
        let spec = EnsembleSpec {
            model: search.model,
            ansatz: search.ansatz,
            sites,
            width: Width::Hidden(m),
            realizations: search.realizations,
            master_seed: search.master_seed,
            model_config: search.model_config.clone(),
        };
        let summary = run_ensemble::<T>(&spec, train)?;
        if summary.n_realizations == 0 {
            return Err(Error::InsufficientData(format!("every realization at L={sites} was excluded")));
        }
        Ok(summary.mean_rel_err)
    })?;
    let (width, error, unbounded) = match outcome {
        WidthSearch::Found { width, error } => (width, error, false),
        WidthSearch::Unbounded { width, error } => (width, error, true),
    };
    Ok(ScalingPoint {
        sites,
        min_parameters: parameter_count(search.ansatz, sites, particles, width),
        hidden: Some(width),
        achieved_error: Some(error),
        extrapolated: false,
        unbounded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitFamily {
    /// `ln p = a + b ln L`.
    Power,
    /// `ln p = a + b L`.
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub rss: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = intercept + slope x`. R² is 1 when `y` is constant.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!("a line fit needs matching samples, got {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("a line fit needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let tss: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if tss == 0.0 { 1.0 } else { 1.0 - rss / tss };
    Ok(LinearFit { intercept, slope, rss, r2 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub power: LinearFit,
    pub exponential: LinearFit,
    pub power_aic: f64,
    pub exponential_aic: f64,
    pub preferred: FitFamily,
    pub n_points: usize,
}

impl ScalingFit {
    /// Predicted `ln p` at `sites` under the preferred family.
    pub fn predict_log(&self, sites: usize) -> f64 {
        let l = sites as f64;
        match self.preferred {
            FitFamily::Power => self.power.intercept + self.power.slope * l.ln(),
            FitFamily::Exponential => self.exponential.intercept + self.exponential.slope * l,
        }
    }
}

fn aic(rss: f64, n: usize) -> f64 {
    // Floor keeps exact fits finite.
    let n = n as f64;
    n * (rss.max(1e-300) / n).ln() + 4.0
}

/// Fits power-law and exponential growth to the measured points and prefers
/// the lower AIC; ties go to the power law. Extrapolated and unbounded points
/// are ignored.
pub fn fit_scaling(points: &[ScalingPoint]) -> Result<ScalingFit> {
    let usable: Vec<&ScalingPoint> = points.iter().filter(|p| !p.extrapolated && !p.unbounded).collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!("a scaling fit needs 3 measured points, got {}", usable.len())));
    }
    if usable.iter().any(|p| p.min_parameters == 0 || p.sites == 0) {
        return Err(Error::Domain("scaling points need positive sizes and parameter counts".into()));
    }
    let l: Vec<f64> = usable.iter().map(|p| p.sites as f64).collect();
    let log_l: Vec<f64> = l.iter().map(|x| x.ln()).collect();
    let log_p: Vec<f64> = usable.iter().map(|p| (p.min_parameters as f64).ln()).collect();
    let power = linear_fit(&log_l, &log_p)?;
    let exponential = linear_fit(&l, &log_p)?;
    let (power_aic, exponential_aic) = (aic(power.rss, usable.len()), aic(exponential.rss, usable.len()));
    let preferred = if exponential_aic < power_aic { FitFamily::Exponential } else { FitFamily::Power };
    Ok(ScalingFit { power, exponential, power_aic, exponential_aic, preferred, n_points: usable.len() })
}

/// Parameter count predicted by the preferred fit, flagged as extrapolated.
pub fn extrapolate_params(fit: &ScalingFit, sites: usize) -> ScalingPoint {
    ScalingPoint {
        sites,
        min_parameters: fit.predict_log(sites).exp().round() as usize,
        hidden: None,
        achieved_error: None,
        extrapolated: true,
        unbounded: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    #[serde(rename = "L")]
    pub sites: usize,
    pub mean_s2: f64,
    pub sem: f64,
    pub n: usize,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyScan {
    pub model: Model,
    pub master_seed: u64,
    pub rows: Vec<EntropyRow>,
    /// Line fit of mean S2 against L.
    pub fit: LinearFit,
}

/// Ensemble-mean Rényi-2 entropy of the maximum bipartition at each size.
pub fn entropy_scan<T: Scalar>(
    model: Model,
    sizes: &[usize],
    realizations: usize,
    master_seed: u64,
    model_config: &ModelConfig,
) -> Result<EntropyScan> {
    if realizations == 0 {
        return Err(Error::Domain("an entropy scan needs at least one realization".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &sites in sizes {
        let partition = max_bipartition(sites)?;
        let seeds: Vec<u64> = (0..realizations).map(|r| realization_seed(master_seed, r)).collect();
        let values: Vec<Result<f64>> = seeds
            .par_iter()
            .map(|&seed| {
                let instance = Instance::<T>::sample(model, sites, model_config, seed)?;
                let psi = instance.full_ground_vector()?;
                Ok(renyi2_entropy(psi.view(), &partition)?.s2.as_f64())
            })
            .collect();
        let acc = values.into_iter().collect::<Result<Vec<_>>>()?.into_iter().collect::<MeanAccumulator>();
        rows.push(EntropyRow { sites, mean_s2: acc.mean(), sem: acc.sem(), n: acc.count(), seeds });
    }
    let l: Vec<f64> = rows.iter().map(|r| r.sites as f64).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.mean_s2).collect();
    let fit = linear_fit(&l, &s)?;
    Ok(EntropyScan { model, master_seed, rows, fit })
}

fn csv_writer<W: Write>(writer: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    Ok(w)
}

/// `fig_a.csv`: ensemble-mean infidelity per size.
pub fn write_fig_a<W: Write>(writer: W, rows: &[EnsembleSummary]) -> Result<()> {
    let mut w = csv_writer(writer, &["model", "ansatz", "L", "alpha", "mean_infidelity", "sem", "n"])?;
    for s in rows {
        w.serialize((s.model, s.ansatz, s.sites, s.alpha, s.mean_infidelity, s.sem_infidelity, s.n_realizations))?;
    }
    w.flush()?;
    Ok(())
}

/// `fig_b.csv`: ensemble-mean relative energy error per size.
pub fn write_fig_b<W: Write>(writer: W, rows: &[EnsembleSummary]) -> Result<()> {
    let mut w = csv_writer(writer, &["model", "ansatz", "L", "alpha", "mean_rel_err", "sem", "n"])?;
    for s in rows {
        w.serialize((s.model, s.ansatz, s.sites, s.alpha, s.mean_rel_err, s.sem_rel_err, s.n_realizations))?;
    }
    w.flush()?;
    Ok(())
}

/// `fig_c.csv`: parameters needed for the target error. Missing errors are empty cells.
pub fn write_fig_c<W: Write>(writer: W, model: Model, ansatz: AnsatzFamily, points: &[ScalingPoint]) -> Result<()> {
    let mut w = csv_writer(writer, &["model", "ansatz", "L", "min_params", "achieved_error", "extrapolated"])?;
    for p in points {
        w.serialize((model, ansatz, p.sites, p.min_parameters, p.achieved_error, p.extrapolated))?;
    }
    w.flush()?;
    Ok(())
}

/// `fig_d.csv`: entropy per size, with the line fit repeated on each row.
pub fn write_fig_d<W: Write>(writer: W, scans: &[EntropyScan]) -> Result<()> {
    let mut w = csv_writer(writer, &["model", "L", "mean_S2", "sem", "slope", "r2"])?;
    for scan in scans {
        for r in &scan.rows {
            w.serialize((scan.model, r.sites, r.mean_s2, r.sem, scan.fit.slope, scan.fit.r2))?;
        }
    }
    w.flush()?;
    Ok(())
}
