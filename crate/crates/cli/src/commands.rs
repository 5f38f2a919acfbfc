use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use nqs_core::exact::{max_bipartition, renyi2_entropy};
use nqs_core::experiments::{
    config_hash, entropy_scan, extrapolate_params, fit_scaling, min_params_for_error, realization_seed, run_ensemble,
    sha256_hex, training_seed, write_fig_a, write_fig_b, write_fig_c, write_fig_d, EnsembleSpec, Instance, ScalingSearch,
};
use nqs_core::models::{DisorderRealization, DisorderRecord};
use nqs_core::optimize::train_fidelity;
use nqs_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{usage, RunConfig};

/// Files written by a command, in write order, plus the seeds it used.
struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<(String, String)>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push((name.to_owned(), sha256_hex(&bytes)));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, bytes)
    }

    fn manifest(self, command: &str, config: &RunConfig, seeds: Value) -> anyhow::Result<()> {
        let outputs: serde_json::Map<String, Value> =
            self.files.into_iter().map(|(name, hash)| (name, Value::String(hash))).collect();
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "config_hash": config_hash(&config.hashed())?,
            "seeds": seeds,
            "outputs": outputs,
            "timestamp": timestamp,
        });
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.dir.join("manifest.json"), bytes).context("writing manifest.json")?;
        Ok(())
    }
}

pub fn execute(command: &str, config: &RunConfig) -> anyhow::Result<()> {
    match command {
        "ed" => ed(config),
        "learn" => learn(config),
        "entropy" => entropy(config),
        "scaling" => scaling(config),
        "report" => report(config),
        other => usage(format!("unknown command `{other}`")),
    }
}

/// The single instance named by the config: a disorder file if given,
/// otherwise a sample drawn with `seed`.
fn instance(config: &RunConfig) -> anyhow::Result<Instance<f64>> {
    let model = config.require_model()?;
    let model_config = config.model_config();
    let inst = match &config.disorder {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading disorder {}", path.display()))?;
            let record: DisorderRecord = serde_json::from_str(&text)
                .map_err(|e| crate::config::UsageError(format!("disorder {}: {e}", path.display())))?;
            if config.sites.is_some_and(|l| l != record.sites) {
                return usage(format!("--L {} disagrees with the disorder file (L = {})", config.sites.unwrap(), record.sites));
            }
            Instance::from_disorder(model, DisorderRealization::from_record(&record)?, &model_config)?
        }
        None => Instance::sample(model, config.require_sites()?, &model_config, config.seed)?,
    };
    Ok(inst)
}

#[derive(Serialize)]
struct EdReport<'a> {
    ground_state: &'a nqs_core::GroundState,
    s2: Option<f64>,
    disorder: DisorderRecord,
}

fn ed(config: &RunConfig) -> anyhow::Result<()> {
    let inst = instance(config)?;
    let s2 = if inst.sites() >= 2 {
        let psi = inst.full_ground_vector()?;
        Some(renyi2_entropy(psi.view(), &max_bipartition(inst.sites())?)?.s2)
    } else {
        None
    };
    let mut out = Outputs::new(&config.out)?;
    out.json("ground_state.json", &EdReport { ground_state: &inst.ground, s2, disorder: inst.disorder.to_record() })?;
    out.manifest("ed", config, json!({ "disorder": inst.disorder.seed() }))?;
    println!("E0 = {:.12}", inst.ground.energy);
    if let Some(s) = s2 {
        println!("S2 = {s:.12}");
    }
    Ok(())
}

fn learn(config: &RunConfig) -> anyhow::Result<()> {
    let inst = instance(config)?;
    let hidden = config.width()?.hidden(inst.sites())?;
    let ansatz = inst.ansatz(config.ansatz, hidden)?;
    let seed = training_seed(config.seed);
    let result = train_fidelity(&ansatz, &inst.ground, &inst.hamiltonian, &config.train, seed)?;
    let mut out = Outputs::new(&config.out)?;
    out.json("train_result.json", &result)?;
    let mut trace = Vec::new();
    result.write_trace_csv(&mut trace)?;
    out.write("trace.csv", trace)?;
    out.manifest("learn", config, json!({ "disorder": inst.disorder.seed(), "training": seed }))?;
    println!("parameters = {}", ansatz.parameter_count());
    println!("final_infidelity = {:.6e}", result.final_infidelity);
    println!("relative_energy_error = {:.6e}", result.relative_energy_error);
    println!(
        "target {} (infidelity < {:e})",
        if result.final_infidelity < config.train.target_infidelity { "reached" } else { "not reached" },
        config.train.target_infidelity
    );
    Ok(())
}

fn realization_seeds(config: &RunConfig) -> Vec<u64> {
    (0..config.realizations).map(|r| realization_seed(config.seed, r)).collect()
}

fn entropy(config: &RunConfig) -> anyhow::Result<()> {
    let model = config.require_model()?;
    let sizes = config.require_sizes()?;
    let scan = entropy_scan::<f64>(model, sizes, config.realizations, config.seed, &config.model_config())?;
    let mut out = Outputs::new(&config.out)?;
    let mut csv = Vec::new();
    write_fig_d(&mut csv, std::slice::from_ref(&scan))?;
    out.write("fig_d.csv", csv)?;
    out.json("entropy.json", &scan)?;
    out.manifest("entropy", config, json!({ "master": config.seed, "realizations": realization_seeds(config) }))?;
    for r in &scan.rows {
        println!("L = {:>2}  S2 = {:.6} ± {:.6}", r.sites, r.mean_s2, r.sem);
    }
    println!("slope = {:.6}  r2 = {:.6}", scan.fit.slope, scan.fit.r2);
    Ok(())
}

fn scaling(config: &RunConfig) -> anyhow::Result<()> {
    let model = config.require_model()?;
    let sizes = config.require_sizes()?;
    let search = ScalingSearch {
        model,
        ansatz: config.ansatz,
        target_error: config.target_error,
        min_width: config.min_width,
        max_width: config.max_width,
        realizations: config.realizations,
        master_seed: config.seed,
        model_config: config.model_config(),
    };
    let mut points = Vec::with_capacity(sizes.len());
    for &l in sizes {
        let p = min_params_for_error::<f64>(&search, l, &config.train)?;
        println!(
            "L = {:>2}  min_params = {}{}",
            l,
            p.min_parameters,
            if p.unbounded { "  (width cap reached: unbounded)" } else { "" }
        );
        points.push(p);
    }
    let (fit, fit_error) = match fit_scaling(&points) {
        Ok(fit) => (Some(fit), None),
        Err(e @ Error::InsufficientData(_)) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    if let Some(fit) = &fit {
        for &l in &config.extrapolate {
            points.push(extrapolate_params(fit, l));
        }
        println!(
            "preferred = {:?}  power slope = {:.4} (rss {:.3e})  exponential rate = {:.4} (rss {:.3e})",
            fit.preferred, fit.power.slope, fit.power.rss, fit.exponential.slope, fit.exponential.rss
        );
    } else if let Some(msg) = &fit_error {
        println!("no fit: {msg}");
    }
    let mut out = Outputs::new(&config.out)?;
    let mut csv = Vec::new();
    write_fig_c(&mut csv, model, config.ansatz, &points)?;
    out.write("fig_c.csv", csv)?;
    out.json("scaling.json", &json!({ "search": search, "points": points, "fit": fit, "fit_error": fit_error }))?;
    out.manifest("scaling", config, json!({ "master": config.seed, "realizations": realization_seeds(config) }))?;
    Ok(())
}

fn report(config: &RunConfig) -> anyhow::Result<()> {
    let model = config.require_model()?;
    let sizes = config.require_sizes()?;
    let width = config.width()?;
    let mut summaries = Vec::with_capacity(sizes.len());
    for &l in sizes {
        let spec = EnsembleSpec {
            model,
            ansatz: config.ansatz,
            sites: l,
            width,
            realizations: config.realizations,
            master_seed: config.seed,
            model_config: config.model_config(),
        };
        let s = run_ensemble::<f64>(&spec, &config.train)?;
        println!(
            "L = {:>2}  params = {}  infidelity = {:.3e} ± {:.1e}  rel_err = {:.3e} ± {:.1e}  below target {}/{}  excluded {}",
            l,
            s.parameter_count,
            s.mean_infidelity,
            s.sem_infidelity,
            s.mean_rel_err,
            s.sem_rel_err,
            s.count_below(config.train.target_infidelity),
            s.n_realizations,
            s.excluded.len()
        );
        summaries.push(s);
    }
    let mut out = Outputs::new(&config.out)?;
    let mut csv = Vec::new();
    write_fig_a(&mut csv, &summaries)?;
    out.write("fig_a.csv", csv)?;
    let mut csv = Vec::new();
    write_fig_b(&mut csv, &summaries)?;
    out.write("fig_b.csv", csv)?;
    out.json("ensembles.json", &summaries)?;
    out.manifest("report", config, json!({ "master": config.seed, "realizations": realization_seeds(config) }))?;
    Ok(())
}
