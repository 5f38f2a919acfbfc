//! Oracle comparisons shared by the oracle test suite and the acceptance
//! report. Each returns the worst discrepancy it observed.

use ndarray::{Array1, Array2};
use nqs_core::ansatz::{Ansatz, BackflowSpec, FlatParameters, InputBatch, MlpSpec};
use nqs_core::basis::{enumerate_sector, enumerate_spin_basis, Basis, Bipartition};
use nqs_core::exact::{ground_state, renyi2_entropy};
use nqs_core::experiments::{run_ensemble, AnsatzFamily, EnsembleSpec, Model, ModelConfig, Width};
use nqs_core::models::{build_df, build_qsk, DisorderRealization, QskParameters};
use nqs_core::optimize::{fidelity, log_fidelity_gradient, TrainConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_disorder(sites: usize, rng: &mut ChaCha8Rng) -> (Array2<f64>, Array2<f64>) {
    (random_symmetric(sites, rng), random_symmetric(sites, rng))
}

/// Sparse DF and QSK matrices against the Kronecker-product construction,
/// every sector for `2 <= L <= max_sites`. Entries of the dense matrix that
/// connect different particle numbers count as errors too.
pub fn jw_sparse_vs_dense(max_sites: usize) -> f64 {
    let mut rng = rng(11);
    let mut worst = 0.0f64;
    for sites in 2..=max_sites {
        for _ in 0..3 {
            let (j, v) = random_disorder(sites, &mut rng);
            let dense = dense_df(&j, &v);
            let disorder = DisorderRealization::from_matrices(0, 1.0, j.clone(), v).unwrap();
            for particles in 0..=sites {
                let sector = enumerate_sector(sites, particles).unwrap();
                let sparse = build_df(&disorder, &sector).unwrap().to_dense();
                for (a, ca) in sector.states().iter().enumerate() {
                    for (b, cb) in sector.states().iter().enumerate() {
                        let d = dense[[ca.bits() as usize, cb.bits() as usize]];
                        worst = worst.max((sparse[[a, b]] - d).abs());
                    }
                }
            }
            for x in 0..dense.nrows() {
                for y in 0..dense.ncols() {
                    if x.count_ones() != y.count_ones() {
                        worst = worst.max(dense[[x, y]].abs());
                    }
                }
            }
            let field: f64 = rng.random_range(0.1..2.0);
            let basis = enumerate_spin_basis(sites).unwrap();
            let qsk = build_qsk(&QskParameters::new(field, j.clone()).unwrap(), &basis).unwrap().to_dense();
            let oracle = dense_qsk(&j, field);
            worst = worst.max((&qsk - &oracle).iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
    }
    worst
}

/// Sector ground energies against a full-space diagonalization of the
/// Kronecker-product Hamiltonian with a particle-number penalty
/// `mu (N_op - N)^2` that lifts every other sector.
pub fn sector_vs_full_ed(max_sites: usize) -> f64 {
    let mut rng = rng(12);
    let mut worst = 0.0f64;
    for sites in 2..=max_sites {
        let (j, v) = random_disorder(sites, &mut rng);
        let j = j / (sites as f64).sqrt();
        let v = v / (sites as f64).sqrt();
        let dense = dense_df(&j, &v);
        let number = number_operator(sites);
        let disorder = DisorderRealization::from_matrices(0, 1.0, j.clone(), v).unwrap();
        let fillings: Vec<usize> = if sites <= 6 { (0..=sites).collect() } else { vec![sites / 2] };
        for particles in fillings {
            let shift = &number - &(Array2::<f64>::eye(1 << sites) * particles as f64);
            let penalized = &dense + &(shift.dot(&shift) * 50.0);
            let (values, vectors) = jacobi_eigen(&penalized);
            let sector = enumerate_sector(sites, particles).unwrap();
            let gs = ground_state(&build_df(&disorder, &sector).unwrap()).unwrap();
            worst = worst.max((values[0] - gs.energy).abs());
            // The lowest full-space eigenvector lives in the sector.
            let leak: f64 = (0..1usize << sites)
                .filter(|x| x.count_ones() as usize != particles)
                .map(|x| vectors[[x, 0]].powi(2))
                .sum();
            worst = worst.max(leak);
        }
        let field: f64 = rng.random_range(0.1..2.0);
        let (values, _) = jacobi_eigen(&dense_qsk(&j, field));
        let basis = enumerate_spin_basis(sites).unwrap();
        let gs = ground_state(&build_qsk(&QskParameters::new(field, j).unwrap(), &basis).unwrap()).unwrap();
        worst = worst.max((values[0] - gs.energy).abs());
    }
    worst
}

/// Library Rényi-2 entropy against the explicit partial trace on random
/// states and random subsystems.
pub fn renyi_vs_partial_trace(trials: usize) -> f64 {
    let mut rng = rng(13);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let sites = rng.random_range(2..=8usize);
        let psi = random_unit_vector(1 << sites, &mut rng);
        let mut a: Vec<usize> = (0..sites).filter(|_| rng.random_bool(0.5)).collect();
        if a.is_empty() {
            a.push(0);
        }
        if a.len() == sites {
            a.pop();
        }
        let lib = renyi2_entropy(psi.view(), &Bipartition::new(sites, a.clone()).unwrap()).unwrap().s2;
        worst = worst.max((lib - renyi2_by_partial_trace(&psi, sites, &a)).abs());
    }
    worst
}

/// `|S2 - ln 2|` for a Bell pair, and `|S2 - 2 ln 2|` for two Bell pairs
/// straddling the cut.
pub fn bell_states() -> f64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bell = ndarray::array![h, 0.0, 0.0, h];
    let one = renyi2_entropy(bell.view(), &Bipartition::new(2, vec![0]).unwrap()).unwrap().s2;
    // Pairs (0, 2) and (1, 3); A = {0, 1}.
    let mut two = Array1::zeros(16);
    for x in [0usize, 1] {
        for y in [0usize, 1] {
            two[x | (y << 1) | (x << 2) | (y << 3)] = 0.5;
        }
    }
    let pair = renyi2_entropy(two.view(), &Bipartition::new(4, vec![0, 1]).unwrap()).unwrap().s2;
    (one - std::f64::consts::LN_2).abs().max((pair - 2.0 * std::f64::consts::LN_2).abs())
}

fn random_params(ansatz: &Ansatz<f64>, scale: f64, rng: &mut ChaCha8Rng) -> FlatParameters<f64> {
    let values = (0..ansatz.parameter_count()).map(|_| rng.random_range(-scale..scale)).collect();
    FlatParameters::new(ansatz.shape(), values).unwrap()
}

/// A random ansatz of the family with its basis states.
fn random_ansatz(family: AnsatzFamily, rng: &mut ChaCha8Rng) -> (Ansatz<f64>, Vec<nqs_core::basis::Configuration>) {
    let sites = rng.random_range(2..=6usize);
    let hidden = rng.random_range(1..=5usize);
    match family {
        AnsatzFamily::Mlp => {
            let states = enumerate_spin_basis(sites).unwrap().states().to_vec();
            (Ansatz::Mlp(MlpSpec::with_hidden(sites, hidden).unwrap()), states)
        }
        AnsatzFamily::Backflow => {
            let particles = rng.random_range(1..sites);
            let spec = BackflowSpec::with_random_reference(sites, particles, hidden, rng.random()).unwrap();
            let states = enumerate_sector(sites, particles).unwrap().states().to_vec();
            (Ansatz::Backflow(spec), states)
        }
    }
}

/// Worst relative error of `d psi / d theta` against central differences
/// (step 1e-5) over random ansatz, parameter and configuration draws.
pub fn amplitude_gradient_fd(family: AnsatzFamily, trials: usize) -> f64 {
    let mut rng = rng(14 + family as u64);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (ansatz, states) = random_ansatz(family, &mut rng);
        let params = random_params(&ansatz, 1.0, &mut rng);
        let c = states[rng.random_range(0..states.len())];
        let analytic = ansatz.gradient(&params, c).unwrap().values;
        let numeric = finite_difference(&params.values, 1e-5, |x| {
            ansatz.amplitude(&FlatParameters::new(params.shape, x.to_vec()).unwrap(), c).unwrap()
        });
        worst = worst.max(relative_error(&analytic, &numeric, 1e-8));
    }
    worst
}

/// Worst relative error of the `ln F` gradient against central differences.
pub fn log_fidelity_fd(family: AnsatzFamily, trials: usize) -> f64 {
    let mut rng = rng(24 + family as u64);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (ansatz, states) = random_ansatz(family, &mut rng);
        let batch = InputBatch::new(&states).unwrap();
        let params = random_params(&ansatz, 1.0, &mut rng);
        let phi = random_unit_vector(states.len(), &mut rng);
        let analytic = log_fidelity_gradient(&ansatz, &params, phi.view(), &batch).unwrap().values;
        let numeric = finite_difference(&params.values, 1e-5, |x| {
            let p = FlatParameters::new(params.shape, x.to_vec()).unwrap();
            let psi = ansatz.amplitudes(&p, &batch).unwrap();
            fidelity(psi.view(), phi.view()).unwrap().ln()
        });
        worst = worst.max(relative_error(&analytic, &numeric, 1e-8));
    }
    worst
}

/// Smallest `v^T H v - E0` over random normalized vectors for both models.
pub fn variational_bound(trials: usize) -> f64 {
    let mut rng = rng(15);
    let mut worst = f64::INFINITY;
    for t in 0..trials {
        let sites = rng.random_range(2..=7usize);
        let (j, v) = random_disorder(sites, &mut rng);
        let h = if t % 2 == 0 {
            build_qsk(&QskParameters::new(1.0, j).unwrap(), &enumerate_spin_basis(sites).unwrap()).unwrap()
        } else {
            let disorder = DisorderRealization::from_matrices(0, 1.0, j, v).unwrap();
            build_df(&disorder, &enumerate_sector(sites, sites / 2).unwrap()).unwrap()
        };
        let e0 = ground_state(&h).unwrap().energy;
        for _ in 0..20 {
            let x = random_unit_vector(h.dim(), &mut rng);
            worst = worst.min(h.expectation(x.view()).unwrap() - e0);
        }
    }
    worst
}

/// Runs one small seeded ensemble under pools of 1, 2 and 4 workers and
/// reports whether the serialized summaries coincide.
pub fn ensemble_thread_determinism() -> bool {
    let spec = EnsembleSpec {
        model: Model::Df,
        ansatz: AnsatzFamily::Backflow,
        sites: 6,
        width: Width::Hidden(2),
        realizations: 4,
        master_seed: 99,
        model_config: ModelConfig::default(),
    };
    let train = TrainConfig { max_steps: 200, restarts: 2, ..TrainConfig::default() };
    let runs: Vec<String> = [1, 2, 4]
        .into_iter()
        .map(|threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let summary = pool.install(|| run_ensemble::<f64>(&spec, &train)).unwrap();
            serde_json::to_string(&summary).unwrap()
        })
        .collect();
    runs.windows(2).all(|w| w[0] == w[1])
}
