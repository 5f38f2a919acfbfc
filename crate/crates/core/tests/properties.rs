mod support;

use ndarray::{Array1, Array2};
use nqs_core::ansatz::{Ansatz, BackflowSpec, FlatParameters, MlpSpec};
use nqs_core::basis::{apply_hopping_jw, enumerate_sector, enumerate_spin_basis, index_of, Basis, Bipartition, Configuration};
use nqs_core::exact::renyi2_entropy;
use nqs_core::experiments::{parameter_count, AnsatzFamily};
use nqs_core::models::{build_df, sample_disorder, DisorderRealization, DisorderRecord};
use nqs_core::optimize::fidelity;
use proptest::prelude::*;
use support::{annihilator, det_laplace, jacobi_eigen};

fn unit_vector(raw: Vec<f64>) -> Option<Array1<f64>> {
    let v = Array1::from(raw);
    let n = v.dot(&v).sqrt();
    (n > 1e-3).then(|| v / n)
}

#[test]
fn hopping_pairs_are_conjugate_and_match_kronecker_signs() {
    for sites in 2..=6usize {
        let c: Vec<Array2<f64>> = (0..sites).map(|i| annihilator(sites, i)).collect();
        for bits in 0..1u32 << sites {
            let conf = Configuration::new(bits, sites).unwrap();
            for i in 0..sites {
                for j in (0..sites).filter(|&j| j != i) {
                    let dense = c[i].t().dot(&c[j]);
                    let column = dense.column(bits as usize);
                    match apply_hopping_jw(conf, i, j).unwrap() {
                        Some((target, sign)) => {
                            assert_eq!(column[target.bits() as usize], f64::from(sign));
                            assert_eq!(column.iter().filter(|x| **x != 0.0).count(), 1);
                            assert_eq!(apply_hopping_jw(target, j, i).unwrap(), Some((conf, sign)));
                        }
                        None => assert!(column.iter().all(|x| *x == 0.0)),
                    }
                }
            }
        }
    }
}

#[test]
fn free_fermion_spectrum_is_sums_of_orbital_energies() {
    let mut rng = support::rng(31);
    for sites in 2..=6usize {
        let j = support::random_symmetric(sites, &mut rng);
        let (orbitals, _) = jacobi_eigen(&j);
        let disorder = DisorderRealization::from_matrices(0, 1.0, j, Array2::zeros((sites, sites))).unwrap();
        for particles in 0..=sites {
            let sector = enumerate_sector(sites, particles).unwrap();
            let (mut many, _) = jacobi_eigen(&build_df(&disorder, &sector).unwrap().to_dense());
            let mut sums: Vec<f64> = sector
                .states()
                .iter()
                .map(|c| c.occupied_sites().map(|k| orbitals[k]).sum())
                .collect();
            sums.sort_by(f64::total_cmp);
            many.sort_by(f64::total_cmp);
            for (a, b) in many.iter().zip(&sums) {
                assert!((a - b).abs() < 1e-10, "L={sites} N={particles}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn sample_variance_of_couplings() {
    let sites = 8;
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut n = 0.0;
    for seed in 0..10_000u64 {
        let d = sample_disorder::<f64>(sites, seed, 1.0 / (sites as f64).sqrt()).unwrap();
        for i in 0..sites {
            for k in i + 1..sites {
                let x = d.couplings()[[i, k]];
                sum += x;
                sq += x * x;
                n += 1.0;
            }
        }
    }
    let mean = sum / n;
    let var = (sq - n * mean * mean) / (n - 1.0);
    assert!((var - 0.125).abs() < 0.05 * 0.125, "variance {var}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sector_ranks_are_a_bijection(sites in 1usize..=10, frac in 0.0f64..=1.0) {
        let particles = (frac * sites as f64).round() as usize;
        let sector = enumerate_sector(sites, particles).unwrap();
        for (k, &c) in sector.states().iter().enumerate() {
            prop_assert_eq!(index_of(c, &sector).unwrap(), k);
            prop_assert_eq!(c.popcount(), particles);
        }
        let total: usize = (0..=sites).map(|n| enumerate_sector(sites, n).unwrap().dim()).sum();
        prop_assert_eq!(total, 1 << sites);
    }

    #[test]
    fn df_is_hermitian_and_conserves_number(sites in 2usize..=6, seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let particles = (frac * sites as f64).round() as usize;
        let d = sample_disorder::<f64>(sites, seed, 0.5).unwrap();
        let sector = enumerate_sector(sites, particles).unwrap();
        let h = build_df(&d, &sector).unwrap();
        prop_assert_eq!(h.asymmetry(), 0.0);
        for row in 0..h.dim() {
            for (col, _) in h.row(row) {
                prop_assert_eq!(sector.states()[col].popcount(), particles);
            }
        }
    }

    #[test]
    fn disorder_record_round_trips(sites in 2usize..=9, seed in any::<u64>()) {
        let d = sample_disorder::<f64>(sites, seed, 0.3).unwrap();
        let text = serde_json::to_string(&d.to_record()).unwrap();
        let back: DisorderRecord = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(DisorderRealization::<f64>::from_record(&back).unwrap(), d.clone());
        prop_assert_eq!(sample_disorder::<f64>(sites, seed, 0.3).unwrap(), d);
    }

    #[test]
    fn renyi_is_symmetric_and_sign_blind(
        sites in 2usize..=10,
        raw in prop::collection::vec(-1.0f64..1.0, 1024),
        mask in any::<u16>(),
    ) {
        let Some(psi) = unit_vector(raw[..1 << sites].to_vec()) else { return Ok(()) };
        let mut a: Vec<usize> = (0..sites).filter(|s| mask >> s & 1 == 1).collect();
        if a.is_empty() { a.push(0); }
        if a.len() == sites { a.pop(); }
        let part = Bipartition::new(sites, a).unwrap();
        let s = renyi2_entropy(psi.view(), &part).unwrap().s2;
        let s_c = renyi2_entropy(psi.view(), &part.complement_partition()).unwrap().s2;
        let s_neg = renyi2_entropy((-&psi).view(), &part).unwrap().s2;
        prop_assert!((s - s_c).abs() < 1e-9);
        prop_assert_eq!(s, s_neg);
        prop_assert!(s >= 0.0);
    }

    #[test]
    fn fidelity_is_bounded_and_scale_free(
        raw in prop::collection::vec(-1.0f64..1.0, 2..40),
        c in prop::sample::select(vec![-7.5, -1.0, 0.01, 3.0, 1e4]),
    ) {
        let n = raw.len() / 2;
        let psi = Array1::from(raw[..n].to_vec());
        let phi = Array1::from(raw[n..2 * n].to_vec());
        prop_assume!(psi.dot(&psi) > 1e-6 && phi.dot(&phi) > 1e-6);
        let f = fidelity(psi.view(), phi.view()).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        let scaled = fidelity((&psi * c).view(), phi.view()).unwrap();
        prop_assert!((f - scaled).abs() < 1e-12);
    }

    #[test]
    fn flattening_round_trips(sites in 2usize..=8, hidden in 1usize..=6, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let mlp = Ansatz::<f64>::Mlp(MlpSpec::with_hidden(sites, hidden).unwrap());
        let p = mlp.init_parameters(seed, 1.0).unwrap();
        prop_assert_eq!(p.len(), mlp.parameter_count());
        prop_assert_eq!(mlp.parameter_count(), parameter_count(AnsatzFamily::Mlp, sites, 0, hidden));
        prop_assert_eq!(FlatParameters::from_mlp(&p.to_mlp().unwrap()), p);

        let particles = ((frac * sites as f64).round() as usize).clamp(1, sites);
        let bf = Ansatz::Backflow(BackflowSpec::<f64>::with_random_reference(sites, particles, hidden, seed).unwrap());
        let values = (0..bf.parameter_count()).map(|k| (k as f64 * 0.37).sin()).collect();
        let q = FlatParameters::new(bf.shape(), values).unwrap();
        prop_assert_eq!(q.len(), parameter_count(AnsatzFamily::Backflow, sites, particles, hidden));
        prop_assert_eq!(FlatParameters::from_backflow(&q.to_backflow().unwrap(), particles), q);
    }

    /// The backflow amplitude is the determinant of the occupied columns,
    /// taken in increasing site order, of `M0 + reshape(W2 tanh(W1 x + b1) + b2)`.
    #[test]
    fn backflow_amplitude_matches_cofactor_determinant(
        sites in 2usize..=6, hidden in 1usize..=4, frac in 0.0f64..=1.0, seed in any::<u64>(), pick in any::<prop::sample::Index>(),
    ) {
        let particles = ((frac * sites as f64).round() as usize).clamp(1, sites);
        let spec = BackflowSpec::<f64>::with_random_reference(sites, particles, hidden, seed).unwrap();
        let ansatz = Ansatz::Backflow(spec.clone());
        let values = (0..ansatz.parameter_count()).map(|k| ((k as f64 + 1.0) * 1.3 + seed as f64 % 7.0).cos() * 0.6).collect();
        let params = FlatParameters::new(ansatz.shape(), values).unwrap();
        let bf = params.to_backflow().unwrap();
        let states = enumerate_sector(sites, particles).unwrap().states().to_vec();
        let c = states[pick.index(states.len())];
        let x: Array1<f64> = (0..sites).map(|i| if c.is_set(i) { 1.0 } else { -1.0 }).collect();
        let out = bf.w2.dot(&(bf.w1.dot(&x) + &bf.b1).mapv(f64::tanh)) + &bf.b2;
        let occupied: Vec<usize> = c.occupied_sites().collect();
        let m = Array2::from_shape_fn((particles, particles), |(k, b)| {
            spec.reference[[k, occupied[b]]] + out[k * sites + occupied[b]]
        });
        let expected = det_laplace(&m);
        let got = ansatz.amplitude(&params, c).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn every_spin_basis_is_ordered(sites in 1usize..=12) {
        let basis = enumerate_spin_basis(sites).unwrap();
        prop_assert!(basis.states().iter().enumerate().all(|(k, c)| c.bits() as usize == k));
    }
}
