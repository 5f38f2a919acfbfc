//! Reference implementations used only by the integration tests. They are
//! written against first-principles definitions and share no code paths with
//! the library kernels.

#![allow(dead_code)]

pub mod checks;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric matrix with i.i.d. uniform off-diagonal entries in [-1, 1]
/// and zero diagonal.
pub fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            m[[i, j]] = x;
            m[[j, i]] = x;
        }
    }
    m
}

pub fn random_unit_vector(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let v: Array1<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.dot(&v).sqrt();
    v / norm
}

fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            if a[[i, j]] == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = a[[i, j]] * b[[k, l]];
                }
            }
        }
    }
    out
}

fn identity2() -> Array2<f64> {
    Array2::eye(2)
}

/// Pauli Z in the (empty, occupied) = (bit 0, bit 1) local basis.
fn pauli_z() -> Array2<f64> {
    ndarray::array![[1.0, 0.0], [0.0, -1.0]]
}

fn pauli_x() -> Array2<f64> {
    ndarray::array![[0.0, 1.0], [1.0, 0.0]]
}

/// Local annihilator: maps the occupied state to the empty one.
fn lowering() -> Array2<f64> {
    ndarray::array![[0.0, 1.0], [0.0, 0.0]]
}

/// Embeds local operators into the 2^L space where bit `i` of the state
/// label is site `i` (site L-1 is the leftmost Kronecker factor).
fn embed(sites: usize, local: impl Fn(usize) -> Array2<f64>) -> Array2<f64> {
    let mut out = Array2::from_elem((1, 1), 1.0);
    for site in (0..sites).rev() {
        out = kron(&out, &local(site));
    }
    out
}

/// Jordan-Wigner annihilator `c_i = (prod_{k<i} Z_k) a_i`.
pub fn annihilator(sites: usize, i: usize) -> Array2<f64> {
    embed(sites, |k| match k.cmp(&i) {
        std::cmp::Ordering::Less => pauli_z(),
        std::cmp::Ordering::Equal => lowering(),
        std::cmp::Ordering::Greater => identity2(),
    })
}

/// Full-space DF Hamiltonian assembled from Kronecker products.
pub fn dense_df(j: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
    let sites = j.nrows();
    let c: Vec<Array2<f64>> = (0..sites).map(|i| annihilator(sites, i)).collect();
    let cd: Vec<Array2<f64>> = c.iter().map(|m| m.t().to_owned()).collect();
    let n: Vec<Array2<f64>> = (0..sites).map(|i| cd[i].dot(&c[i])).collect();
    let dim = 1 << sites;
    let mut h = Array2::zeros((dim, dim));
    for i in 0..sites {
        for k in i + 1..sites {
            if j[[i, k]] != 0.0 {
                h = h + (cd[i].dot(&c[k]) + cd[k].dot(&c[i])) * j[[i, k]];
            }
            if v[[i, k]] != 0.0 {
                h = h + n[i].dot(&n[k]) * v[[i, k]];
            }
        }
    }
    h
}

/// Full-space particle-number operator.
pub fn number_operator(sites: usize) -> Array2<f64> {
    let dim = 1 << sites;
    let mut out = Array2::zeros((dim, dim));
    for i in 0..sites {
        let ni = embed(sites, |k| if k == i { ndarray::array![[0.0, 0.0], [0.0, 1.0]] } else { identity2() });
        out = out + ni;
    }
    out
}

/// Full-space QSK Hamiltonian with the spin of set bits taken as +1.
pub fn dense_qsk(j: &Array2<f64>, field: f64) -> Array2<f64> {
    let sites = j.nrows();
    // Z in the (bit 0, bit 1) basis assigns -1 to bit 0 and +1 to bit 1.
    let spin = || ndarray::array![[-1.0, 0.0], [0.0, 1.0]];
    let dim = 1 << sites;
    let mut h = Array2::zeros((dim, dim));
    for i in 0..sites {
        for k in i + 1..sites {
            let zz = embed(sites, |s| if s == i || s == k { spin() } else { identity2() });
            h = h + zz * j[[i, k]];
        }
        let x = embed(sites, |s| if s == i { pauli_x() } else { identity2() });
        h = h - x * field;
    }
    h
}

/// Cyclic Jacobi eigenvalue algorithm for a real symmetric matrix. Returns
/// ascending eigenvalues and the eigenvectors as columns.
pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[[i, j]].powi(2)).sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[[x, x]].partial_cmp(&a[[y, y]]).unwrap());
    let values = order.iter().map(|&k| a[[k, k]]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        vectors.column_mut(col).assign(&v.column(k));
    }
    (values, vectors)
}

/// Reduced density matrix of subsystem `a` by summing over every
/// assignment of the complement, then `-ln Tr(rho^2)`.
pub fn renyi2_by_partial_trace(psi: &Array1<f64>, sites: usize, a: &[usize]) -> f64 {
    let b: Vec<usize> = (0..sites).filter(|s| !a.contains(s)).collect();
    let label = |xa: usize, xb: usize| {
        let mut l = 0usize;
        for (k, &s) in a.iter().enumerate() {
            l |= ((xa >> k) & 1) << s;
        }
        for (k, &s) in b.iter().enumerate() {
            l |= ((xb >> k) & 1) << s;
        }
        l
    };
    let da = 1 << a.len();
    let db = 1 << b.len();
    let mut rho = Array2::<f64>::zeros((da, da));
    for x in 0..da {
        for y in 0..da {
            rho[[x, y]] = (0..db).map(|z| psi[label(x, z)] * psi[label(y, z)]).sum();
        }
    }
    let purity = rho.dot(&rho).diag().sum();
    -purity.ln()
}

/// Central finite-difference gradient of a scalar function.
pub fn finite_difference(x: &[f64], step: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|k| {
            work[k] = x[k] + step;
            let up = f(&work);
            work[k] = x[k] - step;
            let down = f(&work);
            work[k] = x[k];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `||a - b|| / max(||b||, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(floor)
}

/// Determinant by cofactor expansion along the first row.
pub fn det_laplace(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 1.0;
    }
    (0..n)
        .map(|col| {
            let minor = Array2::from_shape_fn((n - 1, n - 1), |(r, c)| m[[r + 1, if c < col { c } else { c + 1 }]]);
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[[0, col]] * det_laplace(&minor)
        })
        .sum()
}
