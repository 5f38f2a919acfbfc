//! Dense exact diagonalization and Rényi-2 entanglement entropy.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisTag, Bipartition, FermionSector};
use crate::error::{Error, Result};
use crate::models::HamiltonianOperator;
use crate::scalar::Scalar;

/// Largest operator dimension handed to the dense eigensolver.
pub const MAX_DENSE_DIM: usize = 1 << 13;

/// Lowest eigenpair of a Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroundState<T> {
    pub energy: T,
    pub basis: BasisTag,
    pub amplitudes: Array1<T>,
}

impl<T: Scalar> GroundState<T> {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `||H psi - E0 psi||_2`.
    pub fn residual(&self, h: &HamiltonianOperator<T>) -> Result<T> {
        let hv = h.apply(self.amplitudes.view())?;
        Ok((&hv - &(&self.amplitudes * self.energy)).mapv(|x| x * x).sum().sqrt())
    }
}

/// Lowest eigenpair via dense symmetric diagonalization. The eigenvector is
/// normalized and its first non-negligible amplitude is made positive.
pub fn ground_state<T: Scalar>(h: &HamiltonianOperator<T>) -> Result<GroundState<T>> {
    let dim = h.dim();
    if dim > MAX_DENSE_DIM {
        return Err(Error::SizeLimit(format!(
            "dense diagonalization of dimension {dim} exceeds {MAX_DENSE_DIM}"
        )));
    }
    let mut dense = vec![T::zero(); dim * dim];
    // Column-major lower triangle; the matrix is symmetric so rows serve as columns.
    for r in 0..dim {
        for (c, v) in h.row(r) {
            dense[r * dim + c] = v;
        }
    }
    let (energy, vector) = T::lowest_eigenpair(dim, &dense)?;
    let mut amplitudes = Array1::from(vector);
    let norm = amplitudes.dot(&amplitudes).sqrt();
    amplitudes.mapv_inplace(|x| x / norm);
    fix_sign(&mut amplitudes);
    let ground = GroundState { energy, basis: h.basis(), amplitudes };
    let residual = ground.residual(h)?;
    if !(residual <= T::epsilon().sqrt() * energy.abs().max(T::one())) {
        return Err(Error::Linalg(format!("eigensolver residual {residual} for E0 = {energy}")));
    }
    Ok(ground)
}

/// Flips `v` so that its first amplitude above `sqrt(eps) * max|v|` is positive.
pub fn fix_sign<T: Scalar>(v: &mut Array1<T>) {
    let largest = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let cutoff = largest * T::epsilon().sqrt();
    if let Some(&first) = v.iter().find(|x| x.abs() > cutoff) {
        if first < T::zero() {
            v.mapv_inplace(|x| -x);
        }
    }
}

/// Scatters sector amplitudes into the full `2^L` space by integer label.
pub fn embed_sector_vector<T: Scalar>(v: ArrayView1<T>, sector: &FermionSector) -> Result<Array1<T>> {
    if v.len() != sector.dim() {
        return Err(Error::ContractViolation(format!(
            "sector vector of length {} for a sector of size {}",
            v.len(),
            sector.dim()
        )));
    }
    let mut full = Array1::zeros(1usize << sector.sites());
    for (&c, &a) in sector.states().iter().zip(v.iter()) {
        full[c.bits() as usize] = a;
    }
    Ok(full)
}

/// Inverse of [`embed_sector_vector`]: reads the sector positions back out.
pub fn gather_sector_vector<T: Scalar>(full: ArrayView1<T>, sector: &FermionSector) -> Result<Array1<T>> {
    if full.len() != 1usize << sector.sites() {
        return Err(Error::ContractViolation(format!(
            "full-space vector of length {} for L={}",
            full.len(),
            sector.sites()
        )));
    }
    Ok(sector.states().iter().map(|c| full[c.bits() as usize]).collect())
}

/// Rényi-2 entropy of a bipartition, in nats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult<T> {
    pub s2: T,
    pub bipartition: Bipartition,
    pub sites: usize,
}

/// Splits a full-space label into (A-bits, complement-bits), each packed
/// into the low-order bits in increasing site order.
fn split_label(label: usize, subsystem: &[usize], complement: &[usize]) -> (usize, usize) {
    let pack = |sites: &[usize]| {
        sites.iter().enumerate().fold(0usize, |acc, (k, &s)| acc | (((label >> s) & 1) << k))
    };
    (pack(subsystem), pack(complement))
}

/// `S2 = -ln Tr(rho_A^2)` for a normalized real pure state on `L` sites.
pub fn renyi2_entropy<T: Scalar>(psi: ArrayView1<T>, partition: &Bipartition) -> Result<EntropyResult<T>> {
    let sites = partition.sites();
    if psi.len() != 1usize << sites {
        return Err(Error::ContractViolation(format!(
            "state of length {} for L={sites}",
            psi.len()
        )));
    }
    let norm = psi.dot(&psi);
    if (norm - T::one()).abs() > T::norm_tolerance() {
        return Err(Error::ContractViolation(format!("state is not normalized (|psi|^2 = {norm})")));
    }
    let subsystem = partition.subsystem();
    let complement = partition.complement();
    let mut m = Array2::<T>::zeros((1 << subsystem.len(), 1 << complement.len()));
    for (label, &a) in psi.iter().enumerate() {
        let (row, col) = split_label(label, subsystem, &complement);
        m[[row, col]] = a;
    }
    // Tr(rho^2) = ||M M^T||_F^2; contract over the larger index.
    let rho = if m.nrows() <= m.ncols() { m.dot(&m.t()) } else { m.t().dot(&m) };
    let purity = rho.iter().map(|&x| x * x).sum::<T>();
    let s2 = (-purity.ln()).max(T::zero());
    Ok(EntropyResult { s2, bipartition: partition.clone(), sites })
}

/// `A = {0, ..., ceil(L/2) - 1}`.
pub fn max_bipartition(sites: usize) -> Result<Bipartition> {
    if sites < 2 {
        return Err(Error::Domain(format!("a bipartition needs L >= 2, got {sites}")));
    }
    Bipartition::new(sites, (0..sites.div_ceil(2)).collect())
}
