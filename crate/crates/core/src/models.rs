//! Disorder sampling and sparse Hamiltonians for the two benchmark models:
//!
//! * QSK: `H = sum_{i<j} J_ij Z_i Z_j - h sum_i X_i` on the full spin basis.
//! * DF:  `H = sum_{i<j} J_ij (c†_i c_j + c†_j c_i) + V_ij n_i n_j` on a
//!   fixed-particle-number sector.

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{apply_hopping_jw, Basis, BasisTag, FermionSector, SpinBasis};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One random draw of the symmetric coupling matrices `J` and `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DisorderRecord", into = "DisorderRecord")]
#[serde(bound = "T: Scalar")]
pub struct DisorderRealization<T> {
    sites: usize,
    seed: u64,
    sigma: T,
    couplings: Array2<T>,
    interactions: Array2<T>,
}

/// JSON layout of a [`DisorderRealization`]: upper triangles row-major.
/// An empty `v_upper` stands for `V = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRecord {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sigma: f64,
    pub j_upper: Vec<f64>,
    #[serde(default)]
    pub v_upper: Vec<f64>,
}

/// Standard deviation `1/sqrt(L)` used when none is given.
pub fn default_sigma(sites: usize) -> f64 {
    1.0 / (sites as f64).sqrt()
}

/// Samples `J` and `V` with i.i.d. `N(0, sigma^2)` upper-triangle entries.
/// `J` is drawn first, then `V`, both in row-major upper-triangle order.
pub fn sample_disorder<T: Scalar>(sites: usize, seed: u64, sigma: T) -> Result<DisorderRealization<T>> {
    if sites < 2 {
        return Err(Error::Domain(format!("disorder needs L >= 2, got {sites}")));
    }
    if !(sigma > T::zero()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = sites * (sites - 1) / 2;
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..pairs).map(|_| StandardNormal.sample(rng)).collect()
    };
    let j = draw(&mut rng);
    let v = draw(&mut rng);
    let scale = |xs: Vec<f64>| -> Vec<T> { xs.into_iter().map(|x| T::of(x) * sigma).collect() };
    Ok(DisorderRealization {
        sites,
        seed,
        sigma,
        couplings: symmetric_from_upper(sites, &scale(j)),
        interactions: symmetric_from_upper(sites, &scale(v)),
    })
}

fn symmetric_from_upper<T: Scalar>(sites: usize, upper: &[T]) -> Array2<T> {
    let mut m = Array2::zeros((sites, sites));
    let mut k = 0;
    for i in 0..sites {
        for j in i + 1..sites {
            m[[i, j]] = upper[k];
            m[[j, i]] = upper[k];
            k += 1;
        }
    }
    m
}

fn upper_of<T: Scalar>(m: &Array2<T>) -> Vec<T> {
    let n = m.nrows();
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| m[[i, j]]).collect()
}

fn check_symmetric_zero_diagonal<T: Scalar>(name: &str, m: &Array2<T>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Domain(format!("{name} must be square")));
    }
    for i in 0..n {
        if m[[i, i]] != T::zero() {
            return Err(Error::Domain(format!("{name} has a nonzero diagonal at {i}")));
        }
        for j in 0..i {
            if m[[i, j]] != m[[j, i]] {
                return Err(Error::Domain(format!("{name} is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

impl<T: Scalar> DisorderRealization<T> {
    /// Wraps explicit coupling matrices, e.g. from a test fixture.
    pub fn from_matrices(seed: u64, sigma: T, couplings: Array2<T>, interactions: Array2<T>) -> Result<Self> {
        let sites = couplings.nrows();
        if sites < 2 || interactions.dim() != couplings.dim() {
            return Err(Error::Domain("coupling matrices must be L x L with L >= 2".into()));
        }
        check_symmetric_zero_diagonal("J", &couplings)?;
        check_symmetric_zero_diagonal("V", &interactions)?;
        Ok(Self { sites, seed, sigma, couplings, interactions })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// `J`.
    pub fn couplings(&self) -> &Array2<T> {
        &self.couplings
    }

    /// `V`.
    pub fn interactions(&self) -> &Array2<T> {
        &self.interactions
    }

    /// The same realization with `V` set to zero.
    pub fn without_interactions(&self) -> Self {
        Self { interactions: Array2::zeros((self.sites, self.sites)), ..self.clone() }
    }

    /// The same realization with `J` set to zero.
    pub fn without_couplings(&self) -> Self {
        Self { couplings: Array2::zeros((self.sites, self.sites)), ..self.clone() }
    }

    pub fn to_record(&self) -> DisorderRecord {
        DisorderRecord {
            sites: self.sites,
            seed: self.seed,
            sigma: self.sigma.as_f64(),
            j_upper: upper_of(&self.couplings).into_iter().map(Scalar::as_f64).collect(),
            v_upper: upper_of(&self.interactions).into_iter().map(Scalar::as_f64).collect(),
        }
    }

    pub fn from_record(record: &DisorderRecord) -> Result<Self> {
        let pairs = record.sites * record.sites.saturating_sub(1) / 2;
        let v_ok = record.v_upper.is_empty() || record.v_upper.len() == pairs;
        if record.sites < 2 || record.j_upper.len() != pairs || !v_ok {
            return Err(Error::Domain(format!(
                "disorder record for L={} needs {pairs} upper-triangle entries per matrix",
                record.sites
            )));
        }
        let convert = |xs: &[f64]| xs.iter().map(|&x| T::of(x)).collect::<Vec<_>>();
        Ok(Self {
            sites: record.sites,
            seed: record.seed,
            sigma: T::of(record.sigma),
            couplings: symmetric_from_upper(record.sites, &convert(&record.j_upper)),
            interactions: if record.v_upper.is_empty() {
                Array2::zeros((record.sites, record.sites))
            } else {
                symmetric_from_upper(record.sites, &convert(&record.v_upper))
            },
        })
    }
}

impl<T: Scalar> From<DisorderRealization<T>> for DisorderRecord {
    fn from(d: DisorderRealization<T>) -> Self {
        d.to_record()
    }
}

impl<T: Scalar> TryFrom<DisorderRecord> for DisorderRealization<T> {
    type Error = Error;

    fn try_from(record: DisorderRecord) -> Result<Self> {
        Self::from_record(&record)
    }
}

/// Transverse-field strength and Ising couplings of a QSK instance.
#[derive(Clone, Debug)]
pub struct QskParameters<T> {
    field: T,
    couplings: Array2<T>,
}

impl<T: Scalar> QskParameters<T> {
    pub fn new(field: T, couplings: Array2<T>) -> Result<Self> {
        if !(field > T::zero()) {
            return Err(Error::Domain(format!("transverse field must be positive, got {field}")));
        }
        check_symmetric_zero_diagonal("J", &couplings)?;
        Ok(Self { field, couplings })
    }

    pub fn from_disorder(disorder: &DisorderRealization<T>, field: T) -> Result<Self> {
        Self::new(field, disorder.couplings.clone())
    }

    pub fn sites(&self) -> usize {
        self.couplings.nrows()
    }

    pub fn field(&self) -> T {
        self.field
    }
}

/// Real symmetric sparse matrix in compressed-row form over an ordered basis.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianOperator<T> {
    basis: BasisTag,
    row_offsets: Vec<usize>,
    columns: Vec<u32>,
    values: Vec<T>,
}

impl<T: Scalar> HamiltonianOperator<T> {
    /// Assembles a matrix from per-row entry lists. Columns within a row
    /// are sorted and duplicates summed.
    pub fn from_rows(basis: BasisTag, rows: Vec<Vec<(usize, T)>>) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut columns = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let start = columns.len();
            for (c, v) in row {
                if columns.len() > start && *columns.last().unwrap() as usize == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    columns.push(c as u32);
                    values.push(v);
                }
            }
            row_offsets.push(columns.len());
        }
        Self { basis, row_offsets, columns, values }
    }

    /// Sparsifies a dense matrix, keeping exact nonzeros.
    pub fn from_dense(basis: BasisTag, dense: &Array2<T>) -> Self {
        let rows = dense
            .outer_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != T::zero())
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self::from_rows(basis, rows)
    }

    pub fn identity(basis: BasisTag, dim: usize) -> Self {
        Self::from_rows(basis, (0..dim).map(|r| vec![(r, T::one())]).collect())
    }

    pub fn dim(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn basis(&self) -> BasisTag {
        self.basis
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(column, value)` pairs of `row`, sorted by column.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_offsets[row]..self.row_offsets[row + 1];
        self.columns[span.clone()].iter().map(|&c| c as usize).zip(self.values[span].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let span = self.row_offsets[row]..self.row_offsets[row + 1];
        match self.columns[span.clone()].binary_search(&(col as u32)) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> Array2<T> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for r in 0..n {
            for (c, v) in self.row(r) {
                m[[r, c]] = v;
            }
        }
        m
    }

    /// Largest `|H_rc - H_cr|` over stored entries.
    pub fn asymmetry(&self) -> T {
        (0..self.dim())
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(T::zero(), T::max)
    }

    /// Sparse matrix-vector product `H v`.
    pub fn apply(&self, v: ArrayView1<T>) -> Result<Array1<T>> {
        if v.len() != self.dim() {
            return Err(Error::ContractViolation(format!(
                "vector of length {} applied to a {}-dimensional operator",
                v.len(),
                self.dim()
            )));
        }
        Ok((0..self.dim())
            .map(|r| self.row(r).fold(T::zero(), |acc, (c, h)| acc + h * v[c]))
            .collect())
    }

    /// `v^T H v`.
    pub fn expectation(&self, v: ArrayView1<T>) -> Result<T> {
        Ok(self.apply(v)?.dot(&v))
    }
}

/// Free function form of [`HamiltonianOperator::apply`].
pub fn apply_operator<T: Scalar>(h: &HamiltonianOperator<T>, v: ArrayView1<T>) -> Result<Array1<T>> {
    h.apply(v)
}

/// Classical Ising energy `sum_{i<j} J_ij s_i s_j` with `s_i = +1` for set bits.
pub fn ising_energy<T: Scalar>(couplings: &Array2<T>, bits: u32) -> T {
    let n = couplings.nrows();
    let spin = |i: usize| if (bits >> i) & 1 == 1 { T::one() } else { -T::one() };
    let mut e = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            e += couplings[[i, j]] * spin(i) * spin(j);
        }
    }
    e
}

pub fn build_qsk<T: Scalar>(params: &QskParameters<T>, basis: &SpinBasis) -> Result<HamiltonianOperator<T>> {
    let sites = basis.sites();
    if params.sites() != sites {
        return Err(Error::ContractViolation(format!(
            "QSK couplings for L={} on a {sites}-site basis",
            params.sites()
        )));
    }
    let rows = basis
        .states()
        .iter()
        .map(|c| {
            let mut row = Vec::with_capacity(sites + 1);
            row.push((c.bits() as usize, ising_energy(&params.couplings, c.bits())));
            for i in 0..sites {
                row.push(((c.bits() ^ (1 << i)) as usize, -params.field));
            }
            row
        })
        .collect();
    Ok(HamiltonianOperator::from_rows(basis.tag(), rows))
}

pub fn build_df<T: Scalar>(disorder: &DisorderRealization<T>, sector: &FermionSector) -> Result<HamiltonianOperator<T>> {
    let sites = sector.sites();
    if disorder.sites != sites {
        return Err(Error::ContractViolation(format!(
            "DF disorder for L={} on a {sites}-site sector",
            disorder.sites
        )));
    }
    let j = &disorder.couplings;
    let v = &disorder.interactions;
    let mut rows = Vec::with_capacity(sector.dim());
    for &c in sector.states() {
        let occupied: Vec<usize> = c.occupied_sites().collect();
        let mut diagonal = T::zero();
        for (a, &p) in occupied.iter().enumerate() {
            for &q in &occupied[a + 1..] {
                diagonal += v[[p, q]];
            }
        }
        let mut row = vec![(sector.index_of(c)?, diagonal)];
        // H is real symmetric, so row c holds <c|H|c'> = <c'|H|c>: the
        // states reached from c by a single hop.
        for &from in &occupied {
            for to in 0..sites {
                if to == from || j[[to, from]] == T::zero() {
                    continue;
                }
                if let Some((target, sign)) = apply_hopping_jw(c, to, from)? {
                    let amp = if sign > 0 { j[[to, from]] } else { -j[[to, from]] };
                    row.push((sector.index_of(target)?, amp));
                }
            }
        }
        rows.push(row);
    }
    Ok(HamiltonianOperator::from_rows(sector.tag(), rows))
}

/// Single-particle eigenpairs of the hopping matrix `J`: returns the lowest
/// `particles` energies and the matching orbitals as rows (`N x L`).
pub fn hopping_orbitals<T: Scalar>(disorder: &DisorderRealization<T>, particles: usize) -> Result<(Array1<T>, Array2<T>)> {
    let sites = disorder.sites;
    if particles > sites {
        return Err(Error::Domain(format!("{particles} particles on {sites} sites")));
    }
    let buffer: Vec<T> = disorder.couplings.t().iter().copied().collect();
    let (values, vectors) = T::symmetric_eigen(sites, &buffer)?;
    let orbitals = Array2::from_shape_fn((particles, sites), |(k, i)| vectors[k * sites + i]);
    Ok((Array1::from(values[..particles].to_vec()), orbitals))
}
