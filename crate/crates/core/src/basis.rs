//! Computational bases: the full spin z-basis and fixed-particle-number
//! fermion sectors, plus the Jordan-Wigner hopping kernel.
//!
//! Bit `i` of a configuration's integer label is site `i`. The Jordan-Wigner
//! string orders sites `0 < 1 < ... < L-1`, so a creation or annihilation
//! operator on site `j` picks up `(-1)^(number of occupied sites below j)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of sites.
pub const MAX_SITES: usize = 20;

/// A length-`L` bitstring. Read as spins (bit set = up) or as occupations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    bits: u32,
    sites: u8,
}

impl Configuration {
    pub fn new(bits: u32, sites: usize) -> Result<Self> {
        check_sites(sites)?;
        if sites < 32 && bits >> sites != 0 {
            return Err(Error::Domain(format!(
                "bits {bits:#b} do not fit in {sites} sites"
            )));
        }
        Ok(Self { bits, sites: sites as u8 })
    }

    /// Builds a configuration from per-site occupations, site 0 first.
    pub fn from_occupations(occupations: &[u8]) -> Result<Self> {
        let bits = occupations
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &n)| acc | (u32::from(n != 0) << i));
        Self::new(bits, occupations.len())
    }

    pub(crate) const fn from_raw(bits: u32, sites: usize) -> Self {
        Self { bits, sites: sites as u8 }
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn sites(self) -> usize {
        self.sites as usize
    }

    #[inline]
    pub fn is_set(self, site: usize) -> bool {
        (self.bits >> site) & 1 == 1
    }

    #[inline]
    pub fn popcount(self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Occupied (set) sites in increasing order.
    pub fn occupied_sites(self) -> impl Iterator<Item = usize> {
        let mut rest = self.bits;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let site = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(site)
            }
        })
    }

    /// Network input encoding: `+1` for a set bit, `-1` otherwise.
    #[inline]
    pub fn signed(self, site: usize) -> i8 {
        if self.is_set(site) {
            1
        } else {
            -1
        }
    }

    /// Number of set bits strictly below `site`.
    #[inline]
    fn parity_below(self, site: usize) -> u32 {
        (self.bits & ((1u32 << site) - 1)).count_ones()
    }
}

fn check_sites(sites: usize) -> Result<()> {
    if sites == 0 || sites > MAX_SITES {
        return Err(Error::SizeLimit(format!(
            "site count {sites} outside 1..={MAX_SITES}"
        )));
    }
    Ok(())
}

/// Tag identifying which basis a state vector or operator lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisTag {
    Spin { sites: usize },
    Fermion { sites: usize, particles: usize },
}

impl BasisTag {
    pub fn sites(self) -> usize {
        match self {
            BasisTag::Spin { sites } | BasisTag::Fermion { sites, .. } => sites,
        }
    }
}

/// Common view over [`SpinBasis`] and [`FermionSector`].
pub trait Basis {
    fn sites(&self) -> usize;
    fn states(&self) -> &[Configuration];
    fn tag(&self) -> BasisTag;
    /// Position of `c` in [`Basis::states`], if present.
    fn position(&self, c: Configuration) -> Option<usize>;

    fn dim(&self) -> usize {
        self.states().len()
    }
}

/// All `2^L` spin configurations in increasing integer order.
#[derive(Clone, Debug)]
pub struct SpinBasis {
    sites: usize,
    states: Vec<Configuration>,
}

pub fn enumerate_spin_basis(sites: usize) -> Result<SpinBasis> {
    check_sites(sites)?;
    let states = (0..1u32 << sites)
        .map(|bits| Configuration::from_raw(bits, sites))
        .collect();
    Ok(SpinBasis { sites, states })
}

impl Basis for SpinBasis {
    fn sites(&self) -> usize {
        self.sites
    }

    fn states(&self) -> &[Configuration] {
        &self.states
    }

    fn tag(&self) -> BasisTag {
        BasisTag::Spin { sites: self.sites }
    }

    fn position(&self, c: Configuration) -> Option<usize> {
        (c.sites() == self.sites).then_some(c.bits() as usize)
    }
}

/// All configurations of `L` sites with exactly `N` particles, in increasing
/// integer order. Ranking uses the combinatorial number system, which
/// enumerates fixed-popcount integers in exactly that order.
#[derive(Clone, Debug)]
pub struct FermionSector {
    sites: usize,
    particles: usize,
    states: Vec<Configuration>,
    binomial: Vec<Vec<usize>>,
}

pub fn enumerate_sector(sites: usize, particles: usize) -> Result<FermionSector> {
    check_sites(sites)?;
    if particles > sites {
        return Err(Error::Domain(format!(
            "particle number {particles} exceeds site count {sites}"
        )));
    }
    let binomial = pascal(sites);
    let mut states = Vec::with_capacity(binomial[sites][particles]);
    if particles == 0 {
        states.push(Configuration::from_raw(0, sites));
    } else {
        // Gosper's hack: next integer with the same popcount.
        let limit = 1u64 << sites;
        let mut bits = (1u64 << particles) - 1;
        while bits < limit {
            states.push(Configuration::from_raw(bits as u32, sites));
            let lowest = bits & bits.wrapping_neg();
            let ripple = bits + lowest;
            bits = (((ripple ^ bits) >> 2) / lowest) | ripple;
        }
    }
    debug_assert_eq!(states.len(), binomial[sites][particles]);
    Ok(FermionSector { sites, particles, states, binomial })
}

fn pascal(n: usize) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; n + 1]; n + 1];
    for row in 0..=n {
        table[row][0] = 1;
        for k in 1..=row {
            table[row][k] = table[row - 1][k - 1] + table[row - 1][k];
        }
    }
    table
}

impl FermionSector {
    pub fn particles(&self) -> usize {
        self.particles
    }

    /// Rank of `c` within the sector.
    pub fn index_of(&self, c: Configuration) -> Result<usize> {
        self.position(c).ok_or(Error::Lookup {
            bits: u64::from(c.bits()),
            sites: self.sites,
            particles: self.particles,
        })
    }
}

impl Basis for FermionSector {
    fn sites(&self) -> usize {
        self.sites
    }

    fn states(&self) -> &[Configuration] {
        &self.states
    }

    fn tag(&self) -> BasisTag {
        BasisTag::Fermion { sites: self.sites, particles: self.particles }
    }

    fn position(&self, c: Configuration) -> Option<usize> {
        if c.sites() != self.sites || c.popcount() != self.particles {
            return None;
        }
        Some(
            c.occupied_sites()
                .enumerate()
                .map(|(k, site)| self.binomial[site][k + 1])
                .sum(),
        )
    }
}

/// Free function form of [`FermionSector::index_of`].
pub fn index_of(c: Configuration, sector: &FermionSector) -> Result<usize> {
    sector.index_of(c)
}

/// Applies `c†_i c_j` to the basis state `c`.
///
/// Returns `None` when site `j` is empty or site `i` is already occupied.
/// Otherwise returns the new configuration and the Jordan-Wigner sign,
/// accumulated by annihilating `j` first and then creating `i`.
pub fn apply_hopping_jw(c: Configuration, i: usize, j: usize) -> Result<Option<(Configuration, i8)>> {
    if i == j {
        return Err(Error::ContractViolation(format!(
            "hopping needs distinct sites, got i = j = {i}"
        )));
    }
    if i >= c.sites() || j >= c.sites() {
        return Err(Error::ContractViolation(format!(
            "sites ({i}, {j}) outside a {}-site configuration",
            c.sites()
        )));
    }
    if !c.is_set(j) || c.is_set(i) {
        return Ok(None);
    }
    let annihilated = Configuration::from_raw(c.bits & !(1 << j), c.sites());
    let swaps = c.parity_below(j) + annihilated.parity_below(i);
    let created = Configuration::from_raw(annihilated.bits | (1 << i), c.sites());
    let sign = if swaps.is_multiple_of(2) { 1 } else { -1 };
    Ok(Some((created, sign)))
}

/// Ordered configurations of the basis named by `tag`.
pub fn states_for(tag: BasisTag) -> Result<Vec<Configuration>> {
    Ok(match tag {
        BasisTag::Spin { sites } => enumerate_spin_basis(sites)?.states,
        BasisTag::Fermion { sites, particles } => enumerate_sector(sites, particles)?.states,
    })
}

/// A subsystem `A` of the sites; the complement is implied.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    sites: usize,
    subsystem: Vec<usize>,
}

impl Bipartition {
    pub fn new(sites: usize, mut subsystem: Vec<usize>) -> Result<Self> {
        check_sites(sites)?;
        subsystem.sort_unstable();
        subsystem.dedup();
        if subsystem.is_empty() || subsystem.len() >= sites {
            return Err(Error::Domain(format!(
                "subsystem must be a nonempty proper subset of {sites} sites"
            )));
        }
        if let Some(&bad) = subsystem.iter().find(|&&s| s >= sites) {
            return Err(Error::Domain(format!("site {bad} out of range for L={sites}")));
        }
        Ok(Self { sites, subsystem })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Sites of `A` in increasing order.
    pub fn subsystem(&self) -> &[usize] {
        &self.subsystem
    }

    /// Sites of the complement in increasing order.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.sites).filter(|s| self.subsystem.binary_search(s).is_err()).collect()
    }

    pub fn complement_partition(&self) -> Self {
        Self { sites: self.sites, subsystem: self.complement() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(bits: &[u8]) -> Configuration {
        Configuration::from_occupations(bits).unwrap()
    }

    #[test]
    fn spin_basis_small_cases() {
        let b = enumerate_spin_basis(1).unwrap();
        assert_eq!(b.states().iter().map(|c| c.bits()).collect::<Vec<_>>(), vec![0, 1]);
        let b = enumerate_spin_basis(2).unwrap();
        assert_eq!(b.states().iter().map(|c| c.bits()).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        let b = enumerate_spin_basis(12).unwrap();
        assert_eq!(b.dim(), 4096);
        assert!(b.states().windows(2).all(|w| w[0].bits() < w[1].bits()));
    }

    #[test]
    fn spin_basis_size_limits() {
        assert!(matches!(enumerate_spin_basis(0), Err(Error::SizeLimit(_))));
        assert!(matches!(enumerate_spin_basis(21), Err(Error::SizeLimit(_))));
    }

    #[test]
    fn sector_enumeration() {
        let s = enumerate_sector(4, 2).unwrap();
        let bits: Vec<u32> = s.states().iter().map(|c| c.bits()).collect();
        assert_eq!(bits, vec![0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]);
        let vacuum = enumerate_sector(4, 0).unwrap();
        assert_eq!(vacuum.states().iter().map(|c| c.bits()).collect::<Vec<_>>(), vec![0]);
        assert_eq!(enumerate_sector(12, 6).unwrap().dim(), 924);
        assert!(matches!(enumerate_sector(3, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn sector_sizes_sum_to_full_space() {
        for l in 1..=12 {
            let total: usize = (0..=l).map(|n| enumerate_sector(l, n).unwrap().dim()).sum();
            assert_eq!(total, 1 << l);
        }
    }

    #[test]
    fn rank_matches_enumeration() {
        for l in 1..=10 {
            for n in 0..=l {
                let s = enumerate_sector(l, n).unwrap();
                for (k, &c) in s.states().iter().enumerate() {
                    assert_eq!(s.index_of(c).unwrap(), k);
                    assert_eq!(c.popcount(), n);
                }
            }
        }
    }

    #[test]
    fn index_of_examples() {
        let s = enumerate_sector(4, 2).unwrap();
        assert_eq!(index_of(Configuration::new(0b0011, 4).unwrap(), &s).unwrap(), 0);
        assert_eq!(index_of(Configuration::new(0b1100, 4).unwrap(), &s).unwrap(), 5);
        assert!(matches!(
            index_of(Configuration::new(0b0111, 4).unwrap(), &s),
            Err(Error::Lookup { .. })
        ));
    }

    #[test]
    fn hopping_examples() {
        let (c, sign) = apply_hopping_jw(occ(&[1, 0, 0, 1]), 1, 3).unwrap().unwrap();
        assert_eq!(c, occ(&[1, 1, 0, 0]));
        assert_eq!(sign, 1);

        assert!(matches!(
            apply_hopping_jw(occ(&[0, 1, 0, 0]), 1, 1),
            Err(Error::ContractViolation(_))
        ));
        assert_eq!(apply_hopping_jw(occ(&[0, 0, 1, 0]), 0, 1).unwrap(), None);
        assert_eq!(apply_hopping_jw(occ(&[1, 1, 0, 0]), 0, 1).unwrap(), None);
    }

    #[test]
    fn hopping_across_an_occupied_site_flips_sign() {
        // c†_0 c_2 on |0,1,1>: annihilating 2 passes one fermion.
        let (c, sign) = apply_hopping_jw(occ(&[0, 1, 1]), 0, 2).unwrap().unwrap();
        assert_eq!(c, occ(&[1, 1, 0]));
        assert_eq!(sign, -1);
    }

    #[test]
    fn configuration_validation() {
        assert!(Configuration::new(0b100, 2).is_err());
        let c = Configuration::new(0b1010, 4).unwrap();
        assert_eq!(c.occupied_sites().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(c.signed(0), -1);
        assert_eq!(c.signed(1), 1);
    }

    #[test]
    fn bipartition_validation() {
        assert!(Bipartition::new(4, vec![]).is_err());
        assert!(Bipartition::new(4, vec![0, 1, 2, 3]).is_err());
        assert!(Bipartition::new(4, vec![5]).is_err());
        let b = Bipartition::new(5, vec![3, 0]).unwrap();
        assert_eq!(b.subsystem(), &[0, 3]);
        assert_eq!(b.complement(), vec![1, 2, 4]);
    }
}
