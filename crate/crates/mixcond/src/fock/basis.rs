//! Occupation bases for the fixed-particle-number sectors of the symmetric
//! Fock space over `M` lattice modes.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};

/// Default cap on sector dimensions (guards accidental combinatorial blowups).
pub const DEFAULT_SECTOR_DIMENSION_LIMIT: usize = 1 << 21;

/// `C(n + m - 1, m - 1)`, the dimension of the `n`-particle sector over `m` modes.
/// Returns `None` on overflow.
pub fn sector_dimension(modes: usize, particles: usize) -> Option<u128> {
    binomial((particles + modes - 1) as u128, (modes - 1) as u128)
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
    }
    Some(acc)
}

/// Ordered basis of occupation vectors `(m_1, ..., m_M)` with `sum m_i = n`,
/// in descending lexicographic order, with index maps in both directions.
#[derive(Debug)]
pub struct SectorBasis {
    modes: usize,
    particles: usize,
    occupations: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl SectorBasis {
    /// Enumerate the sector basis, guarded by [`DEFAULT_SECTOR_DIMENSION_LIMIT`].
    pub fn new(modes: usize, particles: usize) -> Result<Self> {
        SectorBasis::with_limit(modes, particles, DEFAULT_SECTOR_DIMENSION_LIMIT)
    }

    /// Enumerate with an explicit dimension cap.
    pub fn with_limit(modes: usize, particles: usize, limit: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Config("sector basis needs at least one mode".into()));
        }
        if particles > u8::MAX as usize {
            return Err(Error::SectorLimit(format!(
                "occupations are stored as u8; {particles} particles exceeds that"
            )));
        }
        let expected = sector_dimension(modes, particles)
            .filter(|&d| d <= limit as u128)
            .ok_or_else(|| {
                Error::SectorLimit(format!(
                    "sector with {modes} modes and {particles} particles exceeds the limit of {limit} basis states"
                ))
            })?;
        let mut occupations = Vec::with_capacity(expected as usize);
        let mut scratch = vec![0u8; modes];
        fill_descending(&mut occupations, &mut scratch, 0, particles);
        debug_assert_eq!(occupations.len() as u128, expected);
        let index = occupations
            .iter()
            .enumerate()
            .map(|(i, occ)| (occ.clone(), i))
            .collect();
        Ok(SectorBasis {
            modes,
            particles,
            occupations,
            index,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.occupations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupations.is_empty()
    }

    pub fn occupation(&self, index: usize) -> &[u8] {
        &self.occupations[index]
    }

    pub fn occupations(&self) -> impl Iterator<Item = &[u8]> {
        self.occupations.iter().map(|o| o.as_slice())
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }
}

fn fill_descending(out: &mut Vec<Vec<u8>>, scratch: &mut Vec<u8>, mode: usize, remaining: usize) {
    if mode + 1 == scratch.len() {
        scratch[mode] = remaining as u8;
        out.push(scratch.clone());
        return;
    }
    for count in (0..=remaining).rev() {
        scratch[mode] = count as u8;
        fill_descending(out, scratch, mode + 1, remaining - count);
    }
}

/// Enumerate the occupation basis of the `n`-particle sector over `M` modes.
pub fn enumerate_sector_basis(modes: usize, particles: usize) -> Result<SectorBasis> {
    SectorBasis::new(modes, particles)
}

/// Lazy, thread-safe cache of sector bases for a fixed mode count. Both
/// species share the same one-body space, so one registry serves both.
#[derive(Debug)]
pub struct BasisRegistry {
    modes: usize,
    limit: usize,
    cache: RwLock<HashMap<usize, Arc<SectorBasis>>>,
}

impl BasisRegistry {
    pub fn new(modes: usize) -> Arc<Self> {
        BasisRegistry::with_limit(modes, DEFAULT_SECTOR_DIMENSION_LIMIT)
    }

    pub fn with_limit(modes: usize, limit: usize) -> Arc<Self> {
        Arc::new(BasisRegistry {
            modes,
            limit,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn get(&self, particles: usize) -> Result<Arc<SectorBasis>> {
        if let Some(basis) = self.cache.read().unwrap().get(&particles) {
            return Ok(basis.clone());
        }
        let basis = Arc::new(SectorBasis::with_limit(self.modes, particles, self.limit)?);
        let mut cache = self.cache.write().unwrap();
        Ok(cache.entry(particles).or_insert(basis).clone())
    }
}
