//! Canonical basis elements `f_{k,m}^{(N)} = q^{-m} + O(q)` for weight 0
//! (all supported levels) and weight 2 (prime levels), produced by exact
//! Gaussian elimination over a triangular spanning set:
//!
//! - weight 0: powers `ψ^j` of the level Hauptmodul,
//! - weight 2: `E_2^{(p)}·ψ^j`.
//!
//! Each spanning series has leading term `q^{-j}` with coefficient 1, so
//! the pivot for every exponent is unique and the normalized result is
//! canonical. A [`BasisBuilder`] keeps the expanded powers per level so
//! families of elements share the expensive series products, and can
//! persist elements through an on-disk [`ExpansionCache`].

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::eta::{self, Level};
use crate::qseries::{parse_rational, QSeries, SeriesRecord, SERIES_FORMAT_VERSION};
use crate::{Error, Result};

/// Extra precision given to generators beyond `target + m`, absorbing
/// off-by-one window alignment through the elimination.
pub const PRECISION_GUARD: i64 = 4;

/// The two weights this crate builds bases for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Weight {
    Zero,
    Two,
}

impl Weight {
    pub fn as_u32(self) -> u32 {
        match self {
            Weight::Zero => 0,
            Weight::Two => 2,
        }
    }

    pub fn from_u32(k: u32) -> Result<Self> {
        match k {
            0 => Ok(Weight::Zero),
            2 => Ok(Weight::Two),
            other => Err(Error::InvalidArgument(format!(
                "unsupported weight {other}; only 0 and 2 are built"
            ))),
        }
    }
}

impl std::fmt::Display for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_u32())
    }
}

/// A canonical basis element together with its representation over the
/// spanning set it was eliminated from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisElement {
    level: Level,
    weight: Weight,
    m: u32,
    expansion: QSeries,
    /// `combination[j]` multiplies `ψ^j` (weight 0) or `E_2^{(p)}·ψ^j`
    /// (weight 2); the element is the resulting linear combination.
    combination: Vec<BigRational>,
}

impl BasisElement {
    pub fn level(&self) -> Level {
        self.level
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    /// Pole order `m`: the expansion begins `q^{-m}`.
    pub fn pole_order(&self) -> u32 {
        self.m
    }

    pub fn expansion(&self) -> &QSeries {
        &self.expansion
    }

    pub fn combination(&self) -> &[BigRational] {
        &self.combination
    }

    /// Fourier coefficient of `q^n` in the expansion.
    pub fn coefficient(&self, n: i64) -> Result<BigRational> {
        self.expansion.coefficient(n)
    }

    pub fn integer_coefficient(&self, n: i64) -> Result<BigInt> {
        self.expansion.integer_coefficient(n)
    }

    pub fn to_record(&self) -> BasisRecord {
        BasisRecord {
            format_version: SERIES_FORMAT_VERSION,
            level: self.level.get(),
            weight: self.weight.as_u32(),
            m: self.m,
            series: self.expansion.to_record(),
            combination: self
                .combination
                .iter()
                .map(|c| {
                    if c.denom().is_one() {
                        c.numer().to_string()
                    } else {
                        format!("{}/{}", c.numer(), c.denom())
                    }
                })
                .collect(),
        }
    }

    pub fn from_record(record: &BasisRecord) -> Result<Self> {
        if record.format_version != SERIES_FORMAT_VERSION {
            return Err(Error::CacheFormat(format!(
                "basis record version {} (expected {})",
                record.format_version, SERIES_FORMAT_VERSION
            )));
        }
        Ok(BasisElement {
            level: Level::new(record.level)?,
            weight: Weight::from_u32(record.weight)?,
            m: record.m,
            expansion: QSeries::from_record(&record.series)?,
            combination: record
                .combination
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

/// On-disk exchange record for a basis element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisRecord {
    pub format_version: u32,
    pub level: u32,
    pub weight: u32,
    pub m: u32,
    pub series: SeriesRecord,
    pub combination: Vec<String>,
}

/// Directory-backed cache, one file per `(N, k, m)` at `<root>/<N>/<k>/<m>.qs`.
///
/// Writes go to a temporary file in the same directory and are renamed into
/// place, so concurrent builders never observe partial files. Unreadable or
/// version-mismatched files are treated as misses with a warning.
#[derive(Debug, Clone)]
pub struct ExpansionCache {
    root: PathBuf,
}

impl ExpansionCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ExpansionCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, level: Level, weight: Weight, m: u32) -> PathBuf {
        self.root
            .join(level.get().to_string())
            .join(weight.as_u32().to_string())
            .join(format!("{m}.qs"))
    }

    /// Look up a stored element. Returns `None` on miss, corruption, or a
    /// key mismatch between path and content.
    pub fn get(&self, level: Level, weight: Weight, m: u32) -> Option<BasisElement> {
        let path = self.path_for(level, weight, m);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(_) => return None,
        };
        let parsed: std::result::Result<BasisRecord, _> = serde_json::from_slice(&bytes);
        let element = match parsed {
            Ok(record) => BasisElement::from_record(&record),
            Err(e) => Err(Error::CacheFormat(e.to_string())),
        };
        match element {
            Ok(el) if el.level == level && el.weight == weight && el.m == m => Some(el),
            Ok(el) => {
                log::warn!(
                    "cache file {} holds ({}, {}, {}); treating as a miss",
                    path.display(),
                    el.level,
                    el.weight,
                    el.m
                );
                None
            }
            Err(e) => {
                log::warn!(
                    "cache file {} unreadable ({}); treating as a miss",
                    path.display(),
                    e
                );
                None
            }
        }
    }

    /// Store an element atomically, replacing any previous entry.
    pub fn put(&self, element: &BasisElement) -> Result<()> {
        let path = self.path_for(element.level, element.weight, element.m);
        let dir = path.parent().expect("cache paths have parents");
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer(&mut tmp, &element.to_record())
            .map_err(|e| Error::CacheFormat(e.to_string()))?;
        tmp.write_all(b"\n")?;
        tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    /// Every `(level, weight, m, precision)` currently stored, sorted.
    pub fn list(&self) -> Result<Vec<(u32, u32, u32, i64)>> {
        let mut entries = Vec::new();
        if !self.root.exists() {
            return Ok(entries);
        }
        for level in Level::ALL {
            for weight in [Weight::Zero, Weight::Two] {
                let dir = self
                    .root
                    .join(level.get().to_string())
                    .join(weight.as_u32().to_string());
                let Ok(read) = std::fs::read_dir(&dir) else {
                    continue;
                };
                for entry in read.flatten() {
                    let name = entry.file_name();
                    let Some(m) = name
                        .to_str()
                        .and_then(|s| s.strip_suffix(".qs"))
                        .and_then(|s| s.parse::<u32>().ok())
                    else {
                        continue;
                    };
                    if let Some(el) = self.get(level, weight, m) {
                        entries.push((level.get(), weight.as_u32(), m, el.expansion.precision()));
                    }
                }
            }
        }
        entries.sort();
        Ok(entries)
    }

    /// Remove every stored element. Returns how many files were deleted.
    pub fn clear(&self) -> Result<usize> {
        let mut removed = 0;
        for (level, weight, m, _) in self.list()? {
            let path = self.path_for(Level::new(level)?, Weight::from_u32(weight)?, m);
            if std::fs::remove_file(path).is_ok() {
                removed += 1;
            }
        }
        Ok(removed)
    }
}

/// Per-level workspace: the Hauptmodul powers (and, for weight 2, the
/// `E_2^{(p)}·ψ^j` products) expanded at a shared base precision.
struct LevelWorkspace {
    base_precision: i64,
    powers: Vec<QSeries>,
    weight2_gens: Vec<QSeries>,
}

impl LevelWorkspace {
    fn new(level: Level, base_precision: i64) -> Result<Self> {
        let psi = eta::hauptmodul(level, base_precision)?;
        Ok(LevelWorkspace {
            base_precision,
            powers: vec![QSeries::one(base_precision + 1), psi],
            weight2_gens: Vec::new(),
        })
    }

    fn extend_powers(&mut self, max_pole: u32) {
        let psi = self.powers[1].clone();
        while self.powers.len() <= max_pole as usize {
            let next = self.powers.last().unwrap().mul(&psi);
            self.powers.push(next);
        }
    }

    fn extend_weight2(&mut self, level: Level, max_pole: u32) -> Result<()> {
        if self.weight2_gens.is_empty() {
            let e2p = eta::eisenstein_e2_level(level, self.base_precision)?;
            self.weight2_gens.push(e2p);
        }
        self.extend_powers(max_pole);
        while self.weight2_gens.len() <= max_pole as usize {
            let j = self.weight2_gens.len();
            self.weight2_gens
                .push(self.weight2_gens[0].mul(&self.powers[j]));
        }
        Ok(())
    }
}

/// Builds canonical basis elements, reusing Hauptmodul powers per level and
/// memoizing finished elements (optionally through an on-disk cache).
pub struct BasisBuilder {
    workspaces: HashMap<Level, LevelWorkspace>,
    elements: HashMap<(Level, Weight, u32), Arc<BasisElement>>,
    disk: Option<ExpansionCache>,
}

impl BasisBuilder {
    pub fn new() -> Self {
        BasisBuilder {
            workspaces: HashMap::new(),
            elements: HashMap::new(),
            disk: None,
        }
    }

    pub fn with_cache(cache: ExpansionCache) -> Self {
        BasisBuilder {
            workspaces: HashMap::new(),
            elements: HashMap::new(),
            disk: Some(cache),
        }
    }

    pub fn cache(&self) -> Option<&ExpansionCache> {
        self.disk.as_ref()
    }

    /// Generator precision needed to deliver coefficients through
    /// `q^target` for a pole of order `m`.
    pub fn working_precision(m: u32, target: i64) -> i64 {
        target + m as i64 + PRECISION_GUARD
    }

    /// Expand the level workspace so that every element with pole order up
    /// to `max_pole` can be delivered through `q^target`. Families of
    /// requests should call this once with their outer bounds; per-element
    /// builds then reuse the shared powers.
    pub fn prepare(
        &mut self,
        level: Level,
        weight: Weight,
        max_pole: u32,
        target: i64,
    ) -> Result<()> {
        let needed = Self::working_precision(max_pole, target);
        let rebuild = match self.workspaces.get(&level) {
            Some(ws) => ws.base_precision < needed,
            None => true,
        };
        if rebuild {
            self.workspaces
                .insert(level, LevelWorkspace::new(level, needed)?);
        }
        let ws = self.workspaces.get_mut(&level).expect("just inserted");
        match weight {
            Weight::Zero => ws.extend_powers(max_pole),
            Weight::Two => ws.extend_weight2(level, max_pole)?,
        }
        Ok(())
    }

    /// The weight-0 element `f_{0,m}^{(N)} = q^{-m} + O(q)`, reliable at
    /// least through `q^target`.
    pub fn build_f0(&mut self, level: Level, m: u32, target: i64) -> Result<Arc<BasisElement>> {
        self.build(level, Weight::Zero, m, target)
    }

    /// The weight-2 element `f_{2,m}^{(p)} = q^{-m} + O(q)` for a prime
    /// level, reliable at least through `q^target`.
    pub fn build_f2(&mut self, level: Level, m: u32, target: i64) -> Result<Arc<BasisElement>> {
        self.build(level, Weight::Two, m, target)
    }

    pub fn build(
        &mut self,
        level: Level,
        weight: Weight,
        m: u32,
        target: i64,
    ) -> Result<Arc<BasisElement>> {
        if weight == Weight::Two && !level.is_prime() {
            return Err(Error::UnsupportedLevel(level.get()));
        }
        if let Some(found) = self.elements.get(&(level, weight, m)) {
            if found.expansion.precision() >= target {
                return Ok(Arc::clone(found));
            }
        }
        if let Some(disk) = &self.disk {
            if let Some(found) = disk.get(level, weight, m) {
                if found.expansion.precision() >= target {
                    let arc = Arc::new(found);
                    self.elements.insert((level, weight, m), Arc::clone(&arc));
                    return Ok(arc);
                }
            }
        }
        self.prepare(level, weight, m, target)?;
        let ws = self.workspaces.get(&level).expect("prepared");
        let gens = match weight {
            Weight::Zero => &ws.powers,
            Weight::Two => &ws.weight2_gens,
        };
        let element = Arc::new(eliminate(level, weight, m, gens)?);
        if let Some(disk) = &self.disk {
            disk.put(&element)?;
        }
        self.elements
            .insert((level, weight, m), Arc::clone(&element));
        Ok(element)
    }

    /// Build a whole family of elements over shared generators, in parallel.
    /// `poles` lists the wanted pole orders; the result is in the same order.
    pub fn build_family(
        &mut self,
        level: Level,
        weight: Weight,
        poles: &[u32],
        target: i64,
    ) -> Result<Vec<Arc<BasisElement>>> {
        if weight == Weight::Two && !level.is_prime() {
            return Err(Error::UnsupportedLevel(level.get()));
        }
        let max_pole = poles.iter().copied().max().unwrap_or(0);
        let missing: Vec<u32> = poles
            .iter()
            .copied()
            .filter(|&m| match self.elements.get(&(level, weight, m)) {
                Some(el) => el.expansion.precision() < target,
                None => true,
            })
            .collect();
        if !missing.is_empty() {
            self.prepare(level, weight, max_pole, target)?;
            let ws = self.workspaces.get(&level).expect("prepared");
            let gens = match weight {
                Weight::Zero => &ws.powers,
                Weight::Two => &ws.weight2_gens,
            };
            let built: Vec<(u32, Result<BasisElement>)> = missing
                .par_iter()
                .map(|&m| (m, eliminate(level, weight, m, gens)))
                .collect();
            for (m, result) in built {
                let element = Arc::new(result?);
                if let Some(disk) = &self.disk {
                    disk.put(&element)?;
                }
                self.elements.insert((level, weight, m), element);
            }
        }
        Ok(poles
            .iter()
            .map(|m| Arc::clone(&self.elements[&(level, weight, *m)]))
            .collect())
    }
}

impl Default for BasisBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// Exact elimination over a triangular spanning set. `gens[j]` must begin
/// `q^{-j} + …` with leading coefficient 1; coefficients of `q^{-m+1}`
/// through `q^0` are cleared from `gens[m]` using the unique matching
/// pivots, leaving the canonical `q^{-m} + O(q)` element.
fn eliminate(level: Level, weight: Weight, m: u32, gens: &[QSeries]) -> Result<BasisElement> {
    let mut work = gens[m as usize].clone();
    let mut combination = vec![BigRational::zero(); m as usize + 1];
    combination[m as usize] = BigRational::one();
    for j in (0..m as i64).rev() {
        let c = work.coefficient(-j)?;
        if !c.is_zero() {
            work = work.sub_scaled(&gens[j as usize], &c);
            combination[j as usize] = -c;
        }
    }
    let obstruction = |exponent: i64| Error::BasisObstruction {
        level: level.get(),
        weight: weight.as_u32(),
        m,
        exponent,
    };
    // canonical shape: leading 1 at q^{-m} (m ≥ 1), zero gap through q^0
    if m >= 1 {
        if !work.coefficient(-(m as i64))?.is_one() {
            return Err(obstruction(-(m as i64)));
        }
        for e in (-(m as i64) + 1)..=0 {
            if !work.coefficient(e)?.is_zero() {
                return Err(obstruction(e));
            }
        }
    }
    work.assert_integral()?;
    if weight == Weight::Zero {
        for (j, c) in combination.iter().enumerate() {
            if !c.denom().is_one() {
                return Err(Error::NonIntegral {
                    exponent: j as i64,
                    value: format!("generator multiplier {c}"),
                });
            }
        }
    }
    Ok(BasisElement {
        level,
        weight,
        m,
        expansion: work,
        combination,
    })
}
