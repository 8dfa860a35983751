//! Cyclic configurations, pattern counting and configuration-space
//! enumeration shared by all three engines.
//!
//! A [`RingConfig`] is a cyclic word over either the binary alphabet `{0,1}`
//! or the species alphabet `{0,A,B}`; site `j+L` is site `j`. Binary rings
//! are packed one bit per cell and species rings two bits per cell, since
//! space enumeration and pattern scans dominate the exact engines' runtime
//! and configurations are used as hash keys throughout.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::binomial_big;
use num_traits::ToPrimitive;

/// Site alphabet of a ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alphabet {
    /// Sites hold `0` or `1`.
    Binary,
    /// Sites hold `0`, `A` or `B`; a site never hosts two particles at once.
    Species,
}

impl Alphabet {
    pub fn name(self) -> &'static str {
        match self {
            Alphabet::Binary => "binary",
            Alphabet::Species => "species",
        }
    }

    fn max_cell(self) -> u8 {
        match self {
            Alphabet::Binary => 1,
            Alphabet::Species => 2,
        }
    }
}

/// Cell value for the `A` species (and for binary particles).
pub const CELL_A: u8 = 1;
/// Cell value for the `B` species.
pub const CELL_B: u8 = 2;

/// A cyclic configuration of length `L >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RingConfig {
    len: usize,
    alphabet: Alphabet,
    words: Vec<u64>,
}

impl RingConfig {
    /// All-empty ring.
    pub fn empty(len: usize, alphabet: Alphabet) -> Result<Self> {
        if len == 0 {
            return Err(Error::RingTooShort { min: 1, got: 0 });
        }
        let words = match alphabet {
            Alphabet::Binary => len.div_ceil(64),
            Alphabet::Species => len.div_ceil(32),
        };
        Ok(Self {
            len,
            alphabet,
            words: vec![0; words],
        })
    }

    pub fn from_cells(alphabet: Alphabet, cells: &[u8]) -> Result<Self> {
        let mut ring = Self::empty(cells.len(), alphabet)?;
        for (j, &c) in cells.iter().enumerate() {
            if c > alphabet.max_cell() {
                return Err(Error::Parameter(format!(
                    "cell value {c} invalid for {} alphabet",
                    alphabet.name()
                )));
            }
            ring.set(j, c);
        }
        Ok(ring)
    }

    /// Parses a textual literal, site 1 leftmost: `'0'`/`'1'` for binary
    /// rings, `'0'`/`'A'`/`'B'` for species rings. The alphabet is inferred:
    /// any `A` or `B` makes the ring a species ring.
    pub fn parse(s: &str) -> Result<Self> {
        if s.chars().any(|c| c == 'A' || c == 'B') {
            Self::parse_species(s)
        } else {
            Self::parse_binary(s)
        }
    }

    pub fn parse_binary(s: &str) -> Result<Self> {
        let cells: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!("invalid binary site {other:?}"))),
            })
            .collect::<Result<_>>()?;
        Self::from_cells(Alphabet::Binary, &cells)
    }

    pub fn parse_species(s: &str) -> Result<Self> {
        let cells: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                'A' => Ok(CELL_A),
                'B' => Ok(CELL_B),
                other => Err(Error::Parse(format!("invalid species site {other:?}"))),
            })
            .collect::<Result<_>>()?;
        Self::from_cells(Alphabet::Species, &cells)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false // length is always >= 1
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Cell value at site `j` (0-based, `j < L`).
    #[inline]
    pub fn get(&self, j: usize) -> u8 {
        debug_assert!(j < self.len);
        match self.alphabet {
            Alphabet::Binary => ((self.words[j >> 6] >> (j & 63)) & 1) as u8,
            Alphabet::Species => ((self.words[j >> 5] >> ((j & 31) << 1)) & 3) as u8,
        }
    }

    /// Cell value at site `j mod L`.
    #[inline]
    pub fn get_cyclic(&self, j: usize) -> u8 {
        self.get(j % self.len)
    }

    #[inline]
    pub(crate) fn set(&mut self, j: usize, v: u8) {
        debug_assert!(j < self.len && v <= self.alphabet.max_cell());
        match self.alphabet {
            Alphabet::Binary => {
                let (w, b) = (j >> 6, j & 63);
                self.words[w] = (self.words[w] & !(1 << b)) | ((v as u64) << b);
            }
            Alphabet::Species => {
                let (w, b) = (j >> 5, (j & 31) << 1);
                self.words[w] = (self.words[w] & !(3 << b)) | ((v as u64) << b);
            }
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }

    /// Ring with cell `j` holding the value of cell `j+r` (cyclic).
    pub fn rotate(&self, r: usize) -> Self {
        let mut out = self.clone();
        for j in 0..self.len {
            out.set(j, self.get_cyclic(j + r));
        }
        out
    }

    /// Number of nonzero cells.
    pub fn particle_count(&self) -> usize {
        self.cells().filter(|&c| c != 0).count()
    }

    /// `(m_A, m_B)` particle counts; binary particles count as `A`.
    pub fn species_counts(&self) -> (usize, usize) {
        let mut m_a = 0;
        let mut m_b = 0;
        for c in self.cells() {
            match c {
                CELL_A => m_a += 1,
                CELL_B => m_b += 1,
                _ => {}
            }
        }
        (m_a, m_b)
    }

    /// Particle labels read cyclically from site 0, empty sites skipped.
    pub fn particle_sequence(&self) -> Vec<u8> {
        self.cells().filter(|&c| c != 0).collect()
    }
}

impl PartialOrd for RingConfig {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RingConfig {
    /// Cell-wise lexicographic order under `0 < 1` / `0 < A < B`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.len
            .cmp(&other.len)
            .then_with(|| (self.alphabet as u8).cmp(&(other.alphabet as u8)))
            .then_with(|| self.cells().cmp(other.cells()))
    }
}

impl fmt::Display for RingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.cells() {
            let ch = match (self.alphabet, c) {
                (_, 0) => '0',
                (Alphabet::Binary, _) => '1',
                (Alphabet::Species, CELL_A) => 'A',
                (Alphabet::Species, _) => 'B',
            };
            f.write_fmt(format_args!("{ch}"))?;
        }
        Ok(())
    }
}

/// Counts of the local patterns that weight the steady-state conjectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternTally {
    Pbca {
        c10: usize,
    },
    Epbca1 {
        c100: usize,
        c101: usize,
    },
    Epbca2 {
        k_a: usize,
        k_b: usize,
        n_a: usize,
        n_b: usize,
        m_a: usize,
        m_b: usize,
    },
}

/// Number of cyclic `10` patterns in a binary ring.
pub fn count_10(x: &RingConfig) -> Result<usize> {
    if x.alphabet() != Alphabet::Binary {
        return Err(Error::AlphabetMismatch { expected: "binary" });
    }
    let l = x.len();
    Ok((0..l)
        .filter(|&j| x.get(j) == 1 && x.get_cyclic(j + 1) == 0)
        .count())
}

/// Numbers of cyclic `100` and `101` patterns in a binary ring (`L >= 3`).
pub fn count_100_101(x: &RingConfig) -> Result<(usize, usize)> {
    if x.alphabet() != Alphabet::Binary {
        return Err(Error::AlphabetMismatch { expected: "binary" });
    }
    let l = x.len();
    if l < 3 {
        return Err(Error::RingTooShort { min: 3, got: l });
    }
    let mut c100 = 0;
    let mut c101 = 0;
    for j in 0..l {
        if x.get(j) == 1 && x.get_cyclic(j + 1) == 0 {
            if x.get_cyclic(j + 2) == 0 {
                c100 += 1;
            } else {
                c101 += 1;
            }
        }
    }
    Ok((c100, c101))
}

/// Two-species pattern tally of a species ring.
///
/// `k_a`/`k_b` count particles immediately followed by an empty site (`A0`,
/// `B0`); `n_a`/`n_b` count the empty sites lying in maximal zero-runs whose
/// left-adjacent particle is an `A` (resp. `B`). Together with the particle
/// counts, `m_a + m_b + n_a + n_b = L`. Note that `k_a` is the number of `A0`
/// patterns, not the particle count `m_a`; the two coincide only when every
/// particle heads a zero-run.
///
/// Fails for an all-empty ring, where no particle exists to own the zero-runs.
pub fn tally_species(x: &RingConfig) -> Result<PatternTally> {
    if x.alphabet() != Alphabet::Species {
        return Err(Error::AlphabetMismatch {
            expected: "species",
        });
    }
    let l = x.len();
    let (m_a, m_b) = x.species_counts();
    if m_a + m_b == 0 {
        if x.cells().any(|c| c == 0) {
            return Err(Error::UndefinedTally);
        }
        unreachable!("ring of length >= 1 with no particles has empty sites");
    }
    let mut k_a = 0;
    let mut k_b = 0;
    let mut n_a = 0;
    let mut n_b = 0;
    for j in 0..l {
        let c = x.get(j);
        if c == 0 {
            continue;
        }
        if x.get_cyclic(j + 1) == 0 {
            if c == CELL_A {
                k_a += 1;
            } else {
                k_b += 1;
            }
        }
        // zeros to the right of this particle, up to the next particle
        let mut run = 0;
        while x.get_cyclic(j + 1 + run) == 0 {
            run += 1;
        }
        if c == CELL_A {
            n_a += run;
        } else {
            n_b += run;
        }
    }
    debug_assert_eq!(m_a + m_b + n_a + n_b, l);
    Ok(PatternTally::Epbca2 {
        k_a,
        k_b,
        n_a,
        n_b,
        m_a,
        m_b,
    })
}

/// Whether two rings carry the same particle sequence up to cyclic rotation.
pub fn same_particle_sequence(x: &RingConfig, y: &RingConfig) -> bool {
    let a = x.particle_sequence();
    let b = y.particle_sequence();
    if a.len() != b.len() {
        return false;
    }
    if a.is_empty() {
        return true;
    }
    (0..a.len()).any(|r| (0..a.len()).all(|i| a[(i + r) % a.len()] == b[i]))
}

/// Lexicographically minimal rotation; idempotent.
pub fn canonical_rotation(x: &RingConfig) -> RingConfig {
    let mut best = x.clone();
    for r in 1..x.len() {
        let cand = x.rotate(r);
        if cand < best {
            best = cand;
        }
    }
    best
}

/// Identifier of a configuration within a [`ConfigSpace`]; ids are assigned
/// in enumeration order.
pub type StateId = usize;

/// Particle content of a configuration space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counts {
    Binary { m: usize },
    Species { m_a: usize, m_b: usize },
}

/// One cyclic-rotation equivalence class.
#[derive(Debug, Clone)]
pub struct RotationClass {
    /// Lexicographically minimal rotation among the members.
    pub representative: RingConfig,
    /// Member state ids, ascending.
    pub members: Vec<StateId>,
}

/// An enumerated configuration space with a bidirectional config<->id map
/// and its partition into rotation classes. Immutable after construction and
/// freely shareable across threads.
#[derive(Debug, Clone)]
pub struct ConfigSpace {
    configs: Vec<RingConfig>,
    index: HashMap<RingConfig, StateId>,
    classes: Vec<RotationClass>,
    class_of: Vec<usize>,
    counts: Counts,
    len: usize,
    alphabet: Alphabet,
}

/// Largest state count the exact engines will enumerate.
pub const MAX_SPACE: usize = 2_000_000;

impl ConfigSpace {
    fn from_configs(mut configs: Vec<RingConfig>, counts: Counts) -> Self {
        configs.sort_unstable();
        let len = configs[0].len();
        let alphabet = configs[0].alphabet();
        let index: HashMap<RingConfig, StateId> = configs
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        debug_assert_eq!(index.len(), configs.len(), "duplicate configurations");

        let mut by_rep: HashMap<RingConfig, Vec<StateId>> = HashMap::new();
        for (id, c) in configs.iter().enumerate() {
            by_rep.entry(canonical_rotation(c)).or_default().push(id);
        }
        let mut reps: Vec<RingConfig> = by_rep.keys().cloned().collect();
        reps.sort_unstable();
        let mut classes = Vec::with_capacity(reps.len());
        let mut class_of = vec![0usize; configs.len()];
        for (k, rep) in reps.into_iter().enumerate() {
            let mut members = by_rep.remove(&rep).unwrap();
            members.sort_unstable();
            for &id in &members {
                class_of[id] = k;
            }
            classes.push(RotationClass {
                representative: rep,
                members,
            });
        }

        Self {
            configs,
            index,
            classes,
            class_of,
            counts,
            len,
            alphabet,
        }
    }

    pub fn size(&self) -> usize {
        self.configs.len()
    }

    pub fn ring_len(&self) -> usize {
        self.len
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }

    pub fn config(&self, id: StateId) -> &RingConfig {
        &self.configs[id]
    }

    pub fn configs(&self) -> &[RingConfig] {
        &self.configs
    }

    pub fn id_of(&self, config: &RingConfig) -> Option<StateId> {
        self.index.get(config).copied()
    }

    pub fn classes(&self) -> &[RotationClass] {
        &self.classes
    }

    pub fn class_of(&self, id: StateId) -> usize {
        self.class_of[id]
    }
}

/// All binary configurations of length `l` with exactly `m` particles,
/// with rotation classes computed.
pub fn enumerate_binary(l: usize, m: usize) -> Result<ConfigSpace> {
    if l == 0 {
        return Err(Error::RingTooShort { min: 1, got: 0 });
    }
    if m > l {
        return Err(Error::Parameter(format!(
            "particle count m = {m} exceeds ring length L = {l}"
        )));
    }
    let size = binomial_big(l as u64, m as u64);
    let size = size
        .to_usize()
        .filter(|&s| s <= MAX_SPACE)
        .ok_or(Error::Capacity {
            size: usize::MAX,
            cap: MAX_SPACE,
        })?;

    let mut configs = Vec::with_capacity(size);
    // iterate m-subsets of sites as ascending index vectors
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        let mut ring = RingConfig::empty(l, Alphabet::Binary)?;
        for &j in &idx {
            ring.set(j, 1);
        }
        configs.push(ring);
        if m == 0 {
            break;
        }
        // advance to next combination
        let mut i = m;
        loop {
            if i == 0 {
                return Ok(ConfigSpace::from_configs(configs, Counts::Binary { m }));
            }
            i -= 1;
            if idx[i] != i + l - m {
                break;
            }
        }
        idx[i] += 1;
        for k in i + 1..m {
            idx[k] = idx[k - 1] + 1;
        }
    }
    Ok(ConfigSpace::from_configs(configs, Counts::Binary { m }))
}

/// Closure of `x0` under positive-probability transitions: every
/// configuration obtained by repeatedly moving particles into empty right
/// neighbours. Preserves particle counts and the cyclic species sequence.
pub fn enumerate_species_reachable(x0: &RingConfig) -> Result<ConfigSpace> {
    if x0.alphabet() != Alphabet::Species {
        return Err(Error::AlphabetMismatch {
            expected: "species",
        });
    }
    if x0.particle_count() == 0 {
        return Err(Error::Parameter(
            "reachability closure needs at least one particle".into(),
        ));
    }
    let (m_a, m_b) = x0.species_counts();
    let l = x0.len();

    let mut seen: HashMap<RingConfig, ()> = HashMap::new();
    seen.insert(x0.clone(), ());
    let mut frontier = vec![x0.clone()];
    while let Some(x) = frontier.pop() {
        // single moves generate the same closure as full parallel updates:
        // movers have disjoint sources and targets
        for j in 0..l {
            let c = x.get(j);
            if c == 0 || x.get_cyclic(j + 1) != 0 {
                continue;
            }
            let mut y = x.clone();
            y.set(j, 0);
            y.set((j + 1) % l, c);
            if !seen.contains_key(&y) {
                if seen.len() >= MAX_SPACE {
                    return Err(Error::Capacity {
                        size: seen.len() + 1,
                        cap: MAX_SPACE,
                    });
                }
                seen.insert(y.clone(), ());
                frontier.push(y);
            }
        }
    }

    let configs: Vec<RingConfig> = seen.into_keys().collect();
    Ok(ConfigSpace::from_configs(
        configs,
        Counts::Species { m_a, m_b },
    ))
}
