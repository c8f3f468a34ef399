//! Set partitions of `{1..m}`, Bell numbers and cumulant coefficients.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest ground set accepted by [`enumerate_partitions`].
pub const MAX_ENUMERATION_SIZE: usize = 6;
/// Largest argument accepted by [`bell`].
pub const MAX_BELL_ARG: usize = 12;

/// A partition of `{0..m}` (displayed 1-based) in canonical form: blocks are
/// ordered by their smallest element and elements are sorted within blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    /// `block_of[n]` is the block containing element `n`; a restricted
    /// growth string, which makes the canonical order automatic.
    block_of: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// Builds a partition from a restricted growth string
    /// (`rgs[0] = 0`, `rgs[n] <= 1 + max(rgs[..n])`).
    pub fn from_rgs(rgs: Vec<usize>) -> Result<Self> {
        let mut next = 0usize;
        for &b in &rgs {
            if b > next {
                return Err(Error::InvalidConfig(format!(
                    "{rgs:?} is not a restricted growth string"
                )));
            }
            if b == next {
                next += 1;
            }
        }
        let mut blocks = vec![Vec::new(); next];
        for (n, &b) in rgs.iter().enumerate() {
            blocks[b].push(n);
        }
        Ok(SetPartition {
            block_of: rgs,
            blocks,
        })
    }

    /// Builds a partition from arbitrary 0-based blocks, canonicalizing them.
    pub fn from_blocks(blocks: &[Vec<usize>]) -> Result<Self> {
        let m: usize = blocks.iter().map(Vec::len).sum();
        let mut owner = vec![usize::MAX; m];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidConfig("empty block".into()));
            }
            for &n in block {
                if n >= m || owner[n] != usize::MAX {
                    return Err(Error::InvalidConfig(format!(
                        "blocks {blocks:?} do not partition 0..{m}"
                    )));
                }
                owner[n] = b;
            }
        }
        // Relabel blocks by first appearance.
        let mut relabel = vec![usize::MAX; blocks.len()];
        let mut next = 0;
        let rgs = owner
            .iter()
            .map(|&b| {
                if relabel[b] == usize::MAX {
                    relabel[b] = next;
                    next += 1;
                }
                relabel[b]
            })
            .collect();
        SetPartition::from_rgs(rgs)
    }

    /// Size of the ground set.
    pub fn ground_size(&self) -> usize {
        self.block_of.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Index of the block containing element `n`.
    #[inline]
    pub fn block_of(&self, n: usize) -> usize {
        self.block_of[n]
    }

    /// The cumulant coefficient `(-1)^(|π|-1) (|π|-1)!`.
    pub fn coefficient(&self) -> i64 {
        coefficient_for_blocks(self.num_blocks())
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (j, n) in block.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", n + 1)?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

/// `(-1)^(b-1) (b-1)!` for a partition with `b` blocks.
pub fn coefficient_for_blocks(b: usize) -> i64 {
    assert!(b >= 1, "a partition has at least one block");
    let factorial: i64 = (1..b as i64).product();
    if (b - 1) % 2 == 0 {
        factorial
    } else {
        -factorial
    }
}

/// Free-function form of [`SetPartition::coefficient`].
pub fn coefficient(p: &SetPartition) -> i64 {
    p.coefficient()
}

/// All partitions of an `m`-element set, each exactly once, in
/// lexicographic order of their restricted growth strings (so the
/// single-block partition comes first).
pub fn enumerate_partitions(m: usize) -> Result<Vec<SetPartition>> {
    if !(1..=MAX_ENUMERATION_SIZE).contains(&m) {
        return Err(Error::OutOfRange {
            what: "partition ground-set size",
            value: m,
            min: 1,
            max: MAX_ENUMERATION_SIZE,
        });
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; m];
    extend_rgs(&mut rgs, 1, 0, &mut out);
    Ok(out)
}

fn extend_rgs(rgs: &mut Vec<usize>, pos: usize, max_so_far: usize, out: &mut Vec<SetPartition>) {
    if pos == rgs.len() {
        out.push(SetPartition::from_rgs(rgs.clone()).expect("valid rgs"));
        return;
    }
    for b in 0..=max_so_far + 1 {
        rgs[pos] = b;
        extend_rgs(rgs, pos + 1, max_so_far.max(b), out);
    }
}

/// Bell number `B_m` via `B_{m+1} = Σ_k C(m, k) B_k`.
pub fn bell(m: usize) -> Result<u64> {
    if m > MAX_BELL_ARG {
        return Err(Error::OutOfRange {
            what: "Bell number argument",
            value: m,
            min: 0,
            max: MAX_BELL_ARG,
        });
    }
    let mut b = vec![1u64];
    for n in 0..m {
        let next = (0..=n).map(|k| binomial(n as u64, k as u64) * b[k]).sum();
        b.push(next);
    }
    Ok(b[m])
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// A multi-index `i = (i₁, …, i_d)` selecting the cumulant `κ^i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidConfig("multi-index needs at least one entry".into()));
        }
        Ok(MultiIndex(entries))
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    /// Number of components `d`.
    pub fn components(&self) -> usize {
        self.0.len()
    }

    /// `m = i₁ + … + i_d`.
    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    /// Whether every entry is at least one, as independence criteria need.
    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&e| e >= 1)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}
