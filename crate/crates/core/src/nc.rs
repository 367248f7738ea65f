//! Non-crossing partitions of `[m]` into singletons and pairs, block depths,
//! and the depth-weighted moment formula.

use std::fmt;

use crate::{Error, JacobiParams, Result};

/// Enumeration budget for partitions with singletons (Motzkin growth).
pub const NC12_MAX_M: usize = 16;
/// Enumeration budget for pair partitions (Catalan growth).
pub const NC2_MAX_M: usize = 20;

/// A block of a partition of `[m]`: a singleton or a pair, elements 1-indexed
/// and stored in increasing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    Singleton(usize),
    Pair(usize, usize),
}

impl Block {
    /// Smallest element of the block.
    pub fn lo(&self) -> usize {
        match *self {
            Block::Singleton(a) => a,
            Block::Pair(a, _) => a,
        }
    }

    /// Largest element of the block.
    pub fn hi(&self) -> usize {
        match *self {
            Block::Singleton(a) => a,
            Block::Pair(_, b) => b,
        }
    }

    pub fn is_pair(&self) -> bool {
        matches!(self, Block::Pair(_, _))
    }

    pub fn size(&self) -> usize {
        if self.is_pair() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Block::Singleton(a) => write!(f, "{{{a}}}"),
            Block::Pair(a, b) => write!(f, "{{{a},{b}}}"),
        }
    }
}

/// Counts of singletons and pairs by depth class:
/// `s1`/`s2` singletons of depth 1 / depth > 1, `b1`/`b2` likewise for pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthCensus {
    pub s1: usize,
    pub s2: usize,
    pub b1: usize,
    pub b2: usize,
}

/// A non-crossing partition of `[m]` into singletons and pairs, with the
/// depth and nearest outer block of every block.
///
/// Blocks are ordered by their smallest element. The depth of a block is one
/// plus the number of pairs strictly nesting it; the nearest outer block is
/// the nesting pair that lies immediately above (absent exactly at depth 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NCPartition {
    m: usize,
    blocks: Vec<Block>,
    depths: Vec<usize>,
    nearest_outer: Vec<Option<usize>>,
}

impl NCPartition {
    /// Validate blocks as a non-crossing partition of `[m]` and compute
    /// depths. Blocks may be given in any order; they are sorted by their
    /// smallest element.
    pub fn from_blocks(m: usize, mut blocks: Vec<Block>) -> Result<Self> {
        let mut seen = vec![false; m];
        for b in &blocks {
            let (lo, hi) = (b.lo(), b.hi());
            if lo < 1 || hi > m || (b.is_pair() && lo >= hi) {
                return Err(Error::InvalidParameter(format!(
                    "block {b} out of range for ground set [{m}]"
                )));
            }
            for e in [lo, hi] {
                if seen[e - 1] && !(e == lo && e == hi) {
                    return Err(Error::InvalidParameter(format!(
                        "element {e} covered twice"
                    )));
                }
            }
            seen[lo - 1] = true;
            seen[hi - 1] = true;
        }
        if let Some(e) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidParameter(format!(
                "element {} not covered",
                e + 1
            )));
        }
        blocks.sort_by_key(Block::lo);
        for (i, a) in blocks.iter().enumerate() {
            if let Block::Pair(p, q) = *a {
                for b in &blocks[i + 1..] {
                    if let Block::Pair(r, s) = *b {
                        if p < r && r < q && q < s {
                            return Err(Error::InvalidParameter(format!(
                                "blocks {a} and {b} cross"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self::from_sorted_blocks_unchecked(m, blocks))
    }

    /// Depths and nearest outer blocks by direct nesting scan, independent of
    /// how the blocks were produced.
    fn from_sorted_blocks_unchecked(m: usize, blocks: Vec<Block>) -> Self {
        let mut depths = Vec::with_capacity(blocks.len());
        let mut nearest_outer = Vec::with_capacity(blocks.len());
        for b in &blocks {
            let (lo, hi) = (b.lo(), b.hi());
            let mut depth = 1;
            let mut nearest: Option<usize> = None;
            for (j, outer) in blocks.iter().enumerate() {
                if let Block::Pair(r, s) = *outer {
                    if r < lo && hi < s {
                        depth += 1;
                        let better = match nearest {
                            None => true,
                            Some(k) => blocks[k].lo() < r,
                        };
                        if better {
                            nearest = Some(j);
                        }
                    }
                }
            }
            depths.push(depth);
            nearest_outer.push(nearest);
        }
        NCPartition {
            m,
            blocks,
            depths,
            nearest_outer,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn depths(&self) -> &[usize] {
        &self.depths
    }

    pub fn nearest_outer(&self) -> &[Option<usize>] {
        &self.nearest_outer
    }

    /// `(|S1|, |S2|, |B1|, |B2|)`: singletons and pairs split by depth 1
    /// versus depth > 1.
    pub fn depth_census(&self) -> DepthCensus {
        let mut census = DepthCensus {
            s1: 0,
            s2: 0,
            b1: 0,
            b2: 0,
        };
        for (b, &d) in self.blocks.iter().zip(&self.depths) {
            match (b.is_pair(), d == 1) {
                (false, true) => census.s1 += 1,
                (false, false) => census.s2 += 1,
                (true, true) => census.b1 += 1,
                (true, false) => census.b2 += 1,
            }
        }
        census
    }

    /// Jacobi weight: every depth-`d` singleton contributes `alpha(d)`,
    /// every depth-`d` pair contributes `beta(d)`.
    pub fn weight(&self, j: &JacobiParams) -> f64 {
        self.blocks
            .iter()
            .zip(&self.depths)
            .map(|(b, &d)| {
                if b.is_pair() {
                    j.beta(d)
                } else {
                    j.alpha(d)
                }
            })
            .product()
    }
}

impl fmt::Display for NCPartition {
    /// One-line dump format: `{1,8}{2,5}{3,4}{6,7} | d=1,2,3,2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.blocks.is_empty() {
            return write!(f, "{{}} | d=");
        }
        for b in &self.blocks {
            write!(f, "{b}")?;
        }
        write!(f, " | d=")?;
        for (i, d) in self.depths.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Streaming enumerator over `NC^{1,2}_m` (or `NC^2_m` when singletons are
/// disabled). Partitions are produced by canonical recursion on the smallest
/// uncovered element: first the singleton choice, then pairing with each
/// later element in increasing order, filling the inside of a pair before
/// the part after it.
pub struct NcIter {
    m: usize,
    allow_singletons: bool,
    stack: Vec<Frame>,
    blocks: Vec<Block>,
}

struct Frame {
    /// Pending disjoint intervals, leftmost first.
    segments: Vec<(usize, usize)>,
    /// Length of `blocks` when this frame was entered.
    block_mark: usize,
    /// 0 = singleton choice, k >= 1 = pair the first element with `lo + k`.
    next_choice: usize,
}

impl NcIter {
    fn new(m: usize, allow_singletons: bool) -> Self {
        let segments = if m == 0 { Vec::new() } else { vec![(1, m)] };
        NcIter {
            m,
            allow_singletons,
            stack: vec![Frame {
                segments,
                block_mark: 0,
                next_choice: if allow_singletons { 0 } else { 1 },
            }],
            blocks: Vec::new(),
        }
    }
}

impl Iterator for NcIter {
    type Item = NCPartition;

    fn next(&mut self) -> Option<NCPartition> {
        loop {
            let frame = self.stack.last_mut()?;
            if frame.segments.is_empty() {
                // Every element is covered: emit, then backtrack.
                self.stack.pop();
                return Some(NCPartition::from_sorted_blocks_unchecked(
                    self.m,
                    self.blocks.clone(),
                ));
            }
            let (lo, hi) = frame.segments[0];
            let choice = frame.next_choice;
            if choice > hi - lo {
                let mark = frame.block_mark;
                self.blocks.truncate(mark);
                self.stack.pop();
                continue;
            }
            frame.next_choice += 1;
            let mut child_segments: Vec<(usize, usize)> = Vec::new();
            let block;
            if choice == 0 {
                block = Block::Singleton(lo);
                if lo + 1 <= hi {
                    child_segments.push((lo + 1, hi));
                }
            } else {
                let j = lo + choice;
                block = Block::Pair(lo, j);
                if lo + 1 <= j - 1 {
                    child_segments.push((lo + 1, j - 1));
                }
                if j + 1 <= hi {
                    child_segments.push((j + 1, hi));
                }
            }
            child_segments.extend_from_slice(&frame.segments[1..]);
            let mark = frame.block_mark;
            let allow = self.allow_singletons;
            self.blocks.truncate(mark);
            self.blocks.push(block);
            self.stack.push(Frame {
                segments: child_segments,
                block_mark: mark + 1,
                next_choice: if allow { 0 } else { 1 },
            });
        }
    }
}

/// All non-crossing partitions of `[m]` into singletons and pairs.
/// `|NC^{1,2}_m|` is the m-th Motzkin number; the budget caps `m` at
/// [`NC12_MAX_M`] and fails loudly beyond it.
pub fn nc12_partitions(m: usize) -> Result<NcIter> {
    if m > NC12_MAX_M {
        return Err(Error::EnumerationBudget { m, max: NC12_MAX_M });
    }
    Ok(NcIter::new(m, true))
}

/// The pair-only subset `NC^2_m`; `|NC^2_{2s}|` is the s-th Catalan number.
/// Odd `m` yields an empty stream.
pub fn nc2_partitions(m: usize) -> Result<NcIter> {
    if m > NC2_MAX_M {
        return Err(Error::EnumerationBudget { m, max: NC2_MAX_M });
    }
    Ok(NcIter::new(m, false))
}

/// The m-th moment of the law with Jacobi parameters `j`, as the
/// depth-weighted sum over `NC^{1,2}_m`. Summation follows the canonical
/// enumeration order, which is the bit-reproducible reference order.
pub fn moment_combinatorial(j: &JacobiParams, m: usize) -> Result<f64> {
    let mut sum = 0.0;
    for partition in nc12_partitions(m)? {
        sum += partition.weight(j);
    }
    Ok(sum)
}
