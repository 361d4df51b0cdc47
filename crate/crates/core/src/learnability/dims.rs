//! VC and Littlestone dimension by exhaustive search.

use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::samplers::FiniteSetSystem;

/// Largest subset `shatters` accepts.
pub const SHATTER_LIMIT: usize = 20;
/// Largest universe `vc_dimension` searches.
pub const VC_UNIVERSE_LIMIT: u64 = 24;
/// Largest range family `littlestone_dimension` accepts.
pub const LDIM_RANGE_LIMIT: u64 = 1 << 16;

/// Whether every labeling of `c` (1-based elements) is cut out by a range.
pub fn shatters(sys: &FiniteSetSystem, c: &[u64]) -> Result<bool, LearnError> {
    if c.len() > SHATTER_LIMIT {
        return Err(LearnError::TooLarge(format!("|C| = {} exceeds {SHATTER_LIMIT}", c.len())));
    }
    let n = sys.universe_size();
    let mut elems = c.to_vec();
    elems.sort_unstable();
    elems.dedup();
    if elems.len() != c.len() {
        return Err(LearnError::InvalidParameter("C has repeated elements".into()));
    }
    if let Some(&x) = elems.iter().find(|&&x| x == 0 || x > n) {
        return Err(LearnError::InvalidParameter(format!("element {x} outside [1, {n}]")));
    }
    let project = |r: u64| elems.iter().enumerate().fold(0u32, |m, (i, &x)| m | (sys.contains(r, x) as u32) << i);
    let labelings: HashSet<u32> = match sys {
        FiniteSetSystem::Explicit { ranges, .. } => (0..ranges.len() as u64).map(project).collect(),
        FiniteSetSystem::PrefixIntervals { n } => {
            // distinct traces of [1, b] on C occur at b = x − 1, x and N
            let rs = elems.iter().flat_map(|&x| [x - 1, x]).chain([*n]).filter(|&b| b >= 1 && b <= *n).map(|b| b - 1);
            rs.map(project).collect()
        }
    };
    Ok(labelings.len() == 1usize << elems.len())
}

fn floor_log2(x: usize) -> i32 {
    (usize::BITS - 1 - x.leading_zeros()) as i32
}

/// Largest shattered subset size.
pub fn vc_dimension(sys: &FiniteSetSystem) -> Result<u32, LearnError> {
    let u = sys.universe_size();
    if u > VC_UNIVERSE_LIMIT {
        return Err(LearnError::TooLarge(format!("universe {u} exceeds {VC_UNIVERSE_LIMIT}")));
    }
    let masks: Vec<u32> = sys
        .bitsets()?
        .iter()
        .map(|r| r.ones().fold(0u32, |m, b| m | 1 << b))
        .collect();
    let u = u as u32;
    let cap = floor_log2(masks.len()).min(u as i32) as u32;
    let mut best = 0;
    let mut seen = HashSet::new();
    for size in 1..=cap {
        let mut found = false;
        // Gosper's hack over subsets of the given size
        let mut c: u32 = (1 << size) - 1;
        while c < 1 << u {
            seen.clear();
            seen.extend(masks.iter().map(|m| m & c));
            if seen.len() == 1 << size {
                found = true;
                break;
            }
            let low = c & c.wrapping_neg();
            let ripple = c + low;
            c = (((ripple ^ c) >> 2) / low) | ripple;
        }
        if !found {
            break;
        }
        best = size;
    }
    Ok(best)
}

/// Memoized Littlestone recursion over sets of consistent hypotheses.
pub struct LdimSolver {
    universe: usize,
    ranges: Vec<FixedBitSet>,
    /// `members[x]`: hypotheses containing element `x + 1`.
    members: Vec<FixedBitSet>,
    memo: HashMap<FixedBitSet, i32>,
}

impl LdimSolver {
    pub fn new(sys: &FiniteSetSystem) -> Result<Self, LearnError> {
        let count = sys.range_count();
        if count > LDIM_RANGE_LIMIT {
            return Err(LearnError::TooLarge(format!("{count} ranges exceed {LDIM_RANGE_LIMIT}")));
        }
        let ranges = sys.bitsets()?;
        Ok(Self::from_ranges(sys.universe_size() as usize, ranges))
    }

    /// Solver over an arbitrary (possibly empty) hypothesis list.
    pub fn from_ranges(universe: usize, ranges: Vec<FixedBitSet>) -> Self {
        let members = (0..universe)
            .map(|x| {
                let mut m = FixedBitSet::with_capacity(ranges.len());
                for (h, r) in ranges.iter().enumerate() {
                    if r.contains(x) {
                        m.insert(h);
                    }
                }
                m
            })
            .collect();
        Self { universe, ranges, members, memo: HashMap::new() }
    }

    pub fn full_class(&self) -> FixedBitSet {
        let mut c = FixedBitSet::with_capacity(self.ranges.len());
        c.insert_range(..);
        c
    }

    fn split(&self, class: &FixedBitSet, x: usize) -> (FixedBitSet, FixedBitSet) {
        let mut one = class.clone();
        one.intersect_with(&self.members[x]);
        let mut zero = class.clone();
        zero.difference_with(&self.members[x]);
        (zero, one)
    }

    pub fn ldim(&mut self, class: &FixedBitSet) -> i32 {
        let size = class.count_ones(..);
        if size <= 1 {
            return size as i32 - 1;
        }
        if let Some(&d) = self.memo.get(class) {
            return d;
        }
        let cap = floor_log2(size);
        let mut best = 0;
        for x in 0..self.universe {
            let (zero, one) = self.split(class, x);
            let c1 = one.count_ones(..);
            if c1 == 0 || c1 == size || floor_log2(c1.min(size - c1)) + 1 <= best {
                continue;
            }
            let d0 = self.ldim(&zero);
            if d0 + 1 <= best {
                continue;
            }
            let d = 1 + d0.min(self.ldim(&one));
            best = best.max(d);
            if best == cap {
                break;
            }
        }
        self.memo.insert(class.clone(), best);
        best
    }

    /// A complete mistake tree of depth `ldim(class)`, or `None` for an empty class.
    pub fn tree(&mut self, class: &FixedBitSet) -> Option<MistakeTree> {
        let depth = self.ldim(class);
        if depth < 0 {
            return None;
        }
        let root = self.build(class, depth);
        Some(MistakeTree { depth: depth as usize, root })
    }

    fn build(&mut self, class: &FixedBitSet, depth: i32) -> MistakeNode {
        if depth == 0 {
            return MistakeNode::Leaf { witness: class.ones().next().expect("nonempty class") as u64 };
        }
        for x in 0..self.universe {
            let (zero, one) = self.split(class, x);
            if self.ldim(&zero) >= depth - 1 && self.ldim(&one) >= depth - 1 {
                return MistakeNode::Split {
                    element: x as u64 + 1,
                    zero: Box::new(self.build(&zero, depth - 1)),
                    one: Box::new(self.build(&one, depth - 1)),
                };
            }
        }
        unreachable!("ldim(class) >= depth guarantees a splitting element")
    }
}

/// `−1` for an empty class by convention; systems always hold a range.
pub fn littlestone_dimension(sys: &FiniteSetSystem) -> Result<i32, LearnError> {
    let mut s = LdimSolver::new(sys)?;
    let full = s.full_class();
    Ok(s.ldim(&full))
}

/// Littlestone dimension together with a witnessing tree.
pub fn littlestone_tree(sys: &FiniteSetSystem) -> Result<MistakeTree, LearnError> {
    let mut s = LdimSolver::new(sys)?;
    let full = s.full_class();
    Ok(s.tree(&full).expect("a set system has at least one range"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MistakeNode {
    /// 0-based index of a hypothesis consistent with the path.
    Leaf { witness: u64 },
    Split { element: u64, zero: Box<MistakeNode>, one: Box<MistakeNode> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MistakeTree {
    pub depth: usize,
    pub root: MistakeNode,
}

impl MistakeTree {
    /// Every leaf sits at `depth` and its witness labels each path element
    /// as the path does.
    pub fn verify(&self, sys: &FiniteSetSystem) -> bool {
        fn walk(node: &MistakeNode, sys: &FiniteSetSystem, path: &mut Vec<(u64, bool)>, depth: usize) -> bool {
            match node {
                MistakeNode::Leaf { witness } => {
                    path.len() == depth
                        && *witness < sys.range_count()
                        && path.iter().all(|&(x, y)| sys.contains(*witness, x) == y)
                }
                MistakeNode::Split { element, zero, one } => {
                    if path.len() >= depth {
                        return false;
                    }
                    [(false, zero), (true, one)].into_iter().all(|(y, child)| {
                        path.push((*element, y));
                        let ok = walk(child, sys, path, depth);
                        path.pop();
                        ok
                    })
                }
            }
        }
        walk(&self.root, sys, &mut Vec::new(), self.depth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub universe: u64,
    pub ranges: u64,
    pub vc: u32,
    pub ldim: i32,
    pub tree: Option<MistakeTree>,
}

impl DimensionReport {
    pub fn compute(sys: &FiniteSetSystem, with_tree: bool) -> Result<Self, LearnError> {
        let tree = if with_tree { Some(littlestone_tree(sys)?) } else { None };
        let ldim = match &tree {
            Some(t) => t.depth as i32,
            None => littlestone_dimension(sys)?,
        };
        Ok(Self { universe: sys.universe_size(), ranges: sys.range_count(), vc: vc_dimension(sys)?, ldim, tree })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
