//! Finite set systems `(U, R)` over the universe `[1, N]`.

use std::collections::HashSet;
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use rand::Rng;

use super::SamplerError;

/// Largest prefix system that [`FiniteSetSystem::materialize`] expands.
pub const MATERIALIZE_LIMIT: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FiniteSetSystem {
    /// Ranges stored as bitsets; bit `x - 1` stands for element `x`.
    Explicit { universe: usize, ranges: Vec<FixedBitSet> },
    /// `R = {[1, b] : b ∈ [1, N]}`, evaluated by predicate.
    PrefixIntervals { n: u64 },
}

impl FiniteSetSystem {
    /// Explicit system from 1-based element lists. Duplicate ranges are
    /// dropped, keeping first occurrences in order.
    pub fn explicit<I, R>(universe: usize, ranges: I) -> Result<Self, SamplerError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = u64>,
    {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for r in ranges {
            let mut bits = FixedBitSet::with_capacity(universe);
            for x in r {
                if x == 0 || x > universe as u64 {
                    return Err(SamplerError::InvalidParameter(format!("element {x} outside [1, {universe}]")));
                }
                bits.insert((x - 1) as usize);
            }
            if seen.insert(bits.clone()) {
                out.push(bits);
            }
        }
        Self::from_bitsets(universe, out)
    }

    pub fn from_bitsets(universe: usize, ranges: Vec<FixedBitSet>) -> Result<Self, SamplerError> {
        if ranges.is_empty() {
            return Err(SamplerError::InvalidParameter("a set system needs at least one range".into()));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(ranges.len());
        for mut r in ranges {
            if r.ones().any(|b| b >= universe) {
                return Err(SamplerError::InvalidParameter(format!("range exceeds universe size {universe}")));
            }
            r.grow(universe);
            if seen.insert(r.clone()) {
                out.push(r);
            }
        }
        Ok(Self::Explicit { universe, ranges: out })
    }

    pub fn prefix(n: u64) -> Result<Self, SamplerError> {
        if n == 0 {
            return Err(SamplerError::InvalidParameter("prefix system needs N >= 1".into()));
        }
        Ok(Self::PrefixIntervals { n })
    }

    /// Every subset of `[1, universe]` as a range.
    pub fn powerset(universe: usize) -> Result<Self, SamplerError> {
        if universe > 20 {
            return Err(SamplerError::TooLarge(format!("powerset of {universe} elements")));
        }
        let ranges = (0u32..1 << universe).map(|mask| (0..universe).filter(move |b| mask >> b & 1 == 1).map(|b| b as u64 + 1));
        Self::explicit(universe, ranges)
    }

    /// `count` ranges, each element included independently with probability
    /// 1/2; duplicates collapse, so fewer ranges may come back.
    pub fn random<G: Rng + ?Sized>(universe: usize, count: usize, rng: &mut G) -> Self {
        let ranges: Vec<FixedBitSet> = (0..count.max(1))
            .map(|_| {
                let mut bits = FixedBitSet::with_capacity(universe);
                for b in 0..universe {
                    if rng.random_bool(0.5) {
                        bits.insert(b);
                    }
                }
                bits
            })
            .collect();
        Self::from_bitsets(universe, ranges).expect("nonempty ranges inside the universe")
    }

    pub fn universe_size(&self) -> u64 {
        match self {
            Self::Explicit { universe, .. } => *universe as u64,
            Self::PrefixIntervals { n } => *n,
        }
    }

    pub fn range_count(&self) -> u64 {
        match self {
            Self::Explicit { ranges, .. } => ranges.len() as u64,
            Self::PrefixIntervals { n } => *n,
        }
    }

    /// Whether element `x` lies in range `r` (0-based range index).
    pub fn contains(&self, r: u64, x: u64) -> bool {
        match self {
            Self::Explicit { universe, ranges } => {
                x >= 1 && x <= *universe as u64 && ranges[r as usize].contains((x - 1) as usize)
            }
            Self::PrefixIntervals { .. } => x >= 1 && x <= r + 1,
        }
    }

    /// Expands a prefix system into bitsets; explicit systems are cloned.
    pub fn materialize(&self) -> Result<Self, SamplerError> {
        match self {
            Self::Explicit { .. } => Ok(self.clone()),
            Self::PrefixIntervals { n } => {
                if *n > MATERIALIZE_LIMIT {
                    return Err(SamplerError::TooLarge(format!("prefix system with N = {n}")));
                }
                let n = *n as usize;
                let ranges = (1..=n)
                    .map(|b| {
                        let mut bits = FixedBitSet::with_capacity(n);
                        bits.insert_range(..b);
                        bits
                    })
                    .collect();
                Ok(Self::Explicit { universe: n, ranges })
            }
        }
    }

    /// Ranges as bitsets; materializes prefix systems.
    pub fn bitsets(&self) -> Result<Vec<FixedBitSet>, SamplerError> {
        match self.materialize()? {
            Self::Explicit { ranges, .. } => Ok(ranges),
            Self::PrefixIntervals { .. } => unreachable!("materialize returns an explicit system"),
        }
    }

    /// Text form: first line `N`, then one range per line as sorted
    /// elements (`-` for the empty range). Prefix systems print `prefix N`.
    pub fn to_text(&self) -> String {
        match self {
            Self::PrefixIntervals { n } => format!("prefix {n}\n"),
            Self::Explicit { universe, ranges } => {
                let mut s = format!("{universe}\n");
                for r in ranges {
                    if r.is_clear() {
                        s.push_str("-\n");
                        continue;
                    }
                    let line: Vec<String> = r.ones().map(|b| (b + 1).to_string()).collect();
                    let _ = writeln!(s, "{}", line.join(" "));
                }
                s
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, SamplerError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (first_no, first) = lines.next().ok_or_else(|| SamplerError::Parse { line: 1, message: "empty set system".into() })?;
        if let Some(rest) = first.strip_prefix("prefix") {
            let n = rest
                .trim()
                .parse::<u64>()
                .map_err(|e| SamplerError::Parse { line: first_no, message: format!("prefix size: {e}") })?;
            if let Some((line, _)) = lines.next() {
                return Err(SamplerError::Parse { line, message: "unexpected content after prefix header".into() });
            }
            return Self::prefix(n);
        }
        let universe = first
            .parse::<usize>()
            .map_err(|e| SamplerError::Parse { line: first_no, message: format!("universe size: {e}") })?;
        let mut ranges = Vec::new();
        for (line, l) in lines {
            if l == "-" {
                ranges.push(Vec::new());
                continue;
            }
            let elems = l
                .split_whitespace()
                .map(|t| t.parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| SamplerError::Parse { line, message: format!("element: {e}") })?;
            if elems.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SamplerError::Parse { line, message: "elements must be strictly increasing".into() });
            }
            if let Some(&bad) = elems.iter().find(|&&x| x == 0 || x > universe as u64) {
                return Err(SamplerError::Parse { line, message: format!("element {bad} outside [1, {universe}]") });
            }
            ranges.push(elems);
        }
        Self::explicit(universe, ranges)
    }

    /// Parses the `prefix:N` shorthand or reads a set-system file body.
    pub fn from_spec(spec: &str) -> Result<Self, SamplerError> {
        match spec.strip_prefix("prefix:") {
            Some(n) => Self::prefix(
                n.trim().parse().map_err(|e| SamplerError::InvalidParameter(format!("prefix size '{n}': {e}")))?,
            ),
            None => Self::parse(spec),
        }
    }
}
