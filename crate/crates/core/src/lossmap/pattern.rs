use std::fmt;

/// Attack outcome over `n` nodes: bit `k` of `index` is 1 when node `k + 1` survives.
///
/// Index 0 is the all-attacked pattern, index `2ⁿ − 1` the intact network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SparsityPattern {
    index: usize,
    n: usize,
}

impl SparsityPattern {
    pub fn from_index(index: usize, n: usize) -> Self {
        assert!(n < usize::BITS as usize && index < (1usize << n), "pattern index out of range");
        Self { index, n }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let index = bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (k, &b)| if b { acc | (1 << k) } else { acc });
        Self { index, n: bits.len() }
    }

    /// Intact network.
    pub fn all_surviving(n: usize) -> Self {
        Self::from_index((1usize << n) - 1, n)
    }

    /// Only `node` (0-based) is attacked successfully.
    pub fn single_attacked(node: usize, n: usize) -> Self {
        Self::from_index(((1usize << n) - 1) ^ (1 << node), n)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `true` when node `k` (0-based) keeps its communication.
    pub fn survives(&self, k: usize) -> bool {
        (self.index >> k) & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.n).map(|k| self.survives(k)).collect()
    }

    /// Entrywise `self ≤ other`.
    pub fn is_dominated_by(&self, other: &SparsityPattern) -> bool {
        self.n == other.n && self.index & !other.index == 0
    }
}

impl fmt::Display for SparsityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for k in 0..self.n {
            f.write_str(if self.survives(k) { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}
