//! Attention masks with a guaranteed-allowed null slot.

/// Boolean mask over query rows × key positions, plus one extra null-slot
/// column that is always allowed. The null key scores zero and carries a
/// zero value vector, so a row that allows nothing else attends to a zero
/// vector; every row therefore has at least one allowed key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    rows: usize,
    keys: usize,
    allow: Vec<bool>,
}

impl AttentionMask {
    /// All real keys disallowed; only the null slot is open.
    pub fn null_only(rows: usize, keys: usize) -> Self {
        let mut allow = vec![false; rows * (keys + 1)];
        for r in 0..rows {
            allow[r * (keys + 1) + keys] = true;
        }
        AttentionMask { rows, keys, allow }
    }

    /// Standard causal self-attention: row `t` sees keys `0..=t`.
    pub fn causal(len: usize) -> Self {
        let mut mask = Self::null_only(len, len);
        for t in 0..len {
            for p in 0..=t {
                mask.allow(t, p);
            }
        }
        mask
    }

    /// Cross-attention over a source: every key open.
    pub fn all_allowed(rows: usize, keys: usize) -> Self {
        let mut mask = Self::null_only(rows, keys);
        for r in 0..rows {
            for k in 0..keys {
                mask.allow(r, k);
            }
        }
        mask
    }

    pub fn allow(&mut self, row: usize, key: usize) {
        assert!(key < self.keys, "key {key} out of range ({})", self.keys);
        self.allow[row * (self.keys + 1) + key] = true;
    }

    /// `col` ranges over `0..=keys`; `keys` is the null slot.
    pub fn is_allowed(&self, row: usize, col: usize) -> bool {
        self.allow[row * (self.keys + 1) + col]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn keys(&self) -> usize {
        self.keys
    }

    pub fn null_col(&self) -> usize {
        self.keys
    }

    pub(crate) fn flags(&self) -> &[bool] {
        &self.allow
    }
}
