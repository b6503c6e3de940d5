//! The pointer-copy mechanism for placeholder tokens.
//!
//! A scalar classifier `sigmoid(w_copy . h)` decides per step whether to
//! copy; when it fires, the pointer head's highest-attention position among
//! previously decoded placeholder tokens is copied verbatim. Training
//! supervises both the classifier and the attention mass on prior positions
//! of the gold placeholder.

use crate::corpus::Vocabulary;

/// `sigmoid(w . h)`: probability of taking the copy branch.
pub fn pointer_copy_prob(state: &[f64], copy_weight: &[f64]) -> f64 {
    assert_eq!(state.len(), copy_weight.len(), "dimension mismatch");
    let z: f64 = state.iter().zip(copy_weight).map(|(a, b)| a * b).sum();
    1.0 / (1.0 + (-z).exp())
}

/// Outcome of one decoding step under the copy mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenDecision {
    Copied(u32),
    Generated(u32),
}

impl TokenDecision {
    pub fn token(&self) -> u32 {
        match *self {
            TokenDecision::Copied(t) | TokenDecision::Generated(t) => t,
        }
    }
}

/// Decide the next token: if the copy classifier is at or above `threshold`
/// and the prefix contains placeholder tokens, copy the placeholder at the
/// pointer head's argmax attention position (earliest position wins ties);
/// otherwise fall back to the generate branch, which may introduce a new
/// placeholder. With no prior placeholder the generate branch always runs,
/// so the step is total.
pub fn decode_step_with_copy<E>(
    p_copy: f64,
    threshold: f64,
    pointer_row: &[f64],
    prefix_placeholders: &[(usize, u32)],
    generate: impl FnOnce() -> Result<u32, E>,
) -> Result<TokenDecision, E> {
    if p_copy >= threshold && !prefix_placeholders.is_empty() {
        let mut best = prefix_placeholders[0];
        let mut best_weight = pointer_row[best.0];
        for &(pos, token) in &prefix_placeholders[1..] {
            let w = pointer_row[pos];
            if w > best_weight {
                best = (pos, token);
                best_weight = w;
            }
        }
        return Ok(TokenDecision::Copied(best.1));
    }
    Ok(TokenDecision::Generated(generate()?))
}

/// Placeholder tokens in a decoder input prefix as `(position, token id)`.
pub fn prefix_placeholders(input: &[u32], vocab: &Vocabulary) -> Vec<(usize, u32)> {
    input
        .iter()
        .enumerate()
        .filter(|(_, &t)| vocab.placeholder_of(t).is_some())
        .map(|(p, &t)| (p, t))
        .collect()
}

/// Per-step copy supervision derived from a gold target sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerSupervision {
    /// One 0/1 target per decoding step: 1 iff the gold token is a
    /// placeholder that already occurred in the gold prefix.
    pub copy_targets: Vec<f64>,
    /// For each copy step, the decoder-input positions holding prior
    /// occurrences of that placeholder, as `(step row, positions)`.
    pub groups: Vec<(usize, Vec<usize>)>,
}

/// Build pointer supervision for a target: step `t` copies iff `tgt[t]` is a
/// placeholder appearing somewhere in `tgt[..t]`; its prior occurrences sit
/// at decoder-input positions `j + 1`.
pub fn pointer_supervision(tgt: &[u32], vocab: &Vocabulary) -> PointerSupervision {
    let mut copy_targets = Vec::with_capacity(tgt.len());
    let mut groups = Vec::new();
    for (t, &token) in tgt.iter().enumerate() {
        let is_repeat_placeholder = vocab.placeholder_of(token).is_some()
            && tgt[..t].contains(&token);
        if is_repeat_placeholder {
            copy_targets.push(1.0);
            let positions: Vec<usize> = tgt[..t]
                .iter()
                .enumerate()
                .filter(|(_, &prev)| prev == token)
                .map(|(j, _)| j + 1)
                .collect();
            groups.push((t, positions));
        } else {
            copy_targets.push(0.0);
        }
    }
    PointerSupervision {
        copy_targets,
        groups,
    }
}
