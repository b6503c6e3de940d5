//! Entity reference fillers.
//!
//! Both fillers are seq2seq models over a sub-word target vocabulary
//! (word, BPE, or character level). The NER filler predicts one string per
//! placeholder id from the placeholder and the anonymized story; the
//! coreference filler predicts one string per mention from a bag-of-words
//! window, the previously generated references for that placeholder, and
//! the full anonymized story.

use crate::corpus::{
    detokenize, segment_text, tokenize, BpeMerges, Scheme, Vocabulary,
};
use crate::decompose::AnonymizedStory;

use super::train::{TrainExample, BOS_ID};
use super::{DecodeSession, ModelError, Seq2Seq};
use crate::generate::StepScorer;
use crate::nn::Graph;

/// Everything the coreference filler sees for one mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionContext {
    pub placeholder_id: usize,
    /// Bag-of-words window around the mention, sorted so that encoding is
    /// order-invariant; the placeholder token itself is excluded.
    pub window: Vec<String>,
    /// Earlier references for the same placeholder, oldest first.
    pub previous_refs: Vec<String>,
    /// The full anonymized story.
    pub story_tokens: Vec<String>,
}

/// Build the context for the mention at `position` in an anonymized story.
pub fn mention_context(
    anon_tokens: &[String],
    position: usize,
    placeholder_id: usize,
    previous_refs: Vec<String>,
    window: usize,
) -> MentionContext {
    let start = position.saturating_sub(window);
    let end = (position + 1 + window).min(anon_tokens.len());
    let mut bag: Vec<String> = anon_tokens[start..position]
        .iter()
        .chain(&anon_tokens[position + 1..end])
        .cloned()
        .collect();
    bag.sort();
    MentionContext {
        placeholder_id,
        window: bag,
        previous_refs,
        story_tokens: anon_tokens.to_vec(),
    }
}

/// Source ids for the NER filler: placeholder, separator, story.
pub fn encode_ner_fill_source(
    placeholder_id: usize,
    anon_tokens: &[String],
    vocab: &Vocabulary,
) -> Vec<u32> {
    let mut ids = Vec::with_capacity(anon_tokens.len() + 2);
    ids.push(
        vocab
            .placeholder_id(placeholder_id)
            .unwrap_or_else(|| vocab.unk_id()),
    );
    ids.push(vocab.frame_id());
    ids.extend(vocab.encode(anon_tokens));
    ids
}

/// Source ids for the coreference filler: placeholder, window bag, previous
/// references (separated by the sentence delimiter, most recent last), and
/// the full story, with field separators between sections.
pub fn encode_coref_fill_source(ctx: &MentionContext, vocab: &Vocabulary) -> Vec<u32> {
    let mut ids = Vec::new();
    ids.push(
        vocab
            .placeholder_id(ctx.placeholder_id)
            .unwrap_or_else(|| vocab.unk_id()),
    );
    ids.push(vocab.frame_id());
    ids.extend(vocab.encode(&ctx.window));
    ids.push(vocab.frame_id());
    for (i, reference) in ctx.previous_refs.iter().enumerate() {
        if i > 0 {
            ids.push(vocab.sent_id());
        }
        ids.extend(vocab.encode(&tokenize(reference, Scheme::Word)));
    }
    ids.push(vocab.frame_id());
    ids.extend(vocab.encode(&ctx.story_tokens));
    ids
}

/// Target ids for a surface string under the filler's sub-word scheme,
/// without the trailing `eos`.
pub fn encode_fill_target(
    surface: &str,
    vocab: &Vocabulary,
    merges: Option<&BpeMerges>,
) -> Vec<u32> {
    let tokens = match vocab.scheme() {
        Scheme::Word => tokenize(surface, Scheme::Word),
        Scheme::Character => tokenize(surface, Scheme::Character),
        Scheme::Bpe => {
            let empty = BpeMerges::empty();
            segment_text(surface, merges.unwrap_or(&empty))
        }
    };
    vocab.encode(&tokens)
}

/// One training example per placeholder id of a NER-anonymized story.
pub fn ner_fill_training_examples(
    anon: &AnonymizedStory,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    merges: Option<&BpeMerges>,
) -> Vec<TrainExample> {
    let mut out = Vec::new();
    for id in 0..anon.table.placeholder_count() {
        let Some(slot) = anon.table.slots(id).first() else {
            continue;
        };
        let src = encode_ner_fill_source(id, &anon.tokens, src_vocab);
        let mut tgt = encode_fill_target(&slot.surface, tgt_vocab, merges);
        tgt.push(tgt_vocab.eos_id());
        out.push(TrainExample::plain(src, tgt));
    }
    out
}

/// One training example per mention of a coref-anonymized story, in textual
/// order, with gold previous references (teacher forcing across mentions).
pub fn coref_fill_training_examples(
    anon: &AnonymizedStory,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    merges: Option<&BpeMerges>,
    window: usize,
) -> Vec<TrainExample> {
    let mut out = Vec::new();
    for occ in anon.table.occurrences_in_order() {
        let previous: Vec<String> = anon.table.slots(occ.id)[..occ.occurrence]
            .iter()
            .map(|s| s.surface.clone())
            .collect();
        let ctx = mention_context(&anon.tokens, occ.position, occ.id, previous, window);
        let src = encode_coref_fill_source(&ctx, src_vocab);
        let mut tgt = encode_fill_target(&occ.surface, tgt_vocab, merges);
        tgt.push(tgt_vocab.eos_id());
        out.push(TrainExample::plain(src, tgt));
    }
    out
}

/// A trained filler bundled with its vocabularies and decoding policy.
pub struct FillModel {
    pub model: Seq2Seq,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub merges: Option<BpeMerges>,
    /// Bag-of-words window width on each side of a mention.
    pub window: usize,
    /// Decode budget per reference.
    pub max_target_len: usize,
    /// Length-normalize [`FillModel::score_mention`] (mean per-token log
    /// probability rather than the sum).
    pub length_normalize: bool,
}

impl FillModel {
    pub fn new(
        model: Seq2Seq,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
        merges: Option<BpeMerges>,
    ) -> Self {
        FillModel {
            model,
            src_vocab,
            tgt_vocab,
            merges,
            window: 10,
            max_target_len: 48,
            length_normalize: true,
        }
    }

    fn banned_target_id(&self, id: u32, first_step: bool) -> bool {
        let v = &self.tgt_vocab;
        if id == v.pad_id() || id == v.unk_id() || id == v.bos_id() {
            return true;
        }
        if first_step && id == v.eos_id() {
            // Never admit an empty prediction.
            return true;
        }
        false
    }

    /// Deterministic temperature-0 decode of a reference string.
    fn greedy_decode(&self, src: &[u32]) -> Result<String, ModelError> {
        let mut session = DecodeSession::new(&self.model, src, &self.src_vocab);
        let mut prefix = vec![BOS_ID];
        let mut emitted: Vec<u32> = Vec::new();
        for step in 0..self.max_target_len {
            let info = session.step(&prefix);
            let mut best: Option<(u32, f64)> = None;
            for (id, &logit) in info.logits.iter().enumerate() {
                let id = id as u32;
                if self.banned_target_id(id, step == 0) {
                    continue;
                }
                if best.map(|(_, b)| logit > b).unwrap_or(true) {
                    best = Some((id, logit));
                }
            }
            let (token, _) = best.expect("target vocabulary has candidates");
            if token == self.tgt_vocab.eos_id() {
                break;
            }
            emitted.push(token);
            prefix.push(token);
        }
        let tokens = self
            .tgt_vocab
            .decode(&emitted)
            .expect("decoded ids are in range");
        let text = detokenize(&tokens, self.tgt_vocab.scheme());
        let text = text.trim().to_string();
        if text.is_empty() {
            return Err(ModelError::EmptyPrediction);
        }
        Ok(text)
    }

    /// One prediction per placeholder id; the same string fills every
    /// occurrence. Errors if the placeholder does not occur in the story.
    pub fn ner_fill_predict(
        &self,
        placeholder_id: usize,
        anon_tokens: &[String],
    ) -> Result<String, ModelError> {
        let tag = crate::corpus::placeholder_token(placeholder_id);
        if !anon_tokens.contains(&tag) {
            return Err(ModelError::UnknownPlaceholder(placeholder_id));
        }
        let src = encode_ner_fill_source(placeholder_id, anon_tokens, &self.src_vocab);
        self.greedy_decode(&src)
    }

    /// One prediction per mention; different mentions of one placeholder may
    /// realize differently (names, pronouns, nominals).
    pub fn coref_fill_predict(&self, ctx: &MentionContext) -> Result<String, ModelError> {
        let src = encode_coref_fill_source(ctx, &self.src_vocab);
        self.greedy_decode(&src)
    }

    /// Teacher-forced log-likelihood of `candidate` for a mention context;
    /// mean per-token when length normalization is on, sum otherwise.
    pub fn score_mention(&self, ctx: &MentionContext, candidate: &str) -> f64 {
        assert!(!candidate.is_empty(), "candidates must be non-empty");
        let src = encode_coref_fill_source(ctx, &self.src_vocab);
        let mut tgt = encode_fill_target(candidate, &self.tgt_vocab, self.merges.as_ref());
        tgt.push(self.tgt_vocab.eos_id());

        let mut g = Graph::new();
        let bound = self.model.bind(&mut g);
        let enc = self.model.encode(&mut g, &bound, &src);
        let mut input = vec![BOS_ID];
        input.extend_from_slice(&tgt[..tgt.len() - 1]);
        let masks = self.model.decoder_masks(input.len(), &[]);
        let out = self.model.decode(&mut g, &bound, enc, &input, &masks);
        let targets: Vec<usize> = tgt.iter().map(|&t| t as usize).collect();
        let ce = g.cross_entropy(out.logits, &targets);
        let mean_log_prob = -g.value(ce).item();
        if self.length_normalize {
            mean_log_prob
        } else {
            mean_log_prob * tgt.len() as f64
        }
    }
}
