//! The pipeline's seq2seq models.
//!
//! A convolutional encoder feeds a convolutional decoder through
//! cross-attention; the decoder additionally runs a gated multi-head
//! self-attention block whose heads can be specialized: a verb-attention
//! head restricted to previously generated verbs, and a pointer head whose
//! weights drive the copy mechanism for placeholder tokens.

mod fill;
mod pointer;
mod train;

pub use fill::{
    coref_fill_training_examples, encode_coref_fill_source, encode_fill_target,
    encode_ner_fill_source, mention_context, ner_fill_training_examples, FillModel,
    MentionContext,
};
pub use pointer::{
    decode_step_with_copy, pointer_copy_prob, pointer_supervision, prefix_placeholders,
    PointerSupervision, TokenDecision,
};
pub use train::{nll, train_model, TrainConfig, TrainExample, TrainReport};

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::generate::{CopyInfo, StepInfo, StepScorer};
use crate::nn::{
    attention, conv1d_glu, load_checkpoint, save_checkpoint, xavier_uniform, AttentionMask,
    CheckpointError, Gradients, Graph, Parameter, Tensor, Var,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("placeholder ent{0} does not occur in the story")]
    UnknownPlaceholder(usize),
    #[error("reference filler produced an empty prediction")]
    EmptyPrediction,
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
}

/// Architecture and special-head assignments for one seq2seq model.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Seq2SeqConfig {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub kernel_width: usize,
    pub max_positions: usize,
    /// Decoder self-attention head restricted to previously generated verbs.
    pub verb_head: Option<usize>,
    /// Decoder self-attention head used as the pointer-copy attention head.
    pub pointer_head: Option<usize>,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        // Desk-scale defaults; vocab sizes always come from the data.
        Seq2SeqConfig {
            src_vocab: 0,
            tgt_vocab: 0,
            model_dim: 128,
            heads: 4,
            enc_layers: 2,
            dec_layers: 4,
            kernel_width: 3,
            max_positions: 1024,
            verb_head: None,
            pointer_head: None,
        }
    }
}

impl Seq2SeqConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.src_vocab == 0 || self.tgt_vocab == 0 {
            return fail("vocabulary sizes must be nonzero".into());
        }
        if self.heads == 0 || !self.model_dim.is_multiple_of(self.heads) {
            return fail(format!(
                "head count {} must divide model dim {}",
                self.heads, self.model_dim
            ));
        }
        if self.kernel_width == 0 || self.kernel_width.is_multiple_of(2) {
            return fail(format!("kernel width {} must be odd", self.kernel_width));
        }
        for (name, head) in [("verb", self.verb_head), ("pointer", self.pointer_head)] {
            if let Some(h) = head {
                if h >= self.heads {
                    return fail(format!("{name} head {h} out of range ({})", self.heads));
                }
            }
        }
        if let (Some(v), Some(p)) = (self.verb_head, self.pointer_head) {
            if v == p {
                return fail(format!("verb and pointer heads must be distinct (both {v})"));
            }
        }
        Ok(())
    }

    fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }
}

struct ParamIds {
    emb_src: usize,
    pos_src: usize,
    emb_tgt: usize,
    pos_tgt: usize,
    enc_blocks: Vec<(usize, usize)>,
    dec_blocks: Vec<(usize, usize)>,
    wq: Vec<usize>,
    wk: Vec<usize>,
    wv: Vec<usize>,
    wo: usize,
    gate_w: usize,
    gate_b: usize,
    cross_q: usize,
    cross_out: usize,
    out_w: usize,
    out_b: usize,
    copy_w: Option<usize>,
}

/// Encoder-decoder with gated convolutions and specialized attention heads.
pub struct Seq2Seq {
    cfg: Seq2SeqConfig,
    params: Vec<Parameter>,
    ids: ParamIds,
}

/// Graph handles for every parameter of a bound model, in parameter order.
pub struct Bound {
    vars: Vec<Var>,
}

/// Decoder forward outputs for one (source, prefix) pair.
pub struct DecodeOut {
    pub states: Var,
    pub logits: Var,
    /// Self-attention weight matrices per head, `[T, T+1]` with the null
    /// column last.
    pub head_weights: Vec<Var>,
    /// Copy-classifier logits `[T, 1]` when a pointer head is configured.
    pub copy_logits: Option<Var>,
}

impl Seq2Seq {
    pub fn new(cfg: Seq2SeqConfig, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        cfg.validate()?;
        let d = cfg.model_dim;
        let dh = cfg.head_dim();
        let mut params = Vec::new();
        let mut add = |name: String, t: Tensor| -> usize {
            params.push(Parameter::new(name, t));
            params.len() - 1
        };

        let emb_src = add("emb.src".into(), xavier_uniform(&[cfg.src_vocab, d], rng));
        let pos_src = add("pos.src".into(), xavier_uniform(&[cfg.max_positions, d], rng));
        let emb_tgt = add("emb.tgt".into(), xavier_uniform(&[cfg.tgt_vocab, d], rng));
        let pos_tgt = add("pos.tgt".into(), xavier_uniform(&[cfg.max_positions, d], rng));

        let mut enc_blocks = Vec::new();
        for l in 0..cfg.enc_layers {
            let w = add(
                format!("enc.{l}.w"),
                xavier_uniform(&[cfg.kernel_width, d, 2 * d], rng),
            );
            let b = add(format!("enc.{l}.b"), Tensor::zeros(&[2 * d]));
            enc_blocks.push((w, b));
        }
        let mut dec_blocks = Vec::new();
        for l in 0..cfg.dec_layers {
            let w = add(
                format!("dec.{l}.w"),
                xavier_uniform(&[cfg.kernel_width, d, 2 * d], rng),
            );
            let b = add(format!("dec.{l}.b"), Tensor::zeros(&[2 * d]));
            dec_blocks.push((w, b));
        }

        let mut wq = Vec::new();
        let mut wk = Vec::new();
        let mut wv = Vec::new();
        for h in 0..cfg.heads {
            wq.push(add(format!("attn.{h}.q"), xavier_uniform(&[d, dh], rng)));
            wk.push(add(format!("attn.{h}.k"), xavier_uniform(&[d, dh], rng)));
            wv.push(add(format!("attn.{h}.v"), xavier_uniform(&[d, dh], rng)));
        }
        let wo = add("attn.out".into(), xavier_uniform(&[d, d], rng));
        let gate_w = add("attn.gate.w".into(), xavier_uniform(&[d, d], rng));
        let gate_b = add("attn.gate.b".into(), Tensor::zeros(&[d]));

        let cross_q = add("cross.q".into(), xavier_uniform(&[d, d], rng));
        let cross_out = add("cross.out".into(), xavier_uniform(&[d, d], rng));

        let out_w = add("out.w".into(), xavier_uniform(&[d, cfg.tgt_vocab], rng));
        let out_b = add("out.b".into(), Tensor::zeros(&[cfg.tgt_vocab]));

        let copy_w = cfg
            .pointer_head
            .map(|_| add("copy.w".into(), xavier_uniform(&[d, 1], rng)));

        Ok(Seq2Seq {
            cfg,
            params,
            ids: ParamIds {
                emb_src,
                pos_src,
                emb_tgt,
                pos_tgt,
                enc_blocks,
                dec_blocks,
                wq,
                wk,
                wv,
                wo,
                gate_w,
                gate_b,
                cross_q,
                cross_out,
                out_w,
                out_b,
                copy_w,
            },
        })
    }

    pub fn config(&self) -> &Seq2SeqConfig {
        &self.cfg
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.params.iter_mut().collect()
    }

    /// Insert every parameter into a graph as a leaf, preserving order.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        Bound {
            vars: self
                .params
                .iter()
                .map(|p| g.input(p.value.clone()))
                .collect(),
        }
    }

    /// Accumulate gradients from a backward pass into the parameters.
    pub fn accumulate_gradients(&mut self, bound: &Bound, grads: &Gradients) {
        for (param, var) in self.params.iter_mut().zip(&bound.vars) {
            if let Some(g) = grads.get(*var) {
                param.accumulate(g);
            }
        }
    }

    fn positions(&self, len: usize) -> Vec<usize> {
        (0..len).map(|p| p.min(self.cfg.max_positions - 1)).collect()
    }

    /// Encoder states `[S, d]` for a source id sequence.
    pub fn encode(&self, g: &mut Graph, bound: &Bound, src: &[u32]) -> Var {
        let v = &bound.vars;
        let idx: Vec<usize> = src.iter().map(|&i| i as usize).collect();
        let tok = g.embedding(v[self.ids.emb_src], &idx);
        let pos = g.embedding(v[self.ids.pos_src], &self.positions(src.len()));
        let mut h = g.add(tok, pos);
        for &(w, b) in &self.ids.enc_blocks {
            h = conv1d_glu(g, h, v[w], v[b], false);
        }
        h
    }

    /// Decoder forward over a full input prefix (teacher forcing uses
    /// `[bos] + target[..T-1]`). One mask per head.
    pub fn decode(
        &self,
        g: &mut Graph,
        bound: &Bound,
        enc: Var,
        input: &[u32],
        masks: &[AttentionMask],
    ) -> DecodeOut {
        assert_eq!(masks.len(), self.cfg.heads, "one mask per head");
        let v = &bound.vars;
        let idx: Vec<usize> = input.iter().map(|&i| i as usize).collect();
        let tok = g.embedding(v[self.ids.emb_tgt], &idx);
        let pos = g.embedding(v[self.ids.pos_tgt], &self.positions(input.len()));
        let mut h = g.add(tok, pos);
        for &(w, b) in &self.ids.dec_blocks {
            h = conv1d_glu(g, h, v[w], v[b], true);
        }

        // Gated multi-head self-attention: per-head masked attention, concat,
        // output projection, then a sigmoid gate computed from the
        // pre-attention state scales the projection before the residual add.
        let mut head_outs = Vec::with_capacity(self.cfg.heads);
        let mut head_weights = Vec::with_capacity(self.cfg.heads);
        for head in 0..self.cfg.heads {
            let q = g.matmul(h, v[self.ids.wq[head]]);
            let k = g.matmul(h, v[self.ids.wk[head]]);
            let val = g.matmul(h, v[self.ids.wv[head]]);
            let (out, weights) = attention(g, q, k, val, &masks[head]);
            head_outs.push(out);
            head_weights.push(weights);
        }
        let concat = g.concat_cols(&head_outs);
        let proj = g.matmul(concat, v[self.ids.wo]);
        let gate_lin = g.linear(h, v[self.ids.gate_w], Some(v[self.ids.gate_b]));
        let gate = g.sigmoid(gate_lin);
        let gated = g.mul(gate, proj);
        h = g.add(h, gated);

        // Cross-attention over the encoder states.
        let src_len = g.value(enc).dims2().0;
        let q = g.matmul(h, v[self.ids.cross_q]);
        let cross_mask = AttentionMask::all_allowed(input.len(), src_len);
        let (ctx, _) = attention(g, q, enc, enc, &cross_mask);
        let ctx_proj = g.matmul(ctx, v[self.ids.cross_out]);
        h = g.add(h, ctx_proj);

        let logits = g.linear(h, v[self.ids.out_w], Some(v[self.ids.out_b]));
        let copy_logits = self.ids.copy_w.map(|w| g.matmul(h, v[w]));
        DecodeOut {
            states: h,
            logits,
            head_weights,
            copy_logits,
        }
    }

    /// Per-head masks for a decoder input of `len` positions: causal by
    /// default, with the verb head restricted via [`build_verb_mask`].
    pub fn decoder_masks(&self, len: usize, verb_positions: &[usize]) -> Vec<AttentionMask> {
        (0..self.cfg.heads)
            .map(|h| {
                if Some(h) == self.cfg.verb_head {
                    build_verb_mask(len, verb_positions)
                } else {
                    AttentionMask::causal(len)
                }
            })
            .collect()
    }

    /// The copy-classifier weight vector, when configured.
    pub fn copy_weight(&self) -> Option<&Tensor> {
        self.ids.copy_w.map(|i| &self.params[i].value)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        let entries: Vec<(String, &Tensor)> = self
            .params
            .iter()
            .map(|p| (p.name.clone(), &p.value))
            .collect();
        save_checkpoint(path, &entries)?;
        Ok(())
    }

    /// Build a model from a config and restore parameter values by name.
    pub fn load(cfg: Seq2SeqConfig, path: &std::path::Path) -> Result<Self, ModelError> {
        let mut rng = crate::seeds::substream(0, "model-load", 0);
        let mut model = Seq2Seq::new(cfg, &mut rng)?;
        let entries = load_checkpoint(path)?;
        if entries.len() != model.params.len() {
            return Err(ModelError::CheckpointMismatch(format!(
                "{} tensors in file, model has {}",
                entries.len(),
                model.params.len()
            )));
        }
        for ((name, tensor), param) in entries.into_iter().zip(model.params.iter_mut()) {
            if name != param.name {
                return Err(ModelError::CheckpointMismatch(format!(
                    "expected tensor {:?}, found {:?}",
                    param.name, name
                )));
            }
            if tensor.shape() != param.value.shape() {
                return Err(ModelError::CheckpointMismatch(format!(
                    "tensor {name:?} has shape {:?}, model expects {:?}",
                    tensor.shape(),
                    param.value.shape()
                )));
            }
            param.value = tensor;
        }
        Ok(model)
    }
}

/// The three trained models of the combined pipeline plus their shared
/// vocabularies. The plan model's target vocabulary doubles as the story
/// model's source vocabulary; both contain the placeholder family.
pub struct PipelineBundle {
    pub plan_model: Seq2Seq,
    pub story_model: Seq2Seq,
    pub fill_model: FillModel,
    pub prompt_vocab: Vocabulary,
    pub story_vocab: Vocabulary,
    pub scheme: crate::decompose::AnonScheme,
}

impl PipelineBundle {
    pub fn validate(&self) -> Result<(), ModelError> {
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(ModelError::InvalidConfig(format!(
                    "{name}: vocabulary size {got} does not match {want}"
                )))
            }
        };
        check(
            "plan model source",
            self.plan_model.config().src_vocab,
            self.prompt_vocab.len(),
        )?;
        check(
            "plan model target",
            self.plan_model.config().tgt_vocab,
            self.story_vocab.len(),
        )?;
        check(
            "story model source",
            self.story_model.config().src_vocab,
            self.story_vocab.len(),
        )?;
        check(
            "story model target",
            self.story_model.config().tgt_vocab,
            self.story_vocab.len(),
        )?;
        check(
            "fill model source",
            self.fill_model.model.config().src_vocab,
            self.fill_model.src_vocab.len(),
        )?;
        Ok(())
    }
}

impl crate::generate::PipelineModels for PipelineBundle {
    fn scheme(&self) -> crate::decompose::AnonScheme {
        self.scheme
    }

    fn context_window(&self) -> usize {
        self.fill_model.window
    }

    fn generate_plan(
        &mut self,
        prompt: &[String],
        cfg: &crate::generate::GenerationConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<String>, crate::generate::GenerateError> {
        let src = self.prompt_vocab.encode(prompt);
        let mut session = DecodeSession::new(&self.plan_model, &src, &self.story_vocab);
        let out = crate::generate::generate_sequence(&mut session, &self.story_vocab, cfg, rng)?;
        Ok(out.tokens)
    }

    fn generate_anon_story(
        &mut self,
        plan: &[String],
        cfg: &crate::generate::GenerationConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<String>, crate::generate::GenerateError> {
        let src = self.story_vocab.encode(plan);
        let mut session = DecodeSession::new(&self.story_model, &src, &self.story_vocab);
        let out = crate::generate::generate_sequence(&mut session, &self.story_vocab, cfg, rng)?;
        Ok(out.tokens)
    }

    fn fill_ner(
        &mut self,
        placeholder_id: usize,
        anon: &[String],
    ) -> Result<String, crate::generate::GenerateError> {
        self.fill_model
            .ner_fill_predict(placeholder_id, anon)
            .map_err(|e| crate::generate::GenerateError::Model(e.to_string()))
    }

    fn fill_coref(
        &mut self,
        ctx: &MentionContext,
    ) -> Result<String, crate::generate::GenerateError> {
        self.fill_model
            .coref_fill_predict(ctx)
            .map_err(|e| crate::generate::GenerateError::Model(e.to_string()))
    }
}

/// Mask for the verb-attention head: row `t` may attend exactly to the verb
/// positions strictly before `t`, plus the null slot; with no prior verb the
/// null slot is the only option and the head attends to a zero vector.
pub fn build_verb_mask(prefix_len: usize, verb_positions: &[usize]) -> AttentionMask {
    let mut mask = AttentionMask::null_only(prefix_len, prefix_len);
    for t in 0..prefix_len {
        for &p in verb_positions {
            if p < t {
                mask.allow(t, p);
            }
        }
    }
    mask
}

/// Verb positions in a decoder input sequence, recovered syntactically: the
/// token directly after a frame delimiter is a predicate.
pub fn verb_positions_in_input(input: &[u32], frame_id: u32) -> Vec<usize> {
    (1..input.len()).filter(|&p| input[p - 1] == frame_id).collect()
}

/// Decoding session: encodes the source once, then recomputes the decoder
/// per step and exposes last-row logits plus pointer data.
pub struct DecodeSession<'m> {
    model: &'m Seq2Seq,
    enc_states: Tensor,
    vocab_frame_id: u32,
    detect_verbs: bool,
}

impl<'m> DecodeSession<'m> {
    pub fn new(model: &'m Seq2Seq, src: &[u32], vocab: &Vocabulary) -> Self {
        let mut g = Graph::new();
        let bound = model.bind(&mut g);
        let enc = model.encode(&mut g, &bound, src);
        DecodeSession {
            model,
            enc_states: g.value(enc).clone(),
            vocab_frame_id: vocab.frame_id(),
            detect_verbs: model.cfg.verb_head.is_some(),
        }
    }
}

impl StepScorer for DecodeSession<'_> {
    fn step(&mut self, prefix: &[u32]) -> StepInfo {
        let model = self.model;
        let mut g = Graph::new();
        let bound = model.bind(&mut g);
        let enc = g.input(self.enc_states.clone());
        let verb_positions = if self.detect_verbs {
            verb_positions_in_input(prefix, self.vocab_frame_id)
        } else {
            Vec::new()
        };
        let masks = model.decoder_masks(prefix.len(), &verb_positions);
        let out = model.decode(&mut g, &bound, enc, prefix, &masks);
        let last = prefix.len() - 1;
        let logits = g.value(out.logits).row(last).to_vec();
        let copy = match (model.cfg.pointer_head, out.copy_logits) {
            (Some(head), Some(copy_logits)) => {
                let z = g.value(copy_logits).get2(last, 0);
                let weights = g.value(out.head_weights[head]);
                // Row over real prefix positions; the null column is not a
                // copy candidate.
                let pointer_row = weights.row(last)[..prefix.len()].to_vec();
                Some(CopyInfo {
                    p_copy: 1.0 / (1.0 + (-z).exp()),
                    pointer_row,
                })
            }
            _ => None,
        };
        StepInfo { logits, copy }
    }
}
