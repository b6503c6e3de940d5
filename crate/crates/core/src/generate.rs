//! Sampling-based decoding and the three-stage pipeline.
//!
//! Generation samples from the top-k of the temperature-scaled distribution,
//! never emits banned tokens, suppresses `eos` until a minimum word count,
//! and cuts the output at the first sentence boundary past the maximum.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    is_marker_token, is_sentence_ender, parse_placeholder, Prompt, Story, Vocabulary,
};
use crate::decompose::{deanonymize, AnonScheme, DecomposeError, Fills};
use crate::model::{decode_step_with_copy, mention_context, MentionContext};
use crate::seeds::substream;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("every candidate token is banned")]
    AllTokensBanned,
    #[error("model error: {0}")]
    Model(String),
}

/// Pipeline stages, used to tag failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Plan,
    Story,
    Fill,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Plan => write!(f, "plan"),
            Stage::Story => write!(f, "story"),
            Stage::Fill => write!(f, "fill"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: GenerateError,
    },
    #[error("assembling the final story failed: {0}")]
    Assemble(#[from] DecomposeError),
}

/// Decoding policy for one generation stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub top_k: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Word budget past `max_words` while waiting for a sentence end; beyond
    /// it the output is hard-cut and flagged.
    pub slack_words: usize,
    /// Copy-branch decision threshold for models with a pointer head.
    pub copy_threshold: f64,
    pub seed: u64,
    /// Token ids masked to -inf before any sampling; `unk` belongs here.
    pub banned: Vec<u32>,
}

impl GenerationConfig {
    /// Story-stage defaults: temperature 0.8, k = 10, 150..250 words.
    pub fn story_defaults(vocab: &Vocabulary, seed: u64) -> Self {
        GenerationConfig {
            temperature: 0.8,
            top_k: 10,
            min_words: 150,
            max_words: 250,
            slack_words: 100,
            copy_threshold: 0.5,
            seed,
            banned: vec![vocab.unk_id(), vocab.pad_id(), vocab.bos_id()],
        }
    }

    /// Plan-stage defaults: same sampler, no minimum length, shorter budget.
    pub fn plan_defaults(vocab: &Vocabulary, seed: u64) -> Self {
        GenerationConfig {
            min_words: 0,
            max_words: 80,
            slack_words: 20,
            ..Self::story_defaults(vocab, seed)
        }
    }
}

/// Sample from the top-k of the temperature-scaled, banned-masked logits.
/// Ties at the k boundary prefer the lower token id. Errors when every token
/// is banned.
pub fn sample_top_k(
    logits: &[f64],
    cfg: &GenerationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<u32, GenerateError> {
    sample_top_k_masked(logits, cfg, &[], rng)
}

/// [`sample_top_k`] with extra step-local bans (e.g. `eos` under the minimum
/// length).
pub fn sample_top_k_masked(
    logits: &[f64],
    cfg: &GenerationConfig,
    extra_banned: &[u32],
    rng: &mut ChaCha8Rng,
) -> Result<u32, GenerateError> {
    assert!(cfg.temperature > 0.0, "temperature must be positive");
    assert!(cfg.top_k > 0, "top_k must be positive");
    let mut candidates: Vec<(usize, f64)> = logits
        .iter()
        .enumerate()
        .filter(|(id, _)| {
            let id = *id as u32;
            !cfg.banned.contains(&id) && !extra_banned.contains(&id)
        })
        .map(|(id, &l)| (id, l / cfg.temperature))
        .collect();
    if candidates.is_empty() {
        return Err(GenerateError::AllTokensBanned);
    }
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    candidates.truncate(cfg.top_k);

    let max = candidates[0].1;
    let weights: Vec<f64> = candidates.iter().map(|(_, l)| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for ((id, _), w) in candidates.iter().zip(&weights) {
        draw -= w;
        if draw <= 0.0 {
            return Ok(*id as u32);
        }
    }
    Ok(candidates.last().unwrap().0 as u32)
}

/// Does a token count toward the word-length limits? Markers (delimiters,
/// `<newline>`, `<unk>`) and pure punctuation do not; placeholders count as
/// one word each.
pub fn countable_word(token: &str) -> bool {
    !is_marker_token(token)
        && !token.is_empty()
        && !token.chars().all(|c| c.is_ascii_punctuation())
}

/// Pointer data for one decoding step.
#[derive(Debug, Clone)]
pub struct CopyInfo {
    pub p_copy: f64,
    /// Pointer-head attention over the prefix positions (null slot dropped).
    pub pointer_row: Vec<f64>,
}

/// Next-token scores for a decoder prefix (starting with `bos`).
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub logits: Vec<f64>,
    pub copy: Option<CopyInfo>,
}

/// Anything that can score the next token given the decoded prefix.
pub trait StepScorer {
    fn step(&mut self, prefix: &[u32]) -> StepInfo;
}

/// A generated sequence plus bookkeeping from the length rules.
#[derive(Debug, Clone)]
pub struct GenOutput {
    pub tokens: Vec<String>,
    pub ids: Vec<u32>,
    pub word_count: usize,
    /// Set when the slack budget ran out before a sentence boundary.
    pub hard_cut: bool,
}

/// Autoregressive decode under the length rules: banned tokens are masked
/// first, `eos` stays suppressed below `min_words`, and once the word count
/// exceeds `max_words` the output stops at the next sentence ender (keeping
/// any closing quote). If `slack_words` more words pass without a sentence
/// end, the output is hard-cut and flagged.
pub fn generate_sequence(
    scorer: &mut dyn StepScorer,
    vocab: &Vocabulary,
    cfg: &GenerationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GenOutput, GenerateError> {
    let eos = vocab.eos_id();
    let mut prefix: Vec<u32> = vec![vocab.bos_id()];
    let mut ids: Vec<u32> = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut words = 0usize;
    let mut hard_cut = false;
    let mut double_quotes = 0usize;
    let mut single_quotes = 0usize;

    loop {
        let info = scorer.step(&prefix);
        let eos_ban: &[u32] = if words < cfg.min_words { &[eos] } else { &[] };
        let token = match &info.copy {
            Some(copy) => {
                let placeholders: Vec<(usize, u32)> = prefix
                    .iter()
                    .enumerate()
                    .filter(|(_, &t)| vocab.placeholder_of(t).is_some())
                    .map(|(p, &t)| (p, t))
                    .collect();
                decode_step_with_copy(
                    copy.p_copy,
                    cfg.copy_threshold,
                    &copy.pointer_row,
                    &placeholders,
                    || sample_top_k_masked(&info.logits, cfg, eos_ban, rng),
                )?
                .token()
            }
            None => sample_top_k_masked(&info.logits, cfg, eos_ban, rng)?,
        };
        if token == eos {
            break;
        }
        let text = vocab
            .token(token)
            .unwrap_or_else(|| panic!("sampled id {token} outside vocabulary"))
            .to_string();
        match text.as_str() {
            "\"" => double_quotes += 1,
            "'" => single_quotes += 1,
            _ => {}
        }
        if countable_word(&text) {
            words += 1;
        }
        let ended_sentence = is_sentence_ender(&text);
        ids.push(token);
        tokens.push(text);
        prefix.push(token);

        if words > cfg.max_words && ended_sentence {
            // Keep closing quotes that belong to this sentence.
            loop {
                let info = scorer.step(&prefix);
                let Ok(next) = sample_top_k_masked(&info.logits, cfg, &[], rng) else {
                    break;
                };
                let text = vocab.token(next).unwrap_or("").to_string();
                let closes = match text.as_str() {
                    "\"" => {
                        double_quotes += 1;
                        double_quotes.is_multiple_of(2)
                    }
                    "'" => {
                        single_quotes += 1;
                        single_quotes.is_multiple_of(2)
                    }
                    _ => false,
                };
                if closes {
                    ids.push(next);
                    tokens.push(text);
                    prefix.push(next);
                } else {
                    break;
                }
            }
            break;
        }
        if words >= cfg.max_words + cfg.slack_words {
            hard_cut = true;
            break;
        }
    }
    Ok(GenOutput {
        tokens,
        ids,
        word_count: words,
        hard_cut,
    })
}

/// The models a pipeline run needs, abstracted so scripted stubs can stand
/// in for trained models.
pub trait PipelineModels {
    fn scheme(&self) -> AnonScheme;
    /// Bag-of-words window width for coreference fill contexts.
    fn context_window(&self) -> usize {
        10
    }
    fn generate_plan(
        &mut self,
        prompt: &[String],
        cfg: &GenerationConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<String>, GenerateError>;
    fn generate_anon_story(
        &mut self,
        plan: &[String],
        cfg: &GenerationConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<String>, GenerateError>;
    fn fill_ner(
        &mut self,
        placeholder_id: usize,
        anon: &[String],
    ) -> Result<String, GenerateError>;
    fn fill_coref(&mut self, ctx: &MentionContext) -> Result<String, GenerateError>;
}

/// One placeholder fill, in the order it was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillRecord {
    pub placeholder: usize,
    pub surface: String,
}

/// Every intermediate of one pipeline run; replayable given the same seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub prompt: Vec<String>,
    pub plan: Vec<String>,
    pub anonymized: Vec<String>,
    pub fills: Vec<FillRecord>,
    pub story: Vec<String>,
}

/// Fill every placeholder of an anonymized token sequence: one prediction
/// per distinct id under NER anonymization, one per occurrence in textual
/// order (with accumulated previous references) under coreference.
pub fn fill_anonymized<N, C>(
    anon: &[String],
    scheme: AnonScheme,
    window: usize,
    mut fill_ner: N,
    mut fill_coref: C,
) -> Result<(Fills, Vec<FillRecord>), GenerateError>
where
    N: FnMut(usize, &[String]) -> Result<String, GenerateError>,
    C: FnMut(&MentionContext) -> Result<String, GenerateError>,
{
    let occurrences: Vec<(usize, usize)> = anon
        .iter()
        .enumerate()
        .filter_map(|(pos, t)| parse_placeholder(t).map(|id| (pos, id)))
        .collect();

    let mut fill_records = Vec::new();
    let fills = match scheme {
        AnonScheme::Ner => {
            let mut per_id = std::collections::BTreeMap::new();
            let mut seen_order = Vec::new();
            for &(_, id) in &occurrences {
                per_id.entry(id).or_insert_with(|| {
                    seen_order.push(id);
                    String::new()
                });
            }
            for id in seen_order {
                let surface = fill_ner(id, anon)?;
                fill_records.push(FillRecord {
                    placeholder: id,
                    surface: surface.clone(),
                });
                per_id.insert(id, surface);
            }
            Fills::PerId(per_id)
        }
        AnonScheme::Coref => {
            let mut per_occurrence: std::collections::BTreeMap<usize, Vec<String>> =
                std::collections::BTreeMap::new();
            for &(pos, id) in &occurrences {
                let previous = per_occurrence.get(&id).cloned().unwrap_or_default();
                let ctx = mention_context(anon, pos, id, previous, window);
                let surface = fill_coref(&ctx)?;
                fill_records.push(FillRecord {
                    placeholder: id,
                    surface: surface.clone(),
                });
                per_occurrence.entry(id).or_default().push(surface);
            }
            Fills::PerOccurrence(per_occurrence)
        }
    };
    Ok((fills, fill_records))
}

/// Run prompt -> plan -> anonymized story -> reference fills -> story.
///
/// Stage RNG streams derive from `(story_cfg.seed, example_id)`, so a run is
/// replayable end to end. Failures abort with the stage tag.
pub fn run_pipeline(
    prompt: &Prompt,
    models: &mut dyn PipelineModels,
    plan_cfg: &GenerationConfig,
    story_cfg: &GenerationConfig,
    example_id: u64,
) -> Result<(Story, Provenance), PipelineError> {
    let stage_err = |stage: Stage| move |source: GenerateError| PipelineError::Stage { stage, source };

    let mut rng = substream(plan_cfg.seed, "pipeline-plan", example_id);
    let plan = models
        .generate_plan(&prompt.tokens, plan_cfg, &mut rng)
        .map_err(stage_err(Stage::Plan))?;

    let mut rng = substream(story_cfg.seed, "pipeline-story", example_id);
    let anon = models
        .generate_anon_story(&plan, story_cfg, &mut rng)
        .map_err(stage_err(Stage::Story))?;

    let scheme = models.scheme();
    let window = models.context_window();
    let (fills, fill_records) = {
        let models = std::cell::RefCell::new(&mut *models);
        fill_anonymized(
            &anon,
            scheme,
            window,
            |id, tokens| models.borrow_mut().fill_ner(id, tokens),
            |ctx| models.borrow_mut().fill_coref(ctx),
        )
        .map_err(stage_err(Stage::Fill))?
    };

    let story_tokens = deanonymize(&anon, &fills)?;
    let story = Story::from_tokens(story_tokens);
    let provenance = Provenance {
        prompt: prompt.tokens.clone(),
        plan,
        anonymized: anon,
        fills: fill_records,
        story: story.tokens.clone(),
    };
    Ok((story, provenance))
}
