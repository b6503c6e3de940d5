//! `preprocess`: load the aligned dataset, truncate stories, tokenize, and
//! build the vocabularies.

use storygen::corpus::{
    build_vocab, learn_bpe, load_dataset, segment_text, tokenize, truncate_story, Scheme,
    SpecialTokens,
};

use crate::artifacts::{write_token_file, Artifacts};
use crate::config::RunConfig;
use crate::CliError;

pub fn run(cfg: &RunConfig, artifacts: &Artifacts) -> Result<(), CliError> {
    let examples = load_dataset(&cfg.paths.source, &cfg.paths.target)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let max_words = cfg.preprocess.max_story_words;
    let prompts: Vec<Vec<String>> = examples.iter().map(|e| e.prompt.tokens.clone()).collect();
    let stories: Vec<Vec<String>> = examples
        .iter()
        .map(|e| truncate_story(&e.story, max_words).tokens)
        .collect();

    write_token_file(&artifacts.prompts_tok(), &prompts)?;
    write_token_file(&artifacts.stories_tok(), &stories)?;

    let specials = SpecialTokens::default();
    let vocab_err = |e: storygen::corpus::VocabularyError| CliError::Validation(e.to_string());

    let prompt_vocab = build_vocab(
        &prompts,
        Scheme::Word,
        cfg.preprocess.prompt_vocab_size,
        specials.clone(),
    )
    .map_err(vocab_err)?;
    prompt_vocab.save(&artifacts.vocab_prompt()).map_err(vocab_err)?;

    let story_vocab = build_vocab(
        &stories,
        Scheme::Word,
        cfg.preprocess.story_vocab_size,
        specials.clone(),
    )
    .map_err(vocab_err)?;
    story_vocab.save(&artifacts.vocab_story()).map_err(vocab_err)?;

    // The filler's target vocabulary follows its sub-word scheme over the
    // story text; BPE additionally learns and saves its merge table.
    let fill_scheme = super::parse_fill_scheme(cfg)?;
    let story_lines: Vec<String> = stories.iter().map(|t| t.join(" ")).collect();
    let fill_corpus: Vec<Vec<String>> = match fill_scheme {
        Scheme::Word => stories.clone(),
        Scheme::Character => story_lines
            .iter()
            .map(|l| tokenize(l, Scheme::Character))
            .collect(),
        Scheme::Bpe => {
            let merges = learn_bpe(&story_lines, cfg.preprocess.bpe_merges);
            merges
                .save(&artifacts.bpe_merges())
                .map_err(|e| CliError::Validation(format!("cannot write merges: {e}")))?;
            story_lines
                .iter()
                .map(|l| segment_text(l, &merges))
                .collect()
        }
    };
    let fill_vocab = build_vocab(
        &fill_corpus,
        fill_scheme,
        cfg.preprocess.fill_vocab_size,
        specials,
    )
    .map_err(vocab_err)?;
    fill_vocab.save(&artifacts.vocab_fill()).map_err(vocab_err)?;

    Ok(())
}
