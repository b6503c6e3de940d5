//! `decompose`: build the deterministic intermediates for the chosen scheme.
//!
//! Artifacts are stage-shaped: `stage1.txt` is the first intermediate
//! (action plan, or the anonymized story for the pure entity schemes),
//! `stage2.txt` the second-stage target, and `tables.jsonl` the placeholder
//! tables for whichever side carries placeholders.

use storygen::annotate::{import_annotations, read_annotation_file};
use storygen::corpus::Story;
use storygen::decompose::{
    anonymize_coref, anonymize_ner, serialize_srl_plan, AnonScheme, TableRecord,
    write_table_file,
};

use crate::artifacts::{read_token_file, write_token_file, Artifacts};
use crate::config::RunConfig;
use crate::CliError;

use super::CliScheme;

pub fn run(cfg: &RunConfig, artifacts: &Artifacts, scheme: Option<&str>) -> Result<(), CliError> {
    let scheme = super::scheme_of(cfg, scheme)?;
    super::require_files(&[&artifacts.stories_tok(), &artifacts.annotations()])?;

    let stories: Vec<Story> = read_token_file(&artifacts.stories_tok())?
        .into_iter()
        .map(Story::from_tokens)
        .collect();
    let records = read_annotation_file(&artifacts.annotations())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if records.len() != stories.len() {
        return Err(CliError::Validation(format!(
            "{} annotation records for {} stories",
            records.len(),
            stories.len()
        )));
    }

    let max_placeholders = cfg.decompose.max_placeholders;
    let anonymization = scheme.anonymization(cfg)?;

    let mut stage1 = Vec::with_capacity(stories.len());
    let mut stage2 = Vec::with_capacity(stories.len());
    let mut tables = Vec::new();
    for (line, (story, record)) in stories.iter().zip(&records).enumerate() {
        let annotated = import_annotations(story, record)
            .map_err(|e| CliError::Validation(format!("record {}: {e}", line + 1)))?;
        let anonymize = |scheme: AnonScheme| match scheme {
            AnonScheme::Ner => anonymize_ner(&annotated.story, &annotated.mentions, max_placeholders),
            AnonScheme::Coref => anonymize_coref(
                &annotated.story,
                &annotated.clusters,
                &annotated.mentions,
                max_placeholders,
            ),
        };
        match scheme {
            CliScheme::SrlPlan => {
                stage1.push(serialize_srl_plan(&annotated).tokens);
                stage2.push(story.tokens.clone());
            }
            CliScheme::NerAnon | CliScheme::CorefAnon => {
                let anon = anonymize(anonymization);
                stage1.push(anon.tokens.clone());
                stage2.push(story.tokens.clone());
                tables.push(TableRecord {
                    line,
                    scheme: anonymization,
                    table: anon.table,
                });
            }
            CliScheme::Combined => {
                let anon = anonymize(anonymization);
                stage1.push(serialize_srl_plan(&annotated).tokens);
                stage2.push(anon.tokens.clone());
                tables.push(TableRecord {
                    line,
                    scheme: anonymization,
                    table: anon.table,
                });
            }
        }
    }

    write_token_file(&artifacts.stage1(), &stage1)?;
    write_token_file(&artifacts.stage2(), &stage2)?;
    if scheme.has_placeholders() {
        write_table_file(&artifacts.tables(), &tables)
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    Ok(())
}
