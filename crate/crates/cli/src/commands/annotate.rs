//! `annotate`: produce one annotation record per story, either by importing
//! and validating an external file or by running the heuristic annotators.

use std::path::Path;

use storygen::annotate::{
    annotate_story, default_verb_lexicon, export_annotations, import_annotations,
    read_annotation_file, write_annotation_file, Gazetteer,
};
use storygen::corpus::Story;

use crate::artifacts::{read_token_file, Artifacts};
use crate::config::RunConfig;
use crate::CliError;

pub fn run(
    cfg: &RunConfig,
    artifacts: &Artifacts,
    import: Option<&Path>,
    force_fallback: bool,
) -> Result<(), CliError> {
    super::require_files(&[&artifacts.stories_tok()])?;
    let stories: Vec<Story> = read_token_file(&artifacts.stories_tok())?
        .into_iter()
        .map(Story::from_tokens)
        .collect();

    let import = if force_fallback {
        None
    } else {
        import
            .map(Path::to_path_buf)
            .or_else(|| cfg.paths.annotations.clone())
    };
    let records = match import {
        Some(path) => {
            let records = read_annotation_file(&path)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            if records.len() != stories.len() {
                return Err(CliError::Validation(format!(
                    "annotation file has {} records for {} stories",
                    records.len(),
                    stories.len()
                )));
            }
            // Validate every record against its story, then write the
            // canonicalized form.
            let mut canonical = Vec::with_capacity(records.len());
            for (i, (story, record)) in stories.iter().zip(&records).enumerate() {
                let annotated = import_annotations(story, record).map_err(|e| {
                    CliError::Validation(format!("annotation record {} invalid: {e}", i + 1))
                })?;
                canonical.push(export_annotations(&annotated));
            }
            canonical
        }
        None => {
            let lexicon = default_verb_lexicon();
            let gazetteer = Gazetteer::new();
            stories
                .iter()
                .map(|s| export_annotations(&annotate_story(s, &lexicon, &gazetteer)))
                .collect()
        }
    };

    write_annotation_file(&artifacts.annotations(), &records)
        .map_err(|e| CliError::Validation(e.to_string()))
}
