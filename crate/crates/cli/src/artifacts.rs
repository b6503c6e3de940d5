//! Artifact layout under the output directory.

use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct Artifacts {
    out: PathBuf,
}

impl Artifacts {
    pub fn new(out: &Path) -> Self {
        Artifacts { out: out.to_path_buf() }
    }

    pub fn ensure_dir(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out).map_err(|e| {
            CliError::Validation(format!("cannot create {}: {e}", self.out.display()))
        })
    }

    pub fn dir(&self) -> &Path {
        &self.out
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn prompts_tok(&self) -> PathBuf {
        self.file("prompts.tok")
    }
    pub fn stories_tok(&self) -> PathBuf {
        self.file("stories.tok")
    }
    pub fn vocab_prompt(&self) -> PathBuf {
        self.file("vocab.prompt.txt")
    }
    pub fn vocab_story(&self) -> PathBuf {
        self.file("vocab.story.txt")
    }
    pub fn vocab_fill(&self) -> PathBuf {
        self.file("vocab.fill.txt")
    }
    pub fn bpe_merges(&self) -> PathBuf {
        self.file("bpe.merges")
    }
    pub fn annotations(&self) -> PathBuf {
        self.file("annotations.jsonl")
    }
    pub fn stage1(&self) -> PathBuf {
        self.file("stage1.txt")
    }
    pub fn stage2(&self) -> PathBuf {
        self.file("stage2.txt")
    }
    pub fn tables(&self) -> PathBuf {
        self.file("tables.jsonl")
    }
    pub fn plan_ckpt(&self) -> PathBuf {
        self.file("plan.ckpt")
    }
    pub fn story_ckpt(&self) -> PathBuf {
        self.file("story.ckpt")
    }
    pub fn fill_ckpt(&self) -> PathBuf {
        self.file("fill.ckpt")
    }
    pub fn manifest(&self) -> PathBuf {
        self.file("manifest.json")
    }
    pub fn stories_out(&self) -> PathBuf {
        self.file("stories.txt")
    }
    pub fn provenance(&self) -> PathBuf {
        self.file("provenance.jsonl")
    }
    pub fn report_txt(&self) -> PathBuf {
        self.file("report.txt")
    }
    pub fn report_json(&self) -> PathBuf {
        self.file("report.json")
    }
    pub fn run_log(&self) -> PathBuf {
        self.file("run.log")
    }
}

/// Read a token file: one example per line, tokens space-separated.
pub fn read_token_file(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("missing input {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

/// Write a token file, one example per line.
pub fn write_token_file(path: &Path, examples: &[Vec<String>]) -> Result<(), CliError> {
    let mut out = String::new();
    for tokens in examples {
        out.push_str(&tokens.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}
