//! Task records and the JSON Lines task file format.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

use crate::policy::FeatureVector;

/// One problem instance: the prompt, its gold answer, and the features the
/// generator conditions on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub category: String,
    pub prompt: String,
    pub gold: String,
    pub features: FeatureVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub public_tests: Option<Vec<(String, String)>>,
}

#[derive(Debug, Error)]
pub enum TaskFileError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad task record at {path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate task id `{0}`")]
    DuplicateId(String),
    #[error("task `{0}` has an empty prompt")]
    EmptyPrompt(String),
}

/// Read a JSON Lines task file, one task per line. Blank lines are skipped.
pub fn load_tasks(path: &Path) -> Result<Vec<Task>, TaskFileError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path)
        .map_err(|source| TaskFileError::Io { path: display.clone(), source })?;
    let reader = std::io::BufReader::new(file);
    let mut tasks = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| TaskFileError::Io { path: display.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let task: Task = serde_json::from_str(&line).map_err(|source| TaskFileError::Parse {
            path: display.clone(),
            line: idx + 1,
            source,
        })?;
        if !seen.insert(task.id.clone()) {
            return Err(TaskFileError::DuplicateId(task.id));
        }
        if task.prompt.is_empty() {
            return Err(TaskFileError::EmptyPrompt(task.id));
        }
        tasks.push(task);
    }
    Ok(tasks)
}

/// Write tasks as JSON Lines.
pub fn save_tasks(path: &Path, tasks: &[Task]) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    for task in tasks {
        let line = serde_json::to_string(task).expect("task serializes");
        writeln!(file, "{line}")?;
    }
    Ok(())
}
