use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::pipeline::ReportBundle;
use crate::error::ReportError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Markdown];

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "markdown",
        })
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(format!("unknown format {other:?} (expected csv, json or markdown)")),
        }
    }
}

/// Renders every output file in memory as `(file name, contents)`, in a fixed order.
pub fn render_report(bundle: &ReportBundle, formats: &[Format]) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for table in &bundle.tables {
        for &f in formats {
            let body = match f {
                Format::Csv => table.to_csv(),
                Format::Json => table.to_json(),
                Format::Markdown => table.to_markdown(),
            };
            files.push((format!("{}.{}", table.name, f.extension()), body));
        }
    }
    if formats.contains(&Format::Markdown) {
        let mut all = String::from("# Reliability report\n\n");
        for note in &bundle.metadata.notes {
            all.push_str(&format!("- {note}\n"));
        }
        for table in &bundle.tables {
            all.push('\n');
            all.push_str(&table.to_markdown());
        }
        files.push(("report.md".into(), all));
    }
    let mut meta = serde_json::to_string_pretty(&bundle.metadata).expect("metadata serializes");
    meta.push('\n');
    files.push(("metadata.json".into(), meta));
    if !bundle.series.is_empty() {
        let mut lines = String::new();
        for r in &bundle.series {
            lines.push_str(&serde_json::to_string(r).expect("series serializes"));
            lines.push('\n');
        }
        files.push(("entropy_series.jsonl".into(), lines));
    }
    files
}

/// Writes the report into `out_dir`. Files are staged in a sibling directory
/// and moved into place only after every one was written.
pub fn emit_report(bundle: &ReportBundle, formats: &[Format], out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let files = render_report(bundle, formats);
    let write_err = |path: &Path, source| ReportError::Write {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(out_dir).map_err(|e| write_err(out_dir, e))?;
    let staging = out_dir.join(format!(".staging-{}", std::process::id()));
    let staged = (|| {
        fs::create_dir_all(&staging).map_err(|e| write_err(&staging, e))?;
        for (name, body) in &files {
            let path = staging.join(name);
            fs::write(&path, body).map_err(|e| write_err(&path, e))?;
        }
        Ok(())
    })();
    if let Err(e) = staged {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, _) in &files {
        let path = out_dir.join(name);
        fs::rename(staging.join(name), &path).map_err(|e| write_err(&path, e))?;
        written.push(path);
    }
    let _ = fs::remove_dir(&staging);
    Ok(written)
}
