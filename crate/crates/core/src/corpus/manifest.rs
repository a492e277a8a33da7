use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{CorpusError, SourceDocument, SourceKind};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    doc_id: String,
    title: String,
    source_kind: SourceKind,
    #[serde(default = "default_language")]
    language: String,
    #[serde(default)]
    raw_text: Option<String>,
    /// Path to a UTF-8 text file, relative to the manifest's directory.
    #[serde(default)]
    raw_text_file: Option<PathBuf>,
    #[serde(default)]
    provenance: String,
}

fn default_language() -> String {
    "bn".to_owned()
}

fn is_slug(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
}

/// Parse a manifest JSON array. File references resolve against `base_dir`.
pub fn parse_manifest(json: &str, base_dir: &Path) -> Result<Vec<SourceDocument>, CorpusError> {
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(json).map_err(|e| CorpusError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    let mut seen = HashSet::new();
    let mut docs = Vec::with_capacity(entries.len());
    for e in entries {
        if !is_slug(&e.doc_id) {
            return Err(CorpusError::InvalidDocument(format!(
                "doc_id {:?} must be a nonempty slug of [a-z0-9_-]",
                e.doc_id
            )));
        }
        if !seen.insert(e.doc_id.clone()) {
            return Err(CorpusError::InvalidDocument(format!(
                "duplicate doc_id {:?}",
                e.doc_id
            )));
        }
        let raw_text = match (e.raw_text, e.raw_text_file) {
            (Some(t), None) => t,
            (None, Some(rel)) => {
                let path = base_dir.join(rel);
                std::fs::read_to_string(&path).map_err(|err| CorpusError::io(path, err))?
            }
            _ => {
                return Err(CorpusError::InvalidDocument(format!(
                    "{}: exactly one of raw_text or raw_text_file is required",
                    e.doc_id
                )))
            }
        };
        if raw_text.trim().is_empty() {
            return Err(CorpusError::InvalidDocument(format!(
                "{}: raw_text is empty",
                e.doc_id
            )));
        }
        docs.push(SourceDocument {
            doc_id: e.doc_id,
            title: e.title,
            source_kind: e.source_kind,
            language: e.language,
            raw_text,
            provenance: e.provenance,
        });
    }
    Ok(docs)
}

pub fn load_manifest(path: &Path) -> Result<Vec<SourceDocument>, CorpusError> {
    let raw = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_manifest(&raw, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_and_file_text() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.txt"), "পাট চাষ।").unwrap();
        let json = r#"[
            {"doc_id": "a", "title": "A", "source_kind": "handbook", "raw_text": "ধান চাষ।"},
            {"doc_id": "b", "title": "B", "source_kind": "bulletin", "language": "bn-BD",
             "raw_text_file": "b.txt", "provenance": "BARC 2022"}
        ]"#;
        let docs = parse_manifest(json, dir.path()).unwrap();
        assert_eq!(docs[1].raw_text, "পাট চাষ।");
        assert_eq!(docs[0].language, "bn");
    }

    #[test]
    fn rejects_duplicates_bad_ids_and_syntax() {
        let dup = r#"[{"doc_id":"a","title":"","source_kind":"other","raw_text":"x"},
                      {"doc_id":"a","title":"","source_kind":"other","raw_text":"y"}]"#;
        assert!(matches!(parse_manifest(dup, Path::new(".")), Err(CorpusError::InvalidDocument(_))));
        let bad = r#"[{"doc_id":"A B","title":"","source_kind":"other","raw_text":"x"}]"#;
        assert!(matches!(parse_manifest(bad, Path::new(".")), Err(CorpusError::InvalidDocument(_))));
        let syntax = "[\n{\"doc_id\": \n";
        assert!(matches!(parse_manifest(syntax, Path::new(".")), Err(CorpusError::Parse { line: 3, .. })));
    }
}
