use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Chunk, CorpusError};

const DELIM: &str = "---";
const KEYS: [&str; 7] = [
    "chunk_id",
    "doc_id",
    "ordinal",
    "token_count",
    "topic",
    "structural_position",
    "source_kind",
];

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Markdown with a `---` frontmatter block carrying every metadata field.
/// String values are JSON-quoted so any heading text survives.
pub fn to_markdown(chunk: &Chunk) -> String {
    format!(
        "{DELIM}\nchunk_id: {}\ndoc_id: {}\nordinal: {}\ntoken_count: {}\ntopic: {}\nstructural_position: {}\nsource_kind: {}\n{DELIM}\n{}\n",
        quote(&chunk.chunk_id),
        quote(&chunk.doc_id),
        chunk.ordinal,
        chunk.token_count,
        quote(&chunk.topic),
        chunk.structural_position,
        chunk.source_kind.as_str(),
        chunk.text,
    )
}

fn parse_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_string(value: &str, line: usize) -> Result<String, CorpusError> {
    if value.starts_with('"') {
        serde_json::from_str(value).map_err(|e| parse_err(line, format!("bad string: {e}")))
    } else {
        Ok(value.to_owned())
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T, CorpusError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| parse_err(line, format!("{key}: {e}")))
}

pub fn from_markdown(s: &str) -> Result<Chunk, CorpusError> {
    let mut lines = s.split_inclusive('\n');
    match lines.next() {
        Some(first) if first.trim_end_matches(['\n', '\r']) == DELIM => {}
        _ => return Err(parse_err(1, "expected opening `---`")),
    }
    let mut fields: HashMap<&str, (&str, usize)> = HashMap::new();
    let mut consumed = DELIM.len() + 1;
    let mut line_no = 1;
    let mut closed_at = None;
    for raw in lines {
        line_no += 1;
        consumed += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        if line == DELIM {
            closed_at = Some(line_no);
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| parse_err(line_no, "expected `key: value`"))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(parse_err(line_no, format!("unknown field {key:?}")));
        }
        if fields.insert(key, (value.trim(), line_no)).is_some() {
            return Err(parse_err(line_no, format!("duplicate field {key:?}")));
        }
    }
    let closed_at = closed_at.ok_or_else(|| parse_err(line_no, "unterminated frontmatter"))?;
    let get = |key: &str| {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| parse_err(closed_at, format!("missing required field {key:?}")))
    };

    let body = &s[consumed.min(s.len())..];
    let body = body.strip_suffix('\n').unwrap_or(body);

    let (v, l) = get("chunk_id")?;
    let chunk_id = parse_string(v, l)?;
    let (v, l) = get("doc_id")?;
    let doc_id = parse_string(v, l)?;
    let (v, l) = get("ordinal")?;
    let ordinal = parse_num(v, "ordinal", l)?;
    let (v, l) = get("token_count")?;
    let token_count = parse_num(v, "token_count", l)?;
    let (v, l) = get("topic")?;
    let topic = parse_string(v, l)?;
    let (v, l) = get("structural_position")?;
    let structural_position: f64 = parse_num(v, "structural_position", l)?;
    if !(0.0..=1.0).contains(&structural_position) {
        return Err(parse_err(l, "structural_position outside [0, 1]"));
    }
    let (v, l) = get("source_kind")?;
    let source_kind = parse_string(v, l)?.parse().map_err(|e: String| parse_err(l, e))?;
    if doc_id.is_empty() {
        return Err(parse_err(closed_at, "doc_id is empty"));
    }

    Ok(Chunk {
        chunk_id,
        doc_id,
        ordinal,
        text: body.to_owned(),
        token_count,
        topic,
        structural_position,
        source_kind,
    })
}

/// One `<chunk_id>.md` file per chunk.
pub fn write_chunk_dir(dir: &Path, chunks: &[Chunk]) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    for c in chunks {
        let path = dir.join(format!("{}.md", c.chunk_id));
        fs::write(&path, to_markdown(c)).map_err(|e| CorpusError::io(&path, e))?;
    }
    Ok(())
}

/// Read chunks from a directory of `.md` files, a directory holding
/// `chunks.jsonl`, or a `.jsonl` file. Results are ordered by
/// `(doc_id, ordinal)`.
pub fn read_chunk_dir(path: &Path) -> Result<Vec<Chunk>, CorpusError> {
    let mut chunks = if path.is_file() { read_jsonl(path)? } else { read_dir_chunks(path)? };
    chunks.sort_by(|a, b| (&a.doc_id, a.ordinal).cmp(&(&b.doc_id, b.ordinal)));
    Ok(chunks)
}

fn read_dir_chunks(path: &Path) -> Result<Vec<Chunk>, CorpusError> {
    let mut md: Vec<_> = fs::read_dir(path)
        .map_err(|e| CorpusError::io(path, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "md"))
        .collect();
    md.sort();
    if md.is_empty() {
        read_jsonl(&path.join("chunks.jsonl"))
    } else {
        md.iter()
            .map(|p| {
                let raw = fs::read_to_string(p).map_err(|e| CorpusError::io(p, e))?;
                from_markdown(&raw).map_err(|e| match e {
                    CorpusError::Parse { line, message } => CorpusError::Parse {
                        line,
                        message: format!("{}: {message}", p.display()),
                    },
                    other => other,
                })
            })
            .collect()
    }
}

pub fn write_jsonl(path: &Path, chunks: &[Chunk]) -> Result<(), CorpusError> {
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for c in chunks {
        let line = serde_json::to_string(c).expect("chunk serializes");
        writeln!(w, "{line}").map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Chunk>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?);
    }
    Ok(out)
}
