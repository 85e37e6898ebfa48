//! Line-delimited JSON corpus files: one `{"da": ..., "text": ...}` per line.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::act::{parse_da, DialogueAct};
use super::delex::{delexicalise, DelexUtterance};
use super::ontology::Ontology;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub da: String,
    pub text: String,
}

/// A parsed corpus entry with its delexicalised form.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub da: DialogueAct,
    pub text: String,
    pub delex: DelexUtterance,
}

pub fn write_corpus<W: Write>(mut out: W, records: &[CorpusRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<CorpusRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Input(format!("line {}: {e}", lineno + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Input(format!("line {}: {e}", lineno + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Parses and delexicalises every record.
pub fn parse_records(records: &[CorpusRecord], ont: &Ontology) -> Result<Vec<Example>> {
    records
        .iter()
        .map(|r| {
            let da = parse_da(&r.da, ont)?;
            let delex = delexicalise(&r.text, &da, ont).utterance;
            Ok(Example {
                da,
                text: r.text.clone(),
                delex,
            })
        })
        .collect()
}

pub fn load_corpus(path: impl AsRef<Path>, ont: &Ontology) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let records = read_records(std::io::BufReader::new(file))?;
    parse_records(&records, ont)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let records = vec![
            CorpusRecord {
                da: r#"inform(name="x \"y\"")"#.into(),
                text: "x \"y\" is nice .".into(),
            },
            CorpusRecord {
                da: "goodbye()".into(),
                text: "bye .".into(),
            },
        ];
        let mut buf = Vec::new();
        write_corpus(&mut buf, &records).unwrap();
        assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 2);
        assert_eq!(read_records(&buf[..]).unwrap(), records);
    }

    #[test]
    fn bad_line_is_reported() {
        let err = read_records(&b"{\"da\": 1}\n"[..]).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }
}
