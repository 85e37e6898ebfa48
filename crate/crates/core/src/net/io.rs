//! Model files and word-vector loading.
//!
//! Layout: magic `SCLM`, format version (u32 LE), a length-prefixed JSON
//! header (config, vocabulary, ontology, metadata), then the forward and
//! backward networks as named blocks of little-endian f64. Floats are
//! stored as raw bits so a load reproduces the saved weights exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::da::Ontology;
use crate::error::{Error, Result};
use crate::numkit::Mat;
use crate::vocab::Vocab;

use super::params::{NetConfig, NetworkParams};

const MAGIC: &[u8; 4] = b"SCLM";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to generate from a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub config: NetConfig,
    pub forward: NetworkParams,
    pub backward: NetworkParams,
    pub vocab: Vocab,
    pub ontology: Ontology,
    /// Free-form provenance such as seed and split seed.
    pub meta: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: NetConfig,
    vocab: Vec<String>,
    ontology: Ontology,
    meta: BTreeMap<String, String>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_network(out: &mut Vec<u8>, p: &NetworkParams) {
    let blocks = p.blocks();
    put_u32(out, blocks.len() as u32);
    for (name, m) in blocks {
        put_u32(out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
        put_u64(out, m.rows() as u64);
        put_u64(out, m.cols() as u64);
        for x in m.as_slice() {
            out.extend_from_slice(&x.to_bits().to_le_bytes());
        }
    }
}

pub fn encode_model(model: &SavedModel) -> Vec<u8> {
    let header = Header {
        config: model.config.clone(),
        vocab: model.vocab.tokens().to_vec(),
        ontology: model.ontology.clone(),
        meta: model.meta.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header is plain data");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u64(&mut out, json.len() as u64);
    out.extend_from_slice(&json);
    put_network(&mut out, &model.forward);
    put_network(&mut out, &model.backward);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("length overflow".into()))
    }
}

fn read_network(r: &mut Reader<'_>, cfg: &NetConfig) -> Result<NetworkParams> {
    let mut params = NetworkParams::init_scaled(cfg, 0.0, &mut crate::numkit::Rng::seed(0));
    let expected = params.block_names();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Format(format!(
            "expected {} parameter blocks, found {count}",
            expected.len()
        )));
    }
    for want in &expected {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Format("block name is not UTF-8".into()))?;
        if name != want {
            return Err(Error::Format(format!("expected block `{want}`, found `{name}`")));
        }
        let (rows, cols) = (r.len()?, r.len()?);
        let block = params.block_mut(want).expect("name from block_names");
        if block.shape() != (rows, cols) {
            return Err(Error::Format(format!(
                "block `{want}` is {rows}x{cols}, config implies {:?}",
                block.shape()
            )));
        }
        let raw = r.take(rows * cols * 8)?;
        for (dst, chunk) in block.as_mut_slice().iter_mut().zip(raw.chunks_exact(8)) {
            *dst = f64::from_bits(u64::from_le_bytes(chunk.try_into().unwrap()));
        }
    }
    Ok(params)
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let hlen = r.len()?;
    let header: Header = serde_json::from_slice(r.take(hlen)?)
        .map_err(|e| Error::Format(format!("header: {e}")))?;
    header.config.validate()?;
    let vocab = Vocab::from_tokens(header.vocab);
    if vocab.len() != header.config.vocab_size {
        return Err(Error::Format(format!(
            "vocabulary has {} tokens, config says {}",
            vocab.len(),
            header.config.vocab_size
        )));
    }
    let forward = read_network(&mut r, &header.config)?;
    let backward = read_network(&mut r, &header.config)?;
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after model".into()));
    }
    Ok(SavedModel {
        config: header.config,
        forward,
        backward,
        vocab,
        ontology: header.ontology,
        meta: header.meta,
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &SavedModel) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

/// Copies vectors from `word x1 x2 ...` lines into the matching embedding
/// rows. Returns how many vocabulary rows were filled.
pub fn parse_word_vectors(text: &str, vocab: &Vocab, embedding: &mut Mat) -> Result<usize> {
    let mut filled = 0;
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<f64> = parts
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Input(format!("word vectors line {}: {e}", lineno + 1)))?;
        if values.len() != embedding.cols() {
            return Err(Error::Input(format!(
                "word vectors line {}: {} values, embedding size is {}",
                lineno + 1,
                values.len(),
                embedding.cols()
            )));
        }
        if let Some(id) = vocab.get(word) {
            embedding.row_mut(id).copy_from_slice(&values);
            filled += 1;
        }
    }
    Ok(filled)
}

pub fn load_word_vectors(path: impl AsRef<Path>, vocab: &Vocab, embedding: &mut Mat) -> Result<usize> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_word_vectors(&text, vocab, embedding)
}
