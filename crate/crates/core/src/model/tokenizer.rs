//! GPT-2 byte-level BPE.
//!
//! Text is split with the GPT-2 pre-tokenization pattern, each piece is mapped
//! byte-by-byte onto the printable "byte alphabet", and adjacent symbols are
//! merged lowest-rank-first until no ranked pair remains.

use std::collections::HashMap;
use std::path::Path;

use fancy_regex::Regex;

use super::TokenSequence;
use crate::error::{Error, Result};

const PRETOKENIZE: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

const BUNDLED_VOCAB: &str = include_str!("../../assets/gpt2/vocab.json");
const BUNDLED_MERGES: &str = include_str!("../../assets/gpt2/merges.txt");

pub const END_OF_TEXT: &str = "<|endoftext|>";

#[derive(Debug, Clone)]
pub struct Tokenizer {
    encoder: HashMap<String, u32>,
    decoder: Vec<String>,
    merge_ranks: HashMap<(String, String), usize>,
    byte_to_char: [char; 256],
    char_to_byte: HashMap<char, u8>,
    pattern: Regex,
}

/// The reversible byte -> printable-char table used by GPT-2.
fn byte_alphabet() -> [char; 256] {
    let mut table = ['\0'; 256];
    let printable = |b: u32| {
        (u32::from('!')..=u32::from('~')).contains(&b)
            || (u32::from('¡')..=u32::from('¬')).contains(&b)
            || (u32::from('®')..=u32::from('ÿ')).contains(&b)
    };
    let mut next = 256u32;
    for b in 0..256u32 {
        let c = if printable(b) {
            b
        } else {
            let c = next;
            next += 1;
            c
        };
        table[b as usize] = char::from_u32(c).expect("byte alphabet stays in the BMP");
    }
    table
}

impl Tokenizer {
    /// Build from the contents of `vocab.json` and `merges.txt`.
    pub fn from_strings(vocab_json: &str, merges_txt: &str) -> Result<Self> {
        let encoder: HashMap<String, u32> = serde_json::from_str(vocab_json)
            .map_err(|e| Error::Tokenizer(format!("vocab.json: {e}")))?;
        let size = encoder.len();
        let mut decoder = vec![String::new(); size];
        for (tok, &id) in &encoder {
            let slot = decoder
                .get_mut(id as usize)
                .ok_or_else(|| Error::Tokenizer(format!("id {id} of `{tok}` exceeds vocab size {size}")))?;
            *slot = tok.clone();
        }

        let mut merge_ranks = HashMap::new();
        for (line_no, line) in merges_txt.lines().enumerate() {
            if line.starts_with("#version") || line.trim().is_empty() {
                continue;
            }
            let (a, b) = line.split_once(' ').ok_or_else(|| {
                Error::Tokenizer(format!("merges.txt line {}: `{line}`", line_no + 1))
            })?;
            let rank = merge_ranks.len();
            merge_ranks.insert((a.to_string(), b.to_string()), rank);
        }

        let byte_to_char = byte_alphabet();
        let char_to_byte = byte_to_char
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect();

        Ok(Self {
            encoder,
            decoder,
            merge_ranks,
            byte_to_char,
            char_to_byte,
            pattern: Regex::new(PRETOKENIZE).expect("static pattern compiles"),
        })
    }

    /// Load `vocab.json` and `merges.txt` from a directory.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| Error::io(path, e))
        };
        Self::from_strings(&read("vocab.json")?, &read("merges.txt")?)
    }

    /// The standard GPT-2 vocabulary and merges, compiled into the crate.
    pub fn gpt2() -> Self {
        Self::from_strings(BUNDLED_VOCAB, BUNDLED_MERGES).expect("bundled GPT-2 assets are valid")
    }

    pub fn vocab_size(&self) -> usize {
        self.decoder.len()
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.encoder.get(token).copied()
    }

    pub fn end_of_text(&self) -> Option<u32> {
        self.token_id(END_OF_TEXT)
    }

    pub fn encode(&self, text: &str) -> TokenSequence {
        let mut ids = Vec::new();
        for piece in self.pattern.find_iter(text) {
            let piece = piece.expect("pre-tokenization pattern has bounded backtracking").as_str();
            let mapped: String = piece.bytes().map(|b| self.byte_to_char[b as usize]).collect();
            for sym in self.bpe(&mapped) {
                // Every single byte-char and every merge product is in the vocab.
                ids.push(self.encoder[&sym]);
            }
        }
        TokenSequence::new(ids)
    }

    fn bpe(&self, word: &str) -> Vec<String> {
        let mut parts: Vec<String> = word.chars().map(String::from).collect();
        while parts.len() > 1 {
            let best = parts
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    self.merge_ranks
                        .get(&(w[0].clone(), w[1].clone()))
                        .map(|&rank| (rank, i))
                })
                .min();
            let Some((_, at)) = best else { break };
            let (left, right) = (parts[at].clone(), parts[at + 1].clone());
            // Merge every occurrence of the pair, left to right.
            let mut merged = Vec::with_capacity(parts.len());
            let mut i = 0;
            while i < parts.len() {
                if i + 1 < parts.len() && parts[i] == left && parts[i + 1] == right {
                    merged.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut parts[i]));
                    i += 1;
                }
            }
            parts = merged;
        }
        parts
    }

    /// Raw bytes of a token sequence.
    pub fn decode_bytes(&self, ids: &[u32]) -> Vec<u8> {
        ids.iter()
            .filter_map(|&id| self.decoder.get(id as usize))
            .flat_map(|tok| tok.chars().filter_map(|c| self.char_to_byte.get(&c).copied()))
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        String::from_utf8_lossy(&self.decode_bytes(ids)).into_owned()
    }

    /// Human-readable label for one token (lossy for partial UTF-8).
    pub fn token_label(&self, id: u32) -> String {
        self.decode(&[id])
    }

    /// Id of `text` if it encodes to exactly one token.
    pub fn single_token(&self, text: &str) -> Result<u32> {
        let seq = self.encode(text);
        match seq.ids() {
            [id] => Ok(*id),
            ids => Err(Error::NotSingleToken {
                text: text.to_string(),
                n_tokens: ids.len(),
            }),
        }
    }
}
