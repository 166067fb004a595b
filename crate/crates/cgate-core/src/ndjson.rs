//! Streaming NDJSON corpus reader.
//!
//! One JSON object per line with `id`, `url`, `text`, and optionally
//! `token_count`. Lines that fail to parse or lack a required key are skipped
//! and counted, never fatal — corpus files in the wild always contain a few
//! damaged lines. Files ending in `.gz` are decompressed transparently
//! (multi-member gzip, the common shard-concatenation layout).

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tokenize::TokenizerConfig;

/// One corpus document. `token_count` is taken from the input when present,
/// otherwise computed with the reader's tokenizer. `raw_line` preserves the
/// exact input bytes so partitioned output files echo their source lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentRecord {
    pub id: String,
    pub url: String,
    pub text: String,
    pub token_count: u64,
    pub raw_line: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    /// Records successfully parsed and yielded.
    pub records: u64,
    /// Non-blank lines skipped as invalid JSON or missing required keys.
    pub skipped_invalid: u64,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    url: String,
    text: String,
    #[serde(default)]
    token_count: Option<u64>,
}

/// Streaming reader over an NDJSON corpus file.
pub struct NdjsonReader {
    input: Box<dyn BufRead + Send>,
    tokenizer: TokenizerConfig,
    stats: IngestStats,
    line_buf: String,
}

impl NdjsonReader {
    /// Open a plain or gzip-compressed (`.gz`) NDJSON file.
    pub fn open(path: &Path, tokenizer: TokenizerConfig) -> io::Result<Self> {
        let file = File::open(path)?;
        let input: Box<dyn BufRead + Send> =
            if path.extension().is_some_and(|e| e == "gz") {
                Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(file)))
            } else {
                Box::new(BufReader::new(file))
            };
        Ok(NdjsonReader {
            input,
            tokenizer,
            stats: IngestStats::default(),
            line_buf: String::new(),
        })
    }

    /// Reader over in-memory bytes; used by tests and by callers that already
    /// hold the data.
    pub fn from_reader<R: Read + Send + 'static>(reader: R, tokenizer: TokenizerConfig) -> Self {
        NdjsonReader {
            input: Box::new(BufReader::new(reader)),
            tokenizer,
            stats: IngestStats::default(),
            line_buf: String::new(),
        }
    }

    /// Next valid record, or `None` at end of input. Invalid lines are
    /// skipped and tallied in [`stats`](Self::stats); only I/O failures error.
    pub fn next_record(&mut self) -> io::Result<Option<DocumentRecord>> {
        loop {
            self.line_buf.clear();
            let n = self.input.read_line(&mut self.line_buf)?;
            if n == 0 {
                return Ok(None);
            }
            let line = self.line_buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<RawRecord>(line) {
                Ok(raw) => {
                    let token_count = raw
                        .token_count
                        .unwrap_or_else(|| self.tokenizer.count(&raw.text));
                    self.stats.records += 1;
                    return Ok(Some(DocumentRecord {
                        id: raw.id,
                        url: raw.url,
                        text: raw.text,
                        token_count,
                        raw_line: line.to_string(),
                    }));
                }
                Err(_) => {
                    self.stats.skipped_invalid += 1;
                }
            }
        }
    }

    /// Read everything that remains.
    pub fn collect_all(&mut self) -> io::Result<Vec<DocumentRecord>> {
        let mut out = Vec::new();
        while let Some(rec) = self.next_record()? {
            out.push(rec);
        }
        Ok(out)
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }
}
