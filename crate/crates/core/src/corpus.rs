//! Tokenized sentence streams and exact word counts.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Pseudo-sentence length used when a corpus has no line breaks (text8).
pub const DEFAULT_MAX_SENTENCE_LEN: usize = 1000;

/// An ordered list of lowercase, whitespace-free, non-empty tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    /// Builds a sentence, rejecting empty tokens and tokens with whitespace.
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        for t in &tokens {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::EmptyWord);
            }
        }
        Ok(Sentence { tokens })
    }

    /// Splits `text` on ASCII whitespace and lowercases each token.
    pub fn from_text(text: &str) -> Self {
        Sentence {
            tokens: text
                .split_ascii_whitespace()
                .map(str::to_lowercase)
                .collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

/// Streaming sentence reader.
///
/// Tokens are split on ASCII whitespace and lowercased; a newline ends a
/// sentence and long sentences are cut into chunks of `max_len` tokens.
/// The source is scanned incrementally, so a single 100 MB line costs no
/// more memory than one sentence.
pub struct SentenceReader<R> {
    source: R,
    max_len: usize,
    token: Vec<u8>,
    pending: Vec<String>,
    offset: u64,
    token_start: u64,
    done: bool,
}

/// Returns an iterator over the sentences of `source`.
pub fn read_sentences<R: BufRead>(source: R, max_sentence_len: usize) -> Result<SentenceReader<R>> {
    if max_sentence_len == 0 {
        return Err(Error::Config("max_sentence_len must be at least 1".into()));
    }
    Ok(SentenceReader {
        source,
        max_len: max_sentence_len,
        token: Vec::new(),
        pending: Vec::new(),
        offset: 0,
        token_start: 0,
        done: false,
    })
}

impl<R: BufRead> SentenceReader<R> {
    fn flush_token(&mut self) -> Result<()> {
        if self.token.is_empty() {
            return Ok(());
        }
        // ASCII whitespace never occurs inside a multi-byte sequence, so
        // validating token by token validates the whole stream.
        let word = std::str::from_utf8(&self.token).map_err(|e| Error::Encoding {
            offset: self.token_start + e.valid_up_to() as u64,
        })?;
        self.pending.push(word.to_lowercase());
        self.token.clear();
        Ok(())
    }

    fn take_sentence(&mut self) -> Sentence {
        Sentence {
            tokens: std::mem::take(&mut self.pending),
        }
    }

    fn next_sentence(&mut self) -> Result<Option<Sentence>> {
        loop {
            if self.pending.len() >= self.max_len {
                let rest = self.pending.split_off(self.max_len);
                let full = std::mem::replace(&mut self.pending, rest);
                return Ok(Some(Sentence { tokens: full }));
            }
            if self.done {
                if self.pending.is_empty() {
                    return Ok(None);
                }
                return Ok(Some(self.take_sentence()));
            }
            let (consumed, delimiter) = {
                let buf = self.source.fill_buf()?;
                if buf.is_empty() {
                    (0, None)
                } else {
                    let end = buf.iter().position(u8::is_ascii_whitespace);
                    let piece = &buf[..end.unwrap_or(buf.len())];
                    if !piece.is_empty() && self.token.is_empty() {
                        self.token_start = self.offset;
                    }
                    self.token.extend_from_slice(piece);
                    match end {
                        Some(j) => (j + 1, Some(buf[j])),
                        None => (buf.len(), None),
                    }
                }
            };
            if consumed == 0 {
                self.done = true;
                self.flush_token()?;
                continue;
            }
            self.source.consume(consumed);
            self.offset += consumed as u64;
            if let Some(ws) = delimiter {
                self.flush_token()?;
                if ws == b'\n' && !self.pending.is_empty() && self.pending.len() <= self.max_len {
                    return Ok(Some(self.take_sentence()));
                }
            }
        }
    }
}

impl<R: BufRead> Iterator for SentenceReader<R> {
    type Item = Result<Sentence>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.next_sentence() {
            Ok(Some(s)) => Some(Ok(s)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                self.pending.clear();
                self.token.clear();
                Some(Err(e))
            }
        }
    }
}

/// Exact per-type token counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountTable {
    entries: HashMap<String, u64>,
    total: u64,
}

impl CountTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: &str) {
        match self.entries.get_mut(word) {
            Some(c) => *c += 1,
            None => {
                self.entries.insert(word.to_owned(), 1);
            }
        }
        self.total += 1;
    }

    pub fn add_sentence(&mut self, sentence: &Sentence) {
        for t in sentence.tokens() {
            self.add(t);
        }
    }

    pub fn get(&self, word: &str) -> Option<u64> {
        self.entries.get(word).copied()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// Writes `word\tcount` lines in rank order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (w, c) in rank_by_frequency(self) {
            writeln!(out, "{w}\t{c}")?;
        }
        out.flush()?;
        Ok(())
    }
}

impl<'a> FromIterator<&'a str> for CountTable {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        let mut t = CountTable::new();
        for w in iter {
            t.add(w);
        }
        t
    }
}

/// Counts every token in `source` exactly.
pub fn exact_counts<R: BufRead>(source: R) -> Result<CountTable> {
    let mut table = CountTable::new();
    for sentence in read_sentences(source, DEFAULT_MAX_SENTENCE_LEN)? {
        table.add_sentence(&sentence?);
    }
    Ok(table)
}

/// Descending by count, ties broken by ascending word.
pub fn rank_by_frequency(table: &CountTable) -> Vec<(String, u64)> {
    let mut ranked: Vec<(String, u64)> = table.iter().map(|(w, c)| (w.to_owned(), c)).collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(text: &[u8], max_len: usize) -> Vec<Vec<String>> {
        read_sentences(text, max_len)
            .unwrap()
            .map(|s| s.unwrap().into_tokens())
            .collect()
    }

    #[test]
    fn lowercases_and_splits() {
        assert_eq!(sentences(b"The cat sat\n", 1000), vec![vec!["the", "cat", "sat"]]);
    }

    #[test]
    fn chunks_long_sentences() {
        assert_eq!(sentences(b"a b c d", 2), vec![vec!["a", "b"], vec!["c", "d"]]);
        assert_eq!(sentences(b"a b c d e\nf", 2), vec![vec!["a", "b"], vec!["c", "d"], vec!["e"], vec!["f"]]);
    }

    #[test]
    fn blank_lines_are_skipped() {
        assert!(sentences(b"\n\n", 10).is_empty());
        assert!(sentences(b"", 10).is_empty());
        assert_eq!(sentences(b"\n x  y \n\n\tz\n", 10), vec![vec!["x", "y"], vec!["z"]]);
    }

    #[test]
    fn newline_ends_sentence_even_without_trailing_space() {
        assert_eq!(sentences(b"a\nb", 10), vec![vec!["a"], vec!["b"]]);
        assert_eq!(sentences(b"a b\r\nc", 10), vec![vec!["a", "b"], vec!["c"]]);
    }

    #[test]
    fn small_buffer_reads_match() {
        let text = b"one two three\nfour five six seven\n eight";
        let small = std::io::BufReader::with_capacity(3, &text[..]);
        let got: Vec<_> = read_sentences(small, 3).unwrap().map(|s| s.unwrap().into_tokens()).collect();
        assert_eq!(got, sentences(text, 3));
        assert_eq!(got.len(), 4);
    }

    #[test]
    fn invalid_utf8_is_an_error() {
        let bytes: &[u8] = b"ok \xff\xfe bad";
        let results: Vec<_> = read_sentences(bytes, 10).unwrap().collect();
        assert!(matches!(results.last(), Some(Err(Error::Encoding { offset: 3 }))));
    }

    #[test]
    fn unicode_lowercasing() {
        assert_eq!(sentences("Élan ÜBER".as_bytes(), 10), vec![vec!["élan", "über"]]);
    }

    #[test]
    fn counts_and_ranks() {
        let t = exact_counts(&b"a b a"[..]).unwrap();
        assert_eq!(t.get("a"), Some(2));
        assert_eq!(t.get("b"), Some(1));
        assert_eq!(t.total(), 3);
        assert_eq!(rank_by_frequency(&t), vec![("a".into(), 2), ("b".into(), 1)]);

        let empty = exact_counts(&b""[..]).unwrap();
        assert_eq!(empty.total(), 0);
        assert!(rank_by_frequency(&empty).is_empty());

        let tie = exact_counts(&b"b a"[..]).unwrap();
        assert_eq!(rank_by_frequency(&tie), vec![("a".into(), 1), ("b".into(), 1)]);
    }

    #[test]
    fn sentence_new_validates() {
        assert!(Sentence::new(["a", "b"]).is_ok());
        assert!(Sentence::new(["a", ""]).is_err());
        assert!(Sentence::new(["a b"]).is_err());
    }

    #[test]
    fn tsv_in_rank_order() {
        let t = exact_counts(&b"z y z x"[..]).unwrap();
        let mut out = Vec::new();
        t.write_tsv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "z\t2\nx\t1\ny\t1\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reader_preserves_token_multiset(words in prop::collection::vec("[a-d]{1,3}", 0..60),
                                               seps in prop::collection::vec(prop::sample::select(vec![" ", "  ", "\n", "\t", " \n "]), 0..60),
                                               max_len in 1usize..7) {
                let mut text = String::new();
                for (i, w) in words.iter().enumerate() {
                    text.push_str(w);
                    text.push_str(seps.get(i).copied().unwrap_or(" "));
                }
                let sents: Vec<Sentence> = read_sentences(text.as_bytes(), max_len).unwrap().map(|s| s.unwrap()).collect();
                let flat: Vec<&str> = sents.iter().flat_map(|s| s.tokens().iter().map(String::as_str)).collect();
                let expect: Vec<&str> = words.iter().map(String::as_str).collect();
                prop_assert_eq!(&flat, &expect);
                for s in &sents {
                    prop_assert!(!s.is_empty() && s.len() <= max_len);
                }
                let table = exact_counts(text.as_bytes()).unwrap();
                let ranked = rank_by_frequency(&table);
                prop_assert_eq!(ranked.iter().map(|(_, c)| c).sum::<u64>(), table.total());
                prop_assert_eq!(table.total() as usize, words.len());
            }
        }
    }
}
