//! Vocabulary construction and target encoding.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::corpus::manifest::Utterance;
use crate::error::{Error, Result};

/// The blank's on-disk spelling; it is not a transcript character.
pub const BLANK_SYMBOL: &str = "<blank>";

/// Ordered symbol set: blank at index 0, transcript characters sorted by code
/// point, then one `<xx>` LID symbol per language (sorted by code) when LID
/// is enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    blank: usize,
    char_index: BTreeMap<char, usize>,
    lid_index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Build from the transcript characters of `utterances`. With
    /// `lid_enabled`, every distinct language contributes an LID symbol.
    pub fn build(utterances: &[Utterance], lid_enabled: bool) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::Invalid(
                "cannot build a vocabulary from zero utterances".into(),
            ));
        }
        let mut chars: BTreeSet<char> = BTreeSet::new();
        let mut langs: BTreeSet<&str> = BTreeSet::new();
        for u in utterances {
            chars.extend(u.transcript.chars());
            langs.insert(&u.lang);
        }
        let mut symbols = Vec::with_capacity(1 + chars.len());
        symbols.push(BLANK_SYMBOL.to_string());
        let mut char_index = BTreeMap::new();
        for ch in chars {
            char_index.insert(ch, symbols.len());
            symbols.push(ch.to_string());
        }
        let mut lid_index = BTreeMap::new();
        if lid_enabled {
            for lang in langs {
                lid_index.insert(lang.to_string(), symbols.len());
                symbols.push(format!("<{lang}>"));
            }
        }
        Ok(Vocabulary {
            symbols,
            blank: 0,
            char_index,
            lid_index,
        })
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn blank_index(&self) -> usize {
        self.blank
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    pub fn char_index(&self, ch: char) -> Option<usize> {
        self.char_index.get(&ch).copied()
    }

    /// True when the vocabulary carries LID symbols.
    pub fn has_lid(&self) -> bool {
        !self.lid_index.is_empty()
    }

    pub fn lid_index(&self, lang: &str) -> Option<usize> {
        self.lid_index.get(lang).copied()
    }

    /// Language of an LID symbol index, if it is one.
    pub fn lid_lang(&self, index: usize) -> Option<&str> {
        self.lid_index
            .iter()
            .find(|(_, &i)| i == index)
            .map(|(lang, _)| lang.as_str())
    }

    pub fn is_lid(&self, index: usize) -> bool {
        self.lid_index.values().any(|&i| i == index)
    }

    /// Encode a transcript as vocabulary indices. When the vocabulary carries
    /// LID symbols the language's LID index is prepended; otherwise the
    /// result is character indices only.
    pub fn encode_target(&self, transcript: &str, lang: &str) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(transcript.chars().count() + 1);
        if self.has_lid() {
            let lid = self
                .lid_index(lang)
                .ok_or_else(|| Error::UnknownLanguage { lang: lang.into() })?;
            out.push(lid);
        }
        for (pos, ch) in transcript.chars().enumerate() {
            let idx = self.char_index(ch).ok_or(Error::UnknownCharacter {
                ch,
                position: pos + 1,
            })?;
            out.push(idx);
        }
        Ok(out)
    }

    /// Render decoded indices back to text; LID symbols and blanks are
    /// dropped. Unknown indices cannot occur for sequences produced by the
    /// decoder, but are skipped defensively here too.
    pub fn decode_to_string(&self, indices: &[usize]) -> String {
        let mut out = String::new();
        for &i in indices {
            if i == self.blank || self.is_lid(i) {
                continue;
            }
            if let Some(sym) = self.symbol(i) {
                out.push_str(sym);
            }
        }
        out
    }

    /// One symbol per line; the line number is the index.
    pub fn to_file_string(&self) -> String {
        let mut out = String::with_capacity(self.symbols.len() * 2);
        for s in &self.symbols {
            out.push_str(s);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let symbols: Vec<String> = raw.lines().map(str::to_string).collect();
        Self::from_symbols(symbols).map_err(|e| match e {
            Error::Invalid(msg) => Error::Invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Reconstruct from an ordered symbol list (the file format's contents).
    pub fn from_symbols(symbols: Vec<String>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Invalid("empty vocabulary".into()));
        }
        let mut seen = BTreeSet::new();
        let mut blank = None;
        let mut char_index = BTreeMap::new();
        let mut lid_index = BTreeMap::new();
        for (i, s) in symbols.iter().enumerate() {
            if !seen.insert(s.clone()) {
                return Err(Error::Invalid(format!("duplicate symbol `{s}` at index {i}")));
            }
            if s == BLANK_SYMBOL {
                blank = Some(i);
            } else if s.len() > 1 && s.starts_with('<') && s.ends_with('>') {
                lid_index.insert(s[1..s.len() - 1].to_string(), i);
            } else {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(ch), None) => {
                        char_index.insert(ch, i);
                    }
                    _ => {
                        return Err(Error::Invalid(format!(
                            "symbol `{s}` at index {i} is neither a single character, \
                             `{BLANK_SYMBOL}`, nor an LID symbol"
                        )))
                    }
                }
            }
        }
        let blank = blank.ok_or_else(|| Error::Invalid("vocabulary has no blank".into()))?;
        if blank != 0 {
            return Err(Error::Invalid(format!(
                "blank must sit at index 0, found at {blank}"
            )));
        }
        Ok(Vocabulary {
            symbols,
            blank,
            char_index,
            lid_index,
        })
    }
}
