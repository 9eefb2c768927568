//! Character vocabulary: `<pad>`, `<unk>`, the corpus characters in code
//! point order, then `<blank>`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

const PAD_LITERAL: &str = "<pad>";
const UNK_LITERAL: &str = "<unk>";
const BLANK_LITERAL: &str = "<blank>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Pad,
    Unk,
    Blank,
    Char(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Pad => f.write_str(PAD_LITERAL),
            Token::Unk => f.write_str(UNK_LITERAL),
            Token::Blank => f.write_str(BLANK_LITERAL),
            Token::Char(c) => write!(f, "{c}"),
        }
    }
}

/// Label ids of a transcription. Never contains pad or blank.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LabelSequence(Vec<usize>);

impl LabelSequence {
    pub fn new(ids: Vec<usize>, vocab: &Vocabulary) -> Result<Self> {
        for &id in &ids {
            if id >= vocab.len() {
                return Err(Error::IdOutOfRange {
                    id,
                    size: vocab.len(),
                });
            }
            if id == vocab.pad_id() || id == vocab.blank_id() {
                return Err(Error::InvalidArgument(format!(
                    "label sequence may not contain pad or blank (id {id})"
                )));
            }
        }
        Ok(Self(ids))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    index: HashMap<char, usize>,
}

impl Vocabulary {
    /// Builds from an ordered token list; pad and unk must come first and
    /// blank last.
    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self> {
        if tokens.len() < 3
            || tokens[PAD_ID] != Token::Pad
            || tokens[UNK_ID] != Token::Unk
            || tokens.last() != Some(&Token::Blank)
        {
            return Err(Error::Format(
                "vocabulary must start with <pad>, <unk> and end with <blank>".into(),
            ));
        }
        let mut index = HashMap::new();
        for (id, tok) in tokens.iter().enumerate().skip(2).take(tokens.len() - 3) {
            match tok {
                Token::Char(c) => {
                    if index.insert(*c, id).is_some() {
                        return Err(Error::Format(format!("duplicate token {c:?}")));
                    }
                }
                other => {
                    return Err(Error::Format(format!("special token {other} at id {id}")))
                }
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pad_id(&self) -> usize {
        PAD_ID
    }

    pub fn unk_id(&self) -> usize {
        UNK_ID
    }

    pub fn blank_id(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn id_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    /// One token per line, specials as `<pad>`, `<unk>`, `<blank>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for tok in &self.tokens {
            out.push_str(&tok.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let tokens = body
            .split('\n')
            .enumerate()
            .map(|(i, line)| match line {
                PAD_LITERAL => Ok(Token::Pad),
                UNK_LITERAL => Ok(Token::Unk),
                BLANK_LITERAL => Ok(Token::Blank),
                _ => {
                    let mut chars = line.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => Ok(Token::Char(c)),
                        _ => Err(Error::Format(format!(
                            "vocabulary line {}: expected one character, got {line:?}",
                            i + 1
                        ))),
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_tokens(tokens)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// `[pad, unk] ++ sorted unique characters ++ [blank]`.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S]) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Empty("vocabulary corpus"));
    }
    let chars: BTreeSet<char> = corpus.iter().flat_map(|t| t.as_ref().chars()).collect();
    let mut tokens = Vec::with_capacity(chars.len() + 3);
    tokens.push(Token::Pad);
    tokens.push(Token::Unk);
    tokens.extend(chars.into_iter().map(Token::Char));
    tokens.push(Token::Blank);
    Vocabulary::from_tokens(tokens)
}

/// One id per scalar value; unknown characters map to `<unk>`.
pub fn encode(text: &str, vocab: &Vocabulary) -> LabelSequence {
    LabelSequence(
        text.chars()
            .map(|c| vocab.id_of(c).unwrap_or(UNK_ID))
            .collect(),
    )
}

/// Pad and blank render as nothing, unk as U+FFFD.
pub fn decode_ids(ids: &[usize], vocab: &Vocabulary) -> Result<String> {
    let mut out = String::with_capacity(ids.len());
    for &id in ids {
        match vocab.tokens.get(id) {
            None => {
                return Err(Error::IdOutOfRange {
                    id,
                    size: vocab.len(),
                })
            }
            Some(Token::Pad | Token::Blank) => {}
            Some(Token::Unk) => out.push(char::REPLACEMENT_CHARACTER),
            Some(Token::Char(c)) => out.push(*c),
        }
    }
    Ok(out)
}
