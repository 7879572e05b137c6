//! Control-command grammar: parsing, rendering, a bag-of-tokens similarity
//! metric, the toy whitespace tokenizer shared with the model, and the
//! tab-separated sensor/command dataset format.
//!
//! Grammar (EBNF, case-insensitive, whitespace-insensitive):
//!
//! ```text
//! command   = verb , [ "," modifier { "," modifier } ] ;
//! verb      = "move to position (" number "," number "," number ")"
//!             "at" number "m/s"
//!           | "hold"
//!           | "return home"
//!           | "scan area"
//!           | "follow leader at" number "m/s" ;
//! modifier  = "maintain formation spacing" | "avoid obstacle" | "low power" ;
//! number    = [ "-" ] digits [ "." digits ] ;
//! ```

use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

/// Ceiling for commanded speeds, m/s.
pub const V_MAX: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verb {
    MoveTo,
    Hold,
    ReturnHome,
    Scan,
    Follow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modifier {
    MaintainFormation,
    AvoidObstacle,
    LowPower,
}

/// A parsed control command. `position` is only present for `MoveTo`
/// (z negative means altitude above ground); `speed` is zero for verbs
/// whose surface form carries no speed.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandAst {
    pub verb: Verb,
    pub position: Option<[f64; 3]>,
    pub speed: f64,
    pub modifiers: BTreeSet<Modifier>,
}

impl CommandAst {
    pub fn hold() -> CommandAst {
        CommandAst {
            verb: Verb::Hold,
            position: None,
            speed: 0.0,
            modifiers: BTreeSet::new(),
        }
    }

    pub fn move_to(position: [f64; 3], speed: f64) -> CommandAst {
        CommandAst {
            verb: Verb::MoveTo,
            position: Some(position),
            speed,
            modifiers: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(f64),
    LParen,
    RParen,
    Comma,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            out.push((Tok::LParen, i));
            i += 1;
        } else if c == ')' {
            out.push((Tok::RParen, i));
            i += 1;
        } else if c == ',' {
            out.push((Tok::Comma, i));
            i += 1;
        } else if c.is_ascii_digit() || c == '-' || c == '+' {
            let start = i;
            i += 1;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.')
            {
                i += 1;
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| Error::Parse {
                offset: start,
                msg: format!("bad number literal '{lit}'"),
            })?;
            out.push((Tok::Number(v), start));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'/')
            {
                i += 1;
            }
            out.push((Tok::Word(text[start..i].to_ascii_lowercase()), start));
        } else {
            return Err(Error::Parse {
                offset: i,
                msg: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn offset(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.1)
    }

    fn peek_word(&self) -> Option<&str> {
        match self.toks.get(self.at) {
            Some((Tok::Word(w), _)) => Some(w),
            _ => None,
        }
    }

    fn word(&mut self, want: &str) -> Result<()> {
        if self.peek_word() == Some(want) {
            self.at += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                offset: self.offset(),
                msg: format!("expected '{want}'"),
            })
        }
    }

    fn tok(&mut self, want: Tok, name: &str) -> Result<()> {
        if self.toks.get(self.at).map(|t| &t.0) == Some(&want) {
            self.at += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                offset: self.offset(),
                msg: format!("expected '{name}'"),
            })
        }
    }

    fn number(&mut self) -> Result<f64> {
        match self.toks.get(self.at) {
            Some((Tok::Number(v), _)) => {
                self.at += 1;
                Ok(*v)
            }
            _ => Err(Error::Parse {
                offset: self.offset(),
                msg: "expected a number".into(),
            }),
        }
    }

    fn modifiers(&mut self) -> Result<BTreeSet<Modifier>> {
        let mut mods = BTreeSet::new();
        while self.toks.get(self.at).map(|t| &t.0) == Some(&Tok::Comma) {
            self.at += 1;
            let m = match self.peek_word() {
                Some("maintain") => {
                    self.at += 1;
                    self.word("formation")?;
                    self.word("spacing")?;
                    Modifier::MaintainFormation
                }
                Some("avoid") => {
                    self.at += 1;
                    self.word("obstacle")?;
                    Modifier::AvoidObstacle
                }
                Some("low") => {
                    self.at += 1;
                    self.word("power")?;
                    Modifier::LowPower
                }
                _ => {
                    return Err(Error::Parse {
                        offset: self.offset(),
                        msg: "expected a modifier".into(),
                    })
                }
            };
            mods.insert(m);
        }
        Ok(mods)
    }
}

/// Parses a command string into its AST. Case- and whitespace-insensitive;
/// rejects anything outside the grammar with the byte offset of the first
/// offending token, and out-of-range speeds as validation errors.
pub fn parse_command(text: &str) -> Result<CommandAst> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
    };
    let (verb, position, speed) = match p.peek_word() {
        Some("move") => {
            p.at += 1;
            p.word("to")?;
            p.word("position")?;
            p.tok(Tok::LParen, "(")?;
            let x = p.number()?;
            p.tok(Tok::Comma, ",")?;
            let y = p.number()?;
            p.tok(Tok::Comma, ",")?;
            let z = p.number()?;
            p.tok(Tok::RParen, ")")?;
            p.word("at")?;
            let s = p.number()?;
            p.word("m/s")?;
            (Verb::MoveTo, Some([x, y, z]), s)
        }
        Some("hold") => {
            p.at += 1;
            (Verb::Hold, None, 0.0)
        }
        Some("return") => {
            p.at += 1;
            p.word("home")?;
            (Verb::ReturnHome, None, 0.0)
        }
        Some("scan") => {
            p.at += 1;
            p.word("area")?;
            (Verb::Scan, None, 0.0)
        }
        Some("follow") => {
            p.at += 1;
            p.word("leader")?;
            p.word("at")?;
            let s = p.number()?;
            p.word("m/s")?;
            (Verb::Follow, None, s)
        }
        _ => {
            return Err(Error::Parse {
                offset: p.offset(),
                msg: "expected a command verb".into(),
            })
        }
    };
    let modifiers = p.modifiers()?;
    if p.at != p.toks.len() {
        return Err(Error::Parse {
            offset: p.offset(),
            msg: "trailing input after command".into(),
        });
    }
    if !(0.0..=V_MAX).contains(&speed) {
        return Err(Error::Validation(format!(
            "speed {speed} outside [0, {V_MAX}] m/s"
        )));
    }
    Ok(CommandAst {
        verb,
        position,
        speed,
        modifiers,
    })
}

/// Renders an AST back to its canonical surface form;
/// `parse_command(render_command(ast)) == ast`.
pub fn render_command(ast: &CommandAst) -> String {
    let mut s = String::new();
    match ast.verb {
        Verb::MoveTo => {
            let p = ast.position.unwrap_or_default();
            write!(
                s,
                "move to position ({}, {}, {}) at {} m/s",
                p[0], p[1], p[2], ast.speed
            )
            .unwrap();
        }
        Verb::Hold => s.push_str("hold"),
        Verb::ReturnHome => s.push_str("return home"),
        Verb::Scan => s.push_str("scan area"),
        Verb::Follow => {
            write!(s, "follow leader at {} m/s", ast.speed).unwrap();
        }
    }
    for m in &ast.modifiers {
        s.push_str(match m {
            Modifier::MaintainFormation => ", maintain formation spacing",
            Modifier::AvoidObstacle => ", avoid obstacle",
            Modifier::LowPower => ", low power",
        });
    }
    s
}

fn bag_tokens(text: &str) -> Vec<String> {
    text.to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Term-frequency cosine over lowercase alphanumeric tokens, in `[0, 1]`.
/// Either side empty gives 0 by convention.
pub fn token_cosine_similarity(a: &str, b: &str) -> f64 {
    use std::collections::HashMap;
    let count = |text: &str| -> HashMap<String, f64> {
        let mut m = HashMap::new();
        for t in bag_tokens(text) {
            *m.entry(t).or_insert(0.0) += 1.0;
        }
        m
    };
    let (ca, cb) = (count(a), count(b));
    if ca.is_empty() || cb.is_empty() {
        return 0.0;
    }
    let dot: f64 = ca
        .iter()
        .filter_map(|(t, &va)| cb.get(t).map(|&vb| va * vb))
        .sum();
    let norm = |m: &HashMap<String, f64>| m.values().map(|v| v * v).sum::<f64>().sqrt();
    dot / (norm(&ca) * norm(&cb))
}

/// The toy model's fixed 64-word vocabulary: every surface token the
/// command grammar can emit, digits for numbers, and a handful of sensor
/// report words. Index = token id; index 0 is the unknown-word token.
pub const VOCAB: [&str; 64] = [
    "<unk>", "move", "to", "position", "at", "m/s", "hold", "return", "home", "scan", "area",
    "follow", "leader", "maintain", "formation", "spacing", "avoid", "obstacle", "low", "power",
    "(", ")", ",", ".", "-", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "uav", "battery",
    "visibility", "wind", "target", "clear", "north", "south", "east", "west", "percent",
    "status", "report", "sector", "contact", "meters", "heading", "range", "signal", "camera",
    "zone", "alert", "nominal", "holding", "link", "altitude", "speed", "visual", "waypoint",
];

/// Token ids for a text: lowercase, whitespace-split, with parentheses,
/// commas and the characters of numbers emitted as individual tokens.
/// Unknown words map to id 0.
pub fn tokenize(text: &str) -> Vec<usize> {
    let id = |w: &str| VOCAB.iter().position(|&v| v == w).unwrap_or(0);
    let mut out = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<usize>| {
        if !word.is_empty() {
            out.push(id(word));
            word.clear();
        }
    };
    for c in text.to_ascii_lowercase().chars() {
        match c {
            'a'..='z' | '/' => word.push(c),
            '0'..='9' | '(' | ')' | ',' | '-' | '.' => {
                flush(&mut word, &mut out);
                out.push(id(&c.to_string()));
            }
            _ => flush(&mut word, &mut out),
        }
    }
    flush(&mut word, &mut out);
    if out.is_empty() {
        // no recognizable tokens at all; still give the model a prompt
        out.push(0);
    }
    out
}

/// Inverse of [`tokenize`] up to spacing: words joined by single spaces.
pub fn detokenize(ids: &[usize]) -> String {
    ids.iter()
        .map(|&i| VOCAB.get(i).copied().unwrap_or("<unk>"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Loads a sensor/command pair dataset: one record per line, sensor text
/// and command text separated by a single tab, UTF-8.
pub fn load_dataset(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((sensor, command)) = line.split_once('\t') else {
            return Err(Error::Format(format!(
                "line {}: expected sensor<TAB>command",
                lineno + 1
            )));
        };
        out.push((sensor.to_owned(), command.to_owned()));
    }
    Ok(out)
}
