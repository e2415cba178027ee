//! Line-oriented N-Triples reader and writer.

use std::io::{BufRead, Write};

use super::term::{Iri, Literal, Term, Triple};
use super::KgError;

/// Parses N-Triples text. Blank lines and `#` comment lines are skipped.
pub fn parse<R: BufRead>(reader: R) -> Result<Vec<Triple>, KgError> {
    let mut triples = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = index + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let triple = parse_line(trimmed).map_err(|message| KgError::Parse { line: lineno, message })?;
        triples.push(triple);
    }
    Ok(triples)
}

pub fn parse_str(text: &str) -> Result<Vec<Triple>, KgError> {
    parse(text.as_bytes())
}

pub fn write<'a, W: Write>(mut out: W, triples: impl IntoIterator<Item = &'a Triple>) -> std::io::Result<()> {
    for t in triples {
        writeln!(out, "{t}")?;
    }
    Ok(())
}

fn parse_line(line: &str) -> Result<Triple, String> {
    let mut cursor = Cursor { rest: line };
    let subject = match cursor.term()? {
        Term::Iri(iri) => iri,
        Term::Literal(_) => return Err("subject must be an IRI".into()),
    };
    let predicate = match cursor.term()? {
        Term::Iri(iri) => iri,
        Term::Literal(_) => return Err("predicate must be an IRI".into()),
    };
    let object = cursor.term()?;
    cursor.skip_ws();
    let Some(after_dot) = cursor.rest.strip_prefix('.') else {
        return Err("expected '.' terminating the triple".into());
    };
    let after_dot = after_dot.trim_start();
    if !(after_dot.is_empty() || after_dot.starts_with('#')) {
        return Err(format!("unexpected trailing content {after_dot:?}"));
    }
    Ok(Triple { subject, predicate, object })
}

struct Cursor<'a> {
    rest: &'a str,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start_matches([' ', '\t']);
    }

    fn term(&mut self) -> Result<Term, String> {
        self.skip_ws();
        match self.rest.chars().next() {
            Some('<') => self.iri().map(Term::Iri),
            Some('"') => self.literal().map(Term::Literal),
            Some('_') => Err("blank nodes are not supported".into()),
            Some(c) => Err(format!("unexpected character {c:?}")),
            None => Err("unexpected end of line".into()),
        }
    }

    fn iri(&mut self) -> Result<Iri, String> {
        let body = &self.rest[1..];
        let end = body.find('>').ok_or("unterminated IRI")?;
        let raw = unescape(&body[..end])?;
        self.rest = &body[end + 1..];
        Iri::new(raw).map_err(|e| e.to_string())
    }

    fn literal(&mut self) -> Result<Literal, String> {
        let body = &self.rest[1..];
        let mut end = None;
        let mut escaped = false;
        for (i, c) in body.char_indices() {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => {
                    end = Some(i);
                    break;
                }
                _ => {}
            }
        }
        let end = end.ok_or("unterminated literal")?;
        let lexical = unescape(&body[..end])?;
        self.rest = &body[end + 1..];
        if let Some(after) = self.rest.strip_prefix("^^") {
            self.rest = after;
            if !self.rest.starts_with('<') {
                return Err("datatype must be an IRI".into());
            }
            let dt = self.iri()?;
            Ok(Literal::typed(lexical, dt))
        } else if let Some(after) = self.rest.strip_prefix('@') {
            let len = after
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
                .unwrap_or(after.len());
            if len == 0 {
                return Err("empty language tag".into());
            }
            self.rest = &after[len..];
            Ok(Literal::lang(lexical, &after[..len]))
        } else {
            Ok(Literal::plain(lexical))
        }
    }
}

fn unescape(s: &str) -> Result<String, String> {
    if !s.contains('\\') {
        return Ok(s.to_string());
    }
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('b') => out.push('\u{8}'),
            Some('f') => out.push('\u{c}'),
            Some('"') => out.push('"'),
            Some('\'') => out.push('\''),
            Some('\\') => out.push('\\'),
            Some(u @ ('u' | 'U')) => {
                let width = if u == 'u' { 4 } else { 8 };
                let hex: String = chars.by_ref().take(width).collect();
                let code = u32::from_str_radix(&hex, 16)
                    .ok()
                    .filter(|_| hex.len() == width)
                    .and_then(char::from_u32)
                    .ok_or_else(|| format!("bad unicode escape \\{u}{hex}"))?;
                out.push(code);
            }
            other => return Err(format!("bad escape \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}
