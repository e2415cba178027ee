//! Invertible mapping between queries and flat token sequences.
//!
//! Keywords are lowercased, punctuation is spelled out (`brack_open`,
//! `par_close`, `sep_dot`, ...), variables become `var_<name>`, IRIs become
//! `<prefix>_<local>`, literals become `lit_<escaped lexical form>` and
//! template slots keep their `<A>` marker. LIMIT/OFFSET values are bare
//! digit tokens.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{CompareOp, Filter, OrderBy, PatternTerm, QueryForm, SparqlQuery, TriplePattern};
use super::CodecError;
use crate::kg::{Literal, PrefixTable};

/// A whitespace-free token sequence over the codec alphabet.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn parse_line(line: &str) -> Self {
        TokenSeq(line.split_whitespace().map(str::to_string).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl From<Vec<String>> for TokenSeq {
    fn from(tokens: Vec<String>) -> Self {
        TokenSeq(tokens)
    }
}

const BRACK_OPEN: &str = "brack_open";
const BRACK_CLOSE: &str = "brack_close";
const PAR_OPEN: &str = "par_open";
const PAR_CLOSE: &str = "par_close";
const SEP_DOT: &str = "sep_dot";
const VAR: &str = "var_";
const LIT: &str = "lit_";

fn op_token(op: CompareOp) -> &'static str {
    match op {
        CompareOp::Lt => "math_lt",
        CompareOp::Gt => "math_gt",
        CompareOp::Eq => "math_eq",
    }
}

/// True for tokens that name an entity or a literal value, as opposed to
/// structure, variables or properties. Used to mask entities when scoring
/// query shape.
pub fn is_entity_token(token: &str) -> bool {
    token.starts_with(LIT) || token.starts_with("dbr_")
}

/// True for IRI and literal tokens (everything carrying KG content).
pub fn is_content_token(token: &str) -> bool {
    token.starts_with(LIT) || (is_iri_token(token))
}

fn is_iri_token(token: &str) -> bool {
    const STRUCTURAL: &[&str] = &[BRACK_OPEN, BRACK_CLOSE, PAR_OPEN, PAR_CLOSE, SEP_DOT, "math_lt", "math_gt", "math_eq"];
    token.contains('_') && !token.starts_with(VAR) && !token.starts_with(LIT) && !STRUCTURAL.contains(&token)
}

pub fn encode(q: &SparqlQuery, prefixes: &PrefixTable) -> Result<TokenSeq, CodecError> {
    q.validate().map_err(CodecError::Unsupported)?;
    let mut out: Vec<String> = Vec::new();
    let mut push = |t: &str| out.push(t.to_string());
    match q.form {
        QueryForm::Ask => push("ask"),
        QueryForm::Select => {
            push("select");
            if q.distinct {
                push("distinct");
            }
            if let Some(c) = &q.count {
                push("count");
                push(PAR_OPEN);
                push(&format!("{VAR}{c}"));
                push(PAR_CLOSE);
            }
            for v in &q.projection {
                push(&format!("{VAR}{v}"));
            }
        }
    }
    push("where");
    push(BRACK_OPEN);
    let mut first = true;
    for p in &q.patterns {
        if !first {
            out.push(SEP_DOT.to_string());
        }
        first = false;
        for t in p.terms() {
            out.push(term_token(t, prefixes)?);
        }
    }
    for f in &q.filters {
        if !first {
            out.push(SEP_DOT.to_string());
        }
        first = false;
        out.extend(["filter".to_string(), PAR_OPEN.to_string(), format!("{VAR}{}", f.var)]);
        out.push(op_token(f.op).to_string());
        out.push(term_token(&f.value, prefixes)?);
        out.push(PAR_CLOSE.to_string());
    }
    out.push(BRACK_CLOSE.to_string());
    if let Some(o) = &q.order_by {
        out.extend(
            ["order", "by", if o.descending { "desc" } else { "asc" }, PAR_OPEN]
                .into_iter()
                .map(str::to_string),
        );
        out.push(format!("{VAR}{}", o.var));
        out.push(PAR_CLOSE.to_string());
    }
    if let Some(n) = q.limit {
        out.extend(["limit".to_string(), n.to_string()]);
    }
    if let Some(n) = q.offset {
        out.extend(["offset".to_string(), n.to_string()]);
    }
    Ok(TokenSeq(out))
}

fn term_token(t: &PatternTerm, prefixes: &PrefixTable) -> Result<String, CodecError> {
    match t {
        PatternTerm::Var(v) => {
            if v.is_empty() || !v.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(CodecError::Unsupported(format!("variable name {v:?}")));
            }
            Ok(format!("{VAR}{v}"))
        }
        PatternTerm::Iri(iri) => {
            let (p, local) = prefixes
                .compress(iri)
                .ok_or_else(|| CodecError::UnprefixableIri(iri.as_str().to_string()))?;
            Ok(format!("{p}_{local}"))
        }
        PatternTerm::Slot(s) => Ok(format!("<{s}>")),
        PatternTerm::Literal(lit) => Ok(format!("{LIT}{}", escape_literal(&lit.lexical)?)),
    }
}

/// Spaces become `_` and underscores `__`. Forms where that is ambiguous
/// (an underscore next to a space, or other whitespace) are rejected.
fn escape_literal(lexical: &str) -> Result<String, CodecError> {
    if lexical.contains("_ ") || lexical.contains(" _") || lexical.chars().any(|c| c.is_whitespace() && c != ' ') {
        return Err(CodecError::Unsupported(format!("literal {lexical:?} cannot be tokenized unambiguously")));
    }
    Ok(lexical.replace('_', "__").replace(' ', "_"))
}

fn unescape_literal(escaped: &str) -> String {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '_' {
            if chars.peek() == Some(&'_') {
                chars.next();
                out.push('_');
            } else {
                out.push(' ');
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Parses a token sequence back into a query in a single left-to-right pass.
/// Literal datatypes are restored from the lexical form.
pub fn decode(seq: &TokenSeq, prefixes: &PrefixTable) -> Result<SparqlQuery, CodecError> {
    let mut d = Decoder { tokens: &seq.0, pos: 0, prefixes };
    let q = d.query()?;
    if d.pos != d.tokens.len() {
        return d.fail("end of sequence");
    }
    if let Err(message) = q.validate() {
        return Err(CodecError::Decode { position: d.tokens.len(), expected: message });
    }
    Ok(q)
}

struct Decoder<'a> {
    tokens: &'a [String],
    pos: usize,
    prefixes: &'a PrefixTable,
}

impl Decoder<'_> {
    fn fail<T>(&self, expected: &str) -> Result<T, CodecError> {
        Err(CodecError::Decode { position: self.pos, expected: expected.to_string() })
    }

    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn accept(&mut self, tok: &str) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), CodecError> {
        if self.accept(tok) {
            Ok(())
        } else {
            self.fail(tok)
        }
    }

    fn var(&mut self) -> Result<String, CodecError> {
        match self.peek().and_then(|t| t.strip_prefix(VAR)) {
            Some(name) if !name.is_empty() => {
                let name = name.to_string();
                self.pos += 1;
                Ok(name)
            }
            _ => self.fail("variable"),
        }
    }

    fn number(&mut self) -> Result<u64, CodecError> {
        match self.peek().filter(|t| t.bytes().all(|b| b.is_ascii_digit())).and_then(|t| t.parse().ok()) {
            Some(n) => {
                self.pos += 1;
                Ok(n)
            }
            None => self.fail("integer"),
        }
    }

    fn query(&mut self) -> Result<SparqlQuery, CodecError> {
        let mut q = if self.accept("ask") {
            SparqlQuery::ask(Vec::new())
        } else if self.accept("select") {
            let mut q = SparqlQuery::select(&[], Vec::new());
            q.distinct = self.accept("distinct");
            if self.accept("count") {
                self.expect(PAR_OPEN)?;
                q.count = Some(self.var()?);
                self.expect(PAR_CLOSE)?;
            } else {
                q.projection.push(self.var()?);
                while self.peek().is_some_and(|t| t.starts_with(VAR)) {
                    q.projection.push(self.var()?);
                }
            }
            q
        } else {
            return self.fail("select or ask");
        };
        self.expect("where")?;
        self.expect(BRACK_OPEN)?;
        if !self.accept(BRACK_CLOSE) {
            loop {
                if self.accept("filter") {
                    self.expect(PAR_OPEN)?;
                    let var = self.var()?;
                    let op = match self.peek() {
                        Some("math_lt") => CompareOp::Lt,
                        Some("math_gt") => CompareOp::Gt,
                        Some("math_eq") => CompareOp::Eq,
                        _ => return self.fail("comparison operator"),
                    };
                    self.pos += 1;
                    let value = self.term()?;
                    if matches!(value, PatternTerm::Var(_)) {
                        self.pos -= 1;
                        return self.fail("constant");
                    }
                    self.expect(PAR_CLOSE)?;
                    q.filters.push(Filter { var, op, value });
                } else {
                    if !q.filters.is_empty() {
                        return self.fail("filter");
                    }
                    let start = self.pos;
                    let subject = self.term()?;
                    let predicate = self.term()?;
                    let object = self.term()?;
                    if matches!(subject, PatternTerm::Literal(_)) {
                        self.pos = start;
                        return self.fail("subject term");
                    }
                    if matches!(predicate, PatternTerm::Literal(_)) {
                        self.pos = start + 1;
                        return self.fail("predicate term");
                    }
                    q.patterns.push(TriplePattern { subject, predicate, object });
                }
                if self.accept(SEP_DOT) {
                    continue;
                }
                self.expect(BRACK_CLOSE)?;
                break;
            }
        }
        if self.accept("order") {
            self.expect("by")?;
            let descending = if self.accept("desc") {
                true
            } else if self.accept("asc") {
                false
            } else {
                return self.fail("asc or desc");
            };
            self.expect(PAR_OPEN)?;
            let var = self.var()?;
            self.expect(PAR_CLOSE)?;
            q.order_by = Some(OrderBy { var, descending });
        }
        if self.accept("limit") {
            q.limit = Some(self.number()?);
        }
        if self.accept("offset") {
            q.offset = Some(self.number()?);
        }
        Ok(q)
    }

    fn term(&mut self) -> Result<PatternTerm, CodecError> {
        let Some(tok) = self.peek() else {
            return self.fail("term");
        };
        let term = if let Some(name) = tok.strip_prefix(VAR) {
            if name.is_empty() {
                return self.fail("term");
            }
            PatternTerm::Var(name.to_string())
        } else if let Some(escaped) = tok.strip_prefix(LIT) {
            PatternTerm::Literal(Literal::canonical(unescape_literal(escaped)))
        } else if let Some(slot) = tok.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
            if slot.is_empty() {
                return self.fail("term");
            }
            PatternTerm::Slot(slot.to_string())
        } else if is_iri_token(tok) {
            let (prefix, local) = tok.split_once('_').expect("IRI tokens contain '_'");
            match self.prefixes.expand(prefix, local) {
                Some(iri) => PatternTerm::Iri(iri),
                None => return self.fail("IRI with a known prefix"),
            }
        } else {
            return self.fail("term");
        };
        self.pos += 1;
        Ok(term)
    }
}
