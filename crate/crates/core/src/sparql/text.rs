//! SPARQL surface syntax for the query fragment: a serializer and a
//! small recursive-descent parser.

use std::fmt::Write as _;

use super::ast::{CompareOp, Filter, OrderBy, PatternTerm, QueryForm, SparqlQuery, TriplePattern};
use super::CodecError;
use crate::kg::{self, Iri, Literal, PrefixTable};

/// Renders a query on one line. With a prefix table, IRIs are written as
/// prefixed names where the local part allows it; no prologue is emitted.
pub fn to_sparql(q: &SparqlQuery, prefixes: Option<&PrefixTable>) -> String {
    let mut out = String::new();
    match q.form {
        QueryForm::Ask => out.push_str("ASK WHERE { "),
        QueryForm::Select => {
            out.push_str("SELECT ");
            if q.distinct {
                out.push_str("DISTINCT ");
            }
            if let Some(c) = &q.count {
                let _ = write!(out, "(COUNT(?{c}) AS ?count) ");
            }
            for v in &q.projection {
                let _ = write!(out, "?{v} ");
            }
            out.push_str("WHERE { ");
        }
    }
    let mut items: Vec<String> = q
        .patterns
        .iter()
        .map(|p| p.terms().map(|t| term_text(t, prefixes)).join(" "))
        .collect();
    items.extend(
        q.filters
            .iter()
            .map(|f| format!("FILTER(?{} {} {})", f.var, f.op.symbol(), term_text(&f.value, prefixes))),
    );
    if !items.is_empty() {
        out.push_str(&items.join(" . "));
        out.push(' ');
    }
    out.push('}');
    if let Some(o) = &q.order_by {
        let _ = write!(out, " ORDER BY {}(?{})", if o.descending { "DESC" } else { "ASC" }, o.var);
    }
    if let Some(n) = q.limit {
        let _ = write!(out, " LIMIT {n}");
    }
    if let Some(n) = q.offset {
        let _ = write!(out, " OFFSET {n}");
    }
    out
}

/// Renders `PREFIX` declarations for the table followed by the query.
pub fn with_prologue(q: &SparqlQuery, prefixes: &PrefixTable) -> String {
    let mut out = String::new();
    for (p, ns) in prefixes.iter() {
        let _ = writeln!(out, "PREFIX {p}: <{ns}>");
    }
    out.push_str(&to_sparql(q, Some(prefixes)));
    out
}

fn term_text(t: &PatternTerm, prefixes: Option<&PrefixTable>) -> String {
    match t {
        PatternTerm::Iri(iri) => iri_text(iri, prefixes),
        PatternTerm::Var(v) => format!("?{v}"),
        PatternTerm::Slot(s) => format!("<{s}>"),
        PatternTerm::Literal(lit) => match (&lit.datatype, prefixes) {
            (Some(dt), Some(_)) if lit.language.is_none() => {
                let plain = Literal::plain(lit.lexical.clone()).to_string();
                format!("{plain}^^{}", iri_text(dt, prefixes))
            }
            _ => lit.to_string(),
        },
    }
}

fn iri_text(iri: &Iri, prefixes: Option<&PrefixTable>) -> String {
    if let Some((p, local)) = prefixes.and_then(|t| t.compress(iri)) {
        if is_pn_local(local) {
            return format!("{p}:{local}");
        }
    }
    iri.to_string()
}

fn is_pn_local(local: &str) -> bool {
    let first_ok = local.chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_');
    let last_ok = !local.ends_with('.');
    first_ok && last_ok && local.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Parses SPARQL text in the supported fragment. Prefixed names resolve
/// against `PREFIX` declarations first, then `prefixes`.
pub fn parse_sparql(text: &str, prefixes: &PrefixTable) -> Result<SparqlQuery, CodecError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0, prefixes: prefixes.clone(), anon: 0 };
    let q = parser.query()?;
    q.validate().map_err(|m| CodecError::Syntax { offset: text.len(), message: m })?;
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Iri(String),
    Pname(String, String),
    Var(String),
    Lit(Literal),
    /// A literal whose datatype is a prefixed name, resolved by the parser.
    LitPnameType(String, String, String),
    Word(String),
    Int(u64),
    Punct(char),
    Op(CompareOp),
    Anon,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, CodecError> {
    let err = |offset: usize, message: &str| CodecError::Syntax { offset, message: message.to_string() };
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = text[i..].chars().next().unwrap();
        let start = i;
        match c {
            c if c.is_whitespace() => i += c.len_utf8(),
            '#' => i = text[i..].find('\n').map_or(bytes.len(), |n| i + n),
            '<' => {
                let body = &text[i + 1..];
                let end = body.find(|ch: char| ch == '>' || ch.is_whitespace() || ch == '"');
                match end {
                    Some(e) if body[e..].starts_with('>') && e > 0 => {
                        out.push((start, Tok::Iri(body[..e].to_string())));
                        i += e + 2;
                    }
                    _ => {
                        out.push((start, Tok::Op(CompareOp::Lt)));
                        i += 1;
                    }
                }
            }
            '>' => {
                out.push((start, Tok::Op(CompareOp::Gt)));
                i += 1;
            }
            '=' => {
                out.push((start, Tok::Op(CompareOp::Eq)));
                i += 1;
            }
            '"' => {
                let body = &text[i + 1..];
                let mut end = None;
                let mut escaped = false;
                for (j, ch) in body.char_indices() {
                    match ch {
                        _ if escaped => escaped = false,
                        '\\' => escaped = true,
                        '"' => {
                            end = Some(j);
                            break;
                        }
                        _ => {}
                    }
                }
                let end = end.ok_or_else(|| err(start, "unterminated string"))?;
                let lexical = unescape(&body[..end]).ok_or_else(|| err(start, "bad escape"))?;
                i += end + 2;
                let lit = if text[i..].starts_with("^^") {
                    i += 2;
                    let rest = &text[i..];
                    if let Some(body) = rest.strip_prefix('<') {
                        let e = body.find('>').ok_or_else(|| err(i, "unterminated datatype IRI"))?;
                        let dt = Iri::new(&body[..e]).map_err(|_| err(i, "bad datatype IRI"))?;
                        i += e + 2;
                        Literal::typed(lexical, dt)
                    } else {
                        let e = rest.find(|ch: char| !is_name_char(ch) && ch != ':').unwrap_or(rest.len());
                        let (p, l) = rest[..e].split_once(':').ok_or_else(|| err(i, "bad datatype"))?;
                        out.push((start, Tok::LitPnameType(lexical, p.to_string(), l.to_string())));
                        i += e;
                        continue;
                    }
                } else if let Some(rest) = text[i..].strip_prefix('@') {
                    let e = rest.find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '-')).unwrap_or(rest.len());
                    let lit = Literal::lang(lexical, &rest[..e]);
                    i += e + 1;
                    lit
                } else {
                    Literal::plain(lexical)
                };
                out.push((start, Tok::Lit(lit)));
            }
            '?' | '$' => {
                let rest = &text[i + 1..];
                let e = rest.find(|ch: char| !(ch.is_alphanumeric() || ch == '_')).unwrap_or(rest.len());
                if e == 0 {
                    return Err(err(start, "empty variable name"));
                }
                out.push((start, Tok::Var(rest[..e].to_string())));
                i += e + 1;
            }
            '[' => {
                let rest = text[i + 1..].trim_start();
                if !rest.starts_with(']') {
                    return Err(err(start, "only the empty blank node [] is supported"));
                }
                i = text.len() - rest.len() + 1;
                out.push((start, Tok::Anon));
            }
            '{' | '}' | '(' | ')' | '.' | ';' | ',' => {
                out.push((start, Tok::Punct(c)));
                i += 1;
            }
            c if c.is_ascii_digit() || c == '+' || c == '-' => {
                let rest = &text[i..];
                let e = rest[1..]
                    .find(|ch: char| !(ch.is_ascii_digit() || matches!(ch, '.' | 'e' | 'E' | '+' | '-')))
                    .map_or(rest.len(), |n| n + 1);
                let mut lexical = &rest[..e];
                // A trailing '.' ends the triple rather than the number.
                if lexical.ends_with('.') {
                    lexical = &lexical[..lexical.len() - 1];
                }
                i += lexical.len();
                match lexical.parse::<u64>() {
                    Ok(n) if !lexical.starts_with('+') => out.push((start, Tok::Int(n))),
                    _ if kg::infer_datatype(lexical).is_some() => {
                        out.push((start, Tok::Lit(Literal::canonical(lexical))))
                    }
                    _ => return Err(err(start, "bad numeric literal")),
                }
            }
            c if is_name_char(c) => {
                let rest = &text[i..];
                let e = rest.find(|ch: char| !(is_name_char(ch) || ch == ':' || ch == '.')).unwrap_or(rest.len());
                let mut word = &rest[..e];
                while word.ends_with('.') {
                    word = &word[..word.len() - 1];
                }
                i += word.len();
                match word.split_once(':') {
                    Some((p, l)) => out.push((start, Tok::Pname(p.to_string(), l.to_string()))),
                    None => out.push((start, Tok::Word(word.to_string()))),
                }
            }
            ':' => {
                return Err(err(start, "empty prefix names are not supported"));
            }
            _ => return Err(err(start, &format!("unexpected character {c:?}"))),
        }
    }
    Ok(out)
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            out.push(match chars.next()? {
                't' => '\t',
                'n' => '\n',
                'r' => '\r',
                '"' => '"',
                '\'' => '\'',
                '\\' => '\\',
                _ => return None,
            });
        } else {
            out.push(c);
        }
    }
    Some(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    prefixes: PrefixTable,
    anon: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(usize::MAX, |(o, _)| *o)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, CodecError> {
        Err(CodecError::Syntax { offset: self.offset(), message: message.into() })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), CodecError> {
        if self.keyword(kw) {
            Ok(())
        } else {
            self.error(format!("expected {kw}"))
        }
    }

    fn punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), CodecError> {
        if self.punct(c) {
            Ok(())
        } else {
            self.error(format!("expected '{c}'"))
        }
    }

    fn var(&mut self) -> Result<String, CodecError> {
        match self.peek() {
            Some(Tok::Var(v)) => {
                let v = v.clone();
                self.pos += 1;
                Ok(v)
            }
            _ => self.error("expected a variable"),
        }
    }

    fn int(&mut self) -> Result<u64, CodecError> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.error("expected a non-negative integer"),
        }
    }

    fn query(&mut self) -> Result<SparqlQuery, CodecError> {
        while self.keyword("PREFIX") {
            let (p, l) = match self.next() {
                Some(Tok::Pname(p, l)) => (p, l),
                _ => return self.error("expected prefix name"),
            };
            if !l.is_empty() {
                return self.error("prefix declaration must end with ':'");
            }
            let Some(Tok::Iri(ns)) = self.next() else {
                return self.error("expected namespace IRI");
            };
            self.prefixes.insert(&p, &ns).map_err(|e| CodecError::Syntax { offset: 0, message: e.to_string() })?;
        }
        let mut q = if self.keyword("SELECT") {
            let mut q = SparqlQuery::select(&[], Vec::new());
            if self.keyword("DISTINCT") {
                q.distinct = true;
                // `DISTINCT(?a)`, as opposed to `DISTINCT (COUNT(?a) AS ?n)`.
                let parenthesized_var = matches!(self.tokens.get(self.pos + 1), Some((_, Tok::Var(_))));
                if parenthesized_var && self.punct('(') {
                    q.projection.push(self.var()?);
                    self.expect_punct(')')?;
                }
            }
            loop {
                match self.peek() {
                    Some(Tok::Var(_)) => {
                        let v = self.var()?;
                        q.projection.push(v);
                    }
                    Some(Tok::Word(w)) if w.eq_ignore_ascii_case("COUNT") => {
                        self.pos += 1;
                        q.count = Some(self.count_arg()?);
                    }
                    Some(Tok::Punct('(')) => {
                        self.pos += 1;
                        self.expect_keyword("COUNT")?;
                        q.count = Some(self.count_arg()?);
                        self.expect_keyword("AS")?;
                        self.var()?;
                        self.expect_punct(')')?;
                    }
                    _ => break,
                }
            }
            q
        } else if self.keyword("ASK") {
            SparqlQuery::ask(Vec::new())
        } else {
            return self.error("expected SELECT or ASK");
        };
        self.keyword("WHERE");
        self.group(&mut q)?;
        loop {
            if self.keyword("ORDER") {
                self.expect_keyword("BY")?;
                let descending = if self.keyword("DESC") {
                    true
                } else {
                    self.keyword("ASC");
                    false
                };
                let var = if self.punct('(') {
                    let v = self.var()?;
                    self.expect_punct(')')?;
                    v
                } else {
                    self.var()?
                };
                q.order_by = Some(OrderBy { var, descending });
            } else if self.keyword("LIMIT") {
                q.limit = Some(self.int()?);
            } else if self.keyword("OFFSET") {
                q.offset = Some(self.int()?);
            } else {
                break;
            }
        }
        if self.pos < self.tokens.len() {
            return self.error("unexpected trailing input");
        }
        Ok(q)
    }

    fn count_arg(&mut self) -> Result<String, CodecError> {
        self.expect_punct('(')?;
        if self.keyword("DISTINCT") {
            return Err(CodecError::Unsupported("COUNT(DISTINCT ...)".into()));
        }
        let v = self.var()?;
        self.expect_punct(')')?;
        Ok(v)
    }

    fn group(&mut self, q: &mut SparqlQuery) -> Result<(), CodecError> {
        self.expect_punct('{')?;
        loop {
            while self.punct('.') {}
            if self.punct('}') {
                return Ok(());
            }
            if self.keyword("FILTER") {
                self.expect_punct('(')?;
                let var = self.var()?;
                let op = match self.next() {
                    Some(Tok::Op(op)) => op,
                    _ => {
                        self.pos -= 1;
                        return self.error("expected <, > or =");
                    }
                };
                let value = self.term()?;
                self.expect_punct(')')?;
                q.filters.push(Filter { var, op, value });
                continue;
            }
            if matches!(self.peek(), Some(Tok::Word(w)) if ["OPTIONAL", "UNION", "MINUS", "BIND", "VALUES", "GRAPH", "SERVICE"].iter().any(|k| w.eq_ignore_ascii_case(k)))
            {
                let Some(Tok::Word(w)) = self.next() else { unreachable!() };
                return Err(CodecError::Unsupported(w.to_uppercase()));
            }
            let subject = self.term()?;
            let predicate = if self.keyword("a") {
                PatternTerm::Iri(kg::rdf("type"))
            } else {
                self.term()?
            };
            let object = self.term()?;
            if matches!(self.peek(), Some(Tok::Punct(';' | ','))) {
                return Err(CodecError::Unsupported("predicate-object lists".into()));
            }
            q.patterns.push(TriplePattern { subject, predicate, object });
        }
    }

    fn term(&mut self) -> Result<PatternTerm, CodecError> {
        let offset = self.offset();
        match self.next() {
            Some(Tok::Iri(s)) => match Iri::new(s.clone()) {
                Ok(iri) => Ok(PatternTerm::Iri(iri)),
                Err(_) if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric()) => Ok(PatternTerm::Slot(s)),
                Err(_) => Err(CodecError::Syntax { offset, message: format!("relative IRI <{s}>") }),
            },
            Some(Tok::Pname(p, l)) => self
                .prefixes
                .expand(&p, &l)
                .map(PatternTerm::Iri)
                .ok_or(CodecError::Syntax { offset, message: format!("unknown prefix {p}:") }),
            Some(Tok::Var(v)) => Ok(PatternTerm::Var(v)),
            Some(Tok::Int(n)) => Ok(PatternTerm::Literal(Literal::canonical(n.to_string()))),
            Some(Tok::Lit(lit)) => Ok(PatternTerm::Literal(lit)),
            Some(Tok::LitPnameType(lexical, p, l)) => {
                let dt = self
                    .prefixes
                    .expand(&p, &l)
                    .ok_or(CodecError::Syntax { offset, message: format!("unknown prefix {p}:") })?;
                Ok(PatternTerm::Literal(Literal::typed(lexical, dt)))
            }
            Some(Tok::Word(w)) if w == "true" || w == "false" => Ok(PatternTerm::Literal(Literal::canonical(w))),
            Some(Tok::Anon) => {
                let v = format!("_anon{}", self.anon);
                self.anon += 1;
                Ok(PatternTerm::Var(v))
            }
            _ => Err(CodecError::Syntax { offset, message: "expected an RDF term".into() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PrefixTable {
        PrefixTable::default()
    }

    #[test]
    fn serializes_worked_example() {
        let q = parse_sparql("SELECT ?x WHERE { dbr:Barack_Obama dbo:birthDate ?x }", &p()).unwrap();
        assert_eq!(to_sparql(&q, Some(&p())), "SELECT ?x WHERE { dbr:Barack_Obama dbo:birthDate ?x }");
        assert_eq!(
            to_sparql(&q, None),
            "SELECT ?x WHERE { <http://dbpedia.org/resource/Barack_Obama> <http://dbpedia.org/ontology/birthDate> ?x }"
        );
    }

    #[test]
    fn parses_parenthesised_distinct_and_anon() {
        let q = parse_sparql("SELECT DISTINCT(?a) WHERE { ?a dbo:birthDate [] }", &p()).unwrap();
        assert!(q.distinct);
        assert_eq!(q.projection, vec!["a"]);
        assert_eq!(q.patterns[0].object, PatternTerm::var("_anon0"));
    }

    #[test]
    fn parses_modifiers_filters_and_count() {
        let q = parse_sparql(
            "PREFIX ex: <http://example.org/>\nSELECT ?a WHERE { ?a ex:h ?v . FILTER(?v > 1.5) } ORDER BY DESC(?v) LIMIT 1 OFFSET 2",
            &PrefixTable::empty(),
        )
        .unwrap();
        assert_eq!(q.filters[0].op, CompareOp::Gt);
        assert_eq!(q.filters[0].value, PatternTerm::Literal(Literal::canonical("1.5")));
        assert_eq!(q.order_by, Some(OrderBy { var: "v".into(), descending: true }));
        assert_eq!((q.limit, q.offset), (Some(1), Some(2)));

        let c = parse_sparql("SELECT (COUNT(?a) AS ?n) WHERE { ?a a dbo:Eukaryote }", &p()).unwrap();
        assert_eq!(c.count.as_deref(), Some("a"));
        let text = to_sparql(&c, Some(&p()));
        assert_eq!(parse_sparql(&text, &p()).unwrap(), c);
    }

    #[test]
    fn ask_and_slots() {
        let q = parse_sparql("ASK { }", &p()).unwrap();
        assert_eq!(q, SparqlQuery::ask(vec![]));
        let t = parse_sparql("SELECT ?x WHERE { <A> dbo:spouse ?x }", &p()).unwrap();
        assert_eq!(t.slots(), vec!["A"]);
    }

    #[test]
    fn rejects_outside_fragment() {
        assert!(matches!(
            parse_sparql("SELECT ?x WHERE { OPTIONAL { ?x ?p ?o } }", &p()),
            Err(CodecError::Unsupported(_))
        ));
        assert!(parse_sparql("SELECT ?y WHERE { ?x ?p ?o }", &p()).is_err());
        assert!(parse_sparql("SELECT ?x WHERE { ?x ?p ?o ", &p()).is_err());
        assert!(parse_sparql("DESCRIBE ?x", &p()).is_err());
    }

    #[test]
    fn typed_literals_round_trip_through_text() {
        let q = parse_sparql(
            "ASK WHERE { dbr:X dbo:birthDate \"1961-08-04\"^^xsd:date . dbr:X rdfs:label \"x y\"@en }",
            &p(),
        )
        .unwrap();
        for prefixes in [None, Some(&p())] {
            let text = to_sparql(&q, prefixes);
            assert_eq!(parse_sparql(&text, &p()).unwrap(), q, "{text}");
        }
    }
}
