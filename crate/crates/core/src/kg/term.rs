use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::KgError;

pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const OWL: &str = "http://www.w3.org/2002/07/owl#";

/// An absolute IRI.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri(String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, KgError> {
        let value = value.into();
        if is_absolute_iri(&value) {
            Ok(Self(value))
        } else {
            Err(KgError::InvalidIri(value))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Local part after the last `#` or `/`.
    pub fn local_name(&self) -> &str {
        let cut = self.0.rfind(['#', '/']).map_or(0, |i| i + 1);
        &self.0[cut..]
    }
}

impl TryFrom<String> for Iri {
    type Error = KgError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Iri::new(value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> String {
        iri.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

fn is_absolute_iri(s: &str) -> bool {
    let Some(colon) = s.find(':') else {
        return false;
    };
    let (scheme, rest) = (&s[..colon], &s[colon + 1..]);
    let mut chars = scheme.chars();
    let scheme_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
    scheme_ok
        && !rest.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || c.is_control() || "<>\"{}|^`\\".contains(c))
}

/// An RDF literal: lexical form, optional datatype, optional language tag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub lexical: String,
    pub datatype: Option<Iri>,
    pub language: Option<String>,
}

impl Literal {
    pub fn plain(lexical: impl Into<String>) -> Self {
        Self { lexical: lexical.into(), datatype: None, language: None }
    }

    pub fn typed(lexical: impl Into<String>, datatype: Iri) -> Self {
        Self { lexical: lexical.into(), datatype: Some(datatype), language: None }
    }

    pub fn lang(lexical: impl Into<String>, language: impl Into<String>) -> Self {
        Self { lexical: lexical.into(), datatype: None, language: Some(language.into()) }
    }

    /// Builds the literal whose datatype is implied by its lexical form:
    /// integers, decimals, doubles, dates and booleans get the matching
    /// XSD type, anything else stays plain.
    pub fn canonical(lexical: impl Into<String>) -> Self {
        let lexical = lexical.into();
        match infer_datatype(&lexical) {
            Some(local) => Self::typed(lexical, xsd(local)),
            None => Self::plain(lexical),
        }
    }

    pub fn numeric_value(&self) -> Option<f64> {
        let numeric = match &self.datatype {
            Some(dt) => is_numeric_datatype(dt),
            None => matches!(infer_datatype(&self.lexical), Some("integer" | "decimal" | "double")),
        };
        if numeric {
            self.lexical.trim().parse().ok()
        } else {
            None
        }
    }

    pub fn is_date(&self) -> bool {
        match &self.datatype {
            Some(dt) => is_date_datatype(dt),
            None => infer_datatype(&self.lexical) == Some("date"),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("\"")?;
        for c in self.lexical.chars() {
            match c {
                '"' => f.write_str("\\\"")?,
                '\\' => f.write_str("\\\\")?,
                '\n' => f.write_str("\\n")?,
                '\r' => f.write_str("\\r")?,
                '\t' => f.write_str("\\t")?,
                c => write!(f, "{c}")?,
            }
        }
        f.write_str("\"")?;
        if let Some(lang) = &self.language {
            write!(f, "@{lang}")
        } else if let Some(dt) = &self.datatype {
            write!(f, "^^{dt}")
        } else {
            Ok(())
        }
    }
}

pub fn xsd(local: &str) -> Iri {
    Iri(format!("{XSD}{local}"))
}

pub fn rdfs(local: &str) -> Iri {
    Iri(format!("{RDFS}{local}"))
}

pub fn rdf(local: &str) -> Iri {
    Iri(format!("{RDF}{local}"))
}

/// XSD local name implied by a lexical form, if any.
pub fn infer_datatype(lexical: &str) -> Option<&'static str> {
    let unsigned = lexical.strip_prefix(['+', '-']).unwrap_or(lexical);
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if digits(unsigned) {
        return Some("integer");
    }
    if let Some((int, frac)) = unsigned.split_once('.') {
        if (int.is_empty() || digits(int)) && digits(frac) {
            return Some("decimal");
        }
    }
    if let Some((mantissa, exp)) = unsigned.split_once(['e', 'E']) {
        let exp = exp.strip_prefix(['+', '-']).unwrap_or(exp);
        let mantissa_ok = digits(mantissa)
            || mantissa
                .split_once('.')
                .is_some_and(|(i, f)| (i.is_empty() || digits(i)) && (digits(f) || (f.is_empty() && digits(i))));
        if mantissa_ok && digits(exp) {
            return Some("double");
        }
    }
    let b = lexical.as_bytes();
    if b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && digits(&lexical[..4])
        && digits(&lexical[5..7])
        && digits(&lexical[8..])
    {
        return Some("date");
    }
    if lexical == "true" || lexical == "false" {
        return Some("boolean");
    }
    None
}

const NUMERIC_TYPES: &[&str] = &[
    "integer", "decimal", "double", "float", "int", "long", "short", "byte",
    "nonNegativeInteger", "positiveInteger", "negativeInteger", "nonPositiveInteger",
    "unsignedInt", "unsignedLong", "unsignedShort", "unsignedByte",
];

const DATE_TYPES: &[&str] = &["date", "dateTime", "gYear", "gYearMonth"];

pub fn is_numeric_datatype(dt: &Iri) -> bool {
    dt.as_str().strip_prefix(XSD).is_some_and(|l| NUMERIC_TYPES.contains(&l))
}

pub fn is_date_datatype(dt: &Iri) -> bool {
    dt.as_str().strip_prefix(XSD).is_some_and(|l| DATE_TYPES.contains(&l))
}

/// An RDF term in object or binding position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Iri(Iri),
    Literal(Literal),
}

impl Term {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(iri) => Some(iri),
            Term::Literal(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => iri.fmt(f),
            Term::Literal(lit) => lit.fmt(f),
        }
    }
}

impl From<Iri> for Term {
    fn from(iri: Iri) -> Self {
        Term::Iri(iri)
    }
}

impl From<Literal> for Term {
    fn from(lit: Literal) -> Self {
        Term::Literal(lit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

/// Token prefixes the codec reserves for structural tokens; prefix names
/// may not collide with them.
const RESERVED_PREFIXES: &[&str] = &["brack", "par", "sep", "math", "var", "lit"];

/// Prefix name to namespace mapping used for compact IRIs and codec tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, String>", into = "BTreeMap<String, String>")]
pub struct PrefixTable {
    entries: BTreeMap<String, String>,
}

impl PrefixTable {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, prefix: &str, namespace: &str) -> Result<(), KgError> {
        let valid_name = prefix.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && prefix.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
            && !RESERVED_PREFIXES.contains(&prefix);
        if !valid_name {
            return Err(KgError::InvalidPrefix(prefix.to_string()));
        }
        if !is_absolute_iri(namespace) {
            return Err(KgError::InvalidIri(namespace.to_string()));
        }
        self.entries.insert(prefix.to_string(), namespace.to_string());
        Ok(())
    }

    pub fn namespace(&self, prefix: &str) -> Option<&str> {
        self.entries.get(prefix).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(p, n)| (p.as_str(), n.as_str()))
    }

    /// Splits an IRI into `(prefix, local)` using the longest matching
    /// namespace. The local part must be non-empty and whitespace-free.
    pub fn compress<'a>(&'a self, iri: &'a Iri) -> Option<(&'a str, &'a str)> {
        self.entries
            .iter()
            .filter_map(|(p, ns)| iri.as_str().strip_prefix(ns.as_str()).map(|local| (p.as_str(), local, ns.len())))
            .filter(|(_, local, _)| !local.is_empty() && !local.chars().any(char::is_whitespace))
            .max_by_key(|(_, _, len)| *len)
            .map(|(p, local, _)| (p, local))
    }

    pub fn expand(&self, prefix: &str, local: &str) -> Option<Iri> {
        let ns = self.entries.get(prefix)?;
        Iri::new(format!("{ns}{local}")).ok()
    }
}

impl Default for PrefixTable {
    /// The DBpedia prefixes plus the RDF vocabularies.
    fn default() -> Self {
        let mut table = Self::empty();
        for (p, ns) in [
            ("dbo", "http://dbpedia.org/ontology/"),
            ("dbr", "http://dbpedia.org/resource/"),
            ("dbp", "http://dbpedia.org/property/"),
            ("rdf", RDF),
            ("rdfs", RDFS),
            ("xsd", XSD),
            ("owl", OWL),
            ("foaf", "http://xmlns.com/foaf/0.1/"),
        ] {
            table.insert(p, ns).expect("built-in prefixes are valid");
        }
        table
    }
}

impl TryFrom<BTreeMap<String, String>> for PrefixTable {
    type Error = KgError;

    fn try_from(map: BTreeMap<String, String>) -> Result<Self, Self::Error> {
        let mut table = Self::empty();
        for (p, ns) in &map {
            table.insert(p, ns)?;
        }
        Ok(table)
    }
}

impl From<PrefixTable> for BTreeMap<String, String> {
    fn from(table: PrefixTable) -> Self {
        table.entries
    }
}
