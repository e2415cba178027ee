use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::term::{Iri, Literal, Term};
use super::KgError;

/// One solution: variable name to bound term.
pub type Binding = BTreeMap<String, Term>;

/// Query results: either solution rows or, for ASK, a boolean.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultSet {
    pub variables: Vec<String>,
    pub rows: Vec<Binding>,
    pub boolean: Option<bool>,
}

impl ResultSet {
    pub fn boolean(value: bool) -> Self {
        Self { variables: Vec::new(), rows: Vec::new(), boolean: Some(value) }
    }

    pub fn is_boolean(&self) -> bool {
        self.boolean.is_some()
    }

    /// Values bound to `var`, in row order.
    pub fn column<'a>(&'a self, var: &'a str) -> impl Iterator<Item = &'a Term> + 'a {
        self.rows.iter().filter_map(move |r| r.get(var))
    }

    /// Serializes to the SPARQL 1.1 JSON results format.
    pub fn to_json(&self) -> Value {
        if let Some(b) = self.boolean {
            return json!({ "head": {}, "boolean": b });
        }
        let bindings: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (var, term) in row {
                    obj.insert(var.clone(), term_json(term));
                }
                Value::Object(obj)
            })
            .collect();
        json!({ "head": { "vars": self.variables }, "results": { "bindings": bindings } })
    }

    /// Parses the SPARQL 1.1 JSON results format.
    pub fn from_json(value: &Value) -> Result<Self, KgError> {
        let bad = |m: &str| KgError::Protocol(m.to_string());
        if let Some(b) = value.get("boolean") {
            return b.as_bool().map(ResultSet::boolean).ok_or_else(|| bad("boolean result is not a boolean"));
        }
        let variables: Vec<String> = value
            .pointer("/head/vars")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing head.vars"))?
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| bad("variable name is not a string")))
            .collect::<Result<_, _>>()?;
        let bindings = value
            .pointer("/results/bindings")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing results.bindings"))?;
        let mut rows = Vec::with_capacity(bindings.len());
        for b in bindings {
            let obj = b.as_object().ok_or_else(|| bad("binding is not an object"))?;
            let mut row = Binding::new();
            for (var, term) in obj {
                if !variables.contains(var) {
                    return Err(bad(&format!("binding for undeclared variable {var}")));
                }
                row.insert(var.clone(), json_term(term)?);
            }
            rows.push(row);
        }
        Ok(Self { variables, rows, boolean: None })
    }
}

fn term_json(term: &Term) -> Value {
    match term {
        Term::Iri(iri) => json!({ "type": "uri", "value": iri.as_str() }),
        Term::Literal(lit) => {
            let mut obj = Map::new();
            obj.insert("type".into(), "literal".into());
            obj.insert("value".into(), lit.lexical.clone().into());
            if let Some(dt) = &lit.datatype {
                obj.insert("datatype".into(), dt.as_str().into());
            }
            if let Some(lang) = &lit.language {
                obj.insert("xml:lang".into(), lang.clone().into());
            }
            Value::Object(obj)
        }
    }
}

fn json_term(v: &Value) -> Result<Term, KgError> {
    let bad = |m: &str| KgError::Protocol(m.to_string());
    let kind = v.get("type").and_then(Value::as_str).ok_or_else(|| bad("term without type"))?;
    let value = v.get("value").and_then(Value::as_str).ok_or_else(|| bad("term without value"))?;
    match kind {
        "uri" => Iri::new(value).map(Term::Iri).map_err(|_| bad(&format!("invalid IRI {value}"))),
        "literal" | "typed-literal" => {
            let mut lit = Literal::plain(value);
            if let Some(dt) = v.get("datatype").and_then(Value::as_str) {
                lit.datatype = Some(Iri::new(dt).map_err(|_| bad("invalid datatype IRI"))?);
            }
            lit.language = v.get("xml:lang").and_then(Value::as_str).map(str::to_string);
            Ok(Term::Literal(lit))
        }
        "bnode" => Err(bad("blank node bindings are not supported")),
        other => Err(bad(&format!("unknown term type {other}"))),
    }
}
