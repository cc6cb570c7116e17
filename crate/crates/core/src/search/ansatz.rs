//! The solution Ansatz: a structural template with typed component slots.
//!
//! Template syntax is ordinary expression text extended with
//! - `sumN(body)` — expands to `(body) + ... + (body)` with `N` copies,
//!   each carrying its own slot instances;
//! - slot tokens `name(vars)` where `name ∈ {phi, psi, T, g, f}` and
//!   `vars` is a comma-separated subset of `x, y, t` (e.g. `phi(x)`,
//!   `T(t)`, `psi(x,t)`) — each occurrence is one component slot whose
//!   library atoms must mention exactly those variables;
//! - the bare token `a` — an amplitude literal (assembles to `1`, exposed
//!   to Stage II as a trainable constant).

use super::SearchError;
use crate::interp::{interpret, Var};
use std::collections::BTreeSet;

/// One component slot: the exact variable set its atoms must carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub label: String,
    pub vars: BTreeSet<Var>,
}

/// Parsed assembly template with `L` placeholder slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ansatz {
    /// Template text with `@i@` placeholders.
    template: String,
    pub slots: Vec<Slot>,
}

const SLOT_NAMES: [&str; 5] = ["phi", "psi", "T", "g", "f"];

/// Variables present in an expression (the deterministic semantic tag).
pub fn tag(expr_text: &str) -> Result<BTreeSet<Var>, SearchError> {
    Ok(interpret(expr_text)?.variables().into_iter().collect())
}

fn expand_sums(text: &str) -> Result<String, SearchError> {
    let mut s = text.to_string();
    loop {
        let Some(pos) = s.find("sum") else {
            return Ok(s);
        };
        // `sumN(` — N digits then a balanced group.
        let bytes = s.as_bytes();
        let mut i = pos + 3;
        let digits_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == digits_start || i >= bytes.len() || bytes[i] != b'(' {
            return Err(SearchError::BadAnsatz(format!(
                "expected `sumN(body)` at `{}`",
                &s[pos..s.len().min(pos + 12)]
            )));
        }
        let n: usize = s[digits_start..i]
            .parse()
            .map_err(|_| SearchError::BadAnsatz("bad sum count".to_string()))?;
        if n == 0 {
            return Err(SearchError::BadAnsatz("sum0 is empty".to_string()));
        }
        // Balanced-paren body.
        let body_start = i + 1;
        let mut depth = 1usize;
        let mut j = body_start;
        while j < bytes.len() && depth > 0 {
            match bytes[j] {
                b'(' => depth += 1,
                b')' => depth -= 1,
                _ => {}
            }
            j += 1;
        }
        if depth != 0 {
            return Err(SearchError::BadAnsatz("unbalanced parentheses".to_string()));
        }
        let body = &s[body_start..j - 1];
        let expanded = (0..n)
            .map(|_| format!("({body})"))
            .collect::<Vec<_>>()
            .join(" + ");
        s = format!("{}({}){}", &s[..pos], expanded, &s[j..]);
    }
}

fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

impl Ansatz {
    /// Parse a template string into placeholders and slots.
    pub fn parse(text: &str) -> Result<Ansatz, SearchError> {
        let expanded = expand_sums(text)?;
        let bytes = expanded.as_bytes();
        let mut out = String::new();
        let mut slots = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i].is_ascii_alphabetic()
                && (i == 0 || !is_ident_char(bytes[i - 1]))
            {
                let start = i;
                while i < bytes.len() && is_ident_char(bytes[i]) {
                    i += 1;
                }
                let word = &expanded[start..i];
                if word == "a" && (i >= bytes.len() || bytes[i] != b'(') {
                    // Amplitude literal.
                    out.push('1');
                    continue;
                }
                if SLOT_NAMES.contains(&word) && i < bytes.len() && bytes[i] == b'(' {
                    let close = expanded[i..]
                        .find(')')
                        .ok_or_else(|| SearchError::BadAnsatz("unclosed slot".to_string()))?
                        + i;
                    let args = &expanded[i + 1..close];
                    let mut vars = BTreeSet::new();
                    for part in args.split(',') {
                        let v = Var::from_name(part.trim()).ok_or_else(|| {
                            SearchError::BadAnsatz(format!(
                                "slot `{word}({args})` has non-variable argument `{part}`"
                            ))
                        })?;
                        vars.insert(v);
                    }
                    if vars.is_empty() {
                        return Err(SearchError::BadAnsatz(format!(
                            "slot `{word}()` declares no variables"
                        )));
                    }
                    let idx = slots.len();
                    slots.push(Slot {
                        label: format!("{word}({args})#{idx}"),
                        vars,
                    });
                    out.push_str(&format!("@{idx}@"));
                    i = close + 1;
                    continue;
                }
                out.push_str(word);
                continue;
            }
            out.push(bytes[i] as char);
            i += 1;
        }
        if slots.is_empty() {
            return Err(SearchError::BadAnsatz(
                "template declares no component slots".to_string(),
            ));
        }
        let a = Ansatz {
            template: out,
            slots,
        };
        // The template must assemble into parseable text.
        let probe: Vec<String> = a.slots.iter().map(|_| "1".to_string()).collect();
        let assembled = a.substitute(&probe);
        interpret(&assembled)
            .map_err(|e| SearchError::BadAnsatz(format!("template does not parse: {e}")))?;
        Ok(a)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Union of all slot variable requirements.
    pub fn required_vars(&self) -> BTreeSet<Var> {
        self.slots.iter().flat_map(|s| s.vars.iter().copied()).collect()
    }

    fn substitute(&self, components: &[String]) -> String {
        let mut s = self.template.clone();
        for (i, c) in components.iter().enumerate() {
            s = s.replace(&format!("@{i}@"), &format!("({c})"));
        }
        s
    }

    /// Compose component expressions into a full candidate.
    pub fn assemble(&self, components: &[String]) -> Result<String, SearchError> {
        if components.len() != self.slots.len() {
            return Err(SearchError::BadAnsatz(format!(
                "{} components supplied for {} slots",
                components.len(),
                self.slots.len()
            )));
        }
        let assembled = self.substitute(components);
        let tree = interpret(&assembled)?;
        let present: BTreeSet<Var> = tree.variables().into_iter().collect();
        for v in self.required_vars() {
            if !present.contains(&v) {
                return Err(SearchError::BadAnsatz(format!(
                    "assembled expression dropped required variable `{}`",
                    v.name()
                )));
            }
        }
        Ok(assembled)
    }
}
