//! Context-free grammar over mathematical expressions.
//!
//! A [`Grammar`] is loaded from a line-oriented text spec (`LHS -> RHS1 |
//! RHS2 | ...`, `#` comments).  Nonterminals are exactly the symbols that
//! appear on a left-hand side; every other token is a terminal.  Single
//! uppercase ASCII letters are reserved as nonterminal names, so an
//! uppercase token on a right-hand side without any production is an
//! error rather than a silent terminal.
//!
//! An expression is equivalently a terminal string, a leftmost-derivation
//! [`RuleSequence`] (padded with the NOP rule to `max_len`), or a
//! [`OneHotMatrix`].  Rule indices follow file order; the NOP padding rule
//! always sits at index `rule_count() - 1`.

mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::interp;
use crate::MAX_RULE_LEN;

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("duplicate rule: {0}")]
    DuplicateRule(String),
    #[error("unknown symbol on rhs: {0} (uppercase letters are reserved for nonterminals)")]
    UnknownSymbol(String),
    #[error("missing start symbol S")]
    MissingStart,
    #[error("empty right-hand side in rule for {0}")]
    EmptyRhs(String),
    #[error("text is not in the grammar's language: {0}")]
    NotInLanguage(String),
    #[error("derivation exceeds the maximum length {0}")]
    TooLong(usize),
    #[error("invalid derivation: rule {rule} has lhs {lhs} but the stack top is {top}")]
    InvalidDerivation {
        rule: usize,
        lhs: String,
        top: String,
    },
    #[error("derivation unfinished: nonterminal stack nonempty after {0} steps")]
    Unfinished(usize),
    #[error("unknown nonterminal: {0}")]
    UnknownNonterminal(String),
    #[error("malformed one-hot matrix at column {0}")]
    MalformedOneHot(usize),
    #[error("rule index {0} out of range")]
    RuleIndexOutOfRange(usize),
}

/// One production `lhs -> rhs`, with the rhs as a symbol token list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub lhs: String,
    pub rhs: Vec<String>,
}

impl Rule {
    pub fn display(&self) -> String {
        format!("{} -> {}", self.lhs, self.rhs.join(" "))
    }
}

/// The context-free grammar (terminals, nonterminals, ordered rules, start
/// symbol).  Immutable after load; all operations are pure.
#[derive(Debug, Clone)]
pub struct Grammar {
    rules: Vec<Rule>,
    nonterminals: BTreeSet<String>,
    terminals: BTreeSet<String>,
    start: String,
    max_len: usize,
    /// Minimum number of derivation steps to terminalize each nonterminal.
    min_cost: BTreeMap<String, usize>,
    /// Terminals sorted longest-first for greedy tokenization.
    lex_order: Vec<String>,
}

/// Leftmost-derivation encoding of one expression: rule indices padded
/// with NOP to the grammar's `max_len`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleSequence {
    pub indices: Vec<usize>,
}

impl RuleSequence {
    /// Number of leading non-NOP entries.
    pub fn active_len(&self, g: &Grammar) -> usize {
        let nop = g.nop_index();
        self.indices.iter().take_while(|&&i| i != nop).count()
    }
}

/// `C x L` binary matrix with exactly one 1 per column, column `c` marking
/// `RuleSequence.indices[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major storage, `data[r * cols + c]`.
    pub data: Vec<f64>,
}

impl OneHotMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

impl Grammar {
    /// Parse a grammar from its text spec.
    pub fn load(text: &str) -> Result<Grammar, GrammarError> {
        Self::load_with_max_len(text, MAX_RULE_LEN)
    }

    pub fn load_with_max_len(text: &str, max_len: usize) -> Result<Grammar, GrammarError> {
        let mut rules = Vec::new();
        let mut seen = BTreeSet::new();
        for raw_line in text.lines() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (lhs, rhs_all) = line
                .split_once("->")
                .ok_or_else(|| GrammarError::NotInLanguage(format!("bad rule line: {line}")))?;
            let lhs = lhs.trim().to_string();
            if lhs.is_empty() {
                return Err(GrammarError::EmptyRhs(line.to_string()));
            }
            for alt in rhs_all.split('|') {
                let rhs: Vec<String> = alt.split_whitespace().map(|s| s.to_string()).collect();
                if rhs.is_empty() {
                    return Err(GrammarError::EmptyRhs(lhs.clone()));
                }
                let rule = Rule {
                    lhs: lhs.clone(),
                    rhs,
                };
                if !seen.insert(rule.display()) {
                    return Err(GrammarError::DuplicateRule(rule.display()));
                }
                rules.push(rule);
            }
        }
        let nonterminals: BTreeSet<String> = rules.iter().map(|r| r.lhs.clone()).collect();
        if !nonterminals.contains("S") {
            return Err(GrammarError::MissingStart);
        }
        let mut terminals = BTreeSet::new();
        for rule in &rules {
            for sym in &rule.rhs {
                if nonterminals.contains(sym) {
                    continue;
                }
                let looks_nonterminal =
                    sym.len() == 1 && sym.chars().next().unwrap().is_ascii_uppercase();
                if looks_nonterminal {
                    return Err(GrammarError::UnknownSymbol(sym.clone()));
                }
                terminals.insert(sym.clone());
            }
        }
        let min_cost = compute_min_costs(&rules, &nonterminals);
        let mut lex_order: Vec<String> = terminals.iter().cloned().collect();
        lex_order.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        Ok(Grammar {
            rules,
            nonterminals,
            terminals,
            start: "S".to_string(),
            max_len,
            min_cost,
            lex_order,
        })
    }

    pub fn load_file(path: &Path) -> Result<Grammar, GrammarError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GrammarError::NotInLanguage(format!("cannot read {path:?}: {e}")))?;
        Self::load(&text)
    }

    /// The shipped reference grammar (52 productions, C = 53).
    pub fn reference() -> Grammar {
        Self::load(crate::REFERENCE_GRAMMAR).expect("reference grammar parses")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn terminals(&self) -> &BTreeSet<String> {
        &self.terminals
    }

    pub fn nonterminals(&self) -> &BTreeSet<String> {
        &self.nonterminals
    }

    /// Total one-hot channel count `C`: productions plus the NOP rule.
    pub fn rule_count(&self) -> usize {
        self.rules.len() + 1
    }

    /// The padding rule index, always `C - 1`.
    pub fn nop_index(&self) -> usize {
        self.rules.len()
    }

    /// SHA-256 over the canonical rule listing; checkpoints embed this so a
    /// model is never decoded against a different grammar.
    pub fn hash(&self) -> String {
        let mut listing = String::new();
        for rule in &self.rules {
            let _ = writeln!(listing, "{}", rule.display());
        }
        let _ = writeln!(listing, "max_len {}", self.max_len);
        let digest = Sha256::digest(listing.as_bytes());
        digest.iter().fold(String::new(), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }

    /// Greedy longest-match tokenization over the terminal alphabet.
    pub fn tokenize(&self, text: &str) -> Result<Vec<String>, GrammarError> {
        let mut tokens = Vec::new();
        let mut rest = text.trim();
        'outer: while !rest.is_empty() {
            if let Some(stripped) = rest.strip_prefix(char::is_whitespace) {
                rest = stripped.trim_start();
                continue;
            }
            for term in &self.lex_order {
                if let Some(stripped) = rest.strip_prefix(term.as_str()) {
                    tokens.push(term.clone());
                    rest = stripped;
                    continue 'outer;
                }
            }
            return Err(GrammarError::NotInLanguage(format!(
                "unlexable input at: {rest}"
            )));
        }
        Ok(tokens)
    }

    /// Parse expression text into its canonical leftmost derivation.
    ///
    /// Of the derivations an ambiguous grammar admits, the one preferring
    /// lowest rule indices at each leftmost choice point is returned.  The
    /// numeric-argument check of the atom validator is part of the accepted
    /// language: purely numeric arguments to transcendental functions are
    /// rejected as `NotInLanguage`.
    pub fn parse(&self, text: &str) -> Result<RuleSequence, GrammarError> {
        if interp::has_numeric_transcendental_arg(text) {
            return Err(GrammarError::NotInLanguage(format!(
                "purely numeric transcendental argument in: {text}"
            )));
        }
        let tokens = self.tokenize(text)?;
        let indices = parse::derivation(self, &tokens)
            .ok_or_else(|| GrammarError::NotInLanguage(text.to_string()))?;
        if indices.len() > self.max_len {
            return Err(GrammarError::TooLong(self.max_len));
        }
        Ok(self.pad(indices))
    }

    fn pad(&self, mut indices: Vec<usize>) -> RuleSequence {
        indices.resize(self.max_len, self.nop_index());
        RuleSequence { indices }
    }

    /// Replay a rule sequence by leftmost expansion and emit the terminal
    /// string.
    pub fn derive(&self, seq: &RuleSequence) -> Result<String, GrammarError> {
        let nop = self.nop_index();
        let mut stack: Vec<&str> = vec![&self.start];
        let mut out = String::new();
        let mut consumed = 0usize;
        for (step, &idx) in seq.indices.iter().enumerate() {
            // Emit any terminals exposed on top of the stack.
            while let Some(top) = stack.last() {
                if self.nonterminals.contains(*top) {
                    break;
                }
                out.push_str(stack.pop().unwrap());
            }
            let Some(top) = stack.last().copied() else {
                // Derivation complete: only NOP padding may remain.
                if idx != nop {
                    return Err(GrammarError::InvalidDerivation {
                        rule: idx,
                        lhs: self.rule_lhs(idx)?.to_string(),
                        top: "<empty>".to_string(),
                    });
                }
                continue;
            };
            if idx == nop {
                return Err(GrammarError::Unfinished(step));
            }
            let rule = self
                .rules
                .get(idx)
                .ok_or(GrammarError::RuleIndexOutOfRange(idx))?;
            if rule.lhs != top {
                return Err(GrammarError::InvalidDerivation {
                    rule: idx,
                    lhs: rule.lhs.clone(),
                    top: top.to_string(),
                });
            }
            stack.pop();
            for sym in rule.rhs.iter().rev() {
                stack.push(sym);
            }
            consumed += 1;
        }
        while let Some(top) = stack.last() {
            if self.nonterminals.contains(*top) {
                return Err(GrammarError::Unfinished(consumed));
            }
            out.push_str(stack.pop().unwrap());
        }
        Ok(out)
    }

    /// Whether a padded sequence replays as a complete valid derivation.
    pub fn is_valid_derivation(&self, seq: &RuleSequence) -> bool {
        self.derive(seq).is_ok()
    }

    /// Bitmask over the `C` rules applicable when `nt` is on top of the
    /// derivation stack; `None` is the empty-stack sentinel (only NOP).
    pub fn mask_for(&self, nt: Option<&str>) -> Result<Vec<bool>, GrammarError> {
        let mut mask = vec![false; self.rule_count()];
        match nt {
            None => mask[self.nop_index()] = true,
            Some(name) => {
                if !self.nonterminals.contains(name) {
                    return Err(GrammarError::UnknownNonterminal(name.to_string()));
                }
                for (i, rule) in self.rules.iter().enumerate() {
                    if rule.lhs == name {
                        mask[i] = true;
                    }
                }
            }
        }
        Ok(mask)
    }

    fn rule_lhs(&self, idx: usize) -> Result<&str, GrammarError> {
        if idx == self.nop_index() {
            Ok("<nop>")
        } else {
            self.rules
                .get(idx)
                .map(|r| r.lhs.as_str())
                .ok_or(GrammarError::RuleIndexOutOfRange(idx))
        }
    }

    /// Minimum derivation steps to terminalize `nt`.
    pub fn min_completion_cost(&self, nt: &str) -> usize {
        self.min_cost.get(nt).copied().unwrap_or(usize::MAX / 4)
    }

    fn rule_cost(&self, idx: usize) -> usize {
        1 + self.rules[idx]
            .rhs
            .iter()
            .filter(|s| self.nonterminals.contains(*s))
            .map(|s| self.min_completion_cost(s))
            .sum::<usize>()
    }

    /// Stack-based argmax decode of a `C x L` logit matrix under the
    /// grammar mask.
    ///
    /// At each step only rules whose lhs matches the stack top are
    /// considered; when the remaining budget gets tight, rules whose
    /// minimal completion would overrun it are masked off as well, so any
    /// returned sequence is a complete valid derivation.  Ties break to
    /// the lowest rule index.
    pub fn masked_argmax_decode(&self, logits: &[f64]) -> Result<RuleSequence, GrammarError> {
        self.masked_decode(logits, |slice| {
            let mut best = None;
            let mut best_val = f64::NEG_INFINITY;
            for &(i, v) in slice {
                if v > best_val {
                    best_val = v;
                    best = Some(i);
                }
            }
            best.expect("nonempty candidate slice")
        })
    }

    /// Stack-based decode sampling uniformly among unmasked rules; used by
    /// the atoms-vs-primitives ablation.
    pub fn masked_uniform_decode<R: Rng>(
        &self,
        rng: &mut R,
    ) -> Result<RuleSequence, GrammarError> {
        let zeros = vec![0.0; self.rule_count() * self.max_len];
        self.masked_decode(&zeros, |slice| slice[rng.gen_range(0..slice.len())].0)
    }

    fn masked_decode<F>(&self, logits: &[f64], mut pick: F) -> Result<RuleSequence, GrammarError>
    where
        F: FnMut(&[(usize, f64)]) -> usize,
    {
        let c = self.rule_count();
        assert_eq!(
            logits.len(),
            c * self.max_len,
            "logits must be C x L row-major"
        );
        let mut stack: Vec<&str> = vec![&self.start];
        let mut indices = Vec::with_capacity(self.max_len);
        for step in 0..self.max_len {
            // Pop exposed terminals; they cost no derivation steps.
            while let Some(top) = stack.last() {
                if self.nonterminals.contains(*top) {
                    break;
                }
                stack.pop();
            }
            let Some(top) = stack.last().copied() else {
                indices.push(self.nop_index());
                continue;
            };
            let remaining = self.max_len - step;
            let pending_below: usize = stack[..stack.len() - 1]
                .iter()
                .filter(|s| self.nonterminals.contains(**s))
                .map(|s| self.min_completion_cost(s))
                .sum();
            let mut candidates: Vec<(usize, f64)> = Vec::new();
            let mut fallback: Option<(usize, usize)> = None; // (cost, idx)
            for (i, rule) in self.rules.iter().enumerate() {
                if rule.lhs != top {
                    continue;
                }
                let cost = self.rule_cost(i);
                match fallback {
                    Some((best_cost, _)) if best_cost <= cost => {}
                    _ => fallback = Some((cost, i)),
                }
                if cost + pending_below <= remaining {
                    candidates.push((i, logits[i * self.max_len + step]));
                }
            }
            let chosen = if candidates.is_empty() {
                // Budget already overrun; take the cheapest rule and let
                // the Unfinished check report it.
                match fallback {
                    Some((_, i)) => i,
                    None => return Err(GrammarError::Unfinished(step)),
                }
            } else {
                pick(&candidates)
            };
            let rule = &self.rules[chosen];
            stack.pop();
            for sym in rule.rhs.iter().rev() {
                stack.push(sym);
            }
            indices.push(chosen);
        }
        let unfinished = stack.iter().any(|s| self.nonterminals.contains(*s));
        if unfinished {
            return Err(GrammarError::Unfinished(self.max_len));
        }
        Ok(RuleSequence { indices })
    }

    /// Encode a padded rule sequence as a one-hot matrix.
    pub fn encode_onehot(&self, seq: &RuleSequence) -> OneHotMatrix {
        let rows = self.rule_count();
        let cols = self.max_len;
        let mut data = vec![0.0; rows * cols];
        for (c, &idx) in seq.indices.iter().enumerate() {
            data[idx * cols + c] = 1.0;
        }
        OneHotMatrix { rows, cols, data }
    }

    /// Exact inverse of [`Grammar::encode_onehot`].
    pub fn decode_onehot(&self, m: &OneHotMatrix) -> Result<RuleSequence, GrammarError> {
        let mut indices = Vec::with_capacity(m.cols);
        for c in 0..m.cols {
            let mut hit = None;
            for r in 0..m.rows {
                if m.get(r, c) != 0.0 {
                    if hit.is_some() || m.get(r, c) != 1.0 {
                        return Err(GrammarError::MalformedOneHot(c));
                    }
                    hit = Some(r);
                }
            }
            indices.push(hit.ok_or(GrammarError::MalformedOneHot(c))?);
        }
        Ok(RuleSequence { indices })
    }
}

/// Canonicalize expression text: fractional powers to `sqrt`, `^-1` to a
/// reciprocal, numeric constant folding.  Idempotent.
pub fn canonicalize(text: &str) -> Result<String, GrammarError> {
    let tree = interp::interpret(text)
        .map_err(|e| GrammarError::NotInLanguage(format!("{text}: {e}")))?;
    Ok(interp::print(&interp::canonicalize_tree(&tree)))
}

fn compute_min_costs(
    rules: &[Rule],
    nonterminals: &BTreeSet<String>,
) -> BTreeMap<String, usize> {
    const INF: usize = usize::MAX / 4;
    let mut cost: BTreeMap<String, usize> = nonterminals.iter().map(|n| (n.clone(), INF)).collect();
    loop {
        let mut changed = false;
        for rule in rules {
            let rhs_cost: usize = rule
                .rhs
                .iter()
                .filter(|s| nonterminals.contains(*s))
                .map(|s| cost[s])
                .fold(0usize, |a, b| a.saturating_add(b));
            let total = rhs_cost.saturating_add(1);
            if total < cost[&rule.lhs] {
                cost.insert(rule.lhs.clone(), total);
                changed = true;
            }
        }
        if !changed {
            return cost;
        }
    }
}

#[cfg(test)]
mod tests;
