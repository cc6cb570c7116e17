//! Derivation recovery: memoized span parsing of a token string against
//! the grammar, emitting the canonical leftmost derivation (preorder rule
//! indices, preferring lowest rule indices at each choice point).

use std::collections::HashMap;

use super::Grammar;

struct Ctx<'g> {
    g: &'g Grammar,
    tokens: Vec<String>,
    /// (nonterminal, start, end) -> derivation or known failure.
    memo: HashMap<(String, usize, usize), Option<Vec<usize>>>,
    in_progress: std::collections::HashSet<(String, usize, usize)>,
    /// Minimum terminal yield per nonterminal, for split pruning.
    min_tokens: HashMap<String, usize>,
}

/// Parse `tokens` as the grammar's start symbol; returns the preorder rule
/// index list of the canonical derivation, or `None` if underivable.
pub(super) fn derivation(g: &Grammar, tokens: &[String]) -> Option<Vec<usize>> {
    let min_tokens = compute_min_tokens(g);
    let mut ctx = Ctx {
        g,
        tokens: tokens.to_vec(),
        memo: HashMap::new(),
        in_progress: Default::default(),
        min_tokens,
    };
    let n = ctx.tokens.len();
    parse_nt(&mut ctx, g.start(), 0, n)
}

fn parse_nt(ctx: &mut Ctx, nt: &str, i: usize, j: usize) -> Option<Vec<usize>> {
    if j <= i {
        return None; // no epsilon productions
    }
    let key = (nt.to_string(), i, j);
    if let Some(hit) = ctx.memo.get(&key) {
        return hit.clone();
    }
    if !ctx.in_progress.insert(key.clone()) {
        return None;
    }
    let mut result = None;
    for (idx, rule) in ctx.g.rules().iter().enumerate() {
        if rule.lhs != nt {
            continue;
        }
        let rhs = rule.rhs.clone();
        if let Some(children) = match_rhs(ctx, &rhs, 0, i, j) {
            let mut deriv = vec![idx];
            deriv.extend(children);
            result = Some(deriv);
            break; // lowest rule index wins
        }
    }
    ctx.in_progress.remove(&key);
    ctx.memo.insert(key, result.clone());
    result
}

/// Match `rhs[pos..]` against `tokens[i..j]`, returning the concatenated
/// child derivations in left-to-right order.
fn match_rhs(ctx: &mut Ctx, rhs: &[String], pos: usize, i: usize, j: usize) -> Option<Vec<usize>> {
    if pos == rhs.len() {
        return if i == j { Some(Vec::new()) } else { None };
    }
    let sym = &rhs[pos];
    let rest_min: usize = rhs[pos + 1..].iter().map(|s| min_yield(ctx, s)).sum();
    if ctx.g.nonterminals().contains(sym) {
        let my_min = min_yield(ctx, sym);
        let hi = j.saturating_sub(rest_min);
        let mut k = i + my_min;
        while k <= hi {
            if let Some(head) = parse_nt(ctx, sym, i, k) {
                if let Some(tail) = match_rhs(ctx, rhs, pos + 1, k, j) {
                    let mut out = head;
                    out.extend(tail);
                    return Some(out);
                }
            }
            k += 1;
        }
        None
    } else {
        if i < j && ctx.tokens[i] == *sym {
            match_rhs(ctx, rhs, pos + 1, i + 1, j)
        } else {
            None
        }
    }
}

fn min_yield(ctx: &Ctx, sym: &str) -> usize {
    if ctx.g.nonterminals().contains(sym) {
        ctx.min_tokens.get(sym).copied().unwrap_or(1)
    } else {
        1
    }
}

fn compute_min_tokens(g: &Grammar) -> HashMap<String, usize> {
    const INF: usize = usize::MAX / 4;
    let mut min: HashMap<String, usize> =
        g.nonterminals().iter().map(|n| (n.clone(), INF)).collect();
    loop {
        let mut changed = false;
        for rule in g.rules() {
            let total: usize = rule
                .rhs
                .iter()
                .map(|s| {
                    if g.nonterminals().contains(s) {
                        min[s]
                    } else {
                        1
                    }
                })
                .fold(0usize, |a, b| a.saturating_add(b));
            if total < min[&rule.lhs] {
                min.insert(rule.lhs.clone(), total);
                changed = true;
            }
        }
        if !changed {
            return min;
        }
    }
}
