//! Dynkin-form product series, compiled once per step.
//!
//! Terms are indexed by block sequences ((r_1,s_1),…,(r_k,s_k)) with
//! r_i + s_i >= 1 and total degree n = Σ(r_i+s_i) <= step. Each sequence
//! contributes the right-nested bracket of the word x^{r_1} y^{s_1} … with
//! coefficient (-1)^{k-1} / (k · n · Π r_i! s_i!). Words whose last two
//! letters agree have a vanishing innermost bracket and are dropped; the
//! remaining words are canonicalized to end in (x,y) and merged by word.

use crate::Rational;
use num_traits::Zero;
use std::collections::BTreeMap;

pub const X: u8 = 0;
pub const Y: u8 = 1;

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Degree >= 2 bracket words for log(exp x · exp y) truncated at `step`,
/// sorted by (degree, letters). The degree-1 part is exactly x + y and is
/// handled by the caller.
pub(crate) fn dynkin_words(step: usize) -> Vec<(Rational, Box<[u8]>)> {
    let mut acc: BTreeMap<Vec<u8>, Rational> = BTreeMap::new();
    let mut word = Vec::with_capacity(step);
    extend_blocks(step, &mut word, 0, 1, &mut acc);
    let mut out: Vec<(Rational, Box<[u8]>)> = acc
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(w, c)| (c, w.into_boxed_slice()))
        .collect();
    out.sort_by(|a, b| (a.1.len(), a.1.as_ref()).cmp(&(b.1.len(), b.1.as_ref())));
    out
}

fn extend_blocks(
    step: usize,
    word: &mut Vec<u8>,
    blocks: usize,
    fact_prod: u64,
    acc: &mut BTreeMap<Vec<u8>, Rational>,
) {
    let n = word.len();
    if blocks >= 1 && n >= 2 {
        emit(word, blocks, fact_prod, acc);
    }
    if n == step {
        return;
    }
    for r in 0..=(step - n) {
        for s in 0..=(step - n - r) {
            if r + s == 0 {
                continue;
            }
            word.extend(std::iter::repeat(X).take(r));
            word.extend(std::iter::repeat(Y).take(s));
            let f = fact_prod * factorial(r) * factorial(s);
            extend_blocks(step, word, blocks + 1, f, acc);
            word.truncate(n);
        }
    }
}

fn emit(word: &[u8], blocks: usize, fact_prod: u64, acc: &mut BTreeMap<Vec<u8>, Rational>) {
    let n = word.len();
    if word[n - 1] == word[n - 2] {
        return;
    }
    let mut canonical = word.to_vec();
    let mut sign: i64 = if blocks % 2 == 1 { 1 } else { -1 };
    if canonical[n - 1] == X {
        canonical.swap(n - 2, n - 1);
        sign = -sign;
    }
    let denom = (blocks as u64 * n as u64 * fact_prod) as i64;
    let coeff = Rational::new(sign.into(), denom.into());
    *acc.entry(canonical).or_insert_with(Rational::zero) += coeff;
}
