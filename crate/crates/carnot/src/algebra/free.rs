//! Free nilpotent Lie algebras on a Hall basis.
//!
//! Hall set convention: generators e1 < e2 < …; [u,v] is a Hall element iff
//! u < v and (v is a generator, or v = [v1,v2] with v1 <= u); elements are
//! ordered by degree, then by creation order. Non-Hall pairs reduce through
//! the Jacobi rewrite [u,[a,b]] = [a,[u,b]] - [b,[u,a]], valid when u < a.

use super::{AlgebraError, GradedLieAlgebra, Grading};
use crate::Rational;
use num_traits::Zero;
use std::collections::{BTreeMap, HashMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum HallElem {
    Gen(usize),
    Br(usize, usize),
}

struct HallSet {
    elems: Vec<HallElem>,
    degree: Vec<usize>,
    step: usize,
    /// (u,v) -> basis index for Hall pairs
    pair_index: HashMap<(usize, usize), usize>,
}

type LinComb = BTreeMap<usize, Rational>;

impl HallSet {
    fn new(rank: usize, step: usize) -> Self {
        let mut elems: Vec<HallElem> = (0..rank).map(HallElem::Gen).collect();
        let mut degree = vec![1usize; rank];
        let mut pair_index = HashMap::new();
        let mut by_degree: Vec<Vec<usize>> = vec![(0..rank).collect()];
        for d in 2..=step {
            let mut fresh = Vec::new();
            for du in 1..=(d / 2) {
                let dv = d - du;
                for &u in &by_degree[du - 1] {
                    for &v in &by_degree[dv - 1] {
                        if u >= v {
                            continue;
                        }
                        let ok = match elems[v] {
                            HallElem::Gen(_) => true,
                            HallElem::Br(v1, _) => v1 <= u,
                        };
                        if ok {
                            let idx = elems.len();
                            elems.push(HallElem::Br(u, v));
                            degree.push(d);
                            pair_index.insert((u, v), idx);
                            fresh.push(idx);
                        }
                    }
                }
            }
            by_degree.push(fresh);
        }
        HallSet { elems, degree, step, pair_index }
    }

    fn is_hall_pair(&self, u: usize, v: usize) -> bool {
        u < v
            && match self.elems[v] {
                HallElem::Gen(_) => true,
                HallElem::Br(v1, _) => v1 <= u,
            }
    }

    /// [e_u, e_v] as a Hall-basis combination, exact.
    fn reduce(&self, u: usize, v: usize, memo: &mut HashMap<(usize, usize), LinComb>) -> LinComb {
        if u == v {
            return LinComb::new();
        }
        if u > v {
            return negate(self.reduce(v, u, memo));
        }
        if self.degree[u] + self.degree[v] > self.step {
            return LinComb::new();
        }
        if let Some(hit) = memo.get(&(u, v)) {
            return hit.clone();
        }
        let result = if self.is_hall_pair(u, v) {
            let mut one = LinComb::new();
            one.insert(self.pair_index[&(u, v)], Rational::from_integer(1.into()));
            one
        } else {
            // v = [a,b] with u < a < b: [u,[a,b]] = [a,[u,b]] - [b,[u,a]]
            let (a, b) = match self.elems[v] {
                HallElem::Br(a, b) => (a, b),
                HallElem::Gen(_) => unreachable!("non-Hall pair with generator right side"),
            };
            debug_assert!(u < a && a < b);
            let ub = self.reduce(u, b, memo);
            let ua = self.reduce(u, a, memo);
            let mut acc = LinComb::new();
            for (m, c) in &ub {
                accumulate(&mut acc, self.reduce(a, *m, memo), c);
            }
            let minus_one = -Rational::from_integer(1.into());
            for (m, c) in &ua {
                accumulate(&mut acc, self.reduce(b, *m, memo), &(c * &minus_one));
            }
            acc.retain(|_, c| !c.is_zero());
            acc
        };
        memo.insert((u, v), result.clone());
        result
    }
}

fn negate(mut l: LinComb) -> LinComb {
    for c in l.values_mut() {
        *c = -c.clone();
    }
    l
}

fn accumulate(acc: &mut LinComb, inc: LinComb, scale: &Rational) {
    for (k, c) in inc {
        *acc.entry(k).or_insert_with(Rational::zero) += c * scale;
    }
}

pub fn build_free_nilpotent_capped(
    rank: usize,
    step: usize,
    cap: usize,
) -> Result<GradedLieAlgebra, AlgebraError> {
    if rank == 0 || step == 0 {
        return Err(AlgebraError::EmptyLayer);
    }
    let hall = HallSet::new(rank, step);
    let dim = hall.elems.len();
    if dim > cap {
        return Err(AlgebraError::DimensionCap { dim, cap });
    }
    let mut layer_dims = vec![0usize; step];
    for &d in &hall.degree {
        layer_dims[d - 1] += 1;
    }
    // rank 1 has no elements beyond degree 1; drop trailing empty layers
    while layer_dims.last() == Some(&0) {
        layer_dims.pop();
    }
    let grading = Grading::new(layer_dims)?;
    let mut memo = HashMap::new();
    let mut triples = Vec::new();
    for u in 0..dim {
        for v in (u + 1)..dim {
            for (k, c) in hall.reduce(u, v, &mut memo) {
                triples.push((u + 1, v + 1, k + 1, c));
            }
        }
    }
    // validation (grading + exact Jacobi) doubles as a check on the reduction
    GradedLieAlgebra::new(grading, triples)
}
