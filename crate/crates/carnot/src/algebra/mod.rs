//! Graded nilpotent Lie algebras with exact rational structure constants.
//!
//! The algebra is the single source of truth for all group arithmetic:
//! validation (antisymmetry by storage, grading compatibility, Jacobi) runs
//! in exact arithmetic at construction; numeric work downstream converts the
//! constants once per scalar type.

mod free;
mod subalgebra;

pub use free::build_free_nilpotent_capped;
pub use subalgebra::{subalgebra_closure, SubalgebraBasis};

use crate::scalar::Scalar;
use crate::Rational;
use num_traits::Zero;
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

pub const DEFAULT_DIMENSION_CAP: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum AlgebraError {
    #[error("grading needs at least one layer and no empty layers")]
    EmptyLayer,
    #[error("basis index {index} out of range 1..={dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("self bracket [e{i},e{i}] is identically zero; triple rejected")]
    SelfBracket { i: usize },
    #[error("duplicate bracket triple ({i},{j},{k})")]
    DuplicateTriple { i: usize, j: usize, k: usize },
    #[error("triple ({i},{j},{k}): layer({k}) != layer({i}) + layer({j})")]
    GradingViolation { i: usize, j: usize, k: usize },
    #[error("Jacobi identity fails on basis triple ({i},{j},{k})")]
    JacobiViolation { i: usize, j: usize, k: usize },
    #[error("omega component {component} is not exactly skew-symmetric")]
    NotSkew { component: usize },
    #[error("omega component {component} has wrong shape")]
    BadOmegaShape { component: usize },
    #[error("total dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("coordinate vector of length {got}; algebra dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid subalgebra basis: {0}")]
    SubalgebraInvalid(&'static str),
}

/// Layer structure V_1 ⊕ … ⊕ V_s. All layers nonempty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grading {
    layer_dims: Vec<usize>,
}

impl Grading {
    pub fn new(layer_dims: Vec<usize>) -> Result<Self, AlgebraError> {
        if layer_dims.is_empty() || layer_dims.iter().any(|&d| d == 0) {
            return Err(AlgebraError::EmptyLayer);
        }
        Ok(Grading { layer_dims })
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.layer_dims.iter().sum()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// 1-based layer of a 0-based coordinate index.
    pub fn layer_of(&self, idx: usize) -> usize {
        let mut acc = 0;
        for (l, &d) in self.layer_dims.iter().enumerate() {
            acc += d;
            if idx < acc {
                return l + 1;
            }
        }
        panic!("coordinate index {idx} out of range");
    }

    /// Coordinate range of a 1-based layer.
    pub fn layer_range(&self, layer: usize) -> std::ops::Range<usize> {
        let start: usize = self.layer_dims[..layer - 1].iter().sum();
        start..start + self.layer_dims[layer - 1]
    }

    /// Coordinates of layers 2..s (the commutator block).
    pub fn commutator_range(&self) -> std::ops::Range<usize> {
        self.layer_dims[0]..self.total_dim()
    }

    /// Q = Σ k·dim V_k; gauge-ball volume scales as r^Q.
    pub fn homogeneous_dimension(&self) -> usize {
        self.layer_dims.iter().enumerate().map(|(l, &d)| (l + 1) * d).sum()
    }

    /// Per-coordinate 1-based layer table.
    pub fn layer_table(&self) -> Vec<u32> {
        let mut t = Vec::with_capacity(self.total_dim());
        for (l, &d) in self.layer_dims.iter().enumerate() {
            t.extend(std::iter::repeat(l as u32 + 1).take(d));
        }
        t
    }
}

/// One structure constant: [e_i, e_j] ∋ c·e_k, 0-based, i < j.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTerm {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub c: Rational,
}

#[derive(Clone, Debug)]
pub struct GradedLieAlgebra {
    grading: Grading,
    /// sorted by (i,j,k); i < j; c != 0
    constants: Vec<StructureTerm>,
    id: u64,
}

impl PartialEq for GradedLieAlgebra {
    fn eq(&self, other: &Self) -> bool {
        self.grading == other.grading && self.constants == other.constants
    }
}

impl GradedLieAlgebra {
    /// Triples are 1-based (i,j,k,c) with i ≠ j; i > j is folded by
    /// antisymmetry; zero coefficients are dropped.
    pub fn new(
        grading: Grading,
        triples: Vec<(usize, usize, usize, Rational)>,
    ) -> Result<Self, AlgebraError> {
        let n = grading.total_dim();
        let mut seen: HashSet<(usize, usize, usize)> = HashSet::new();
        let mut map: BTreeMap<(usize, usize, usize), Rational> = BTreeMap::new();
        for (i1, j1, k1, c) in triples {
            for &idx in [i1, j1, k1].iter() {
                if idx == 0 || idx > n {
                    return Err(AlgebraError::IndexOutOfRange { index: idx, dim: n });
                }
            }
            if i1 == j1 {
                return Err(AlgebraError::SelfBracket { i: i1 });
            }
            let (i, j, c) = if i1 < j1 { (i1 - 1, j1 - 1, c) } else { (j1 - 1, i1 - 1, -c) };
            let k = k1 - 1;
            if !seen.insert((i, j, k)) {
                return Err(AlgebraError::DuplicateTriple { i: i + 1, j: j + 1, k: k + 1 });
            }
            if c.is_zero() {
                continue;
            }
            // grading compatibility before anything else
            if grading.layer_of(k) != grading.layer_of(i) + grading.layer_of(j) {
                return Err(AlgebraError::GradingViolation { i: i + 1, j: j + 1, k: k + 1 });
            }
            *map.entry((i, j, k)).or_insert_with(Rational::zero) += c;
        }
        let constants: Vec<StructureTerm> = map
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((i, j, k), c)| StructureTerm { i, j, k, c })
            .collect();
        let alg = GradedLieAlgebra { id: fingerprint(&grading, &constants), grading, constants };
        alg.check_jacobi()?;
        Ok(alg)
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn dim(&self) -> usize {
        self.grading.total_dim()
    }

    pub fn step(&self) -> usize {
        self.grading.step()
    }

    pub fn constants(&self) -> &[StructureTerm] {
        &self.constants
    }

    /// Stable content fingerprint; group laws and gauges carry it so that
    /// cross-algebra operations can be rejected.
    pub fn id(&self) -> u64 {
        self.id
    }

    /// Structure constants converted once into scalar type S.
    pub fn bracket_table<S: Scalar>(&self) -> Vec<(u32, u32, u32, S)> {
        self.constants
            .iter()
            .map(|t| (t.i as u32, t.j as u32, t.k as u32, S::from_rational(&t.c)))
            .collect()
    }

    /// [x, y] by bilinear expansion. Allocating, validation-grade; hot loops
    /// go through a precompiled `GroupLaw`.
    pub fn bracket<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vec<S>, AlgebraError> {
        let n = self.dim();
        if x.len() != n {
            return Err(AlgebraError::DimensionMismatch { expected: n, got: x.len() });
        }
        if y.len() != n {
            return Err(AlgebraError::DimensionMismatch { expected: n, got: y.len() });
        }
        let mut out = vec![S::zero(); n];
        for t in &self.constants {
            let c = S::from_rational(&t.c);
            let v = x[t.i].clone() * y[t.j].clone() - x[t.j].clone() * y[t.i].clone();
            out[t.k] += c * v;
        }
        Ok(out)
    }

    pub fn basis_vector<S: Scalar>(&self, index_1based: usize) -> Vec<S> {
        let mut v = vec![S::zero(); self.dim()];
        v[index_1based - 1] = S::one();
        v
    }

    /// Sparse bracket of basis vectors e_a, e_b (0-based), sign-resolved.
    fn bracket_basis(&self, a: usize, b: usize) -> Vec<(usize, Rational)> {
        if a == b {
            return Vec::new();
        }
        let (i, j, neg) = if a < b { (a, b, false) } else { (b, a, true) };
        let mut out = Vec::new();
        // constants are sorted by (i,j,k): binary search for the pair block
        let lo = self.constants.partition_point(|t| (t.i, t.j) < (i, j));
        for t in &self.constants[lo..] {
            if (t.i, t.j) != (i, j) {
                break;
            }
            out.push((t.k, if neg { -t.c.clone() } else { t.c.clone() }));
        }
        out
    }

    fn check_jacobi(&self) -> Result<(), AlgebraError> {
        let n = self.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
                    let mut any = false;
                    for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                        for (m, cm) in self.bracket_basis(a, b) {
                            any = true;
                            for (l, cl) in self.bracket_basis(m, c) {
                                *acc.entry(l).or_insert_with(Rational::zero) += &cm * cl;
                            }
                        }
                    }
                    if any && acc.values().any(|v| !v.is_zero()) {
                        return Err(AlgebraError::JacobiViolation { i: i + 1, j: j + 1, k: k + 1 });
                    }
                }
            }
        }
        Ok(())
    }
}

fn fingerprint(grading: &Grading, constants: &[StructureTerm]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
    };
    for &d in grading.layer_dims() {
        eat(&(d as u64).to_le_bytes());
    }
    for t in constants {
        eat(&(t.i as u64).to_le_bytes());
        eat(&(t.j as u64).to_le_bytes());
        eat(&(t.k as u64).to_le_bytes());
        eat(t.c.numer().to_string().as_bytes());
        eat(t.c.denom().to_string().as_bytes());
    }
    h
}

/// Validated algebra from explicit 1-based structure-constant triples.
pub fn build_from_constants(
    grading: Grading,
    triples: Vec<(usize, usize, usize, Rational)>,
) -> Result<GradedLieAlgebra, AlgebraError> {
    GradedLieAlgebra::new(grading, triples)
}

/// Step-2 algebra W ⊕ C with [x,y] = ω(x,y) ∈ C; one exactly skew matrix per
/// central coordinate.
pub fn build_heisenberg_like(
    dim_w: usize,
    dim_c: usize,
    omega: &[Vec<Vec<Rational>>],
) -> Result<GradedLieAlgebra, AlgebraError> {
    if dim_w == 0 || dim_c == 0 {
        return Err(AlgebraError::EmptyLayer);
    }
    if omega.len() != dim_c {
        return Err(AlgebraError::BadOmegaShape { component: omega.len() });
    }
    for (m, mat) in omega.iter().enumerate() {
        if mat.len() != dim_w || mat.iter().any(|row| row.len() != dim_w) {
            return Err(AlgebraError::BadOmegaShape { component: m + 1 });
        }
        for i in 0..dim_w {
            for j in 0..dim_w {
                if mat[i][j] != -mat[j][i].clone() {
                    return Err(AlgebraError::NotSkew { component: m + 1 });
                }
            }
        }
    }
    let grading = Grading::new(vec![dim_w, dim_c])?;
    let mut triples = Vec::new();
    for (m, mat) in omega.iter().enumerate() {
        for i in 0..dim_w {
            for j in (i + 1)..dim_w {
                if !mat[i][j].is_zero() {
                    triples.push((i + 1, j + 1, dim_w + m + 1, mat[i][j].clone()));
                }
            }
        }
    }
    GradedLieAlgebra::new(grading, triples)
}

/// Standard symplectic form on an even-dimensional horizontal layer:
/// ω(e_i, e_{i+m}) = 1 for i ≤ m = dim_w/2.
pub fn standard_symplectic(dim_w: usize) -> Vec<Vec<Rational>> {
    assert!(dim_w % 2 == 0, "symplectic form needs even dimension");
    let m = dim_w / 2;
    let mut mat = vec![vec![Rational::zero(); dim_w]; dim_w];
    for i in 0..m {
        mat[i][i + m] = Rational::from_integer(1.into());
        mat[i + m][i] = -Rational::from_integer(1.into());
    }
    mat
}

/// First Heisenberg group H^1: grading [2,1], [e1,e2] = e3.
pub fn build_heisenberg(dim_w: usize, dim_c: usize) -> Result<GradedLieAlgebra, AlgebraError> {
    if dim_c == 1 && dim_w % 2 == 0 {
        build_heisenberg_like(dim_w, dim_c, &[standard_symplectic(dim_w)])
    } else {
        Err(AlgebraError::BadOmegaShape { component: 1 })
    }
}

/// Coordinate truncation of the ℓ2×ℓ2×ℓ2 example: grading [2k, k] with
/// [x_i, y_i] = z_i, a k-fold product of first Heisenberg groups.
pub fn build_l2_triple_truncation(k: usize) -> Result<GradedLieAlgebra, AlgebraError> {
    if k == 0 {
        return Err(AlgebraError::EmptyLayer);
    }
    let grading = Grading::new(vec![2 * k, k])?;
    let one = Rational::from_integer(1.into());
    let triples =
        (1..=k).map(|i| (i, k + i, 2 * k + i, one.clone())).collect::<Vec<_>>();
    GradedLieAlgebra::new(grading, triples)
}

/// Free nilpotent algebra on `rank` generators at the given step, Hall basis,
/// default dimension cap.
pub fn build_free_nilpotent(rank: usize, step: usize) -> Result<GradedLieAlgebra, AlgebraError> {
    build_free_nilpotent_capped(rank, step, DEFAULT_DIMENSION_CAP)
}

/// Exact per-pair bracket lookup, shared with the Hall reduction tests.
#[cfg(test)]
pub(crate) fn pair_map(
    alg: &GradedLieAlgebra,
) -> std::collections::HashMap<(usize, usize), Vec<(usize, Rational)>> {
    let mut m: std::collections::HashMap<(usize, usize), Vec<(usize, Rational)>> =
        std::collections::HashMap::new();
    for t in alg.constants() {
        m.entry((t.i, t.j)).or_default().push((t.k, t.c.clone()));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn int(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    #[test]
    fn heisenberg_from_constants() {
        let alg = build_from_constants(Grading::new(vec![2, 1]).unwrap(), vec![(1, 2, 3, int(1))])
            .unwrap();
        assert_eq!(alg.dim(), 3);
        assert_eq!(alg.step(), 2);
        assert_eq!(alg.grading().homogeneous_dimension(), 4);
        let e1: Vec<f64> = alg.basis_vector(1);
        let e2: Vec<f64> = alg.basis_vector(2);
        assert_eq!(alg.bracket(&e1, &e2).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(alg.bracket(&e1, &e1).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn grading_violation_detected() {
        let err = build_from_constants(
            Grading::new(vec![2, 1]).unwrap(),
            vec![(1, 2, 3, int(1)), (1, 3, 3, int(1))],
        )
        .unwrap_err();
        assert_eq!(err, AlgebraError::GradingViolation { i: 1, j: 3, k: 3 });
    }

    #[test]
    fn duplicate_triple_detected() {
        let err = build_from_constants(
            Grading::new(vec![2, 1]).unwrap(),
            vec![(1, 2, 3, int(1)), (1, 2, 3, int(2))],
        )
        .unwrap_err();
        assert_eq!(err, AlgebraError::DuplicateTriple { i: 1, j: 2, k: 3 });
    }

    #[test]
    fn jacobi_violation_names_a_triple() {
        // Three generators, layer-2 brackets z1=[e1,e2], z2=[e1,e3],
        // z3=[e2,e3], and a one-dimensional top layer reached by
        // [e3,z1] = [e1,z3] = w, [e2,z2] = c·w. The Jacobi sum over
        // (e1,e2,e3) is [z1,e3] + [z3,e1] - [z2,e2] = (-1-1+c)·w,
        // zero only at c = 2. All other triples land in empty layers.
        let data = |c: i64| {
            vec![
                (1, 2, 4, int(1)),
                (1, 3, 5, int(1)),
                (2, 3, 6, int(1)),
                (3, 4, 7, int(1)),
                (1, 6, 7, int(1)),
                (2, 5, 7, int(c)),
            ]
        };
        let err =
            build_from_constants(Grading::new(vec![3, 3, 1]).unwrap(), data(1)).unwrap_err();
        assert_eq!(err, AlgebraError::JacobiViolation { i: 1, j: 2, k: 3 });
        build_from_constants(Grading::new(vec![3, 3, 1]).unwrap(), data(2)).unwrap();
    }

    #[test]
    fn antisymmetric_completion_folds_reversed_triples() {
        let a = build_from_constants(Grading::new(vec![2, 1]).unwrap(), vec![(2, 1, 3, int(-1))])
            .unwrap();
        let b = build_from_constants(Grading::new(vec![2, 1]).unwrap(), vec![(1, 2, 3, int(1))])
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.id(), b.id());
    }

    #[test]
    fn heisenberg_like_standard_symplectic() {
        let alg = build_heisenberg_like(2, 1, &[standard_symplectic(2)]).unwrap();
        let e1: Vec<f64> = alg.basis_vector(1);
        let e2: Vec<f64> = alg.basis_vector(2);
        assert_eq!(alg.bracket(&e1, &e2).unwrap(), vec![0.0, 0.0, 1.0]);

        let h2 = build_heisenberg_like(4, 1, &[standard_symplectic(4)]).unwrap();
        assert_eq!(h2.dim(), 5);
        let x1: Vec<f64> = h2.basis_vector(1);
        let y1: Vec<f64> = h2.basis_vector(3);
        assert_eq!(h2.bracket(&x1, &y1).unwrap()[4], 1.0);
    }

    #[test]
    fn not_skew_rejected() {
        let omega = vec![vec![vec![int(0), int(1)], vec![int(0), int(0)]]];
        assert_eq!(
            build_heisenberg_like(2, 1, &omega).unwrap_err(),
            AlgebraError::NotSkew { component: 1 }
        );
    }

    #[test]
    fn l2_triple_blocks_commute() {
        let alg = build_l2_triple_truncation(2).unwrap();
        assert_eq!(alg.grading().layer_dims(), &[4, 2]);
        let x1: Vec<f64> = alg.basis_vector(1);
        let y1: Vec<f64> = alg.basis_vector(3);
        let y2: Vec<f64> = alg.basis_vector(4);
        assert_eq!(alg.bracket(&x1, &y1).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(alg.bracket(&x1, &y2).unwrap(), vec![0.0; 6]);
        assert_eq!(build_l2_triple_truncation(3).unwrap().grading().layer_dims(), &[6, 3]);
    }

    #[test]
    fn exact_bracket_agrees_with_f64() {
        let alg = build_free_nilpotent(2, 3).unwrap();
        let x: Vec<Rational> = vec![rat(1, 2), rat(-2, 3), rat(1, 5), rat(0, 1), rat(7, 4)];
        let y: Vec<Rational> = vec![rat(3, 7), rat(1, 9), rat(-1, 2), rat(2, 3), rat(-1, 6)];
        let exact = alg.bracket(&x, &y).unwrap();
        let xf: Vec<f64> = x.iter().map(|r| r.to_f64().unwrap()).collect();
        let yf: Vec<f64> = y.iter().map(|r| r.to_f64().unwrap()).collect();
        let approx = alg.bracket(&xf, &yf).unwrap();
        for (e, a) in exact.iter().zip(&approx) {
            assert!((e.to_f64().unwrap() - a).abs() < 1e-14);
        }
    }

    #[test]
    fn nested_bracket_depth_exceeding_step_vanishes() {
        let alg = build_free_nilpotent(2, 3).unwrap();
        let x: Vec<Rational> = vec![rat(2, 3), rat(-1, 7), rat(5, 2), rat(1, 3), rat(-4, 9)];
        let mut acc = alg.basis_vector::<Rational>(1);
        for _ in 0..alg.step() {
            acc = alg.bracket(&acc, &x).unwrap();
        }
        assert!(acc.iter().all(|c| c.is_zero()), "s+1 nested brackets must vanish");
    }
}
