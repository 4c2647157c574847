//! Group law in exponential coordinates.
//!
//! The product is the truncated product series compiled to a fixed list of
//! nested-bracket words at law construction, so multiply is straight-line
//! polynomial evaluation with no symbolic work. Identity is the zero vector,
//! inverse is coordinate negation.

mod bcdh;

use crate::algebra::{GradedLieAlgebra, Grading};
use crate::scalar::Scalar;
use std::sync::Arc;
use thiserror::Error;

/// Highest nilpotency step with compiled product words.
pub const MAX_LAW_STEP: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum GroupError {
    #[error("group law supports step <= {max}, algebra has step {step}")]
    UnsupportedStep { step: usize, max: usize },
    #[error("elements belong to different algebras")]
    AlgebraMismatch,
    #[error("coordinate vector of length {got}; group dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },
    #[error("domain violation: {0}")]
    DomainViolation(&'static str),
}

struct CompiledWord<S> {
    coeff: S,
    letters: Box<[u8]>,
}

/// Product, bracket and dilation tables for one algebra and scalar type.
pub struct GroupLaw<S: Scalar> {
    grading: Grading,
    algebra_id: u64,
    layer_of: Vec<u32>,
    terms: Vec<(u32, u32, u32, S)>,
    words: Vec<CompiledWord<S>>,
}

impl<S: Scalar> std::fmt::Debug for GroupLaw<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroupLaw")
            .field("algebra_id", &self.algebra_id)
            .field("layer_dims", &self.grading.layer_dims())
            .field("words", &self.words.len())
            .finish()
    }
}

/// Reusable buffers for `multiply_into`.
pub struct MulScratch<S> {
    cur: Vec<S>,
    nxt: Vec<S>,
}

impl<S: Scalar> GroupLaw<S> {
    pub fn new(algebra: &GradedLieAlgebra) -> Result<Self, GroupError> {
        let step = algebra.step();
        if step > MAX_LAW_STEP {
            return Err(GroupError::UnsupportedStep { step, max: MAX_LAW_STEP });
        }
        let words = bcdh::dynkin_words(step)
            .into_iter()
            .map(|(c, letters)| CompiledWord { coeff: S::from_rational(&c), letters })
            .collect();
        Ok(GroupLaw {
            grading: algebra.grading().clone(),
            algebra_id: algebra.id(),
            layer_of: algebra.grading().layer_table(),
            terms: algebra.bracket_table(),
            words,
        })
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn dim(&self) -> usize {
        self.layer_of.len()
    }

    pub fn step(&self) -> usize {
        self.grading.step()
    }

    pub fn algebra_id(&self) -> u64 {
        self.algebra_id
    }

    pub fn identity(&self) -> Vec<S> {
        vec![S::zero(); self.dim()]
    }

    pub fn scratch(&self) -> MulScratch<S> {
        MulScratch { cur: Vec::with_capacity(self.dim()), nxt: Vec::with_capacity(self.dim()) }
    }

    fn check_dim(&self, v: &[S]) -> Result<(), GroupError> {
        if v.len() != self.dim() {
            return Err(GroupError::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    pub fn bracket_into(&self, x: &[S], y: &[S], out: &mut Vec<S>) {
        out.clear();
        out.resize(self.dim(), S::zero());
        for (i, j, k, c) in &self.terms {
            let (i, j, k) = (*i as usize, *j as usize, *k as usize);
            let v = x[i].clone() * y[j].clone() - x[j].clone() * y[i].clone();
            if !v.is_zero() {
                out[k] += c.clone() * v;
            }
        }
    }

    pub fn bracket(&self, x: &[S], y: &[S]) -> Vec<S> {
        let mut out = Vec::new();
        self.bracket_into(x, y, &mut out);
        out
    }

    /// Product series evaluation; `out` gets x·y.
    pub fn multiply_into(&self, x: &[S], y: &[S], out: &mut Vec<S>, scratch: &mut MulScratch<S>) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        out.clear();
        out.extend(x.iter().zip(y).map(|(a, b)| a.clone() + b.clone()));
        for word in &self.words {
            let letters = &word.letters;
            let n = letters.len();
            let pick = |l: u8| if l == bcdh::X { x } else { y };
            scratch.cur.clear();
            scratch.cur.extend_from_slice(pick(letters[n - 1]));
            for i in (0..n - 1).rev() {
                self.bracket_into(pick(letters[i]), &scratch.cur, &mut scratch.nxt);
                std::mem::swap(&mut scratch.cur, &mut scratch.nxt);
            }
            for (o, v) in out.iter_mut().zip(&scratch.cur) {
                if !v.is_zero() {
                    *o += word.coeff.clone() * v.clone();
                }
            }
        }
    }

    pub fn multiply(&self, x: &[S], y: &[S]) -> Result<Vec<S>, GroupError> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let mut out = Vec::with_capacity(self.dim());
        let mut scratch = self.scratch();
        self.multiply_into(x, y, &mut out, &mut scratch);
        Ok(out)
    }

    pub fn inverse(&self, x: &[S]) -> Vec<S> {
        x.iter().map(|c| -c.clone()).collect()
    }

    /// δ_λ: layer-k coordinates scale by λ^k. λ = 0 collapses to the
    /// identity; negative λ is allowed.
    pub fn dilate(&self, lambda: &S, x: &[S]) -> Vec<S> {
        let mut powers = Vec::with_capacity(self.step() + 1);
        powers.push(S::one());
        let mut p = S::one();
        for _ in 1..=self.step() {
            p = p * lambda.clone();
            powers.push(p.clone());
        }
        x.iter()
            .zip(&self.layer_of)
            .map(|(xi, &l)| powers[l as usize].clone() * xi.clone())
            .collect()
    }

    /// Layer-1 block, the abelianization coordinates.
    pub fn project_layer1<'a>(&self, x: &'a [S]) -> &'a [S] {
        &x[..self.grading.layer_dims()[0]]
    }

    /// ψ_x(y) = xy − x for x supported on layer 1 and y supported on the
    /// commutator block; the result again has a zero layer-1 block.
    pub fn psi(&self, x: &[S], y: &[S]) -> Result<Vec<S>, GroupError> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let d1 = self.grading.layer_dims()[0];
        if x[d1..].iter().any(|c| !c.is_zero()) {
            return Err(GroupError::DomainViolation("psi: x must lie in layer 1"));
        }
        if y[..d1].iter().any(|c| !c.is_zero()) {
            return Err(GroupError::DomainViolation(
                "psi: y must lie in the commutator subgroup",
            ));
        }
        let mut out = self.multiply(x, y)?;
        for (o, xi) in out.iter_mut().zip(x) {
            *o -= xi.clone();
        }
        debug_assert!(out[..d1].iter().all(|c| c.is_zero()));
        Ok(out)
    }
}

/// Jacobian determinant of y ↦ ψ_x(y) restricted to the commutator block,
/// by central finite differences at y.
pub fn psi_jacobian_det(
    law: &GroupLaw<f64>,
    x: &[f64],
    y: &[f64],
    fd_step: f64,
) -> Result<f64, GroupError> {
    let d1 = law.grading().layer_dims()[0];
    let n = law.dim() - d1;
    let mut jac = vec![vec![0.0; n]; n];
    let mut yp = y.to_vec();
    for b in 0..n {
        yp[d1 + b] = y[d1 + b] + fd_step;
        let fp = law.psi(x, &yp)?;
        yp[d1 + b] = y[d1 + b] - fd_step;
        let fm = law.psi(x, &yp)?;
        yp[d1 + b] = y[d1 + b];
        for (a, row) in jac.iter_mut().enumerate() {
            row[b] = (fp[d1 + a] - fm[d1 + a]) / (2.0 * fd_step);
        }
    }
    Ok(crate::linalg::lu_det(jac))
}

/// A point of the group: coordinates plus a shared law handle.
#[derive(Clone, Debug)]
pub struct GroupElement<S: Scalar> {
    law: Arc<GroupLaw<S>>,
    coords: Vec<S>,
}

impl<S: Scalar> PartialEq for GroupElement<S> {
    fn eq(&self, other: &Self) -> bool {
        self.law.algebra_id == other.law.algebra_id && self.coords == other.coords
    }
}

impl<S: Scalar> GroupElement<S> {
    pub fn new(law: Arc<GroupLaw<S>>, coords: Vec<S>) -> Result<Self, GroupError> {
        if coords.len() != law.dim() {
            return Err(GroupError::DimensionMismatch { expected: law.dim(), got: coords.len() });
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite_scalar()) {
            return Err(GroupError::NonFinite { index });
        }
        Ok(GroupElement { law, coords })
    }

    pub fn identity(law: Arc<GroupLaw<S>>) -> Self {
        let coords = law.identity();
        GroupElement { law, coords }
    }

    pub fn law(&self) -> &Arc<GroupLaw<S>> {
        &self.law
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<S> {
        self.coords
    }

    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    fn check_same(&self, other: &Self) -> Result<(), GroupError> {
        if self.law.algebra_id != other.law.algebra_id {
            return Err(GroupError::AlgebraMismatch);
        }
        Ok(())
    }

    pub fn multiply(&self, other: &Self) -> Result<Self, GroupError> {
        self.check_same(other)?;
        let coords = self.law.multiply(&self.coords, &other.coords)?;
        Ok(GroupElement { law: self.law.clone(), coords })
    }

    pub fn inverse(&self) -> Self {
        GroupElement { law: self.law.clone(), coords: self.law.inverse(&self.coords) }
    }

    pub fn dilate(&self, lambda: &S) -> Self {
        GroupElement { law: self.law.clone(), coords: self.law.dilate(lambda, &self.coords) }
    }

    /// x y x⁻¹ y⁻¹.
    pub fn group_commutator(&self, other: &Self) -> Result<Self, GroupError> {
        self.check_same(other)?;
        self.multiply(other)?.multiply(&self.inverse())?.multiply(&other.inverse())
    }

    pub fn abelianization_project(&self) -> Vec<S> {
        self.law.project_layer1(&self.coords).to_vec()
    }
}

/// Element-level ψ; see `GroupLaw::psi`.
pub fn psi<S: Scalar>(
    x: &GroupElement<S>,
    y: &GroupElement<S>,
) -> Result<GroupElement<S>, GroupError> {
    if x.law.algebra_id != y.law.algebra_id {
        return Err(GroupError::AlgebraMismatch);
    }
    let coords = x.law.psi(&x.coords, &y.coords)?;
    Ok(GroupElement { law: x.law.clone(), coords })
}
