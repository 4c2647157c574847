//! Subalgebra bases: per-layer orthonormal spanning sets, bracket closure,
//! gradedness detection. Sampling on subgroups requires graded bases, so the
//! closure flags any non-graded result rather than silently fixing it.

use super::{AlgebraError, GradedLieAlgebra};

/// Rank decisions in closure and membership tests.
const PIVOT_TOL: f64 = 1e-10;
/// Gradedness and ideal membership decisions.
const MEMBER_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SubalgebraBasis {
    algebra_id: u64,
    ambient_dim: usize,
    vectors: Vec<Vec<f64>>,
    /// Homogeneity layer per vector (1-based); for a non-graded basis this is
    /// the lowest layer with a nonzero component.
    layers: Vec<usize>,
    graded: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Modified Gram-Schmidt step: returns the unit residual of `v` against the
/// orthonormal set, or None when `v` is dependent at relative tolerance.
fn gs_residual(basis: &[Vec<f64>], v: &[f64]) -> Option<Vec<f64>> {
    let scale = norm(v).max(1.0);
    let mut r = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&r, b);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= c * bi;
            }
        }
    }
    let n = norm(&r);
    if n <= PIVOT_TOL * scale {
        return None;
    }
    for ri in r.iter_mut() {
        *ri /= n;
    }
    Some(r)
}

fn apply_bracket(table: &[(u32, u32, u32, f64)], x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for &(i, j, k, c) in table {
        out[k as usize] += c * (x[i as usize] * y[j as usize] - x[j as usize] * y[i as usize]);
    }
    out
}

impl SubalgebraBasis {
    /// The whole algebra as a subalgebra of itself.
    pub fn full(algebra: &GradedLieAlgebra) -> SubalgebraBasis {
        let n = algebra.dim();
        let vectors = (1..=n).map(|i| algebra.basis_vector::<f64>(i)).collect();
        SubalgebraBasis {
            algebra_id: algebra.id(),
            ambient_dim: n,
            vectors,
            layers: algebra.grading().layer_table().iter().map(|&l| l as usize).collect(),
            graded: true,
        }
    }

    /// Basis from user vectors. Each vector must be layer-homogeneous and the
    /// span must be bracket-closed; vectors are orthonormalized per layer.
    pub fn from_vectors(
        algebra: &GradedLieAlgebra,
        vectors: &[Vec<f64>],
    ) -> Result<SubalgebraBasis, AlgebraError> {
        let n = algebra.dim();
        let grading = algebra.grading();
        let mut homogeneous: Vec<(usize, &Vec<f64>)> = Vec::new();
        for v in vectors {
            if v.len() != n {
                return Err(AlgebraError::DimensionMismatch { expected: n, got: v.len() });
            }
            let total = norm(v);
            if total <= PIVOT_TOL {
                return Err(AlgebraError::SubalgebraInvalid("zero vector in basis"));
            }
            let mut layer = None;
            for l in 1..=grading.step() {
                let r = grading.layer_range(l);
                let part = norm(&v[r]);
                if part > MEMBER_TOL * total {
                    if layer.is_some() {
                        return Err(AlgebraError::SubalgebraInvalid(
                            "basis vector mixes layers",
                        ));
                    }
                    layer = Some(l);
                }
            }
            homogeneous.push((layer.expect("nonzero vector has a layer"), v));
        }
        let mut out_vectors = Vec::new();
        let mut out_layers = Vec::new();
        for l in 1..=grading.step() {
            for (vl, v) in homogeneous.iter().filter(|(vl, _)| *vl == l) {
                match gs_residual(&out_vectors, v) {
                    Some(r) => {
                        out_vectors.push(r);
                        out_layers.push(*vl);
                    }
                    None => {
                        return Err(AlgebraError::SubalgebraInvalid(
                            "basis vectors are linearly dependent",
                        ))
                    }
                }
            }
        }
        let basis = SubalgebraBasis {
            algebra_id: algebra.id(),
            ambient_dim: n,
            vectors: out_vectors,
            layers: out_layers,
            graded: true,
        };
        let table = algebra.bracket_table::<f64>();
        for a in &basis.vectors {
            for b in &basis.vectors {
                let w = apply_bracket(&table, a, b);
                if !basis.contains_vector(&w, MEMBER_TOL) {
                    return Err(AlgebraError::SubalgebraInvalid("span is not bracket-closed"));
                }
            }
        }
        Ok(basis)
    }

    pub fn algebra_id(&self) -> u64 {
        self.algebra_id
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_full(&self) -> bool {
        self.vectors.len() == self.ambient_dim
    }

    pub fn is_graded(&self) -> bool {
        self.graded
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    /// Ambient vector from internal coefficients.
    pub fn embed(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.vectors.len());
        let mut out = vec![0.0; self.ambient_dim];
        for (c, v) in coeffs.iter().zip(&self.vectors) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += c * vi;
            }
        }
        out
    }

    /// Internal coefficients of an ambient vector (orthonormal projection).
    pub fn project_coeffs(&self, v: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|b| dot(v, b)).collect()
    }

    pub fn contains_vector(&self, v: &[f64], tol: f64) -> bool {
        let scale = norm(v).max(1.0);
        let mut r = v.to_vec();
        for b in &self.vectors {
            let c = dot(&r, b);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= c * bi;
            }
        }
        norm(&r) <= tol * scale
    }

    pub fn contains(&self, other: &SubalgebraBasis, tol: f64) -> bool {
        self.algebra_id == other.algebra_id
            && other.vectors.iter().all(|v| self.contains_vector(v, tol))
    }

    pub fn same_span(&self, other: &SubalgebraBasis, tol: f64) -> bool {
        self.dim() == other.dim() && self.contains(other, tol)
    }

    /// True when [g, w] stays in the span for every ambient basis g.
    pub fn is_ideal(&self, algebra: &GradedLieAlgebra) -> bool {
        assert_eq!(algebra.id(), self.algebra_id, "ideal check against wrong algebra");
        let table = algebra.bracket_table::<f64>();
        let n = self.ambient_dim;
        for i in 1..=n {
            let e = algebra.basis_vector::<f64>(i);
            for w in &self.vectors {
                if !self.contains_vector(&apply_bracket(&table, &e, w), MEMBER_TOL) {
                    return false;
                }
            }
        }
        true
    }
}

/// Smallest bracket-closed subspace containing the generators. The result is
/// orthonormal; when the span is compatible with the grading the basis is
/// rebuilt layer by layer and marked graded.
pub fn subalgebra_closure(
    algebra: &GradedLieAlgebra,
    generators: &[Vec<f64>],
) -> Result<SubalgebraBasis, AlgebraError> {
    let n = algebra.dim();
    for g in generators {
        if g.len() != n {
            return Err(AlgebraError::DimensionMismatch { expected: n, got: g.len() });
        }
    }
    let table = algebra.bracket_table::<f64>();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for g in generators {
        if let Some(r) = gs_residual(&basis, g) {
            basis.push(r);
        }
    }
    // saturate under brackets; new vectors only pair against the frontier
    let mut processed = 0;
    while processed < basis.len() {
        let start = processed;
        processed = basis.len();
        for a in 0..basis.len() {
            for b in start.max(a + 1)..basis.len() {
                let w = apply_bracket(&table, &basis[a], &basis[b]);
                if let Some(r) = gs_residual(&basis, &w) {
                    basis.push(r);
                }
            }
        }
    }

    let grading = algebra.grading();
    let graded = basis.iter().all(|v| {
        (1..=grading.step()).all(|l| {
            let mut p = vec![0.0; n];
            let range = grading.layer_range(l);
            p[range.clone()].copy_from_slice(&v[range]);
            let pn = norm(&p);
            pn <= MEMBER_TOL || span_contains(&basis, &p, MEMBER_TOL)
        })
    });

    if graded {
        let mut vectors = Vec::new();
        let mut layers = Vec::new();
        for l in 1..=grading.step() {
            let range = grading.layer_range(l);
            let mut layer_basis: Vec<Vec<f64>> = Vec::new();
            for v in &basis {
                let mut p = vec![0.0; n];
                p[range.clone()].copy_from_slice(&v[range.clone()]);
                if let Some(r) = gs_residual(&layer_basis, &p) {
                    layer_basis.push(r);
                }
            }
            for lb in layer_basis {
                vectors.push(lb);
                layers.push(l);
            }
        }
        assert_eq!(vectors.len(), basis.len(), "graded re-expression changed dimension");
        Ok(SubalgebraBasis {
            algebra_id: algebra.id(),
            ambient_dim: n,
            vectors,
            layers,
            graded: true,
        })
    } else {
        let layers = basis
            .iter()
            .map(|v| {
                (1..=grading.step())
                    .find(|&l| norm(&v[grading.layer_range(l)]) > MEMBER_TOL)
                    .unwrap_or(1)
            })
            .collect();
        Ok(SubalgebraBasis {
            algebra_id: algebra.id(),
            ambient_dim: n,
            vectors: basis,
            layers,
            graded: false,
        })
    }
}

fn span_contains(basis: &[Vec<f64>], v: &[f64], tol: f64) -> bool {
    let scale = norm(v).max(1.0);
    let mut r = v.to_vec();
    for b in basis {
        let c = dot(&r, b);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= c * bi;
        }
    }
    norm(&r) <= tol * scale
}
