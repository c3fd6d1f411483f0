use std::fmt;

use nalgebra::{DMatrix, Matrix2, Vector2};

use super::BracketError;
use crate::geometry::FieldSpec;

/// Step of the central differences used for Jacobians of generated brackets.
pub const FD_STEP: f64 = 1e-5;
/// Singular values above this count toward the rank.
pub const RANK_TOL: f64 = 1e-8;
/// Highest supported bracket generation.
pub const MAX_GENERATION: usize = 3;

/// `[F, G](x) = DG(x)·F(x) − DF(x)·G(x)` for catalog fields.
pub fn lie_bracket(f: &FieldSpec, g: &FieldSpec, x: &Vector2<f64>) -> Vector2<f64> {
    let (fv, fj) = f.eval(x);
    let (gv, gj) = g.eval(x);
    gj * fv - fj * gv
}

/// A catalog field or an iterated bracket of catalog fields.
#[derive(Clone, Debug, PartialEq)]
pub enum BracketField {
    /// Mode field with its index in the generating list.
    Base(usize, FieldSpec),
    Bracket(Box<BracketField>, Box<BracketField>),
}

impl fmt::Display for BracketField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BracketField::Base(i, _) => write!(f, "F{i}"),
            BracketField::Bracket(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

impl BracketField {
    pub fn generation(&self) -> usize {
        match self {
            BracketField::Base(..) => 0,
            BracketField::Bracket(a, b) => 1 + a.generation().max(b.generation()),
        }
    }

    pub fn value(&self, x: &Vector2<f64>) -> Vector2<f64> {
        match self {
            BracketField::Base(_, f) => f.value(x),
            BracketField::Bracket(a, b) => b.jacobian(x) * a.value(x) - a.jacobian(x) * b.value(x),
        }
    }

    /// Closed form for catalog fields, central differences otherwise.
    pub fn jacobian(&self, x: &Vector2<f64>) -> Matrix2<f64> {
        match self {
            BracketField::Base(_, f) => f.jacobian(x),
            BracketField::Bracket(..) => {
                let mut j = Matrix2::zeros();
                for c in 0..2 {
                    let mut e = Vector2::zeros();
                    e[c] = FD_STEP;
                    let d = (self.value(&(x + e)) - self.value(&(x - e))) / (2.0 * FD_STEP);
                    j.set_column(c, &d);
                }
                j
            }
        }
    }
}

/// The families `F_0 ⊆ F_1 ⊆ … ⊆ F_n`, where `F_k` adds `[F, G]` for
/// `F ∈ F_0`, `G ∈ F_{k−1}`. Elements are kept in order of first appearance
/// and deduplicated by their bracket expression; self-brackets vanish and
/// are skipped.
#[derive(Clone, Debug)]
pub struct BracketFamily {
    pub generation: usize,
    pub dim: usize,
    pub elements: Vec<BracketField>,
    /// `sizes[k] = |F_k|`.
    pub sizes: Vec<usize>,
}

impl BracketFamily {
    pub fn new(fields: &[FieldSpec], n: usize) -> Result<Self, BracketError> {
        if n > MAX_GENERATION {
            return Err(BracketError::GenerationTooHigh(n));
        }
        let dim = fields.first().map_or(0, FieldSpec::dim);
        if dim == 0 || fields.iter().any(|f| f.dim() != dim) {
            return Err(BracketError::InvalidFields("need fields of one common dimension".into()));
        }
        let base: Vec<BracketField> = fields
            .iter()
            .enumerate()
            .map(|(i, f)| BracketField::Base(i, f.clone()))
            .collect();
        let mut elements = base.clone();
        let mut labels: Vec<String> = elements.iter().map(|e| e.to_string()).collect();
        let mut sizes = vec![elements.len()];
        for _ in 0..n {
            let prev = elements.clone();
            for f in &base {
                for g in &prev {
                    if f.to_string() == g.to_string() {
                        continue;
                    }
                    let b = BracketField::Bracket(Box::new(f.clone()), Box::new(g.clone()));
                    let label = b.to_string();
                    if !labels.contains(&label) {
                        labels.push(label);
                        elements.push(b);
                    }
                }
            }
            sizes.push(elements.len());
        }
        Ok(BracketFamily {
            generation: n,
            dim,
            elements,
            sizes,
        })
    }

    /// Columns `dim × |F_n|` of the family evaluated at `x`.
    pub fn matrix(&self, x: &Vector2<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.elements.len());
        for (c, e) in self.elements.iter().enumerate() {
            let v = e.value(x);
            for r in 0..self.dim {
                m[(r, c)] = v[r];
            }
        }
        m
    }
}

/// Rank of `F_n(x)` with a spanning subset of the same size.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketRank {
    pub rank: usize,
    pub witness: Vec<String>,
    pub singular_values: Vec<f64>,
}

/// Rank of the span of `F_n` at `x`.
pub fn weak_bracket_rank(fields: &[FieldSpec], n: usize, x: &Vector2<f64>) -> Result<BracketRank, BracketError> {
    let fam = BracketFamily::new(fields, n)?;
    Ok(family_rank(&fam, x))
}

pub fn family_rank(fam: &BracketFamily, x: &Vector2<f64>) -> BracketRank {
    let m = fam.matrix(x);
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let rank = sv.iter().filter(|&&s| s > RANK_TOL).count();
    // Greedy witness: add a column whenever it raises the rank.
    let mut witness = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    for c in 0..m.ncols() {
        if chosen.len() == rank {
            break;
        }
        let mut trial = chosen.clone();
        trial.push(c);
        let sub = m.select_columns(&trial);
        let s = sub.svd(false, false).singular_values;
        if s.iter().filter(|&&v| v > RANK_TOL).count() == trial.len() {
            chosen = trial;
            witness.push(fam.elements[c].to_string());
        }
    }
    BracketRank {
        rank,
        witness,
        singular_values: sv,
    }
}
