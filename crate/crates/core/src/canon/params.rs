//! Formula sets over relations and the learnable canonicalization
//! parameters behind the transitivity / converse probabilities.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::RelationVocab;

/// Known logical properties of relations: which are transitive, and which
/// ordered pairs `(r, r')` satisfy `r(x, y) => r'(y, x)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FormulaSet {
    pub transitive: BTreeSet<usize>,
    pub converse: BTreeSet<(usize, usize)>,
}

/// Name-level form of a [`FormulaSet`] as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormulaSetFile {
    #[serde(default)]
    pub transitive: Vec<String>,
    #[serde(default)]
    pub converse: Vec<(String, String)>,
}

impl FormulaSet {
    pub fn new(
        transitive: impl IntoIterator<Item = usize>,
        converse: impl IntoIterator<Item = (usize, usize)>,
        n_relations: usize,
    ) -> Result<Self> {
        let f = FormulaSet {
            transitive: transitive.into_iter().collect(),
            converse: converse.into_iter().collect(),
        };
        f.validate(n_relations)?;
        Ok(f)
    }

    pub fn validate(&self, n_relations: usize) -> Result<()> {
        for &r in &self.transitive {
            if r >= n_relations {
                return Err(Error::Vocab(format!(
                    "transitive relation id {r} out of range (|R| = {n_relations})"
                )));
            }
        }
        for &(r, rc) in &self.converse {
            if r >= n_relations || rc >= n_relations {
                return Err(Error::Vocab(format!(
                    "converse pair ({r}, {rc}) out of range (|R| = {n_relations})"
                )));
            }
            if r == rc {
                return Err(Error::Input(format!(
                    "converse pair ({r}, {r}) would make the relation symmetric; \
                     symmetric formulas are not supported"
                )));
            }
        }
        Ok(())
    }

    pub fn from_names(file: &FormulaSetFile, vocab: &RelationVocab) -> Result<Self> {
        let transitive = file
            .transitive
            .iter()
            .map(|n| vocab.relation_id(n))
            .collect::<Result<Vec<_>>>()?;
        let converse = file
            .converse
            .iter()
            .map(|(a, b)| Ok((vocab.relation_id(a)?, vocab.relation_id(b)?)))
            .collect::<Result<Vec<_>>>()?;
        FormulaSet::new(transitive, converse, vocab.n_relations())
    }

    pub fn to_names(&self, vocab: &RelationVocab) -> Result<FormulaSetFile> {
        Ok(FormulaSetFile {
            transitive: self
                .transitive
                .iter()
                .map(|&r| Ok(vocab.relation_name(r)?.to_string()))
                .collect::<Result<Vec<_>>>()?,
            converse: self
                .converse
                .iter()
                .map(|&(a, b)| {
                    Ok((
                        vocab.relation_name(a)?.to_string(),
                        vocab.relation_name(b)?.to_string(),
                    ))
                })
                .collect::<Result<Vec<_>>>()?,
        })
    }

    pub fn load(path: &std::path::Path, vocab: &RelationVocab) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: FormulaSetFile = serde_json::from_str(&text)?;
        Self::from_names(&file, vocab)
    }

    /// True when every converse pair appears in both directions, each
    /// relation has at most one converse partner, and transitivity flags
    /// agree across partners. Saturated parameters can only represent such
    /// sets exactly.
    pub fn is_well_formed(&self) -> bool {
        let mut partner: BTreeMap<usize, usize> = BTreeMap::new();
        for &(r, rc) in &self.converse {
            if !self.converse.contains(&(rc, r)) {
                return false;
            }
            if *partner.entry(r).or_insert(rc) != rc {
                return false;
            }
            if self.transitive.contains(&r) != self.transitive.contains(&rc) {
                return false;
            }
        }
        true
    }
}

/// Gradients with respect to [`CanonParams`], same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonGrads {
    pub theta_trans: Vec<f64>,
    pub theta_conv: Vec<Vec<f64>>,
}

impl CanonGrads {
    pub fn zeros(n_relations: usize) -> Self {
        CanonGrads {
            theta_trans: vec![0.0; n_relations],
            theta_conv: vec![vec![0.0; n_relations + 1]; n_relations],
        }
    }

    pub fn add(&mut self, other: &CanonGrads) {
        for (a, b) in self.theta_trans.iter_mut().zip(&other.theta_trans) {
            *a += b;
        }
        for (ra, rb) in self.theta_conv.iter_mut().zip(&other.theta_conv) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.theta_trans {
            *a *= s;
        }
        for row in &mut self.theta_conv {
            for a in row {
                *a *= s;
            }
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.theta_trans];
        for row in &self.theta_conv {
            out.push(row);
        }
        out
    }

    /// Fold the two matrix slots of each tied converse parameter into their
    /// sum, stored in both slots (the gradient of a tied parameter is the
    /// sum over its occurrences).
    pub fn tie_symmetric(&mut self) {
        let n = self.theta_trans.len();
        for r in 0..n {
            for rc in (r + 1)..n {
                let s = self.theta_conv[r][rc] + self.theta_conv[rc][r];
                self.theta_conv[r][rc] = s;
                self.theta_conv[rc][r] = s;
            }
        }
    }
}

/// Numerically stable logistic function; saturates to exactly 0.0 / 1.0
/// for very large |x| in double precision.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// d sigmoid / dx expressed through the output value.
pub fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Max-subtracted softmax; saturated rows produce exact one-hot vectors.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Learnable canonicalization state: one transitivity logit per relation
/// and a symmetric converse-logit matrix with an extra column for the
/// empty relation ("no converse").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonParams {
    /// Length |R|.
    pub theta_trans: Vec<f64>,
    /// |R| rows of |R| + 1 entries; the last column is the empty relation
    /// and exempt from the symmetry constraint.
    pub theta_conv: Vec<Vec<f64>>,
}

/// Magnitude that saturates sigmoid/softmax to exact {0, 1} in f64.
const SATURATE: f64 = 1_000.0;

impl CanonParams {
    /// Training initialization: transitivity logits at 0 (probability 1/2)
    /// and converse rows biased toward "no converse" so early training does
    /// not flood graphs with spurious edges.
    pub fn init(n_relations: usize) -> Self {
        let mut theta_conv = vec![vec![0.0; n_relations + 1]; n_relations];
        for row in &mut theta_conv {
            row[n_relations] = 2.0;
        }
        CanonParams { theta_trans: vec![0.0; n_relations], theta_conv }
    }

    /// Parameters that reproduce a known formula set with probabilities in
    /// {0, 1} exactly. Requires a well-formed set (symmetric converse pairs,
    /// one partner per relation, consistent transitivity).
    pub fn saturated(f: &FormulaSet, n_relations: usize) -> Result<Self> {
        f.validate(n_relations)?;
        if !f.is_well_formed() {
            return Err(Error::Input(
                "saturated parameters require a well-formed formula set \
                 (symmetric pairs, one converse partner per relation, \
                 transitivity consistent across partners)"
                    .to_string(),
            ));
        }
        let mut params = CanonParams {
            theta_trans: (0..n_relations)
                .map(|r| if f.transitive.contains(&r) { SATURATE } else { -SATURATE })
                .collect(),
            theta_conv: vec![vec![0.0; n_relations + 1]; n_relations],
        };
        let mut has_partner = vec![false; n_relations];
        for &(r, rc) in &f.converse {
            params.theta_conv[r][rc] = SATURATE;
            has_partner[r] = true;
        }
        for (r, has) in has_partner.iter().enumerate() {
            if !has {
                params.theta_conv[r][n_relations] = SATURATE;
            }
        }
        params.validate()?;
        Ok(params)
    }

    pub fn n_relations(&self) -> usize {
        self.theta_trans.len()
    }

    /// Index of the empty relation in converse rows.
    pub fn phi_index(&self) -> usize {
        self.n_relations()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_relations();
        if self.theta_conv.len() != n {
            return Err(Error::Shape(format!(
                "theta_conv has {} rows for |R| = {n}",
                self.theta_conv.len()
            )));
        }
        for (r, row) in self.theta_conv.iter().enumerate() {
            if row.len() != n + 1 {
                return Err(Error::Shape(format!(
                    "theta_conv row {r} has {} entries, expected {}",
                    row.len(),
                    n + 1
                )));
            }
        }
        for &x in self.theta_trans.iter().chain(self.theta_conv.iter().flatten()) {
            if !x.is_finite() {
                return Err(Error::Domain("non-finite canonicalization parameter".into()));
            }
        }
        for r in 0..n {
            for rc in (r + 1)..n {
                if self.theta_conv[r][rc] != self.theta_conv[rc][r] {
                    return Err(Error::Domain(format!(
                        "theta_conv symmetry violated at ({r}, {rc}): {} != {}",
                        self.theta_conv[r][rc], self.theta_conv[rc][r]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Probability that relation `r` is transitive.
    pub fn p_trans(&self, r: usize) -> Result<f64> {
        self.check_relation(r)?;
        Ok(sigmoid(self.theta_trans[r]))
    }

    /// Distribution over `R ∪ {phi}`: probability that each relation (or
    /// none) is the converse of `r`. Sums to 1.
    pub fn p_conv(&self, r: usize) -> Result<Vec<f64>> {
        self.check_relation(r)?;
        Ok(softmax(&self.theta_conv[r]))
    }

    fn check_relation(&self, r: usize) -> Result<()> {
        if r >= self.n_relations() {
            return Err(Error::Vocab(format!(
                "relation id {r} out of range (|R| = {})",
                self.n_relations()
            )));
        }
        Ok(())
    }

    /// Parameter tensors in a fixed order, for optimizer updates.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.theta_trans];
        for row in &self.theta_conv {
            out.push(row);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.theta_trans];
        for row in &mut self.theta_conv {
            out.push(row);
        }
        out
    }

    /// Re-impose the converse symmetry constraint by averaging tied
    /// entries. Call after any in-place update of raw entries.
    pub fn resymmetrize(&mut self) {
        let n = self.n_relations();
        for r in 0..n {
            for rc in (r + 1)..n {
                let avg = 0.5 * (self.theta_conv[r][rc] + self.theta_conv[rc][r]);
                self.theta_conv[r][rc] = avg;
                self.theta_conv[rc][r] = avg;
            }
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let params: CanonParams = serde_json::from_str(&text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
