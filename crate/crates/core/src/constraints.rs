//! Soft pairwise constraints.
//!
//! A constraint between units `i` and `j` has a type (positive or negative
//! link) and an accuracy `psi` in `[0.5, 1)`, which maps to the weight
//! `W_ij = T_ij * ln(psi / (1 - psi))`. The prior over partitions is tilted by
//! `exp(c * sum_{i,j} W_ij * delta_ij)` where the sum runs over ordered pairs
//! and `delta_ij` is `+1` when the pair shares a block and `-1` otherwise.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy used to stand in for a hard constraint.
pub const HARD_ACCURACY: f64 = 1.0 - 1e-6;

/// Per-pair bound on `|2 c W_ij|` in the Gibbs log-mass.
pub const PAIR_TERM_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkType {
    PositiveLink,
    NegativeLink,
}

impl LinkType {
    pub fn sign(self) -> f64 {
        match self {
            LinkType::PositiveLink => 1.0,
            LinkType::NegativeLink => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            LinkType::PositiveLink => LinkType::NegativeLink,
            LinkType::NegativeLink => LinkType::PositiveLink,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            LinkType::PositiveLink => "PL",
            LinkType::NegativeLink => "NL",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PL" | "+1" | "1" => Ok(LinkType::PositiveLink),
            "NL" | "-1" => Ok(LinkType::NegativeLink),
            other => Err(Error::InvalidConstraint(format!("unknown type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseConstraint {
    pub i: usize,
    pub j: usize,
    pub ctype: LinkType,
    pub accuracy: f64,
}

impl PairwiseConstraint {
    pub fn weight(&self) -> Result<f64> {
        weight_from(self.ctype, self.accuracy)
    }
}

/// `T * ln(psi / (1 - psi))`.
pub fn weight_from(ctype: LinkType, accuracy: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&accuracy) {
        return Err(Error::AccuracyOutOfRange(accuracy));
    }
    Ok(ctype.sign() * (accuracy / (1.0 - accuracy)).ln())
}

/// Sparse symmetric constraint weights together with the strength `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    n_units: usize,
    strength: f64,
    constraints: Vec<PairwiseConstraint>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl ConstraintSet {
    pub fn new(n_units: usize, constraints: Vec<PairwiseConstraint>, strength: f64) -> Result<Self> {
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(Error::InvalidConstraint(format!("strength must be >= 0, got {strength}")));
        }
        let mut seen = std::collections::HashSet::new();
        let mut neighbors = vec![Vec::new(); n_units];
        for c in &constraints {
            if c.i == c.j {
                return Err(Error::InvalidConstraint(format!("self-pair on unit {}", c.i)));
            }
            if c.i >= n_units || c.j >= n_units {
                return Err(Error::InvalidConstraint(format!(
                    "pair ({}, {}) outside 0..{n_units}",
                    c.i, c.j
                )));
            }
            if !seen.insert((c.i.min(c.j), c.i.max(c.j))) {
                return Err(Error::InvalidConstraint(format!(
                    "more than one constraint on pair ({}, {})",
                    c.i, c.j
                )));
            }
            let w = c.weight()?;
            if w != 0.0 {
                neighbors[c.i].push((c.j, w));
                neighbors[c.j].push((c.i, w));
            }
        }
        for nb in &mut neighbors {
            nb.sort_by_key(|&(j, _)| j);
        }
        Ok(Self {
            n_units,
            strength,
            constraints,
            neighbors,
        })
    }

    pub fn empty(n_units: usize) -> Self {
        Self {
            n_units,
            strength: 0.0,
            constraints: Vec::new(),
            neighbors: vec![Vec::new(); n_units],
        }
    }

    /// Same constraints with a different strength.
    pub fn with_strength(&self, strength: f64) -> Result<Self> {
        Self::new(self.n_units, self.constraints.clone(), strength)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn constraints(&self) -> &[PairwiseConstraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn count(&self, ctype: LinkType) -> usize {
        self.constraints.iter().filter(|c| c.ctype == ctype).count()
    }

    /// Nonzero weights touching unit `i`, sorted by partner index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.neighbors[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|pos| self.neighbors[i][pos].1)
            .unwrap_or(0.0)
    }

    /// True when the tilt contributes nothing for any unit.
    pub fn is_neutral(&self) -> bool {
        self.strength == 0.0 || self.neighbors.iter().all(Vec::is_empty)
    }

    /// Whether unit `i` carries a nonzero constraint term.
    pub fn is_active(&self, i: usize) -> bool {
        self.strength != 0.0 && !self.neighbors[i].is_empty()
    }

    /// `log p(W_i | G) = sum_j 2 c W_ij delta_ij(G)` with `i`'s own label read
    /// from `labels[i]`.
    pub fn log_constraint_term(&self, i: usize, labels: &[usize]) -> f64 {
        self.candidate_term(i, labels[i], labels)
    }

    /// The same term with unit `i` placed in block `k`.
    pub fn candidate_term(&self, i: usize, k: usize, labels: &[usize]) -> f64 {
        if !self.is_active(i) {
            return 0.0;
        }
        let two_c = 2.0 * self.strength;
        self.neighbors[i]
            .iter()
            .map(|&(j, w)| {
                let term = (two_c * w).clamp(-PAIR_TERM_CLAMP, PAIR_TERM_CLAMP);
                if labels[j] == k {
                    term
                } else {
                    -term
                }
            })
            .sum()
    }

    /// Fills `out[k]` with the constraint term for unit `i` in block `k`, for
    /// every `k < out.len()`. Labels of `i`'s partners outside that range
    /// count as "apart" for every candidate.
    pub fn candidate_terms(&self, i: usize, labels: &[usize], out: &mut [f64]) {
        if !self.is_active(i) {
            out.fill(0.0);
            return;
        }
        let two_c = 2.0 * self.strength;
        let mut total = 0.0;
        for &(_, w) in &self.neighbors[i] {
            total += (two_c * w).clamp(-PAIR_TERM_CLAMP, PAIR_TERM_CLAMP);
        }
        out.fill(-total);
        for &(j, w) in &self.neighbors[i] {
            if let Some(slot) = out.get_mut(labels[j]) {
                *slot += 2.0 * (two_c * w).clamp(-PAIR_TERM_CLAMP, PAIR_TERM_CLAMP);
            }
        }
    }

    /// `c * sum_{ordered (i,j)} W_ij delta_ij(G)`.
    pub fn tilt(&self, labels: &[usize]) -> f64 {
        if self.strength == 0.0 {
            return 0.0;
        }
        let s: f64 = self
            .constraints
            .iter()
            .map(|c| {
                let w = weight_from(c.ctype, c.accuracy).unwrap_or(0.0);
                if labels[c.i] == labels[c.j] {
                    w
                } else {
                    -w
                }
            })
            .sum();
        2.0 * self.strength * s
    }

    /// Dense `N x N` weight matrix, row-major.
    pub fn dense_weights(&self) -> Vec<f64> {
        let n = self.n_units;
        let mut m = vec![0.0; n * n];
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &(j, w) in nb {
                m[i * n + j] = w;
            }
        }
        m
    }
}

/// Positive links within every prior group and negative links across groups.
/// Units labelled `None` are left unconstrained.
pub fn constraints_from_pregrouping(
    prior_groups: &[Option<usize>],
    psi_pl: f64,
    psi_nl: f64,
    strength: f64,
) -> Result<ConstraintSet> {
    weight_from(LinkType::PositiveLink, psi_pl)?;
    weight_from(LinkType::NegativeLink, psi_nl)?;
    let labelled: Vec<(usize, usize)> = prior_groups
        .iter()
        .enumerate()
        .filter_map(|(i, g)| g.map(|g| (i, g)))
        .collect();
    let mut out = Vec::new();
    for (a, &(i, gi)) in labelled.iter().enumerate() {
        for &(j, gj) in &labelled[a + 1..] {
            let (ctype, accuracy) = if gi == gj {
                (LinkType::PositiveLink, psi_pl)
            } else {
                (LinkType::NegativeLink, psi_nl)
            };
            out.push(PairwiseConstraint { i, j, ctype, accuracy });
        }
    }
    ConstraintSet::new(prior_groups.len(), out, strength)
}

/// Accuracy draw: `nu ~ Beta(3, 2)` for a correct constraint, `Beta(2, 3)`
/// for a mislabelled one, mapped to `psi = nu / 2 + 0.5`.
pub fn draw_accuracy<R: Rng + ?Sized>(correct: bool, rng: &mut R) -> f64 {
    let beta = if correct {
        Beta::new(3.0, 2.0).unwrap()
    } else {
        Beta::new(2.0, 3.0).unwrap()
    };
    // psi must stay below 1; nu = 1 has probability zero but guard anyway.
    let nu: f64 = beta.sample(rng);
    (nu / 2.0 + 0.5).min(HARD_ACCURACY)
}

/// Mislabels a fraction `e` of each constraint type. The flipped constraints
/// get a fresh accuracy from the mislabelled distribution; the rest are kept
/// as they are.
pub fn perturb_constraints<R: Rng + ?Sized>(
    cs: &ConstraintSet,
    e: f64,
    rng: &mut R,
) -> Result<ConstraintSet> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::InvalidConstraint(format!("error rate {e} outside [0, 1]")));
    }
    let mut out = cs.constraints.clone();
    for ctype in [LinkType::PositiveLink, LinkType::NegativeLink] {
        let idx: Vec<usize> = (0..out.len()).filter(|&k| out[k].ctype == ctype).collect();
        let n_flip = (e * idx.len() as f64 + 1e-9).floor() as usize;
        let n_flip = n_flip.min(idx.len());
        for pos in rand::seq::index::sample(rng, idx.len(), n_flip).into_vec() {
            let c = &mut out[idx[pos]];
            c.ctype = ctype.flipped();
            c.accuracy = draw_accuracy(false, rng);
        }
    }
    ConstraintSet::new(cs.n_units, out, cs.strength)
}

/// Reads `i,j,type,psi` rows; `i` and `j` are unit labels.
pub fn read_constraints<R: Read>(reader: R, unit_ids: &[String], strength: f64) -> Result<ConstraintSet> {
    let index: HashMap<&str, usize> = unit_ids.iter().enumerate().map(|(k, u)| (u.as_str(), k)).collect();
    let lookup = |s: &str| {
        index
            .get(s.trim())
            .copied()
            .ok_or_else(|| Error::UnknownUnit(s.trim().to_string()))
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 4 {
            return Err(Error::InvalidConstraint(format!("line {}: expected i,j,type,psi", line + 2)));
        }
        let accuracy: f64 = rec[3].parse().map_err(|_| Error::NonNumeric {
            column: "psi".into(),
            value: rec[3].to_string(),
            line: line + 2,
        })?;
        out.push(PairwiseConstraint {
            i: lookup(&rec[0])?,
            j: lookup(&rec[1])?,
            ctype: LinkType::parse(&rec[2])?,
            accuracy,
        });
    }
    ConstraintSet::new(unit_ids.len(), out, strength)
}

pub fn load_constraints(path: &Path, unit_ids: &[String], strength: f64) -> Result<ConstraintSet> {
    read_constraints(std::fs::File::open(path)?, unit_ids, strength)
}

pub fn write_constraints<W: Write>(cs: &ConstraintSet, unit_ids: &[String], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "j", "type", "psi"])?;
    for c in &cs.constraints {
        w.write_record([
            unit_ids[c.i].as_str(),
            unit_ids[c.j].as_str(),
            c.ctype.code(),
            &c.accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `unit,prior_group` rows. Units absent from the file map to `None`.
pub fn read_pregrouping<R: Read>(reader: R, unit_ids: &[String]) -> Result<Vec<Option<usize>>> {
    let index: HashMap<&str, usize> = unit_ids.iter().enumerate().map(|(k, u)| (u.as_str(), k)).collect();
    let mut groups: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = vec![None; unit_ids.len()];
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::InvalidConstraint("expected unit,prior_group".into()));
        }
        let unit = &rec[0];
        let i = *index.get(unit).ok_or_else(|| Error::UnknownUnit(unit.to_string()))?;
        let next = groups.len();
        let g = *groups.entry(rec[1].to_string()).or_insert(next);
        out[i] = Some(g);
    }
    Ok(out)
}
