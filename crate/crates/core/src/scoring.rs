//! Pairwise-comparison vote aggregation.
//!
//! Each candidate's score is the sum over every other candidate of the
//! vote difference, divided by the maximum possible votes:
//! `score_i = Σ_{j≠i} (s_i − s_j) / s_max = (k·s_i − Σ s) / s_max`.
//! The integer numerators are kept alongside the real scores so the
//! zero-sum property can be checked without rounding.

use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};

pub const DEFAULT_S_MAX: u64 = 40;

/// Votes for one photo's candidate set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTally {
    candidates: Vec<String>,
    votes: Vec<u64>,
    s_max: u64,
}

impl VoteTally {
    pub fn new(candidates: Vec<String>, votes: Vec<u64>, s_max: u64) -> Result<Self> {
        if candidates.len() != votes.len() {
            return Err(Error::Tally(format!("{} candidates but {} vote counts", candidates.len(), votes.len())));
        }
        if candidates.len() < 2 {
            return Err(Error::Tally("a tally needs at least two candidates".into()));
        }
        if s_max == 0 {
            return Err(Error::Tally("s_max must be positive".into()));
        }
        for (i, c) in candidates.iter().enumerate() {
            if candidates[..i].contains(c) {
                return Err(Error::Tally(format!("duplicate candidate `{c}`")));
            }
        }
        if let Some((c, v)) = candidates.iter().zip(&votes).find(|(_, &v)| v > s_max) {
            return Err(Error::Tally(format!("candidate `{c}` has {v} votes, above s_max = {s_max}")));
        }
        Ok(Self { candidates, votes, s_max })
    }

    /// Candidates named `0..k`.
    pub fn from_votes(votes: &[u64], s_max: u64) -> Result<Self> {
        Self::new((0..votes.len()).map(|i| i.to_string()).collect(), votes.to_vec(), s_max)
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn votes(&self) -> &[u64] {
        &self.votes
    }

    pub fn s_max(&self) -> u64 {
        self.s_max
    }
}

/// Candidate → score, in candidate order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    entries: Vec<(String, f64)>,
}

impl ScoreMap {
    pub fn get(&self, candidate: &str) -> Option<f64> {
        self.entries.iter().find(|(c, _)| c == candidate).map(|&(_, s)| s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(c, s)| (c.as_str(), *s))
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, s)| s).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankScores {
    pub scores: ScoreMap,
    /// `k·s_i − Σ s` per candidate; these sum to exactly zero.
    pub numerators: Vec<i128>,
}

pub fn rank_score(tally: &VoteTally) -> RankScores {
    let k = tally.votes.len() as i128;
    let total: i128 = tally.votes.iter().map(|&v| v as i128).sum();
    let numerators: Vec<i128> = tally.votes.iter().map(|&v| k * v as i128 - total).collect();
    let s_max = tally.s_max as f64;
    let entries = tally
        .candidates
        .iter()
        .zip(&numerators)
        .map(|(c, &n)| (c.clone(), n as f64 / s_max))
        .collect();
    RankScores {
        scores: ScoreMap { entries },
        numerators,
    }
}

/// Per-candidate arithmetic mean over photos. Every map must cover the
/// same candidates; the first map fixes the output order.
pub fn average_scores(per_photo: &[ScoreMap]) -> Result<ScoreMap> {
    let first = per_photo
        .first()
        .ok_or_else(|| Error::Aggregation("no score maps to average".into()))?;
    for (p, m) in per_photo.iter().enumerate() {
        if m.len() != first.len() || first.entries.iter().any(|(c, _)| m.get(c).is_none()) {
            return Err(Error::Aggregation(format!("photo {p} has a different candidate set")));
        }
    }
    let n = per_photo.len() as f64;
    let entries = first
        .entries
        .iter()
        .map(|(c, _)| (c.clone(), per_photo.iter().map(|m| m.get(c).unwrap()).sum::<f64>() / n))
        .collect();
    Ok(ScoreMap { entries })
}

#[derive(Debug, Deserialize)]
struct TallyRow {
    photo_id: String,
    candidate_id: String,
    votes: u64,
}

/// Reads `photo_id,candidate_id,votes` rows, grouped by photo in order of
/// first appearance.
pub fn read_tallies_csv<R: Read>(reader: R, s_max: u64) -> Result<Vec<(String, VoteTally)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut groups: Vec<(String, Vec<String>, Vec<u64>)> = Vec::new();
    for (i, row) in rdr.deserialize::<TallyRow>().enumerate() {
        // header is line 1
        let row = row.map_err(|e| Error::format(i + 2, e.to_string()))?;
        match groups.iter_mut().find(|(p, _, _)| *p == row.photo_id) {
            Some((_, c, v)) => {
                c.push(row.candidate_id);
                v.push(row.votes);
            }
            None => groups.push((row.photo_id, vec![row.candidate_id], vec![row.votes])),
        }
    }
    if groups.is_empty() {
        return Err(Error::Tally("no tally rows".into()));
    }
    groups
        .into_iter()
        .map(|(photo, c, v)| {
            VoteTally::new(c, v, s_max)
                .map(|t| (photo.clone(), t))
                .map_err(|e| Error::Tally(format!("photo `{photo}`: {e}")))
        })
        .collect()
}

/// Label used in the `photo_id` column for averaged rows.
pub const AVERAGE_ROW: &str = "*";

/// Writes `photo_id,candidate_id,score` rows for each photo followed by the
/// averages under [`AVERAGE_ROW`].
pub fn write_scores_csv<W: Write>(per_photo: &[(String, ScoreMap)], average: &ScoreMap, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wtr.write_record(["photo_id", "candidate_id", "score"]).map_err(io)?;
    let rows = per_photo
        .iter()
        .map(|(p, m)| (p.as_str(), m))
        .chain(std::iter::once((AVERAGE_ROW, average)));
    for (photo, map) in rows {
        for (c, s) in map.iter() {
            wtr.write_record([photo, c, &s.to_string()]).map_err(io)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
