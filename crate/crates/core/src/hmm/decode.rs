use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PosteriorMatrix, N_STATES};
use crate::error::{Error, Result};
use crate::tracking::PlayKey;

/// Posteriors for the five defenders of one play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedPlay {
    pub key: PlayKey,
    pub posteriors: Vec<PosteriorMatrix>,
}

impl DecodedPlay {
    pub fn argmax_sequences(&self) -> Vec<Vec<usize>> {
        self.posteriors.iter().map(PosteriorMatrix::argmax_sequence).collect()
    }
}

/// Long format: one line per (play, defender, frame); defender, frame and
/// argmax state are 1-based.
pub fn write_posterior_csv(path: impl AsRef<Path>, plays: &[DecodedPlay], comment: Option<&str>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(c) = comment {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["gameId", "playId", "defender", "frame", "p1", "p2", "p3", "p4", "p5", "argmax"])?;
    for play in plays {
        for (d, post) in play.posteriors.iter().enumerate() {
            for (t, p) in post.probs.iter().enumerate() {
                let mut rec = vec![play.key.game_id.clone(), play.key.play_id.clone(), (d + 1).to_string(), (t + 1).to_string()];
                rec.extend(p.iter().map(f64::to_string));
                rec.push((super::argmax(p) + 1).to_string());
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_posterior_csv(path: impl AsRef<Path>) -> Result<Vec<DecodedPlay>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut plays: BTreeMap<PlayKey, Vec<Vec<[f64; N_STATES]>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |m: &str| Error::Parse { path: path.to_path_buf(), line, message: m.to_string() };
        if rec.len() < 9 {
            return Err(bad("expected at least 9 columns"));
        }
        let d: usize = rec[2].parse().map_err(|_| bad("defender is not an integer"))?;
        if !(1..=N_STATES).contains(&d) {
            return Err(bad("defender must be in 1..=5"));
        }
        let mut p = [0.0; N_STATES];
        for (j, slot) in p.iter_mut().enumerate() {
            *slot = rec[4 + j].parse().map_err(|_| bad("probability is not numeric"))?;
        }
        let defs = plays.entry(PlayKey::new(&rec[0], &rec[1])).or_insert_with(|| vec![Vec::new(); N_STATES]);
        defs[d - 1].push(p);
    }
    Ok(plays
        .into_iter()
        .map(|(key, defs)| DecodedPlay {
            key,
            posteriors: defs.into_iter().map(|probs| PosteriorMatrix { probs }).collect(),
        })
        .collect())
}
