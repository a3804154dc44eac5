use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{PlayContext, PlayKey, PlaySeries, RawFrame};
use crate::error::{Error, Result};

/// One JSON object per line, one line per retained play.
pub fn write_series_jsonl(path: impl AsRef<Path>, plays: &[PlaySeries]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for p in plays {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_jsonl(path: impl AsRef<Path>) -> Result<Vec<PlaySeries>> {
    let path = path.as_ref();
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Write rows in the tracking input layout.
pub fn write_tracking_csv(path: impl AsRef<Path>, frames: &[RawFrame]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["gameId", "playId", "nflId", "frameId", "x", "y", "club", "position", "event", "playDirection"])?;
    for f in frames {
        w.write_record([
            f.game_id.as_str(),
            f.play_id.as_str(),
            f.player_id.as_deref().unwrap_or("NA"),
            &f.frame_index.to_string(),
            &f.x.to_string(),
            &f.y.to_string(),
            f.team.as_str(),
            if f.role.is_empty() { "NA" } else { f.role.as_str() },
            f.event.as_deref().unwrap_or("NA"),
            f.play_direction.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write contexts in the play-by-play input layout.
pub fn write_play_csv(path: impl AsRef<Path>, plays: &BTreeMap<PlayKey, PlayContext>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "gameId",
        "playId",
        "quarter",
        "down",
        "yardsToGo",
        "absoluteYardlineNumber",
        "preSnapHomeScore",
        "preSnapVisitorScore",
        "secondsLeftInHalf",
        "coverage",
        "possessionTeam",
        "defensiveTeam",
    ])?;
    for (k, c) in plays {
        w.write_record([
            k.game_id.clone(),
            k.play_id.clone(),
            c.quarter.to_string(),
            c.down.to_string(),
            c.yards_to_go.to_string(),
            c.absolute_yardline.to_string(),
            c.pre_snap_home_score.to_string(),
            c.pre_snap_visitor_score.to_string(),
            c.seconds_left_in_half.to_string(),
            c.coverage.map_or("NA", |c| c.as_str()).to_string(),
            c.offense.clone(),
            c.defense.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
