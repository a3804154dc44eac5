use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use tracing::warn;

use super::{Coverage, PlayContext, PlayDirection, PlayKey, RawFrame, FIELD_LENGTH, FIELD_WIDTH};
use crate::error::{Error, Result};

const TRACKING_COLUMNS: [&str; 10] = [
    "gameId",
    "playId",
    "nflId",
    "frameId",
    "x",
    "y",
    "club",
    "position",
    "event",
    "playDirection",
];

const PLAY_COLUMNS: [&str; 12] = [
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
];

/// Parsed tracking rows plus the rows dropped for missing coordinates.
#[derive(Debug, Default)]
pub struct ParsedTracking {
    pub frames: Vec<RawFrame>,
    /// `(line, reason)` for every rejected row.
    pub rejected: Vec<(u64, String)>,
}

fn is_na(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || s == "NA"
}

fn column_index(headers: &csv::StringRecord, names: &[&str], path: &Path) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!("missing column `{name}`"),
                })
        })
        .collect()
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

pub fn parse_tracking(path: impl AsRef<Path>) -> Result<ParsedTracking> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_tracking_reader(file, path)
}

pub fn parse_tracking_str(text: &str) -> Result<ParsedTracking> {
    parse_tracking_reader(text.as_bytes(), Path::new("<memory>"))
}

fn parse_tracking_reader<R: Read>(input: R, path: &Path) -> Result<ParsedTracking> {
    let mut rdr = reader(input);
    let headers = match rdr.headers() {
        Ok(h) if !h.is_empty() => h.clone(),
        _ => {
            warn!(path = %path.display(), "empty tracking file");
            return Ok(ParsedTracking::default());
        }
    };
    let idx = column_index(&headers, &TRACKING_COLUMNS, path)?;
    let mut out = ParsedTracking::default();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let perr = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };

        if is_na(field(4)) || is_na(field(5)) {
            out.rejected.push((line, "missing coordinate".into()));
            continue;
        }
        let number = |k: usize| -> Result<f64> {
            field(k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| perr(format!("`{}` is not a number: {:?}", TRACKING_COLUMNS[k], field(k))))
        };
        let x = number(4)?;
        let y = number(5)?;
        for (name, value, max) in [("x", x, FIELD_LENGTH), ("y", y, FIELD_WIDTH)] {
            if !(0.0..=max).contains(&value) {
                return Err(Error::Range {
                    path: path.to_path_buf(),
                    line,
                    field: name,
                    value,
                    min: 0.0,
                    max,
                });
            }
        }
        let frame_index: u32 = field(3)
            .parse()
            .ok()
            .filter(|&f| f >= 1)
            .ok_or_else(|| perr(format!("invalid frameId {:?}", field(3))))?;
        let play_direction = PlayDirection::parse(field(9))
            .ok_or_else(|| perr(format!("unknown playDirection {:?}", field(9))))?;
        if field(0).is_empty() || field(1).is_empty() {
            return Err(perr("missing gameId or playId".into()));
        }
        out.frames.push(RawFrame {
            game_id: field(0).to_string(),
            play_id: field(1).to_string(),
            player_id: (!is_na(field(2))).then(|| field(2).to_string()),
            frame_index,
            x,
            y,
            team: field(6).to_string(),
            role: if is_na(field(7)) { String::new() } else { field(7).to_string() },
            event: (!is_na(field(8))).then(|| field(8).to_string()),
            play_direction,
        });
    }
    if out.frames.is_empty() {
        warn!(path = %path.display(), "tracking file has no usable rows");
    }
    if !out.rejected.is_empty() {
        warn!(path = %path.display(), rejected = out.rejected.len(), "rows with missing coordinates rejected");
    }
    Ok(out)
}

/// Parse the play-by-play file into contexts keyed by play.
pub fn parse_plays(path: impl AsRef<Path>) -> Result<BTreeMap<PlayKey, PlayContext>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_plays_reader(file, path.to_path_buf())
}

pub(crate) fn parse_plays_reader<R: Read>(
    input: R,
    path: PathBuf,
) -> Result<BTreeMap<PlayKey, PlayContext>> {
    let mut rdr = reader(input);
    let headers = match rdr.headers() {
        Ok(h) if !h.is_empty() => h.clone(),
        _ => return Ok(BTreeMap::new()),
    };
    let idx = column_index(&headers, &PLAY_COLUMNS, &path)?;
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let perr = |k: usize| Error::Parse {
            path: path.clone(),
            line,
            message: format!("invalid `{}`: {:?}", PLAY_COLUMNS[k], field(k)),
        };
        let num = |k: usize| -> Result<f64> {
            field(k).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| perr(k))
        };
        let int = |k: usize| -> Result<i64> {
            let v = num(k)?;
            if v.fract() != 0.0 {
                return Err(perr(k));
            }
            Ok(v as i64)
        };
        let quarter = int(2)?;
        let down = int(3)?;
        if !(1..=5).contains(&quarter) {
            return Err(perr(2));
        }
        if !(1..=4).contains(&down) {
            return Err(perr(3));
        }
        let coverage = if is_na(field(9)) {
            None
        } else {
            Some(Coverage::parse(field(9)).ok_or_else(|| perr(9))?)
        };
        let ctx = PlayContext {
            quarter: quarter as u8,
            down: down as u8,
            yards_to_go: num(4)?,
            absolute_yardline: num(5)?,
            pre_snap_home_score: int(6)? as i32,
            pre_snap_visitor_score: int(7)? as i32,
            seconds_left_in_half: num(8)?,
            coverage,
            offense: field(10).to_string(),
            defense: field(11).to_string(),
        };
        out.insert(PlayKey::new(field(0), field(1)), ctx);
    }
    Ok(out)
}
