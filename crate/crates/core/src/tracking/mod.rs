//! Tracking and play-by-play ingestion.
//!
//! Raw BDB-style rows are grouped per play, reduced to the five offensive
//! skill players and five coverage defenders, and emitted as [`PlaySeries`].

mod filter;
mod io;
mod parse;
mod standardize;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use filter::{assemble_plays, filter_players, Excluded, FilterConfig, IngestReport};
pub use io::{read_series_jsonl, write_play_csv, write_series_jsonl, write_tracking_csv};
pub use parse::{parse_plays, parse_tracking, parse_tracking_str, ParsedTracking};
pub use standardize::{relative_to_ball, standardize};

#[cfg(test)]
pub(crate) use standardize::tests::toy_series as standardize_tests_toy;

/// Field length in yards, end zones included.
pub const FIELD_LENGTH: f64 = 120.0;
/// Field width in yards.
pub const FIELD_WIDTH: f64 = 53.3;
/// Players per side after filtering.
pub const SIDE: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlayKey {
    pub game_id: String,
    pub play_id: String,
}

impl PlayKey {
    pub fn new(game_id: impl Into<String>, play_id: impl Into<String>) -> Self {
        Self {
            game_id: game_id.into(),
            play_id: play_id.into(),
        }
    }
}

impl fmt::Display for PlayKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.game_id, self.play_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayDirection {
    Left,
    Right,
}

impl PlayDirection {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "left" => Some(Self::Left),
            "right" => Some(Self::Right),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Left => "left",
            Self::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coverage {
    Man,
    Zone,
}

impl Coverage {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "man" => Some(Self::Man),
            "zone" => Some(Self::Zone),
            _ => None,
        }
    }

    /// 1 = man, 0 = zone.
    pub fn label(self) -> f64 {
        match self {
            Self::Man => 1.0,
            Self::Zone => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Man => "man",
            Self::Zone => "zone",
        }
    }
}

/// One tracking row. `player_id` is `None` for the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFrame {
    pub game_id: String,
    pub play_id: String,
    pub player_id: Option<String>,
    pub frame_index: u32,
    pub x: f64,
    pub y: f64,
    pub team: String,
    pub role: String,
    pub event: Option<String>,
    pub play_direction: PlayDirection,
}

impl RawFrame {
    pub fn is_ball(&self) -> bool {
        self.player_id.is_none()
    }

    pub fn key(&self) -> PlayKey {
        PlayKey::new(self.game_id.clone(), self.play_id.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayContext {
    pub quarter: u8,
    pub down: u8,
    pub yards_to_go: f64,
    pub absolute_yardline: f64,
    pub pre_snap_home_score: i32,
    pub pre_snap_visitor_score: i32,
    pub seconds_left_in_half: f64,
    pub coverage: Option<Coverage>,
    pub offense: String,
    pub defense: String,
}

/// Five-on-five time series for one motion play.
///
/// Coordinate matrices are indexed `[player][frame]`. Offensive players are
/// ordered by descending y at motion start, defenders by ascending y.
/// `motion_window` holds inclusive 0-based positions into the frame axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaySeries {
    pub key: PlayKey,
    pub context: PlayContext,
    pub direction: PlayDirection,
    pub frame_ids: Vec<u32>,
    pub offense_ids: [String; SIDE],
    pub offense_roles: [String; SIDE],
    pub defense_ids: [String; SIDE],
    pub defender_roles: [String; SIDE],
    pub offense_x: [Vec<f64>; SIDE],
    pub offense_y: [Vec<f64>; SIDE],
    pub defense_x: [Vec<f64>; SIDE],
    pub defense_y: [Vec<f64>; SIDE],
    pub ball_x: Vec<f64>,
    pub ball_y: Vec<f64>,
    pub motion_window: (usize, usize),
}

impl PlaySeries {
    pub fn n_frames(&self) -> usize {
        self.frame_ids.len()
    }

    pub fn motion_start(&self) -> usize {
        self.motion_window.0
    }

    pub fn snap(&self) -> usize {
        self.motion_window.1
    }

    /// Frame used for pre-motion features: the one just before motion starts.
    pub fn pre_motion_frame(&self) -> usize {
        self.motion_window.0.saturating_sub(1)
    }

    pub fn window_len(&self) -> usize {
        self.motion_window.1 - self.motion_window.0 + 1
    }

    /// Re-apply the ordering convention (offense by descending y, defense by
    /// ascending y at motion start; ties by player id).
    pub fn sort_players(&mut self) {
        let t = self.motion_start();
        let mut off: Vec<usize> = (0..SIDE).collect();
        off.sort_by(|&a, &b| {
            self.offense_y[b][t]
                .total_cmp(&self.offense_y[a][t])
                .then_with(|| self.offense_ids[a].cmp(&self.offense_ids[b]))
        });
        let mut def: Vec<usize> = (0..SIDE).collect();
        def.sort_by(|&a, &b| {
            self.defense_y[a][t]
                .total_cmp(&self.defense_y[b][t])
                .then_with(|| self.defense_ids[a].cmp(&self.defense_ids[b]))
        });
        permute(&mut self.offense_ids, &off);
        permute(&mut self.offense_roles, &off);
        permute(&mut self.offense_x, &off);
        permute(&mut self.offense_y, &off);
        permute(&mut self.defense_ids, &def);
        permute(&mut self.defender_roles, &def);
        permute(&mut self.defense_x, &def);
        permute(&mut self.defense_y, &def);
    }
}

fn permute<T: Clone>(arr: &mut [T; SIDE], order: &[usize]) {
    let old = arr.clone();
    for (slot, &src) in arr.iter_mut().zip(order) {
        *slot = old[src].clone();
    }
}
