use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{standardize, PlayContext, PlayKey, PlaySeries, RawFrame, SIDE};

/// Reason a play was dropped during filtering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Excluded {
    NoContext,
    MissingLabel,
    NoBall,
    NoMotion,
    NoSnap,
    ShortMotion { frames: usize },
    TwoQb,
    Bunch,
    SkillCount { found: usize },
    DefenderCount { found: usize },
    IncompleteTracking { player: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub motion_start_events: Vec<String>,
    pub snap_events: Vec<String>,
    pub skill_roles: Vec<String>,
    pub quarterback_role: String,
    pub lineman_roles: Vec<String>,
    pub edge_role: String,
    /// OLBs within this many yards of the line of scrimmage count as rushers.
    pub rusher_window: f64,
    /// Three or more skill players pairwise within this radius form a bunch.
    pub bunch_radius: f64,
    pub min_motion_frames: usize,
    pub require_label: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            motion_start_events: s(&["man_in_motion"]),
            snap_events: s(&["ball_snap"]),
            skill_roles: s(&["WR", "TE", "RB", "FB", "HB"]),
            quarterback_role: "QB".into(),
            lineman_roles: s(&["NT", "DT", "DE", "DL"]),
            edge_role: "OLB".into(),
            rusher_window: 1.5,
            bunch_radius: 1.5,
            min_motion_frames: 6,
            require_label: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub retained: usize,
    pub excluded: Vec<(PlayKey, Excluded)>,
}

struct Track {
    id: String,
    role: String,
    x: Vec<f64>,
    y: Vec<f64>,
}

/// Reduce one play's rows to a five-on-five [`PlaySeries`] in raw field
/// coordinates (not yet standardized).
pub fn filter_players(
    frames: &[RawFrame],
    context: &PlayContext,
    cfg: &FilterConfig,
) -> Result<PlaySeries, Excluded> {
    if cfg.require_label && context.coverage.is_none() {
        return Err(Excluded::MissingLabel);
    }
    let first = frames.first().ok_or(Excluded::NoBall)?;
    let key = first.key();
    let direction = first.play_direction;

    let event_frame = |names: &[String]| {
        frames
            .iter()
            .filter(|f| f.event.as_deref().is_some_and(|e| names.iter().any(|n| n == e)))
            .map(|f| f.frame_index)
            .min()
    };
    let motion_start = event_frame(&cfg.motion_start_events).ok_or(Excluded::NoMotion)?;
    let snap = event_frame(&cfg.snap_events).ok_or(Excluded::NoSnap)?;
    if snap <= motion_start {
        return Err(Excluded::NoMotion);
    }

    let frame_ids: Vec<u32> = frames
        .iter()
        .filter(|f| f.is_ball() && f.frame_index <= snap)
        .map(|f| f.frame_index)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if frame_ids.is_empty() {
        return Err(Excluded::NoBall);
    }
    let pos: HashMap<u32, usize> = frame_ids.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let t_start = *pos.get(&motion_start).ok_or(Excluded::NoMotion)?;
    let t_snap = *pos.get(&snap).ok_or(Excluded::NoSnap)?;
    let window = t_snap - t_start + 1;
    if window < cfg.min_motion_frames {
        return Err(Excluded::ShortMotion { frames: window });
    }

    // Per-player tracks on the common frame axis.
    let n = frame_ids.len();
    let mut tracks: BTreeMap<Option<&str>, (String, String, Vec<Option<(f64, f64)>>)> = BTreeMap::new();
    for f in frames {
        let Some(&t) = pos.get(&f.frame_index) else { continue };
        let entry = tracks
            .entry(f.player_id.as_deref())
            .or_insert_with(|| (f.team.clone(), f.role.clone(), vec![None; n]));
        entry.2[t] = Some((f.x, f.y));
    }
    let complete = |id: &str, pts: &[Option<(f64, f64)>]| -> Result<(Vec<f64>, Vec<f64>), Excluded> {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for p in pts {
            let (x, y) = p.ok_or_else(|| Excluded::IncompleteTracking { player: id.to_string() })?;
            xs.push(x);
            ys.push(y);
        }
        Ok((xs, ys))
    };
    let (_, _, ball_pts) = tracks.get(&None).ok_or(Excluded::NoBall)?;
    let (ball_x, ball_y) = complete("ball", ball_pts)?;

    let mut offense = Vec::new();
    let mut defense = Vec::new();
    let mut n_qb = 0;
    for (id, (team, role, pts)) in &tracks {
        let Some(id) = id else { continue };
        if *team == context.offense {
            if *role == cfg.quarterback_role {
                n_qb += 1;
            }
            if cfg.skill_roles.iter().any(|r| r == role) {
                let (x, y) = complete(id, pts)?;
                offense.push(Track { id: id.to_string(), role: role.clone(), x, y });
            }
        } else if *team == context.defense {
            if cfg.lineman_roles.iter().any(|r| r == role) {
                continue;
            }
            let (x, y) = complete(id, pts)?;
            defense.push(Track { id: id.to_string(), role: role.clone(), x, y });
        }
    }
    if n_qb >= 2 {
        return Err(Excluded::TwoQb);
    }
    if offense.len() != SIDE {
        return Err(Excluded::SkillCount { found: offense.len() });
    }
    if is_bunch(&offense, t_start, cfg.bunch_radius) {
        return Err(Excluded::Bunch);
    }

    let pre = t_start.saturating_sub(1);
    let los = ball_x[pre];
    defense.retain(|d| !(d.role == cfg.edge_role && (d.x[pre] - los).abs() <= cfg.rusher_window));
    if defense.len() < SIDE {
        return Err(Excluded::DefenderCount { found: defense.len() });
    }
    if defense.len() > SIDE {
        defense = nearest_defenders(&offense, defense, t_start);
    }

    let take = |tracks: &[Track], f: fn(&Track) -> &Vec<f64>| -> [Vec<f64>; SIDE] {
        std::array::from_fn(|i| f(&tracks[i]).clone())
    };
    let mut series = PlaySeries {
        key,
        context: context.clone(),
        direction,
        frame_ids,
        offense_ids: std::array::from_fn(|i| offense[i].id.clone()),
        offense_roles: std::array::from_fn(|i| offense[i].role.clone()),
        defense_ids: std::array::from_fn(|i| defense[i].id.clone()),
        defender_roles: std::array::from_fn(|i| defense[i].role.clone()),
        offense_x: take(&offense, |t| &t.x),
        offense_y: take(&offense, |t| &t.y),
        defense_x: take(&defense, |t| &t.x),
        defense_y: take(&defense, |t| &t.y),
        ball_x,
        ball_y,
        motion_window: (t_start, t_snap),
    };
    series.sort_players();
    Ok(series)
}

fn dist(a: &Track, b: &Track, t: usize) -> f64 {
    (a.x[t] - b.x[t]).hypot(a.y[t] - b.y[t])
}

fn is_bunch(offense: &[Track], t: usize, radius: f64) -> bool {
    let n = offense.len();
    for i in 0..n {
        for j in i + 1..n {
            if dist(&offense[i], &offense[j], t) > radius {
                continue;
            }
            for k in j + 1..n {
                if dist(&offense[i], &offense[k], t) <= radius && dist(&offense[j], &offense[k], t) <= radius {
                    return true;
                }
            }
        }
    }
    false
}

/// Greedy one-to-one matching on ascending offense-defender distance; the
/// matched defenders are kept. Ties go to the lexicographically smaller ids.
fn nearest_defenders(offense: &[Track], defense: Vec<Track>, t: usize) -> Vec<Track> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(offense.len() * defense.len());
    for (i, o) in offense.iter().enumerate() {
        for (j, d) in defense.iter().enumerate() {
            pairs.push((dist(o, d, t), i, j));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| defense[a.2].id.cmp(&defense[b.2].id))
            .then_with(|| offense[a.1].id.cmp(&offense[b.1].id))
    });
    let mut off_used = vec![false; offense.len()];
    let mut keep = vec![false; defense.len()];
    let mut taken = 0;
    for (_, i, j) in pairs {
        if taken == SIDE {
            break;
        }
        if off_used[i] || keep[j] {
            continue;
        }
        off_used[i] = true;
        keep[j] = true;
        taken += 1;
    }
    defense
        .into_iter()
        .zip(keep)
        .filter_map(|(d, k)| k.then_some(d))
        .collect()
}

/// Group rows by play, filter, and standardize. Output is sorted by play key.
pub fn assemble_plays(
    frames: &[RawFrame],
    contexts: &BTreeMap<PlayKey, PlayContext>,
    cfg: &FilterConfig,
) -> (Vec<PlaySeries>, IngestReport) {
    let mut grouped: BTreeMap<PlayKey, Vec<RawFrame>> = BTreeMap::new();
    for f in frames {
        grouped.entry(f.key()).or_default().push(f.clone());
    }
    let groups: Vec<(PlayKey, Vec<RawFrame>)> = grouped.into_iter().collect();
    let results: Vec<(PlayKey, Result<PlaySeries, Excluded>)> = groups
        .into_par_iter()
        .map(|(key, rows)| {
            let res = match contexts.get(&key) {
                None => Err(Excluded::NoContext),
                Some(ctx) => filter_players(&rows, ctx, cfg).map(standardize),
            };
            (key, res)
        })
        .collect();

    let mut report = IngestReport::default();
    let mut plays = Vec::new();
    for (key, res) in results {
        match res {
            Ok(s) => plays.push(s),
            Err(e) => report.excluded.push((key, e)),
        }
    }
    report.retained = plays.len();
    (plays, report)
}
