//! Synthetic motion plays with known guarding assignments.
//!
//! Each play is laid out as a full 22-player snapshot (linemen, a rushing
//! edge, a deep safety) so that the ingestion filter has real work to do.
//! One skill player moves laterally along an eased path; each coverage
//! defender follows a latent chain drawn from the transition model and sits
//! at the lagged y of its current target plus Gaussian noise. Coverage
//! labels modulate the play effect, the defenders' depth and their backpedal
//! so that every feature group carries some signal.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::Theta;
use crate::hmm::{EmissionSpec, TransitionSpec, N_STATES};
use crate::rng;
use crate::tracking::{
    filter_players, standardize, write_play_csv, write_tracking_csv, Coverage, FilterConfig, PlayContext,
    PlayDirection, PlayKey, PlaySeries, RawFrame, FIELD_LENGTH, FIELD_WIDTH, SIDE,
};

pub const ROLES: [&str; 6] = ["ILB", "MLB", "OLB", "CB", "SS", "FS"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_plays: usize,
    /// Inclusive range of motion-window lengths.
    pub frames_min: usize,
    pub frames_max: usize,
    /// Static frames before motion starts.
    pub pre_frames: usize,
    pub true_theta: Theta,
    pub true_lag: usize,
    pub man_fraction: f64,
    pub seed: u64,
    /// Emission standard deviation; `None` uses `true_theta.sigma`.
    pub noise_sd: Option<f64>,
    pub n_teams: usize,
    /// Coverage-defender roles, drawn uniformly.
    pub roles: Vec<String>,
    /// Shift of the play effect between zone and man plays.
    pub switch_contrast: f64,
    /// Extra pre-snap depth of zone defenders, yards.
    pub depth_contrast: f64,
    /// Backpedal of zone defenders over the motion window, yards.
    pub drift_contrast: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_plays: 200,
            frames_min: 40,
            frames_max: 80,
            pre_frames: 10,
            true_theta: Theta { beta0: -4.0, beta1: -1.0, sigma: 0.5, sigma_u: 0.3, sigma_v: 0.3, sigma_w: 0.3 },
            true_lag: 3,
            man_fraction: 0.4,
            seed: 1,
            noise_sd: None,
            n_teams: 8,
            roles: ROLES.iter().map(|s| s.to_string()).collect(),
            switch_contrast: 0.0,
            depth_contrast: 0.0,
            drift_contrast: 0.0,
        }
    }
}

impl SimConfig {
    pub fn emission_sd(&self) -> f64 {
        self.noise_sd.unwrap_or(self.true_theta.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_plays == 0 {
            return bad("n_plays must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.man_fraction) {
            return bad(format!("man_fraction {} outside [0, 1]", self.man_fraction));
        }
        if self.frames_min > self.frames_max {
            return bad("frames_min exceeds frames_max".into());
        }
        if self.frames_min < self.true_lag + 10 {
            return bad(format!("frames_min {} < lag + 10 = {}", self.frames_min, self.true_lag + 10));
        }
        if self.pre_frames == 0 {
            return bad("pre_frames must be at least 1".into());
        }
        if self.n_teams < 2 {
            return bad("need at least two teams".into());
        }
        if self.roles.is_empty() {
            return bad("role list is empty".into());
        }
        if !(self.emission_sd() >= 0.0) {
            return bad(format!("emission sd {} is negative", self.emission_sd()));
        }
        let t = &self.true_theta;
        if [t.sigma_u, t.sigma_v, t.sigma_w].iter().any(|s| !(*s >= 0.0)) {
            return bad("random-effect standard deviations must be non-negative".into());
        }
        Ok(())
    }
}

/// Generating parameters, including the realized random effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub theta: Theta,
    pub lag: usize,
    pub u: BTreeMap<String, f64>,
    pub v: BTreeMap<String, f64>,
    /// Total play effect, contrast shift included.
    pub w: BTreeMap<String, f64>,
}

impl SimTruth {
    pub fn emission_spec(&self) -> EmissionSpec {
        EmissionSpec::new(self.theta.sigma, self.lag)
    }

    pub fn transition_spec(&self) -> TransitionSpec {
        TransitionSpec {
            beta0: self.theta.beta0,
            beta1: self.theta.beta1,
            u: self.u.clone(),
            v: self.v.clone(),
            w: self.w.clone(),
            init_alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPlay {
    /// Standardized five-on-five series, exactly as ingestion produces it.
    pub series: PlaySeries,
    /// Guarded receiver per series defender and motion-window frame, as an
    /// index into the series' offense.
    pub true_states: [Vec<usize>; SIDE],
    pub label: Coverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDataset {
    pub plays: Vec<SimPlay>,
    pub frames: Vec<RawFrame>,
    pub contexts: BTreeMap<PlayKey, PlayContext>,
    pub truth: SimTruth,
}

impl SimDataset {
    pub fn series(&self) -> Vec<PlaySeries> {
        self.plays.iter().map(|p| p.series.clone()).collect()
    }

    /// Write `tracking.csv`, `plays.csv` and `truth.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_tracking_csv(dir.join("tracking.csv"), &self.frames)?;
        write_play_csv(dir.join("plays.csv"), &self.contexts)?;
        let truth = serde_json::json!({
            "truth": self.truth,
            "plays": self.plays.iter().map(|p| serde_json::json!({
                "gameId": p.series.key.game_id,
                "playId": p.series.key.play_id,
                "label": p.label,
                "true_states": p.true_states,
            })).collect::<Vec<_>>(),
        });
        std::fs::write(dir.join("truth.json"), serde_json::to_string(&truth)?)?;
        Ok(())
    }
}

struct Player {
    id: String,
    team: String,
    role: String,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Player {
    fn fixed(id: String, team: &str, role: &str, x: f64, y: f64, n: usize) -> Self {
        Self { id, team: team.into(), role: role.into(), x: vec![x; n], y: vec![y; n] }
    }
}

struct Effects {
    u: BTreeMap<String, f64>,
    v: BTreeMap<String, f64>,
}

fn team_name(i: usize) -> String {
    format!("T{:02}", i + 1)
}

fn draw(rng: &mut rng::Rng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).expect("positive sd").sample(rng)
    } else {
        0.0
    }
}

fn softmax_row(eta: &[f64; N_STATES]) -> [f64; N_STATES] {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = eta.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

fn sample_index(rng: &mut rng::Rng, p: &[f64; N_STATES]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, pj) in p.iter().enumerate() {
        acc += pj;
        if u < acc {
            return j;
        }
    }
    N_STATES - 1
}

struct Generated {
    frames: Vec<RawFrame>,
    context: PlayContext,
    coverage_ids: [String; SIDE],
    receiver_ids: [String; SIDE],
    /// `[coverage defender][window frame]` -> receiver slot.
    states: [Vec<usize>; SIDE],
    w: f64,
}

fn generate_play(cfg: &SimConfig, fx: &Effects, index: usize, rng: &mut rng::Rng) -> Generated {
    let th = &cfg.true_theta;
    let key = PlayKey::new(format!("SIM{:04}", index / 50 + 1), format!("{}", index + 1));
    let tw = rng.gen_range(cfg.frames_min..=cfg.frames_max);
    let pre = cfg.pre_frames;
    let post = 3;
    let n = pre + tw + post;
    let k_of = |f: usize| f.saturating_sub(pre).min(tw - 1);

    let label = if rng.gen::<f64>() < cfg.man_fraction { Coverage::Man } else { Coverage::Zone };
    let zone = f64::from(u8::from(label == Coverage::Zone));
    let mut teams: Vec<usize> = (0..cfg.n_teams).collect();
    teams.shuffle(rng);
    let (offense, defense) = (team_name(teams[0]), team_name(teams[1]));

    let los = rng.gen_range(45.0..95.0);
    let yb: f64 = rng.gen_range(18.0..35.0);

    // Receivers: four split out plus a back behind the quarterback.
    let mut ys: Vec<f64>;
    loop {
        ys = (0..4).map(|_| (yb + rng.gen_range(-14.0..14.0)).clamp(2.0, FIELD_WIDTH - 2.0)).collect();
        ys.push(yb + rng.gen_range(-1.0..1.0));
        let ok = (0..5).all(|a| (a + 1..5).all(|b| (ys[a] - ys[b]).abs() >= 2.5));
        if ok {
            break;
        }
    }
    let roles = ["WR", "WR", "WR", "TE", "RB"];
    let mut receivers: Vec<Player> = (0..5)
        .map(|j| {
            let x = if j == 4 { los + rng.gen_range(5.0..7.0) } else { los + rng.gen_range(0.5..1.5) };
            Player::fixed(format!("O{}", j + 1), &offense, roles[j], x, ys[j], n)
        })
        .collect();

    // Eased lateral motion of one receiver across the window.
    let mover = rng.gen_range(0..5);
    let dist = rng.gen_range(8.0..24.0);
    let y0 = ys[mover];
    let mut dir = if rng.gen::<f64>() < 0.85 { (yb - y0).signum() } else { (y0 - yb).signum() };
    if dir == 0.0 {
        dir = 1.0;
    }
    if !(2.0..=FIELD_WIDTH - 2.0).contains(&(y0 + dir * dist)) {
        dir = -dir;
    }
    let span = (0.8 * tw as f64).max(1.0);
    for f in 0..n {
        let k = if f < pre { 0.0 } else { ((f - pre) as f64).min(span) };
        let s = k / span;
        let y = y0 + dir * dist * (1.0 - (std::f64::consts::PI * s).cos()) / 2.0;
        receivers[mover].y[f] = y.clamp(1.0, FIELD_WIDTH - 1.0);
    }

    // Latent chains on the window axis.
    let w = draw(rng, th.sigma_w) + cfg.switch_contrast * (zone - (1.0 - cfg.man_fraction));
    let cov_roles: Vec<String> = (0..SIDE).map(|_| cfg.roles[rng.gen_range(0..cfg.roles.len())].clone()).collect();
    let lagged = |r: &[Player], k: usize, j: usize| r[j].y[pre + k.saturating_sub(cfg.true_lag)];
    let sd = cfg.emission_sd();
    let mut states: [Vec<usize>; SIDE] = std::array::from_fn(|_| Vec::with_capacity(tw));
    let mut def_y: [Vec<f64>; SIDE] = std::array::from_fn(|_| vec![0.0; n]);
    for d in 0..SIDE {
        let a = th.beta0 + fx.u.get(&cov_roles[d]).copied().unwrap_or(0.0) + fx.v[&defense] + w;
        let mut s = d;
        for k in 0..tw {
            if k > 0 {
                let eta: [f64; N_STATES] = std::array::from_fn(|j| {
                    if j == s {
                        0.0
                    } else {
                        a + th.beta1 * (lagged(&receivers, k, s) - lagged(&receivers, k, j)).abs()
                    }
                });
                s = sample_index(rng, &softmax_row(&eta));
            }
            states[d].push(s);
            def_y[d][pre + k] = (lagged(&receivers, k, s) + draw(rng, sd)).clamp(0.0, FIELD_WIDTH);
        }
        for f in 0..pre {
            def_y[d][f] = def_y[d][pre];
        }
        for f in pre + tw..n {
            def_y[d][f] = def_y[d][pre + tw - 1];
        }
    }

    let mut players: Vec<Player> = Vec::with_capacity(23);
    players.push(Player::fixed("O6".into(), &offense, "QB", los + 5.0, yb, n));
    for (i, (role, dy)) in [("T", -4.0), ("G", -2.0), ("C", 0.0), ("G", 2.0), ("T", 4.0)].iter().enumerate() {
        players.push(Player::fixed(format!("O{}", 7 + i), &offense, role, los + 1.0, yb + dy, n));
    }
    for (i, (role, dy)) in [("DE", -3.0), ("DT", -1.0), ("DT", 1.0), ("DE", 3.0)].iter().enumerate() {
        players.push(Player::fixed(format!("D{}", 7 + i), &defense, role, los - 1.0, yb + dy, n));
    }
    let edge = if rng.gen::<bool>() { 6.0 } else { -6.0 };
    players.push(Player::fixed("D11".into(), &defense, "OLB", los - 0.5, yb + edge, n));
    let deep_role = if rng.gen::<bool>() { "FS" } else { "SS" };
    players.push(Player::fixed("D12".into(), &defense, deep_role, los - rng.gen_range(25.0..30.0), yb, n));
    for d in 0..SIDE {
        let depth = rng.gen_range(2.0..6.0) + cfg.depth_contrast * zone;
        let drift = rng.gen_range(0.0..0.5) + cfg.drift_contrast * zone;
        let x: Vec<f64> = (0..n).map(|f| los - depth - drift * k_of(f) as f64 / (tw - 1) as f64).collect();
        players.push(Player {
            id: format!("D{}", d + 1),
            team: defense.clone(),
            role: cov_roles[d].clone(),
            x,
            y: def_y[d].clone(),
        });
    }
    let receiver_ids: [String; SIDE] = std::array::from_fn(|j| receivers[j].id.clone());
    players.extend(receivers);

    let direction = if rng.gen::<bool>() { PlayDirection::Left } else { PlayDirection::Right };
    let orient = |x: f64, y: f64| match direction {
        PlayDirection::Left => (x, y),
        PlayDirection::Right => (FIELD_LENGTH - x, FIELD_WIDTH - y),
    };
    let event = |f: usize| {
        if f == pre {
            Some("man_in_motion".to_string())
        } else if f == pre + tw - 1 {
            Some("ball_snap".to_string())
        } else {
            None
        }
    };
    let mut frames = Vec::with_capacity(n * 23);
    for f in 0..n {
        let (bx, by) = orient(los, yb);
        frames.push(RawFrame {
            game_id: key.game_id.clone(),
            play_id: key.play_id.clone(),
            player_id: None,
            frame_index: f as u32 + 1,
            x: bx,
            y: by,
            team: "football".into(),
            role: String::new(),
            event: event(f),
            play_direction: direction,
        });
        for p in &players {
            let (x, y) = orient(p.x[f], p.y[f]);
            frames.push(RawFrame {
                game_id: key.game_id.clone(),
                play_id: key.play_id.clone(),
                player_id: Some(p.id.clone()),
                frame_index: f as u32 + 1,
                x,
                y,
                team: p.team.clone(),
                role: p.role.clone(),
                event: event(f),
                play_direction: direction,
            });
        }
    }

    let context = PlayContext {
        quarter: rng.gen_range(1..=4),
        down: rng.gen_range(1..=4),
        yards_to_go: f64::from(rng.gen_range(1..=15u8)),
        absolute_yardline: (los * 10.0).round() / 10.0,
        pre_snap_home_score: rng.gen_range(0..=35),
        pre_snap_visitor_score: rng.gen_range(0..=35),
        seconds_left_in_half: f64::from(rng.gen_range(0..=1800u16)),
        coverage: Some(label),
        offense,
        defense,
    };
    Generated {
        frames,
        context,
        coverage_ids: std::array::from_fn(|d| format!("D{}", d + 1)),
        receiver_ids,
        states,
        w,
    }
}

fn to_sim_play(g: &Generated) -> Option<(SimPlay, PlayKey)> {
    let cfg = FilterConfig::default();
    let series = standardize(filter_players(&g.frames, &g.context, &cfg).ok()?);
    let mut kept = series.defense_ids.to_vec();
    kept.sort();
    let mut want = g.coverage_ids.to_vec();
    want.sort();
    if kept != want {
        return None;
    }
    let rec_pos = |slot: usize| series.offense_ids.iter().position(|id| *id == g.receiver_ids[slot]);
    let slot_to_series: Vec<usize> = (0..SIDE).map(rec_pos).collect::<Option<_>>()?;
    let true_states = std::array::from_fn(|d| {
        let c = g.coverage_ids.iter().position(|id| *id == series.defense_ids[d]).expect("kept defender");
        g.states[c].iter().map(|&s| slot_to_series[s]).collect()
    });
    let label = g.context.coverage.expect("labelled");
    let key = series.key.clone();
    Some((SimPlay { series, true_states, label }, key))
}

/// Generate a dataset; identical configurations give identical output.
pub fn simulate(cfg: &SimConfig) -> Result<SimDataset> {
    cfg.validate()?;
    let th = cfg.true_theta;
    let mut erng = rng::stream(cfg.seed, "sim.effects", 0);
    let mut roles: Vec<String> = cfg.roles.clone();
    roles.sort();
    roles.dedup();
    let u: BTreeMap<String, f64> = roles.into_iter().map(|r| (r, draw(&mut erng, th.sigma_u))).collect();
    let v: BTreeMap<String, f64> = (0..cfg.n_teams).map(|t| (team_name(t), draw(&mut erng, th.sigma_v))).collect();
    let fx = Effects { u, v };

    let made: Vec<Result<(Generated, SimPlay, PlayKey)>> = (0..cfg.n_plays)
        .into_par_iter()
        .map(|i| {
            let mut prng = rng::stream(cfg.seed, "sim.play", i as u64);
            for _ in 0..200 {
                let g = generate_play(cfg, &fx, i, &mut prng);
                if let Some((play, key)) = to_sim_play(&g) {
                    return Ok((g, play, key));
                }
            }
            Err(Error::InvalidParameter(format!("could not lay out play {i} so that filtering keeps its coverage defenders")))
        })
        .collect();

    let mut plays = Vec::with_capacity(cfg.n_plays);
    let mut frames = Vec::new();
    let mut contexts = BTreeMap::new();
    let mut w = BTreeMap::new();
    for r in made {
        let (g, play, key) = r?;
        w.insert(key.to_string(), g.w);
        contexts.insert(key, g.context);
        frames.extend(g.frames);
        plays.push(play);
    }
    plays.sort_by(|a, b| a.series.key.cmp(&b.series.key));
    let used_roles: std::collections::BTreeSet<&String> =
        plays.iter().flat_map(|p| p.series.defender_roles.iter()).collect();
    let used_teams: std::collections::BTreeSet<&String> = contexts.values().map(|c| &c.defense).collect();
    let truth = SimTruth {
        theta: Theta { sigma: cfg.emission_sd(), ..th },
        lag: cfg.true_lag,
        u: fx.u.iter().filter(|(k, _)| used_roles.contains(k)).map(|(k, v)| (k.clone(), *v)).collect(),
        v: fx.v.iter().filter(|(k, _)| used_teams.contains(k)).map(|(k, v)| (k.clone(), *v)).collect(),
        w,
    };
    Ok(SimDataset { plays, frames, contexts, truth })
}

#[cfg(test)]
mod tests;
