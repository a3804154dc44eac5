//! Five-state non-homogeneous HMM for one defender's lateral trajectory.
//!
//! State `j` means "guarding offensive player `j`". Emissions are Gaussian
//! around the lagged y-coordinate of the guarded receiver; off-diagonal
//! transition logits are `beta0 + beta1 * distance + u_role + v_team + w_play`.

mod decode;
pub(crate) mod engine;
pub mod scalar;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracking::{PlayKey, PlaySeries, SIDE};

pub use decode::{read_posterior_csv, write_posterior_csv, DecodedPlay};
pub use engine::argmax;
pub(crate) use engine::SeriesCache;

pub const N_STATES: usize = SIDE;

/// Treatment of frames whose lagged mean would precede the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagBoundary {
    /// Use the first frame's offensive coordinate.
    #[default]
    Clamp,
    /// Drop the first `lag` frames.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionSpec {
    pub sigma: f64,
    pub lag: usize,
    #[serde(default)]
    pub boundary: LagBoundary,
}

impl EmissionSpec {
    pub fn new(sigma: f64, lag: usize) -> Self {
        Self { sigma, lag, boundary: LagBoundary::Clamp }
    }

    fn check(&self) -> Result<()> {
        if self.sigma > 0.0 && self.sigma.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("emission sd must be positive, got {}", self.sigma)))
        }
    }
}

/// Transition model. Effects missing from a map count as zero; `w` is keyed
/// by the play key's display form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub beta0: f64,
    pub beta1: f64,
    #[serde(default)]
    pub u: BTreeMap<String, f64>,
    #[serde(default)]
    pub v: BTreeMap<String, f64>,
    #[serde(default)]
    pub w: BTreeMap<String, f64>,
    /// Sharpness of the initial distribution.
    #[serde(default = "default_alpha")]
    pub init_alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}

impl TransitionSpec {
    pub fn fixed(beta0: f64, beta1: f64) -> Self {
        Self { beta0, beta1, u: BTreeMap::new(), v: BTreeMap::new(), w: BTreeMap::new(), init_alpha: 1.0 }
    }

    /// `beta0 + u_role + v_team + w_play` for one series.
    pub fn offset(&self, s: &DefenderSeries) -> f64 {
        let get = |m: &BTreeMap<String, f64>, k: &str| m.get(k).copied().unwrap_or(0.0);
        self.beta0 + get(&self.u, &s.role) + get(&self.v, &s.defense) + get(&self.w, &s.play_key.to_string())
    }
}

/// One defender's lateral trajectory over the motion window together with
/// the five receivers' trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenderSeries {
    pub play_key: PlayKey,
    /// 1-based.
    pub defender_index: usize,
    pub role: String,
    pub defense: String,
    pub y: Vec<f64>,
    pub offense_y: [Vec<f64>; N_STATES],
}

impl DefenderSeries {
    /// The five defender series of a play, restricted to its motion window.
    pub fn from_play(p: &PlaySeries) -> Vec<DefenderSeries> {
        let (a, b) = p.motion_window;
        (0..SIDE)
            .map(|d| DefenderSeries {
                play_key: p.key.clone(),
                defender_index: d + 1,
                role: p.defender_roles[d].clone(),
                defense: p.context.defense.clone(),
                y: p.defense_y[d][a..=b].to_vec(),
                offense_y: std::array::from_fn(|j| p.offense_y[j][a..=b].to_vec()),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let t = self.y.len();
        if t == 0 {
            return Err(Error::Empty("defender series"));
        }
        if self.offense_y.iter().any(|o| o.len() != t) {
            return Err(Error::Dimension(format!(
                "play {} defender {}: offense series lengths differ from {t}",
                self.play_key, self.defender_index
            )));
        }
        let finite = self.y.iter().chain(self.offense_y.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidData(format!(
                "play {} defender {}: non-finite coordinate",
                self.play_key, self.defender_index
            )));
        }
        Ok(())
    }
}

/// Smoothed state probabilities, one row of five per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMatrix {
    pub probs: Vec<[f64; N_STATES]>,
}

impl PosteriorMatrix {
    pub fn n_frames(&self) -> usize {
        self.probs.len()
    }

    /// Most probable state per frame, ties to the lowest index.
    pub fn argmax_sequence(&self) -> Vec<usize> {
        self.probs.iter().map(|p| argmax(p)).collect()
    }
}

/// Normal density of `y_t` under state `j` at frame `t` (0-based). The mean is
/// the receiver's y at `t - lag`, clamped to the first frame.
pub fn emission_density(y_t: f64, t: usize, j: usize, s: &DefenderSeries, spec: &EmissionSpec) -> Result<f64> {
    spec.check()?;
    if j >= N_STATES || t >= s.len() {
        return Err(Error::InvalidParameter(format!("state {j} / frame {t} out of range")));
    }
    let mu = s.offense_y[j][t.saturating_sub(spec.lag)];
    let z = (y_t - mu) / spec.sigma;
    Ok((-0.5 * z * z).exp() / (spec.sigma * (2.0 * std::f64::consts::PI).sqrt()))
}

/// Transition matrix into frame `t >= 1` (0-based), using receiver distances
/// at `t - lag` clamped to the first frame.
pub fn transition_matrix(
    t: usize,
    s: &DefenderSeries,
    spec: &TransitionSpec,
    lag: usize,
) -> Result<[[f64; N_STATES]; N_STATES]> {
    if t == 0 || t >= s.len() {
        return Err(Error::InvalidParameter(format!("transition frame {t} out of range 1..{}", s.len())));
    }
    let c = SeriesCache::new(s, lag, LagBoundary::Clamp, spec.init_alpha)?;
    Ok(engine::gamma(&c, t, spec.offset(s), spec.beta1))
}

/// Softmax over negative first-frame distances to the five receivers.
pub fn initial_distribution(s: &DefenderSeries, alpha: f64) -> Result<[f64; N_STATES]> {
    s.validate()?;
    let first: [f64; N_STATES] = std::array::from_fn(|j| s.offense_y[j][0]);
    Ok(engine::initial_from(s.y[0], &first, alpha))
}

fn cache(s: &DefenderSeries, emis: &EmissionSpec, trans: &TransitionSpec) -> Result<SeriesCache> {
    emis.check()?;
    SeriesCache::new(s, emis.lag, emis.boundary, trans.init_alpha)
}

pub fn forward_loglik(s: &DefenderSeries, emis: &EmissionSpec, trans: &TransitionSpec) -> Result<f64> {
    let c = cache(s, emis, trans)?;
    Ok(engine::forward(&c, trans.offset(s), trans.beta1, emis.sigma.ln()))
}

pub fn local_decode(s: &DefenderSeries, emis: &EmissionSpec, trans: &TransitionSpec) -> Result<PosteriorMatrix> {
    let c = cache(s, emis, trans)?;
    Ok(PosteriorMatrix { probs: engine::posterior(&c, trans.offset(s), trans.beta1, emis.sigma) })
}

pub fn viterbi(s: &DefenderSeries, emis: &EmissionSpec, trans: &TransitionSpec) -> Result<Vec<usize>> {
    let c = cache(s, emis, trans)?;
    Ok(engine::viterbi(&c, trans.offset(s), trans.beta1, emis.sigma))
}

/// Decode every defender of every play in parallel. Output order follows
/// the input.
pub fn decode_plays(plays: &[PlaySeries], emis: &EmissionSpec, trans: &TransitionSpec) -> Result<Vec<DecodedPlay>> {
    use rayon::prelude::*;
    plays
        .par_iter()
        .map(|p| {
            let posteriors = DefenderSeries::from_play(p)
                .iter()
                .map(|s| local_decode(s, emis, trans))
                .collect::<Result<Vec<_>>>()?;
            Ok(DecodedPlay { key: p.key.clone(), posteriors })
        })
        .collect()
}
