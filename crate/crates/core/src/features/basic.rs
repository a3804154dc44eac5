use super::{convex_hull_stats, FeatureRow, CONTEXT_NAMES};
use crate::error::{Error, Result};
use crate::tracking::{relative_to_ball, PlaySeries, SIDE};

/// 33 pre-motion values at the frame just before motion starts. Expects a
/// standardized series.
pub fn pre_motion_features(s: &PlaySeries) -> Result<Vec<f64>> {
    let t = s.pre_motion_frame();
    let off: Vec<(f64, f64)> = (0..SIDE).map(|i| (s.offense_x[i][t], s.offense_y[i][t])).collect();
    let def: Vec<(f64, f64)> = (0..SIDE).map(|i| (s.defense_x[i][t], s.defense_y[i][t])).collect();
    let ho = convex_hull_stats(&off);
    let hd = convex_hull_stats(&def);
    let mut v = vec![ho.area, ho.span_x, ho.span_y, hd.area, hd.span_x, hd.span_y];

    let (rel_off, rel_def) = relative_to_ball(s, t);
    v.extend(rel_off.iter().map(|p| p.0));
    v.extend(rel_def.iter().map(|p| p.0));
    v.extend(rel_off.iter().map(|p| p.1));
    v.extend(rel_def.iter().map(|p| p.1));

    let c = &s.context;
    let ctx = [
        f64::from(c.quarter),
        f64::from(c.down),
        c.yards_to_go,
        c.absolute_yardline,
        f64::from(c.pre_snap_home_score),
        f64::from(c.pre_snap_visitor_score),
        c.seconds_left_in_half,
    ];
    for (name, value) in CONTEXT_NAMES.iter().zip(ctx) {
        if !value.is_finite() {
            return Err(Error::MissingField(name.to_string()));
        }
    }
    v.extend(ctx);
    if let Some(bad) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidData(format!("play {}: non-finite pre-motion feature {bad}", s.key)));
    }
    Ok(v)
}

fn range(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

fn path_length(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| (a[1] - a[0]).hypot(b[1] - b[0])).sum()
}

/// Naive motion features over the motion window, in [`super::POST_MOTION_NAMES`] order:
/// largest per-player x and y range for each side, and summed path lengths.
pub fn post_motion_features(s: &PlaySeries) -> Vec<f64> {
    let (a, b) = s.motion_window;
    let side = |xs: &[Vec<f64>; SIDE], ys: &[Vec<f64>; SIDE]| {
        let mut max_x: f64 = 0.0;
        let mut max_y: f64 = 0.0;
        let mut tot = 0.0;
        for i in 0..SIDE {
            let (x, y) = (&xs[i][a..=b], &ys[i][a..=b]);
            max_x = max_x.max(range(x));
            max_y = max_y.max(range(y));
            tot += path_length(x, y);
        }
        (max_x, max_y, tot)
    };
    let (mxo, myo, to) = side(&s.offense_x, &s.offense_y);
    let (mxd, myd, td) = side(&s.defense_x, &s.defense_y);
    vec![mxo, mxd, myo, myd, to, td]
}

/// Pre-motion and naive post-motion features for one play; HMM features are
/// attached later.
pub fn feature_row(s: &PlaySeries) -> Result<FeatureRow> {
    Ok(FeatureRow {
        key: s.key.clone(),
        offense: s.context.offense.clone(),
        defense: s.context.defense.clone(),
        label: s.context.coverage.map(|c| c.label() as u8),
        pre_motion: pre_motion_features(s)?,
        post_motion_naive: post_motion_features(s),
        hmm: None,
    })
}
