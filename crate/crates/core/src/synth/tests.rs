use super::*;
use crate::hmm::{transition_matrix, viterbi, DefenderSeries};
use crate::tracking::{assemble_plays, parse_plays, parse_tracking};

fn small(n: usize, seed: u64) -> SimConfig {
    SimConfig { n_plays: n, frames_min: 20, frames_max: 30, seed, ..SimConfig::default() }
}

#[test]
fn fixed_seed_is_deterministic() {
    let a = simulate(&small(12, 5)).unwrap();
    let b = simulate(&small(12, 5)).unwrap();
    assert_eq!(a, b);
    let c = simulate(&small(12, 6)).unwrap();
    assert_ne!(a.plays[0].series.defense_y, c.plays[0].series.defense_y);
}

#[test]
fn every_play_survives_ingestion_with_its_truth() {
    let d = simulate(&small(30, 2)).unwrap();
    assert_eq!(d.plays.len(), 30);
    for p in &d.plays {
        let (a, b) = p.series.motion_window;
        for st in &p.true_states {
            assert_eq!(st.len(), b - a + 1);
            assert!(st.iter().all(|&s| s < SIDE));
        }
        assert_eq!(p.series.context.coverage, Some(p.label));
    }
    assert_eq!(d.truth.w.len(), 30);
}

#[test]
fn written_files_reingest_to_the_same_series() {
    let d = simulate(&small(15, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    d.write(dir.path()).unwrap();
    let parsed = parse_tracking(dir.path().join("tracking.csv")).unwrap();
    assert!(parsed.rejected.is_empty());
    let ctx = parse_plays(dir.path().join("plays.csv")).unwrap();
    let (series, report) = assemble_plays(&parsed.frames, &ctx, &FilterConfig::default());
    assert!(report.excluded.is_empty(), "{:?}", report.excluded);
    assert_eq!(series, d.series());
    assert!(dir.path().join("truth.json").exists());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        SimConfig { man_fraction: 1.5, ..small(5, 1) },
        SimConfig { frames_min: 8, frames_max: 30, ..small(5, 1) },
        SimConfig { frames_min: 40, frames_max: 30, ..small(5, 1) },
        SimConfig { n_plays: 0, ..small(5, 1) },
        SimConfig { noise_sd: Some(-1.0), ..small(5, 1) },
    ];
    for c in bad {
        assert!(matches!(simulate(&c), Err(Error::InvalidParameter(_))), "{c:?}");
    }
}

#[test]
fn switch_count_matches_its_conditional_expectation() {
    let cfg = SimConfig { n_plays: 500, frames_min: 20, frames_max: 30, seed: 17, ..SimConfig::default() };
    let d = simulate(&cfg).unwrap();
    let spec = d.truth.transition_spec();
    let (mut observed, mut expected, mut var) = (0.0, 0.0, 0.0);
    for p in &d.plays {
        for (s, states) in DefenderSeries::from_play(&p.series).iter().zip(&p.true_states) {
            for k in 1..s.len() {
                let g = transition_matrix(k, s, &spec, d.truth.lag).unwrap();
                let q = 1.0 - g[states[k - 1]][states[k - 1]];
                expected += q;
                var += q * (1.0 - q);
                observed += f64::from(u8::from(states[k] != states[k - 1]));
            }
        }
    }
    assert!(expected > 30.0, "too few expected switches: {expected}");
    let z = (observed - expected) / var.sqrt();
    assert!(z.abs() < 3.0, "observed {observed}, expected {expected}, z {z}");
}

#[test]
fn near_noiseless_chains_decode_exactly() {
    let cfg = SimConfig { noise_sd: Some(0.01), ..small(20, 9) };
    let d = simulate(&cfg).unwrap();
    let (emis, trans) = (d.truth.emission_spec(), d.truth.transition_spec());
    assert_eq!(emis.sigma, 0.01);
    let (mut hit, mut total) = (0usize, 0usize);
    for p in &d.plays {
        for (s, states) in DefenderSeries::from_play(&p.series).iter().zip(&p.true_states) {
            let path = viterbi(s, &emis, &trans).unwrap();
            hit += path.iter().zip(states).filter(|(a, b)| a == b).count();
            total += states.len();
        }
    }
    assert!(hit as f64 >= 0.99 * total as f64, "{hit}/{total}");
}

#[test]
fn contrasts_shift_zone_depth() {
    let cfg = SimConfig { depth_contrast: 3.0, ..small(80, 4) };
    let d = simulate(&cfg).unwrap();
    let mean_depth = |c: Coverage| {
        let v: Vec<f64> = d
            .plays
            .iter()
            .filter(|p| p.label == c)
            .flat_map(|p| {
                let t = p.series.motion_window.0;
                let bx = p.series.ball_x[t];
                p.series.defense_x.iter().map(move |x| (x[t] - bx).abs()).collect::<Vec<_>>()
            })
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean_depth(Coverage::Zone) - mean_depth(Coverage::Man) > 2.0);
}
