use super::{PlayDirection, PlaySeries, FIELD_LENGTH, FIELD_WIDTH, SIDE};

/// Orient every play so the offense moves toward x = 0 (x becomes the
/// distance to the relevant end zone). Right-moving plays are rotated by 180
/// degrees; left-moving plays are returned unchanged.
pub fn standardize(mut s: PlaySeries) -> PlaySeries {
    if s.direction == PlayDirection::Left {
        return s;
    }
    let flip_x = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = FIELD_LENGTH - *x);
    let flip_y = |v: &mut Vec<f64>| v.iter_mut().for_each(|y| *y = FIELD_WIDTH - *y);
    for i in 0..SIDE {
        flip_x(&mut s.offense_x[i]);
        flip_x(&mut s.defense_x[i]);
        flip_y(&mut s.offense_y[i]);
        flip_y(&mut s.defense_y[i]);
    }
    flip_x(&mut s.ball_x);
    flip_y(&mut s.ball_y);
    s.direction = PlayDirection::Left;
    s.sort_players();
    s
}

/// Player coordinates relative to the football at frame `t`, as
/// `(offense, defense)` arrays of `(dx, dy)`.
pub fn relative_to_ball(s: &PlaySeries, t: usize) -> ([(f64, f64); SIDE], [(f64, f64); SIDE]) {
    let (bx, by) = (s.ball_x[t], s.ball_y[t]);
    let off = std::array::from_fn(|i| (s.offense_x[i][t] - bx, s.offense_y[i][t] - by));
    let def = std::array::from_fn(|i| (s.defense_x[i][t] - bx, s.defense_y[i][t] - by));
    (off, def)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::tracking::{Coverage, PlayContext, PlayKey};

    /// Small hand-built series (3 frames, motion from frame index 1).
    pub(crate) fn toy_series(direction: PlayDirection) -> PlaySeries {
        let ox = [[30.0, 30.0, 30.0], [31.0, 31.0, 31.0], [35.0, 35.0, 35.0], [30.0, 30.0, 30.0], [30.0, 30.5, 31.0]];
        let oy = [[48.0, 48.0, 48.0], [33.0, 33.0, 33.0], [27.0, 27.0, 27.0], [20.0, 20.0, 20.0], [5.0, 8.0, 11.0]];
        let dx = [[25.0; 3], [24.0; 3], [23.0; 3], [26.0; 3], [25.0; 3]];
        let dy = [[6.0, 7.0, 9.0], [19.0; 3], [26.0; 3], [34.0; 3], [47.0; 3]];
        let v = |a: [f64; 3]| a.to_vec();
        PlaySeries {
            key: PlayKey::new("G", "P"),
            context: PlayContext {
                quarter: 1,
                down: 2,
                yards_to_go: 7.0,
                absolute_yardline: 35.0,
                pre_snap_home_score: 3,
                pre_snap_visitor_score: 7,
                seconds_left_in_half: 420.0,
                coverage: Some(Coverage::Zone),
                offense: "KC".into(),
                defense: "ARI".into(),
            },
            direction,
            frame_ids: vec![1, 2, 3],
            offense_ids: ["a", "b", "c", "d", "e"].map(String::from),
            offense_roles: ["WR", "WR", "RB", "TE", "WR"].map(String::from),
            defense_ids: ["p", "q", "r", "s", "t"].map(String::from),
            defender_roles: ["CB", "SS", "MLB", "FS", "CB"].map(String::from),
            offense_x: ox.map(v),
            offense_y: oy.map(v),
            defense_x: dx.map(v),
            defense_y: dy.map(v),
            ball_x: vec![30.0; 3],
            ball_y: vec![26.0; 3],
            motion_window: (1, 2),
        }
    }

    fn mirror(s: &PlaySeries) -> PlaySeries {
        let mut m = s.clone();
        let fx = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = FIELD_LENGTH - *x);
        let fy = |v: &mut Vec<f64>| v.iter_mut().for_each(|y| *y = FIELD_WIDTH - *y);
        for i in 0..SIDE {
            fx(&mut m.offense_x[i]);
            fx(&mut m.defense_x[i]);
            fy(&mut m.offense_y[i]);
            fy(&mut m.defense_y[i]);
        }
        fx(&mut m.ball_x);
        fy(&mut m.ball_y);
        m.direction = PlayDirection::Right;
        m.sort_players();
        m
    }

    #[test]
    fn right_play_maps_to_mirror_of_left() {
        let mut right = toy_series(PlayDirection::Right);
        right.ball_x = vec![100.0; 3];
        let s = standardize(right);
        assert_eq!(s.ball_x[0], 20.0);
        assert_eq!(s.direction, PlayDirection::Left);
    }

    #[test]
    fn idempotent_on_left_plays() {
        let s = toy_series(PlayDirection::Left);
        assert_eq!(standardize(s.clone()), s);
        assert_eq!(standardize(standardize(s.clone())), s);
    }

    #[test]
    fn mirrored_inputs_agree_after_standardization() {
        let left = toy_series(PlayDirection::Left);
        let back = standardize(mirror(&left));
        assert_eq!(back.offense_ids, left.offense_ids);
        assert_eq!(back.defense_ids, left.defense_ids);
        for i in 0..SIDE {
            for t in 0..3 {
                assert!((back.offense_y[i][t] - left.offense_y[i][t]).abs() < 1e-12);
                assert!((back.defense_x[i][t] - left.defense_x[i][t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn defender_on_ball_is_origin() {
        let mut s = toy_series(PlayDirection::Left);
        s.defense_x[2][0] = s.ball_x[0];
        s.defense_y[2][0] = s.ball_y[0];
        let (_, def) = relative_to_ball(&s, 0);
        assert_eq!(def[2], (0.0, 0.0));
    }
}
