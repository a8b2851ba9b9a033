//! Resampling an event onto the fixed hourly grid.

use super::{ConjunctionEvent, GriddedSeries, ValueScale, GRID_LEN, STEPS_PER_DAY};
use crate::error::{CoreError, Result};

/// Snap observations to their nearest grid step, interpolate interior gaps
/// linearly in normalized space, and pad both ends with the normalized pad
/// value 0.
///
/// Snapping ties (an observation exactly between two steps) go to the
/// smaller index. When two observations snap to the same step, the
/// later-in-time one (smaller tau) wins. Observations closer than half a
/// step to either side of the grid's end (tau below 1/48 days) fall off the
/// grid and are skipped, so no snap ever displaces an observation by more
/// than half a grid step.
pub fn grid_event<S: ValueScale>(event: &ConjunctionEvent, scale: &S) -> Result<GriddedSeries> {
    let mut snapped: Vec<Option<f64>> = vec![None; GRID_LEN];
    for obs in event.observations() {
        let x = STEPS_PER_DAY * (super::GRID_START_DAYS - obs.tau_days);
        let idx = (x - 0.5).ceil().max(0.0) as usize;
        if idx >= GRID_LEN {
            continue;
        }
        // Observations arrive in decreasing tau, so overwriting keeps the
        // later-in-time value on a collision.
        snapped[idx] = Some(scale.normalize(obs.sigma_m));
    }

    let occupied: Vec<usize> = (0..GRID_LEN).filter(|&i| snapped[i].is_some()).collect();
    if occupied.len() < 2 {
        return Err(CoreError::data(format!(
            "event {}: observations cover {} grid step(s); need at least 2 to interpolate",
            event.event_id(),
            occupied.len()
        )));
    }

    let first = occupied[0];
    let last = *occupied.last().expect("non-empty");
    let mut values = vec![0.0; GRID_LEN];
    let mut obs_mask = vec![false; GRID_LEN];
    let mut pad_mask = vec![false; GRID_LEN];

    for i in 0..first {
        pad_mask[i] = true;
    }
    for i in last + 1..GRID_LEN {
        pad_mask[i] = true;
    }
    for window in occupied.windows(2) {
        let (a, b) = (window[0], window[1]);
        let (va, vb) = (snapped[a].expect("occupied"), snapped[b].expect("occupied"));
        values[a] = va;
        for i in a + 1..b {
            let w = (i - a) as f64 / (b - a) as f64;
            values[i] = va + (vb - va) * w;
        }
    }
    values[last] = snapped[last].expect("occupied");
    for &i in &occupied {
        obs_mask[i] = true;
    }

    Ok(GriddedSeries { event_id: event.event_id().to_string(), values, obs_mask, pad_mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{grid_tau, Observation};

    /// Raw-space linear stub, for checking interpolation geometry.
    struct LinearScale;
    impl ValueScale for LinearScale {
        fn normalize(&self, v: f64) -> f64 {
            v
        }
        fn denormalize(&self, u: f64) -> f64 {
            u
        }
    }

    fn event(pairs: &[(f64, f64)]) -> ConjunctionEvent {
        ConjunctionEvent::new(
            "ev",
            pairs.iter().map(|&(t, s)| Observation { tau_days: t, sigma_m: s }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn midpoint_interpolation_with_linear_stub() {
        // Observations snap to steps 0 and 166; the temporal midpoint step 83
        // holds the raw midpoint 6 under a linear scale.
        let e = event(&[(7.0, 10.0), (grid_tau(166), 2.0)]);
        let g = grid_event(&e, &LinearScale).unwrap();
        assert!(g.obs_mask[0] && g.obs_mask[166]);
        assert!((g.values[83] - 6.0).abs() < 1e-12);
        // Interpolated steps are the normalized midpoint of their neighbours.
        assert!((g.values[1] - (10.0 + (2.0 - 10.0) / 166.0)).abs() < 1e-12);
    }

    #[test]
    fn padding_outside_observed_span() {
        let e = event(&[(5.0, 100.0), (3.0, 50.0)]);
        let g = grid_event(&e, &LinearScale).unwrap();
        let first = (STEPS_PER_DAY * 2.0) as usize; // tau=5 -> step 48
        let last = (STEPS_PER_DAY * 4.0) as usize; // tau=3 -> step 96
        for i in 0..GRID_LEN {
            let in_span = (first..=last).contains(&i);
            assert_eq!(g.pad_mask[i], !in_span, "step {i}");
            if !in_span {
                assert_eq!(g.values[i], 0.0);
            }
            assert!(!(g.pad_mask[i] && g.obs_mask[i]));
        }
    }

    #[test]
    fn collisions_keep_later_observation_and_shrink_mask() {
        // Both observations snap to step 48 (tau 5.0 and 5.001 are 1.4 min apart).
        let e = event(&[(5.001, 100.0), (5.0, 60.0), (3.0, 10.0)]);
        let g = grid_event(&e, &LinearScale).unwrap();
        assert_eq!(g.values[48], 60.0);
        assert_eq!(g.obs_mask.iter().filter(|&&m| m).count(), 2);
        assert!(g.obs_mask.iter().filter(|&&m| m).count() <= e.observations().len());
    }

    #[test]
    fn all_on_one_step_is_degenerate() {
        let e = event(&[(5.0005, 100.0), (5.0, 60.0)]);
        assert!(grid_event(&e, &LinearScale).is_err());
    }

    #[test]
    fn snap_ties_go_to_smaller_index() {
        // tau = 2.5625 is exact in binary and sits exactly between steps
        // 106 and 107 (24 * (7 - 2.5625) = 106.5).
        let tau = 2.5625;
        assert_eq!(STEPS_PER_DAY * (7.0 - tau), 106.5);
        let e = event(&[(6.0, 80.0), (tau, 100.0), (1.0, 50.0)]);
        let g = grid_event(&e, &LinearScale).unwrap();
        assert!(g.obs_mask[106]);
        assert!(!g.obs_mask[107]);
    }

    #[test]
    fn sub_half_step_tail_observation_is_dropped() {
        let e = event(&[(5.0, 100.0), (3.0, 50.0), (0.001, 25.0)]);
        let g = grid_event(&e, &LinearScale).unwrap();
        assert!(!g.obs_mask[167]);
        assert!(g.pad_mask[167]);
    }

    #[test]
    fn interpolation_never_overshoots() {
        let e = event(&[(6.5, 120.0), (4.0, 30.0), (2.0, 80.0), (0.5, 10.0)]);
        let g = grid_event(&e, &LinearScale).unwrap();
        let (lo, hi) = (10.0, 120.0);
        for i in 0..GRID_LEN {
            if !g.pad_mask[i] {
                assert!(g.values[i] >= lo - 1e-12 && g.values[i] <= hi + 1e-12);
            }
        }
    }
}
