//! Tracking-mode control.
//!
//! For each candidate position the agent imagines receiving the noiseless
//! measurements of its current estimates, pseudo-updates a copy of the
//! predicted PHD with them, and scores the candidate by the Rényi
//! divergence between pseudo-posterior and prediction. The most
//! informative candidate wins.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phd::{phd_estimate, updated_visible_weights, ParticlePhd};
use crate::world::{KinematicState, Measurement, Position, SensorModel};

/// Score of a single candidate control.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlEvaluation {
    pub control: Position,
    pub measurements: Vec<Measurement>,
    pub divergence: f64,
}

/// Noiseless measurement of every estimated state as seen from `u`.
pub fn predicted_measurements(states: &[KinematicState], u: Position, sensor: &SensorModel) -> Vec<Measurement> {
    states.iter().map(|x| sensor.noiseless(x.position(), u)).collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Rényi divergence between two intensities on a shared particle support,
/// given as weight vectors.
pub fn renyi_divergence_weights(pred: &[f64], post: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if pred.len() != post.len() {
        return Err(Error::SupportMismatch(pred.len(), post.len()));
    }
    Ok(pred.iter().zip(post).map(|(&p, &q)| renyi_term(p, q, alpha)).sum())
}

/// Contribution of one particle; `alpha` must already be validated.
#[inline]
fn renyi_term(p: f64, q: f64, alpha: f64) -> f64 {
    if p == q {
        return 0.0;
    }
    let mixed = if p > 0.0 && q > 0.0 {
        if alpha == 0.5 {
            (p * q).sqrt()
        } else {
            q.powf(alpha) * p.powf(1.0 - alpha)
        }
    } else {
        0.0
    };
    // Each term is nonnegative by weighted AM-GM; clamp rounding noise.
    (p + alpha / (1.0 - alpha) * q - mixed / (1.0 - alpha)).max(0.0)
}

/// Rényi divergence between a predicted PHD and its (pseudo-)posterior.
pub fn renyi_divergence(pred: &ParticlePhd, post: &ParticlePhd, alpha: f64) -> Result<f64> {
    renyi_divergence_weights(&pred.weights(), &post.weights(), alpha)
}

/// Scores every candidate against the given state estimates.
pub fn evaluate_track_controls(
    phd_pred: &ParticlePhd,
    states: &[KinematicState],
    controls: &[Position],
    sensor: &SensorModel,
    alpha: f64,
) -> Result<Vec<ControlEvaluation>> {
    check_alpha(alpha)?;
    let particles = phd_pred.particles();
    controls
        .par_iter()
        .map(|&u| {
            let measurements = predicted_measurements(states, u, sensor);
            // Particles outside the candidate square keep their weight and contribute nothing.
            let divergence = updated_visible_weights(particles, &measurements, u, sensor)?
                .into_iter()
                .map(|(i, q)| renyi_term(particles[i].weight, q, alpha))
                .sum();
            Ok(ControlEvaluation { control: u, measurements, divergence })
        })
        .collect()
}

/// Index of the highest-scoring evaluation; ties go to the earliest.
pub fn best_evaluation(evals: &[ControlEvaluation]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in evals.iter().enumerate() {
        if best.is_none_or(|b| e.divergence > evals[b].divergence) {
            best = Some(i);
        }
    }
    best
}

/// Chooses the divergence-maximising control for the predicted PHD.
///
/// Returns the chosen index into `controls` along with all evaluations. The
/// input PHD is never modified.
pub fn select_track_control(
    phd_pred: &ParticlePhd,
    controls: &[Position],
    sensor: &SensorModel,
    alpha: f64,
) -> Result<(usize, Vec<ControlEvaluation>)> {
    if controls.is_empty() {
        return Err(Error::InvalidParameter { name: "controls", reason: "control set must be nonempty".into() });
    }
    let estimate = phd_estimate(phd_pred, None);
    let evals = evaluate_track_controls(phd_pred, &estimate.states, controls, sensor, alpha)?;
    let best = best_evaluation(&evals).expect("nonempty control set");
    Ok((best, evals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phd::{Particle, PhdParams};
    use crate::world::{admissible_controls, ControlModel};

    #[test]
    fn predicted_measurement_is_the_noiseless_image() {
        let sensor = SensorModel::default();
        let z = predicted_measurements(&[KinematicState::target(3.0, 0.0, 4.0, 0.0)], Position::new(0.0, 0.0), &sensor);
        assert_eq!(z.len(), 1);
        assert!((z[0].range - 5.0).abs() < 1e-12);
        assert!((z[0].bearing - 4f64.atan2(3.0)).abs() < 1e-12);
        assert!(predicted_measurements(&[], Position::new(0.0, 0.0), &sensor).is_empty());

        let a = KinematicState::target(1.0, 0.0, 0.0, 0.0);
        let b = KinematicState::target(0.0, 0.0, 2.0, 0.0);
        let ab = predicted_measurements(&[a, b], Position::default(), &sensor);
        let ba = predicted_measurements(&[b, a], Position::default(), &sensor);
        assert_eq!(ab.len(), 2);
        assert!(ab.contains(&ba[0]) && ab.contains(&ba[1]));
    }

    #[test]
    fn divergence_examples() {
        assert_eq!(renyi_divergence_weights(&[0.3, 0.7], &[0.3, 0.7], 0.5).unwrap(), 0.0);
        let d = renyi_divergence_weights(&[0.5, 0.5], &[1.0, 0.0], 0.5).unwrap();
        let oracle = (1.0 - 0.5f64.sqrt()).powi(2) + 0.5;
        assert!((d - oracle).abs() < 1e-12);
        assert!((d - 0.5858).abs() < 1e-4);
    }

    #[test]
    fn divergence_rejects_bad_inputs() {
        for alpha in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(renyi_divergence_weights(&[1.0], &[1.0], alpha), Err(Error::InvalidAlpha(_))));
        }
        assert!(matches!(
            renyi_divergence_weights(&[1.0], &[1.0, 2.0], 0.5),
            Err(Error::SupportMismatch(1, 2))
        ));
    }

    #[test]
    fn single_reachable_target_selects_the_only_informative_action() {
        let sensor = SensorModel::default();
        let s = Position::new(50.0, 50.0);
        // One particle 8 m east: only the actions that bring it within 5 m on both axes see it.
        let target = KinematicState::target(58.0, 0.0, 50.0, 0.0);
        let phd = ParticlePhd::with_particles(PhdParams::default(), vec![Particle::new(target, 1.0)]);
        let controls = admissible_controls(s, &ControlModel::default());
        let before = phd.clone();
        let (best, evals) = select_track_control(&phd, &controls, &sensor, 0.5).unwrap();
        assert_eq!(phd, before);

        let seeing: Vec<usize> = controls
            .iter()
            .enumerate()
            .filter(|(_, u)| sensor.detection_probability_at(target.position(), **u) > 0.0)
            .map(|(i, _)| i)
            .collect();
        assert!(seeing.contains(&best));
        for (i, e) in evals.iter().enumerate() {
            if !seeing.contains(&i) {
                assert_eq!(e.divergence, 0.0);
            } else {
                assert!(e.divergence > 0.0);
            }
        }
    }

    #[test]
    fn exactly_one_action_sees_the_target() {
        let sensor = SensorModel::default();
        let s = Position::new(50.0, 50.0);
        // 9 m east: only the radius-4 east action puts it inside the footprint.
        let target = KinematicState::target(59.0, 0.0, 50.0, 0.0);
        let phd = ParticlePhd::with_particles(PhdParams::default(), vec![Particle::new(target, 1.0)]);
        let controls = admissible_controls(s, &ControlModel::default());
        let (best, evals) = select_track_control(&phd, &controls, &sensor, 0.5).unwrap();
        assert_eq!(controls[best], Position::new(54.0, 50.0));
        assert_eq!(evals.iter().filter(|e| e.divergence > 0.0).count(), 1);
    }

    #[test]
    fn empty_estimate_takes_the_first_action() {
        let sensor = SensorModel::default();
        let phd = ParticlePhd::new(PhdParams::default());
        let controls = admissible_controls(Position::new(50.0, 50.0), &ControlModel::default());
        let (best, evals) = select_track_control(&phd, &controls, &sensor, 0.5).unwrap();
        assert_eq!(best, 0);
        assert!(evals.iter().all(|e| e.divergence == 0.0));
    }

    #[test]
    fn symmetric_layout_takes_the_lower_index() {
        let sensor = SensorModel::default();
        let s = Position::new(50.0, 50.0);
        let controls = admissible_controls(s, &ControlModel::default());
        // Targets mirrored across the x-axis through s: the north and south
        // actions score the same, and the earlier one must win.
        let particles = vec![
            Particle::new(KinematicState::target(50.0, 0.0, 59.0, 0.0), 1.0),
            Particle::new(KinematicState::target(50.0, 0.0, 41.0, 0.0), 1.0),
        ];
        let phd = ParticlePhd::with_particles(PhdParams::default(), particles);
        let (best, evals) = select_track_control(&phd, &controls, &sensor, 0.5).unwrap();
        let top = evals[best].divergence;
        let ties: Vec<usize> = evals
            .iter()
            .enumerate()
            .filter(|(_, e)| (e.divergence - top).abs() <= 1e-12 * top.max(1.0))
            .map(|(i, _)| i)
            .collect();
        assert!(ties.len() >= 2, "layout should produce a tie, got {ties:?}");
        assert_eq!(best, ties[0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn divergence_is_nonnegative_and_zero_on_equality(
                pairs in proptest::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..50),
                alpha in 0.01f64..0.99,
            ) {
                let (p, q): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                prop_assert!(renyi_divergence_weights(&p, &q, alpha).unwrap() >= 0.0);
                prop_assert!(renyi_divergence_weights(&p, &p, alpha).unwrap().abs() < 1e-9);
            }

            #[test]
            fn half_alpha_is_squared_hellinger_sum(
                pairs in proptest::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..50),
            ) {
                let (p, q): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                let oracle: f64 = p.iter().zip(&q).map(|(a, b)| (b.sqrt() - a.sqrt()).powi(2)).sum();
                let d = renyi_divergence_weights(&p, &q, 0.5).unwrap();
                prop_assert!((d - oracle).abs() < 1e-9 * (1.0 + oracle));
            }
        }
    }
}
