use crate::error::{Error, Result};

/// Generalized advantage estimates and value targets for one trajectory
/// segment. `bootstrap_value` is the value of the state after the last step;
/// it is ignored when that step is terminal.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap_value: f64,
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.len() != values.len() || rewards.len() != dones.len() {
        return Err(Error::Length(format!(
            "rewards {}, values {}, dones {}",
            rewards.len(),
            values.len(),
            dones.len()
        )));
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Range(format!("gamma {gamma} and lambda {lambda} must lie in [0, 1]")));
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap_value;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_example() {
        let (a, r) = gae(&[1.0, 1.0], &[0.5, 0.5], 0.0, &[false, false], 0.99, 0.95).unwrap();
        assert!((a[0] - 1.46525).abs() < 1e-12);
        assert!((a[1] - 0.5).abs() < 1e-12);
        assert!((r[0] - 1.96525).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_is_td_residual() {
        let rw = [0.3, -1.0, 2.0];
        let v = [0.1, 0.4, -0.2];
        let (a, _) = gae(&rw, &v, 0.7, &[false; 3], 0.9, 0.0).unwrap();
        let want = [0.3 + 0.9 * 0.4 - 0.1, -1.0 + 0.9 * -0.2 - 0.4, 2.0 + 0.9 * 0.7 + 0.2];
        for (x, y) in a.iter().zip(want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_limit() {
        let rw = [1.0, 2.0, 3.0, 4.0];
        let (a, _) = gae(&rw, &[0.0; 4], 0.0, &[false; 4], 1.0, 1.0).unwrap();
        assert_eq!(a, vec![10.0, 9.0, 7.0, 4.0]);
    }

    #[test]
    fn done_cuts_bootstrap() {
        let (a, _) = gae(&[1.0, 1.0], &[0.0, 0.0], 100.0, &[true, true], 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.0, 1.0]);
    }

    #[test]
    fn misaligned_inputs_error() {
        assert!(matches!(
            gae(&[1.0], &[0.0, 0.0], 0.0, &[false], 0.9, 0.9),
            Err(Error::Length(_))
        ));
    }
}
