use crate::agent::ReplayBuffer;

/// Negates the rewards of the highest-reward positive records until
/// `round(fraction * len)` records of the buffer are poisoned. Records that
/// are already poisoned count towards the quota and are never touched again.
/// Ties in reward go to the older record. Returns the number of records
/// newly poisoned by this call.
pub fn poison_replay(buffer: &mut ReplayBuffer, fraction: f64) -> usize {
    let quota = (fraction.clamp(0.0, 1.0) * buffer.len() as f64).round() as usize;
    let need = quota.saturating_sub(buffer.poisoned_count());
    if need == 0 {
        return 0;
    }
    let mut candidates: Vec<(usize, f64)> = buffer
        .iter()
        .enumerate()
        .filter(|(i, t)| t.r > 0.0 && !buffer.is_poisoned(*i))
        .map(|(i, t)| (i, t.r))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    candidates.truncate(need);
    for (i, r) in &candidates {
        buffer.set_reward_poisoned(*i, -r);
    }
    candidates.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Transition;
    use proptest::prelude::*;

    fn buffer(rewards: &[f64]) -> ReplayBuffer {
        let mut b = ReplayBuffer::new(rewards.len().max(1), 0);
        for (i, r) in rewards.iter().enumerate() {
            b.push(Transition {
                s: vec![i as f64],
                a: i % 3,
                r: *r,
                s_next: vec![i as f64 + 1.0],
            });
        }
        b
    }

    #[test]
    fn top_positive_rewards_are_negated() {
        let mut b = buffer(&[0.1, 0.5, -0.2, 0.5, 0.3, 0.0, 0.2, 0.4, 0.1, 0.1]);
        assert_eq!(poison_replay(&mut b, 0.2), 2);
        let r: Vec<f64> = b.iter().map(|t| t.r).collect();
        assert_eq!(r, vec![0.1, -0.5, -0.2, -0.5, 0.3, 0.0, 0.2, 0.4, 0.1, 0.1]);
        // quota already met
        assert_eq!(poison_replay(&mut b, 0.2), 0);
        assert_eq!(poison_replay(&mut b, 0.3), 1);
        assert_eq!(b.get(7).unwrap().r, -0.4);
    }

    #[test]
    fn ties_prefer_older_records() {
        let mut b = buffer(&[0.7, 0.7, 0.7, 0.7]);
        poison_replay(&mut b, 0.5);
        assert!(b.is_poisoned(0) && b.is_poisoned(1));
        assert!(!b.is_poisoned(2) && !b.is_poisoned(3));
    }

    #[test]
    fn non_positive_buffer_is_left_alone() {
        let mut b = buffer(&[0.0, -1.0, -0.5]);
        let before = b.fingerprint();
        assert_eq!(poison_replay(&mut b, 1.0), 0);
        assert_eq!(before, b.fingerprint());
    }

    proptest! {
        #[test]
        fn only_rewards_change(rewards in prop::collection::vec(-2.0f64..2.0, 1..60), f in 0.0f64..1.0) {
            let mut b = buffer(&rewards);
            let before: Vec<Transition> = b.iter().cloned().collect();
            let n = poison_replay(&mut b, f);
            let mut changed = 0;
            for (i, (old, new)) in before.iter().zip(b.iter()).enumerate() {
                prop_assert_eq!(&old.s, &new.s);
                prop_assert_eq!(&old.s_next, &new.s_next);
                prop_assert_eq!(old.a, new.a);
                if b.is_poisoned(i) {
                    prop_assert!(old.r > 0.0);
                    prop_assert_eq!(new.r, -old.r);
                    changed += 1;
                } else {
                    prop_assert_eq!(old.r, new.r);
                }
            }
            prop_assert_eq!(n, changed);
            prop_assert!(n <= (f * rewards.len() as f64).round() as usize);
        }
    }
}
