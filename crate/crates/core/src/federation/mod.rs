//! Synchronous federated rounds: collect uploads, let an attack hook rewrite
//! the uploads of compromised participants, filter through a defense,
//! average the survivors and broadcast the result.

use crate::error::{Error, Result};
use crate::nn::ParamVector;

/// One participant's upload for a round.
///
/// `malicious` is ground truth for evaluation. Defenses never see it.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSubmission {
    pub participant_id: usize,
    pub params: ParamVector,
    pub malicious: bool,
}

/// What a defense is allowed to look at.
#[derive(Debug, Clone, Copy)]
pub struct DefenseInput<'a> {
    pub participant_id: usize,
    pub params: &'a ParamVector,
}

/// A defense's verdict for one round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DefenseDecision {
    pub accepted_ids: Vec<usize>,
    /// Per-participant scores in submission order (reconstruction errors,
    /// Krum distances), when the defense computes any.
    pub scores: Vec<f64>,
    pub note: String,
}

pub trait Defense {
    fn filter(
        &mut self,
        round: usize,
        submissions: &[DefenseInput<'_>],
        prev_global: &ParamVector,
    ) -> Result<DefenseDecision>;
}

/// Accepts everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassThrough;

impl Defense for PassThrough {
    fn filter(
        &mut self,
        _round: usize,
        submissions: &[DefenseInput<'_>],
        _prev_global: &ParamVector,
    ) -> Result<DefenseDecision> {
        Ok(DefenseDecision {
            accepted_ids: submissions.iter().map(|s| s.participant_id).collect(),
            ..Default::default()
        })
    }
}

/// A federated client as seen by the orchestrator.
pub trait Participant {
    fn id(&self) -> usize;
    fn is_malicious(&self) -> bool;
    /// The model this participant would upload if honest.
    fn upload(&mut self) -> Result<ParamVector>;
    /// Installs the new global model into whichever model receives it.
    fn receive(&mut self, global: &ParamVector) -> Result<()>;
}

/// Rewrites the upload of a compromised participant.
pub trait AttackHook<P> {
    fn tamper(
        &mut self,
        participant: &mut P,
        honest: ParamVector,
        prev_global: &ParamVector,
    ) -> Result<ParamVector>;
}

/// Leaves every upload as is.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoAttack;

impl<P> AttackHook<P> for NoAttack {
    fn tamper(&mut self, _: &mut P, honest: ParamVector, _: &ParamVector) -> Result<ParamVector> {
        Ok(honest)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub round_index: usize,
    pub global: ParamVector,
    pub accepted_ids: Vec<usize>,
    pub rejected_ids: Vec<usize>,
    /// Set when the defense rejected everyone and the previous global was kept.
    pub fallback: bool,
    pub decision: DefenseDecision,
    pub submissions: Vec<RoundSubmission>,
}

/// Unweighted coordinatewise mean.
///
/// Each coordinate is summed in ascending value order, so the result does
/// not depend on the order of `models`. Coordinates on which all models agree
/// are copied exactly.
pub fn fed_avg(models: &[&ParamVector]) -> Result<ParamVector> {
    let first = models
        .first()
        .ok_or_else(|| Error::Precondition("fed_avg needs at least one model".into()))?;
    for m in &models[1..] {
        first.check_shape(m)?;
    }
    let n = models.len() as f64;
    let mut column = Vec::with_capacity(models.len());
    let mut out = Vec::with_capacity(first.len());
    for i in 0..first.len() {
        column.clear();
        column.extend(models.iter().map(|m| m.values()[i]));
        column.sort_by(f64::total_cmp);
        let (lo, hi) = (column[0], column[column.len() - 1]);
        out.push(if lo == hi { lo } else { column.iter().sum::<f64>() / n });
    }
    Ok(ParamVector::from_values(first.shapes(), out)?.with_id("global"))
}

/// Runs one round over `participants` (ordered by id).
pub fn run_round<P, A, D>(
    round_index: usize,
    participants: &mut [P],
    prev_global: &ParamVector,
    attack: &mut A,
    defense: &mut D,
) -> Result<RoundResult>
where
    P: Participant,
    A: AttackHook<P> + ?Sized,
    D: Defense + ?Sized,
{
    let mut submissions = Vec::with_capacity(participants.len());
    for p in participants.iter_mut() {
        let honest = p.upload()?;
        let params = if p.is_malicious() {
            attack.tamper(p, honest, prev_global)?
        } else {
            honest
        };
        prev_global.check_shape(&params)?;
        submissions.push(RoundSubmission {
            participant_id: p.id(),
            params,
            malicious: p.is_malicious(),
        });
    }
    let result = aggregate(round_index, submissions, prev_global, defense)?;
    broadcast(&result.global, participants)?;
    Ok(result)
}

/// Defense plus averaging, without touching participants.
pub fn aggregate<D: Defense + ?Sized>(
    round_index: usize,
    submissions: Vec<RoundSubmission>,
    prev_global: &ParamVector,
    defense: &mut D,
) -> Result<RoundResult> {
    let inputs: Vec<DefenseInput<'_>> = submissions
        .iter()
        .map(|s| DefenseInput {
            participant_id: s.participant_id,
            params: &s.params,
        })
        .collect();
    let decision = defense.filter(round_index, &inputs, prev_global)?;
    let accepted: Vec<&RoundSubmission> = submissions
        .iter()
        .filter(|s| decision.accepted_ids.contains(&s.participant_id))
        .collect();
    let (global, fallback) = if accepted.is_empty() {
        (prev_global.clone(), true)
    } else {
        let models: Vec<&ParamVector> = accepted.iter().map(|s| &s.params).collect();
        (fed_avg(&models)?, false)
    };
    let accepted_ids: Vec<usize> = accepted.iter().map(|s| s.participant_id).collect();
    let rejected_ids = submissions
        .iter()
        .map(|s| s.participant_id)
        .filter(|id| !accepted_ids.contains(id))
        .collect();
    Ok(RoundResult {
        round_index,
        global,
        accepted_ids,
        rejected_ids,
        fallback,
        decision,
        submissions,
    })
}

pub fn broadcast<P: Participant>(global: &ParamVector, participants: &mut [P]) -> Result<()> {
    for p in participants {
        p.receive(global)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerShape;
    use proptest::prelude::*;

    fn pv(values: Vec<f64>) -> ParamVector {
        let shapes = [LayerShape {
            inputs: values.len(),
            outputs: 1,
            has_bias: false,
        }];
        ParamVector::from_values(&shapes, values).unwrap()
    }

    struct Client {
        id: usize,
        model: ParamVector,
        malicious: bool,
    }

    impl Participant for Client {
        fn id(&self) -> usize {
            self.id
        }
        fn is_malicious(&self) -> bool {
            self.malicious
        }
        fn upload(&mut self) -> Result<ParamVector> {
            Ok(self.model.clone())
        }
        fn receive(&mut self, global: &ParamVector) -> Result<()> {
            self.model = global.clone();
            Ok(())
        }
    }

    struct Reject(Vec<usize>);

    impl Defense for Reject {
        fn filter(
            &mut self,
            _: usize,
            subs: &[DefenseInput<'_>],
            _: &ParamVector,
        ) -> Result<DefenseDecision> {
            Ok(DefenseDecision {
                accepted_ids: subs
                    .iter()
                    .map(|s| s.participant_id)
                    .filter(|id| !self.0.contains(id))
                    .collect(),
                ..Default::default()
            })
        }
    }

    struct Blowup;

    impl AttackHook<Client> for Blowup {
        fn tamper(&mut self, _: &mut Client, honest: ParamVector, _: &ParamVector) -> Result<ParamVector> {
            Ok(honest.scale(1e6))
        }
    }

    fn clients(values: &[f64], malicious: &[usize]) -> Vec<Client> {
        values
            .iter()
            .enumerate()
            .map(|(id, v)| Client {
                id,
                model: pv(vec![*v, -v]),
                malicious: malicious.contains(&id),
            })
            .collect()
    }

    #[test]
    fn mean_of_two() {
        let a = pv(vec![1.0, 2.0]);
        let b = pv(vec![3.0, 4.0]);
        assert_eq!(fed_avg(&[&a, &b]).unwrap().values(), &[2.0, 3.0]);
        assert!(fed_avg(&[]).is_err());
        assert!(fed_avg(&[&a, &pv(vec![1.0])]).is_err());
    }

    #[test]
    fn identical_inputs_are_a_fixed_point() {
        let t = pv(vec![0.1, -7.3, 1e-9]);
        let copies = vec![&t; 7];
        assert_eq!(fed_avg(&copies).unwrap().values(), t.values());
    }

    #[test]
    fn pass_through_round_is_plain_average_and_broadcasts() {
        let mut cs = clients(&[1.0, 2.0, 6.0], &[]);
        let prev = pv(vec![0.0, 0.0]);
        let r = run_round(0, &mut cs, &prev, &mut NoAttack, &mut PassThrough).unwrap();
        assert_eq!(r.global.values(), &[3.0, -3.0]);
        assert_eq!(r.accepted_ids, vec![0, 1, 2]);
        assert!(r.rejected_ids.is_empty());
        for c in &cs {
            assert_eq!(c.model.values(), r.global.values());
        }
        broadcast(&r.global, &mut cs).unwrap();
        for c in &cs {
            assert_eq!(c.model.values(), r.global.values());
        }
    }

    #[test]
    fn rejected_submissions_do_not_matter() {
        let prev = pv(vec![0.0, 0.0]);
        let mut a = clients(&[1.0, 100.0, 2.0, -50.0], &[]);
        let mut b = clients(&[1.0, 7.0, 2.0, 3.0], &[]);
        let ra = run_round(0, &mut a, &prev, &mut NoAttack, &mut Reject(vec![1, 3])).unwrap();
        let rb = run_round(0, &mut b, &prev, &mut NoAttack, &mut Reject(vec![1, 3])).unwrap();
        assert_eq!(ra.global.values(), rb.global.values());
        assert_eq!(ra.rejected_ids, vec![1, 3]);
    }

    #[test]
    fn rejecting_everyone_falls_back() {
        let prev = pv(vec![9.0, 9.0]);
        let mut cs = clients(&[1.0, 2.0], &[]);
        let r = run_round(4, &mut cs, &prev, &mut NoAttack, &mut Reject(vec![0, 1])).unwrap();
        assert!(r.fallback);
        assert_eq!(r.global.values(), prev.values());
    }

    #[test]
    fn oracle_defense_matches_benign_only_aggregation() {
        let prev = pv(vec![0.0, 0.0]);
        let values: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let malicious = [2, 9, 15];
        let mut with = clients(&values, &malicious);
        let r = run_round(0, &mut with, &prev, &mut Blowup, &mut Reject(malicious.to_vec())).unwrap();
        assert!(r.submissions[2].malicious && r.submissions[2].params.values()[0].abs() > 1e3);
        let benign: Vec<f64> = values
            .iter()
            .enumerate()
            .filter(|(i, _)| !malicious.contains(i))
            .map(|(_, v)| *v)
            .collect();
        let mut without = clients(&benign, &[]);
        let r2 = run_round(0, &mut without, &prev, &mut NoAttack, &mut PassThrough).unwrap();
        assert_eq!(r.global.values(), r2.global.values());
    }

    proptest! {
        #[test]
        fn mean_is_exact_and_order_free(
            rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 6), 1..12),
            rot in 0usize..12,
        ) {
            let models: Vec<ParamVector> = rows.iter().map(|r| pv(r.clone())).collect();
            let refs: Vec<&ParamVector> = models.iter().collect();
            let avg = fed_avg(&refs).unwrap();
            for j in 0..6 {
                let naive = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
                prop_assert!((avg.values()[j] - naive).abs() <= 1e-12 * naive.abs().max(1.0));
            }
            let mut shuffled = refs.clone();
            shuffled.rotate_left(rot % refs.len());
            shuffled.reverse();
            let again = fed_avg(&shuffled).unwrap();
            for (a, b) in avg.values().iter().zip(again.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            let c = 2.5;
            let scaled: Vec<ParamVector> = models.iter().map(|m| m.scale(c)).collect();
            let sref: Vec<&ParamVector> = scaled.iter().collect();
            let lin = fed_avg(&sref).unwrap();
            for (a, b) in lin.values().iter().zip(avg.values()) {
                prop_assert!((a - c * b).abs() <= 1e-12 * (c * b).abs().max(1.0));
            }
        }
    }
}
