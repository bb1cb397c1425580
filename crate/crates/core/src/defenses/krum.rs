use crate::error::{Error, Result};
use crate::federation::DefenseInput;
use crate::nn::ParamVector;

/// `D_n = 1/N sum_k ||G_n - G_k||` with `G_n = theta_n - prev_global`, in
/// submission order.
pub fn mean_update_distances(submissions: &[DefenseInput<'_>], prev_global: &ParamVector) -> Result<Vec<f64>> {
    let updates = submissions
        .iter()
        .map(|s| s.params.sub(prev_global))
        .collect::<Result<Vec<_>>>()?;
    let n = updates.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in i + 1..n {
            let v = updates[i].distance(&updates[k])?;
            d[i][k] = v;
            d[k][i] = v;
        }
    }
    Ok(d.iter().map(|row| row.iter().sum::<f64>() / n as f64).collect())
}

/// Index into `submissions` of the update with the smallest mean distance to
/// the others; ties go to the lowest participant id.
pub fn krum_select(submissions: &[DefenseInput<'_>], prev_global: &ParamVector) -> Result<usize> {
    if submissions.len() < 2 {
        return Err(Error::Precondition("Krum needs at least two submissions".into()));
    }
    let scores = mean_update_distances(submissions, prev_global)?;
    let best = (0..submissions.len())
        .min_by(|&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then(submissions[a].participant_id.cmp(&submissions[b].participant_id))
        })
        .expect("non-empty");
    Ok(best)
}

/// Ids of the `k` submissions with the smallest mean update distance, in
/// ascending id order, plus the per-submission distances.
pub fn coarse_reliable_set(
    submissions: &[DefenseInput<'_>],
    prev_global: &ParamVector,
    k: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if k > submissions.len() {
        return Err(Error::Precondition(format!(
            "reliable set of {k} from {} submissions",
            submissions.len()
        )));
    }
    let scores = mean_update_distances(submissions, prev_global)?;
    let mut order: Vec<usize> = (0..submissions.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .total_cmp(&scores[b])
            .then(submissions[a].participant_id.cmp(&submissions[b].participant_id))
    });
    let mut ids: Vec<usize> = order[..k].iter().map(|&i| submissions[i].participant_id).collect();
    ids.sort_unstable();
    Ok((ids, scores))
}
