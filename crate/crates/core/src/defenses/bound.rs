use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{argmax, kl_divergence, softmax};

/// Minimal cost of flipping the greedy action of a model with top-two
/// Q-values `q1 >= q2`:
///
/// `E0 = e1 ln(2 e1) + e2 ln(2 e2) - (e1 + e2) ln(e1 + e2)`, `e_i = exp(q_i)`.
///
/// This is `Z * min KL(p || p')` over meme policies `p'` whose greedy action
/// differs, with `Z = sum_i exp(q_i)`; the smallest Q-value drops out.
pub fn e_zero(q1: f64, q2: f64) -> f64 {
    let (e1, e2) = (q1.exp(), q2.exp());
    let s = e1 + e2;
    // e1 ln(2 e1 / s) + e2 ln(2 e2 / s), written to avoid cancellation
    let v = e1 * (std::f64::consts::LN_2 + q1 - s.ln()) + e2 * (std::f64::consts::LN_2 + q2 - s.ln());
    v.max(0.0)
}

/// Numerical minimum of `Z * KL(softmax(q) || p')` over the simplex subject
/// to `p'_2 >= p'_1` or `p'_3 >= p'_1`, for `q` sorted descending. Returns
/// the value and the minimizing `p'`.
///
/// The feasible set is a union of two convex pieces that exclude the
/// unconstrained minimizer, so each piece attains its minimum on its
/// boundary plane `p'_1 = p'_j`. Each plane is a segment
/// `(u, u, 1 - 2u)` (up to relabelling) searched by a coarse grid followed
/// by golden-section refinement.
pub fn min_flip_cost(q: [f64; 3]) -> (f64, [f64; 3]) {
    let z: f64 = q.iter().map(|v| v.exp()).sum();
    let p = softmax(&q);
    let mut best = (f64::INFINITY, [0.0; 3]);
    for j in [1usize, 2] {
        let other = 3 - j;
        let point = |u: f64| {
            let mut pp = [0.0; 3];
            pp[0] = u;
            pp[j] = u;
            pp[other] = 1.0 - 2.0 * u;
            pp
        };
        let f = |u: f64| {
            let pp = point(u);
            z * (0..3).map(|i| if p[i] > 0.0 { p[i] * (p[i] / pp[i]).ln() } else { 0.0 }).sum::<f64>()
        };
        let (lo, hi) = (1e-15, 0.5 - 1e-15);
        let n = 200;
        let grid: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        let k = (0..=n).min_by(|&a, &b| f(grid[a]).total_cmp(&f(grid[b]))).expect("grid");
        let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n)]);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..200 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = f(d);
            }
            if b - a < 1e-15 {
                break;
            }
        }
        let u = 0.5 * (a + b);
        let v = f(u);
        if v < best.0 {
            best = (v, point(u));
        }
    }
    best
}

/// Brute-force counterpart of [`e_zero`] for an arbitrary Q triple.
pub fn e_zero_brute_force(q: [f64; 3]) -> f64 {
    let mut s = q;
    s.sort_by(|a, b| b.total_cmp(a));
    min_flip_cost(s).0
}

/// Upper bound on the probability of a non-optimal action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theta: f64,
    pub mean_e_zero: f64,
    pub p_no: f64,
    /// Set when every state is indifferent between its top two actions.
    pub degenerate: bool,
}

/// `P_NO = theta / mean(E0)` over the top-two Q-values of each state,
/// clamped to `[0, 1]`.
pub fn attack_effect_bound(q_values: &[[f64; 3]], theta: f64) -> Result<BoundReport> {
    if q_values.is_empty() {
        return Err(Error::Precondition("bound needs at least one state".into()));
    }
    if !(theta >= 0.0) {
        return Err(Error::Domain("threshold must be non-negative".into()));
    }
    let mean_e_zero = q_values
        .iter()
        .map(|q| {
            let mut s = *q;
            s.sort_by(|a, b| b.total_cmp(a));
            e_zero(s[0], s[1])
        })
        .sum::<f64>()
        / q_values.len() as f64;
    if mean_e_zero == 0.0 {
        return Ok(BoundReport {
            theta,
            mean_e_zero,
            p_no: 1.0,
            degenerate: true,
        });
    }
    Ok(BoundReport {
        theta,
        mean_e_zero,
        p_no: (theta / mean_e_zero).clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// How the oracle adversary is charged for a flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipCost {
    /// `Z * KL`, the objective of the simplified minimization whose optimum
    /// is `E0`.
    Scaled,
    /// Plain `KL(p^L || p^M)`, the quantity the threshold actually limits.
    Kl,
}

/// Outcome of [`oracle_adversary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub states: usize,
    pub flipped: usize,
    pub flipped_fraction: f64,
    pub spent: f64,
    pub budget: f64,
}

/// Adversary with a total budget of `theta * |X|` that walks the states in
/// the given order and, whenever it can afford it, replaces the meme output
/// with the cheapest policy that changes the greedy action. Each flip is
/// checked on the constructed output and charged its measured cost.
pub fn oracle_adversary(q_values: &[[f64; 3]], theta: f64, cost: FlipCost) -> Result<AdversaryReport> {
    if q_values.is_empty() {
        return Err(Error::Precondition("adversary needs at least one state".into()));
    }
    let budget = theta * q_values.len() as f64;
    let mut spent = 0.0;
    let mut flipped = 0;
    for q in q_values {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
        let sorted = [q[order[0]], q[order[1]], q[order[2]]];
        let (_, p_sorted) = min_flip_cost(sorted);
        // tip the tie so the runner-up strictly wins
        let j = if p_sorted[1] >= p_sorted[2] { 1 } else { 2 };
        let mut pp = p_sorted;
        let eta = 1e-9 * pp[0];
        pp[0] -= eta;
        pp[j] += eta;
        let mut meme = [0.0; 3];
        for (k, &slot) in order.iter().enumerate() {
            meme[slot] = pp[k].ln();
        }
        if argmax(&meme) == argmax(q) {
            continue;
        }
        let kl = kl_divergence(q, &meme);
        let c = match cost {
            FlipCost::Kl => kl,
            FlipCost::Scaled => kl * q.iter().map(|v| v.exp()).sum::<f64>(),
        };
        if spent + c <= budget {
            spent += c;
            flipped += 1;
        }
    }
    Ok(AdversaryReport {
        states: q_values.len(),
        flipped,
        flipped_fraction: flipped as f64 / q_values.len() as f64,
        spent,
        budget,
    })
}
