//! Exact optimal transport on the line for the costs `|x − y|` and
//! `|x − y| ∧ 1`.
//!
//! The uncapped distance is the `L¹` distance between distribution
//! functions. The capped cost is not minimised by the monotone (sorted)
//! coupling, so it is computed in two independent ways:
//!
//! * [`capped_matching`]: for two uniform measures with the same number of
//!   atoms, an optimal permutation. Crossing pairs at distance below 1 can
//!   always be uncrossed, so an optimal matching pairs a subsequence of the
//!   sorted `x` with a subsequence of the sorted `y` in order ("short"
//!   pairs) and pairs the leftovers arbitrarily at cost 1. An edit-distance
//!   style recursion over the two sorted sequences finds it in `O(N²)`.
//! * [`w_weighted`]: for arbitrary weights. `|x − y| ∧ 1` is the shortest
//!   path metric of the line augmented by a hub joined to every point at
//!   cost 1/2, so the transport problem is a transshipment problem. Writing
//!   `c_k` for the net mass that has entered the hub left of the `k`-th gap,
//!   the cost is `Σ_k ½|c_k − c_{k−1}| + Σ_k g_k |D_k − c_k|` with `D_k` the
//!   cumulative mass imbalance and `c` pinned to 0 at both ends. This is
//!   solved by dynamic programming over the candidate values `{0} ∪ {D_k}`.

use crate::error::{Error, Result};

use super::EmpiricalMeasure;

/// Discrete probability measure with arbitrary non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    points: Vec<(f64, f64)>,
}

impl WeightedMeasure {
    /// Build from `(position, weight)` pairs; weights are normalised to sum 1.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.retain(|&(_, w)| w > 0.0);
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if points.iter().any(|(x, w)| !x.is_finite() || !w.is_finite()) {
            return Err(Error::NonFinitePosition);
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = points.iter().map(|p| p.1).sum();
        for p in &mut points {
            p.1 /= total;
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().map(|(x, w)| x * w).sum()
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            points: self.points.iter().map(|&(x, w)| (x + c, w)).collect(),
        }
    }
}

impl From<&EmpiricalMeasure> for WeightedMeasure {
    fn from(m: &EmpiricalMeasure) -> Self {
        let w = 1.0 / m.len() as f64;
        Self {
            points: m.atoms().iter().map(|&x| (x, w)).collect(),
        }
    }
}

/// Merged breakpoints of two measures: gap lengths and the cumulative
/// imbalance `F_a − F_b` on each gap.
fn imbalance_profile(a: &WeightedMeasure, b: &WeightedMeasure) -> (Vec<f64>, Vec<f64>) {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(a.points.len() + b.points.len());
    events.extend(a.points.iter().copied());
    events.extend(b.points.iter().map(|&(x, w)| (x, -w)));
    events.sort_by(|p, q| p.0.total_cmp(&q.0));

    let mut gaps = Vec::with_capacity(events.len());
    let mut imbalance = Vec::with_capacity(events.len());
    let mut cum = 0.0;
    let mut i = 0;
    while i < events.len() {
        let x = events[i].0;
        while i < events.len() && events[i].0 == x {
            cum += events[i].1;
            i += 1;
        }
        if i < events.len() {
            gaps.push(events[i].0 - x);
            imbalance.push(cum);
        }
    }
    (gaps, imbalance)
}

/// `W₁` between weighted measures: `∫ |F_a − F_b|`.
pub fn w1_weighted(a: &WeightedMeasure, b: &WeightedMeasure) -> f64 {
    let (gaps, imbalance) = imbalance_profile(a, b);
    gaps.iter().zip(&imbalance).map(|(g, d)| g * d.abs()).sum()
}

/// `W` (cost `|x − y| ∧ 1`) between weighted measures, exact.
pub fn w_weighted(a: &WeightedMeasure, b: &WeightedMeasure) -> f64 {
    let (gaps, imbalance) = imbalance_profile(a, b);
    if gaps.is_empty() {
        return 0.0;
    }
    let mut cand: Vec<f64> = imbalance.clone();
    cand.push(0.0);
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    let m = cand.len();

    // value[s] = best cost so far with the hub balance equal to cand[s]
    let mut value: Vec<f64> = cand.iter().map(|c| 0.5 * c.abs()).collect();
    for (k, (&g, &d)) in gaps.iter().zip(&imbalance).enumerate() {
        if k > 0 {
            relax_half_abs(&cand, &mut value);
        }
        for (v, c) in value.iter_mut().zip(&cand) {
            *v += g * (d - c).abs();
        }
    }
    debug_assert_eq!(value.len(), m);
    value
        .iter()
        .zip(&cand)
        .map(|(v, c)| v + 0.5 * c.abs())
        .fold(f64::INFINITY, f64::min)
}

/// In place `v(s) ← min_t v(t) + ½|s − t|` over sorted candidates.
fn relax_half_abs(cand: &[f64], value: &mut [f64]) {
    for s in 1..cand.len() {
        let from_left = value[s - 1] + 0.5 * (cand[s] - cand[s - 1]);
        if from_left < value[s] {
            value[s] = from_left;
        }
    }
    for s in (0..cand.len() - 1).rev() {
        let from_right = value[s + 1] + 0.5 * (cand[s + 1] - cand[s]);
        if from_right < value[s] {
            value[s] = from_right;
        }
    }
}

fn capped(d: f64) -> f64 {
    d.abs().min(1.0)
}

/// Optimal mean cost of matching `x` to `y` under `|x − y| ∧ 1`.
///
/// Both inputs must already be sorted.
pub fn capped_matching_cost(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut prev: Vec<f64> = (0..=n).map(|j| 0.5 * j as f64).collect();
    let mut cur = vec![0.0; n + 1];
    for i in 1..=n {
        cur[0] = 0.5 * i as f64;
        let xi = x[i - 1];
        for j in 1..=n {
            let diag = prev[j - 1] + capped(xi - y[j - 1]);
            let skip = 0.5 + prev[j].min(cur[j - 1]);
            cur[j] = diag.min(skip);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[n] / n as f64)
}

/// Optimal assignment `perm` (so that `x[i]` is paired with `y[perm[i]]`)
/// under the cost `|x − y| ∧ 1`, together with its mean cost.
///
/// Inputs need not be sorted. Ties are resolved towards rank-order pairing.
pub fn capped_matching(x: &[f64], y: &[f64]) -> Result<(Vec<usize>, f64)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let mut ix: Vec<usize> = (0..n).collect();
    ix.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut iy: Vec<usize> = (0..n).collect();
    iy.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let xs: Vec<f64> = ix.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = iy.iter().map(|&j| y[j]).collect();

    const DIAG: u8 = 0;
    const SKIP_X: u8 = 1;
    const SKIP_Y: u8 = 2;
    let w = n + 1;
    let mut choice = vec![0u8; w * w];
    for j in 1..=n {
        choice[j] = SKIP_Y;
    }
    let mut prev: Vec<f64> = (0..=n).map(|j| 0.5 * j as f64).collect();
    let mut cur = vec![0.0; n + 1];
    for i in 1..=n {
        cur[0] = 0.5 * i as f64;
        choice[i * w] = SKIP_X;
        let xi = xs[i - 1];
        for j in 1..=n {
            let diag = prev[j - 1] + capped(xi - ys[j - 1]);
            let skip_x = prev[j] + 0.5;
            let skip_y = cur[j - 1] + 0.5;
            let (v, c) = if diag <= skip_x && diag <= skip_y {
                (diag, DIAG)
            } else if skip_x <= skip_y {
                (skip_x, SKIP_X)
            } else {
                (skip_y, SKIP_Y)
            };
            cur[j] = v;
            choice[i * w + j] = c;
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    let mut perm = vec![usize::MAX; n];
    let mut long_x = Vec::new();
    let mut long_y = Vec::new();
    let (mut i, mut j) = (n, n);
    while i > 0 || j > 0 {
        match choice[i * w + j] {
            DIAG => {
                perm[ix[i - 1]] = iy[j - 1];
                i -= 1;
                j -= 1;
            }
            SKIP_X => {
                long_x.push(ix[i - 1]);
                i -= 1;
            }
            _ => {
                long_y.push(iy[j - 1]);
                j -= 1;
            }
        }
    }
    debug_assert_eq!(long_x.len(), long_y.len());
    for (a, b) in long_x.into_iter().rev().zip(long_y.into_iter().rev()) {
        perm[a] = b;
    }
    let cost = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| capped(x[i] - y[j]))
        .sum::<f64>()
        / n as f64;
    Ok((perm, cost))
}

/// `W` between two empirical measures (cost `|x − y| ∧ 1`), exact.
pub fn wasserstein_w(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
    if a.len() == b.len() {
        capped_matching_cost(a.atoms(), b.atoms()).expect("equal lengths")
    } else {
        w_weighted(&a.into(), &b.into())
    }
}

/// `W₁` between two empirical measures.
pub fn wasserstein_w1(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
    if a.len() == b.len() {
        a.atoms()
            .iter()
            .zip(b.atoms())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / a.len() as f64
    } else {
        w1_weighted(&a.into(), &b.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn em(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_positions(xs).unwrap()
    }

    /// Exhaustive minimum over all permutations (Heap's algorithm).
    fn brute_force(x: &[f64], y: &[f64], cost: impl Fn(f64) -> f64) -> f64 {
        let n = x.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let eval = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost(x[i] - y[j])).sum::<f64>();
        let mut best = eval(&perm);
        let mut c = vec![0usize; n];
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                best = best.min(eval(&perm));
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        best / n as f64
    }

    #[test]
    fn w_examples() {
        let a = em(&[0.0, 1.0]);
        assert_eq!(wasserstein_w(&a, &a), 0.0);
        assert_eq!(wasserstein_w(&em(&[0.0]), &em(&[5.0])), 1.0);
        assert_eq!(wasserstein_w(&a, &em(&[0.0, 2.0])), 0.5);
        assert_eq!(brute_force(&[0.0, 1.0], &[0.0, 2.0], capped), 0.5);
    }

    #[test]
    fn w1_examples() {
        let a = em(&[0.0, 1.0]);
        assert_eq!(wasserstein_w1(&a, &a), 0.0);
        assert_eq!(wasserstein_w1(&em(&[0.0]), &em(&[5.0])), 5.0);
        assert_eq!(wasserstein_w1(&a, &em(&[0.0, 2.0])), 0.5);
    }

    #[test]
    fn sorted_matching_is_not_optimal_for_capped_cost() {
        // (0,1) vs (1,2): rank pairing costs 1, pairing 1↔1 and 0↔2 costs 1/2.
        let x = [0.0, 1.0];
        let y = [1.0, 2.0];
        assert_eq!(brute_force(&x, &y, capped), 0.5);
        assert_eq!(capped_matching_cost(&x, &y).unwrap(), 0.5);
        assert_eq!(w_weighted(&(&em(&x)).into(), &(&em(&y)).into()), 0.5);
    }

    #[test]
    fn unequal_sizes_use_quantile_coupling() {
        // δ₀ against (0, 2): half the mass travels 2, capped at 1.
        let a = em(&[0.0]);
        let b = em(&[0.0, 2.0]);
        assert_eq!(wasserstein_w1(&a, &b), 1.0);
        assert_eq!(wasserstein_w(&a, &b), 0.5);
        // (0,1,2) vs (0,3): F difference 1/3 on [0,1], 1/6 on [1,2], 1/2 on [2,3]
        let w1 = wasserstein_w1(&em(&[0.0, 1.0, 2.0]), &em(&[0.0, 3.0]));
        assert!((w1 - (1.0 / 6.0 + 1.0 / 6.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn matching_permutation_realises_cost() {
        let x = [2.0, -1.0, 0.5, 7.0, 0.4];
        let y = [0.0, 3.0, 0.45, -0.9, 6.5];
        let (perm, cost) = capped_matching(&x, &y).unwrap();
        let mut seen = perm.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
        assert!((cost - brute_force(&x, &y, capped)).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(capped_matching(&[0.0], &[0.0, 1.0]), Err(Error::LengthMismatch(1, 2))));
    }

    fn pair(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..=max_n).prop_flat_map(|n| {
            (
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(-3.0f64..3.0, n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn both_capped_routes_match_brute_force((x, y) in pair(7)) {
            let bf = brute_force(&x, &y, capped);
            let a = em(&x);
            let b = em(&y);
            let dp = capped_matching_cost(a.atoms(), b.atoms()).unwrap();
            let flow = w_weighted(&(&a).into(), &(&b).into());
            let (_, perm_cost) = capped_matching(&x, &y).unwrap();
            prop_assert!((dp - bf).abs() < 1e-12, "dp {} bf {}", dp, bf);
            prop_assert!((flow - bf).abs() < 1e-12, "flow {} bf {}", flow, bf);
            prop_assert!((perm_cost - bf).abs() < 1e-12);
        }

        #[test]
        fn w1_matches_brute_force((x, y) in pair(7)) {
            let bf = brute_force(&x, &y, f64::abs);
            let w1 = wasserstein_w1(&em(&x), &em(&y));
            prop_assert!((w1 - bf).abs() < 1e-12);
            let general = w1_weighted(&(&em(&x)).into(), &(&em(&y)).into());
            prop_assert!((general - bf).abs() < 1e-12);
        }

        #[test]
        fn capped_below_uncapped_and_one((x, y) in pair(12)) {
            let (a, b) = (em(&x), em(&y));
            let w = wasserstein_w(&a, &b);
            prop_assert!(w <= wasserstein_w1(&a, &b) + 1e-12);
            prop_assert!((0.0..=1.0).contains(&w));
        }

        #[test]
        fn translation_invariance((x, y) in pair(12), c in -5.0f64..5.0) {
            let (a, b) = (em(&x), em(&y));
            let (sa, sb) = (a.shifted(c), b.shifted(c));
            prop_assert!((wasserstein_w1(&a, &b) - wasserstein_w1(&sa, &sb)).abs() < 1e-12);
            prop_assert!((wasserstein_w(&a, &b) - wasserstein_w(&sa, &sb)).abs() < 1e-12);
        }

        #[test]
        fn triangle_inequality(
            x in prop::collection::vec(-3.0f64..3.0, 1..8),
            y in prop::collection::vec(-3.0f64..3.0, 1..8),
            z in prop::collection::vec(-3.0f64..3.0, 1..8),
        ) {
            let (a, b, c) = (em(&x), em(&y), em(&z));
            prop_assert!(wasserstein_w(&a, &c) <= wasserstein_w(&a, &b) + wasserstein_w(&b, &c) + 1e-12);
            prop_assert!(wasserstein_w1(&a, &c) <= wasserstein_w1(&a, &b) + wasserstein_w1(&b, &c) + 1e-12);
            prop_assert!((wasserstein_w(&a, &b) - wasserstein_w(&b, &a)).abs() < 1e-12);
        }
    }
}
