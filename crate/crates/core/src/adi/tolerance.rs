//! Inner tolerance selection.
//!
//! With `x = ‖r^A‖`, `y = ‖r^B‖`, the admissible region for one step is
//! `ψ(x, y) = x·‖t‖ + y·‖w‖ + 2xy ≤ ε̂`, where `w`, `t` are the residual
//! factors entering the step and `ε̂` is the per-step budget.

use serde::{Deserialize, Serialize};

use crate::scalar::c64;

use super::Strategy;

/// Bound constant `c = 2 + √2` used in the budgets.
pub const C_BOUND: f64 = 2.0 + std::f64::consts::SQRT_2;

/// `γ = -(α + β)`
pub fn gamma(alpha: c64, beta: c64) -> c64 {
    -(alpha + beta)
}

/// Per-step budget without credit from earlier steps:
/// `ξ ε / (2 c² kmax)`.
pub fn budget_plain(gap: f64, xi: f64, max_steps: usize) -> f64 {
    xi * gap / (2.0 * C_BOUND * C_BOUND * max_steps as f64)
}

/// Budget crediting unused allowance of steps `1..k`:
/// `|ξ k ε / (2 c kmax) - u_{k-1} - v_{k-1}| / c`.
pub fn budget_back_looking(gap: f64, xi: f64, max_steps: usize, step: usize, u_prev: f64, v_prev: f64) -> f64 {
    let allowance = xi * step as f64 * gap / (2.0 * C_BOUND * max_steps as f64);
    (allowance - u_prev - v_prev).abs() / C_BOUND
}

/// Largest `δ_B` on the admissible boundary for a given `δ_A`, with the
/// bound constant `c_check`. Negative values (past the axis intercept) map
/// to zero.
pub fn tol_b_from_tol_a(delta_a: f64, budget: f64, c_check: f64, norm_t: f64, norm_w: f64) -> f64 {
    let v = (budget - c_check * delta_a * norm_t) / (c_check * (2.0 * delta_a + norm_w));
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Mirror of [`tol_b_from_tol_a`]: largest `δ_A` for a given `δ_B`.
pub fn tol_a_from_tol_b(delta_b: f64, budget: f64, c_check: f64, norm_t: f64, norm_w: f64) -> f64 {
    tol_b_from_tol_a(delta_b, budget, c_check, norm_w, norm_t)
}

/// `ψ(x, y) = x‖t‖ + y‖w‖ + 2xy`
pub fn psi(delta_a: f64, delta_b: f64, norm_t: f64, norm_w: f64) -> f64 {
    delta_a * norm_t + delta_b * norm_w + 2.0 * delta_a * delta_b
}

/// Lower and upper limits for the inner tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceBounds {
    pub min_a: f64,
    pub max_a: f64,
    pub min_b: f64,
    pub max_b: f64,
}

impl ToleranceBounds {
    pub fn uniform(min: f64, max: f64) -> Self {
        Self {
            min_a: min,
            max_a: max,
            min_b: min,
            max_b: max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clamp {
    Free,
    Min,
    Max,
}

fn clamp(v: f64, lo: f64, hi: f64) -> (f64, Clamp) {
    if v < lo {
        (lo, Clamp::Min)
    } else if v > hi {
        (hi, Clamp::Max)
    } else {
        (v, Clamp::Free)
    }
}

/// Tolerances for one step. A side solved directly has tolerance zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceDecision {
    pub delta_a: f64,
    pub delta_b: f64,
    pub budget: f64,
    pub strategy: Strategy,
    pub clamp_a: Clamp,
    pub clamp_b: Clamp,
    /// `ψ(δ_A, δ_B) ≤ ε̂` for the chosen pair; always true for fixed and
    /// direct strategies.
    pub admissible: bool,
}

impl ToleranceDecision {
    pub fn clamped_at_min(&self) -> bool {
        self.clamp_a == Clamp::Min || self.clamp_b == Clamp::Min
    }
}

/// Picks `(δ_A, δ_B)` for one step from the budget and the norms of the
/// residual factors entering it.
pub fn choose_tolerances(
    strategy: Strategy,
    bounds: &ToleranceBounds,
    budget: f64,
    norm_w: f64,
    norm_t: f64,
) -> ToleranceDecision {
    let mut d = ToleranceDecision {
        delta_a: 0.0,
        delta_b: 0.0,
        budget,
        strategy,
        clamp_a: Clamp::Free,
        clamp_b: Clamp::Free,
        admissible: true,
    };
    match strategy {
        Strategy::Fixed { delta } => {
            d.delta_a = delta;
            d.delta_b = delta;
            return d;
        }
        Strategy::ExactDirect => return d,
        Strategy::DynamicMid | Strategy::DynamicMidBl => {
            let cap = bounds.max_a.min(budget / norm_t);
            let (da, ca) = clamp(0.5 * (cap - bounds.min_a), bounds.min_a, f64::INFINITY);
            let raw_b = tol_b_from_tol_a(da, budget, 1.0, norm_t, norm_w);
            let (db, cb) = clamp(raw_b, bounds.min_b, bounds.max_b);
            d.delta_a = da;
            d.delta_b = db;
            d.clamp_a = ca;
            d.clamp_b = cb;
        }
        Strategy::DynamicB | Strategy::DynamicBBl => {
            let db = bounds.min_b;
            let raw_a = tol_a_from_tol_b(db, budget, 1.0, norm_t, norm_w);
            let (da, ca) = clamp(raw_a, bounds.min_a, bounds.max_a);
            d.delta_a = da;
            d.delta_b = db;
            d.clamp_a = ca;
            d.clamp_b = if budget < db * norm_w { Clamp::Min } else { Clamp::Free };
        }
        Strategy::IterADirectB => {
            let (da, ca) = clamp(budget / norm_t, bounds.min_a, bounds.max_a);
            d.delta_a = da;
            d.clamp_a = ca;
        }
        Strategy::DirectAIterB => {
            let (db, cb) = clamp(budget / norm_w, bounds.min_b, bounds.max_b);
            d.delta_b = db;
            d.clamp_b = cb;
        }
    }
    d.admissible = psi(d.delta_a, d.delta_b, norm_t, norm_w) <= budget * (1.0 + 1e-12);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adi::Strategy;
    use proptest::prelude::{any, prop_assert, proptest};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_definition() {
        assert_eq!(gamma(c64::new(1.0, 0.0), c64::new(2.0, 0.0)), c64::new(-3.0, 0.0));
        assert_eq!(gamma(c64::new(-0.5, 2.0), c64::new(-0.5, -2.0)), c64::new(1.0, 0.0));
        assert_eq!(gamma(c64::new(0.0, 0.0), c64::new(0.0, 0.0)), c64::new(0.0, 0.0));
    }

    #[test]
    fn plain_budget_value() {
        let oracle = 1e-8 / (2.0 * (6.0 + 4.0 * 2f64.sqrt()) * 50.0);
        assert!(rel(budget_plain(1e-8, 1.0, 50), oracle) < 1e-14);
        assert!(rel(budget_plain(1e-8, 1.0, 50), 8.5786e-12) < 1e-4);
    }

    #[test]
    fn back_looking_budget_edges() {
        let plain = budget_plain(1e-8, 1.0, 50);
        assert!(rel(budget_back_looking(1e-8, 1.0, 50, 1, 0.0, 0.0), plain) < 1e-14);
        let spent = 2.0 * 1e-8 / (2.0 * C_BOUND * 50.0);
        assert!(budget_back_looking(1e-8, 1.0, 50, 2, spent, 0.0) < 1e-25);
    }

    #[test]
    fn boundary_intercepts() {
        let (eps, c, nt, nw) = (1e-8, 3.0, 1e-5, 2e-3);
        assert!(tol_b_from_tol_a(eps / (c * nt), eps, c, nt, nw) < 1e-20);
        assert!(rel(tol_b_from_tol_a(0.0, eps, c, nt, nw), 1e-8 / 6e-3) < 1e-12);
        assert!(rel(tol_b_from_tol_a(1e-4, eps, c, nt, nw), 7e-9 / 6.6e-3) < 1e-12);
        assert!(rel(tol_b_from_tol_a(1e-4, eps, c, nt, nw), 1.0606e-6) < 1e-4);
        assert_eq!(tol_b_from_tol_a(1.0, eps, c, nt, nw), 0.0);
    }

    #[test]
    fn mid_strategy_example() {
        let b = ToleranceBounds::uniform(5e-10, 0.1);
        let d = choose_tolerances(Strategy::DynamicMid, &b, 8.58e-12, 2e-3, 1e-5);
        assert!(rel(d.delta_a, 4.2875e-7) < 1e-4, "{}", d.delta_a);
        assert!(rel(d.delta_b, 2.145e-9) < 1e-3, "{}", d.delta_b);
        assert_eq!((d.clamp_a, d.clamp_b), (Clamp::Free, Clamp::Free));
        assert!(d.admissible);
    }

    #[test]
    fn fixed_strategy_passes_through() {
        let b = ToleranceBounds::uniform(5e-10, 0.1);
        let d = choose_tolerances(Strategy::Fixed { delta: 5e-10 }, &b, 1.0, 1.0, 1.0);
        assert_eq!((d.delta_a, d.delta_b), (5e-10, 5e-10));
    }

    #[test]
    fn tiny_budget_clamps_both_sides() {
        let b = ToleranceBounds::uniform(5e-10, 0.1);
        for s in [Strategy::DynamicMid, Strategy::DynamicMidBl] {
            let d = choose_tolerances(s, &b, 1e-20, 1.0, 1.0);
            assert_eq!((d.delta_a, d.delta_b), (5e-10, 5e-10));
            assert_eq!((d.clamp_a, d.clamp_b), (Clamp::Min, Clamp::Min));
            assert!(d.clamped_at_min());
            assert!(!d.admissible);
        }
    }

    #[test]
    fn b_preferring_lands_on_boundary() {
        let b = ToleranceBounds::uniform(1e-14, 0.1);
        let d = choose_tolerances(Strategy::DynamicBBl, &b, 1e-9, 0.3, 0.02);
        assert_eq!(d.delta_b, 1e-14);
        assert!(rel(psi(d.delta_a, d.delta_b, 0.02, 0.3), 1e-9) < 1e-12);
    }

    #[test]
    fn one_side_direct_bounds() {
        let b = ToleranceBounds::uniform(1e-14, 0.1);
        let d = choose_tolerances(Strategy::IterADirectB, &b, 1e-9, 0.3, 0.02);
        assert!(rel(d.delta_a, 1e-9 / 0.02) < 1e-14);
        assert_eq!(d.delta_b, 0.0);
        let d = choose_tolerances(Strategy::DirectAIterB, &b, 1e-9, 0.3, 0.02);
        assert!(rel(d.delta_b, 1e-9 / 0.3) < 1e-14);
        assert_eq!(d.delta_a, 0.0);
    }

    proptest! {
        #[test]
        fn dynamic_choices_are_admissible_unless_clamped(
            budget in 1e-14f64..1e-4, nw in 1e-6f64..1e3, nt in 1e-6f64..1e3, bl in any::<bool>(), mid in any::<bool>(),
        ) {
            let s = match (mid, bl) {
                (true, false) => Strategy::DynamicMid,
                (true, true) => Strategy::DynamicMidBl,
                (false, false) => Strategy::DynamicB,
                (false, true) => Strategy::DynamicBBl,
            };
            let b = ToleranceBounds::uniform(1e-13, 0.1);
            let d = choose_tolerances(s, &b, budget, nw, nt);
            prop_assert!(d.delta_a >= b.min_a && d.delta_a <= b.max_a.max(b.min_a));
            prop_assert!(d.delta_b >= b.min_b && d.delta_b <= b.max_b);
            if !d.clamped_at_min() {
                prop_assert!(psi(d.delta_a, d.delta_b, nt, nw) <= budget * (1.0 + 1e-12));
            }
        }

        #[test]
        fn side_caps_are_monotone(budget in 1e-14f64..1e-4, n1 in 1e-6f64..1e3, n2 in 1e-6f64..1e3, c in 1.0f64..4.0) {
            let (lo, hi) = if n1 < n2 { (n1, n2) } else { (n2, n1) };
            prop_assert!(budget / (c * hi) <= budget / (c * lo));
            // δ_B cap at δ_A = 0 is nonincreasing in ‖w‖
            prop_assert!(tol_b_from_tol_a(0.0, budget, c, 1.0, hi) <= tol_b_from_tol_a(0.0, budget, c, 1.0, lo));
        }

        #[test]
        fn back_looking_budget_is_nonnegative(k in 1usize..60, u in 0.0f64..1e-6, v in 0.0f64..1e-6) {
            prop_assert!(budget_back_looking(1e-6, 1.0, 50, k, u, v) >= 0.0);
        }
    }
}
