//! Small numerical kernels shared by the sampler, schemes and evaluator:
//! stable exponential integrals, Gauss–Legendre rules and summation.

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

/// Below this value of `|σ|·u` the exponential integrals switch to their
/// two-term series.
pub const SERIES_THRESHOLD: f64 = 1e-12;

/// `∫₀^u e^{−σ v} dv = (1 − e^{−σu})/σ`, with the `σ → 0` limit.
pub fn m0(sigma: f64, u: f64) -> f64 {
    let x = sigma * u;
    if x.abs() < SERIES_THRESHOLD {
        u * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / sigma
    }
}

/// `φ₁(λ, h) = ∫₀^h e^{−λs} ds`.
pub fn phi1(lambda: f64, h: f64) -> f64 {
    m0(lambda, h)
}

/// `∫₀^u e^{−b(u−v)} e^{−a v} dv = (e^{−au} − e^{−bu})/(b − a)`.
///
/// Factored through the smaller rate so that large rates never overflow and
/// nearly equal rates do not cancel.
pub fn kdd(a: f64, b: f64, u: f64) -> f64 {
    let lo = a.min(b);
    (-lo * u).exp() * m0((b - a).abs(), u)
}

/// `M(p, σ, h) = ∫₀^h u^p e^{−σu} du` for small integer `p`.
pub fn moment(p: u32, sigma: f64, h: f64) -> f64 {
    let x = sigma * h;
    let hp1 = h.powi(p as i32 + 1);
    if x <= 0.0 {
        // Σ_k (−σ)^k h^{p+k+1} / (k! (p+k+1)); every term is nonnegative.
        let y = -x;
        let mut term = 1.0;
        let mut sum = 1.0 / f64::from(p + 1);
        for k in 1..400 {
            term *= y / k as f64;
            let add = term / f64::from(p + 1 + k);
            sum += add;
            if add <= sum * 1e-17 {
                break;
            }
        }
        hp1 * sum
    } else if x <= 30.0 {
        // h^{p+1} p! e^{−x} Σ_{k>p} x^{k−p−1}/k!
        let pf = factorial(p);
        let mut term = 1.0 / factorial(p + 1);
        let mut sum = term;
        for k in (p + 2)..(p + 400) {
            term *= x / f64::from(k);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        hp1 * pf * (-x).exp() * sum
    } else {
        let mut term = 1.0;
        let mut partial = 1.0;
        for k in 1..=p {
            term *= x / f64::from(k);
            partial += term;
        }
        factorial(p) / sigma.powi(p as i32 + 1) * (1.0 - (-x).exp() * partial)
    }
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * f64::from(k))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    static RULE16: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let reference = |n: usize| -> Vec<(f64, f64)> {
        GaussLegendre::new(n.try_into().expect("rule size must be nonzero"))
            .iter()
            .map(|(x, w)| (*x, *w))
            .collect()
    };
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let map = |rule: &[(f64, f64)]| rule.iter().map(|(x, w)| (mid + half * x, half * w)).collect();
    if n == 16 {
        map(RULE16.get_or_init(|| reference(16)))
    } else {
        map(&reference(n))
    }
}

/// Pairwise summation, deterministic for a fixed input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let (l, r) = xs.split_at(xs.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        // 64 panels of 16-point Gauss–Legendre
        let panels = 64;
        let w = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                gauss_legendre(16, a + k as f64 * w, a + (k + 1) as f64 * w)
                    .into_iter()
                    .map(|(x, wt)| wt * f(x))
                    .sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn moment_matches_quadrature_in_every_regime() {
        for p in 0..=4u32 {
            for &(sigma, h) in &[
                (0.0, 0.3),
                (-2.0, 0.5),
                (1e-14, 0.1),
                (3.0, 0.1),
                (50.0, 0.5),
                (200.0, 0.5),
                (4000.0, 0.1),
            ] {
                let exact = quad(|u| u.powi(p as i32) * (-sigma * u).exp(), 0.0, h);
                let got = moment(p, sigma, h);
                assert!(
                    (got - exact).abs() <= 1e-12 * exact.abs(),
                    "p={p} σ={sigma} h={h}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn kdd_is_symmetric_and_has_the_right_limit() {
        assert_eq!(kdd(2.0, 5.0, 0.3), kdd(5.0, 2.0, 0.3));
        let direct = ((-2.0f64 * 0.3).exp() - (-5.0f64 * 0.3).exp()) / 3.0;
        assert!((kdd(2.0, 5.0, 0.3) - direct).abs() < 1e-15);
        let lim = 0.3 * (-2.0f64 * 0.3).exp();
        assert!((kdd(2.0, 2.0, 0.3) - lim).abs() < 1e-16);
        // no overflow for stiff rates
        assert!(kdd(1e5, 2e5, 1.0).is_finite());
    }

    #[test]
    fn phi1_limit() {
        assert_eq!(phi1(0.0, 0.25), 0.25);
        let l = 3.0;
        assert!((phi1(l, 0.2) - (1.0 - (-l * 0.2f64).exp()) / l).abs() < 1e-16);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(16, 0.0, 1.0);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(31)).sum();
        assert!((s - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
    }
}
