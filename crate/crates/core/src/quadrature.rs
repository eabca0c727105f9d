//! Composite quadrature rules on uniform nodes.

/// Composite Simpson rule for samples on a uniform grid with spacing `h`.
///
/// An even number of samples (odd number of intervals) is handled by closing
/// the last three intervals with Simpson's 3/8 rule, so the rule stays
/// fourth order for any length ≥ 4. Two samples fall back to the trapezoid.
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            if intervals % 2 == 0 {
                simpson_even(values, h)
            } else {
                let head = &values[..n - 3];
                let tail = &values[n - 4..];
                simpson_even(head, h)
                    + 3.0 * h / 8.0 * (tail[0] + 3.0 * tail[1] + 3.0 * tail[2] + tail[3])
            }
        }
    }
}

fn simpson_even(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    debug_assert!(n % 2 == 1);
    if n == 1 {
        return 0.0;
    }
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (values[0] + values[n - 1] + 4.0 * odd + 2.0 * even)
}

/// Composite Simpson rule for `f` on `[a, b]` with `intervals` (rounded up to
/// even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = intervals.max(2) + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Trapezoid rule on arbitrary (sorted) abscissae.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Composite quadrature on sorted abscissae: Simpson when the nodes are
/// uniform, trapezoid otherwise.
pub fn integrate_samples(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return 0.0;
    }
    let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let uniform = x
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(f64::MIN_POSITIVE));
    if uniform {
        simpson_uniform(y, h)
    } else {
        trapezoid(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [3usize, 4, 5, 8, 11, 64] {
            let h = 2.0 / (n - 1) as f64;
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    let x = -1.0 + i as f64 * h;
                    x * x * x - 2.0 * x * x + 1.0
                })
                .collect();
            let exact = -4.0 / 3.0 + 2.0;
            assert!((simpson_uniform(&y, h) - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn simpson_function_converges() {
        let v = simpson(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 200);
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn integrate_samples_picks_trapezoid_on_nonuniform() {
        let x = [0.0, 0.1, 0.5, 1.0];
        let y = [1.0, 1.0, 1.0, 1.0];
        assert!((integrate_samples(&x, &y) - 1.0).abs() < 1e-15);
    }
}
