//! Composite Simpson rules on uniform grids.

/// Composite Simpson rule for `f` on `[a, b]` with `intervals` subintervals.
/// An odd `intervals` is bumped to the next even count.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = even_at_least(intervals);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Tensor-product Simpson rule on the unit square.
pub fn simpson_unit_square<F: Fn(f64, f64) -> f64>(f: F, intervals: usize) -> f64 {
    let weights = simpson_weights(intervals);
    let n = weights.len() - 1;
    let h = 1.0 / n as f64;
    let mut sum = 0.0;
    for (j, wy) in weights.iter().enumerate() {
        let y = j as f64 * h;
        let mut row = 0.0;
        for (i, wx) in weights.iter().enumerate() {
            row += wx * f(i as f64 * h, y);
        }
        sum += wy * row;
    }
    sum
}

/// Simpson weights on `[0, 1]`, already scaled by `h / 3`.
pub fn simpson_weights(intervals: usize) -> Vec<f64> {
    let n = even_at_least(intervals);
    let h = 1.0 / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

fn even_at_least(n: usize) -> usize {
    let n = n.max(2);
    n + n % 2
}
