use std::f64::consts::PI;

use stochflux::quadrature::{simpson, simpson_unit_square};
use stochflux::spectral::{
    eigen_modes, flux_coefficient, kernel_table, BoundaryPoint, Equation, KernelSeries,
    SpatialDomain,
};
use stochflux::{GridSpec, SpatialProfile};

#[test]
fn first_twenty_modes_are_orthonormal() {
    let modes = eigen_modes(SpatialDomain::Interval, 20).unwrap();
    for a in &modes {
        for b in &modes {
            let ip = simpson(|x| a.eval(x, 0.0) * b.eval(x, 0.0), 0.0, 1.0, 4096);
            let target = if a.index == b.index { 1.0 } else { 0.0 };
            assert!(
                (ip - target).abs() < 1e-9,
                "{:?} {:?} {ip}",
                a.index,
                b.index
            );
        }
    }
    let modes = eigen_modes(SpatialDomain::Square, 10).unwrap();
    for a in &modes {
        for b in &modes {
            let ip = simpson_unit_square(|x, y| a.eval(x, y) * b.eval(x, y), 256);
            let target = if a.index == b.index { 1.0 } else { 0.0 };
            assert!((ip - target).abs() < 1e-8);
        }
    }
}

#[test]
fn modes_satisfy_the_eigen_relation() {
    let h = 1e-4;
    for m in eigen_modes(SpatialDomain::Interval, 12).unwrap() {
        for x in [0.13, 0.5, 0.77] {
            let lap = (m.eval(x + h, 0.0) - 2.0 * m.eval(x, 0.0) + m.eval(x - h, 0.0)) / (h * h);
            let scale = m.eigenvalue * 2f64.sqrt();
            assert!((-lap - m.eigenvalue * m.eval(x, 0.0)).abs() < 1e-5 * scale);
        }
    }
    for m in eigen_modes(SpatialDomain::Square, 12).unwrap() {
        let (x, y) = (0.31, 0.62);
        let lap = (m.eval(x + h, y) + m.eval(x - h, y) + m.eval(x, y + h) + m.eval(x, y - h)
            - 4.0 * m.eval(x, y))
            / (h * h);
        assert!((-lap - m.eigenvalue * m.eval(x, y)).abs() < 1e-5 * m.eigenvalue * 2.0);
    }
}

#[test]
fn eigenvalues_follow_weyl_growth() {
    let one = eigen_modes(SpatialDomain::Interval, 400).unwrap();
    for (n, m) in one.iter().enumerate() {
        let expected = ((n + 1) as f64 * PI).powi(2);
        assert!((m.eigenvalue - expected).abs() < 1e-9 * expected);
    }
    // Counting function on the square: N(lambda) ~ lambda / (4 pi).
    let square = eigen_modes(SpatialDomain::Square, 2000).unwrap();
    let lambda = square.last().unwrap().eigenvalue;
    let ratio = square.len() as f64 / (lambda / (4.0 * PI));
    assert!((0.85..1.05).contains(&ratio), "{ratio}");
    assert!(square
        .windows(2)
        .all(|w| w[0].eigenvalue <= w[1].eigenvalue));
}

#[test]
fn flux_coefficients_decay_like_inverse_root_eigenvalue() {
    for m in eigen_modes(SpatialDomain::Interval, 200).unwrap() {
        let c = flux_coefficient(&m, &BoundaryPoint::Left).unwrap();
        assert!((c.abs() * m.eigenvalue.sqrt() - 2f64.sqrt()).abs() < 1e-12);
    }
}

/// Steady state of the heat kernel is the outward flux `-dv/dn` of the
/// Poisson solution `-v'' = g`, here solved by second-order finite differences.
fn poisson_flux_at_zero(n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let m = n - 1;
    let rhs: Vec<f64> = (1..n)
        .map(|i| h * h * SpatialProfile::Parabola.eval(i as f64 * h, 0.0))
        .collect();
    // Thomas sweep for tridiag(-1, 2, -1).
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for i in 0..m {
        let denom = 2.0 - if i > 0 { -c[i - 1] } else { 0.0 };
        c[i] = -1.0 / denom;
        d[i] = (rhs[i] + if i > 0 { d[i - 1] } else { 0.0 }) / denom;
    }
    let mut v = vec![0.0; m];
    for i in (0..m).rev() {
        v[i] = d[i] - if i + 1 < m { c[i] * v[i + 1] } else { 0.0 };
    }
    // Second-order one-sided derivative at x = 0 with v(0) = 0.
    (4.0 * v[0] - v[1]) / (2.0 * h)
}

#[test]
fn heat_steady_state_matches_poisson_solve() {
    let series = KernelSeries::new(
        &BoundaryPoint::Left,
        &SpatialProfile::Parabola,
        Equation::Heat,
        2000,
    )
    .unwrap();
    let fd = poisson_flux_at_zero(4096);
    assert!(
        (series.steady_state() - fd).abs() < 1e-6,
        "{} {fd}",
        series.steady_state()
    );
    assert!((series.eval(5.0) - 1.0 / 12.0).abs() < 1e-6);
}

#[test]
fn kernel_tables_converge_for_every_example() {
    let g1 = GridSpec::new_1d(64, 128, 1.0).unwrap();
    let g2 = GridSpec::new_2d(32, 32, 128, 1.0).unwrap();
    for eq in [Equation::Heat, Equation::Wave] {
        for z in [BoundaryPoint::Left, BoundaryPoint::Right] {
            let t = kernel_table(&z, &SpatialProfile::Parabola, eq, &g1, 1e-8).unwrap();
            assert!(t.values.iter().all(|v| v.is_finite()));
            assert!(t.values[0] > 0.0);
        }
    }
    let z = BoundaryPoint::from_coords(&[0.0, 0.1875]).unwrap();
    let t = kernel_table(&z, &SpatialProfile::Bubble, Equation::Heat, &g2, 1e-8).unwrap();
    assert!(t.values.windows(2).all(|w| w[1] >= w[0]));
}
