//! Dirichlet-Laplacian eigensystem on the unit interval and unit square,
//! boundary-flux coefficients and the recovery kernel `G_z(t)`.
//!
//! Eigenpairs are `lambda_n = n^2 pi^2`, `phi_n = sqrt(2) sin(n pi x)` in 1D and
//! `lambda = (p^2 + q^2) pi^2`, `phi = 2 sin(p pi x) sin(q pi y)` in 2D. Square
//! modes are flattened by nondecreasing eigenvalue with ties broken by `(p, q)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::profile::SpatialProfile;
use crate::quadrature::{simpson, simpson_unit_square};

/// Default hard cap on the number of modes used by adaptive truncation.
pub const TRUNCATION_CAP: usize = 100_000;
/// Default truncation tolerance for kernel tables.
pub const TRUNCATION_TOLERANCE: f64 = 1e-8;

/// Order of the time derivative in the model: heat (`m = 1`) or wave (`m = 2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Heat,
    Wave,
}

impl Equation {
    pub fn order(self) -> u8 {
        match self {
            Equation::Heat => 1,
            Equation::Wave => 2,
        }
    }

    pub fn from_order(m: u8) -> Result<Self> {
        match m {
            1 => Ok(Equation::Heat),
            2 => Ok(Equation::Wave),
            _ => invalid(format!("equation order must be 1 or 2, got {m}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialDomain {
    /// `[0, 1]`
    Interval,
    /// `[0, 1]^2`
    Square,
}

impl SpatialDomain {
    pub fn dim(self) -> u8 {
        match self {
            SpatialDomain::Interval => 1,
            SpatialDomain::Square => 2,
        }
    }

    pub fn from_dim(dim: u8) -> Result<Self> {
        match dim {
            1 => Ok(SpatialDomain::Interval),
            2 => Ok(SpatialDomain::Square),
            _ => invalid(format!("dim must be 1 or 2, got {dim}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeIndex {
    Single(u32),
    Pair(u32, u32),
}

impl ModeIndex {
    pub fn dim(self) -> u8 {
        match self {
            ModeIndex::Single(_) => 1,
            ModeIndex::Pair(..) => 2,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            ModeIndex::Single(n) if n >= 1 => Ok(()),
            ModeIndex::Pair(p, q) if p >= 1 && q >= 1 => Ok(()),
            _ => invalid(format!("mode indices must be positive, got {self:?}")),
        }
    }

    pub fn eigenvalue(self) -> f64 {
        match self {
            ModeIndex::Single(n) => (n as f64 * PI).powi(2),
            ModeIndex::Pair(p, q) => (p as f64).hypot(q as f64).powi(2) * PI * PI,
        }
    }

    pub fn eigenfunction(self, x: f64, y: f64) -> f64 {
        match self {
            ModeIndex::Single(n) => SQRT_2 * (n as f64 * PI * x).sin(),
            ModeIndex::Pair(p, q) => 2.0 * (p as f64 * PI * x).sin() * (q as f64 * PI * y).sin(),
        }
    }

    /// `(d/dx, d/dy)` of the eigenfunction; the second entry is 0 in 1D.
    pub fn gradient(self, x: f64, y: f64) -> (f64, f64) {
        match self {
            ModeIndex::Single(n) => {
                let k = n as f64 * PI;
                (SQRT_2 * k * (k * x).cos(), 0.0)
            }
            ModeIndex::Pair(p, q) => {
                let (kp, kq) = (p as f64 * PI, q as f64 * PI);
                (
                    2.0 * kp * (kp * x).cos() * (kq * y).sin(),
                    2.0 * kq * (kp * x).sin() * (kq * y).cos(),
                )
            }
        }
    }
}

/// One normalized Dirichlet eigenpair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenMode {
    pub index: ModeIndex,
    pub eigenvalue: f64,
}

impl EigenMode {
    pub fn new(index: ModeIndex) -> Result<Self> {
        index.validate()?;
        Ok(EigenMode {
            index,
            eigenvalue: index.eigenvalue(),
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.index.eigenfunction(x, y)
    }

    pub fn domain(&self) -> SpatialDomain {
        match self.index {
            ModeIndex::Single(_) => SpatialDomain::Interval,
            ModeIndex::Pair(..) => SpatialDomain::Square,
        }
    }
}

/// The first `count` eigenmodes of `domain` in enumeration order.
pub fn eigen_modes(domain: SpatialDomain, count: usize) -> Result<Vec<EigenMode>> {
    if count == 0 {
        return invalid("mode count must be at least 1");
    }
    let indices: Vec<ModeIndex> = match domain {
        SpatialDomain::Interval => (1..=count as u32).map(ModeIndex::Single).collect(),
        SpatialDomain::Square => square_indices(count),
    };
    Ok(indices
        .into_iter()
        .map(|index| EigenMode {
            index,
            eigenvalue: index.eigenvalue(),
        })
        .collect())
}

fn square_indices(count: usize) -> Vec<ModeIndex> {
    // Quarter disc of radius r holds about pi r^2 / 4 lattice points.
    let mut radius = ((4.0 * count as f64 / PI).sqrt() + 2.0).ceil() as u64;
    loop {
        let r2 = radius * radius;
        let mut keys: Vec<(u64, u32, u32)> = Vec::new();
        for p in 1..=radius {
            for q in 1..=radius {
                let s = p * p + q * q;
                if s <= r2 {
                    keys.push((s, p as u32, q as u32));
                }
            }
        }
        if keys.len() >= count {
            keys.sort_unstable();
            return keys
                .into_iter()
                .take(count)
                .map(|(_, p, q)| ModeIndex::Pair(p, q))
                .collect();
        }
        radius *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `x = 0`
    West,
    /// `x = 1`
    East,
    /// `y = 0`
    South,
    /// `y = 1`
    North,
}

/// A point `z` on the boundary of the domain where flux is observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPoint {
    /// `x = 0` on the interval.
    Left,
    /// `x = 1` on the interval.
    Right,
    /// A non-corner point on one side of the square; `offset` is the
    /// coordinate along that side.
    Square { side: Side, offset: f64 },
}

impl BoundaryPoint {
    pub fn on_square(side: Side, offset: f64) -> Result<Self> {
        if !(offset > 0.0 && offset < 1.0) {
            return invalid(format!(
                "boundary offset must lie strictly inside (0, 1), got {offset}"
            ));
        }
        Ok(BoundaryPoint::Square { side, offset })
    }

    /// Classifies a coordinate tuple (`[x]` or `[x, y]`) as a boundary point.
    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        const EPS: f64 = 1e-12;
        match *coords {
            [x] => {
                if x.abs() <= EPS {
                    Ok(BoundaryPoint::Left)
                } else if (x - 1.0).abs() <= EPS {
                    Ok(BoundaryPoint::Right)
                } else {
                    invalid(format!("x = {x} is not on the boundary of [0, 1]"))
                }
            }
            [x, y] => {
                let on = |v: f64, edge: f64| (v - edge).abs() <= EPS;
                let side = match (on(x, 0.0), on(x, 1.0), on(y, 0.0), on(y, 1.0)) {
                    (true, _, false, false) => (Side::West, y),
                    (_, true, false, false) => (Side::East, y),
                    (false, false, true, _) => (Side::South, x),
                    (false, false, _, true) => (Side::North, x),
                    _ => {
                        return invalid(format!(
                            "({x}, {y}) is a corner or not on the boundary of the unit square"
                        ))
                    }
                };
                Self::on_square(side.0, side.1)
            }
            _ => invalid("boundary point needs one or two coordinates"),
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match *self {
            BoundaryPoint::Left => vec![0.0],
            BoundaryPoint::Right => vec![1.0],
            BoundaryPoint::Square { side, offset } => match side {
                Side::West => vec![0.0, offset],
                Side::East => vec![1.0, offset],
                Side::South => vec![offset, 0.0],
                Side::North => vec![offset, 1.0],
            },
        }
    }

    pub fn domain(&self) -> SpatialDomain {
        match self {
            BoundaryPoint::Square { .. } => SpatialDomain::Square,
            _ => SpatialDomain::Interval,
        }
    }

    /// Moves a square boundary point onto the nearest interior grid node of
    /// its side. Returns the snapped point and the node index along the side.
    pub fn snap(&self, grid: &GridSpec) -> Result<(BoundaryPoint, usize)> {
        if self.domain().dim() != grid.dim {
            return invalid("boundary point and grid have different dimensions");
        }
        match *self {
            BoundaryPoint::Left => Ok((*self, 0)),
            BoundaryPoint::Right => Ok((*self, grid.nx)),
            BoundaryPoint::Square { side, offset } => {
                let n = match side {
                    Side::West | Side::East => grid.ny(),
                    Side::South | Side::North => grid.nx,
                };
                let node = ((offset * n as f64).round() as usize).clamp(1, n - 1);
                Ok((
                    BoundaryPoint::Square {
                        side,
                        offset: node as f64 / n as f64,
                    },
                    node,
                ))
            }
        }
    }
}

impl std::fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = self.coords();
        match c.as_slice() {
            [x] => write!(f, "({x})"),
            [x, y] => write!(f, "({x}, {y})"),
            _ => unreachable!(),
        }
    }
}

/// Outward normal derivative of the mode at `z`.
pub fn boundary_normal_derivative(mode: &EigenMode, z: &BoundaryPoint) -> Result<f64> {
    match (mode.index, *z) {
        (ModeIndex::Single(n), BoundaryPoint::Left) => Ok(-SQRT_2 * n as f64 * PI),
        (ModeIndex::Single(n), BoundaryPoint::Right) => {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            Ok(sign * SQRT_2 * n as f64 * PI)
        }
        (ModeIndex::Pair(..), BoundaryPoint::Square { side, offset }) => {
            if !(offset > 0.0 && offset < 1.0) {
                return invalid(format!("offset {offset} is a corner or off the boundary"));
            }
            let c = z.coords();
            let (dx, dy) = mode.index.gradient(c[0], c[1]);
            Ok(match side {
                Side::West => -dx,
                Side::East => dx,
                Side::South => -dy,
                Side::North => dy,
            })
        }
        _ => invalid(format!(
            "boundary point {z} does not belong to the domain of mode {:?}",
            mode.index
        )),
    }
}

/// `c_{z,n} = -(1/lambda_n) d(phi_n)/dn(z)`.
pub fn flux_coefficient(mode: &EigenMode, z: &BoundaryPoint) -> Result<f64> {
    Ok(-boundary_normal_derivative(mode, z)? / mode.eigenvalue)
}

/// `g_n = <g, phi_n>`. Named profiles use their closed form; anything else
/// goes through composite Simpson quadrature.
pub fn source_coefficient(g: &SpatialProfile, mode: &EigenMode) -> Result<f64> {
    check_profile(g, mode.domain())?;
    if let Some(v) = g.closed_form_coefficient(mode) {
        return Ok(v);
    }
    Ok(project_by_quadrature(
        g,
        mode,
        quadrature_intervals(g, mode),
    ))
}

fn quadrature_intervals(g: &SpatialProfile, mode: &EigenMode) -> usize {
    let top = match mode.index {
        ModeIndex::Single(n) => n,
        ModeIndex::Pair(p, q) => p.max(q),
    } as usize;
    let base = if mode.domain() == SpatialDomain::Square {
        256
    } else {
        4096
    };
    (16 * g.resolution()).max(32 * top).max(base)
}

/// `<g, phi>` by composite Simpson with `intervals` cells per axis.
pub fn project_by_quadrature(g: &SpatialProfile, mode: &EigenMode, intervals: usize) -> f64 {
    match mode.domain() {
        SpatialDomain::Interval => {
            simpson(|x| g.eval(x, 0.0) * mode.eval(x, 0.0), 0.0, 1.0, intervals)
        }
        SpatialDomain::Square => {
            simpson_unit_square(|x, y| g.eval(x, y) * mode.eval(x, y), intervals)
        }
    }
}

fn check_profile(g: &SpatialProfile, domain: SpatialDomain) -> Result<()> {
    g.validate()?;
    match g.dim() {
        Some(d) if d != domain.dim() => invalid(format!(
            "profile is {d}-dimensional but the domain is {}-dimensional",
            domain.dim()
        )),
        _ => Ok(()),
    }
}

/// Truncated recovery-kernel series `sum_n c_{z,n} g_n (1 - k_n(t))` with
/// `k_n(t) = exp(-lambda_n t)` (heat) or `cos(sqrt(lambda_n) t)` (wave).
#[derive(Debug, Clone)]
pub struct KernelSeries {
    pub equation: Equation,
    pub eigenvalues: Vec<f64>,
    /// `c_{z,n} g_n`
    pub weights: Vec<f64>,
}

impl KernelSeries {
    pub fn new(
        z: &BoundaryPoint,
        g: &SpatialProfile,
        equation: Equation,
        truncation: usize,
    ) -> Result<Self> {
        let modes = eigen_modes(z.domain(), truncation)?;
        Self::from_modes(z, g, equation, &modes)
    }

    pub fn from_modes(
        z: &BoundaryPoint,
        g: &SpatialProfile,
        equation: Equation,
        modes: &[EigenMode],
    ) -> Result<Self> {
        check_profile(g, z.domain())?;
        let mut weights = Vec::with_capacity(modes.len());
        for mode in modes {
            let gn = source_coefficient(g, mode)?;
            weights.push(if gn == 0.0 {
                0.0
            } else {
                flux_coefficient(mode, z)? * gn
            });
        }
        Ok(KernelSeries {
            equation,
            eigenvalues: modes.iter().map(|m| m.eigenvalue).collect(),
            weights,
        })
    }

    pub fn truncation(&self) -> usize {
        self.weights.len()
    }

    /// Kernel value using only the first `terms` modes.
    pub fn eval_partial(&self, t: f64, terms: usize) -> f64 {
        let terms = terms.min(self.weights.len());
        let w = &self.weights[..terms];
        let lam = &self.eigenvalues[..terms];
        match self.equation {
            Equation::Heat => w.iter().zip(lam).map(|(w, l)| -w * (-l * t).exp_m1()).sum(),
            Equation::Wave => w
                .iter()
                .zip(lam)
                .map(|(w, l)| {
                    let s = (0.5 * l.sqrt() * t).sin();
                    2.0 * w * s * s
                })
                .sum(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_partial(t, self.weights.len())
    }

    /// `sum_n c_{z,n} g_n`, the heat kernel's large-time limit.
    pub fn steady_state(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `G_z(t)` truncated to `truncation` modes.
pub fn kernel_value(
    z: &BoundaryPoint,
    g: &SpatialProfile,
    equation: Equation,
    t: f64,
    truncation: usize,
) -> Result<f64> {
    if !(t >= 0.0) {
        return invalid(format!("kernel time must be nonnegative, got {t}"));
    }
    if truncation == 0 {
        return invalid("truncation must be at least 1");
    }
    Ok(KernelSeries::new(z, g, equation, truncation)?.eval(t))
}

/// `G_z` sampled at `t_1..t_{N_t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub z: BoundaryPoint,
    pub equation: Equation,
    pub ht: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub truncation: usize,
}

impl KernelTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Tabulates `G_z` on the observation times of `grid`, doubling the
/// truncation until the table moves by less than `tolerance` in max norm.
pub fn kernel_table(
    z: &BoundaryPoint,
    g: &SpatialProfile,
    equation: Equation,
    grid: &GridSpec,
    tolerance: f64,
) -> Result<KernelTable> {
    kernel_table_capped(z, g, equation, grid, tolerance, TRUNCATION_CAP)
}

pub fn kernel_table_capped(
    z: &BoundaryPoint,
    g: &SpatialProfile,
    equation: Equation,
    grid: &GridSpec,
    tolerance: f64,
    cap: usize,
) -> Result<KernelTable> {
    if !(tolerance > 0.0) {
        return invalid("kernel tolerance must be positive");
    }
    grid.validate()?;
    if z.domain().dim() != grid.dim {
        return invalid("observation point and grid have different dimensions");
    }
    let times = grid.observation_times();
    let mut n = 8usize.min(cap.max(1));
    let mut change = f64::INFINITY;
    while 2 * n <= cap {
        let series = KernelSeries::new(z, g, equation, 2 * n)?;
        let coarse: Vec<f64> = times.iter().map(|&t| series.eval_partial(t, n)).collect();
        let fine: Vec<f64> = times.iter().map(|&t| series.eval(t)).collect();
        change = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < tolerance {
            return Ok(KernelTable {
                z: *z,
                equation,
                ht: grid.ht(),
                times,
                values: fine,
                truncation: 2 * n,
            });
        }
        n *= 2;
    }
    Err(Error::TruncationLimit { cap, change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::simpson;

    fn mode1(n: u32) -> EigenMode {
        EigenMode::new(ModeIndex::Single(n)).unwrap()
    }

    fn mode2(p: u32, q: u32) -> EigenMode {
        EigenMode::new(ModeIndex::Pair(p, q)).unwrap()
    }

    /// One-sided difference of phi into the domain, signed by the outward normal.
    fn fd_normal_derivative(mode: &EigenMode, z: &BoundaryPoint) -> f64 {
        let h = 1e-6;
        let c = z.coords();
        let phi = |x: f64, y: f64| mode.eval(x, y);
        match *z {
            BoundaryPoint::Left => -(phi(h, 0.0) - phi(0.0, 0.0)) / h,
            BoundaryPoint::Right => (phi(1.0, 0.0) - phi(1.0 - h, 0.0)) / h,
            BoundaryPoint::Square { side, .. } => {
                let (x, y) = (c[0], c[1]);
                match side {
                    Side::West => -(phi(h, y) - phi(0.0, y)) / h,
                    Side::East => (phi(1.0, y) - phi(1.0 - h, y)) / h,
                    Side::South => -(phi(x, h) - phi(x, 0.0)) / h,
                    Side::North => (phi(x, 1.0) - phi(x, 1.0 - h)) / h,
                }
            }
        }
    }

    #[test]
    fn first_eigenvalues() {
        let m = eigen_modes(SpatialDomain::Interval, 2).unwrap();
        assert!((m[0].eigenvalue - 9.8696044).abs() < 1e-6);
        assert!((m[1].eigenvalue - 4.0 * PI * PI).abs() < 1e-12);
        let s = eigen_modes(SpatialDomain::Square, 1).unwrap();
        assert_eq!(s[0].index, ModeIndex::Pair(1, 1));
        assert!((s[0].eigenvalue - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn zero_modes_is_an_error() {
        assert!(matches!(
            eigen_modes(SpatialDomain::Interval, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn square_enumeration_is_sorted_with_lexicographic_ties() {
        let modes = eigen_modes(SpatialDomain::Square, 500).unwrap();
        assert_eq!(modes.len(), 500);
        assert_eq!(modes[1].index, ModeIndex::Pair(1, 2));
        assert_eq!(modes[2].index, ModeIndex::Pair(2, 1));
        for w in modes.windows(2) {
            assert!(w[0].eigenvalue <= w[1].eigenvalue);
        }
        // Prefix property: a shorter enumeration is a prefix of a longer one.
        let short = eigen_modes(SpatialDomain::Square, 37).unwrap();
        assert_eq!(&modes[..37], &short[..]);
    }

    #[test]
    fn normal_derivative_matches_finite_difference() {
        let cases = [
            (mode1(1), BoundaryPoint::Left, -SQRT_2 * PI),
            (mode1(2), BoundaryPoint::Right, SQRT_2 * 2.0 * PI),
            (
                mode2(1, 2),
                BoundaryPoint::on_square(Side::West, 0.25).unwrap(),
                -2.0 * PI,
            ),
        ];
        for (mode, z, expected) in cases {
            let v = boundary_normal_derivative(&mode, &z).unwrap();
            assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
            assert!((v - fd_normal_derivative(&mode, &z)).abs() < 1e-4);
        }
        for side in [Side::East, Side::South, Side::North] {
            let z = BoundaryPoint::on_square(side, 0.37).unwrap();
            let m = mode2(3, 2);
            let v = boundary_normal_derivative(&m, &z).unwrap();
            assert!((v - fd_normal_derivative(&m, &z)).abs() < 1e-4);
        }
    }

    #[test]
    fn mismatched_domain_and_corners_are_rejected() {
        let z = BoundaryPoint::on_square(Side::West, 0.5).unwrap();
        assert!(boundary_normal_derivative(&mode1(1), &z).is_err());
        assert!(boundary_normal_derivative(&mode2(1, 1), &BoundaryPoint::Left).is_err());
        assert!(BoundaryPoint::on_square(Side::West, 0.0).is_err());
        assert!(BoundaryPoint::from_coords(&[0.0, 0.0]).is_err());
        assert!(BoundaryPoint::from_coords(&[0.5]).is_err());
        assert!(BoundaryPoint::from_coords(&[0.5, 0.5]).is_err());
        assert_eq!(
            BoundaryPoint::from_coords(&[0.6, 0.0]).unwrap(),
            BoundaryPoint::Square {
                side: Side::South,
                offset: 0.6
            }
        );
    }

    #[test]
    fn flux_coefficient_examples() {
        let c = |n, z| flux_coefficient(&mode1(n), &z).unwrap();
        assert!((c(1, BoundaryPoint::Left) - SQRT_2 / PI).abs() < 1e-12);
        assert!((c(1, BoundaryPoint::Left) - 0.450158).abs() < 1e-6);
        assert!((c(2, BoundaryPoint::Left) - SQRT_2 / (2.0 * PI)).abs() < 1e-12);
        assert!((c(1, BoundaryPoint::Right) - SQRT_2 / PI).abs() < 1e-12);
    }

    #[test]
    fn parabola_coefficients_agree_with_quadrature() {
        let g = SpatialProfile::Parabola;
        let g1 = source_coefficient(&g, &mode1(1)).unwrap();
        assert!((g1 - 4.0 * SQRT_2 / PI.powi(3)).abs() < 1e-15);
        assert!((g1 - 0.182442).abs() < 1e-6);
        assert_eq!(source_coefficient(&g, &mode1(2)).unwrap(), 0.0);
        for n in 1..=25 {
            let m = mode1(n);
            let closed = source_coefficient(&g, &m).unwrap();
            let quad = simpson(|x| g.eval(x, 0.0) * m.eval(x, 0.0), 0.0, 1.0, 10_000);
            assert!((closed - quad).abs() < 1e-10, "n={n}: {closed} vs {quad}");
        }
    }

    #[test]
    fn bubble_coefficients_agree_with_quadrature() {
        let g = SpatialProfile::Bubble;
        for &(p, q) in &[(1, 1), (1, 2), (3, 1), (3, 5)] {
            let m = mode2(p, q);
            let closed = source_coefficient(&g, &m).unwrap();
            let quad = project_by_quadrature(&g, &m, 512);
            assert!(
                (closed - quad).abs() < 1e-10,
                "({p},{q}): {closed} vs {quad}"
            );
        }
    }

    #[test]
    fn eigenfunction_projects_onto_itself() {
        let g = SpatialProfile::Mode {
            index: ModeIndex::Single(1),
            scale: 1.0,
        };
        assert_eq!(source_coefficient(&g, &mode1(1)).unwrap(), 1.0);
        assert!((project_by_quadrature(&g, &mode1(1), 4096) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_profile_uses_quadrature() {
        let grid = GridSpec::new_1d(64, 4, 1.0).unwrap();
        let values = SpatialProfile::Parabola.sample(&grid);
        let g = SpatialProfile::Tabulated {
            nx: 64,
            ny: None,
            values,
        };
        let exact = source_coefficient(&SpatialProfile::Parabola, &mode1(1)).unwrap();
        let v = source_coefficient(&g, &mode1(1)).unwrap();
        // Piecewise-linear interpolation error is O(h^2).
        assert!((v - exact).abs() < 1e-4);
    }

    #[test]
    fn profile_dimension_mismatch_is_rejected() {
        assert!(source_coefficient(&SpatialProfile::Bubble, &mode1(1)).is_err());
    }

    #[test]
    fn kernel_vanishes_at_zero() {
        for eq in [Equation::Heat, Equation::Wave] {
            let v = kernel_value(
                &BoundaryPoint::Right,
                &SpatialProfile::Parabola,
                eq,
                0.0,
                50,
            )
            .unwrap();
            assert_eq!(v, 0.0);
        }
        assert!(kernel_value(
            &BoundaryPoint::Left,
            &SpatialProfile::Parabola,
            Equation::Heat,
            -1.0,
            5
        )
        .is_err());
    }

    #[test]
    fn heat_kernel_steady_state_is_one_twelfth() {
        let v = kernel_value(
            &BoundaryPoint::Left,
            &SpatialProfile::Parabola,
            Equation::Heat,
            5.0,
            200,
        )
        .unwrap();
        assert!((v - 1.0 / 12.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn wave_kernel_single_mode() {
        // g = phi_1 with g_1 = 1; sqrt(lambda_1) = pi, so G(1) = c_{0,1} * 2.
        let g = SpatialProfile::Mode {
            index: ModeIndex::Single(1),
            scale: 1.0,
        };
        let v = kernel_value(&BoundaryPoint::Left, &g, Equation::Wave, 1.0, 10).unwrap();
        assert!((v - 2.0 * SQRT_2 / PI).abs() < 1e-12);
    }

    #[test]
    fn heat_table_is_monotone_and_starts_at_first_step() {
        let grid = GridSpec::new_1d(64, 128, 1.0).unwrap();
        let t = kernel_table(
            &BoundaryPoint::Left,
            &SpatialProfile::Parabola,
            Equation::Heat,
            &grid,
            1e-8,
        )
        .unwrap();
        assert_eq!(t.len(), 128);
        assert_eq!(t.times[0], grid.ht());
        assert!(t.values[0] > 0.0);
        for w in t.values.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let wave = kernel_table(
            &BoundaryPoint::Left,
            &SpatialProfile::Parabola,
            Equation::Wave,
            &grid,
            1e-8,
        )
        .unwrap();
        assert_ne!(t.values, wave.values);
        assert_eq!(wave.times[0], grid.ht());
    }

    #[test]
    fn truncation_cap_is_reported() {
        let grid = GridSpec::new_1d(64, 16, 1.0).unwrap();
        let err = kernel_table_capped(
            &BoundaryPoint::Left,
            &SpatialProfile::Parabola,
            Equation::Wave,
            &grid,
            1e-14,
            64,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TruncationLimit { cap: 64, .. }));
    }

    #[test]
    fn square_kernel_table_converges() {
        let grid = GridSpec::new_2d(32, 32, 128, 1.0).unwrap();
        let z = BoundaryPoint::on_square(Side::West, 0.1875).unwrap();
        let t = kernel_table(&z, &SpatialProfile::Bubble, Equation::Heat, &grid, 1e-8).unwrap();
        assert!(t.truncation <= TRUNCATION_CAP);
        assert!(t.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn snapping_picks_nearest_interior_node() {
        let grid = GridSpec::new_2d(32, 32, 4, 1.0).unwrap();
        let z = BoundaryPoint::from_coords(&[0.0, 0.2]).unwrap();
        let (snapped, node) = z.snap(&grid).unwrap();
        assert_eq!(node, 6);
        assert_eq!(snapped.coords(), vec![0.0, 0.1875]);
        let z = BoundaryPoint::from_coords(&[1.0, 0.999]).unwrap();
        assert_eq!(z.snap(&grid).unwrap().1, 31);
    }
}
