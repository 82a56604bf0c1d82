//! Fixtures shared by the benchmarks.

use hmimos_core::{Point, Role, Scenario, SurfaceSpec};

/// `side × side` transmit surface at 0.4λ serving `users` 2×2 receivers
/// spread along x at increasing distance.
pub fn multiuser(side: usize, users: usize) -> Scenario {
    (0..users).fold(
        Scenario::new(1.0, SurfaceSpec::square(side, 0.4, Role::Transmit)),
        |sc, k| {
            let rx = SurfaceSpec::square(2, 0.4, Role::Receive).with_center(Point::new(0.3 * k as f64 - 0.3, 0.2, 0.0));
            sc.with_user(rx, 1.0 + k as f64)
        },
    )
}

/// Deterministic gains in `(0, 1]`.
pub fn gains(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 / (1.0 + (i * 7 % 13) as f64)).collect()
}
