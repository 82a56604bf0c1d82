//! Patch grids for transmit and receive surfaces, plus the near-field
//! feasibility report.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Transmit,
    Receive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layout {
    /// `n × n` grid.
    Square { n: usize },
    /// `nx × ny` grid.
    Rectangle { nx: usize, ny: usize },
    /// Grid points clipped to a disk. With a `count`, the closest `count`
    /// points are kept; with a `radius`, every point inside it is kept. When
    /// both are set the radius must host at least `count` points.
    Circle {
        count: Option<usize>,
        radius: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    pub layout: Layout,
    pub spacing: (f64, f64),
    pub center: Point,
    pub role: Role,
}

impl SurfaceSpec {
    pub fn square(n: usize, spacing: f64, role: Role) -> Self {
        SurfaceSpec {
            layout: Layout::Square { n },
            spacing: (spacing, spacing),
            center: Point::zeros(),
            role,
        }
    }

    pub fn rectangle(nx: usize, ny: usize, spacing: (f64, f64), role: Role) -> Self {
        SurfaceSpec {
            layout: Layout::Rectangle { nx, ny },
            spacing,
            center: Point::zeros(),
            role,
        }
    }

    /// Disk of the given radius filled with every grid point it contains.
    pub fn circle(radius: f64, spacing: f64, role: Role) -> Self {
        SurfaceSpec {
            layout: Layout::Circle {
                count: None,
                radius: Some(radius),
            },
            spacing: (spacing, spacing),
            center: Point::zeros(),
            role,
        }
    }

    /// Rectangular grid covering `lx × ly` with approximately `target`
    /// patches; spacing follows from the counts.
    pub fn covering(lx: f64, ly: f64, target: usize, role: Role) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0) || target == 0 {
            return Err(Error::Geometry(format!(
                "cannot cover {lx}x{ly} with {target} patches"
            )));
        }
        let nx = ((target as f64 * lx / ly).sqrt().round() as usize).max(1);
        let ny = ((target as f64 / nx as f64).round() as usize).max(1);
        Ok(SurfaceSpec::rectangle(
            nx,
            ny,
            (lx / nx as f64, ly / ny as f64),
            role,
        ))
    }

    pub fn with_center(mut self, center: Point) -> Self {
        self.center = center;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (dx, dy) = self.spacing;
        if !(dx > 0.0 && dx.is_finite() && dy > 0.0 && dy.is_finite()) {
            return Err(Error::Geometry(format!("spacing must be positive, got ({dx}, {dy})")));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::Geometry("center must be finite".into()));
        }
        match self.layout {
            Layout::Square { n } if n == 0 => Err(Error::Geometry("square layout needs n >= 1".into())),
            Layout::Rectangle { nx, ny } if nx == 0 || ny == 0 => {
                Err(Error::Geometry("rectangle layout needs nx, ny >= 1".into()))
            }
            Layout::Circle { count: None, radius: None } => {
                Err(Error::Geometry("circle layout needs a count or a radius".into()))
            }
            Layout::Circle { count: Some(0), .. } => {
                Err(Error::Geometry("circle layout needs at least one patch".into()))
            }
            Layout::Circle { radius: Some(r), .. } if !(r >= 0.0 && r.is_finite()) => {
                Err(Error::Geometry(format!("circle radius must be finite and nonnegative, got {r}")))
            }
            _ => Ok(()),
        }
    }

    /// Declared patch count; for a radius-only circle this requires a scan.
    pub fn count(&self) -> Result<usize> {
        match self.layout {
            Layout::Square { n } => Ok(n * n),
            Layout::Rectangle { nx, ny } => Ok(nx * ny),
            Layout::Circle { count: Some(n), .. } => Ok(n),
            Layout::Circle { .. } => Ok(patch_centers(self)?.len()),
        }
    }

    /// Patch area Δx·Δy.
    pub fn patch_area(&self) -> f64 {
        self.spacing.0 * self.spacing.1
    }
}

fn grid(nx: usize, ny: usize, dx: f64, dy: f64, c: &Point) -> Vec<Point> {
    let ox = (nx as f64 - 1.0) / 2.0;
    let oy = (ny as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(nx * ny);
    // x runs fastest
    for j in 0..ny {
        for i in 0..nx {
            out.push(Point::new(
                c.x + (i as f64 - ox) * dx,
                c.y + (j as f64 - oy) * dy,
                c.z,
            ));
        }
    }
    out
}

fn circle(count: Option<usize>, radius: Option<f64>, dx: f64, dy: f64, c: &Point) -> Result<Vec<Point>> {
    let half = match (count, radius) {
        (_, Some(r)) => ((r / dx.min(dy)).ceil() as i64) + 1,
        (Some(n), None) => {
            // a disk holding n points has radius about sqrt(n·dx·dy/π)
            let r = (n as f64 * dx * dy / std::f64::consts::PI).sqrt();
            ((r / dx.min(dy)).ceil() as i64) + 2
        }
        (None, None) => unreachable!("validated"),
    };
    let mut pts: Vec<(f64, f64, f64)> = Vec::new();
    for j in -half..=half {
        for i in -half..=half {
            let x = i as f64 * dx;
            let y = j as f64 * dy;
            let r = x.hypot(y);
            if radius.is_none_or(|rad| r <= rad * (1.0 + 1e-12)) {
                pts.push((r, y, x));
            }
        }
    }
    pts.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    if let Some(n) = count {
        if pts.len() < n {
            return Err(Error::Geometry(format!(
                "circle of radius {} holds {} patches at spacing ({dx}, {dy}), {n} requested",
                radius.unwrap_or(f64::NAN),
                pts.len()
            )));
        }
        pts.truncate(n);
    }
    Ok(pts
        .into_iter()
        .map(|(_, y, x)| Point::new(c.x + x, c.y + y, c.z))
        .collect())
}

/// One center per patch. Grid layouts are row-major with x running fastest;
/// circles are ordered closest-first.
pub fn patch_centers(spec: &SurfaceSpec) -> Result<Vec<Point>> {
    spec.validate()?;
    let (dx, dy) = spec.spacing;
    match spec.layout {
        Layout::Square { n } => Ok(grid(n, n, dx, dy, &spec.center)),
        Layout::Rectangle { nx, ny } => Ok(grid(nx, ny, dx, dy, &spec.center)),
        Layout::Circle { count, radius } => circle(count, radius, dx, dy, &spec.center),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    /// Receive surface; its center supplies the lateral offset.
    pub surface: SurfaceSpec,
    /// Separation ž from the transmit plane along ẑ.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub wavelength: f64,
    pub transmit: SurfaceSpec,
    pub users: Vec<User>,
    pub noise_power: f64,
    pub total_power: f64,
}

impl Scenario {
    pub fn new(wavelength: f64, transmit: SurfaceSpec) -> Self {
        Scenario {
            wavelength,
            transmit,
            users: Vec::new(),
            noise_power: 1.0,
            total_power: 1.0,
        }
    }

    pub fn with_user(mut self, surface: SurfaceSpec, distance: f64) -> Self {
        self.users.push(User { surface, distance });
        self
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::Geometry(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        self.transmit.validate()?;
        for (k, u) in self.users.iter().enumerate() {
            u.surface.validate()?;
            if !(u.distance > 0.0 && u.distance.is_finite()) {
                return Err(Error::Geometry(format!("user {} distance must be positive, got {}", k + 1, u.distance)));
            }
        }
        if !(self.noise_power > 0.0) || !(self.total_power > 0.0) {
            return Err(Error::Geometry("noise and total power must be positive".into()));
        }
        Ok(())
    }

    pub fn transmit_centers(&self) -> Result<Vec<Point>> {
        patch_centers(&self.transmit)
    }

    /// Receive patch centers of user `k`, lifted by its distance above the
    /// transmit plane.
    pub fn receive_centers(&self, k: usize) -> Result<Vec<Point>> {
        let u = self
            .users
            .get(k)
            .ok_or_else(|| Error::Dimension(format!("no user {k}")))?;
        let lift = self.transmit.center.z + u.distance - u.surface.center.z;
        Ok(patch_centers(&u.surface)?
            .into_iter()
            .map(|p| Point::new(p.x, p.y, p.z + lift))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserFieldReport {
    pub distance: f64,
    pub in_near_field: bool,
    pub patch_limit: f64,
    pub patch_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearFieldReport {
    pub nf_bound: f64,
    pub users: Vec<UserFieldReport>,
}

/// Square-grid near-field bound
/// `[4·Ns·Δs² + 4·Nr·Δr² + 8·√(Ns·Nr)·Δs·Δr] / λ`.
pub fn nf_bound(ns: usize, nr: usize, ds: f64, dr: f64, wavelength: f64) -> f64 {
    let (ns, nr) = (ns as f64, nr as f64);
    (4.0 * ns * ds * ds + 4.0 * nr * dr * dr + 8.0 * (ns * nr).sqrt() * ds * dr) / wavelength
}

/// Default factor used to read "much smaller than" in the patch-size limit.
pub const PATCH_LIMIT_FACTOR: f64 = 10.0;

pub fn validate_near_field(scenario: &Scenario) -> Result<NearFieldReport> {
    validate_near_field_with(scenario, PATCH_LIMIT_FACTOR)
}

pub fn validate_near_field_with(scenario: &Scenario, factor: f64) -> Result<NearFieldReport> {
    scenario.validate()?;
    let ns = scenario.transmit.count()?;
    let mut nr = 0;
    let mut dr: f64 = 0.0;
    for u in &scenario.users {
        nr += u.surface.count()?;
        dr = dr.max(u.surface.spacing.0);
    }
    let ds = scenario.transmit.spacing.0;
    let bound = nf_bound(ns, nr, ds, dr, scenario.wavelength);
    let users = scenario
        .users
        .iter()
        .map(|u| {
            let limit = 2.0 * (scenario.wavelength * u.distance).sqrt() / factor;
            UserFieldReport {
                distance: u.distance,
                in_near_field: u.distance <= bound,
                patch_limit: limit,
                patch_ok: ds <= limit,
            }
        })
        .collect();
    Ok(NearFieldReport { nf_bound: bound, users })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_is_symmetric() {
        let c = patch_centers(&SurfaceSpec::square(2, 0.4, Role::Transmit)).unwrap();
        let want = [(-0.2, -0.2), (0.2, -0.2), (-0.2, 0.2), (0.2, 0.2)];
        for (p, (x, y)) in c.iter().zip(want) {
            assert!((p.x - x).abs() < 1e-15 && (p.y - y).abs() < 1e-15 && p.z == 0.0);
        }
    }

    #[test]
    fn single_patch_sits_at_center() {
        let s = SurfaceSpec::square(1, 0.4, Role::Receive).with_center(Point::new(1.0, 2.0, 3.0));
        assert_eq!(patch_centers(&s).unwrap(), vec![Point::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn circle_matches_exhaustive_scan() {
        let r = (64.0 / std::f64::consts::PI).sqrt();
        let s = SurfaceSpec::circle(r, 0.5, Role::Transmit);
        let got = patch_centers(&s).unwrap().len();
        let mut scan = 0;
        for j in -40i32..=40 {
            for i in -40i32..=40 {
                let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
                if x * x + y * y <= r * r {
                    scan += 1;
                }
            }
        }
        assert_eq!(got, scan);
    }

    #[test]
    fn circle_count_too_large_for_radius() {
        let s = SurfaceSpec {
            layout: Layout::Circle { count: Some(50), radius: Some(1.0) },
            spacing: (0.5, 0.5),
            center: Point::zeros(),
            role: Role::Transmit,
        };
        assert!(matches!(patch_centers(&s), Err(Error::Geometry(_))));
    }

    #[test]
    fn circle_by_count_is_closest_first() {
        let s = SurfaceSpec {
            layout: Layout::Circle { count: Some(5), radius: None },
            spacing: (1.0, 1.0),
            center: Point::zeros(),
            role: Role::Transmit,
        };
        let c = patch_centers(&s).unwrap();
        assert_eq!(c[0], Point::zeros());
        assert!(c[1..].iter().all(|p| (p.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn nf_bound_hand_value() {
        // 4·16·0.16 + 4·16·0.16 + 8·16·0.16 = 10.24 + 10.24 + 20.48
        assert!((nf_bound(16, 16, 0.4, 0.4, 1.0) - 40.96).abs() < 1e-12);
        assert!(nf_bound(1, 1, 1e-9, 1e-9, 1.0) < 1e-15);
    }

    #[test]
    fn paper_scale_user_is_near_field() {
        let sc = Scenario::new(1.0, SurfaceSpec::square(15, 0.4, Role::Transmit))
            .with_user(SurfaceSpec::square(15, 0.4, Role::Receive), 3.0);
        let rep = validate_near_field(&sc).unwrap();
        assert!(rep.users[0].in_near_field);
    }

    #[test]
    fn tiny_surfaces_are_far_field() {
        let sc = Scenario::new(1.0, SurfaceSpec::square(1, 1e-6, Role::Transmit))
            .with_user(SurfaceSpec::square(1, 1e-6, Role::Receive), 0.5);
        let rep = validate_near_field(&sc).unwrap();
        assert!(!rep.users[0].in_near_field);
        assert!(rep.users[0].patch_ok);
    }

    #[test]
    fn covering_counts() {
        let s = SurfaceSpec::covering(16.0, 4.0, 256, Role::Transmit).unwrap();
        assert_eq!(s.layout, Layout::Rectangle { nx: 32, ny: 8 });
        assert!((s.spacing.0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SurfaceSpec::square(0, 0.4, Role::Transmit).validate().is_err());
        assert!(SurfaceSpec::square(2, -0.4, Role::Transmit).validate().is_err());
        let sc = Scenario::new(1.0, SurfaceSpec::square(2, 0.4, Role::Transmit))
            .with_user(SurfaceSpec::square(1, 0.4, Role::Receive), 0.0);
        assert!(sc.validate().is_err());
    }

    #[test]
    fn receive_centers_are_lifted() {
        let sc = Scenario::new(1.0, SurfaceSpec::square(2, 0.4, Role::Transmit)).with_user(
            SurfaceSpec::square(1, 0.4, Role::Receive).with_center(Point::new(0.3, -0.1, 0.0)),
            2.5,
        );
        assert_eq!(sc.receive_centers(0).unwrap(), vec![Point::new(0.3, -0.1, 2.5)]);
    }
}
