//! Near-field polarized channel synthesis from the dyadic Green's function.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::ops::Range;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point, Scenario};
use crate::numerics::ComplexMatrix;
use crate::polarization::Polarization;
use crate::report::fmt_f64;

/// 3×3 coupling between transmit axis (column) and receive axis (row).
pub type DyadicBlock = Matrix3<Complex64>;

fn separation(r: &Point, rp: &Point) -> Result<(f64, Point)> {
    let d = r - rp;
    let dist = d.norm();
    if dist == 0.0 || !dist.is_finite() {
        return Err(Error::Singularity);
    }
    Ok((dist, d / dist))
}

/// `e^{ik0 R} / (4πR)` with `R = |r − r′|`.
pub fn scalar_green(r: &Point, rp: &Point, k0: f64) -> Result<Complex64> {
    let (dist, _) = separation(r, rp)?;
    Ok(Complex64::from_polar(1.0 / (4.0 * PI * dist), k0 * dist))
}

/// `(c1, c2)` with `c1 = 1 + i/u − 1/u²`, `c2 = 3/u² − 3i/u − 1`, `u = k0R`.
pub fn radial_coeffs(k0r: f64) -> Result<(Complex64, Complex64)> {
    if !(k0r > 0.0 && k0r.is_finite()) {
        return Err(Error::Domain(format!("k0R must be positive, got {k0r}")));
    }
    let inv = 1.0 / k0r;
    let inv2 = inv * inv;
    let c1 = Complex64::new(1.0 - inv2, inv);
    let c2 = Complex64::new(3.0 * inv2 - 1.0, -3.0 * inv);
    Ok((c1, c2))
}

/// `c1·I + c2·r̂r̂`.
fn radial_dyad(c1: Complex64, c2: Complex64, u: &Point) -> DyadicBlock {
    DyadicBlock::from_fn(|p, q| {
        let diag = if p == q { c1 } else { Complex64::new(0.0, 0.0) };
        diag + c2 * (u[p] * u[q])
    })
}

/// Point-to-point dyadic Green's function `(c1 I + c2 r̂r̂)·g`.
pub fn dyadic_green(r: &Point, rp: &Point, k0: f64) -> Result<DyadicBlock> {
    let (dist, u) = separation(r, rp)?;
    let (c1, c2) = radial_coeffs(k0 * dist)?;
    let g = Complex64::from_polar(1.0 / (4.0 * PI * dist), k0 * dist);
    Ok(radial_dyad(c1, c2, &u) * g)
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        // series keeps the relative error below machine epsilon here
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Patch-integrated block between a transmit patch with spacings
/// `tx_spacing = (Δx, Δy)` and a receive patch of area `rx_area`.
pub fn channel_block(
    tx_center: &Point,
    rx_center: &Point,
    tx_spacing: (f64, f64),
    rx_area: f64,
    k0: f64,
) -> Result<DyadicBlock> {
    let (dist, u) = separation(rx_center, tx_center)?;
    if !(tx_spacing.0 > 0.0 && tx_spacing.1 > 0.0 && rx_area > 0.0) {
        return Err(Error::Domain("patch areas must be positive".into()));
    }
    let (c1, c2) = radial_coeffs(k0 * dist)?;
    let dx = rx_center.x - tx_center.x;
    let dy = rx_center.y - tx_center.y;
    let aperture = sinc(k0 * dx * tx_spacing.0 / (2.0 * dist)) * sinc(k0 * dy * tx_spacing.1 / (2.0 * dist));
    let scale = tx_spacing.0 * tx_spacing.1 * rx_area * aperture / (4.0 * PI * dist);
    let g = Complex64::from_polar(scale, k0 * dist);
    Ok(radial_dyad(c1, c2, &u) * g)
}

/// How a patch pair is turned into a 3×3 block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// Patch-integrated block with aperture factors.
    Patch { tx_spacing: (f64, f64), rx_area: f64 },
    /// Bare point dyadic.
    Point,
}

/// Tri-polarized channel, stored stacked and polarization-major: row
/// `p·Nr + m` is receive patch `m` (users concatenated) on axis `p`, column
/// `q·Ns + n` is transmit patch `n` on axis `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedChannel {
    stacked: ComplexMatrix,
    ns: usize,
    user_offsets: Vec<usize>,
}

impl PolarizedChannel {
    /// Wraps an existing stacked matrix. `user_rows[k]` is user `k`'s patch count.
    pub fn from_stacked(stacked: ComplexMatrix, ns: usize, user_rows: &[usize]) -> Result<Self> {
        let nr: usize = user_rows.iter().sum();
        if stacked.shape() != (3 * nr, 3 * ns) || ns == 0 || nr == 0 {
            return Err(Error::Dimension(format!(
                "stacked channel is {:?}, expected ({}, {})",
                stacked.shape(),
                3 * nr,
                3 * ns
            )));
        }
        crate::numerics::ensure_finite(&stacked)?;
        let mut user_offsets = vec![0];
        for r in user_rows {
            user_offsets.push(user_offsets.last().unwrap() + r);
        }
        Ok(PolarizedChannel {
            stacked,
            ns,
            user_offsets,
        })
    }

    pub fn stacked(&self) -> &ComplexMatrix {
        &self.stacked
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    /// Total receive patches over all users.
    pub fn nr(&self) -> usize {
        *self.user_offsets.last().unwrap()
    }

    pub fn users(&self) -> usize {
        self.user_offsets.len() - 1
    }

    /// Row range of user `k` inside any `Nr`-row block.
    pub fn user_range(&self, k: usize) -> Range<usize> {
        self.user_offsets[k]..self.user_offsets[k + 1]
    }

    pub fn user_rows(&self) -> Vec<usize> {
        (0..self.users()).map(|k| self.user_range(k).len()).collect()
    }

    /// `H_pq` over all users (Nr × Ns).
    pub fn block(&self, p: Polarization, q: Polarization) -> ComplexMatrix {
        let nr = self.nr();
        self.stacked
            .view((p.index() * nr, q.index() * self.ns), (nr, self.ns))
            .into_owned()
    }

    /// User `k`'s rows of `H_pq`.
    pub fn user_block(&self, k: usize, p: Polarization, q: Polarization) -> ComplexMatrix {
        let r = self.user_range(k);
        self.stacked
            .view(
                (p.index() * self.nr() + r.start, q.index() * self.ns),
                (r.len(), self.ns),
            )
            .into_owned()
    }

    /// User `k`'s 3N̄r×3Ns channel in the same polarization-major order.
    pub fn user_channel(&self, k: usize) -> ComplexMatrix {
        let r = self.user_range(k);
        let m = r.len();
        let mut out = ComplexMatrix::zeros(3 * m, 3 * self.ns);
        for p in 0..3 {
            out.rows_mut(p * m, m)
                .copy_from(&self.stacked.rows(p * self.nr() + r.start, m));
        }
        out
    }

    /// Stacked channel with the three co-polarized blocks zeroed.
    pub fn cross_polar(&self) -> ComplexMatrix {
        let mut h = self.stacked.clone();
        let (nr, ns) = (self.nr(), self.ns);
        for p in 0..3 {
            h.view_mut((p * nr, p * ns), (nr, ns)).fill(Complex64::new(0.0, 0.0));
        }
        h
    }

    /// Sub-channel restricted to the given axes, on both ends.
    pub fn restrict(&self, pols: &[Polarization]) -> ComplexMatrix {
        let (nr, ns) = (self.nr(), self.ns);
        let mut out = ComplexMatrix::zeros(pols.len() * nr, pols.len() * ns);
        for (a, p) in pols.iter().enumerate() {
            for (b, q) in pols.iter().enumerate() {
                out.view_mut((a * nr, b * ns), (nr, ns))
                    .copy_from(&self.stacked.view((p.index() * nr, q.index() * ns), (nr, ns)));
            }
        }
        out
    }

    /// Same channel scaled by a real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        PolarizedChannel {
            stacked: &self.stacked * Complex64::new(factor, 0.0),
            ns: self.ns,
            user_offsets: self.user_offsets.clone(),
        }
    }

    /// Rescaled so that the mean squared entry magnitude is one.
    pub fn unit_entry_power(&self) -> Self {
        let e = crate::numerics::frobenius_sq(&self.stacked);
        if e == 0.0 {
            return self.clone();
        }
        self.scaled((self.stacked.len() as f64 / e).sqrt())
    }

    /// Long-format CSV: one line per entry with its block coordinates.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "row,col,rx_pol,tx_pol,user,rx_patch,tx_patch,re,im")?;
        let (nr, ns) = (self.nr(), self.ns);
        for row in 0..3 * nr {
            let (p, m) = (row / nr, row % nr);
            let user = (0..self.users()).find(|&k| self.user_range(k).contains(&m)).unwrap();
            let local = m - self.user_offsets[user];
            for col in 0..3 * ns {
                let (q, n) = (col / ns, col % ns);
                let z = self.stacked[(row, col)];
                writeln!(
                    w,
                    "{row},{col},{},{},{},{local},{n},{},{}",
                    Polarization::ALL[p],
                    Polarization::ALL[q],
                    user + 1,
                    fmt_f64(z.re),
                    fmt_f64(z.im)
                )?;
            }
        }
        Ok(())
    }
}

/// Builds the stacked channel between transmit points and per-user receive
/// point sets. Receive rows are evaluated in parallel and scattered in a
/// fixed order, so the result does not depend on scheduling.
pub fn assemble_from_points(
    tx: &[Point],
    rx_users: &[Vec<Point>],
    k0: f64,
    kernel: Kernel,
) -> Result<PolarizedChannel> {
    let rx: Vec<&Point> = rx_users.iter().flatten().collect();
    let (nr, ns) = (rx.len(), tx.len());
    if nr == 0 || ns == 0 {
        return Err(Error::Dimension("channel needs at least one patch on each side".into()));
    }
    let rows: Vec<Vec<DyadicBlock>> = rx
        .par_iter()
        .map(|r| {
            tx.iter()
                .map(|t| match kernel {
                    Kernel::Patch { tx_spacing, rx_area } => channel_block(t, r, tx_spacing, rx_area, k0),
                    Kernel::Point => dyadic_green(r, t, k0),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut h = ComplexMatrix::zeros(3 * nr, 3 * ns);
    for (m, row) in rows.iter().enumerate() {
        for (n, b) in row.iter().enumerate() {
            for p in 0..3 {
                for q in 0..3 {
                    h[(p * nr + m, q * ns + n)] = b[(p, q)];
                }
            }
        }
    }
    let sizes: Vec<usize> = rx_users.iter().map(|u| u.len()).collect();
    PolarizedChannel::from_stacked(h, ns, &sizes)
}

/// Patch-integrated channel of a scenario. Every user's receive patches use
/// that user's patch area.
pub fn assemble_channel(scenario: &Scenario) -> Result<PolarizedChannel> {
    scenario.validate()?;
    if scenario.users.is_empty() {
        return Err(Error::Config("scenario has no users".into()));
    }
    let k0 = scenario.wavenumber();
    let tx = scenario.transmit_centers()?;
    let areas: Vec<f64> = scenario.users.iter().map(|u| u.surface.patch_area()).collect();
    if areas.iter().all(|a| *a == areas[0]) {
        let rx: Vec<Vec<Point>> = (0..scenario.users.len())
            .map(|k| scenario.receive_centers(k))
            .collect::<Result<_>>()?;
        return assemble_from_points(
            &tx,
            &rx,
            k0,
            Kernel::Patch {
                tx_spacing: scenario.transmit.spacing,
                rx_area: areas[0],
            },
        );
    }
    // mixed receive areas: build per user, then interleave the rows
    let parts: Vec<PolarizedChannel> = (0..scenario.users.len())
        .map(|k| {
            assemble_from_points(
                &tx,
                &[scenario.receive_centers(k)?],
                k0,
                Kernel::Patch {
                    tx_spacing: scenario.transmit.spacing,
                    rx_area: areas[k],
                },
            )
        })
        .collect::<Result<_>>()?;
    let sizes: Vec<usize> = parts.iter().map(|c| c.nr()).collect();
    let nr: usize = sizes.iter().sum();
    let ns = tx.len();
    let mut h = ComplexMatrix::zeros(3 * nr, 3 * ns);
    let mut off = 0;
    for part in &parts {
        let m = part.nr();
        for p in 0..3 {
            h.rows_mut(p * nr + off, m).copy_from(&part.stacked.rows(p * m, m));
        }
        off += m;
    }
    PolarizedChannel::from_stacked(h, ns, &sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Role, SurfaceSpec};

    const K0: f64 = 2.0 * PI;
    const I: Complex64 = Complex64::new(0.0, 1.0);

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn scalar_green_at_one_wavelength() {
        let g = scalar_green(&Point::new(0.0, 0.0, 1.0), &Point::zeros(), K0).unwrap();
        assert!((g.re - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!(g.im.abs() < 1e-15);
        let h = scalar_green(&Point::new(0.5, 0.0, 0.0), &Point::zeros(), K0).unwrap();
        assert!((h.norm() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((h.arg().abs() - PI).abs() < 1e-12);
        let far = scalar_green(&Point::new(0.0, 2.0, 0.0), &Point::zeros(), K0).unwrap();
        let near = scalar_green(&Point::new(0.0, 1.0, 0.0), &Point::zeros(), K0).unwrap();
        assert!((far.norm() * 2.0 - near.norm()).abs() < 1e-15);
    }

    #[test]
    fn coincident_points_are_singular() {
        assert_eq!(scalar_green(&Point::zeros(), &Point::zeros(), K0), Err(Error::Singularity));
        assert!(dyadic_green(&Point::zeros(), &Point::zeros(), K0).is_err());
    }

    #[test]
    fn radial_coeff_values() {
        let (c1, c2) = radial_coeffs(1.0).unwrap();
        assert!(close(c1, I, 1e-15));
        assert!(close(c2, Complex64::new(2.0, -3.0), 1e-15));
        let (c1, c2) = radial_coeffs(1e6).unwrap();
        assert!((c1 - 1.0).norm() < 1e-5 && (c2 + 1.0).norm() < 1e-5);
        let (c1, c2) = radial_coeffs(2.0).unwrap();
        assert!(close(c1 + c2, Complex64::new(0.5, -1.0), 1e-15));
        assert!(radial_coeffs(0.0).is_err());
        assert!(radial_coeffs(-1.0).is_err());
    }

    #[test]
    fn boresight_block_is_diagonal() {
        let z = 1.3;
        let b = channel_block(&Point::zeros(), &Point::new(0.0, 0.0, z), (0.4, 0.4), 0.16, K0).unwrap();
        let (c1, c2) = radial_coeffs(K0 * z).unwrap();
        let g = Complex64::from_polar(0.16 * 0.16 / (4.0 * PI * z), K0 * z);
        for p in 0..3 {
            for q in 0..3 {
                let want = if p != q {
                    Complex64::new(0.0, 0.0)
                } else if p == 2 {
                    g * (c1 + c2)
                } else {
                    g * c1
                };
                assert!((b[(p, q)] - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn sinc_at_zero() {
        assert_eq!(sinc(0.0), 1.0);
        assert!((sinc(1e-9) - 1.0).abs() < 1e-16);
        assert!((sinc(PI)).abs() < 1e-15);
    }

    #[test]
    fn dyadic_reciprocity_and_trace() {
        let a = Point::new(0.1, -0.7, 0.3);
        let b = Point::new(1.2, 0.4, 2.0);
        let g1 = dyadic_green(&a, &b, K0).unwrap();
        let g2 = dyadic_green(&b, &a, K0).unwrap();
        assert!((g1 - g2).norm() < 1e-15);
        let r = (a - b).norm();
        let (c1, c2) = radial_coeffs(K0 * r).unwrap();
        let g = scalar_green(&a, &b, K0).unwrap();
        assert!(close(g1.trace(), (c1 * 3.0 + c2) * g, 1e-13));
        let up = dyadic_green(&Point::new(0.0, 0.0, 2.0), &Point::zeros(), K0).unwrap();
        for p in 0..3 {
            for q in 0..3 {
                if p != q {
                    assert_eq!(up[(p, q)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn stacked_shape_and_views() {
        let sc = Scenario::new(1.0, SurfaceSpec::square(4, 0.4, Role::Transmit))
            .with_user(
                SurfaceSpec::square(2, 0.4, Role::Receive).with_center(Point::new(0.3, 0.1, 0.0)),
                1.0,
            )
            .with_user(
                SurfaceSpec::square(2, 0.4, Role::Receive).with_center(Point::new(-0.5, 0.2, 0.0)),
                2.0,
            );
        let h = assemble_channel(&sc).unwrap();
        assert_eq!(h.stacked().shape(), (24, 48));
        assert_eq!(h.users(), 2);
        let hxz = h.block(Polarization::X, Polarization::Z);
        let u2 = h.user_block(1, Polarization::X, Polarization::Z);
        assert_eq!(hxz.rows(4, 4).into_owned(), u2);
        let uc = h.user_channel(1);
        assert_eq!(uc.view((8, 0), (4, 16)).into_owned(), h.user_block(1, Polarization::Z, Polarization::X));
        let xp = h.cross_polar();
        assert!(xp.view((8, 16), (8, 16)).iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn boresight_single_pair_has_zero_cross_blocks() {
        let sc = Scenario::new(1.0, SurfaceSpec::square(1, 0.4, Role::Transmit))
            .with_user(SurfaceSpec::square(1, 0.4, Role::Receive), 1.0);
        let h = assemble_channel(&sc).unwrap();
        use Polarization::*;
        for (p, q) in [(X, Y), (X, Z), (Y, Z), (Y, X), (Z, X), (Z, Y)] {
            assert_eq!(h.block(p, q)[(0, 0)], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn mixed_areas_keep_layout() {
        let sc = Scenario::new(1.0, SurfaceSpec::square(2, 0.4, Role::Transmit))
            .with_user(SurfaceSpec::square(1, 0.4, Role::Receive), 1.0)
            .with_user(SurfaceSpec::square(2, 0.2, Role::Receive), 2.0);
        let h = assemble_channel(&sc).unwrap();
        assert_eq!(h.user_rows(), vec![1, 4]);
        let alone = assemble_channel(
            &Scenario::new(1.0, SurfaceSpec::square(2, 0.4, Role::Transmit))
                .with_user(SurfaceSpec::square(2, 0.2, Role::Receive), 2.0),
        )
        .unwrap();
        assert_eq!(h.user_channel(1), alone.user_channel(0));
    }
}
