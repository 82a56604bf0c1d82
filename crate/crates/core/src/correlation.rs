//! Spatial correlation of transmit patches above a receive plane, computed
//! from the imaginary part of the free-space plus image Green's dyadic, and
//! the DoF metric.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{patch_centers, Point, SurfaceSpec};
use crate::green_channel::{assemble_from_points, Kernel};
use crate::numerics::{gram_rows, ComplexMatrix};
use crate::polarization::Polarization;

/// `Im{g·(c1 + c2·a²/r²)}` written out term by term; `a2` is the squared
/// coordinate difference along the axis of interest.
fn im_dyadic_term(r: f64, a2: f64, k0: f64) -> f64 {
    let (s, c) = (k0 * r).sin_cos();
    let fp = 4.0 * PI;
    s / (fp * r) + c / (fp * k0 * r * r) - s / (fp * k0 * k0 * r.powi(3)) - a2 * s / (fp * r.powi(3))
        - 3.0 * a2 * c / (fp * k0 * r.powi(4))
        + 3.0 * a2 * s / (fp * k0 * k0 * r.powi(5))
}

/// Small-separation value of the free-space term, `k0/(6π)`.
pub fn self_term(k0: f64) -> f64 {
    k0 / (6.0 * PI)
}

/// Imaginary part of the free-space xx entry at separation `d` with
/// x-offset `dx`. Below `1e-6/k0` the analytic limit is returned.
pub fn im_green0_xx(d: f64, dx: f64, k0: f64) -> Result<f64> {
    if !(d >= 0.0) || dx.abs() > d * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("need d >= |dx|, got d={d}, dx={dx}")));
    }
    if k0 * d < 1e-6 {
        return Ok(self_term(k0));
    }
    Ok(im_dyadic_term(d, dx * dx, k0))
}

/// Imaginary part of the image-source xx entry at offset `(dx, dy, dz)`.
/// The image dyad flips the tangential axes, so the whole entry changes sign.
pub fn im_green_image_xx(dx: f64, dy: f64, dz: f64, k0: f64) -> Result<f64> {
    let r = (dx * dx + dy * dy + dz * dz).sqrt();
    if !(r > 0.0) {
        return Err(Error::Domain("image distance must be positive".into()));
    }
    Ok(-im_dyadic_term(r, dx * dx, k0))
}

/// Pairwise correlation entry for one co-polarized component.
pub fn pair_correlation(pol: Polarization, dx: f64, dy: f64, dz: f64, k0: f64) -> f64 {
    let d = dx.hypot(dy);
    let r = (d * d + dz * dz).sqrt();
    let free = |a2: f64| {
        if k0 * d < 1e-6 {
            self_term(k0)
        } else {
            im_dyadic_term(d, a2, k0)
        }
    };
    match pol {
        Polarization::X => free(dx * dx) - im_dyadic_term(r, dx * dx, k0),
        Polarization::Y => free(dy * dy) - im_dyadic_term(r, dy * dy, k0),
        // coplanar patches have no ẑ offset; the image keeps the ẑẑ sign
        Polarization::Z => free(0.0) + im_dyadic_term(r, dz * dz, k0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub pol: Polarization,
    /// Unnormalized entries.
    pub raw: DMatrix<f64>,
    /// Common diagonal value `R(n, n)`.
    pub diagonal: f64,
    pub k0: f64,
}

impl CorrelationMatrix {
    /// Divided by the common diagonal, so `R(n, n) = 1`.
    pub fn normalized(&self) -> DMatrix<f64> {
        &self.raw / self.diagonal
    }

    /// Divided by the free-space self term `k0/(6π)`.
    pub fn reference_normalized(&self) -> DMatrix<f64> {
        &self.raw / self_term(self.k0)
    }

    pub fn size(&self) -> usize {
        self.raw.nrows()
    }
}

/// Correlation among the patches of `spec` with the image plane at offset `dz`.
pub fn transmit_correlation(
    spec: &SurfaceSpec,
    dz: f64,
    k0: f64,
    pol: Polarization,
) -> Result<CorrelationMatrix> {
    if !(dz > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {dz}")));
    }
    let pts = patch_centers(spec)?;
    Ok(correlation_of_points(&pts, dz, k0, pol))
}

pub fn correlation_of_points(pts: &[Point], dz: f64, k0: f64, pol: Polarization) -> CorrelationMatrix {
    let n = pts.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    // symmetric in the offsets, so the lower triangle mirrors exactly
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    let d = pts[b] - pts[a];
                    pair_correlation(pol, d.x, d.y, dz, k0)
                })
                .collect()
        })
        .collect();
    let raw = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let diagonal = pair_correlation(pol, 0.0, 0.0, dz, k0);
    CorrelationMatrix { pol, raw, diagonal, k0 }
}

/// `(tr R)² / ‖R‖_f²`.
pub fn dof(r: &DMatrix<f64>) -> Result<f64> {
    if r.nrows() != r.ncols() || r.is_empty() {
        return Err(Error::Dimension("DoF needs a nonempty square matrix".into()));
    }
    let f2: f64 = r.iter().map(|x| x * x).sum();
    if f2 == 0.0 {
        return Err(Error::Domain("DoF of a zero matrix".into()));
    }
    Ok(r.trace().powi(2) / f2)
}

/// DoF of a Hermitian matrix.
pub fn dof_hermitian(g: &ComplexMatrix) -> Result<f64> {
    if g.nrows() != g.ncols() || g.is_empty() {
        return Err(Error::Dimension("DoF needs a nonempty square matrix".into()));
    }
    let f2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    if f2 == 0.0 {
        return Err(Error::Domain("DoF of a zero matrix".into()));
    }
    Ok(g.trace().re.powi(2) / f2)
}

/// DoF of the point-dyadic link between two patch sets, from the smaller of
/// its two Gram matrices.
pub fn joint_dof(tx: &[Point], rx: &[Point], k0: f64) -> Result<f64> {
    let h = assemble_from_points(tx, &[rx.to_vec()], k0, Kernel::Point)?;
    let h = h.stacked();
    let g = if h.nrows() <= h.ncols() {
        gram_rows(h)
    } else {
        gram_rows(&h.adjoint())
    };
    dof_hermitian(&g)
}

/// Which correlation matrix feeds the DoF.
#[derive(Debug, Clone, PartialEq)]
pub enum DofMode {
    /// Transmit-side image correlation of one component.
    Transmit(Polarization),
    /// Full tri-polarized link to a receive surface.
    Joint(SurfaceSpec),
}

/// DoF of transmit surface `tx` for a user at distance `dz`.
pub fn surface_dof(tx: &SurfaceSpec, dz: f64, k0: f64, mode: &DofMode) -> Result<f64> {
    match mode {
        DofMode::Transmit(pol) => dof(&transmit_correlation(tx, dz, k0, *pol)?.raw),
        DofMode::Joint(rx) => {
            let t = patch_centers(tx)?;
            let lift = tx.center.z + dz - rx.center.z;
            let r: Vec<Point> = patch_centers(rx)?
                .into_iter()
                .map(|p| Point::new(p.x, p.y, p.z + lift))
                .collect();
            joint_dof(&t, &r, k0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Role;

    const K0: f64 = 2.0 * PI;

    #[test]
    fn half_wavelength_value() {
        let v = im_green0_xx(0.5, 0.0, K0).unwrap();
        assert!((v + 1.0 / (2.0 * PI * PI)).abs() < 1e-14);
    }

    #[test]
    fn image_on_axis_value() {
        let v = im_green_image_xx(0.0, 0.0, 0.5, K0).unwrap();
        assert!((v - 1.0 / (2.0 * PI * PI)).abs() < 1e-14);
        assert!(im_green_image_xx(0.0, 0.0, 1e3, K0).unwrap().abs() < 1e-6);
    }

    #[test]
    fn small_separation_limit() {
        for (dx, dy) in [(1e-4, 0.0), (0.0, 1e-4), (0.6e-4, 0.8e-4)] {
            let d: f64 = f64::hypot(dx, dy);
            let v = im_green0_xx(d, dx, K0).unwrap();
            assert!((v / self_term(K0) - 1.0).abs() < 1e-3);
        }
        assert_eq!(im_green0_xx(0.0, 0.0, K0).unwrap(), self_term(K0));
        assert!((self_term(K0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dof_examples() {
        assert!((dof(&DMatrix::identity(5, 5)).unwrap() - 5.0).abs() < 1e-12);
        assert!((dof(&DMatrix::from_element(4, 4, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, 1.0]));
        assert!((dof(&d).unwrap() - 16.0 / 6.0).abs() < 1e-12);
        assert!(dof(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn correlation_is_symmetric_with_unit_diagonal() {
        let s = SurfaceSpec::rectangle(5, 3, (0.2, 0.3), Role::Transmit);
        for pol in Polarization::ALL {
            let c = transmit_correlation(&s, 0.7, K0, pol).unwrap();
            assert_eq!(c.raw, c.raw.transpose());
            let n = c.normalized();
            for i in 0..n.nrows() {
                assert!((n[(i, i)] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn yy_is_xx_rotated() {
        let xx = pair_correlation(Polarization::X, 0.3, 0.1, 0.5, K0);
        let yy = pair_correlation(Polarization::Y, 0.1, 0.3, 0.5, K0);
        assert!((xx - yy).abs() < 1e-15);
    }

    #[test]
    fn joint_dof_is_bounded() {
        let t = patch_centers(&SurfaceSpec::square(3, 0.5, Role::Transmit)).unwrap();
        let r: Vec<Point> = patch_centers(&SurfaceSpec::square(2, 0.5, Role::Receive))
            .unwrap()
            .into_iter()
            .map(|p| p + Point::new(0.0, 0.0, 1.0))
            .collect();
        let d = joint_dof(&t, &r, K0).unwrap();
        assert!(d >= 1.0 && d <= 12.0);
    }
}
