//! Polarization-ellipse descriptors of a single patch and the analog phase
//! configuration carried alongside the channel.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Polarization axis. Block layouts everywhere follow the order x, y, z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    X,
    Y,
    Z,
}

impl Polarization {
    pub const ALL: [Polarization; 3] = [Polarization::X, Polarization::Y, Polarization::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> char {
        ['x', 'y', 'z'][self.index()]
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Field amplitudes and phases along x, y, z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizedExcitation {
    amplitudes: [f64; 3],
    phases: [f64; 3],
}

impl PolarizedExcitation {
    /// Amplitudes must lie in [0, 1]; phases are wrapped into [0, 2π).
    pub fn new(amplitudes: [f64; 3], phases: [f64; 3]) -> Result<Self> {
        if let Some(a) = amplitudes.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::Domain(format!("amplitude {a} outside [0, 1]")));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("phase must be finite".into()));
        }
        Ok(PolarizedExcitation {
            amplitudes,
            phases: phases.map(|p| p.rem_euclid(TAU)),
        })
    }

    pub fn amplitudes(&self) -> [f64; 3] {
        self.amplitudes
    }

    pub fn phases(&self) -> [f64; 3] {
        self.phases
    }

    /// Complex field vector `E_j e^{iθ_j}`.
    pub fn field(&self) -> Vector3<Complex64> {
        Vector3::from_fn(|j, _| Complex64::from_polar(self.amplitudes[j], self.phases[j]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationDescriptors {
    /// Normal of the polarization plane.
    pub normal: Vector3<f64>,
    pub spectral_density: Matrix3<Complex64>,
    /// `(Λ7, −Λ5, Λ2)`.
    pub pseudovector: Vector3<f64>,
}

pub fn polarization_descriptors(exc: &PolarizedExcitation) -> PolarizationDescriptors {
    let [ex, ey, ez] = exc.amplitudes;
    let [tx, ty, tz] = exc.phases;
    let normal = Vector3::new(
        -2.0 * ey * ez * (ty - tz).sin(),
        -2.0 * ez * ex * (tz - tx).sin(),
        -2.0 * ex * ey * (tx - ty).sin(),
    );

    let e = exc.amplitudes;
    let t = exc.phases;
    let spectral_density = Matrix3::from_fn(|i, j| {
        if i == j {
            Complex64::new(e[i] * e[i], 0.0)
        } else {
            Complex64::from_polar(e[i] * e[j], t[i] - t[j])
        }
    });

    let f = exc.field();
    let lam = |a: usize, b: usize| -2.0 * (f[a] * f[b].conj()).im;
    let pseudovector = Vector3::new(lam(1, 2), -lam(0, 2), lam(0, 1));

    PolarizationDescriptors {
        normal,
        spectral_density,
        pseudovector,
    }
}

/// Per-patch diagonal analog weights `E e^{iθ}` on the three polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    diagonals: Vec<[Complex64; 3]>,
}

impl PhaseConfig {
    pub fn new(diagonals: Vec<[Complex64; 3]>) -> Result<Self> {
        for (n, d) in diagonals.iter().enumerate() {
            if d.iter().any(|z| !(z.norm() <= 1.0 + 1e-12)) {
                return Err(Error::Domain(format!("patch {n}: phase weight modulus exceeds 1")));
            }
        }
        Ok(PhaseConfig { diagonals })
    }

    /// Identity weights on every patch.
    pub fn unit(patches: usize) -> Self {
        PhaseConfig {
            diagonals: vec![[Complex64::new(1.0, 0.0); 3]; patches],
        }
    }

    pub fn from_excitations(exc: &[PolarizedExcitation]) -> Self {
        PhaseConfig {
            diagonals: exc.iter().map(|e| e.field().into()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.diagonals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonals.is_empty()
    }

    /// The 3×3 block Φ_n; off-diagonal entries are exactly zero.
    pub fn block(&self, n: usize) -> Matrix3<Complex64> {
        let d = self.diagonals[n];
        Matrix3::from_diagonal(&Vector3::new(d[0], d[1], d[2]))
    }
}
