//! Link metrics: per-stream SINR, spectral efficiency, capacity and Gram
//! eigenvalue spectra.

use crate::error::{Error, Result};
use crate::green_channel::PolarizedChannel;
use crate::numerics::{column_basis, frobenius_sq, singular_values, svd_partition, ComplexMatrix, DEFAULT_TOL};
use crate::polarization::Polarization::{self, X, Y};
use crate::power::{PowerAllocation, StreamGains};
use crate::precoding::PrecoderSet;

/// `Σ_j log2(1 + Q·G_j·λ_j²/σ²)`.
pub fn spectral_efficiency(singulars: &[f64], q: f64, g: &[f64], sigma2: f64) -> f64 {
    singulars
        .iter()
        .zip(g)
        .map(|(s, gj)| (1.0 + q * gj * s * s / sigma2).log2())
        .sum()
}

/// Which singular values feed the spectral efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BeamNorm {
    /// Singular values of `H_qq^(k)·P_q·F^(k)` as composed.
    #[default]
    Literal,
    /// Beams `P_q·F^(k)` replaced by an orthonormal basis of their span, so a
    /// stream's gain no longer includes the first layer's amplification.
    Orthonormal,
}

/// Singular values of every served user's precoded co-polarized channel.
pub fn stream_singulars(h: &PolarizedChannel, pre: &PrecoderSet, norm: BeamNorm) -> Result<[Vec<Vec<f64>>; 3]> {
    let mut out: [Vec<Vec<f64>>; 3] = Default::default();
    for q in Polarization::ALL {
        let beams = pre.beams(q);
        let mut per_user = Vec::with_capacity(beams.len());
        for (&k, w) in pre.served[q.index()].iter().zip(&beams) {
            let hk = h.user_block(k, q, q);
            let w = match norm {
                BeamNorm::Literal => w.clone(),
                BeamNorm::Orthonormal => column_basis(w, DEFAULT_TOL)?,
            };
            let s = if w.ncols() == 0 { Vec::new() } else { singular_values(&(hk * w)) };
            per_user.push(s);
        }
        out[q.index()] = per_user;
    }
    Ok(out)
}

pub fn gains_from_singulars(s: &[Vec<Vec<f64>>; 3]) -> StreamGains {
    [0, 1, 2].map(|p| s[p].iter().map(|u| u.iter().map(|x| x * x).collect()).collect())
}

/// Total spectral efficiency `R_xx + R_yy + R_zz`.
pub fn total_spectral_efficiency(singulars: &[Vec<Vec<f64>>; 3], pa: &PowerAllocation, sigma2: f64) -> f64 {
    let mut total = 0.0;
    for p in 0..3 {
        for (s, g) in singulars[p].iter().zip(&pa.g[p]) {
            total += spectral_efficiency(s, pa.q[p], g, sigma2);
        }
    }
    total
}

/// Per-stream SINR of stream `i` of served user `slot` on polarization `p`.
/// Each user receives with the left singular vectors of its own precoded
/// channel; other users' streams on the same polarization leak through the
/// residual of the block diagonalization.
pub fn sinr(
    h: &PolarizedChannel,
    pre: &PrecoderSet,
    pa: &PowerAllocation,
    sigma2: f64,
    p: Polarization,
    slot: usize,
    i: usize,
) -> Result<f64> {
    let served = &pre.served[p.index()];
    let beams = pre.beams(p);
    let k = *served
        .get(slot)
        .ok_or_else(|| Error::Dimension(format!("no served user {slot} on {p}")))?;
    let hk = h.user_block(k, p, p);
    let own = &hk * &beams[slot];
    if own.ncols() == 0 {
        return Err(Error::Dimension(format!("user {slot} on {p} has no streams")));
    }
    let part = svd_partition(&own, 0.0)?;
    if i >= part.u.ncols() {
        return Err(Error::Dimension(format!("stream {i} out of range")));
    }
    let qp = pa.q[p.index()];
    let g = &pa.g[p.index()];
    let signal = qp * g[slot].get(i).copied().unwrap_or(0.0) * part.singulars[i].powi(2);
    let u = part.u.column(i);
    let mut interference = 0.0;
    for (j, w) in beams.iter().enumerate() {
        if j == slot || w.ncols() == 0 {
            continue;
        }
        // the other user's streams run along its own right singular vectors
        let hj = h.user_block(served[j], p, p);
        let vj = svd_partition(&(&hj * w), 0.0)?.v_row;
        let leak = (u.adjoint() * &hk * w * vj).transpose();
        for (n, z) in leak.iter().enumerate() {
            interference += g[j].get(n).copied().unwrap_or(0.0) * z.norm_sqr();
        }
    }
    Ok(signal / (qp * interference + sigma2))
}

/// Channel normalization used before the log-det.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapacityNorm {
    /// Unit mean entry power, `snr` split over the transmit columns.
    #[default]
    PerEntry,
    /// `‖H̄‖_f² = rows`, `snr` split over `streams`.
    PerRow { streams: usize },
}

/// `log2 det(I + c·H̄H̄†)` under the chosen normalization.
pub fn capacity(h: &ComplexMatrix, snr: f64, norm: CapacityNorm) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::Domain(format!("snr must be positive, got {snr}")));
    }
    let e = frobenius_sq(h);
    if e == 0.0 {
        return Err(Error::Domain("capacity of a zero channel".into()));
    }
    let (rows, cols) = h.shape();
    let (target, streams) = match norm {
        CapacityNorm::PerEntry => ((rows * cols) as f64, cols),
        CapacityNorm::PerRow { streams } => (rows as f64, streams),
    };
    if streams == 0 {
        return Err(Error::Domain("stream count must be positive".into()));
    }
    let c = snr / streams as f64 * target / e;
    Ok(singular_values(h).iter().map(|s| (1.0 + c * s * s).log2()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationCapacities {
    pub tri: f64,
    pub dual: f64,
    pub single: f64,
}

/// Capacities of the full tri-polarized channel, its xy sub-channel and `H_xx`.
pub fn polarization_capacities(h: &PolarizedChannel, snr: f64, norm: CapacityNorm) -> Result<PolarizationCapacities> {
    let with = |streams: usize| match norm {
        CapacityNorm::PerEntry => CapacityNorm::PerEntry,
        CapacityNorm::PerRow { .. } => CapacityNorm::PerRow { streams },
    };
    Ok(PolarizationCapacities {
        tri: capacity(h.stacked(), snr, with(3))?,
        dual: capacity(&h.restrict(&[X, Y]), snr, with(2))?,
        single: capacity(&h.block(X, X), snr, with(1))?,
    })
}

/// Eigenvalues of `H†H`, descending, one per column.
pub fn eigen_spectrum(h: &ComplexMatrix) -> Result<Vec<f64>> {
    if h.is_empty() {
        return Err(Error::Dimension("eigen spectrum of an empty block".into()));
    }
    let mut ev: Vec<f64> = singular_values(h).iter().map(|s| s * s).collect();
    ev.resize(h.ncols(), 0.0);
    Ok(ev)
}

/// Eigenvalues above `fraction` of the largest.
pub fn significant_count(eigs: &[f64], fraction: f64) -> usize {
    match eigs.first() {
        Some(&m) if m > 0.0 => eigs.iter().filter(|&&e| e > fraction * m).count(),
        _ => 0,
    }
}

pub const SIGNIFICANCE: f64 = 0.01;

/// `snr` in dB to noise power for a unit budget.
pub fn noise_for_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}
