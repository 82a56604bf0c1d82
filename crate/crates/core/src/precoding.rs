//! Interference elimination: user-cluster polarization assignment, and the
//! two-layer precoder (Gaussian elimination across polarizations followed by
//! block diagonalization across users).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::green_channel::PolarizedChannel;
use crate::numerics::{frobenius, null_projector, pinv, svd_partition, vstack, ComplexMatrix};
use crate::polarization::Polarization::{self, X, Y, Z};

/// Users dealt to polarizations after sorting by distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    /// User indices (0-based) served on x, y, z, nearest first.
    pub subsets: [Vec<usize>; 3],
    pub users: usize,
}

impl ClusterAssignment {
    pub fn subset(&self, q: Polarization) -> &[usize] {
        &self.subsets[q.index()]
    }

    /// 0/1 indicator over users for polarization `q`.
    pub fn selection(&self, q: Polarization) -> Vec<u8> {
        let mut s = vec![0; self.users];
        for &k in self.subset(q) {
            s[k] = 1;
        }
        s
    }

    /// Row-selection matrix picking the rows of users in `q`'s subset out of
    /// an `Nr`-row block.
    pub fn selection_matrix(&self, q: Polarization, user_rows: &[usize]) -> ComplexMatrix {
        let offsets: Vec<usize> = user_rows
            .iter()
            .scan(0, |acc, r| {
                let o = *acc;
                *acc += r;
                Some(o)
            })
            .collect();
        let nr: usize = user_rows.iter().sum();
        let picked: usize = self.subset(q).iter().map(|&k| user_rows[k]).sum();
        let mut m = ComplexMatrix::zeros(picked, nr);
        let mut row = 0;
        for &k in self.subset(q) {
            for i in 0..user_rows[k] {
                m[(row, offsets[k] + i)] = Complex64::new(1.0, 0.0);
                row += 1;
            }
        }
        m
    }
}

/// Sorts users by distance (stable on ties) and deals them round-robin to
/// x, y, z.
pub fn cluster_users(distances: &[f64]) -> Result<ClusterAssignment> {
    let k = distances.len();
    if k == 0 || k % 3 != 0 {
        return Err(Error::Config(format!("K must be divisible by 3 (got K={k})")));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    let mut subsets: [Vec<usize>; 3] = Default::default();
    for (pos, &u) in order.iter().enumerate() {
        subsets[pos % 3].push(u);
    }
    Ok(ClusterAssignment { subsets, users: k })
}

/// Co-polarized rows of each subset, stacked in subset order.
pub fn cluster_subchannels(h: &PolarizedChannel, a: &ClusterAssignment) -> Result<[ComplexMatrix; 3]> {
    if a.users != h.users() {
        return Err(Error::Dimension(format!(
            "assignment covers {} users, channel has {}",
            a.users,
            h.users()
        )));
    }
    let stack = |q: Polarization| -> Result<ComplexMatrix> {
        let blocks: Vec<ComplexMatrix> = a.subset(q).iter().map(|&k| h.user_block(k, q, q)).collect();
        if blocks.is_empty() {
            return Ok(ComplexMatrix::zeros(0, h.ns()));
        }
        vstack(&blocks.iter().collect::<Vec<_>>())
    };
    Ok([stack(X)?, stack(Y)?, stack(Z)?])
}

/// First-layer precoders `(P_x, P_y, P_z)`, each `Ns × Ns`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstLayer {
    pub p: [ComplexMatrix; 3],
}

impl FirstLayer {
    /// `[P_x; P_y; P_z]`.
    pub fn stacked(&self) -> ComplexMatrix {
        vstack(&[&self.p[0], &self.p[1], &self.p[2]]).expect("equal widths")
    }
}

fn degenerate(block: &str, reason: impl Into<String>) -> Error {
    Error::Degenerate {
        block: block.to_string(),
        reason: reason.into(),
    }
}

fn require(block: &str, m: &ComplexMatrix, scale: f64, tol: f64) -> Result<()> {
    let n = frobenius(m);
    if !(n > tol * scale) {
        return Err(degenerate(
            block,
            format!("norm {n:.3e} is below {tol:.1e} of the reference {scale:.3e}"),
        ));
    }
    Ok(())
}

/// How the z row of the eliminated system is turned into a constraint on `P_z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Elimination {
    /// `C̄ = H_zx·B̄ + H_zy·Ā`, the z row after substituting the x and y rows.
    #[default]
    Reduced,
    /// `C̄ = −M⁺B̄ − Ā` with `M = H_zx⁺H_zy`. Matches the reduced form only
    /// when `H_zx` and `M` have full column rank, so it loses accuracy or
    /// degenerates once the blocks are wide.
    Literal,
}

/// Cancels cross-polarization interference so that `H^XP·[P_x; P_y; P_z] ≈ 0`.
///
/// With `Ā = H_xy⁺H_xz` and `B̄ = H_yx⁺H_yz`, the z layer is the weighted
/// projection `P_z = C̄⁰H_zz†(H_zz C̄⁰ H_zz†)⁺H_zz` with `C̄⁰ = I − C̄⁺C̄`, and
/// `P_y = −Ā·P_z`, `P_x = −B̄·P_z`.
pub fn gaussian_elim_precoder(h: &PolarizedChannel, tol: f64) -> Result<FirstLayer> {
    gaussian_elim_precoder_with(h, tol, Elimination::default())
}

pub fn gaussian_elim_precoder_with(h: &PolarizedChannel, tol: f64, mode: Elimination) -> Result<FirstLayer> {
    let scale = frobenius(h.stacked());
    if scale == 0.0 {
        return Err(degenerate("H", "zero channel"));
    }
    let hxy = h.block(X, Y);
    let hxz = h.block(X, Z);
    let hyx = h.block(Y, X);
    let hyz = h.block(Y, Z);
    let hzx = h.block(Z, X);
    let hzy = h.block(Z, Y);
    let hzz = h.block(Z, Z);
    require("H_xy", &hxy, scale, tol)?;
    require("H_yx", &hyx, scale, tol)?;
    require("H_zx", &hzx, scale, tol)?;
    require("H_zy", &hzy, scale, tol)?;

    let a_bar = pinv(&hxy, tol)? * &hxz;
    let b_bar = pinv(&hyx, tol)? * &hyz;
    let c_bar = match mode {
        Elimination::Reduced => &hzx * &b_bar + &hzy * &a_bar,
        Elimination::Literal => {
            let hzx_p = pinv(&hzx, tol)?;
            let m = &hzx_p * &hzy;
            require("H_zx^+ H_zy", &m, frobenius(&hzx_p) * frobenius(&hzy), tol)?;
            -(pinv(&m, tol)? * &b_bar) - &a_bar
        }
    };
    let c0 = null_projector(&c_bar, tol)?;
    require("C0", &c0, 1.0, tol)
        .map_err(|_| degenerate("C", "elimination matrix has a trivial null space"))?;

    let hzz_h = hzz.adjoint();
    let weight = &hzz * &c0 * &hzz_h;
    require("H_zz C0 H_zz^H", &weight, frobenius(&hzz).powi(2), tol)?;
    let pz = &c0 * &hzz_h * pinv(&weight, tol)? * &hzz;
    let py = -(&a_bar * &pz);
    let px = -(&b_bar * &pz);
    Ok(FirstLayer { p: [px, py, pz] })
}

/// Relative cancellation residual `‖H^XP·P‖ / (‖H^XP‖·‖P‖)`.
pub fn cross_polar_residual(h: &PolarizedChannel, first: &FirstLayer) -> f64 {
    let xp = h.cross_polar();
    let p = first.stacked();
    frobenius(&(&xp * &p)) / (frobenius(&xp) * frobenius(&p))
}

/// Block diagonalization of one polarization: `user_blocks[k]` is user `k`'s
/// channel, the result holds `F^(k)` with orthonormal columns and
/// `H^(k′)·F^(k) ≈ 0` for `k′ ≠ k`.
pub fn bd_precoder(pol: Polarization, user_blocks: &[ComplexMatrix], tol: f64) -> Result<Vec<ComplexMatrix>> {
    let Some(first) = user_blocks.first() else {
        return Ok(Vec::new());
    };
    let ns = first.ncols();
    if user_blocks.iter().any(|b| b.ncols() != ns) {
        return Err(Error::Dimension("user blocks must share the transmit dimension".into()));
    }
    let mut out = Vec::with_capacity(user_blocks.len());
    for (k, hk) in user_blocks.iter().enumerate() {
        let others: Vec<&ComplexMatrix> = user_blocks
            .iter()
            .enumerate()
            .filter(|(j, b)| *j != k && b.nrows() > 0)
            .map(|(_, b)| b)
            .collect();
        let v0 = if others.is_empty() {
            ComplexMatrix::identity(ns, ns)
        } else {
            let t = vstack(&others)?;
            if frobenius(&t) == 0.0 {
                ComplexMatrix::identity(ns, ns)
            } else {
                svd_partition(&t, tol)?.v_null
            }
        };
        if v0.ncols() == 0 {
            return Err(Error::CapacityExceeded {
                pol: pol.label(),
                user: k + 1,
            });
        }
        let hd = hk * &v0;
        let f = if hd.nrows() == 0 || frobenius(&hd) == 0.0 {
            ComplexMatrix::zeros(ns, 0)
        } else {
            &v0 * svd_partition(&hd, tol)?.v_row
        };
        out.push(f);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    UserCluster,
    TwoLayer,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::UserCluster => "uc",
            Scheme::TwoLayer => "two-layer",
        }
    }
}

/// Both precoder layers plus the served users of every polarization.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub scheme: Scheme,
    /// `None` for the user-cluster scheme, which has no first layer.
    pub first: Option<FirstLayer>,
    /// Users served on each polarization, in the order of `second`.
    pub served: [Vec<usize>; 3],
    /// Second-layer `F` per served user.
    pub second: [Vec<ComplexMatrix>; 3],
}

impl PrecoderSet {
    /// Transmit-side beams `P_q·F^(k)` (or `F^(k)` without a first layer).
    pub fn beams(&self, q: Polarization) -> Vec<ComplexMatrix> {
        let f = &self.second[q.index()];
        match &self.first {
            Some(first) => f.iter().map(|fk| &first.p[q.index()] * fk).collect(),
            None => f.clone(),
        }
    }

    /// Per served user, the precoded co-polarized channel `H_qq^(k)·P_q·F^(k)`.
    pub fn effective_blocks(&self, h: &PolarizedChannel, q: Polarization) -> Vec<ComplexMatrix> {
        self.served[q.index()]
            .iter()
            .zip(self.beams(q))
            .map(|(&k, w)| h.user_block(k, q, q) * w)
            .collect()
    }
}

/// Two-layer scheme: Gaussian elimination, then BD on every `H_qq·P_q`.
pub fn two_layer(h: &PolarizedChannel, tol: f64) -> Result<PrecoderSet> {
    two_layer_with(h, tol, Elimination::default())
}

pub fn two_layer_with(h: &PolarizedChannel, tol: f64, mode: Elimination) -> Result<PrecoderSet> {
    let first = gaussian_elim_precoder_with(h, tol, mode)?;
    let users: Vec<usize> = (0..h.users()).collect();
    let mut second: [Vec<ComplexMatrix>; 3] = Default::default();
    for q in Polarization::ALL {
        let blocks: Vec<ComplexMatrix> = users
            .iter()
            .map(|&k| h.user_block(k, q, q) * &first.p[q.index()])
            .collect();
        second[q.index()] = bd_precoder(q, &blocks, tol)?;
    }
    Ok(PrecoderSet {
        scheme: Scheme::TwoLayer,
        first: Some(first),
        served: [users.clone(), users.clone(), users],
        second,
    })
}

/// User-cluster scheme: each polarization serves its subset, with BD among
/// the users of that subset.
pub fn user_cluster(h: &PolarizedChannel, a: &ClusterAssignment, tol: f64) -> Result<PrecoderSet> {
    if a.users != h.users() {
        return Err(Error::Dimension("assignment does not match the channel".into()));
    }
    let mut second: [Vec<ComplexMatrix>; 3] = Default::default();
    for q in Polarization::ALL {
        let blocks: Vec<ComplexMatrix> = a.subset(q).iter().map(|&k| h.user_block(k, q, q)).collect();
        second[q.index()] = bd_precoder(q, &blocks, tol)?;
    }
    Ok(PrecoderSet {
        scheme: Scheme::UserCluster,
        first: None,
        served: a.subsets.clone(),
        second,
    })
}

/// Block-diagonal precoded channel `blkdiag(H_xx^F, H_yy^F, H_zz^F)`, where
/// `H_qq^F` stacks the served users' rows against all their streams.
pub fn effective_channel(h: &PolarizedChannel, pre: &PrecoderSet) -> ComplexMatrix {
    let parts: Vec<ComplexMatrix> = Polarization::ALL
        .iter()
        .map(|&q| {
            let beams = pre.beams(q);
            let served = &pre.served[q.index()];
            let rows: usize = served.iter().map(|&k| h.user_range(k).len()).sum();
            let cols: usize = beams.iter().map(|b| b.ncols()).sum();
            let mut m = ComplexMatrix::zeros(rows, cols);
            let mut r0 = 0;
            for &k in served {
                let hk = h.user_block(k, q, q);
                let mut c0 = 0;
                for w in &beams {
                    m.view_mut((r0, c0), (hk.nrows(), w.ncols())).copy_from(&(&hk * w));
                    c0 += w.ncols();
                }
                r0 += hk.nrows();
            }
            m
        })
        .collect();
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for p in &parts {
        out.view_mut((r0, c0), p.shape()).copy_from(p);
        r0 += p.nrows();
        c0 += p.ncols();
    }
    out
}

/// Largest relative inter-user leakage `‖H^(k′)F^(k)‖ / (‖H^(k′)‖·‖F^(k)‖)`
/// over all polarizations and ordered user pairs.
pub fn bd_leakage(h: &PolarizedChannel, pre: &PrecoderSet) -> f64 {
    let mut worst: f64 = 0.0;
    for q in Polarization::ALL {
        let served = &pre.served[q.index()];
        let second = &pre.second[q.index()];
        for i in 0..served.len() {
            for (j, &kp) in served.iter().enumerate() {
                if i == j || second[i].ncols() == 0 {
                    continue;
                }
                // leakage is measured against the layer BD actually saw
                let hkp = match &pre.first {
                    Some(f) => h.user_block(kp, q, q) * &f.p[q.index()],
                    None => h.user_block(kp, q, q),
                };
                let f = &second[i];
                let den = frobenius(&hkp) * frobenius(f);
                if den > 0.0 {
                    worst = worst.max(frobenius(&(&hkp * f)) / den);
                }
            }
        }
    }
    worst
}
