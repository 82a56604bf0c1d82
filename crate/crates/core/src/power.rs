//! Power allocation across polarizations and streams.

use crate::error::{Error, Result};
use crate::polarization::Polarization;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    pub powers: Vec<f64>,
    /// Water level ε.
    pub level: f64,
}

/// `powers_i = (ε − σ²/gains_i)^+` with `Σ powers = budget`. Zero gains
/// receive nothing. The level comes from the exact active-set search over
/// gains sorted in descending order.
pub fn water_fill(gains: &[f64], budget: f64, sigma2: f64) -> Result<WaterFill> {
    if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::Domain("gains must be finite and nonnegative".into()));
    }
    if !(budget > 0.0 && budget.is_finite()) || !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!(
            "budget and noise must be positive, got {budget} and {sigma2}"
        )));
    }
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::Domain("water filling needs at least one positive gain".into()));
    }
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));

    let floors: Vec<f64> = order.iter().map(|&i| sigma2 / gains[i]).collect();
    let mut acc = 0.0;
    let mut level = budget + floors[0];
    for (m, floor) in floors.iter().enumerate() {
        acc += floor;
        let candidate = (budget + acc) / (m + 1) as f64;
        if candidate > *floor {
            level = candidate;
        } else {
            break;
        }
    }
    let powers = gains
        .iter()
        .map(|&g| if g > 0.0 { (level - sigma2 / g).max(0.0) } else { 0.0 })
        .collect();
    Ok(WaterFill { powers, level })
}

/// Squared singular values of the precoded streams, per polarization and
/// per served user.
pub type StreamGains = [Vec<Vec<f64>>; 3];

/// Whether the second layer fills one pool per polarization or one per user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecondLayer {
    #[default]
    Pooled,
    /// Each served user gets an equal share of its polarization's budget.
    PerUser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaScheme {
    Pa1,
    Pa2,
    Pa3,
}

impl PaScheme {
    pub fn label(self) -> &'static str {
        match self {
            PaScheme::Pa1 => "pa1",
            PaScheme::Pa2 => "pa2",
            PaScheme::Pa3 => "pa3",
        }
    }
}

/// `Q` holds the per-polarization budgets; `G` the per-stream fractions of
/// that budget (summing to one on every polarization with nonzero `Q`).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub q: [f64; 3],
    pub g: [Vec<Vec<f64>>; 3],
    /// First-layer water level, when water filling chose `Q`.
    pub first_level: Option<f64>,
}

impl PowerAllocation {
    /// Absolute power `Q_p·G` of every stream of polarization `p`, per user.
    pub fn stream_powers(&self, p: Polarization) -> Vec<Vec<f64>> {
        let q = self.q[p.index()];
        self.g[p.index()]
            .iter()
            .map(|u| u.iter().map(|g| q * g).collect())
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.q.iter().sum()
    }
}

fn energies(gains: &StreamGains) -> [f64; 3] {
    let e = |p: usize| gains[p].iter().flatten().sum::<f64>();
    [e(0), e(1), e(2)]
}

fn zeros_like(gains: &StreamGains) -> [Vec<Vec<f64>>; 3] {
    let z = |p: usize| gains[p].iter().map(|u| vec![0.0; u.len()]).collect();
    [z(0), z(1), z(2)]
}

/// Second-layer fractions for one polarization given its budget `q`.
fn second_layer(users: &[Vec<f64>], q: f64, sigma2: f64, mode: SecondLayer) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = users.iter().map(|u| vec![0.0; u.len()]).collect();
    if q <= 0.0 {
        return Ok(out);
    }
    match mode {
        SecondLayer::Pooled => {
            let flat: Vec<f64> = users.iter().flatten().copied().collect();
            if flat.iter().all(|g| *g == 0.0) {
                return Ok(out);
            }
            let wf = water_fill(&flat, 1.0, sigma2 / q)?;
            let mut it = wf.powers.into_iter();
            for u in out.iter_mut() {
                for g in u.iter_mut() {
                    *g = it.next().unwrap();
                }
            }
        }
        SecondLayer::PerUser => {
            let active: Vec<usize> = (0..users.len())
                .filter(|&k| users[k].iter().any(|g| *g > 0.0))
                .collect();
            let share = 1.0 / active.len().max(1) as f64;
            for &k in &active {
                // budget of this user is q·share
                let wf = water_fill(&users[k], share, sigma2 / q)?;
                out[k] = wf.powers;
            }
        }
    }
    Ok(out)
}

/// Whole budget on the polarization with the largest precoded channel
/// energy (ties resolve to x, then y, then z).
pub fn pa1_select(gains: &StreamGains, budget: f64, sigma2: f64, mode: SecondLayer) -> Result<PowerAllocation> {
    let e = energies(gains);
    if e.iter().all(|v| *v == 0.0) {
        return Err(Error::Domain("PA1 on an all-zero channel".into()));
    }
    let mut best = 0;
    for p in 1..3 {
        if e[p] > e[best] {
            best = p;
        }
    }
    let mut q = [0.0; 3];
    q[best] = budget;
    let mut g = zeros_like(gains);
    g[best] = second_layer(&gains[best], budget, sigma2, mode)?;
    Ok(PowerAllocation { q, g, first_level: None })
}

/// `Q = budget/3` on every polarization; within a polarization every served
/// user gets an equal share, split equally over its streams.
pub fn pa2_equal(gains: &StreamGains, budget: f64) -> PowerAllocation {
    let g = [0, 1, 2].map(|p| {
        let users = &gains[p];
        let k = users.iter().filter(|u| !u.is_empty()).count().max(1) as f64;
        users
            .iter()
            .map(|u| vec![1.0 / (k * u.len().max(1) as f64); u.len()])
            .collect()
    });
    PowerAllocation {
        q: [budget / 3.0; 3],
        g,
        first_level: None,
    }
}

/// Water filling over the polarization energies, then over each
/// polarization's stream gains.
pub fn pa3_two_layer(gains: &StreamGains, budget: f64, sigma2: f64, mode: SecondLayer) -> Result<PowerAllocation> {
    let e = energies(gains);
    let first = water_fill(&e, budget, sigma2)?;
    let q = [first.powers[0], first.powers[1], first.powers[2]];
    let g = [
        second_layer(&gains[0], q[0], sigma2, mode)?,
        second_layer(&gains[1], q[1], sigma2, mode)?,
        second_layer(&gains[2], q[2], sigma2, mode)?,
    ];
    Ok(PowerAllocation {
        q,
        g,
        first_level: Some(first.level),
    })
}

pub fn allocate(
    scheme: PaScheme,
    gains: &StreamGains,
    budget: f64,
    sigma2: f64,
    mode: SecondLayer,
) -> Result<PowerAllocation> {
    match scheme {
        PaScheme::Pa1 => pa1_select(gains, budget, sigma2, mode),
        PaScheme::Pa2 => Ok(pa2_equal(gains, budget)),
        PaScheme::Pa3 => pa3_two_layer(gains, budget, sigma2, mode),
    }
}
