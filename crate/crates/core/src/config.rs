//! Flat `key = value` scenario files with dotted sections.
//!
//! ```text
//! # comment
//! scenario.wavelength = 1.0
//! scenario.noise_power = 1.0
//! tx.layout = square        # square | rectangle | circle
//! tx.n = 15
//! tx.spacing = 0.4
//! user1.layout = rectangle
//! user1.nx = 4
//! user1.ny = 3
//! user1.spacing = 0.4
//! user1.z = 1.0
//! user1.center = 0.5, -0.2
//! sweep.snr = -10:2:20
//! precode.schemes = uc, two-layer
//! precode.pa = pa1, pa2, pa3
//! numerics.tol = 1e-10
//! ```
//!
//! Users are numbered from 1 without gaps.

use std::collections::BTreeMap;

use crate::correlation::DofMode;
use crate::error::{Error, Result};
use crate::geometry::{Layout, Point, Role, Scenario, SurfaceSpec};
use crate::metrics::{BeamNorm, CapacityNorm};
use crate::numerics::DEFAULT_TOL;
use crate::polarization::Polarization;
use crate::power::{PaScheme, SecondLayer};
use crate::precoding::{Elimination, Scheme};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub snr_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub pa: Vec<PaScheme>,
    pub tol: f64,
    pub elimination: Elimination,
    pub second_layer: SecondLayer,
    pub beam_norm: BeamNorm,
    pub capacity_norm: CapacityNorm,
    pub dof_mode: DofSetting,
}

/// DoF flavor chosen in a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub enum DofSetting {
    Transmit(Polarization),
    /// Joint DoF against `rx`, or against each user's own surface when `None`.
    Joint(Option<SurfaceSpec>),
}

impl DofSetting {
    /// Concrete mode for a user whose receive surface is `own`.
    pub fn mode_for(&self, own: &SurfaceSpec) -> DofMode {
        match self {
            DofSetting::Transmit(p) => DofMode::Transmit(*p),
            DofSetting::Joint(Some(rx)) => DofMode::Joint(rx.clone()),
            DofSetting::Joint(None) => DofMode::Joint(own.clone()),
        }
    }
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            snr_db: sweep(-10.0, 2.0, 20.0).expect("static sweep"),
            schemes: vec![Scheme::UserCluster, Scheme::TwoLayer],
            pa: vec![PaScheme::Pa1, PaScheme::Pa2, PaScheme::Pa3],
            tol: DEFAULT_TOL,
            elimination: Elimination::Reduced,
            second_layer: SecondLayer::Pooled,
            beam_norm: BeamNorm::Literal,
            capacity_norm: CapacityNorm::PerEntry,
            dof_mode: DofSetting::Transmit(Polarization::X),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub settings: RunSettings,
    /// Every key as given, for echoing into output headers.
    pub entries: BTreeMap<String, String>,
}

impl RunConfig {
    /// One-line description of the resolved configuration.
    pub fn describe(&self) -> String {
        describe(&self.scenario, &self.settings)
    }
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Inclusive `start:step:stop` grid; the endpoint is kept when the step
/// lands on it within rounding.
pub fn sweep(start: f64, step: f64, stop: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && step.is_finite() && stop.is_finite()) {
        return Err(cfg("sweep bounds must be finite"));
    }
    if step == 0.0 || (stop - start) * step < 0.0 {
        return Err(cfg(format!("empty sweep {start}:{step}:{stop}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(cfg("sweep has too many points"));
    }
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

pub fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |t: &str| -> Result<f64> { t.parse::<f64>().map_err(|_| cfg(format!("bad number '{t}' in sweep '{s}'"))) };
    match parts.as_slice() {
        [one] => Ok(vec![num(one)?]),
        [a, b, c] => sweep(num(a)?, num(b)?, num(c)?),
        _ => Err(cfg(format!("sweep must be start:step:stop, got '{s}'"))),
    }
}

pub fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    let v: Vec<Scheme> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "uc" | "user-cluster" => Ok(Scheme::UserCluster),
            "two-layer" | "tl" => Ok(Scheme::TwoLayer),
            other => Err(cfg(format!("unknown scheme '{other}'"))),
        })
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(cfg("scheme list is empty"));
    }
    Ok(v)
}

pub fn parse_pa(s: &str) -> Result<Vec<PaScheme>> {
    let v: Vec<PaScheme> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "pa1" => Ok(PaScheme::Pa1),
            "pa2" => Ok(PaScheme::Pa2),
            "pa3" => Ok(PaScheme::Pa3),
            other => Err(cfg(format!("unknown power allocation '{other}'"))),
        })
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(cfg("power allocation list is empty"));
    }
    Ok(v)
}

pub fn parse_tol(s: &str) -> Result<f64> {
    let t: f64 = s.trim().parse().map_err(|_| cfg(format!("bad tolerance '{s}'")))?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(cfg(format!("tolerance must be finite and nonnegative, got {t}")));
    }
    Ok(t)
}

/// Splits text into `key -> value`, rejecting duplicates and malformed lines.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg(format!("line {}: expected key = value", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(cfg(format!("line {}: empty key or value", no + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(cfg(format!("line {}: duplicate key '{k}'", no + 1)));
        }
    }
    Ok(map)
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> Option<&'a str> {
        let v = self.map.get(key).map(String::as_str);
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| v.parse::<f64>().map_err(|_| cfg(format!("{key}: expected a number, got '{v}'"))))
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|v| v.parse::<usize>().map_err(|_| cfg(format!("{key}: expected a count, got '{v}'"))))
            .transpose()
    }

    fn need<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| cfg(format!("missing key '{key}'")))
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| cfg(format!("{key}: bad number '{t}'"))))
                    .collect()
            })
            .transpose()
    }
}

fn surface(r: &Reader, prefix: &str, role: Role) -> Result<SurfaceSpec> {
    let key = |s: &str| format!("{prefix}.{s}");
    let layout = r.raw(&key("layout")).unwrap_or("square");
    let spacing = r.f64(&key("spacing"))?;
    let dx = r.f64(&key("dx"))?.or(spacing);
    let dy = r.f64(&key("dy"))?.or(spacing);
    let dx = r.need(&key("spacing"), dx)?;
    let dy = r.need(&key("spacing"), dy)?;
    let layout = match layout {
        "square" => {
            let n = r.usize(&key("n"))?;
            Layout::Square { n: r.need(&key("n"), n)? }
        }
        "rectangle" => {
            let nx = r.usize(&key("nx"))?;
            let ny = r.usize(&key("ny"))?;
            Layout::Rectangle {
                nx: r.need(&key("nx"), nx)?,
                ny: r.need(&key("ny"), ny)?,
            }
        }
        "circle" => Layout::Circle {
            count: r.usize(&key("count"))?,
            radius: r.f64(&key("radius"))?,
        },
        other => return Err(cfg(format!("{}: unknown layout '{other}'", key("layout")))),
    };
    let center = match r.floats(&key("center"))? {
        None => Point::zeros(),
        Some(v) if v.len() == 2 => Point::new(v[0], v[1], 0.0),
        Some(v) if v.len() == 3 => Point::new(v[0], v[1], v[2]),
        Some(_) => return Err(cfg(format!("{}: expected 2 or 3 coordinates", key("center")))),
    };
    let spec = SurfaceSpec {
        layout,
        spacing: (dx, dy),
        center,
        role,
    };
    spec.validate().map_err(|e| cfg(format!("{prefix}: {e}")))?;
    Ok(spec)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = parse_entries(text)?;
    let r = Reader {
        map: &entries,
        used: Default::default(),
    };
    let wavelength = r.f64("scenario.wavelength")?.unwrap_or(1.0);
    let transmit = surface(&r, "tx", Role::Transmit)?;
    let mut scenario = Scenario::new(wavelength, transmit);
    if let Some(v) = r.f64("scenario.noise_power")? {
        scenario.noise_power = v;
    }
    if let Some(v) = r.f64("scenario.total_power")? {
        scenario.total_power = v;
    }
    let mut k = 1;
    while entries.keys().any(|key| key.starts_with(&format!("user{k}."))) {
        let prefix = format!("user{k}");
        let z = r.f64(&format!("{prefix}.z"))?;
        let z = r.need(&format!("{prefix}.z"), z)?;
        let spec = surface(&r, &prefix, Role::Receive)?;
        scenario = scenario.with_user(spec, z);
        k += 1;
    }
    scenario.validate().map_err(|e| cfg(e.to_string()))?;

    let mut s = RunSettings::default();
    if let Some(v) = r.raw("sweep.snr") {
        s.snr_db = parse_sweep(v)?;
    }
    if let Some(v) = r.raw("precode.schemes") {
        s.schemes = parse_schemes(v)?;
    }
    if let Some(v) = r.raw("precode.pa") {
        s.pa = parse_pa(v)?;
    }
    if let Some(v) = r.raw("numerics.tol") {
        s.tol = parse_tol(v)?;
    }
    if let Some(v) = r.raw("precode.elimination") {
        s.elimination = match v {
            "reduced" => Elimination::Reduced,
            "literal" => Elimination::Literal,
            o => return Err(cfg(format!("precode.elimination: unknown '{o}'"))),
        };
    }
    if let Some(v) = r.raw("power.second_layer") {
        s.second_layer = match v {
            "pooled" => SecondLayer::Pooled,
            "per-user" => SecondLayer::PerUser,
            o => return Err(cfg(format!("power.second_layer: unknown '{o}'"))),
        };
    }
    if let Some(v) = r.raw("metrics.beams") {
        s.beam_norm = match v {
            "literal" => BeamNorm::Literal,
            "orthonormal" => BeamNorm::Orthonormal,
            o => return Err(cfg(format!("metrics.beams: unknown '{o}'"))),
        };
    }
    if let Some(v) = r.raw("metrics.capacity_norm") {
        s.capacity_norm = match v {
            "per-entry" => CapacityNorm::PerEntry,
            "per-row" => CapacityNorm::PerRow { streams: 0 },
            o => return Err(cfg(format!("metrics.capacity_norm: unknown '{o}'"))),
        };
    }
    if let Some(v) = r.raw("dof.mode") {
        s.dof_mode = match v {
            "transmit" | "transmit-x" => DofSetting::Transmit(Polarization::X),
            "transmit-y" => DofSetting::Transmit(Polarization::Y),
            "transmit-z" => DofSetting::Transmit(Polarization::Z),
            "joint" if entries.keys().any(|k| k.starts_with("dof.rx.")) => {
                DofSetting::Joint(Some(surface(&r, "dof.rx", Role::Receive)?))
            }
            "joint" => DofSetting::Joint(None),
            o => return Err(cfg(format!("dof.mode: unknown '{o}'"))),
        };
    }
    let used = r.used.borrow();
    if let Some(unknown) = entries.keys().find(|k| !used.contains(*k)) {
        return Err(cfg(format!("unknown key '{unknown}'")));
    }
    drop(used);
    Ok(RunConfig {
        scenario,
        settings: s,
        entries,
    })
}

fn layout_text(s: &SurfaceSpec) -> String {
    let lay = match s.layout {
        Layout::Square { n } => format!("square n={n}"),
        Layout::Rectangle { nx, ny } => format!("rectangle {nx}x{ny}"),
        Layout::Circle { count, radius } => format!(
            "circle count={} radius={}",
            count.map_or("auto".into(), |c| c.to_string()),
            radius.map_or("auto".into(), |r| format!("{r}"))
        ),
    };
    format!(
        "{lay} spacing=({},{}) center=({},{},{})",
        s.spacing.0, s.spacing.1, s.center.x, s.center.y, s.center.z
    )
}

pub fn describe(sc: &Scenario, s: &RunSettings) -> String {
    let mut parts = vec![
        format!("wavelength={}", sc.wavelength),
        format!("noise_power={}", sc.noise_power),
        format!("total_power={}", sc.total_power),
        format!("tx=[{}]", layout_text(&sc.transmit)),
    ];
    for (k, u) in sc.users.iter().enumerate() {
        parts.push(format!("user{}=[z={} {}]", k + 1, u.distance, layout_text(&u.surface)));
    }
    let snr = match (s.snr_db.first(), s.snr_db.last()) {
        (Some(a), Some(b)) if s.snr_db.len() > 1 => format!("{a}..{b} ({} points)", s.snr_db.len()),
        (Some(a), _) => format!("{a}"),
        _ => "none".into(),
    };
    parts.push(format!("snr_db={snr}"));
    parts.push(format!(
        "schemes={}",
        s.schemes.iter().map(|x| x.label()).collect::<Vec<_>>().join("|")
    ));
    parts.push(format!("pa={}", s.pa.iter().map(|x| x.label()).collect::<Vec<_>>().join("|")));
    parts.push(format!("tol={:e}", s.tol));
    parts.push(format!("elimination={:?}", s.elimination));
    parts.push(format!("second_layer={:?}", s.second_layer));
    parts.push(format!("beams={:?}", s.beam_norm));
    parts.push(format!("capacity_norm={:?}", s.capacity_norm));
    let dof = match &s.dof_mode {
        DofSetting::Transmit(p) => format!("transmit-{p}"),
        DofSetting::Joint(Some(rx)) => format!("joint rx=[{}]", layout_text(rx)),
        DofSetting::Joint(None) => "joint rx=own".into(),
    };
    parts.push(format!("dof_mode={dof}"));
    parts.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
        scenario.wavelength = 1.0
        tx.layout = square
        tx.n = 4
        tx.spacing = 0.4
        user1.layout = rectangle   # trailing comment
        user1.nx = 2
        user1.ny = 2
        user1.spacing = 0.4
        user1.z = 1.5
        user1.center = 0.3, 0.1
        user2.n = 2
        user2.spacing = 0.4
        user2.z = 2
        sweep.snr = 0:5:10
        precode.pa = pa3
    ";

    #[test]
    fn parses_sample() {
        let c = parse_config(SAMPLE).unwrap();
        assert_eq!(c.scenario.users.len(), 2);
        assert_eq!(c.scenario.users[0].distance, 1.5);
        assert_eq!(c.scenario.users[0].surface.center, Point::new(0.3, 0.1, 0.0));
        assert_eq!(c.settings.snr_db, vec![0.0, 5.0, 10.0]);
        assert_eq!(c.settings.pa, vec![PaScheme::Pa3]);
        assert!(c.describe().contains("user2=[z=2"));
    }

    #[test]
    fn sweep_endpoints() {
        assert_eq!(parse_sweep("-10:2:20").unwrap().len(), 16);
        assert_eq!(parse_sweep("0:0.1:0.3").unwrap().len(), 4);
        assert!(parse_sweep("0:-1:5").is_err());
        assert!(parse_sweep("1:2").is_err());
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(parse_config(&format!("{SAMPLE}\nfoo.bar = 1")).is_err());
        assert!(parse_config(&format!("{SAMPLE}\ntx.n = 5")).is_err());
        assert!(parse_config("tx.n = 4").is_err());
        assert!(parse_config(&SAMPLE.replace("user1.z = 1.5", "user1.z = -1")).is_err());
    }
}
