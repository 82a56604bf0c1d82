//! CSV experiment writers and the named figure presets.
//!
//! Every artifact starts with a `# ` line describing the resolved setup,
//! followed by a header row. Rows are produced in grid order regardless of
//! how the work is scheduled.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::{describe, RunConfig, RunSettings};
use crate::correlation::{surface_dof, transmit_correlation, DofMode};
use crate::error::{Error, Result};
use crate::geometry::{Layout, Point, Role, Scenario, SurfaceSpec};
use crate::green_channel::{assemble_channel, PolarizedChannel};
use crate::metrics::{
    capacity, eigen_spectrum, gains_from_singulars, noise_for_snr_db, significant_count, stream_singulars,
    total_spectral_efficiency, CapacityNorm, SIGNIFICANCE,
};
use crate::numerics::ComplexMatrix;
use crate::polarization::Polarization::{self, X, Y};
use crate::power::allocate;
use crate::precoding::{cluster_users, two_layer_with, user_cluster, PrecoderSet, Scheme};
use crate::report::fmt_f64;

/// A named CSV file body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub content: String,
}

fn start(comment: &str, header: &str) -> String {
    let mut s = String::new();
    writeln!(s, "# {}", comment.replace('\n', "; ")).unwrap();
    writeln!(s, "{header}").unwrap();
    s
}

fn row(s: &mut String, fields: &[String]) {
    s.push_str(&fields.join(","));
    s.push('\n');
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

pub fn channel_csv(name: &str, comment: &str, h: &PolarizedChannel) -> Artifact {
    let mut buf = Vec::new();
    buf.extend_from_slice(format!("# {}\n", comment.replace('\n', "; ")).as_bytes());
    h.write_csv(&mut buf).expect("writing to memory");
    Artifact {
        name: name.into(),
        content: String::from_utf8(buf).expect("ascii csv"),
    }
}

/// One transmit correlation matrix to export.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub label: String,
    pub surface: SurfaceSpec,
    pub distance: f64,
    pub pol: Polarization,
}

pub fn correlation_csv(name: &str, comment: &str, curves: &[CorrelationCurve], k0: f64) -> Result<Artifact> {
    let mats = curves
        .par_iter()
        .map(|c| transmit_correlation(&c.surface, c.distance, k0, c.pol))
        .collect::<Result<Vec<_>>>()?;
    let mut s = start(comment, "curve,pol,z,spacing,n,l,raw,normalized,reference");
    for (c, m) in curves.iter().zip(&mats) {
        let (norm, refn) = (m.normalized(), m.reference_normalized());
        for i in 0..m.size() {
            for j in 0..m.size() {
                row(
                    &mut s,
                    &[
                        c.label.clone(),
                        c.pol.to_string(),
                        f(c.distance),
                        f(c.surface.spacing.0),
                        i.to_string(),
                        j.to_string(),
                        f(m.raw[(i, j)]),
                        f(norm[(i, j)]),
                        f(refn[(i, j)]),
                    ],
                );
            }
        }
    }
    Ok(Artifact {
        name: name.into(),
        content: s,
    })
}

/// One DoF evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct DofPoint {
    pub curve: String,
    pub surface: SurfaceSpec,
    pub distance: f64,
    pub mode: DofMode,
}

fn mode_label(m: &DofMode) -> String {
    match m {
        DofMode::Transmit(p) => format!("transmit-{p}"),
        DofMode::Joint(_) => "joint".into(),
    }
}

pub fn dof_csv(name: &str, comment: &str, points: &[DofPoint], k0: f64) -> Result<Artifact> {
    let values = points
        .par_iter()
        .map(|p| surface_dof(&p.surface, p.distance, k0, &p.mode))
        .collect::<Result<Vec<_>>>()?;
    let mut s = start(comment, "curve,mode,z,patches,spacing_x,spacing_y,dof");
    for (p, v) in points.iter().zip(values) {
        row(
            &mut s,
            &[
                p.curve.clone(),
                mode_label(&p.mode),
                f(p.distance),
                p.surface.count()?.to_string(),
                f(p.surface.spacing.0),
                f(p.surface.spacing.1),
                f(v),
            ],
        );
    }
    Ok(Artifact {
        name: name.into(),
        content: s,
    })
}

const METRICS_HEADER: &str = "scenario,scheme,pa,snr_db,metric,value";

/// Tri-, dual- and single-polarized capacity of each scenario over `snr_db`.
pub fn capacity_rows(
    scenarios: &[(String, Scenario)],
    snr_db: &[f64],
    norm: CapacityNorm,
) -> Result<Vec<[String; 6]>> {
    let channels = scenarios
        .par_iter()
        .map(|(_, sc)| assemble_channel(sc))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for ((id, _), h) in scenarios.iter().zip(&channels) {
        let variants: [(&str, ComplexMatrix, usize); 3] = [
            ("tp", h.stacked().clone(), 3),
            ("dp", h.restrict(&[X, Y]), 2),
            ("single", h.block(X, X), 1),
        ];
        let cells: Vec<Vec<f64>> = variants
            .par_iter()
            .map(|(_, m, streams)| {
                let n = match norm {
                    CapacityNorm::PerEntry => CapacityNorm::PerEntry,
                    CapacityNorm::PerRow { .. } => CapacityNorm::PerRow { streams: *streams },
                };
                snr_db
                    .iter()
                    .map(|db| capacity(m, 10f64.powf(db / 10.0), n))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for ((label, _, _), values) in variants.iter().zip(cells) {
            for (db, v) in snr_db.iter().zip(values) {
                out.push([
                    id.clone(),
                    (*label).to_string(),
                    "-".into(),
                    f(*db),
                    "capacity".into(),
                    f(v),
                ]);
            }
        }
    }
    Ok(out)
}

pub fn capacity_csv(
    name: &str,
    comment: &str,
    scenarios: &[(String, Scenario)],
    snr_db: &[f64],
    norm: CapacityNorm,
) -> Result<Artifact> {
    let mut s = start(comment, METRICS_HEADER);
    for r in capacity_rows(scenarios, snr_db, norm)? {
        row(&mut s, &r);
    }
    Ok(Artifact {
        name: name.into(),
        content: s,
    })
}

/// Builds the precoders of `scheme` on `h`.
pub fn precoders(h: &PolarizedChannel, sc: &Scenario, scheme: Scheme, s: &RunSettings) -> Result<PrecoderSet> {
    match scheme {
        Scheme::TwoLayer => two_layer_with(h, s.tol, s.elimination),
        Scheme::UserCluster => {
            let d: Vec<f64> = sc.users.iter().map(|u| u.distance).collect();
            let a = cluster_users(&d)?;
            user_cluster(h, &a, s.tol)
        }
    }
}

/// One spectral-efficiency value together with its per-polarization budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub scheme: Scheme,
    pub pa: crate::power::PaScheme,
    pub snr_db: f64,
    pub se: f64,
    pub q: [f64; 3],
}

/// Spectral efficiency on the unit-entry-power channel for every
/// (scheme, pa, snr) in grid order.
pub fn precode_sweep(sc: &Scenario, s: &RunSettings) -> Result<Vec<SweepPoint>> {
    if s.snr_db.is_empty() || s.schemes.is_empty() || s.pa.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if s.schemes.contains(&Scheme::UserCluster) && sc.users.len() % 3 != 0 {
        return Err(Error::Config(format!(
            "K must be divisible by 3 (got K={})",
            sc.users.len()
        )));
    }
    let h = assemble_channel(sc)?.unit_entry_power();
    let mut out = Vec::new();
    for &scheme in &s.schemes {
        let pre = precoders(&h, sc, scheme, s)?;
        let sing = stream_singulars(&h, &pre, s.beam_norm)?;
        let gains = gains_from_singulars(&sing);
        let grid: Vec<(crate::power::PaScheme, f64)> = s
            .pa
            .iter()
            .flat_map(|&pa| s.snr_db.iter().map(move |&db| (pa, db)))
            .collect();
        let points = grid
            .par_iter()
            .map(|&(pa, db)| {
                let sigma2 = noise_for_snr_db(db);
                let alloc = allocate(pa, &gains, 1.0, sigma2, s.second_layer)?;
                Ok(SweepPoint {
                    scheme,
                    pa,
                    snr_db: db,
                    se: total_spectral_efficiency(&sing, &alloc, sigma2),
                    q: alloc.q,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.extend(points);
    }
    Ok(out)
}

/// Spectral-efficiency rows plus the matching allocation file.
pub fn precode_sweep_csv(name: &str, comment: &str, id: &str, sc: &Scenario, s: &RunSettings) -> Result<[Artifact; 2]> {
    let points = precode_sweep(sc, s)?;
    let mut se = start(comment, METRICS_HEADER);
    let mut alloc = start(comment, "scenario,scheme,pa,snr_db,pol,q");
    for p in &points {
        row(
            &mut se,
            &[
                id.into(),
                p.scheme.label().into(),
                p.pa.label().into(),
                f(p.snr_db),
                "se".into(),
                f(p.se),
            ],
        );
        for pol in Polarization::ALL {
            row(
                &mut alloc,
                &[
                    id.into(),
                    p.scheme.label().into(),
                    p.pa.label().into(),
                    f(p.snr_db),
                    pol.to_string(),
                    f(p.q[pol.index()]),
                ],
            );
        }
    }
    let stem = name.trim_end_matches(".csv");
    Ok([
        Artifact {
            name: name.into(),
            content: se,
        },
        Artifact {
            name: format!("{stem}_allocation.csv"),
            content: alloc,
        },
    ])
}

/// Complex entries of both precoder layers.
pub fn precoder_csv(name: &str, comment: &str, pre: &PrecoderSet) -> Artifact {
    let mut s = start(comment, "layer,pol,user,row,col,re,im");
    let mut put = |layer: &str, pol: Polarization, user: String, m: &ComplexMatrix| {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                row(
                    &mut s,
                    &[
                        layer.into(),
                        pol.to_string(),
                        user.clone(),
                        i.to_string(),
                        j.to_string(),
                        f(z.re),
                        f(z.im),
                    ],
                );
            }
        }
    };
    for pol in Polarization::ALL {
        if let Some(first) = &pre.first {
            put("first", pol, "-".into(), &first.p[pol.index()]);
        }
        for (&k, fk) in pre.served[pol.index()].iter().zip(&pre.second[pol.index()]) {
            put("second", pol, (k + 1).to_string(), fk);
        }
    }
    Artifact {
        name: name.into(),
        content: s,
    }
}

/// Eigenvalue spectra of all nine polarization blocks of the first user.
pub fn eigen_csv(name: &str, comment: &str, id: &str, h: &PolarizedChannel) -> Result<[Artifact; 2]> {
    let pairs: Vec<(Polarization, Polarization)> = Polarization::ALL
        .iter()
        .flat_map(|&p| Polarization::ALL.iter().map(move |&q| (p, q)))
        .collect();
    let spectra = pairs
        .par_iter()
        .map(|&(p, q)| eigen_spectrum(&h.user_block(0, p, q)))
        .collect::<Result<Vec<_>>>()?;
    let peak = spectra.iter().map(|e| e[0]).fold(0.0, f64::max);
    let mut s = start(comment, "scenario,rx_pol,tx_pol,index,eigenvalue,relative");
    let mut counts = start(comment, "scenario,rx_pol,tx_pol,significant,energy");
    for ((p, q), ev) in pairs.iter().zip(&spectra) {
        for (i, e) in ev.iter().enumerate() {
            let rel = if peak > 0.0 { e / peak } else { 0.0 };
            row(
                &mut s,
                &[id.into(), p.to_string(), q.to_string(), i.to_string(), f(*e), f(rel)],
            );
        }
        row(
            &mut counts,
            &[
                id.into(),
                p.to_string(),
                q.to_string(),
                significant_count(ev, SIGNIFICANCE).to_string(),
                f(ev.iter().sum()),
            ],
        );
    }
    let stem = name.trim_end_matches(".csv");
    Ok([
        Artifact {
            name: name.into(),
            content: s,
        },
        Artifact {
            name: format!("{stem}_significant.csv"),
            content: counts,
        },
    ])
}

pub const PRESETS: [&str; 10] = [
    "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13",
];

const K0: f64 = 2.0 * std::f64::consts::PI;

/// Line of 50 patches along x.
fn line50(spacing: f64) -> SurfaceSpec {
    SurfaceSpec::rectangle(50, 1, (spacing, spacing), Role::Transmit)
}

fn fig4() -> Result<Vec<Artifact>> {
    let curves: Vec<CorrelationCurve> = [0.05, 0.2, 0.4]
        .iter()
        .map(|&d| CorrelationCurve {
            label: format!("spacing={d}"),
            surface: line50(d),
            distance: 0.3,
            pol: X,
        })
        .collect();
    Ok(vec![correlation_csv(
        "fig4_correlation.csv",
        "preset=fig4 wavelength=1 tx=line 50x1 spacing={0.05,0.2,0.4} z=0.3 pol=x",
        &curves,
        K0,
    )?])
}

fn fig5() -> Result<Vec<Artifact>> {
    let curves: Vec<CorrelationCurve> = [0.2, 0.4, 0.8]
        .iter()
        .map(|&z| CorrelationCurve {
            label: format!("z={z}"),
            surface: line50(0.1),
            distance: z,
            pol: X,
        })
        .collect();
    Ok(vec![correlation_csv(
        "fig5_correlation.csv",
        "preset=fig5 wavelength=1 tx=line 50x1 spacing=0.1 z={0.2,0.4,0.8} pol=x",
        &curves,
        K0,
    )?])
}

fn fig6() -> Result<Vec<Artifact>> {
    let mut curves = Vec::new();
    for z in [0.1, 0.2, 0.4] {
        for pol in Polarization::ALL {
            curves.push(CorrelationCurve {
                label: format!("z={z} pol={pol}"),
                surface: line50(0.4),
                distance: z,
                pol,
            });
        }
    }
    Ok(vec![correlation_csv(
        "fig6_correlation.csv",
        "preset=fig6 wavelength=1 tx=line 50x1 spacing=0.4 z={0.1,0.2,0.4} pol={x,y,z}",
        &curves,
        K0,
    )?])
}

/// 15×15 transmit and receive at 0.4λ, user on axis at `z`.
pub fn eigen_scenario(z: f64) -> Scenario {
    Scenario::new(1.0, SurfaceSpec::square(15, 0.4, Role::Transmit))
        .with_user(SurfaceSpec::square(15, 0.4, Role::Receive), z)
}

fn eigen_preset(tag: &str, z: f64) -> Result<Vec<Artifact>> {
    let sc = eigen_scenario(z);
    let h = assemble_channel(&sc)?;
    let comment = format!("preset={tag} {}", describe(&sc, &RunSettings::default()));
    Ok(eigen_csv(&format!("{tag}_eigen.csv"), &comment, &format!("z={z}"), &h)?.to_vec())
}

/// 6×6 transmit and 3×3 receive at 0.4λ.
pub fn capacity_scenario(z: f64) -> Scenario {
    Scenario::new(1.0, SurfaceSpec::square(6, 0.4, Role::Transmit))
        .with_user(SurfaceSpec::square(3, 0.4, Role::Receive), z)
}

fn fig9() -> Result<Vec<Artifact>> {
    let s = RunSettings::default();
    let a = vec![("z=0.5".to_string(), capacity_scenario(0.5))];
    let zs: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
    let b: Vec<(String, Scenario)> = zs.iter().map(|&z| (format!("z={z}"), capacity_scenario(z))).collect();
    Ok(vec![
        capacity_csv(
            "fig9a_capacity.csv",
            &format!("preset=fig9a {} capacity_norm={:?}", describe(&a[0].1, &s), s.capacity_norm),
            &a,
            &s.snr_db,
            s.capacity_norm,
        )?,
        capacity_csv(
            "fig9b_capacity.csv",
            &format!(
                "preset=fig9b tx=6x6 rx=3x3 spacing=0.4 z=0.5..4 step 0.5 snr_db=10 capacity_norm={:?}",
                s.capacity_norm
            ),
            &b,
            &[10.0],
            s.capacity_norm,
        )?,
    ])
}

pub const FIG10_COUNTS: [usize; 10] = [25, 50, 100, 150, 200, 250, 300, 400, 500, 600];

/// Fixed 10λ×10λ transmit surface holding about `n` patches, with the 10×10
/// receive surface at 1λ used for the joint DoF.
pub fn fig10_point(n: usize, z: f64) -> Result<DofPoint> {
    Ok(DofPoint {
        curve: format!("z={z}"),
        surface: SurfaceSpec::covering(10.0, 10.0, n, Role::Transmit)?,
        distance: z,
        mode: DofMode::Joint(SurfaceSpec::square(10, 1.0, Role::Receive)),
    })
}

fn fig10() -> Result<Vec<Artifact>> {
    let mut pts = Vec::new();
    for z in [5.0, 7.0, 9.0] {
        for n in FIG10_COUNTS {
            pts.push(fig10_point(n, z)?);
        }
    }
    Ok(vec![dof_csv(
        "fig10_dof.csv",
        "preset=fig10 wavelength=1 tx=10x10 area covering N={25..600} rx=10x10 spacing=1 z={5,7,9} mode=joint",
        &pts,
        K0,
    )?])
}

pub const FIG11_COUNTS: [usize; 5] = [64, 100, 144, 196, 256];

/// The four 64λ² shapes holding about `n` patches. The receive surface
/// mirrors the transmit one.
pub fn fig11_shapes(n: usize) -> Result<Vec<(String, SurfaceSpec)>> {
    let d = (64.0 / n as f64).sqrt();
    let circle = SurfaceSpec {
        layout: Layout::Circle {
            count: Some(n),
            radius: None,
        },
        spacing: (d, d),
        center: Point::zeros(),
        role: Role::Transmit,
    };
    Ok(vec![
        ("square".into(), SurfaceSpec::covering(8.0, 8.0, n, Role::Transmit)?),
        ("circle".into(), circle),
        ("rect16x4".into(), SurfaceSpec::covering(16.0, 4.0, n, Role::Transmit)?),
        ("rect32x2".into(), SurfaceSpec::covering(32.0, 2.0, n, Role::Transmit)?),
    ])
}

pub fn mirrored(s: &SurfaceSpec) -> DofPoint {
    let mut rx = s.clone();
    rx.role = Role::Receive;
    DofPoint {
        curve: String::new(),
        surface: s.clone(),
        distance: 5.0,
        mode: DofMode::Joint(rx),
    }
}

fn fig11() -> Result<Vec<Artifact>> {
    let mut pts = Vec::new();
    for n in FIG11_COUNTS {
        for (label, s) in fig11_shapes(n)? {
            let mut p = mirrored(&s);
            p.curve = label;
            pts.push(p);
        }
    }
    Ok(vec![dof_csv(
        "fig11_dof.csv",
        "preset=fig11 wavelength=1 area=64 shapes={square 8x8, circle, 16x4, 32x2} N={64..256} rx=mirror z=5 mode=joint",
        &pts,
        K0,
    )?])
}

/// 15×15 transmit at 0.4λ with one `nx × ny` receive surface per distance,
/// all centered on the axis.
pub fn multiuser_scenario(distances: &[f64], nx: usize, ny: usize) -> Scenario {
    distances.iter().fold(
        Scenario::new(1.0, SurfaceSpec::square(15, 0.4, Role::Transmit)),
        |sc, &z| sc.with_user(SurfaceSpec::rectangle(nx, ny, (0.4, 0.4), Role::Receive), z),
    )
}

pub fn fig12_scenario() -> Scenario {
    multiuser_scenario(&[1.0, 3.0, 5.0], 4, 3)
}

pub fn fig13_scenario() -> Scenario {
    multiuser_scenario(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3, 2)
}

fn sweep_preset(tag: &str, sc: &Scenario) -> Result<Vec<Artifact>> {
    let s = RunSettings::default();
    let comment = format!("preset={tag} {}", describe(sc, &s));
    Ok(precode_sweep_csv(&format!("{tag}_se.csv"), &comment, tag, sc, &s)?.to_vec())
}

/// Artifacts of a named figure preset.
pub fn run_preset(name: &str) -> Result<Vec<Artifact>> {
    match name {
        "fig4" => fig4(),
        "fig5" => fig5(),
        "fig6" => fig6(),
        "fig7" => eigen_preset("fig7", 1.0),
        "fig8" => eigen_preset("fig8", 3.0),
        "fig9" => fig9(),
        "fig10" => fig10(),
        "fig11" => fig11(),
        "fig12" => sweep_preset("fig12", &fig12_scenario()),
        "fig13" => sweep_preset("fig13", &fig13_scenario()),
        other => Err(Error::Config(format!(
            "unknown preset '{other}' (known: {})",
            PRESETS.join(", ")
        ))),
    }
}

/// Pipeline stage run on a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Channel,
    Correlation,
    Dof,
    Capacity,
    PrecodeSweep,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Channel => "channel",
            Stage::Correlation => "correlation",
            Stage::Dof => "dof",
            Stage::Capacity => "capacity",
            Stage::PrecodeSweep => "precode-sweep",
        }
    }
}

/// Artifacts of one stage on a parsed configuration.
pub fn run_stage(stage: Stage, cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let sc = &cfg.scenario;
    let s = &cfg.settings;
    let comment = format!("stage={} {}", stage.label(), cfg.describe());
    let k0 = sc.wavenumber();
    let file = format!("{}.csv", stage.label());
    if sc.users.is_empty() {
        return Err(Error::Config("scenario has no users".into()));
    }
    match stage {
        Stage::Channel => Ok(vec![channel_csv(&file, &comment, &assemble_channel(sc)?)]),
        Stage::Correlation => {
            let curves: Vec<CorrelationCurve> = sc
                .users
                .iter()
                .enumerate()
                .flat_map(|(k, u)| {
                    Polarization::ALL.iter().map(move |&pol| CorrelationCurve {
                        label: format!("user{}", k + 1),
                        surface: sc.transmit.clone(),
                        distance: u.distance,
                        pol,
                    })
                })
                .collect();
            Ok(vec![correlation_csv(&file, &comment, &curves, k0)?])
        }
        Stage::Dof => {
            let pts: Vec<DofPoint> = sc
                .users
                .iter()
                .enumerate()
                .map(|(k, u)| DofPoint {
                    curve: format!("user{}", k + 1),
                    surface: sc.transmit.clone(),
                    distance: u.distance,
                    mode: s.dof_mode.mode_for(&u.surface),
                })
                .collect();
            Ok(vec![dof_csv(&file, &comment, &pts, k0)?])
        }
        Stage::Capacity => Ok(vec![capacity_csv(
            &file,
            &comment,
            &[("scenario".to_string(), sc.clone())],
            &s.snr_db,
            s.capacity_norm,
        )?]),
        Stage::PrecodeSweep => Ok(precode_sweep_csv(&file, &comment, "scenario", sc, s)?.to_vec()),
    }
}
