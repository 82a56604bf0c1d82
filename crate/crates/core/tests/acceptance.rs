//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use hmimos_core::config::RunSettings;
use hmimos_core::correlation::{im_green0_xx, pair_correlation, self_term, surface_dof, transmit_correlation};
use hmimos_core::experiments::{
    capacity_scenario, fig10_point, fig11_shapes, fig12_scenario, mirrored, precode_sweep, run_preset,
    FIG10_COUNTS, PRESETS,
};
use hmimos_core::green_channel::dyadic_green;
use hmimos_core::metrics::{polarization_capacities, CapacityNorm};
use hmimos_core::power::{water_fill, PaScheme};
use hmimos_core::precoding::{
    bd_leakage, cluster_users, cross_polar_residual, two_layer, user_cluster, Scheme,
};
use hmimos_core::{assemble_channel, Point, Polarization, Role, Scenario, SurfaceSpec, DEFAULT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K0: f64 = 2.0 * PI;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Random near-field scenario with laterally offset users.
fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let side = [3usize, 4, 5][rng.random_range(0..3)];
    let ns = side * side;
    let k = rng.random_range(1..=3usize);
    let spacing = rng.random_range(0.2..0.5);
    let mut sc = Scenario::new(1.0, SurfaceSpec::square(side, spacing, Role::Transmit));
    for _ in 0..k {
        // keep the total receive count well below the transmit count
        let nx = if k * 2 <= ns / 3 { rng.random_range(1..=2usize) } else { 1 };
        let rx = SurfaceSpec::rectangle(nx, 1, (0.3, 0.3), Role::Receive).with_center(Point::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            0.0,
        ));
        sc = sc.with_user(rx, rng.random_range(0.5..3.0));
    }
    sc
}

fn scenario_set() -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    (0..50).map(|_| random_scenario(&mut rng)).collect()
}

fn c1_cross_polar() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for sc in scenario_set() {
        let h = assemble_channel(&sc).unwrap();
        let pre = match two_layer(&h, DEFAULT_TOL) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("precoder failed: {e}")),
        };
        worst = worst.max(cross_polar_residual(&h, pre.first.as_ref().unwrap()));
    }
    let el = t.elapsed();
    outcome(
        worst < 1e-10 && el < Duration::from_secs(10),
        format!("max relative residual {worst:.3e}, {:.2} s", el.as_secs_f64()),
    )
}

fn c2_bd_leakage() -> Outcome {
    let mut worst: f64 = 0.0;
    for sc in scenario_set() {
        let h = assemble_channel(&sc).unwrap();
        match two_layer(&h, DEFAULT_TOL) {
            Ok(p) => worst = worst.max(bd_leakage(&h, &p)),
            Err(e) => return outcome(false, format!("two-layer failed: {e}")),
        }
        if sc.users.len() == 3 {
            let d: Vec<f64> = sc.users.iter().map(|u| u.distance).collect();
            let a = cluster_users(&d).unwrap();
            match user_cluster(&h, &a, DEFAULT_TOL) {
                Ok(p) => worst = worst.max(bd_leakage(&h, &p)),
                Err(e) => return outcome(false, format!("user-cluster failed: {e}")),
            }
        }
    }
    outcome(worst < 1e-10, format!("max relative leakage {worst:.3e}"))
}

fn c3_correlation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let norm = self_term(K0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dx: f64 = rng.random_range(-2.0..2.0);
        let dy: f64 = rng.random_range(-2.0..2.0);
        let dz: f64 = rng.random_range(0.05..2.0);
        let d = dx.hypot(dy);
        if d < 1e-3 {
            continue;
        }
        let origin = Point::zeros();
        let free_oracle = dyadic_green(&Point::new(dx, dy, 0.0), &origin, K0).unwrap()[(0, 0)].im;
        let free = im_green0_xx(d, dx, K0).unwrap();
        worst = worst.max((free - free_oracle).abs() / norm);
        // the image source sits at the mirrored height and flips the tangential axes
        let image_oracle = dyadic_green(&Point::new(dx, dy, dz), &origin, K0).unwrap()[(0, 0)].im;
        let pair = pair_correlation(Polarization::X, dx, dy, dz, K0);
        worst = worst.max((pair - (free_oracle - image_oracle)).abs() / norm);
    }
    let limit = im_green0_xx(1e-4, 1e-4, K0).unwrap() / norm - 1.0;
    let limit_y = im_green0_xx(1e-4, 0.0, K0).unwrap() / norm - 1.0;
    let ok = worst < 1e-10 && limit.abs() < 1e-3 && limit_y.abs() < 1e-3;
    outcome(
        ok,
        format!(
            "max normalized error {worst:.3e}, small-separation rel err {:.3e}/{:.3e}",
            limit.abs(),
            limit_y.abs()
        ),
    )
}

fn line(n: usize, spacing: f64) -> SurfaceSpec {
    SurfaceSpec::rectangle(n, 1, (spacing, spacing), Role::Transmit)
}

fn c4_correlation_trends() -> Outcome {
    let t = Instant::now();
    let adj: Vec<f64> = [0.05, 0.2, 0.4]
        .iter()
        .map(|&d| transmit_correlation(&line(50, d), 0.3, K0, Polarization::X).unwrap().normalized()[(0, 1)])
        .collect();
    let decreasing = adj.windows(2).all(|w| w[0] > w[1]);
    let first = |z: f64| {
        transmit_correlation(&line(50, 0.1), z, K0, Polarization::X)
            .unwrap()
            .reference_normalized()[(0, 1)]
    };
    let ratio = first(0.8) / first(0.2);
    let el = t.elapsed();
    outcome(
        decreasing && ratio > 2.0 && el < Duration::from_secs(5),
        format!(
            "adjacent correlation {:.4} > {:.4} > {:.4}; 0.8/0.2 ratio {ratio:.3}; {:.2} s",
            adj[0],
            adj[1],
            adj[2],
            el.as_secs_f64()
        ),
    )
}

fn c5_capacity() -> Outcome {
    let snr = 10.0;
    let caps = |z: f64| {
        polarization_capacities(&assemble_channel(&capacity_scenario(z)).unwrap(), snr, CapacityNorm::PerEntry)
            .unwrap()
    };
    let c = caps(0.5);
    let order = c.tri > c.dual && c.dual > c.single;
    let ts = c.tri / c.single;
    let td = c.tri / c.dual;
    let gaps: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&z| {
            let c = caps(z);
            c.tri - c.dual
        })
        .collect();
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    outcome(
        order && (2.0..=4.0).contains(&ts) && (1.05..=1.5).contains(&td) && shrinking,
        format!(
            "TP {:.3} DP {:.3} single {:.3}; TP/single {ts:.3}, TP/DP {td:.3}; gaps {:?}",
            c.tri,
            c.dual,
            c.single,
            gaps.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn rate(g: &[f64], p: &[f64], s2: f64) -> f64 {
    g.iter().zip(p).map(|(g, p)| (g * p / s2).ln_1p()).sum()
}

/// Best rate over a simplex grid with `steps` divisions per unit budget.
fn grid_best(g: &[f64], budget: f64, s2: f64, steps: usize) -> f64 {
    let h = budget / steps as f64;
    let mut best = f64::NEG_INFINITY;
    match g.len() {
        1 => best = rate(g, &[budget], s2),
        2 => {
            for i in 0..=steps {
                let a = i as f64 * h;
                best = best.max(rate(g, &[a, budget - a], s2));
            }
        }
        _ => {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    let (a, b) = (i as f64 * h, j as f64 * h);
                    best = best.max(rate(g, &[a, b, (budget - a - b).max(0.0)], s2));
                }
            }
        }
    }
    best
}

fn c6_water_filling() -> Outcome {
    let wf = water_fill(&[4.0, 1.0], 1.0, 1.0).unwrap();
    let example = (wf.level - 1.125).abs() < 1e-9
        && (wf.powers[0] - 0.875).abs() < 1e-9
        && (wf.powers[1] - 0.125).abs() < 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..10.0)).collect();
        let budget = rng.random_range(0.01..100.0);
        let w = water_fill(&g, budget, rng.random_range(0.01..10.0)).unwrap();
        worst_sum = worst_sum.max((w.powers.iter().sum::<f64>() - budget).abs() / budget);
    }

    // the grid is refined until its spacing is below the rate's sensitivity
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..200 {
        let n = rng.random_range(1..=3);
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..5.0)).collect();
        let (budget, s2) = (rng.random_range(0.1..4.0), rng.random_range(0.1..2.0));
        let w = water_fill(&g, budget, s2).unwrap();
        let opt = rate(&g, &w.powers, s2);
        let steps = if n == 3 { 600 } else { 20_000 };
        worst_gap = worst_gap.max(grid_best(&g, budget, s2, steps) - opt);
    }
    outcome(
        example && worst_sum < 1e-12 && worst_gap <= 1e-6,
        format!(
            "example ok={example}; conservation err {worst_sum:.2e}; grid beats water filling by at most {worst_gap:.2e}"
        ),
    )
}

fn c7_pa_inequality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    for _ in 0..10_000 {
        let q = 10f64.powf(rng.random_range(-3.0..3.0));
        let s2 = 10f64.powf(rng.random_range(-3.0..3.0));
        let one = (q / s2).ln_1p();
        let three = 3.0 * (q / (3.0 * s2)).ln_1p();
        if !(one < three) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations in 10000 samples"))
}

fn c8_precoding_order() -> Outcome {
    let t = Instant::now();
    let settings = RunSettings {
        snr_db: vec![-10.0, 0.0, 10.0, 20.0],
        ..RunSettings::default()
    };
    let pts = match precode_sweep(&fig12_scenario(), &settings) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let se = |scheme: Scheme, pa: PaScheme, db: f64| {
        pts.iter()
            .find(|p| p.scheme == scheme && p.pa == pa && p.snr_db == db)
            .unwrap()
            .se
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for &db in &settings.snr_db {
        let (p1, p2, p3) = (
            se(Scheme::TwoLayer, PaScheme::Pa1, db),
            se(Scheme::TwoLayer, PaScheme::Pa2, db),
            se(Scheme::TwoLayer, PaScheme::Pa3, db),
        );
        let uc = se(Scheme::UserCluster, PaScheme::Pa3, db);
        let good = p3 >= p2 && p2 >= p1 && p3 > uc;
        ok &= good;
        detail.push(format!(
            "{db} dB: TL pa1 {p1:.2} pa2 {p2:.2} pa3 {p3:.2} UC pa3 {uc:.2}{}",
            if good { "" } else { " (violated)" }
        ));
    }
    let el = t.elapsed();
    ok &= el < Duration::from_secs(120);
    outcome(ok, format!("{}; {:.1} s", detail.join("; "), el.as_secs_f64()))
}

fn c9_dof() -> Outcome {
    let curve: Vec<f64> = FIG10_COUNTS
        .iter()
        .map(|&n| {
            let p = fig10_point(n, 7.0).unwrap();
            surface_dof(&p.surface, p.distance, K0, &p.mode).unwrap()
        })
        .collect();
    let monotone = curve.windows(2).all(|w| w[1] >= w[0]);
    let at = |n: usize| curve[FIG10_COUNTS.iter().position(|&c| c == n).unwrap()];
    let saturation = (at(600) - at(300)) / at(300);

    let shapes = fig11_shapes(256).unwrap();
    let dof_of = |label: &str| {
        let s = &shapes.iter().find(|(l, _)| l == label).unwrap().1;
        let p = mirrored(s);
        surface_dof(&p.surface, p.distance, K0, &p.mode).unwrap()
    };
    let (sq, ci, r16, r32) = (dof_of("square"), dof_of("circle"), dof_of("rect16x4"), dof_of("rect32x2"));
    let ok = monotone && saturation < 0.05 && sq > ci && r16 > r32;
    outcome(
        ok,
        format!(
            "z=7 curve monotone={monotone}, (600-300)/300 = {saturation:.4}; square {sq:.2} vs circle {ci:.2}; 16x4 {r16:.2} vs 32x2 {r32:.2}"
        ),
    )
}

fn c10_determinism() -> Outcome {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            PRESETS
                .iter()
                .map(|p| run_preset(p).unwrap())
                .collect::<Vec<_>>()
        })
    };
    let t = Instant::now();
    let a = run(1);
    let b = run(1);
    let c = run(4);
    let same = a == b && a == c;
    let files: usize = a.iter().map(Vec::len).sum();
    outcome(
        same,
        format!("{files} files from {} presets, 3 runs, {:.1} s", PRESETS.len(), t.elapsed().as_secs_f64()),
    )
}

fn main() {
    // a stray `--list` or filter from the test runner should not trigger the full suite
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("cross-polarization cancellation", c1_cross_polar),
        ("block diagonalization leakage", c2_bd_leakage),
        ("correlation closed forms", c3_correlation_oracle),
        ("correlation trends", c4_correlation_trends),
        ("capacity ordering", c5_capacity),
        ("water filling", c6_water_filling),
        ("polarization power inequality", c7_pa_inequality),
        ("precoding and allocation ordering", c8_precoding_order),
        ("DoF behavior", c9_dof),
        ("preset determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
