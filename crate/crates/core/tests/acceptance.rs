//! Acceptance suite: runs every criterion at its stated tolerance and time
//! limit, prints one PASS/FAIL line each and exits non-zero on any failure.

use std::time::{Duration, Instant};

use ergolab_core::diagnostics::{
    arc_target, delta_e_curve, delta_e_estimate, geometric_schedule, meta_gap_curve, oscillation_score, uniform_grid,
    ReferenceSample,
};
use ergolab_core::empirics::{consecutive_gaps, empirical_measure, per_point_measures, schedule_measures};
use ergolab_core::oracles::{block_end_frequencies, gaunersdorfer_limits, lp_enumeration, quantile_w1};
use ergolab_core::phase_space::{PhaseSpace, Point};
use ergolab_core::systems::{
    ak_map, band_occupancy, bowen_running_averages, build_bump_diffeo, commutation_residual, golden, lift_diffeo,
    orbit, running_extremes, verify_sublemma, BowenParams, OrbitBudget, SystemSpec,
};
use ergolab_core::transport::{
    lifted_w1, matched_l1, w1, w1_circle, w1_discrete, w1_entropic, w1_interval, CostMatrix, EmpiricalMeasure,
    MetaMeasure,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: ergolab_core::Error) -> String {
    e.to_string()
}

fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed;
    move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn bowen_limits() -> Outcome {
    let (sup_cf, inf_cf) = gaunersdorfer_limits((1.0, 2.0), (1.0, 2.0), 1.0, 0.0);
    ensure((sup_cf - 2.0 / 3.0).abs() < 1e-12 && (inf_cf - 1.0 / 3.0).abs() < 1e-12, || {
        format!("closed forms ({sup_cf}, {inf_cf}) differ from (2/3, 1/3)")
    })?;
    let p = BowenParams::new((1.0, 2.0), (1.0, 2.0), 1.0, 0.0);
    ensure((p.limsup() - sup_cf).abs() < 1e-12 && (p.liminf() - inf_cf).abs() < 1e-12, || {
        "model closed forms disagree with the oracle".into()
    })?;
    let avg = bowen_running_averages(&p, 0.5, 60).map_err(err)?;
    let (sup, inf) = running_extremes(&avg, 30, 60).ok_or("empty window")?;
    ensure((sup - sup_cf).abs() <= 0.02 && (inf - inf_cf).abs() <= 0.02, || {
        format!("simulated sup/inf ({sup:.4}, {inf:.4}) vs ({sup_cf:.4}, {inf_cf:.4})")
    })?;
    Ok(format!("sup {sup:.4} vs 2/3, inf {inf:.4} vs 1/3"))
}

fn bowen_degenerate() -> Outcome {
    // alpha_- beta_- = alpha_+ beta_+
    let p = BowenParams::new((2.0, 1.0), (1.0, 2.0), 1.0, 0.0);
    ensure(p.alpha_minus * p.beta_minus == p.alpha_plus * p.beta_plus, || "not degenerate".into())?;
    let avg = bowen_running_averages(&p, 0.5, 60).map_err(err)?;
    let (sup, inf) = running_extremes(&avg, 30, 60).ok_or("empty window")?;
    ensure(sup - inf <= 0.02, || format!("sup - inf = {:.4}", sup - inf))?;
    Ok(format!("sup - inf = {:.4}", sup - inf))
}

fn contraction() -> Outcome {
    let blocks: Vec<u64> = (0..=4).map(|i| 10u64.pow(i)).collect();
    let g_hat = build_bump_diffeo(0.1, 0.9, 0.05, 0.05, 0.9).map_err(err)?;
    let ak = ak_map(None, lift_diffeo(&g_hat, 5).map_err(err)?, golden()).map_err(err)?;
    let systems = [
        ("logistic 4", SystemSpec::logistic(4.0), 1.0 / 64.0),
        ("rotation golden", SystemSpec::golden_rotation(), 1.0 / 64.0),
        ("expanding 3", SystemSpec::expanding(3), 1.0 / 64.0),
        ("shift on blocks", SystemSpec::shift_on_blocks(blocks, 8), 1.0 / 64.0),
        ("AK map", ak, 1.0 / 8.0),
    ];
    let n_max = 10_000;
    let mut checked = 0usize;
    let mut worst_slack = f64::INFINITY;
    for (k, (name, spec, mesh)) in systems.iter().enumerate() {
        let budget = OrbitBudget::sufficient(spec, n_max + 1);
        let points = spec.space.sample_reference(100 + k as u64, 4).map_err(err)?;
        for x in &points {
            // exact gaps for every n through the mass-zero identity
            for (n, gap) in consecutive_gaps(spec, x, n_max, &budget).map_err(err)? {
                let bound = spec.space.diameter() / (n as f64 + 1.0);
                ensure(gap <= bound + 1e-12, || format!("{name}: gap {gap} > {bound} at n = {n}"))?;
                worst_slack = worst_slack.min(bound - gap);
                checked += 1;
            }
            // and with the transport solver on a spread of n
            let pts = orbit(spec, x, &OrbitBudget::sufficient(spec, 202)).map_err(err)?;
            let gaps = ergolab_core::empirics::gaps_from_points(spec.space, &pts);
            for n in [1usize, 2, 3, 7, 20, 64, 150, 200] {
                let a = empirical_measure(spec, x, n, &budget).map_err(err)?;
                let b = empirical_measure(spec, x, n + 1, &budget).map_err(err)?;
                let d = w1(&a, &b).map_err(err)?;
                ensure(d <= spec.space.diameter() / (n as f64 + 1.0) + 1e-12, || {
                    format!("{name}: solver gap {d} at n = {n}")
                })?;
                ensure((d - gaps[n - 1].1).abs() <= 1e-12, || {
                    format!("{name}: solver {d} vs identity {} at n = {n}", gaps[n - 1].1)
                })?;
            }
        }
        let sample = ReferenceSample::draw(spec.space, 7 + k as u64, 30).map_err(err)?;
        for g in meta_gap_curve(spec, &sample, &[1, 10, 100, 1000, 10_000], Some(*mesh), &budget).map_err(err)? {
            ensure(g.slack >= -1e-12, || format!("{name}: lifted gap {} > {} + {mesh} at n = {}", g.gap, g.bound, g.n))?;
        }
    }
    Ok(format!("{checked} pointwise gaps, zero violations, min slack {worst_slack:.2e}; lifted gaps within bound + mesh"))
}

fn rotation_equidistribution() -> Outcome {
    let spec = SystemSpec::golden_rotation();
    let grid = uniform_grid(PhaseSpace::Circle, 2048).map_err(err)?;
    let ns = [100usize, 1000, 10_000, 100_000];
    let budget = OrbitBudget::new(100_000, 64);
    let mut worst = 0.0f64;
    for x in PhaseSpace::Circle.sample_reference(4, 20).map_err(err)? {
        let ms = schedule_measures(&spec, &x, &ns, &budget, None).map_err(err)?;
        for (n, mu) in ns.iter().zip(&ms) {
            let d = w1_circle(mu, &grid).map_err(err)?;
            let bound = 3.0 / *n as f64 + 1.0 / 4096.0;
            ensure(d <= bound, || format!("n = {n}: {d} > {bound}"))?;
            worst = worst.max(d / bound);
        }
    }
    Ok(format!("max distance / bound = {worst:.3}"))
}

fn bifurcation_probe() -> Outcome {
    let k = 1000;
    let sample = ReferenceSample::draw(PhaseSpace::Circle, 5, 200).map_err(err)?;
    let target = arc_target(&sample, 0.5, 1024).map_err(err)?;
    let spec = SystemSpec::rotation(1.0 / k as f64);
    let d = ergolab_core::diagnostics::bifurcation_probe(&[spec], &[k / 2], &target, &sample, &OrbitBudget::new(k, 64))
        .map_err(err)?[0];
    ensure(d <= 0.02, || format!("distance {d}"))?;
    Ok(format!("lifted distance {d:.2e}"))
}

fn symbolic_oscillation() -> Outcome {
    let blocks: Vec<u64> = (0..=6).map(|i| 10u64.pow(i)).collect();
    let spec = SystemSpec::shift_on_blocks(blocks.clone(), 1);
    let oracle = block_end_frequencies(&blocks);
    let ends: Vec<usize> = oracle.iter().map(|&(e, _)| e as usize).collect();
    let m = 1_200_000;
    let budget = OrbitBudget::new(m, 64);
    let x0 = Point::Word(0);
    let ms = schedule_measures(&spec, &x0, &ends, &budget, None).map_err(err)?;
    let freqs: Vec<f64> = ms.iter().map(|mu| mu.integrate(|p| if *p == Point::Word(1) { 1.0 } else { 0.0 })).collect();
    for (f, &(end, want)) in freqs.iter().zip(&oracle) {
        ensure((f - want).abs() <= 1e-12, || format!("frequency {f} vs count {want} at {end}"))?;
    }
    let (hi, lo) = (freqs[5], freqs[6]);
    ensure(hi >= 0.43 && lo <= 0.06, || format!("block-end frequencies {hi:.4} and {lo:.4}"))?;
    let schedule = geometric_schedule(100, m, 1.2).map_err(err)?;
    let report = oscillation_score(&spec, &x0, 100, m, &schedule, 0.05, &budget).map_err(err)?;
    ensure(report.score >= 0.35, || format!("oscillation score {}", report.score))?;
    Ok(format!("frequencies {hi:.4} / {lo:.4}, oscillation score {:.4}", report.score))
}

fn pushforward_convergence() -> Outcome {
    let n = 10_000;
    let sample = ReferenceSample::draw(PhaseSpace::Circle, 6, 200).map_err(err)?;
    let ms = per_point_measures(&SystemSpec::golden_rotation(), &sample.points, n, &OrbitBudget::new(n, 64), None)
        .map_err(err)?;
    let target = MetaMeasure::dirac(uniform_grid(PhaseSpace::Circle, 2048).map_err(err)?);
    let d = lifted_w1(&MetaMeasure::uniform(ms).map_err(err)?, &target).map_err(err)?;
    ensure(d <= 0.05, || format!("lifted distance {d}"))?;
    Ok(format!("lifted distance {d:.2e}"))
}

fn anosov_katok() -> Outcome {
    let (r1, r2, theta, eps, sigma) = (0.1, 0.9, 0.05, 0.05, 0.9);
    let g_hat = build_bump_diffeo(r1, r2, theta, eps, sigma).map_err(err)?;
    let rep = verify_sublemma(&g_hat, r1, r2, theta, eps, sigma, 1000).map_err(err)?;
    ensure(rep.all_passed(), || format!("sublemma report {rep:?}"))?;
    ensure(rep.identity_margin > 0.0 && rep.area_margin > 0.0 && rep.squeeze_margin > 0.0, || {
        format!("non-positive margin in {rep:?}")
    })?;
    let q = 5;
    let g = lift_diffeo(&g_hat, q).map_err(err)?;
    let residual = commutation_residual(&g, 1.0 / q as f64, 200);
    ensure(residual <= 1e-9, || format!("commutation residual {residual}"))?;
    let spec = ak_map(None, g, golden()).map_err(err)?;
    let x0 = Point::Annulus { radius: 0.5, angle: 0.1 };
    let occ = band_occupancy(&spec, &x0, 100_000, theta, q).map_err(err)?;
    ensure((occ - theta).abs() <= 1e-3, || format!("band occupancy {occ}"))?;
    Ok(format!(
        "margins {:.1e}/{:.3}/{:.3}, commutation {residual:.1e}, occupancy {occ:.5}",
        rep.identity_margin, rep.area_margin, rep.squeeze_margin
    ))
}

fn weights(r: &mut impl FnMut() -> f64, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| 1.0 + (r() * 50.0).floor()).collect();
    let t: f64 = raw.iter().sum();
    raw.iter().map(|w| w / t).collect()
}

fn transport_oracles() -> Outcome {
    let mut r = lcg(2024);
    for _ in 0..100 {
        let k = 1 + (r() * 40.0) as usize;
        let l = 1 + (r() * 40.0) as usize;
        let wa = weights(&mut r, k);
        let wb = weights(&mut r, l);
        let a: Vec<(f64, f64)> = wa.iter().map(|&w| (r(), w)).collect();
        let b: Vec<(f64, f64)> = wb.iter().map(|&w| (r(), w)).collect();
        let to = |v: &[(f64, f64)]| {
            EmpiricalMeasure::from_masses(PhaseSpace::UnitInterval, v.iter().map(|&(x, w)| (Point::Interval(x), w)).collect())
        };
        let exact = w1_interval(&to(&a).map_err(err)?, &to(&b).map_err(err)?).map_err(err)?;
        let oracle = quantile_w1(&a, &b);
        ensure((exact - oracle).abs() <= 1e-12, || format!("interval {exact} vs oracle {oracle}"))?;
    }
    for _ in 0..50 {
        let m = 1 + (r() * 4.0) as usize;
        let n = 1 + (r() * 4.0) as usize;
        let c = CostMatrix::new(m, n, (0..m * n).map(|_| r()).collect()).map_err(err)?;
        let (mu, nu) = (weights(&mut r, m), weights(&mut r, n));
        let (v, _) = w1_discrete(&c, &mu, &nu).map_err(err)?;
        let e = lp_enumeration(&c, &mu, &nu).map_err(err)?;
        ensure((v - e).abs() <= 1e-9, || format!("simplex {v} vs enumeration {e}"))?;
    }
    for _ in 0..20 {
        let m = 2 + (r() * 10.0) as usize;
        let n = 2 + (r() * 10.0) as usize;
        let c = CostMatrix::new(m, n, (0..m * n).map(|_| r()).collect()).map_err(err)?;
        let (mu, nu) = (weights(&mut r, m), weights(&mut r, n));
        let (v, _) = w1_discrete(&c, &mu, &nu).map_err(err)?;
        let br = w1_entropic(&c, &mu, &nu, 0.02, 5000).map_err(err)?;
        ensure(br.lower <= v && v <= br.upper, || format!("bracket {br:?} misses {v}"))?;
    }
    let circle = |r: &mut dyn FnMut() -> f64, k: usize| {
        let pts: Vec<Point> = (0..k).map(|_| Point::Circle(r())).collect();
        EmpiricalMeasure::from_points(PhaseSpace::Circle, &pts)
    };
    for _ in 0..20 {
        let a = circle(&mut r, 6).map_err(err)?;
        let b = circle(&mut r, 9).map_err(err)?;
        let lifted = lifted_w1(&MetaMeasure::dirac(a.clone()), &MetaMeasure::dirac(b.clone())).map_err(err)?;
        let ground = w1(&a, &b).map_err(err)?;
        ensure(lifted == ground, || format!("isometry {lifted} vs {ground}"))?;
    }
    for _ in 0..20 {
        let k = 2 + (r() * 12.0) as usize;
        let xs = (0..k).map(|_| circle(&mut r, 5)).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let ys = (0..k).map(|_| circle(&mut r, 4)).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let l = lifted_w1(&MetaMeasure::uniform(xs.clone()).map_err(err)?, &MetaMeasure::uniform(ys.clone()).map_err(err)?)
            .map_err(err)?;
        let m = matched_l1(&xs, &ys).map_err(err)?;
        ensure(l <= m + 1e-9, || format!("lifted {l} > matched {m}"))?;
    }
    Ok("interval 100/100, enumeration 50/50, bracket 20/20, isometry 20/20, lifted <= L1 20/20".into())
}

fn divergence_estimators() -> Outcome {
    let id = SystemSpec::identity();
    let g = SystemSpec::golden_rotation();
    let sample = ReferenceSample::draw(PhaseSpace::Circle, 10, 200).map_err(err)?;
    let (n, m) = (1000, 100_000);
    let budget = OrbitBudget::new(m, 64);
    let zero = delta_e_estimate(&id, &id, n, m, &sample, &budget).map_err(err)?.value;
    ensure(zero == 0.0, || format!("identity vs identity = {zero}"))?;
    let curve = delta_e_curve(&id, &g, &[1000, 2000, 5000, 10_000, 50_000], m, &sample, &budget).map_err(err)?;
    let value = curve[0].value;
    ensure((value - 0.25).abs() <= 0.02, || format!("identity vs golden = {value}"))?;
    let direct = delta_e_estimate(&id, &g, n, m, &sample, &budget).map_err(err)?.value;
    ensure((direct - 0.25).abs() <= 0.02, || format!("identity vs golden (geometric schedule) = {direct}"))?;
    let small = ReferenceSample::draw(PhaseSpace::Circle, 11, 20).map_err(err)?;
    let self_curve = delta_e_curve(&g, &g, &[10, 30, 100, 300, 1000], 20_000, &small, &budget).map_err(err)?;
    for c in [&curve, &self_curve] {
        ensure(c.windows(2).all(|w| w[1].value <= w[0].value), || format!("curve not monotone: {c:?}"))?;
    }
    Ok(format!("id/id = 0, id/golden = {direct:.4} (curve head {value:.4}), curves monotone"))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 heteroclinic time-average limits", Duration::from_secs(1), bowen_limits),
        ("2 degenerate heteroclinic case", Duration::from_secs(1), bowen_degenerate),
        ("3 contraction bound", Duration::from_secs(300), contraction),
        ("4 rotation equidistribution", Duration::from_secs(60), rotation_equidistribution),
        ("5 bifurcation probe", Duration::from_secs(120), bifurcation_probe),
        ("6 symbolic non-statistical point", Duration::from_secs(60), symbolic_oscillation),
        ("7 ergodic pushforward convergence", Duration::from_secs(120), pushforward_convergence),
        ("8 Anosov-Katok construction", Duration::from_secs(180), anosov_katok),
        ("9 transport oracle suite", Duration::from_secs(60), transport_oracles),
        ("10 divergence estimators", Duration::from_secs(180), divergence_estimators),
    ];
    let mut failures = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if elapsed <= limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; exceeded time limit")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("{status} criterion {name} [{:.2}s / {}s]: {detail}", elapsed.as_secs_f64(), limit.as_secs());
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
