//! Subcommand arguments and the computations behind them.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use rayon::prelude::*;
use rovpol::dynamics::{
    adiabatic_populations, check_quadrature, orientation, propagate, write_trajectory_csv, AdiabaticProjector,
    Envelope as PulseEnvelope, PropagationOptions, Pulse, Trajectory, WavePacket,
};
use rovpol::hamiltonian::{assemble_dipole_z, assemble_h, enumerate_basis};
use rovpol::moldata::SystemSpec;
use rovpol::polaritons::{diagonalize, DiagonalizeOptions};
use rovpol::spectroscopy::{absorption_from_ground, envelope, write_sticks_csv, Envelope, LineShape, SpectrumLine};
use rovpol::topology::{
    d_matrix, default_radius, tau_along_contour, topological_phase, Contour, ContourOptions, PairPhase, TopologyReport,
};
use rovpol::vpes::{locate_degeneracies, surfaces, AnglePoint, Degeneracy, SurfaceField, SurfaceMetadata};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::sha256_hex;
use crate::plot::{Plot, Series};

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Points per axis of the surface grid.
    pub grid: usize,
    /// Also render SVG plots.
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum RunCommand {
    /// Rotational adiabatic surfaces and their degeneracies.
    Vpes(VpesArgs),
    /// Topological phases and D matrix around a closed contour.
    Topology(TopologyArgs),
    /// Absorption spectrum from the polariton ground state.
    Spectrum(SpectrumArgs),
    /// Pulse-driven wavepacket propagation.
    Dynamics(DynamicsArgs),
    /// Full figure battery at the published parameters.
    ReproducePaper(ReproduceArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VpesArgs {
    /// Leading vibro-photonic states kept in V_rot.
    #[arg(long, default_value_t = 4)]
    pub n_block: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TopologyArgs {
    /// Contour center as theta1,theta2 (rad).
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub center: [f64; 2],
    /// Contour radius (rad); defaults to a third of the distance to the
    /// nearest other degeneracy.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Number of excited surfaces in the group, counted from surface 1.
    #[arg(long, default_value_t = 3)]
    pub states: usize,
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    /// Double the sampling until every phase is stable to 1e-3 pi.
    #[arg(long)]
    pub refine: bool,
    /// Traverse the contour clockwise.
    #[arg(long)]
    pub reverse: bool,
    #[arg(long, default_value_t = 4)]
    pub n_block: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    /// Broadening full width at half maximum (cm^-1).
    #[arg(long, default_value_t = 15.0)]
    pub fwhm: f64,
    #[arg(long, default_value = "gaussian")]
    pub shape: LineShape,
    /// Wavenumber window lo,hi (cm^-1).
    #[arg(long, value_parser = parse_pair, default_value = "2850,3000")]
    pub range: [f64; 2],
    /// Envelope sampling step (cm^-1).
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeShape {
    Sin2,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DynamicsArgs {
    /// Final time (fs).
    #[arg(long, default_value_t = 3000.0)]
    pub t_end: f64,
    /// Step while the pulse is on (fs).
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Step after the pulse (fs).
    #[arg(long, default_value_t = 0.5)]
    pub dt_free: f64,
    /// Sampling interval (fs).
    #[arg(long, default_value_t = 5.0)]
    pub stride: f64,
    /// Peak field (a.u.).
    #[arg(long, default_value_t = 0.1 * FRAC_1_SQRT_2)]
    pub e0: f64,
    /// Carrier wavenumber (cm^-1).
    #[arg(long, default_value_t = 2926.1)]
    pub carrier: f64,
    /// Pulse duration (fs).
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, value_enum, default_value_t = EnvelopeShape::Sin2)]
    pub envelope: EnvelopeShape,
    /// Carrier phase (rad).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phase: f64,
    /// Gauss-Legendre nodes per angle for the adiabatic projection;
    /// defaults to 2 (J_max + 1).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Fail instead of warning when doubling the nodes moves a population
    /// by more than 1e-6.
    #[arg(long)]
    pub strict_quadrature: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReproduceArgs {
    /// Final time of the dynamics runs (fs).
    #[arg(long, default_value_t = 3000.0)]
    pub t_end: f64,
    #[arg(long)]
    pub skip_dynamics: bool,
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => {
            let a: f64 = a.parse().map_err(|e| format!("`{a}`: {e}"))?;
            let b: f64 = b.parse().map_err(|e| format!("`{b}`: {e}"))?;
            Ok([a, b])
        }
        _ => Err(format!("expected two comma-separated numbers, got `{s}`")),
    }
}

/// Files written under one run directory, with their hashes.
pub struct Artifacts {
    root: PathBuf,
    svg: bool,
    pub files: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn new(root: &Path, svg: bool) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|source| CliError::Output {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            svg,
            files: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        let io = |source| CliError::Output {
            path: path.clone(),
            source,
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(&path, bytes).map_err(io)?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn with(&mut self, rel: &str, fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(rovpol::Error::from)?;
        self.write(rel, &buf)
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(rovpol::Error::from)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    fn plot(&mut self, rel: &str, plot: Plot) -> Result<()> {
        if self.svg {
            self.write(rel, plot.to_svg().as_bytes())?;
        }
        Ok(())
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}/{name}")
    }
}

/// Every degeneracy between consecutive excited surfaces on the grid.
fn all_degeneracies(field: &SurfaceField) -> Result<Vec<Degeneracy>> {
    let mut out = Vec::new();
    for k in 1..field.n_block.saturating_sub(1) {
        match locate_degeneracies(field, (k, k + 1)) {
            Ok(found) => out.extend(found),
            Err(rovpol::Error::NoDegeneracy { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

pub fn vpes(
    spec: &SystemSpec,
    args: &VpesArgs,
    settings: &Settings,
    art: &mut Artifacts,
    prefix: &str,
) -> Result<SurfaceMetadata> {
    let field = surfaces(spec, settings.grid, args.n_block)?;
    let meta = SurfaceMetadata::new(&field, all_degeneracies(&field)?);
    art.with(&join(prefix, "surfaces.csv"), |w| field.write_csv(w))?;
    art.json(&join(prefix, "degeneracies.json"), &meta)?;

    let cut = |fix_first: bool| {
        let n = field.resolution();
        let mid = (0..n)
            .min_by(|&a, &b| {
                (field.thetas[a] - PI / 2.0)
                    .abs()
                    .total_cmp(&(field.thetas[b] - PI / 2.0).abs())
            })
            .unwrap_or(0);
        let idx: Vec<usize> = (0..n)
            .map(|i| if fix_first { mid * n + i } else { i * n + mid })
            .collect();
        let mut plot = Plot::new(
            if fix_first { "theta1 = pi/2" } else { "theta2 = pi/2" },
            if fix_first { "theta2 (rad)" } else { "theta1 (rad)" },
            "energy (cm-1)",
        );
        for k in 1..field.n_block {
            plot = plot.with(Series::line(
                format!("surface {k}"),
                field.thetas.clone(),
                idx.iter().map(|&i| field.values[i][k]).collect(),
            ));
        }
        plot
    };
    art.plot(&join(prefix, "cut_theta2.svg"), cut(false))?;
    art.plot(&join(prefix, "cut_theta1.svg"), cut(true))?;
    Ok(meta)
}

/// Phases recorded when the state group is not isolated enough for a D matrix.
#[derive(Debug, Serialize)]
struct PhaseOnlyReport<'a> {
    contour: &'a Contour,
    states: &'a [usize],
    phases: Vec<PairPhase>,
    error: String,
}

fn gamma_plot(phases: &[PairPhase]) -> Plot {
    phases
        .iter()
        .fold(Plot::new("ADT angles", "phi (rad)", "gamma (rad)"), |plot, p| {
            let n = p.gamma.len() - 1;
            let phis = (0..=n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
            plot.with(Series::line(
                format!("gamma {}-{}", p.pair.0, p.pair.1),
                phis,
                p.gamma.clone(),
            ))
        })
}

fn contour_run(
    spec: &SystemSpec,
    contour: &Contour,
    states: &[usize],
    opts: &ContourOptions,
    art: &mut Artifacts,
    prefix: &str,
) -> Result<TopologyReport> {
    match d_matrix(spec, contour, states, opts) {
        Ok(report) => {
            art.json(&join(prefix, "topology.json"), &report)?;
            art.with(&join(prefix, "gamma.csv"), |w| report.write_gamma_csv(w))?;
            art.plot(&join(prefix, "gamma.svg"), gamma_plot(&report.phases))?;
            Ok(report)
        }
        Err(err @ rovpol::Error::NotIsolated { .. }) => {
            let trace = tau_along_contour(spec, contour, states, opts)?;
            let phases = states
                .windows(2)
                .map(|w| topological_phase(&trace, (w[0], w[1])))
                .collect::<rovpol::Result<Vec<_>>>()?;
            art.plot(&join(prefix, "gamma.svg"), gamma_plot(&phases))?;
            art.json(
                &join(prefix, "phases.json"),
                &PhaseOnlyReport {
                    contour: &trace.contour,
                    states,
                    phases,
                    error: err.to_string(),
                },
            )?;
            Err(err.into())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn topology(
    spec: &SystemSpec,
    args: &TopologyArgs,
    settings: &Settings,
    art: &mut Artifacts,
) -> Result<TopologyReport> {
    if args.states < 2 || args.states + 1 > args.n_block {
        return Err(CliError::Usage(format!(
            "--states must lie in 2..={} for a block of {}",
            args.n_block.saturating_sub(1),
            args.n_block
        )));
    }
    let center = AnglePoint::new(args.center[0], args.center[1])?;
    let field = surfaces(spec, settings.grid, args.n_block)?;
    let known: Vec<AnglePoint> = all_degeneracies(&field)?.iter().map(|d| d.point).collect();
    let radius = match args.radius {
        Some(r) => r,
        None => {
            let others: Vec<AnglePoint> = known.iter().copied().filter(|p| p.distance(&center) > 1e-3).collect();
            default_radius(center, &others)
        }
    };
    let mut contour = Contour::new(center, radius, args.samples)?;
    if args.reverse {
        contour = contour.reversed();
    }
    let opts = ContourOptions {
        n_block: args.n_block,
        degeneracies: known,
        refine: args.refine,
        ..ContourOptions::default()
    };
    let states: Vec<usize> = (1..=args.states).collect();
    contour_run(spec, &contour, &states, &opts, art, "")
}

/// Headline numbers written next to the spectrum CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub g_cm1: f64,
    pub ground_energy_cm1: f64,
    pub sum_rule_total: f64,
    pub sum_rule_expected: f64,
    pub n_lines: usize,
    pub envelope_peak: f64,
    pub strongest: Vec<SpectrumLine>,
}

pub struct SpectrumRun {
    pub lines: Vec<SpectrumLine>,
    pub envelope: Envelope,
    pub summary: SpectrumSummary,
}

pub fn compute_spectrum(spec: &SystemSpec, args: &SpectrumArgs) -> Result<SpectrumRun> {
    let window = (args.range[0], args.range[1]);
    if !(window.0 < window.1 && window.0.is_finite() && window.1.is_finite()) {
        return Err(CliError::Usage(format!("empty range {window:?}")));
    }
    let data = absorption_from_ground(spec)?;
    let lines = data.lines(Some(window));
    let env = envelope(&lines, args.fwhm, args.shape, window, args.step)?;
    let (total, expected) = data.sum_rule();
    let mut strongest = lines.clone();
    strongest.sort_by(|a, b| b.intensity.total_cmp(&a.intensity));
    strongest.truncate(5);
    Ok(SpectrumRun {
        summary: SpectrumSummary {
            g_cm1: spec.cavity.g,
            ground_energy_cm1: data.ground.energy,
            sum_rule_total: total,
            sum_rule_expected: expected,
            n_lines: lines.len(),
            envelope_peak: env.peak(),
            strongest,
        },
        lines,
        envelope: env,
    })
}

pub fn write_spectrum(run: &SpectrumRun, art: &mut Artifacts, prefix: &str) -> Result<()> {
    art.with(&join(prefix, "sticks.csv"), |w| write_sticks_csv(&run.lines, w))?;
    art.with(&join(prefix, "envelope.csv"), |w| run.envelope.write_csv(w))?;
    art.json(&join(prefix, "summary.json"), &run.summary)?;
    let peak_stick = run.lines.iter().map(|l| l.intensity).fold(0.0, f64::max);
    let scale = if peak_stick > 0.0 {
        run.envelope.peak() / peak_stick
    } else {
        1.0
    };
    let plot = Plot::new(
        format!("g = {} cm-1", run.summary.g_cm1),
        "wavenumber (cm-1)",
        "intensity (arb.)",
    )
    .with(Series::line(
        "envelope",
        run.envelope.wavenumbers.clone(),
        run.envelope.values.clone(),
    ))
    .with(Series::sticks(
        "sticks (scaled)",
        run.lines.iter().map(|l| l.wavenumber).collect(),
        run.lines.iter().map(|l| l.intensity * scale).collect(),
    ));
    art.plot(&join(prefix, "spectrum.svg"), plot)
}

/// Headline numbers written next to the trajectory CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicsSummary {
    pub n_states: usize,
    pub ground_energy_cm1: f64,
    pub pulse: Pulse,
    pub samples: usize,
    pub max_norm_drift: f64,
    pub projector_nodes: usize,
    /// Largest population change when the projector nodes are doubled.
    pub quadrature_change: f64,
    pub quadrature_resolved: bool,
    pub final_populations: Vec<f64>,
    pub final_orientation: Vec<f64>,
}

pub struct DynamicsRun {
    pub trajectory: Trajectory,
    pub populations: Vec<Vec<f64>>,
    pub orientations: Vec<Vec<f64>>,
    pub summary: DynamicsSummary,
}

pub const QUADRATURE_TOL: f64 = 1e-6;

pub fn compute_dynamics(spec: &SystemSpec, args: &DynamicsArgs) -> Result<DynamicsRun> {
    let envelope = match args.envelope {
        EnvelopeShape::Sin2 => PulseEnvelope::Sin2 {
            duration_fs: args.duration,
        },
        EnvelopeShape::Flat => PulseEnvelope::Flat {
            duration_fs: args.duration,
        },
    };
    let pulse = Pulse {
        e0_au: args.e0,
        carrier_cm1: args.carrier,
        envelope,
        phase: args.phase,
    };
    pulse.validate()?;
    let opts = PropagationOptions {
        dt: args.dt,
        dt_free: args.dt_free,
        stride: args.stride,
        ..PropagationOptions::default()
    };
    let basis = enumerate_basis(spec)?;
    let h = assemble_h(spec, &basis)?;
    let d = assemble_dipole_z(spec, &basis)?;
    let ground = diagonalize(&h, &basis, DiagonalizeOptions::lowest(1))?
        .into_iter()
        .next()
        .ok_or(rovpol::Error::EmptyBasis)?;
    let psi0 = WavePacket::from_real(&ground.coeffs, 0.0);
    let trajectory = propagate(&h, &d, &pulse, &psi0, args.t_end, &opts)?;

    let j_max = basis.j_max().iter().copied().max().unwrap_or(0) as usize;
    let nodes = args.nodes.unwrap_or(2 * (j_max + 1));
    let projector = AdiabaticProjector::new(spec, &basis, nodes)?;
    let populations = adiabatic_populations(&trajectory, &projector);
    let orientations: Vec<Vec<f64>> = (0..basis.n_mol())
        .map(|i| orientation(&trajectory, &basis, i))
        .collect();
    let last = trajectory.states.last().ok_or(rovpol::Error::EmptyBasis)?;
    let quadrature_change = match check_quadrature(spec, &basis, last, nodes, QUADRATURE_TOL) {
        Ok(change) => change,
        Err(rovpol::Error::QuadratureUnderResolved { change }) if !args.strict_quadrature => change,
        Err(e) => return Err(e.into()),
    };
    Ok(DynamicsRun {
        summary: DynamicsSummary {
            n_states: basis.len(),
            ground_energy_cm1: ground.energy,
            pulse,
            samples: trajectory.len(),
            max_norm_drift: trajectory.max_norm_drift(),
            projector_nodes: nodes,
            quadrature_change,
            quadrature_resolved: quadrature_change <= QUADRATURE_TOL,
            final_populations: populations.last().cloned().unwrap_or_default(),
            final_orientation: orientations.iter().map(|o| o.last().copied().unwrap_or(0.0)).collect(),
        },
        trajectory,
        populations,
        orientations,
    })
}

pub fn write_dynamics(run: &DynamicsRun, spec: &SystemSpec, art: &mut Artifacts, prefix: &str) -> Result<()> {
    art.with(&join(prefix, "trajectory.csv"), |w| {
        write_trajectory_csv(&run.trajectory, &run.populations, &run.orientations, w)
    })?;
    art.json(&join(prefix, "summary.json"), &run.summary)?;
    let times = run.trajectory.times.clone();
    let n_pop = run.populations.first().map_or(0, Vec::len);
    let pops = (1..n_pop.min(4)).fold(
        Plot::new("excited adiabatic populations", "time (fs)", "population"),
        |plot, k| {
            plot.with(Series::line(
                format!("surface {k}"),
                times.clone(),
                run.populations.iter().map(|p| p[k]).collect(),
            ))
        },
    );
    art.plot(&join(prefix, "populations.svg"), pops)?;
    let cos = run.orientations.iter().enumerate().fold(
        Plot::new("orientation", "time (fs)", "<cos theta>"),
        |plot, (i, o)| {
            let label = spec
                .molecules
                .get(i)
                .map_or_else(|| format!("molecule {}", i + 1), |m| m.label.clone());
            plot.with(Series::line(label, times.clone(), o.clone()))
        },
    );
    art.plot(&join(prefix, "orientation.svg"), cos)
}

/// Coupling strengths of the published figures (cm^-1).
pub const G_SURFACES: f64 = 33.26;
pub const G_SPECTRA: [f64; 4] = [66.6, 133.2, 199.8, 266.4];
pub const G_DYNAMICS: f64 = 133.2;

#[derive(Debug, Serialize)]
struct EnvelopeComparison {
    g_cm1: f64,
    /// max |mixed - identical| over the larger envelope peak.
    relative_linf: f64,
}

#[derive(Debug, Serialize)]
struct TopologyOutcome {
    name: String,
    alpha_over_pi: Vec<(usize, usize, f64)>,
    d_diagonal: Option<Vec<f64>>,
    note: Option<String>,
}

fn run_contour(
    spec: &SystemSpec,
    contour: &Contour,
    opts: &ContourOptions,
    art: &mut Artifacts,
    name: &str,
) -> Result<TopologyOutcome> {
    let states = [1, 2, 3];
    let (phases, d_diagonal, note) = match contour_run(spec, contour, &states, opts, art, name) {
        Ok(rep) => (rep.phases, Some(rep.d_diagonal), None),
        Err(CliError::Core(e @ rovpol::Error::NotIsolated { .. })) => {
            let trace = tau_along_contour(spec, contour, &states, opts)?;
            let phases = [(1, 2), (2, 3)]
                .into_iter()
                .map(|p| topological_phase(&trace, p))
                .collect::<rovpol::Result<Vec<_>>>()?;
            (phases, None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    Ok(TopologyOutcome {
        name: name.to_string(),
        alpha_over_pi: phases.iter().map(|p| (p.pair.0, p.pair.1, p.alpha_over_pi)).collect(),
        d_diagonal,
        note,
    })
}

/// `systems` holds the mixed, identical and H37Cl-pair configurations.
pub fn reproduce(systems: &[SystemSpec], args: &ReproduceArgs, settings: &Settings, art: &mut Artifacts) -> Result<()> {
    let [mixed, identical, heavy] = systems else {
        return Err(CliError::Usage(format!(
            "expected three systems, found {}",
            systems.len()
        )));
    };
    let vpes_args = VpesArgs { n_block: 4 };
    let mixed_s = mixed.clone().with_coupling(G_SURFACES);
    let ident_s = identical.clone().with_coupling(G_SURFACES);
    let meta = vpes(&mixed_s, &vpes_args, settings, art, "fig1_vpes/mixed")?;
    vpes(&ident_s, &vpes_args, settings, art, "fig1_vpes/identical")?;
    eprintln!("fig1: surfaces written");

    let of_pair = |pair: (usize, usize)| {
        meta.degeneracies
            .iter()
            .filter(|d| d.pair == pair)
            .map(|d| d.point)
            .collect::<Vec<_>>()
    };
    let (d12, d23) = (of_pair((1, 2)), of_pair((2, 3)));
    let (Some(&a), Some(&b)) = (d12.first(), d23.first()) else {
        return Err(rovpol::Error::NoDegeneracy {
            threshold: rovpol::vpes::DEGENERACY_THRESHOLD,
            min_gap: f64::NAN,
        }
        .into());
    };
    let known: Vec<AnglePoint> = meta.degeneracies.iter().map(|d| d.point).collect();
    let opts = ContourOptions {
        degeneracies: known.clone(),
        ..ContourOptions::default()
    };
    let mut outcomes = Vec::new();
    for (name, target) in [("fig2_topology/lici_12", a), ("fig2_topology/lici_23", b)] {
        let contour = Contour::new(target, default_radius(target, &known), 512)?;
        outcomes.push(run_contour(&mixed_s, &contour, &opts, art, name)?);
    }
    let center = AnglePoint::new(0.5 * (a.theta1 + b.theta1), 0.5 * (a.theta2 + b.theta2))?;
    let inside = center.distance(&a).max(center.distance(&b));
    let outside = known
        .iter()
        .map(|p| center.distance(p))
        .filter(|&d| d > inside + 1e-9)
        .fold(f64::INFINITY, f64::min);
    let radius = if outside.is_finite() {
        0.5 * (inside + outside)
    } else {
        1.5 * inside
    };
    let contour = Contour::new(center, radius, 512)?;
    outcomes.push(run_contour(&mixed_s, &contour, &opts, art, "fig2_topology/two_lici")?);
    let contour = Contour::new(AnglePoint::new(PI / 2.0, PI / 2.0)?, 0.65, 512)?;
    outcomes.push(run_contour(
        &ident_s,
        &contour,
        &ContourOptions::default(),
        art,
        "fig3_topology",
    )?);
    art.json("fig2_topology/summary.json", &outcomes)?;
    eprintln!("fig2-3: topology written");

    let spec_args = SpectrumArgs {
        fwhm: 15.0,
        shape: LineShape::Gaussian,
        range: [2850.0, 3000.0],
        step: 0.1,
    };
    let jobs: Vec<(f64, &str, SystemSpec)> = G_SPECTRA
        .iter()
        .flat_map(|&g| {
            [
                (g, "mixed", mixed.clone().with_coupling(g)),
                (g, "identical", identical.clone().with_coupling(g)),
            ]
        })
        .collect();
    let spectra = jobs
        .par_iter()
        .map(|(_, _, s)| compute_spectrum(s, &spec_args))
        .collect::<Result<Vec<_>>>()?;
    let mut comparison = Vec::new();
    for (pair, runs) in jobs.chunks(2).zip(spectra.chunks(2)) {
        let g = pair[0].0;
        for ((_, name, _), run) in pair.iter().zip(runs) {
            write_spectrum(run, art, &format!("fig4_spectra/g{g}/{name}"))?;
        }
        let (m, i) = (&runs[0].envelope, &runs[1].envelope);
        let diff = m
            .values
            .iter()
            .zip(&i.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        comparison.push(EnvelopeComparison {
            g_cm1: g,
            relative_linf: diff / m.peak().max(i.peak()),
        });
    }
    art.json("fig4_spectra/envelope_comparison.json", &comparison)?;
    eprintln!("fig4: spectra written");

    if args.skip_dynamics {
        return Ok(());
    }
    let dyn_args = DynamicsArgs {
        t_end: args.t_end,
        dt: 0.1,
        dt_free: 0.5,
        stride: 5.0,
        e0: 0.1 * FRAC_1_SQRT_2,
        carrier: 2926.1,
        duration: 60.0,
        envelope: EnvelopeShape::Sin2,
        phase: 0.0,
        nodes: None,
        strict_quadrature: false,
    };
    let runs: Vec<(&str, SystemSpec)> = vec![
        ("mixed", mixed.clone().with_coupling(G_DYNAMICS)),
        ("identical", identical.clone().with_coupling(G_DYNAMICS)),
        ("hcl37", heavy.clone().with_coupling(G_DYNAMICS)),
    ];
    let results = runs
        .par_iter()
        .map(|(_, s)| compute_dynamics(s, &dyn_args))
        .collect::<Result<Vec<_>>>()?;
    for ((name, s), run) in runs.iter().zip(&results) {
        write_dynamics(run, s, art, &format!("fig5_dynamics/{name}"))?;
    }
    let times = results[0].trajectory.times.clone();
    let cos = Plot::new("orientation by pairing", "time (fs)", "<cos theta>")
        .with(Series::line(
            "H35Cl (mixed)",
            times.clone(),
            results[0].orientations[0].clone(),
        ))
        .with(Series::line(
            "H37Cl (mixed)",
            times.clone(),
            results[0].orientations[1].clone(),
        ))
        .with(Series::line(
            "H35Cl (2 x H35Cl)",
            times.clone(),
            results[1].orientations[0].clone(),
        ))
        .with(Series::line(
            "H37Cl (2 x H37Cl)",
            times,
            results[2].orientations[0].clone(),
        ));
    art.plot("fig5_dynamics/orientation_comparison.svg", cos)?;
    eprintln!("fig5: dynamics written");
    Ok(())
}
