//! Subcommand implementations.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use specfact_core::io as core_io;
use specfact_core::pauli::{build_model, Boundary, Couplings, ModelKind, ModelSpec};
use specfact_core::{dynamics, moments, partition, spectra, thermo};
use specfact_core::{Spectrum, SubsystemCount};

use crate::manifest::RunManifest;
use crate::output::{atomic_write, read_spectrum, resolve_output, write_spectrum};
use crate::{CliError, CliResult, SolverArgs};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Sample a GOE spectrum (needs --qubits).
    #[arg(long, conflicts_with_all = ["model", "free"])]
    goe: bool,

    /// Qubit count for --goe.
    #[arg(long)]
    qubits: Option<u32>,

    /// Chain model name: classical-ising, transverse-ising, xxx, xxz-nnn.
    #[arg(long, conflicts_with = "free")]
    model: Option<String>,

    /// Chain length for --model.
    #[arg(long)]
    length: Option<usize>,

    /// Bond coupling J.
    #[arg(long)]
    j: Option<f64>,

    /// Transverse field g.
    #[arg(long)]
    g: Option<f64>,

    /// XXZ anisotropy.
    #[arg(long)]
    delta: Option<f64>,

    /// Next-nearest-neighbor coupling.
    #[arg(long)]
    j2: Option<f64>,

    /// Boundary condition: open or periodic.
    #[arg(long, default_value = "open")]
    boundary: String,

    /// Free-model couplings, comma-separated (spectrum of all signed sums).
    #[arg(long)]
    free: Option<String>,

    /// Model description as a JSON file:
    /// {"model": "...", "length": N, "couplings": {"j": .., "g": .., "delta": .., "j2": ..}, "boundary": "open"|"periodic"}.
    #[arg(long, conflicts_with_all = ["model", "free", "goe"])]
    model_json: Option<PathBuf>,

    /// RNG seed (GOE only).
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output file (.csv or .json).
    #[arg(short, long)]
    output: PathBuf,
}

fn parse_boundary(s: &str) -> CliResult<Boundary> {
    match s {
        "open" => Ok(Boundary::Open),
        "periodic" => Ok(Boundary::Periodic),
        other => Err(CliError::Usage(format!(
            "unknown boundary `{other}` (expected open or periodic)"
        ))),
    }
}

fn model_spec(
    name: &str,
    length: usize,
    args_j: Option<f64>,
    args_g: Option<f64>,
    args_delta: Option<f64>,
    args_j2: Option<f64>,
    boundary: &str,
) -> CliResult<ModelSpec> {
    let model: ModelKind = name.parse().map_err(|e: specfact_core::Error| {
        CliError::Usage(e.to_string())
    })?;
    let defaults = Couplings::default();
    Ok(ModelSpec {
        model,
        length,
        couplings: Couplings {
            j: args_j.unwrap_or(defaults.j),
            g: args_g.unwrap_or(defaults.g),
            delta: args_delta.unwrap_or(defaults.delta),
            j2: args_j2.unwrap_or(defaults.j2),
        },
        boundary: parse_boundary(boundary)?,
    })
}

pub fn generate(args: &GenerateArgs) -> CliResult<()> {
    let spectrum = if args.goe {
        let qubits = args
            .qubits
            .ok_or_else(|| CliError::Usage("--goe requires --qubits".into()))?;
        spectra::sample_goe(qubits, args.seed)?
    } else if let Some(path) = &args.model_json {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let spec: ModelSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let op = build_model(&spec)?;
        let s = spectra::diagonalize(&op)?;
        Spectrum::new(
            s.energies().to_vec(),
            spectra::Source::Model(spec.model.as_str().to_string()),
            s.n_qubits(),
            None,
        )?
    } else if let Some(name) = &args.model {
        let length = args
            .length
            .ok_or_else(|| CliError::Usage("--model requires --length".into()))?;
        let spec = model_spec(
            name,
            length,
            args.j,
            args.g,
            args.delta,
            args.j2,
            &args.boundary,
        )?;
        let op = build_model(&spec)?;
        let s = spectra::diagonalize(&op)?;
        Spectrum::new(
            s.energies().to_vec(),
            spectra::Source::Model(name.clone()),
            s.n_qubits(),
            None,
        )?
    } else if let Some(list) = &args.free {
        let couplings = parse_f64_list(list)?;
        spectra::free_spectrum(&couplings)?
    } else {
        return Err(CliError::Usage(
            "choose a source: --goe, --model or --free".into(),
        ));
    };

    let out = resolve_output(&args.output);
    write_spectrum(&out, &spectrum)?;
    RunManifest::new("generate", Some(args.seed))
        .param("output", args.output.display())
        .param_opt("qubits", args.qubits)
        .param_opt("model", args.model.as_ref())
        .param_opt("length", args.length)
        .param_opt("free", args.free.as_ref())
        .param("boundary", &args.boundary)
        .write_for(&out)?;
    eprintln!("wrote {} energies to {}", spectrum.len(), out.display());
    Ok(())
}

fn parse_f64_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("bad number `{tok}`: {e}")))
        })
        .collect()
}

fn parse_usize_list(text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Usage(format!("bad integer `{tok}`: {e}")))
        })
        .collect()
}

#[derive(Args, Debug)]
pub struct MomentsArgs {
    /// Spectrum file (.csv or .json).
    #[arg(long, required_unless_present = "sweep_model")]
    input: Option<PathBuf>,

    /// Highest moment order.
    #[arg(long, default_value_t = 6)]
    k_max: u32,

    /// Gaussianity floor for the attached subsystem count.
    #[arg(long, default_value_t = moments::DEFAULT_DELTA_FLOOR)]
    floor: f64,

    /// Sweep mode: compute Δ_k for this chain model over --lengths.
    #[arg(long)]
    sweep_model: Option<String>,

    /// Comma-separated chain lengths for the sweep.
    #[arg(long, default_value = "8,12,16,24,32,48,64")]
    lengths: String,

    /// Comma-separated moment orders for the sweep.
    #[arg(long, default_value = "3,4,5,6")]
    ks: String,

    #[arg(long, default_value = "open")]
    boundary: String,

    #[arg(long)]
    j: Option<f64>,

    #[arg(long)]
    g: Option<f64>,

    #[arg(long)]
    delta: Option<f64>,

    #[arg(long)]
    j2: Option<f64>,

    /// Output file: report JSON, or sweep CSV in sweep mode.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct SweepReport {
    schema: &'static str,
    model: String,
    lengths: Vec<usize>,
    ks: Vec<u32>,
    /// Log-log slope of Δ_k versus L, per k.
    slopes: std::collections::BTreeMap<u32, f64>,
    skipped: Vec<(usize, u32, String)>,
}

pub fn moments(args: &MomentsArgs) -> CliResult<()> {
    if let Some(model) = &args.sweep_model {
        return moments_sweep(args, model);
    }
    let input = args.input.as_ref().expect("clap enforces input");
    let spectrum = read_spectrum(input)?;
    let mut report = moments::standardized_moments(&spectrum, args.k_max)?;
    if let SubsystemCount::Finite { m_hat } =
        moments::count_from_report(&report, args.floor)
    {
        report.m_hat = Some(m_hat);
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{json}");
    if let Some(path) = &args.output {
        let out = resolve_output(path);
        atomic_write(&out, json.as_bytes())?;
        RunManifest::new("moments", None)
            .param("input", input.display())
            .param("k_max", args.k_max)
            .param("floor", args.floor)
            .with_input(input)?
            .write_for(&out)?;
    }
    Ok(())
}

fn moments_sweep(args: &MomentsArgs, model: &str) -> CliResult<()> {
    let lengths = parse_usize_list(&args.lengths)?;
    let ks: Vec<u32> = parse_usize_list(&args.ks)?
        .into_iter()
        .map(|k| k as u32)
        .collect();
    let template = model_spec(model, 2, args.j, args.g, args.delta, args.j2, &args.boundary)?;
    let sweep = moments::delta_sweep(&template, &lengths, &ks)?;
    for (length, k, reason) in &sweep.skipped {
        eprintln!("skipped L={length} k={k}: {reason}");
    }

    let mut slopes = std::collections::BTreeMap::new();
    for &k in &ks {
        let points: Vec<(f64, f64)> = sweep
            .rows
            .iter()
            .filter(|r| r.k == k)
            .map(|r| (r.length as f64, r.delta))
            .collect();
        if let Some(slope) = moments::log_log_slope(&points) {
            slopes.insert(k, slope);
        }
    }
    let report = SweepReport {
        schema: "delta-sweep/1",
        model: model.to_string(),
        lengths,
        ks,
        slopes,
        skipped: sweep.skipped.clone(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );

    if let Some(path) = &args.output {
        let out = resolve_output(path);
        atomic_write(&out, core_io::sweep_to_csv(&sweep.rows).as_bytes())?;
        RunManifest::new("moments-sweep", None)
            .param("sweep_model", model)
            .param("lengths", &args.lengths)
            .param("ks", &args.ks)
            .param("boundary", &args.boundary)
            .write_for(&out)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct CountArgs {
    /// Spectrum file (.csv or .json).
    #[arg(long)]
    input: PathBuf,

    /// Explicit Gaussianity floor on Δ₄.
    #[arg(long, conflicts_with = "mc_sigmas")]
    floor: Option<f64>,

    /// Derive the floor from Monte-Carlo kurtosis noise:
    /// floor = sigmas · sqrt(24/D).
    #[arg(long)]
    mc_sigmas: Option<f64>,

    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct CountReport {
    schema: &'static str,
    count: SubsystemCount,
    mu4: f64,
    delta4: f64,
    floor: f64,
    spectrum_len: usize,
}

pub fn count(args: &CountArgs) -> CliResult<()> {
    let spectrum = read_spectrum(&args.input)?;
    let floor = match (args.floor, args.mc_sigmas) {
        (Some(f), _) => f,
        (None, Some(sigmas)) => moments::kurtosis_noise_floor(spectrum.len(), sigmas),
        (None, None) => moments::DEFAULT_DELTA_FLOOR,
    };
    let report = moments::standardized_moments(&spectrum, 4)?;
    let mu4 = report.standardized_moments[&4];
    let out_report = CountReport {
        schema: "subsystem-count/1",
        count: moments::count_from_report(&report, floor),
        mu4,
        delta4: (mu4 - 3.0).abs(),
        floor,
        spectrum_len: spectrum.len(),
    };
    let json = serde_json::to_string_pretty(&out_report).expect("report serializes");
    println!("{json}");
    if let Some(path) = &args.output {
        let out = resolve_output(path);
        atomic_write(&out, json.as_bytes())?;
        RunManifest::new("count", None)
            .param("input", args.input.display())
            .param("floor", floor)
            .with_input(&args.input)?
            .write_for(&out)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct PartitionArgs {
    /// Spectrum file (.csv or .json).
    #[arg(long)]
    input: PathBuf,

    /// Dimension of factor A (default: equal split when the length is an
    /// even power of two).
    #[arg(long)]
    d_a: Option<usize>,

    /// Dimension of factor B.
    #[arg(long)]
    d_b: Option<usize>,

    #[command(flatten)]
    solver: SolverArgs,

    /// Output JSON file for the partition result.
    #[arg(short, long)]
    output: PathBuf,
}

/// Equal bipartition dimensions for a spectrum length, when available.
fn split_dims(len: usize, d_a: Option<usize>, d_b: Option<usize>) -> CliResult<(usize, usize)> {
    match (d_a, d_b) {
        (Some(a), Some(b)) => Ok((a, b)),
        (Some(a), None) => {
            if a == 0 || len % a != 0 {
                return Err(CliError::Usage(format!(
                    "--d-a {a} does not divide spectrum length {len}"
                )));
            }
            Ok((a, len / a))
        }
        (None, Some(b)) => {
            if b == 0 || len % b != 0 {
                return Err(CliError::Usage(format!(
                    "--d-b {b} does not divide spectrum length {len}"
                )));
            }
            Ok((len / b, b))
        }
        (None, None) => {
            let is_pow2 = len.is_power_of_two();
            if !is_pow2 || len.trailing_zeros() % 2 != 0 {
                return Err(CliError::Usage(format!(
                    "spectrum length {len} has no equal bipartition; pass --d-a/--d-b"
                )));
            }
            let half = 1usize << (len.trailing_zeros() / 2);
            Ok((half, half))
        }
    }
}

pub fn partition(args: &PartitionArgs) -> CliResult<()> {
    let spectrum = read_spectrum(&args.input)?;
    let (d_a, d_b) = split_dims(spectrum.len(), args.d_a, args.d_b)?;
    let opts = args.solver.to_options()?;
    let result = partition::minimize_partition(&spectrum, d_a, d_b, &opts)?;
    let report = core_io::partition_report(&spectrum, &result);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");

    let out = resolve_output(&args.output);
    atomic_write(&out, json.as_bytes())?;
    RunManifest::new("partition", Some(opts.seed))
        .param("input", args.input.display())
        .param("d_a", d_a)
        .param("d_b", d_b)
        .param("restarts", opts.restarts)
        .param("max_iterations", opts.max_iterations)
        .param("gradient_tolerance", opts.gradient_tolerance)
        .param("init", &args.solver.init)
        .with_input(&args.input)?
        .write_for(&out)?;
    eprintln!(
        "cost {:.3e}, spectral norm {:.2} bits, |H_int| {:.3e}",
        result.cost,
        partition::spectral_norm_error(&spectrum, &result),
        result.h_int_norm
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct RecurseArgs {
    /// Spectrum file; length must be a power of 4.
    #[arg(long)]
    input: PathBuf,

    /// Maximum recursion depth.
    #[arg(long, default_value_t = 8)]
    max_depth: usize,

    #[command(flatten)]
    solver: SolverArgs,

    /// Output JSON file for the partition tree.
    #[arg(short, long)]
    output: PathBuf,
}

pub fn recurse(args: &RecurseArgs) -> CliResult<()> {
    let spectrum = read_spectrum(&args.input)?;
    let opts = args.solver.to_options()?;
    let tree = partition::recursive_partition(&spectrum, args.max_depth, &opts)?;
    let report = core_io::tree_report(&tree);
    let json = serde_json::to_string_pretty(&report).expect("tree serializes");

    let out = resolve_output(&args.output);
    atomic_write(&out, json.as_bytes())?;
    RunManifest::new("recurse", Some(opts.seed))
        .param("input", args.input.display())
        .param("max_depth", args.max_depth)
        .param("restarts", opts.restarts)
        .with_input(&args.input)?
        .write_for(&out)?;
    for (depth, split) in tree.splits() {
        eprintln!(
            "depth {depth}: length {:>6}, cost {:.3e}, spectral norm {:.2} bits",
            split.result.d_a() * split.result.d_b(),
            split.result.cost,
            split.spectral_norm
        );
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct EntangleArgs {
    /// Spectrum file (.csv or .json).
    #[arg(long)]
    input: PathBuf,

    #[arg(long)]
    d_a: Option<usize>,

    #[arg(long)]
    d_b: Option<usize>,

    #[command(flatten)]
    solver: SolverArgs,

    /// Number of product states averaged over.
    #[arg(long, default_value_t = 10)]
    n_states: usize,

    /// Number of log-spaced time points.
    #[arg(long, default_value_t = 64)]
    n_times: usize,

    /// Seed for the random-arrangement baseline.
    #[arg(long, default_value_t = 1)]
    baseline_seed: u64,

    /// Seed for the product states.
    #[arg(long, default_value_t = 2)]
    state_seed: u64,

    /// Output CSV with the growth curves.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Serialize)]
struct EntangleReport {
    schema: &'static str,
    h_int: f64,
    h_int_arbitrary: f64,
    partition_cost: f64,
    /// Time-averaged baseline/partitioned entropy ratio over the early
    /// window.
    ratio: f64,
    below_reference: bool,
    early_window_points: usize,
}

pub fn entangle(args: &EntangleArgs) -> CliResult<()> {
    let spectrum = read_spectrum(&args.input)?;
    let (d_a, d_b) = split_dims(spectrum.len(), args.d_a, args.d_b)?;
    let opts = args.solver.to_options()?;

    let result = partition::minimize_partition(&spectrum, d_a, d_b, &opts)?;
    let diag_partitioned = partition::assemble_partitioned_diagonal(&spectrum, &result)?;
    let diag_arbitrary = dynamics::random_diagonal_arrangement(&spectrum, args.baseline_seed);
    let h_arb = dynamics::diagonal_interaction_norm(&diag_arbitrary, d_a, d_b)?;

    let times = dynamics::default_time_grid(h_arb, args.n_times);
    let growth = dynamics::entropy_growth_experiment(
        &diag_partitioned,
        &diag_arbitrary,
        d_a,
        d_b,
        &times,
        args.n_states,
        result.h_int_norm,
        args.state_seed,
    )?;

    let out = resolve_output(&args.output);
    atomic_write(&out, core_io::growth_to_csv(&growth).as_bytes())?;
    RunManifest::new("entangle", Some(opts.seed))
        .param("input", args.input.display())
        .param("d_a", d_a)
        .param("d_b", d_b)
        .param("n_states", args.n_states)
        .param("n_times", args.n_times)
        .param("baseline_seed", args.baseline_seed)
        .param("state_seed", args.state_seed)
        .with_input(&args.input)?
        .write_for(&out)?;

    let report = EntangleReport {
        schema: "entangle/1",
        h_int: result.h_int_norm,
        h_int_arbitrary: h_arb,
        partition_cost: result.cost,
        ratio: growth.suppression_ratio(),
        below_reference: growth.below_reference(),
        early_window_points: growth.early_window_end(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct ThermoArgs {
    /// Spectrum file (.csv or .json).
    #[arg(long)]
    input: PathBuf,

    /// Temperature grid points (log-spaced).
    #[arg(long, default_value_t = thermo::DEFAULT_THERMO_POINTS)]
    points: usize,

    /// Lowest temperature as a multiple of stddev(E).
    #[arg(long, default_value_t = thermo::THERMO_T_MIN_FACTOR)]
    t_min_factor: f64,

    /// Highest temperature as a multiple of stddev(E).
    #[arg(long, default_value_t = thermo::THERMO_T_MAX_FACTOR)]
    t_max_factor: f64,

    /// Gaussianity floor for the count (defaults to the reconstruction
    /// resolution).
    #[arg(long, default_value_t = thermo::RECONSTRUCTION_DELTA_FLOOR)]
    floor: f64,

    /// Output CSV with the thermodynamic curve.
    #[arg(short, long)]
    output: PathBuf,

    /// Optional CSV with the reconstructed density of states.
    #[arg(long)]
    reconstruction: Option<PathBuf>,
}

#[derive(Serialize)]
struct ThermoReport {
    schema: &'static str,
    count: SubsystemCount,
    mu4_reconstructed: f64,
    ground_state_degeneracy: usize,
}

pub fn thermo(args: &ThermoArgs) -> CliResult<()> {
    let spectrum = read_spectrum(&args.input)?;
    if args.points < 3 {
        return Err(CliError::Usage("--points must be at least 3".into()));
    }
    let sd = spectrum.stddev();
    if !(sd > 0.0) {
        return Err(CliError::Numerical("spectrum has zero variance".into()));
    }
    let lo = args.t_min_factor * sd;
    let hi = args.t_max_factor * sd;
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Usage(
            "temperature factors must satisfy 0 < t_min < t_max".into(),
        ));
    }
    let grid: Vec<f64> = (0..args.points)
        .map(|k| lo * (hi / lo).powf(k as f64 / (args.points - 1) as f64))
        .collect();

    let curve = thermo::forward_thermo(&spectrum, &grid)?;
    let recon = thermo::reconstruct_dos(&curve)?;
    let mu4 = recon.standardized_moment(4);

    let out = resolve_output(&args.output);
    atomic_write(&out, core_io::thermo_to_csv(&curve).as_bytes())?;
    let manifest = RunManifest::new("thermo", None)
        .param("input", args.input.display())
        .param("points", args.points)
        .param("t_min_factor", args.t_min_factor)
        .param("t_max_factor", args.t_max_factor)
        .param("floor", args.floor)
        .with_input(&args.input)?;
    manifest.write_for(&out)?;

    if let Some(path) = &args.reconstruction {
        let rec_out = resolve_output(path);
        atomic_write(&rec_out, core_io::reconstruction_to_csv(&recon).as_bytes())?;
        manifest.write_for(&rec_out)?;
    }

    let report = ThermoReport {
        schema: "thermo-count/1",
        count: moments::count_from_mu4(mu4, args.floor),
        mu4_reconstructed: mu4,
        ground_state_degeneracy: thermo::ground_state_degeneracy(&spectrum),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}
