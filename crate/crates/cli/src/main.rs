mod experiments;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyonsim::encoding::ChargeConfiguration;
use anyonsim::plaquette::{MeasurementBasis, Vertex};
use anyonsim::GroupElement;
use clap::Parser;

use experiments::{CliError, Experiment, ExperimentConfig, Layer};

/// Runs anyon-plaquette experiments and checks them against oracles and
/// quoted values.
#[derive(Parser, Debug)]
#[command(name = "anyonsim", version)]
struct Args {
    #[arg(long, value_enum)]
    experiment: Experiment,

    /// Simulation layer for fusion and probe experiments.
    #[arg(long, value_enum)]
    layer: Option<Layer>,

    /// Group element token (e, t0, t1, t2, c+, c-) or `all`.
    #[arg(long, default_value = "all")]
    element: String,

    /// Vertex of the gauge transform; defaults to the configuration's
    /// operation vertex, and other vertices need the abstract layer.
    #[arg(long)]
    vertex: Option<String>,

    /// x, y or `both`.
    #[arg(long, default_value = "both")]
    basis: String,

    /// Charge configuration of the encoded and photonic layers.
    #[arg(long, default_value = "v1v3")]
    configuration: String,

    /// SPDC squeezing parameter.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,

    /// Fock truncation per SPDC mode.
    #[arg(long, default_value_t = 3)]
    nmax: usize,

    /// Optical circuit JSON for the preparation stage.
    #[arg(long)]
    circuit: Option<PathBuf>,

    /// Defaults to 1e-10, or 1e-6 for photonic and optics runs.
    #[arg(long)]
    tolerance: Option<f64>,

    /// Seed of the random probe matrices.
    #[arg(long, default_value_t = 7)]
    seed: u64,

    /// JSON-lines report destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn configure(args: &Args) -> Result<ExperimentConfig, CliError> {
    let layer = match (args.experiment, args.layer) {
        (Experiment::Fusion | Experiment::Probe, l) => l.unwrap_or(Layer::Abstract),
        (Experiment::Optics, None | Some(Layer::Photonic)) => Layer::Photonic,
        (Experiment::Equivalence, None | Some(Layer::Encoded)) => Layer::Encoded,
        (e, Some(l)) => return Err(usage(format!("--layer {l:?} is not available for {e:?}").to_lowercase())),
    };
    let elements = match args.element.as_str() {
        "all" => GroupElement::ALL.to_vec(),
        s => vec![s.parse::<GroupElement>()?],
    };
    let configuration: ChargeConfiguration = args.configuration.parse()?;
    let vertex: Vertex = match &args.vertex {
        Some(v) => v.parse()?,
        None => configuration.operation_vertex(),
    };
    let bases = match args.basis.as_str() {
        "both" => vec![MeasurementBasis::X, MeasurementBasis::Y],
        s => vec![s.parse::<MeasurementBasis>()?],
    };
    if layer != Layer::Abstract && vertex != configuration.operation_vertex() {
        return Err(usage(format!(
            "configuration {} operates at {}; --vertex {} needs --layer abstract",
            configuration.label(),
            configuration.operation_vertex().label(),
            vertex.label()
        )));
    }
    if args.circuit.is_some() && args.experiment != Experiment::Optics {
        return Err(usage("--circuit applies to --experiment optics"));
    }
    if !(args.lambda > 0.0 && args.lambda < 1.0) {
        return Err(usage("--lambda must lie in (0, 1)"));
    }
    if args.nmax == 0 {
        return Err(usage("--nmax must be positive"));
    }
    let default_tol = if layer == Layer::Photonic { 1e-6 } else { 1e-10 };
    let tolerance = args.tolerance.unwrap_or(default_tol);
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(usage("--tolerance must be non-negative"));
    }
    Ok(ExperimentConfig {
        experiment: args.experiment,
        layer,
        elements,
        vertex,
        configuration,
        bases,
        lambda: args.lambda,
        n_max: args.nmax,
        circuit: args.circuit.clone(),
        tolerance,
        seed: args.seed,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = configure(&args).and_then(|cfg| experiments::run(&cfg));
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("anyonsim: {e}");
            return ExitCode::from(2);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if let Err(e) = report::write_table(&report.records, &mut out) {
        eprintln!("anyonsim: {e}");
        return ExitCode::from(2);
    }
    if let Some(path) = &args.out {
        let written = File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            report::write_jsonl(&report.records, &mut w)?;
            w.flush()
        });
        if let Err(e) = written {
            eprintln!("anyonsim: writing {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
