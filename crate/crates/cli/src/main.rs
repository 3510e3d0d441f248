use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chance_utility::choice_model::{choice_prob, ChoiceParams, GamblePoint};
use chance_utility::consistency::isotonic_adjust;
use chance_utility::elicitation::{compute_session_utilities, GambleKind, Session};
use chance_utility::estimation::{estimate_utility, ChoiceDataset, EstimationConfig, EstimationMethod, GammaPrior, Priors};
use chance_utility::io::{self, CurveRow};
use chance_utility::simulator::{balanced_schedule, simulate_choices, SyntheticSubject};
use chance_utility::utility_forms::{form_curve, ReliabilityContext};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "chance-utility", version, about = "Fit, simulate and export utility-of-chance curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a `c,p,y` dataset and write `c,u,omega,disposition,method,at_bound`.
    Fit(FitArgs),
    /// Simulate answers from the choice model and write a `c,p,y` dataset.
    Simulate(SimulateArgs),
    /// Evaluate utility forms or the choice curve over a lattice.
    Curves(CurvesArgs),
    /// Rebuild a saved session from its answer log and write its utility curve.
    Replay(ReplayArgs),
    /// Write a saved session's answers as a `c,p,y` dataset.
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mle,
    Bayes,
}

impl From<Method> for EstimationMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Mle => EstimationMethod::Mle,
            Method::Bayes => EstimationMethod::Bayes,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(v) => Err(format!("must be non-negative, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args)]
struct PriorArgs {
    /// Gamma prior shape for both alpha and beta.
    #[arg(long, default_value_t = 2.0, value_parser = positive)]
    prior_shape: f64,
    /// Gamma prior rate for both alpha and beta.
    #[arg(long, default_value_t = 2.0, value_parser = positive)]
    prior_rate: f64,
}

impl PriorArgs {
    fn config(&self, method: Method) -> Result<EstimationConfig> {
        let prior = GammaPrior::new(self.prior_shape, self.prior_rate)?;
        Ok(EstimationConfig { priors: Priors::both(prior), ..EstimationConfig::with_method(method.into()) })
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Mle)]
    method: Method,
    /// Project the curve onto non-decreasing utilities.
    #[arg(long)]
    isotonic: bool,
    #[command(flatten)]
    priors: PriorArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = positive)]
    alpha: f64,
    #[arg(long, value_parser = positive)]
    beta: f64,
    #[arg(long, value_delimiter = ',', required = false, default_values_t = [0.5, 0.6, 0.7, 0.8, 0.9])]
    c_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = false, default_values_t = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95])]
    p_grid: Vec<f64>,
    /// Answers per sure value; the p grid is cycled in order.
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveKind {
    Archetypal,
    Omnibus,
    Choice,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long, value_enum)]
    kind: CurveKind,
    /// Exponent numerator of the archetypal form.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    beta_u: f64,
    /// Mission time.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    x: f64,
    /// Cost scale of the disutility term.
    #[arg(long, default_value_t = 0.1, value_parser = non_negative)]
    delta: f64,
    /// Choice-model alpha (choice curves only).
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    alpha: f64,
    /// Choice-model beta (choice curves only).
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    beta: f64,
    /// Evenly spaced lattice points, ends included.
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Explicit reliability lattice; overrides --points for form curves.
    #[arg(long, value_delimiter = ',')]
    lattice: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    session: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Mle)]
    method: Method,
    #[arg(long)]
    isotonic: bool,
    #[command(flatten)]
    priors: PriorArgs,
    /// Destination for the curve; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    EndPoint,
    Adjacent,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    session: PathBuf,
    /// Adjacent answers are written on their normalized sure value.
    #[arg(long, value_enum, default_value_t = KindArg::EndPoint)]
    kind: KindArg,
    #[arg(long)]
    out: PathBuf,
}

fn buffer<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), io::IoError>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn publish(path: &Path, bytes: &[u8]) -> Result<()> {
    io::write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let file = fs::File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let observations = io::read_dataset(file).with_context(|| format!("reading {}", args.data.display()))?;
    let config = args.priors.config(args.method)?;
    let mut rows = Vec::new();
    for data in ChoiceDataset::group_by_c(&observations)? {
        let est = estimate_utility(&data, &config).with_context(|| format!("fitting c={}", data.c()))?;
        if est.detail.at_bound {
            let fit = est.detail.fit.expect("mle fits report at_bound");
            eprintln!(
                "warning: c={}: maximizer on the search box edge (alpha={:.4}, beta={:.4}); estimate is weakly identified",
                data.c(),
                fit.params.alpha(),
                fit.params.beta()
            );
        }
        rows.push(CurveRow { point: est.point, at_bound: Some(est.detail.at_bound) });
    }
    if args.isotonic {
        let points: Vec<_> = rows.iter().map(|r| r.point).collect();
        for (row, point) in rows.iter_mut().zip(isotonic_adjust(&points)?) {
            row.point = point;
        }
    }
    publish(&args.out, &buffer(|b| io::write_curve(b, &rows))?)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let params = ChoiceParams::new(args.alpha, args.beta)?;
    if args.n == 0 {
        bail!("--n must be at least 1");
    }
    let schedule = balanced_schedule(&args.c_grid, &args.p_grid, args.n)?;
    let rows = simulate_choices(&SyntheticSubject::new(params, args.seed), &schedule)?;
    publish(&args.out, &buffer(|b| io::write_dataset(b, &rows))?)
}

fn lattice(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        bail!("--points must be at least 2");
    }
    Ok((0..points).map(|k| k as f64 / (points - 1) as f64).collect())
}

fn cmd_curves(args: &CurvesArgs) -> Result<()> {
    let bytes = match args.kind {
        CurveKind::Archetypal | CurveKind::Omnibus => {
            let grid = match &args.lattice {
                Some(l) => l.clone(),
                None => lattice(args.points)?,
            };
            let template = ReliabilityContext::new(0.5, args.x, args.beta_u, args.delta)?;
            let rows = form_curve(&template, &grid)?;
            if matches!(args.kind, CurveKind::Omnibus) {
                buffer(|b| io::write_forms(b, &rows))?
            } else {
                let mut out = String::from("fbar,utility\n");
                for r in &rows {
                    out.push_str(&format!("{},{}\n", r.fbar, r.utility));
                }
                out.into_bytes()
            }
        }
        CurveKind::Choice => {
            let params = ChoiceParams::new(args.alpha, args.beta)?;
            let rows = lattice(args.points)?
                .into_iter()
                .map(|t| {
                    let d = 2.0 * t - 1.0;
                    let g = GamblePoint::new((1.0 - d) / 2.0, (1.0 + d) / 2.0)?;
                    Ok((d, choice_prob(params, g)))
                })
                .collect::<Result<Vec<_>>>()?;
            buffer(|b| io::write_choice_curve(b, &rows))?
        }
    };
    publish(&args.out, &bytes)
}

fn load_session(path: &Path) -> Result<Session> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Session::from_json(&text).with_context(|| format!("loading session {}", path.display()))
}

fn cmd_replay(args: &ReplayArgs) -> Result<()> {
    let stored = load_session(&args.session)?;
    let replayed = stored.replay().context("replaying the answer log")?;
    if replayed.pending != stored.pending || replayed.answered != stored.answered || replayed.estimates != stored.estimates {
        bail!("replayed session differs from the stored document; the file was edited or written by another build");
    }
    let config = args.priors.config(args.method)?;
    let curve = compute_session_utilities(&replayed, &config, args.isotonic)?;
    let rows: Vec<CurveRow> = curve.into_iter().map(|point| CurveRow { point, at_bound: None }).collect();
    let bytes = buffer(|b| io::write_curve(b, &rows))?;
    match &args.out {
        Some(path) => publish(path, &bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let session = load_session(&args.session)?;
    let kind = match args.kind {
        KindArg::EndPoint => GambleKind::EndPoint,
        KindArg::Adjacent => GambleKind::Adjacent,
    };
    let rows = session.export_observations(kind);
    publish(&args.out, &buffer(|b| io::write_dataset(b, &rows))?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
