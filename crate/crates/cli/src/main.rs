//! `riskclear`: clear, verify, simulate and sweep risk-aware two-stage
//! markets described by JSON scenario files.

mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskclear::mechanism::{self, BidSet};
use riskclear::{equilibrium, oracles, planner, risk, Error, OracleReport, ScenarioConfig};

use output::{emit, num, resolve_out, write_file, Table};

const KKT_TOL: f64 = 1e-6;
const SCEQ_TOL: f64 = 1e-8;
const ORACLE_GRID_STEP: f64 = 1e-4;

/// A single-line error with a machine-parsable category.
#[derive(Debug)]
pub struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = self.message.replace(['\r', '\n'], " ");
        write!(f, "error[{}]: {}", self.kind, line)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Domain(_) => "domain",
            Error::Validation { .. } | Error::Syntax { .. } => "scenario",
            Error::RejectedBid { .. } => "rejected-bid",
        };
        Failure::new(kind, e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::new("io", e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "riskclear", version, about = "Risk-aware two-stage electricity market clearing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the planner problem and print the allocation and prices.
    Clear {
        #[arg(long)]
        scenario: PathBuf,
        /// Also write the results as a CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check optimality and equilibrium conditions; exit 0 iff all hold.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Settle the mechanism on sampled renewable output.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        samples: usize,
        /// Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Ledger CSV path; the summary goes to `<stem>.summary.csv` beside it.
        #[arg(long, default_value = "simulate.csv")]
        out: PathBuf,
    },
    /// Solve and price across a range of CVaR weights.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        epsilon_from: f64,
        #[arg(long, allow_negative_numbers = true)]
        epsilon_to: f64,
        /// Number of intervals; the curve has `steps + 1` points.
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic results with brute-force references.
    OracleCompare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new("io", format!("cannot read {}: {e}", path.display())))?;
    riskclear::parse_scenario(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn seed_for(flag: Option<u64>, cfg: &ScenarioConfig) -> Result<u64, Failure> {
    flag.or(cfg.seed)
        .ok_or_else(|| Failure::new("usage", "--seed is required when the scenario has no seed"))
}

fn clear(scenario: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = load(scenario)?;
    let inst = cfg.instance();
    let sol = planner::solve_spp(inst);
    let prices = equilibrium::equilibrium_prices(&sol, inst);

    let mut rows: Vec<(String, f64)> = vec![("y_star".into(), sol.y_star)];
    for (i, x) in sol.x_star.iter().enumerate() {
        rows.push((format!("x_star_{}", i + 1), *x));
    }
    rows.extend([
        ("lambda_star".into(), sol.lambda_star),
        ("theta_star".into(), sol.theta_star),
        ("p1".into(), prices.p1),
        ("p2_slope".into(), prices.p2_slope),
        ("p2_intercept".into(), prices.p2_intercept),
        ("objective".into(), sol.objective),
    ]);

    let text: String = rows.iter().map(|(k, v)| format!("{k}={}\n", num(*v))).collect();
    output::write_stdout(text.as_bytes())?;
    if let Some(path) = out {
        let mut table = Table::new(["quantity", "value"])?;
        for (k, v) in &rows {
            table.row([k.as_str(), &num(*v)])?;
        }
        write_file(&resolve_out(path), &table.into_bytes()?)?;
    }
    Ok(())
}

fn verify(scenario: &Path) -> Result<(), Failure> {
    let cfg = load(scenario)?;
    let inst = cfg.instance();
    let sol = planner::solve_spp(inst);
    let prices = equilibrium::equilibrium_prices(&sol, inst);
    let grid = planner::default_w_grid(&sol, inst, cfg.w_grid_points());
    let kkt = planner::kkt_residuals(&sol, inst, &grid);
    let sceq = equilibrium::verify_sceq(&sol, &prices, inst, &grid);

    let mut text = String::new();
    for (name, value) in kkt.entries() {
        text += &format!("kkt.{name}={}\n", num(value));
    }
    for (name, value) in [
        ("stage1_gap", sceq.max_stage1_gap),
        ("stage2_gap", sceq.max_stage2_gap),
        ("clearing_gap", sceq.clearing_gap),
        ("stage2_clearing_gap", sceq.stage2_clearing_gap),
    ] {
        text += &format!("sceq.{name}={}\n", num(value));
    }
    text += &format!("sceq.recourse_feasible={}\n", sceq.recourse_feasible);
    let kkt_ok = kkt.max_residual() <= KKT_TOL;
    let sceq_ok = sceq.max_gap() <= SCEQ_TOL && sceq.recourse_feasible;
    let pass = kkt_ok && sceq_ok;
    text += &format!("verdict={}\n", if pass { "pass" } else { "fail" });
    output::write_stdout(text.as_bytes())?;

    if pass {
        Ok(())
    } else {
        Err(Failure::new(
            "verify",
            format!(
                "max KKT residual {} (tol {KKT_TOL:e}), max equilibrium gap {} (tol {SCEQ_TOL:e}), recourse feasible {}",
                num(kkt.max_residual()),
                num(sceq.max_gap()),
                sceq.recourse_feasible
            ),
        ))
    }
}

fn summary_path(ledger: &Path) -> PathBuf {
    let stem = ledger.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    ledger.with_file_name(format!("{stem}.summary.csv"))
}

fn simulate(scenario: &Path, samples: usize, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let cfg = load(scenario)?;
    let seed = seed_for(seed, &cfg)?;
    let inst = cfg.instance();
    let bids = BidSet::new(inst.generators().to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sim = mechanism::simulate_runs(&bids, inst.demand(), inst.risk(), inst.dist(), samples, &mut rng)?;

    let n_gen = inst.generators().len();
    let mut header: Vec<String> = ["run", "w", "p1", "p2", "y_star", "renewable_used", "renewable_spilled"]
        .map(String::from)
        .to_vec();
    for i in 1..=n_gen {
        header.extend(["stage1_qty", "stage2_qty", "stage1_payment", "stage2_payment"].map(|c| format!("{c}_{i}")));
    }
    header.push("iso_outlay".into());
    let mut ledger = Table::new(&header)?;
    for (k, r) in sim.records.iter().enumerate() {
        let mut row = vec![
            k.to_string(),
            num(r.realized_w),
            num(r.p1),
            num(r.p2),
            num(r.y_star),
            num(r.renewable_used),
            num(r.renewable_spilled),
        ];
        for g in &r.generators {
            row.extend([g.stage1_qty, g.stage2_qty, g.stage1_payment, g.stage2_payment].map(num));
        }
        row.push(num(r.iso_outlay));
        ledger.row(&row)?;
    }

    let s = &sim.summary;
    let mut summary = Table::new(["metric", "value"])?;
    summary.row(["runs", &s.runs.to_string()])?;
    summary.row(["seed", &seed.to_string()])?;
    let mut metrics = vec![
        ("alpha".to_string(), s.alpha),
        ("mean_iso_outlay".to_string(), s.mean_iso_outlay),
        ("cvar_iso_outlay".to_string(), s.cvar_iso_outlay),
        ("mean_stage2_outlay".to_string(), s.mean_stage2_outlay),
    ];
    for (i, p) in s.mean_generator_profit.iter().enumerate() {
        metrics.push((format!("mean_generator_profit_{}", i + 1), *p));
    }
    metrics.push(("max_clearing_shortfall".into(), s.max_clearing_shortfall));
    for (k, v) in &metrics {
        summary.row([k.as_str(), &num(*v)])?;
    }

    let ledger_path = resolve_out(out);
    let summary_file = summary_path(&ledger_path);
    write_file(&ledger_path, &ledger.into_bytes()?)?;
    write_file(&summary_file, &summary.into_bytes()?)?;

    let mut text = format!("ledger={}\nsummary={}\n", ledger_path.display(), summary_file.display());
    for (k, v) in &metrics {
        text += &format!("{k}={}\n", num(*v));
    }
    output::write_stdout(text.as_bytes())
}

fn sweep(scenario: &Path, from: f64, to: f64, steps: usize, out: Option<&Path>) -> Result<(), Failure> {
    if steps == 0 {
        return Err(Failure::new("usage", "--steps must be >= 1"));
    }
    for (flag, v) in [("--epsilon-from", from), ("--epsilon-to", to)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Failure::new("usage", format!("{flag} must be in [0, 1], got {v}")));
        }
    }
    let cfg = load(scenario)?;
    let grid: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { to } else { from + (to - from) * k as f64 / steps as f64 })
        .collect();
    let curve = equilibrium::epsilon_sweep(cfg.instance(), &grid)?;
    let mut table = Table::new(["epsilon", "y_star", "p1", "p2_slope", "p2_intercept"])?;
    for p in &curve {
        table.row([p.epsilon, p.y_star, p.p1, p.p2_slope, p.p2_intercept].map(num))?;
    }
    emit(out, &table.into_bytes()?)
}

fn oracle_compare(scenario: &Path, samples: usize, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = load(scenario)?;
    let seed = seed_for(seed, &cfg)?;
    let inst = cfg.instance();
    let sol = planner::solve_spp(inst);

    let grid_y = oracles::grid_search_y(inst, ORACLE_GRID_STEP)?;
    let grid_size = (inst.demand() / ORACLE_GRID_STEP).floor() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mc = oracles::mc_cvar_recourse(sol.y_star, inst, samples, &mut rng)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let saa = oracles::saa_single_stage(inst, samples, &mut rng)?;

    let reports = [
        OracleReport::new("y_star_vs_grid_search", sol.y_star, grid_y, grid_size, None)?,
        OracleReport::new("cvar_recourse_vs_monte_carlo", risk::cvar_recourse(sol.y_star, inst), mc, samples, Some(seed))?,
        OracleReport::new("objective_vs_saa", sol.objective, saa.objective, samples, Some(seed))?,
        OracleReport::new("y_star_vs_saa", sol.y_star, saa.y, samples, Some(seed))?,
    ];
    let mut table = Table::new(["check", "analytic", "oracle", "abs_gap", "rel_gap", "size", "seed"])?;
    for r in &reports {
        table.row([
            r.check.clone(),
            num(r.analytic),
            num(r.oracle),
            num(r.abs_gap),
            num(r.rel_gap),
            r.size.to_string(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    output::write_stdout(&table.into_bytes()?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Clear { scenario, out } => clear(&scenario, out.as_deref()),
        Command::Verify { scenario } => verify(&scenario),
        Command::Simulate {
            scenario,
            samples,
            seed,
            out,
        } => simulate(&scenario, samples, seed, &out),
        Command::Sweep {
            scenario,
            epsilon_from,
            epsilon_to,
            steps,
            out,
        } => sweep(&scenario, epsilon_from, epsilon_to, steps, out.as_deref()),
        Command::OracleCompare { scenario, samples, seed } => oracle_compare(&scenario, samples, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprintln!("{}", Failure::new("usage", "missing subcommand; run with --help"));
                return ExitCode::from(2);
            }
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", Failure::new("usage", first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
