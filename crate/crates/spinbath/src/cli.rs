//! Command-line interface: subcommand dispatch, flag overrides on top of the
//! TOML config, and the figure-level experiment drivers.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};

use crate::chaos::{self, SpacingStatistics};
use crate::config::{RateFit, RunConfig};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, Orientation};
use crate::output::{self, RateRow};
use crate::powder::{self, PowderPlan};
use crate::structure::SpinSystem;

#[derive(Debug, Parser)]
#[command(
    name = "spinsim",
    version,
    about = "Proton-driven spin diffusion and proton-bath chaos diagnostics under MAS"
)]
pub struct Cli {
    /// TOML run configuration; flags below override single fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Structure JSON path.
    #[arg(long, global = true)]
    pub structure: Option<PathBuf>,
    /// Bath protons to keep, counted in bath order (0 = carbons/nitrogen only).
    #[arg(long, global = true)]
    pub protons: Option<usize>,
    /// Crystallite orientations for powder/chaos/rate averaging.
    #[arg(long, global = true)]
    pub orientations: Option<usize>,
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Integrator step, e.g. "2us".
    #[arg(long, global = true, value_parser = humantime::parse_duration)]
    pub dt: Option<Duration>,
    /// Evolution horizon, e.g. "40ms".
    #[arg(long, global = true, value_parser = humantime::parse_duration)]
    pub t_max: Option<Duration>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Powder-averaged spin diffusion; per-trajectory CSVs plus aggregate.
    Simulate,
    /// Local-field dispersion curve B̄(n_p) at the polarized carbon.
    LocalField,
    /// Level-spacing histogram and η for one bath size.
    Spectrum {
        /// Magnetization sector (up-spin count); default picks the largest
        /// sector under the dimension cap.
        #[arg(long)]
        sector: Option<usize>,
    },
    /// η sweep over bath sizes, or synthetic self-tests.
    Eta {
        /// Self-test on a synthetic Poisson spectrum (expect η ≈ 1).
        #[arg(long)]
        poisson: bool,
        /// Self-test on a synthetic GOE spectrum (expect η ≈ 0).
        #[arg(long)]
        goe: bool,
        /// Level count for the synthetic self-tests.
        #[arg(long, default_value_t = 4000)]
        levels: usize,
        /// Recompute η from a stored spacing-histogram CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Early-time spin-diffusion rate per bath size.
    InitRate,
    /// Hamiltonian term table for the identity orientation.
    DumpTerms {
        /// Evaluation time within the rotor period, e.g. "10us"; default 0.
        #[arg(long, value_parser = humantime::parse_duration)]
        t: Option<Duration>,
    },
}

/// Merge flag overrides into the config.
fn apply_overrides(config: &mut RunConfig, cli: &Cli) {
    if let Some(p) = &cli.structure {
        config.structure = p.clone();
    }
    if let Some(n) = cli.protons {
        config.protons = Some(n);
    }
    if let Some(n) = cli.orientations {
        config.powder.orientations = n;
        config.chaos.orientations = n;
        config.init_rate.orientations = n;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(dt) = cli.dt {
        config.evolution.dt_s = dt.as_secs_f64();
    }
    if let Some(t) = cli.t_max {
        config.evolution.t_max_s = t.as_secs_f64();
    }
    if let Some(j) = cli.jobs {
        config.jobs = j;
    }
    if let Some(o) = &cli.out {
        config.out_dir = o.clone();
    }
}

fn load_system(config: &RunConfig) -> Result<SpinSystem> {
    let mut system = SpinSystem::load(&config.structure)?;
    if let Some(site) = config.polarized_site {
        if system.site_by_id(site).is_none() {
            return Err(Error::Config(format!("polarized site {site} not in structure")));
        }
        system.reference_site = site;
    }
    Ok(system)
}

/// The system a dynamics command actually runs: bath truncated if requested.
fn working_system(config: &RunConfig) -> Result<SpinSystem> {
    let system = load_system(config)?;
    match config.protons {
        Some(n_p) => system.truncated(n_p, config.inclusion),
        None => Ok(system),
    }
}

fn write_effective_config(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    config.save(config.out_dir.join("effective_config.toml"))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut config, &cli);
    config.validate()?;
    if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate => cmd_simulate(&config),
        Command::LocalField => cmd_local_field(&config),
        Command::Spectrum { sector } => cmd_spectrum(&config, *sector),
        Command::Eta { poisson, goe, levels, histogram } => {
            cmd_eta(&config, *poisson, *goe, *levels, histogram.as_deref())
        }
        Command::InitRate => cmd_init_rate(&config),
        Command::DumpTerms { t } => cmd_dump_terms(&config, t.map_or(0.0, |d| d.as_secs_f64())),
    }
}

fn cmd_simulate(config: &RunConfig) -> Result<()> {
    let system = working_system(config)?;
    write_effective_config(config)?;
    let plan = config.powder_plan();
    let options = config.run_options();
    let evolution = config.evolution_config();
    let records =
        powder::powder_trajectories(&system, config.mas_config(), &plan, &evolution, &options)?;

    let per = options.seeds_per_orientation;
    for (idx, record) in records.iter().enumerate() {
        let name = format!("trajectory_o{:04}_r{:02}.csv", idx / per, idx % per);
        output::write_trajectory(&config.out_dir.join(name), record)?;
    }
    let avg = powder::average_records(&records)?;
    output::write_aggregate(&config.out_dir.join("aggregate.csv"), &avg)?;

    let last = avg.times.len() - 1;
    println!(
        "powder average over {} trajectories ({} orientations × {} realizations), t_max = {:.3} ms",
        avg.n_trajectories,
        plan.n_orientations,
        per,
        avg.times[last] * 1e3
    );
    for (k, id) in avg.site_ids.iter().enumerate() {
        let pz = avg.mean[k][last];
        println!(
            "site {id}: P_z = {pz:.4} ± {:.4}  (Δ from 1/3: {:+.4})",
            avg.stderr[k][last],
            pz - 1.0 / 3.0
        );
    }
    println!("max norm drift: {:.3e}", avg.max_norm_drift);
    println!("wrote {} trajectory files and aggregate.csv to {}", records.len(), config.out_dir.display());
    Ok(())
}

fn cmd_local_field(config: &RunConfig) -> Result<()> {
    let system = load_system(config)?;
    write_effective_config(config)?;
    let full = system.bath_order(system.reference_site, config.inclusion)?.len();
    let n_max = config.local_field.max_protons.unwrap_or(full).min(full);
    let truncated = system.truncated(n_max, config.inclusion)?;
    let curve = powder::local_field_dispersion(
        &truncated,
        truncated.reference_site,
        config.inclusion,
        config.local_field_mode(),
        config.local_field.quadrature_nodes,
        config.mas_config(),
        config.build_options(),
    )?;
    output::write_local_field(&config.out_dir.join("local_field.csv"), &curve)?;

    let b_max = *curve.b_rad_s.last().expect("curve has a zero row");
    println!("local field at site {} over {} protons:", truncated.reference_site, curve.proton_ids.len());
    for (k, &b) in curve.b_rad_s.iter().enumerate() {
        let frac = if b_max > 0.0 { b / b_max } else { 0.0 };
        println!("n_p = {k:2}: B = {:8.1} rad/s  ({:5.1}% of max)", b, 100.0 * frac);
    }
    println!("wrote local_field.csv to {}", config.out_dir.display());
    Ok(())
}

fn chaos_orientations(config: &RunConfig) -> Result<Vec<Orientation>> {
    powder::sample_orientations(&PowderPlan {
        n_orientations: config.chaos.orientations,
        orientation_seed: config.chaos.orientation_seed,
        sampling: powder::OrientationSampling::UniformRandom,
    })
}

fn bath_size_or_all(config: &RunConfig, system: &SpinSystem) -> Result<usize> {
    Ok(match config.protons {
        Some(n) => n,
        None => system.bath_order(system.reference_site, config.inclusion)?.len(),
    })
}

fn cmd_spectrum(config: &RunConfig, sector: Option<usize>) -> Result<()> {
    let system = load_system(config)?;
    write_effective_config(config)?;
    let n_p = bath_size_or_all(config, &system)?;
    let mut opts = config.chaos_options();
    if sector.is_some() {
        opts.n_up = sector;
    }
    let stats = chaos::spacing_statistics(
        &system,
        n_p,
        config.inclusion,
        &chaos_orientations(config)?,
        config.mas_config(),
        &opts,
    )?;
    output::write_spacing_histogram(&config.out_dir.join("spacing.csv"), &stats)?;
    output::write_eta_summary(&config.out_dir.join("eta_summary.json"), &stats)?;
    print_stats(&stats);
    println!("wrote spacing.csv and eta_summary.json to {}", config.out_dir.display());
    Ok(())
}

fn print_stats(stats: &SpacingStatistics) {
    println!(
        "n_p = {}: sector n_up = {} (dim {}), {} orientations → η = {:.4}",
        stats.n_p,
        stats.n_up,
        stats.dimension,
        stats.per_orientation_eta.len(),
        stats.eta
    );
}

fn cmd_eta(
    config: &RunConfig,
    poisson: bool,
    goe: bool,
    levels: usize,
    histogram: Option<&Path>,
) -> Result<()> {
    if let Some(path) = histogram {
        let hist = output::read_spacing_histogram(path)?;
        let eta = chaos::eta_from_histogram(&hist)?;
        println!("η = {eta:.4} from stored histogram {}", path.display());
        return Ok(());
    }
    write_effective_config(config)?;
    if poisson || goe {
        let opts = config.chaos_options();
        if poisson {
            let spectrum = chaos::poisson_levels(levels, config.seed);
            let eta = chaos::eta_of_levels(&spectrum, &opts)?;
            output::write_selftest_summary(
                &config.out_dir.join("selftest_poisson.json"),
                "poisson",
                levels,
                eta,
            )?;
            println!("poisson self-test ({levels} levels): η = {eta:.4} (expect ≈ 1)");
        }
        if goe {
            let spectrum = chaos::goe_eigenvalues(levels, config.seed)?;
            let eta = chaos::eta_of_levels(&spectrum, &opts)?;
            output::write_selftest_summary(
                &config.out_dir.join("selftest_goe.json"),
                "goe",
                levels,
                eta,
            )?;
            println!("goe self-test ({levels} levels): η = {eta:.4} (expect ≈ 0)");
        }
        return Ok(());
    }

    let system = load_system(config)?;
    let sizes = match config.protons {
        Some(n) => vec![n],
        None => config.chaos.sweep.clone(),
    };
    if sizes.is_empty() {
        return Err(Error::Config("η sweep has no bath sizes".into()));
    }
    let orientations = chaos_orientations(config)?;
    let opts = config.chaos_options();
    let mut rows = Vec::new();
    for &n_p in &sizes {
        let stats = chaos::spacing_statistics(
            &system,
            n_p,
            config.inclusion,
            &orientations,
            config.mas_config(),
            &opts,
        )?;
        print_stats(&stats);
        output::write_eta_summary(
            &config.out_dir.join(format!("eta_summary_np{n_p}.json")),
            &stats,
        )?;
        rows.push(stats);
    }
    output::write_eta_sweep(&config.out_dir.join("eta_sweep.csv"), &rows)?;
    println!("wrote eta_sweep.csv to {}", config.out_dir.display());
    Ok(())
}

fn cmd_init_rate(config: &RunConfig) -> Result<()> {
    let system = load_system(config)?;
    write_effective_config(config)?;
    let sizes = match config.protons {
        Some(n) => vec![n],
        None => config.init_rate.bath_sizes.clone(),
    };
    if sizes.is_empty() {
        return Err(Error::Config("init-rate needs at least one bath size".into()));
    }
    let window = config.init_rate.window_s;
    let evolution = {
        let mut e = config.evolution_config();
        e.t_max = e.t_max.max(window);
        e
    };
    let plan = PowderPlan {
        n_orientations: config.init_rate.orientations,
        orientation_seed: config.powder.orientation_seed,
        sampling: powder::OrientationSampling::UniformRandom,
    };
    let options = config.run_options();

    let mut rows = Vec::new();
    for &n_p in &sizes {
        let truncated = system.truncated(n_p, config.inclusion)?;
        let avg = powder::powder_average(&truncated, config.mas_config(), &plan, &evolution, &options)?;
        let k_ref = avg
            .site_ids
            .iter()
            .position(|&id| id == truncated.reference_site)
            .ok_or_else(|| Error::Config("polarized site is not a recorded carbon".into()))?;

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, &t) in avg.times.iter().enumerate() {
            if t <= window * (1.0 + 1e-9) {
                xs.push(match config.init_rate.fit {
                    RateFit::Linear => t,
                    RateFit::Quadratic => t * t,
                });
                ys.push(1.0 - avg.mean[k_ref][i]);
            }
        }
        if xs.len() < 3 {
            return Err(Error::Config(format!(
                "only {} recorded points inside the {window} s fit window; lower the record stride",
                xs.len()
            )));
        }
        let (intercept, slope) = crate::linalg::linear_fit(&xs, &ys)?;
        let saturation = (evolution.t_max >= 2.0 * window)
            .then(|| avg.mean[k_ref][avg.times.len() - 1]);
        rows.push(RateRow { n_protons: n_p, slope, intercept, saturation });
    }
    output::write_rates(&config.out_dir.join("rates.csv"), &rows)?;

    let unit = match config.init_rate.fit {
        RateFit::Linear => "1/s",
        RateFit::Quadratic => "1/s²",
    };
    println!("early-time slope of 1 − P_z over [0, {:.1} ms], {} orientations:", window * 1e3, plan.n_orientations);
    for r in &rows {
        match r.saturation {
            Some(s) => println!(
                "n_p = {:2}: slope = {:10.3e} {unit}   saturation P_z = {s:.4}",
                r.n_protons, r.slope
            ),
            None => println!("n_p = {:2}: slope = {:10.3e} {unit}", r.n_protons, r.slope),
        }
    }
    if rows.len() > 1 {
        let slopes: Vec<f64> = rows.iter().map(|r| r.slope).collect();
        let (lo, hi) = slopes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        if mean.abs() > 0.0 {
            println!("slope spread: {:.1}% of mean", 100.0 * (hi - lo) / mean.abs());
        }
    }
    println!("wrote rates.csv to {}", config.out_dir.display());
    Ok(())
}

fn cmd_dump_terms(config: &RunConfig, t: f64) -> Result<()> {
    let system = working_system(config)?;
    write_effective_config(config)?;
    let h = build_hamiltonian(&system, &Orientation::identity(), config.mas_config(), config.build_options());
    output::write_terms(&config.out_dir.join("terms.csv"), &system, &h, t)?;
    println!(
        "wrote {} shift, {} like and {} unlike terms (t = {:.3e} s) to {}",
        h.z_terms.len(),
        h.like_pairs.len(),
        h.unlike_pairs.len(),
        t,
        config.out_dir.join("terms.csv").display()
    );
    Ok(())
}
