// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use metacoarse::coarsen::CoarsenMethod;
use metacoarse::graphdata::{generate_synthetic, write_samples, ClassMotifSpec};
use metacoarse::pipeline::{
    characterization_curves, read_metrics_file, render_table2, render_table3, run_pipeline, sweep,
    sweep_configs, table_rows, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "metacoarse",
    version,
    about = "Coarsened multi-level GNN explanations for CFG malware detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic CFG corpus with planted class motifs.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// JSON motif specification; defaults to the built-in one.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Run all phases for one configuration.
    Run(RunArgs),
    /// Run the baseline and every method/ratio combination.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Directory receiving one run directory per setting plus the tables.
        #[arg(long)]
        out_root: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "kron,variation_edges")]
        methods: Vec<CoarsenMethod>,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,0.999")]
        ratios: Vec<f64>,
    },
    /// Re-render tables from `metrics.json` files or run directories.
    Report { paths: Vec<PathBuf> },
    /// Characterization over an ε grid for a finished run.
    Curves {
        run_dir: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.05,0.1,0.2,0.3,0.5,0.7,1.0"
        )]
        grid: Vec<f64>,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    coarsener: Option<CoarsenMethod>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    ig_steps: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => RunConfig::default(),
        };
        cfg.seed = Some(self.seed);
        if let Some(v) = &self.input {
            cfg.input = v.clone();
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.coarsener {
            cfg.coarsener = v;
        }
        if let Some(v) = self.r {
            cfg.r = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.epochs {
            cfg.gcn.epochs = v;
        }
        if let Some(v) = self.ig_steps {
            cfg.ig_steps = v;
        }
        Ok(cfg)
    }
}

fn write_tables(dir: &Path, t2: &str, t3: &str) -> Result<()> {
    fs::write(dir.join("table2.txt"), t2)?;
    fs::write(dir.join("table3.txt"), t3)?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate { n, seed, out, spec } => {
            let spec = match spec {
                Some(p) => serde_json_from(&p)?,
                None => ClassMotifSpec::default(),
            };
            let samples = generate_synthetic(n, &spec, seed)?;
            let header = vec![format!(
                "metacoarse {} synthetic n={n} seed={seed}",
                env!("CARGO_PKG_VERSION")
            )];
            write_samples(&out, &header, &samples)?;
            log::info!("wrote {} samples to {}", samples.len(), out.display());
        }
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let run = run_pipeline(&cfg)?;
            let (t2, t3) = table_rows(&run.metrics);
            print!("{}\n{}", render_table2(&t2), render_table3(&t3));
            log::info!("artifacts in {}", cfg.output_dir.display());
        }
        Command::Sweep {
            run,
            out_root,
            methods,
            ratios,
        } => {
            let base = run.resolve()?;
            let configs = sweep_configs(&base, &methods, &ratios, &out_root)?;
            let report = sweep(&configs)?;
            let (t2, t3) = (render_table2(&report.table2), render_table3(&report.table3));
            write_tables(&out_root, &t2, &t3)?;
            print!("{t2}\n{t3}");
            println!("models trained: {}", report.models_trained);
        }
        Command::Report { paths } => {
            if paths.is_empty() {
                bail!("no metrics given");
            }
            let (mut t2, mut t3) = (Vec::new(), Vec::new());
            for p in paths {
                let p = if p.is_dir() {
                    p.join("metrics.json")
                } else {
                    p
                };
                let m =
                    read_metrics_file(&p).with_context(|| format!("reading {}", p.display()))?;
                let (a, b) = table_rows(&m);
                t2.extend(a);
                t3.extend(b);
            }
            print!("{}\n{}", render_table2(&t2), render_table3(&t3));
        }
        Command::Curves { run_dir, grid } => {
            for table in characterization_curves(&run_dir, &grid)? {
                println!(
                    "# level {} ({} samples)",
                    table.level.tag(),
                    table.n_samples
                );
                println!("epsilon\tfid_plus\tfid_minus\tcharact");
                for r in table.rows {
                    println!(
                        "{}\t{:.4}\t{:.4}\t{:.4}",
                        r.epsilon, r.fidelity.fid_plus, r.fidelity.fid_minus, r.charact
                    );
                }
            }
        }
    }
    Ok(())
}

fn serde_json_from(path: &Path) -> Result<ClassMotifSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}
