use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use scefis_core::featsel::self_select_with;
use scefis_core::keyfeat::{analyze_image, compute_window_size, FeatureMatrix};
use scefis_core::metrics::io::{load_gray, save_mask};
use scefis_core::metrics::ScoreSummary;
use scefis_core::pipeline::report::{best_params_csv, write_report};
use scefis_core::pipeline::{
    fit_config, maa_mean, offline_best_params, random_splits, run_experiment, segment_context,
    select_features, train_model, Dataset, ExperimentReport, FeatureBank, PipelineConfig, Scope,
};
use scefis_core::segmenters::{
    baseline_threshold, segment, Baseline, Polarity, SegmenterKind, SegmenterSpec,
};
use scefis_core::synth::{speckle_dataset, SpeckleParams};
use scefis_service::{data_dir_from_env, model_path, ref_name, AppState, ServiceOptions};

#[derive(Parser)]
#[command(
    name = "scefis",
    version,
    about = "Self-configuring evolving fuzzy image segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Dataset root holding images/ and gold/.
    #[arg(long)]
    dataset: PathBuf,
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured number of runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<(Dataset, PipelineConfig)> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)
                .with_context(|| format!("reading config {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        let ds = Dataset::load(&self.dataset)
            .with_context(|| format!("loading dataset {}", self.dataset.display()))?;
        Ok((ds, cfg))
    }

    fn config_name(&self) -> String {
        self.config
            .as_deref()
            .map_or_else(|| "default".to_string(), ref_name)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Thr,
    Rg,
    Srm,
    Otsu,
    Kittler,
    Huang,
    Niblack,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolarityArg {
    Dark,
    Bright,
}

#[derive(Subcommand)]
enum Command {
    /// Select features and fit normalization on split 0.
    Configure {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "configure-out")]
        out: PathBuf,
    },
    /// Best grid parameter of every image against its gold mask.
    Maa {
        #[command(flatten)]
        common: Common,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the initial rule base on one split and store the model.
    Train {
        #[command(flatten)]
        common: Common,
        /// Which seeded split to train on.
        #[arg(long, default_value_t = 0)]
        run: usize,
        /// Defaults to $SCEFIS_DATA_DIR/models/<dataset>/<config>.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full repeated-split experiment with report.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Rewrite tables and charts from a stored report.json.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the F_3 feature matrix of a dataset as CSV.
    Features {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run feature selection on an F_3 CSV.
    Select {
        #[arg(long = "in")]
        input: PathBuf,
        /// Selection trace as key = value text.
        #[arg(long, default_value = "selection.txt")]
        trace: PathBuf,
        /// Selected columns as CSV.
        #[arg(long, default_value = "selected.csv")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Segment one image.
    Segment {
        #[arg(long, value_enum)]
        algo: Algo,
        /// Parameter for thr, rg and srm; algorithm default when omitted.
        #[arg(long)]
        param: Option<f64>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "dark")]
        polarity: PolarityArg,
        /// Keep every thresholded component.
        #[arg(long)]
        all_components: bool,
    },
    /// Serve interactive sessions over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a synthetic speckle dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_overall(report: &ExperimentReport) {
    println!("method      mean    sd      95% CI            n");
    for (name, s) in &report.overall {
        print_summary(name, s);
    }
}

fn print_summary(name: &str, s: &ScoreSummary) {
    println!(
        "{name:<10} {:.4}  {:.4}  [{:.4}, {:.4}]  {}",
        s.mean, s.sd, s.ci_lo, s.ci_hi, s.n
    );
}

fn configure(common: &Common, out: &Path) -> Result<()> {
    let (ds, cfg) = common.load()?;
    let split = &random_splits(ds.len(), 1, cfg.seed, cfg.train_fraction)[0];
    let bank = FeatureBank::build(&ds, cfg.seed_ordering)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let pick = |s: Scope| if s == Scope::All { &all } else { &split.train };
    let selection = select_features(&bank, pick(cfg.selection_scope), &cfg.selectors)?;
    let config = fit_config(&bank, &selection, pick(cfg.normalization_scope))?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("selection.txt"), selection.trace.to_text())?;
    std::fs::write(
        out.join("selfconfig.json"),
        serde_json::to_string_pretty(&config)?,
    )?;
    let t = &selection.trace;
    println!("window Z = {}", config.window_z);
    println!(
        "features {} -> {} -> {} -> {} -> {}",
        t.n_t, t.n_t1, t.n_t2, t.n_t3, t.n_l
    );
    println!("selected columns: {:?}", config.selected_columns);
    if selection.fallback {
        println!("selectors kept nothing; using the highest-variance column");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn maa(common: &Common, out: Option<&Path>) -> Result<()> {
    let (ds, cfg) = common.load()?;
    let bank = FeatureBank::build(&ds, cfg.seed_ordering)?;
    let contexts: Vec<_> = bank
        .analyses
        .iter()
        .map(|a| segment_context(a, cfg.polarity, cfg.keep_largest))
        .collect();
    let records = offline_best_params(&ds, &contexts, &cfg.spec()?)?;
    write_or_print(out, &best_params_csv(&records))?;
    eprintln!(
        "MAA mean Jaccard {:.4} over {} images",
        maa_mean(&records)?,
        records.len()
    );
    Ok(())
}

fn train(common: &Common, run: usize, out: Option<PathBuf>) -> Result<()> {
    let (ds, cfg) = common.load()?;
    let model = train_model(&ds, &cfg, run)?;
    let path = out.unwrap_or_else(|| {
        model_path(
            &data_dir_from_env(),
            &ref_name(&common.dataset),
            &common.config_name(),
        )
    });
    model.save(&path)?;
    println!(
        "{} rules from {} training images; {} images held out",
        model.segmenter.rule_base.rule_count(),
        model.train_ids.len(),
        model.test_ids.len()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn run(common: &Common, out: &Path) -> Result<()> {
    let (ds, cfg) = common.load()?;
    let report = run_experiment(&ds, &cfg)?;
    let files = write_report(&report, out)?;
    print_overall(&report);
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn report(input: &Path, out: Option<PathBuf>) -> Result<()> {
    let text =
        std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let report = ExperimentReport::from_json(&text)?;
    print_overall(&report);
    if let Some(out) = out {
        let files = write_report(&report, &out)?;
        println!("wrote {} files to {}", files.len(), out.display());
    }
    Ok(())
}

fn features(dataset: &Path, out: Option<&Path>) -> Result<()> {
    let ds = Dataset::load(dataset)?;
    let bank = FeatureBank::build(&ds, Default::default())?;
    let all: Vec<usize> = (0..ds.len()).collect();
    write_or_print(out, &bank.f3(&all).to_csv())
}

fn select(input: &Path, trace: &Path, out: &Path, config: Option<&Path>) -> Result<()> {
    let f3 = FeatureMatrix::read_csv(input)?;
    let params = match config {
        Some(p) => PipelineConfig::load(p)?.selectors,
        None => Default::default(),
    };
    let t = self_select_with(&f3.data, &params)?;
    std::fs::write(trace, t.to_text())?;
    f3.select_columns(&t.final_columns).write_csv(out)?;
    println!("kept {} of {} columns: {:?}", t.n_l, t.n_t, t.final_columns);
    Ok(())
}

fn segment_one(
    algo: Algo,
    param: Option<f64>,
    input: &Path,
    out: &Path,
    polarity: Polarity,
    keep_largest: bool,
) -> Result<()> {
    let img = load_gray(input)?;
    let baseline = match algo {
        Algo::Otsu => Some(Baseline::Otsu),
        Algo::Kittler => Some(Baseline::Kittler),
        Algo::Huang => Some(Baseline::Huang),
        Algo::Niblack => Some(Baseline::Niblack),
        _ => None,
    };
    let mask = if let Some(b) = baseline {
        if param.is_some() {
            bail!("--param does not apply to {}", b.name());
        }
        baseline_threshold(&img, b, polarity, keep_largest)?
    } else {
        let kind = match algo {
            Algo::Thr => SegmenterKind::Threshold,
            Algo::Rg => SegmenterKind::RegionGrow,
            _ => SegmenterKind::Srm,
        };
        let spec = SegmenterSpec::for_kind(kind);
        let p = param.unwrap_or(spec.default);
        let z = compute_window_size(&[img.dims()])?;
        let analysis = analyze_image("input", &img, z, Default::default())?;
        let ctx = segment_context(&analysis, polarity, keep_largest);
        segment(kind, &img, p, &ctx)?
    };
    save_mask(&mask, out)?;
    println!(
        "{} object pixels written to {}",
        mask.count(),
        out.display()
    );
    Ok(())
}

async fn serve(addr: SocketAddr, dataset: &Path, config: Option<&Path>) -> Result<()> {
    let ds =
        Dataset::load(dataset).with_context(|| format!("loading dataset {}", dataset.display()))?;
    let config_name = match config {
        Some(p) => {
            PipelineConfig::load(p).with_context(|| format!("reading config {}", p.display()))?;
            ref_name(p)
        }
        None => "default".to_string(),
    };
    let dataset_name = ref_name(dataset);
    let opts = ServiceOptions::default();
    let data_dir = opts.data_dir.clone();
    let (state, failed) = AppState::open(
        opts,
        vec![(dataset_name.clone(), ds)],
        vec![config_name.clone()],
    )?;
    for (id, e) in failed {
        eprintln!("session {id} not restored: {e}");
    }
    let model = model_path(&data_dir, &dataset_name, &config_name);
    if !model.is_file() {
        eprintln!(
            "warning: no model at {}; run `scefis train` before creating sessions",
            model.display()
        );
    }
    println!(
        "serving dataset '{dataset_name}' with config '{config_name}' on http://{addr} (data dir {})",
        data_dir.display()
    );
    scefis_service::serve(addr, state).await?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let polarity = |p: PolarityArg| match p {
        PolarityArg::Dark => Polarity::Dark,
        PolarityArg::Bright => Polarity::Bright,
    };
    match cli.command {
        Command::Configure { common, out } => configure(&common, &out),
        Command::Maa { common, out } => maa(&common, out.as_deref()),
        Command::Train { common, run, out } => train(&common, run, out),
        Command::Run { common, out } => run(&common, &out),
        Command::Report { input, out } => report(&input, out),
        Command::Features { dataset, out } => features(&dataset, out.as_deref()),
        Command::Select {
            input,
            trace,
            out,
            config,
        } => select(&input, &trace, &out, config.as_deref()),
        Command::Segment {
            algo,
            param,
            input,
            out,
            polarity: p,
            all_components,
        } => segment_one(algo, param, &input, &out, polarity(p), !all_components),
        Command::Serve {
            addr,
            dataset,
            config,
        } => tokio::runtime::Runtime::new()?.block_on(serve(addr, &dataset, config.as_deref())),
        Command::Synth { out, n, seed } => {
            let ds = speckle_dataset(&SpeckleParams {
                n_images: n,
                seed,
                ..Default::default()
            })?;
            ds.save(&out)?;
            println!("wrote {} images to {}", ds.len(), out.display());
            Ok(())
        }
    }
}
