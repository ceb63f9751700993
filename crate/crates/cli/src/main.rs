//! `emorec`: extract features, train per-emotion HMMs, classify and evaluate.
//!
//! Exit codes: 0 on success, 1 on data errors (including partial failures),
//! 2 on usage or configuration errors.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emorec::audio::load_wav;
use emorec::classifier::{classify, evaluate, load_bundle, save_bundle, train_model_set, EmotionLabel};
use emorec::config::RunConfig;
use emorec::corpus::{
    corpus_digest, filter_corpus, generate_synthetic_corpus, load_manifest, Gender, Split, SynthOptions,
};
use emorec::features::extract_features;
use emorec::features::file::write_features;

#[derive(Debug, Parser)]
#[command(name = "emorec", version, about = "Speech emotion recognition with per-emotion HMMs")]
struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one feature file per utterance of a WAV file or manifest.
    Extract {
        /// A .wav file or a CSV manifest.
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per emotion on the manifest's train split.
    Train {
        manifest: PathBuf,
        /// Bundle directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the decision line for one WAV file.
    Classify { bundle: PathBuf, audio: PathBuf },
    /// Confusion report over the manifest's test split.
    Eval {
        bundle: PathBuf,
        manifest: PathBuf,
        #[arg(long, value_parser = parse_gender)]
        gender: Option<Gender>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate the synthetic corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Utterances per label and gender.
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 1.5)]
        duration: f64,
        #[arg(long, default_value_t = 16_000)]
        sample_rate: u32,
    },
}

fn parse_gender(s: &str) -> Result<Gender, String> {
    s.parse()
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))
}

fn feature_file_name(path: &str) -> String {
    let stem = Path::new(path).with_extension("");
    let flat: String = stem
        .to_string_lossy()
        .chars()
        .map(|c| if c == '/' || c == '\\' { '_' } else { c })
        .collect();
    format!("{flat}.feat")
}

fn cmd_extract(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let is_manifest = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let items: Vec<(String, PathBuf)> = if is_manifest {
        let base = manifest_dir(input);
        load_manifest(input)
            .map_err(data)?
            .into_iter()
            .map(|r| {
                let p = r.resolve(&base);
                (r.path, p)
            })
            .collect()
    } else {
        let name = input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| input.display().to_string());
        vec![(name, input.to_path_buf())]
    };
    create_dir(out)?;
    let mut failures = 0;
    for (name, path) in &items {
        let result = load_wav(path)
            .map_err(|e| e.to_string())
            .and_then(|clip| extract_features(&clip, &cfg.features).map_err(|e| e.to_string()))
            .and_then(|fm| {
                let dest = out.join(feature_file_name(name));
                let file = fs::File::create(&dest).map_err(|e| format!("{}: {e}", dest.display()))?;
                write_features(&fm, BufWriter::new(file)).map_err(|e| format!("{}: {e}", dest.display()))?;
                Ok(fm.num_frames())
            });
        match result {
            Ok(frames) => eprintln!("extracted {name}: {frames} frames"),
            Err(reason) => {
                failures += 1;
                eprintln!("error: {}: {reason}", path.display());
            }
        }
    }
    if failures > 0 {
        return Err(CliError::Data(format!("{failures} of {} inputs failed", items.len())));
    }
    Ok(())
}

fn cmd_train(cfg: &RunConfig, manifest: &Path, out: &Path) -> Result<(), CliError> {
    let base = manifest_dir(manifest);
    let records = filter_corpus(&load_manifest(manifest).map_err(data)?, None, Some(Split::Train), None);
    let clips = records
        .iter()
        .map(|r| {
            let path = r.resolve(&base);
            load_wav(&path)
                .map(|clip| (r.label, clip))
                .map_err(|e| data(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let digest = corpus_digest(&records, &base).map_err(data)?;
    eprintln!("training on {} utterances", clips.len());
    let (set, reports) = train_model_set(&clips, cfg, &digest).map_err(data)?;
    for (label, rep) in EmotionLabel::ALL.into_iter().zip(&reports) {
        let history: Vec<String> = rep.log_likelihood_history.iter().map(|v| format!("{v:.4}")).collect();
        eprintln!(
            "{label}: iterations={} converged={} log_likelihood=[{}]",
            rep.iterations,
            rep.converged,
            history.join(", ")
        );
    }
    save_bundle(&set, out).map_err(data)?;
    eprintln!("bundle written to {}", out.display());
    Ok(())
}

fn cmd_classify(bundle: &Path, audio: &Path) -> Result<(), CliError> {
    let set = load_bundle(bundle).map_err(data)?;
    let clip = load_wav(audio).map_err(|e| data(format!("{}: {e}", audio.display())))?;
    let scores = classify(&set, &clip).map_err(data)?;
    println!("{}", scores.decision_line());
    Ok(())
}

fn cmd_eval(bundle: &Path, manifest: &Path, gender: Option<Gender>, out: &Path) -> Result<(), CliError> {
    let set = load_bundle(bundle).map_err(data)?;
    let records = filter_corpus(&load_manifest(manifest).map_err(data)?, None, Some(Split::Test), None);
    let ev = evaluate(&set, &records, &manifest_dir(manifest), gender).map_err(data)?;
    let scope = gender.map_or("all", Gender::as_str);
    let title = match gender {
        None => "Confusion matrix, gender-independent".to_owned(),
        Some(g) => format!("Confusion matrix, gender-dependent ({g})"),
    };
    let report = ev.matrix.to_report(&title, ev.rejected.len());
    create_dir(out)?;
    let write = |name: String, text: &str| {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| data(format!("{}: {e}", path.display())))
    };
    write(format!("confusion_{scope}.txt"), &report)?;
    write(format!("confusion_{scope}.csv"), &ev.matrix.to_counts_csv())?;
    print!("{report}");
    for r in &ev.rejected {
        eprintln!("rejected: {}: {}", r.path, r.reason);
    }
    if !ev.rejected.is_empty() {
        return Err(CliError::Data(format!("{} utterances rejected", ev.rejected.len())));
    }
    Ok(())
}

fn cmd_synth(seed: u64, out: &Path, count: usize, duration: f64, sample_rate: u32) -> Result<(), CliError> {
    let opts = SynthOptions {
        seed,
        utterances_per_label_per_gender: count,
        duration_s: duration,
        sample_rate,
    };
    let records = generate_synthetic_corpus(&opts, out).map_err(|e| match e {
        emorec::corpus::CorpusError::InvalidParameter(_) => CliError::Usage(e.to_string()),
        other => data(other),
    })?;
    eprintln!("wrote {} utterances to {}", records.len(), out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Extract { input, out } => cmd_extract(&cfg, input, out),
        Command::Train { manifest, out } => cmd_train(&cfg, manifest, out),
        Command::Classify { bundle, audio } => cmd_classify(bundle, audio),
        Command::Eval {
            bundle,
            manifest,
            gender,
            out,
        } => cmd_eval(bundle, manifest, *gender, out),
        Command::Synth {
            out,
            count,
            duration,
            sample_rate,
        } => cmd_synth(cfg.seed, out, *count, *duration, *sample_rate),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
