use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aiodc_core::analyze::{one_way, Attribute};
use aiodc_core::annotate::{Compared, SessionEvent, SessionStore};
use aiodc_core::classify::{classify_dataset, load_contexts, read_labels, to_labels_string};
use aiodc_core::ingest::{
    dedupe_by_issue_id, filter_defects, load_defects, to_canonical_string, DatasetFormat, ExportOptions,
    LabelMapping,
};
use aiodc_core::report::{export_analysis_bundle, render_agreement, render_distribution, BundleOptions, OutputFormat};
use aiodc_core::taxonomy::validate_impact_path;
use aiodc_core::{bundled, AgreementResult, AiAttribute, ClassificationLabel, ImpactPath, Platform, RuleSet, Severity, Taxonomy};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aiodc", version, about = "Defect classification workbench for AI-based systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset, optionally filter and de-duplicate it, and write it in canonical form.
    Ingest(IngestArgs),
    /// Label every record with the rule engine.
    Classify(ClassifyArgs),
    /// Two-annotator sessions kept in a session log file.
    #[command(subcommand)]
    Annotate(AnnotateCommand),
    /// Write the analysis bundle for a label file.
    Report(ReportArgs),
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RuleArgs {
    /// Rule file (bundled rules when omitted).
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Taxonomy file (bundled taxonomy when omitted).
    #[arg(long)]
    taxonomy: Option<PathBuf>,
}

impl RuleArgs {
    fn load(&self) -> Result<(Taxonomy, RuleSet)> {
        let tax = match &self.taxonomy {
            Some(p) => Taxonomy::load(p).with_context(|| format!("loading taxonomy {}", p.display()))?,
            None => bundled::taxonomy(),
        };
        let rules = match &self.rules {
            Some(p) => RuleSet::load(p, &tax).with_context(|| format!("loading rules {}", p.display()))?,
            None => bundled::rules(),
        };
        Ok((tax, rules))
    }
}

#[derive(Args)]
struct IngestArgs {
    input: PathBuf,
    /// canonical, csv or github
    #[arg(long, default_value = "canonical")]
    format: DatasetFormat,
    /// Label-to-defect-type mapping for GitHub exports.
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// Framework recorded for every issue of a GitHub export.
    #[arg(long)]
    export_framework: Option<String>,
    /// Keep only this platform.
    #[arg(long)]
    platform: Option<Platform>,
    /// Keep only this framework.
    #[arg(long)]
    framework: Option<String>,
    /// Merge records linked by cross references.
    #[arg(long)]
    dedupe: bool,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Dataset to classify.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "canonical")]
    format: DatasetFormat,
    #[command(flatten)]
    rules: RuleArgs,
    /// Severity context file; labels get no severity without one.
    #[arg(long)]
    contexts: Option<PathBuf>,
    /// Label file to write (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SessionArg {
    /// Session log file.
    #[arg(long)]
    session: PathBuf,
    /// Session name inside the log; may be omitted when the log holds one.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Subcommand)]
enum AnnotateCommand {
    /// Add one annotator's label file to a session, opening it if needed.
    Import {
        #[command(flatten)]
        session: SessionArg,
        /// Label file to import.
        #[arg(long)]
        labels: PathBuf,
        /// Annotator for every label; otherwise each label's own annotator field.
        #[arg(long)]
        annotator: Option<String>,
        /// Dataset whose ids form a new session.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "canonical")]
        format: DatasetFormat,
        /// Comma-separated annotators of a new session; the first two are primaries.
        #[arg(long, value_delimiter = ',')]
        annotators: Vec<String>,
        /// Project name of a new session.
        #[arg(long, default_value = "aiodc")]
        project: String,
    },
    /// Progress counts.
    Status {
        #[command(flatten)]
        session: SessionArg,
    },
    /// Cohen's kappa between the primaries.
    Kappa {
        #[command(flatten)]
        session: SessionArg,
        /// ai, severity, combined or all
        #[arg(long, default_value = "all")]
        attr: String,
        #[arg(long, default_value = "text")]
        format: OutputFormat,
    },
    /// List disputed defects.
    Disputes {
        #[command(flatten)]
        session: SessionArg,
        #[arg(long, default_value = "combined")]
        attr: Compared,
        /// text or structured
        #[arg(long, default_value = "text")]
        format: OutputFormat,
    },
    /// Record a third annotator's decision on a dispute.
    Resolve {
        #[command(flatten)]
        session: SessionArg,
        #[arg(long)]
        defect: String,
        #[arg(long)]
        resolver: String,
        #[arg(long)]
        ai: AiAttribute,
        #[arg(long)]
        severity: Option<Severity>,
        /// Impact path such as "AI: Trustworthiness > Accuracy"; repeatable.
        #[arg(long = "impact")]
        impacts: Vec<ImpactPath>,
        #[arg(long)]
        rationale: Option<String>,
    },
    /// Write the final label of every defect.
    Consolidate {
        #[command(flatten)]
        session: SessionArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    labels: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "text")]
    format: OutputFormat,
    #[command(flatten)]
    rules: RuleArgs,
    /// Session log supplying agreement figures.
    #[arg(long)]
    session: Option<PathBuf>,
    /// Dataset name written to the metadata (label file stem by default).
    #[arg(long)]
    dataset_id: Option<String>,
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => io::stdout().write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let export = match (&a.label_map, &a.export_framework) {
        (None, None) => None,
        (map, fw) => Some(ExportOptions {
            mapping: match map {
                Some(p) => LabelMapping::load(p)?,
                None => LabelMapping::default(),
            },
            framework: fw.clone().unwrap_or_default(),
        }),
    };
    let report = load_defects(&a.input, a.format, export.as_ref())
        .with_context(|| format!("loading {}", a.input.display()))?;
    for r in &report.rejected {
        eprintln!("rejected row {}: {}", r.row, r.reason);
    }
    let mut records = report.records;
    if a.platform.is_some() || a.framework.is_some() {
        records = filter_defects(&records, a.platform, a.framework.as_deref());
    }
    if a.dedupe {
        let d = dedupe_by_issue_id(&records);
        for (r, kept) in &d.dropped {
            eprintln!("duplicate {} merged into {kept}", r.id);
        }
        records = d.kept;
    }
    eprintln!(
        "{} records written, {} rejected, {} without a defect-type label",
        records.len(),
        report.rejected.len(),
        report.unlabeled.len()
    );
    write_out(a.out.as_deref(), &to_canonical_string(&records))
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let (_, rules) = a.rules.load()?;
    let records = load_defects(&a.input, a.format, None)
        .with_context(|| format!("loading {}", a.input.display()))?
        .records;
    let contexts = match &a.contexts {
        Some(p) => load_contexts(p).with_context(|| format!("loading contexts {}", p.display()))?,
        None => BTreeMap::new(),
    };
    let labels = classify_dataset(&records, &rules, &contexts)?;
    if !labels.is_empty() {
        eprint!("{}", render_distribution(&one_way(&labels, Attribute::Ai)?, OutputFormat::Text));
    }
    write_out(a.out.as_deref(), &to_labels_string(&labels))
}

fn session_name(store: &SessionStore, arg: &SessionArg) -> Result<String> {
    if let Some(n) = &arg.name {
        return Ok(n.clone());
    }
    let names: Vec<&str> = store.sessions().map(|(n, _)| n).collect();
    match names.as_slice() {
        [one] => Ok(one.to_string()),
        [] => bail!("{} holds no session", arg.session.display()),
        _ => bail!("{} holds several sessions ({}); pass --name", arg.session.display(), names.join(", ")),
    }
}

fn load_store(arg: &SessionArg) -> Result<(SessionStore, String)> {
    let store = SessionStore::load(&arg.session).with_context(|| format!("reading {}", arg.session.display()))?;
    let name = session_name(&store, arg)?;
    if store.get(&name).is_none() {
        bail!("no session named {name:?} in {}", arg.session.display());
    }
    Ok((store, name))
}

fn agreement(store: &SessionStore, name: &str, attrs: &[Compared]) -> (Vec<AgreementResult>, Vec<String>) {
    let s = store.get(name).expect("checked by caller");
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for &attr in attrs {
        match s.cohen_kappa(attr) {
            Ok(r) => ok.push(r),
            Err(e) => failed.push(format!("{attr}: {e}")),
        }
    }
    (ok, failed)
}

fn annotate(cmd: AnnotateCommand) -> Result<()> {
    match cmd {
        AnnotateCommand::Import {
            session,
            labels,
            annotator,
            dataset,
            format,
            annotators,
            project,
        } => {
            let mut store = SessionStore::load(&session.session)?;
            let name = session
                .name
                .clone()
                .or_else(|| session_name(&store, &session).ok())
                .unwrap_or_else(|| project.clone());
            if store.get(&name).is_none() {
                let dataset = dataset.ok_or_else(|| anyhow!("new session {name:?}: --dataset is required"))?;
                if annotators.len() < 2 {
                    bail!("new session {name:?}: --annotators needs at least two names");
                }
                let defects = load_defects(&dataset, format, None)?
                    .records
                    .into_iter()
                    .map(|r| r.id)
                    .collect();
                store.record(
                    &session.session,
                    SessionEvent::Opened {
                        session: name.clone(),
                        project,
                        defects,
                        annotators,
                    },
                )?;
                eprintln!("opened session {name:?}");
            }
            let taxonomy = bundled::taxonomy();
            let incoming = read_labels(&labels).with_context(|| format!("reading {}", labels.display()))?;
            let mut changed = 0;
            for label in &incoming {
                for p in &label.impacts {
                    validate_impact_path(p, &taxonomy)
                        .with_context(|| format!("defect {}: impact path {p}", label.defect_id))?;
                }
                let who = annotator
                    .clone()
                    .or_else(|| label.annotator.clone())
                    .ok_or_else(|| anyhow!("defect {}: no annotator (pass --annotator)", label.defect_id))?;
                let event = SessionEvent::Labeled {
                    session: name.clone(),
                    annotator: who,
                    label: label.clone(),
                };
                if store.record(&session.session, event)? {
                    changed += 1;
                }
            }
            let p = store.get(&name).expect("opened above").progress();
            println!(
                "imported {changed} of {} labels; pending {}, labeled {}, disputed {}, resolved {}",
                incoming.len(),
                p.pending,
                p.labeled,
                p.disputed,
                p.resolved
            );
        }
        AnnotateCommand::Status { session } => {
            let (store, name) = load_store(&session)?;
            println!("{}", serde_json::to_string_pretty(&store.get(&name).unwrap().progress())?);
        }
        AnnotateCommand::Kappa { session, attr, format } => {
            let (store, name) = load_store(&session)?;
            let attrs = if attr == "all" {
                Compared::ALL.to_vec()
            } else {
                vec![attr.parse::<Compared>()?]
            };
            let (ok, failed) = agreement(&store, &name, &attrs);
            print!("{}", render_agreement(&ok, format));
            for f in &failed {
                eprintln!("{f}");
            }
            if ok.is_empty() {
                bail!("no agreement figure could be computed");
            }
        }
        AnnotateCommand::Disputes { session, attr, format } => {
            let (store, name) = load_store(&session)?;
            let disputes = store.get(&name).unwrap().list_disputes(attr);
            match format {
                OutputFormat::Structured => println!("{}", serde_json::to_string_pretty(&disputes)?),
                _ => {
                    for d in &disputes {
                        let show = |l: &ClassificationLabel| {
                            format!(
                                "{} {}/{}",
                                l.annotator.as_deref().unwrap_or("?"),
                                l.ai,
                                l.severity.map_or("-".into(), |s| s.to_string())
                            )
                        };
                        println!("{}  {}  vs  {}", d.defect_id, show(&d.label_a), show(&d.label_b));
                        for p in &d.impacts_only_a {
                            println!("    only {}: {p}", d.label_a.annotator.as_deref().unwrap_or("a"));
                        }
                        for p in &d.impacts_only_b {
                            println!("    only {}: {p}", d.label_b.annotator.as_deref().unwrap_or("b"));
                        }
                    }
                    eprintln!("{} disputed", disputes.len());
                }
            }
        }
        AnnotateCommand::Resolve {
            session,
            defect,
            resolver,
            ai,
            severity,
            impacts,
            rationale,
        } => {
            let (mut store, name) = load_store(&session)?;
            let taxonomy = bundled::taxonomy();
            for p in &impacts {
                validate_impact_path(p, &taxonomy).with_context(|| format!("impact path {p}"))?;
            }
            let mut label = ClassificationLabel::human(defect.clone(), ai, severity);
            label.impacts = impacts;
            label.rationale = rationale;
            store.record(
                &session.session,
                SessionEvent::Resolved {
                    session: name,
                    defect_id: defect.clone(),
                    resolver,
                    label,
                },
            )?;
            println!("{defect} resolved");
        }
        AnnotateCommand::Consolidate { session, out } => {
            let (store, name) = load_store(&session)?;
            let labels = store.get(&name).unwrap().consolidate()?;
            write_out(out.as_deref(), &to_labels_string(&labels))?;
            eprintln!("{} consolidated labels", labels.len());
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let (tax, rules) = a.rules.load()?;
    let labels = read_labels(&a.labels).with_context(|| format!("reading {}", a.labels.display()))?;
    let agreement = match &a.session {
        Some(log) => {
            let arg = SessionArg {
                session: log.clone(),
                name: None,
            };
            let (store, name) = load_store(&arg)?;
            agreement(&store, &name, &Compared::ALL).0
        }
        None => Vec::new(),
    };
    let dataset_id = a.dataset_id.clone().unwrap_or_else(|| {
        a.labels
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let bundle = export_analysis_bundle(
        &labels,
        &rules,
        &tax,
        &BundleOptions {
            dataset_id,
            format: a.format,
            agreement,
            generated_at: None,
        },
        &a.out,
    )?;
    for art in &bundle.metadata.artifacts {
        println!("{}{}", a.out.join(&art.file).display(), if art.empty { "  (empty)" } else { "" });
    }
    Ok(())
}

async fn serve(config: PathBuf) -> Result<()> {
    let cfg = aiodc_server::ServerConfig::load(&config)?;
    let handle = aiodc_server::serve(&cfg).await?;
    println!("listening on http://{}", handle.local_addr());
    handle.wait().await?;
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    let outcome = match Cli::parse().command {
        Command::Ingest(a) => ingest(a),
        Command::Classify(a) => classify(a),
        Command::Annotate(c) => annotate(c),
        Command::Report(a) => report(a),
        Command::Serve { config } => tokio::runtime::Runtime::new()
            .map_err(anyhow::Error::from)
            .and_then(|rt| rt.block_on(serve(config))),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
