use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use privflow::api::{self, AppState};
use privflow::import::{FileImport, ImportAdapter, PdmpMapping, PdmpStub};
use privflow::ingest::{DisclosureDoc, IngestDoc};
use privflow::log::ProfileChangeReason;
use privflow::{report_bytes, state_hash, ServiceError, Store};
use privflow_core::config::EngineConfig;
use privflow_core::kb::{validate, KnowledgeBase};
use privflow_core::preference::{
    bootstrap_from_questionnaire, classify_history, Action, PreferenceProfile, QuestionnaireAnswers,
};

#[derive(Parser)]
#[command(name = "privflow", version, about = "Track where your disclosed data can flow, locally")]
struct Cli {
    #[command(flatten)]
    paths: Paths,
    /// Fixed clock (UTC seconds) instead of the system time.
    #[arg(long, global = true)]
    now: Option<i64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Paths {
    /// Knowledge base document [default: $PRIVFLOW_HOME/kb.json]
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    /// Event log [default: $PRIVFLOW_HOME/events.jsonl]
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    /// Base preference profile [default: $PRIVFLOW_HOME/profile.json if present]
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Engine tunables [default: $PRIVFLOW_HOME/config.json if present]
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding the default files.
    #[arg(long, env = "PRIVFLOW_HOME", default_value = ".privflow", global = true)]
    home: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check a knowledge base document and print the findings.
    Validate { path: Option<PathBuf> },
    /// Record that a data package was given to a service.
    Disclose {
        #[arg(long)]
        package: String,
        #[arg(long)]
        service: String,
        #[arg(long)]
        ad_hoc: bool,
        #[arg(long)]
        timestamp: Option<i64>,
    },
    /// Print per-service risk/value reports.
    Assess,
    /// Print the full flow/issue/nudge report.
    Report {
        /// Print only the SHA-256 of the report.
        #[arg(long)]
        hash: bool,
    },
    /// Serve the local HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: SocketAddr,
        /// Permit binding a non-loopback address.
        #[arg(long)]
        allow_remote: bool,
    },
    /// Ingest a scripted event file (JSON Lines), or a PDMP export with --pdmp.
    Simulate {
        script: PathBuf,
        #[arg(long)]
        pdmp: bool,
    },
    /// Set the profile from questionnaire answers or from disclosure history.
    Bootstrap {
        /// Ten comma-separated answers on the 1-5 scale.
        #[arg(long, value_delimiter = ',', conflicts_with = "from_history")]
        answers: Option<Vec<u8>>,
        #[arg(long)]
        from_history: bool,
    },
    /// Show level 1 nudges (recorded as shown).
    Nudges,
    /// Drill into a level 1 nudge.
    Drill {
        nudge: String,
        #[arg(long)]
        issue: Option<String>,
    },
    /// Respond to a nudge.
    Act { nudge: String, action: String },
}

impl Paths {
    fn kb(&self) -> PathBuf {
        self.kb.clone().unwrap_or_else(|| self.home.join("kb.json"))
    }

    fn log(&self) -> PathBuf {
        self.log.clone().unwrap_or_else(|| self.home.join("events.jsonl"))
    }

    fn optional(explicit: &Option<PathBuf>, fallback: PathBuf) -> Option<PathBuf> {
        explicit.clone().or_else(|| fallback.exists().then_some(fallback))
    }
}

fn load_kb(path: &Path) -> Result<KnowledgeBase, ServiceError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ServiceError::Parse(format!("{}: {e}", path.display())))?;
    Ok(KnowledgeBase::from_json(&text)?)
}

fn open_store(paths: &Paths) -> Result<Store, ServiceError> {
    let kb = load_kb(&paths.kb())?;
    let config = match Paths::optional(&paths.config, paths.home.join("config.json")) {
        Some(p) => EngineConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => EngineConfig::default(),
    };
    let profile = match Paths::optional(&paths.profile, paths.home.join("profile.json")) {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => PreferenceProfile::for_segment(privflow_core::Segment::Pragmatist),
    };
    Store::open(kb, config, profile, paths.log())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), ServiceError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn parse_action(text: &str) -> Result<Action, ServiceError> {
    Ok(serde_json::from_value(serde_json::Value::String(text.to_string()))?)
}

fn run(cli: Cli) -> Result<bool, ServiceError> {
    let now = cli.now.unwrap_or_else(|| AppState::system_clock()());
    let paths = &cli.paths;
    match cli.command {
        Command::Validate { path } => {
            let kb = load_kb(&path.unwrap_or_else(|| paths.kb()))?;
            let report = validate(&kb);
            print!("{report}");
            return Ok(report.is_clean());
        }
        Command::Disclose {
            package,
            service,
            ad_hoc,
            timestamp,
        } => {
            let mut store = open_store(paths)?;
            let doc = IngestDoc::Disclosure(DisclosureDoc {
                package: package.as_str().into(),
                service: service.as_str().into(),
                timestamp,
                ad_hoc,
                source: None,
            });
            println!("{}", store.ingest_doc(doc, now)?);
        }
        Command::Assess => print_json(&open_store(paths)?.engine().reports())?,
        Command::Report { hash } => {
            let report = open_store(paths)?.report();
            if hash {
                println!("{}", state_hash(&report));
            } else {
                use std::io::Write;
                std::io::stdout().write_all(&report_bytes(&report))?;
            }
        }
        Command::Serve { bind, allow_remote } => {
            api::check_bind(bind, allow_remote)?;
            let store = open_store(paths)?;
            let state = match cli.now {
                Some(fixed) => AppState::new(store, std::sync::Arc::new(move || fixed)),
                None => AppState::new(store, AppState::system_clock()),
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(api::serve(state, bind, allow_remote))?;
        }
        Command::Simulate { script, pdmp } => {
            let docs = if pdmp {
                PdmpStub {
                    path: script,
                    mapping: PdmpMapping::default(),
                }
                .read()?
            } else {
                FileImport { path: script }.read()?
            };
            let mut store = open_store(paths)?;
            for doc in docs {
                println!("{}", store.ingest_doc(doc, now)?);
            }
        }
        Command::Bootstrap {
            answers,
            from_history,
        } => {
            let mut store = open_store(paths)?;
            let (profile, reason) = match answers {
                Some(a) => (bootstrap_from_questionnaire(&QuestionnaireAnswers(a))?, ProfileChangeReason::Questionnaire),
                None if from_history => {
                    let engine = store.engine();
                    let segment = classify_history(engine.kb(), &engine.flows().events);
                    (PreferenceProfile::for_segment(segment), ProfileChangeReason::Initial)
                }
                None => return Err(ServiceError::Parse("give --answers or --from-history".into())),
            };
            let mut profile = profile;
            profile.version = store.engine().profile().version + 1;
            store.set_profile(profile, reason, now)?;
            print_json(store.engine().profile())?;
        }
        Command::Nudges => {
            let mut store = open_store(paths)?;
            print_json(&store.show_level1(now)?)?;
        }
        Command::Drill { nudge, issue } => {
            let mut store = open_store(paths)?;
            print_json(&store.level2(&nudge, issue.as_deref(), now)?)?;
        }
        Command::Act { nudge, action } => {
            let mut store = open_store(paths)?;
            let action = parse_action(&action)?;
            print_json(&store.act(&nudge, action, now)?)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
