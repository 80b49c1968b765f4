use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pappl_core::analytics::export::engagement_csv;
use pappl_core::content::course_file::CourseFile;
use pappl_core::content::CourseId;
use pappl_core::service::roster::Enrollment;
use pappl_core::service::Platform;
use pappl_core::store::Store;
use pappl_core::tutor::HintEngine;
use pappl_server::config::{ServeConfig, StoreArgs};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "pappl",
    version,
    about = "Self-hosted tutoring service with generated hints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve(ServeConfig),
    /// Load a course file into the store.
    Import {
        #[command(flatten)]
        store: StoreArgs,
        file: PathBuf,
    },
    /// Write courses to a course file (all courses when none are given).
    Export {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
        course_ids: Vec<CourseId>,
    },
    /// Write the engagement CSV for a course.
    Report {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
        course_id: CourseId,
    },
    /// Enroll a student and print their session token.
    Enroll {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        name: String,
        #[arg(long)]
        email: Option<String>,
        #[arg(long)]
        external_id: Option<String>,
    },
}

fn write_out(output: Option<PathBuf>, bytes: &[u8]) -> anyhow::Result<()> {
    match output {
        Some(path) => {
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Serve(config) => serve(config).await,
        Command::Import { store, file } => {
            let store = Store::open(&store.data_dir)?;
            let text =
                fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let parsed: CourseFile = serde_json::from_str(&text)?;
            for c in store.import_course_file(&parsed)? {
                println!("{}\t{}", c.id, c.title);
            }
            Ok(())
        }
        Command::Export {
            store,
            output,
            course_ids,
        } => {
            let store = Store::open(&store.data_dir)?;
            let ids = if course_ids.is_empty() {
                store.list_courses().iter().map(|c| c.id).collect()
            } else {
                course_ids
            };
            let file = store.export_course_file(&ids)?;
            write_out(output, &serde_json::to_vec_pretty(&file)?)
        }
        Command::Report {
            store,
            output,
            course_id,
        } => {
            let store = Store::open(&store.data_dir)?;
            let report = store.engagement_report(course_id)?;
            write_out(output, &engagement_csv(&report.rows)?)
        }
        Command::Enroll {
            store,
            name,
            email,
            external_id,
        } => {
            let store = Store::open(&store.data_dir)?;
            let e = store.enroll_student(&Enrollment {
                display_name: name,
                email,
                external_id,
            })?;
            println!("student_token\t{}", e.student_token);
            println!("session_token\t{}", e.session_token);
            Ok(())
        }
    }
}

async fn serve(config: ServeConfig) -> anyhow::Result<()> {
    let store = Arc::new(Store::open(&config.store.data_dir)?);
    let engine = HintEngine::new(config.provider.build()?, config.tutor_config()?);
    let platform = Arc::new(Platform::new(
        store,
        engine,
        config.instructor_tokens.clone(),
    ));
    let app = pappl_server::app(platform, &config.cors_origins)?;
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .with_context(|| format!("binding {}", config.bind))?;
    tracing::info!(addr = %config.bind, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
