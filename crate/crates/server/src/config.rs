use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, ValueEnum};
use pappl_core::tutor::provider::{BoundedProvider, ChatCompletionsProvider, ProviderConfig};
use pappl_core::tutor::{CompletionProvider, MockProvider, TutorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    /// OpenAI-compatible chat-completions endpoint.
    Chat,
    /// Offline deterministic provider, for demos and tests.
    Mock,
}

#[derive(Debug, Clone, Args)]
pub struct StoreArgs {
    /// Directory holding the journal and media blobs.
    #[arg(long, env = "PAPPL_DATA_DIR", default_value = "pappl-data")]
    pub data_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeConfig {
    #[arg(long, env = "PAPPL_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,

    #[command(flatten)]
    pub store: StoreArgs,

    /// Comma-separated origins allowed to call the API from a browser.
    #[arg(long, env = "PAPPL_CORS_ORIGINS", value_delimiter = ',')]
    pub cors_origins: Vec<String>,

    /// Comma-separated pre-shared instructor tokens.
    #[arg(
        long,
        env = "PAPPL_INSTRUCTOR_TOKENS",
        value_delimiter = ',',
        required = true
    )]
    pub instructor_tokens: Vec<String>,

    #[command(flatten)]
    pub provider: ProviderArgs,

    #[arg(long, env = "PAPPL_RECURRENCE_THRESHOLD", default_value_t = 2)]
    pub recurrence_threshold: u32,

    /// Highest hint specificity level (1 to 3).
    #[arg(long, env = "PAPPL_MAX_LEVEL", default_value_t = 3)]
    pub max_level: u8,
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    #[arg(
        long = "provider",
        env = "PAPPL_PROVIDER",
        value_enum,
        default_value = "chat"
    )]
    pub kind: ProviderKind,

    #[arg(
        long,
        env = "PAPPL_PROVIDER_BASE_URL",
        default_value = "https://api.openai.com/v1"
    )]
    pub provider_base_url: String,

    #[arg(long, env = "PAPPL_MODEL", default_value = "gpt-4o")]
    pub model: String,

    #[arg(
        long,
        env = "PAPPL_API_KEY",
        hide_env_values = true,
        default_value = ""
    )]
    pub api_key: String,

    #[arg(long, env = "PAPPL_TEMPERATURE", default_value_t = 0.2)]
    pub temperature: f32,

    #[arg(long, env = "PAPPL_PROVIDER_TIMEOUT_SECS", default_value_t = 30)]
    pub provider_timeout_secs: u64,

    #[arg(long, env = "PAPPL_MAX_IN_FLIGHT", default_value_t = 8)]
    pub max_in_flight: usize,
}

impl ServeConfig {
    pub fn tutor_config(&self) -> anyhow::Result<TutorConfig> {
        TutorConfig {
            temperature: self.provider.temperature,
            max_level: self.max_level,
            recurrence_threshold: self.recurrence_threshold,
        }
        .validated()
        .map_err(anyhow::Error::msg)
    }
}

impl ProviderArgs {
    pub fn build(&self) -> anyhow::Result<Arc<dyn CompletionProvider>> {
        let timeout = Duration::from_secs(self.provider_timeout_secs.max(1));
        let inner: Arc<dyn CompletionProvider> = match self.kind {
            ProviderKind::Mock => Arc::new(MockProvider::new()),
            ProviderKind::Chat => {
                if self.api_key.trim().is_empty() {
                    anyhow::bail!("PAPPL_API_KEY is required for the chat provider");
                }
                Arc::new(ChatCompletionsProvider::new(&ProviderConfig {
                    base_url: self.provider_base_url.clone(),
                    model: self.model.clone(),
                    api_key: self.api_key.clone(),
                    temperature: self.temperature,
                    timeout,
                    max_in_flight: self.max_in_flight,
                })?)
            }
        };
        Ok(Arc::new(BoundedProvider::new(
            inner,
            self.max_in_flight.max(1),
            timeout,
        )))
    }
}
