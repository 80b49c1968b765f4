#![allow(dead_code)]

use std::sync::Arc;

use pappl_core::service::Platform;
use pappl_core::store::Store;
use pappl_core::tutor::{HintEngine, MockProvider, TutorConfig};
use reqwest::{Method, StatusCode};
use serde_json::Value;

pub const INSTRUCTOR: &str = "instructor-secret-1";

pub fn platform(store: Store) -> (Arc<Platform>, Arc<MockProvider>) {
    platform_with(store, MockProvider::new())
}

pub fn platform_with(store: Store, mock: MockProvider) -> (Arc<Platform>, Arc<MockProvider>) {
    let mock = Arc::new(mock);
    let engine = HintEngine::new(mock.clone(), TutorConfig::default());
    let platform = Arc::new(Platform::new(
        Arc::new(store),
        engine,
        vec![INSTRUCTOR.to_string()],
    ));
    (platform, mock)
}

/// Serves the API on an ephemeral local port and returns its base URL.
pub async fn spawn(platform: Arc<Platform>) -> String {
    let app = pappl_server::app(platform, &["http://localhost:5173".to_string()]).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    format!("http://{addr}/api/v1")
}

#[derive(Clone)]
pub struct Client {
    pub base: String,
    pub token: String,
    http: reqwest::Client,
}

pub struct Reply {
    pub status: StatusCode,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.body))
    }

    pub fn ok(self) -> Value {
        assert!(self.status.is_success(), "{}: {}", self.status, self.body);
        self.json()
    }
}

impl Client {
    pub fn new(base: &str, token: &str) -> Self {
        Self {
            base: base.to_string(),
            token: token.to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn as_user(&self, token: &str) -> Self {
        Self::new(&self.base, token)
    }

    pub async fn send(&self, method: Method, path: &str, body: Option<&Value>) -> Reply {
        let mut req = self
            .http
            .request(method, format!("{}{path}", self.base))
            .bearer_auth(&self.token);
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        Reply {
            status,
            body: resp.text().await.unwrap(),
        }
    }

    pub async fn get(&self, path: &str) -> Reply {
        self.send(Method::GET, path, None).await
    }

    pub async fn post(&self, path: &str, body: &Value) -> Reply {
        self.send(Method::POST, path, Some(body)).await
    }

    pub async fn put(&self, path: &str, body: &Value) -> Reply {
        self.send(Method::PUT, path, Some(body)).await
    }

    pub async fn patch(&self, path: &str, body: &Value) -> Reply {
        self.send(Method::PATCH, path, Some(body)).await
    }

    pub async fn delete(&self, path: &str) -> Reply {
        self.send(Method::DELETE, path, None).await
    }
}
