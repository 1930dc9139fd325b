//! Rate-limited HTTP access with bounded retries, plus local-directory
//! endpoints so fixture corpora can be processed without a network.

use std::num::NonZeroU32;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use governor::{DefaultDirectRateLimiter, Quota, RateLimiter};
use rand::Rng;
use reqwest::{header, StatusCode};
use tracing::{debug, warn};
use url::Url;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("invalid endpoint {0:?}")]
    InvalidEndpoint(String),
    #[error("{url}: giving up after {attempts} attempts (last error: {last})")]
    RetryExhausted {
        url: String,
        attempts: u32,
        last: String,
    },
    #[error("{url}: HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Where an index, archive or model service lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Http(Url),
    /// A directory on disk laid out like the remote service (`file://` URLs
    /// or bare paths).
    Local(PathBuf),
}

impl Endpoint {
    pub fn parse(raw: &str) -> Result<Self, NetError> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Err(NetError::InvalidEndpoint(raw.to_string()));
        }
        match Url::parse(raw) {
            Ok(url) if url.scheme() == "http" || url.scheme() == "https" => Ok(Endpoint::Http(url)),
            Ok(url) if url.scheme() == "file" => url
                .to_file_path()
                .map(Endpoint::Local)
                .map_err(|_| NetError::InvalidEndpoint(raw.to_string())),
            Ok(_) => Err(NetError::InvalidEndpoint(raw.to_string())),
            Err(_) => Ok(Endpoint::Local(PathBuf::from(raw))),
        }
    }

    /// Resolve relative local paths against `base`.
    pub fn relative_to(self, base: &Path) -> Self {
        match self {
            Endpoint::Local(p) if p.is_relative() => Endpoint::Local(base.join(p)),
            other => other,
        }
    }

    /// Append path segments to an HTTP endpoint or join them onto a local one.
    pub fn join(&self, segment: &str) -> Result<Location, NetError> {
        match self {
            Endpoint::Http(base) => {
                let mut url = base.clone();
                url.path_segments_mut()
                    .map_err(|_| NetError::InvalidEndpoint(base.to_string()))?
                    .pop_if_empty()
                    .extend(segment.split('/'));
                Ok(Location::Http(url))
            }
            Endpoint::Local(dir) => Ok(Location::Local(dir.join(segment))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Http(Url),
    Local(PathBuf),
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Http(u) => write!(f, "{u}"),
            Location::Local(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Exponential backoff with jitter, capped at `max_attempts` tries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): a uniformly jittered
    /// value in `[d/2, d]` where `d = base * 2^(attempt-1)`, capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let exp = attempt.saturating_sub(1).min(20);
        let full = self
            .base_delay
            .saturating_mul(1u32 << exp)
            .min(self.max_delay);
        let factor: f64 = rand::rng().random_range(0.5..=1.0);
        full.mul_f64(factor)
    }
}

fn is_transient(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS
        || status == StatusCode::REQUEST_TIMEOUT
        || status.is_server_error()
}

/// One client per remote endpoint; clones share the rate limiter.
#[derive(Clone)]
pub struct HttpClient {
    client: reqwest::Client,
    retry: RetryPolicy,
    limiter: Arc<DefaultDirectRateLimiter>,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient")
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl HttpClient {
    pub fn new(retry: RetryPolicy, requests_per_second: u32, timeout: Duration) -> Self {
        let rps = NonZeroU32::new(requests_per_second.max(1)).expect("nonzero");
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("wai/", env!("CARGO_PKG_VERSION")))
            .build()
            .expect("reqwest client");
        Self {
            client,
            retry,
            limiter: Arc::new(RateLimiter::direct(Quota::per_second(rps))),
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    /// GET `url`, optionally restricted to the half-open byte `range`.
    /// A 404 yields `Ok(None)`.
    pub async fn get(&self, url: &Url, range: Option<Range<u64>>) -> Result<Option<Vec<u8>>, NetError> {
        self.send(url, || {
            let req = self.client.get(url.clone());
            match &range {
                Some(r) => req.header(
                    header::RANGE,
                    format!("bytes={}-{}", r.start, r.end.saturating_sub(1)),
                ),
                None => req,
            }
        })
        .await
    }

    pub async fn post_json(
        &self,
        url: &Url,
        body: &serde_json::Value,
        bearer: Option<&str>,
    ) -> Result<Vec<u8>, NetError> {
        let payload = serde_json::to_vec(body).expect("json value serializes");
        let out = self
            .send(url, || {
                let req = self
                    .client
                    .post(url.clone())
                    .header(header::CONTENT_TYPE, "application/json")
                    .body(payload.clone());
                match bearer {
                    Some(token) => req.bearer_auth(token),
                    None => req,
                }
            })
            .await?;
        out.ok_or_else(|| NetError::Status {
            url: url.to_string(),
            status: 404,
        })
    }

    async fn send<F>(&self, url: &Url, build: F) -> Result<Option<Vec<u8>>, NetError>
    where
        F: Fn() -> reqwest::RequestBuilder,
    {
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts {
            self.limiter.until_ready().await;
            match build().send().await {
                Ok(resp) => {
                    let status = resp.status();
                    if status == StatusCode::NOT_FOUND {
                        return Ok(None);
                    }
                    if status.is_success() {
                        match resp.bytes().await {
                            Ok(body) => return Ok(Some(body.to_vec())),
                            Err(e) => last = e.to_string(),
                        }
                    } else if is_transient(status) {
                        last = format!("HTTP {}", status.as_u16());
                    } else {
                        return Err(NetError::Status {
                            url: url.to_string(),
                            status: status.as_u16(),
                        });
                    }
                }
                Err(e) => last = e.to_string(),
            }
            if attempt < self.retry.max_attempts {
                let delay = self.retry.delay(attempt);
                debug!(%url, attempt, ?delay, %last, "retrying");
                tokio::time::sleep(delay).await;
            }
        }
        warn!(%url, attempts = self.retry.max_attempts, %last, "retries exhausted");
        Err(NetError::RetryExhausted {
            url: url.to_string(),
            attempts: self.retry.max_attempts,
            last,
        })
    }
}

/// Read `range` from a local file; `None` reads the whole file. Missing
/// files map to `Ok(None)` like an HTTP 404.
pub async fn read_local(path: &Path, range: Option<Range<u64>>) -> Result<Option<Vec<u8>>, NetError> {
    use tokio::io::{AsyncReadExt, AsyncSeekExt};

    let io_err = |source| NetError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = match tokio::fs::File::open(path).await {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(e)),
    };
    match range {
        None => {
            let mut buf = Vec::new();
            file.read_to_end(&mut buf).await.map_err(io_err)?;
            Ok(Some(buf))
        }
        Some(r) => {
            file.seek(std::io::SeekFrom::Start(r.start))
                .await
                .map_err(io_err)?;
            let mut buf = vec![0u8; (r.end - r.start) as usize];
            file.read_exact(&mut buf).await.map_err(io_err)?;
            Ok(Some(buf))
        }
    }
}
