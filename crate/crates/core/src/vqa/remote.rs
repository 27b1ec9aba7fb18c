use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Answer, AnswerOracle, OracleError, Question, Vocabulary};

/// Body POSTed to the endpoint, one per question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleRequest {
    pub image_id: String,
    pub question_text: String,
}

/// Expected reply body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteOracleConfig {
    /// Full URL the requests are POSTed to.
    pub endpoint: String,
    /// Per-attempt deadline.
    pub timeout: Duration,
    pub max_attempts: u32,
    /// Delay before the first retry; doubled for each further one.
    pub initial_backoff: Duration,
    pub max_in_flight: usize,
}

impl RemoteOracleConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            max_attempts: 3,
            initial_backoff: Duration::from_millis(250),
            max_in_flight: 8,
        }
    }
}

/// Asks a model served over HTTP.
///
/// Each question is a JSON POST of [`OracleRequest`]; the reply must be an
/// [`OracleResponse`] whose answer normalizes into the vocabulary or yes/no.
/// HTTP 404 means the image is unknown and 422 that the question has no
/// answer for it. Connection failures, timeouts and 5xx/429 replies are
/// retried with exponential backoff.
pub struct RemoteOracle {
    config: RemoteOracleConfig,
    vocab: Vocabulary,
    agent: ureq::Agent,
    permits: Semaphore,
}

impl std::fmt::Debug for RemoteOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteOracle")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl RemoteOracle {
    pub fn new(config: RemoteOracleConfig, vocab: Vocabulary) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let permits = Semaphore::new(config.max_in_flight.max(1));
        Self {
            config,
            vocab,
            agent,
            permits,
        }
    }

    pub fn config(&self) -> &RemoteOracleConfig {
        &self.config
    }

    fn attempt(&self, request: &OracleRequest) -> Result<OracleResponse, OracleError> {
        let _permit = self.permits.acquire();
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .send_json(request)
            .map_err(transport_error)?;
        let status = response.status().as_u16();
        match status {
            404 => return Err(OracleError::UnknownImage(request.image_id.clone())),
            422 => {
                return Err(OracleError::NotApplicable {
                    image_id: request.image_id.clone(),
                    question: request.question_text.clone(),
                })
            }
            _ => {}
        }
        if !(200..300).contains(&status) {
            return Err(OracleError::Transport {
                message: format!("endpoint returned HTTP {status}"),
                retryable: status >= 500 || status == 429,
            });
        }
        response
            .body_mut()
            .read_json::<OracleResponse>()
            .map_err(|e| match e {
                ureq::Error::Json(e) => OracleError::Protocol(e.to_string()),
                other => transport_error(other),
            })
    }
}

fn transport_error(e: ureq::Error) -> OracleError {
    let retryable = matches!(
        e,
        ureq::Error::Io(_)
            | ureq::Error::Timeout(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
            | ureq::Error::BodyStalled
    );
    OracleError::Transport {
        message: e.to_string(),
        retryable,
    }
}

impl AnswerOracle for RemoteOracle {
    fn kind(&self) -> String {
        format!("remote {}", self.config.endpoint)
    }

    fn answer(&self, image_id: &str, question: &Question) -> Result<Answer, OracleError> {
        let request = OracleRequest {
            image_id: image_id.to_string(),
            question_text: question.text.clone(),
        };
        let mut backoff = self.config.initial_backoff;
        let mut attempt = 1;
        let reply = loop {
            match self.attempt(&request) {
                Ok(reply) => break reply,
                Err(e) if e.is_retryable() && attempt < self.config.max_attempts => {
                    log::debug!("oracle attempt {attempt} for {image_id:?} failed: {e}");
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };

        if let Some(c) = reply.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(OracleError::Protocol(format!(
                    "confidence {c} outside [0, 1]"
                )));
            }
        }
        let value = self
            .vocab
            .normalize_answer(&reply.answer)
            .ok_or(OracleError::Normalization { raw: reply.answer })?;
        Ok(Answer {
            value,
            confidence: reply.confidence,
        })
    }
}

struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            available: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore poisoned") += 1;
        self.0.freed.notify_one();
    }
}
