//! Pluggable text generators: the local toy model, a chat-completions
//! endpoint, a scripted mock for pipeline tests, and an order-independent
//! deterministic mock for offline experiment runs.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::decode::{generate, DecodeConfig};
use crate::error::{Error, Result};
use crate::tinylm::{ByteTokenizer, Model};

pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String>;
    fn name(&self) -> &str;
}

/// Runs the toy model with a fixed decode config. Deterministic: the same
/// prompt always yields the same text.
pub struct LocalToyGenerator {
    model: std::sync::Arc<Model>,
    config: DecodeConfig,
}

impl LocalToyGenerator {
    pub fn new(model: std::sync::Arc<Model>, config: DecodeConfig) -> LocalToyGenerator {
        LocalToyGenerator { model, config }
    }
}

impl Generator for LocalToyGenerator {
    fn generate(&self, prompt: &str) -> Result<String> {
        let tokens = ByteTokenizer.encode(prompt);
        if tokens.is_empty() {
            return Err(Error::Input("prompt is empty".into()));
        }
        // long prompts keep only their tail so the model still sees the
        // most recent context
        let max_prompt = self.model.config().max_seq_len.saturating_sub(1).max(1);
        let tokens = if tokens.len() > max_prompt {
            tokens[tokens.len() - max_prompt..].to_vec()
        } else {
            tokens
        };
        Ok(generate(&self.model, &tokens, &self.config)?.text)
    }

    fn name(&self) -> &str {
        "local-toy"
    }
}

/// Pops canned replies in order; each entry may be a reply or a failure.
/// Records every prompt it sees so tests can assert call structure.
pub struct ScriptedMock {
    replies: Mutex<VecDeque<Result<String>>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedMock {
    pub fn new(replies: Vec<&str>) -> ScriptedMock {
        ScriptedMock {
            replies: Mutex::new(replies.into_iter().map(|r| Ok(r.to_string())).collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn with_outcomes(replies: Vec<Result<String>>) -> ScriptedMock {
        ScriptedMock {
            replies: Mutex::new(replies.into()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn seen_prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("mock lock").clone()
    }

    pub fn calls(&self) -> usize {
        self.prompts.lock().expect("mock lock").len()
    }
}

impl Generator for ScriptedMock {
    fn generate(&self, prompt: &str) -> Result<String> {
        self.prompts
            .lock()
            .expect("mock lock")
            .push(prompt.to_string());
        self.replies
            .lock()
            .expect("mock lock")
            .pop_front()
            .unwrap_or_else(|| Err(Error::Backend("scripted mock ran out of replies".into())))
    }

    fn name(&self) -> &str {
        "scripted-mock"
    }
}

const MOCK_WORDS: &[&str] = &[
    "the", "a", "and", "then", "loop", "over", "items", "with", "recursion", "on", "smaller",
    "parts", "sort", "first", "search", "binary", "halves", "greedy", "choice", "works", "map",
    "stores", "keys", "stack", "pops", "last", "tree", "walks", "nodes", "queue", "takes",
    "pointer", "moves", "array", "holds", "values", "count", "pairs", "merge", "split", "ranges",
    "fast", "slow", "path", "graph", "edges", "visit", "mark", "done", "step",
];

/// Reply is a pure function of (seed, prompt): word salad drawn from a
/// fixed vocabulary. Order-independent, so resumed experiment runs see the
/// same replies as uninterrupted ones.
pub struct DeterministicMock {
    seed: u64,
    min_words: usize,
    max_words: usize,
}

impl DeterministicMock {
    pub fn new(seed: u64) -> DeterministicMock {
        DeterministicMock {
            seed,
            min_words: 8,
            max_words: 40,
        }
    }
}

impl Generator for DeterministicMock {
    fn generate(&self, prompt: &str) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(prompt.as_bytes());
        let digest = hasher.finalize();
        let mut seed_bytes = [0u8; 8];
        seed_bytes.copy_from_slice(&digest[..8]);
        let mut rng = ChaCha12Rng::seed_from_u64(u64::from_le_bytes(seed_bytes));
        let n = rng.gen_range(self.min_words..=self.max_words);
        let words: Vec<&str> = (0..n)
            .map(|_| MOCK_WORDS[rng.gen_range(0..MOCK_WORDS.len())])
            .collect();
        Ok(words.join(" "))
    }

    fn name(&self) -> &str {
        "deterministic-mock"
    }
}

/// Chat-completions-style HTTP backend: one user message in, one assistant
/// message out. Auth token read from an environment variable; 3 retries
/// with exponential backoff; 60 s timeout; bounded in-flight requests.
pub struct HttpChatGenerator {
    url: String,
    model: String,
    auth_env: String,
    client: reqwest::blocking::Client,
    slots: Semaphore,
    max_retries: usize,
}

impl HttpChatGenerator {
    pub fn new(url: &str, model: &str, auth_env: &str, max_in_flight: usize) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Backend(format!("http client: {e}")))?;
        Ok(HttpChatGenerator {
            url: url.to_string(),
            model: model.to_string(),
            auth_env: auth_env.to_string(),
            client,
            slots: Semaphore::new(max_in_flight.max(1)),
            max_retries: 3,
        })
    }

    fn request_once(&self, prompt: &str) -> Result<String> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.client.post(&self.url).json(&body);
        if let Ok(token) = std::env::var(&self.auth_env) {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .map_err(|e| Error::Backend(format!("request failed: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Backend(format!("endpoint returned {status}")));
        }
        let value: serde_json::Value = resp
            .json()
            .map_err(|e| Error::Backend(format!("bad json from endpoint: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| {
                Error::Backend("reply lacks choices[0].message.content".into())
            })
    }
}

impl Generator for HttpChatGenerator {
    fn generate(&self, prompt: &str) -> Result<String> {
        let _slot = self.slots.acquire();
        let mut delay = Duration::from_millis(500);
        let mut last_err = None;
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.request_once(prompt) {
                Ok(text) => return Ok(text),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    fn name(&self) -> &str {
        "http-chat"
    }
}

/// Counting semaphore for the in-flight request bound.
struct Semaphore {
    count: Mutex<usize>,
    cv: Condvar,
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Semaphore {
    fn new(count: usize) -> Semaphore {
        Semaphore {
            count: Mutex::new(count),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut count = self.count.lock().expect("semaphore lock");
        while *count == 0 {
            count = self.cv.wait(count).expect("semaphore wait");
        }
        *count -= 1;
        SemaphoreGuard(self)
    }
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.count.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}
