use std::thread;
use std::time::Duration;

use ureq::Agent;

use super::{is_hash_hex, parse_block_json, BlockRecord, IngestError, RestConfig};

// Largest blocks in JSON form with prevouts run to a few hundred MB.
const MAX_BODY_BYTES: u64 = 1 << 30;

/// Blocking client for the unauthenticated Bitcoin Core REST interface.
#[derive(Debug, Clone)]
pub struct RestClient {
    agent: Agent,
    base: String,
    retries: u32,
}

impl RestClient {
    pub fn new(cfg: &RestConfig) -> Self {
        let agent = Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        RestClient {
            agent,
            base: cfg.endpoint.trim_end_matches('/').to_owned(),
            retries: cfg.retries,
        }
    }

    fn get(&self, path: &str) -> Result<Vec<u8>, IngestError> {
        let url = format!("{}/{}", self.base, path);
        let mut attempt = 0;
        loop {
            match self.get_once(&url) {
                Err(e) if e.is_retriable() && attempt < self.retries => {
                    attempt += 1;
                    log::warn!("retrying {url} after {e} (attempt {attempt})");
                    thread::sleep(Duration::from_millis(100 << attempt.min(6)));
                }
                other => return other,
            }
        }
    }

    fn get_once(&self, url: &str) -> Result<Vec<u8>, IngestError> {
        let transport = |e: ureq::Error| IngestError::Transport {
            url: url.to_owned(),
            message: e.to_string(),
        };
        let mut resp = self.agent.get(url).call().map_err(transport)?;
        let status = resp.status().as_u16();
        match status {
            200 => resp
                .body_mut()
                .with_config()
                .limit(MAX_BODY_BYTES)
                .read_to_vec()
                .map_err(transport),
            404 => Err(IngestError::NotFound(url.to_owned())),
            _ => Err(IngestError::Http {
                url: url.to_owned(),
                status,
            }),
        }
    }

    /// `GET rest/blockhashbyheight/{height}.hex`
    pub fn get_block_hash(&self, height: u64) -> Result<String, IngestError> {
        let body = self.get(&format!("rest/blockhashbyheight/{height}.hex"))?;
        let hash = String::from_utf8_lossy(&body).trim().to_ascii_lowercase();
        if !is_hash_hex(&hash) {
            return Err(IngestError::Schema(format!(
                "blockhashbyheight/{height} returned {hash:?}"
            )));
        }
        Ok(hash)
    }

    /// `GET rest/block/{hash}.json`
    pub fn get_block(&self, hash: &str) -> Result<BlockRecord, IngestError> {
        let body = self.get(&format!("rest/block/{hash}.json"))?;
        parse_block_json(&body)
    }

    /// The two-step hash-then-block fetch for one height.
    pub fn get_block_at(&self, height: u64) -> Result<BlockRecord, IngestError> {
        let hash = self.get_block_hash(height)?;
        let block = self.get_block(&hash)?;
        if block.height != height {
            return Err(IngestError::Schema(format!(
                "asked for height {height}, node returned {}",
                block.height
            )));
        }
        Ok(block)
    }

    /// Current tip height from `rest/chaininfo.json`.
    pub fn get_tip_height(&self) -> Result<u64, IngestError> {
        let body = self.get("rest/chaininfo.json")?;
        let v: serde_json::Value = serde_json::from_slice(&body).map_err(|e| IngestError::Json {
            offset: 0,
            message: e.to_string(),
        })?;
        v.get("blocks")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| IngestError::Schema("chaininfo without blocks field".into()))
    }
}
