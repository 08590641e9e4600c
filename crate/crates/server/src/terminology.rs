//! HTTP terminology provider: `GET {base}/lookup?term=<term>&max_distance=<n>`
//! answering `[{"term": ..., "types": [...]}]`.

use std::time::Duration;

use clinanno_core::suggestion::{ProviderError, TerminologyEntry, TerminologyProvider};
use reqwest::blocking::Client;
use reqwest::Url;

pub const DEFAULT_TIMEOUT_MS: u64 = 2000;

pub struct RemoteTerminology {
    lookup: Url,
    client: Client,
}

impl RemoteTerminology {
    /// Builds the blocking client. Must run outside an async runtime.
    pub fn new(base: &str, timeout: Duration) -> Result<Self, String> {
        let base = Url::parse(base).map_err(|e| format!("terminology url `{base}`: {e}"))?;
        let lookup = base
            .join(&format!("{}/lookup", base.path().trim_end_matches('/')))
            .map_err(|e| e.to_string())?;
        let client = Client::builder().timeout(timeout).build().map_err(|e| e.to_string())?;
        Ok(RemoteTerminology { lookup, client })
    }

    pub fn lookup_url(&self) -> &Url {
        &self.lookup
    }
}

impl TerminologyProvider for RemoteTerminology {
    fn lookup(&self, normalized: &str, max_distance: usize) -> Result<Vec<TerminologyEntry>, ProviderError> {
        let unavailable = |e: reqwest::Error| ProviderError::Unavailable(e.to_string());
        let mut url = self.lookup.clone();
        url.query_pairs_mut()
            .append_pair("term", normalized)
            .append_pair("max_distance", &max_distance.to_string());
        self.client
            .get(url)
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(unavailable)?
            .json()
            .map_err(unavailable)
    }
}
