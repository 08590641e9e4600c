//! Spawns the `clinanno` binary against a temporary storage directory and
//! talks to it over HTTP.

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde_json::{json, Value};

pub const MANAGER: &str = "tok-mgr";
pub const ANA: &str = "tok-ana";
pub const BIA: &str = "tok-bia";
pub const CAIO: &str = "tok-caio";
pub const DORA: &str = "tok-dora";
pub const EVE: &str = "tok-eve";
pub const EXPIRED: &str = "tok-old";

const USERS: &str = r#"
[[users]]
id = "mgr"
role = "manager"
token = "tok-mgr"

[[users]]
id = "ana"
role = "annotator"
token = "tok-ana"

[[users]]
id = "bia"
role = "annotator"
token = "tok-bia"

[[users]]
id = "caio"
role = "annotator"
token = "tok-caio"

[[users]]
id = "dora"
role = "adjudicator"
token = "tok-dora"

[[users]]
id = "eve"
role = "adjudicator"
token = "tok-eve"

[[users]]
id = "old"
role = "annotator"
token = "tok-old"
expires = "2001-01-01T00:00:00Z"
"#;

/// Two records in the hospital export shape. Record 1 carries a name to redact.
pub const RECORDS: &str = concat!(
    r#"{"occurrence-id": 1, "patient-id": 10, "gender": "F", "medical-specialty": "cardiologia", "main-complaint": "DOR TORACICA", "history-of-disease": "Paciente nega febre. Em uso de dipirona. Dr. Vital Brasil orientou.", "observations": "UTI"}"#,
    "\n",
    r#"{"occurrence-id": 2, "main-complaint": "cefaleia", "initial-plan": "dipirona se dor"}"#,
    "\n"
);

pub const TERMS: &str = "dipirona\torch\nfebre\tsosy\ndor toracica\tsosy\n";

pub struct Server {
    pub child: Child,
    pub base: String,
    pub dir: PathBuf,
    pub client: Client,
}

pub fn client() -> Client {
    Client::builder().timeout(Duration::from_secs(30)).build().unwrap()
}

impl Server {
    /// Starts a server whose config is written into `dir`, with `extra` TOML
    /// appended before the user table.
    pub fn start(dir: &Path, extra: &str) -> Server {
        std::fs::write(dir.join("terms.tsv"), TERMS).unwrap();
        let config = format!(
            "listen = \"127.0.0.1:0\"\nstorage = \"{}\"\n{extra}\n{USERS}",
            dir.join("data").display()
        );
        let path = dir.join("clinanno.toml");
        std::fs::write(&path, config).unwrap();
        let mut child = Command::new(env!("CARGO_BIN_EXE_clinanno"))
            .arg("serve")
            .arg("--config")
            .arg(&path)
            .env_remove("CLINANNO_STORAGE")
            .env_remove("CLINANNO_TERMINOLOGY_URL")
            .env_remove("CLINANNO_SEED")
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn clinanno");
        let stdout = child.stdout.take().unwrap();
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected startup line: {line:?}"))
            .to_string();
        Server {
            child,
            base: format!("http://{addr}"),
            dir: dir.to_path_buf(),
            client: client(),
        }
    }

    /// Local terminology file plus `extra`.
    pub fn with_terms(dir: &Path) -> Server {
        let extra = format!("[terminology]\nfile = \"{}\"\n", dir.join("terms.tsv").display());
        Server::start(dir, &extra)
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn get(&self, token: &str, path: &str) -> Response {
        self.client.get(self.url(path)).bearer_auth(token).send().unwrap()
    }

    pub fn post(&self, token: &str, path: &str, body: &Value) -> Response {
        self.client
            .post(self.url(path))
            .bearer_auth(token)
            .json(body)
            .send()
            .unwrap()
    }

    pub fn post_text(&self, token: &str, path: &str, body: &str) -> Response {
        self.client
            .post(self.url(path))
            .bearer_auth(token)
            .header("content-type", "application/x-ndjson")
            .body(body.to_string())
            .send()
            .unwrap()
    }

    pub fn delete(&self, token: &str, path: &str) -> Response {
        self.client.delete(self.url(path)).bearer_auth(token).send().unwrap()
    }

    /// SIGKILL, no shutdown path.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }

    /// Imports [`RECORDS`], marks both documents reviewed and assigns them to
    /// ana and bia with dora adjudicating.
    pub fn prepare(&self) {
        expect(self.post_text(MANAGER, "/import", RECORDS), StatusCode::CREATED);
        for id in ["1", "2"] {
            expect(
                self.post(MANAGER, &format!("/documents/{id}/redactions"), &json!({ "spans": [] })),
                StatusCode::OK,
            );
        }
        expect(
            self.post(
                MANAGER,
                "/assignments",
                &json!({ "annotators": ["ana", "bia"], "adjudicators": ["dora"], "seed": 7, "round": 1 }),
            ),
            StatusCode::CREATED,
        );
    }

    pub fn text(&self, id: &str) -> String {
        let doc = expect(self.get(MANAGER, &format!("/documents/{id}")), StatusCode::OK);
        doc["text"].as_str().unwrap().to_string()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Asserts the status and returns the JSON body (Null when not JSON).
pub fn expect(resp: Response, status: StatusCode) -> Value {
    let got = resp.status();
    let body = resp.text().unwrap();
    assert_eq!(got, status, "body: {body}");
    serde_json::from_str(&body).unwrap_or(Value::Null)
}

/// Char span of the first occurrence of `needle` in `text`.
pub fn find(text: &str, needle: &str) -> (usize, usize) {
    let byte = text.find(needle).unwrap_or_else(|| panic!("{needle:?} not in text"));
    let start = text[..byte].chars().count();
    (start, start + needle.chars().count())
}

pub fn annotation(text: &str, needle: &str, types: &[&str], id: &str) -> Value {
    let (start, end) = find(text, needle);
    json!({ "id": id, "span": { "start": start, "end": end }, "types": types })
}
