mod common;

use common::*;
use reqwest::StatusCode;
use serde_json::{json, Value};

fn ids(v: &Value) -> Vec<String> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|a| a["id"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn health_and_authentication() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(dir.path(), "");
    let health = expect(s.client.get(s.url("/health")).send().unwrap(), StatusCode::OK);
    assert_eq!(health["documents"], 0);
    assert!(health["version"].is_string());

    expect(s.client.get(s.url("/me")).send().unwrap(), StatusCode::UNAUTHORIZED);
    expect(s.get("nope", "/me"), StatusCode::UNAUTHORIZED);
    let expired = expect(s.get(EXPIRED, "/me"), StatusCode::UNAUTHORIZED);
    assert_eq!(expired["error"], "token expired");
    let me = expect(s.get(ANA, "/me"), StatusCode::OK);
    assert_eq!(me["actor"], "ana");
    assert_eq!(me["role"], "annotator");

    s.prepare();
    let health = expect(s.get(ANA, "/health"), StatusCode::OK);
    assert_eq!(health["by_status"]["assigned"], 2);
}

#[test]
fn every_mutating_endpoint_checks_the_role() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::with_terms(dir.path());

    for tok in [ANA, DORA] {
        expect(s.post_text(tok, "/import", RECORDS), StatusCode::FORBIDDEN);
    }
    expect(s.post_text(MANAGER, "/import", RECORDS), StatusCode::CREATED);
    expect(
        s.post(ANA, "/documents/1/redactions", &json!({ "spans": [] })),
        StatusCode::FORBIDDEN,
    );
    let assign = json!({ "documents": ["1", "2"], "annotators": ["ana", "bia"], "adjudicators": ["dora"], "seed": 1 });
    expect(s.post(MANAGER, "/assignments", &assign), StatusCode::CONFLICT);
    // adjudicators may redact too
    expect(
        s.post(DORA, "/documents/1/redactions", &json!({ "spans": [] })),
        StatusCode::OK,
    );
    expect(
        s.post(MANAGER, "/documents/2/redactions", &json!({ "spans": [] })),
        StatusCode::OK,
    );
    for tok in [ANA, DORA] {
        expect(s.post(tok, "/assignments", &assign), StatusCode::FORBIDDEN);
    }
    expect(s.post(MANAGER, "/assignments", &assign), StatusCode::CREATED);

    let text = s.text("1");
    let a = annotation(&text, "febre", &["sosy"], "x1");
    for tok in [MANAGER, DORA, CAIO] {
        expect(s.post(tok, "/documents/1/annotations", &a), StatusCode::FORBIDDEN);
        expect(
            s.post(tok, "/documents/1/annotations:submit", &json!({})),
            StatusCode::FORBIDDEN,
        );
        expect(s.delete(tok, "/documents/1/annotations/x1"), StatusCode::FORBIDDEN);
    }
    expect(s.post(ANA, "/documents/1/annotations", &a), StatusCode::CREATED);
    expect(
        s.post(ANA, "/documents/1/annotations:submit", &json!({})),
        StatusCode::OK,
    );
    expect(
        s.post(
            BIA,
            "/documents/1/annotations:submit",
            &json!({ "annotations": [annotation(&text, "febre", &["sosy"], "y1")] }),
        ),
        StatusCode::OK,
    );
    let decision = json!({ "kept": [] });
    for tok in [MANAGER, ANA, EVE] {
        expect(
            s.post(tok, "/documents/1/adjudication", &decision),
            StatusCode::FORBIDDEN,
        );
    }
    for tok in [ANA, CAIO] {
        expect(s.get(tok, "/documents/1/divergence"), StatusCode::FORBIDDEN);
        expect(s.get(tok, "/reports/iaa?scope=corpus"), StatusCode::FORBIDDEN);
        expect(s.get(tok, "/export?format=json"), StatusCode::FORBIDDEN);
        expect(s.get(tok, "/dictionaries/negation"), StatusCode::FORBIDDEN);
        expect(s.get(tok, "/audit"), StatusCode::FORBIDDEN);
    }
    expect(s.get(EVE, "/documents/1/divergence"), StatusCode::FORBIDDEN);
    expect(s.get(DORA, "/export?format=json"), StatusCode::FORBIDDEN);
    expect(
        s.post(DORA, "/documents/1/adjudication", &decision),
        StatusCode::CREATED,
    );

    let audit = expect(s.get(MANAGER, "/audit"), StatusCode::OK);
    let kinds: Vec<&str> = audit["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["event"]["kind"].as_str().unwrap())
        .collect();
    assert_eq!(
        kinds,
        [
            "import",
            "redact",
            "redact",
            "assign",
            "save_annotation",
            "submit",
            "submit",
            "adjudicate"
        ]
    );
}

#[test]
fn annotators_never_see_the_partner() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(dir.path(), "");
    s.prepare();
    let text = s.text("1");

    let saved = expect(
        s.post(
            ANA,
            "/documents/1/annotations",
            &json!({ "span": { "start": find(&text, "febre").0, "end": find(&text, "febre").1 }, "types": ["sosy"] }),
        ),
        StatusCode::CREATED,
    );
    assert_eq!(saved["annotator"], "ana");
    assert_eq!(saved["created_round"], 1);
    let id = saved["id"].as_str().unwrap().to_string();
    assert!(id.starts_with("ana-"));

    let mine = expect(s.get(ANA, "/documents/1"), StatusCode::OK);
    assert_eq!(ids(&mine["annotations"]), std::slice::from_ref(&id));
    let theirs = expect(s.get(BIA, "/documents/1"), StatusCode::OK);
    assert_eq!(theirs["annotations"], json!([]));
    assert!(theirs.get("gold").is_none());

    // a client id equal to the partner's is refused
    let clash = json!({ "id": id, "span": { "start": 0, "end": 2 }, "types": ["sosy"] });
    expect(s.post(BIA, "/documents/1/annotations", &clash), StatusCode::CONFLICT);

    // unassigned annotators see nothing
    expect(s.get(CAIO, "/documents/1"), StatusCode::FORBIDDEN);
    let listed = expect(s.get(CAIO, "/documents"), StatusCode::OK);
    assert_eq!(listed, json!([]));

    expect(
        s.delete(ANA, &format!("/documents/1/annotations/{id}")),
        StatusCode::NO_CONTENT,
    );
    expect(
        s.delete(ANA, &format!("/documents/1/annotations/{id}")),
        StatusCode::NOT_FOUND,
    );
    let mine = expect(s.get(ANA, "/documents/1"), StatusCode::OK);
    assert_eq!(mine["annotations"], json!([]));
}

#[test]
fn submission_rules_and_status_machine() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(dir.path(), "");
    expect(s.post_text(MANAGER, "/import", RECORDS), StatusCode::CREATED);
    expect(s.post_text(MANAGER, "/import", RECORDS), StatusCode::CONFLICT);
    expect(
        s.post_text(MANAGER, "/import", "{not json"),
        StatusCode::UNPROCESSABLE_ENTITY,
    );
    let status = |s: &Server| expect(s.get(MANAGER, "/documents/1"), StatusCode::OK)["status"].clone();
    assert_eq!(status(&s), "imported");

    // PHI review: the name becomes a placeholder and the status moves on
    let text = s.text("1");
    let (start, end) = find(&text, "Vital Brasil");
    let redacted = expect(
        s.post(
            MANAGER,
            "/documents/1/redactions",
            &json!({ "spans": [{ "start": start, "end": end }] }),
        ),
        StatusCode::OK,
    );
    assert!(redacted["text"].as_str().unwrap().contains("Dr. [PHI] orientou"));
    assert_eq!(redacted["redactions"][0]["reviewer"], "mgr");
    assert_eq!(status(&s), "reviewed");
    expect(
        s.post(MANAGER, "/documents/2/redactions", &json!({ "spans": [] })),
        StatusCode::OK,
    );
    let created = expect(
        s.post(
            MANAGER,
            "/assignments",
            &json!({ "annotators": ["ana", "bia"], "adjudicators": ["dora"], "seed": 3 }),
        ),
        StatusCode::CREATED,
    );
    assert_eq!(created["assignments"].as_array().unwrap().len(), 2);
    assert_eq!(status(&s), "assigned");
    expect(
        s.post(MANAGER, "/documents/1/redactions", &json!({ "spans": [] })),
        StatusCode::CONFLICT,
    );

    let text = s.text("1");
    let febre = annotation(&text, "febre", &["sosy"], "a-febre");
    let nega = annotation(&text, "nega", &["negt"], "a-nega");

    // relation to a concept that exists nowhere: 422 naming the relation
    let bad = json!({
        "annotations": [febre],
        "relations": [{ "id": "rel-x", "source": "a-nega", "target": "a-febre", "rtype": "negation_of" }],
    });
    let err = expect(
        s.post(ANA, "/documents/1/annotations:submit", &bad),
        StatusCode::UNPROCESSABLE_ENTITY,
    );
    assert!(err["error"].as_str().unwrap().contains("rel-x"), "{err}");
    // nothing was stored by the rejected submission
    assert_eq!(
        expect(s.get(ANA, "/documents/1"), StatusCode::OK)["annotations"],
        json!([])
    );

    // concepts and relations in one payload
    let good = json!({
        "annotations": [febre, nega],
        "relations": [{ "id": "rel-1", "source": "a-nega", "target": "a-febre", "rtype": "negation_of" }],
    });
    let done = expect(s.post(ANA, "/documents/1/annotations:submit", &good), StatusCode::OK);
    assert_eq!(done["status"], "assigned");
    assert_eq!(done["relations"][0]["id"], "rel-1");
    expect(
        s.post(ANA, "/documents/1/annotations:submit", &good),
        StatusCode::CONFLICT,
    );
    expect(s.post(ANA, "/documents/1/annotations", &febre), StatusCode::CONFLICT);

    let div = expect(s.get(DORA, "/documents/1/divergence"), StatusCode::CONFLICT);
    assert_eq!(div["error"], "awaiting second annotation");

    // bia saves a draft, then submits the rest; drafts are part of the submission
    let b_febre = annotation(&text, "febre", &["sosy"], "b-febre");
    expect(s.post(BIA, "/documents/1/annotations", &b_febre), StatusCode::CREATED);
    let b_dip = annotation(&text, "dipirona", &["orch"], "b-dip");
    let done = expect(
        s.post(
            BIA,
            "/documents/1/annotations:submit",
            &json!({ "annotations": [b_dip] }),
        ),
        StatusCode::OK,
    );
    assert_eq!(done["status"], "annotated");
    assert_eq!(done["annotations"].as_array().unwrap().len(), 2);

    let div = expect(s.get(DORA, "/documents/1/divergence"), StatusCode::OK);
    assert_eq!(div["divergence"]["locked"].as_array().unwrap().len(), 1);
    assert_eq!(div["review_order"].as_array().unwrap().len(), 2);
    // strict: 1 full pair, 2 unpaired
    let strict = div["agreement"]["concepts"]["strict"]["value"].as_f64().unwrap();
    assert!((strict - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(div["segment"], "platinum");

    // locked annotations cannot be dropped, unknown ones cannot be kept
    let locked = div["divergence"]["locked"][0]["id"].as_str().unwrap();
    let drop_locked = json!({ "kept": [], "dropped": [locked] });
    expect(
        s.post(DORA, "/documents/1/adjudication", &drop_locked),
        StatusCode::UNPROCESSABLE_ENTITY,
    );
    expect(
        s.post(DORA, "/documents/1/adjudication", &json!({ "kept": ["invented"] })),
        StatusCode::UNPROCESSABLE_ENTITY,
    );

    let gold = expect(
        s.post(
            DORA,
            "/documents/1/adjudication",
            &json!({ "kept": ["b-dip", "a-nega"], "note": "dipirona is a drug" }),
        ),
        StatusCode::CREATED,
    );
    assert_eq!(gold["annotations"].as_array().unwrap().len(), 3);
    assert_eq!(gold["relations"][0]["id"], "rel-1");
    assert_eq!(gold["segment"], "platinum");
    assert_eq!(status(&s), "adjudicated");
    expect(
        s.post(DORA, "/documents/1/adjudication", &json!({ "kept": [] })),
        StatusCode::CONFLICT,
    );

    let report = expect(s.get(MANAGER, "/reports/iaa?scope=doc&doc=1"), StatusCode::OK);
    assert_eq!(report["agreement"]["concepts"]["lenient"]["value"], json!(1.0 / 3.0));
    let rounds = expect(s.get(MANAGER, "/reports/iaa?scope=round"), StatusCode::OK);
    assert_eq!(rounds["rounds"].as_array().unwrap().len(), 1);
    assert_eq!(rounds["stability"], "continue");
    let corpus = expect(s.get(MANAGER, "/reports/iaa?scope=corpus"), StatusCode::OK);
    assert_eq!(corpus["documents"], 1);
    expect(
        s.get(MANAGER, "/reports/iaa?scope=galaxy"),
        StatusCode::UNPROCESSABLE_ENTITY,
    );

    let tsv = s.get(MANAGER, "/dictionaries/negation").text().unwrap();
    assert_eq!(tsv, "nega\t1\t\n");
    expect(s.get(MANAGER, "/dictionaries/nonsense"), StatusCode::NOT_FOUND);
}

#[test]
fn suggestions_from_history_and_terminology() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::with_terms(dir.path());
    s.prepare();
    let text = s.text("1");
    let (start, end) = find(&text, "dipirona");
    let q = format!("/suggestions?doc=1&start={start}&end={end}");

    let r = expect(s.get(ANA, &q), StatusCode::OK);
    assert_eq!(r["provider_unavailable"], false);
    assert_eq!(r["suggestions"][0]["source"], "terminology_exact");
    assert_eq!(r["suggestions"][0]["types"], json!(["orch"]));

    // an accepted annotation feeds the history, which ranks first
    expect(
        s.post(
            BIA,
            "/documents/1/annotations",
            &annotation(&text, "dipirona", &["phsu"], "b1"),
        ),
        StatusCode::CREATED,
    );
    let r = expect(s.get(ANA, &q), StatusCode::OK);
    assert_eq!(r["suggestions"][0]["source"], "history");
    assert_eq!(r["suggestions"][0]["types"], json!(["phsu"]));
    assert_eq!(r["suggestions"][1]["source"], "terminology_exact");

    // suggestions never create annotations
    assert_eq!(
        expect(s.get(ANA, "/documents/1"), StatusCode::OK)["annotations"],
        json!([])
    );

    let (s0, _) = find(&text, "Paciente");
    let (_, e0) = find(&text, "Brasil orientou");
    expect(
        s.get(ANA, &format!("/suggestions?doc=1&start={s0}&end={e0}")),
        StatusCode::UNPROCESSABLE_ENTITY,
    );
    expect(s.get(CAIO, &q), StatusCode::FORBIDDEN);
}

#[test]
fn provider_down_degrades_to_history() {
    let dir = tempfile::tempdir().unwrap();
    // nothing listens on port 9; lookups fail fast
    let s = Server::start(
        dir.path(),
        "[terminology]\nurl = \"http://127.0.0.1:9\"\ntimeout_ms = 500\n",
    );
    s.prepare();
    let text = s.text("1");
    let (start, end) = find(&text, "febre");
    let q = format!("/suggestions?doc=1&start={start}&end={end}");

    let r = expect(s.get(ANA, &q), StatusCode::OK);
    assert_eq!(r["provider_unavailable"], true);
    assert_eq!(r["suggestions"], json!([]));

    expect(
        s.post(
            BIA,
            "/documents/1/annotations",
            &annotation(&text, "febre", &["sosy"], "b1"),
        ),
        StatusCode::CREATED,
    );
    let r = expect(s.get(ANA, &q), StatusCode::OK);
    assert_eq!(r["provider_unavailable"], true);
    let sources: Vec<&str> = r["suggestions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["source"].as_str().unwrap())
        .collect();
    assert_eq!(sources, ["history"]);
}

#[test]
fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(dir.path(), "");
    s.prepare();
    let text = s.text("2");
    expect(
        s.post(
            ANA,
            "/documents/2/annotations",
            &annotation(&text, "cefaleia", &["sosy"], "k1"),
        ),
        StatusCode::CREATED,
    );
    drop(s);

    let s = Server::start(dir.path(), "");
    let doc = expect(s.get(ANA, "/documents/2"), StatusCode::OK);
    assert_eq!(ids(&doc["annotations"]), ["k1"]);
    assert_eq!(doc["status"], "assigned");
    let health = expect(s.get(ANA, "/health"), StatusCode::OK);
    assert_eq!(health["documents"], 2);
}
