//! HTTP routes. Handlers check the role, then either read under the shared
//! lock or hand an event to [`AppState::commit`].

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{FromRequestParts, Path, Query, State as Extract};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use chrono::Utc;
use clinanno_core::adjudication::AdjudicationDecision;
use clinanno_core::agreement::{aggregate, SegmentLabel};
use clinanno_core::ingestion::{
    dictionary_tsv, export_corpus, export_gold, extract_dictionaries, import_records, parse_jsonl, DictionaryKind,
    ExportFormat, GoldRecord, IaaSummary, IngestionError,
};
use clinanno_core::registry::Registry;
use clinanno_core::suggestion::{
    normalize, suggest, FileTerminology, SuggestConfig, SuggestionError, TerminologyProvider,
};
use clinanno_core::workflow::{check_stability, plan_assignments, RoundReport, WorkflowError};
use clinanno_core::{
    char_slice, ActorId, Annotation, AnnotationId, DocumentId, DocumentStatus, Relation, RelationId, RelationType,
    Role, Span,
};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::auth::{AuthFailure, Session, Users};
use crate::config::Config;
use crate::store::{reviews_unassigned, DocState, Entry, Event, Journal, Rejection, State};
use crate::terminology::{RemoteTerminology, DEFAULT_TIMEOUT_MS};

pub type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn forbidden(message: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, message)
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl From<Rejection> for ApiError {
    fn from(r: Rejection) -> Self {
        let status = match r {
            Rejection::NotFound(_) => StatusCode::NOT_FOUND,
            Rejection::Forbidden(_) => StatusCode::FORBIDDEN,
            Rejection::Conflict(_) => StatusCode::CONFLICT,
            Rejection::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, r.to_string())
    }
}

impl From<IngestionError> for ApiError {
    fn from(e: IngestionError) -> Self {
        Rejection::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

impl FromRequestParts<Shared> for Session {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, app: &Shared) -> Result<Self, Self::Rejection> {
        let header = parts.headers.get(AUTHORIZATION).and_then(|v| v.to_str().ok());
        app.users.authenticate(header, Utc::now()).map_err(|f| {
            let msg = match f {
                AuthFailure::Missing => "missing bearer token",
                AuthFailure::Unknown => "unknown token",
                AuthFailure::Expired => "token expired",
            };
            ApiError::new(StatusCode::UNAUTHORIZED, msg)
        })
    }
}

fn require(session: &Session, roles: &[Role]) -> ApiResult<()> {
    if roles.contains(&session.role) {
        Ok(())
    } else {
        Err(ApiError::forbidden(format!("role {} may not do this", session.role)))
    }
}

pub struct AppState {
    pub config: Config,
    pub registry: Arc<Registry>,
    pub users: Users,
    pub state: RwLock<State>,
    journal: Mutex<Journal>,
    pub terminology: Option<Arc<dyn TerminologyProvider>>,
    pub suggest: SuggestConfig,
}

impl AppState {
    /// Loads the registry and terminology, opens the journal and replays it.
    /// Builds blocking HTTP clients, so call it outside any async runtime.
    pub fn open(config: Config) -> anyhow::Result<Self> {
        use anyhow::Context;
        let registry = Arc::new(match &config.registry {
            Some(p) => Registry::load(p).with_context(|| format!("loading registry {}", p.display()))?,
            None => Registry::builtin(),
        });
        let terminology: Option<Arc<dyn TerminologyProvider>> =
            match (&config.terminology.url, &config.terminology.file) {
                (Some(url), _) => {
                    let timeout = Duration::from_millis(config.terminology.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS));
                    Some(Arc::new(
                        RemoteTerminology::new(url, timeout).map_err(anyhow::Error::msg)?,
                    ))
                }
                (None, Some(file)) => Some(Arc::new(
                    FileTerminology::load(file, &registry)
                        .with_context(|| format!("loading terminology {}", file.display()))?,
                )),
                (None, None) => None,
            };
        let (journal, entries) = Journal::open(&config.storage)?;
        let state = State::replay(registry.clone(), config.segmentation(), &entries)?;
        tracing::info!(
            entries = entries.len(),
            documents = state.docs.len(),
            "journal replayed"
        );
        let suggest = SuggestConfig {
            stale_after_round: config.stale_after_round,
            ..SuggestConfig::default()
        };
        Ok(AppState {
            users: Users::new(&config.users),
            registry,
            state: RwLock::new(state),
            journal: Mutex::new(journal),
            terminology,
            suggest,
            config,
        })
    }

    /// Builds an event against the current state, applies it and makes it
    /// durable. The write lock is held until the fsync returns, so no reader
    /// ever sees an unacknowledged write.
    pub fn commit<T>(&self, actor: &ActorId, build: impl FnOnce(&State, u64) -> ApiResult<(Event, T)>) -> ApiResult<T> {
        let mut state = self.state.write();
        let seq = state.next_seq;
        let (event, out) = build(&state, seq)?;
        let entry = Entry {
            seq,
            at: Utc::now(),
            actor: actor.clone(),
            event,
        };
        state.apply(&entry)?;
        if let Err(e) = self.journal.lock().append(&entry) {
            // memory is ahead of disk now; continuing would acknowledge writes
            // that a restart forgets
            tracing::error!(error = %e, seq, "journal append failed, aborting");
            eprintln!("fatal: journal append failed: {e}");
            std::process::abort();
        }
        Ok(out)
    }

    pub fn audit(&self) -> ApiResult<Vec<Entry>> {
        self.journal
            .lock()
            .read_all()
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
    }
}

pub fn router(app: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/me", get(me))
        .route("/registry", get(registry))
        .route("/import", post(import))
        .route("/assignments", post(create_assignments).get(list_assignments))
        .route("/documents", get(list_documents))
        .route("/documents/{id}", get(get_document))
        .route("/documents/{id}/redactions", post(redact))
        .route("/documents/{id}/annotations", post(save_annotation))
        .route("/documents/{id}/annotations/{ann}", delete(delete_annotation))
        .route("/documents/{id}/annotations:submit", post(submit))
        .route("/documents/{id}/divergence", get(divergence))
        .route("/documents/{id}/adjudication", post(adjudication))
        .route("/suggestions", get(suggestions))
        .route("/reports/iaa", get(iaa_report))
        .route("/export", get(export_all))
        .route("/export/{id}", get(export_one))
        .route("/dictionaries/{kind}", get(dictionary))
        .route("/audit", get(audit))
        .with_state(app)
}

async fn health(Extract(app): Extract<Shared>) -> Json<Value> {
    let state = app.state.read();
    let by_status: serde_json::Map<String, Value> = state
        .counts()
        .into_iter()
        .map(|(s, n)| (s.to_string(), json!(n)))
        .collect();
    Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "documents": state.docs.len(),
        "by_status": by_status,
    }))
}

async fn me(session: Session) -> Json<Session> {
    Json(session)
}

async fn registry(Extract(app): Extract<Shared>, _session: Session) -> Json<Value> {
    let groups: Vec<_> = app.registry.groups().collect();
    let types: Vec<_> = app.registry.types().collect();
    Json(json!({ "groups": groups, "types": types }))
}

async fn import(Extract(app): Extract<Shared>, session: Session, body: String) -> ApiResult<(StatusCode, Json<Value>)> {
    require(&session, &[Role::Manager])?;
    let records = parse_jsonl(&body)?;
    let report = import_records(records)?;
    let ids: Vec<DocumentId> = report.documents.iter().map(|d| d.id.clone()).collect();
    if !report.documents.is_empty() {
        let documents = report.documents;
        app.commit(&session.actor, |_, _| Ok((Event::Import { documents }, ())))?;
    }
    Ok((
        StatusCode::CREATED,
        Json(json!({ "imported": ids, "warnings": report.warnings })),
    ))
}

#[derive(Deserialize)]
struct RedactRequest {
    spans: Vec<Span>,
}

async fn redact(
    Extract(app): Extract<Shared>,
    session: Session,
    Path(id): Path<DocumentId>,
    Json(req): Json<RedactRequest>,
) -> ApiResult<Json<Value>> {
    require(&session, &[Role::Manager, Role::Adjudicator])?;
    let reviewer = session.as_actor();
    app.commit(&session.actor, |state, _| {
        state.doc(&id)?;
        Ok((
            Event::Redact {
                document: id.clone(),
                spans: req.spans,
                reviewer,
            },
            (),
        ))
    })?;
    let state = app.state.read();
    Ok(Json(document_view(&session, state.doc(&id)?)))
}

fn default_round() -> u32 {
    1
}

#[derive(Deserialize)]
struct AssignRequest {
    /// Defaults to every reviewed document not yet assigned.
    documents: Option<Vec<DocumentId>>,
    annotators: Vec<ActorId>,
    adjudicators: Vec<ActorId>,
    seed: Option<u64>,
    #[serde(default = "default_round")]
    round: u32,
}

fn workflow_error(e: WorkflowError) -> ApiError {
    match e {
        WorkflowError::NotReviewed { .. } => ApiError::new(StatusCode::CONFLICT, e.to_string()),
        _ => ApiError::invalid(e.to_string()),
    }
}

async fn create_assignments(
    Extract(app): Extract<Shared>,
    session: Session,
    Json(req): Json<AssignRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    require(&session, &[Role::Manager])?;
    let actors = |ids: &[ActorId]| {
        ids.iter()
            .map(|id| {
                let user = app
                    .users
                    .find(id)
                    .ok_or_else(|| ApiError::invalid(format!("unknown user {id}")))?;
                Ok(clinanno_core::Actor::new(user.id.as_str(), user.role))
            })
            .collect::<ApiResult<Vec<_>>>()
    };
    let annotators = actors(&req.annotators)?;
    let adjudicators = actors(&req.adjudicators)?;
    let seed = req.seed.unwrap_or(app.config.seed);
    let plan = app.commit(&session.actor, |state, _| {
        let documents = match req.documents {
            Some(d) => d,
            None => state
                .docs
                .values()
                .filter(|d| d.doc.status == DocumentStatus::Reviewed)
                .map(|d| d.doc.id.clone())
                .collect(),
        };
        for id in &documents {
            state.doc(id)?;
        }
        let plan = plan_assignments(&documents, &annotators, &adjudicators, seed, req.round).map_err(workflow_error)?;
        Ok((
            Event::Assign {
                assignments: plan.clone(),
            },
            plan,
        ))
    })?;
    Ok((StatusCode::CREATED, Json(json!({ "seed": seed, "assignments": plan }))))
}

async fn list_assignments(Extract(app): Extract<Shared>, session: Session) -> Json<Value> {
    let state = app.state.read();
    let list: Vec<_> = state
        .docs
        .values()
        .filter_map(|d| d.assignment.as_ref())
        .filter(|a| session.is(Role::Manager) || a.involves(&session.actor))
        .collect();
    Json(json!(list))
}

fn can_read(session: &Session, d: &DocState) -> bool {
    match (session.role, &d.assignment) {
        (Role::Manager, _) => true,
        (Role::Adjudicator, Some(a)) => a.adjudicator == session.actor,
        (Role::Annotator, Some(a)) => a.is_annotator(&session.actor),
        (role, None) => reviews_unassigned(role),
    }
}

fn readable<'a>(session: &Session, state: &'a State, id: &DocumentId) -> ApiResult<&'a DocState> {
    let d = state.doc(id)?;
    if can_read(session, d) {
        Ok(d)
    } else {
        Err(ApiError::forbidden(format!(
            "{} may not read document {id}",
            session.actor
        )))
    }
}

async fn list_documents(Extract(app): Extract<Shared>, session: Session) -> Json<Value> {
    let state = app.state.read();
    let list: Vec<Value> = state
        .docs
        .values()
        .filter(|d| can_read(&session, d))
        .map(|d| {
            json!({
                "id": d.doc.id,
                "status": d.doc.status,
                "assignment": d.assignment,
                "submitted": d.submissions.keys().collect::<Vec<_>>(),
            })
        })
        .collect();
    Json(json!(list))
}

/// What `session` may see of a document. Annotators get their own work only.
fn document_view(session: &Session, d: &DocState) -> Value {
    let mut v = json!({
        "id": d.doc.id,
        "status": d.doc.status,
        "text": d.doc.text,
        "sections": d.doc.sections,
        "source": d.doc.source,
        "assignment": d.assignment,
        "submitted": d.submissions.keys().collect::<Vec<_>>(),
    });
    let obj = v.as_object_mut().expect("object literal");
    match session.role {
        Role::Annotator => {
            obj.insert("annotations".into(), json!(d.own_annotations(&session.actor)));
            let relations = d
                .submissions
                .get(&session.actor)
                .map(|s| s.relations.clone())
                .unwrap_or_default();
            obj.insert("relations".into(), json!(relations));
        }
        Role::Adjudicator | Role::Manager => {
            obj.insert("redactions".into(), json!(d.redactions));
            obj.insert("gold".into(), json!(d.gold));
        }
    }
    v
}

async fn get_document(
    Extract(app): Extract<Shared>,
    session: Session,
    Path(id): Path<DocumentId>,
) -> ApiResult<Json<Value>> {
    let state = app.state.read();
    Ok(Json(document_view(&session, readable(&session, &state, &id)?)))
}

#[derive(Deserialize)]
struct AnnotationInput {
    id: Option<AnnotationId>,
    span: Span,
    types: BTreeSet<String>,
    #[serde(default)]
    expansion: Option<String>,
}

impl AnnotationInput {
    fn build(self, state: &State, actor: &ActorId, doc: &DocumentId, fallback_id: String) -> Annotation {
        let round = state
            .docs
            .get(doc)
            .and_then(|d| d.assignment.as_ref())
            .map_or(0, |a| a.round);
        Annotation {
            id: self.id.unwrap_or_else(|| AnnotationId::new(fallback_id)),
            document: doc.clone(),
            annotator: actor.clone(),
            span: self.span,
            types: self.types,
            expansion: self.expansion,
            created_round: round,
        }
    }
}

async fn save_annotation(
    Extract(app): Extract<Shared>,
    session: Session,
    Path(id): Path<DocumentId>,
    Json(input): Json<AnnotationInput>,
) -> ApiResult<(StatusCode, Json<Annotation>)> {
    require(&session, &[Role::Annotator])?;
    let actor = &session.actor;
    let annotation = app.commit(actor, |state, seq| {
        let a = input.build(state, actor, &id, format!("{actor}-{seq}"));
        Ok((Event::SaveAnnotation { annotation: a.clone() }, a))
    })?;
    Ok((StatusCode::CREATED, Json(annotation)))
}

async fn delete_annotation(
    Extract(app): Extract<Shared>,
    session: Session,
    Path((id, ann)): Path<(DocumentId, AnnotationId)>,
) -> ApiResult<StatusCode> {
    require(&session, &[Role::Annotator])?;
    app.commit(&session.actor, |_, _| {
        Ok((
            Event::DeleteAnnotation {
                document: id,
                annotation: ann,
            },
            (),
        ))
    })?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct RelationInput {
    id: Option<RelationId>,
    source: AnnotationId,
    target: AnnotationId,
    rtype: RelationType,
}

#[derive(Deserialize)]
struct SubmitRequest {
    #[serde(default)]
    annotations: Vec<AnnotationInput>,
    #[serde(default)]
    relations: Vec<RelationInput>,
}

async fn submit(
    Extract(app): Extract<Shared>,
    session: Session,
    Path(id): Path<DocumentId>,
    Json(req): Json<SubmitRequest>,
) -> ApiResult<Json<Value>> {
    require(&session, &[Role::Annotator])?;
    let actor = &session.actor;
    app.commit(actor, |state, seq| {
        let annotations = req
            .annotations
            .into_iter()
            .enumerate()
            .map(|(i, a)| a.build(state, actor, &id, format!("{actor}-{seq}-{i}")))
            .collect();
        let relations = req
            .relations
            .into_iter()
            .enumerate()
            .map(|(i, r)| Relation {
                id: r.id.unwrap_or_else(|| RelationId::new(format!("{actor}-{seq}-r{i}"))),
                source: r.source,
                target: r.target,
                rtype: r.rtype,
                annotator: actor.clone(),
            })
            .collect();
        Ok((
            Event::Submit {
                document: id.clone(),
                annotations,
                relations,
            },
            (),
        ))
    })?;
    let state = app.state.read();
    let d = state.doc(&id)?;
    Ok(Json(json!({
        "document": id,
        "status": d.doc.status,
        "annotations": d.own_annotations(actor),
        "relations": d.submissions.get(actor).map(|s| s.relations.clone()).unwrap_or_default(),
    })))
}

#[derive(Deserialize)]
struct SuggestQuery {
    doc: DocumentId,
    start: usize,
    end: usize,
}

async fn suggestions(
    Extract(app): Extract<Shared>,
    session: Session,
    Query(q): Query<SuggestQuery>,
) -> ApiResult<Json<Value>> {
    let span = Span {
        start: q.start,
        end: q.end,
    };
    let (text, history) = {
        let state = app.state.read();
        let d = readable(&session, &state, &q.doc)?;
        let history = char_slice(&d.doc.text, span)
            .map(|s| state.history.subset(&normalize(s)))
            .unwrap_or_default();
        (d.doc.text.clone(), history)
    };
    let provider = app.terminology.clone();
    let config = app.suggest.clone();
    // the remote provider blocks; keep it off the async workers
    let result = tokio::task::spawn_blocking(move || suggest(&text, span, &history, provider.as_deref(), &config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    match result {
        Ok(r) => Ok(Json(json!(r))),
        Err(e @ (SuggestionError::Model(_) | SuggestionError::Selection { .. })) => {
            Err(ApiError::invalid(e.to_string()))
        }
    }
}

fn adjudication_view<'a>(session: &Session, state: &'a State, id: &DocumentId) -> ApiResult<&'a DocState> {
    require(session, &[Role::Manager, Role::Adjudicator])?;
    let d = readable(session, state, id)?;
    if !d.both_submitted() {
        return Err(ApiError::new(StatusCode::CONFLICT, "awaiting second annotation"));
    }
    Ok(d)
}

async fn divergence(
    Extract(app): Extract<Shared>,
    session: Session,
    Path(id): Path<DocumentId>,
) -> ApiResult<Json<Value>> {
    let state = app.state.read();
    let d = adjudication_view(&session, &state, &id)?;
    let div = d.divergence(&state.registry).map_err(Rejection::from)?;
    let agreement = d.agreement(&state.registry).transpose()?;
    let order: Vec<Value> = div
        .review_order()
        .into_iter()
        .map(|(origin, a)| json!({ "origin": origin, "annotation": a.id }))
        .collect();
    Ok(Json(json!({
        "divergence": div,
        "review_order": order,
        "agreement": agreement,
        "segment": state.segment_of(d)?,
    })))
}

#[derive(Deserialize)]
struct AdjudicationRequest {
    kept: Vec<AnnotationId>,
    #[serde(default)]
    dropped: Vec<AnnotationId>,
    #[serde(default)]
    kept_relations: Option<Vec<RelationId>>,
    #[serde(default)]
    note: Option<String>,
}

async fn adjudication(
    Extract(app): Extract<Shared>,
    session: Session,
    Path(id): Path<DocumentId>,
    Json(req): Json<AdjudicationRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    require(&session, &[Role::Adjudicator])?;
    let decision = AdjudicationDecision {
        document: id.clone(),
        adjudicator: session.actor.clone(),
        kept: req.kept,
        dropped: req.dropped,
        kept_relations: req.kept_relations,
        timestamp: Some(Utc::now()),
        note: req.note,
    };
    app.commit(&session.actor, |_, _| Ok((Event::Adjudicate { decision }, ())))?;
    let state = app.state.read();
    Ok((StatusCode::CREATED, Json(json!(state.doc(&id)?.gold))))
}

#[derive(Deserialize)]
struct IaaQuery {
    #[serde(default = "default_scope")]
    scope: String,
    doc: Option<DocumentId>,
}

fn default_scope() -> String {
    "corpus".into()
}

async fn iaa_report(
    Extract(app): Extract<Shared>,
    session: Session,
    Query(q): Query<IaaQuery>,
) -> ApiResult<Json<Value>> {
    require(&session, &[Role::Manager, Role::Adjudicator])?;
    let state = app.state.read();
    let registry = &state.registry;
    match q.scope.as_str() {
        "doc" => {
            let id = q
                .doc
                .ok_or_else(|| ApiError::invalid("scope=doc needs a doc parameter"))?;
            let d = adjudication_view(&session, &state, &id)?;
            let agreement = d.agreement(registry).transpose()?;
            Ok(Json(json!({
                "document": id,
                "agreement": agreement,
                "segment": state.segment_of(d)?,
            })))
        }
        "corpus" => {
            let mut reports = Vec::new();
            for d in state.docs.values().filter(|d| can_read(&session, d)) {
                if let Some(r) = d.agreement(registry) {
                    reports.push(r?);
                }
            }
            let agreement = aggregate(&reports).ok();
            Ok(Json(json!({ "documents": reports.len(), "agreement": agreement })))
        }
        "round" => {
            let mut by_round: std::collections::BTreeMap<u32, Vec<_>> = Default::default();
            for d in state.docs.values().filter(|d| can_read(&session, d)) {
                if let (Some(a), Some(r)) = (&d.assignment, d.agreement(registry)) {
                    by_round.entry(a.round).or_default().push((a, r?));
                }
            }
            let mut rounds: Vec<RoundReport> = Vec::new();
            for (round, entries) in &by_round {
                let refs: Vec<_> = entries.iter().map(|(a, r)| (*a, r)).collect();
                match RoundReport::build(*round, &refs) {
                    Ok(r) => rounds.push(r),
                    Err(WorkflowError::EmptyRound(_)) => {}
                    Err(e) => return Err(ApiError::invalid(e.to_string())),
                }
            }
            let stability = check_stability(&rounds, app.config.epsilon);
            Ok(Json(json!({
                "rounds": rounds,
                "stability": stability,
                "epsilon": app.config.epsilon,
            })))
        }
        other => Err(ApiError::invalid(format!(
            "unknown scope `{other}` (doc, corpus or round)"
        ))),
    }
}

fn gold_record(state: &State, d: &DocState) -> ApiResult<Option<GoldRecord>> {
    let Some(gold) = &d.gold else { return Ok(None) };
    let iaa = match d.agreement(&state.registry) {
        Some(r) => IaaSummary::from(&r?),
        None => IaaSummary::default(),
    };
    Ok(Some(GoldRecord::assemble(&d.doc, gold, iaa)?))
}

fn gold_records(state: &State, segment: Option<SegmentLabel>) -> ApiResult<Vec<GoldRecord>> {
    let mut out = Vec::new();
    for d in state.docs.values() {
        if let Some(r) = gold_record(state, d)? {
            if segment.is_none_or(|s| s == r.segment) {
                out.push(r);
            }
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
    segment: Option<String>,
}

fn export_format(q: &ExportQuery) -> ApiResult<ExportFormat> {
    q.format
        .as_deref()
        .unwrap_or("json")
        .parse()
        .map_err(|_| ApiError::invalid("format must be json or xml"))
}

fn export_response(bytes: Vec<u8>, format: ExportFormat) -> Response {
    let mime = match format {
        ExportFormat::Json => "application/json",
        ExportFormat::Xml => "application/xml",
    };
    ([(CONTENT_TYPE, mime)], bytes).into_response()
}

async fn export_all(
    Extract(app): Extract<Shared>,
    session: Session,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    require(&session, &[Role::Manager])?;
    let format = export_format(&q)?;
    let segment = match q.segment.as_deref().unwrap_or("all") {
        "all" => None,
        s => Some(SegmentLabel::parse(s).ok_or_else(|| ApiError::invalid("segment must be gold, platinum or all"))?),
    };
    let state = app.state.read();
    let records = gold_records(&state, segment)?;
    Ok(export_response(export_corpus(&records, format), format))
}

async fn export_one(
    Extract(app): Extract<Shared>,
    session: Session,
    Path(id): Path<DocumentId>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    require(&session, &[Role::Manager])?;
    let format = export_format(&q)?;
    let state = app.state.read();
    let record = gold_record(&state, state.doc(&id)?)?
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, format!("document {id} is not adjudicated")))?;
    Ok(export_response(export_gold(&record, format), format))
}

#[derive(Deserialize)]
struct DictionaryQuery {
    format: Option<String>,
}

async fn dictionary(
    Extract(app): Extract<Shared>,
    session: Session,
    Path(kind): Path<String>,
    Query(q): Query<DictionaryQuery>,
) -> ApiResult<Response> {
    require(&session, &[Role::Manager, Role::Adjudicator])?;
    let kind: DictionaryKind = kind
        .parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "dictionary must be negation or abbreviation"))?;
    let state = app.state.read();
    let dicts = extract_dictionaries(&gold_records(&state, None)?);
    let entries = dicts.get(kind);
    Ok(match q.format.as_deref().unwrap_or("tsv") {
        "tsv" => (
            [(CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")],
            dictionary_tsv(entries),
        )
            .into_response(),
        "json" => Json(json!({ "entries": entries, "warnings": dicts.warnings })).into_response(),
        _ => return Err(ApiError::invalid("format must be tsv or json")),
    })
}

#[derive(Serialize)]
struct AuditPage {
    entries: Vec<Entry>,
}

async fn audit(Extract(app): Extract<Shared>, session: Session) -> ApiResult<Json<AuditPage>> {
    require(&session, &[Role::Manager])?;
    Ok(Json(AuditPage { entries: app.audit()? }))
}
