//! REST service for correcting table annotations and inspecting program traces.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tabrouter::bench::load_manifest;
use tabrouter::category::QuestionCategory;
use tabrouter::dsl::{execute, normalize, parse_program_value, validate, ExecError, FormatPolicy, Program};
use tabrouter::sample::{Question, Sample};
use tabrouter::table::{
    apply_edit, detect_row_roles, parse_table, sanitize_html, to_table_json, EditError, EditOp, RoleKeywordConfig,
    RowRole, TableGrid, TableJson,
};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("no sample with id {0:?}")]
    NotFound(String),
    #[error("sample {0:?} has no image")]
    NoImage(String),
    #[error("version {got} is stale; current version is {current}")]
    StaleVersion { got: u64, current: u64 },
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error("row {row} is not a body row")]
    NotBodyRow { row: usize },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("cannot persist annotation: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violated_invariant: Option<String>,
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) | ApiError::NoImage(_) => StatusCode::NOT_FOUND,
            ApiError::StaleVersion { .. } => StatusCode::CONFLICT,
            ApiError::Edit(_) | ApiError::NotBodyRow { .. } | ApiError::Exec(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn body(&self) -> ErrorBody {
        let (code, violated) = match self {
            ApiError::NotFound(_) => ("NotFound".to_string(), None),
            ApiError::NoImage(_) => ("NoImage".to_string(), None),
            ApiError::StaleVersion { .. } => ("StaleVersion".to_string(), Some("version must match the session".into())),
            ApiError::Edit(e) => (e.code().to_string(), Some(e.to_string())),
            ApiError::NotBodyRow { .. } => ("OutOfBounds".to_string(), Some("roles apply to body rows only".into())),
            ApiError::Exec(e) => (e.kind.as_str().to_string(), None),
            ApiError::Io(_) => ("Io".to_string(), None),
        };
        ErrorBody { code, message: self.to_string(), violated_invariant: violated }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

/// Editable state of one sample.
#[derive(Clone, Debug)]
pub struct Session {
    pub sample: Sample,
    pub grid: TableGrid,
    /// One role per grid row; header rows are always `Header`.
    pub roles: Vec<RowRole>,
    pub version: u64,
    pub dirty: bool,
}

impl Session {
    fn table_json(&self) -> TableJson {
        to_table_json(&self.grid, &self.roles).unwrap_or_default()
    }
}

pub struct AppState {
    sessions: BTreeMap<String, Mutex<Session>>,
    annotations_dir: PathBuf,
    keywords: RoleKeywordConfig,
}

pub type Shared = Arc<AppState>;

fn grid_of(html: &str) -> TableGrid {
    sanitize_html(html).and_then(|h| parse_table(&h)).unwrap_or_default()
}

fn annotation_paths(dir: &Path, id: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{id}.html")), dir.join(format!("{id}.roles.json")))
}

/// Keeps roles aligned with rows after a structural edit.
fn realign_roles(old: &[RowRole], op: &EditOp, grid: &TableGrid, keywords: &RoleKeywordConfig) -> Vec<RowRole> {
    let mut roles = old.to_vec();
    match op {
        EditOp::InsertRow { at } => roles.insert((*at).min(roles.len()), RowRole::Data),
        EditOp::DeleteRow { at } if *at < roles.len() => {
            roles.remove(*at);
        }
        EditOp::DuplicateRow { at } if *at < roles.len() => roles.insert(*at + 1, roles[*at]),
        _ => {}
    }
    let detected = detect_row_roles(grid, keywords);
    if roles.len() != grid.n_rows {
        return detected;
    }
    roles
        .into_iter()
        .zip(detected)
        .enumerate()
        .map(|(r, (kept, fresh))| {
            if r < grid.header_row_count {
                RowRole::Header
            } else if kept == RowRole::Header {
                fresh
            } else {
                kept
            }
        })
        .collect()
}

impl AppState {
    /// Sessions from the manifest samples; a saved annotation in
    /// `annotations_dir` takes precedence over the manifest HTML.
    pub fn new(samples: Vec<Sample>, annotations_dir: PathBuf, keywords: RoleKeywordConfig) -> Self {
        let sessions = samples
            .into_iter()
            .map(|sample| {
                let (html_path, roles_path) = annotation_paths(&annotations_dir, &sample.id);
                let grid = match std::fs::read_to_string(&html_path) {
                    Ok(saved) => grid_of(&saved),
                    Err(_) => grid_of(&sample.gt_html),
                };
                let detected = detect_row_roles(&grid, &keywords);
                let saved_roles: Option<Vec<RowRole>> =
                    std::fs::read_to_string(&roles_path).ok().and_then(|t| serde_json::from_str(&t).ok());
                let roles = match saved_roles {
                    Some(r) if r.len() == grid.n_rows => r,
                    _ => match &sample.row_roles {
                        Some(body) if body.len() + grid.header_row_count == grid.n_rows => {
                            detected[..grid.header_row_count].iter().chain(body).copied().collect()
                        }
                        _ => detected,
                    },
                };
                let session = Session { sample, grid, roles, version: 0, dirty: false };
                (session.sample.id.clone(), Mutex::new(session))
            })
            .collect();
        AppState { sessions, annotations_dir, keywords }
    }

    pub fn from_manifest(manifest: &Path, annotations_dir: Option<PathBuf>) -> anyhow::Result<Self> {
        let m = load_manifest(manifest)?;
        let dir = annotations_dir
            .unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).join("annotations"));
        Ok(Self::new(m.samples, dir, RoleKeywordConfig::default()))
    }

    fn session(&self, id: &str) -> Result<&Mutex<Session>, ApiError> {
        self.sessions.get(id).ok_or_else(|| ApiError::NotFound(id.to_string()))
    }
}

#[derive(Serialize)]
struct SampleSummary {
    id: String,
    questions: usize,
    has_image: bool,
    version: u64,
    dirty: bool,
}

#[derive(Serialize)]
pub struct SampleView {
    pub id: String,
    pub html: String,
    pub grid: TableGrid,
    pub roles: Vec<RowRole>,
    pub table_json: TableJson,
    pub questions: Vec<Question>,
    pub version: u64,
    pub dirty: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
}

fn view(s: &Session) -> SampleView {
    SampleView {
        id: s.sample.id.clone(),
        html: s.grid.to_html(),
        grid: s.grid.clone(),
        roles: s.roles.clone(),
        table_json: s.table_json(),
        questions: s.sample.questions.clone(),
        version: s.version,
        dirty: s.dirty,
        image_url: s.sample.image_path.as_ref().map(|_| format!("/samples/{}/image", s.sample.id)),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditAction {
    Edit(EditOp),
    /// Sets the role of a body row (grid row index).
    SetRole { row: usize, role: RowRole },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EditRequest {
    pub version: u64,
    #[serde(flatten)]
    pub action: EditAction,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SaveRequest {
    pub version: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceRequest {
    /// A program object (`{"qid", "ops"}`) or a bare list of ops.
    pub program: Value,
    pub category: QuestionCategory,
}

fn check_version(s: &Session, got: u64) -> Result<(), ApiError> {
    if s.version != got {
        return Err(ApiError::StaleVersion { got, current: s.version });
    }
    Ok(())
}

async fn list_samples(State(st): State<Shared>) -> Json<Vec<SampleSummary>> {
    let out = st
        .sessions
        .values()
        .map(|m| {
            let s = m.lock().expect("session lock");
            SampleSummary {
                id: s.sample.id.clone(),
                questions: s.sample.questions.len(),
                has_image: s.sample.image_path.is_some(),
                version: s.version,
                dirty: s.dirty,
            }
        })
        .collect();
    Json(out)
}

async fn get_sample(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<SampleView>, ApiError> {
    let s = st.session(&id)?.lock().expect("session lock");
    Ok(Json(view(&s)))
}

async fn post_edit(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<EditRequest>,
) -> Result<Json<SampleView>, ApiError> {
    let mut s = st.session(&id)?.lock().expect("session lock");
    check_version(&s, req.version)?;
    match req.action {
        EditAction::Edit(op) => {
            let grid = apply_edit(&s.grid, &op)?;
            s.roles = realign_roles(&s.roles, &op, &grid, &st.keywords);
            s.grid = grid;
        }
        EditAction::SetRole { row, role } => {
            if row < s.grid.header_row_count || row >= s.grid.n_rows || role == RowRole::Header {
                return Err(ApiError::NotBodyRow { row });
            }
            s.roles[row] = role;
        }
    }
    s.version += 1;
    s.dirty = true;
    Ok(Json(view(&s)))
}

async fn post_save(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<SaveRequest>,
) -> Result<Json<Value>, ApiError> {
    let mut s = st.session(&id)?.lock().expect("session lock");
    check_version(&s, req.version)?;
    std::fs::create_dir_all(&st.annotations_dir)?;
    let (html_path, roles_path) = annotation_paths(&st.annotations_dir, &id);
    std::fs::write(&html_path, s.grid.to_html())?;
    std::fs::write(&roles_path, serde_json::to_string_pretty(&s.roles).expect("roles serialize"))?;
    s.version += 1;
    s.dirty = false;
    tracing::info!(sample = %id, version = s.version, "annotation saved");
    Ok(Json(json!({ "version": s.version, "html_path": html_path, "roles_path": roles_path })))
}

fn program_from(v: &Value) -> Result<Program, ExecError> {
    match v {
        Value::Array(_) => parse_program_value(&json!({ "qid": 1, "ops": v }), Some(1)),
        other => parse_program_value(other, Some(1)),
    }
}

async fn post_trace(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<TraceRequest>,
) -> Result<Json<Value>, ApiError> {
    let table = st.session(&id)?.lock().expect("session lock").table_json();
    let program = program_from(&req.program)?;
    validate(&program, &table)?;
    let normalized = normalize(&program, req.category);
    let trace = execute(&normalized, &table, &FormatPolicy::default());
    if let Err(e) = trace.answer() {
        return Err(ApiError::Exec(e.clone()));
    }
    Ok(Json(json!({ "program": normalized.to_json(), "trace": trace, "table_json": table })))
}

fn mime_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("gif") => "image/gif",
        _ => "application/octet-stream",
    }
}

async fn get_image(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let path = st.session(&id)?.lock().expect("session lock").sample.image_path.clone();
    let path = path.ok_or_else(|| ApiError::NoImage(id.clone()))?;
    let bytes = tokio::fs::read(&path).await.map_err(|_| ApiError::NoImage(id))?;
    Ok(([(header::CONTENT_TYPE, mime_for(&path))], bytes).into_response())
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/samples", get(list_samples))
        .route("/samples/{id}", get(get_sample))
        .route("/samples/{id}/edits", post(post_edit))
        .route("/samples/{id}/save", post(post_save))
        .route("/samples/{id}/trace", post(post_trace))
        .route("/samples/{id}/image", get(get_image))
        .with_state(state)
}
